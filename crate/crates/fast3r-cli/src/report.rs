//! Metric report output: line-delimited `metric=<name> value=<f64>` files
//! plus a readable table on stdout.

use std::io::Write;
use std::path::Path;

pub struct MetricReport {
    rows: Vec<(String, f64)>,
}

impl MetricReport {
    pub fn new() -> Self {
        MetricReport { rows: Vec::new() }
    }

    pub fn push(&mut self, name: &str, value: f64) {
        self.rows.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn write_file(&self, path: &Path) -> anyhow::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (name, value) in &self.rows {
            writeln!(f, "metric={name} value={value}")?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn print_table(&self) {
        let width = self.rows.iter().map(|(n, _)| n.len()).max().unwrap_or(6);
        for (name, value) in &self.rows {
            println!("{name:<width$}  {value:.6}");
        }
    }
}

impl Default for MetricReport {
    fn default() -> Self {
        Self::new()
    }
}
