//! `benchmark`: wall time and peak memory of one forward pass per view
//! count. Configurations whose activation estimate exceeds the memory cap
//! are reported as failed rows rather than aborting the process.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use fast3r_core::geometry::ImageSet;
use fast3r_core::model::{
    load_checkpoint, math::Real, sample_index_assignment, Model, ParameterStore, Precision,
};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone)]
pub struct BenchmarkRow {
    pub n_views: usize,
    pub tokens: usize,
    pub wall_time_seconds: f64,
    pub peak_resident_bytes: u64,
    pub failed: Option<String>,
}

/// Peak resident set size of this process from /proc, falling back to the
/// current RSS on kernels without the high-water field (0 if unavailable).
fn peak_rss_bytes() -> u64 {
    let Ok(status) = std::fs::read_to_string("/proc/self/status") else {
        return 0;
    };
    let field = |name: &str| -> Option<u64> {
        status.lines().find_map(|line| {
            line.strip_prefix(name).map(|rest| {
                rest.trim().trim_end_matches("kB").trim().parse().unwrap_or(0)
            })
        })
    };
    field("VmHWM:").or_else(|| field("VmRSS:")).unwrap_or(0) * 1024
}

fn bench_typed<T: Real>(
    model: &Model,
    store: &ParameterStore<T>,
    n_views: usize,
    side: usize,
    mem_limit_bytes: u64,
    seed: u64,
) -> BenchmarkRow {
    let cfg = model.config();
    let tokens = n_views * cfg.tokens_per_view(side, side);
    let mut row = BenchmarkRow {
        n_views,
        tokens,
        wall_time_seconds: 0.0,
        peak_resident_bytes: 0,
        failed: None,
    };

    if n_views as u32 > cfg.pool_size {
        row.failed = Some(format!("exceeds index pool {}", cfg.pool_size));
        return row;
    }
    let estimate = model.tape_bytes_estimate(n_views, side, side, std::mem::size_of::<T>());
    if estimate > mem_limit_bytes {
        row.failed = Some(format!(
            "estimated {estimate} activation bytes exceed the cap {mem_limit_bytes}"
        ));
        return row;
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let data: Vec<f32> = (0..n_views * side * side * 3)
        .map(|_| rng.gen_range(0.0..1.0))
        .collect();
    let images = ImageSet::new(n_views, side, side, data).expect("generated in range");
    let assignment = match sample_index_assignment(n_views, cfg.pool_size, &mut rng) {
        Ok(a) => a,
        Err(e) => {
            row.failed = Some(e.to_string());
            return row;
        }
    };

    // Two timed runs, keep the faster (first run pays allocator warmup).
    let mut best = f64::INFINITY;
    for _ in 0..2 {
        let t0 = Instant::now();
        match model.forward(store, &images, &assignment) {
            Ok(_) => best = best.min(t0.elapsed().as_secs_f64()),
            Err(e) => {
                row.failed = Some(e.to_string());
                return row;
            }
        }
    }
    row.wall_time_seconds = best;
    row.peak_resident_bytes = peak_rss_bytes();
    row
}

pub fn run(
    checkpoint: &Path,
    mut view_counts: Vec<usize>,
    side: usize,
    mem_limit_gb: f64,
    seed: u64,
    out: Option<&Path>,
) -> anyhow::Result<Vec<BenchmarkRow>> {
    view_counts.sort_unstable();
    view_counts.dedup();
    let ckpt = load_checkpoint(checkpoint)?;
    let mem_limit = (mem_limit_gb * 1e9) as u64;

    let rows: Vec<BenchmarkRow> = match ckpt.config.precision {
        Precision::Single => {
            let (model, mut store) = fast3r_core::model::build_model::<f32>(&ckpt.config, 0)?;
            store.load_weights(&ckpt.tensors)?;
            view_counts
                .iter()
                .map(|&n| bench_typed(&model, &store, n, side, mem_limit, seed))
                .collect()
        }
        Precision::Double => {
            let (model, mut store) = fast3r_core::model::build_model::<f64>(&ckpt.config, 0)?;
            store.load_weights(&ckpt.tensors)?;
            view_counts
                .iter()
                .map(|&n| bench_typed(&model, &store, n, side, mem_limit, seed))
                .collect()
        }
    };

    let csv = render_csv(&rows);
    print!("{csv}");
    if let Some(path) = out {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(csv.as_bytes())?;
        f.flush()?;
    }
    Ok(rows)
}

pub fn render_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from("n_views,tokens,wall_time_seconds,peak_resident_bytes,failed\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n_views,
            r.tokens,
            r.wall_time_seconds,
            r.peak_resident_bytes,
            r.failed.as_deref().unwrap_or("")
        ));
    }
    out
}
