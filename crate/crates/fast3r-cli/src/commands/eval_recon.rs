//! `eval-recon`: accuracy/completion of the predicted geometry against
//! ground truth, computed twice — from the raw global pointmaps and from the
//! local pointmaps aligned onto the global ones — plus depth statistics.

use std::path::Path;

use fast3r_core::align::{align_local_to_global, AlignOptions};
use fast3r_core::geometry::Vec3;
use fast3r_core::metrics::{depth_metrics, reconstruction_metrics};
use fast3r_core::model::PredictionBundle;
use fast3r_core::synthgen::{read_dataset, GroundTruthSample};

use crate::commands::eval_pose::load_bundles;
use crate::error::SchemaError;
use crate::report::MetricReport;

/// Predicted points at ground-truth-valid pixels.
fn masked_cloud(maps: &[fast3r_core::geometry::Pointmap], gt: &GroundTruthSample) -> Vec<Vec3> {
    let mut cloud = Vec::new();
    for (v, pm) in maps.iter().enumerate() {
        for (i, &valid) in gt.mask(v).iter().enumerate() {
            if valid {
                cloud.push(pm.points()[i]);
            }
        }
    }
    cloud
}

pub fn evaluate(
    bundles: &[PredictionBundle],
    gt: &[GroundTruthSample],
) -> anyhow::Result<MetricReport> {
    if bundles.len() != gt.len() {
        return Err(SchemaError(format!(
            "{} prediction samples vs {} ground-truth samples",
            bundles.len(),
            gt.len()
        ))
        .into());
    }
    if bundles.is_empty() {
        return Err(SchemaError("no samples to evaluate".into()).into());
    }

    let mut acc_g = 0.0;
    let mut comp_g = 0.0;
    let mut acc_l = 0.0;
    let mut comp_l = 0.0;
    let mut rel = 0.0;
    let mut tau = 0.0;
    for (b, g) in bundles.iter().zip(gt) {
        if b.n_views() != g.n_views() {
            return Err(SchemaError(format!(
                "sample has {} predicted views but {} ground-truth views",
                b.n_views(),
                g.n_views()
            ))
            .into());
        }
        let gt_cloud = masked_cloud(&g.global_pointmaps, g);

        // (a) raw global head output.
        let global_cloud = masked_cloud(&b.global, g);
        let (ag, cg) = reconstruction_metrics(&global_cloud, &gt_cloud)?;

        // (b) local head aligned onto the global frame.
        let (_, alignment) = align_local_to_global(
            &b.local,
            &b.global,
            Some(&b.global_conf),
            &AlignOptions::default(),
        )?;
        let mut aligned_cloud = Vec::new();
        for (v, t) in alignment.transforms.iter().enumerate() {
            let Some(t) = t else { continue };
            for (i, &valid) in g.mask(v).iter().enumerate() {
                if valid {
                    aligned_cloud.push(t.apply(&b.local[v].points()[i]));
                }
            }
        }
        let (al, cl) = reconstruction_metrics(&aligned_cloud, &gt_cloud)?;

        let (r, ta) = depth_metrics(&b.local, &g.local_pointmaps)?;

        acc_g += ag;
        comp_g += cg;
        acc_l += al;
        comp_l += cl;
        rel += r;
        tau += ta;
    }
    let n = bundles.len() as f64;
    let mut report = MetricReport::new();
    report.push("acc_global", acc_g / n);
    report.push("comp_global", comp_g / n);
    report.push("acc_local_aligned", acc_l / n);
    report.push("comp_local_aligned", comp_l / n);
    report.push("delta_acc", (acc_g - acc_l) / n);
    report.push("delta_comp", (comp_g - comp_l) / n);
    report.push("depth_rel", rel / n);
    report.push("depth_tau", tau / n);
    Ok(report)
}

pub fn run(predictions: &Path, ground_truth: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let bundles = load_bundles(predictions)?;
    let gt = read_dataset(ground_truth)?;
    let report = evaluate(&bundles, &gt)?;
    report.print_table();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        report.write_file(&dir.join("recon_metrics.txt"))?;
    }
    Ok(())
}
