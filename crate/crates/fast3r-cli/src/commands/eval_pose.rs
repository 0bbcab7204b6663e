//! `eval-pose`: recover cameras from predicted global pointmaps and score
//! them against ground truth with RRA/RTA/mAA.
//!
//! The predictions argument accepts either a prediction bundle file or a
//! dataset file; in the latter case the ground-truth pointmaps themselves
//! are used as predictions (with uniform confidence), which exercises the
//! oracle path.

use std::io::Write;
use std::path::Path;

use fast3r_core::geometry::{CameraModel, ConfidenceMap};
use fast3r_core::metrics::{pose_metrics, MetricsError};
use fast3r_core::model::PredictionBundle;
use fast3r_core::pose::{estimate_all_cameras, PoseEstimate, RansacConfig};
use fast3r_core::synthgen::{read_dataset, GroundTruthSample, DATASET_MAGIC};

use crate::error::SchemaError;
use crate::predfile::{file_magic, read_predictions, PRED_MAGIC};
use crate::report::MetricReport;

/// Loads predictions from either container format.
pub fn load_bundles(path: &Path) -> anyhow::Result<Vec<PredictionBundle>> {
    let magic = file_magic(path)?;
    if &magic == PRED_MAGIC {
        return read_predictions(path);
    }
    if &magic == DATASET_MAGIC {
        let samples = read_dataset(path)?;
        return Ok(samples.iter().map(bundle_from_gt).collect());
    }
    Err(SchemaError(format!(
        "{}: neither a prediction nor a dataset file",
        path.display()
    ))
    .into())
}

/// Ground truth reinterpreted as a prediction bundle with flat confidence.
pub fn bundle_from_gt(sample: &GroundTruthSample) -> PredictionBundle {
    let (h, w) = (sample.height(), sample.width());
    PredictionBundle {
        local: sample.local_pointmaps.clone(),
        global: sample.global_pointmaps.clone(),
        local_conf: (0..sample.n_views())
            .map(|_| ConfidenceMap::uniform(h, w, 0.0))
            .collect(),
        global_conf: (0..sample.n_views())
            .map(|_| ConfidenceMap::uniform(h, w, 0.0))
            .collect(),
    }
}

pub struct PoseEvalOutcome {
    pub report: MetricReport,
    pub estimates: Vec<Vec<Option<PoseEstimate>>>,
}

pub fn evaluate(
    bundles: &[PredictionBundle],
    gt: &[GroundTruthSample],
    cfg: &RansacConfig,
    shared_camera: bool,
) -> anyhow::Result<PoseEvalOutcome> {
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

    let thresholds = [5.0, 15.0, 30.0];
    let mut weighted = vec![(0.0, 0.0); thresholds.len() * 2]; // (sum, pairs)
    let mut maa_sum = 0.0;
    let mut maa_pairs = 0.0;
    let mut failed_views = 0usize;
    let mut all_estimates = Vec::with_capacity(bundles.len());

    for (b, g) in bundles.iter().zip(gt) {
        if b.n_views() != g.n_views() {
            return Err(SchemaError(format!(
                "sample has {} predicted views but {} ground-truth views",
                b.n_views(),
                g.n_views()
            ))
            .into());
        }
        let results = estimate_all_cameras(&b.global, &b.global_conf, cfg, shared_camera);
        let mut pred_cams: Vec<CameraModel> = Vec::new();
        let mut gt_cams: Vec<CameraModel> = Vec::new();
        let mut estimates = Vec::with_capacity(results.len());
        for (v, r) in results.into_iter().enumerate() {
            match r {
                Ok(est) => {
                    pred_cams.push(est.camera);
                    gt_cams.push(g.cameras[v]);
                    estimates.push(Some(est));
                }
                Err(e) => {
                    eprintln!("warning: view {v} pose estimation failed: {e}");
                    failed_views += 1;
                    estimates.push(None);
                }
            }
        }
        all_estimates.push(estimates);
        if pred_cams.len() < 2 {
            return Err(MetricsError::TooFewViews(pred_cams.len()).into());
        }
        let m = pose_metrics(&pred_cams, &gt_cams, &thresholds)?;
        let pairs = (pred_cams.len() * (pred_cams.len() - 1) / 2) as f64;
        for (i, (_, f)) in m.rra_at.iter().enumerate() {
            weighted[i].0 += f * pairs;
            weighted[i].1 += pairs;
        }
        for (i, (_, f)) in m.rta_at.iter().enumerate() {
            weighted[thresholds.len() + i].0 += f * pairs;
            weighted[thresholds.len() + i].1 += pairs;
        }
        maa_sum += m.maa30 * pairs;
        maa_pairs += pairs;
    }

    let mut report = MetricReport::new();
    for (i, t) in thresholds.iter().enumerate() {
        report.push(&format!("rra@{t}"), weighted[i].0 / weighted[i].1);
    }
    for (i, t) in thresholds.iter().enumerate() {
        let w = &weighted[thresholds.len() + i];
        report.push(&format!("rta@{t}"), w.0 / w.1);
    }
    report.push("maa30", maa_sum / maa_pairs);
    report.push("failed_views", failed_views as f64);
    Ok(PoseEvalOutcome {
        report,
        estimates: all_estimates,
    })
}

/// Writes the camera-to-world estimates in the documented text layout.
pub fn write_pose_file(
    estimates: &[Vec<Option<PoseEstimate>>],
    path: &Path,
) -> anyhow::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "# camera-to-world poses; world frame = camera of view 0; R row-major"
    )?;
    for (s, views) in estimates.iter().enumerate() {
        for (v, est) in views.iter().enumerate() {
            let Some(est) = est else {
                writeln!(f, "sample={s} view={v} failed")?;
                continue;
            };
            let k = est.camera.intrinsics;
            let r = est.camera.pose.rotation.matrix();
            let t = est.camera.pose.translation;
            let r_flat: Vec<String> = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| format!("{}", r[(i, j)]))
                .collect();
            writeln!(
                f,
                "sample={s} view={v} f={} cx={} cy={} R={} t={} {} {} inliers={} outliers={}",
                k.focal,
                k.cx,
                k.cy,
                r_flat.join(" "),
                t.x,
                t.y,
                t.z,
                est.inlier_count,
                est.outlier_count
            )?;
        }
    }
    f.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    predictions: &Path,
    ground_truth: &Path,
    cfg: &RansacConfig,
    shared_camera: bool,
    out: Option<&Path>,
    poses_out: Option<&Path>,
) -> anyhow::Result<()> {
    let bundles = load_bundles(predictions)?;
    let gt = read_dataset(ground_truth)?;
    let outcome = evaluate(&bundles, &gt, cfg, shared_camera)?;
    outcome.report.print_table();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        outcome.report.write_file(&dir.join("pose_metrics.txt"))?;
    }
    if let Some(p) = poses_out {
        write_pose_file(&outcome.estimates, p)?;
    }
    Ok(())
}
