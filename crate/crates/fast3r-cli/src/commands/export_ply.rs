//! `export-ply`: colored point cloud export for external viewers. Colors
//! come from the dataset's source images; points come either from the raw
//! global pointmaps or from the locals aligned onto them.

use std::path::Path;

use fast3r_core::align::{align_local_to_global, AlignOptions};
use fast3r_core::metrics::MetricsError;
use fast3r_core::synthgen::read_dataset;

use crate::commands::eval_pose::{bundle_from_gt, load_bundles};
use crate::error::SchemaError;
use crate::ply::{write_ply, ColoredPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudSource {
    Global,
    LocalAligned,
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    dataset: &Path,
    predictions: Option<&Path>,
    sample_index: usize,
    source: CloudSource,
    conf_threshold: Option<f64>,
    out: &Path,
) -> anyhow::Result<()> {
    let samples = read_dataset(dataset)?;
    let gt = samples.get(sample_index).ok_or_else(|| {
        SchemaError(format!(
            "sample {sample_index} out of range ({} samples)",
            samples.len()
        ))
    })?;
    let bundle = match predictions {
        Some(p) => {
            let mut bundles = load_bundles(p)?;
            if sample_index >= bundles.len() {
                return Err(SchemaError(format!(
                    "sample {sample_index} out of range ({} prediction samples)",
                    bundles.len()
                ))
                .into());
            }
            bundles.swap_remove(sample_index)
        }
        None => bundle_from_gt(gt),
    };
    if bundle.n_views() != gt.n_views() {
        return Err(SchemaError("prediction/dataset view counts differ".into()).into());
    }

    let (h, w) = (gt.height(), gt.width());
    let transforms: Vec<Option<fast3r_core::geometry::SimilarityTransform>> = match source {
        CloudSource::Global => vec![None; bundle.n_views()],
        CloudSource::LocalAligned => {
            let (_, alignment) = align_local_to_global(
                &bundle.local,
                &bundle.global,
                Some(&bundle.global_conf),
                &AlignOptions::default(),
            )?;
            alignment.transforms
        }
    };

    let mut points = Vec::new();
    for v in 0..bundle.n_views() {
        let image = gt.images.view(v);
        let conf = bundle.global_conf[v].raw();
        for i in 0..h * w {
            if !gt.mask(v)[i] {
                continue;
            }
            if let Some(thr) = conf_threshold {
                if conf[i] < thr {
                    continue;
                }
            }
            let position = match (source, &transforms[v]) {
                (CloudSource::Global, _) => bundle.global[v].points()[i],
                (CloudSource::LocalAligned, Some(t)) => t.apply(&bundle.local[v].points()[i]),
                (CloudSource::LocalAligned, None) => continue, // degenerate view skipped
            };
            let color = [
                (image[i * 3] * 255.0).round() as u8,
                (image[i * 3 + 1] * 255.0).round() as u8,
                (image[i * 3 + 2] * 255.0).round() as u8,
            ];
            points.push(ColoredPoint { position, color });
        }
    }
    if points.is_empty() {
        return Err(MetricsError::EmptyCloud.into());
    }
    write_ply(&points, out)?;
    println!("wrote {} points to {}", points.len(), out.display());
    Ok(())
}
