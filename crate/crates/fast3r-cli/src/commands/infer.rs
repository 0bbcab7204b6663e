//! `infer`: one forward pass per sample, predictions written as a bundle
//! file.

use std::path::Path;

use fast3r_core::geometry::ImageSet;
use fast3r_core::model::{
    load_checkpoint, math::Real, sample_index_assignment, IndexAssignment, Model,
    ParameterStore, PredictionBundle, Precision,
};
use fast3r_core::synthgen::read_dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::predfile::write_predictions;

fn infer_typed<T: Real>(
    model: &Model,
    store: &ParameterStore<T>,
    dataset_path: &Path,
    views: Option<usize>,
    consecutive: bool,
    seed: u64,
) -> anyhow::Result<Vec<PredictionBundle>> {
    let samples = read_dataset(dataset_path)?;
    let mut bundles = Vec::with_capacity(samples.len());
    let pool = model.config().pool_size;
    for (si, sample) in samples.iter().enumerate() {
        let n = views.unwrap_or(sample.n_views()).min(sample.n_views());
        let (h, w) = (sample.height(), sample.width());
        let mut data = Vec::with_capacity(n * h * w * 3);
        for v in 0..n {
            data.extend_from_slice(sample.images.view(v));
        }
        let images = ImageSet::new(n, h, w, data).expect("subset of valid images");
        let assignment = if consecutive {
            IndexAssignment::consecutive(n, pool)?
        } else {
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ (si as u64).wrapping_mul(0xA5A5_A5A5));
            sample_index_assignment(n, pool, &mut rng)?
        };
        bundles.push(model.forward_bundle(store, &images, &assignment)?);
    }
    Ok(bundles)
}

pub fn run(
    checkpoint: &Path,
    dataset: &Path,
    out: &Path,
    views: Option<usize>,
    consecutive: bool,
    seed: u64,
) -> anyhow::Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let bundles = match ckpt.config.precision {
        Precision::Single => {
            let (model, mut store) = fast3r_core::model::build_model::<f32>(&ckpt.config, 0)?;
            store.load_weights(&ckpt.tensors)?;
            infer_typed(&model, &store, dataset, views, consecutive, seed)?
        }
        Precision::Double => {
            let (model, mut store) = fast3r_core::model::build_model::<f64>(&ckpt.config, 0)?;
            store.load_weights(&ckpt.tensors)?;
            infer_typed(&model, &store, dataset, views, consecutive, seed)?
        }
    };
    write_predictions(&bundles, out)?;
    println!(
        "wrote {} prediction bundles to {}",
        bundles.len(),
        out.display()
    );
    Ok(())
}
