//! `train`: optimize a model on a dataset, with optional resume and a
//! views-per-sample sweep helper.

use std::path::Path;

use fast3r_core::model::{build_model, math::Real, Model, ModelConfig, ParameterStore, Precision};
use fast3r_core::synthgen::{read_dataset, GroundTruthSample};
use fast3r_core::trainer::{fit, restore, OptimState, TrainConfig};

use crate::error::ConfigError;

fn run_typed<T: Real>(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    dataset: &[GroundTruthSample],
    out_dir: &Path,
    resume: Option<&Path>,
) -> anyhow::Result<()> {
    let (model, mut store, mut state): (Model, ParameterStore<T>, OptimState<T>) = match resume {
        Some(ckpt_path) => {
            let (model, store, state) = restore::<T>(ckpt_path)?;
            if model.config() != model_cfg {
                return Err(ConfigError(format!(
                    "checkpoint config {:?} differs from the requested model config",
                    model.config()
                ))
                .into());
            }
            let state = state.ok_or_else(|| {
                ConfigError(format!(
                    "{} carries no optimizer state; cannot resume",
                    ckpt_path.display()
                ))
            })?;
            (model, store, state)
        }
        None => {
            let (model, store) = build_model::<T>(model_cfg, train_cfg.seed)?;
            let state = OptimState::zeros_like(&store);
            (model, store, state)
        }
    };

    let report = fit(&model, &mut store, &mut state, dataset, train_cfg, Some(out_dir))?;
    if let (Some(first), Some(last)) = (report.log.first(), report.log.last()) {
        println!(
            "trained steps {}..{}: loss {} -> {}",
            first.step, last.step, first.loss_total, last.loss_total
        );
    }
    if let Some(path) = report.final_checkpoint {
        println!("final checkpoint: {}", path.display());
    }
    Ok(())
}

pub fn run(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    dataset_path: &Path,
    out_dir: &Path,
    resume: Option<&Path>,
    views_sweep: &[usize],
) -> anyhow::Result<()> {
    let dataset = read_dataset(dataset_path)?;

    if views_sweep.is_empty() {
        return dispatch(model_cfg, train_cfg, &dataset, out_dir, resume);
    }

    if resume.is_some() {
        return Err(ConfigError("--resume cannot be combined with --views-sweep".into()).into());
    }
    for &n in views_sweep {
        let sweep_cfg = TrainConfig {
            views_per_sample: n,
            ..*train_cfg
        };
        let sub = out_dir.join(format!("views_{n}"));
        println!("== views_per_sample = {n} ==");
        dispatch(model_cfg, &sweep_cfg, &dataset, &sub, None)?;
    }
    Ok(())
}

fn dispatch(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    dataset: &[GroundTruthSample],
    out_dir: &Path,
    resume: Option<&Path>,
) -> anyhow::Result<()> {
    match model_cfg.precision {
        Precision::Single => run_typed::<f32>(model_cfg, train_cfg, dataset, out_dir, resume),
        Precision::Double => run_typed::<f64>(model_cfg, train_cfg, dataset, out_dir, resume),
    }
}
