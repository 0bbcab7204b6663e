//! Optimization loop: AdamW with decoupled weight decay, linear warmup into
//! cosine annealing, per-sample random index assignments and checkpointing.
//!
//! Training is bitwise deterministic for a fixed seed: every step derives its
//! RNG from (seed, step, sample position) alone, samples cycle the dataset in
//! a fixed order, and batch gradients reduce in sample order regardless of
//! how many workers ran the forward passes. Resuming from a checkpoint
//! therefore reproduces the remaining trajectory exactly.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::ImageSet;
use crate::losses::{self, LossConfig, LossError, LossReport};
use crate::model::math::Real;
use crate::model::{
    load_checkpoint, sample_index_assignment, save_checkpoint, Checkpoint, GradBuffer,
    IndexAssignment, Model, ModelError, ParameterStore, RawTensor,
};
use crate::synthgen::GroundTruthSample;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: u64, loss: f64 },
    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: u64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub batch_size: usize,
    /// Views consumed per sample (extra views in a sample are ignored).
    pub views_per_sample: usize,
    /// Index pool N' used when drawing assignments.
    pub pool_size: u32,
    /// Confidence regularizer weight, forwarded to the loss.
    pub alpha: f64,
    /// Sign of the confidence regularizer, forwarded to the loss.
    pub confidence_reg_sign: f64,
    pub seed: u64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub grad_clip_norm: f64,
    /// Emit a checkpoint every this many steps (0 = final only).
    pub checkpoint_interval: u64,
    /// Ablation switch: use consecutive slots 1..=N instead of pool sampling.
    pub consecutive_indices: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: 1e-4,
            warmup_steps: 0,
            total_steps: 1000,
            batch_size: 4,
            views_per_sample: 4,
            pool_size: 32,
            alpha: 0.2,
            confidence_reg_sign: 1.0,
            seed: 0,
            weight_decay: 0.05,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            grad_clip_norm: 1.0,
            checkpoint_interval: 0,
            consecutive_indices: false,
        }
    }
}

impl TrainConfig {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            alpha: self.alpha,
            confidence_reg_sign: self.confidence_reg_sign,
        }
    }

    /// Warmup defaults to 5% of the total when unset.
    pub fn effective_warmup(&self) -> u64 {
        self.warmup_steps.min(self.total_steps)
    }
}

/// First/second moment estimates per parameter plus the step counter.
#[derive(Debug, Clone)]
pub struct OptimState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
}

impl<T: Real> OptimState<T> {
    pub fn zeros_like(store: &ParameterStore<T>) -> Self {
        OptimState {
            m: store.entries().iter().map(|e| vec![T::zero(); e.weight.len()]).collect(),
            v: store.entries().iter().map(|e| vec![T::zero(); e.weight.len()]).collect(),
            step: 0,
        }
    }
}

/// Linear warmup to `base_lr`, then cosine annealing to zero.
pub fn cosine_lr(step: u64, cfg: &TrainConfig) -> f64 {
    let warmup = cfg.effective_warmup();
    if cfg.total_steps == 0 {
        return 0.0;
    }
    if step < warmup {
        return cfg.base_lr * step as f64 / warmup as f64;
    }
    if step >= cfg.total_steps {
        return 0.0;
    }
    let progress = (step - warmup) as f64 / (cfg.total_steps - warmup) as f64;
    0.5 * cfg.base_lr * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// One AdamW update from the gradients currently held in the store.
/// Weight decay is decoupled and applied before the moment-based step.
pub fn adamw_step<T: Real>(
    store: &mut ParameterStore<T>,
    state: &mut OptimState<T>,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<(), TrainError> {
    state.step += 1;
    let t = state.step;
    let b1 = T::fl(cfg.beta1);
    let b2 = T::fl(cfg.beta2);
    let one_m_b1 = T::fl(1.0 - cfg.beta1);
    let one_m_b2 = T::fl(1.0 - cfg.beta2);
    let bc1 = T::fl(1.0 / (1.0 - cfg.beta1.powi(t as i32)));
    let bc2 = T::fl(1.0 / (1.0 - cfg.beta2.powi(t as i32)));
    let lr_t = T::fl(lr);
    let eps = T::fl(cfg.eps);
    let decay = T::fl(1.0 - lr * cfg.weight_decay);

    for (i, e) in store.entries_mut().iter_mut().enumerate() {
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        for j in 0..e.weight.len() {
            let g = e.grad[j];
            if !g.is_finite() {
                return Err(TrainError::NonFiniteGradient { step: t });
            }
            e.weight[j] *= decay;
            m[j] = b1 * m[j] + one_m_b1 * g;
            v[j] = b2 * v[j] + one_m_b2 * g * g;
            let m_hat = m[j] * bc1;
            let v_hat = v[j] * bc2;
            e.weight[j] = e.weight[j] - lr_t * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Deterministic per-(step, sample) RNG seed.
fn sample_seed(seed: u64, step: u64, slot: usize) -> u64 {
    splitmix(seed ^ splitmix(step.wrapping_mul(0x51_7C_C1B7_2722_0A95)) ^ (slot as u64))
}

/// The subset of a ground-truth sample a training step consumes.
struct SampleView<'a> {
    images: ImageSet,
    gt: &'a GroundTruthSample,
    n_views: usize,
}

fn clip_views<'a>(sample: &'a GroundTruthSample, max_views: usize) -> SampleView<'a> {
    let n = sample.n_views().min(max_views.max(1));
    let (h, w) = (sample.height(), sample.width());
    let mut data = Vec::with_capacity(n * h * w * 3);
    for v in 0..n {
        data.extend_from_slice(sample.images.view(v));
    }
    SampleView {
        images: ImageSet::new(n, h, w, data).expect("subset of a valid image set"),
        gt: sample,
        n_views: n,
    }
}

fn assignment_for(
    cfg: &TrainConfig,
    n_views: usize,
    rng: &mut ChaCha12Rng,
) -> Result<IndexAssignment, ModelError> {
    if cfg.consecutive_indices {
        IndexAssignment::consecutive(n_views, cfg.pool_size)
    } else {
        sample_index_assignment(n_views, cfg.pool_size, rng)
    }
}

/// Forward + loss + backward for one sample; returns its loss report and a
/// private gradient buffer.
fn sample_pass<T: Real>(
    model: &Model,
    store: &ParameterStore<T>,
    view: &SampleView<'_>,
    assignment: &IndexAssignment,
    loss_cfg: &LossConfig,
) -> Result<(LossReport, GradBuffer<T>), TrainError> {
    let (raw, tape) = model.forward(store, &view.images, assignment)?;
    let bundle = raw.to_bundle();
    let n = view.n_views;
    let report = losses::total_loss(
        &bundle.local,
        &bundle.local_conf,
        &bundle.global,
        &bundle.global_conf,
        &view.gt.local_pointmaps[..n],
        &view.gt.global_pointmaps[..n],
        loss_cfg,
    )?;
    let grads = losses::loss_gradients(
        &bundle.local,
        &bundle.local_conf,
        &bundle.global,
        &bundle.global_conf,
        &view.gt.local_pointmaps[..n],
        &view.gt.global_pointmaps[..n],
        loss_cfg,
    )?;
    let mut gbuf = GradBuffer::zeros_like(store);
    model.backward(store, &tape, &grads, &mut gbuf)?;
    Ok((report, gbuf))
}

/// Aggregated numbers for one optimization step.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub step: u64,
    pub lr: f64,
    pub loss_total: f64,
    pub loss_global: f64,
    pub loss_local: f64,
    pub grad_norm: f64,
}

impl StepStats {
    pub fn log_line(&self) -> String {
        format!(
            "step={} lr={} loss_total={} loss_global={} loss_local={}",
            self.step, self.lr, self.loss_total, self.loss_global, self.loss_local
        )
    }
}

/// One optimization step over a batch of samples.
///
/// Each sample draws its own index assignment; per-sample passes may run in
/// parallel, and the batch gradient is the mean reduced in sample order.
pub fn train_step<T: Real>(
    model: &Model,
    store: &mut ParameterStore<T>,
    state: &mut OptimState<T>,
    samples: &[&GroundTruthSample],
    step: u64,
    cfg: &TrainConfig,
) -> Result<StepStats, TrainError> {
    let loss_cfg = cfg.loss_config();
    let views: Vec<SampleView<'_>> = samples
        .iter()
        .map(|s| clip_views(s, cfg.views_per_sample))
        .collect();
    let assignments: Vec<IndexAssignment> = views
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut rng = ChaCha12Rng::seed_from_u64(sample_seed(cfg.seed, step, i));
            assignment_for(cfg, v.n_views, &mut rng)
        })
        .collect::<Result<_, _>>()?;

    let passes: Vec<Result<(LossReport, GradBuffer<T>), TrainError>> = views
        .par_iter()
        .zip(assignments.par_iter())
        .map(|(view, assignment)| sample_pass(model, store, view, assignment, &loss_cfg))
        .collect();

    let mut total = 0.0;
    let mut global = 0.0;
    let mut local = 0.0;
    let mut batch_grads: Option<GradBuffer<T>> = None;
    let inv_b = T::fl(1.0 / samples.len() as f64);
    for pass in passes {
        let (report, gbuf) = pass?;
        total += report.total;
        global += report.global_sum();
        local += report.local_sum();
        match &mut batch_grads {
            None => {
                let mut g = gbuf;
                g.scale(inv_b);
                batch_grads = Some(g);
            }
            Some(acc) => acc.add_scaled(&gbuf, inv_b),
        }
    }
    let b = samples.len() as f64;
    total /= b;
    global /= b;
    local /= b;
    if !total.is_finite() {
        return Err(TrainError::Diverged { step, loss: total });
    }

    let mut grads = batch_grads.expect("non-empty batch");
    if !grads.all_finite() {
        return Err(TrainError::NonFiniteGradient { step });
    }
    let norm = grads.global_norm();
    if cfg.grad_clip_norm > 0.0 && norm > cfg.grad_clip_norm {
        grads.scale(T::fl(cfg.grad_clip_norm / norm));
    }
    store.set_grads(&grads);

    let lr = cosine_lr(step, cfg);
    adamw_step(store, state, lr, cfg)?;

    Ok(StepStats {
        step,
        lr,
        loss_total: total,
        loss_global: global,
        loss_local: local,
        grad_norm: norm,
    })
}

/// Serializes optimizer moments as checkpoint side tensors.
fn optim_tensors<T: Real>(store: &ParameterStore<T>, state: &OptimState<T>) -> Vec<RawTensor> {
    let mut out = Vec::with_capacity(2 * store.len() + 1);
    for (i, e) in store.entries().iter().enumerate() {
        out.push(RawTensor::from_slice(
            &format!("adamw.m.{}", e.name),
            &e.shape,
            &state.m[i],
        ));
        out.push(RawTensor::from_slice(
            &format!("adamw.v.{}", e.name),
            &e.shape,
            &state.v[i],
        ));
    }
    out.push(RawTensor {
        name: "adamw.step".into(),
        dtype: crate::model::Dtype::F64,
        shape: vec![1],
        data: vec![state.step as f64],
    });
    out
}

/// Restores optimizer state from checkpoint side tensors, if present.
pub fn optim_state_from_checkpoint<T: Real>(
    ckpt: &Checkpoint,
    store: &ParameterStore<T>,
) -> Option<OptimState<T>> {
    let step = ckpt.tensor("adamw.step")?.data[0] as u64;
    let mut state = OptimState::zeros_like(store);
    state.step = step;
    for (i, e) in store.entries().iter().enumerate() {
        let m = ckpt.tensor(&format!("adamw.m.{}", e.name))?;
        let v = ckpt.tensor(&format!("adamw.v.{}", e.name))?;
        if m.data.len() != e.weight.len() || v.data.len() != e.weight.len() {
            return None;
        }
        state.m[i] = m.data.iter().map(|&x| T::fl(x)).collect();
        state.v[i] = v.data.iter().map(|&x| T::fl(x)).collect();
    }
    Some(state)
}

/// Full training run result.
pub struct FitReport {
    pub log: Vec<StepStats>,
    pub final_checkpoint: Option<PathBuf>,
}

/// Runs `total_steps` optimization steps, cycling the dataset in order.
///
/// When `out_dir` is given, a `train.log` line per step and periodic
/// checkpoints `step_<N>.f3rckpt` are written there. `state.step` picks the
/// starting step, so resuming from a loaded checkpoint continues the exact
/// trajectory.
pub fn fit<T: Real>(
    model: &Model,
    store: &mut ParameterStore<T>,
    state: &mut OptimState<T>,
    dataset: &[GroundTruthSample],
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<FitReport, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut log_file = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join("train.log");
            let file = if state.step > 0 && path.exists() {
                std::fs::OpenOptions::new().append(true).open(&path)?
            } else {
                std::fs::File::create(&path)?
            };
            Some(std::io::BufWriter::new(file))
        }
        None => None,
    };

    let mut log = Vec::new();
    let start = state.step;
    for step in start..cfg.total_steps {
        let batch: Vec<&GroundTruthSample> = (0..cfg.batch_size.max(1))
            .map(|i| {
                let idx = (step as usize)
                    .wrapping_mul(cfg.batch_size.max(1))
                    .wrapping_add(i)
                    % dataset.len();
                &dataset[idx]
            })
            .collect();
        let stats = train_step(model, store, state, &batch, step, cfg)?;
        if let Some(f) = log_file.as_mut() {
            writeln!(f, "{}", stats.log_line())?;
        }
        log.push(stats);

        if let Some(dir) = out_dir {
            let due = cfg.checkpoint_interval > 0 && state.step % cfg.checkpoint_interval == 0;
            if due && state.step < cfg.total_steps {
                let path = dir.join(format!("step_{}.f3rckpt", state.step));
                save_checkpoint(&path, model.config(), store, &optim_tensors(store, state))?;
            }
        }
    }
    if let Some(f) = log_file.as_mut() {
        f.flush()?;
    }

    let final_checkpoint = match out_dir {
        Some(dir) => {
            let path = dir.join(format!("step_{}.f3rckpt", cfg.total_steps));
            save_checkpoint(&path, model.config(), store, &optim_tensors(store, state))?;
            Some(path)
        }
        None => None,
    };
    Ok(FitReport {
        log,
        final_checkpoint,
    })
}

/// Loads a checkpoint and reconstructs (model, store, optimizer state).
pub fn restore<T: Real>(
    path: &Path,
) -> Result<(Model, ParameterStore<T>, Option<OptimState<T>>), TrainError> {
    let ckpt = load_checkpoint(path)?;
    let (model, mut store) = crate::model::build_model::<T>(&ckpt.config, 0)?;
    store.load_weights(&ckpt.tensors)?;
    let state = optim_state_from_checkpoint(&ckpt, &store);
    Ok((model, store, state))
}
