//! The fusion network: per-image tokenizer, image-index embeddings,
//! all-to-all fusion transformer and dual pointmap/confidence heads, with
//! reverse-mode gradients for every stage.
//!
//! One forward pass maps N unordered views to N local and N global pointmaps
//! plus raw confidence grids, simultaneously. Image content never determines
//! the global frame; slot 1 of the index assignment does.

mod checkpoint;
mod embed;
mod layers;
pub mod math;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, RawTensor};
pub use embed::{index_embedding, pos2d_embedding, sample_index_assignment, IndexAssignment};
pub use layers::{trunc_normal, Block, BlockCache, Linear, Mlp, MlpCache};
pub use params::{Dtype, GradBuffer, ParamId, ParameterStore};

use crate::geometry::{ConfidenceMap, Frame, ImageSet, Pointmap, Vec3, CONFIDENCE_CLAMP};
use crate::losses::LossGradients;
use math::Real;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape error: {0}")]
    ShapeError(String),
    #[error("non-finite activation after {0}")]
    NonFiniteActivation(String),
    #[error("{n_views} views exceed the index pool of {pool_size}")]
    PoolTooSmall { n_views: usize, pool_size: u32 },
    #[error("stale tape: parameters changed since the forward pass")]
    StaleTape,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint file: {0}")]
    Format(String),
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub patch_size: usize,
    pub embed_dim: usize,
    pub fusion_layers: usize,
    pub attention_heads: usize,
    pub mlp_ratio: f64,
    pub head_hidden_dim: usize,
    /// Index pool size N'; inference may use up to this many views.
    pub pool_size: u32,
    pub max_train_views: usize,
    pub precision: Precision,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            patch_size: 4,
            embed_dim: 64,
            fusion_layers: 4,
            attention_heads: 4,
            mlp_ratio: 4.0,
            head_hidden_dim: 128,
            pool_size: 32,
            max_train_views: 16,
            precision: Precision::Single,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.embed_dim == 0 || self.embed_dim % self.attention_heads != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "embed_dim {} must be a positive multiple of attention_heads {}",
                self.embed_dim, self.attention_heads
            )));
        }
        if self.embed_dim % 4 != 0 {
            return Err(ModelError::InvalidConfig(
                "embed_dim must be divisible by 4 for the 2d position embedding".into(),
            ));
        }
        if self.patch_size == 0 {
            return Err(ModelError::InvalidConfig("patch_size must be positive".into()));
        }
        if !(self.mlp_ratio.is_finite() && self.mlp_ratio > 0.0) {
            return Err(ModelError::InvalidConfig("mlp_ratio must be positive".into()));
        }
        if self.head_hidden_dim == 0 || self.fusion_layers == 0 {
            return Err(ModelError::InvalidConfig(
                "fusion_layers and head_hidden_dim must be positive".into(),
            ));
        }
        if (self.pool_size as usize) < self.max_train_views {
            return Err(ModelError::InvalidConfig(format!(
                "pool_size {} must be at least max_train_views {}",
                self.pool_size, self.max_train_views
            )));
        }
        Ok(())
    }

    pub fn mlp_hidden(&self) -> usize {
        (self.embed_dim as f64 * self.mlp_ratio).round().max(1.0) as usize
    }

    pub fn tokens_per_view(&self, h: usize, w: usize) -> usize {
        (h / self.patch_size) * (w / self.patch_size)
    }
}

/// Raw network outputs in model precision, one grid per view.
#[derive(Debug, Clone)]
pub struct RawOutput<T> {
    pub n_views: usize,
    pub height: usize,
    pub width: usize,
    /// `n * h * w * 3`.
    pub local_xyz: Vec<T>,
    /// `n * h * w`, clamped to the confidence range.
    pub local_sigma: Vec<T>,
    pub global_xyz: Vec<T>,
    pub global_sigma: Vec<T>,
}

impl<T: Real> RawOutput<T> {
    pub fn to_bundle(&self) -> PredictionBundle {
        let (n, h, w) = (self.n_views, self.height, self.width);
        let px = h * w;
        let mut bundle = PredictionBundle {
            local: Vec::with_capacity(n),
            local_conf: Vec::with_capacity(n),
            global: Vec::with_capacity(n),
            global_conf: Vec::with_capacity(n),
        };
        for v in 0..n {
            let grab_xyz = |src: &[T]| -> Vec<Vec3> {
                (0..px)
                    .map(|i| {
                        let o = (v * px + i) * 3;
                        Vec3::new(src[o].db(), src[o + 1].db(), src[o + 2].db())
                    })
                    .collect()
            };
            let grab_sigma =
                |src: &[T]| -> Vec<f64> { (0..px).map(|i| src[v * px + i].db()).collect() };
            bundle.local.push(
                Pointmap::new(h, w, Frame::Local, grab_xyz(&self.local_xyz), vec![true; px])
                    .expect("forward output is finite"),
            );
            bundle.global.push(
                Pointmap::new(h, w, Frame::Global, grab_xyz(&self.global_xyz), vec![true; px])
                    .expect("forward output is finite"),
            );
            bundle.local_conf.push(
                ConfidenceMap::new(h, w, grab_sigma(&self.local_sigma))
                    .expect("forward output is finite"),
            );
            bundle.global_conf.push(
                ConfidenceMap::new(h, w, grab_sigma(&self.global_sigma))
                    .expect("forward output is finite"),
            );
        }
        bundle
    }
}

/// Model outputs as geometry types: N local and N global pointmaps with raw
/// confidence maps. Pointmaps are dense (all pixels valid).
#[derive(Debug, Clone)]
pub struct PredictionBundle {
    pub local: Vec<Pointmap>,
    pub local_conf: Vec<ConfidenceMap>,
    pub global: Vec<Pointmap>,
    pub global_conf: Vec<ConfidenceMap>,
}

impl PredictionBundle {
    pub fn n_views(&self) -> usize {
        self.local.len()
    }
}

/// Saved activations from one traced forward pass. Consumed by
/// [`Model::backward`]; invalidated by any parameter mutation.
pub struct Tape<T> {
    version: u64,
    n_views: usize,
    height: usize,
    width: usize,
    patches: Vec<T>,
    enc_ln: layers::LnCache<T>,
    enc_mlp: layers::MlpCache<T>,
    blocks: Vec<BlockCache<T>>,
    final_ln: layers::LnCache<T>,
    head_local: layers::MlpCache<T>,
    head_global: layers::MlpCache<T>,
    sigma_pre_local: Vec<T>,
    sigma_pre_global: Vec<T>,
}

/// Architecture bound to parameter ids. Build once per config; run against
/// the store created with it by [`build_model`].
#[derive(Debug, Clone)]
pub struct Model {
    cfg: ModelConfig,
    patch_proj: Linear,
    enc_ln: layers::LayerNorm,
    enc_mlp: Mlp,
    blocks: Vec<Block>,
    final_ln: layers::LayerNorm,
    head_local: Mlp,
    head_global: Mlp,
}

/// Builds the architecture and a freshly initialized parameter store.
/// Projections start truncated-normal (std 0.02), residual output
/// projections at zero, biases at zero, norm gains at one.
pub fn build_model<T: Real>(
    cfg: &ModelConfig,
    init_seed: u64,
) -> Result<(Model, ParameterStore<T>), ModelError> {
    cfg.validate()?;
    let mut store = ParameterStore::new();
    let mut rng = ChaCha12Rng::seed_from_u64(init_seed);
    let d = cfg.embed_dim;
    let pv = cfg.patch_size * cfg.patch_size * 3;
    let out_dim = cfg.patch_size * cfg.patch_size * 4;

    let patch_proj = Linear::init(&mut store, "enc.patch", pv, d, &mut rng, false);
    let enc_ln = layers::LayerNorm::init(&mut store, "enc.norm", d);
    let enc_mlp = Mlp::init(&mut store, "enc.mlp", d, cfg.mlp_hidden(), d, &mut rng, true);
    let blocks = (0..cfg.fusion_layers)
        .map(|i| {
            Block::init(
                &mut store,
                &format!("fusion.block{i}"),
                d,
                cfg.attention_heads,
                cfg.mlp_hidden(),
                &mut rng,
            )
        })
        .collect();
    let final_ln = layers::LayerNorm::init(&mut store, "fusion.norm", d);
    let head_local = Mlp::init(&mut store, "head.local", d, cfg.head_hidden_dim, out_dim, &mut rng, false);
    let head_global = Mlp::init(&mut store, "head.global", d, cfg.head_hidden_dim, out_dim, &mut rng, false);

    Ok((
        Model {
            cfg: *cfg,
            patch_proj,
            enc_ln,
            enc_mlp,
            blocks,
            final_ln,
            head_local,
            head_global,
        },
        store,
    ))
}

impl Model {
    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    fn check_dims(&self, h: usize, w: usize) -> Result<(), ModelError> {
        let p = self.cfg.patch_size;
        if h == 0 || w == 0 || h % p != 0 || w % p != 0 {
            return Err(ModelError::ShapeError(format!(
                "image {h}x{w} not divisible by patch size {p}"
            )));
        }
        Ok(())
    }

    /// Flattens one view into per-patch pixel vectors (`g` rows of `P*P*3`).
    fn extract_patches<T: Real>(&self, view: &[f32], h: usize, w: usize, out: &mut Vec<T>) {
        let p = self.cfg.patch_size;
        let (gh, gw) = (h / p, w / p);
        for gy in 0..gh {
            for gx in 0..gw {
                for py in 0..p {
                    for px in 0..p {
                        let row = gy * p + py;
                        let col = gx * p + px;
                        let o = (row * w + col) * 3;
                        out.push(T::fl(view[o] as f64));
                        out.push(T::fl(view[o + 1] as f64));
                        out.push(T::fl(view[o + 2] as f64));
                    }
                }
            }
        }
    }

    /// Encoder over a batch of views: linear patch projection, fixed 2D
    /// patch position embedding, then a residual MLP. Per-image independent.
    fn encode_views<T: Real>(
        &self,
        store: &ParameterStore<T>,
        views: &[&[f32]],
        h: usize,
        w: usize,
    ) -> (Vec<T>, Vec<T>, layers::LnCache<T>, layers::MlpCache<T>) {
        let p = self.cfg.patch_size;
        let d = self.cfg.embed_dim;
        let g = self.cfg.tokens_per_view(h, w);
        let gw = w / p;

        let mut patches = Vec::with_capacity(views.len() * g * p * p * 3);
        for view in views {
            self.extract_patches(view, h, w, &mut patches);
        }

        let mut t1 = self.patch_proj.forward(store, &patches);
        // Fixed 2D position embedding, identical across views.
        let pos: Vec<Vec<T>> = (0..g)
            .map(|t| {
                embed::pos2d_embedding(t / gw, t % gw, d)
                    .into_iter()
                    .map(T::fl)
                    .collect()
            })
            .collect();
        for (ti, row) in t1.chunks_exact_mut(d).enumerate() {
            for (v, &e) in row.iter_mut().zip(&pos[ti % g]) {
                *v += e;
            }
        }

        let ln = self.enc_ln.forward(store, &t1);
        let (mlp_out, mlp_cache) = self.enc_mlp.forward(store, &ln.out);
        let mut tokens = t1;
        for (t, m) in tokens.iter_mut().zip(&mlp_out) {
            *t += *m;
        }
        (tokens, patches, ln, mlp_cache)
    }

    /// Per-image encoder as a standalone operation.
    pub fn patchify_encode<T: Real>(
        &self,
        store: &ParameterStore<T>,
        view: &[f32],
        h: usize,
        w: usize,
    ) -> Result<Vec<T>, ModelError> {
        self.check_dims(h, w)?;
        if view.len() != h * w * 3 {
            return Err(ModelError::ShapeError(format!(
                "view has {} values, expected {}",
                view.len(),
                h * w * 3
            )));
        }
        let (tokens, ..) = self.encode_views(store, &[view], h, w);
        Ok(tokens)
    }

    /// The all-to-all fusion stack, in place over the concatenated token
    /// sequence. Index embeddings must already be added.
    pub fn fusion_forward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        tokens: &mut Vec<T>,
    ) -> Result<Vec<BlockCache<T>>, ModelError> {
        if tokens.is_empty() || tokens.len() % self.cfg.embed_dim != 0 {
            return Err(ModelError::ShapeError(format!(
                "token buffer of {} values is not a multiple of embed_dim {}",
                tokens.len(),
                self.cfg.embed_dim
            )));
        }
        let mut caches = Vec::with_capacity(self.blocks.len());
        for (i, block) in self.blocks.iter().enumerate() {
            caches.push(block.forward(store, tokens));
            if !math::all_finite(tokens) {
                return Err(ModelError::NonFiniteActivation(format!("fusion block {i}")));
            }
        }
        Ok(caches)
    }

    /// Final norm plus both decoding heads over fused tokens, reassembled
    /// into per-view `h x w` grids. The heads are independent and run
    /// concurrently.
    #[allow(clippy::type_complexity)]
    fn decode<T: Real>(
        &self,
        store: &ParameterStore<T>,
        fused: &[T],
        n_views: usize,
        h: usize,
        w: usize,
    ) -> (
        RawOutput<T>,
        layers::LnCache<T>,
        layers::MlpCache<T>,
        layers::MlpCache<T>,
        Vec<T>,
        Vec<T>,
    ) {
        let ln = self.final_ln.forward(store, fused);
        let ((local_y, local_cache), (global_y, global_cache)) = rayon::join(
            || self.head_local.forward(store, &ln.out),
            || self.head_global.forward(store, &ln.out),
        );

        let mut raw = RawOutput {
            n_views,
            height: h,
            width: w,
            local_xyz: vec![T::zero(); n_views * h * w * 3],
            local_sigma: vec![T::zero(); n_views * h * w],
            global_xyz: vec![T::zero(); n_views * h * w * 3],
            global_sigma: vec![T::zero(); n_views * h * w],
        };
        let mut sig_pre_l = vec![T::zero(); n_views * h * w];
        let mut sig_pre_g = vec![T::zero(); n_views * h * w];

        self.assemble(&local_y, h, w, &mut raw.local_xyz, &mut raw.local_sigma, &mut sig_pre_l);
        self.assemble(&global_y, h, w, &mut raw.global_xyz, &mut raw.global_sigma, &mut sig_pre_g);

        (raw, ln, local_cache, global_cache, sig_pre_l, sig_pre_g)
    }

    /// Pixel-shuffle of token-major head outputs into image grids.
    fn assemble<T: Real>(
        &self,
        head_y: &[T],
        h: usize,
        w: usize,
        xyz: &mut [T],
        sigma: &mut [T],
        sigma_pre: &mut [T],
    ) {
        let p = self.cfg.patch_size;
        let g = self.cfg.tokens_per_view(h, w);
        let gw = w / p;
        let out_dim = p * p * 4;
        let clamp = T::fl(CONFIDENCE_CLAMP);
        for (token_idx, trow) in head_y.chunks_exact(out_dim).enumerate() {
            let view = token_idx / g;
            let t = token_idx % g;
            let (gy, gx) = (t / gw, t % gw);
            for py in 0..p {
                for px in 0..p {
                    let row = gy * p + py;
                    let col = gx * p + px;
                    let pix = (view * h + row) * w + col;
                    let o = (py * p + px) * 4;
                    xyz[pix * 3] = trow[o];
                    xyz[pix * 3 + 1] = trow[o + 1];
                    xyz[pix * 3 + 2] = trow[o + 2];
                    sigma_pre[pix] = trow[o + 3];
                    sigma[pix] = trow[o + 3].min(clamp).max(-clamp);
                }
            }
        }
    }

    /// Public decoding op over fused tokens.
    pub fn decode_heads<T: Real>(
        &self,
        store: &ParameterStore<T>,
        fused: &[T],
        n_views: usize,
        h: usize,
        w: usize,
    ) -> Result<RawOutput<T>, ModelError> {
        self.check_dims(h, w)?;
        let expected = n_views * self.cfg.tokens_per_view(h, w) * self.cfg.embed_dim;
        if fused.len() != expected {
            return Err(ModelError::ShapeError(format!(
                "fused token buffer has {} values, expected {expected}",
                fused.len()
            )));
        }
        let (raw, ..) = self.decode(store, fused, n_views, h, w);
        Ok(raw)
    }

    /// Full single-pass forward with activation recording.
    pub fn forward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        images: &ImageSet,
        assignment: &IndexAssignment,
    ) -> Result<(RawOutput<T>, Tape<T>), ModelError> {
        let (h, w, n) = (images.height, images.width, images.n_views);
        self.check_dims(h, w)?;
        if assignment.len() != n {
            return Err(ModelError::ShapeError(format!(
                "{n} views but {} index slots",
                assignment.len()
            )));
        }
        if let Some(&max) = assignment.slots().iter().max() {
            if max > self.cfg.pool_size {
                return Err(ModelError::PoolTooSmall {
                    n_views: n,
                    pool_size: self.cfg.pool_size,
                });
            }
        }

        let d = self.cfg.embed_dim;
        let g = self.cfg.tokens_per_view(h, w);
        let views: Vec<&[f32]> = (0..n).map(|v| images.view(v)).collect();
        let (mut tokens, patches, enc_ln, enc_mlp) = self.encode_views(store, &views, h, w);

        // Add the per-view index embedding to every token of that view.
        let embeddings: Vec<Vec<T>> = assignment
            .slots()
            .iter()
            .map(|&s| {
                embed::index_embedding(s, d, self.cfg.pool_size)
                    .into_iter()
                    .map(T::fl)
                    .collect()
            })
            .collect();
        for (ti, row) in tokens.chunks_exact_mut(d).enumerate() {
            for (v, &ev) in row.iter_mut().zip(&embeddings[ti / g]) {
                *v += ev;
            }
        }
        if !math::all_finite(&tokens) {
            return Err(ModelError::NonFiniteActivation("encoder".into()));
        }

        let blocks = self.fusion_forward(store, &mut tokens)?;
        let (raw, final_ln, head_local, head_global, sig_l, sig_g) =
            self.decode(store, &tokens, n, h, w);
        if !(math::all_finite(&raw.local_xyz)
            && math::all_finite(&raw.global_xyz)
            && math::all_finite(&raw.local_sigma)
            && math::all_finite(&raw.global_sigma))
        {
            return Err(ModelError::NonFiniteActivation("decoding heads".into()));
        }

        let tape = Tape {
            version: store.version(),
            n_views: n,
            height: h,
            width: w,
            patches,
            enc_ln,
            enc_mlp,
            blocks,
            final_ln,
            head_local,
            head_global,
            sigma_pre_local: sig_l,
            sigma_pre_global: sig_g,
        };
        Ok((raw, tape))
    }

    /// Convenience: forward straight to geometry types.
    pub fn forward_bundle<T: Real>(
        &self,
        store: &ParameterStore<T>,
        images: &ImageSet,
        assignment: &IndexAssignment,
    ) -> Result<PredictionBundle, ModelError> {
        Ok(self.forward(store, images, assignment)?.0.to_bundle())
    }

    /// Reverse pass: accumulates parameter gradients of the scalar whose
    /// bundle-level gradients are given.
    pub fn backward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        tape: &Tape<T>,
        loss_grads: &LossGradients,
        grads: &mut GradBuffer<T>,
    ) -> Result<(), ModelError> {
        if tape.version != store.version() {
            return Err(ModelError::StaleTape);
        }
        let (h, w, n) = (tape.height, tape.width, tape.n_views);
        if loss_grads.d_local_points.len() != n || loss_grads.d_global_points.len() != n {
            return Err(ModelError::ShapeError(
                "loss gradients do not match the taped view count".into(),
            ));
        }

        let d_local = self.grid_grads_to_tokens(
            &loss_grads.d_local_points,
            &loss_grads.d_local_conf,
            &tape.sigma_pre_local,
            h,
            w,
        );
        let d_global = self.grid_grads_to_tokens(
            &loss_grads.d_global_points,
            &loss_grads.d_global_conf,
            &tape.sigma_pre_global,
            h,
            w,
        );

        // Heads share their input; gradients add.
        let dl = self.head_local.backward(store, &tape.head_local, &d_local, grads);
        let dg = self.head_global.backward(store, &tape.head_global, &d_global, grads);
        let d_ln_out: Vec<T> = dl.iter().zip(&dg).map(|(&a, &b)| a + b).collect();

        let mut dx = self.final_ln.backward(store, &tape.final_ln, &d_ln_out, grads);
        for (block, cache) in self.blocks.iter().zip(&tape.blocks).rev() {
            dx = block.backward(store, cache, &dx, grads);
        }

        // Index embeddings are fixed: dx flows unchanged into the encoder.
        let d_ln_in = self.enc_mlp.backward(store, &tape.enc_mlp, &dx, grads);
        let mut d_t1 = self.enc_ln.backward(store, &tape.enc_ln, &d_ln_in, grads);
        for (a, &b) in d_t1.iter_mut().zip(&dx) {
            *a += b;
        }
        // 2D position embeddings are fixed too; what remains feeds the patch
        // projection. The image itself is not differentiated.
        let _ = self.patch_proj.backward(store, &tape.patches, &d_t1, grads);
        Ok(())
    }

    /// Scatters per-pixel loss gradients back into token-major head-output
    /// gradients, applying the confidence clamp's gate.
    fn grid_grads_to_tokens<T: Real>(
        &self,
        d_points: &[Vec<Vec3>],
        d_conf: &[Vec<f64>],
        sigma_pre: &[T],
        h: usize,
        w: usize,
    ) -> Vec<T> {
        let p = self.cfg.patch_size;
        let g = self.cfg.tokens_per_view(h, w);
        let gw = w / p;
        let out_dim = p * p * 4;
        let n = d_points.len();
        let mut out = vec![T::zero(); n * g * out_dim];
        for (view, (dp, dc)) in d_points.iter().zip(d_conf).enumerate() {
            for row in 0..h {
                for col in 0..w {
                    let pix = row * w + col;
                    let (gy, py) = (row / p, row % p);
                    let (gx, px) = (col / p, col % p);
                    let token = view * g + gy * gw + gx;
                    let o = token * out_dim + (py * p + px) * 4;
                    out[o] = T::fl(dp[pix].x);
                    out[o + 1] = T::fl(dp[pix].y);
                    out[o + 2] = T::fl(dp[pix].z);
                    let pre = sigma_pre[view * h * w + pix].db();
                    out[o + 3] = if pre.abs() < CONFIDENCE_CLAMP {
                        T::fl(dc[pix])
                    } else {
                        T::zero()
                    };
                }
            }
        }
        out
    }

    /// Rough tape-memory estimate for one forward pass, in bytes. The
    /// benchmark command uses it to report would-be-OOM rows instead of
    /// aborting the process.
    pub fn tape_bytes_estimate(&self, n_views: usize, h: usize, w: usize, elem: usize) -> u64 {
        let t = (n_views * self.cfg.tokens_per_view(h, w)) as u64;
        let d = self.cfg.embed_dim as u64;
        let heads = self.cfg.attention_heads as u64;
        let layers = self.cfg.fusion_layers as u64;
        let mlp = self.cfg.mlp_hidden() as u64;
        let p4 = (self.cfg.patch_size * self.cfg.patch_size * 4) as u64;
        let per_block = heads * t * t + t * (8 * d + 2 * mlp) + 2 * t;
        let heads_out = 2 * t * (2 * self.cfg.head_hidden_dim as u64 + p4 + d);
        let enc = t * ((self.cfg.patch_size * self.cfg.patch_size * 3) as u64 + 4 * d + 2 * mlp);
        (layers * per_block + heads_out + enc + 8 * t * d) * elem as u64
    }
}
