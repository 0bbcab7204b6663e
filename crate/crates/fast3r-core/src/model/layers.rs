//! Network building blocks: linear, scale-only layer norm, multi-head
//! attention and the two-layer MLP, each with an explicit activation cache
//! and a hand-written backward pass.

use rand::Rng;

use super::math::{
    add_bias, bias_grad, gelu, gelu_backward, layernorm, layernorm_backward, matmul_nn,
    matmul_nt, matmul_tn, softmax_rows, softmax_rows_backward, Real,
};
use super::params::{GradBuffer, ParamId, ParameterStore};

/// Normal(0, std) truncated at two standard deviations.
pub fn trunc_normal(rng: &mut impl Rng, n: usize, std: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        for z in [r * theta.cos(), r * theta.sin()] {
            if z.abs() <= 2.0 && out.len() < n {
                out.push(z * std);
            }
        }
    }
    out
}

fn cast<T: Real>(v: Vec<f64>) -> Vec<T> {
    v.into_iter().map(T::fl).collect()
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Weight shape is `[in_dim, out_dim]`, bias `[out_dim]`, both named
    /// `<name>.w` / `<name>.b`.
    pub fn init<T: Real>(
        store: &mut ParameterStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut impl Rng,
        zero_init: bool,
    ) -> Linear {
        let weight = if zero_init {
            vec![0.0; in_dim * out_dim]
        } else {
            trunc_normal(rng, in_dim * out_dim, 0.02)
        };
        let w = store.add(&format!("{name}.w"), &[in_dim, out_dim], cast(weight));
        let b = store.add(&format!("{name}.b"), &[out_dim], vec![T::zero(); out_dim]);
        Linear {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    pub fn forward<T: Real>(&self, store: &ParameterStore<T>, x: &[T]) -> Vec<T> {
        let rows = x.len() / self.in_dim;
        let mut y = vec![T::zero(); rows * self.out_dim];
        matmul_nn(x, store.w(self.w), &mut y, rows, self.in_dim, self.out_dim);
        add_bias(&mut y, store.w(self.b));
        y
    }

    /// Accumulates weight/bias grads and returns the input gradient.
    pub fn backward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        x: &[T],
        dy: &[T],
        grads: &mut GradBuffer<T>,
    ) -> Vec<T> {
        let rows = x.len() / self.in_dim;
        matmul_tn(x, dy, grads.g_mut(self.w), rows, self.in_dim, self.out_dim);
        bias_grad(dy, grads.g_mut(self.b));
        let mut dx = vec![T::zero(); rows * self.in_dim];
        matmul_nt(dy, store.w(self.w), &mut dx, rows, self.out_dim, self.in_dim);
        dx
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct LnCache<T> {
    pub normed: Vec<T>,
    pub rstd: Vec<T>,
    pub out: Vec<T>,
}

impl LayerNorm {
    pub fn init<T: Real>(store: &mut ParameterStore<T>, name: &str, dim: usize) -> LayerNorm {
        let gain = store.add(&format!("{name}.g"), &[dim], vec![T::one(); dim]);
        LayerNorm { gain, dim }
    }

    pub fn forward<T: Real>(&self, store: &ParameterStore<T>, x: &[T]) -> LnCache<T> {
        let mut out = vec![T::zero(); x.len()];
        let (normed, rstd) = layernorm(x, store.w(self.gain), &mut out, self.dim);
        LnCache { normed, rstd, out }
    }

    pub fn backward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        cache: &LnCache<T>,
        dy: &[T],
        grads: &mut GradBuffer<T>,
    ) -> Vec<T> {
        let mut dx = vec![T::zero(); dy.len()];
        layernorm_backward(
            &cache.normed,
            &cache.rstd,
            store.w(self.gain),
            dy,
            grads.g_mut(self.gain),
            &mut dx,
            self.dim,
        );
        dx
    }
}

#[derive(Debug, Clone)]
pub struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub out: Linear,
    pub heads: usize,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct AttnCache<T> {
    pub x_in: Vec<T>,
    pub q: Vec<T>,
    pub k: Vec<T>,
    pub v: Vec<T>,
    /// Softmax weights, `heads` blocks of `t x t`.
    pub attn: Vec<T>,
    pub ctx: Vec<T>,
}

impl Attention {
    /// The output projection is zero-initialized so a fresh block's residual
    /// branch starts silent.
    pub fn init<T: Real>(
        store: &mut ParameterStore<T>,
        name: &str,
        dim: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> Attention {
        Attention {
            q: Linear::init(store, &format!("{name}.q"), dim, dim, rng, false),
            k: Linear::init(store, &format!("{name}.k"), dim, dim, rng, false),
            v: Linear::init(store, &format!("{name}.v"), dim, dim, rng, false),
            out: Linear::init(store, &format!("{name}.out"), dim, dim, rng, true),
            heads,
            dim,
        }
    }

    pub fn forward<T: Real>(&self, store: &ParameterStore<T>, x: &[T]) -> (Vec<T>, AttnCache<T>) {
        let d = self.dim;
        let t = x.len() / d;
        let dh = d / self.heads;
        let scale = T::fl(1.0 / (dh as f64).sqrt());

        let q = self.q.forward(store, x);
        let k = self.k.forward(store, x);
        let v = self.v.forward(store, x);

        let mut attn = vec![T::zero(); self.heads * t * t];
        let mut ctx = vec![T::zero(); t * d];
        for h in 0..self.heads {
            let col = h * dh;
            let block = &mut attn[h * t * t..(h + 1) * t * t];
            for i in 0..t {
                let q_row = &q[i * d + col..i * d + col + dh];
                let s_row = &mut block[i * t..(i + 1) * t];
                for (j, s) in s_row.iter_mut().enumerate() {
                    let k_row = &k[j * d + col..j * d + col + dh];
                    let mut acc = T::zero();
                    for (&a, &b) in q_row.iter().zip(k_row) {
                        acc += a * b;
                    }
                    *s = acc * scale;
                }
            }
            softmax_rows(block, t);
            for i in 0..t {
                let a_row = &block[i * t..(i + 1) * t];
                for (j, &w) in a_row.iter().enumerate() {
                    let v_row = &v[j * d + col..j * d + col + dh];
                    let c_row = &mut ctx[i * d + col..i * d + col + dh];
                    for (c, &vv) in c_row.iter_mut().zip(v_row) {
                        *c += w * vv;
                    }
                }
            }
        }

        let y = self.out.forward(store, &ctx);
        (
            y,
            AttnCache {
                x_in: x.to_vec(),
                q,
                k,
                v,
                attn,
                ctx,
            },
        )
    }

    pub fn backward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        cache: &AttnCache<T>,
        dy: &[T],
        grads: &mut GradBuffer<T>,
    ) -> Vec<T> {
        let d = self.dim;
        let t = cache.x_in.len() / d;
        let dh = d / self.heads;
        let scale = T::fl(1.0 / (dh as f64).sqrt());

        let d_ctx = self.out.backward(store, &cache.ctx, dy, grads);

        let mut dq = vec![T::zero(); t * d];
        let mut dk = vec![T::zero(); t * d];
        let mut dv = vec![T::zero(); t * d];

        for h in 0..self.heads {
            let col = h * dh;
            let block = &cache.attn[h * t * t..(h + 1) * t * t];
            let mut d_attn = vec![T::zero(); t * t];
            for i in 0..t {
                let dc_row = &d_ctx[i * d + col..i * d + col + dh];
                let a_row = &block[i * t..(i + 1) * t];
                let da_row = &mut d_attn[i * t..(i + 1) * t];
                for j in 0..t {
                    let v_row = &cache.v[j * d + col..j * d + col + dh];
                    let mut acc = T::zero();
                    for (&a, &b) in dc_row.iter().zip(v_row) {
                        acc += a * b;
                    }
                    da_row[j] = acc;
                    let w = a_row[j];
                    let dv_row = &mut dv[j * d + col..j * d + col + dh];
                    for (g, &a) in dv_row.iter_mut().zip(dc_row) {
                        *g += w * a;
                    }
                }
            }
            softmax_rows_backward(block, &mut d_attn, t);
            for i in 0..t {
                let ds_row = &d_attn[i * t..(i + 1) * t];
                let dq_row_start = i * d + col;
                for j in 0..t {
                    let s = ds_row[j] * scale;
                    let k_row = &cache.k[j * d + col..j * d + col + dh];
                    {
                        let dq_row = &mut dq[dq_row_start..dq_row_start + dh];
                        for (g, &kv) in dq_row.iter_mut().zip(k_row) {
                            *g += s * kv;
                        }
                    }
                    let q_row = &cache.q[i * d + col..i * d + col + dh];
                    let dk_row = &mut dk[j * d + col..j * d + col + dh];
                    for (g, &qv) in dk_row.iter_mut().zip(q_row) {
                        *g += s * qv;
                    }
                }
            }
        }

        let mut dx = self.q.backward(store, &cache.x_in, &dq, grads);
        let dx_k = self.k.backward(store, &cache.x_in, &dk, grads);
        let dx_v = self.v.backward(store, &cache.x_in, &dv, grads);
        for ((a, b), c) in dx.iter_mut().zip(dx_k).zip(dx_v) {
            *a += b + c;
        }
        dx
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    pub x_in: Vec<T>,
    pub h_pre: Vec<T>,
    pub h_act: Vec<T>,
}

impl Mlp {
    pub fn init<T: Real>(
        store: &mut ParameterStore<T>,
        name: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        rng: &mut impl Rng,
        zero_init_out: bool,
    ) -> Mlp {
        Mlp {
            fc1: Linear::init(store, &format!("{name}.fc1"), in_dim, hidden, rng, false),
            fc2: Linear::init(store, &format!("{name}.fc2"), hidden, out_dim, rng, zero_init_out),
        }
    }

    pub fn forward<T: Real>(&self, store: &ParameterStore<T>, x: &[T]) -> (Vec<T>, MlpCache<T>) {
        let h_pre = self.fc1.forward(store, x);
        let mut h_act = h_pre.clone();
        gelu(&mut h_act);
        let y = self.fc2.forward(store, &h_act);
        (
            y,
            MlpCache {
                x_in: x.to_vec(),
                h_pre,
                h_act,
            },
        )
    }

    pub fn backward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        cache: &MlpCache<T>,
        dy: &[T],
        grads: &mut GradBuffer<T>,
    ) -> Vec<T> {
        let mut dh = self.fc2.backward(store, &cache.h_act, dy, grads);
        gelu_backward(&cache.h_pre, &mut dh);
        self.fc1.backward(store, &cache.x_in, &dh, grads)
    }
}

/// Pre-norm transformer block: `x + attn(ln1(x))`, then `a + mlp(ln2(a))`.
#[derive(Debug, Clone)]
pub struct Block {
    pub ln1: LayerNorm,
    pub attn: Attention,
    pub ln2: LayerNorm,
    pub mlp: Mlp,
}

#[derive(Debug, Clone)]
pub struct BlockCache<T> {
    pub ln1: LnCache<T>,
    pub attn: AttnCache<T>,
    pub ln2: LnCache<T>,
    pub mlp: MlpCache<T>,
}

impl Block {
    pub fn init<T: Real>(
        store: &mut ParameterStore<T>,
        name: &str,
        dim: usize,
        heads: usize,
        mlp_hidden: usize,
        rng: &mut impl Rng,
    ) -> Block {
        Block {
            ln1: LayerNorm::init(store, &format!("{name}.ln1"), dim),
            attn: Attention::init(store, &format!("{name}.attn"), dim, heads, rng),
            ln2: LayerNorm::init(store, &format!("{name}.ln2"), dim),
            mlp: Mlp::init(store, &format!("{name}.mlp"), dim, mlp_hidden, dim, rng, true),
        }
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        x: &mut Vec<T>,
    ) -> BlockCache<T> {
        let ln1 = self.ln1.forward(store, x);
        let (attn_out, attn) = self.attn.forward(store, &ln1.out);
        for (xv, a) in x.iter_mut().zip(&attn_out) {
            *xv += *a;
        }
        let ln2 = self.ln2.forward(store, x);
        let (mlp_out, mlp) = self.mlp.forward(store, &ln2.out);
        for (xv, m) in x.iter_mut().zip(&mlp_out) {
            *xv += *m;
        }
        BlockCache {
            ln1,
            attn,
            ln2,
            mlp,
        }
    }

    pub fn backward<T: Real>(
        &self,
        store: &ParameterStore<T>,
        cache: &BlockCache<T>,
        dy: &[T],
        grads: &mut GradBuffer<T>,
    ) -> Vec<T> {
        let d_ln2out = self.mlp.backward(store, &cache.mlp, dy, grads);
        let mut da = self.ln2.backward(store, &cache.ln2, &d_ln2out, grads);
        for (a, &d) in da.iter_mut().zip(dy) {
            *a += d;
        }
        let d_ln1out = self.attn.backward(store, &cache.attn, &da, grads);
        let mut dx = self.ln1.backward(store, &cache.ln1, &d_ln1out, grads);
        for (x, &a) in dx.iter_mut().zip(&da) {
            *x += a;
        }
        dx
    }
}
