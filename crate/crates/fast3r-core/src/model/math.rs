//! Scalar abstraction and the dense kernels the network is built from.
//!
//! Everything is generic over [`Real`] so the same code runs in f32 for
//! training speed and in f64 for finite-difference verification.

use crate::model::params::Dtype;

/// Floating-point scalar the model can run in.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::iter::Sum
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    const DTYPE: Dtype;
    fn fl(v: f64) -> Self;
    fn db(self) -> f64;
}

impl Real for f32 {
    const DTYPE: Dtype = Dtype::F32;
    #[inline]
    fn fl(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn db(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const DTYPE: Dtype = Dtype::F64;
    #[inline]
    fn fl(v: f64) -> Self {
        v
    }
    #[inline]
    fn db(self) -> f64 {
        self
    }
}

/// `c[m x n] += a[m x k] * b[k x n]`, all row-major.
pub fn matmul_nn<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (kk, &av) in a_row.iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[m x n] += a[m x k] * b[n x k]^T` (dot of rows with rows).
pub fn matmul_nt<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (j, cv) in c_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            *cv += acc;
        }
    }
}

/// `c[k x n] += a[m x k]^T * b[m x n]`.
pub fn matmul_tn<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let b_row = &b[i * n..(i + 1) * n];
        for (kk, &av) in a_row.iter().enumerate() {
            let c_row = &mut c[kk * n..(kk + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// Adds a bias row to every row of `x`.
pub fn add_bias<T: Real>(x: &mut [T], bias: &[T]) {
    for row in x.chunks_exact_mut(bias.len()) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Accumulates the bias gradient: column sums of `dy`.
pub fn bias_grad<T: Real>(dy: &[T], db: &mut [T]) {
    for row in dy.chunks_exact(db.len()) {
        for (g, &d) in db.iter_mut().zip(row) {
            *g += d;
        }
    }
}

/// Row-wise softmax in place, numerically stabilized.
pub fn softmax_rows<T: Real>(x: &mut [T], cols: usize) {
    for row in x.chunks_exact_mut(cols) {
        let mut max = row[0];
        for &v in row.iter() {
            if v > max {
                max = v;
            }
        }
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = T::one() / sum;
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
}

/// Backward of row-wise softmax: `dx = p .* (dp - sum(dp .* p))` per row.
/// Overwrites `dp` with `dx`; `p` holds the forward probabilities.
pub fn softmax_rows_backward<T: Real>(p: &[T], dp: &mut [T], cols: usize) {
    for (p_row, d_row) in p.chunks_exact(cols).zip(dp.chunks_exact_mut(cols)) {
        let mut dot = T::zero();
        for (&pv, &dv) in p_row.iter().zip(d_row.iter()) {
            dot += pv * dv;
        }
        for (dv, &pv) in d_row.iter_mut().zip(p_row) {
            *dv = pv * (*dv - dot);
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// Tanh-approximated GELU, elementwise.
pub fn gelu<T: Real>(x: &mut [T]) {
    let c = T::fl(GELU_C);
    let a = T::fl(GELU_A);
    let half = T::fl(0.5);
    for v in x.iter_mut() {
        let u = c * (*v + a * *v * *v * *v);
        *v = half * *v * (T::one() + u.tanh());
    }
}

/// GELU derivative at the pre-activation values, multiplied into `dy`.
pub fn gelu_backward<T: Real>(x_pre: &[T], dy: &mut [T]) {
    let c = T::fl(GELU_C);
    let a3 = T::fl(3.0 * GELU_A);
    let a = T::fl(GELU_A);
    let half = T::fl(0.5);
    for (&x, d) in x_pre.iter().zip(dy.iter_mut()) {
        let u = c * (x + a * x * x * x);
        let t = u.tanh();
        let sech2 = T::one() - t * t;
        let grad = half * (T::one() + t) + half * x * sech2 * c * (T::one() + a3 * x * x);
        *d *= grad;
    }
}

const LN_EPS: f64 = 1e-6;

/// Scale-only layer norm over rows: `y = gain .* (x - mean) / sqrt(var + eps)`.
/// Returns the normalized rows (pre-gain) and the reciprocal std per row,
/// which the backward pass consumes.
pub fn layernorm<T: Real>(x: &[T], gain: &[T], y: &mut [T], cols: usize) -> (Vec<T>, Vec<T>) {
    let rows = x.len() / cols;
    let mut normed = vec![T::zero(); x.len()];
    let mut rstd = vec![T::zero(); rows];
    let inv_cols = T::fl(1.0 / cols as f64);
    let eps = T::fl(LN_EPS);
    for r in 0..rows {
        let xr = &x[r * cols..(r + 1) * cols];
        let mut mean = T::zero();
        for &v in xr {
            mean += v;
        }
        mean *= inv_cols;
        let mut var = T::zero();
        for &v in xr {
            let d = v - mean;
            var += d * d;
        }
        var *= inv_cols;
        let rs = T::one() / (var + eps).sqrt();
        rstd[r] = rs;
        let n = &mut normed[r * cols..(r + 1) * cols];
        let yr = &mut y[r * cols..(r + 1) * cols];
        for i in 0..cols {
            n[i] = (xr[i] - mean) * rs;
            yr[i] = n[i] * gain[i];
        }
    }
    (normed, rstd)
}

/// Backward of scale-only layer norm. Accumulates `dgain` and writes `dx`.
pub fn layernorm_backward<T: Real>(
    normed: &[T],
    rstd: &[T],
    gain: &[T],
    dy: &[T],
    dgain: &mut [T],
    dx: &mut [T],
    cols: usize,
) {
    let rows = dy.len() / cols;
    let inv_cols = T::fl(1.0 / cols as f64);
    for r in 0..rows {
        let n = &normed[r * cols..(r + 1) * cols];
        let d = &dy[r * cols..(r + 1) * cols];
        let out = &mut dx[r * cols..(r + 1) * cols];
        let mut sum_dn = T::zero();
        let mut sum_dnn = T::zero();
        for i in 0..cols {
            let dn = d[i] * gain[i];
            sum_dn += dn;
            sum_dnn += dn * n[i];
            dgain[i] += d[i] * n[i];
        }
        sum_dn *= inv_cols;
        sum_dnn *= inv_cols;
        for i in 0..cols {
            let dn = d[i] * gain[i];
            out[i] = rstd[r] * (dn - sum_dn - n[i] * sum_dnn);
        }
    }
}

/// True if every value is finite.
pub fn all_finite<T: Real>(x: &[T]) -> bool {
    x.iter().all(|v| v.is_finite())
}
