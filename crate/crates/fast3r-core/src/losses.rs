//! Training objective: confidence-weighted normalized 3D regression losses.
//!
//! For a predicted map `Xh` and target `X` over the valid pixels of one view,
//! both are first normalized by their own mean Euclidean norm (`zh`, `z`),
//! making the per-pixel regression term scale invariant:
//!
//! ```text
//! l_p     = || Xh_p / zh - X_p / z ||
//! L_map   = (1/M) sum_p [ C_p * l_p + sign * alpha * log(C_p) ]
//! C_p     = 1 + exp(sigma_p)
//! L_total = sum_views L_global + sum_views L_local
//! ```
//!
//! The confidence regularizer's sign is configurable: `+1` is the form used
//! here by default, `-1` the variant that rewards high confidence instead.
//! Gradients are analytic and include the coupling of every pixel through
//! the normalizer `zh`.

use crate::geometry::{ConfidenceMap, Pointmap, Vec3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("no valid pixels under the mask")]
    EmptyMask,
    #[error("degenerate normalization scale {0:.3e}")]
    DegenerateScale(f64),
    #[error("shape mismatch: {0} vs {1}")]
    ShapeMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    /// Weight of the confidence regularizer.
    pub alpha: f64,
    /// Sign of the `alpha * log(C)` term; `+1` or `-1`.
    pub confidence_reg_sign: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.2,
            confidence_reg_sign: 1.0,
        }
    }
}

/// Per-sample loss breakdown. The report's `total` always equals the sum of
/// the per-view terms.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub total: f64,
    pub per_view_global: Vec<f64>,
    pub per_view_local: Vec<f64>,
    pub mean_sigma_plus_global: Vec<f64>,
    pub mean_sigma_plus_local: Vec<f64>,
}

impl LossReport {
    pub fn global_sum(&self) -> f64 {
        self.per_view_global.iter().sum()
    }

    pub fn local_sum(&self) -> f64 {
        self.per_view_local.iter().sum()
    }
}

/// Gradients with respect to every prediction field, per view. Masked-out
/// pixels carry exactly zero.
#[derive(Debug, Clone)]
pub struct LossGradients {
    pub d_local_points: Vec<Vec<Vec3>>,
    pub d_local_conf: Vec<Vec<f64>>,
    pub d_global_points: Vec<Vec<Vec3>>,
    pub d_global_conf: Vec<Vec<f64>>,
}

const SCALE_EPS: f64 = 1e-12;
const NORM_EPS: f64 = 1e-30;

fn effective_mask(pm: &Pointmap, mask: &[bool]) -> Result<Vec<bool>, LossError> {
    if mask.len() != pm.points().len() {
        return Err(LossError::ShapeMismatch(mask.len(), pm.points().len()));
    }
    Ok(pm
        .valid_mask()
        .iter()
        .zip(mask)
        .map(|(&a, &b)| a && b)
        .collect())
}

/// Mean Euclidean distance to the origin over masked-in points.
pub fn mean_euclidean_norm(pm: &Pointmap, mask: &[bool]) -> Result<f64, LossError> {
    let eff = effective_mask(pm, mask)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, &m) in pm.points().iter().zip(&eff) {
        if m {
            sum += p.norm();
            count += 1;
        }
    }
    if count == 0 {
        return Err(LossError::EmptyMask);
    }
    let z = sum / count as f64;
    if z < SCALE_EPS {
        return Err(LossError::DegenerateScale(z));
    }
    Ok(z)
}

/// Per-pixel normalized regression loss grid; masked-out pixels contribute 0.
pub fn normalized_regression_loss(
    pred: &Pointmap,
    target: &Pointmap,
    mask: &[bool],
) -> Result<Vec<f64>, LossError> {
    if pred.points().len() != target.points().len() {
        return Err(LossError::ShapeMismatch(
            pred.points().len(),
            target.points().len(),
        ));
    }
    let zh = mean_euclidean_norm(pred, mask)?;
    let z = mean_euclidean_norm(target, mask)?;
    let eff = effective_mask(pred, mask)?;
    let eff_t = effective_mask(target, mask)?;
    Ok(pred
        .points()
        .iter()
        .zip(target.points())
        .zip(eff.iter().zip(&eff_t))
        .map(|((p, t), (&mp, &mt))| {
            if mp && mt {
                (p / zh - t / z).norm()
            } else {
                0.0
            }
        })
        .collect())
}

/// Elementwise positive confidence `1 + exp(raw)`.
pub fn confidence_positive(raw: &[f64]) -> Vec<f64> {
    raw.iter().map(|&s| 1.0 + s.exp()).collect()
}

/// Confidence-adjusted loss of one pointmap (mean over valid pixels).
pub fn pointmap_loss(
    conf: &ConfidenceMap,
    pred: &Pointmap,
    target: &Pointmap,
    mask: &[bool],
    cfg: &LossConfig,
) -> Result<f64, LossError> {
    let (loss, _mean_c) = pointmap_loss_stats(conf, pred, target, mask, cfg)?;
    Ok(loss)
}

fn pointmap_loss_stats(
    conf: &ConfidenceMap,
    pred: &Pointmap,
    target: &Pointmap,
    mask: &[bool],
    cfg: &LossConfig,
) -> Result<(f64, f64), LossError> {
    if conf.raw().len() != pred.points().len() {
        return Err(LossError::ShapeMismatch(
            conf.raw().len(),
            pred.points().len(),
        ));
    }
    let l = normalized_regression_loss(pred, target, mask)?;
    let eff = effective_mask(target, mask)?;
    let mut sum = 0.0;
    let mut c_sum = 0.0;
    let mut count = 0usize;
    for ((&lp, &raw), &m) in l.iter().zip(conf.raw()).zip(&eff) {
        if !m {
            continue;
        }
        let c = 1.0 + raw.exp();
        sum += c * lp + cfg.confidence_reg_sign * cfg.alpha * c.ln();
        c_sum += c;
        count += 1;
    }
    if count == 0 {
        return Err(LossError::EmptyMask);
    }
    Ok((sum / count as f64, c_sum / count as f64))
}

/// Total objective over a multi-view sample: sum over views of the global and
/// local pointmap losses.
///
/// The per-view mask is the target pointmap's validity mask.
pub fn total_loss(
    pred_locals: &[Pointmap],
    pred_local_confs: &[ConfidenceMap],
    pred_globals: &[Pointmap],
    pred_global_confs: &[ConfidenceMap],
    gt_locals: &[Pointmap],
    gt_globals: &[Pointmap],
    cfg: &LossConfig,
) -> Result<LossReport, LossError> {
    let n = pred_locals.len();
    for len in [
        pred_local_confs.len(),
        pred_globals.len(),
        pred_global_confs.len(),
        gt_locals.len(),
        gt_globals.len(),
    ] {
        if len != n {
            return Err(LossError::ShapeMismatch(len, n));
        }
    }
    let mut report = LossReport {
        total: 0.0,
        per_view_global: Vec::with_capacity(n),
        per_view_local: Vec::with_capacity(n),
        mean_sigma_plus_global: Vec::with_capacity(n),
        mean_sigma_plus_local: Vec::with_capacity(n),
    };
    for v in 0..n {
        let mask_l = gt_locals[v].valid_mask();
        let mask_g = gt_globals[v].valid_mask();
        let (lg, cg) =
            pointmap_loss_stats(&pred_global_confs[v], &pred_globals[v], &gt_globals[v], mask_g, cfg)?;
        let (ll, cl) =
            pointmap_loss_stats(&pred_local_confs[v], &pred_locals[v], &gt_locals[v], mask_l, cfg)?;
        report.per_view_global.push(lg);
        report.per_view_local.push(ll);
        report.mean_sigma_plus_global.push(cg);
        report.mean_sigma_plus_local.push(cl);
        report.total += lg + ll;
    }
    Ok(report)
}

/// Analytic gradient of one pointmap loss w.r.t. the predicted points and raw
/// confidences. Includes the all-pixel coupling through the prediction
/// normalizer.
fn pointmap_loss_gradients(
    conf: &ConfidenceMap,
    pred: &Pointmap,
    target: &Pointmap,
    mask: &[bool],
    cfg: &LossConfig,
) -> Result<(Vec<Vec3>, Vec<f64>), LossError> {
    let zh = mean_euclidean_norm(pred, mask)?;
    let z = mean_euclidean_norm(target, mask)?;
    let eff = effective_mask(target, mask)?;
    let m_count = eff.iter().filter(|&&m| m).count();
    if m_count == 0 {
        return Err(LossError::EmptyMask);
    }
    let m = m_count as f64;

    let n_px = pred.points().len();
    let mut d_points = vec![Vec3::zeros(); n_px];
    let mut d_conf = vec![0.0; n_px];

    // First pass: per-pixel terms plus the accumulated zh-coupling factor
    //   a = sum_p c_p (v_p . xh_p) / l_p.
    let mut a = 0.0;
    for i in 0..n_px {
        if !eff[i] {
            continue;
        }
        let xh = pred.points()[i];
        let x = target.points()[i];
        let v = xh / zh - x / z;
        let l = v.norm();
        let e = conf.raw()[i].exp();
        let c = 1.0 + e;
        d_conf[i] = (l * e + cfg.confidence_reg_sign * cfg.alpha * e / c) / m;
        if l > NORM_EPS {
            d_points[i] = (c / (m * l * zh)) * v;
            a += c * v.dot(&xh) / l;
        }
    }

    // Second pass: distribute -a / (M^2 zh^2) along each unit point direction.
    let coeff = a / (m * m * zh * zh);
    for i in 0..n_px {
        if !eff[i] {
            continue;
        }
        let xh = pred.points()[i];
        let norm = xh.norm();
        if norm > NORM_EPS {
            d_points[i] -= (coeff / norm) * xh;
        }
    }

    Ok((d_points, d_conf))
}

/// Gradients of [`total_loss`] w.r.t. all four prediction fields.
pub fn loss_gradients(
    pred_locals: &[Pointmap],
    pred_local_confs: &[ConfidenceMap],
    pred_globals: &[Pointmap],
    pred_global_confs: &[ConfidenceMap],
    gt_locals: &[Pointmap],
    gt_globals: &[Pointmap],
    cfg: &LossConfig,
) -> Result<LossGradients, LossError> {
    let n = pred_locals.len();
    let mut out = LossGradients {
        d_local_points: Vec::with_capacity(n),
        d_local_conf: Vec::with_capacity(n),
        d_global_points: Vec::with_capacity(n),
        d_global_conf: Vec::with_capacity(n),
    };
    for v in 0..n {
        let (dg, dgc) = pointmap_loss_gradients(
            &pred_global_confs[v],
            &pred_globals[v],
            &gt_globals[v],
            gt_globals[v].valid_mask(),
            cfg,
        )?;
        let (dl, dlc) = pointmap_loss_gradients(
            &pred_local_confs[v],
            &pred_locals[v],
            &gt_locals[v],
            gt_locals[v].valid_mask(),
            cfg,
        )?;
        out.d_global_points.push(dg);
        out.d_global_conf.push(dgc);
        out.d_local_points.push(dl);
        out.d_local_conf.push(dlc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Frame;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn pm(points: Vec<Vec3>, h: usize, w: usize) -> Pointmap {
        let n = points.len();
        Pointmap::new(h, w, Frame::Global, points, vec![true; n]).unwrap()
    }

    fn random_pm(rng: &mut impl Rng, h: usize, w: usize) -> Pointmap {
        pm(
            (0..h * w)
                .map(|_| {
                    Vec3::new(
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(0.5..3.0),
                    )
                })
                .collect(),
            h,
            w,
        )
    }

    fn random_conf(rng: &mut impl Rng, h: usize, w: usize) -> ConfidenceMap {
        ConfidenceMap::new(
            h,
            w,
            (0..h * w).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn mean_norm_cases() {
        let m = pm(vec![Vec3::new(3.0, 4.0, 0.0)], 1, 1);
        assert_relative_eq!(mean_euclidean_norm(&m, &[true]).unwrap(), 5.0);

        let m = pm(vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0)], 1, 2);
        assert_relative_eq!(mean_euclidean_norm(&m, &[true, true]).unwrap(), 1.5);

        let m = pm(vec![Vec3::zeros(), Vec3::zeros()], 1, 2);
        assert!(matches!(
            mean_euclidean_norm(&m, &[true, true]),
            Err(LossError::DegenerateScale(_))
        ));

        let m = pm(vec![Vec3::new(1.0, 0.0, 0.0)], 1, 1);
        assert!(matches!(
            mean_euclidean_norm(&m, &[false]),
            Err(LossError::EmptyMask)
        ));
    }

    #[test]
    fn regression_loss_zero_on_match_and_scale() {
        let mut rng = ChaCha12Rng::seed_from_u64(20);
        let target = random_pm(&mut rng, 3, 3);
        let mask = vec![true; 9];
        let l = normalized_regression_loss(&target, &target, &mask).unwrap();
        assert!(l.iter().all(|&v| v < 1e-12));

        for c in [0.1, 1.0, 7.3] {
            let scaled = pm(target.points().iter().map(|p| c * p).collect(), 3, 3);
            let l = normalized_regression_loss(&scaled, &target, &mask).unwrap();
            assert!(l.iter().all(|&v| v < 1e-9), "scale {c} broke invariance");
        }
    }

    #[test]
    fn regression_loss_single_pixel_analytic() {
        let pred = pm(vec![Vec3::new(0.0, 2.0, 0.0)], 1, 1);
        let target = pm(vec![Vec3::new(1.0, 0.0, 0.0)], 1, 1);
        let l = normalized_regression_loss(&pred, &target, &[true]).unwrap();
        assert_relative_eq!(l[0], 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn regression_loss_not_rotation_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let target = random_pm(&mut rng, 3, 3);
        let rot = crate::geometry::RotationMatrix::from_axis_angle(
            &Vec3::new(0.0, 0.0, 1.0),
            0.7,
        );
        let rotated = pm(target.points().iter().map(|p| rot.apply(p)).collect(), 3, 3);
        let mask = vec![true; 9];
        let l = normalized_regression_loss(&rotated, &target, &mask).unwrap();
        assert!(l.iter().any(|&v| v > 1e-3));
    }

    #[test]
    fn confidence_positive_cases() {
        let c = confidence_positive(&[0.0, -20.0]);
        assert_relative_eq!(c[0], 2.0);
        assert_relative_eq!(c[1], 1.0 + (-20.0f64).exp(), epsilon = 1e-15);
        // Monotone.
        let vals = confidence_positive(&[-1.0, 0.0, 1.0, 2.0]);
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn pointmap_loss_perfect_prediction_is_alpha_log2() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let target = random_pm(&mut rng, 2, 2);
        let conf = ConfidenceMap::uniform(2, 2, 0.0);
        let cfg = LossConfig {
            alpha: 0.2,
            confidence_reg_sign: 1.0,
        };
        let l = pointmap_loss(&conf, &target, &target, &[true; 4], &cfg).unwrap();
        assert_relative_eq!(l, 0.2 * 2f64.ln(), epsilon = 1e-12);

        let cfg0 = LossConfig {
            alpha: 0.0,
            ..cfg
        };
        let l0 = pointmap_loss(&conf, &target, &target, &[true; 4], &cfg0).unwrap();
        assert!(l0.abs() < 1e-12);
    }

    #[test]
    fn pointmap_loss_linear_in_uniform_confidence() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let target = random_pm(&mut rng, 3, 3);
        let pred = random_pm(&mut rng, 3, 3);
        let mask = vec![true; 9];
        let cfg = LossConfig {
            alpha: 0.0,
            confidence_reg_sign: 1.0,
        };
        let l_grid = normalized_regression_loss(&pred, &target, &mask).unwrap();
        let mean_l: f64 = l_grid.iter().sum::<f64>() / 9.0;
        for sigma in [-1.0, 0.0, 1.5] {
            let conf = ConfidenceMap::uniform(3, 3, sigma);
            let l = pointmap_loss(&conf, &pred, &target, &mask, &cfg).unwrap();
            assert_relative_eq!(l, (1.0 + sigma.exp()) * mean_l, epsilon = 1e-9);
        }
    }

    #[test]
    fn pointmap_loss_monotone_in_confidence_when_zero_error() {
        let mut rng = ChaCha12Rng::seed_from_u64(24);
        let target = random_pm(&mut rng, 2, 2);
        let cfg = LossConfig::default();
        let mut prev = f64::NEG_INFINITY;
        for sigma in [-5.0, -1.0, 0.0, 1.0, 5.0] {
            let conf = ConfidenceMap::uniform(2, 2, sigma);
            let l = pointmap_loss(&conf, &target, &target, &[true; 4], &cfg).unwrap();
            assert!(l > prev);
            prev = l;
        }
    }

    fn make_views(
        rng: &mut impl Rng,
        n: usize,
        h: usize,
        w: usize,
    ) -> (
        Vec<Pointmap>,
        Vec<ConfidenceMap>,
        Vec<Pointmap>,
        Vec<ConfidenceMap>,
        Vec<Pointmap>,
        Vec<Pointmap>,
    ) {
        let gt_locals: Vec<Pointmap> = (0..n).map(|_| random_pm(rng, h, w)).collect();
        let gt_globals: Vec<Pointmap> = (0..n).map(|_| random_pm(rng, h, w)).collect();
        let pred_locals: Vec<Pointmap> = (0..n).map(|_| random_pm(rng, h, w)).collect();
        let pred_globals: Vec<Pointmap> = (0..n).map(|_| random_pm(rng, h, w)).collect();
        let lc: Vec<ConfidenceMap> = (0..n).map(|_| random_conf(rng, h, w)).collect();
        let gc: Vec<ConfidenceMap> = (0..n).map(|_| random_conf(rng, h, w)).collect();
        (pred_locals, lc, pred_globals, gc, gt_locals, gt_globals)
    }

    #[test]
    fn total_loss_perfect_prediction() {
        let mut rng = ChaCha12Rng::seed_from_u64(25);
        let n = 3;
        let gt_locals: Vec<Pointmap> = (0..n).map(|_| random_pm(&mut rng, 2, 2)).collect();
        let gt_globals: Vec<Pointmap> = (0..n).map(|_| random_pm(&mut rng, 2, 2)).collect();
        let confs: Vec<ConfidenceMap> = (0..n).map(|_| ConfidenceMap::uniform(2, 2, 0.0)).collect();
        let cfg = LossConfig::default();
        let report = total_loss(
            &gt_locals, &confs, &gt_globals, &confs, &gt_locals, &gt_globals, &cfg,
        )
        .unwrap();
        assert_relative_eq!(
            report.total,
            2.0 * n as f64 * 0.2 * 2f64.ln(),
            epsilon = 1e-10
        );

        // Doubling alpha doubles the loss when the regression term vanishes.
        let cfg2 = LossConfig {
            alpha: 0.4,
            ..cfg
        };
        let report2 = total_loss(
            &gt_locals, &confs, &gt_globals, &confs, &gt_locals, &gt_globals, &cfg2,
        )
        .unwrap();
        assert_relative_eq!(report2.total, 2.0 * report.total, epsilon = 1e-10);
    }

    #[test]
    fn total_equals_sum_of_parts() {
        let mut rng = ChaCha12Rng::seed_from_u64(26);
        let (pl, lc, pg, gc, gl, gg) = make_views(&mut rng, 4, 3, 3);
        let report = total_loss(&pl, &lc, &pg, &gc, &gl, &gg, &LossConfig::default()).unwrap();
        assert_relative_eq!(
            report.total,
            report.global_sum() + report.local_sum(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn total_loss_permutation_covariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(27);
        let (pl, lc, pg, gc, gl, gg) = make_views(&mut rng, 4, 3, 3);
        let cfg = LossConfig::default();
        let base = total_loss(&pl, &lc, &pg, &gc, &gl, &gg, &cfg).unwrap();
        let perm = [0usize, 2, 3, 1];
        let ap = |v: &[Pointmap]| -> Vec<Pointmap> { perm.iter().map(|&i| v[i].clone()).collect() };
        let ac = |v: &[ConfidenceMap]| -> Vec<ConfidenceMap> {
            perm.iter().map(|&i| v[i].clone()).collect()
        };
        let permuted = total_loss(&ap(&pl), &ac(&lc), &ap(&pg), &ac(&gc), &ap(&gl), &ap(&gg), &cfg)
            .unwrap();
        assert_relative_eq!(base.total, permuted.total, epsilon = 1e-9);
    }

    /// Central finite differences of `total_loss` w.r.t. one scalar slot.
    fn fd_total<F>(mut read: F, eps: f64) -> f64
    where
        F: FnMut(f64) -> f64,
    {
        (read(eps) - read(-eps)) / (2.0 * eps)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(28);
        for trial in 0..20 {
            let n = 1 + (trial % 3);
            let (pl, lc, pg, gc, gl, gg) = make_views(&mut rng, n, 3, 3);
            let cfg = LossConfig::default();
            let grads = loss_gradients(&pl, &lc, &pg, &gc, &gl, &gg, &cfg).unwrap();
            let eps = 1e-5;

            for v in 0..n {
                for i in 0..9 {
                    for axis in 0..3 {
                        let fd = fd_total(
                            |delta| {
                                let mut p = pg.clone();
                                p[v].points_mut()[i][axis] += delta;
                                total_loss(&pl, &lc, &p, &gc, &gl, &gg, &cfg).unwrap().total
                            },
                            eps,
                        );
                        let an = grads.d_global_points[v][i][axis];
                        let scale = fd.abs().max(an.abs()).max(1e-8);
                        assert!(
                            (fd - an).abs() / scale < 1e-6,
                            "global pt grad v={v} i={i} axis={axis}: fd={fd} an={an}"
                        );
                    }
                    let fd = fd_total(
                        |delta| {
                            let mut c = gc.clone();
                            let mut raw = c[v].raw().to_vec();
                            raw[i] += delta;
                            c[v] = ConfidenceMap::new(3, 3, raw).unwrap();
                            total_loss(&pl, &lc, &pg, &c, &gl, &gg, &cfg).unwrap().total
                        },
                        eps,
                    );
                    let an = grads.d_global_conf[v][i];
                    let scale = fd.abs().max(an.abs()).max(1e-8);
                    assert!(
                        (fd - an).abs() / scale < 1e-6,
                        "conf grad v={v} i={i}: fd={fd} an={an}"
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_at_perfect_prediction_is_alpha_sigmoid_over_m() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let t = random_pm(&mut rng, 2, 2);
        let conf = random_conf(&mut rng, 2, 2);
        let cfg = LossConfig::default();
        let grads = loss_gradients(
            &[t.clone()],
            &[conf.clone()],
            &[t.clone()],
            &[conf.clone()],
            &[t.clone()],
            &[t.clone()],
            &cfg,
        )
        .unwrap();
        // With l = 0 the confidence gradient reduces to
        // alpha * sigmoid(raw) / M per pixel (M = 4 valid pixels here).
        for i in 0..4 {
            let sig = 1.0 / (1.0 + (-conf.raw()[i]).exp());
            assert_relative_eq!(
                grads.d_global_conf[0][i],
                cfg.alpha * sig / 4.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn masked_pixels_get_zero_gradient() {
        let mut rng = ChaCha12Rng::seed_from_u64(30);
        let mut gt = random_pm(&mut rng, 3, 3);
        gt.valid_mask_mut()[4] = false;
        let pred = random_pm(&mut rng, 3, 3);
        let conf = random_conf(&mut rng, 3, 3);
        let grads = loss_gradients(
            &[pred.clone()],
            &[conf.clone()],
            &[pred.clone()],
            &[conf.clone()],
            &[gt.clone()],
            &[gt.clone()],
            &LossConfig::default(),
        )
        .unwrap();
        assert_eq!(grads.d_global_points[0][4], Vec3::zeros());
        assert_eq!(grads.d_global_conf[0][4], 0.0);
        assert_eq!(grads.d_local_points[0][4], Vec3::zeros());
    }
}
