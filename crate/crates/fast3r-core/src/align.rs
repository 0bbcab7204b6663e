//! Point-set registration: weighted Umeyama similarity/rigid fitting and the
//! local-to-global pointmap alignment used for reconstruction.
//!
//! Correspondences between a view's local and global pointmaps are free (the
//! same pixel indexes both maps), so the alignment is a single closed-form
//! solve, optionally iterated with residual trimming to shrug off corrupted
//! regions in noisy predictions.

use crate::geometry::{
    ConfidenceMap, Pointmap, RotationMatrix, SimilarityTransform, Vec3,
};
use nalgebra::Matrix3;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("point/weight counts disagree: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Closed-form weighted least-squares fit of `dst ~ s R src + t`.
///
/// Minimizes `sum_i w_i ||s R src_i + t - dst_i||^2`. With `with_scale =
/// false` the returned scale is exactly 1. The rotation is always proper
/// (det = +1); a reflection-optimal covariance is corrected through the sign
/// of its smallest singular value.
pub fn weighted_umeyama(
    src: &[Vec3],
    dst: &[Vec3],
    weights: &[f64],
    with_scale: bool,
) -> Result<SimilarityTransform, AlignError> {
    if src.len() != dst.len() {
        return Err(AlignError::LengthMismatch(src.len(), dst.len()));
    }
    if src.len() != weights.len() {
        return Err(AlignError::LengthMismatch(src.len(), weights.len()));
    }
    if src.len() < 3 {
        return Err(AlignError::DegenerateConfiguration(format!(
            "need at least 3 correspondences, got {}",
            src.len()
        )));
    }
    let w_sum: f64 = weights.iter().sum();
    if !(w_sum.is_finite() && w_sum > 0.0) {
        return Err(AlignError::DegenerateConfiguration(
            "weights sum to zero".into(),
        ));
    }

    let mut mu_src = Vec3::zeros();
    let mut mu_dst = Vec3::zeros();
    for ((s, d), &w) in src.iter().zip(dst).zip(weights) {
        mu_src += w * s;
        mu_dst += w * d;
    }
    mu_src /= w_sum;
    mu_dst /= w_sum;

    // Weighted covariance of centered pairs and source variance.
    let mut cov = Matrix3::<f64>::zeros();
    let mut var_src = 0.0;
    for ((s, d), &w) in src.iter().zip(dst).zip(weights) {
        let cs = s - mu_src;
        let cd = d - mu_dst;
        cov += w * cd * cs.transpose();
        var_src += w * cs.norm_squared();
    }
    cov /= w_sum;
    var_src /= w_sum;

    if var_src < 1e-18 {
        return Err(AlignError::DegenerateConfiguration(
            "source points are coincident".into(),
        ));
    }

    let svd = cov.svd(true, true);
    let u = svd.u.ok_or_else(|| {
        AlignError::DegenerateConfiguration("SVD failed to converge".into())
    })?;
    let v_t = svd.v_t.ok_or_else(|| {
        AlignError::DegenerateConfiguration("SVD failed to converge".into())
    })?;
    // Rank < 2 leaves the in-plane rotation unconstrained.
    if svd.singular_values[1] < 1e-14 * svd.singular_values[0].max(1e-300) {
        return Err(AlignError::DegenerateConfiguration(
            "covariance is rank deficient (collinear points)".into(),
        ));
    }

    let mut s_diag = Vec3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        s_diag.z = -1.0;
    }
    let r = u * Matrix3::from_diagonal(&s_diag) * v_t;
    let rotation = RotationMatrix::from_matrix_unchecked(r).renormalized();

    let scale = if with_scale {
        let sv = &svd.singular_values;
        let trace_ds = sv[0] * s_diag.x + sv[1] * s_diag.y + sv[2] * s_diag.z;
        let s = trace_ds / var_src;
        if !(s.is_finite() && s > 0.0) {
            return Err(AlignError::DegenerateConfiguration(format!(
                "non-positive optimal scale {s}"
            )));
        }
        s
    } else {
        1.0
    };

    let translation = mu_dst - scale * rotation.apply(&mu_src);
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

/// Per-view alignment outcome.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// One transform per view; `None` where the solve was degenerate.
    pub transforms: Vec<Option<SimilarityTransform>>,
    /// Root-mean-square residual (meters) over the points used per view.
    pub residual_rms: Vec<f64>,
    /// Per-view errors for skipped views.
    pub errors: Vec<Option<AlignError>>,
}

/// Options for [`align_local_to_global`].
#[derive(Debug, Clone, Copy)]
pub struct AlignOptions {
    /// Weigh correspondences by the global confidence `sigma_plus`.
    pub confidence_weighting: bool,
    /// Solve for scale as well; default is rigid since both heads share the
    /// metric scale of the loss.
    pub with_scale: bool,
    /// Re-solve this many times, each round dropping residuals above
    /// 3x the median of the previous round.
    pub trim_rounds: usize,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions {
            confidence_weighting: true,
            with_scale: false,
            trim_rounds: 2,
        }
    }
}

/// Aligns each view's local pointmap onto the global pointmap (same-pixel
/// correspondences) and merges the aligned local points into one cloud.
///
/// Views whose solve is degenerate are reported and skipped; the merged cloud
/// contains the remaining views.
pub fn align_local_to_global(
    locals: &[Pointmap],
    globals: &[Pointmap],
    global_confs: Option<&[ConfidenceMap]>,
    opts: &AlignOptions,
) -> Result<(Vec<Vec3>, AlignmentResult), AlignError> {
    if locals.len() != globals.len() {
        return Err(AlignError::LengthMismatch(locals.len(), globals.len()));
    }
    let n = locals.len();
    let mut transforms = Vec::with_capacity(n);
    let mut residual_rms = Vec::with_capacity(n);
    let mut errors = Vec::with_capacity(n);
    let mut merged = Vec::new();

    for v in 0..n {
        let local = &locals[v];
        let global = &globals[v];
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut w = Vec::new();
        for (i, p) in local.valid_points() {
            if !global.valid_mask()[i] {
                continue;
            }
            src.push(*p);
            dst.push(global.points()[i]);
            let weight = match (opts.confidence_weighting, global_confs) {
                (true, Some(confs)) => 1.0 + confs[v].raw()[i].exp(),
                _ => 1.0,
            };
            w.push(weight);
        }

        match solve_trimmed(&src, &dst, &w, opts) {
            Ok((t, rms)) => {
                for p in &src {
                    merged.push(t.apply(p));
                }
                transforms.push(Some(t));
                residual_rms.push(rms);
                errors.push(None);
            }
            Err(e) => {
                transforms.push(None);
                residual_rms.push(f64::NAN);
                errors.push(Some(e));
            }
        }
    }

    Ok((
        merged,
        AlignmentResult {
            transforms,
            residual_rms,
            errors,
        },
    ))
}

fn solve_trimmed(
    src: &[Vec3],
    dst: &[Vec3],
    weights: &[f64],
    opts: &AlignOptions,
) -> Result<(SimilarityTransform, f64), AlignError> {
    let mut keep: Vec<usize> = (0..src.len()).collect();
    let mut best = None;
    for round in 0..=opts.trim_rounds {
        let s: Vec<Vec3> = keep.iter().map(|&i| src[i]).collect();
        let d: Vec<Vec3> = keep.iter().map(|&i| dst[i]).collect();
        let w: Vec<f64> = keep.iter().map(|&i| weights[i]).collect();
        let t = weighted_umeyama(&s, &d, &w, opts.with_scale)?;

        let residuals: Vec<f64> = s
            .iter()
            .zip(&d)
            .map(|(p, q)| (t.apply(p) - q).norm())
            .collect();
        let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
        best = Some((t, rms));

        if round == opts.trim_rounds {
            break;
        }
        let mut sorted = residuals.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = sorted[sorted.len() / 2];
        let cutoff = 3.0 * median;
        let next: Vec<usize> = keep
            .iter()
            .zip(&residuals)
            .filter(|(_, &r)| r <= cutoff)
            .map(|(&i, _)| i)
            .collect();
        // Keep the previous solution rather than trim below solvability.
        if next.len() < 3 || next.len() == keep.len() {
            break;
        }
        keep = next;
    }
    Ok(best.expect("at least one round runs"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Frame;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_points(rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                )
            })
            .collect()
    }

    fn random_similarity(rng: &mut impl Rng) -> SimilarityTransform {
        let axis = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let axis = if axis.norm() < 1e-6 {
            Vec3::new(0.0, 1.0, 0.0)
        } else {
            axis
        };
        SimilarityTransform {
            scale: rng.gen_range(0.2..4.0),
            rotation: RotationMatrix::from_axis_angle(
                &axis,
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            ),
            translation: Vec3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ),
        }
    }

    #[test]
    fn identity_when_dst_equals_src() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let pts = random_points(&mut rng, 20);
        let t = weighted_umeyama(&pts, &pts, &vec![1.0; 20], true).unwrap();
        assert!(t.rotation.matrix()[(0, 0)] > 1.0 - 1e-12);
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(t.translation.norm() < 1e-12);
    }

    #[test]
    fn recovers_known_similarity() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let src = random_points(&mut rng, 30);
        let rot = RotationMatrix::from_axis_angle(&Vec3::new(0.0, 0.0, 1.0), 30f64.to_radians());
        let truth = SimilarityTransform {
            scale: 2.0,
            rotation: rot,
            translation: Vec3::new(1.0, 0.0, 0.0),
        };
        let dst: Vec<Vec3> = src.iter().map(|p| truth.apply(p)).collect();
        let t = weighted_umeyama(&src, &dst, &vec![1.0; 30], true).unwrap();
        assert!((t.scale - 2.0).abs() < 1e-9);
        assert!((t.rotation.matrix() - truth.rotation.matrix()).abs().max() < 1e-9);
        assert!((t.translation - truth.translation).norm() < 1e-9);
    }

    #[test]
    fn rigid_mode_returns_unit_scale() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let src = random_points(&mut rng, 15);
        let truth = random_similarity(&mut rng);
        let dst: Vec<Vec3> = src.iter().map(|p| truth.apply(p)).collect();
        let t = weighted_umeyama(&src, &dst, &vec![1.0; 15], false).unwrap();
        assert_eq!(t.scale, 1.0);
    }

    #[test]
    fn reflection_corrected_on_coplanar_points() {
        // Coplanar source, destination mirrored through the plane: the
        // unconstrained optimum is a reflection, the returned rotation must
        // still be proper.
        let src = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.3, 0.7, 0.0),
        ];
        let dst: Vec<Vec3> = src.iter().map(|p| Vec3::new(p.y, p.x, 0.0)).collect();
        let t = weighted_umeyama(&src, &dst, &vec![1.0; 5], false).unwrap();
        assert!(t.rotation.matrix().determinant() > 0.0);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let src: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let dst = src.clone();
        assert!(matches!(
            weighted_umeyama(&src, &dst, &vec![1.0; 5], false),
            Err(AlignError::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn zero_weights_rejected() {
        let src = vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        assert!(weighted_umeyama(&src, &src, &vec![0.0; 3], false).is_err());
    }

    #[test]
    fn weights_steer_the_fit() {
        // Two clusters demanding different translations: the heavier cluster
        // must dominate.
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut w = Vec::new();
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..20 {
            let p = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            src.push(p);
            dst.push(p); // heavy cluster wants identity
            w.push(100.0);
            src.push(p);
            dst.push(p + Vec3::new(1.0, 0.0, 0.0)); // light cluster wants a shift
            w.push(0.01);
        }
        let t = weighted_umeyama(&src, &dst, &w, false).unwrap();
        assert!(t.translation.norm() < 0.01);
    }

    fn consistent_maps(
        rng: &mut impl Rng,
        n_views: usize,
        side: usize,
    ) -> (Vec<Pointmap>, Vec<Pointmap>, Vec<SimilarityTransform>) {
        let mut locals = Vec::new();
        let mut globals = Vec::new();
        let mut truths = Vec::new();
        for _ in 0..n_views {
            let pts = random_points(rng, side * side);
            let t = SimilarityTransform {
                scale: 1.0,
                ..random_similarity(rng)
            };
            let gpts: Vec<Vec3> = pts.iter().map(|p| t.apply(p)).collect();
            locals.push(
                Pointmap::new(side, side, Frame::Local, pts, vec![true; side * side]).unwrap(),
            );
            globals.push(
                Pointmap::new(side, side, Frame::Global, gpts, vec![true; side * side]).unwrap(),
            );
            truths.push(t);
        }
        (locals, globals, truths)
    }

    #[test]
    fn consistent_bundle_aligns_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let (locals, globals, truths) = consistent_maps(&mut rng, 3, 4);
        let (merged, result) =
            align_local_to_global(&locals, &globals, None, &AlignOptions::default()).unwrap();
        assert_eq!(merged.len(), 3 * 16);
        for (i, rms) in result.residual_rms.iter().enumerate() {
            assert!(*rms < 1e-9, "view {i} rms {rms}");
        }
        for (t, truth) in result.transforms.iter().zip(&truths) {
            let t = t.as_ref().unwrap();
            assert!((t.rotation.matrix() - truth.rotation.matrix()).abs().max() < 1e-9);
        }
        // Merged cloud equals the global cloud.
        let mut k = 0;
        for g in &globals {
            for p in g.points() {
                assert!((merged[k] - p).norm() < 1e-9);
                k += 1;
            }
        }
    }

    #[test]
    fn degenerate_view_skipped_others_succeed() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let (mut locals, globals, _) = consistent_maps(&mut rng, 2, 4);
        // Collapse view 0's local points onto a line.
        for (i, p) in locals[0].points_mut().iter_mut().enumerate() {
            *p = Vec3::new(i as f64, 0.0, 0.0);
        }
        let (_, result) =
            align_local_to_global(&locals, &globals, None, &AlignOptions::default()).unwrap();
        assert!(result.transforms[0].is_none());
        assert!(result.errors[0].is_some());
        assert!(result.transforms[1].is_some());
        assert!(result.residual_rms[1] < 1e-9);
    }

    #[test]
    fn confidence_weighting_downweights_corrupted_region() {
        let mut rng = ChaCha12Rng::seed_from_u64(16);
        let side = 8;
        let (locals, mut globals, _) = consistent_maps(&mut rng, 1, side);
        // Corrupt a block of the global map and mark it low-confidence.
        let mut raw = vec![10.0; side * side];
        for i in 0..(side * side / 5) {
            globals[0].points_mut()[i] += Vec3::new(0.5, -0.3, 0.8);
            raw[i] = -20.0;
        }
        let confs = vec![ConfidenceMap::new(side, side, raw).unwrap()];

        let clean_rms = |locals: &[Pointmap], globals: &[Pointmap], opts: &AlignOptions| {
            let (_, res) = align_local_to_global(locals, globals, Some(&confs), opts).unwrap();
            let t = res.transforms[0].clone().unwrap();
            // Residuals over the clean region only.
            let mut sq = 0.0;
            let mut n = 0;
            for i in (side * side / 5)..(side * side) {
                let r = (t.apply(&locals[0].points()[i]) - globals[0].points()[i]).norm();
                sq += r * r;
                n += 1;
            }
            (sq / n as f64).sqrt()
        };

        let weighted = clean_rms(
            &locals,
            &globals,
            &AlignOptions {
                confidence_weighting: true,
                trim_rounds: 0,
                ..AlignOptions::default()
            },
        );
        let unweighted = clean_rms(
            &locals,
            &globals,
            &AlignOptions {
                confidence_weighting: false,
                trim_rounds: 0,
                ..AlignOptions::default()
            },
        );
        assert!(
            weighted < unweighted / 100.0,
            "weighted {weighted} should beat unweighted {unweighted}"
        );
    }

    #[test]
    fn umeyama_recovery_sweep() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..100 {
            let src = random_points(&mut rng, 25);
            let truth = random_similarity(&mut rng);
            let dst: Vec<Vec3> = src.iter().map(|p| truth.apply(p)).collect();
            let t = weighted_umeyama(&src, &dst, &vec![1.0; 25], true).unwrap();
            assert!((t.rotation.matrix() - truth.rotation.matrix()).abs().max() < 1e-9);
            assert!((t.translation - truth.translation).norm() < 1e-9);
            assert!((t.scale - truth.scale).abs() < 1e-9);
        }
    }
}
