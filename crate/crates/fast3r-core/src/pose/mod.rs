//! Camera recovery from predicted global pointmaps: confidence filtering,
//! a deterministic focal-candidate sweep scored by RANSAC-PnP outlier
//! counts, and Gauss-Newton refinement of the winning pose (and focal).
//!
//! Correspondences are free: the 3D point a pixel predicts pairs with the
//! pixel itself.

mod p3p;

pub use p3p::solve_p3p;

use nalgebra::{Matrix3, SMatrix, SVector};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{
    invert, project, CameraIntrinsics, CameraModel, ConfidenceMap, Pointmap, RigidTransform,
    RotationMatrix, Vec3,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("too few points: {got} available, {needed} needed")]
    TooFewPoints { got: usize, needed: usize },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("no consensus: best inlier count {best} below the floor of {floor}")]
    NoConsensus { best: usize, floor: usize },
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Reprojection inlier threshold in pixels.
    pub inlier_threshold_px: f64,
    /// Fraction of valid pixels kept by confidence filtering.
    pub confidence_fraction: f64,
    /// Floor on the number of filtered points per view. The fraction rule
    /// is calibrated for high-resolution images; at desk-scale resolutions
    /// it would keep a handful of clustered pixels and leave PnP ill-posed.
    pub min_filtered_points: usize,
    pub focal_candidate_count: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            iterations: 512,
            inlier_threshold_px: 2.0,
            confidence_fraction: 0.15,
            min_filtered_points: 48,
            focal_candidate_count: 16,
            seed: 0,
        }
    }
}

/// Minimum consensus for a pose to count as found at all.
pub const MIN_INLIERS: usize = 6;

const REFINE_ITERS: usize = 10;
const FOV_MIN_DEG: f64 = 25.0;
const FOV_MAX_DEG: f64 = 120.0;
const FOV_MID_DEG: f64 = 72.5;

#[derive(Debug, Clone)]
pub struct PoseEstimate {
    pub camera: CameraModel,
    pub inlier_count: usize,
    pub outlier_count: usize,
    /// Outlier count of the focal candidate that won the sweep
    /// (lower is better); equals `outlier_count` when the focal was fixed.
    pub focal_score: usize,
}

/// Selects the highest-confidence fraction of valid pixels, with a floor of
/// three and row-major order breaking ties deterministically.
pub fn confidence_top_fraction(
    conf: &ConfidenceMap,
    mask: &[bool],
    fraction: f64,
) -> Result<Vec<bool>, PoseError> {
    assert_eq!(conf.raw().len(), mask.len(), "confidence/mask size mismatch");
    let valid: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if valid.len() < 3 {
        return Err(PoseError::TooFewPoints {
            got: valid.len(),
            needed: 3,
        });
    }
    let want = ((fraction * valid.len() as f64).ceil() as usize).max(3).min(valid.len());
    let mut order = valid;
    let raw = conf.raw();
    order.sort_by(|&a, &b| raw[b].partial_cmp(&raw[a]).unwrap().then(a.cmp(&b)));
    let mut selected = vec![false; mask.len()];
    for &i in order.iter().take(want) {
        selected[i] = true;
    }
    Ok(selected)
}

/// Deterministic focal sweep: focals for horizontal fields of view uniformly
/// spaced over [25, 120] degrees.
pub fn focal_candidates(_h: usize, w: usize, count: usize) -> Vec<f64> {
    assert!(count >= 1);
    let fov_of = |i: usize| {
        if count == 1 {
            FOV_MID_DEG
        } else {
            FOV_MIN_DEG + (FOV_MAX_DEG - FOV_MIN_DEG) * i as f64 / (count - 1) as f64
        }
    };
    (0..count)
        .map(|i| (w as f64 / 2.0) / (fov_of(i).to_radians() / 2.0).tan())
        .collect()
}

fn fov_of_focal(f: f64, w: usize) -> f64 {
    2.0 * ((w as f64 / 2.0) / f).atan().to_degrees()
}

fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn so3_exp(w: &Vec3) -> RotationMatrix {
    let theta = w.norm();
    if theta < 1e-12 {
        return RotationMatrix::from_matrix_unchecked(Matrix3::identity() + skew(w));
    }
    let k = skew(&(w / theta));
    let m = Matrix3::identity() + theta.sin() * k + (1.0 - theta.cos()) * (k * k);
    RotationMatrix::from_matrix_unchecked(m)
}

fn reprojection_error(w2c: &RigidTransform, k: &CameraIntrinsics, p: &Vec3, px: (f64, f64)) -> f64 {
    match project(&w2c.apply(p), k) {
        Ok((u, v)) => (u - px.0).hypot(v - px.1),
        Err(_) => f64::INFINITY,
    }
}

fn count_inliers(
    w2c: &RigidTransform,
    k: &CameraIntrinsics,
    pts: &[Vec3],
    px: &[(f64, f64)],
    threshold: f64,
) -> usize {
    pts.iter()
        .zip(px)
        .filter(|(p, &uv)| reprojection_error(w2c, k, p, uv) < threshold)
        .count()
}

/// Inlier count plus the summed squared error over inliers, the secondary
/// RANSAC score breaking ties between equally supported poses.
fn score_pose(
    w2c: &RigidTransform,
    k: &CameraIntrinsics,
    pts: &[Vec3],
    px: &[(f64, f64)],
    threshold: f64,
) -> (usize, f64) {
    let mut count = 0;
    let mut sse = 0.0;
    for (p, &uv) in pts.iter().zip(px) {
        let e = reprojection_error(w2c, k, p, uv);
        if e < threshold {
            count += 1;
            sse += e * e;
        }
    }
    (count, sse)
}

/// Gauss-Newton on inlier reprojection error over the world-to-camera pose,
/// optionally also over the focal length.
fn refine_pose(
    mut w2c: RigidTransform,
    mut focal: f64,
    refine_focal: bool,
    k_template: &CameraIntrinsics,
    pts: &[Vec3],
    px: &[(f64, f64)],
) -> (RigidTransform, f64) {
    let dims = if refine_focal { 7 } else { 6 };
    for _ in 0..REFINE_ITERS {
        let mut jtj = SMatrix::<f64, 7, 7>::zeros();
        let mut jtr = SVector::<f64, 7>::zeros();
        for (p, &(u_obs, v_obs)) in pts.iter().zip(px) {
            let q = w2c.apply(p);
            if q.z <= 1e-9 {
                continue;
            }
            let (inv_z, x, y) = (1.0 / q.z, q.x, q.y);
            let u = focal * x * inv_z + k_template.cx;
            let v = focal * y * inv_z + k_template.cy;
            let r = [u - u_obs, v - v_obs];
            // d(pixel)/d(camera point)
            let duq = [
                focal * inv_z,
                0.0,
                -focal * x * inv_z * inv_z,
            ];
            let dvq = [
                0.0,
                focal * inv_z,
                -focal * y * inv_z * inv_z,
            ];
            // d(camera point)/d(state): rotation (left perturbation) is
            // -skew(R p), translation is identity.
            let rp = w2c.rotation.apply(p);
            let dq_dw = -skew(&rp);
            let mut ju = SVector::<f64, 7>::zeros();
            let mut jv = SVector::<f64, 7>::zeros();
            for c in 0..3 {
                let (mut au, mut av) = (0.0, 0.0);
                for rrow in 0..3 {
                    au += duq[rrow] * dq_dw[(rrow, c)];
                    av += dvq[rrow] * dq_dw[(rrow, c)];
                }
                ju[c] = au;
                jv[c] = av;
                ju[3 + c] = duq[c];
                jv[3 + c] = dvq[c];
            }
            if refine_focal {
                ju[6] = x * inv_z;
                jv[6] = y * inv_z;
            }
            jtj.ger(1.0, &ju, &ju, 1.0);
            jtj.ger(1.0, &jv, &jv, 1.0);
            jtr += ju * r[0] + jv * r[1];
        }
        if !refine_focal {
            jtj[(6, 6)] = 1.0;
            jtr[6] = 0.0;
        }
        for i in 0..dims {
            jtj[(i, i)] += 1e-12;
        }
        let delta = match jtj.lu().solve(&(-jtr)) {
            Some(d) => d,
            None => break,
        };
        let dw = Vec3::new(delta[0], delta[1], delta[2]);
        let dt = Vec3::new(delta[3], delta[4], delta[5]);
        w2c = RigidTransform::new(
            (so3_exp(&dw) * w2c.rotation).renormalized(),
            w2c.translation + dt,
        );
        if refine_focal {
            focal = (focal + delta[6]).max(1e-3);
        }
        if delta.norm() < 1e-14 {
            break;
        }
    }
    (w2c, focal)
}

/// Robust PnP: sample minimal triples, solve, score by inliers, refine the
/// best pose with Gauss-Newton on its inliers. Deterministic given the rng.
pub fn ransac_pnp(
    pts: &[Vec3],
    px: &[(f64, f64)],
    k: &CameraIntrinsics,
    cfg: &RansacConfig,
    rng: &mut ChaCha12Rng,
) -> Result<PoseEstimate, PoseError> {
    if pts.len() < 4 {
        return Err(PoseError::TooFewPoints {
            got: pts.len(),
            needed: 4,
        });
    }
    let n = pts.len();
    let mut best: Option<(usize, f64, RigidTransform)> = None;
    let mut saw_candidate = false;

    for _ in 0..cfg.iterations {
        let mut idx = [0usize; 3];
        idx[0] = rng.gen_range(0..n);
        loop {
            idx[1] = rng.gen_range(0..n);
            if idx[1] != idx[0] {
                break;
            }
        }
        loop {
            idx[2] = rng.gen_range(0..n);
            if idx[2] != idx[0] && idx[2] != idx[1] {
                break;
            }
        }
        let tri = [pts[idx[0]], pts[idx[1]], pts[idx[2]]];
        let pix = [px[idx[0]], px[idx[1]], px[idx[2]]];
        let solutions = match solve_p3p(&tri, &pix, k) {
            Ok(s) => s,
            Err(_) => continue,
        };
        for c2w in solutions {
            saw_candidate = true;
            let w2c = invert(&c2w);
            let (inliers, sse) = score_pose(&w2c, k, pts, px, cfg.inlier_threshold_px);
            let better = match &best {
                None => true,
                Some((bi, bs, _)) => inliers > *bi || (inliers == *bi && sse < *bs),
            };
            if better {
                best = Some((inliers, sse, w2c));
            }
        }
        // A full-support, near-zero-residual consensus cannot be beaten.
        if let Some((bi, bs, _)) = &best {
            if *bi == n && *bs < 1e-12 * n as f64 {
                break;
            }
        }
    }

    let (best_inliers, _, w2c) = match best {
        Some(b) => b,
        None => {
            return Err(if saw_candidate {
                PoseError::NoConsensus {
                    best: 0,
                    floor: MIN_INLIERS,
                }
            } else {
                PoseError::DegenerateConfiguration(
                    "no minimal sample produced a pose".into(),
                )
            })
        }
    };
    if best_inliers < MIN_INLIERS {
        return Err(PoseError::NoConsensus {
            best: best_inliers,
            floor: MIN_INLIERS,
        });
    }

    // Refine on the inlier set.
    let inlier_idx: Vec<usize> = (0..n)
        .filter(|&i| reprojection_error(&w2c, k, &pts[i], px[i]) < cfg.inlier_threshold_px)
        .collect();
    let in_pts: Vec<Vec3> = inlier_idx.iter().map(|&i| pts[i]).collect();
    let in_px: Vec<(f64, f64)> = inlier_idx.iter().map(|&i| px[i]).collect();
    let (w2c, _) = refine_pose(w2c, k.focal, false, k, &in_pts, &in_px);

    let inlier_count = count_inliers(&w2c, k, pts, px, cfg.inlier_threshold_px);
    Ok(PoseEstimate {
        camera: CameraModel {
            intrinsics: *k,
            pose: invert(&w2c),
        },
        inlier_count,
        outlier_count: n - inlier_count,
        focal_score: n - inlier_count,
    })
}

/// Correspondences for one view: every selected pixel's predicted global
/// point paired with the pixel center.
fn gather_correspondences(
    pm: &Pointmap,
    selected: &[bool],
) -> (Vec<Vec3>, Vec<(f64, f64)>) {
    let mut pts = Vec::new();
    let mut px = Vec::new();
    for row in 0..pm.height {
        for col in 0..pm.width {
            let i = row * pm.width + col;
            if selected[i] {
                pts.push(pm.points()[i]);
                px.push((col as f64 + 0.5, row as f64 + 0.5));
            }
        }
    }
    (pts, px)
}

/// Estimates one camera from its predicted global pointmap.
///
/// With `fixed_focal` the sweep is skipped. Otherwise every focal candidate
/// runs an independent RANSAC and the lowest outlier count wins (ties break
/// toward the middle of the FOV range), after which pose and focal are
/// polished jointly on the winner's inliers.
pub fn estimate_camera(
    global_pm: &Pointmap,
    conf: &ConfidenceMap,
    cfg: &RansacConfig,
    fixed_focal: Option<f64>,
) -> Result<PoseEstimate, PoseError> {
    // Honor the fraction rule but never starve the solver at small
    // resolutions: raise the effective fraction until the floor is met.
    let valid_count = global_pm.valid_mask().iter().filter(|&&m| m).count();
    let fraction = if valid_count > 0 {
        let floor = cfg.min_filtered_points.min(valid_count) as f64 / valid_count as f64;
        cfg.confidence_fraction.max(floor)
    } else {
        cfg.confidence_fraction
    };
    let selected = confidence_top_fraction(conf, global_pm.valid_mask(), fraction)?;
    let (pts, px) = gather_correspondences(global_pm, &selected);
    let (h, w) = (global_pm.height, global_pm.width);

    if let Some(f) = fixed_focal {
        let k = CameraIntrinsics::centered(f, w, h);
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        return ransac_pnp(&pts, &px, &k, cfg, &mut rng);
    }

    let candidates = focal_candidates(h, w, cfg.focal_candidate_count);
    let runs: Vec<(usize, Result<PoseEstimate, PoseError>)> = candidates
        .par_iter()
        .enumerate()
        .map(|(ci, &f)| {
            let k = CameraIntrinsics::centered(f, w, h);
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ (ci as u64).wrapping_mul(0x9E37));
            (ci, ransac_pnp(&pts, &px, &k, cfg, &mut rng))
        })
        .collect();

    let mut best: Option<(usize, PoseEstimate)> = None;
    let mut last_err = None;
    for (ci, run) in runs {
        match run {
            Ok(est) => {
                let better = match &best {
                    None => true,
                    Some((bci, b)) => {
                        est.outlier_count < b.outlier_count
                            || (est.outlier_count == b.outlier_count
                                && fov_dist(candidates[ci], w) < fov_dist(candidates[*bci], w))
                    }
                };
                if better {
                    best = Some((ci, est));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (_, est) = best.ok_or_else(|| {
        last_err.unwrap_or(PoseError::NoConsensus {
            best: 0,
            floor: MIN_INLIERS,
        })
    })?;
    let focal_score = est.outlier_count;

    // Joint pose + focal polish on the winner's inliers.
    let k = est.camera.intrinsics;
    let w2c = invert(&est.camera.pose);
    let inlier_idx: Vec<usize> = (0..pts.len())
        .filter(|&i| reprojection_error(&w2c, &k, &pts[i], px[i]) < cfg.inlier_threshold_px)
        .collect();
    let in_pts: Vec<Vec3> = inlier_idx.iter().map(|&i| pts[i]).collect();
    let in_px: Vec<(f64, f64)> = inlier_idx.iter().map(|&i| px[i]).collect();
    let (w2c, focal) = refine_pose(w2c, k.focal, true, &k, &in_pts, &in_px);
    let k = CameraIntrinsics::centered(focal, w, h);
    let inlier_count = count_inliers(&w2c, &k, &pts, &px, cfg.inlier_threshold_px);

    Ok(PoseEstimate {
        camera: CameraModel {
            intrinsics: k,
            pose: invert(&w2c),
        },
        inlier_count,
        outlier_count: pts.len() - inlier_count,
        focal_score,
    })
}

fn fov_dist(f: f64, w: usize) -> f64 {
    (fov_of_focal(f, w) - FOV_MID_DEG).abs()
}

/// Estimates every view's camera from predicted global pointmaps.
///
/// With `shared_camera` the focal estimated for view 1 is reused for all
/// views. Per-view estimations are independent and run in parallel;
/// failures are reported per view without aborting the rest.
pub fn estimate_all_cameras(
    global_pms: &[Pointmap],
    confs: &[ConfidenceMap],
    cfg: &RansacConfig,
    shared_camera: bool,
) -> Vec<Result<PoseEstimate, PoseError>> {
    assert_eq!(global_pms.len(), confs.len());
    if global_pms.is_empty() {
        return Vec::new();
    }

    if shared_camera {
        let first = estimate_camera(&global_pms[0], &confs[0], cfg, None);
        let shared_focal = first.as_ref().ok().map(|e| e.camera.intrinsics.focal);
        let mut rest: Vec<Result<PoseEstimate, PoseError>> = global_pms[1..]
            .par_iter()
            .zip(&confs[1..])
            .map(|(pm, c)| estimate_camera(pm, c, cfg, shared_focal))
            .collect();
        let mut out = Vec::with_capacity(global_pms.len());
        out.push(first);
        out.append(&mut rest);
        out
    } else {
        global_pms
            .par_iter()
            .zip(confs)
            .map(|(pm, c)| estimate_camera(pm, c, cfg, None))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotation_angle_deg, Frame};
    use rand::prelude::*;

    #[test]
    fn top_fraction_uniform_takes_row_major_prefix() {
        let conf = ConfidenceMap::uniform(10, 10, 1.0);
        let mask = vec![true; 100];
        let sel = confidence_top_fraction(&conf, &mask, 0.15).unwrap();
        let picked: Vec<usize> = (0..100).filter(|&i| sel[i]).collect();
        assert_eq!(picked, (0..15).collect::<Vec<_>>());
    }

    #[test]
    fn top_fraction_full_and_floor() {
        let conf = ConfidenceMap::uniform(4, 4, 0.0);
        let mask = vec![true; 16];
        let all = confidence_top_fraction(&conf, &mask, 1.0).unwrap();
        assert_eq!(all.iter().filter(|&&s| s).count(), 16);

        // A tiny fraction still keeps at least three points, and a strict
        // maximum is always among them.
        let mut raw = vec![0.0; 16];
        raw[7] = 5.0;
        let conf = ConfidenceMap::new(4, 4, raw).unwrap();
        let sel = confidence_top_fraction(&conf, &mask, 1e-6).unwrap();
        assert_eq!(sel.iter().filter(|&&s| s).count(), 3);
        assert!(sel[7]);
    }

    #[test]
    fn top_fraction_too_few_points() {
        let conf = ConfidenceMap::uniform(2, 2, 0.0);
        let mask = vec![true, false, false, false];
        assert!(matches!(
            confidence_top_fraction(&conf, &mask, 0.5),
            Err(PoseError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn focal_candidate_sweep_shape() {
        // 90 degree FOV at width 32 means f = 16.
        let f90 = (32.0 / 2.0) / (45f64.to_radians()).tan();
        assert!((f90 - 16.0).abs() < 1e-12);

        let single = focal_candidates(32, 32, 1);
        assert_eq!(single.len(), 1);
        let expected = (32.0 / 2.0) / (72.5f64.to_radians() / 2.0).tan();
        assert!((single[0] - expected).abs() < 1e-12);

        let cands = focal_candidates(32, 32, 16);
        assert!(cands.iter().all(|&f| f > 0.0));
        // FOV grid is increasing, so focals strictly decrease.
        assert!(cands.windows(2).all(|w| w[0] > w[1]));
    }

    fn synthetic_correspondences(
        rng: &mut ChaCha12Rng,
        n: usize,
        k: &CameraIntrinsics,
    ) -> (RigidTransform, Vec<Vec3>, Vec<(f64, f64)>) {
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
        let c2w = RigidTransform::new(
            RotationMatrix::from_axis_angle(&axis, rng.gen_range(-1.2..1.2)),
            Vec3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ),
        );
        let w2c = invert(&c2w);
        let mut pts = Vec::with_capacity(n);
        let mut px = Vec::with_capacity(n);
        for _ in 0..n {
            let cam = Vec3::new(
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-0.8..0.8),
                rng.gen_range(1.0..5.0),
            );
            let world = c2w.apply(&cam);
            let uv = project(&w2c.apply(&world), k).unwrap();
            pts.push(world);
            px.push(uv);
        }
        (c2w, pts, px)
    }

    #[test]
    fn ransac_exact_data_all_inliers() {
        let mut rng = ChaCha12Rng::seed_from_u64(80);
        let k = CameraIntrinsics::try_new(60.0, 16.0, 16.0).unwrap();
        let (c2w, pts, px) = synthetic_correspondences(&mut rng, 80, &k);
        let cfg = RansacConfig::default();
        let mut rrng = ChaCha12Rng::seed_from_u64(cfg.seed);
        let est = ransac_pnp(&pts, &px, &k, &cfg, &mut rrng).unwrap();
        assert_eq!(est.inlier_count, 80);
        assert!(rotation_angle_deg(&est.camera.pose.rotation, &c2w.rotation) < 1e-6);
        assert!((est.camera.pose.translation - c2w.translation).norm() < 1e-6);
    }

    #[test]
    fn ransac_robust_to_thirty_percent_outliers() {
        let k = CameraIntrinsics::try_new(60.0, 16.0, 16.0).unwrap();
        let cfg = RansacConfig::default();
        let mut ok = 0;
        for trial in 0..100 {
            let mut rng = ChaCha12Rng::seed_from_u64(1000 + trial);
            let (c2w, mut pts, px) = synthetic_correspondences(&mut rng, 60, &k);
            for i in 0..18 {
                pts[i * 3] = Vec3::new(
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                );
            }
            let mut rrng = ChaCha12Rng::seed_from_u64(trial);
            if let Ok(est) = ransac_pnp(&pts, &px, &k, &cfg, &mut rrng) {
                if rotation_angle_deg(&est.camera.pose.rotation, &c2w.rotation) < 0.5 {
                    ok += 1;
                }
            }
        }
        assert!(ok >= 95, "recovered {ok}/100");
    }

    #[test]
    fn ransac_rejects_degenerate_input() {
        let k = CameraIntrinsics::try_new(60.0, 16.0, 16.0).unwrap();
        let pts = vec![Vec3::new(0.0, 0.0, 2.0); 10];
        let px: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 16.0)).collect();
        let cfg = RansacConfig {
            iterations: 64,
            ..RansacConfig::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        match ransac_pnp(&pts, &px, &k, &cfg, &mut rng) {
            Err(PoseError::DegenerateConfiguration(_)) | Err(PoseError::NoConsensus { .. }) => {}
            other => panic!("expected failure, got {other:?}"),
        }

        assert!(matches!(
            ransac_pnp(&pts[..3], &px[..3], &k, &cfg, &mut rng),
            Err(PoseError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn ransac_is_deterministic() {
        let mut rng = ChaCha12Rng::seed_from_u64(81);
        let k = CameraIntrinsics::try_new(60.0, 16.0, 16.0).unwrap();
        let (_, pts, px) = synthetic_correspondences(&mut rng, 40, &k);
        let cfg = RansacConfig::default();
        let run = || {
            let mut r = ChaCha12Rng::seed_from_u64(7);
            let e = ransac_pnp(&pts, &px, &k, &cfg, &mut r).unwrap();
            (
                e.inlier_count,
                e.camera.pose.translation.x.to_bits(),
                e.camera.pose.rotation.matrix()[(0, 0)].to_bits(),
            )
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn estimate_camera_recovers_exact_view() {
        // Render-free oracle: build a global pointmap directly from a known
        // camera by unprojecting a synthetic depth field.
        let mut rng = ChaCha12Rng::seed_from_u64(82);
        let (h, w) = (16, 16);
        let true_fov = 60.0f64;
        let f = (w as f64 / 2.0) / (true_fov.to_radians() / 2.0).tan();
        let k = CameraIntrinsics::centered(f, w, h);
        let axis = Vec3::new(0.3, -0.8, 0.5);
        let c2w = RigidTransform::new(
            RotationMatrix::from_axis_angle(&axis, 0.7),
            Vec3::new(0.4, -0.2, 1.5),
        );
        let mut pts = Vec::new();
        for row in 0..h {
            for col in 0..w {
                let depth = 2.0 + 0.8 * ((row * w + col) as f64 * 0.37).sin()
                    + 0.1 * (row as f64) / h as f64;
                let local =
                    crate::geometry::unproject(col as f64 + 0.5, row as f64 + 0.5, depth, &k)
                        .unwrap();
                pts.push(c2w.apply(&local));
            }
        }
        let pm = Pointmap::new(h, w, Frame::Global, pts, vec![true; h * w]).unwrap();
        let conf = ConfidenceMap::new(
            h,
            w,
            (0..h * w).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let cfg = RansacConfig::default();
        let est = estimate_camera(&pm, &conf, &cfg, None).unwrap();
        let focal_err = (est.camera.intrinsics.focal - f).abs() / f;
        assert!(focal_err < 0.02, "focal error {focal_err}");
        assert!(
            rotation_angle_deg(&est.camera.pose.rotation, &c2w.rotation) < 0.5,
            "rotation error too large"
        );

        // With the true focal fixed the rotation is essentially exact.
        let est = estimate_camera(&pm, &conf, &cfg, Some(f)).unwrap();
        assert!(rotation_angle_deg(&est.camera.pose.rotation, &c2w.rotation) < 1e-3);
    }

    #[test]
    fn estimate_all_reports_per_view_failures() {
        let (h, w) = (8, 8);
        let k = CameraIntrinsics::centered(16.0, w, h);
        let mut pts = Vec::new();
        for row in 0..h {
            for col in 0..w {
                let local = crate::geometry::unproject(
                    col as f64 + 0.5,
                    row as f64 + 0.5,
                    2.0 + 0.3 * ((row + 2 * col) as f64).sin(),
                    &k,
                )
                .unwrap();
                pts.push(local);
            }
        }
        let good = Pointmap::new(h, w, Frame::Global, pts, vec![true; h * w]).unwrap();
        let empty = Pointmap::new(
            h,
            w,
            Frame::Global,
            vec![Vec3::zeros(); h * w],
            vec![false; h * w],
        )
        .unwrap();
        let conf = ConfidenceMap::uniform(h, w, 0.0);
        let results = estimate_all_cameras(
            &[good, empty],
            &[conf.clone(), conf],
            &RansacConfig::default(),
            false,
        );
        assert!(results[0].is_ok());
        assert!(matches!(results[1], Err(PoseError::TooFewPoints { .. })));
    }
}
