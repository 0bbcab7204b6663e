//! Perspective-three-point minimal solver.
//!
//! Classical two-ratio reduction: with depths `s1, s2 = u s1, s3 = v s1`
//! along the three bearing rays, the law of cosines between ray pairs gives
//! three equations whose elimination leaves a quartic in `v`. Roots are found
//! through the companion matrix and polished with Newton steps, then each
//! admissible depth triple is turned into a pose by rigidly aligning the
//! world triangle onto the reconstructed camera-frame triangle.

use nalgebra::{Complex, Matrix4};

use crate::align::weighted_umeyama;
use crate::geometry::{invert, project, CameraIntrinsics, RigidTransform, Vec3};

use super::PoseError;

/// Multiplies two dense polynomials in ascending-coefficient form.
fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &av) in a.iter().enumerate() {
        for (j, &bv) in b.iter().enumerate() {
            out[i + j] += av * bv;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, &v) in a.iter().enumerate() {
        out[i] += v;
    }
    for (i, &v) in b.iter().enumerate() {
        out[i] += v;
    }
    out
}

fn poly_scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|&v| v * s).collect()
}

fn poly_eval(a: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &c in a.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

fn poly_derivative(a: &[f64]) -> Vec<f64> {
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| c * i as f64)
        .collect()
}

/// Real roots of a polynomial of degree <= 4, ascending coefficients.
/// Eigenvalues of the companion matrix, then Newton polish.
fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    // Trim negligible leading coefficients so near-degenerate quartics fall
    // back to cubics/quadratics instead of exploding.
    let max_c = coeffs.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    if max_c == 0.0 {
        return Vec::new();
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].abs() < 1e-13 * max_c {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }

    let lead = coeffs[deg];
    let monic: Vec<f64> = (0..deg).map(|i| coeffs[i] / lead).collect();

    let eigen: Vec<Complex<f64>> = match deg {
        1 => vec![Complex::new(-monic[0], 0.0)],
        2 => {
            // x^2 + bx + c
            let (c, b) = (monic[0], monic[1]);
            let disc = b * b - 4.0 * c;
            if disc >= 0.0 {
                let s = disc.sqrt();
                vec![
                    Complex::new((-b + s) / 2.0, 0.0),
                    Complex::new((-b - s) / 2.0, 0.0),
                ]
            } else {
                Vec::new()
            }
        }
        _ => {
            let mut companion = Matrix4::<f64>::zeros();
            let n = deg;
            for i in 1..n {
                companion[(i, i - 1)] = 1.0;
            }
            for i in 0..n {
                companion[(i, n - 1)] = -monic[i];
            }
            // Degree 3 embeds as a 4x4 with a zero row/column guarded by an
            // explicit extra eigenvalue at zero; simpler to branch.
            if deg == 3 {
                let mut m3 = nalgebra::Matrix3::<f64>::zeros();
                for i in 1..3 {
                    m3[(i, i - 1)] = 1.0;
                }
                for i in 0..3 {
                    m3[(i, 2)] = -monic[i];
                }
                m3.complex_eigenvalues().iter().copied().collect()
            } else {
                companion.complex_eigenvalues().iter().copied().collect()
            }
        }
    };

    let deriv = poly_derivative(coeffs);
    let mut roots = Vec::new();
    for e in eigen {
        if e.im.abs() > 1e-6 * (1.0 + e.re.abs()) {
            continue;
        }
        let mut x = e.re;
        for _ in 0..4 {
            let f = poly_eval(coeffs, x);
            let d = poly_eval(&deriv, x);
            if d.abs() < 1e-300 {
                break;
            }
            let step = f / d;
            x -= step;
            if step.abs() < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        if roots.iter().all(|&r: &f64| (r - x).abs() > 1e-9 * (1.0 + x.abs())) {
            roots.push(x);
        }
    }
    roots
}

/// Unit bearing ray through a pixel.
fn bearing(px: (f64, f64), k: &CameraIntrinsics) -> Vec3 {
    Vec3::new((px.0 - k.cx) / k.focal, (px.1 - k.cy) / k.focal, 1.0).normalize()
}

/// Solves for up to four camera-to-world poses placing the three world
/// points onto the three pixels. Solutions reproject within 1e-6 px.
pub fn solve_p3p(
    pts3d: &[Vec3; 3],
    px: &[(f64, f64); 3],
    k: &CameraIntrinsics,
) -> Result<Vec<RigidTransform>, PoseError> {
    let [p1, p2, p3] = *pts3d;
    let edge12 = p2 - p1;
    let edge13 = p3 - p1;
    let cross = edge12.cross(&edge13).norm();
    if cross < 1e-9 * edge12.norm() * edge13.norm() || edge12.norm() < 1e-12 {
        return Err(PoseError::DegenerateConfiguration(
            "collinear or coincident 3D points".into(),
        ));
    }

    let f1 = bearing(px[0], k);
    let f2 = bearing(px[1], k);
    let f3 = bearing(px[2], k);

    let p = f1.dot(&f2);
    let q = f1.dot(&f3);
    let r = f2.dot(&f3);

    let c2 = (p1 - p2).norm_squared();
    let b2 = (p1 - p3).norm_squared();
    let a2 = (p2 - p3).norm_squared();
    if b2 < 1e-18 {
        return Err(PoseError::DegenerateConfiguration(
            "coincident 3D points".into(),
        ));
    }

    // K(v) = v^2 - 2 q v + 1, ascending coefficients.
    let k_poly = [1.0, -2.0 * q, 1.0];
    let e = (a2 - c2) / b2;
    // N(v) = 1 - v^2 + e K(v);   D(v) = 2 (p - r v).
    let n_poly = poly_add(&[1.0, 0.0, -1.0], &poly_scale(&k_poly, e));
    let d_poly = [2.0 * p, -2.0 * r];
    // Quartic: N^2 - 2 p N D + (1 - (c2/b2) K) D^2 = 0.
    let term1 = poly_mul(&n_poly, &n_poly);
    let term2 = poly_scale(&poly_mul(&n_poly, &d_poly), -2.0 * p);
    let gate = poly_add(&[1.0], &poly_scale(&k_poly, -c2 / b2));
    let term3 = poly_mul(&gate, &poly_mul(&d_poly, &d_poly));
    let quartic = poly_add(&poly_add(&term1, &term2), &term3);

    let mut poses = Vec::new();
    for v in real_roots(&quartic) {
        if !(v.is_finite() && v > 0.0) {
            continue;
        }
        let d = poly_eval(&d_poly, v);
        if d.abs() < 1e-12 {
            continue;
        }
        let u = poly_eval(&n_poly, v) / d;
        if !(u.is_finite() && u > 0.0) {
            continue;
        }
        let denom = 1.0 + v * v - 2.0 * v * q;
        if denom <= 1e-15 {
            continue;
        }
        let s1 = (b2 / denom).sqrt();
        let (s2, s3) = (u * s1, v * s1);
        // Consistency with the remaining constraint filters spurious roots.
        let resid = s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * r - a2;
        if resid.abs() > 1e-6 * (1.0 + a2) {
            continue;
        }

        let cam_pts = [s1 * f1, s2 * f2, s3 * f3];
        let w2c = match weighted_umeyama(&[p1, p2, p3], &cam_pts, &[1.0; 3], false) {
            Ok(t) => RigidTransform::new(t.rotation, t.translation),
            Err(_) => continue,
        };
        // Keep only solutions that actually reproject.
        let mut ok = true;
        for (pt, &(pu, pv)) in pts3d.iter().zip(px) {
            match project(&w2c.apply(pt), k) {
                Ok((ru, rv)) => {
                    if (ru - pu).hypot(rv - pv) > 1e-6 {
                        ok = false;
                        break;
                    }
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            poses.push(invert(&w2c));
        }
    }
    poses.truncate(4);
    Ok(poses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotation_angle_deg, RotationMatrix};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_pose(rng: &mut impl Rng) -> RigidTransform {
        let axis = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let axis = if axis.norm() < 1e-6 {
            Vec3::new(0.0, 0.0, 1.0)
        } else {
            axis
        };
        RigidTransform::new(
            RotationMatrix::from_axis_angle(&axis, rng.gen_range(-1.0..1.0)),
            Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ),
        )
    }

    #[test]
    fn recovers_known_camera_from_rendered_points() {
        let mut rng = ChaCha12Rng::seed_from_u64(60);
        let k = CameraIntrinsics::try_new(120.0, 64.0, 64.0).unwrap();
        let mut found = 0;
        for _ in 0..100 {
            let c2w = random_pose(&mut rng);
            let w2c = invert(&c2w);
            // World points in front of the camera.
            let pts: Vec<Vec3> = (0..3)
                .map(|_| {
                    let cam = Vec3::new(
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(1.0..4.0),
                    );
                    c2w.apply(&cam)
                })
                .collect();
            let pts3d = [pts[0], pts[1], pts[2]];
            let px: Vec<(f64, f64)> = pts
                .iter()
                .map(|p| project(&w2c.apply(p), &k).unwrap())
                .collect();
            let px3 = [px[0], px[1], px[2]];

            let solutions = match solve_p3p(&pts3d, &px3, &k) {
                Ok(s) => s,
                Err(_) => continue, // nearly collinear draw
            };
            assert!(solutions.len() <= 4);
            let hit = solutions.iter().any(|s| {
                rotation_angle_deg(&s.rotation, &c2w.rotation) < 1e-6
                    && (s.translation - c2w.translation).norm() < 1e-6
            });
            if hit {
                found += 1;
            }
        }
        assert!(found >= 95, "true pose recovered in {found}/100 trials");
    }

    #[test]
    fn collinear_points_rejected() {
        let k = CameraIntrinsics::try_new(100.0, 50.0, 50.0).unwrap();
        let pts = [
            Vec3::new(0.0, 0.0, 2.0),
            Vec3::new(0.5, 0.0, 2.0),
            Vec3::new(1.0, 0.0, 2.0),
        ];
        let px = [(40.0, 50.0), (55.0, 50.0), (70.0, 50.0)];
        assert!(matches!(
            solve_p3p(&pts, &px, &k),
            Err(PoseError::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn solutions_reproject_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(61);
        let k = CameraIntrinsics::try_new(90.0, 32.0, 32.0).unwrap();
        for _ in 0..50 {
            let c2w = random_pose(&mut rng);
            let w2c = invert(&c2w);
            let pts: Vec<Vec3> = (0..3)
                .map(|_| {
                    c2w.apply(&Vec3::new(
                        rng.gen_range(-0.6..0.6),
                        rng.gen_range(-0.6..0.6),
                        rng.gen_range(1.0..3.0),
                    ))
                })
                .collect();
            let pts3d = [pts[0], pts[1], pts[2]];
            let px: Vec<(f64, f64)> = pts
                .iter()
                .map(|p| project(&w2c.apply(p), &k).unwrap())
                .collect();
            let px3 = [px[0], px[1], px[2]];
            if let Ok(solutions) = solve_p3p(&pts3d, &px3, &k) {
                for s in solutions {
                    let inv = invert(&s);
                    for (p, &(u, v)) in pts.iter().zip(&px3) {
                        let (ru, rv) = project(&inv.apply(p), &k).unwrap();
                        assert!((ru - u).hypot(rv - v) < 1e-6);
                    }
                }
            }
        }
    }
}
