//! Analytic ray casting against sphere / box / plane primitives.
//!
//! Depth is exact (closed-form intersections, no meshes), which is what lets
//! downstream tests treat rendered geometry as a zero-error oracle.

use crate::geometry::{CameraIntrinsics, RigidTransform, Vec3};

use super::ScenePrimitive;

/// Fixed directional light, normalized (1, 1, 1).
pub fn light_direction() -> Vec3 {
    Vec3::new(1.0, 1.0, 1.0).normalize()
}

const T_MIN: f64 = 1e-9;

/// Result of casting all pixels of one view.
#[derive(Debug, Clone)]
pub struct RaycastResult {
    /// Euclidean distance from the camera center to the hit, per pixel
    /// (row-major); unspecified where `mask` is false.
    pub depth: Vec<f64>,
    /// Lambert-shaded RGB in [0,1], row-major `h*w*3`; zero where no hit.
    pub color: Vec<f64>,
    /// True where any primitive was hit.
    pub mask: Vec<bool>,
}

/// Ray/primitive intersection: returns (ray parameter, outward surface normal).
fn intersect(prim: &ScenePrimitive, origin: &Vec3, dir: &Vec3) -> Option<(f64, Vec3)> {
    match prim {
        ScenePrimitive::Sphere { center, radius, .. } => {
            let oc = origin - center;
            let b = oc.dot(dir);
            let c = oc.norm_squared() - radius * radius;
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            let t = if -b - sq > T_MIN {
                -b - sq
            } else if -b + sq > T_MIN {
                -b + sq
            } else {
                return None;
            };
            let normal = (origin + t * dir - center) / *radius;
            Some((t, normal))
        }
        ScenePrimitive::AxisAlignedBox { min, max, .. } => {
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            let mut near_axis = 0usize;
            for axis in 0..3 {
                let d = dir[axis];
                if d.abs() < 1e-15 {
                    if origin[axis] < min[axis] || origin[axis] > max[axis] {
                        return None;
                    }
                    continue;
                }
                let mut t0 = (min[axis] - origin[axis]) / d;
                let mut t1 = (max[axis] - origin[axis]) / d;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                if t0 > t_near {
                    t_near = t0;
                    near_axis = axis;
                }
                t_far = t_far.min(t1);
                if t_near > t_far {
                    return None;
                }
            }
            let t = if t_near > T_MIN {
                t_near
            } else if t_far > T_MIN {
                t_far
            } else {
                return None;
            };
            let mut normal = Vec3::zeros();
            normal[near_axis] = -dir[near_axis].signum();
            Some((t, normal))
        }
        ScenePrimitive::Plane {
            point,
            normal,
            half_extent,
            ..
        } => {
            let denom = dir.dot(normal);
            if denom.abs() < 1e-15 {
                return None;
            }
            let t = (point - origin).dot(normal) / denom;
            if t <= T_MIN {
                return None;
            }
            let hit = origin + t * dir;
            let (t1, t2) = plane_tangents(normal);
            let rel = hit - point;
            if rel.dot(&t1).abs() > *half_extent || rel.dot(&t2).abs() > *half_extent {
                return None;
            }
            Some((t, *normal))
        }
    }
}

/// Deterministic orthonormal tangent basis for a unit normal.
fn plane_tangents(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let t1 = n.cross(&helper).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

/// Nearest hit over the whole scene.
fn trace(scene: &[ScenePrimitive], origin: &Vec3, dir: &Vec3) -> Option<(f64, Vec3, [f64; 3])> {
    let mut best: Option<(f64, Vec3, [f64; 3])> = None;
    for prim in scene {
        if let Some((t, n)) = intersect(prim, origin, dir) {
            if best.as_ref().map_or(true, |(bt, _, _)| t < *bt) {
                best = Some((t, n, *prim.albedo()));
            }
        }
    }
    best
}

/// Casts one ray per pixel center through a pinhole camera.
///
/// `pose` is camera-to-world. The returned depth is the ray length (distance
/// to the hit point), not the z-depth.
pub fn raycast_view(
    scene: &[ScenePrimitive],
    pose: &RigidTransform,
    k: &CameraIntrinsics,
    height: usize,
    width: usize,
) -> RaycastResult {
    let light = light_direction();
    let origin = pose.translation;
    let mut depth = vec![0.0; height * width];
    let mut color = vec![0.0; height * width * 3];
    let mut mask = vec![false; height * width];

    for row in 0..height {
        for col in 0..width {
            let u = col as f64 + 0.5;
            let v = row as f64 + 0.5;
            let dir_cam = Vec3::new((u - k.cx) / k.focal, (v - k.cy) / k.focal, 1.0);
            let dir = pose.rotation.apply(&dir_cam).normalize();
            if let Some((t, mut normal, albedo)) = trace(scene, &origin, &dir) {
                let i = row * width + col;
                depth[i] = t;
                mask[i] = true;
                // Two-sided shading: orient the normal toward the camera.
                if normal.dot(&dir) > 0.0 {
                    normal = -normal;
                }
                let shade = normal.dot(&light).max(0.0);
                for c in 0..3 {
                    color[i * 3 + c] = (albedo[c] * shade).clamp(0.0, 1.0);
                }
            }
        }
    }

    RaycastResult { depth, color, mask }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidTransform;
    use approx::assert_relative_eq;

    fn identity_cam() -> (RigidTransform, CameraIntrinsics) {
        (
            RigidTransform::identity(),
            CameraIntrinsics::centered(16.0, 32, 32),
        )
    }

    #[test]
    fn sphere_on_axis_center_depth() {
        let scene = vec![ScenePrimitive::Sphere {
            center: Vec3::new(0.0, 0.0, 5.0),
            radius: 1.0,
            albedo: [1.0, 0.0, 0.0],
        }];
        let (pose, k) = identity_cam();
        let r = raycast_view(&scene, &pose, &k, 32, 32);
        let i = 16 * 32 + 16; // pixel center (16.5, 16.5) is 0.5px off axis
        assert!(r.mask[i]);
        // Use an exact on-axis camera instead for the analytic value.
        let k_exact = CameraIntrinsics::try_new(16.0, 16.5, 16.5).unwrap();
        let r = raycast_view(&scene, &pose, &k_exact, 32, 32);
        assert_relative_eq!(r.depth[i], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_scene_all_invalid() {
        let (pose, k) = identity_cam();
        let r = raycast_view(&[], &pose, &k, 8, 8);
        assert!(r.mask.iter().all(|&m| !m));
    }

    #[test]
    fn fronto_parallel_plane_depth_follows_ray_angle() {
        let scene = vec![ScenePrimitive::Plane {
            point: Vec3::new(0.0, 0.0, 3.0),
            normal: Vec3::new(0.0, 0.0, -1.0),
            half_extent: 100.0,
            albedo: [0.5, 0.5, 0.5],
        }];
        let pose = RigidTransform::identity();
        let k = CameraIntrinsics::try_new(16.0, 16.5, 16.5).unwrap();
        let r = raycast_view(&scene, &pose, &k, 32, 32);
        assert!(r.mask.iter().all(|&m| m));
        // Principal-point pixel: depth exactly 3.
        assert_relative_eq!(r.depth[16 * 32 + 16], 3.0, epsilon = 1e-12);
        // Every pixel: depth = 3 / cos(theta) where theta is the ray angle.
        for row in 0..32 {
            for col in 0..32 {
                let u = col as f64 + 0.5;
                let v = row as f64 + 0.5;
                let dir = Vec3::new((u - k.cx) / k.focal, (v - k.cy) / k.focal, 1.0);
                let cos_theta = 1.0 / dir.norm();
                assert_relative_eq!(
                    r.depth[row * 32 + col],
                    3.0 / cos_theta,
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn box_face_hit_and_normal() {
        let scene = vec![ScenePrimitive::AxisAlignedBox {
            min: Vec3::new(-1.0, -1.0, 2.0),
            max: Vec3::new(1.0, 1.0, 4.0),
            albedo: [0.2, 0.9, 0.1],
        }];
        let pose = RigidTransform::identity();
        let k = CameraIntrinsics::try_new(16.0, 16.5, 16.5).unwrap();
        let r = raycast_view(&scene, &pose, &k, 32, 32);
        assert_relative_eq!(r.depth[16 * 32 + 16], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn nearest_primitive_wins() {
        let scene = vec![
            ScenePrimitive::Sphere {
                center: Vec3::new(0.0, 0.0, 10.0),
                radius: 1.0,
                albedo: [1.0, 0.0, 0.0],
            },
            ScenePrimitive::Sphere {
                center: Vec3::new(0.0, 0.0, 5.0),
                radius: 1.0,
                albedo: [0.0, 1.0, 0.0],
            },
        ];
        let pose = RigidTransform::identity();
        let k = CameraIntrinsics::try_new(16.0, 16.5, 16.5).unwrap();
        let r = raycast_view(&scene, &pose, &k, 32, 32);
        assert_relative_eq!(r.depth[16 * 32 + 16], 4.0, epsilon = 1e-12);
    }
}
