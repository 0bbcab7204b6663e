//! Deterministic synthetic scene generation and ground-truth rendering.
//!
//! Scenes are small collections of analytic primitives viewed from a jittered
//! camera ring. Rendering produces exact images, local/global pointmaps,
//! validity masks and camera models, which stand in for real training scans
//! at desk scale.

mod dataset;
mod raycast;

pub use dataset::{read_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use raycast::{light_direction, raycast_view, RaycastResult};

use crate::geometry::{
    compose, invert, unproject, CameraIntrinsics, CameraModel, Frame, GeometryError, ImageSet,
    Pointmap, RigidTransform, RotationMatrix, Vec3,
};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("view {0} sees no scene content")]
    EmptyView(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad dataset file: {0}")]
    Format(String),
}

/// Analytic scene primitive with a flat albedo.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenePrimitive {
    Sphere {
        center: Vec3,
        radius: f64,
        albedo: [f64; 3],
    },
    AxisAlignedBox {
        min: Vec3,
        max: Vec3,
        albedo: [f64; 3],
    },
    /// Finite square patch: `half_extent` bounds it along two tangent axes.
    Plane {
        point: Vec3,
        normal: Vec3,
        half_extent: f64,
        albedo: [f64; 3],
    },
}

impl ScenePrimitive {
    pub fn albedo(&self) -> &[f64; 3] {
        match self {
            ScenePrimitive::Sphere { albedo, .. } => albedo,
            ScenePrimitive::AxisAlignedBox { albedo, .. } => albedo,
            ScenePrimitive::Plane { albedo, .. } => albedo,
        }
    }
}

/// Parameters for random scene sampling.
#[derive(Debug, Clone, Copy)]
pub struct SceneSpec {
    pub min_primitives: usize,
    pub max_primitives: usize,
    /// Primitives are placed within this distance of the origin (meters).
    pub extent: f64,
    pub rng_seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            min_primitives: 2,
            max_primitives: 5,
            extent: 1.5,
            rng_seed: 0,
        }
    }
}

fn random_albedo(rng: &mut impl Rng) -> [f64; 3] {
    [
        rng.gen_range(0.15..1.0),
        rng.gen_range(0.15..1.0),
        rng.gen_range(0.15..1.0),
    ]
}

/// Draws a deterministic random scene.
///
/// The first primitive is a sphere guaranteed to intersect the origin-centered
/// unit ball, so a camera ring looking at the origin always sees content.
pub fn sample_scene(spec: &SceneSpec) -> Vec<ScenePrimitive> {
    let mut rng = ChaCha12Rng::seed_from_u64(spec.rng_seed);
    let count = rng.gen_range(spec.min_primitives..=spec.max_primitives);
    let e = spec.extent;
    let mut scene = Vec::with_capacity(count);

    // Anchor primitive near the origin.
    let c = Vec3::new(
        rng.gen_range(-0.4..0.4),
        rng.gen_range(-0.4..0.4),
        rng.gen_range(-0.4..0.4),
    );
    scene.push(ScenePrimitive::Sphere {
        center: c,
        radius: rng.gen_range(0.35..0.7),
        albedo: random_albedo(&mut rng),
    });

    for _ in 1..count {
        let kind = rng.gen_range(0..3);
        let center = Vec3::new(
            rng.gen_range(-e..e),
            rng.gen_range(-e..e),
            rng.gen_range(-e..e),
        );
        let prim = match kind {
            0 => ScenePrimitive::Sphere {
                center,
                radius: rng.gen_range(0.15..0.5),
                albedo: random_albedo(&mut rng),
            },
            1 => {
                let half = Vec3::new(
                    rng.gen_range(0.1..0.4),
                    rng.gen_range(0.1..0.4),
                    rng.gen_range(0.1..0.4),
                );
                ScenePrimitive::AxisAlignedBox {
                    min: center - half,
                    max: center + half,
                    albedo: random_albedo(&mut rng),
                }
            }
            _ => {
                let normal = loop {
                    let n = Vec3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    );
                    if n.norm() > 1e-3 {
                        break n.normalize();
                    }
                };
                ScenePrimitive::Plane {
                    point: center,
                    normal,
                    half_extent: rng.gen_range(0.2..0.6),
                    albedo: random_albedo(&mut rng),
                }
            }
        };
        scene.push(prim);
    }
    scene
}

/// Camera-to-world look-at pose in the x-right / y-down / z-forward camera
/// convention.
pub fn look_at(eye: Vec3, target: Vec3) -> RigidTransform {
    let forward = (target - eye).normalize();
    let down_hint = if forward.y.abs() < 0.99 {
        Vec3::new(0.0, 1.0, 0.0)
    } else {
        Vec3::new(1.0, 0.0, 0.0)
    };
    let right = down_hint.cross(&forward).normalize();
    let down = forward.cross(&right);
    let rot = nalgebra::Matrix3::from_columns(&[right, down, forward]);
    RigidTransform::new(RotationMatrix::from_matrix_unchecked(rot), eye)
}

/// Samples cameras on a jittered ring of the given radius, all looking at the
/// scene origin, expressed in the scene frame. This is the form the renderer
/// consumes.
pub fn sample_camera_ring_scene_frame(
    n_views: usize,
    radius: f64,
    seed: u64,
) -> Vec<RigidTransform> {
    assert!(n_views >= 1, "need at least one view");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut poses = Vec::with_capacity(n_views);
    for i in 0..n_views {
        let base = 2.0 * std::f64::consts::PI * i as f64 / n_views as f64;
        let theta = base + rng.gen_range(-0.25..0.25) * 2.0 * std::f64::consts::PI / n_views as f64;
        let r = radius * rng.gen_range(0.9..1.1);
        let height = rng.gen_range(-0.35..0.35) * radius;
        let eye = Vec3::new(r * theta.cos(), height, r * theta.sin());
        poses.push(look_at(eye, Vec3::zeros()));
    }
    poses
}

/// Same ring as [`sample_camera_ring_scene_frame`], re-expressed in the frame
/// of the first camera so that `poses[0]` is exactly the identity.
pub fn sample_camera_ring(n_views: usize, radius: f64, seed: u64) -> Vec<RigidTransform> {
    reexpress_in_first_frame(&sample_camera_ring_scene_frame(n_views, radius, seed))
}

/// Rewrites camera-to-world poses so the first camera becomes the world frame.
/// The first pose is the identity exactly, not merely up to rounding.
pub fn reexpress_in_first_frame(poses: &[RigidTransform]) -> Vec<RigidTransform> {
    let to_first = invert(&poses[0]);
    let mut out: Vec<RigidTransform> = poses.iter().map(|p| compose(&to_first, p)).collect();
    out[0] = RigidTransform::identity();
    out
}

/// Everything the renderer knows about one multi-view capture.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSample {
    pub images: ImageSet,
    /// One per view, frame = Local, mask = hit mask.
    pub local_pointmaps: Vec<Pointmap>,
    /// One per view, frame = Global (first camera's frame), same mask.
    pub global_pointmaps: Vec<Pointmap>,
    pub cameras: Vec<CameraModel>,
}

impl GroundTruthSample {
    pub fn n_views(&self) -> usize {
        self.cameras.len()
    }

    pub fn height(&self) -> usize {
        self.images.height
    }

    pub fn width(&self) -> usize {
        self.images.width
    }

    pub fn mask(&self, view: usize) -> &[bool] {
        self.local_pointmaps[view].valid_mask()
    }
}

/// Renders a full ground-truth sample.
///
/// `cameras` are camera-to-world poses in the scene's frame. The emitted
/// sample re-expresses everything in the first camera's frame: its poses have
/// `pose[0] = identity` and global pointmaps live in that frame. Local
/// pointmaps are unprojected z-depths in each camera's own frame; global
/// pointmaps are the local ones mapped through the emitted pose.
pub fn render_sample(
    scene: &[ScenePrimitive],
    cameras: &[RigidTransform],
    k: &CameraIntrinsics,
    height: usize,
    width: usize,
) -> Result<GroundTruthSample, SynthError> {
    assert!(!cameras.is_empty(), "need at least one camera");
    assert!(height >= 8 && width >= 8, "image too small");
    let poses = reexpress_in_first_frame(cameras);

    // Rays are cast in the scene's own frame; the emitted poses and global
    // pointmaps live in the first camera's frame.
    let views: Vec<(Vec<f32>, Pointmap, Pointmap)> = cameras
        .par_iter()
        .zip(&poses)
        .map(|(scene_pose, pose)| {
            let cast = raycast_view(scene, scene_pose, k, height, width);
            let mut image = vec![0.0f32; height * width * 3];
            for (dst, &src) in image.iter_mut().zip(&cast.color) {
                *dst = src as f32;
            }
            let mut local_pts = vec![Vec3::zeros(); height * width];
            let mut global_pts = vec![Vec3::zeros(); height * width];
            for row in 0..height {
                for col in 0..width {
                    let i = row * width + col;
                    if !cast.mask[i] {
                        continue;
                    }
                    let u = col as f64 + 0.5;
                    let v = row as f64 + 0.5;
                    // Ray length -> z-depth along the optical axis.
                    let dir = Vec3::new((u - k.cx) / k.focal, (v - k.cy) / k.focal, 1.0);
                    let z = cast.depth[i] / dir.norm();
                    let p = unproject(u, v, z, k).expect("positive depth");
                    local_pts[i] = p;
                    global_pts[i] = pose.apply(&p);
                }
            }
            let local =
                Pointmap::new(height, width, Frame::Local, local_pts, cast.mask.clone())
                    .expect("consistent dims");
            let global =
                Pointmap::new(height, width, Frame::Global, global_pts, cast.mask)
                    .expect("consistent dims");
            (image, local, global)
        })
        .collect();

    for (vi, (_, local, _)) in views.iter().enumerate() {
        if local.valid_count() == 0 {
            return Err(SynthError::EmptyView(vi));
        }
    }

    let mut data = Vec::with_capacity(cameras.len() * height * width * 3);
    let mut local_pointmaps = Vec::with_capacity(cameras.len());
    let mut global_pointmaps = Vec::with_capacity(cameras.len());
    for (image, local, global) in views {
        data.extend_from_slice(&image);
        local_pointmaps.push(local);
        global_pointmaps.push(global);
    }

    let images = ImageSet::new(cameras.len(), height, width, data)?;
    let camera_models = poses
        .iter()
        .map(|pose| CameraModel {
            intrinsics: *k,
            pose: *pose,
        })
        .collect();

    Ok(GroundTruthSample {
        images,
        local_pointmaps,
        global_pointmaps,
        cameras: camera_models,
    })
}

/// Focal length for a horizontal field of view, in pixels.
pub fn focal_for_fov(fov_deg: f64, width: usize) -> f64 {
    (width as f64 / 2.0) / (fov_deg.to_radians() / 2.0).tan()
}
