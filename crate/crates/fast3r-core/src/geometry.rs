//! Core 3D types shared by every other module: rotations, rigid and similarity
//! transforms, pinhole cameras, pointmaps and confidence maps.
//!
//! Conventions used throughout the crate:
//! - Camera poses are **camera-to-world**. The world frame is the frame of the
//!   first camera, so the pose of view 1 in ground truth is the identity.
//! - Camera frames follow the usual computer-vision axes: x right, y down,
//!   z forward (points in front of the camera have positive z).
//! - All geometry is computed in `f64`.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// 3D vector / point in scene space (meters).
pub type Vec3 = Vector3<f64>;
/// 3×3 real matrix.
pub type Mat3 = Matrix3<f64>;

/// Raw confidence scores are clamped to this symmetric range so that
/// `1 + exp(raw)` can never overflow.
pub const CONFIDENCE_CLAMP: f64 = 20.0;

const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("matrix is not a proper rotation (orthonormality/determinant off by {0:.3e})")]
    InvalidRotation(f64),
    #[error("depth {0} is not positive")]
    NonPositiveDepth(f64),
    #[error("scale {0} is not positive")]
    NonPositiveScale(f64),
    #[error("focal length {0} is not positive")]
    NonPositiveFocal(f64),
    #[error("principal point ({0}, {1}) outside image bounds {2}x{3}")]
    PrincipalPointOutOfBounds(f64, f64, usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value encountered")]
    NonFinite,
}

/// Proper rotation matrix (orthonormal, det = +1), validated on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn identity() -> Self {
        RotationMatrix(Mat3::identity())
    }

    /// Validates orthonormality and determinant to 1e-9.
    pub fn try_new(m: Mat3) -> Result<Self, GeometryError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let dev = (m.transpose() * m - Mat3::identity()).abs().max();
        let det_dev = (m.determinant() - 1.0).abs();
        let worst = dev.max(det_dev);
        if worst > ROTATION_TOL {
            return Err(GeometryError::InvalidRotation(worst));
        }
        Ok(RotationMatrix(m))
    }

    /// Skips validation; for matrices that are rotations by construction.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        RotationMatrix(m)
    }

    pub fn from_axis_angle(axis: &Vec3, angle_rad: f64) -> Self {
        let r = nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(*axis),
            angle_rad,
        );
        RotationMatrix(*r.matrix())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Re-orthonormalizes via SVD; keeps drift from compounding in iterative
    /// solvers.
    pub fn renormalized(&self) -> Self {
        let svd = self.0.svd(true, true);
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * vt;
        }
        RotationMatrix(r)
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

/// Rigid body transform: `y = R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: RotationMatrix::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: RotationMatrix, translation: Vec3) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation.apply(p) + self.translation
    }
}

/// Applies `b` then `a`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    RigidTransform {
        rotation: a.rotation * b.rotation,
        translation: a.rotation.apply(&b.translation) + a.translation,
    }
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    let rt = t.rotation.transpose();
    RigidTransform {
        rotation: rt,
        translation: -rt.apply(&t.translation),
    }
}

/// Similarity transform: `y = s R x + t` with `s > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: RotationMatrix,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            scale: 1.0,
            rotation: RotationMatrix::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn try_new(
        scale: f64,
        rotation: RotationMatrix,
        translation: Vec3,
    ) -> Result<Self, GeometryError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::NonPositiveScale(scale));
        }
        Ok(SimilarityTransform {
            scale,
            rotation,
            translation,
        })
    }

    pub fn from_rigid(t: &RigidTransform) -> Self {
        SimilarityTransform {
            scale: 1.0,
            rotation: t.rotation,
            translation: t.translation,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * self.rotation.apply(p) + self.translation
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let rt = self.rotation.transpose();
        let s_inv = 1.0 / self.scale;
        SimilarityTransform {
            scale: s_inv,
            rotation: rt,
            translation: -s_inv * rt.apply(&self.translation),
        }
    }
}

/// Pinhole intrinsics: square pixels, no distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn try_new(focal: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        if !(focal.is_finite() && focal > 0.0) {
            return Err(GeometryError::NonPositiveFocal(focal));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(CameraIntrinsics { focal, cx, cy })
    }

    /// Additionally checks that the principal point lies inside the image.
    pub fn try_new_for_image(
        focal: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let k = Self::try_new(focal, cx, cy)?;
        if cx < 0.0 || cx > width as f64 || cy < 0.0 || cy > height as f64 {
            return Err(GeometryError::PrincipalPointOutOfBounds(
                cx, cy, width, height,
            ));
        }
        Ok(k)
    }

    /// Intrinsics with the principal point at the image center.
    pub fn centered(focal: f64, width: usize, height: usize) -> Self {
        CameraIntrinsics {
            focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }
}

/// Full camera: intrinsics plus a camera-to-world pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub intrinsics: CameraIntrinsics,
    /// Camera-to-world. World = frame of the first camera of the set.
    pub pose: RigidTransform,
}

/// Coordinate frame a pointmap is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// The viewing camera's own frame.
    Local,
    /// The first camera's frame.
    Global,
}

/// Per-pixel grid of 3D points with a validity mask.
///
/// Invalid pixels carry the point (0,0,0) and `valid = false`; consumers must
/// honor the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Pointmap {
    pub height: usize,
    pub width: usize,
    pub frame: Frame,
    points: Vec<Vec3>,
    valid: Vec<bool>,
}

impl Pointmap {
    pub fn new(
        height: usize,
        width: usize,
        frame: Frame,
        points: Vec<Vec3>,
        valid: Vec<bool>,
    ) -> Result<Self, GeometryError> {
        if points.len() != height * width {
            return Err(GeometryError::DimensionMismatch {
                expected: height * width,
                got: points.len(),
            });
        }
        if valid.len() != height * width {
            return Err(GeometryError::DimensionMismatch {
                expected: height * width,
                got: valid.len(),
            });
        }
        for (p, &v) in points.iter().zip(&valid) {
            if v && !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(GeometryError::NonFinite);
            }
        }
        Ok(Pointmap {
            height,
            width,
            frame,
            points,
            valid,
        })
    }

    pub fn filled(height: usize, width: usize, frame: Frame) -> Self {
        Pointmap {
            height,
            width,
            frame,
            points: vec![Vec3::zeros(); height * width],
            valid: vec![true; height * width],
        }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> &Vec3 {
        &self.points[row * self.width + col]
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.width + col]
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [Vec3] {
        &mut self.points
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_mask_mut(&mut self) -> &mut [bool] {
        &mut self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Iterator over `(pixel_index, point)` for valid pixels only.
    pub fn valid_points(&self) -> impl Iterator<Item = (usize, &Vec3)> {
        self.points
            .iter()
            .enumerate()
            .filter(|(i, _)| self.valid[*i])
    }
}

/// Applies a similarity transform to every valid point; the mask is unchanged.
pub fn transform_pointmap(pm: &Pointmap, t: &SimilarityTransform) -> Pointmap {
    let mut out = pm.clone();
    for (i, p) in out.points.iter_mut().enumerate() {
        if pm.valid[i] {
            *p = t.apply(p);
        }
    }
    out
}

/// Raw per-pixel confidence scores, clamped to ±[`CONFIDENCE_CLAMP`] at
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    pub height: usize,
    pub width: usize,
    raw: Vec<f64>,
}

impl ConfidenceMap {
    pub fn new(height: usize, width: usize, mut raw: Vec<f64>) -> Result<Self, GeometryError> {
        if raw.len() != height * width {
            return Err(GeometryError::DimensionMismatch {
                expected: height * width,
                got: raw.len(),
            });
        }
        for v in raw.iter_mut() {
            if !v.is_finite() {
                return Err(GeometryError::NonFinite);
            }
            *v = v.clamp(-CONFIDENCE_CLAMP, CONFIDENCE_CLAMP);
        }
        Ok(ConfidenceMap { height, width, raw })
    }

    pub fn uniform(height: usize, width: usize, value: f64) -> Self {
        ConfidenceMap::new(height, width, vec![value; height * width]).expect("finite value")
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Positive form: `1 + exp(raw)`, strictly > 1.
    pub fn sigma_plus(&self) -> Vec<f64> {
        self.raw.iter().map(|&s| 1.0 + s.exp()).collect()
    }
}

/// A set of N same-sized RGB images with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub n_views: usize,
    pub height: usize,
    pub width: usize,
    /// Row-major `n * h * w * 3` values.
    data: Vec<f32>,
}

impl ImageSet {
    pub fn new(
        n_views: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self, GeometryError> {
        if n_views == 0 {
            return Err(GeometryError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if data.len() != n_views * height * width * 3 {
            return Err(GeometryError::DimensionMismatch {
                expected: n_views * height * width * 3,
                got: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(GeometryError::NonFinite);
        }
        Ok(ImageSet {
            n_views,
            height,
            width,
            data,
        })
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// The `h*w*3` slice of one view.
    pub fn view(&self, i: usize) -> &[f32] {
        let stride = self.height * self.width * 3;
        &self.data[i * stride..(i + 1) * stride]
    }
}

/// Projects a camera-frame point through pinhole intrinsics.
pub fn project(p: &Vec3, k: &CameraIntrinsics) -> Result<(f64, f64), GeometryError> {
    if p.z <= 1e-12 {
        return Err(GeometryError::NonPositiveDepth(p.z));
    }
    Ok((
        k.focal * p.x / p.z + k.cx,
        k.focal * p.y / p.z + k.cy,
    ))
}

/// Lifts a pixel plus z-depth back to a camera-frame point.
pub fn unproject(u: f64, v: f64, depth: f64, k: &CameraIntrinsics) -> Result<Vec3, GeometryError> {
    if depth <= 1e-12 {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    Ok(Vec3::new(
        (u - k.cx) / k.focal * depth,
        (v - k.cy) / k.focal * depth,
        depth,
    ))
}

/// Geodesic angle between two rotations, in degrees, in [0, 180].
pub fn rotation_angle_deg(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    let rel = a.matrix().transpose() * b.matrix();
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    cos.acos().to_degrees()
}

/// Angle between two directions, in degrees, in [0, 180].
///
/// Degenerate rule: if both norms are below 1e-8 the angle is 0; if exactly
/// one is, the angle is 180.
pub fn translation_angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    let a_zero = na < 1e-8;
    let b_zero = nb < 1e-8;
    match (a_zero, b_zero) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 180.0,
        (false, false) => {
            let cos = (a.dot(b) / (na * nb)).clamp(-1.0, 1.0);
            cos.acos().to_degrees()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn rz(deg: f64) -> RotationMatrix {
        RotationMatrix::from_axis_angle(&Vec3::new(0.0, 0.0, 1.0), deg.to_radians())
    }

    fn rx(deg: f64) -> RotationMatrix {
        RotationMatrix::from_axis_angle(&Vec3::new(1.0, 0.0, 0.0), deg.to_radians())
    }

    fn random_rotation(rng: &mut impl Rng) -> RotationMatrix {
        let axis = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let axis = if axis.norm() < 1e-6 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            axis
        };
        RotationMatrix::from_axis_angle(&axis, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
    }

    fn random_rigid(rng: &mut impl Rng) -> RigidTransform {
        RigidTransform::new(
            random_rotation(rng),
            Vec3::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            ),
        )
    }

    #[test]
    fn compose_identity_is_noop() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let t = random_rigid(&mut rng);
        let c = compose(&RigidTransform::identity(), &t);
        assert_relative_eq!(c.translation, t.translation, epsilon = 1e-15);
        assert_relative_eq!(c.rotation.matrix(), t.rotation.matrix(), epsilon = 1e-15);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..20 {
            let t = random_rigid(&mut rng);
            let c = compose(&t, &invert(&t));
            assert!((c.rotation.matrix() - Mat3::identity()).abs().max() < 1e-12);
            assert!(c.translation.norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_group_closure() {
        let c = compose(
            &RigidTransform::new(rz(30.0), Vec3::zeros()),
            &RigidTransform::new(rz(60.0), Vec3::zeros()),
        );
        assert!((c.rotation.matrix() - rz(90.0).matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn invert_identity_and_pure_translation() {
        let i = invert(&RigidTransform::identity());
        assert_eq!(i.translation, Vec3::zeros());
        let t = RigidTransform::new(RotationMatrix::identity(), Vec3::new(1.0, 2.0, 3.0));
        let inv = invert(&t);
        assert_relative_eq!(inv.translation, Vec3::new(-1.0, -2.0, -3.0), epsilon = 1e-15);
    }

    #[test]
    fn invert_is_involution() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..20 {
            let t = random_rigid(&mut rng);
            let tt = invert(&invert(&t));
            assert!((tt.rotation.matrix() - t.rotation.matrix()).abs().max() < 1e-12);
            assert!((tt.translation - t.translation).norm() < 1e-12);
        }
    }

    #[test]
    fn composition_associative() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (a, b, c) = (
                random_rigid(&mut rng),
                random_rigid(&mut rng),
                random_rigid(&mut rng),
            );
            let left = compose(&compose(&a, &b), &c);
            let right = compose(&a, &compose(&b, &c));
            assert!((left.rotation.matrix() - right.rotation.matrix()).abs().max() < 1e-12);
            assert!((left.translation - right.translation).norm() < 1e-12);
        }
    }

    #[test]
    fn transform_pointmap_identity_and_scale() {
        let pm = Pointmap::new(
            1,
            2,
            Frame::Local,
            vec![Vec3::new(1.0, 1.0, 1.0), Vec3::new(0.5, -0.5, 2.0)],
            vec![true, true],
        )
        .unwrap();
        let id = transform_pointmap(&pm, &SimilarityTransform::identity());
        assert_eq!(id, pm);

        let scale2 =
            SimilarityTransform::try_new(2.0, RotationMatrix::identity(), Vec3::zeros()).unwrap();
        let scaled = transform_pointmap(&pm, &scale2);
        assert_relative_eq!(*scaled.at(0, 0), Vec3::new(2.0, 2.0, 2.0), epsilon = 1e-15);
    }

    #[test]
    fn transform_pointmap_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let points: Vec<Vec3> = (0..16)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                )
            })
            .collect();
        let pm = Pointmap::new(4, 4, Frame::Global, points, vec![true; 16]).unwrap();
        let t = SimilarityTransform::try_new(
            3.7,
            random_rotation(&mut rng),
            Vec3::new(0.3, -1.0, 2.0),
        )
        .unwrap();
        let back = transform_pointmap(&transform_pointmap(&pm, &t), &t.inverse());
        for (p, q) in pm.points().iter().zip(back.points()) {
            assert!((p - q).norm() < 1e-10);
        }
    }

    #[test]
    fn transform_pointmap_rigid_preserves_distances() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let points: Vec<Vec3> = (0..9)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                )
            })
            .collect();
        let pm = Pointmap::new(3, 3, Frame::Local, points, vec![true; 9]).unwrap();
        let t = SimilarityTransform::from_rigid(&random_rigid(&mut rng));
        let mapped = transform_pointmap(&pm, &t);
        for i in 0..9 {
            for j in 0..9 {
                let d0 = (pm.points()[i] - pm.points()[j]).norm();
                let d1 = (mapped.points()[i] - mapped.points()[j]).norm();
                assert!((d0 - d1).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn project_basic_cases() {
        let k = CameraIntrinsics::try_new(100.0, 50.0, 50.0).unwrap();
        assert_eq!(project(&Vec3::new(0.0, 0.0, 1.0), &k).unwrap(), (50.0, 50.0));
        assert_eq!(project(&Vec3::new(1.0, 0.0, 1.0), &k).unwrap(), (150.0, 50.0));
        assert!(matches!(
            project(&Vec3::new(0.0, 0.0, -1.0), &k),
            Err(GeometryError::NonPositiveDepth(_))
        ));
    }

    #[test]
    fn unproject_basic_cases() {
        let k = CameraIntrinsics::try_new(100.0, 50.0, 50.0).unwrap();
        assert_relative_eq!(
            unproject(50.0, 50.0, 2.0, &k).unwrap(),
            Vec3::new(0.0, 0.0, 2.0),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            unproject(150.0, 50.0, 1.0, &k).unwrap(),
            Vec3::new(1.0, 0.0, 1.0),
            epsilon = 1e-15
        );
        assert!(unproject(0.0, 0.0, 0.0, &k).is_err());
    }

    #[test]
    fn rotation_angle_cases() {
        let i = RotationMatrix::identity();
        assert_relative_eq!(rotation_angle_deg(&i, &i), 0.0, epsilon = 1e-12);
        assert_relative_eq!(rotation_angle_deg(&i, &rz(20.0)), 20.0, epsilon = 1e-9);
        // Wraparound: 170 and -170 about the same axis are 20 degrees apart.
        assert_relative_eq!(
            rotation_angle_deg(&rx(170.0), &rx(-170.0)),
            20.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn rotation_angle_symmetric_triangle() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let (a, b, c) = (
                random_rotation(&mut rng),
                random_rotation(&mut rng),
                random_rotation(&mut rng),
            );
            let ab = rotation_angle_deg(&a, &b);
            let ba = rotation_angle_deg(&b, &a);
            assert_relative_eq!(ab, ba, epsilon = 1e-9);
            let ac = rotation_angle_deg(&a, &c);
            let cb = rotation_angle_deg(&c, &b);
            assert!(ab <= ac + cb + 1e-9);
        }
    }

    #[test]
    fn translation_angle_cases() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        let zero = Vec3::zeros();
        assert_relative_eq!(translation_angle_deg(&x, &x), 0.0, epsilon = 1e-12);
        assert_relative_eq!(translation_angle_deg(&x, &y), 90.0, epsilon = 1e-12);
        assert_eq!(translation_angle_deg(&zero, &zero), 0.0);
        assert_eq!(translation_angle_deg(&zero, &x), 180.0);
    }

    #[test]
    fn confidence_map_clamps() {
        let c = ConfidenceMap::new(1, 2, vec![100.0, -100.0]).unwrap();
        assert_eq!(c.raw(), &[CONFIDENCE_CLAMP, -CONFIDENCE_CLAMP]);
        let sp = c.sigma_plus();
        assert!(sp.iter().all(|&v| v > 1.0 && v.is_finite()));
    }

    #[test]
    fn rotation_validation_rejects_sheared() {
        let mut m = Mat3::identity();
        m[(0, 1)] = 0.1;
        assert!(RotationMatrix::try_new(m).is_err());
        assert!(RotationMatrix::try_new(Mat3::identity()).is_ok());
        // Reflection has det -1.
        let mut refl = Mat3::identity();
        refl[(2, 2)] = -1.0;
        assert!(RotationMatrix::try_new(refl).is_err());
    }

    #[test]
    fn image_set_rejects_out_of_range() {
        assert!(ImageSet::new(1, 1, 1, vec![0.5, 0.5, 1.5]).is_err());
        assert!(ImageSet::new(1, 1, 1, vec![0.0, 0.5, 1.0]).is_ok());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn project_unproject_round_trip(
                u in 0.5f64..255.5,
                v in 0.5f64..255.5,
                depth in 0.05f64..50.0,
                focal in 20.0f64..500.0,
            ) {
                let k = CameraIntrinsics::try_new(focal, 128.0, 128.0).unwrap();
                let p = unproject(u, v, depth, &k).unwrap();
                let (pu, pv) = project(&p, &k).unwrap();
                prop_assert!((pu - u).abs() < 1e-9);
                prop_assert!((pv - v).abs() < 1e-9);
            }

            #[test]
            fn similarity_round_trip(
                x in -5.0f64..5.0,
                y in -5.0f64..5.0,
                z in -5.0f64..5.0,
                scale in 0.05f64..20.0,
                angle in -3.1f64..3.1,
            ) {
                let t = SimilarityTransform {
                    scale,
                    rotation: RotationMatrix::from_axis_angle(&Vec3::new(0.3, -0.5, 0.8), angle),
                    translation: Vec3::new(1.0, -2.0, 0.5),
                };
                let p = Vec3::new(x, y, z);
                let q = t.inverse().apply(&t.apply(&p));
                prop_assert!((p - q).norm() < 1e-9 * (1.0 + p.norm()));
            }
        }
    }
}
