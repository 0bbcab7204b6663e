//! Evaluation metrics: relative rotation/translation accuracy and mAA over
//! camera pairs, median accuracy/completion between point clouds, and
//! multi-view depth error statistics.

use thiserror::Error;

use crate::geometry::{rotation_angle_deg, translation_angle_deg, CameraModel, Pointmap, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least two views, got {0}")]
    TooFewViews(usize),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("ground-truth depth {0} is not positive at a valid pixel")]
    NonPositiveGtDepth(f64),
    #[error("list lengths disagree: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Exact nearest-neighbor index over 3D points (median-split kd-tree).
pub struct KdTree<'a> {
    points: &'a [Vec3],
    nodes: Vec<Node>,
    root: usize,
}

struct Node {
    point_idx: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Vec3]) -> Option<KdTree<'a>> {
        if points.is_empty() {
            return None;
        }
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(points, &mut idx[..], 0, &mut nodes);
        Some(KdTree {
            points,
            nodes,
            root,
        })
    }

    fn build_rec(points: &[Vec3], idx: &mut [usize], depth: usize, nodes: &mut Vec<Node>) -> usize {
        let axis = depth % 3;
        idx.sort_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let mid = idx.len() / 2;
        let point_idx = idx[mid];
        let me = nodes.len();
        nodes.push(Node {
            point_idx,
            axis,
            left: None,
            right: None,
        });
        // Split borrows around the median.
        if mid > 0 {
            let (l, _) = idx.split_at_mut(mid);
            let left = Self::build_rec(points, l, depth + 1, nodes);
            nodes[me].left = Some(left);
        }
        if mid + 1 < idx.len() {
            let (_, r) = idx.split_at_mut(mid + 1);
            let right = Self::build_rec(points, r, depth + 1, nodes);
            nodes[me].right = Some(right);
        }
        me
    }

    /// Index and distance of the nearest stored point.
    pub fn nearest(&self, query: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(self.root, query, &mut best);
        (best.0, best.1.sqrt())
    }

    fn search(&self, node: usize, query: &Vec3, best: &mut (usize, f64)) {
        let n = &self.nodes[node];
        let p = &self.points[n.point_idx];
        let d2 = (p - query).norm_squared();
        if d2 < best.1 {
            *best = (n.point_idx, d2);
        }
        let delta = query[n.axis] - p[n.axis];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if let Some(c) = near {
            self.search(c, query, best);
        }
        if let Some(c) = far {
            if delta * delta < best.1 {
                self.search(c, query, best);
            }
        }
    }
}

/// Relative pose accuracies over all unordered view pairs.
#[derive(Debug, Clone)]
pub struct PoseMetrics {
    /// `(threshold_deg, fraction)` for relative rotation accuracy.
    pub rra_at: Vec<(f64, f64)>,
    /// Same for relative translation direction accuracy.
    pub rta_at: Vec<(f64, f64)>,
    /// Mean joint accuracy over integer thresholds 1..=30 degrees.
    pub maa30: f64,
}

/// Rotation and translation-direction error (degrees) of one view pair.
/// Cameras are camera-to-world; the relative quantities are convention-fixed
/// so that a rigid change of the world frame cancels.
fn pair_errors(pred: &[CameraModel], gt: &[CameraModel], i: usize, j: usize) -> (f64, f64) {
    let rel_rot = |cams: &[CameraModel]| {
        cams[j].pose.rotation.transpose() * cams[i].pose.rotation
    };
    let rel_t = |cams: &[CameraModel]| {
        cams[j]
            .pose
            .rotation
            .transpose()
            .apply(&(cams[i].pose.translation - cams[j].pose.translation))
    };
    let rot_err = rotation_angle_deg(&rel_rot(pred), &rel_rot(gt));
    let t_err = translation_angle_deg(&rel_t(pred), &rel_t(gt));
    (rot_err, t_err)
}

/// RRA/RTA at the given thresholds plus mAA(30), strict `<` at thresholds.
pub fn pose_metrics(
    pred: &[CameraModel],
    gt: &[CameraModel],
    thresholds: &[f64],
) -> Result<PoseMetrics, MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), gt.len()));
    }
    if pred.len() < 2 {
        return Err(MetricsError::TooFewViews(pred.len()));
    }
    let n = pred.len();
    let mut errors = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            errors.push(pair_errors(pred, gt, i, j));
        }
    }
    let count = errors.len() as f64;
    let frac = |f: &dyn Fn(&(f64, f64)) -> bool| errors.iter().filter(|e| f(e)).count() as f64 / count;

    let rra_at = thresholds
        .iter()
        .map(|&t| (t, frac(&|e: &(f64, f64)| e.0 < t)))
        .collect();
    let rta_at = thresholds
        .iter()
        .map(|&t| (t, frac(&|e: &(f64, f64)| e.1 < t)))
        .collect();
    let maa30 = (1..=30)
        .map(|t| frac(&|e: &(f64, f64)| e.0.max(e.1) < t as f64))
        .sum::<f64>()
        / 30.0;

    Ok(PoseMetrics {
        rra_at,
        rta_at,
        maa30,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Accuracy = median distance from predicted points to their nearest ground
/// truth point; Completion = the reverse.
pub fn reconstruction_metrics(pred: &[Vec3], gt: &[Vec3]) -> Result<(f64, f64), MetricsError> {
    if pred.is_empty() || gt.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    let gt_tree = KdTree::build(gt).expect("non-empty");
    let pred_tree = KdTree::build(pred).expect("non-empty");
    let acc = median(pred.iter().map(|p| gt_tree.nearest(p).1).collect());
    let comp = median(gt.iter().map(|p| pred_tree.nearest(p).1).collect());
    Ok((acc, comp))
}

/// Multi-view depth error over valid pixels: mean absolute relative error in
/// percent, and the percentage of pixels whose depth ratio stays below 1.03.
pub fn depth_metrics(
    pred_locals: &[Pointmap],
    gt_locals: &[Pointmap],
) -> Result<(f64, f64), MetricsError> {
    if pred_locals.len() != gt_locals.len() {
        return Err(MetricsError::LengthMismatch(
            pred_locals.len(),
            gt_locals.len(),
        ));
    }
    let mut rel_sum = 0.0;
    let mut inliers = 0usize;
    let mut count = 0usize;
    for (pred, gt) in pred_locals.iter().zip(gt_locals) {
        for (i, gt_p) in gt.valid_points() {
            let d_star = gt_p.z;
            if d_star <= 0.0 {
                return Err(MetricsError::NonPositiveGtDepth(d_star));
            }
            let d = pred.points()[i].z;
            rel_sum += (d - d_star).abs() / d_star;
            if d > 0.0 && (d / d_star).max(d_star / d) < 1.03 {
                inliers += 1;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricsError::EmptyCloud);
    }
    Ok((
        100.0 * rel_sum / count as f64,
        100.0 * inliers as f64 / count as f64,
    ))
}
