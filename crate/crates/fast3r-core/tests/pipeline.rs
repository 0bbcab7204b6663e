//! End-to-end checks against rendered ground truth: camera recovery from
//! exact global pointmaps, local-to-global alignment, and metric baselines.

use fast3r_core::align::{align_local_to_global, AlignOptions};
use fast3r_core::geometry::{
    rotation_angle_deg, translation_angle_deg, CameraIntrinsics, ConfidenceMap,
};
use fast3r_core::metrics::{depth_metrics, pose_metrics, reconstruction_metrics};
use fast3r_core::pose::{estimate_all_cameras, RansacConfig};
use fast3r_core::synthgen::{
    focal_for_fov, render_sample, sample_camera_ring_scene_frame, sample_scene, GroundTruthSample,
    SceneSpec,
};

fn gt_sample(seed: u64, n_views: usize, side: usize, fov_deg: f64) -> GroundTruthSample {
    let scene = sample_scene(&SceneSpec {
        rng_seed: seed,
        ..SceneSpec::default()
    });
    let cams = sample_camera_ring_scene_frame(n_views, 4.0, seed ^ 0x5555);
    let k = CameraIntrinsics::centered(focal_for_fov(fov_deg, side), side, side);
    render_sample(&scene, &cams, &k, side, side).unwrap()
}

fn uniform_confs(sample: &GroundTruthSample) -> Vec<ConfidenceMap> {
    (0..sample.n_views())
        .map(|_| ConfidenceMap::uniform(sample.height(), sample.width(), 0.0))
        .collect()
}

#[test]
fn exact_pointmaps_recover_cameras_and_metrics_saturate() {
    let cfg = RansacConfig::default();
    let mut estimated_cams = Vec::new();
    let mut gt_cams = Vec::new();
    for seed in 0..5 {
        let sample = gt_sample(seed, 4, 32, 60.0);
        let confs = uniform_confs(&sample);
        let results = estimate_all_cameras(&sample.global_pointmaps, &confs, &cfg, true);
        let true_f = sample.cameras[0].intrinsics.focal;
        for (v, r) in results.iter().enumerate() {
            let est = r.as_ref().expect("exact data must solve");
            let gt = &sample.cameras[v];
            let rot_err = rotation_angle_deg(&est.camera.pose.rotation, &gt.pose.rotation);
            let t_err =
                translation_angle_deg(&est.camera.pose.translation, &gt.pose.translation);
            let f_err = (est.camera.intrinsics.focal - true_f).abs() / true_f;
            assert!(rot_err < 0.5, "seed {seed} view {v}: rotation error {rot_err}");
            assert!(t_err < 0.5, "seed {seed} view {v}: translation error {t_err}");
            assert!(f_err < 0.02, "seed {seed} view {v}: focal error {f_err}");
            estimated_cams.push(est.camera);
            gt_cams.push(*gt);
        }

        // View 1 anchors the global frame.
        let first = results[0].as_ref().unwrap();
        let rot0 = rotation_angle_deg(
            &first.camera.pose.rotation,
            &sample.cameras[0].pose.rotation,
        );
        assert!(rot0 < 1e-4, "view 1 should be the identity, off by {rot0} deg");
        assert!(first.camera.pose.translation.norm() < 1e-6);

        // Per-scene relative metrics saturate.
        let pred: Vec<_> = results.iter().map(|r| r.as_ref().unwrap().camera).collect();
        let m = pose_metrics(&pred, &sample.cameras, &[15.0]).unwrap();
        assert_eq!(m.rra_at[0].1, 1.0);
        assert_eq!(m.rta_at[0].1, 1.0);
    }
    assert!(estimated_cams.len() >= 20);
}

#[test]
fn pose_estimates_are_deterministic() {
    let sample = gt_sample(11, 3, 32, 60.0);
    let confs = uniform_confs(&sample);
    let cfg = RansacConfig::default();
    let run = || {
        estimate_all_cameras(&sample.global_pointmaps, &confs, &cfg, true)
            .into_iter()
            .map(|r| {
                let e = r.unwrap();
                (
                    e.inlier_count,
                    e.camera.intrinsics.focal.to_bits(),
                    e.camera.pose.translation.x.to_bits(),
                )
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn estimated_inliers_reproject_within_threshold() {
    let sample = gt_sample(13, 3, 32, 60.0);
    let confs = uniform_confs(&sample);
    let cfg = RansacConfig::default();
    let results = estimate_all_cameras(&sample.global_pointmaps, &confs, &cfg, true);
    for (v, r) in results.iter().enumerate() {
        let est = r.as_ref().unwrap();
        let w2c = fast3r_core::geometry::invert(&est.camera.pose);
        let pm = &sample.global_pointmaps[v];
        let mut checked = 0;
        for row in 0..pm.height {
            for col in 0..pm.width {
                if !pm.is_valid(row, col) {
                    continue;
                }
                let cam = w2c.apply(pm.at(row, col));
                if cam.z <= 0.0 {
                    continue;
                }
                let (u, vv) = fast3r_core::geometry::project(&cam, &est.camera.intrinsics).unwrap();
                let err = (u - (col as f64 + 0.5)).hypot(vv - (row as f64 + 0.5));
                assert!(
                    err < cfg.inlier_threshold_px,
                    "view {v} pixel ({row},{col}) reprojects {err} px off"
                );
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}

#[test]
fn ground_truth_alignment_is_exact() {
    let sample = gt_sample(17, 4, 32, 60.0);
    let (merged, result) = align_local_to_global(
        &sample.local_pointmaps,
        &sample.global_pointmaps,
        None,
        &AlignOptions::default(),
    )
    .unwrap();
    for (v, rms) in result.residual_rms.iter().enumerate() {
        assert!(*rms < 1e-9, "view {v} rms {rms}");
        let t = result.transforms[v].as_ref().unwrap();
        // The recovered similarity is the camera pose (unit scale).
        assert!((t.scale - 1.0).abs() < 1e-12);
        let rot_err = rotation_angle_deg(&t.rotation, &sample.cameras[v].pose.rotation);
        assert!(rot_err < 1e-6, "view {v} rotation {rot_err}");
    }
    // View 1's transform is the identity.
    let t0 = result.transforms[0].as_ref().unwrap();
    assert!(t0.translation.norm() < 1e-9);

    // The merged cloud reproduces the global cloud.
    let gt_cloud: Vec<_> = sample
        .global_pointmaps
        .iter()
        .flat_map(|pm| pm.valid_points().map(|(_, p)| *p))
        .collect();
    let (acc, comp) = reconstruction_metrics(&merged, &gt_cloud).unwrap();
    assert!(acc < 1e-9 && comp < 1e-9, "acc {acc} comp {comp}");
}

#[test]
fn ground_truth_depth_is_perfect() {
    let sample = gt_sample(19, 3, 32, 60.0);
    let (rel, tau) = depth_metrics(&sample.local_pointmaps, &sample.local_pointmaps).unwrap();
    assert!(rel.abs() < 1e-12);
    assert!((tau - 100.0).abs() < 1e-12);
}
