//! `gen-data`: render a deterministic synthetic dataset.

use std::path::Path;

use fast3r_core::geometry::CameraIntrinsics;
use fast3r_core::synthgen::{
    focal_for_fov, render_sample, sample_camera_ring_scene_frame, sample_scene, write_dataset,
    SceneSpec,
};

use crate::config::DataConfig;

fn mix(seed: u64, salt: u64) -> u64 {
    let mut x = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 33;
    x = x.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x ^= x >> 33;
    x
}

pub fn run(data: &DataConfig, out: &Path) -> anyhow::Result<()> {
    let k = CameraIntrinsics::centered(
        focal_for_fov(data.fov_deg, data.width),
        data.width,
        data.height,
    );
    let mut samples = Vec::with_capacity(data.n_scenes);
    for i in 0..data.n_scenes {
        let spec = SceneSpec {
            min_primitives: data.min_primitives,
            max_primitives: data.max_primitives,
            extent: data.extent,
            rng_seed: mix(data.seed, i as u64),
        };
        let scene = sample_scene(&spec);
        let cams = sample_camera_ring_scene_frame(
            data.views_per_scene,
            data.camera_radius,
            mix(data.seed, 0x5EED ^ i as u64),
        );
        samples.push(render_sample(&scene, &cams, &k, data.height, data.width)?);
    }
    write_dataset(&samples, out)?;
    println!(
        "wrote {} samples x {} views ({}x{}) to {}",
        samples.len(),
        data.views_per_scene,
        data.height,
        data.width,
        out.display()
    );
    Ok(())
}
