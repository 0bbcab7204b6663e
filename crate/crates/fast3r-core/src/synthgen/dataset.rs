//! Binary dataset container for rendered ground-truth samples.
//!
//! Layout (all little-endian): magic `F3RDATA1`, u32 version, u32 sample
//! count; per sample u32 N/H/W, then per view the camera-to-world pose
//! (row-major R then t, 12 f64), intrinsics (f, cx, cy as f64), the image
//! (h*w*3 f32), local and global pointmaps (h*w*3 f32 each) and the validity
//! mask (h*w u8).
//!
//! Pointmaps are stored in f32, so the first write quantizes; thereafter
//! read/write round-trips are bit-exact.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::geometry::{
    CameraIntrinsics, CameraModel, Frame, ImageSet, Mat3, Pointmap, RigidTransform,
    RotationMatrix, Vec3,
};

use super::{GroundTruthSample, SynthError};

pub const DATASET_MAGIC: &[u8; 8] = b"F3RDATA1";
pub const DATASET_VERSION: u32 = 1;

pub fn write_dataset(samples: &[GroundTruthSample], path: &Path) -> Result<(), SynthError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(DATASET_MAGIC)?;
    w.write_u32::<LittleEndian>(DATASET_VERSION)?;
    w.write_u32::<LittleEndian>(samples.len() as u32)?;

    for s in samples {
        let (n, h, wd) = (s.n_views(), s.height(), s.width());
        w.write_u32::<LittleEndian>(n as u32)?;
        w.write_u32::<LittleEndian>(h as u32)?;
        w.write_u32::<LittleEndian>(wd as u32)?;
        for v in 0..n {
            let cam = &s.cameras[v];
            let r = cam.pose.rotation.matrix();
            for row in 0..3 {
                for col in 0..3 {
                    w.write_f64::<LittleEndian>(r[(row, col)])?;
                }
            }
            for i in 0..3 {
                w.write_f64::<LittleEndian>(cam.pose.translation[i])?;
            }
            w.write_f64::<LittleEndian>(cam.intrinsics.focal)?;
            w.write_f64::<LittleEndian>(cam.intrinsics.cx)?;
            w.write_f64::<LittleEndian>(cam.intrinsics.cy)?;

            for &px in s.images.view(v) {
                w.write_f32::<LittleEndian>(px)?;
            }
            for pm in [&s.local_pointmaps[v], &s.global_pointmaps[v]] {
                for p in pm.points() {
                    w.write_f32::<LittleEndian>(p.x as f32)?;
                    w.write_f32::<LittleEndian>(p.y as f32)?;
                    w.write_f32::<LittleEndian>(p.z as f32)?;
                }
            }
            for &m in s.local_pointmaps[v].valid_mask() {
                w.write_u8(m as u8)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<GroundTruthSample>, SynthError> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| SynthError::Format("file too short for magic".into()))?;
    if &magic != DATASET_MAGIC {
        return Err(SynthError::Format(format!(
            "bad magic {:?}, expected F3RDATA1",
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = read_u32(&mut r)?;
    if version != DATASET_VERSION {
        return Err(SynthError::Format(format!(
            "unsupported dataset version {version}"
        )));
    }
    let count = read_u32(&mut r)? as usize;

    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let n = read_u32(&mut r)? as usize;
        let h = read_u32(&mut r)? as usize;
        let w = read_u32(&mut r)? as usize;
        if n == 0 || h == 0 || w == 0 || h * w > (1 << 28) {
            return Err(SynthError::Format(format!(
                "implausible sample dims n={n} h={h} w={w}"
            )));
        }

        let mut image_data = Vec::with_capacity(n * h * w * 3);
        let mut locals = Vec::with_capacity(n);
        let mut globals = Vec::with_capacity(n);
        let mut cameras = Vec::with_capacity(n);

        for _ in 0..n {
            let mut rm = Mat3::zeros();
            for row in 0..3 {
                for col in 0..3 {
                    rm[(row, col)] = read_f64(&mut r)?;
                }
            }
            let rotation = RotationMatrix::try_new(rm)
                .map_err(|e| SynthError::Format(format!("invalid pose rotation: {e}")))?;
            let mut t = Vec3::zeros();
            for i in 0..3 {
                t[i] = read_f64(&mut r)?;
            }
            let focal = read_f64(&mut r)?;
            let cx = read_f64(&mut r)?;
            let cy = read_f64(&mut r)?;
            let intrinsics = CameraIntrinsics::try_new(focal, cx, cy)
                .map_err(|e| SynthError::Format(format!("invalid intrinsics: {e}")))?;
            cameras.push(CameraModel {
                intrinsics,
                pose: RigidTransform::new(rotation, t),
            });

            for _ in 0..h * w * 3 {
                image_data.push(read_f32(&mut r)?);
            }
            let mut read_pm = || -> Result<Vec<Vec3>, SynthError> {
                let mut pts = Vec::with_capacity(h * w);
                for _ in 0..h * w {
                    let x = read_f32(&mut r)? as f64;
                    let y = read_f32(&mut r)? as f64;
                    let z = read_f32(&mut r)? as f64;
                    pts.push(Vec3::new(x, y, z));
                }
                Ok(pts)
            };
            let local_pts = read_pm()?;
            let global_pts = read_pm()?;
            let mut mask = Vec::with_capacity(h * w);
            for _ in 0..h * w {
                let mut b = [0u8; 1];
                r.read_exact(&mut b)
                    .map_err(|_| SynthError::Format("truncated mask".into()))?;
                mask.push(b[0] != 0);
            }
            locals.push(
                Pointmap::new(h, w, Frame::Local, local_pts, mask.clone())
                    .map_err(|e| SynthError::Format(format!("bad local pointmap: {e}")))?,
            );
            globals.push(
                Pointmap::new(h, w, Frame::Global, global_pts, mask)
                    .map_err(|e| SynthError::Format(format!("bad global pointmap: {e}")))?,
            );
        }

        let images = ImageSet::new(n, h, w, image_data)
            .map_err(|e| SynthError::Format(format!("bad image data: {e}")))?;
        samples.push(GroundTruthSample {
            images,
            local_pointmaps: locals,
            global_pointmaps: globals,
            cameras,
        });
    }
    Ok(samples)
}

fn read_u32(r: &mut impl Read) -> Result<u32, SynthError> {
    r.read_u32::<LittleEndian>()
        .map_err(|_| SynthError::Format("truncated file (u32)".into()))
}

fn read_f64(r: &mut impl Read) -> Result<f64, SynthError> {
    r.read_f64::<LittleEndian>()
        .map_err(|_| SynthError::Format("truncated file (f64)".into()))
}

fn read_f32(r: &mut impl Read) -> Result<f32, SynthError> {
    r.read_f32::<LittleEndian>()
        .map_err(|_| SynthError::Format("truncated file (f32)".into()))
}
