//! Prediction container: per-sample local/global pointmaps and raw
//! confidence grids, mirroring the dataset's binary conventions.
//!
//! Layout (little-endian): magic `F3RPRED1`, u32 version, u32 sample count;
//! per sample u32 N/H/W, then per view the local pointmap (h*w*3 f32), local
//! confidence (h*w f32), global pointmap (h*w*3 f32), global confidence
//! (h*w f32). Predictions are dense; validity comes from ground truth.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use fast3r_core::geometry::{ConfidenceMap, Frame, Pointmap, Vec3};
use fast3r_core::model::PredictionBundle;

use crate::error::SchemaError;

pub const PRED_MAGIC: &[u8; 8] = b"F3RPRED1";
pub const PRED_VERSION: u32 = 1;

pub fn write_predictions(bundles: &[PredictionBundle], path: &Path) -> anyhow::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(PRED_MAGIC)?;
    w.write_u32::<LittleEndian>(PRED_VERSION)?;
    w.write_u32::<LittleEndian>(bundles.len() as u32)?;
    for b in bundles {
        let n = b.n_views();
        let (h, wd) = (b.local[0].height, b.local[0].width);
        w.write_u32::<LittleEndian>(n as u32)?;
        w.write_u32::<LittleEndian>(h as u32)?;
        w.write_u32::<LittleEndian>(wd as u32)?;
        for v in 0..n {
            for p in b.local[v].points() {
                for c in 0..3 {
                    w.write_f32::<LittleEndian>(p[c] as f32)?;
                }
            }
            for &s in b.local_conf[v].raw() {
                w.write_f32::<LittleEndian>(s as f32)?;
            }
            for p in b.global[v].points() {
                for c in 0..3 {
                    w.write_f32::<LittleEndian>(p[c] as f32)?;
                }
            }
            for &s in b.global_conf[v].raw() {
                w.write_f32::<LittleEndian>(s as f32)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> anyhow::Result<Vec<PredictionBundle>> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| SchemaError("prediction file too short".into()))?;
    if &magic != PRED_MAGIC {
        return Err(SchemaError(format!(
            "bad prediction magic {:?}",
            String::from_utf8_lossy(&magic)
        ))
        .into());
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != PRED_VERSION {
        return Err(SchemaError(format!("unsupported prediction version {version}")).into());
    }
    let count = r.read_u32::<LittleEndian>()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let n = r.read_u32::<LittleEndian>()? as usize;
        let h = r.read_u32::<LittleEndian>()? as usize;
        let w = r.read_u32::<LittleEndian>()? as usize;
        if n == 0 || h * w == 0 || h * w > (1 << 28) {
            return Err(SchemaError(format!("implausible prediction dims n={n} h={h} w={w}")).into());
        }
        let mut bundle = PredictionBundle {
            local: Vec::with_capacity(n),
            local_conf: Vec::with_capacity(n),
            global: Vec::with_capacity(n),
            global_conf: Vec::with_capacity(n),
        };
        for _ in 0..n {
            let read_pm = |r: &mut BufReader<std::fs::File>,
                               frame: Frame|
             -> anyhow::Result<Pointmap> {
                let mut pts = Vec::with_capacity(h * w);
                for _ in 0..h * w {
                    let x = r.read_f32::<LittleEndian>()? as f64;
                    let y = r.read_f32::<LittleEndian>()? as f64;
                    let z = r.read_f32::<LittleEndian>()? as f64;
                    pts.push(Vec3::new(x, y, z));
                }
                Ok(Pointmap::new(h, w, frame, pts, vec![true; h * w])
                    .map_err(|e| SchemaError(format!("bad pointmap: {e}")))?)
            };
            let read_conf = |r: &mut BufReader<std::fs::File>| -> anyhow::Result<ConfidenceMap> {
                let mut raw = Vec::with_capacity(h * w);
                for _ in 0..h * w {
                    raw.push(r.read_f32::<LittleEndian>()? as f64);
                }
                Ok(ConfidenceMap::new(h, w, raw)
                    .map_err(|e| SchemaError(format!("bad confidence map: {e}")))?)
            };
            bundle.local.push(read_pm(&mut r, Frame::Local)?);
            bundle.local_conf.push(read_conf(&mut r)?);
            bundle.global.push(read_pm(&mut r, Frame::Global)?);
            bundle.global_conf.push(read_conf(&mut r)?);
        }
        out.push(bundle);
    }
    Ok(out)
}

/// Sniffs a file's 8-byte magic.
pub fn file_magic(path: &Path) -> anyhow::Result<[u8; 8]> {
    let mut f = std::fs::File::open(path)?;
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)
        .map_err(|_| SchemaError(format!("{} is too short for a magic", path.display())))?;
    Ok(magic)
}
