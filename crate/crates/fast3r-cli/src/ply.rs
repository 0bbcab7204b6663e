//! Binary little-endian PLY writer for colored point clouds.

use byteorder::{LittleEndian, WriteBytesExt};
use std::io::{BufWriter, Write};
use std::path::Path;

use fast3r_core::geometry::Vec3;

/// One vertex: position plus 8-bit RGB.
#[derive(Debug, Clone, Copy)]
pub struct ColoredPoint {
    pub position: Vec3,
    pub color: [u8; 3],
}

pub fn write_ply(points: &[ColoredPoint], path: &Path) -> anyhow::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\n\
         end_header\n",
        points.len()
    )?;
    for p in points {
        w.write_f32::<LittleEndian>(p.position.x as f32)?;
        w.write_f32::<LittleEndian>(p.position.y as f32)?;
        w.write_f32::<LittleEndian>(p.position.z as f32)?;
        w.write_all(&p.color)?;
    }
    w.flush()?;
    Ok(())
}
