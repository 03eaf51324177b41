//! Volume and image dumps.
//!
//! Volumes are flat little-endian `f32` grids in `(i, j, k)` row-major order
//! with a text sidecar (`<name>.txt`) holding `size` and `voxel_size`.
//! Images are binary PGM (P5, maxval 255), min-max scaled.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::forward::{Image, Volume};

pub fn write_volume_f32(path: &Path, v: &Volume) -> Result<()> {
    let bytes: Vec<u8> = v.data().iter().flat_map(|&x| (x as f32).to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let sidecar = path.with_extension("txt");
    let text = format!("size {}\nvoxel_size {}\n", v.size(), v.voxel_size);
    fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))
}

pub fn read_volume_f32(path: &Path) -> Result<Volume> {
    let sidecar = path.with_extension("txt");
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let mut size = None;
    let mut voxel_size = 1.0;
    for line in text.lines() {
        match line.split_once(' ') {
            Some(("size", v)) => size = v.trim().parse::<usize>().ok(),
            Some(("voxel_size", v)) => {
                voxel_size = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::format(0, format!("bad voxel_size in {}", sidecar.display())))?
            }
            _ => {}
        }
    }
    let size = size.ok_or_else(|| Error::format(0, format!("missing size in {}", sidecar.display())))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != 4 * size.pow(3) {
        return Err(Error::format(
            bytes.len() as u64,
            format!("expected {} bytes for a {size}³ grid", 4 * size.pow(3)),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let mut v = Volume::new(size, data)?;
    v.voxel_size = voxel_size;
    Ok(v)
}

pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    let d = img.size();
    let (lo, hi) = img
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = format!("P5\n{d} {d}\n255\n").into_bytes();
    bytes.extend(img.data().iter().map(|&v| (255.0 * (v - lo) / span).round() as u8));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
