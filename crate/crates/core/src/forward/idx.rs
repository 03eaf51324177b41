//! IDX (MNIST) reader.
//!
//! Big-endian throughout. Images: magic `0x00000803`, then `n`, `rows`,
//! `cols` as u32, then `n·rows·cols` unsigned bytes. Labels: magic
//! `0x00000801`, then `n`, then `n` unsigned bytes.

use std::path::Path;

use super::dataset::{Dataset, Mode, ParticleImage};
use super::grid::Image;
use super::pose::Pose;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(bytes.len() as u64, "truncated IDX header"))
}

/// Parsed image file: `(rows, cols, raw pixel bytes per image)`.
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<u8>>,
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(0, format!("bad image magic 0x{magic:08x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let per = rows * cols;
    let body = &bytes[16..];
    let need = n.saturating_mul(per);
    if body.len() < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!(
                "image data truncated: need {need} bytes after header, have {}",
                body.len()
            ),
        ));
    }
    let images = (0..n).map(|i| body[i * per..(i + 1) * per].to_vec()).collect();
    Ok(IdxImages { rows, cols, images })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(0, format!("bad label magic 0x{magic:08x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::format(
            bytes.len() as u64,
            format!("label data truncated: need {n} bytes after header, have {}", body.len()),
        ));
    }
    Ok(body[..n].to_vec())
}

/// Builds a pixel-image dataset from in-memory IDX files. Pixels are
/// scaled to `[0, 1]`; labels become the truth values.
pub fn dataset_from_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<Dataset> {
    let imgs = parse_images(image_bytes)?;
    let labels = parse_labels(label_bytes)?;
    if labels.len() < imgs.images.len() {
        return Err(Error::format(
            8 + labels.len() as u64,
            format!(
                "label file holds {} labels but image file holds {} images",
                labels.len(),
                imgs.images.len()
            ),
        ));
    }
    if imgs.rows != imgs.cols {
        return Err(Error::format(
            8,
            format!("images must be square, got {}×{}", imgs.rows, imgs.cols),
        ));
    }
    let images = imgs
        .images
        .iter()
        .zip(&labels)
        .enumerate()
        .map(|(i, (raw, &label))| {
            Ok(ParticleImage {
                index: i,
                pixels: Image::new(imgs.rows, raw.iter().map(|&b| f64::from(b) / 255.0).collect())?,
                pose: Pose::IDENTITY,
                truth: f64::from(label),
                noise_sd: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(images, Mode::PixelImage, f64::INFINITY, 0)
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    dataset_from_idx(&images, &labels)
}

/// Serializes images and labels in IDX layout.
pub fn encode_idx(rows: usize, cols: usize, images: &[Vec<u8>], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::new();
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    for im in images {
        img.extend_from_slice(im);
    }
    let mut lab = Vec::new();
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}
