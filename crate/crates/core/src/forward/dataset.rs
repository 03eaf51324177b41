//! Synthetic dataset generation and the on-disk dataset container.
//!
//! File layout (little-endian):
//!
//! ```text
//! magic "LWDS" | version u32 = 1 | mode u8 (0 tomographic, 1 pixel_image)
//! n u64 | D u32 | snr f64 | seed u64
//! n × { pixels D·D × f32
//!       pose 7 × f64  (qw, qx, qy, qz, t_row, t_col, noise_sd)
//!       kernel u32 | truth f64 | index u64 }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use super::grid::Image;
use super::noise::{add_noise_with, NoiseProfile};
use super::operators::{PoseOperator, KERNEL_BANK};
use super::phantom::make_phantom;
use super::pose::{Pose, Quaternion};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{LinearMap, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Tomographic,
    PixelImage,
}

/// How ground-truth conformations are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConformationLaw {
    Uniform,
    /// `K` equally spaced states `k/(K-1)`.
    Discrete(usize),
}

impl ConformationLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ConformationLaw::Uniform => rng.random::<f64>(),
            ConformationLaw::Discrete(k) if k <= 1 => 0.0,
            ConformationLaw::Discrete(k) => rng.random_range(0..k) as f64 / (k - 1) as f64,
        }
    }
}

/// How poses are drawn. `Identity` is the degenerate pipeline used to check
/// the imaging chain end to end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoseLaw {
    Random,
    Identity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub n: usize,
    /// Image side `D`, equal to the phantom grid side `L`.
    pub size: usize,
    pub snr: f64,
    pub law: ConformationLaw,
    pub poses: PoseLaw,
    /// Largest |translation| component, in pixels.
    pub max_shift: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            n: 2000,
            size: 32,
            snr: 0.1,
            law: ConformationLaw::Discrete(2),
            poses: PoseLaw::Random,
            max_shift: 2.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleImage {
    pub index: usize,
    pub pixels: Image,
    pub pose: Pose,
    /// Conformation in `[0, 1]` for synthetic data, class label otherwise.
    pub truth: f64,
    /// Standard deviation of the noise that was added.
    pub noise_sd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub images: Vec<ParticleImage>,
    pub mode: Mode,
    pub snr: f64,
    pub seed: u64,
    size: usize,
}

impl Dataset {
    pub fn new(images: Vec<ParticleImage>, mode: Mode, snr: f64, seed: u64) -> Result<Self> {
        let size = images.first().map(|p| p.pixels.size()).unwrap_or(0);
        for (i, p) in images.iter().enumerate() {
            if p.pixels.size() != size {
                return Err(Error::contract(format!(
                    "image {i} has size {} but dataset size is {size}",
                    p.pixels.size()
                )));
            }
            if p.index != i {
                return Err(Error::contract(format!("image at position {i} has index {}", p.index)));
            }
            if mode == Mode::PixelImage && p.pose != Pose::IDENTITY {
                return Err(Error::contract("pixel-image datasets carry identity poses"));
            }
        }
        Ok(Dataset {
            images,
            mode,
            snr,
            seed,
            size,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image_size(&self) -> usize {
        self.size
    }

    pub fn pixel_count(&self) -> usize {
        self.size * self.size
    }

    /// `[indices.len(), D·D]` matrix of the selected images.
    pub fn batch(&self, indices: &[usize]) -> Tensor {
        let w = self.pixel_count();
        let mut data = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            data.extend_from_slice(self.images[i].pixels.data());
        }
        Tensor::matrix(indices.len(), w, data).expect("batch shape")
    }

    pub fn truths(&self) -> Vec<f64> {
        self.images.iter().map(|p| p.truth).collect()
    }

    /// Class ids when the truth takes few distinct values (discrete
    /// conformations, digit labels); `None` for continuous truth.
    pub fn discrete_labels(&self) -> Option<Vec<usize>> {
        let mut distinct: BTreeMap<u64, usize> = BTreeMap::new();
        for p in &self.images {
            let key = p.truth.to_bits();
            if !distinct.contains_key(&key) {
                if distinct.len() >= 64 {
                    return None;
                }
                distinct.insert(key, 0);
            }
        }
        let mut values: Vec<f64> = distinct.keys().map(|&b| f64::from_bits(b)).collect();
        values.sort_by(f64::total_cmp);
        Some(
            self.images
                .iter()
                .map(|p| values.iter().position(|&v| v == p.truth).unwrap())
                .collect(),
        )
    }

    /// Empirical mean and population variance over every pixel.
    pub fn pixel_moments(&self) -> (f64, f64) {
        let n = (self.len() * self.pixel_count()) as f64;
        let mean = self.images.iter().flat_map(|p| p.pixels.data()).sum::<f64>() / n;
        let var = self
            .images
            .iter()
            .flat_map(|p| p.pixels.data())
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / n;
        (mean, var)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&1u32.to_le_bytes());
        out.push(match self.mode {
            Mode::Tomographic => 0,
            Mode::PixelImage => 1,
        });
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.size as u32).to_le_bytes());
        out.extend_from_slice(&self.snr.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for p in &self.images {
            for &v in p.pixels.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
            let q = p.pose.rotation;
            for v in [
                q.w,
                q.x,
                q.y,
                q.z,
                p.pose.translation[0],
                p.pose.translation[1],
                p.noise_sd,
            ] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&(p.pose.ctf_kernel as u32).to_le_bytes());
            out.extend_from_slice(&p.truth.to_le_bytes());
            out.extend_from_slice(&(p.index as u64).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format(0, "bad dataset magic"));
        }
        let version = r.u32()?;
        if version != 1 {
            return Err(Error::format(4, format!("unsupported dataset version {version}")));
        }
        let mode = match r.take(1)?[0] {
            0 => Mode::Tomographic,
            1 => Mode::PixelImage,
            m => return Err(Error::format(8, format!("unknown mode byte {m}"))),
        };
        let n = r.u64()? as usize;
        let size = r.u32()? as usize;
        let snr = r.f64()?;
        let seed = r.u64()?;
        let mut images = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let pixels = r
                .take(size * size * 4)?
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                .collect();
            let mut pose = [0.0; 7];
            for v in pose.iter_mut() {
                *v = r.f64()?;
            }
            let kernel = r.u32()? as usize;
            let truth = r.f64()?;
            let index = r.u64()? as usize;
            images.push(ParticleImage {
                index,
                pixels: Image::new(size, pixels)?,
                pose: Pose {
                    rotation: Quaternion::new(pose[0], pose[1], pose[2], pose[3]),
                    translation: [pose[4], pose[5]],
                    ctf_kernel: kernel,
                },
                truth,
                noise_sd: pose[6],
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::format(r.pos as u64, "trailing bytes after last record"));
        }
        Dataset::new(images, mode, snr, seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

const MAGIC: &[u8; 4] = b"LWDS";

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(self.pos as u64, "truncated dataset file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Renders `n` particles, standardizes the clean images to zero mean and
/// unit variance over the whole dataset, then adds white noise of variance
/// `1/snr`. Each particle draws from its own `(seed, stream, index)` RNG, so
/// the result does not depend on generation order.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    if spec.n == 0 {
        return Err(Error::contract("dataset needs n >= 1"));
    }
    if spec.snr.is_nan() || spec.snr <= 0.0 {
        return Err(Error::contract(format!("snr must be positive, got {}", spec.snr)));
    }
    let l = spec.size;
    if spec.max_shift > l as f64 / 8.0 {
        return Err(Error::contract("max_shift exceeds L/8"));
    }
    let mut phantoms: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut clean = Vec::with_capacity(spec.n);
    let mut meta = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let mut r = rng::item_stream(spec.seed, "data", i as u64);
        let truth = spec.law.sample(&mut r);
        let pose = match spec.poses {
            PoseLaw::Identity => Pose::IDENTITY,
            PoseLaw::Random => Pose {
                rotation: Quaternion::random(&mut r),
                translation: [
                    r.random_range(-spec.max_shift..=spec.max_shift),
                    r.random_range(-spec.max_shift..=spec.max_shift),
                ],
                ctf_kernel: r.random_range(0..KERNEL_BANK.len()),
            },
        };
        let key = truth.to_bits();
        if !phantoms.contains_key(&key) {
            if spec.law == ConformationLaw::Uniform {
                phantoms.clear();
            }
            phantoms.insert(key, make_phantom(truth, l)?.into_data());
        }
        let volume = &phantoms[&key];
        let op = PoseOperator::new(l, &pose)?;
        let mut img = vec![0.0; l * l];
        op.apply(volume, &mut img);
        clean.push(img);
        meta.push((truth, pose));
    }
    let count = (spec.n * l * l) as f64;
    let mean = clean.iter().flatten().sum::<f64>() / count;
    let var = clean.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    let noise_var = if spec.snr.is_finite() { 1.0 / spec.snr } else { 0.0 };
    let images = clean
        .into_iter()
        .zip(meta)
        .enumerate()
        .map(|(i, (img, (truth, pose)))| {
            let std_img = Image::new(l, img.iter().map(|v| (v - mean) / sd).collect())?;
            let pixels = if noise_var > 0.0 {
                let mut r = rng::item_stream(spec.seed, "noise", i as u64);
                add_noise_with(&std_img, noise_var, NoiseProfile::White, &mut r)
            } else {
                std_img
            };
            Ok(ParticleImage {
                index: i,
                pixels,
                pose,
                truth,
                noise_sd: noise_var.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(images, Mode::Tomographic, spec.snr, spec.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::project;

    fn small(n: usize, seed: u64) -> DatasetSpec {
        DatasetSpec {
            n,
            size: 16,
            snr: 0.5,
            seed,
            ..DatasetSpec::default()
        }
    }

    #[test]
    fn rerun_is_bitwise_identical() {
        let a = generate_dataset(&small(4, 7)).unwrap();
        let b = generate_dataset(&small(4, 7)).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let c = generate_dataset(&small(4, 8)).unwrap();
        assert_ne!(a.to_bytes(), c.to_bytes());
    }

    #[test]
    fn degenerate_pipeline_matches_projection() {
        let spec = DatasetSpec {
            n: 3,
            size: 16,
            snr: 1e12,
            law: ConformationLaw::Discrete(1),
            poses: PoseLaw::Identity,
            ..DatasetSpec::default()
        };
        let ds = generate_dataset(&spec).unwrap();
        let p = project(&make_phantom(0.0, 16).unwrap());
        let n = p.data().len() as f64;
        let mean = p.data().iter().sum::<f64>() / n;
        let sd = (p.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        for img in &ds.images {
            for (a, b) in img.pixels.data().iter().zip(p.data()) {
                // noise sd is 1e-6 at this snr
                assert!((a - (b - mean) / sd).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn discrete_law_has_k_values() {
        let spec = DatasetSpec {
            law: ConformationLaw::Discrete(3),
            ..small(60, 1)
        };
        let ds = generate_dataset(&spec).unwrap();
        let labels = ds.discrete_labels().unwrap();
        let mut seen: Vec<usize> = labels.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen, vec![0, 1, 2]);
        let uniform = generate_dataset(&DatasetSpec {
            law: ConformationLaw::Uniform,
            ..small(80, 1)
        })
        .unwrap();
        assert!(uniform.discrete_labels().is_none());
    }

    #[test]
    fn file_round_trip_and_corruption() {
        let ds = generate_dataset(&small(3, 2)).unwrap();
        let bytes = ds.to_bytes();
        let back = Dataset::from_bytes(&bytes).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.images[1].pose, ds.images[1].pose);
        for (a, b) in back.images[2].pixels.data().iter().zip(ds.images[2].pixels.data()) {
            assert_eq!(*a, f64::from(*b as f32));
        }
        assert!(Dataset::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(generate_dataset(&small(0, 1)).is_err());
    }
}
