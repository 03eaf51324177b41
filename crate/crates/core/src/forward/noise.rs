use rand::Rng;
use rand_distr::StandardNormal;

use super::grid::Image;
use crate::error::{Error, Result};
use crate::rng;

/// Spectral shape of the additive noise. Only white noise is implemented;
/// the enum is the extension point for a frequency-dependent profile.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NoiseProfile {
    #[default]
    White,
}

/// Population variance of the pixel values.
pub fn signal_variance(img: &Image) -> f64 {
    let n = img.data().len() as f64;
    let mean = img.data().iter().sum::<f64>() / n;
    img.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Adds zero-mean noise of the given variance.
pub fn add_noise_with<R: Rng + ?Sized>(img: &Image, variance: f64, profile: NoiseProfile, rng: &mut R) -> Image {
    let sd = variance.max(0.0).sqrt();
    match profile {
        NoiseProfile::White => {
            let data = img
                .data()
                .iter()
                .map(|&v| v + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Image::new(img.size(), data).expect("same shape")
        }
    }
}

/// White Gaussian noise with variance `signal_variance(img) / snr`.
pub fn add_noise(img: &Image, snr: f64, seed: u64) -> Result<Image> {
    if snr.is_nan() || snr <= 0.0 {
        return Err(Error::contract(format!("snr must be positive, got {snr}")));
    }
    let variance = signal_variance(img) / snr;
    let mut r = rng::stream(seed, "noise");
    Ok(add_noise_with(img, variance, NoiseProfile::White, &mut r))
}
