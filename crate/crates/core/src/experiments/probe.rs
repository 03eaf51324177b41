//! Augmentation probes: does the encoder map a shifted or rotated image
//! near the original's latent?

use std::fmt;
use std::str::FromStr;

use super::metrics::nearest;
use super::train::{Backend, Model};
use crate::error::{Error, Result};
use crate::forward::{Dataset, Image};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Augmentation {
    /// Circular roll by `k` columns to the right.
    Shift(isize),
    /// `times` quarter turns clockwise.
    Rotate90(usize),
}

impl Augmentation {
    pub fn apply(&self, img: &Image) -> Result<Image> {
        match *self {
            Augmentation::Shift(k) => {
                if k.unsigned_abs() >= img.size() {
                    return Err(Error::contract(format!(
                        "shift {k} must be smaller than the image side {}",
                        img.size()
                    )));
                }
                Ok(img.roll_right(k))
            }
            Augmentation::Rotate90(times) => {
                let mut out = img.clone();
                for _ in 0..times {
                    out = out.rotate90_cw();
                }
                Ok(out)
            }
        }
    }
}

impl fmt::Display for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Augmentation::Shift(k) => write!(f, "shift:{k}"),
            Augmentation::Rotate90(1) => write!(f, "rotate90"),
            Augmentation::Rotate90(t) => write!(f, "rotate90x{t}"),
        }
    }
}

impl FromStr for Augmentation {
    type Err = Error;

    /// `shift:<k>`, `rotate90` or `rotate90x<t>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "unknown augmentation '{s}' (shift:<k>, rotate90, rotate90x<t>)"
            ))
        };
        if let Some(k) = s.strip_prefix("shift:") {
            return k.parse().map(Augmentation::Shift).map_err(|_| bad());
        }
        if s == "rotate90" {
            return Ok(Augmentation::Rotate90(1));
        }
        if let Some(t) = s.strip_prefix("rotate90x") {
            return t.parse().map(Augmentation::Rotate90).map_err(|_| bad());
        }
        Err(bad())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentReport {
    pub augmentation: Augmentation,
    /// `d_i = ‖μ(aug(x_i)) − μ(x_i)‖`.
    pub displacement: Vec<f64>,
    /// Median nearest-neighbour distance among the original latents.
    pub reference_scale: f64,
    /// `d_i / r`; 0 when both are 0, infinite when only `r` is.
    pub ratios: Vec<f64>,
    pub mean_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
    /// Leave-one-out 5-NN accuracy of the original latents.
    pub knn_original: Option<f64>,
    /// 5-NN accuracy of each augmented latent against the original latents
    /// of the other images.
    pub knn_augmented: Option<f64>,
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn vote(labels: &[usize], nn: &[usize]) -> usize {
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    let mut votes = vec![0usize; classes];
    for &j in nn {
        votes[labels[j]] += 1;
    }
    let best = *votes.iter().max().unwrap();
    nn.iter().map(|&j| labels[j]).find(|&c| votes[c] == best).unwrap()
}

/// Encodes every image and its augmented copy and measures how far the
/// latent mean moves. Only encoders can embed unseen inputs; a lookup
/// table is rejected.
pub fn augment_probe(model: &Model, data: &Dataset, aug: Augmentation) -> Result<AugmentReport> {
    let Backend::Encoder(enc) = &model.backend else {
        return Err(Error::contract(
            "augment probe requires backend = encoder: a lookup table has no way to embed unseen images",
        ));
    };
    let n = data.len();
    let mut original = Vec::with_capacity(n);
    let mut augmented = Vec::with_capacity(n);
    for p in &data.images {
        original.push(enc.encode(p.pixels.data())?.mu);
        augmented.push(enc.encode(aug.apply(&p.pixels)?.data())?.mu);
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let displacement: Vec<f64> = original.iter().zip(&augmented).map(|(a, b)| dist(a, b)).collect();
    let nn_dist: Vec<f64> = (0..n)
        .filter_map(|i| {
            nearest(&original, i, 1)
                .first()
                .map(|&j| dist(&original[i], &original[j]))
        })
        .collect();
    let r = median(&nn_dist);
    let ratios: Vec<f64> = displacement
        .iter()
        .map(|&d| if d == 0.0 { 0.0 } else { d / r })
        .collect();
    let (knn_original, knn_augmented) = match data.discrete_labels() {
        Some(labels) if n > 1 => {
            let orig = super::metrics::knn_accuracy(&original, &labels, 5)?;
            let mut correct = 0usize;
            for i in 0..n {
                let mut pool = original.clone();
                pool[i] = augmented[i].clone();
                if vote(&labels, &nearest(&pool, i, 5)) == labels[i] {
                    correct += 1;
                }
            }
            (Some(orig), Some(correct as f64 / n as f64))
        }
        _ => (None, None),
    };
    Ok(AugmentReport {
        augmentation: aug,
        mean_ratio: ratios.iter().sum::<f64>() / n.max(1) as f64,
        median_ratio: median(&ratios),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        displacement,
        reference_scale: r,
        ratios,
        knn_original,
        knn_augmented,
    })
}

impl AugmentReport {
    /// `index,displacement,ratio` per image.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,displacement,ratio\n");
        for (i, (d, r)) in self.displacement.iter().zip(&self.ratios).enumerate() {
            s.push_str(&format!("{i},{d},{r}\n"));
        }
        s
    }

    pub fn summary_line(&self) -> String {
        let acc = |v: Option<f64>| v.map_or("n/a".to_string(), |a| format!("{a:.4}"));
        format!(
            "{}: r={:.4} mean_d/r={:.4} median_d/r={:.4} max_d/r={:.4} knn_original={} knn_augmented={}",
            self.augmentation,
            self.reference_scale,
            self.mean_ratio,
            self.median_ratio,
            self.max_ratio,
            acc(self.knn_original),
            acc(self.knn_augmented)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in ["shift:1", "shift:-3", "rotate90", "rotate90x4"] {
            assert_eq!(s.parse::<Augmentation>().unwrap().to_string(), s);
        }
        assert!("flip".parse::<Augmentation>().is_err());
    }

    #[test]
    fn full_turn_and_zero_shift_are_identity() {
        let img = Image::new(16, (0..256).map(|v| (v as f64).sin()).collect()).unwrap();
        assert_eq!(Augmentation::Rotate90(4).apply(&img).unwrap(), img);
        assert_eq!(Augmentation::Shift(0).apply(&img).unwrap(), img);
        assert!(Augmentation::Shift(16).apply(&img).is_err());
        assert!(Augmentation::Shift(-16).apply(&img).is_err());
    }
}
