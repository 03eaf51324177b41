//! Evil-twin assignments: the encoder sees `x̃_i` while the loss targets `x_i`.

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::TwinMode;
use crate::error::{Error, Result};
use crate::forward::Dataset;
use crate::rng;

/// Fixed for the whole run once drawn.
#[derive(Clone, Debug, PartialEq)]
pub enum TwinAssignment {
    /// `x̃_i = x_i`. Reproduces plain training; a test hook.
    Identity,
    /// `x̃_i = x_{map[i]}` with `map[i] ≠ i`.
    Permutation(Vec<usize>),
    /// `x̃_i` is Gaussian noise drawn from `seeds[i]` with the dataset's
    /// pixel mean and variance.
    Noise { seeds: Vec<u64>, mean: f64, sd: f64 },
}

/// Uniform derangement by rejection: draw permutations until none has a
/// fixed point (about e tries on average).
pub fn derangement<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::contract(format!("a derangement needs n ≥ 2, got {n}")));
    }
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &j)| i != j) {
            return Ok(p);
        }
    }
}

pub fn assign_twins(mode: TwinMode, data: &Dataset, seed: u64) -> Result<TwinAssignment> {
    let mut r = rng::stream(seed, "twins");
    match mode {
        TwinMode::None => Ok(TwinAssignment::Identity),
        TwinMode::Permutation => Ok(TwinAssignment::Permutation(derangement(data.len(), &mut r)?)),
        TwinMode::Noise => {
            let (mean, var) = data.pixel_moments();
            Ok(TwinAssignment::Noise {
                seeds: (0..data.len()).map(|_| r.random()).collect(),
                mean,
                sd: var.sqrt(),
            })
        }
    }
}

impl TwinAssignment {
    /// The encoder input standing in for image `i`.
    pub fn input<'a>(&self, data: &'a Dataset, i: usize) -> Cow<'a, [f64]> {
        match self {
            TwinAssignment::Identity => Cow::Borrowed(data.images[i].pixels.data()),
            TwinAssignment::Permutation(map) => Cow::Borrowed(data.images[map[i]].pixels.data()),
            TwinAssignment::Noise { seeds, mean, sd } => {
                let mut r = <rng::Rng as rand::SeedableRng>::seed_from_u64(seeds[i]);
                Cow::Owned(
                    (0..data.pixel_count())
                        .map(|_| mean + sd * r.sample::<f64, _>(StandardNormal))
                        .collect(),
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{generate_dataset, DatasetSpec};

    fn data(n: usize) -> Dataset {
        generate_dataset(&DatasetSpec {
            n,
            size: 16,
            ..DatasetSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn derangement_has_no_fixed_points() {
        for n in [2, 3, 10, 257] {
            let p = derangement(n, &mut rng::stream(n as u64, "twins")).unwrap();
            assert!(p.iter().enumerate().all(|(i, &j)| i != j));
            let mut s = p.clone();
            s.sort();
            assert_eq!(s, (0..n).collect::<Vec<_>>());
        }
        assert!(derangement(1, &mut rng::stream(0, "twins")).is_err());
    }

    #[test]
    fn assignments_are_reproducible() {
        let d = data(20);
        let a = assign_twins(TwinMode::Permutation, &d, 3).unwrap();
        assert_eq!(a, assign_twins(TwinMode::Permutation, &d, 3).unwrap());
        assert_ne!(a, assign_twins(TwinMode::Permutation, &d, 4).unwrap());
    }

    #[test]
    fn noise_twins_match_dataset_moments() {
        let d = data(200);
        let twins = assign_twins(TwinMode::Noise, &d, 1).unwrap();
        let all: Vec<f64> = (0..d.len()).flat_map(|i| twins.input(&d, i).into_owned()).collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let (m0, v0) = d.pixel_moments();
        assert!((mean - m0).abs() <= 0.02 * v0.sqrt(), "{mean} vs {m0}");
        assert!((var - v0).abs() <= 0.02 * v0, "{var} vs {v0}");
        assert_eq!(twins.input(&d, 5), twins.input(&d, 5));
    }
}
