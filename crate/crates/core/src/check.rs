//! Numerical oracles: central finite differences, dense operator matrices,
//! Monte-Carlo KL, and quadrature posteriors. Tests and the self-test use
//! these as independent references for the analytic code paths.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::inference::LatentDistribution;
use crate::rng;
use crate::tensor::LinearMap;

/// Central differences `(f(x + h e_j) − f(x − h e_j)) / 2h` for the listed
/// coordinates (all of them when `coords` is `None`).
pub fn finite_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64, coords: Option<&[usize]>) -> Vec<f64> {
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..x.len()).collect();
            &all
        }
    };
    let mut probe = x.to_vec();
    coords
        .iter()
        .map(|&j| {
            probe[j] = x[j] + h;
            let up = f(&probe);
            probe[j] = x[j] - h;
            let down = f(&probe);
            probe[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute error when both are tiny.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-300 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

/// Row-major `[output_len, input_len]` matrix of `map`, built column by
/// column from unit inputs.
pub fn dense_matrix(map: &dyn LinearMap) -> Vec<f64> {
    let (m, n) = (map.output_len(), map.input_len());
    let mut a = vec![0.0; m * n];
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        map.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..m {
            a[i * n + j] = col[i];
        }
    }
    a
}

/// Largest `|A_ij − (Aᵀ)ᵀ_ij|`: the dense forward matrix against the
/// transpose of the dense adjoint, built row by row from unit outputs.
pub fn adjoint_mismatch(map: &dyn LinearMap) -> f64 {
    let (m, n) = (map.output_len(), map.input_len());
    let a = dense_matrix(map);
    let mut e = vec![0.0; m];
    let mut row = vec![0.0; n];
    let mut worst = 0.0f64;
    for i in 0..m {
        e[i] = 1.0;
        map.adjoint(&e, &mut row);
        e[i] = 0.0;
        for j in 0..n {
            worst = worst.max((a[i * n + j] - row[j]).abs());
        }
    }
    worst
}

/// Monte-Carlo estimate of `E_q[log q(z) − log N(z; 0, I)]`.
pub fn monte_carlo_kl(d: &LatentDistribution, samples: usize, seed: u64) -> f64 {
    let mut r = rng::stream(seed, "sample");
    let mut total = 0.0;
    for _ in 0..samples {
        let mut term = 0.0;
        for (m, ls) in d.mu.iter().zip(&d.log_sigma) {
            let eps: f64 = r.sample(StandardNormal);
            let z = m + ls.exp() * eps;
            // log q − log p; the 2π terms cancel.
            term += -ls - 0.5 * eps * eps + 0.5 * z * z;
        }
        total += term;
    }
    total / samples as f64
}

/// Posterior mean and variance of `z ~ N(0, 1)`, `x | z ~ N(a z, s²)` by
/// composite Simpson quadrature of the unnormalized density.
pub fn quadrature_posterior(x: f64, a: f64, s: f64) -> (f64, f64) {
    let log_joint = |z: f64| -0.5 * z * z - (x - a * z).powi(2) / (2.0 * s * s);
    // The posterior mean is a shrunk copy of x/a and its sd is at most 1,
    // so a fixed wide grid covers it for moderate x.
    let (lo, hi) = (-12.0, 12.0);
    let steps = 200_000usize;
    let h = (hi - lo) / steps as f64;
    let peak = (0..=steps)
        .map(|k| log_joint(lo + k as f64 * h))
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut z0, mut z1, mut z2) = (0.0, 0.0, 0.0);
    for k in 0..=steps {
        let z = lo + k as f64 * h;
        let w = if k == 0 || k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let p = w * (log_joint(z) - peak).exp();
        z0 += p;
        z1 += p * z;
        z2 += p * z * z;
    }
    let mean = z1 / z0;
    (mean, z2 / z0 - mean * mean)
}

/// `log N(x; mean, var)`.
pub fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_difference_of_a_cubic() {
        let g = finite_difference(|v| v[0].powi(3) + 2.0 * v[1], &[2.0, 5.0], 1e-5, None);
        assert!((g[0] - 12.0).abs() < 1e-8 && (g[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn quadrature_recovers_conjugate_posterior() {
        let (m, v) = quadrature_posterior(2.0, 1.0, 1.0);
        assert!((m - 1.0).abs() < 1e-9 && (v - 0.5).abs() < 1e-9);
    }
}
