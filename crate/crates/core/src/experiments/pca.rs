//! Two-component PCA of a latent table.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    /// `(pc1, pc2)` per point.
    pub coords: Vec<[f64; 2]>,
    /// Explained-variance fraction of every component, non-increasing.
    pub explained: Vec<f64>,
    /// Unit principal axes, largest-magnitude loading positive.
    pub axes: Vec<Vec<f64>>,
    /// Set when the covariance has rank < 2; the second coordinate is then 0.
    pub degenerate: bool,
}

pub fn latent_pca(points: &[Vec<f64>]) -> Result<Pca> {
    let n = points.len();
    let d = points.first().map_or(0, Vec::len);
    if d < 2 {
        return Err(Error::contract(format!("PCA needs z_dim ≥ 2, got {d}")));
    }
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::contract("PCA points have unequal dimensions"));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for p in points {
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += (p[a] - mean[a]) * (p[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    let axes: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| {
            let col: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let lead = col
                .iter()
                .copied()
                .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            let sign = if lead < 0.0 { -1.0 } else { 1.0 };
            col.into_iter().map(|v| sign * v).collect()
        })
        .collect();
    let degenerate = total <= 0.0 || values[1] <= 1e-12 * total;
    let explained = values
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    let coords = points
        .iter()
        .map(|p| {
            let proj = |axis: &[f64]| {
                axis.iter()
                    .zip(p)
                    .zip(&mean)
                    .map(|((a, x), m)| a * (x - m))
                    .sum::<f64>()
            };
            [proj(&axes[0]), if degenerate { 0.0 } else { proj(&axes[1]) }]
        })
        .collect();
    Ok(Pca {
        coords,
        explained,
        axes,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_points_are_identity_up_to_sign() {
        let pts = vec![vec![3.0, 0.0], vec![-3.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let pca = latent_pca(&pts).unwrap();
        assert!((pca.axes[0][0].abs() - 1.0).abs() < 1e-12);
        assert!((pca.axes[1][1].abs() - 1.0).abs() < 1e-12);
        for (c, p) in pca.coords.iter().zip(&pts) {
            assert!((c[0].abs() - p[0].abs()).abs() < 1e-12);
            assert!((c[1].abs() - p[1].abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn fractions_and_planar_points() {
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let (u, v) = ((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos());
                vec![u + v, u - 2.0 * v, 3.0 * u]
            })
            .collect();
        let pca = latent_pca(&pts).unwrap();
        assert!(pca.explained.iter().sum::<f64>() <= 1.0 + 1e-12);
        assert!(pca.explained.windows(2).all(|w| w[0] >= w[1]));
        assert!(pca.explained[2] < 1e-10);
    }

    #[test]
    fn degenerate_and_too_narrow() {
        let pts = vec![vec![1.0, 2.0]; 4];
        assert!(latent_pca(&pts).unwrap().degenerate);
        assert!(latent_pca(&[vec![1.0]]).is_err());
    }
}
