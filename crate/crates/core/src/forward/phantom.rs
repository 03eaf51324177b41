//! Two-lobe phantom with a one-dimensional conformational path.
//!
//! Lobe A sits at `c − L/8` along axis 0. Lobe B starts on top of lobe A
//! (conformation 0) and slides along axis 0 to `c + L/8` (conformation 1),
//! a path of length `L/4`. Each lobe is an isotropic Gaussian of width
//! `L/24` renormalized to unit mass on the grid, so total mass is 2
//! regardless of conformation.

use super::grid::Volume;
use crate::error::{Error, Result};

fn lobe_width(size: usize) -> f64 {
    size as f64 / 24.0
}

fn center(size: usize) -> f64 {
    (size as f64 - 1.0) / 2.0
}

pub fn lobe_a_center(size: usize) -> [f64; 3] {
    let c = center(size);
    [c - size as f64 / 8.0, c, c]
}

pub fn lobe_b_center(conformation: f64, size: usize) -> [f64; 3] {
    let a = lobe_a_center(size);
    [a[0] + conformation * size as f64 / 4.0, a[1], a[2]]
}

fn lobe(size: usize, at: [f64; 3]) -> Result<Volume> {
    let s2 = 2.0 * lobe_width(size).powi(2);
    let mut data = Vec::with_capacity(size.pow(3));
    for i in 0..size {
        for j in 0..size {
            for k in 0..size {
                let d2 = (i as f64 - at[0]).powi(2) + (j as f64 - at[1]).powi(2) + (k as f64 - at[2]).powi(2);
                data.push((-d2 / s2).exp());
            }
        }
    }
    let mass: f64 = data.iter().sum();
    data.iter_mut().for_each(|v| *v /= mass);
    Volume::new(size, data)
}

/// The two lobes as separate volumes `(A, B)`.
pub fn phantom_lobes(conformation: f64, size: usize) -> Result<(Volume, Volume)> {
    if !(0.0..=1.0).contains(&conformation) {
        return Err(Error::contract(format!("conformation {conformation} outside [0, 1]")));
    }
    let a = lobe(size, lobe_a_center(size))?;
    let b = lobe(size, lobe_b_center(conformation, size))?;
    Ok((a, b))
}

pub fn make_phantom(conformation: f64, size: usize) -> Result<Volume> {
    let (a, b) = phantom_lobes(conformation, size)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Volume::new(size, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lobe_b_travels_a_quarter_grid() {
        let l = 32;
        let b0 = phantom_lobes(0.0, l).unwrap().1.centroid();
        let b1 = phantom_lobes(1.0, l).unwrap().1.centroid();
        let bm = phantom_lobes(0.5, l).unwrap().1.centroid();
        assert!((b1[0] - b0[0] - l as f64 / 4.0).abs() < 1e-6);
        assert!((b1[1] - b0[1]).abs() < 1e-9 && (b1[2] - b0[2]).abs() < 1e-9);
        assert!((bm[0] - (b0[0] + b1[0]) / 2.0).abs() < 0.1);
    }

    #[test]
    fn mass_does_not_depend_on_conformation() {
        let m0 = make_phantom(0.0, 32).unwrap().mass();
        let m1 = make_phantom(1.0, 32).unwrap().mass();
        assert!(((m0 - m1) / m0).abs() < 1e-6);
    }

    #[test]
    fn conformation_out_of_range() {
        assert!(make_phantom(1.5, 32).is_err());
        assert!(make_phantom(-0.1, 32).is_err());
        assert!(make_phantom(0.5, 15).is_err());
    }
}
