use std::f64::consts::PI;

use rand::Rng;

use super::operators::KERNEL_BANK;
use crate::error::{Error, Result};

/// Rotation as a quaternion `w + xi + yj + zk`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (s, c) = (angle / 2.0).sin_cos();
        Quaternion {
            w: c,
            x: s * axis[0] / n,
            y: s * axis[1] / n,
            z: s * axis[2] / n,
        }
    }

    /// Uniform on SO(3) (Shoemake's subgroup algorithm).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        let q = Quaternion {
            w: a * (2.0 * PI * u2).sin(),
            x: a * (2.0 * PI * u2).cos(),
            y: b * (2.0 * PI * u3).sin(),
            z: b * (2.0 * PI * u3).cos(),
        };
        q.normalized()
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Quaternion {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    pub fn ensure_unit(&self) -> Result<()> {
        if (self.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::contract(format!(
                "quaternion norm {} is not 1 within 1e-9",
                self.norm()
            )));
        }
        Ok(())
    }

    /// Row-major 3×3 rotation matrix.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let Quaternion { w, x, y, z } = *self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

/// Imaging parameters of one particle: rotation `ω`, in-plane shift `t`
/// (pixels, `[rows, cols]`), and filter-bank index `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Quaternion,
    pub translation: [f64; 2],
    pub ctf_kernel: usize,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        rotation: Quaternion::IDENTITY,
        translation: [0.0, 0.0],
        ctf_kernel: 0,
    };

    /// Checks the rotation is unit, `|t| ≤ L/8` per component, and the
    /// kernel exists.
    pub fn validate(&self, grid: usize) -> Result<()> {
        self.rotation.ensure_unit()?;
        let bound = grid as f64 / 8.0;
        if self.translation.iter().any(|t| t.abs() > bound) {
            return Err(Error::contract(format!(
                "translation {:?} exceeds L/8 = {bound}",
                self.translation
            )));
        }
        if self.ctf_kernel >= KERNEL_BANK.len() {
            return Err(Error::Lookup(format!(
                "ctf kernel {} not in bank of {}",
                self.ctf_kernel,
                KERNEL_BANK.len()
            )));
        }
        Ok(())
    }
}
