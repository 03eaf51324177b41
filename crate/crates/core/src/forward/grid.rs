use crate::error::{Error, Result};

/// Cubic `L×L×L` grid, index order `(i, j, k)` with `k` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    size: usize,
    pub voxel_size: f64,
    data: Vec<f64>,
}

impl Volume {
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self> {
        if size < 16 || !size.is_multiple_of(2) {
            return Err(Error::contract(format!(
                "volume size must be even and >= 16, got {size}"
            )));
        }
        if data.len() != size * size * size {
            return Err(Error::Shape {
                op: "volume",
                lhs: vec![size, size, size],
                rhs: vec![data.len()],
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("volume contains non-finite values"));
        }
        Ok(Volume {
            size,
            voxel_size: 1.0,
            data,
        })
    }

    pub fn zeros(size: usize) -> Result<Self> {
        Self::new(size, vec![0.0; size * size * size])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.size + j) * self.size + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    pub fn mass(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Center of mass in voxel index coordinates, weighting by `w(value)`.
    pub fn weighted_centroid(&self, w: impl Fn(f64) -> f64) -> [f64; 3] {
        let l = self.size;
        let mut acc = [0.0; 3];
        let mut total = 0.0;
        for i in 0..l {
            for j in 0..l {
                for k in 0..l {
                    let m = w(self.get(i, j, k));
                    acc[0] += m * i as f64;
                    acc[1] += m * j as f64;
                    acc[2] += m * k as f64;
                    total += m;
                }
            }
        }
        acc.map(|a| a / total)
    }

    pub fn centroid(&self) -> [f64; 3] {
        self.weighted_centroid(|v| v)
    }
}

/// Square `D×D` image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    size: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::Shape {
                op: "image",
                lhs: vec![size, size],
                rhs: vec![data.len()],
            });
        }
        Ok(Image { size, data })
    }

    pub fn zeros(size: usize) -> Self {
        Image {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.size + c]
    }

    /// Circular roll: content moves `k` columns to the right, with the
    /// rightmost columns wrapping to the left edge.
    pub fn roll_right(&self, k: isize) -> Image {
        let d = self.size as isize;
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.size {
            for c in 0..self.size {
                let dst = (c as isize + k).rem_euclid(d) as usize;
                out[r * self.size + dst] = self.data[r * self.size + c];
            }
        }
        Image {
            size: self.size,
            data: out,
        }
    }

    /// Rotation by 90° clockwise.
    pub fn rotate90_cw(&self) -> Image {
        let d = self.size;
        let mut out = vec![0.0; self.data.len()];
        for r in 0..d {
            for c in 0..d {
                out[r * d + c] = self.data[(d - 1 - c) * d + r];
            }
        }
        Image { size: d, data: out }
    }
}
