use super::grid::{Image, Volume};
use super::pose::{Pose, Quaternion};
use crate::error::{Error, Result};
use crate::tensor::LinearMap;

/// Normalized separable low-pass kernels standing in for per-image CTFs:
/// identity, 3-tap binomial, 5-tap binomial.
pub const KERNEL_BANK: [&[f64]; 3] = [
    &[1.0],
    &[0.25, 0.5, 0.25],
    &[1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0],
];

/// Trilinear resampling of a volume under a rotation about the grid
/// center `((L-1)/2, …)`: `out(p) = in(Rᵀ(p − c) + c)`. Samples falling
/// outside the grid read as zero.
#[derive(Clone, Debug)]
pub struct Rotation {
    size: usize,
    inverse: [[f64; 3]; 3],
}

impl Rotation {
    pub fn new(size: usize, q: &Quaternion) -> Result<Self> {
        q.ensure_unit()?;
        let m = q.to_matrix();
        let mut inverse = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                inverse[a][b] = m[b][a];
            }
        }
        Ok(Rotation { size, inverse })
    }

    /// Calls `f(line, k, input_voxel, weight)` for every trilinear tap, where
    /// the output voxel is `line·L + k`. Only taps
    /// of samples whose footprint touches the grid are visited.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize, f64)) {
        let l = self.size;
        let li = l as isize;
        let c = (l as f64 - 1.0) / 2.0;
        let m = &self.inverse;
        let hi = (l - 1) as f64;
        let step = [m[0][2], m[1][2], m[2][2]];
        for i in 0..l {
            let di = i as f64 - c;
            for j in 0..l {
                let dj = j as f64 - c;
                let base = [
                    c + m[0][0] * di + m[0][1] * dj,
                    c + m[1][0] * di + m[1][1] * dj,
                    c + m[2][0] * di + m[2][1] * dj,
                ];
                // Restrict k to where every coordinate lies in (-1, hi + 1).
                let (mut lo_k, mut hi_k) = (0.0f64, hi);
                for a in 0..3 {
                    let s0 = base[a] - c * step[a];
                    if step[a].abs() < 1e-12 {
                        if s0 <= -1.0 || s0 >= hi + 1.0 {
                            lo_k = 1.0;
                            hi_k = 0.0;
                        }
                        continue;
                    }
                    let (t1, t2) = ((-1.0 - s0) / step[a], (hi + 1.0 - s0) / step[a]);
                    lo_k = lo_k.max(t1.min(t2));
                    hi_k = hi_k.min(t1.max(t2));
                }
                if lo_k > hi_k {
                    continue;
                }
                let k_start = (lo_k.floor().max(0.0)) as usize;
                let k_end = (hi_k.ceil().min(hi)) as usize;
                let line = i * l + j;
                for k in k_start..=k_end {
                    let dk = k as f64 - c;
                    let s = [base[0] + step[0] * dk, base[1] + step[1] * dk, base[2] + step[2] * dk];
                    if s.iter().any(|&x| x <= -1.0 || x >= hi + 1.0) {
                        continue;
                    }
                    // Coordinates exceed -1, so truncating x + 1 is an exact floor.
                    let i0 = s.map(|x| (x + 1.0) as isize - 1);
                    let fr = [s[0] - i0[0] as f64, s[1] - i0[1] as f64, s[2] - i0[2] as f64];
                    if i0.iter().all(|&v| v >= 0 && v + 1 < li) {
                        let src = ((i0[0] as usize * l) + i0[1] as usize) * l + i0[2] as usize;
                        let (x0, x1) = (1.0 - fr[0], fr[0]);
                        let (y0, y1) = (1.0 - fr[1], fr[1]);
                        let (z0, z1) = (1.0 - fr[2], fr[2]);
                        f(line, k, src, x0 * y0 * z0);
                        f(line, k, src + 1, x0 * y0 * z1);
                        f(line, k, src + l, x0 * y1 * z0);
                        f(line, k, src + l + 1, x0 * y1 * z1);
                        f(line, k, src + l * l, x1 * y0 * z0);
                        f(line, k, src + l * l + 1, x1 * y0 * z1);
                        f(line, k, src + l * l + l, x1 * y1 * z0);
                        f(line, k, src + l * l + l + 1, x1 * y1 * z1);
                        continue;
                    }
                    for (a, wa) in [(0isize, 1.0 - fr[0]), (1, fr[0])] {
                        let x = i0[0] + a;
                        if wa == 0.0 || x < 0 || x >= li {
                            continue;
                        }
                        for (b, wb) in [(0isize, 1.0 - fr[1]), (1, fr[1])] {
                            let y = i0[1] + b;
                            if wb == 0.0 || y < 0 || y >= li {
                                continue;
                            }
                            for (g, wg) in [(0isize, 1.0 - fr[2]), (1, fr[2])] {
                                let z = i0[2] + g;
                                if wg == 0.0 || z < 0 || z >= li {
                                    continue;
                                }
                                let src = ((x as usize * l) + y as usize) * l + z as usize;
                                f(line, k, src, wa * wb * wg);
                            }
                        }
                    }
                }
            }
        }
    }
}

impl LinearMap for Rotation {
    fn input_len(&self) -> usize {
        self.size.pow(3)
    }

    fn output_len(&self) -> usize {
        self.size.pow(3)
    }

    fn apply(&self, input: &[f64], output: &mut [f64]) {
        output.fill(0.0);
        self.for_each_tap(|line, k, s, w| output[line * self.size + k] += w * input[s]);
    }

    fn adjoint(&self, output_grad: &[f64], input_grad: &mut [f64]) {
        input_grad.fill(0.0);
        self.for_each_tap(|line, k, s, w| input_grad[s] += w * output_grad[line * self.size + k]);
    }
}

/// Line integral along the last grid axis: `img(i, j) = Σ_k v(i, j, k)`.
#[derive(Clone, Copy, Debug)]
pub struct Projection {
    pub size: usize,
}

impl LinearMap for Projection {
    fn input_len(&self) -> usize {
        self.size.pow(3)
    }

    fn output_len(&self) -> usize {
        self.size.pow(2)
    }

    fn apply(&self, input: &[f64], output: &mut [f64]) {
        for (o, col) in output.iter_mut().zip(input.chunks_exact(self.size)) {
            *o = col.iter().sum();
        }
    }

    fn adjoint(&self, output_grad: &[f64], input_grad: &mut [f64]) {
        for (g, col) in output_grad.iter().zip(input_grad.chunks_exact_mut(self.size)) {
            col.fill(*g);
        }
    }
}

/// Bilinear sub-pixel shift with circular wrap; `shift = [rows, cols]`.
#[derive(Clone, Copy, Debug)]
pub struct Translation {
    size: usize,
    int: [isize; 2],
    frac: [f64; 2],
}

impl Translation {
    pub fn new(size: usize, shift: [f64; 2]) -> Self {
        let fl = shift.map(f64::floor);
        Translation {
            size,
            int: fl.map(|v| v as isize),
            frac: [shift[0] - fl[0], shift[1] - fl[1]],
        }
    }

    /// `out(r, c) = in(r − t0, c − t1)`, interpolated. With `t = n + f`,
    /// `in(r − n − f) = (1−f)·in(r−n) + f·in(r−n−1)`.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, f64)) {
        let d = self.size as isize;
        let taps_r = [(self.int[0], 1.0 - self.frac[0]), (self.int[0] + 1, self.frac[0])];
        let taps_c = [(self.int[1], 1.0 - self.frac[1]), (self.int[1] + 1, self.frac[1])];
        for r in 0..d {
            for c in 0..d {
                let out = (r * d + c) as usize;
                for &(sr, wr) in &taps_r {
                    if wr == 0.0 {
                        continue;
                    }
                    let rr = (r - sr).rem_euclid(d);
                    for &(sc, wc) in &taps_c {
                        if wc == 0.0 {
                            continue;
                        }
                        let cc = (c - sc).rem_euclid(d);
                        f(out, (rr * d + cc) as usize, wr * wc);
                    }
                }
            }
        }
    }
}

impl LinearMap for Translation {
    fn input_len(&self) -> usize {
        self.size.pow(2)
    }

    fn output_len(&self) -> usize {
        self.size.pow(2)
    }

    fn apply(&self, input: &[f64], output: &mut [f64]) {
        output.fill(0.0);
        self.for_each_tap(|o, s, w| output[o] += w * input[s]);
    }

    fn adjoint(&self, output_grad: &[f64], input_grad: &mut [f64]) {
        input_grad.fill(0.0);
        self.for_each_tap(|o, s, w| input_grad[s] += w * output_grad[o]);
    }
}

/// Circular separable convolution with a kernel from [`KERNEL_BANK`].
#[derive(Clone, Copy, Debug)]
pub struct CtfFilter {
    size: usize,
    kernel: &'static [f64],
}

impl CtfFilter {
    pub fn new(size: usize, kernel_id: usize) -> Result<Self> {
        let kernel = KERNEL_BANK
            .get(kernel_id)
            .ok_or_else(|| Error::Lookup(format!("ctf kernel {kernel_id} not in bank of {}", KERNEL_BANK.len())))?;
        Ok(CtfFilter { size, kernel })
    }

    pub fn is_identity(&self) -> bool {
        self.kernel.len() == 1
    }

    /// One 1-D pass along rows (`axis == 1`, within each row) or columns.
    /// `flip` correlates instead of convolving, which is the adjoint.
    fn pass(&self, input: &[f64], output: &mut [f64], axis: usize, flip: bool) {
        let d = self.size as isize;
        let half = (self.kernel.len() / 2) as isize;
        for r in 0..d {
            for c in 0..d {
                let mut acc = 0.0;
                for (m, &w) in self.kernel.iter().enumerate() {
                    let off = m as isize - half;
                    let off = if flip { -off } else { off };
                    let (rr, cc) = if axis == 1 {
                        (r, (c - off).rem_euclid(d))
                    } else {
                        ((r - off).rem_euclid(d), c)
                    };
                    acc += w * input[(rr * d + cc) as usize];
                }
                output[(r * d + c) as usize] = acc;
            }
        }
    }
}

impl LinearMap for CtfFilter {
    fn input_len(&self) -> usize {
        self.size.pow(2)
    }

    fn output_len(&self) -> usize {
        self.size.pow(2)
    }

    fn apply(&self, input: &[f64], output: &mut [f64]) {
        if self.is_identity() {
            output.copy_from_slice(input);
            return;
        }
        let mut tmp = vec![0.0; input.len()];
        self.pass(input, &mut tmp, 1, false);
        self.pass(&tmp, output, 0, false);
    }

    fn adjoint(&self, output_grad: &[f64], input_grad: &mut [f64]) {
        if self.is_identity() {
            input_grad.copy_from_slice(output_grad);
            return;
        }
        let mut tmp = vec![0.0; output_grad.len()];
        self.pass(output_grad, &mut tmp, 0, true);
        self.pass(&tmp, input_grad, 1, true);
    }
}

/// The full per-particle map `V ↦ h ∗ (T_t P R_ω V)`, with the rotation and
/// projection fused so no rotated volume is materialized.
#[derive(Clone, Debug)]
pub struct PoseOperator {
    size: usize,
    rotation: Option<Rotation>,
    translation: Option<Translation>,
    filter: CtfFilter,
}

impl PoseOperator {
    pub fn new(size: usize, pose: &Pose) -> Result<Self> {
        pose.validate(size)?;
        let rotation = if pose.rotation == Quaternion::IDENTITY {
            None
        } else {
            Some(Rotation::new(size, &pose.rotation)?)
        };
        let translation = if pose.translation == [0.0, 0.0] {
            None
        } else {
            Some(Translation::new(size, pose.translation))
        };
        Ok(PoseOperator {
            size,
            rotation,
            translation,
            filter: CtfFilter::new(size, pose.ctf_kernel)?,
        })
    }
}

impl LinearMap for PoseOperator {
    fn input_len(&self) -> usize {
        self.size.pow(3)
    }

    fn output_len(&self) -> usize {
        self.size.pow(2)
    }

    fn apply(&self, input: &[f64], output: &mut [f64]) {
        let l = self.size;
        let mut img = vec![0.0; l * l];
        match &self.rotation {
            Some(rot) => rot.for_each_tap(|line, _, s, w| img[line] += w * input[s]),
            None => Projection { size: l }.apply(input, &mut img),
        }
        let shifted = match &self.translation {
            Some(t) => {
                let mut buf = vec![0.0; l * l];
                t.apply(&img, &mut buf);
                buf
            }
            None => img,
        };
        if self.filter.is_identity() {
            output.copy_from_slice(&shifted);
        } else {
            self.filter.apply(&shifted, output);
        }
    }

    fn adjoint(&self, output_grad: &[f64], input_grad: &mut [f64]) {
        let l = self.size;
        let mut g = vec![0.0; l * l];
        self.filter.adjoint(output_grad, &mut g);
        if let Some(t) = &self.translation {
            let mut buf = vec![0.0; l * l];
            t.adjoint(&g, &mut buf);
            g = buf;
        }
        match &self.rotation {
            Some(rot) => {
                input_grad.fill(0.0);
                rot.for_each_tap(|line, _, s, w| input_grad[s] += w * g[line]);
            }
            None => Projection { size: l }.adjoint(&g, input_grad),
        }
    }
}

pub fn rotate_volume(v: &Volume, q: &Quaternion) -> Result<Volume> {
    let rot = Rotation::new(v.size(), q)?;
    let mut out = vec![0.0; v.data().len()];
    rot.apply(v.data(), &mut out);
    let mut vol = Volume::new(v.size(), out)?;
    vol.voxel_size = v.voxel_size;
    Ok(vol)
}

pub fn project(v: &Volume) -> Image {
    let l = v.size();
    let mut out = vec![0.0; l * l];
    Projection { size: l }.apply(v.data(), &mut out);
    Image::new(l, out).expect("projection shape")
}

/// Adjoint of [`project`]: smears each pixel along the viewing axis.
pub fn back_project(img: &Image) -> Result<Volume> {
    let l = img.size();
    let mut out = vec![0.0; l * l * l];
    Projection { size: l }.adjoint(img.data(), &mut out);
    Volume::new(l, out)
}

pub fn translate_image(img: &Image, t: [f64; 2]) -> Result<Image> {
    let bound = img.size() as f64 / 8.0;
    if t.iter().any(|x| x.abs() > bound) {
        return Err(Error::contract(format!("shift {t:?} exceeds D/8 = {bound}")));
    }
    let mut out = vec![0.0; img.data().len()];
    Translation::new(img.size(), t).apply(img.data(), &mut out);
    Image::new(img.size(), out)
}

pub fn apply_ctf(img: &Image, kernel_id: usize) -> Result<Image> {
    let f = CtfFilter::new(img.size(), kernel_id)?;
    let mut out = vec![0.0; img.data().len()];
    f.apply(img.data(), &mut out);
    Image::new(img.size(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_volume(size: usize, seed: u64) -> Volume {
        let mut r = rng::stream(seed, "test");
        Volume::new(size, (0..size.pow(3)).map(|_| r.random::<f64>() - 0.5).collect()).unwrap()
    }

    fn random_image(size: usize, seed: u64) -> Image {
        let mut r = rng::stream(seed, "test-img");
        Image::new(size, (0..size * size).map(|_| r.random::<f64>() - 0.5).collect()).unwrap()
    }

    #[test]
    fn identity_rotation_is_exact() {
        let v = random_volume(16, 1);
        assert_eq!(rotate_volume(&v, &Quaternion::IDENTITY).unwrap(), v);
    }

    #[test]
    fn quarter_turn_is_an_axis_permutation() {
        let l = 16;
        let v = random_volume(l, 2);
        // +90° about axis 2: out(i, j, k) = in(j, L-1-i, k).
        let q = Quaternion::from_axis_angle([0.0, 0.0, 1.0], FRAC_PI_2);
        let r = rotate_volume(&v, &q).unwrap();
        let mut max_err: f64 = 0.0;
        for i in 0..l {
            for j in 0..l {
                for k in 0..l {
                    max_err = max_err.max((r.get(i, j, k) - v.get(j, l - 1 - i, k)).abs());
                }
            }
        }
        assert!(max_err < 1e-12, "{max_err}");
    }

    #[test]
    fn non_unit_quaternion_rejected() {
        let v = random_volume(16, 3);
        assert!(rotate_volume(&v, &Quaternion::new(1.0, 1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn projection_of_ones_and_of_a_voxel() {
        let ones = Volume::new(16, vec![1.0; 4096]).unwrap();
        assert!(project(&ones).data().iter().all(|&v| v == 16.0));
        let mut v = Volume::zeros(16).unwrap();
        let at = v.index(3, 5, 11);
        v.data_mut()[at] = 1.0;
        let img = project(&v);
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(img.get(r, c), if (r, c) == (3, 5) { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn integer_shifts_roll_and_invert() {
        let img = random_image(16, 4);
        assert_eq!(translate_image(&img, [0.0, 0.0]).unwrap(), img);
        let there = translate_image(&img, [1.0, 0.0]).unwrap();
        let back = translate_image(&there, [-1.0, 0.0]).unwrap();
        assert!(back.data().iter().zip(img.data()).all(|(a, b)| (a - b).abs() < 1e-12));
        // Integer column shift equals a roll to the right.
        let rolled = translate_image(&img, [0.0, 2.0]).unwrap();
        assert_eq!(rolled, img.roll_right(2));
    }

    #[test]
    fn half_pixel_row_shift_preserves_column_means() {
        let img = random_image(16, 5);
        let out = translate_image(&img, [0.5, 0.0]).unwrap();
        for c in 0..16 {
            let a: f64 = (0..16).map(|r| img.get(r, c)).sum();
            let b: f64 = (0..16).map(|r| out.get(r, c)).sum();
            assert!((a - b).abs() < 1e-12);
        }
        assert!(translate_image(&img, [2.5, 0.0]).is_err());
    }

    #[test]
    fn ctf_kernels() {
        let img = random_image(16, 6);
        assert_eq!(apply_ctf(&img, 0).unwrap(), img);
        let mut imp = Image::zeros(16);
        imp.data_mut()[8 * 16 + 8] = 1.0;
        let twice = apply_ctf(&apply_ctf(&imp, 1).unwrap(), 1).unwrap();
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0].map(|v| v / 16.0);
        for r in 0..16 {
            for c in 0..16 {
                let (dr, dc) = (r as isize - 8, c as isize - 8);
                let want = if dr.abs() <= 2 && dc.abs() <= 2 {
                    binom[(dr + 2) as usize] * binom[(dc + 2) as usize]
                } else {
                    0.0
                };
                assert!((twice.get(r, c) - want).abs() < 1e-15);
            }
        }
        let flat = Image::new(16, vec![3.25; 256]).unwrap();
        for k in 0..KERNEL_BANK.len() {
            let out = apply_ctf(&flat, k).unwrap();
            assert!(out.data().iter().all(|v| (v - 3.25).abs() < 1e-12));
        }
        assert!(matches!(apply_ctf(&flat, 3), Err(Error::Lookup(_))));
    }

    #[test]
    fn pose_operator_with_identity_pose_is_projection() {
        let v = random_volume(16, 7);
        let op = PoseOperator::new(16, &Pose::IDENTITY).unwrap();
        let mut out = vec![0.0; 256];
        op.apply(v.data(), &mut out);
        assert_eq!(out, project(&v).into_data());
    }
}
