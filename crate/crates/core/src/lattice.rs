//! Periodic lattice geometry, uniform averaging kernels and discrete flows.
//!
//! Kernels and flows are held as integer numerators over a common
//! denominator, so identities between them can be checked exactly.

use num_rational::Ratio;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("dimension {0} unsupported (1..=3)")]
    Dimension(usize),
    #[error("side length {0} too small (need N >= 2)")]
    Side(usize),
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("common denominator overflows 64-bit integers for window {0}")]
    Overflow(usize),
}

/// The discrete torus `(Z / N Z)^d`, sites indexed with axis 0 fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Torus {
    d: usize,
    n: usize,
    neighbours: Vec<u32>,
}

impl Torus {
    pub fn new(d: usize, n: usize) -> Result<Self, LatticeError> {
        if !(1..=3).contains(&d) {
            return Err(LatticeError::Dimension(d));
        }
        if n < 2 {
            return Err(LatticeError::Side(n));
        }
        let size = n.pow(d as u32);
        assert!(size < u32::MAX as usize, "torus too large");
        let mut t = Torus { d, n, neighbours: Vec::new() };
        let mut nb = vec![0u32; size * 2 * d];
        let mut c = vec![0usize; d];
        for x in 0..size {
            t.coords_into(x, &mut c);
            for dir in 0..2 * d {
                let (axis, up) = if dir < d { (dir, true) } else { (dir - d, false) };
                let old = c[axis];
                c[axis] = if up { (old + 1) % n } else { (old + n - 1) % n };
                nb[x * 2 * d + dir] = t.index(&c) as u32;
                c[axis] = old;
            }
        }
        t.neighbours = nb;
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Number of jump directions, `2d`: `dir < d` is `+e_dir`, otherwise `-e_{dir-d}`.
    pub fn directions(&self) -> usize {
        2 * self.d
    }

    #[inline]
    pub fn neighbour(&self, x: usize, dir: usize) -> usize {
        self.neighbours[x * 2 * self.d + dir] as usize
    }

    pub fn index(&self, c: &[usize]) -> usize {
        c.iter().rev().fold(0, |acc, &ci| acc * self.n + ci)
    }

    pub fn coords_into(&self, mut x: usize, c: &mut [usize]) {
        for ci in c.iter_mut().take(self.d) {
            *ci = x % self.n;
            x /= self.n;
        }
    }

    pub fn coords(&self, x: usize) -> Vec<usize> {
        let mut c = vec![0; self.d];
        self.coords_into(x, &mut c);
        c
    }

    /// Reduce integer coordinates into `[0, N)`.
    pub fn wrap(&self, c: &[i64]) -> Vec<usize> {
        c.iter().map(|&v| v.rem_euclid(self.n as i64) as usize).collect()
    }

    /// Macroscopic position `x / N` of a site.
    pub fn position(&self, x: usize) -> Vec<f64> {
        self.coords(x).into_iter().map(|c| c as f64 / self.n as f64).collect()
    }
}

/// Distance-one periodic wrap of a real position into `[0, 1)`.
#[inline]
pub fn wrap_unit(u: f64) -> f64 {
    let w = u - u.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// `ℓ` in one dimension, `log ℓ` in two, `1` from three on.
pub fn g_d(ell: usize, d: usize) -> f64 {
    match d {
        1 => ell as f64,
        2 => (ell as f64).ln(),
        _ => 1.0,
    }
}

/// A probability kernel on the box `[0, extent)^d` with weights `num / denom`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub d: usize,
    pub ell: usize,
    pub extent: usize,
    pub denom: i64,
    pub num: Vec<i64>,
}

fn box_index(z: &[usize], extent: usize) -> usize {
    z.iter().rev().fold(0, |acc, &c| acc * extent + c)
}

fn box_coords(mut i: usize, extent: usize, d: usize) -> Vec<usize> {
    (0..d)
        .map(|_| {
            let c = i % extent;
            i /= extent;
            c
        })
        .collect()
}

impl Kernel {
    /// Uniform measure on `{0, …, ℓ−1}^d`.
    pub fn p(ell: usize, d: usize) -> Result<Self, LatticeError> {
        check_window(ell, d)?;
        let size = ell.pow(d as u32);
        Ok(Kernel { d, ell, extent: ell, denom: size as i64, num: vec![1; size] })
    }

    /// Self-convolution of [`Kernel::p`], supported on `{0, …, 2ℓ−2}^d`.
    pub fn q(ell: usize, d: usize) -> Result<Self, LatticeError> {
        let p = Self::p(ell, d)?;
        Ok(p.convolve_uniform(ell))
    }

    /// Convolution with the uniform kernel of window `w`, axis by axis.
    fn convolve_uniform(&self, w: usize) -> Self {
        let ext = self.extent + w - 1;
        let mut cur: Vec<i64> = vec![0; ext.pow(self.d as u32)];
        for (i, &v) in self.num.iter().enumerate() {
            let z = box_coords(i, self.extent, self.d);
            cur[box_index(&z, ext)] = v;
        }
        for axis in 0..self.d {
            box_sum_axis(&mut cur, ext, self.d, axis, w);
        }
        Kernel { d: self.d, ell: self.ell, extent: ext, denom: self.denom * (w.pow(self.d as u32) as i64), num: cur }
    }

    pub fn len(&self) -> usize {
        self.num.len()
    }

    pub fn is_empty(&self) -> bool {
        self.num.is_empty()
    }

    /// Weight at offset `z`; zero outside the box.
    pub fn ratio(&self, z: &[i64]) -> Ratio<i64> {
        if z.iter().any(|&c| c < 0 || c >= self.extent as i64) {
            return Ratio::from_integer(0);
        }
        let zu: Vec<usize> = z.iter().map(|&c| c as usize).collect();
        Ratio::new(self.num[box_index(&zu, self.extent)], self.denom)
    }

    pub fn weight(&self, z: &[i64]) -> f64 {
        let r = self.ratio(z);
        *r.numer() as f64 / *r.denom() as f64
    }

    pub fn exact_sum(&self) -> Ratio<i64> {
        Ratio::new(self.num.iter().sum(), self.denom)
    }

    /// Offsets with non-zero weight and their floating-point weights.
    pub fn support(&self) -> Vec<(Vec<usize>, f64)> {
        self.num
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, &v)| (box_coords(i, self.extent, self.d), v as f64 / self.denom as f64))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for a in 0..self.d {
            let _ = write!(s, "z{a},");
        }
        s.push_str("weight\n");
        for (z, w) in self.support() {
            for c in z {
                let _ = write!(s, "{c},");
            }
            let _ = writeln!(s, "{w:.17e}");
        }
        s
    }
}

fn check_window(ell: usize, d: usize) -> Result<(), LatticeError> {
    if ell == 0 {
        return Err(LatticeError::ZeroWindow);
    }
    if !(1..=3).contains(&d) {
        return Err(LatticeError::Dimension(d));
    }
    Ok(())
}

/// In place: `a[j] <- Σ_{m = j−w+1}^{j} a[m]` along `axis` of a dense box
/// of side `ext`, entries outside the box treated as zero.
fn box_sum_axis(a: &mut [i64], ext: usize, d: usize, axis: usize, w: usize) {
    let stride = ext.pow(axis as u32);
    let mut line = vec![0i64; ext];
    let lines = a.len() / ext;
    for l in 0..lines {
        // Base index of the line: split l into the coordinates below and above `axis`.
        let lo = l % stride;
        let hi = l / stride;
        let base = lo + hi * stride * ext;
        for (j, v) in line.iter_mut().enumerate() {
            *v = a[base + j * stride];
        }
        let mut run = 0i64;
        for j in 0..ext {
            run += line[j];
            if j >= w {
                run -= line[j - w];
            }
            a[base + j * stride] = run;
        }
    }
    let _ = d;
}

/// A flow on the directed edges `(z, z + e_i)` with values `num / denom`,
/// stored on the box `[0, extent)^d` for each axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Flow {
    pub d: usize,
    pub ell: usize,
    pub extent: usize,
    pub denom: i64,
    pub num: Vec<i64>,
}

/// Flow carrying `δ_0` onto [`Kernel::q`].
///
/// Mass first spreads from `δ_0` to the uniform kernel of window `ℓ` through
/// windows `1, 2, 4, …, ℓ`, each doubling done one axis at a time by the
/// one-dimensional cumulative-sum flow. Averaging that flow once more against
/// the window-`ℓ` kernel then carries it to the self-convolution.
pub fn construct_flow(ell: usize, d: usize) -> Result<Flow, LatticeError> {
    check_window(ell, d)?;
    let mut windows = vec![1usize];
    while *windows.last().expect("non-empty") < ell {
        let l = *windows.last().expect("non-empty");
        windows.push((2 * l).min(ell));
    }
    let mut d_psi: i128 = 1;
    for w in windows.windows(2) {
        let step = ((w[0] * w[1]) as i128).pow(d as u32);
        d_psi = lcm(d_psi, step);
        if d_psi > i64::MAX as i128 {
            return Err(LatticeError::Overflow(ell));
        }
    }
    let ell_d = (ell as i128).pow(d as u32);
    let denom = d_psi.checked_mul(ell_d).filter(|&v| v <= i64::MAX as i128).ok_or(LatticeError::Overflow(ell))?;
    let (d_psi, ell_d, denom) = (d_psi as i64, ell_d as i64, denom as i64);

    // Spreading flow on the box of side ℓ.
    let small = ell.pow(d as u32);
    let mut psi = vec![0i64; d * small];
    for w in windows.windows(2) {
        let (l, lp) = (w[0] as i64, w[1] as i64);
        let scale = d_psi / (l * lp).pow(d as u32);
        for axis in 0..d {
            for i in 0..small {
                let z = box_coords(i, ell, d);
                let mut ok = true;
                // Numerator of Π_{i<a} 1[z_i<L']/L' · Π_{i>a} 1[z_i<L]/L · Φ(z_a) over (L L')^d.
                let mut num: i64 = 1;
                for (b, &zb) in z.iter().enumerate() {
                    let zb = zb as i64;
                    if b < axis {
                        ok &= zb < lp;
                        num *= l;
                    } else if b > axis {
                        ok &= zb < l;
                        num *= lp;
                    }
                }
                if !ok {
                    continue;
                }
                let j = z[axis] as i64;
                // Φ(j) scaled by L L'.
                let phi = if j < l {
                    (j + 1) * (lp - l)
                } else if j < lp {
                    l * (lp - (j + 1))
                } else {
                    0
                };
                psi[axis * small + i] += scale * num * phi;
            }
        }
    }

    // φ = ψ + 𝔭_ℓ * ψ on the box of side 2ℓ−1, over the denominator D_ψ ℓ^d.
    let extent = 2 * ell - 1;
    let big = extent.pow(d as u32);
    let mut num = vec![0i64; d * big];
    for axis in 0..d {
        let slice = &mut num[axis * big..(axis + 1) * big];
        for i in 0..small {
            let z = box_coords(i, ell, d);
            slice[box_index(&z, extent)] = psi[axis * small + i];
        }
        for a in 0..d {
            box_sum_axis(slice, extent, d, a, ell);
        }
        for i in 0..small {
            let z = box_coords(i, ell, d);
            slice[box_index(&z, extent)] += psi[axis * small + i] * ell_d;
        }
    }
    Ok(Flow { d, ell, extent, denom, num })
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

fn lcm(a: i128, b: i128) -> i128 {
    a / gcd(a, b) * b
}

/// Sizes of a flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowCost {
    pub ell: usize,
    pub d: usize,
    /// `Σ φ²`.
    pub l2: f64,
    /// `Σ |φ|`.
    pub l1: f64,
}

impl FlowCost {
    pub fn l2_ratio(&self) -> f64 {
        self.l2 / g_d(self.ell, self.d)
    }

    pub fn l1_ratio(&self) -> f64 {
        self.l1 / self.ell as f64
    }
}

impl Flow {
    fn get_num(&self, z: &[i64], axis: usize) -> i64 {
        if z.iter().any(|&c| c < 0 || c >= self.extent as i64) {
            return 0;
        }
        let zu: Vec<usize> = z.iter().map(|&c| c as usize).collect();
        self.num[axis * self.extent.pow(self.d as u32) + box_index(&zu, self.extent)]
    }

    pub fn ratio(&self, z: &[i64], axis: usize) -> Ratio<i64> {
        Ratio::new(self.get_num(z, axis), self.denom)
    }

    pub fn value(&self, z: &[i64], axis: usize) -> f64 {
        self.get_num(z, axis) as f64 / self.denom as f64
    }

    /// Largest absolute integer residual of `δ_0 − 𝔮_ℓ = div φ` over
    /// `[−1, extent]^d`, in units of `1 / denom`. Zero means exact.
    pub fn divergence_residual_exact(&self) -> i128 {
        let q = Kernel::q(self.ell, self.d).expect("valid window");
        let q_scale = self.denom as i128 / q.denom as i128;
        debug_assert_eq!(q_scale * q.denom as i128, self.denom as i128);
        let mut worst = 0i128;
        self.for_each_site(|z| {
            let mut div = 0i128;
            let mut zm = z.to_vec();
            for axis in 0..self.d {
                div += self.get_num(z, axis) as i128;
                zm[axis] -= 1;
                div -= self.get_num(&zm, axis) as i128;
                zm[axis] += 1;
            }
            let delta = if z.iter().all(|&c| c == 0) { self.denom as i128 } else { 0 };
            let target = delta - q_scale * *q.ratio(z).numer() as i128 * (q.denom as i128 / *q.ratio(z).denom() as i128);
            worst = worst.max((div - target).abs());
        });
        worst
    }

    /// Same check in floating point; returns the largest absolute residual.
    pub fn divergence_residual_f64(&self) -> f64 {
        let q = Kernel::q(self.ell, self.d).expect("valid window");
        let mut worst: f64 = 0.0;
        self.for_each_site(|z| {
            let mut div = 0.0;
            let mut zm = z.to_vec();
            for axis in 0..self.d {
                div += self.value(z, axis);
                zm[axis] -= 1;
                div -= self.value(&zm, axis);
                zm[axis] += 1;
            }
            let delta = if z.iter().all(|&c| c == 0) { 1.0 } else { 0.0 };
            worst = worst.max((div - (delta - q.weight(z))).abs());
        });
        worst
    }

    fn for_each_site<F: FnMut(&[i64])>(&self, mut f: F) {
        let side = self.extent + 2;
        let total = side.pow(self.d as u32);
        let mut z = vec![0i64; self.d];
        for i in 0..total {
            let c = box_coords(i, side, self.d);
            for (zi, ci) in z.iter_mut().zip(c) {
                *zi = ci as i64 - 1;
            }
            f(&z);
        }
    }

    /// `Σ φ²` and `Σ |φ|`, accumulated exactly.
    pub fn cost(&self) -> FlowCost {
        let mut sq: i128 = 0;
        let mut ab: i128 = 0;
        for &v in &self.num {
            let v = v as i128;
            sq += v * v;
            ab += v.abs();
        }
        let dn = self.denom as f64;
        FlowCost { ell: self.ell, d: self.d, l2: sq as f64 / (dn * dn), l1: ab as f64 / dn }
    }

    /// Edges with non-zero value as CSV `axis,z0,…,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("axis,");
        for a in 0..self.d {
            let _ = write!(s, "z{a},");
        }
        s.push_str("value\n");
        let big = self.extent.pow(self.d as u32);
        for (k, &v) in self.num.iter().enumerate() {
            if v == 0 {
                continue;
            }
            let _ = write!(s, "{},", k / big);
            for c in box_coords(k % big, self.extent, self.d) {
                let _ = write!(s, "{c},");
            }
            let _ = writeln!(s, "{:.17e}", v as f64 / self.denom as f64);
        }
        s
    }
}
