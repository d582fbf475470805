//! Smooth periodic initial profiles on the unit torus.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

use crate::numerics::quadrature::gauss_legendre;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("profile of dimension {profile} used on a {expected}-dimensional torus")]
    Dimension { profile: usize, expected: usize },
    #[error("bump width must be positive, got {0}")]
    Width(f64),
    #[error("unknown profile kind '{0}' (expected sin, cos, bump, series or constant)")]
    Kind(String),
}

/// A smooth function on the torus `[0,1)^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    /// The constant `value`.
    Constant { value: f64 },
    /// `amplitude * sin(2π k·u + phase)`.
    Trig { amplitude: f64, wave: Vec<i32>, phase: f64 },
    /// Periodic bump `amplitude * Π_i exp((cos 2π(u_i − c_i) − 1)/width²)`,
    /// minus its mean when `centered`.
    Bump { amplitude: f64, center: Vec<f64>, width: f64, centered: bool },
    /// One-dimensional Fourier series `Σ_k a_k cos 2πku + b_k sin 2πku`, `k ≥ 1`.
    Series { cos: Vec<f64>, sin: Vec<f64> },
}

impl Profile {
    pub fn sin(amplitude: f64) -> Self {
        Profile::Trig { amplitude, wave: vec![1], phase: 0.0 }
    }

    pub fn cos(amplitude: f64) -> Self {
        Profile::Trig { amplitude, wave: vec![1], phase: std::f64::consts::FRAC_PI_2 }
    }

    /// Named constructor used by configuration files.
    pub fn named(kind: &str, amplitude: f64, d: usize) -> Result<Self, ProfileError> {
        let mut wave = vec![0; d];
        wave[0] = 1;
        match kind {
            "sin" => Ok(Profile::Trig { amplitude, wave, phase: 0.0 }),
            "cos" => Ok(Profile::Trig { amplitude, wave, phase: std::f64::consts::FRAC_PI_2 }),
            "bump" => Ok(Profile::Bump { amplitude, center: vec![0.5; d], width: 0.5, centered: true }),
            "constant" => Ok(Profile::Constant { value: amplitude }),
            other => Err(ProfileError::Kind(other.to_string())),
        }
    }

    /// Dimension the profile is tied to, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Profile::Constant { .. } => None,
            Profile::Trig { wave, .. } => Some(wave.len()),
            Profile::Bump { center, .. } => Some(center.len()),
            Profile::Series { .. } => Some(1),
        }
    }

    pub fn check(&self, d: usize) -> Result<(), ProfileError> {
        if let Profile::Bump { width, .. } = self {
            if !(*width > 0.0) {
                return Err(ProfileError::Width(*width));
            }
        }
        match self.dim() {
            Some(p) if p != d => Err(ProfileError::Dimension { profile: p, expected: d }),
            _ => Ok(()),
        }
    }

    fn bump_axis_mean(width: f64) -> f64 {
        // Trapezoid rule is spectrally accurate for smooth periodic integrands.
        let n = 4096;
        (0..n).map(|i| ((TAU * i as f64 / n as f64).cos() - 1.0) / (width * width)).map(f64::exp).sum::<f64>() / n as f64
    }

    /// Spatial mean over the torus.
    pub fn mean(&self) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Trig { amplitude, wave, phase } => {
                if wave.iter().all(|&k| k == 0) {
                    amplitude * phase.sin()
                } else {
                    0.0
                }
            }
            Profile::Bump { amplitude, center, width, centered } => {
                if *centered {
                    0.0
                } else {
                    amplitude * Self::bump_axis_mean(*width).powi(center.len() as i32)
                }
            }
            Profile::Series { .. } => 0.0,
        }
    }

    fn bump_offset(&self) -> f64 {
        match self {
            Profile::Bump { amplitude, center, width, centered: true } => {
                amplitude * Self::bump_axis_mean(*width).powi(center.len() as i32)
            }
            _ => 0.0,
        }
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Trig { amplitude, wave, phase } => amplitude * (TAU * dot(wave, u) + phase).sin(),
            Profile::Bump { amplitude, center, width, .. } => {
                let e: f64 = center.iter().zip(u).map(|(c, x)| ((TAU * (x - c)).cos() - 1.0) / (width * width)).sum();
                amplitude * e.exp() - self.bump_offset()
            }
            Profile::Series { cos, sin } => {
                let x = u[0];
                let mut v = 0.0;
                for (k, a) in cos.iter().enumerate() {
                    v += a * (TAU * (k + 1) as f64 * x).cos();
                }
                for (k, b) in sin.iter().enumerate() {
                    v += b * (TAU * (k + 1) as f64 * x).sin();
                }
                v
            }
        }
    }

    /// Gradient written into `g` (length `u.len()`).
    pub fn grad(&self, u: &[f64], g: &mut [f64]) {
        match self {
            Profile::Constant { .. } => g.iter_mut().for_each(|v| *v = 0.0),
            Profile::Trig { amplitude, wave, phase } => {
                let c = amplitude * TAU * (TAU * dot(wave, u) + phase).cos();
                for (gi, &k) in g.iter_mut().zip(wave) {
                    *gi = c * k as f64;
                }
            }
            Profile::Bump { amplitude, center, width, .. } => {
                let w2 = width * width;
                let e: f64 = center.iter().zip(u).map(|(c, x)| ((TAU * (x - c)).cos() - 1.0) / w2).sum();
                let b = amplitude * e.exp();
                for ((gi, c), x) in g.iter_mut().zip(center).zip(u) {
                    *gi = -b * TAU * (TAU * (x - c)).sin() / w2;
                }
            }
            Profile::Series { cos, sin } => {
                let x = u[0];
                let mut v = 0.0;
                for (k, a) in cos.iter().enumerate() {
                    let w = TAU * (k + 1) as f64;
                    v -= a * w * (w * x).sin();
                }
                for (k, b) in sin.iter().enumerate() {
                    let w = TAU * (k + 1) as f64;
                    v += b * w * (w * x).cos();
                }
                g[0] = v;
                g.iter_mut().skip(1).for_each(|v| *v = 0.0);
            }
        }
    }

    /// Extension to complex arguments (one-dimensional profiles only).
    pub fn value_c(&self, z: Complex64) -> Complex64 {
        match self {
            Profile::Constant { value } => Complex64::new(*value, 0.0),
            Profile::Trig { amplitude, wave, phase } => (z * TAU * wave[0] as f64 + phase).sin() * *amplitude,
            Profile::Bump { amplitude, center, width, .. } => {
                ((((z - center[0]) * TAU).cos() - 1.0) / (width * width)).exp() * *amplitude - self.bump_offset()
            }
            Profile::Series { cos, sin } => {
                let mut v = Complex64::new(0.0, 0.0);
                for (k, a) in cos.iter().enumerate() {
                    v += (z * TAU * (k + 1) as f64).cos() * *a;
                }
                for (k, b) in sin.iter().enumerate() {
                    v += (z * TAU * (k + 1) as f64).sin() * *b;
                }
                v
            }
        }
    }

    pub fn deriv_c(&self, z: Complex64) -> Complex64 {
        match self {
            Profile::Constant { .. } => Complex64::new(0.0, 0.0),
            Profile::Trig { amplitude, wave, phase } => {
                let w = TAU * wave[0] as f64;
                (z * w + phase).cos() * (amplitude * w)
            }
            Profile::Bump { amplitude, center, width, .. } => {
                let w2 = width * width;
                let arg = (z - center[0]) * TAU;
                ((arg.cos() - 1.0) / w2).exp() * (-amplitude * TAU / w2) * arg.sin()
            }
            Profile::Series { cos, sin } => {
                let mut v = Complex64::new(0.0, 0.0);
                for (k, a) in cos.iter().enumerate() {
                    let w = TAU * (k + 1) as f64;
                    v -= (z * w).sin() * (a * w);
                }
                for (k, b) in sin.iter().enumerate() {
                    let w = TAU * (k + 1) as f64;
                    v += (z * w).cos() * (b * w);
                }
                v
            }
        }
    }

    /// `∫_0^z (f − mean)` for one-dimensional profiles.
    pub fn primitive_c(&self, z: Complex64) -> Complex64 {
        match self {
            Profile::Constant { .. } => Complex64::new(0.0, 0.0),
            Profile::Trig { amplitude, wave, phase } => {
                let w = TAU * wave[0] as f64;
                if wave[0] == 0 {
                    return Complex64::new(0.0, 0.0);
                }
                -((z * w + phase).cos() - phase.cos()) * (amplitude / w)
            }
            Profile::Bump { .. } => {
                let m = self.mean();
                let (x, w) = gauss_legendre(16);
                let panels = 64;
                let h = z / panels as f64;
                let mut s = Complex64::new(0.0, 0.0);
                for p in 0..panels {
                    let c = h * (p as f64 + 0.5);
                    for (xi, wi) in x.iter().zip(&w) {
                        s += (self.value_c(c + h * (0.5 * xi)) - m) * (0.5 * wi);
                    }
                }
                s * h
            }
            Profile::Series { cos, sin } => {
                let mut v = Complex64::new(0.0, 0.0);
                for (k, a) in cos.iter().enumerate() {
                    let w = TAU * (k + 1) as f64;
                    v += (z * w).sin() * (a / w);
                }
                for (k, b) in sin.iter().enumerate() {
                    let w = TAU * (k + 1) as f64;
                    v -= ((z * w).cos() - 1.0) * (b / w);
                }
                v
            }
        }
    }

    pub fn primitive(&self, x: f64) -> f64 {
        self.primitive_c(Complex64::new(x, 0.0)).re
    }

    /// Upper bound on `sup |f|`.
    pub fn sup_bound(&self) -> f64 {
        match self {
            Profile::Constant { value } => value.abs(),
            Profile::Trig { amplitude, .. } => amplitude.abs(),
            Profile::Bump { amplitude, .. } => amplitude.abs() + self.bump_offset().abs(),
            Profile::Series { cos, sin } => cos.iter().chain(sin).map(|a| a.abs()).sum(),
        }
    }
}

fn dot(k: &[i32], u: &[f64]) -> f64 {
    k.iter().zip(u).map(|(&k, &x)| k as f64 * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_grad(p: &Profile, u: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..u.len())
            .map(|i| {
                let mut a = u.to_vec();
                let mut b = u.to_vec();
                a[i] += h;
                b[i] -= h;
                (p.value(&a) - p.value(&b)) / (2.0 * h)
            })
            .collect()
    }

    fn samples() -> Vec<Profile> {
        vec![
            Profile::sin(0.25),
            Profile::cos(0.3),
            Profile::Trig { amplitude: 0.1, wave: vec![1, 2], phase: 0.3 },
            Profile::Bump { amplitude: 0.2, center: vec![0.3, 0.6], width: 0.4, centered: true },
            Profile::Bump { amplitude: 0.2, center: vec![0.3], width: 0.4, centered: false },
            Profile::Series { cos: vec![0.1, -0.05], sin: vec![0.2, 0.0, 0.03] },
        ]
    }

    #[test]
    fn named_profiles() {
        assert_eq!(Profile::named("sin", 0.25, 1).unwrap(), Profile::sin(0.25));
        assert!(matches!(Profile::named("tri", 1.0, 1), Err(ProfileError::Kind(_))));
        assert!(Profile::sin(1.0).check(2).is_err());
    }

    #[test]
    fn centered_bump_has_zero_mean() {
        let p = Profile::Bump { amplitude: 0.7, center: vec![0.2], width: 0.3, centered: true };
        let n = 2000;
        let m: f64 = (0..n).map(|i| p.value(&[i as f64 / n as f64])).sum::<f64>() / n as f64;
        assert!(m.abs() < 1e-13);
        assert!(p.primitive(1.0).abs() < 1e-12);
    }

    #[test]
    fn complex_extension_agrees_on_reals() {
        for p in samples().into_iter().filter(|p| p.dim() == Some(1)) {
            for i in 0..17 {
                let x = i as f64 / 17.0;
                assert!((p.value_c(Complex64::new(x, 0.0)).re - p.value(&[x])).abs() < 1e-14);
                let mut g = [0.0];
                p.grad(&[x], &mut g);
                assert!((p.deriv_c(Complex64::new(x, 0.0)).re - g[0]).abs() < 1e-12);
                // Complex-step derivative of the primitive recovers the centred profile.
                let h = 1e-20;
                let d = p.primitive_c(Complex64::new(x, h)).im / h;
                assert!((d - (p.value(&[x]) - p.mean())).abs() < 1e-12, "{p:?} at {x}");
            }
        }
    }

    proptest! {
        #[test]
        fn gradients_match_finite_differences(u0 in 0.0f64..1.0, u1 in 0.0f64..1.0) {
            for p in samples() {
                let u = if p.dim() == Some(2) { vec![u0, u1] } else { vec![u0] };
                let mut g = vec![0.0; u.len()];
                p.grad(&u, &mut g);
                let f = fd_grad(&p, &u);
                for (a, b) in g.iter().zip(&f) {
                    prop_assert!((a - b).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn periodic(u0 in 0.0f64..1.0, u1 in 0.0f64..1.0) {
            for p in samples() {
                let u = if p.dim() == Some(2) { vec![u0, u1] } else { vec![u0] };
                let v: Vec<f64> = u.iter().map(|x| x + 1.0).collect();
                prop_assert!((p.value(&u) - p.value(&v)).abs() < 1e-12);
                prop_assert!(p.value(&u).abs() <= p.sup_bound() + 1e-12);
            }
        }
    }
}
