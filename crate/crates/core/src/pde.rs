//! Macroscopic side: scalar Burgers solvers, the linearized p-system, the
//! second-order geometric-optics corrections and the residual checks built
//! on them.
//!
//! Scalar equations are written as `∂_s ρ + (c·∇) ρ² = 0`. The exclusion
//! process uses `c = −m`; the two chain modes use `c = ±𝛕″/(4√𝛕′)`.

use num_complex::Complex64;
use std::fmt;
use thiserror::Error;

use crate::lattice::wrap_unit;
use crate::profile::{Profile, ProfileError};

#[derive(Debug, Error, PartialEq)]
pub enum PdeError {
    #[error("time {s} is at or past the shock time {shock}")]
    ShockReached { s: f64, shock: f64 },
    #[error("characteristic solve failed to converge at u = {0:?}")]
    NoConvergence(Vec<f64>),
    #[error("CFL number {0} outside (0, 0.5]")]
    Cfl(f64),
    #[error("flux coefficient has {got} components, profile lives in dimension {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("tension derivative {0} must be positive (hyperbolicity lost)")]
    NotHyperbolic(f64),
    #[error("eigenvalues {0} and {1} are not distinct and non-zero")]
    Degenerate(f64, f64),
    #[error("initial wave has non-zero mean {0}")]
    NonZeroMean(f64),
    #[error("{0}")]
    Profile(#[from] ProfileError),
}

/// First time characteristics cross, or none for non-compressive data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShockTime {
    At(f64),
    Never,
}

impl ShockTime {
    pub fn is_before(&self, s: f64) -> bool {
        matches!(self, ShockTime::At(t) if *t <= s)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            ShockTime::At(t) => Some(*t),
            ShockTime::Never => None,
        }
    }
}

impl fmt::Display for ShockTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShockTime::At(t) => write!(f, "{t}"),
            ShockTime::Never => write!(f, "never"),
        }
    }
}

/// `∂_s ρ + (c·∇) ρ² = 0` on the unit torus with smooth initial data.
#[derive(Clone, Debug)]
pub struct ScalarBurgers {
    pub c: Vec<f64>,
    pub initial: Profile,
    shock: ShockTime,
}

impl ScalarBurgers {
    pub fn new(c: Vec<f64>, initial: Profile) -> Result<Self, PdeError> {
        initial.check(c.len())?;
        let shock = shock_time(&initial, &c);
        Ok(Self { c, initial, shock })
    }

    /// Equation of the exclusion process with drift `m`.
    pub fn gep(m: &[f64], initial: Profile) -> Result<Self, PdeError> {
        Self::new(m.iter().map(|v| -v).collect(), initial)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn shock_time(&self) -> ShockTime {
        self.shock
    }

    fn check_time(&self, s: f64) -> Result<(), PdeError> {
        if let ShockTime::At(t) = self.shock {
            if s >= t {
                return Err(PdeError::ShockReached { s, shock: t });
            }
        }
        Ok(())
    }

    fn foot(&self, u: &[f64], theta: f64, xi: &mut [f64]) {
        for ((x, &ui), &ci) in xi.iter_mut().zip(u).zip(&self.c) {
            *x = ui + theta * ci;
        }
    }

    /// Solve `θ + 2 s ρ_0(u + θ c) = 0`; the foot of the characteristic is `u + θ c`.
    pub fn theta(&self, s: f64, u: &[f64]) -> Result<f64, PdeError> {
        self.check_time(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        let d = self.dim();
        let mut xi = vec![0.0; d];
        let mut g = vec![0.0; d];
        let bound = 2.0 * s * self.initial.sup_bound();
        let (mut lo, mut hi) = (-bound - 1e-300, bound + 1e-300);
        let mut th = -2.0 * s * self.initial.value(u);
        for _ in 0..200 {
            self.foot(u, th, &mut xi);
            let f = th + 2.0 * s * self.initial.value(&xi);
            if f > 0.0 {
                hi = hi.min(th);
            } else {
                lo = lo.max(th);
            }
            self.initial.grad(&xi, &mut g);
            let df = 1.0 + 2.0 * s * dot(&self.c, &g);
            let mut next = th - f / df;
            if !(next > lo && next < hi) || df <= 0.0 {
                next = 0.5 * (lo + hi);
            }
            if (next - th).abs() <= 1e-15 * (1.0 + th.abs()) {
                return Ok(next);
            }
            th = next;
            if hi - lo <= 1e-16 * (1.0 + th.abs()) {
                return Ok(th);
            }
        }
        Err(PdeError::NoConvergence(u.to_vec()))
    }

    pub fn value(&self, s: f64, u: &[f64]) -> Result<f64, PdeError> {
        let th = self.theta(s, u)?;
        let mut xi = vec![0.0; self.dim()];
        self.foot(u, th, &mut xi);
        Ok(self.initial.value(&xi))
    }

    /// Spatial gradient `∇ρ_0(ξ) / (1 + 2 s c·∇ρ_0(ξ))`.
    pub fn grad(&self, s: f64, u: &[f64]) -> Result<Vec<f64>, PdeError> {
        let th = self.theta(s, u)?;
        let d = self.dim();
        let mut xi = vec![0.0; d];
        self.foot(u, th, &mut xi);
        let mut g = vec![0.0; d];
        self.initial.grad(&xi, &mut g);
        let den = 1.0 + 2.0 * s * dot(&self.c, &g);
        Ok(g.into_iter().map(|v| v / den).collect())
    }

    /// `∂_s ρ = −2 ρ c·∇ρ`.
    pub fn time_derivative(&self, s: f64, u: &[f64]) -> Result<f64, PdeError> {
        let v = self.value(s, u)?;
        let g = self.grad(s, u)?;
        Ok(-2.0 * v * dot(&self.c, &g))
    }

    fn theta_c(&self, s: Complex64, z: Complex64) -> Result<Complex64, PdeError> {
        let th0 = self.theta(s.re, &[z.re])?;
        let c = self.c[0];
        let mut th = Complex64::new(th0, 0.0);
        for _ in 0..50 {
            let xi = z + th * c;
            let f = th + s * 2.0 * self.initial.value_c(xi);
            let df = s * (2.0 * c) * self.initial.deriv_c(xi) + 1.0;
            let step = f / df;
            th -= step;
            if step.norm() <= 1e-16 * (1.0 + th.norm()) {
                break;
            }
        }
        Ok(th)
    }

    /// Complex extension of the one-dimensional solution, for complex-step
    /// differentiation in `s` and `u`.
    pub fn value_c(&self, s: Complex64, z: Complex64) -> Result<Complex64, PdeError> {
        let th = self.theta_c(s, z)?;
        Ok(self.initial.value_c(z + th * self.c[0]))
    }

    /// Complex extension of `∂_u ρ` in one dimension.
    pub fn deriv_c(&self, s: Complex64, z: Complex64) -> Result<Complex64, PdeError> {
        let th = self.theta_c(s, z)?;
        let c = self.c[0];
        let g = self.initial.deriv_c(z + th * c);
        Ok(g / (s * (2.0 * c) * g + 1.0))
    }

    /// Periodic primitive `Σ(s,u) = ∫_0^u ρ(s,v) dv` of a zero-mean solution,
    /// from the exact change of variables along characteristics.
    pub fn primitive_c(&self, s: Complex64, z: Complex64) -> Result<Complex64, PdeError> {
        let c = self.c[0];
        let f = |xi: Complex64| self.initial.primitive_c(xi) + s * c * self.initial.value_c(xi).powi(2);
        let th_u = self.theta_c(s, z)?;
        let th_0 = self.theta_c(s, Complex64::new(0.0, 0.0))?;
        Ok(f(z + th_u * c) - f(th_0 * c))
    }

    pub fn primitive(&self, s: f64, u: f64) -> Result<f64, PdeError> {
        Ok(self.primitive_c(Complex64::new(s, 0.0), Complex64::new(u, 0.0))?.re)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// First crossing time `1 / sup_u (−2 c·∇ρ_0(u))` of the characteristics,
/// located by a grid scan followed by golden-section refinement per axis.
pub fn shock_time(initial: &Profile, c: &[f64]) -> ShockTime {
    let d = c.len();
    let rate = |u: &[f64]| {
        let mut g = vec![0.0; d];
        initial.grad(u, &mut g);
        -2.0 * dot(c, &g)
    };
    let per_axis: usize = match d {
        1 => 4096,
        2 => 256,
        _ => 48,
    };
    let h = 1.0 / per_axis as f64;
    let total = per_axis.pow(d as u32);
    let mut best = f64::NEG_INFINITY;
    let mut arg = vec![0.0; d];
    let mut u = vec![0.0; d];
    for i in 0..total {
        let mut k = i;
        for ui in u.iter_mut() {
            *ui = (k % per_axis) as f64 * h;
            k /= per_axis;
        }
        let v = rate(&u);
        if v > best {
            best = v;
            arg.copy_from_slice(&u);
        }
    }
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..4 {
        for axis in 0..d {
            let (mut a, mut b) = (arg[axis] - h, arg[axis] + h);
            let mut p = arg.clone();
            let eval = |x: f64, p: &mut Vec<f64>| {
                p[axis] = x;
                rate(p)
            };
            let mut x1 = b - gr * (b - a);
            let mut x2 = a + gr * (b - a);
            let mut f1 = eval(x1, &mut p);
            let mut f2 = eval(x2, &mut p);
            while b - a > 1e-13 {
                if f1 < f2 {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + gr * (b - a);
                    f2 = eval(x2, &mut p);
                } else {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - gr * (b - a);
                    f1 = eval(x1, &mut p);
                }
            }
            let x = 0.5 * (a + b);
            let fx = eval(x, &mut p);
            if fx >= best {
                best = fx;
                arg[axis] = x;
            }
        }
    }
    if best > 0.0 {
        ShockTime::At(1.0 / best)
    } else {
        ShockTime::Never
    }
}

/// Cell averages on a uniform periodic grid of `cells^d` cells, axis 0 fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub d: usize,
    pub cells: usize,
    pub values: Vec<f64>,
}

impl Field {
    /// Cell averages of `f`, by a 4-point Gauss rule per axis in one dimension
    /// and by cell-centre values otherwise.
    pub fn sample<F: FnMut(&[f64]) -> f64>(d: usize, cells: usize, mut f: F) -> Self {
        let h = 1.0 / cells as f64;
        let total = cells.pow(d as u32);
        let mut values = Vec::with_capacity(total);
        let (gx, gw) = crate::numerics::quadrature::gauss_legendre(4);
        let mut u = vec![0.0; d];
        for i in 0..total {
            let mut k = i;
            for ui in u.iter_mut() {
                *ui = ((k % cells) as f64 + 0.5) * h;
                k /= cells;
            }
            if d == 1 {
                let c = u[0];
                let v: f64 = gx.iter().zip(&gw).map(|(x, w)| 0.5 * w * f(&[c + 0.5 * h * x])).sum();
                values.push(v);
            } else {
                values.push(f(&u));
            }
        }
        Field { d, cells, values }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn l1_distance(&self, other: &Field) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() / self.values.len() as f64
    }

    pub fn total_variation_1d(&self) -> f64 {
        let n = self.values.len();
        (0..n).map(|i| (self.values[(i + 1) % n] - self.values[i]).abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cell centres `(i + 1/2)/cells` along axis 0.
    pub fn centres(&self) -> Vec<f64> {
        (0..self.cells).map(|i| (i as f64 + 0.5) / self.cells as f64).collect()
    }
}

/// Godunov flux for `a ρ²`.
#[inline]
fn godunov_flux(a: f64, l: f64, r: f64) -> f64 {
    let f = |v: f64| a * v * v;
    let (fl, fr) = (f(l), f(r));
    let zero_inside = (l <= 0.0 && r >= 0.0) || (r <= 0.0 && l >= 0.0);
    if l <= r {
        let m = fl.min(fr);
        if zero_inside {
            m.min(0.0)
        } else {
            m
        }
    } else {
        let m = fl.max(fr);
        if zero_inside {
            m.max(0.0)
        } else {
            m
        }
    }
}

fn sweep(field: &mut Field, axis: usize, a: f64, dt: f64, buf: &mut Vec<f64>) {
    let n = field.cells;
    let stride = n.pow(axis as u32);
    let lines = field.values.len() / n;
    let r = dt * n as f64;
    buf.resize(n + 1, 0.0);
    for l in 0..lines {
        let base = (l % stride) + (l / stride) * stride * n;
        let at = |j: usize| base + (j % n) * stride;
        for j in 0..n {
            buf[j + 1] = godunov_flux(a, field.values[at(j)], field.values[at(j + 1)]);
        }
        buf[0] = buf[n];
        for j in 0..n {
            field.values[at(j)] -= r * (buf[j + 1] - buf[j]);
        }
    }
}

/// Godunov finite-volume solution at time `t`, Strang dimensional splitting.
pub fn burgers_fv(eq: &ScalarBurgers, t: f64, cells: usize, cfl: f64) -> Result<Field, PdeError> {
    if !(cfl > 0.0 && cfl <= 0.5) {
        return Err(PdeError::Cfl(cfl));
    }
    let d = eq.dim();
    let mut field = Field::sample(d, cells, |u| eq.initial.value(u));
    let smax = field.max_abs().max(1e-300);
    let amax = eq.c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    // Maximum principle: |ρ| never exceeds its initial bound.
    let dt_max = cfl / (2.0 * amax * smax * cells as f64);
    let steps = (t / dt_max).ceil().max(if t > 0.0 { 1.0 } else { 0.0 }) as usize;
    let mut buf = Vec::new();
    if steps == 0 {
        return Ok(field);
    }
    let dt = t / steps as f64;
    for _ in 0..steps {
        if d == 1 {
            sweep(&mut field, 0, eq.c[0], dt, &mut buf);
            continue;
        }
        for axis in 0..d - 1 {
            sweep(&mut field, axis, eq.c[axis], 0.5 * dt, &mut buf);
        }
        sweep(&mut field, d - 1, eq.c[d - 1], dt, &mut buf);
        for axis in (0..d - 1).rev() {
            sweep(&mut field, axis, eq.c[axis], 0.5 * dt, &mut buf);
        }
    }
    Ok(field)
}

/// Exact solution as cell averages on the same grid as [`burgers_fv`].
pub fn characteristics_field(eq: &ScalarBurgers, t: f64, cells: usize) -> Result<Field, PdeError> {
    eq.check_time(t)?;
    let mut err = None;
    let f = Field::sample(eq.dim(), cells, |u| match eq.value(t, u) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(f),
    }
}

type Mat2 = [[f64; 2]; 2];

/// Linearization of a 2×2 flux `J` at an expansion point: eigenpairs with
/// `𝐥_j·𝐫_k = δ_jk` and the Hessian `H_i(v,w) = Σ ∂²J_i/∂w_j∂w_k v_j w_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSystem {
    pub a: Mat2,
    pub lambda: [f64; 2],
    pub r: [[f64; 2]; 2],
    pub l: [[f64; 2]; 2],
    pub hess: [Mat2; 2],
}

impl TwoSystem {
    /// General real 2×2 Jacobian with distinct non-zero eigenvalues.
    pub fn from_jacobian(a: Mat2, hess: [Mat2; 2]) -> Result<Self, PdeError> {
        let tr = a[0][0] + a[1][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let disc = tr * tr / 4.0 - det;
        if !(disc > 0.0) {
            return Err(PdeError::Degenerate(tr / 2.0, tr / 2.0));
        }
        let lam = [tr / 2.0 + disc.sqrt(), tr / 2.0 - disc.sqrt()];
        if lam.iter().any(|v| v.abs() < 1e-300) {
            return Err(PdeError::Degenerate(lam[0], lam[1]));
        }
        let right = |lv: f64| {
            // Null vector of (A − λ) from its larger row.
            let r0 = [a[0][0] - lv, a[0][1]];
            let r1 = [a[1][0], a[1][1] - lv];
            let row = if r0[0].abs() + r0[1].abs() >= r1[0].abs() + r1[1].abs() { r0 } else { r1 };
            [-row[1], row[0]]
        };
        let r = [right(lam[0]), right(lam[1])];
        let det_r = r[0][0] * r[1][1] - r[1][0] * r[0][1];
        // Rows of the inverse of the matrix with columns r_1, r_2.
        let l = [[r[1][1] / det_r, -r[1][0] / det_r], [-r[0][1] / det_r, r[0][0] / det_r]];
        Ok(TwoSystem { a, lambda: lam, r, l, hess })
    }

    /// The p-system `J(𝔭,𝔯) = (−𝛕(𝔯), −𝔭)` with the normalization
    /// `𝐫_1 = 𝐮_− = (−√𝛕′, 1)`, `𝐫_2 = 𝐮_+ = (√𝛕′, 1)`.
    pub fn psystem(tau1: f64, tau2: f64) -> Result<Self, PdeError> {
        if !(tau1 > 0.0) {
            return Err(PdeError::NotHyperbolic(tau1));
        }
        let s = tau1.sqrt();
        Ok(TwoSystem {
            a: [[0.0, -tau1], [-1.0, 0.0]],
            lambda: [s, -s],
            r: [[-s, 1.0], [s, 1.0]],
            l: [[-0.5 / s, 0.5], [0.5 / s, 0.5]],
            hess: [[[0.0, 0.0], [0.0, -tau2]], [[0.0, 0.0], [0.0, 0.0]]],
        })
    }

    pub fn h(&self, v: [f64; 2], w: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..2 {
                for k in 0..2 {
                    *o += self.hess[i][j][k] * v[j] * w[k];
                }
            }
        }
        out
    }

    /// `𝐥_k·H(𝐫_j, 𝐫_j')`.
    pub fn lh(&self, k: usize, j: usize, jp: usize) -> f64 {
        let h = self.h(self.r[j], self.r[jp]);
        self.l[k][0] * h[0] + self.l[k][1] * h[1]
    }

    /// Largest of `|A 𝐫_j − λ_j 𝐫_j|` and `|𝐥_j·𝐫_k − δ_jk|`.
    pub fn eigen_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..2 {
            for i in 0..2 {
                let ar = self.a[i][0] * self.r[j][0] + self.a[i][1] * self.r[j][1];
                worst = worst.max((ar - self.lambda[j] * self.r[j][i]).abs());
                let la = self.l[j][0] * self.a[0][i] + self.l[j][1] * self.a[1][i];
                worst = worst.max((la - self.lambda[j] * self.l[j][i]).abs());
            }
            for k in 0..2 {
                let lr = self.l[j][0] * self.r[k][0] + self.l[j][1] * self.r[k][1];
                worst = worst.max((lr - if j == k { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    /// Burgers coefficient of mode `k`: `∂_s σ_k + b_k ∂_u σ_k² = 0` with
    /// `b_k = 𝐥_k·H(𝐫_k,𝐫_k)/2`.
    pub fn burgers_coefficient(&self, k: usize) -> f64 {
        0.5 * self.lh(k, k, k)
    }

    pub fn corrections(&self) -> Corrections {
        let dl = self.lambda[0] - self.lambda[1];
        Corrections {
            c1: -self.lh(0, 0, 1) / dl,
            c2: self.lh(1, 0, 1) / dl,
            q1: self.lh(0, 1, 1) / (2.0 * (self.lambda[1] - self.lambda[0])),
            q2: self.lh(1, 0, 0) / (2.0 * (self.lambda[0] - self.lambda[1])),
        }
    }
}

/// Coefficients of the explicit second-order corrections for two modes:
///
/// * `σ̃_{1,1,2} = c1 σ_1(u) σ_2(u′)`, `σ̃_{1,2,1} = c1 Σ_2(u) ∂σ_1(u′)`,
/// * `σ̃_{2,1,2} = c2 Σ_1(u) ∂σ_2(u′)`, `σ̃_{2,2,1} = c2 σ_2(u) σ_1(u′)`,
/// * `q1 σ_2²` and `q2 σ_1²` are the quadratic self-interaction terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Corrections {
    pub c1: f64,
    pub c2: f64,
    pub q1: f64,
    pub q2: f64,
}

/// Values needed from a mode at one point.
#[derive(Clone, Copy, Debug)]
pub struct ModeValues<T> {
    pub sigma: T,
    pub deriv: T,
    pub primitive: T,
}

impl Corrections {
    /// `σ̃_{k,j,j′}(u, u′)` from the mode values at `u` (mode `j`) and `u′` (mode `j′`).
    pub fn pair<T>(&self, k: usize, j: usize, at_u: ModeValues<T>, at_up: ModeValues<T>) -> T
    where
        T: std::ops::Mul<f64, Output = T> + std::ops::Mul<T, Output = T>,
    {
        match (k, j) {
            (0, 0) => at_u.sigma * at_up.sigma * self.c1,
            (0, 1) => at_u.primitive * at_up.deriv * self.c1,
            (1, 0) => at_u.primitive * at_up.deriv * self.c2,
            (1, 1) => at_u.sigma * at_up.sigma * self.c2,
            _ => panic!("mode index out of range"),
        }
    }

    /// Full correction `σ̃_k(u_1, u_2)` with mode 1 evaluated at `u_1`, mode 2 at `u_2`.
    pub fn full<T>(&self, k: usize, m1: ModeValues<T>, m2: ModeValues<T>) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Mul<T, Output = T> + std::ops::Add<T, Output = T>,
    {
        if k == 0 {
            m2.sigma * m2.sigma * self.q1 + self.pair(0, 0, m1, m2) + self.pair(0, 1, m2, m1)
        } else {
            m1.sigma * m1.sigma * self.q2 + self.pair(1, 0, m1, m2) + self.pair(1, 1, m2, m1)
        }
    }
}

/// Coefficients of the chain correction written out directly: the squared
/// term `−𝛕″/(8𝛕′)` and the cross terms `−𝛕″/(4𝛕′)`.
pub fn chain_correction_coefficients(tau1: f64, tau2: f64) -> (f64, f64) {
    (-tau2 / (8.0 * tau1), -tau2 / (4.0 * tau1))
}

const CSTEP: f64 = 1e-30;

fn mode_c(w: &ScalarBurgers, s: Complex64, z: Complex64) -> Result<ModeValues<Complex64>, PdeError> {
    Ok(ModeValues { sigma: w.value_c(s, z)?, deriv: w.deriv_c(s, z)?, primitive: w.primitive_c(s, z)? })
}

/// Residual of the transport identity for `σ̃_{k,j,j′}`:
/// `((λ_j−λ_k)∂_u + (λ_j′−λ_k)∂_u′) σ̃_{k,j,j′} − 𝐥_k·H(𝐫_j,𝐫_j′) σ_j(u) ∂σ_j′(u′)`,
/// derivatives by complex step.
pub fn correction_residual(
    sys: &TwoSystem,
    modes: [&ScalarBurgers; 2],
    k: usize,
    j: usize,
    s: f64,
    u: f64,
    up: f64,
) -> Result<f64, PdeError> {
    let jp = 1 - j;
    let corr = sys.corrections();
    let sc = Complex64::new(s, 0.0);
    let f = |zu: Complex64, zup: Complex64| -> Result<Complex64, PdeError> {
        Ok(corr.pair(k, j, mode_c(modes[j], sc, zu)?, mode_c(modes[jp], sc, zup)?))
    };
    let re = |x: f64| Complex64::new(x, 0.0);
    let du = f(Complex64::new(u, CSTEP), re(up))?.im / CSTEP;
    let dup = f(re(u), Complex64::new(up, CSTEP))?.im / CSTEP;
    let lhs = (sys.lambda[j] - sys.lambda[k]) * du + (sys.lambda[jp] - sys.lambda[k]) * dup;
    let rhs = sys.lh(k, j, jp) * modes[j].value(s, &[u])? * modes[jp].grad(s, &[up])?[0];
    Ok(lhs - rhs)
}

/// Perturbation of the anharmonic chain around `(𝔭_*, 𝔯_*)` by two
/// counter-propagating zero-mean waves.
#[derive(Clone, Debug)]
pub struct ChainPerturbation {
    pub p_star: f64,
    pub r_star: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub system: TwoSystem,
    /// `σ_−` and `σ_+`.
    pub modes: [ScalarBurgers; 2],
}

impl ChainPerturbation {
    pub fn new(
        p_star: f64,
        r_star: f64,
        tau1: f64,
        tau2: f64,
        alpha: f64,
        kappa: f64,
        sigma_minus: Profile,
        sigma_plus: Profile,
    ) -> Result<Self, PdeError> {
        let system = TwoSystem::psystem(tau1, tau2)?;
        for p in [&sigma_minus, &sigma_plus] {
            let m = p.mean();
            if m.abs() > 1e-12 {
                return Err(PdeError::NonZeroMean(m));
            }
        }
        let b = tau2 / (4.0 * tau1.sqrt());
        let modes = [ScalarBurgers::new(vec![b], sigma_minus)?, ScalarBurgers::new(vec![-b], sigma_plus)?];
        Ok(Self { p_star, r_star, tau1, tau2, alpha, kappa, system, modes })
    }

    pub fn sound_speed(&self) -> f64 {
        self.tau1.sqrt()
    }

    /// Burgers time `s = N^{κ−α} t` and the characteristic arguments `u ∓ N^κ √𝛕′ t`.
    pub fn arguments<T>(&self, n: f64, t: T, u: T) -> (T, T, T)
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<T, Output = T> + std::ops::Sub<T, Output = T>,
    {
        let s = t * n.powf(self.kappa - self.alpha);
        let shift = t * (n.powf(self.kappa) * self.sound_speed());
        (s, u - shift, u + shift)
    }

    pub fn shock_time(&self) -> ShockTime {
        match (self.modes[0].shock_time(), self.modes[1].shock_time()) {
            (ShockTime::At(a), ShockTime::At(b)) => ShockTime::At(a.min(b)),
            (ShockTime::At(a), _) | (_, ShockTime::At(a)) => ShockTime::At(a),
            _ => ShockTime::Never,
        }
    }

    /// Deviation `(p̃ − 𝔭_*, r̃ − 𝔯_*)`, with or without the `N^{−2α}` corrections.
    pub fn deviation_c(&self, n: f64, t: Complex64, u: Complex64, corrected: bool) -> Result<[Complex64; 2], PdeError> {
        let (s, um, up) = self.arguments(n, t, u);
        let m1 = mode_c(&self.modes[0], s, um)?;
        let m2 = mode_c(&self.modes[1], s, up)?;
        let eps = n.powf(-self.alpha);
        let mut a = [m1.sigma * eps, m2.sigma * eps];
        if corrected {
            let corr = self.system.corrections();
            a[0] += corr.full(0, m1, m2) * (eps * eps);
            a[1] += corr.full(1, m1, m2) * (eps * eps);
        }
        let r = &self.system.r;
        Ok([a[0] * r[0][0] + a[1] * r[1][0], a[0] * r[0][1] + a[1] * r[1][1]])
    }

    /// Profile `(p̃, r̃)` at macroscopic time `t` and position `u`.
    pub fn profile(&self, n: f64, t: f64, u: f64, corrected: bool) -> Result<(f64, f64), PdeError> {
        let d = self.deviation_c(n, Complex64::new(t, 0.0), Complex64::new(u, 0.0), corrected)?;
        Ok((self.p_star + d[0].re, self.r_star + d[1].re))
    }

    /// First-order wave amplitudes `σ_∓(N^{κ−α}t, u ∓ N^κ√𝛕′ t)`.
    pub fn wave_amplitudes(&self, n: f64, t: f64, u: f64) -> Result<(f64, f64), PdeError> {
        let (s, um, up) = self.arguments(n, t, u);
        Ok((self.modes[0].value(s, &[wrap_unit(um)])?, self.modes[1].value(s, &[wrap_unit(up)])?))
    }

    /// The bracket multiplying `N^{κ−2α}` in the expansion of the lattice
    /// residual, assembled term by term with complex-step derivatives at
    /// independent arguments `(u_−, u_+)`. Vanishes when the modes solve their
    /// Burgers equations and the corrections are the explicit ones.
    pub fn bracket(&self, s: f64, um: f64, up: f64) -> Result<[f64; 2], PdeError> {
        let corr = self.system.corrections();
        let sq = self.sound_speed();
        let re = |x: f64| Complex64::new(x, 0.0);
        let im = |x: f64| Complex64::new(x, CSTEP);
        let sc = re(s);
        let sigma_tilde = |k: usize, a: Complex64, b: Complex64| -> Result<Complex64, PdeError> {
            Ok(corr.full(k, mode_c(&self.modes[0], sc, a)?, mode_c(&self.modes[1], sc, b)?))
        };
        let ds_m = self.modes[0].value_c(im(s), re(um))?.im / CSTEP;
        let ds_p = self.modes[1].value_c(im(s), re(up))?.im / CSTEP;
        let d2_tm = sigma_tilde(0, re(um), im(up))?.im / CSTEP;
        let d1_tp = sigma_tilde(1, im(um), re(up))?.im / CSTEP;
        // ∂_u of (σ_−(u_−) + σ_+(u_+))² along both arguments.
        let sum = |a: Complex64, b: Complex64| -> Result<Complex64, PdeError> {
            let v = self.modes[0].value_c(sc, a)? + self.modes[1].value_c(sc, b)?;
            Ok(v * v)
        };
        let dsq = sum(im(um), re(up))?.im / CSTEP + sum(re(um), im(up))?.im / CSTEP;
        let cm = -ds_m - 2.0 * sq * d2_tm;
        let cp = -ds_p + 2.0 * sq * d1_tp;
        let (r1, r2) = (self.system.r[0], self.system.r[1]);
        let b = [self.tau2, 0.0];
        Ok([cm * r1[0] + cp * r2[0] + 0.5 * dsq * b[0], cm * r1[1] + cp * r2[1] + 0.5 * dsq * b[1]])
    }

    /// Lattice residual `ε_x^N = N^{1+κ}(∇𝛕̃_x, ∇p̃_{x−1}) − d/dt(p̃_x, r̃_x)` at site `x`,
    /// with lattice differences in space and a complex-step time derivative.
    /// `tau_increment(a, b)` returns `𝛕(b) − 𝛕(a)`.
    pub fn lattice_residual<F, E>(&self, n: usize, t: f64, x: usize, tau_increment: &F) -> Result<[f64; 2], E>
    where
        F: Fn(f64, f64) -> Result<f64, E>,
        E: From<PdeError>,
    {
        let nf = n as f64;
        let at = |y: i64| -> Result<(f64, f64), PdeError> {
            let u = y.rem_euclid(n as i64) as f64 / nf;
            let d = self.deviation_c(nf, Complex64::new(t, 0.0), Complex64::new(u, 0.0), true)?;
            Ok((d[0].re, d[1].re))
        };
        let x = x as i64;
        let (p0, r0) = at(x)?;
        let (_, r1) = at(x + 1)?;
        let (pm, _) = at(x - 1)?;
        let speed = nf.powf(1.0 + self.kappa);
        let grad_tau = tau_increment(self.r_star + r0, self.r_star + r1)?;
        let grad_p = p0 - pm;
        let u = (x.rem_euclid(n as i64)) as f64 / nf;
        let dt = self.deviation_c(nf, Complex64::new(t, CSTEP), Complex64::new(u, 0.0), true)?;
        Ok([speed * grad_tau - dt[0].im / CSTEP, speed * grad_p - dt[1].im / CSTEP])
    }
}

/// Exclusion-process profile `ϱ_* + N^{−α} ρ(N^{κ−α} t, u − N^κ λ t m)`.
#[derive(Clone, Debug)]
pub struct GepPerturbation {
    pub rho_star: f64,
    pub lambda: f64,
    pub m: Vec<f64>,
    pub alpha: f64,
    pub kappa: f64,
    pub burgers: ScalarBurgers,
}

impl GepPerturbation {
    pub fn new(rho_star: f64, k: u32, m: Vec<f64>, alpha: f64, kappa: f64, initial: Profile) -> Result<Self, PdeError> {
        let burgers = ScalarBurgers::gep(&m, initial)?;
        Ok(Self { rho_star, lambda: k as f64 - 2.0 * rho_star, m, alpha, kappa, burgers })
    }

    /// Characteristic shift `N^κ λ t m`.
    pub fn shift(&self, n: f64, t: f64) -> Vec<f64> {
        let a = n.powf(self.kappa) * self.lambda * t;
        self.m.iter().map(|v| a * v).collect()
    }

    pub fn burgers_time(&self, n: f64, t: f64) -> f64 {
        n.powf(self.kappa - self.alpha) * t
    }

    pub fn value(&self, n: f64, t: f64, u: &[f64]) -> Result<f64, PdeError> {
        let sh = self.shift(n, t);
        let v: Vec<f64> = u.iter().zip(&sh).map(|(a, b)| wrap_unit(a - b)).collect();
        Ok(self.rho_star + n.powf(-self.alpha) * self.burgers.value(self.burgers_time(n, t), &v)?)
    }

    /// Macroscopic perturbation in the moving frame: `ρ^{ini}` when `κ < α`,
    /// the Burgers solution at time `t` when `κ = α`.
    pub fn limit(&self, t: f64, u: &[f64]) -> Result<f64, PdeError> {
        if self.kappa < self.alpha {
            Ok(self.burgers.initial.value(u))
        } else {
            self.burgers.value(t, u)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constants_are_fixed_points() {
        let eq = ScalarBurgers::new(vec![-1.0], Profile::Constant { value: 0.3 }).unwrap();
        assert_eq!(eq.shock_time(), ShockTime::Never);
        assert_eq!(eq.value(5.0, &[0.2]).unwrap(), 0.3);
        let f = burgers_fv(&eq, 1.0, 64, 0.45).unwrap();
        assert!(f.values.iter().all(|v| (v - 0.3).abs() < 1e-14));
    }

    #[test]
    fn zero_time_returns_initial() {
        let eq = ScalarBurgers::gep(&[1.0], Profile::sin(0.25)).unwrap();
        for i in 0..10 {
            let u = i as f64 / 10.0;
            assert_eq!(eq.value(0.0, &[u]).unwrap(), Profile::sin(0.25).value(&[u]));
        }
    }

    #[test]
    fn shock_time_examples() {
        let eq = ScalarBurgers::gep(&[1.0], Profile::sin(0.25)).unwrap();
        assert!((eq.shock_time().finite().unwrap() - 1.0 / PI).abs() < 1e-10);
        let eq2 = ScalarBurgers::gep(&[1.0], Profile::sin(0.5)).unwrap();
        assert!((eq2.shock_time().finite().unwrap() - 0.5 / PI).abs() < 1e-10);
        assert!(eq.value(0.4, &[0.1]).is_err());
        assert_eq!(format!("{}", ShockTime::Never), "never");
    }

    /// Brute-force scan of the characteristic map `v ↦ v + 2 s c ρ_0(v)` for
    /// the first loss of monotonicity.
    fn brute_shock(p: &Profile, c: f64) -> f64 {
        let n = 20_000;
        let mut s_lo: f64 = 0.0;
        let mut s_hi: f64 = 10.0;
        for _ in 0..60 {
            let s = 0.5 * (s_lo + s_hi);
            let map = |v: f64| v + 2.0 * s * c * p.value(&[v]);
            let monotone = (0..n).all(|i| map((i + 1) as f64 / n as f64) > map(i as f64 / n as f64));
            if monotone {
                s_lo = s
            } else {
                s_hi = s
            }
        }
        s_lo
    }

    #[test]
    fn shock_time_scaling_and_brute_force() {
        let p = Profile::Series { cos: vec![0.1], sin: vec![0.2, -0.07] };
        let t1 = ScalarBurgers::new(vec![0.7], p.clone()).unwrap().shock_time().finite().unwrap();
        assert!((t1 - brute_shock(&p, 0.7)).abs() < 1e-3 * t1);
        let scaled = Profile::Series { cos: vec![0.3], sin: vec![0.6, -0.21] };
        let t3 = ScalarBurgers::new(vec![0.7], scaled).unwrap().shock_time().finite().unwrap();
        assert!((t3 - t1 / 3.0).abs() < 1e-6 * t1);
    }

    #[test]
    fn shock_time_two_dimensional_plane_wave() {
        let p = Profile::Trig { amplitude: 0.2, wave: vec![1, 1], phase: 0.0 };
        let eq = ScalarBurgers::gep(&[1.0, 0.5], p).unwrap();
        // −2c·∇ρ_0 peaks at 2·0.2·2π·(1 + 0.5).
        assert!((eq.shock_time().finite().unwrap() - 1.0 / (0.4 * 2.0 * PI * 1.5)).abs() < 1e-8);
    }

    #[test]
    fn characteristic_pde_residual() {
        let eq = ScalarBurgers::gep(&[1.0], Profile::sin(0.25)).unwrap();
        let (s, u) = (0.2, 0.37);
        let h = 1e-4;
        let v = |s: f64, u: f64| eq.value(s, &[u]).unwrap();
        let ds = (v(s + h, u) - v(s - h, u)) / (2.0 * h);
        let dx = (v(s, u + h).powi(2) - v(s, u - h).powi(2)) / (2.0 * h);
        assert!((ds - dx).abs() < 1e-6);
        assert!((eq.time_derivative(s, &[u]).unwrap() - ds).abs() < 1e-6);
        assert!((eq.grad(s, &[u]).unwrap()[0] - (v(s, u + h) - v(s, u - h)) / (2.0 * h)).abs() < 1e-6);
    }

    #[test]
    fn fv_matches_characteristics_fine_grid() {
        let eq = ScalarBurgers::gep(&[1.0], Profile::sin(1.0)).unwrap();
        let t = 0.04;
        let f = burgers_fv(&eq, t, 16384, 0.45).unwrap();
        let c = characteristics_field(&eq, t, 16384).unwrap();
        assert!(f.l1_distance(&c) < 1e-4);
        let worst = f.values.iter().zip(&c.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-3);
    }

    #[test]
    fn fv_conserves_mean_and_is_tvd() {
        let p = Profile::Bump { amplitude: 0.8, center: vec![0.3], width: 0.3, centered: false };
        let eq = ScalarBurgers::new(vec![0.6], p).unwrap();
        let f0 = burgers_fv(&eq, 0.0, 512, 0.45).unwrap();
        let mut tv = f0.total_variation_1d();
        for k in 1..6 {
            // Runs past the shock time as well.
            let f = burgers_fv(&eq, 0.2 * k as f64, 512, 0.45).unwrap();
            assert!((f.mean() - f0.mean()).abs() < 1e-14);
            let v = f.total_variation_1d();
            assert!(v <= tv + 1e-12);
            tv = v;
        }
        assert!(burgers_fv(&eq, 0.1, 64, 0.6).is_err());
    }

    #[test]
    fn fv_two_dimensional_plane_wave_reduces_to_one_dimension() {
        let p2 = Profile::Trig { amplitude: 0.3, wave: vec![1, 0], phase: 0.0 };
        let eq2 = ScalarBurgers::gep(&[1.0, 0.5], p2).unwrap();
        let eq1 = ScalarBurgers::gep(&[1.0], Profile::sin(0.3)).unwrap();
        let t = 0.1;
        let f2 = burgers_fv(&eq2, t, 128, 0.45).unwrap();
        let exact = characteristics_field(&eq2, t, 128).unwrap();
        assert!(f2.l1_distance(&exact) < 5e-3);
        assert!((eq2.value(t, &[0.3, 0.9]).unwrap() - eq1.value(t, &[0.3]).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn psystem_examples() {
        let h = TwoSystem::psystem(1.0, 0.0).unwrap();
        assert_eq!(h.lambda, [1.0, -1.0]);
        assert_eq!(h.burgers_coefficient(0), 0.0);
        assert_eq!(h.burgers_coefficient(1), 0.0);
        for (t1, t2) in [(1.0, 0.0), (2.3, -0.7), (0.4, 1.9)] {
            let s = TwoSystem::psystem(t1, t2).unwrap();
            assert!(s.eigen_residual() < 1e-12);
            let b = t2 / (4.0 * f64::sqrt(t1));
            assert!((s.burgers_coefficient(0) - b).abs() < 1e-12);
            assert!((s.burgers_coefficient(1) + b).abs() < 1e-12);
        }
        assert!(TwoSystem::psystem(0.0, 1.0).is_err());
    }

    #[test]
    fn general_jacobian_biorthogonal() {
        let s = TwoSystem::from_jacobian([[1.0, 2.0], [0.5, -0.3]], [[[0.0; 2]; 2]; 2]).unwrap();
        assert!(s.eigen_residual() < 1e-12);
        assert!(TwoSystem::from_jacobian([[1.0, 0.0], [0.0, 1.0]], [[[0.0; 2]; 2]; 2]).is_err());
    }

    #[test]
    fn chain_corrections_match_direct_formula() {
        for (t1, t2) in [(1.0, 0.0), (2.3, -0.7), (0.4, 1.9)] {
            let c = TwoSystem::psystem(t1, t2).unwrap().corrections();
            let (sq, cross) = chain_correction_coefficients(t1, t2);
            assert!((c.q1 - sq).abs() < 1e-12 && (c.q2 - sq).abs() < 1e-12);
            assert!((c.c1 - cross).abs() < 1e-12 && (c.c2 - cross).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_corrections() {
        let c = TwoSystem::from_jacobian([[0.0, -1.0], [-1.0, 0.0]], [[[0.0; 2]; 2]; 2]).unwrap().corrections();
        assert_eq!((c.c1, c.c2, c.q1, c.q2), (0.0, 0.0, 0.0, 0.0));
        let sys = TwoSystem::psystem(1.3, 0.8).unwrap();
        let corr = sys.corrections();
        let zero = ModeValues { sigma: 0.0, deriv: 0.0, primitive: 0.0 };
        let m = ModeValues { sigma: 0.4, deriv: 1.1, primitive: -0.2 };
        assert_eq!(corr.pair(0, 0, m, zero), 0.0);
        assert_eq!(corr.pair(1, 1, zero, m), 0.0);
    }

    fn chain() -> ChainPerturbation {
        ChainPerturbation::new(
            0.0,
            0.5,
            1.7,
            -0.9,
            0.3,
            0.1,
            Profile::Series { cos: vec![0.3, 0.1], sin: vec![-0.2] },
            Profile::Series { cos: vec![-0.1], sin: vec![0.25, 0.05] },
        )
        .unwrap()
    }

    #[test]
    fn primitive_derivative_is_solution() {
        let c = chain();
        let w = &c.modes[0];
        let s = 0.3 * w.shock_time().finite().unwrap();
        for i in 0..20 {
            let u = i as f64 / 20.0;
            let h = 1e-5;
            let d = (w.primitive(s, u + h).unwrap() - w.primitive(s, u - h).unwrap()) / (2.0 * h);
            assert!((d - w.value(s, &[u]).unwrap()).abs() < 1e-8);
        }
        assert!(w.primitive(s, 1.0).unwrap().abs() < 1e-13);
    }

    #[test]
    fn correction_identity_and_bracket() {
        let c = chain();
        let s = 0.5 * c.shock_time().finite().unwrap();
        let modes = [&c.modes[0], &c.modes[1]];
        for i in 0..16 {
            let (u, up) = (i as f64 / 16.0, (0.37 + 0.61 * i as f64) % 1.0);
            for k in 0..2 {
                for j in 0..2 {
                    assert!(correction_residual(&c.system, modes, k, j, s, u, up).unwrap().abs() < 1e-10);
                }
            }
            let b = c.bracket(s, u, up).unwrap();
            assert!(b[0].abs() < 1e-10 && b[1].abs() < 1e-10, "{b:?}");
        }
    }

    #[test]
    fn non_zero_mean_rejected() {
        let r = ChainPerturbation::new(0.0, 0.0, 1.0, 0.0, 0.3, 0.1, Profile::cos(0.1), Profile::Constant { value: 0.1 });
        assert!(matches!(r, Err(PdeError::NonZeroMean(_))));
    }

    #[test]
    fn harmonic_chain_has_no_corrections() {
        let h = ChainPerturbation::new(0.0, 0.0, 1.0, 0.0, 0.3, 0.1, Profile::cos(0.1), Profile::sin(0.2)).unwrap();
        assert_eq!(h.shock_time(), ShockTime::Never);
        for i in 0..8 {
            let u = i as f64 / 8.0;
            assert_eq!(h.profile(64.0, 0.3, u, true).unwrap(), h.profile(64.0, 0.3, u, false).unwrap());
            assert_eq!(h.bracket(0.7, u, 0.2).unwrap(), [0.0, 0.0]);
        }
    }

    #[test]
    fn gep_profile_examples() {
        let g = GepPerturbation::new(0.5, 1, vec![1.0], 0.25, 0.2, Profile::sin(0.25)).unwrap();
        let n = 1024.0;
        for i in 0..8 {
            let u = i as f64 / 8.0;
            assert!((g.value(n, 0.0, &[u]).unwrap() - (0.5 + n.powf(-0.25) * 0.25 * (2.0 * PI * u).sin())).abs() < 1e-15);
        }
        let flat = GepPerturbation::new(0.3, 1, vec![1.0], 0.25, 0.2, Profile::Constant { value: 0.0 }).unwrap();
        assert_eq!(flat.value(n, 2.0, &[0.4]).unwrap(), 0.3);
    }

    #[test]
    fn gep_profile_approaches_initial_in_moving_frame() {
        let g = GepPerturbation::new(0.3, 1, vec![1.0], 0.25, 0.2, Profile::sin(0.25)).unwrap();
        let (t, u) = (0.2, 0.15);
        let mut prev = f64::INFINITY;
        for k in 8..16 {
            let n = (1u64 << k) as f64;
            let sh = g.shift(n, t)[0];
            let scaled = (g.value(n, t, &[u + sh]).unwrap() - 0.3) * n.powf(0.25);
            let err = (scaled - g.limit(t, &[u]).unwrap()).abs();
            assert!(err < prev);
            prev = err;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn characteristic_value_solves_implicit_equation(u in 0.0f64..1.0, frac in 0.0f64..0.95) {
            let eq = ScalarBurgers::new(vec![0.8], Profile::Series { cos: vec![0.2], sin: vec![0.1, 0.05] }).unwrap();
            let s = frac * eq.shock_time().finite().unwrap();
            let v = eq.value(s, &[u]).unwrap();
            // ρ(s,u) = ρ_0(u − 2 s c ρ(s,u)).
            let back = eq.initial.value(&[u - 2.0 * s * 0.8 * v]);
            prop_assert!((v - back).abs() < 1e-12);
        }

        #[test]
        fn fv_preserves_constants(c in -1.0f64..1.0, a in -2.0f64..2.0) {
            let eq = ScalarBurgers::new(vec![a], Profile::Constant { value: c }).unwrap();
            let f = burgers_fv(&eq, 0.3, 32, 0.45).unwrap();
            prop_assert!(f.values.iter().all(|v| (v - c).abs() < 1e-14));
        }
    }
}
