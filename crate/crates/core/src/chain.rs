//! One-dimensional anharmonic chain with conservative noise on the stretches.
//!
//! Sites are indexed on `𝕋_N`; `r_x = q_x − q_{x−1}` is the stretch and `p_x`
//! the momentum. The Hamiltonian flow is `ṙ_x = p_x − p_{x−1}`,
//! `ṗ_x = V′(r_{x+1}) − V′(r_x)`; the noise acts on `r` only and is reversible
//! for every Gibbs state.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::numerics::quadrature::{adaptive, CompositeRule, QuadError};
use crate::pde::{ChainPerturbation, PdeError};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("potential is not uniformly convex: min V'' = {0} on the check window")]
    NotConvex(f64),
    #[error("potential needs at least a quadratic term")]
    Degree,
    #[error("inverse temperature {0} must be positive and finite")]
    Beta(f64),
    #[error("noise strength {0} must be non-negative and finite")]
    Gamma(f64),
    #[error("tension root for mean length {0} not bracketed")]
    Bracket(f64),
    #[error("chain length {0} too small (need at least 2)")]
    Length(usize),
    #[error("unstable integration: |r_{site}| = {value} at microscopic step {step}")]
    Unstable { site: usize, value: f64, step: u64 },
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Pde(#[from] PdeError),
}

/// Polynomial potential `V(r) = Σ_k c_k r^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    coeffs: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    name: String,
}

impl Potential {
    fn build(coeffs: Vec<f64>, name: &str) -> Self {
        let d1 = coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        let d2 = coeffs.iter().enumerate().skip(2).map(|(k, c)| (k * (k - 1)) as f64 * c).collect();
        Self { coeffs, d1, d2, name: name.into() }
    }

    pub fn harmonic() -> Self {
        Self::build(vec![0.0, 0.0, 0.5], "harmonic")
    }

    /// `r²/2 + r⁴/4`.
    pub fn quartic() -> Self {
        Self::build(vec![0.0, 0.0, 0.5, 0.0, 0.25], "quartic")
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self, ChainError> {
        if coeffs.len() < 3 {
            return Err(ChainError::Degree);
        }
        Ok(Self::build(coeffs, "polynomial"))
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "harmonic" => Some(Self::harmonic()),
            "quartic" => Some(Self::quartic()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_harmonic(&self) -> bool {
        self.coeffs.iter().enumerate().all(|(k, c)| k == 2 || k == 0 || *c == 0.0)
    }

    #[inline]
    fn horner(c: &[f64], r: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, a| acc * r + a)
    }

    pub fn v(&self, r: f64) -> f64 {
        Self::horner(&self.coeffs, r)
    }

    #[inline]
    pub fn dv(&self, r: f64) -> f64 {
        Self::horner(&self.d1, r)
    }

    pub fn d2v(&self, r: f64) -> f64 {
        Self::horner(&self.d2, r)
    }

    /// `min V″` over `[−w, w]` on a uniform grid.
    pub fn min_curvature(&self, w: f64) -> f64 {
        (0..=4000).map(|i| self.d2v(-w + 2.0 * w * i as f64 / 4000.0)).fold(f64::INFINITY, f64::min)
    }

    /// `max V″` over `[a, b]` on a uniform grid.
    pub fn max_curvature(&self, a: f64, b: f64) -> f64 {
        (0..=4000).map(|i| self.d2v(a + (b - a) * i as f64 / 4000.0)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Cumulants of `r` under `π_τ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cumulants {
    pub mean: f64,
    pub var: f64,
    pub third: f64,
}

/// Tension and its first two derivatives at a mean length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tension {
    pub tau: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Legendre thermodynamics of `π_τ(dr) ∝ exp(−β(V(r) − τr)) dr`.
#[derive(Clone, Debug)]
pub struct Thermodynamics {
    pub beta: f64,
    pub potential: Potential,
    /// Lower convexity bound used for the quadrature window and the rejection sampler.
    pub c_lower: f64,
}

const CHECK_WINDOW: f64 = 50.0;
const TAIL_SIGMAS: f64 = 9.0;
const PANELS: usize = 48;
const ORDER: usize = 16;

impl Thermodynamics {
    pub fn new(potential: Potential, beta: f64) -> Result<Self, ChainError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(ChainError::Beta(beta));
        }
        let c_lower = potential.min_curvature(CHECK_WINDOW);
        if !(c_lower > 0.0) {
            return Err(ChainError::NotConvex(c_lower));
        }
        Ok(Self { beta, potential, c_lower })
    }

    /// Maximiser of the density: `V′(m) = τ`.
    pub fn mode(&self, tau: f64) -> f64 {
        let v = &self.potential;
        let mut x = (tau - v.dv(0.0)) / self.c_lower;
        let (mut lo, mut hi) = (x.min(0.0) - 1.0, x.max(0.0) + 1.0);
        while v.dv(lo) > tau {
            lo -= 2.0 * (hi - lo);
        }
        while v.dv(hi) < tau {
            hi += 2.0 * (hi - lo);
        }
        x = x.clamp(lo, hi);
        for _ in 0..200 {
            let f = v.dv(x) - tau;
            if f > 0.0 {
                hi = x
            } else {
                lo = x
            }
            let mut next = x - f / v.d2v(x);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
                return next;
            }
            x = next;
        }
        x
    }

    /// Truncation window outside which the density is below `e^{−40}` of its peak.
    pub fn window(&self, tau: f64) -> (f64, f64) {
        let m = self.mode(tau);
        let w = TAIL_SIGMAS / (self.beta * self.c_lower).sqrt();
        (m - w, m + w)
    }

    /// Largest `V″` on the truncation window.
    pub fn c_upper(&self, tau: f64) -> f64 {
        let (a, b) = self.window(tau);
        self.potential.max_curvature(a, b)
    }

    fn log_weight(&self, tau: f64, r: f64) -> f64 {
        -self.beta * (self.potential.v(r) - tau * r)
    }

    /// `Z(τ)` by adaptive Gauss–Kronrod to relative tolerance `1e−10`.
    pub fn partition_function(&self, tau: f64) -> Result<f64, ChainError> {
        let (a, b) = self.window(tau);
        let m = self.mode(tau);
        let peak = self.log_weight(tau, m);
        let i = adaptive(|r| (self.log_weight(tau, r) - peak).exp(), a, b, 1e-10)?;
        Ok(i * peak.exp())
    }

    fn rule(&self, tau: f64) -> (CompositeRule, f64) {
        let (a, b) = self.window(tau);
        (CompositeRule::new(a, b, PANELS, ORDER), self.log_weight(tau, self.mode(tau)))
    }

    /// `log Z(τ)` with a fixed composite Gauss rule.
    pub fn log_partition(&self, tau: f64) -> f64 {
        let (rule, peak) = self.rule(tau);
        peak + rule.integrate(|r| (self.log_weight(tau, r) - peak).exp()).ln()
    }

    /// Gibbs potential `G(τ) = β^{−1} log Z(τ)`.
    pub fn gibbs_potential(&self, tau: f64) -> f64 {
        self.log_partition(tau) / self.beta
    }

    /// `E_{π_τ}[f(r)]`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, tau: f64, mut f: F) -> f64 {
        let (rule, peak) = self.rule(tau);
        let z = rule.integrate(|r| (self.log_weight(tau, r) - peak).exp());
        rule.integrate(|r| (self.log_weight(tau, r) - peak).exp() * f(r)) / z
    }

    pub fn cumulants(&self, tau: f64) -> Cumulants {
        let mean = self.expect(tau, |r| r);
        let var = self.expect(tau, |r| (r - mean).powi(2));
        let third = self.expect(tau, |r| (r - mean).powi(3));
        Cumulants { mean, var, third }
    }

    /// `r̄(τ) = G′(τ)`.
    pub fn mean_length(&self, tau: f64) -> f64 {
        self.expect(tau, |r| r)
    }

    /// Solve `r̄(τ) = r` by bracketing and safeguarded Newton; derivatives
    /// `𝛕′ = 1/G″` and `𝛕″ = −G‴/G″³` with `G″ = β κ₂`, `G‴ = β² κ₃`.
    pub fn tension(&self, r: f64) -> Result<Tension, ChainError> {
        if !r.is_finite() {
            return Err(ChainError::Bracket(r));
        }
        let guess = self.potential.dv(r);
        let mut step = 1.0;
        let (mut lo, mut hi) = (guess - step, guess + step);
        let mut tries = 0;
        while self.mean_length(lo) > r || self.mean_length(hi) < r {
            step *= 2.0;
            lo = guess - step;
            hi = guess + step;
            tries += 1;
            if tries > 60 {
                return Err(ChainError::Bracket(r));
            }
        }
        let mut tau = guess.clamp(lo, hi);
        for _ in 0..200 {
            let c = self.cumulants(tau);
            let f = c.mean - r;
            if f > 0.0 {
                hi = tau
            } else {
                lo = tau
            }
            let mut next = tau - f / (self.beta * c.var);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - tau).abs();
            tau = next;
            if step <= 4.0 * f64::EPSILON * (1.0 + tau.abs()) || hi - lo <= 4.0 * f64::EPSILON * (1.0 + tau.abs()) {
                break;
            }
        }
        let c = self.cumulants(tau);
        let g2 = self.beta * c.var;
        let g3 = self.beta * self.beta * c.third;
        Ok(Tension { tau, d1: 1.0 / g2, d2: -g3 / g2.powi(3) })
    }

    /// `𝛕(b) − 𝛕(a)` as `∫_a^b 𝛕′` by two-point Gauss, accurate for nearby
    /// arguments where differencing two inversions would lose digits.
    pub fn tension_increment(&self, a: f64, b: f64) -> Result<f64, ChainError> {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        if h == 0.0 {
            return Ok(0.0);
        }
        let g = h / 3f64.sqrt();
        Ok(h * (self.tension(m - g)?.d1 + self.tension(m + g)?.d1))
    }

    /// Audit table with header `tau,Z,G,rbar`.
    pub fn table_csv(&self, taus: &[f64]) -> String {
        let mut out = String::from("tau,Z,G,rbar\n");
        for &t in taus {
            let lz = self.log_partition(t);
            out.push_str(&format!("{t},{},{},{}\n", lz.exp(), lz / self.beta, self.mean_length(t)));
        }
        out
    }

    /// Exact rejection sampler from `π_τ` with a Gaussian proposal of
    /// precision `β c_−` at the mode.
    pub fn sample_rejection<R: Rng + ?Sized>(&self, tau: f64, rng: &mut R) -> f64 {
        let m = self.mode(tau);
        let sd = 1.0 / (self.beta * self.c_lower).sqrt();
        let h = |r: f64| self.potential.v(r) - tau * r - 0.5 * self.c_lower * (r - m) * (r - m);
        let hm = h(m);
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let r = m + sd * z;
            let u: f64 = rng.gen();
            if u.ln() <= -self.beta * (h(r) - hm) {
                return r;
            }
        }
    }
}

/// Inverse-CDF sampler for a fixed `π_τ` with monotone cubic interpolation.
#[derive(Clone, Debug)]
pub struct GibbsTable {
    pub tau: f64,
    cdf: Vec<f64>,
    r: Vec<f64>,
    slope: Vec<f64>,
}

pub const TABLE_NODES: usize = 4096;

impl GibbsTable {
    pub fn new(th: &Thermodynamics, tau: f64) -> Self {
        let (a, b) = th.window(tau);
        let peak = th.log_weight(tau, th.mode(tau));
        let n = TABLE_NODES;
        let h = (b - a) / (n - 1) as f64;
        let r: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
        let (gx, gw) = crate::numerics::quadrature::gauss_legendre(8);
        let mut cdf = vec![0.0; n];
        for i in 1..n {
            let (lo, hi) = (r[i - 1], r[i]);
            let piece: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(x, w)| 0.5 * (hi - lo) * w * (th.log_weight(tau, 0.5 * (lo + hi) + 0.5 * (hi - lo) * x) - peak).exp())
                .sum();
            cdf[i] = cdf[i - 1] + piece;
        }
        let total = cdf[n - 1];
        for c in cdf.iter_mut() {
            *c /= total;
        }
        // Fritsch–Carlson slopes of r as a function of the CDF.
        let delta: Vec<f64> = (0..n - 1).map(|i| (r[i + 1] - r[i]) / (cdf[i + 1] - cdf[i]).max(1e-300)).collect();
        let mut slope = vec![0.0; n];
        slope[0] = delta[0];
        slope[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            let (d0, d1) = (delta[i - 1], delta[i]);
            let (h0, h1) = (cdf[i] - cdf[i - 1], cdf[i + 1] - cdf[i]);
            slope[i] = if h0 <= 0.0 || h1 <= 0.0 {
                0.0
            } else {
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                (w1 + w2) / (w1 / d0 + w2 / d1)
            };
        }
        Self { tau, cdf, r, slope }
    }

    /// Interpolated CDF inverse at `u ∈ [0,1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, n - 1) - 1;
        let h = self.cdf[i + 1] - self.cdf[i];
        if h <= 0.0 {
            return self.r[i];
        }
        let t = ((u - self.cdf[i]) / h).clamp(0.0, 1.0);
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.r[i]
            + (t3 - 2.0 * t2 + t) * h * self.slope[i]
            + (-2.0 * t3 + 3.0 * t2) * self.r[i + 1]
            + (t3 - t2) * h * self.slope[i + 1]
    }

    /// CDF by linear interpolation between nodes.
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.r.len();
        if x <= self.r[0] {
            return 0.0;
        }
        if x >= self.r[n - 1] {
            return 1.0;
        }
        let h = self.r[1] - self.r[0];
        let i = (((x - self.r[0]) / h) as usize).min(n - 2);
        let t = (x - self.r[i]) / h;
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen())
    }
}

/// Microscopic configuration `(p, r)` on `𝕋_N` and its macroscopic clock.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    pub clock: f64,
}

impl ChainState {
    pub fn new(p: Vec<f64>, r: Vec<f64>) -> Result<Self, ChainError> {
        if p.len() != r.len() || p.len() < 2 {
            return Err(ChainError::Length(p.len().min(r.len())));
        }
        Ok(Self { p, r, clock: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn total_momentum(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn total_length(&self) -> f64 {
        self.r.iter().sum()
    }

    /// `Σ p_x²/2 + V(r_x)`.
    pub fn hamiltonian(&self, v: &Potential) -> f64 {
        self.p.iter().zip(&self.r).map(|(p, r)| 0.5 * p * p + v.v(*r)).sum()
    }

    /// Snapshot with header `x,p,r`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,p,r\n");
        for (x, (p, r)) in self.p.iter().zip(&self.r).enumerate() {
            out.push_str(&format!("{x},{p},{r}\n"));
        }
        out
    }
}

/// Homogeneous Gibbs state: `p_x ~ N(p̄, 1/β)`, `r_x ~ π_τ` from the table.
pub fn sample_gibbs<R: Rng + ?Sized>(th: &Thermodynamics, p_bar: f64, tau: f64, n: usize, rng: &mut R) -> Result<ChainState, ChainError> {
    let table = GibbsTable::new(th, tau);
    let sd = 1.0 / th.beta.sqrt();
    let mut p = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        p.push(p_bar + sd * z);
        r.push(table.sample(rng));
    }
    ChainState::new(p, r)
}

/// Product Gibbs state with local parameters `(p̄_x, 𝛕(r̄_x))` read from the
/// first-order perturbation profile at `t = 0`.
pub fn sample_perturbed_initial<R: Rng + ?Sized>(
    th: &Thermodynamics,
    setup: &ChainPerturbation,
    n: usize,
    rng: &mut R,
) -> Result<ChainState, ChainError> {
    let sd = 1.0 / th.beta.sqrt();
    let mut p = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for x in 0..n {
        let (pb, rb) = setup.profile(n as f64, 0.0, x as f64 / n as f64, false)?;
        let tau = th.tension(rb)?.tau;
        let z: f64 = rng.sample(StandardNormal);
        p.push(pb + sd * z);
        r.push(th.sample_rejection(tau, rng));
    }
    ChainState::new(p, r)
}

/// Midpoint `N^{2κ+2α}` of the admissible window `N^{5κ+4α−1} ≪ γ_N ≪ N^{1−κ}`
/// on the logarithmic scale.
pub fn gamma_midpoint(n: f64, alpha: f64, kappa: f64) -> f64 {
    n.powf(0.5 * ((5.0 * kappa + 4.0 * alpha - 1.0) + (1.0 - kappa)))
}

/// Default microscopic step `min(0.1, 0.1/(βγ))`.
pub fn default_step(beta: f64, gamma: f64) -> f64 {
    if beta * gamma > 1.0 {
        0.1 / (beta * gamma)
    } else {
        0.1
    }
}

/// Strang-split integrator: half noise step, leapfrog, half noise step.
#[derive(Clone, Debug)]
pub struct Dynamics {
    pub potential: Potential,
    pub beta: f64,
    pub gamma: f64,
    /// Time change `N^{1+κ}` from macroscopic to microscopic time.
    pub speed: f64,
    /// Microscopic step upper bound.
    pub dt: f64,
    /// Abort once any `|r_x|` exceeds this.
    pub guard: f64,
    force: Vec<f64>,
    noise: Vec<f64>,
    steps: u64,
}

impl Dynamics {
    pub fn new(potential: Potential, beta: f64, gamma: f64, speed: f64) -> Result<Self, ChainError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(ChainError::Beta(beta));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(ChainError::Gamma(gamma));
        }
        Ok(Self {
            potential,
            beta,
            gamma,
            speed,
            dt: default_step(beta, gamma),
            guard: 1e3,
            force: Vec::new(),
            noise: Vec::new(),
            steps: 0,
        })
    }

    pub fn with_step(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn forces(&mut self, r: &[f64]) {
        self.force.clear();
        self.force.extend(r.iter().map(|&x| self.potential.dv(x)));
    }

    /// Leapfrog on the Hamiltonian part over microscopic time `h`.
    pub fn leapfrog(&mut self, s: &mut ChainState, h: f64) {
        self.forces(&s.r);
        kick(&mut s.p, &self.force, 0.5 * h);
        let n = s.len();
        let last = s.p[n - 1];
        for x in (1..n).rev() {
            s.r[x] += h * (s.p[x] - s.p[x - 1]);
        }
        s.r[0] += h * (s.p[0] - last);
        self.forces(&s.r);
        kick(&mut s.p, &self.force, 0.5 * h);
    }

    /// Euler–Maruyama step of `dr_x = (βγ/2)ΔV′(r)_x dt + √γ (dB^{x−1} − dB^x)`.
    pub fn noise_step<R: Rng + ?Sized>(&mut self, s: &mut ChainState, h: f64, rng: &mut R) {
        if self.gamma == 0.0 {
            return;
        }
        let n = s.len();
        self.forces(&s.r);
        self.noise.clear();
        let amp = (self.gamma * h).sqrt();
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            self.noise.push(amp * z);
        }
        let c = 0.5 * self.beta * self.gamma * h;
        let (f, w) = (&self.force, &self.noise);
        s.r[0] += c * (f[1] + f[n - 1] - 2.0 * f[0]) + w[n - 1] - w[0];
        for x in 1..n - 1 {
            s.r[x] += c * (f[x + 1] + f[x - 1] - 2.0 * f[x]) + w[x - 1] - w[x];
        }
        s.r[n - 1] += c * (f[0] + f[n - 2] - 2.0 * f[n - 1]) + w[n - 2] - w[n - 1];
    }

    /// Advance by macroscopic time `t`, i.e. microscopic time `speed·t`.
    pub fn integrate<R: Rng + ?Sized>(&mut self, s: &mut ChainState, t: f64, rng: &mut R) -> Result<(), ChainError> {
        let micro = t * self.speed;
        if micro <= 0.0 {
            return Ok(());
        }
        let k = (micro / self.dt).ceil().max(1.0) as u64;
        let h = micro / k as f64;
        for _ in 0..k {
            self.noise_step(s, 0.5 * h, rng);
            self.leapfrog(s, h);
            self.noise_step(s, 0.5 * h, rng);
            self.steps += 1;
            if self.steps % 64 == 0 {
                self.check(s)?;
            }
        }
        self.check(s)?;
        s.clock += t;
        Ok(())
    }

    fn check(&self, s: &ChainState) -> Result<(), ChainError> {
        for (x, r) in s.r.iter().enumerate() {
            if !(r.abs() <= self.guard) {
                return Err(ChainError::Unstable { site: x, value: *r, step: self.steps });
            }
        }
        Ok(())
    }
}

/// `p_x += c (F_{x+1} − F_x)` on the torus.
fn kick(p: &mut [f64], f: &[f64], c: f64) {
    let n = p.len();
    for x in 0..n - 1 {
        p[x] += c * (f[x + 1] - f[x]);
    }
    p[n - 1] += c * (f[0] - f[n - 1]);
}
