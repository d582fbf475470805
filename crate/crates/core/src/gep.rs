//! Generalized exclusion process on the torus: product measures, exact
//! event-driven simulation, a master-equation oracle for tiny systems and the
//! two-class coupling.

use rand::Rng;
use thiserror::Error;

use crate::lattice::{Kernel, Torus};
use crate::numerics::rng::exp_time;
use crate::numerics::SumTree;
use crate::profile::Profile;

#[derive(Debug, Error, PartialEq)]
pub enum GepError {
    #[error("capacity K must be between 1 and 255, got {0}")]
    Capacity(u32),
    #[error("expected {expected} jump rates (2d), got {got}")]
    RateCount { expected: usize, got: usize },
    #[error("jump rate {0} is negative or not finite")]
    NegativeRate(f64),
    #[error("axis {0} has p_i + p_(i+d) = 0")]
    DegenerateAxis(usize),
    #[error("drift vector m is zero; the process must be asymmetric")]
    ZeroDrift,
    #[error("density {rho} outside [0, {k}]")]
    Density { rho: f64, k: u32 },
    #[error("occupation {k} outside 0..={cap}")]
    Occupation { k: u32, cap: u32 },
    #[error("density profile leaves (0, K): value {value} at site {site}")]
    ProfileRange { value: f64, site: usize },
    #[error("state space of size (K+1)^(N^d) = {0} exceeds 2^20")]
    StateSpace(f64),
    #[error("initial distribution has length {got}, expected {expected}")]
    DistributionLength { got: usize, expected: usize },
    #[error("two-class dynamics require K = 1, got K = {0}")]
    TwoClassCapacity(u32),
    #[error("{0}")]
    Profile(#[from] crate::profile::ProfileError),
}

/// Capacity, jump rates and geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct GepParams {
    pub torus: Torus,
    pub k: u32,
    /// `p[dir]` for the directions of [`Torus::directions`].
    pub p: Vec<f64>,
}

impl GepParams {
    pub fn new(torus: Torus, k: u32, p: Vec<f64>) -> Result<Self, GepError> {
        let d = torus.dim();
        if k == 0 || k > 255 {
            return Err(GepError::Capacity(k));
        }
        if p.len() != 2 * d {
            return Err(GepError::RateCount { expected: 2 * d, got: p.len() });
        }
        if let Some(&bad) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(GepError::NegativeRate(bad));
        }
        for i in 0..d {
            if p[i] + p[i + d] <= 0.0 {
                return Err(GepError::DegenerateAxis(i));
            }
        }
        if (0..d).all(|i| p[i] == p[i + d]) {
            return Err(GepError::ZeroDrift);
        }
        Ok(Self { torus, k, p })
    }

    /// Drift `m_i = p_i − p_{i+d}`.
    pub fn drift(&self) -> Vec<f64> {
        let d = self.torus.dim();
        (0..d).map(|i| self.p[i] - self.p[i + d]).collect()
    }
}

/// `C(K,k) (ρ/K)^k (1 − ρ/K)^(K−k)`.
pub fn binomial_pmf(k_cap: u32, rho: f64, k: u32) -> Result<f64, GepError> {
    if !(0.0..=k_cap as f64).contains(&rho) {
        return Err(GepError::Density { rho, k: k_cap });
    }
    if k > k_cap {
        return Err(GepError::Occupation { k, cap: k_cap });
    }
    let q = rho / k_cap as f64;
    let mut c = 1.0;
    for j in 0..k {
        c *= (k_cap - j) as f64 / (j + 1) as f64;
    }
    Ok(c * q.powi(k as i32) * (1.0 - q).powi((k_cap - k) as i32))
}

fn sample_binomial<R: Rng + ?Sized>(rng: &mut R, k_cap: u32, rho: f64) -> u8 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for k in 0..k_cap {
        acc += binomial_pmf(k_cap, rho, k).expect("validated density");
        if u < acc {
            return k as u8;
        }
    }
    k_cap as u8
}

/// Bond rule: rate of moving from a site in state `a` to a neighbour in state `b`.
pub trait Rule: Clone {
    fn rate(&self, p: f64, a: u8, b: u8) -> f64;
    fn apply(&self, a: &mut u8, b: &mut u8);
}

/// Generalized exclusion: rate `p a (K − b)`, one particle moves.
#[derive(Clone, Copy, Debug)]
pub struct Exclusion {
    pub k: u8,
}

impl Rule for Exclusion {
    #[inline]
    fn rate(&self, p: f64, a: u8, b: u8) -> f64 {
        p * a as f64 * (self.k - b) as f64
    }
    #[inline]
    fn apply(&self, a: &mut u8, b: &mut u8) {
        *a -= 1;
        *b += 1;
    }
}

/// Two-class exclusion with `K = 1`: 0 empty, 1 first class, 2 second class.
/// First class jumps onto second class by exchange; the reverse is suppressed.
#[derive(Clone, Copy, Debug)]
pub struct TwoClass;

pub const EMPTY: u8 = 0;
pub const FIRST: u8 = 1;
pub const SECOND: u8 = 2;

impl Rule for TwoClass {
    #[inline]
    fn rate(&self, p: f64, a: u8, b: u8) -> f64 {
        if a != EMPTY && (b == EMPTY || (a == FIRST && b == SECOND)) {
            p
        } else {
            0.0
        }
    }
    #[inline]
    fn apply(&self, a: &mut u8, b: &mut u8) {
        std::mem::swap(a, b);
    }
}

/// Configuration plus bond-rate index and clock.
#[derive(Clone, Debug)]
pub struct Engine<R: Rule> {
    torus: Torus,
    p: Vec<f64>,
    rule: R,
    eta: Vec<u8>,
    rates: Vec<f64>,
    tree: SumTree,
    clock: f64,
    events: u64,
}

pub type GepState = Engine<Exclusion>;
pub type TwoClassState = Engine<TwoClass>;

impl<R: Rule> Engine<R> {
    fn build(torus: Torus, p: Vec<f64>, rule: R, eta: Vec<u8>) -> Self {
        let dirs = torus.directions();
        let size = torus.size();
        assert_eq!(eta.len(), size);
        let mut rates = vec![0.0; size * dirs];
        let mut totals = vec![0.0; size];
        for x in 0..size {
            let mut s = 0.0;
            for dir in 0..dirs {
                let r = rule.rate(p[dir], eta[x], eta[torus.neighbour(x, dir)]);
                rates[x * dirs + dir] = r;
                s += r;
            }
            totals[x] = s;
        }
        let tree = SumTree::from_weights(&totals);
        Self { torus, p, rule, eta, rates, tree, clock: 0.0, events: 0 }
    }

    pub fn eta(&self) -> &[u8] {
        &self.eta
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    /// Microscopic time.
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Stored rate of the bond from `x` in direction `dir`.
    pub fn bond_rate(&self, x: usize, dir: usize) -> f64 {
        self.rates[x * self.torus.directions() + dir]
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    #[inline]
    fn refresh_site(&mut self, x: usize) {
        let dirs = self.torus.directions();
        let a = self.eta[x];
        let mut s = 0.0;
        for dir in 0..dirs {
            let r = self.rule.rate(self.p[dir], a, self.eta[self.torus.neighbour(x, dir)]);
            self.rates[x * dirs + dir] = r;
            s += r;
        }
        if s != self.tree.get(x) {
            self.tree.set(x, s);
        }
    }

    /// Whether the stored rates equal freshly computed ones.
    pub fn index_consistent(&self) -> bool {
        let fresh = Self::build(self.torus.clone(), self.p.clone(), self.rule.clone(), self.eta.clone());
        fresh.rates == self.rates && (0..self.torus.size()).all(|x| fresh.tree.get(x) == self.tree.get(x))
    }

    /// Run the jump process until microscopic time `t_end`.
    ///
    /// When no jump is possible the state is frozen and the clock jumps to
    /// `t_end`.
    pub fn run_until<G: Rng + ?Sized>(&mut self, t_end: f64, rng: &mut G) {
        let dirs = self.torus.directions();
        while self.clock < t_end {
            let total = self.tree.total();
            if total <= 0.0 {
                self.clock = t_end;
                break;
            }
            let dt = exp_time(rng, total);
            if self.clock + dt >= t_end {
                self.clock = t_end;
                break;
            }
            self.clock += dt;
            let target: f64 = rng.gen::<f64>() * total;
            let x = self.tree.find(target);
            // Within-site choice by a fresh scan proportional to bond rates.
            let site_total = self.tree.get(x);
            let mut v: f64 = rng.gen::<f64>() * site_total;
            let mut dir = dirs;
            let mut last = 0;
            for d in 0..dirs {
                let r = self.rates[x * dirs + d];
                if r > 0.0 {
                    last = d;
                    if v < r {
                        dir = d;
                        break;
                    }
                    v -= r;
                }
            }
            if dir == dirs {
                dir = last;
            }
            let y = self.torus.neighbour(x, dir);
            let (mut a, mut b) = (self.eta[x], self.eta[y]);
            self.rule.apply(&mut a, &mut b);
            self.eta[x] = a;
            self.eta[y] = b;
            self.refresh_site(x);
            self.refresh_site(y);
            for d in 0..dirs {
                let nx = self.torus.neighbour(x, d);
                if nx != y {
                    self.refresh_site(nx);
                }
                let ny = self.torus.neighbour(y, d);
                if ny != x {
                    self.refresh_site(ny);
                }
            }
            self.events += 1;
            debug_assert!(self.events % 10_000 != 0 || self.index_consistent(), "rate index drifted");
        }
    }

    /// Run for macroscopic time `t_macro` at speed `speed` (typically `N^{1+κ}`).
    pub fn simulate_to<G: Rng + ?Sized>(&mut self, t_macro: f64, speed: f64, rng: &mut G) {
        self.run_until(t_macro * speed, rng);
    }
}

impl GepState {
    pub fn new(params: &GepParams, eta: Vec<u8>) -> Result<Self, GepError> {
        if let Some(&bad) = eta.iter().find(|&&v| v as u32 > params.k) {
            return Err(GepError::Occupation { k: bad as u32, cap: params.k });
        }
        Ok(Self::build(params.torus.clone(), params.p.clone(), Exclusion { k: params.k as u8 }, eta))
    }

    pub fn particles(&self) -> u64 {
        self.eta.iter().map(|&v| v as u64).sum()
    }
}

impl TwoClassState {
    /// Two-class state on a `K = 1` system; entries are [`EMPTY`], [`FIRST`], [`SECOND`].
    pub fn new(params: &GepParams, config: Vec<u8>) -> Result<Self, GepError> {
        if params.k != 1 {
            return Err(GepError::TwoClassCapacity(params.k));
        }
        if let Some(&bad) = config.iter().find(|&&v| v > SECOND) {
            return Err(GepError::Occupation { k: bad as u32, cap: 2 });
        }
        Ok(Self::build(params.torus.clone(), params.p.clone(), TwoClass, config))
    }

    /// First-class and second-class occupation arrays.
    pub fn classes(&self) -> (Vec<u8>, Vec<u8>) {
        (
            self.eta.iter().map(|&v| (v == FIRST) as u8).collect(),
            self.eta.iter().map(|&v| (v == SECOND) as u8).collect(),
        )
    }
}

/// Near-equilibrium initial data `ϱ_* + N^{−α} ρ^{ini}`.
#[derive(Clone, Debug)]
pub struct PerturbationSetup {
    pub params: GepParams,
    pub rho_star: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub profile: Profile,
}

impl PerturbationSetup {
    pub fn n(&self) -> f64 {
        self.params.torus.side() as f64
    }

    /// `λ = K − 2ϱ_*`.
    pub fn lambda(&self) -> f64 {
        self.params.k as f64 - 2.0 * self.rho_star
    }

    /// Time speed-up `N^{1+κ}`.
    pub fn speed(&self) -> f64 {
        self.n().powf(1.0 + self.kappa)
    }

    /// Site densities of the initial profile.
    pub fn initial_densities(&self) -> Result<Vec<f64>, GepError> {
        self.profile.check(self.params.torus.dim())?;
        let t = &self.params.torus;
        let eps = self.n().powf(-self.alpha);
        let k = self.params.k as f64;
        (0..t.size())
            .map(|x| {
                let v = self.rho_star + eps * self.profile.value(&t.position(x));
                if v > 0.0 && v < k {
                    Ok(v)
                } else {
                    Err(GepError::ProfileRange { value: v, site: x })
                }
            })
            .collect()
    }
}

/// Product measure with site densities `rho`.
pub fn sample_product<R: Rng + ?Sized>(k_cap: u32, rho: &[f64], rng: &mut R) -> Result<Vec<u8>, GepError> {
    if let Some(&bad) = rho.iter().find(|r| !(0.0..=k_cap as f64).contains(*r)) {
        return Err(GepError::Density { rho: bad, k: k_cap });
    }
    Ok(rho.iter().map(|&r| sample_binomial(rng, k_cap, r)).collect())
}

/// Local-equilibrium product initial state.
pub fn sample_initial<R: Rng + ?Sized>(setup: &PerturbationSetup, rng: &mut R) -> Result<GepState, GepError> {
    let rho = setup.initial_densities()?;
    let eta = sample_product(setup.params.k, &rho, rng)?;
    GepState::new(&setup.params, eta)
}

/// Independent sites: first class with probability `rho_star`, second class
/// with probability `second[x]`, empty otherwise.
pub fn sample_two_class<R: Rng + ?Sized>(
    params: &GepParams,
    rho_star: f64,
    second: &[f64],
    rng: &mut R,
) -> Result<TwoClassState, GepError> {
    if let Some((site, &q)) = second.iter().enumerate().find(|(_, &q)| !(q >= 0.0 && rho_star + q <= 1.0)) {
        return Err(GepError::ProfileRange { value: rho_star + q, site });
    }
    let cfg = second
        .iter()
        .map(|&q| {
            let u: f64 = rng.gen();
            if u < rho_star {
                FIRST
            } else if u < rho_star + q {
                SECOND
            } else {
                EMPTY
            }
        })
        .collect();
    TwoClassState::new(params, cfg)
}

/// `ω_x = (η_x − ϱ_x) / (ϱ_x (K − ϱ_x))`.
pub fn omega_field(eta: &[u8], rho: &[f64], k: u32) -> Vec<f64> {
    let k = k as f64;
    eta.iter().zip(rho).map(|(&e, &r)| (e as f64 - r) / (r * (k - r))).collect()
}

/// Circular averaging `ω^ℓ_x = Σ_z ω_{x+z} q(z)`.
pub fn block_average(field: &[f64], torus: &Torus, kernel: &Kernel) -> Vec<f64> {
    let d = torus.dim();
    let support = kernel.support();
    let mut out = vec![0.0; field.len()];
    let mut c = vec![0usize; d];
    let mut s = vec![0i64; d];
    for (x, o) in out.iter_mut().enumerate() {
        torus.coords_into(x, &mut c);
        let mut acc = 0.0;
        for (z, w) in &support {
            for i in 0..d {
                s[i] = c[i] as i64 + z[i] as i64;
            }
            acc += field[torus.index(&torus.wrap(&s))] * w;
        }
        *o = acc;
    }
    out
}

/// Enumerated state space `{0..K}^{T_N^d}` with base-(K+1) codes, site 0 least significant.
#[derive(Clone, Debug)]
pub struct StateSpace {
    pub params: GepParams,
    pub len: usize,
}

impl StateSpace {
    pub fn new(params: &GepParams) -> Result<Self, GepError> {
        let size = (params.k as f64 + 1.0).powi(params.torus.size() as i32);
        if size > (1u64 << 20) as f64 {
            return Err(GepError::StateSpace(size));
        }
        Ok(Self { params: params.clone(), len: size as usize })
    }

    pub fn decode(&self, mut code: usize) -> Vec<u8> {
        let b = self.params.k as usize + 1;
        (0..self.params.torus.size())
            .map(|_| {
                let v = code % b;
                code /= b;
                v as u8
            })
            .collect()
    }

    pub fn encode(&self, eta: &[u8]) -> usize {
        let b = self.params.k as usize + 1;
        eta.iter().rev().fold(0, |acc, &v| acc * b + v as usize)
    }

    /// Product measure `⊗ ν^1_{ρ_x}` as a vector over codes.
    pub fn product_measure(&self, rho: &[f64]) -> Result<Vec<f64>, GepError> {
        let k = self.params.k;
        let table: Vec<Vec<f64>> =
            rho.iter().map(|&r| (0..=k).map(|j| binomial_pmf(k, r, j)).collect::<Result<_, _>>()).collect::<Result<_, _>>()?;
        Ok((0..self.len).map(|c| self.decode(c).iter().enumerate().map(|(x, &v)| table[x][v as usize]).product()).collect())
    }

    /// Outgoing transitions `(target, rate)` of each state.
    pub fn transitions(&self) -> Vec<Vec<(usize, f64)>> {
        let t = &self.params.torus;
        let rule = Exclusion { k: self.params.k as u8 };
        (0..self.len)
            .map(|c| {
                let eta = self.decode(c);
                let mut out = Vec::new();
                for x in 0..t.size() {
                    for dir in 0..t.directions() {
                        let y = t.neighbour(x, dir);
                        if y == x {
                            continue;
                        }
                        let r = rule.rate(self.params.p[dir], eta[x], eta[y]);
                        if r > 0.0 {
                            let mut e = eta.clone();
                            e[x] -= 1;
                            e[y] += 1;
                            out.push((self.encode(&e), r));
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// `‖μ Q‖_∞`.
    pub fn generator_residual(&self, mu: &[f64]) -> f64 {
        let tr = self.transitions();
        let mut out = vec![0.0; self.len];
        for (x, row) in tr.iter().enumerate() {
            for &(y, r) in row {
                out[y] += mu[x] * r;
                out[x] -= mu[x] * r;
            }
        }
        out.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `μ_0 e^{tQ}` by uniformization, Poisson tails truncated at `1e−12`.
    pub fn evolve(&self, mu0: &[f64], t: f64) -> Result<Vec<f64>, GepError> {
        if mu0.len() != self.len {
            return Err(GepError::DistributionLength { got: mu0.len(), expected: self.len });
        }
        let tr = self.transitions();
        let exit: Vec<f64> = tr.iter().map(|row| row.iter().map(|e| e.1).sum()).collect();
        let lam = exit.iter().cloned().fold(0.0, f64::max);
        if lam == 0.0 || t == 0.0 {
            return Ok(mu0.to_vec());
        }
        let a = lam * t;
        let mut v = mu0.to_vec();
        let mut out = vec![0.0; self.len];
        let mut next = vec![0.0; self.len];
        let mut log_fact = 0.0;
        let mut mass = 0.0;
        let mut n = 0u64;
        loop {
            let w = (n as f64 * a.ln() - a - log_fact).exp();
            for (o, vi) in out.iter_mut().zip(&v) {
                *o += w * vi;
            }
            mass += w;
            // Stop past the mode once the remaining tail is negligible.
            if n as f64 > a && 1.0 - mass < 1e-12 {
                break;
            }
            if n > (a + 50.0 * a.sqrt() + 100.0) as u64 {
                break;
            }
            next.iter_mut().for_each(|x| *x = 0.0);
            for (x, row) in tr.iter().enumerate() {
                let vx = v[x];
                if vx == 0.0 {
                    continue;
                }
                next[x] += vx * (1.0 - exit[x] / lam);
                for &(y, r) in row {
                    next[y] += vx * r / lam;
                }
            }
            std::mem::swap(&mut v, &mut next);
            n += 1;
            log_fact += (n as f64).ln();
        }
        Ok(out)
    }
}

/// Exact law at time `t` (microscopic) of the process started from `mu0`.
pub fn master_equation(params: &GepParams, mu0: &[f64], t: f64) -> Result<Vec<f64>, GepError> {
    StateSpace::new(params)?.evolve(mu0, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::stream;
    use proptest::prelude::*;

    fn params(d: usize, n: usize, k: u32, p: Vec<f64>) -> GepParams {
        GepParams::new(Torus::new(d, n).unwrap(), k, p).unwrap()
    }

    #[test]
    fn params_validation() {
        let t = Torus::new(1, 4).unwrap();
        assert_eq!(GepParams::new(t.clone(), 0, vec![1.0, 0.0]).unwrap_err(), GepError::Capacity(0));
        assert_eq!(GepParams::new(t.clone(), 1, vec![1.0, 1.0]).unwrap_err(), GepError::ZeroDrift);
        assert_eq!(GepParams::new(t.clone(), 1, vec![0.0, 0.0]).unwrap_err(), GepError::DegenerateAxis(0));
        assert!(matches!(GepParams::new(t, 1, vec![1.0]), Err(GepError::RateCount { .. })));
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial_pmf(1, 0.5, 1).unwrap(), 0.5);
        let v: Vec<f64> = (0..3).map(|k| binomial_pmf(2, 1.0, k).unwrap()).collect();
        assert_eq!(v, vec![0.25, 0.5, 0.25]);
        assert_eq!(binomial_pmf(3, 0.0, 0).unwrap(), 1.0);
        assert_eq!(binomial_pmf(3, 0.0, 2).unwrap(), 0.0);
        assert!(binomial_pmf(2, 2.5, 0).is_err());
        assert!(binomial_pmf(2, 1.0, 3).is_err());
    }

    #[test]
    fn bond_rate_examples() {
        let pr = params(1, 4, 2, vec![2.0, 0.5]);
        let s = GepState::new(&pr, vec![1, 1, 0, 2]).unwrap();
        assert_eq!(s.bond_rate(0, 0), 2.0);
        assert_eq!(s.bond_rate(2, 0), 0.0);
        assert_eq!(s.bond_rate(1, 1), 0.5);
        let s = GepState::new(&pr, vec![1, 2, 0, 0]).unwrap();
        assert_eq!(s.bond_rate(0, 0), 0.0);
    }

    #[test]
    fn frozen_states() {
        let pr = params(1, 6, 2, vec![1.0, 0.3]);
        let mut rng = stream(1, 0);
        for fill in [0u8, 2] {
            let mut s = GepState::new(&pr, vec![fill; 6]).unwrap();
            s.run_until(100.0, &mut rng);
            assert_eq!(s.eta(), &[fill; 6]);
            assert_eq!(s.clock(), 100.0);
            assert_eq!(s.events(), 0);
        }
    }

    #[test]
    fn conservation_and_index_consistency() {
        let pr = params(2, 6, 3, vec![1.0, 0.2, 0.5, 0.1]);
        let mut rng = stream(2, 0);
        let eta = sample_product(3, &vec![1.3; 36], &mut rng).unwrap();
        let mut s = GepState::new(&pr, eta).unwrap();
        let n0 = s.particles();
        for k in 1..20 {
            s.run_until(k as f64 * 5.0, &mut rng);
            assert_eq!(s.particles(), n0);
            assert!(s.index_consistent());
        }
        assert!(s.events() > 1000);
    }

    #[test]
    fn sampling_is_reproducible() {
        let setup = PerturbationSetup {
            params: params(1, 64, 1, vec![1.0, 0.0]),
            rho_star: 0.5,
            alpha: 0.25,
            kappa: 0.2,
            profile: Profile::cos(1.0),
        };
        let a = sample_initial(&setup, &mut stream(9, 3)).unwrap();
        let b = sample_initial(&setup, &mut stream(9, 3)).unwrap();
        assert_eq!(a.eta(), b.eta());
        let bad = PerturbationSetup { profile: Profile::cos(10.0), ..setup };
        assert!(matches!(sample_initial(&bad, &mut stream(9, 3)), Err(GepError::ProfileRange { .. })));
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega_field(&[1], &[0.5], 1), vec![2.0]);
        assert_eq!(omega_field(&[1], &[1.0], 2), vec![0.0]);
    }

    proptest! {
        #[test]
        fn identity_re1(k in 1u32..5, a in 0u32..5, b in 0u32..5, rx in 0.01f64..0.99, ry in 0.01f64..0.99) {
            let (a, b) = (a.min(k) as u8, b.min(k) as u8);
            let kf = k as f64;
            let (rx, ry) = (rx * kf, ry * kf);
            let w = omega_field(&[a, b], &[rx, ry], k);
            let (ea, eb) = (a as f64, b as f64);
            let lhs = ea * (kf - eb) / (rx * (kf - ry)) - eb * (kf - ea) / (ry * (kf - rx));
            let rhs = kf * (w[0] - w[1] + (rx - ry) * w[0] * w[1]);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn block_average_examples() {
        let t = Torus::new(1, 8).unwrap();
        let q = Kernel::q(2, 1).unwrap();
        let mut spike = vec![0.0; 8];
        spike[0] = 1.0;
        assert_eq!(block_average(&spike, &t, &q), vec![0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.25, 0.5]);
        let c = vec![0.7; 8];
        assert!(block_average(&c, &t, &q).iter().all(|v| (v - 0.7).abs() < 1e-15));
        let p1 = Kernel::q(1, 1).unwrap();
        let f: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert_eq!(block_average(&f, &t, &p1), f);
    }

    #[test]
    fn master_equation_basics() {
        let pr = params(1, 3, 1, vec![1.0, 0.0]);
        let sp = StateSpace::new(&pr).unwrap();
        let mut mu0 = vec![0.0; sp.len];
        mu0[sp.encode(&[1, 1, 0])] = 1.0;
        assert_eq!(master_equation(&pr, &mu0, 0.0).unwrap(), mu0);
        let mu = master_equation(&pr, &mu0, 1.7).unwrap();
        assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let nu = sp.product_measure(&[0.4; 3]).unwrap();
        assert!(sp.generator_residual(&nu) < 1e-12);
        let nut = sp.evolve(&nu, 3.0).unwrap();
        assert!(nu.iter().zip(&nut).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(StateSpace::new(&params(1, 21, 1, vec![1.0, 0.0])).is_err());
    }

    /// Two-state chain: a single particle on two sites hops with known rates.
    #[test]
    fn master_equation_two_state_closed_form() {
        let pr = params(1, 2, 1, vec![1.0, 0.25]);
        let sp = StateSpace::new(&pr).unwrap();
        let (a, b) = (sp.encode(&[1, 0]), sp.encode(&[0, 1]));
        let mut mu0 = vec![0.0; sp.len];
        mu0[a] = 1.0;
        // Both directions connect the two sites, so each hop has rate 1.25.
        let t = 0.8;
        let mu = sp.evolve(&mu0, t).unwrap();
        let stay = 0.5 * (1.0 + (-2.5 * t as f64).exp());
        assert!((mu[a] - stay).abs() < 1e-12 && (mu[b] - (1.0 - stay)).abs() < 1e-12);
    }

    #[test]
    fn two_class_degenerate_reductions() {
        let pr = params(1, 16, 1, vec![1.0, 0.3]);
        let mut rng = stream(4, 0);
        let eta = sample_product(1, &vec![0.5; 16], &mut rng).unwrap();
        let mut g = GepState::new(&pr, eta.clone()).unwrap();
        let mut tc = TwoClassState::new(&pr, eta.clone()).unwrap();
        g.run_until(50.0, &mut stream(5, 0));
        tc.run_until(50.0, &mut stream(5, 0));
        assert_eq!(g.eta(), tc.eta());
        assert_eq!(g.clock().to_bits(), tc.clock().to_bits());

        let second: Vec<u8> = eta.iter().map(|&v| v * SECOND).collect();
        let mut g = GepState::new(&pr, eta).unwrap();
        let mut tc = TwoClassState::new(&pr, second).unwrap();
        g.run_until(50.0, &mut stream(6, 0));
        tc.run_until(50.0, &mut stream(6, 0));
        assert_eq!(tc.classes().1, g.eta());
    }

    #[test]
    fn two_class_conserves_each_class() {
        let pr = params(1, 32, 1, vec![1.0, 0.0]);
        let mut rng = stream(8, 0);
        let mut s = sample_two_class(&pr, 0.5, &vec![0.3; 32], &mut rng).unwrap();
        let (f0, s0) = s.classes();
        s.run_until(200.0, &mut rng);
        let (f1, s1) = s.classes();
        assert_eq!(f0.iter().map(|&v| v as u32).sum::<u32>(), f1.iter().map(|&v| v as u32).sum::<u32>());
        assert_eq!(s0.iter().map(|&v| v as u32).sum::<u32>(), s1.iter().map(|&v| v as u32).sum::<u32>());
        assert!(s.index_consistent());
        assert!(TwoClassState::new(&params(1, 4, 2, vec![1.0, 0.0]), vec![0; 4]).is_err());
    }
}
