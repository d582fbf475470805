//! Pairings of microscopic fields against test functions in the moving
//! frame, exact relative entropy on tiny state spaces, and numerical checks
//! of the sub-Gaussian inequalities used for both models.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::chain::{ChainState, Thermodynamics};
use crate::lattice::{wrap_unit, Torus};
use crate::numerics::quadrature::CompositeRule;
use crate::profile::Profile;

#[derive(Debug, Error, PartialEq)]
pub enum ObsError {
    #[error("distributions have lengths {0} and {1}")]
    Length(usize, usize),
    #[error("state {0} has mass under the first law but none under the reference")]
    Support(usize),
    #[error("not a probability vector (total mass {0})")]
    NotProbability(f64),
    #[error("variable not centred: mean {0}")]
    NotCentred(f64),
    #[error("E[exp(γX²)] diverges for γ = {0}")]
    Divergent(f64),
    #[error("field has {got} entries, torus has {expected}")]
    Field { got: usize, expected: usize },
}

/// `N^{α−d} Σ_x v_x φ(x/N − shift)` with exact periodic wrap of the argument.
pub fn pairing(values: &[f64], torus: &Torus, alpha: f64, shift: &[f64], phi: &Profile) -> Result<f64, ObsError> {
    if values.len() != torus.size() {
        return Err(ObsError::Field { got: values.len(), expected: torus.size() });
    }
    let d = torus.dim();
    let n = torus.side() as f64;
    let mut u = vec![0.0; d];
    let mut coords = vec![0usize; d];
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        torus.coords_into(i, &mut coords);
        for ((ui, &c), s) in u.iter_mut().zip(&coords).zip(shift) {
            *ui = wrap_unit(c as f64 / n - s);
        }
        acc += v * phi.value(&u);
    }
    Ok(acc * n.powf(alpha - d as f64))
}

/// Exclusion-process pairing of `η_x − ϱ_*`.
pub fn gep_pairing(eta: &[u8], torus: &Torus, rho_star: f64, alpha: f64, shift: &[f64], phi: &Profile) -> Result<f64, ObsError> {
    let v: Vec<f64> = eta.iter().map(|&e| e as f64 - rho_star).collect();
    pairing(&v, torus, alpha, shift, phi)
}

/// The two conserved-field projections `(r_x−𝔯_*)/2 ∓ (p_x−𝔭_*)/(2√𝛕′)`.
pub fn chain_projections(state: &ChainState, p_star: f64, r_star: f64, tau1: f64) -> [Vec<f64>; 2] {
    let s = tau1.sqrt();
    let minus = state.p.iter().zip(&state.r).map(|(p, r)| 0.5 * (r - r_star) - 0.5 * (p - p_star) / s).collect();
    let plus = state.p.iter().zip(&state.r).map(|(p, r)| 0.5 * (r - r_star) + 0.5 * (p - p_star) / s).collect();
    [minus, plus]
}

/// Chain pairings of the two projections, each in its own frame `x/N ∓ N^κ√𝛕′ t`.
pub fn chain_pairings(
    state: &ChainState,
    p_star: f64,
    r_star: f64,
    tau1: f64,
    alpha: f64,
    kappa: f64,
    t: f64,
    phi: &Profile,
) -> Result<[f64; 2], ObsError> {
    let n = state.len();
    let torus = Torus::new(1, n).map_err(|_| ObsError::Field { got: n, expected: 2 })?;
    let shift = (n as f64).powf(kappa) * tau1.sqrt() * t;
    let [m, p] = chain_projections(state, p_star, r_star, tau1);
    Ok([pairing(&m, &torus, alpha, &[shift], phi)?, pairing(&p, &torus, alpha, &[-shift], phi)?])
}

/// Fourier coefficient `N^{α−1} Σ_x v_x e^{−2πik(x/N − shift)}` of a one-dimensional field.
pub fn fourier_mode(values: &[f64], alpha: f64, shift: f64, k: i32) -> Complex64 {
    let n = values.len() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, v) in values.iter().enumerate() {
        let a = -2.0 * std::f64::consts::PI * k as f64 * (x as f64 / n - shift);
        acc += Complex64::from_polar(*v, a);
    }
    acc * n.powf(alpha - 1.0)
}

/// One relative-entropy evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyReport {
    pub t: f64,
    pub h: f64,
    pub reference: String,
    pub exact: bool,
}

fn check_probability(p: &[f64]) -> Result<(), ObsError> {
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 || p.iter().any(|v| *v < 0.0) {
        return Err(ObsError::NotProbability(total));
    }
    Ok(())
}

/// `H(μ|ν) = Σ μ log(μ/ν)` with `0 log 0 = 0`.
pub fn relative_entropy(mu: &[f64], nu: &[f64]) -> Result<f64, ObsError> {
    if mu.len() != nu.len() {
        return Err(ObsError::Length(mu.len(), nu.len()));
    }
    check_probability(mu)?;
    check_probability(nu)?;
    let mut h = 0.0;
    for (i, (&m, &n)) in mu.iter().zip(nu).enumerate() {
        if m <= 0.0 {
            continue;
        }
        if n <= 0.0 {
            return Err(ObsError::Support(i));
        }
        h += m * (m / n).ln();
    }
    Ok(h.max(0.0))
}

/// Log-spaced grid `±[10^{−3}, 10]`.
pub fn theta_grid() -> Vec<f64> {
    let k = 41;
    let pos: Vec<f64> = (0..k).map(|i| 10f64.powf(-3.0 + 4.0 * i as f64 / (k - 1) as f64)).collect();
    pos.iter().map(|t| -t).chain(pos.iter().copied()).collect()
}

fn log_sum_exp(terms: impl Iterator<Item = (f64, f64)>) -> f64 {
    // (log weight, exponent) pairs.
    let v: Vec<(f64, f64)> = terms.collect();
    let m = v.iter().map(|(lw, e)| lw + e).fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|(lw, e)| (lw + e - m).exp()).sum::<f64>().ln()
}

/// Supremum over the grid and the `θ → 0` limit, which is the variance.
fn order_from_log_mgf<F: FnMut(f64) -> f64>(grid: &[f64], var: f64, mut log_mgf: F) -> f64 {
    grid.iter().map(|&t| 2.0 * log_mgf(t) / (t * t)).fold(var.max(0.0), f64::max)
}

/// Sub-Gaussian order `sup_θ 2 log E[e^{θX}]/θ²` of a finite law.
pub fn subgaussian_order_pmf(values: &[f64], probs: &[f64]) -> Result<f64, ObsError> {
    if values.len() != probs.len() {
        return Err(ObsError::Length(values.len(), probs.len()));
    }
    check_probability(probs)?;
    let mean: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if mean.abs() > 1e-9 * scale {
        return Err(ObsError::NotCentred(mean));
    }
    let var: f64 = values.iter().zip(probs).map(|(v, p)| p * (v - mean).powi(2)).sum();
    let logp: Vec<(f64, f64)> = values.iter().zip(probs).filter(|(_, p)| **p > 0.0).map(|(v, p)| (p.ln(), *v)).collect();
    Ok(order_from_log_mgf(&theta_grid(), var, |t| log_sum_exp(logp.iter().map(|(lp, v)| (*lp, t * v)))))
}

/// Gaussian law: the scan returns the variance.
pub fn subgaussian_order_gaussian(var: f64) -> f64 {
    order_from_log_mgf(&theta_grid(), var, |t| 0.5 * var * t * t)
}

/// Law with density `f` (not necessarily normalised) supported in `[a, b]`.
pub fn subgaussian_order_density<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64, ObsError> {
    let rule = CompositeRule::new(a, b, 64, 16);
    let z = rule.integrate(&f);
    let mean = rule.integrate(|x| x * f(x)) / z;
    let sd = (rule.integrate(|x| (x - mean).powi(2) * f(x)) / z).sqrt();
    if mean.abs() > 1e-8 * sd.max(1.0) {
        return Err(ObsError::NotCentred(mean));
    }
    let pts = rule.points();
    let logw: Vec<(f64, f64)> = pts.iter().filter(|(x, w)| f(*x) * w > 0.0).map(|(x, w)| ((f(*x) * w / z).ln(), *x)).collect();
    Ok(order_from_log_mgf(&theta_grid(), sd * sd, |t| log_sum_exp(logw.iter().map(|(lw, x)| (*lw, t * x)))))
}

/// Sampler-mode estimate with a percentile bootstrap upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampledOrder {
    pub estimate: f64,
    pub ci_upper: f64,
    pub samples: usize,
}

/// Estimate from draws after empirical centring; `boot` bootstrap resamples
/// give the 97.5% upper bound.
pub fn subgaussian_order_samples<R: Rng + ?Sized>(samples: &[f64], grid: &[f64], boot: usize, rng: &mut R) -> Result<SampledOrder, ObsError> {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if mean.abs() > 5.0 * sd / (n as f64).sqrt() + 1e-12 {
        return Err(ObsError::NotCentred(mean));
    }
    let est = |xs: &mut dyn Iterator<Item = f64>| -> f64 {
        let v: Vec<f64> = xs.collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let lw = -(v.len() as f64).ln();
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
        order_from_log_mgf(grid, var, |t| log_sum_exp(v.iter().map(|x| (lw, t * (x - m)))))
    };
    let estimate = est(&mut samples.iter().copied());
    let mut boots: Vec<f64> = (0..boot).map(|_| est(&mut (0..n).map(|_| samples[rng.gen_range(0..n)]))).collect();
    boots.sort_by(|a, b| a.total_cmp(b));
    let ci_upper = if boots.is_empty() { estimate } else { boots[((boots.len() as f64 * 0.975) as usize).min(boots.len() - 1)].max(estimate) };
    Ok(SampledOrder { estimate, ci_upper, samples: n })
}

/// `E[exp(γX²)]` of a finite law.
pub fn square_exponential_pmf(values: &[f64], probs: &[f64], gamma: f64) -> Result<f64, ObsError> {
    if values.len() != probs.len() {
        return Err(ObsError::Length(values.len(), probs.len()));
    }
    Ok(values.iter().zip(probs).map(|(v, p)| p * (gamma * v * v).exp()).sum())
}

/// `E[exp(γX²)] = (1 − 2γσ²)^{−1/2}` for a centred Gaussian.
pub fn square_exponential_gaussian(var: f64, gamma: f64) -> Result<f64, ObsError> {
    let a = 1.0 - 2.0 * gamma * var;
    if a <= 0.0 {
        return Err(ObsError::Divergent(gamma));
    }
    Ok(1.0 / a.sqrt())
}

/// Outcome of the square-exponential check at `γ = 1/(4σ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SquareExponential {
    pub order: f64,
    pub gamma: f64,
    pub value: f64,
    pub holds: bool,
}

/// Scan the order of a finite law, then evaluate `E[exp(X²/(4σ²))]` and compare with 3.
pub fn check_square_exponential_pmf(values: &[f64], probs: &[f64]) -> Result<SquareExponential, ObsError> {
    let order = subgaussian_order_pmf(values, probs)?;
    if order == 0.0 {
        let value = square_exponential_pmf(values, probs, 1.0)?;
        return Ok(SquareExponential { order, gamma: f64::INFINITY, value, holds: value <= 3.0 });
    }
    let gamma = 1.0 / (4.0 * order);
    let value = square_exponential_pmf(values, probs, gamma)?;
    Ok(SquareExponential { order, gamma, value, holds: value <= 3.0 })
}

pub fn check_square_exponential_gaussian(var: f64) -> Result<SquareExponential, ObsError> {
    let order = subgaussian_order_gaussian(var);
    let gamma = 1.0 / (4.0 * order);
    let value = square_exponential_gaussian(var, gamma)?;
    Ok(SquareExponential { order, gamma, value, holds: value <= 3.0 })
}

/// Order of `F − E_{π_τ}[F]` under the chain's Gibbs law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainOrder {
    pub order: f64,
    /// Quadratic sandwich `c_− r² ≤ 2V(r) ≤ c_+ r²` on the quadrature window.
    pub c_minus: f64,
    pub c_plus: f64,
    /// `γ₀ = c_−/(16c²)` and the resulting bound `2B/γ₀`, when `|F| ≤ c|r|` is supplied.
    pub gamma0: Option<f64>,
    pub bound: Option<f64>,
}

/// Quadrature scan of the log-MGF of `F − E[F]` under `π_τ`. With a linear
/// growth constant `c`, also returns the bound obtained from the quadratic
/// sandwich of `βV` and the square-exponential moment at `γ₀ = c_−/(16c²)`.
pub fn check_chain_observable_subgaussian<F: Fn(f64) -> f64>(th: &Thermodynamics, tau: f64, f: F, c: Option<f64>) -> ChainOrder {
    let (a, b) = th.window(tau);
    let rule = CompositeRule::new(a, b, 64, 16);
    let beta = th.beta;
    let peak = -beta * (th.potential.v(th.mode(tau)) - tau * th.mode(tau));
    let w = |r: f64| (-beta * (th.potential.v(r) - tau * r) - peak).exp();
    let z = rule.integrate(w);
    let mean = rule.integrate(|r| w(r) * f(r)) / z;
    let var = rule.integrate(|r| w(r) * (f(r) - mean).powi(2)) / z;
    let pts: Vec<(f64, f64)> = rule.points().into_iter().map(|(r, wt)| (((w(r) * wt) / z).ln(), f(r) - mean)).collect();
    let order = order_from_log_mgf(&theta_grid(), var, |t| log_sum_exp(pts.iter().map(|(lw, v)| (*lw, t * v))));
    let ratio = |r: f64| if r == 0.0 { th.potential.d2v(0.0) } else { 2.0 * th.potential.v(r) / (r * r) };
    let grid: Vec<f64> = (0..=2000).map(|i| a + (b - a) * i as f64 / 2000.0).collect();
    let c_minus = grid.iter().map(|&r| ratio(r)).fold(f64::INFINITY, f64::min);
    let c_plus = grid.iter().map(|&r| ratio(r)).fold(f64::NEG_INFINITY, f64::max);
    let (gamma0, bound) = match c {
        Some(c) if c > 0.0 && c_minus > 0.0 => {
            // Scale β into the potential and the tension.
            let (cm, cp, tb) = (beta * c_minus, beta * c_plus, beta * tau);
            let g0 = cm / (16.0 * c * c);
            let big_b = (2.0 * cp / cm).sqrt() * (0.5 * tb * tb * (2.0 / cm - 1.0 / cp)).exp();
            (Some(g0), Some(2.0 * big_b / g0))
        }
        _ => (None, None),
    };
    ChainOrder { order, c_minus, c_plus, gamma0, bound }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Potential;
    use crate::gep::{master_equation, GepParams, StateSpace};
    use crate::numerics::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::{LN_2, PI};

    #[test]
    fn equilibrium_constant_pairs_to_zero() {
        let t = Torus::new(2, 8).unwrap();
        let eta = vec![1u8; 64];
        assert_eq!(gep_pairing(&eta, &t, 1.0, 0.3, &[0.37, 0.11], &Profile::sin(1.0)).unwrap(), 0.0);
        let s = ChainState::new(vec![0.2; 16], vec![0.5; 16]).unwrap();
        assert_eq!(chain_pairings(&s, 0.2, 0.5, 1.7, 0.3, 0.1, 0.4, &Profile::cos(1.0)).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn constant_test_function_counts_excess_mass() {
        let t = Torus::new(1, 100).unwrap();
        let mut rng = stream(1, 0);
        let eta: Vec<u8> = (0..100).map(|_| rng.gen_range(0..3)).collect();
        let total: f64 = eta.iter().map(|&e| e as f64).sum();
        let v = gep_pairing(&eta, &t, 0.8, 0.25, &[0.3], &Profile::Constant { value: 1.0 }).unwrap();
        assert!((v - 100f64.powf(0.25 - 1.0) * (total - 80.0)).abs() < 1e-12);
    }

    #[test]
    fn shifted_pairing_matches_rotated_field() {
        let t = Torus::new(1, 64).unwrap();
        let v: Vec<f64> = (0..64).map(|x| (x as f64 * 0.37).sin()).collect();
        let mut rot = v.clone();
        rot.rotate_left(5);
        let phi = Profile::Series { cos: vec![0.3], sin: vec![0.2, 0.1] };
        let a = pairing(&v, &t, 0.5, &[5.0 / 64.0], &phi).unwrap();
        let b = pairing(&rot, &t, 0.5, &[0.0], &phi).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(pairing(&v[..10], &t, 0.5, &[0.0], &phi).is_err());
    }

    #[test]
    fn fourier_mode_of_cosine() {
        let n = 256;
        let v: Vec<f64> = (0..n).map(|x| (2.0 * PI * x as f64 / n as f64).cos()).collect();
        let c = fourier_mode(&v, 0.0, 0.0, 1);
        assert!((c.re - 0.5).abs() < 1e-12 && c.im.abs() < 1e-12);
        let shifted = fourier_mode(&v, 0.0, 0.25, 1);
        assert!((shifted.im - 0.5).abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_examples() {
        assert_eq!(relative_entropy(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((relative_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - LN_2).abs() < 1e-15);
        assert_eq!(relative_entropy(&[0.5, 0.5], &[1.0, 0.0]), Err(ObsError::Support(1)));
        assert!(relative_entropy(&[0.5], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn entropy_along_master_equation() {
        let torus = Torus::new(1, 4).unwrap();
        let params = GepParams::new(torus, 1, vec![0.8, 0.2]).unwrap();
        let space = StateSpace::new(&params).unwrap();
        let nu = space.product_measure(&[0.5; 4]).unwrap();
        let mut mu0 = vec![0.0; nu.len()];
        mu0[space.encode(&[1, 1, 0, 0])] = 1.0;
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let t = 0.1 * k as f64;
            let mu = master_equation(&params, &mu0, t).unwrap();
            let h = relative_entropy(&mu, &nu).unwrap();
            assert!(h.is_finite() && h >= 0.0);
            assert!(h <= prev + 1e-12);
            prev = h;
        }
        let mu = master_equation(&params, &mu0, 0.5).unwrap();
        let mu2 = master_equation(&params, &mu0, 0.5 + 1e-6).unwrap();
        let d = relative_entropy(&mu, &nu).unwrap() - relative_entropy(&mu2, &nu).unwrap();
        assert!(d.abs() < 1e-5);
    }

    #[test]
    fn subgaussian_examples() {
        assert_eq!(subgaussian_order_pmf(&[0.0], &[1.0]).unwrap(), 0.0);
        let b = subgaussian_order_pmf(&[-0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!(b >= 0.25 && b <= 1.0, "{b}");
        assert!((subgaussian_order_gaussian(1.0) - 1.0).abs() < 1e-12);
        assert!(matches!(subgaussian_order_pmf(&[0.0, 1.0], &[0.5, 0.5]), Err(ObsError::NotCentred(_))));
        let g = subgaussian_order_density(|x| (-0.5 * x * x).exp(), -12.0, 12.0).unwrap();
        assert!((g - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sampler_mode_brackets_truth() {
        let mut rng = stream(9, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| if rng.gen::<bool>() { 0.5 } else { -0.5 }).collect();
        let grid: Vec<f64> = theta_grid().into_iter().filter(|t| t.abs() <= 4.0).collect();
        let s = subgaussian_order_samples(&xs, &grid, 40, &mut rng).unwrap();
        assert!(s.estimate > 0.2 && s.estimate < 0.3);
        assert!(s.ci_upper >= s.estimate);
    }

    #[test]
    fn square_exponential_examples() {
        let g = check_square_exponential_gaussian(1.0).unwrap();
        assert!((g.value - 2f64.sqrt()).abs() < 1e-12 && g.holds);
        let z = check_square_exponential_pmf(&[0.0], &[1.0]).unwrap();
        assert_eq!(z.value, 1.0);
        let b = check_square_exponential_pmf(&[-0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!(b.holds && b.value > 1.0);
        assert!(square_exponential_gaussian(1.0, 0.5).is_err());
    }

    #[test]
    fn chain_observable_orders() {
        let h = Thermodynamics::new(Potential::harmonic(), 1.0).unwrap();
        let o = check_chain_observable_subgaussian(&h, 0.0, |r| r, Some(1.0));
        assert!((o.order - 1.0).abs() < 1e-8);
        assert!(o.order <= o.bound.unwrap());
        assert_eq!(check_chain_observable_subgaussian(&h, 0.0, |_| 0.0, Some(1.0)).order, 0.0);
        let q = Thermodynamics::new(Potential::quartic(), 1.0).unwrap();
        let t = q.tension(0.3).unwrap();
        let qo = check_chain_observable_subgaussian(&q, t.tau, |r| q.potential.dv(r) - t.d1 * r, None);
        assert!(qo.order.is_finite() && qo.order > 0.0 && qo.bound.is_none());
        let lin = check_chain_observable_subgaussian(&q, t.tau, |r| 0.5 * r.sin() + 0.3 * r, Some(0.8));
        assert!(lin.order <= lin.bound.unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn pairing_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..100) {
            let t = Torus::new(1, 32).unwrap();
            let mut rng = stream(seed, 0);
            let v: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (p, q) = (Profile::sin(1.0), Profile::cos(1.0));
            let comb = Profile::Series { cos: vec![b], sin: vec![a] };
            let lhs = pairing(&v, &t, 0.3, &[0.1], &comb).unwrap();
            let rhs = a * pairing(&v, &t, 0.3, &[0.1], &p).unwrap() + b * pairing(&v, &t, 0.3, &[0.1], &q).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn constant_shift_invisible_for_centred_field(c in -3.0f64..3.0, seed in 0u64..100) {
            let t = Torus::new(1, 16).unwrap();
            let mut rng = stream(seed, 1);
            let mut v: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = v.iter().sum::<f64>() / 16.0;
            v.iter_mut().for_each(|x| *x -= m);
            let phi = Profile::sin(1.0);
            let shifted = Profile::Series { cos: vec![], sin: vec![1.0] };
            let a = pairing(&v, &t, 0.5, &[0.0], &phi).unwrap();
            let plus_c: f64 = {
                let base = pairing(&v, &t, 0.5, &[0.0], &shifted).unwrap();
                base + c * v.iter().sum::<f64>() * 16f64.powf(-0.5)
            };
            prop_assert!((a - plus_c).abs() < 1e-12);
        }

        #[test]
        fn relative_entropy_nonnegative_and_jointly_convex(seed in 0u64..500, lam in 0.0f64..1.0) {
            let mut rng = stream(seed, 2);
            let mut draw = || { let v: Vec<f64> = (0..6).map(|_| rng.gen_range(0.01..1.0)).collect(); let s: f64 = v.iter().sum(); v.into_iter().map(|x| x / s).collect::<Vec<f64>>() };
            let (m1, m2, n1, n2) = (draw(), draw(), draw(), draw());
            let h1 = relative_entropy(&m1, &n1).unwrap();
            let h2 = relative_entropy(&m2, &n2).unwrap();
            prop_assert!(h1 >= 0.0 && h2 >= 0.0);
            let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| lam * x + (1.0 - lam) * y).collect::<Vec<f64>>();
            let hm = relative_entropy(&mix(&m1, &m2), &mix(&n1, &n2)).unwrap();
            prop_assert!(hm <= lam * h1 + (1.0 - lam) * h2 + 1e-12);
        }

        #[test]
        fn hoeffding_bound_for_bounded_laws(seed in 0u64..500) {
            let mut rng = stream(seed, 3);
            let vals: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut probs: Vec<f64> = (0..5).map(|_| rng.gen_range(0.01..1.0)).collect();
            let s: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= s);
            let mean: f64 = vals.iter().zip(&probs).map(|(v, p)| v * p).sum();
            let centred: Vec<f64> = vals.iter().map(|v| v - mean).collect();
            let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            let order = subgaussian_order_pmf(&centred, &probs).unwrap();
            prop_assert!(order <= (hi - lo).powi(2) + 1e-12);
            let sq = check_square_exponential_pmf(&centred, &probs).unwrap();
            prop_assert!(sq.holds);
        }
    }
}
