use anyhow::Result;

use eqpert::chain::{Potential, Thermodynamics};
use eqpert::gep::{binomial_pmf, sample_product};
use eqpert::numerics::rng::stream;
use eqpert::observables::{
    check_chain_observable_subgaussian, check_square_exponential_gaussian, check_square_exponential_pmf, subgaussian_order_density,
    subgaussian_order_gaussian, subgaussian_order_pmf, subgaussian_order_samples, theta_grid,
};

use crate::config::Config;
use crate::report::Report;
use crate::{Artifacts, Outcome};

const CLOSED_FORM_TOL: f64 = 1e-9;

pub fn run(cfg: &Config) -> Result<Outcome> {
    let cc = cfg.concentration();
    let mut report = Report::new(cfg.experiment.name(), cfg.seed);
    let mut art = Artifacts::new();
    let mut csv = String::from("law,order,hoeffding,sharp_hoeffding,gamma,square_exponential,sampled_order,sampled_ci_upper\n");
    let mut hoeffding_ok = true;
    let mut sampled_ok = true;
    let mut worst_sqexp: f64 = 0.0;
    let grid = theta_grid();
    for (ci, &cap) in cc.binomial_caps.iter().enumerate() {
        for (di, &frac) in cc.densities.iter().enumerate() {
            let rho = frac * cap as f64;
            let probs: Vec<f64> = (0..=cap).map(|k| binomial_pmf(cap, rho, k)).collect::<Result<_, _>>()?;
            let values: Vec<f64> = (0..=cap).map(|k| k as f64 - rho).collect();
            let order = subgaussian_order_pmf(&values, &probs)?;
            let range = cap as f64;
            // Lemma form: order (b − a)²; sharp Hoeffding form: (b − a)²/4 per unit range, additive over K sites.
            let hoeff = range * range;
            let sharp = cap as f64 / 4.0;
            hoeffding_ok &= order <= hoeff && order <= sharp * (1.0 + 1e-12);
            let sq = check_square_exponential_pmf(&values, &probs)?;
            worst_sqexp = worst_sqexp.max(sq.value);
            let mut rng = stream(cfg.seed, (ci * 1000 + di) as u64);
            let draws = sample_product(cap, &vec![rho; cc.samples], &mut rng)?;
            let centred: Vec<f64> = draws.iter().map(|&k| k as f64 - rho).collect();
            let sampled = subgaussian_order_samples(&centred, &grid, cc.bootstrap, &mut rng)?;
            sampled_ok &= sampled.ci_upper <= hoeff;
            csv.push_str(&format!(
                "binomial(K={cap};rho={rho}),{order},{hoeff},{sharp},{},{},{},{}\n",
                sq.gamma, sq.value, sampled.estimate, sampled.ci_upper
            ));
        }
    }
    report.flag("hoeffding_order_bound", hoeffding_ok, "exact pmf scans of centred binomial laws against (b−a)² and K/4");
    report.flag("hoeffding_sampled_bound", sampled_ok, "bootstrap upper bound of sampled orders against (b−a)²");
    report.at_most("square_exponential_bound", worst_sqexp, 3.0, "largest E[exp(X²/(4σ²))] over the finite laws");

    let var = 2.5;
    let g_order = subgaussian_order_gaussian(var);
    let g_sq = check_square_exponential_gaussian(var)?;
    let std_density = |x: f64| (-0.5 * x * x).exp();
    let d_order = subgaussian_order_density(std_density, -40.0, 40.0)?;
    let gauss_err = (g_order - var).abs().max((g_sq.value - 2f64.sqrt()).abs()).max((d_order - 1.0).abs());
    csv.push_str(&format!("gaussian(var={var}),{g_order},,,{},{},,\n", g_sq.gamma, g_sq.value));
    csv.push_str(&format!("gaussian-density(var=1),{d_order},,,,,,\n"));
    report.at_most("gaussian_closed_forms", gauss_err, CLOSED_FORM_TOL, "order σ², E[exp(X²/(4σ²))] = √2, quadrature scan of N(0,1)");

    let harmonic = Thermodynamics::new(Potential::harmonic(), 1.0)?;
    let h = check_chain_observable_subgaussian(&harmonic, 0.0, |r| r, Some(1.0));
    report.at_most("chain_harmonic_order", (h.order - 1.0).abs(), CLOSED_FORM_TOL, "F(r) = r under the harmonic Gibbs law has order 1");
    let zero = check_chain_observable_subgaussian(&harmonic, 0.0, |_| 0.0, None);
    report.at_most("chain_zero_observable", zero.order, 0.0, "F ≡ 0 has order 0");

    let quartic = Thermodynamics::new(Potential::quartic(), 1.0)?;
    let mut chain_ok = true;
    let mut chain_csv = String::from("potential,tau,observable,order,c_minus,c_plus,gamma0,bound\n");
    for &tau in &cc.taus {
        let r_star = quartic.mean_length(tau);
        let slope = quartic.tension(r_star)?.d1;
        let linear = |r: f64| r;
        // Linearised force, capped at growth 2|r| so the linear-growth hypothesis holds.
        let capped = move |r: f64| {
            let v = r + r * r * r - slope * r;
            v.signum() * v.abs().min(2.0 * r.abs())
        };
        let uncapped = move |r: f64| r + r * r * r - slope * r;
        for (name, res) in [
            ("r", check_chain_observable_subgaussian(&quartic, tau, linear, Some(1.0))),
            ("capped_force", check_chain_observable_subgaussian(&quartic, tau, capped, Some(2.0))),
            ("force", check_chain_observable_subgaussian(&quartic, tau, uncapped, None)),
        ] {
            let finite = res.order.is_finite() && res.order > 0.0;
            let within = res.bound.map_or(true, |b| res.order <= b);
            chain_ok &= finite && within;
            chain_csv.push_str(&format!(
                "quartic,{tau},{name},{},{},{},{},{}\n",
                res.order,
                res.c_minus,
                res.c_plus,
                res.gamma0.map_or(String::new(), |v| v.to_string()),
                res.bound.map_or(String::new(), |v| v.to_string())
            ));
        }
    }
    report.flag("chain_observable_finite", chain_ok, "quartic Gibbs laws: finite orders, within the explicit bound when |F| ≤ c|r|");
    art.add("orders.csv", csv);
    art.add("chain_orders.csv", chain_csv);
    Ok(Outcome { report, artifacts: art })
}
