use anyhow::{anyhow, Context, Result};
use rand::Rng;

use eqpert::chain::{ChainError, Potential, Thermodynamics};
use eqpert::numerics::rng::stream;
use eqpert::numerics::stats::loglog_fit;
use eqpert::pde::{
    burgers_fv, chain_correction_coefficients, characteristics_field, correction_residual, ChainPerturbation, ScalarBurgers, TwoSystem,
};
use eqpert::profile::Profile;

use crate::artifacts::FieldRow;
use crate::config::Config;
use crate::report::Report;
use crate::{Artifacts, Outcome};

const FV_L1_TOL: f64 = 1e-3;
const FV_MIN_ORDER: f64 = 0.9;
const BRACKET_TOL: f64 = 1e-8;
const SLOPE_TOL: f64 = 0.15;
const CORRECTION_TOL: f64 = 1e-8;
const COEFFICIENT_TOL: f64 = 1e-12;
/// Side of the tensor grid of `(u_−, u_+)` points.
const SIDE: usize = 16;

fn random_series<R: Rng>(rng: &mut R, modes: usize, amp: f64) -> Profile {
    let mut coef = |k: usize| amp * rng.gen_range(-1.0..1.0) / k as f64;
    let cos = (1..=modes).map(&mut coef).collect();
    let sin = (1..=modes).map(&mut coef).collect();
    Profile::Series { cos, sin }
}

fn grid_points() -> impl Iterator<Item = (f64, f64)> {
    (0..SIDE).flat_map(|i| (0..SIDE).map(move |j| ((i as f64 + 0.5) / SIDE as f64, (j as f64 + 0.37) / SIDE as f64)))
}

fn potential(name: &str) -> Result<Potential> {
    Potential::by_name(name).ok_or_else(|| anyhow!("unknown potential {name}"))
}

pub fn run(cfg: &Config) -> Result<Outcome> {
    let pc = cfg.pde();
    let mut report = Report::new(cfg.experiment.name(), cfg.seed);
    let mut art = Artifacts::new();

    // Scalar Burgers: characteristics against finite volumes before the shock.
    let eq = ScalarBurgers::gep(&[pc.drift], pc.profile.clone())?;
    let shock = eq.shock_time().finite().context("profile never shocks; pick a non-constant profile")?;
    let t = pc.shock_fraction * shock;
    let mut table = String::from("cells,l1_error\n");
    let (mut xs, mut errs) = (Vec::new(), Vec::new());
    let mut finest = None;
    for &cells in &pc.cells {
        let fv = burgers_fv(&eq, t, cells, pc.cfl)?;
        let ch = characteristics_field(&eq, t, cells)?;
        let e = fv.l1_distance(&ch);
        table.push_str(&format!("{cells},{e:e}\n"));
        xs.push(cells as f64);
        errs.push(e);
        finest = Some((fv, ch));
    }
    let (fv, ch) = finest.expect("at least two grids");
    let rows: Vec<FieldRow> = fv
        .centres()
        .iter()
        .zip(fv.values.iter().zip(&ch.values))
        .map(|(u, (a, b))| FieldRow { u: vec![*u], empirical: *a, macroscopic: *b, stderr: 0.0 })
        .collect();
    art.field("burgers_profile.csv", &rows);
    art.add("burgers_convergence.csv", table);
    let order = -loglog_fit(&xs, &errs).0;
    report.metric("burgers_shock_time", shock);
    report.metric("burgers_time", t);
    report.metric("burgers_l1_errors", &errs);
    let last = *pc.cells.last().expect("validated");
    report.below("burgers_l1_error", *errs.last().expect("validated"), FV_L1_TOL, format!("L¹(FV − characteristics) at {last} cells"));
    report.at_least("burgers_fv_order", order, FV_MIN_ORDER, "least-squares order over the grid sequence");

    // Chain expansion point.
    let th = Thermodynamics::new(potential(&pc.potential)?, pc.beta)?;
    let ten = th.tension(pc.r_star)?;
    report.metric("tau_prime", ten.d1);
    report.metric("tau_second", ten.d2);

    // Cancellation bracket for random smooth wave pairs.
    let mut worst_bracket: f64 = 0.0;
    let mut bracket_csv = String::from("sample,shock_time,s,max_abs_bracket\n");
    for i in 0..pc.bracket_samples {
        let mut rng = stream(cfg.seed, i as u64);
        let sm = random_series(&mut rng, 3, pc.amplitude);
        let sp = random_series(&mut rng, 3, pc.amplitude);
        let cp = ChainPerturbation::new(0.0, pc.r_star, ten.d1, ten.d2, cfg.alpha, cfg.kappa, sm, sp)?;
        let s = 0.5 * cp.shock_time().finite().unwrap_or(1.0);
        let mut w: f64 = 0.0;
        for (um, up) in grid_points() {
            let b = cp.bracket(s, um, up)?;
            w = w.max(b[0].abs()).max(b[1].abs());
        }
        bracket_csv.push_str(&format!("{i},{},{s},{w:e}\n", cp.shock_time()));
        worst_bracket = worst_bracket.max(w);
    }
    art.add("bracket.csv", bracket_csv);
    report.at_most("bracket_random_waves", worst_bracket, BRACKET_TOL, format!("max |bracket| over {} wave pairs on a {}-point grid", pc.bracket_samples, SIDE * SIDE));
    let harmonic = ChainPerturbation::new(0.0, 0.0, 1.0, 0.0, cfg.alpha, cfg.kappa, Profile::cos(pc.amplitude), Profile::sin(pc.amplitude))?;
    let mut h_worst: f64 = 0.0;
    for (um, up) in grid_points() {
        let b = harmonic.bracket(0.3, um, up)?;
        h_worst = h_worst.max(b[0].abs()).max(b[1].abs());
    }
    report.at_most("bracket_harmonic", h_worst, 0.0, "harmonic potential: bracket identically zero");

    // Lattice residual in the fixed-offset protocol t = t0 N^{−κ}.
    let cp = ChainPerturbation::new(
        0.0,
        pc.r_star,
        ten.d1,
        ten.d2,
        cfg.alpha,
        cfg.kappa,
        Profile::cos(pc.amplitude),
        Profile::sin(0.8 * pc.amplitude),
    )?;
    let incr = |a: f64, b: f64| th.tension_increment(a, b);
    let mut res_csv = String::from("N,t,max_abs_residual\n");
    let (mut ns, mut eps) = (Vec::new(), Vec::new());
    for &n in &cfg.n {
        let tn = pc.lattice_t0 * (n as f64).powf(-cfg.kappa);
        let mut w: f64 = 0.0;
        for j in 0..pc.lattice_sites {
            let e: [f64; 2] = cp.lattice_residual::<_, ChainError>(n, tn, j * n / pc.lattice_sites, &incr)?;
            w = w.max(e[0].abs()).max(e[1].abs());
        }
        res_csv.push_str(&format!("{n},{tn},{w:e}\n"));
        ns.push(n as f64);
        eps.push(w);
    }
    art.add("lattice_residual.csv", res_csv);
    let slope = loglog_fit(&ns, &eps).0;
    let target = (-1.0 + cfg.kappa - cfg.alpha).max(cfg.kappa - 3.0 * cfg.alpha);
    report.metric("lattice_residual_slope", slope);
    report.metric("lattice_residual_target", target);
    report.at_most("lattice_residual_slope", (slope - target).abs(), SLOPE_TOL, format!("log-log slope {slope:.4} against {target:.4}"));

    // Correction identity for the chain and for a generic 2×2 system.
    let mut worst_corr: f64 = 0.0;
    let chain_sys = cp.system.clone();
    let chain_modes = [&cp.modes[0], &cp.modes[1]];
    let s_chain = 0.5 * cp.shock_time().finite().unwrap_or(1.0);
    let mut rng = stream(cfg.seed, 1 << 20);
    let generic = TwoSystem::from_jacobian(
        [[1.3, 0.4], [0.7, -0.9]],
        [[[0.5, -0.2], [-0.2, 1.1]], [[-0.8, 0.3], [0.3, 0.6]]],
    )?;
    let g_modes = [
        ScalarBurgers::new(vec![generic.burgers_coefficient(0)], random_series(&mut rng, 2, 0.5))?,
        ScalarBurgers::new(vec![generic.burgers_coefficient(1)], random_series(&mut rng, 2, 0.5))?,
    ];
    let g_shock = g_modes.iter().filter_map(|m| m.shock_time().finite()).fold(1.0f64, f64::min);
    for (sys, modes, s) in [(&chain_sys, chain_modes, s_chain), (&generic, [&g_modes[0], &g_modes[1]], 0.5 * g_shock)] {
        for k in 0..2 {
            for j in 0..2 {
                for (u, up) in grid_points() {
                    worst_corr = worst_corr.max(correction_residual(sys, modes, k, j, s, u, up)?.abs());
                }
            }
        }
    }
    report.metric("generic_eigen_residual", generic.eigen_residual());
    report.at_most("correction_residual", worst_corr, CORRECTION_TOL, "transport identity of the explicit corrections, chain and generic systems");
    let c = chain_sys.corrections();
    let (q, cross) = chain_correction_coefficients(ten.d1, ten.d2);
    let coef_err = [(c.q1 - q), (c.q2 - q), (c.c1 - cross), (c.c2 - cross)].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    report.metric("chain_corrections", [c.c1, c.c2, c.q1, c.q2]);
    report.at_most("chain_correction_coefficients", coef_err, COEFFICIENT_TOL, "general corrections against −𝛕″/(8𝛕′) and −𝛕″/(4𝛕′)");
    Ok(Outcome { report, artifacts: art })
}
