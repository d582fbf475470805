//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line. Every experiment runs with its default configuration and
//! the thresholds below are re-applied here to the raw reported values.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use eqpert_cli::config::{default_config, validate, ExperimentConfig, ExperimentId};
use eqpert_cli::{execute, worker_count, Report};

const TV_MAX: f64 = 0.01;
const STATIONARITY_LEVEL: f64 = 0.01;
const GENERATOR_MAX: f64 = 1e-12;
const BURGERS_L1_MAX: f64 = 1e-3;
const BURGERS_MIN_ORDER: f64 = 0.9;
const GEP_RELATIVE_MAX: f64 = 0.2;
const RIGID_DRIFT_MAX: f64 = 0.05;
const BRACKET_MAX: f64 = 1e-8;
const SLOPE_BAND: f64 = 0.15;
const CORRECTION_MAX: f64 = 1e-8;
const COEFFICIENT_MAX: f64 = 1e-12;
const FLOW_C0: f64 = 3.0;
const SQUARE_EXP_MAX: f64 = 3.0;
const GAUSSIAN_MAX: f64 = 1e-9;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const GEP_BUDGET: Duration = Duration::from_secs(3600);

type Cached = Arc<(Report, Duration)>;

/// Each experiment runs at most once per test binary.
fn run(id: ExperimentId) -> Cached {
    static CACHE: OnceLock<Mutex<HashMap<&'static str, Arc<OnceLock<Cached>>>>> = OnceLock::new();
    let slot = {
        let mut map = CACHE.get_or_init(Default::default).lock().unwrap();
        map.entry(id.name()).or_default().clone()
    };
    slot.get_or_init(|| {
        let cfg = default_config(id);
        let raw: ExperimentConfig = toml::from_str(&cfg.to_toml()).unwrap();
        let v = validate(&raw).unwrap();
        let start = Instant::now();
        let out = execute(&v, worker_count().unwrap()).unwrap();
        Arc::new((out.report, start.elapsed()))
    })
    .clone()
}

fn value(r: &Report, name: &str) -> f64 {
    r.check(name).unwrap_or_else(|| panic!("{} reported no check {name}\n{r}", r.experiment)).value
}

fn flag(r: &Report, name: &str) -> bool {
    value(r, name) == 1.0
}

fn line(n: u32, title: &str, ok: bool, detail: String) {
    let tag = if ok { "PASS" } else { "FAIL" };
    // Written to the process handle so the line survives output capture.
    let mut out = std::io::stdout().lock();
    writeln!(out, "[acceptance] criterion {n:>2} {tag}: {title}: {detail}").unwrap();
    out.flush().unwrap();
    assert!(ok, "criterion {n} failed: {title}: {detail}");
}

#[test]
fn criterion_01_oracle_equivalence() {
    let c = run(ExperimentId::OracleValidation);
    let (r, elapsed) = (&c.0, c.1);
    let (a, b) = (value(r, "tv_K1"), value(r, "tv_K2"));
    let ok = a < TV_MAX && b < TV_MAX && elapsed < ORACLE_BUDGET;
    line(1, "exclusion law vs master equation", ok, format!("TV(K=1) = {a:.2e}, TV(K=2) = {b:.2e} < {TV_MAX}; {:.1} s", elapsed.as_secs_f64()));
}

#[test]
fn criterion_02_stationarity() {
    let c = run(ExperimentId::OracleValidation);
    let r = &c.0;
    let p = ["gep_stationarity_K1", "gep_stationarity_K2", "chain_stationarity_p", "chain_stationarity_r"].map(|n| value(r, n));
    let g = ["generator_residual_K1", "generator_residual_K2"].map(|n| value(r, n));
    let ok = p.iter().all(|v| *v >= STATIONARITY_LEVEL) && g.iter().all(|v| *v < GENERATOR_MAX);
    line(2, "stationarity of product measures", ok, format!("p-values {p:.3?} ≥ {STATIONARITY_LEVEL}; generator residuals [{}] < {GENERATOR_MAX:e}", g.map(|x| format!("{x:.1e}")).join(", ")));
}

#[test]
fn criterion_03_burgers_agreement() {
    let c = run(ExperimentId::PdeConvergence);
    let r = &c.0;
    let (e, o) = (value(r, "burgers_l1_error"), value(r, "burgers_fv_order"));
    let ok = e < BURGERS_L1_MAX && o >= BURGERS_MIN_ORDER;
    line(3, "characteristics vs finite volumes", ok, format!("L¹ error {e:.2e} < {BURGERS_L1_MAX:e} at 4096 cells, order {o:.3} ≥ {BURGERS_MIN_ORDER}"));
}

#[test]
fn criterion_04_gep_perturbation() {
    let c = run(ExperimentId::GepPerturbation);
    let (r, elapsed) = (&c.0, c.1);
    let mut ok = elapsed < GEP_BUDGET;
    let mut parts = Vec::new();
    for phi in ["one", "cos", "sin"] {
        let mono = flag(r, &format!("monotone_t0.1_{phi}"));
        let rel = value(r, &format!("relative_error_t0.1_{phi}"));
        ok &= mono && rel < GEP_RELATIVE_MAX;
        parts.push(format!("{phi}: monotone={mono}, rel={rel:.3}"));
    }
    line(4, "exclusion perturbation pairings", ok, format!("{}; {:.0} s", parts.join("; "), elapsed.as_secs_f64()));
}

#[test]
fn criterion_05_chain_perturbation() {
    let c = run(ExperimentId::ChainPerturbation);
    let r = &c.0;
    let mut ok = true;
    let mut mono = Vec::new();
    for k in ["minus", "plus"] {
        for phi in ["cos", "sin"] {
            let m = flag(r, &format!("monotone_t0.02_{k}_{phi}"));
            ok &= m;
            mono.push(format!("{k}/{phi}={m}"));
        }
    }
    let drift = value(r, "harmonic_rigid_transport");
    ok &= drift < RIGID_DRIFT_MAX;
    line(5, "chain projected pairings and harmonic transport", ok, format!("monotone {}; rigid drift {drift:.4} < {RIGID_DRIFT_MAX}", mono.join(", ")));
}

#[test]
fn criterion_06_cancellation() {
    let c = run(ExperimentId::PdeConvergence);
    let r = &c.0;
    let (b, h, s) = (value(r, "bracket_random_waves"), value(r, "bracket_harmonic"), value(r, "lattice_residual_slope"));
    let ok = b <= BRACKET_MAX && h == 0.0 && s <= SLOPE_BAND;
    line(6, "cancellation bracket and lattice residual", ok, format!("bracket {b:.1e} ≤ {BRACKET_MAX:e}, harmonic {h}, |slope − target| {s:.3} ≤ {SLOPE_BAND}"));
}

#[test]
fn criterion_07_corrections() {
    let c = run(ExperimentId::PdeConvergence);
    let r = &c.0;
    let (res, coef) = (value(r, "correction_residual"), value(r, "chain_correction_coefficients"));
    let ok = res <= CORRECTION_MAX && coef <= COEFFICIENT_MAX;
    line(7, "explicit second-order corrections", ok, format!("residual {res:.1e} ≤ {CORRECTION_MAX:e}, chain coefficients {coef:.1e} ≤ {COEFFICIENT_MAX:e}"));
}

#[test]
fn criterion_08_flow() {
    let c = run(ExperimentId::FlowAudit);
    let r = &c.0;
    let (res, l2, l1) = (value(r, "divergence_residual_exact"), value(r, "cost_l2_bounded"), value(r, "cost_l1_bounded"));
    let ok = res == 0.0 && l2 <= FLOW_C0 && l1 <= FLOW_C0;
    line(8, "flow divergence and cost", ok, format!("exact residual {res}, sup Σφ²/g_d = {l2:.4}, sup Σ|φ|/ℓ = {l1:.4}, C0 = {FLOW_C0}"));
}

#[test]
fn criterion_09_concentration() {
    let c = run(ExperimentId::ConcentrationAudit);
    let r = &c.0;
    let hoeff = flag(r, "hoeffding_order_bound") && flag(r, "hoeffding_sampled_bound");
    let sq = value(r, "square_exponential_bound");
    let chain = flag(r, "chain_observable_finite") && value(r, "chain_zero_observable") == 0.0;
    let gauss = value(r, "gaussian_closed_forms").max(value(r, "chain_harmonic_order"));
    let ok = hoeff && sq <= SQUARE_EXP_MAX && chain && gauss <= GAUSSIAN_MAX;
    line(9, "concentration inequalities", ok, format!("Hoeffding {hoeff}, max E[e^(γX²)] {sq:.4} ≤ {SQUARE_EXP_MAX}, chain orders finite {chain}, Gaussian error {gauss:.1e}"));
}

#[test]
fn criterion_10_relative_entropy() {
    let c = run(ExperimentId::OracleValidation);
    let r = &c.0;
    let ok = flag(r, "entropy_nonnegative") && flag(r, "entropy_monotone");
    line(10, "exact relative entropy", ok, "nonnegative and non-increasing against the stationary product measure; scaled trend in relative_entropy.csv".into());
}
