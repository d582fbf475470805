//! Experiment configuration: parsing, defaults and cross-field validation.

use std::fmt;
use std::path::{Path, PathBuf};

use eqpert::gep::GepParams;
use eqpert::lattice::Torus;
use eqpert::pde::{GepPerturbation, ShockTime};
use eqpert::profile::Profile;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    GepPerturbation,
    ChainPerturbation,
    TwoClass,
    OracleValidation,
    PdeConvergence,
    FlowAudit,
    ConcentrationAudit,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::GepPerturbation,
        ExperimentId::ChainPerturbation,
        ExperimentId::TwoClass,
        ExperimentId::OracleValidation,
        ExperimentId::PdeConvergence,
        ExperimentId::FlowAudit,
        ExperimentId::ConcentrationAudit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::GepPerturbation => "gep-perturbation",
            ExperimentId::ChainPerturbation => "chain-perturbation",
            ExperimentId::TwoClass => "two-class",
            ExperimentId::OracleValidation => "oracle-validation",
            ExperimentId::PdeConvergence => "pde-convergence",
            ExperimentId::FlowAudit => "flow-audit",
            ExperimentId::ConcentrationAudit => "concentration-audit",
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            ExperimentId::GepPerturbation => "exclusion-process perturbation pairings across N against the Burgers limit",
            ExperimentId::ChainPerturbation => "anharmonic-chain projected pairings and a harmonic rigid-transport control",
            ExperimentId::TwoClass => "second-class particle density along characteristics (K = 1)",
            ExperimentId::OracleValidation => "simulator vs master equation, stationarity tests, exact relative entropy",
            ExperimentId::PdeConvergence => "Burgers characteristics vs finite volumes, correction and cancellation identities",
            ExperimentId::FlowAudit => "exact divergence identity and cost constants of the constructed flows",
            ExperimentId::ConcentrationAudit => "sub-Gaussian orders and square-exponential moments of built-in laws",
        }
    }

    /// Seed used when none is configured: SHA-256 of the id, first eight
    /// bytes shifted to 63 bits so the value fits a TOML integer.
    pub fn default_seed(&self) -> u64 {
        let h = Sha256::digest(self.name().as_bytes());
        u64::from_le_bytes(h[..8].try_into().expect("digest has 32 bytes")) >> 1
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GepSection {
    pub d: usize,
    pub k: u32,
    /// `2d` rates: `+e_1..+e_d` then `−e_1..−e_d`.
    pub rates: Vec<f64>,
    pub rho_star: f64,
    pub profile: Profile,
    /// Names from `one`, `cos`, `sin`.
    pub test_functions: Vec<String>,
    /// Cells per axis for the emitted field CSVs.
    pub field_cells: usize,
}

impl Default for GepSection {
    fn default() -> Self {
        Self {
            d: 1,
            k: 1,
            rates: vec![1.0, 0.0],
            rho_star: 0.5,
            profile: Profile::sin(0.25),
            test_functions: vec!["one".into(), "cos".into(), "sin".into()],
            field_cells: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    /// `harmonic`, `quartic`, or polynomial coefficients via `coefficients`.
    pub potential: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    pub beta: f64,
    pub p_star: f64,
    pub r_star: f64,
    pub sigma_minus: Profile,
    pub sigma_plus: Profile,
    /// Noise strength; the window midpoint for each N when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Microscopic step; `min(0.1, 0.1/(βγ))` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub test_functions: Vec<String>,
    pub field_cells: usize,
    /// Harmonic rigid-transport control run (skipped when `control_replicas = 0`).
    pub control_n: usize,
    pub control_replicas: usize,
    pub control_time: f64,
    pub control_amplitude: f64,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            potential: "quartic".into(),
            coefficients: None,
            beta: 1.0,
            p_star: 0.0,
            r_star: 0.5,
            sigma_minus: Profile::cos(1.0),
            sigma_plus: Profile::sin(1.0),
            gamma: None,
            dt: None,
            test_functions: vec!["cos".into(), "sin".into()],
            field_cells: 32,
            control_n: 2048,
            control_replicas: 128,
            control_time: 0.0066,
            control_amplitude: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    /// Drift `m` of `∂_s ρ − m ∂_u(ρ²) = 0`.
    pub drift: f64,
    pub profile: Profile,
    /// Evaluation time as a fraction of the shock time.
    pub shock_fraction: f64,
    pub cells: Vec<usize>,
    pub cfl: f64,
    /// Random smooth wave pairs for the cancellation bracket.
    pub bracket_samples: usize,
    pub grid: usize,
    /// Chain parameters for the correction and lattice checks.
    pub potential: String,
    pub beta: f64,
    pub r_star: f64,
    pub amplitude: f64,
    /// Lattice residual evaluated at `t = t0 N^{−κ}`.
    pub lattice_t0: f64,
    pub lattice_sites: usize,
}

impl Default for PdeSection {
    fn default() -> Self {
        Self {
            drift: 1.0,
            profile: Profile::sin(0.25),
            shock_fraction: 0.5,
            cells: vec![256, 512, 1024, 2048, 4096],
            cfl: 0.45,
            bracket_samples: 10,
            grid: 256,
            potential: "quartic".into(),
            beta: 1.0,
            r_star: 0.5,
            amplitude: 1.0,
            lattice_t0: 0.1,
            lattice_sites: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub ks: Vec<u32>,
    pub rates: Vec<f64>,
    /// Initial configuration per capacity, in the same order as `ks`.
    pub initial: Vec<Vec<u8>>,
    /// Microscopic time of the law comparison.
    pub time: f64,
    pub stationarity_samples: usize,
    pub stationarity_time: f64,
    /// Density of the stationarity test as a fraction of `K`.
    pub stationarity_fraction: f64,
    pub stationarity_n: usize,
    pub chain_potential: String,
    pub chain_beta: f64,
    pub chain_tau: f64,
    pub chain_p_bar: f64,
    pub chain_gamma: f64,
    pub chain_dt: f64,
    pub residual_n: usize,
    pub entropy_n: Vec<usize>,
    pub entropy_times: Vec<f64>,
    pub entropy_profile: Profile,
    pub entropy_rho_star: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            ks: vec![1, 2],
            rates: vec![0.7, 0.3],
            initial: vec![vec![1, 1, 0, 0], vec![2, 1, 1, 0]],
            time: 0.5,
            stationarity_samples: 100_000,
            stationarity_time: 2.0,
            stationarity_fraction: 0.4,
            stationarity_n: 8,
            chain_potential: "quartic".into(),
            chain_beta: 1.0,
            chain_tau: 0.3,
            chain_p_bar: 0.2,
            chain_gamma: 1.0,
            chain_dt: 0.01,
            residual_n: 3,
            entropy_n: vec![4, 5, 6, 7, 8],
            entropy_times: vec![0.0, 0.05, 0.1, 0.2, 0.4, 0.8],
            entropy_profile: Profile::sin(0.25),
            entropy_rho_star: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub dims: Vec<usize>,
    pub ells: Vec<usize>,
    /// Constant bounding both normalised costs.
    pub c0: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self { dims: vec![1, 2, 3], ells: vec![2, 4, 8, 16, 32, 64], c0: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSection {
    pub samples: usize,
    pub bootstrap: usize,
    pub binomial_caps: Vec<u32>,
    pub densities: Vec<f64>,
    pub taus: Vec<f64>,
}

impl Default for ConcentrationSection {
    fn default() -> Self {
        Self { samples: 100_000, bootstrap: 20, binomial_caps: vec![1, 2, 5], densities: vec![0.1, 0.5, 0.9], taus: vec![-1.0, 0.0, 1.5] }
    }
}

/// A configuration as written by the user. Missing fields take the defaults
/// of the chosen experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gep: Option<GepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<ConcentrationSection>,
}

/// A configuration with every field resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub experiment: ExperimentId,
    pub seed: u64,
    pub output: PathBuf,
    pub replicas: usize,
    pub n: Vec<usize>,
    pub alpha: f64,
    pub kappa: f64,
    pub times: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gep: Option<GepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concentration: Option<ConcentrationSection>,
}

impl Config {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved configs serialise")
    }

    pub fn gep(&self) -> &GepSection {
        self.gep.as_ref().expect("section filled by validation")
    }

    pub fn chain(&self) -> &ChainSection {
        self.chain.as_ref().expect("section filled by validation")
    }

    pub fn pde(&self) -> &PdeSection {
        self.pde.as_ref().expect("section filled by validation")
    }

    pub fn oracle(&self) -> &OracleSection {
        self.oracle.as_ref().expect("section filled by validation")
    }

    pub fn flow(&self) -> &FlowSection {
        self.flow.as_ref().expect("section filled by validation")
    }

    pub fn concentration(&self) -> &ConcentrationSection {
        self.concentration.as_ref().expect("section filled by validation")
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse(String),
    Invalid(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse(e) => write!(f, "cannot parse configuration: {e}"),
            ConfigError::Invalid(errs) => {
                writeln!(f, "invalid configuration:")?;
                for e in errs {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
}

pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
    parse(&text)
}

/// Result of validation: the resolved config and non-fatal warnings.
#[derive(Clone, Debug)]
pub struct Validated {
    pub config: Config,
    pub warnings: Vec<String>,
}

struct Defaults {
    replicas: usize,
    n: Vec<usize>,
    alpha: f64,
    kappa: f64,
    times: Vec<f64>,
}

/// The largest Burgers time comes from the smallest N because κ ≤ α.
fn shock_window(g: &GepSection, n: &[usize], alpha: f64, kappa: f64, times: &[f64], errs: &mut Vec<String>) {
    let (Some(&n0), Some(&t)) = (n.iter().min(), times.iter().max_by(|a, b| a.total_cmp(b))) else { return };
    let params = Torus::new(g.d, n0).map_err(|e| e.to_string()).and_then(|torus| GepParams::new(torus, g.k, g.rates.clone()).map_err(|e| e.to_string()));
    let pert = params.and_then(|p| GepPerturbation::new(g.rho_star, g.k, p.drift(), alpha, kappa, g.profile.clone()).map_err(|e| e.to_string()));
    match pert {
        Ok(p) => {
            let s = p.burgers_time(n0 as f64, t);
            if let ShockTime::At(shock) = p.burgers.shock_time() {
                if s >= shock {
                    errs.push(format!("t = {t} at N = {n0} maps to Burgers time {s:.4}, at or past the shock time {shock:.4}"));
                }
            }
        }
        Err(e) => errs.push(e),
    }
}

fn defaults(id: ExperimentId) -> Defaults {
    let d = |replicas, n: &[usize], alpha, kappa, times: &[f64]| Defaults { replicas, n: n.to_vec(), alpha, kappa, times: times.to_vec() };
    match id {
        ExperimentId::GepPerturbation => d(400, &[512, 1024, 2048, 4096], 0.25, 0.2, &[0.1]),
        ExperimentId::ChainPerturbation => d(400, &[64, 128, 256, 512], 0.3, 0.1, &[0.02]),
        ExperimentId::TwoClass => d(100, &[256, 512, 1024], 0.25, 0.2, &[0.1]),
        ExperimentId::OracleValidation => d(100_000, &[4], 0.25, 0.2, &[0.5]),
        ExperimentId::PdeConvergence => d(1, &[1 << 12, 1 << 14, 1 << 16, 1 << 18, 1 << 20, 1 << 22, 1 << 24], 0.3, 0.1, &[0.0]),
        ExperimentId::FlowAudit => d(1, &[], 0.25, 0.2, &[]),
        ExperimentId::ConcentrationAudit => d(1, &[], 0.25, 0.2, &[]),
    }
}

fn test_function_names(names: &[String], errs: &mut Vec<String>) {
    for n in names {
        if !matches!(n.as_str(), "one" | "cos" | "sin") {
            errs.push(format!("unknown test function '{n}' (expected one, cos or sin)"));
        }
    }
}

fn check_profile(p: &Profile, d: usize, what: &str, errs: &mut Vec<String>) {
    if let Err(e) = p.check(d) {
        errs.push(format!("{what}: {e}"));
    }
}

/// Resolve defaults and check every cross-field constraint. Violations of
/// the convergence hypotheses other than `κ ≤ α` are reported as warnings.
pub fn validate(raw: &ExperimentConfig) -> Result<Validated, ConfigError> {
    let id = raw.experiment;
    let def = defaults(id);
    let mut errs = Vec::new();
    let mut warnings = Vec::new();
    let alpha = raw.alpha.unwrap_or(def.alpha);
    let kappa = raw.kappa.unwrap_or(def.kappa);
    let n = raw.n.clone().unwrap_or(def.n);
    let replicas = raw.replicas.unwrap_or(def.replicas);
    let times = raw.times.clone().unwrap_or(def.times);
    if raw.seed.is_some_and(|s| s > i64::MAX as u64) {
        errs.push("seed must fit in 63 bits".into());
    }
    if replicas == 0 {
        errs.push("replicas must be at least 1".into());
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        errs.push("times must be finite and non-negative".into());
    }
    let scaled = matches!(id, ExperimentId::GepPerturbation | ExperimentId::ChainPerturbation | ExperimentId::TwoClass);
    if scaled || id == ExperimentId::PdeConvergence || id == ExperimentId::OracleValidation {
        if !(kappa > 0.0) {
            errs.push(format!("κ = {kappa} violates the hypothesis κ > 0"));
        }
        if kappa > alpha {
            errs.push(format!("κ = {kappa} > α = {alpha} violates the hypothesis κ ≤ α"));
        }
        if !(alpha > 0.0 && alpha < 0.5) {
            warnings.push(format!("α = {alpha} outside (0, 1/2) assumed by the convergence theorems"));
        }
    }
    if scaled && n.is_empty() {
        errs.push("n must list at least one system size".into());
    }
    if scaled && n.iter().any(|&v| v < 2) {
        errs.push("every system size must be at least 2".into());
    }

    let mut gep = None;
    let mut chain = None;
    let mut pde = None;
    let mut oracle = None;
    let mut flow = None;
    let mut concentration = None;
    match id {
        ExperimentId::GepPerturbation | ExperimentId::TwoClass => {
            let mut g = raw.gep.clone().unwrap_or_default();
            if raw.gep.is_none() && id == ExperimentId::TwoClass {
                g.rho_star = 0.3;
                g.profile = Profile::Bump { amplitude: 0.4, center: vec![0.5], width: 0.3, centered: false };
                g.test_functions = vec!["one".into(), "cos".into(), "sin".into()];
            }
            if g.d == 0 || g.d > 3 {
                errs.push(format!("dimension d = {} must be 1, 2 or 3", g.d));
            }
            if g.rates.len() != 2 * g.d {
                errs.push(format!("{} rates given, 2d = {} required", g.rates.len(), 2 * g.d));
            }
            if g.k == 0 || g.k > 255 {
                errs.push(format!("capacity K = {} must be in 1..=255", g.k));
            }
            if !(g.rho_star > 0.0 && g.rho_star < g.k as f64) {
                errs.push(format!("ϱ_* = {} must lie in (0, K)", g.rho_star));
            }
            if id == ExperimentId::TwoClass && g.k != 1 {
                errs.push("two-class dynamics require K = 1".into());
            }
            if g.field_cells == 0 {
                errs.push("field_cells must be positive".into());
            }
            check_profile(&g.profile, g.d, "gep.profile", &mut errs);
            test_function_names(&g.test_functions, &mut errs);
            if g.d == 1 && kappa >= 1.0 - 2.0 * alpha {
                warnings.push(format!("κ = {kappa} ≥ 1 − 2α = {} in d = 1: outside the relative-entropy window", 1.0 - 2.0 * alpha));
            }
            if g.d >= 2 && kappa >= 1.0 {
                warnings.push(format!("κ = {kappa} ≥ 1 in d = {}: outside the relative-entropy window", g.d));
            }
            for &nn in &n {
                if g.field_cells > 0 && nn % g.field_cells != 0 {
                    errs.push(format!("field_cells = {} must divide N = {nn}", g.field_cells));
                }
            }
            if errs.is_empty() {
                shock_window(&g, &n, alpha, kappa, &times, &mut errs);
            }
            gep = Some(g);
        }
        ExperimentId::ChainPerturbation => {
            let c = raw.chain.clone().unwrap_or_default();
            check_chain_potential(&c.potential, c.coefficients.as_deref(), &mut errs);
            if !(c.beta > 0.0) {
                errs.push(format!("β = {} must be positive", c.beta));
            }
            check_profile(&c.sigma_minus, 1, "chain.sigma_minus", &mut errs);
            check_profile(&c.sigma_plus, 1, "chain.sigma_plus", &mut errs);
            for (name, p) in [("sigma_minus", &c.sigma_minus), ("sigma_plus", &c.sigma_plus)] {
                if p.mean().abs() > 1e-12 {
                    errs.push(format!("chain.{name} has mean {} but the waves must have zero mean", p.mean()));
                }
            }
            test_function_names(&c.test_functions, &mut errs);
            if let Some(g) = c.gamma {
                if !(g >= 0.0) {
                    errs.push(format!("γ = {g} must be non-negative"));
                }
                for &nn in &n {
                    let nf = nn as f64;
                    let (lo, hi) = (nf.powf(5.0 * kappa + 4.0 * alpha - 1.0), nf.powf(1.0 - kappa));
                    if !(g > lo && g < hi) {
                        warnings.push(format!("γ = {g} outside the window ({lo:.3}, {hi:.3}) at N = {nn}"));
                    }
                }
            }
            if let Some(dt) = c.dt {
                if !(dt > 0.0) {
                    errs.push(format!("dt = {dt} must be positive"));
                }
            }
            if kappa >= (1.0 - 2.0 * alpha) / 3.0 {
                warnings.push(format!("κ = {kappa} ≥ (1 − 2α)/3 = {}: outside the chain relative-entropy window", (1.0 - 2.0 * alpha) / 3.0));
            }
            for &nn in &n {
                if c.field_cells == 0 || nn % c.field_cells != 0 {
                    errs.push(format!("field_cells = {} must divide N = {nn}", c.field_cells));
                }
            }
            if c.control_replicas > 0 && c.control_n < 2 {
                errs.push("control_n must be at least 2".into());
            }
            chain = Some(c);
        }
        ExperimentId::PdeConvergence => {
            let p = raw.pde.clone().unwrap_or_default();
            check_profile(&p.profile, 1, "pde.profile", &mut errs);
            if p.cells.len() < 2 {
                errs.push("pde.cells needs at least two grids for an order estimate".into());
            }
            if !(p.cfl > 0.0 && p.cfl <= 0.5) {
                errs.push(format!("CFL number {} outside (0, 0.5]", p.cfl));
            }
            if !(p.shock_fraction > 0.0 && p.shock_fraction < 1.0) {
                errs.push(format!("shock_fraction {} must lie in (0, 1)", p.shock_fraction));
            }
            check_chain_potential(&p.potential, None, &mut errs);
            if n.len() < 2 {
                errs.push("n needs at least two sizes for the lattice residual slope".into());
            }
            pde = Some(p);
        }
        ExperimentId::OracleValidation => {
            let o = raw.oracle.clone().unwrap_or_default();
            if o.ks.len() != o.initial.len() {
                errs.push(format!("{} capacities but {} initial configurations", o.ks.len(), o.initial.len()));
            }
            if o.rates.len() != 2 {
                errs.push("oracle-validation runs in d = 1 and needs two rates".into());
            }
            for (k, init) in o.ks.iter().zip(&o.initial) {
                if init.iter().any(|v| *v as u32 > *k) {
                    errs.push(format!("initial configuration {init:?} exceeds capacity {k}"));
                }
                if n.first().is_some_and(|&nn| nn != init.len()) {
                    errs.push(format!("initial configuration {init:?} does not have N = {} sites", n[0]));
                }
            }
            if !(o.stationarity_fraction > 0.0 && o.stationarity_fraction < 1.0) {
                errs.push("stationarity_fraction must lie in (0, 1)".into());
            }
            if o.stationarity_n < 3 {
                errs.push("stationarity_n must be at least 3".into());
            }
            if !(o.chain_beta > 0.0) || !(o.chain_dt > 0.0) {
                errs.push("chain_beta and chain_dt must be positive".into());
            }
            if o.entropy_n.iter().any(|&v| v < 2 || v > 16) {
                errs.push("entropy sizes must lie in 2..=16".into());
            }
            check_chain_potential(&o.chain_potential, None, &mut errs);
            check_profile(&o.entropy_profile, 1, "oracle.entropy_profile", &mut errs);
            oracle = Some(o);
        }
        ExperimentId::FlowAudit => {
            let f = raw.flow.clone().unwrap_or_default();
            if f.dims.iter().any(|&d| d == 0 || d > 3) {
                errs.push("flow dimensions must be 1, 2 or 3".into());
            }
            if f.ells.iter().any(|&l| l == 0) {
                errs.push("flow window sizes must be positive".into());
            }
            flow = Some(f);
        }
        ExperimentId::ConcentrationAudit => {
            let c = raw.concentration.clone().unwrap_or_default();
            if c.densities.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
                errs.push("densities are fractions of the capacity and must lie in (0, 1)".into());
            }
            if c.samples < 100 {
                errs.push("concentration samples must be at least 100".into());
            }
            concentration = Some(c);
        }
    }
    for (present, name) in [
        (raw.gep.is_some(), "gep"),
        (raw.chain.is_some(), "chain"),
        (raw.pde.is_some(), "pde"),
        (raw.oracle.is_some(), "oracle"),
        (raw.flow.is_some(), "flow"),
        (raw.concentration.is_some(), "concentration"),
    ] {
        let used = match name {
            "gep" => gep.is_some(),
            "chain" => chain.is_some(),
            "pde" => pde.is_some(),
            "oracle" => oracle.is_some(),
            "flow" => flow.is_some(),
            _ => concentration.is_some(),
        };
        if present && !used {
            warnings.push(format!("section [{name}] is ignored by experiment {id}"));
        }
    }
    if !errs.is_empty() {
        return Err(ConfigError::Invalid(errs));
    }
    let config = Config {
        experiment: id,
        seed: raw.seed.unwrap_or_else(|| id.default_seed()),
        output: raw.output.clone().unwrap_or_else(|| PathBuf::from("out").join(id.name())),
        replicas,
        n,
        alpha,
        kappa,
        times,
        gep,
        chain,
        pde,
        oracle,
        flow,
        concentration,
    };
    Ok(Validated { config, warnings })
}

fn check_chain_potential(name: &str, coeffs: Option<&[f64]>, errs: &mut Vec<String>) {
    match (name, coeffs) {
        ("harmonic" | "quartic", None) => {}
        ("polynomial", Some(c)) if c.len() >= 3 => {}
        ("polynomial", _) => errs.push("polynomial potential needs at least three coefficients".into()),
        (other, _) => errs.push(format!("unknown potential '{other}' (expected harmonic, quartic or polynomial)")),
    }
}

/// The default configuration of an experiment, fully resolved.
pub fn default_config(id: ExperimentId) -> Config {
    let raw = ExperimentConfig {
        experiment: id,
        seed: None,
        output: None,
        replicas: None,
        n: None,
        alpha: None,
        kappa: None,
        times: None,
        gep: None,
        chain: None,
        pde: None,
        oracle: None,
        flow: None,
        concentration: None,
    };
    validate(&raw).expect("defaults are valid").config
}

/// Test function by name in dimension `d`.
pub fn test_function(name: &str, d: usize) -> Profile {
    match name {
        "one" => Profile::Constant { value: 1.0 },
        other => Profile::named(other, 1.0, d).expect("names checked during validation"),
    }
}
