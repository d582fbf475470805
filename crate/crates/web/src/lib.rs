//! WebAssembly bindings for the static demo in `www/`.
//!
//! Each export wraps a plain Rust function so the numerics can be tested
//! natively; only the thin `#[wasm_bindgen]` layer touches JavaScript types.

use eqpert::gep::{sample_initial, GepParams, GepState, PerturbationSetup};
use eqpert::lattice::Torus;
use eqpert::pde::{GepPerturbation, ScalarBurgers, ShockTime};
use eqpert::profile::Profile;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// `∂_s ρ − ∂_u ρ² = 0` from `amplitude · sin 2πu`, the one-dimensional
/// totally asymmetric case.
fn burgers_1d(amplitude: f64) -> Result<ScalarBurgers, String> {
    ScalarBurgers::gep(&[1.0], Profile::sin(amplitude)).map_err(|e| e.to_string())
}

fn shock(b: &ScalarBurgers) -> f64 {
    match b.shock_time() {
        ShockTime::At(t) => t,
        ShockTime::Never => f64::INFINITY,
    }
}

/// Samples of the one-dimensional profile at `samples` evenly spaced points.
pub fn burgers_samples(amplitude: f64, s: f64, samples: usize) -> Result<Vec<f64>, String> {
    let b = burgers_1d(amplitude)?;
    (0..samples).map(|i| b.value(s, &[i as f64 / samples as f64]).map_err(|e| e.to_string())).collect()
}

/// First shock time of the one-dimensional profile.
pub fn burgers_shock(amplitude: f64) -> Result<f64, String> {
    Ok(shock(&burgers_1d(amplitude)?))
}

/// Two-dimensional profile from `amplitude · sin 2π(u_1 + u_2)` with drift
/// `(1, drift_y)`, row-major on a `side × side` grid.
pub fn heatmap_samples(amplitude: f64, drift_y: f64, s: f64, side: usize) -> Result<Vec<f64>, String> {
    let profile = Profile::Trig { amplitude, wave: vec![1, 1], phase: 0.0 };
    let b = ScalarBurgers::gep(&[1.0, drift_y], profile).map_err(|e| e.to_string())?;
    let h = 1.0 / side as f64;
    let mut out = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            out.push(b.value(s, &[i as f64 * h, j as f64 * h]).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

/// Shock time of the two-dimensional heatmap profile.
pub fn heatmap_shock(amplitude: f64, drift_y: f64) -> Result<f64, String> {
    let profile = Profile::Trig { amplitude, wave: vec![1, 1], phase: 0.0 };
    Ok(shock(&ScalarBurgers::gep(&[1.0, drift_y], profile).map_err(|e| e.to_string())?))
}

#[wasm_bindgen(js_name = burgersProfile)]
pub fn burgers_profile(amplitude: f64, s: f64, samples: usize) -> Result<Vec<f64>, JsValue> {
    burgers_samples(amplitude, s, samples).map_err(js)
}

#[wasm_bindgen(js_name = burgersShockTime)]
pub fn burgers_shock_time(amplitude: f64) -> Result<f64, JsValue> {
    burgers_shock(amplitude).map_err(js)
}

#[wasm_bindgen(js_name = heatmap2d)]
pub fn heatmap_2d(amplitude: f64, drift_y: f64, s: f64, side: usize) -> Result<Vec<f64>, JsValue> {
    heatmap_samples(amplitude, drift_y, s, side).map_err(js)
}

#[wasm_bindgen(js_name = heatmapShockTime)]
pub fn heatmap_shock_time(amplitude: f64, drift_y: f64) -> Result<f64, JsValue> {
    heatmap_shock(amplitude, drift_y).map_err(js)
}

/// Totally asymmetric exclusion on a ring of `n` sites started near density
/// `rho_star` with a sine perturbation of size `n^{−α}`.
#[wasm_bindgen]
pub struct Tasep {
    setup: PerturbationSetup,
    pert: GepPerturbation,
    state: GepState,
    rng: ChaCha8Rng,
    time: f64,
}

impl Tasep {
    pub fn create(n: usize, rho_star: f64, alpha: f64, kappa: f64, amplitude: f64, seed: u64) -> Result<Tasep, String> {
        let params = GepParams::new(Torus::new(1, n).map_err(|e| e.to_string())?, 1, vec![1.0, 0.0]).map_err(|e| e.to_string())?;
        let profile = Profile::sin(amplitude);
        let pert = GepPerturbation::new(rho_star, 1, params.drift(), alpha, kappa, profile.clone()).map_err(|e| e.to_string())?;
        let setup = PerturbationSetup { params, rho_star, alpha, kappa, profile };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = sample_initial(&setup, &mut rng).map_err(|e| e.to_string())?;
        Ok(Tasep { setup, pert, state, rng, time: 0.0 })
    }

    /// Rescaled fluctuation `N^α(η − ϱ_*)` averaged over `cells` bins of the
    /// frame moving with the characteristic speed.
    pub fn fluctuation(&self, cells: usize) -> Vec<f64> {
        let n = self.setup.n();
        let shift = self.pert.shift(n, self.time)[0];
        let scale = n.powf(self.setup.alpha);
        let mut sum = vec![0.0; cells];
        let mut count = vec![0usize; cells];
        for (x, &e) in self.state.eta().iter().enumerate() {
            let u = (x as f64 / n - shift).rem_euclid(1.0);
            let c = ((u * cells as f64) as usize).min(cells - 1);
            sum[c] += scale * (e as f64 - self.setup.rho_star);
            count[c] += 1;
        }
        sum.iter().zip(&count).map(|(s, &k)| if k == 0 { 0.0 } else { s / k as f64 }).collect()
    }

    /// Burgers prediction at the cell centres of the moving frame.
    pub fn prediction(&self, cells: usize) -> Result<Vec<f64>, String> {
        let s = self.pert.burgers_time(self.setup.n(), self.time);
        (0..cells)
            .map(|c| self.pert.burgers.value(s, &[(c as f64 + 0.5) / cells as f64]).map_err(|e| e.to_string()))
            .collect()
    }

    pub fn advance_to(&mut self, t: f64) {
        if t > self.time {
            self.state.simulate_to(t, self.setup.speed(), &mut self.rng);
            self.time = t;
        }
    }

    /// Macroscopic time at which the Burgers profile first shocks.
    pub fn shock_horizon(&self) -> f64 {
        shock(&self.pert.burgers) / self.setup.n().powf(self.setup.kappa - self.setup.alpha)
    }
}

#[wasm_bindgen]
impl Tasep {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, rho_star: f64, alpha: f64, kappa: f64, amplitude: f64, seed: u64) -> Result<Tasep, JsValue> {
        Tasep::create(n, rho_star, alpha, kappa, amplitude, seed).map_err(js)
    }

    /// Advance by `dt` in macroscopic time.
    pub fn step(&mut self, dt: f64) {
        self.advance_to(self.time + dt);
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    #[wasm_bindgen(js_name = shockHorizon)]
    pub fn shock_horizon_js(&self) -> f64 {
        self.shock_horizon()
    }

    #[wasm_bindgen(js_name = fluctuation)]
    pub fn fluctuation_js(&self, cells: usize) -> Vec<f64> {
        self.fluctuation(cells)
    }

    #[wasm_bindgen(js_name = prediction)]
    pub fn prediction_js(&self, cells: usize) -> Result<Vec<f64>, JsValue> {
        self.prediction(cells).map_err(js)
    }
}
