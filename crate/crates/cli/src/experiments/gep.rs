use anyhow::Result;

use eqpert::gep::{sample_initial, GepParams, PerturbationSetup};
use eqpert::lattice::{wrap_unit, Torus};
use eqpert::observables::pairing;
use eqpert::pde::GepPerturbation;
use eqpert::profile::Profile;

use super::{decreasing, family, mean_se, replicas};
use crate::artifacts::{FieldRow, PairingRecord};
use crate::config::{test_function, Config};
use crate::report::Report;
use crate::{Artifacts, Outcome};

/// Error at the largest N relative to `‖σ‖_∞ ‖φ‖_1`.
const RELATIVE_TOL: f64 = 0.2;

/// Periodic trapezoid points per axis; spectrally accurate for smooth data.
fn grid_side(d: usize) -> usize {
    match d {
        1 => 512,
        2 => 128,
        _ => 32,
    }
}

/// All points of the uniform periodic grid of side `m` in `[0,1)^d`.
pub(super) fn torus_grid(d: usize, m: usize) -> Vec<Vec<f64>> {
    let total = m.pow(d as u32);
    (0..total)
        .map(|mut i| {
            (0..d)
                .map(|_| {
                    let c = i % m;
                    i /= m;
                    c as f64 / m as f64
                })
                .collect()
        })
        .collect()
}

/// `∫ f φ` and `∫ |φ|` on the torus, and `sup |f|`.
pub(super) fn integrals<F: Fn(&[f64]) -> Result<f64>>(d: usize, f: F, phi: &Profile) -> Result<(f64, f64, f64)> {
    let pts = torus_grid(d, grid_side(d));
    let w = 1.0 / pts.len() as f64;
    let (mut fp, mut ap, mut sup) = (0.0, 0.0, 0.0f64);
    for u in &pts {
        let v = f(u)?;
        let p = phi.value(u);
        fp += w * v * p;
        ap += w * p.abs();
        sup = sup.max(v.abs());
    }
    Ok((fp, ap, sup))
}

/// Cell averages of `N^α v_x` in the frame shifted by `shift`, `cells` per axis.
pub(super) fn moving_cells(values: &[f64], torus: &Torus, alpha: f64, shift: &[f64], cells: usize) -> Vec<f64> {
    let d = torus.dim();
    let n = torus.side() as f64;
    let mut acc = vec![0.0; cells.pow(d as u32)];
    let mut count = vec![0usize; acc.len()];
    let mut c = vec![0usize; d];
    for (x, v) in values.iter().enumerate() {
        torus.coords_into(x, &mut c);
        let mut idx = 0;
        let mut stride = 1;
        for i in 0..d {
            let u = wrap_unit(c[i] as f64 / n - shift[i]);
            idx += ((u * cells as f64) as usize).min(cells - 1) * stride;
            stride *= cells;
        }
        acc[idx] += v;
        count[idx] += 1;
    }
    let scale = n.powf(alpha);
    acc.iter().zip(&count).map(|(a, &k)| if k == 0 { 0.0 } else { scale * a / k as f64 }).collect()
}

/// Cell centres in the same order as [`moving_cells`].
pub(super) fn cell_centres(d: usize, cells: usize) -> Vec<Vec<f64>> {
    torus_grid(d, cells).into_iter().map(|u| u.into_iter().map(|v| v + 0.5 / cells as f64).collect()).collect()
}

/// Per-cell mean and standard error across replicas.
pub(super) fn field_rows<F: Fn(&[f64]) -> Result<f64>>(d: usize, cells: usize, samples: &[&Vec<f64>], macroscopic: F) -> Result<Vec<FieldRow>> {
    cell_centres(d, cells)
        .into_iter()
        .enumerate()
        .map(|(i, u)| {
            let xs: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            let (m, se) = mean_se(&xs);
            Ok(FieldRow { macroscopic: macroscopic(&u)?, u, empirical: m, stderr: se })
        })
        .collect()
}

struct Replica {
    /// Per time: pairings in test-function order, then the cell field.
    pairings: Vec<Vec<f64>>,
    fields: Vec<Vec<f64>>,
}

pub fn run(cfg: &Config) -> Result<Outcome> {
    let gc = cfg.gep();
    let d = gc.d;
    let mut report = Report::new(cfg.experiment.name(), cfg.seed);
    let mut art = Artifacts::new();
    let phis: Vec<(String, Profile)> = gc.test_functions.iter().map(|n| (n.clone(), test_function(n, d))).collect();
    let mut times = cfg.times.clone();
    times.sort_by(f64::total_cmp);
    // errors[t][φ][N]: mean |pairing − target| over replicas.
    let mut errors = vec![vec![Vec::new(); phis.len()]; times.len()];
    let mut bias = vec![vec![Vec::new(); phis.len()]; times.len()];
    let mut scales = vec![vec![0.0; phis.len()]; times.len()];
    for (ni, &n) in cfg.n.iter().enumerate() {
        let params = GepParams::new(Torus::new(d, n)?, gc.k, gc.rates.clone())?;
        let setup = PerturbationSetup { params: params.clone(), rho_star: gc.rho_star, alpha: cfg.alpha, kappa: cfg.kappa, profile: gc.profile.clone() };
        let pert = GepPerturbation::new(gc.rho_star, gc.k, params.drift(), cfg.alpha, cfg.kappa, gc.profile.clone())?;
        let nf = n as f64;
        let speed = setup.speed();
        let torus = params.torus.clone();
        let reps = replicas(cfg.seed, family(ni), cfg.replicas, |rng| {
            let mut state = sample_initial(&setup, rng)?;
            let mut out = Replica { pairings: Vec::new(), fields: Vec::new() };
            for &t in &times {
                state.simulate_to(t, speed, rng);
                let v: Vec<f64> = state.eta().iter().map(|&e| e as f64 - gc.rho_star).collect();
                let shift = pert.shift(nf, t);
                out.pairings.push(phis.iter().map(|(_, phi)| pairing(&v, &torus, cfg.alpha, &shift, phi)).collect::<Result<_, _>>()?);
                out.fields.push(moving_cells(&v, &torus, cfg.alpha, &shift, gc.field_cells));
            }
            Ok(out)
        })?;
        for (ti, &t) in times.iter().enumerate() {
            let s = pert.burgers_time(nf, t);
            let sigma = |u: &[f64]| -> Result<f64> { Ok(pert.burgers.value(s, u)?) };
            for (pi, (name, phi)) in phis.iter().enumerate() {
                let (target, phi_l1, sup) = integrals(d, sigma, phi)?;
                let vals: Vec<f64> = reps.iter().map(|r| r.pairings[ti][pi]).collect();
                let (m, se) = mean_se(&vals);
                let mae = vals.iter().map(|v| (v - target).abs()).sum::<f64>() / vals.len() as f64;
                errors[ti][pi].push(mae);
                bias[ti][pi].push((m - target).abs());
                scales[ti][pi] = sup * phi_l1;
                art.pairing(PairingRecord { t, n, alpha: cfg.alpha, kappa: cfg.kappa, k: 0, phi_id: name.clone(), value: m, stderr: se });
                report.metric(&format!("target_t{t}_N{n}_{name}"), target);
            }
            let samples: Vec<&Vec<f64>> = reps.iter().map(|r| &r.fields[ti]).collect();
            let rows = field_rows(d, gc.field_cells, &samples, sigma)?;
            art.field(format!("field_t{t}_N{n}.csv"), &rows);
        }
    }
    let last_n = *cfg.n.last().expect("validated");
    for (ti, &t) in times.iter().enumerate() {
        for (pi, (name, _)) in phis.iter().enumerate() {
            let e = &errors[ti][pi];
            report.metric(&format!("mean_abs_error_t{t}_{name}"), e);
            report.metric(&format!("bias_t{t}_{name}"), &bias[ti][pi]);
            report.flag(&format!("monotone_t{t}_{name}"), decreasing(e), format!("mean |pairing − target| over replicas across N = {:?}: {}", cfg.n, super::sci(e)));
            let b = *bias[ti][pi].last().expect("non-empty");
            report.below(
                &format!("relative_error_t{t}_{name}"),
                b / scales[ti][pi],
                RELATIVE_TOL,
                format!("|replica mean − target| / (‖σ‖_∞‖φ‖_1) at N = {last_n}"),
            );
        }
    }
    Ok(Outcome { report, artifacts: art })
}
