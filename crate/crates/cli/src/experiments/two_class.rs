use anyhow::Result;

use eqpert::gep::{sample_two_class, GepParams};
use eqpert::lattice::Torus;
use eqpert::observables::pairing;
use eqpert::pde::GepPerturbation;
use eqpert::profile::Profile;

use super::gep::{field_rows, integrals, moving_cells};
use super::{family, mean_se, replicas};
use crate::artifacts::PairingRecord;
use crate::config::{test_function, Config};
use crate::report::Report;
use crate::{Artifacts, Outcome};

struct Replica {
    conserved: bool,
    pairings: Vec<Vec<f64>>,
    fields: Vec<Vec<f64>>,
}

/// Second-class particles seeded with density `N^{−α} ρ^{ini}` on top of a
/// first-class equilibrium at `ϱ_*`; their field is paired in the frame
/// moving with the characteristic speed.
pub fn run(cfg: &Config) -> Result<Outcome> {
    let gc = cfg.gep();
    let d = gc.d;
    let mut report = Report::new(cfg.experiment.name(), cfg.seed);
    let mut art = Artifacts::new();
    let phis: Vec<(String, Profile)> = gc.test_functions.iter().map(|n| (n.clone(), test_function(n, d))).collect();
    let mut times = cfg.times.clone();
    times.sort_by(f64::total_cmp);
    let mut conserved = true;
    for (ni, &n) in cfg.n.iter().enumerate() {
        let params = GepParams::new(Torus::new(d, n)?, 1, gc.rates.clone())?;
        let pert = GepPerturbation::new(gc.rho_star, 1, params.drift(), cfg.alpha, cfg.kappa, gc.profile.clone())?;
        let nf = n as f64;
        let eps = nf.powf(-cfg.alpha);
        let torus = params.torus.clone();
        let second: Vec<f64> = (0..torus.size()).map(|x| eps * gc.profile.value(&torus.position(x))).collect();
        let speed = nf.powf(1.0 + cfg.kappa);
        let reps = replicas(cfg.seed, family(ni), cfg.replicas, |rng| {
            let mut state = sample_two_class(&params, gc.rho_star, &second, rng)?;
            let (f0, s0) = state.classes();
            let counts = |v: &[u8]| v.iter().map(|&c| c as u64).sum::<u64>();
            let (nf0, ns0) = (counts(&f0), counts(&s0));
            let mut out = Replica { conserved: true, pairings: Vec::new(), fields: Vec::new() };
            for &t in &times {
                state.simulate_to(t, speed, rng);
                let (first, sec) = state.classes();
                out.conserved &= counts(&first) == nf0 && counts(&sec) == ns0;
                let v: Vec<f64> = sec.iter().map(|&c| c as f64).collect();
                let shift = pert.shift(nf, t);
                out.pairings.push(phis.iter().map(|(_, phi)| pairing(&v, &torus, cfg.alpha, &shift, phi)).collect::<Result<_, _>>()?);
                out.fields.push(moving_cells(&v, &torus, cfg.alpha, &shift, gc.field_cells));
            }
            Ok(out)
        })?;
        conserved &= reps.iter().all(|r| r.conserved);
        for (ti, &t) in times.iter().enumerate() {
            let s = pert.burgers_time(nf, t);
            let sigma = |u: &[f64]| -> Result<f64> { Ok(pert.burgers.value(s, u)?) };
            for (pi, (name, phi)) in phis.iter().enumerate() {
                let (target, _, _) = integrals(d, sigma, phi)?;
                let vals: Vec<f64> = reps.iter().map(|r| r.pairings[ti][pi]).collect();
                let (m, se) = mean_se(&vals);
                art.pairing(PairingRecord { t, n, alpha: cfg.alpha, kappa: cfg.kappa, k: 0, phi_id: name.clone(), value: m, stderr: se });
                report.metric(&format!("pairing_t{t}_N{n}_{name}"), [m, se, target]);
            }
            let samples: Vec<&Vec<f64>> = reps.iter().map(|r| &r.fields[ti]).collect();
            art.field(format!("field_t{t}_N{n}.csv"), &field_rows(d, gc.field_cells, &samples, sigma)?);
        }
    }
    report.metric("pairing_layout", "[replica mean, standard error, Burgers target]");
    report.flag("class_counts_conserved", conserved, "first- and second-class particle numbers constant along every trajectory");
    Ok(Outcome { report, artifacts: art })
}
