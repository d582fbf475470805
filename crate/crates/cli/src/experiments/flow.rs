use anyhow::Result;

use eqpert::lattice::{construct_flow, g_d};

use crate::config::Config;
use crate::report::Report;
use crate::{Artifacts, Outcome};

pub fn run(cfg: &Config) -> Result<Outcome> {
    let fc = cfg.flow();
    let mut report = Report::new(cfg.experiment.name(), cfg.seed);
    let mut art = Artifacts::new();
    let mut csv = String::from("d,ell,g_d,l2,l1,l2_ratio,l1_ratio,residual_exact,residual_f64\n");
    let mut worst_residual: i128 = 0;
    let (mut sup_l2, mut sup_l1) = (0.0f64, 0.0f64);
    for &d in &fc.dims {
        for &ell in &fc.ells {
            let flow = construct_flow(ell, d)?;
            let exact = flow.divergence_residual_exact();
            let approx = flow.divergence_residual_f64();
            let cost = flow.cost();
            worst_residual = worst_residual.max(exact.abs());
            sup_l2 = sup_l2.max(cost.l2_ratio());
            sup_l1 = sup_l1.max(cost.l1_ratio());
            csv.push_str(&format!(
                "{d},{ell},{},{},{},{},{},{exact},{approx:e}\n",
                g_d(ell, d),
                cost.l2,
                cost.l1,
                cost.l2_ratio(),
                cost.l1_ratio()
            ));
        }
    }
    art.add("flow_costs.csv", csv);
    report.metric("sup_l2_ratio", sup_l2);
    report.metric("sup_l1_ratio", sup_l1);
    report.metric("c0", fc.c0);
    report.at_most("divergence_residual_exact", worst_residual as f64, 0.0, "largest |div φ − (δ_0 − q_ℓ)| numerator in rational mode");
    report.at_most("cost_l2_bounded", sup_l2, fc.c0, "sup over (d, ℓ) of Σφ²/g_d(ℓ)");
    report.at_most("cost_l1_bounded", sup_l1, fc.c0, "sup over (d, ℓ) of Σ|φ|/ℓ");
    Ok(Outcome { report, artifacts: art })
}
