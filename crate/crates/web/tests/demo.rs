use eqpert_web::{burgers_samples, burgers_shock, heatmap_samples, heatmap_shock, Tasep};

#[test]
fn profile_at_time_zero_is_the_initial_sine() {
    let v = burgers_samples(0.3, 0.0, 8).unwrap();
    for (i, x) in v.iter().enumerate() {
        let want = 0.3 * (2.0 * std::f64::consts::PI * i as f64 / 8.0).sin();
        assert!((x - want).abs() < 1e-12, "{i}: {x} vs {want}");
    }
}

#[test]
fn profile_keeps_its_mean_and_range_before_the_shock() {
    let s = 0.9 * burgers_shock(0.3).unwrap();
    let v = burgers_samples(0.3, s, 256).unwrap();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean.abs() < 1e-9, "{mean}");
    assert!(v.iter().all(|x| x.abs() <= 0.3 + 1e-9));
}

#[test]
fn shock_time_scales_inversely_with_amplitude() {
    let (a, b) = (burgers_shock(0.2).unwrap(), burgers_shock(0.4).unwrap());
    assert!((a / b - 2.0).abs() < 1e-6, "{a} {b}");
    assert!(burgers_samples(0.2, 1.01 * a, 4).is_err());
}

#[test]
fn heatmap_has_the_requested_layout() {
    let side = 16;
    let s = 0.5 * heatmap_shock(0.3, 0.5).unwrap();
    let v = heatmap_samples(0.3, 0.5, s, side).unwrap();
    assert_eq!(v.len(), side * side);
    // The initial datum depends on u_1 + u_2 only; so does the solution.
    assert!((v[1] - v[side]).abs() < 1e-9);
}

#[test]
fn tasep_fluctuation_tracks_the_prediction() {
    let mut t = Tasep::create(4096, 0.5, 0.25, 0.2, 1.0, 7).unwrap();
    let horizon = t.shock_horizon();
    assert!(horizon.is_finite() && horizon > 0.0);
    t.advance_to(0.3 * horizon);
    let cells = 8;
    let f = t.fluctuation(cells);
    let p = t.prediction(cells).unwrap();
    // Coarse cells at N = 4096 leave binomial noise of order N^{α−1/2}·√cells.
    let err = f.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum::<f64>() / cells as f64;
    assert!(err < 0.35, "{f:?} vs {p:?}");
}

#[test]
fn tasep_rejects_densities_outside_the_unit_interval() {
    assert!(Tasep::create(64, 0.95, 0.25, 0.2, 1.0, 1).is_err());
}
