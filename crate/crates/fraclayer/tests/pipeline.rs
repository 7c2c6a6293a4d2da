use fraclayer::expansion::{compute_m1_small_s, heteroclinic, omega_grid, LayerConfig};
use fraclayer::funcrep::{Datum, Interval};
use fraclayer::potential::make_quartic;
use fraclayer::solvers::{solve_m_eps, SolveOptions};
use fraclayer::validation::validate;

#[test]
fn quartic_passes_validation() {
    let r = validate(&make_quartic(), 7).unwrap();
    assert!(r.all_passed(), "failed: {:?}", r.failed());
}

#[test]
fn m_eps_sits_between_zero_and_m1() {
    let w = make_quartic();
    let omega = Interval::new(-1.0, 1.0);
    let g = Datum::Step { at: 0.0, left: -1.0, right: 1.0 };
    let (m1, _) = compute_m1_small_s(&omega, &g, 0.25, 2).unwrap();
    let grid = omega_grid(&omega, &g, 0.1, 0.05).unwrap();
    let r = solve_m_eps(0.25, 0.1, &omega, &g, 0.0, &w, &grid, &SolveOptions::default()).unwrap();
    assert!(r.value_f1 > 0.0 && r.value_f1 < m1);
    assert!(r.argmin.values().iter().all(|v| v.abs() <= 1.0));
}

#[test]
fn heteroclinic_is_odd_and_increasing() {
    let cfg = LayerConfig { l: 60.0, ..LayerConfig::default() };
    let p = heteroclinic(0.75, &make_quartic(), &cfg).unwrap();
    assert!(p.converged);
    let v = p.profile.values();
    assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    for x in [0.5, 2.0, 10.0] {
        let (a, b) = (p.profile.eval(x).unwrap(), p.profile.eval(-x).unwrap());
        assert!((a + b).abs() < 1e-6, "x={x}: {a} vs {b}");
    }
}
