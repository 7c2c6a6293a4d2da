use super::*;
use crate::energy::energy_q;
use crate::fracop::{middle_window, pde_residual};
use crate::potential::make_quartic;
use proptest::prelude::*;

fn sym_grid(l: f64) -> Grid1D {
    Grid1D::graded(-l, l, &[0.0], 0.02, 1.05, l / 100.0).unwrap()
}

fn half_grid(l: f64) -> Grid1D {
    Grid1D::graded(-l, 0.0, &[0.0], 0.02, 1.05, l / 100.0).unwrap()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn heteroclinic_is_monotone_odd_and_solves_the_equation() {
    let w = make_quartic();
    let r = solve_heteroclinic(0.75, &w, &sym_grid(50.0), &SolveOptions::default()).unwrap();
    assert!(r.converged, "pg {}", r.pg_norm);
    assert!(r.is_monotone());
    assert!(r.profile.eval(0.0).unwrap().abs() < 1e-6);
    for &x in r.profile.grid().nodes() {
        let odd = r.profile.eval(x).unwrap() + r.profile.eval(-x).unwrap();
        assert!(odd.abs() < 1e-3, "odd defect {odd} at {x}");
    }
    let win = middle_window(&r.profile, 0.5);
    let res = pde_residual(&r.profile, 0.75, &w, &win).unwrap();
    assert!(res.sup_norm < 1e-3, "residual {}", res.sup_norm);
    assert!(r.energy > 0.0 && r.energy.is_finite());
}

#[test]
fn heteroclinic_needs_a_centre_node() {
    let w = make_quartic();
    let g = Grid1D::uniform(-5.0, 5.0, 100).unwrap();
    let err = solve_heteroclinic(0.75, &w, &g, &SolveOptions::default()).unwrap_err();
    assert_eq!(err.kind(), "PreconditionViolated");
    let g = Grid1D::uniform(-5.0, 4.0, 91).unwrap();
    assert!(solve_heteroclinic(0.75, &w, &g, &SolveOptions::default()).is_err());
}

#[test]
fn empty_initializer_list_is_rejected() {
    let w = make_quartic();
    let opts = SolveOptions::default().with_inits(vec![]);
    assert!(solve_heteroclinic(0.75, &w, &sym_grid(10.0), &opts).is_err());
}

#[test]
fn half_heteroclinic_energy_tracks_the_jump_constant() {
    // the sharp interface costs 8 ln R on (-R, R) at s = 1/2
    let w = make_quartic();
    let r = solve_heteroclinic(0.5, &w, &sym_grid(400.0), &SolveOptions::default()).unwrap();
    assert!(r.converged);
    assert!((r.energy - 8.0).abs() < 0.1, "slope {}", r.energy);
}

#[test]
fn decay_fit_recovers_a_power_law() {
    let x: Vec<f64> = (1..=400).map(|i| i as f64 * 0.5).collect();
    let u: Vec<f64> = x.iter().map(|t| 1.0 - 3.0 * t.powf(-1.5)).collect();
    let fit = fit_decay(&x, &u, |_| 1.0, (50.0, 100.0)).unwrap();
    assert!((fit.exponent - 1.5).abs() < 1e-12);
    assert!((fit.r2 - 1.0).abs() < 1e-12);
    assert!(fit_decay(&x, &u, |_| 1.0, (1000.0, 2000.0)).is_none());
}

#[test]
fn boundary_layer_is_unique_monotone_and_inside() {
    let w = make_quartic();
    let g = half_grid(50.0);
    let mut profiles = Vec::new();
    for init in [Initializer::Ramp, Initializer::Step { at: -3.0, width: 1.0 }] {
        let opts = SolveOptions::default().with_inits(vec![init]);
        let r = solve_boundary_layer(0.7, 0.0, -1.0, &w, &g, &opts).unwrap();
        assert!(r.converged);
        assert!(r.is_monotone());
        let v = r.profile.values();
        let n = v.len();
        assert!(v[1..n - 1].iter().all(|&u| u > -1.0 && u < 0.0));
        profiles.push(v.to_vec());
    }
    assert!(sup_diff(&profiles[0], &profiles[1]) < 1e-4);
}

#[test]
fn boundary_layer_mirrors_for_the_plus_state() {
    let w = make_quartic();
    let g = half_grid(20.0);
    let opts = SolveOptions::default();
    let minus = solve_boundary_layer(0.7, -0.3, -1.0, &w, &g, &opts).unwrap();
    let plus = solve_boundary_layer(0.7, 0.3, 1.0, &w, &g, &opts).unwrap();
    let neg: Vec<f64> = minus.profile.values().iter().map(|v| -v).collect();
    assert!(sup_diff(&neg, plus.profile.values()) < 1e-5);
    assert!((minus.energy - plus.energy).abs() < 1e-8 * minus.energy);
    assert!(plus.is_monotone());
}

#[test]
fn boundary_layer_rejects_a_well_value() {
    let w = make_quartic();
    let err = solve_boundary_layer(0.7, 1.0, -1.0, &w, &half_grid(10.0), &SolveOptions::default())
        .unwrap_err();
    assert_eq!(err.kind(), "GammaAtWell");
}

#[test]
fn boundary_layer_lies_below_the_slid_heteroclinic() {
    let w = make_quartic();
    let l = 50.0;
    let u0 = solve_heteroclinic(0.7, &w, &sym_grid(l), &SolveOptions::default()).unwrap();
    for gamma in [-0.5, 0.5] {
        let w0 = solve_boundary_layer(0.7, gamma, -1.0, &w, &half_grid(l), &SolveOptions::default())
            .unwrap();
        let ug = shifted_heteroclinic(&u0.profile, gamma).unwrap();
        assert!((ug.eval(0.0).unwrap() - gamma).abs() < 1e-12);
        for (&x, &v) in w0.profile.grid().nodes().iter().zip(w0.profile.values()) {
            if x < -0.5 * l {
                continue;
            }
            assert!(v <= ug.eval(x).unwrap() + 2e-3, "x {x}: {v} vs {}", ug.eval(x).unwrap());
        }
    }
}

#[test]
fn s_harmonic_replacement_is_odd_and_scales() {
    let s = 0.25;
    let g = Grid1D::graded(-1.0, 1.0, &[-1.0, -0.5, 0.0, 0.5, 1.0], 1e-3, 1.05, 0.01).unwrap();
    let u1 = solve_s_harmonic(1.0, s, &g).unwrap();
    let uh = solve_s_harmonic(0.5, s, &g).unwrap();
    assert!(u1.eval(0.0).unwrap().abs() < 1e-10);
    for &x in g.nodes() {
        let odd = u1.eval(x).unwrap() + u1.eval(-x).unwrap();
        assert!(odd.abs() < 1e-8);
        if x.abs() >= 0.5 {
            assert_eq!(uh.eval(x).unwrap(), x.signum());
        }
    }
    // exterior data are scale invariant, so u_δ(x) = u_1(x/δ)
    for k in 0..=40 {
        let x = -0.45 + 0.9 * k as f64 / 40.0;
        let d = uh.eval(x).unwrap() - u1.eval(2.0 * x).unwrap();
        assert!(d.abs() < 1e-2, "x {x}: {d}");
    }
    let q1 = energy_q(&u1, &Interval::new(-1.0, 1.0), s).unwrap();
    let bar = 4.0 * 2f64.powf(1.0 - 2.0 * s) / (s * (1.0 - 2.0 * s));
    assert!(q1 < bar);
}

#[test]
fn s_harmonic_needs_small_s() {
    let g = Grid1D::uniform(-1.0, 1.0, 41).unwrap();
    assert!(solve_s_harmonic(1.0, 0.6, &g).is_err());
    assert!(solve_s_harmonic(0.0, 0.3, &g).is_err());
}

#[test]
fn armijo_trace_never_increases() {
    let w = make_quartic();
    let opts = SolveOptions::default().with_inits(vec![Initializer::Ramp]);
    let r = solve_boundary_layer(0.6, 0.2, -1.0, &w, &half_grid(20.0), &opts).unwrap();
    assert!(r.trace.len() > 2);
    for p in r.trace.windows(2) {
        // accepted steps decrease J; the recorded values carry rounding of J itself
        assert!(p[1].energy <= p[0].energy + 1e-12 * p[0].energy.abs(), "{p:?}");
    }
    let csv = trace_csv(&r.trace);
    assert!(csv.starts_with("iter,energy,pgnorm\n"));
    assert_eq!(csv.lines().count(), r.trace.len() + 1);
}

#[test]
fn unconverged_runs_report_it() {
    let w = make_quartic();
    let opts = SolveOptions {
        max_iters: 3,
        ..SolveOptions::default()
    };
    let r = solve_heteroclinic(0.75, &w, &sym_grid(20.0), &opts).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations, 3);
}

#[test]
fn m_eps_with_matching_constant_datum_is_a_pure_phase() {
    let w = make_quartic();
    let om = Interval::new(-1.0, 1.0);
    let g = Grid1D::uniform(-1.0, 1.0, 81).unwrap();
    let opts = SolveOptions::default().with_inits(m_eps_inits(&om, 0.1));
    let r = solve_m_eps(0.3, 0.1, &om, &Datum::constant(1.0), 0.0, &w, &g, &opts).unwrap();
    assert!(r.converged);
    assert!(r.value_f1.abs() < 1e-9);
    assert!(r.argmin.values().iter().all(|&v| (v - 1.0).abs() < 1e-6));
}

#[test]
fn m_eps_kappa_constraint_holds_near_the_boundary() {
    let w = make_quartic();
    let om = Interval::new(-1.0, 1.0);
    let g = Grid1D::uniform(-1.0, 1.0, 101).unwrap();
    let datum = Datum::constant(0.3);
    let opts = SolveOptions::default().with_inits(m_eps_inits(&om, 0.1));
    let r = solve_m_eps(0.75, 0.1, &om, &datum, 0.2, &w, &g, &opts).unwrap();
    for (&x, &v) in g.nodes().iter().zip(r.argmin.values()) {
        if (x - om.lo).abs() < 0.2 || (x - om.hi).abs() < 0.2 {
            assert!(v >= 0.3 - 1e-12);
        }
    }
    let free = solve_m_eps(0.75, 0.1, &om, &datum, 0.0, &w, &g, &opts).unwrap();
    assert!(free.value <= r.value + 1e-9);
}

#[test]
fn m_eps_prefers_the_lowest_start() {
    let w = make_quartic();
    let om = Interval::new(-1.0, 1.0);
    let g = Grid1D::uniform(-1.0, 1.0, 81).unwrap();
    let opts = SolveOptions::default().with_inits(m_eps_inits(&om, 0.1));
    let r = solve_m_eps(0.3, 0.1, &om, &Datum::sign(0.0), 0.0, &w, &g, &opts).unwrap();
    let best = r
        .start_values
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    assert!((r.value_f1 - best).abs() < 1e-9 * best.abs());
}

#[test]
fn m_eps_rejects_bad_input() {
    let w = make_quartic();
    let om = Interval::new(-1.0, 1.0);
    let g = Grid1D::uniform(-1.0, 1.0, 41).unwrap();
    let opts = SolveOptions::default();
    let kind = |r: Result<MEpsResult>| r.unwrap_err().kind();
    assert_eq!(
        kind(solve_m_eps(0.75, 0.1, &om, &Datum::constant(1.0), 0.0, &w, &g, &opts)),
        "PreconditionViolated"
    );
    assert_eq!(
        kind(solve_m_eps(0.3, 0.1, &om, &Datum::constant(0.0), 1.0, &w, &g, &opts)),
        "InvalidParameter"
    );
    let other = Grid1D::uniform(-1.0, 2.0, 41).unwrap();
    assert!(solve_m_eps(0.3, 0.1, &om, &Datum::constant(0.0), 0.0, &w, &other, &opts).is_err());
}

#[test]
fn m_eps_with_a_datum_varying_outside() {
    let w = make_quartic();
    let om = Interval::new(-1.0, 1.0);
    let g = Grid1D::uniform(-1.0, 1.0, 61).unwrap();
    let datum = Datum::Ramp {
        at: 0.0,
        width: 4.0,
        left: -0.5,
        right: 0.5,
    };
    let opts = SolveOptions::default().with_inits(m_eps_inits(&om, 0.2));
    let r = solve_m_eps(0.3, 0.2, &om, &datum, 0.0, &w, &g, &opts).unwrap();
    assert!(r.converged);
    assert_eq!(r.argmin.grid().len(), g.len());
    assert!(r.value_f1 > 0.0);
}

proptest! {
    #[test]
    fn projection_is_idempotent_and_non_expansive(
        vals in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..40),
        lo in -1.0f64..0.0,
        hi in 0.0f64..1.0,
        pin in 0usize..40,
    ) {
        let n = vals.len();
        let mut c = ConstraintSet::boxed(n, lo, hi);
        c.freeze(pin % n, 0.5 * (lo + hi));
        let mut a: Vec<f64> = vals.iter().map(|p| p.0).collect();
        let mut b: Vec<f64> = vals.iter().map(|p| p.1).collect();
        let before = sup_diff(&a, &b);
        c.project(&mut a);
        c.project(&mut b);
        prop_assert!(sup_diff(&a, &b) <= before + 1e-15);
        let again = {
            let mut t = a.clone();
            c.project(&mut t);
            t
        };
        prop_assert_eq!(again, a);
    }
}
