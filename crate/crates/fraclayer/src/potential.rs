//! Double-well potentials.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

type RealMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A double-well potential with its first two derivatives.
#[derive(Clone)]
pub struct DoubleWell {
    name: String,
    eval: RealMap,
    deriv: RealMap,
    deriv2: RealMap,
}

impl fmt::Debug for DoubleWell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DoubleWell").field("name", &self.name).finish()
    }
}

impl DoubleWell {
    pub fn new<F, G, H>(name: impl Into<String>, eval: F, deriv: G, deriv2: H) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
            deriv2: Arc::new(deriv2),
        }
    }

    /// Look a potential up in the registry.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "quartic" => Some(make_quartic()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        (self.eval)(u)
    }

    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        (self.deriv)(u)
    }

    #[inline]
    pub fn deriv2(&self, u: f64) -> f64 {
        (self.deriv2)(u)
    }
}

/// W(u) = (1 - u^2)^2 / 4.
pub fn make_quartic() -> DoubleWell {
    DoubleWell::new(
        "quartic",
        |u| {
            let a = 1.0 - u * u;
            0.25 * a * a
        },
        |u| u * u * u - u,
        |u| 3.0 * u * u - 1.0,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellReport {
    pub potential: String,
    pub checks: Vec<ConditionCheck>,
}

impl WellReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.condition.as_str())
            .collect()
    }
}

const WELL_TOL: f64 = 1e-12;

/// Check the four structural conditions on a uniform sample of (-1, 1).
///
/// Failures are recorded per condition, never raised.
pub fn validate_double_well(w: &DoubleWell, n_samples: usize) -> WellReport {
    assert!(n_samples >= 3, "n_samples must be at least 3");
    let mut checks = Vec::with_capacity(5);
    let mut push = |condition: &str, passed: bool, detail: String| {
        checks.push(ConditionCheck {
            condition: condition.to_string(),
            passed,
            detail,
        })
    };

    let wm = w.eval(-1.0);
    let wp = w.eval(1.0);
    push("W(-1)=0", wm.abs() <= WELL_TOL, format!("W(-1) = {wm:e}"));
    push("W(1)=0", wp.abs() <= WELL_TOL, format!("W(1) = {wp:e}"));

    let dm = w.deriv(-1.0);
    let dp = w.deriv(1.0);
    push(
        "W'(-1)=W'(1)=0",
        dm.abs() <= WELL_TOL && dp.abs() <= WELL_TOL,
        format!("W'(-1) = {dm:e}, W'(1) = {dp:e}"),
    );

    // interior samples exclude the endpoints themselves
    let mut worst = f64::INFINITY;
    let mut worst_at = 0.0;
    for k in 1..=n_samples {
        let r = -1.0 + 2.0 * k as f64 / (n_samples + 1) as f64;
        let v = w.eval(r);
        if v < worst {
            worst = v;
            worst_at = r;
        }
    }
    push(
        "W>0 on (-1,1)",
        worst > 0.0,
        format!("min sample W({worst_at}) = {worst:e}"),
    );

    let cm = w.deriv2(-1.0);
    let cp = w.deriv2(1.0);
    push(
        "W''(+-1)>0",
        cm > 0.0 && cp > 0.0,
        format!("W''(-1) = {cm}, W''(1) = {cp}"),
    );

    WellReport {
        potential: w.name().to_string(),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quartic_values() {
        let w = make_quartic();
        assert_eq!(w.eval(1.0), 0.0);
        assert_eq!(w.eval(0.0), 0.25);
        assert_eq!(w.deriv2(-1.0), 2.0);
    }

    #[test]
    fn quartic_passes_validation() {
        let r = validate_double_well(&make_quartic(), 101);
        assert!(r.all_passed(), "{:?}", r);
        assert_eq!(r.checks.len(), 5);
    }

    #[test]
    fn single_well_fails_right_zero() {
        let w = DoubleWell::new("single", |u| u * u, |u| 2.0 * u, |_| 2.0);
        let r = validate_double_well(&w, 101);
        assert!(r.failed().contains(&"W(1)=0"));
    }

    #[test]
    fn shifted_well_fails_left_zero() {
        let q = make_quartic();
        let q2 = q.clone();
        let q3 = q.clone();
        let w = DoubleWell::new(
            "shifted",
            move |u| q.eval(u) + 0.01,
            move |u| q2.deriv(u),
            move |u| q3.deriv2(u),
        );
        let r = validate_double_well(&w, 101);
        assert!(r.failed().contains(&"W(-1)=0"));
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(DoubleWell::by_name("quartic").unwrap().name(), "quartic");
        assert!(DoubleWell::by_name("obstacle").is_none());
    }

    proptest! {
        #[test]
        fn quartic_is_even(u in -1.5f64..1.5) {
            let w = make_quartic();
            prop_assert!((w.eval(u) - w.eval(-u)).abs() <= 1e-15);
        }

        #[test]
        fn deriv_matches_central_difference(u in -1.5f64..1.5) {
            let w = make_quartic();
            let h = 1e-4;
            let fd = (w.eval(u + h) - w.eval(u - h)) / (2.0 * h);
            prop_assert!((fd - w.deriv(u)).abs() <= 10.0 * h * h);
            let fd2 = (w.deriv(u + h) - w.deriv(u - h)) / (2.0 * h);
            prop_assert!((fd2 - w.deriv2(u)).abs() <= 10.0 * h * h);
        }
    }
}
