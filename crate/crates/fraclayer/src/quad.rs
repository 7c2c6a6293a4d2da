//! Quadrature rules and stable power integrals.

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// n-point rule via Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped to [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(move |(&t, &w)| (c + r * t, r * w))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Four-point Gauss-Legendre nodes on [0, 1].
pub const G4_X: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_9,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];
pub const G4_W: [f64; 4] = [
    0.173_927_422_568_726_93,
    0.326_072_577_431_273_07,
    0.326_072_577_431_273_07,
    0.173_927_422_568_726_93,
];

/// Three-point Gauss-Legendre nodes on [0, 1]; exact for quintics.
pub const G3_X: [f64; 3] = [
    0.112_701_665_379_258_31,
    0.5,
    0.887_298_334_620_741_7,
];
pub const G3_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// `∫_a^b t^(e-1) dt` for `0 <= a < b <= ∞`, stable as `e -> 0`.
///
/// Returns `+∞` when the integral diverges at either end.
pub fn pint(a: f64, b: f64, e: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= a);
    if b == a {
        return 0.0;
    }
    if a == 0.0 {
        return if e > 0.0 { b.powf(e) / e } else { f64::INFINITY };
    }
    if b.is_infinite() {
        return if e < 0.0 { -a.powf(e) / e } else { f64::INFINITY };
    }
    let l = (b / a).ln();
    if e == 0.0 {
        l
    } else {
        a.powf(e) * (e * l).exp_m1() / e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let g = GaussRule::new(8);
        let v: f64 = g.on(0.0, 2.0).map(|(x, w)| w * x.powi(15)).sum();
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9 * v);
        let w: f64 = g.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hardcoded_rules_match_generated() {
        let g = GaussRule::new(4);
        for i in 0..4 {
            assert!((0.5 * (g.nodes[i] + 1.0) - G4_X[i]).abs() < 1e-15);
            assert!((0.5 * g.weights[i] - G4_W[i]).abs() < 1e-15);
        }
        let g = GaussRule::new(3);
        for i in 0..3 {
            assert!((0.5 * (g.nodes[i] + 1.0) - G3_X[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn pint_limits() {
        assert!((pint(1.0, 2.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((pint(1.0, 2.0, 1e-9) - 2f64.ln()).abs() < 1e-9);
        assert!((pint(0.0, 4.0, 0.5) - 4.0).abs() < 1e-14);
        assert!(pint(0.0, 1.0, -0.2).is_infinite());
        assert!((pint(2.0, f64::INFINITY, -1.0) - 0.5).abs() < 1e-15);
        assert!(pint(2.0, f64::INFINITY, 0.0).is_infinite());
    }
}
