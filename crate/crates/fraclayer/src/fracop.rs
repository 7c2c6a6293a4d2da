//! Pointwise fractional Laplacian and Euler-Lagrange residuals.
//!
//! `(−Δ)^s u(x) = PV ∫ (u(x) - u(y)) |x-y|^(-1-2s) dy`, without a normalizing
//! constant. Nodal values are read as samples of a smooth profile: a quintic
//! Lagrange interpolant on each cell, a Taylor model with finite-difference
//! derivatives on the symmetric window around `x`, and constant tails
//! integrated exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::energy::check_s;
use crate::funcrep::{GridFunction, Interp, Interval};
use crate::potential::DoubleWell;
use crate::quad::{GaussRule, G4_W, G4_X};
use crate::{FracError, Result};

/// Nodes, residual `4·(−Δ)^s u + W′(u)` and its sup-norm over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub nodes: Vec<f64>,
    pub residual: Vec<f64>,
    pub sup_norm: f64,
    pub interior_window: Interval,
}

impl ResidualReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,residual\n");
        for (x, r) in self.nodes.iter().zip(&self.residual) {
            let _ = writeln!(out, "{x:.16e},{r:.16e}");
        }
        out
    }

    /// Sup-norm over the nodes inside `sub`.
    pub fn sup_on(&self, sub: &Interval) -> f64 {
        self.nodes
            .iter()
            .zip(&self.residual)
            .filter(|(x, _)| sub.lo <= **x && **x <= sub.hi)
            .fold(0.0, |m, (_, r)| m.max(r.abs()))
    }
}

/// Interpolant data per cell, sampled at the Gauss points used for it.
struct Prepared<'a> {
    x: &'a [f64],
    v: &'a [f64],
    cl: f64,
    cr: f64,
    g8: Vec<(f64, f64)>,
    // values at 4 and 8 reference Gauss points of every cell
    at4: Vec<[f64; 4]>,
    at8: Vec<[f64; 8]>,
}

fn lagrange(xs: &[f64], ys: &[f64], y: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..xs.len() {
        let mut l = 1.0;
        for k in 0..xs.len() {
            if k != j {
                l *= (y - xs[k]) / (xs[j] - xs[k]);
            }
        }
        acc += ys[j] * l;
    }
    acc
}

impl<'a> Prepared<'a> {
    fn new(u: &'a GridFunction) -> Result<Self> {
        if u.interp() != Interp::PiecewiseLinear {
            return Err(FracError::InvalidParameter(
                "fractional Laplacian needs nodal values".into(),
            ));
        }
        let (Some(cl), Some(cr)) = (u.left_tail().value(), u.right_tail().value()) else {
            return Err(FracError::UndefinedTail(
                "fractional Laplacian needs both tails".into(),
            ));
        };
        let x = u.grid().nodes();
        let v = u.values();
        if x.len() < 4 {
            return Err(FracError::InvalidParameter("need at least 4 nodes".into()));
        }
        let g8: Vec<(f64, f64)> = GaussRule::new(8).on(0.0, 1.0).collect();
        let mut p = Self {
            x,
            v,
            cl,
            cr,
            g8,
            at4: Vec::new(),
            at8: Vec::new(),
        };
        let nc = x.len() - 1;
        p.at4 = (0..nc)
            .map(|c| {
                let h = x[c + 1] - x[c];
                G4_X.map(|t| p.interp(c, x[c] + h * t))
            })
            .collect();
        p.at8 = (0..nc)
            .map(|c| {
                let h = x[c + 1] - x[c];
                let mut out = [0.0; 8];
                for (k, o) in out.iter_mut().enumerate() {
                    *o = p.interp(c, x[c] + h * p.g8[k].0);
                }
                out
            })
            .collect();
        Ok(p)
    }

    /// Degree-5 Lagrange interpolant on the six nodes around cell `c`.
    fn interp(&self, c: usize, y: f64) -> f64 {
        let n = self.x.len();
        let m = n.min(6);
        let j0 = c.saturating_sub(2).min(n - m);
        lagrange(&self.x[j0..j0 + m], &self.v[j0..j0 + m], y)
    }

    /// `∫_lo^hi (u_i - u(y)) |x-y|^(-1-2s) dy` over part of cell `c` by Gauss.
    fn partial(&self, c: usize, lo: f64, hi: f64, xi: f64, ui: f64, s: f64) -> f64 {
        let mut acc = 0.0;
        for &(t, w) in &self.g8 {
            let y = lo + (hi - lo) * t;
            acc += w * (ui - self.interp(c, y)) * (y - xi).abs().powf(-1.0 - 2.0 * s);
        }
        acc * (hi - lo)
    }

    fn at_node(&self, i: usize, s: f64) -> f64 {
        let x = self.x;
        let v = self.v;
        let n = x.len();
        let xi = x[i];
        let ui = v[i];
        let hl = xi - x[i - 1];
        let hr = x[i + 1] - xi;
        let a = hl.min(hr);

        // symmetric window: odd Taylor terms cancel, even ones integrate exactly
        let mut acc = if i >= 2 && i + 2 < n {
            let w = fd_weights(xi, &x[i - 2..=i + 2], 4);
            let d = |m: usize| (0..5).map(|k| w[m][k] * v[i - 2 + k]).sum::<f64>();
            -d(2) * a.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s)
                - d(4) * a.powf(4.0 - 2.0 * s) / (12.0 * (4.0 - 2.0 * s))
        } else {
            let d2 = 2.0 * ((v[i + 1] - ui) / hr - (ui - v[i - 1]) / hl) / (hl + hr);
            -d2 * a.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s)
        };

        if hl > a {
            acc += self.partial(i - 1, x[i - 1], xi - a, xi, ui, s);
        }
        if hr > a {
            acc += self.partial(i, xi + a, x[i + 1], xi, ui, s);
        }

        for c in 0..n - 1 {
            if c == i - 1 || c == i {
                continue;
            }
            let h = x[c + 1] - x[c];
            let gap = if c < i { xi - x[c + 1] } else { x[c] - xi };
            let mut cell = 0.0;
            if gap < 4.0 * h {
                for (k, &(t, w)) in self.g8.iter().enumerate() {
                    let d = (x[c] + h * t - xi).abs();
                    cell += w * (ui - self.at8[c][k]) * d.powf(-1.0 - 2.0 * s);
                }
            } else {
                for k in 0..4 {
                    let d = (x[c] + h * G4_X[k] - xi).abs();
                    cell += G4_W[k] * (ui - self.at4[c][k]) * d.powf(-1.0 - 2.0 * s);
                }
            }
            acc += cell * h;
        }

        let two_s = 2.0 * s;
        acc += (ui - self.cl) * (xi - x[0]).powf(-two_s) / two_s;
        acc += (ui - self.cr) * (x[n - 1] - xi).powf(-two_s) / two_s;
        acc
    }
}

/// Finite-difference weights for derivatives `0..=m` at `z` on the nodes `xs`.
fn fd_weights(z: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

fn check_interior(u: &GridFunction, i: usize) -> Result<()> {
    let n = u.grid().len();
    if i == 0 || i + 1 >= n {
        return Err(FracError::PreconditionViolated(format!(
            "node {i} is not interior to a grid of {n} nodes"
        )));
    }
    Ok(())
}

/// `(−Δ)^s u` at interior node `i`.
pub fn frac_laplacian(u: &GridFunction, i: usize, s: f64) -> Result<f64> {
    check_s(s)?;
    check_interior(u, i)?;
    Ok(Prepared::new(u)?.at_node(i, s))
}

/// `(−Δ)^s u` at several interior nodes.
pub fn frac_laplacian_many(u: &GridFunction, nodes: &[usize], s: f64) -> Result<Vec<f64>> {
    check_s(s)?;
    for &i in nodes {
        check_interior(u, i)?;
    }
    let p = Prepared::new(u)?;
    Ok(nodes.par_iter().map(|&i| p.at_node(i, s)).collect())
}

/// The middle `fraction` of the grid range.
pub fn middle_window(u: &GridFunction, fraction: f64) -> Interval {
    let (l, r) = (u.grid().left(), u.grid().right());
    let c = 0.5 * (l + r);
    let half = 0.5 * fraction * (r - l);
    Interval::new(c - half, c + half)
}

/// Residual `4·(−Δ)^s u + W′(u)` at the nodes inside `window`.
///
/// The factor 4 is the first variation of `u(Q_Ω)`, which counts both
/// orderings of every pair.
pub fn pde_residual(
    u: &GridFunction,
    s: f64,
    w: &DoubleWell,
    window: &Interval,
) -> Result<ResidualReport> {
    let g = u.grid();
    if !(window.lo > g.left() && window.hi < g.right()) {
        return Err(FracError::PreconditionViolated(format!(
            "window ({}, {}) must lie inside the grid ({}, {})",
            window.lo,
            window.hi,
            g.left(),
            g.right()
        )));
    }
    let x = g.nodes();
    let idx: Vec<usize> = (1..x.len() - 1)
        .filter(|&i| window.lo <= x[i] && x[i] <= window.hi)
        .collect();
    let lap = frac_laplacian_many(u, &idx, s)?;
    let v = u.values();
    let residual: Vec<f64> = idx
        .iter()
        .zip(&lap)
        .map(|(&i, l)| 4.0 * l + w.deriv(v[i]))
        .collect();
    let sup_norm = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(ResidualReport {
        nodes: idx.iter().map(|&i| x[i]).collect(),
        residual,
        sup_norm,
        interior_window: *window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcrep::{Grid1D, TailModel};
    use crate::potential::make_quartic;
    use proptest::prelude::*;

    fn sampled(l: f64, n: usize, f: impl Fn(f64) -> f64, cl: f64, cr: f64) -> GridFunction {
        let grid = Grid1D::uniform(-l, l, n).unwrap();
        let vals = grid.nodes().iter().map(|&x| f(x)).collect();
        GridFunction::new_unconstrained(
            grid,
            vals,
            TailModel::Constant(cl),
            TailModel::Constant(cr),
            Interp::PiecewiseLinear,
        )
        .unwrap()
    }

    /// `∫_0^∞ (2f(x) - f(x+t) - f(x-t)) t^(-1-2s) dt` for `f = exp(-x²)`.
    ///
    /// Uses `f(x+t) + f(x-t) = 2f(x) e^(-t²) cosh(2xt)` to avoid cancellation.
    fn gaussian_oracle(x: f64, s: f64) -> f64 {
        let g = GaussRule::new(20);
        let h = |t: f64| {
            let z = -t * t + (2.0 * (x * t).sinh().powi(2)).ln_1p();
            -2.0 * (-x * x).exp() * z.exp_m1() * t.powf(-1.0 - 2.0 * s)
        };
        let mut acc = 0.0;
        let mut hi = 1.0;
        for _ in 0..60 {
            let lo = 0.5 * hi;
            acc += g.on(lo, hi).map(|(t, w)| w * h(t)).sum::<f64>();
            hi = lo;
        }
        let far = 60.0;
        let mut lo = 1.0;
        while lo < far {
            let hi = lo + 1.0;
            acc += g.on(lo, hi).map(|(t, w)| w * h(t)).sum::<f64>();
            lo = hi;
        }
        acc + 2.0 * (-x * x).exp() * far.powf(-2.0 * s) / (2.0 * s)
    }

    #[test]
    fn constant_gives_zero() {
        let u = sampled(2.0, 21, |_| 0.4, 0.4, 0.4);
        for i in 1..20 {
            assert!(frac_laplacian(&u, i, 0.7).unwrap().abs() < 1e-13);
        }
    }

    #[test]
    fn odd_linear_profile_vanishes_at_centre() {
        let u = sampled(50.0, 401, |x| x, -50.0, 50.0);
        for &s in &[0.3, 0.75] {
            assert!(frac_laplacian(&u, 200, s).unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn gaussian_matches_reduced_oracle() {
        // the window's finite-difference curvature gives an O(h^(4-2s)) error
        let f = |x: f64| (-x * x).exp();
        for &s in &[0.3, 0.5, 0.75] {
            let errs: Vec<f64> = [361usize, 721]
                .iter()
                .map(|&n| {
                    let u = sampled(9.0, n, f, 0.0, 0.0);
                    let c = (n - 1) / 2;
                    [c - (n - 1) / 9, c - (n - 1) / 18, c, c + (n - 1) / 36]
                        .iter()
                        .map(|&i| {
                            let x = u.grid().nodes()[i];
                            (frac_laplacian(&u, i, s).unwrap() - gaussian_oracle(x, s)).abs()
                        })
                        .fold(0.0, f64::max)
                })
                .collect();
            assert!(errs[1] < 2e-5, "s={s}: {errs:?}");
            assert!(errs[0] / errs[1] > 4.0, "s={s}: {errs:?}");
        }
    }

    #[test]
    fn plateau_sign_test() {
        // smooth non-decreasing profile, flat on [-1, 1] and constant outside [-3, 3]
        let phi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
        let step = move |x: f64| phi(x - 1.0) / (phi(x - 1.0) + phi(3.0 - x));
        let f = move |x: f64| step(x) - step(-x);
        let s = 0.6;
        let u = sampled(6.0, 481, f, -1.0, 1.0);
        let x = u.grid().nodes();
        let ia = x.iter().position(|&v| (v + 0.5).abs() < 1e-9).unwrap();
        let ib = x.iter().position(|&v| (v - 0.5).abs() < 1e-9).unwrap();
        let d = frac_laplacian(&u, ia, s).unwrap() - frac_laplacian(&u, ib, s).unwrap();
        assert!(d > 0.0);
        // ∫ (u(b+y) - u(a+y)) |y|^(-1-2s) dy with a = -1/2, b = 1/2
        let g = GaussRule::new(20);
        let h = |y: f64| f(0.5 + y) - f(-0.5 + y);
        let mut direct = 0.0;
        for k in 0..200 {
            let (lo, hi) = (0.5 + 0.02 * k as f64, 0.5 + 0.02 * (k + 1) as f64);
            direct += g
                .on(lo, hi)
                .map(|(y, w)| w * (h(y) + h(-y)) * y.powf(-1.0 - 2.0 * s))
                .sum::<f64>();
        }
        assert!((d - direct).abs() < 1e-5 * direct, "{d} vs {direct}");
    }

    #[test]
    fn residual_of_pure_phase_is_zero() {
        let u = sampled(3.0, 31, |_| -1.0, -1.0, -1.0);
        let r = pde_residual(&u, 0.7, &make_quartic(), &middle_window(&u, 0.5)).unwrap();
        assert!(r.sup_norm < 1e-12);
        assert!(!r.nodes.is_empty());
        assert!(r.to_csv().starts_with("x,residual\n"));
    }

    #[test]
    fn random_profile_has_large_residual() {
        let u = sampled(3.0, 61, |x| (7.3 * x).sin() * 0.9, 0.0, 0.0);
        let r = pde_residual(&u, 0.7, &make_quartic(), &middle_window(&u, 0.5)).unwrap();
        assert!(r.sup_norm > 10.0);
    }

    #[test]
    fn window_must_be_interior() {
        let u = sampled(3.0, 31, |_| 0.0, 0.0, 0.0);
        let w = Interval::new(-3.0, 0.0);
        assert!(matches!(
            pde_residual(&u, 0.4, &make_quartic(), &w),
            Err(FracError::PreconditionViolated(_))
        ));
        let grid = Grid1D::uniform(-1.0, 1.0, 11).unwrap();
        let v = GridFunction::sample(grid, |x| x, TailModel::None, TailModel::Constant(1.0)).unwrap();
        assert!(matches!(frac_laplacian(&v, 5, 0.4), Err(FracError::UndefinedTail(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn linear_in_u(a in -2.0f64..2.0, b in -2.0f64..2.0, s in 0.1f64..0.9) {
            let f1 = |x: f64| (-x * x).exp();
            let f2 = |x: f64| x.tanh();
            let u = sampled(4.0, 41, f1, 0.0, 0.0);
            let v = sampled(4.0, 41, f2, -1.0, 1.0);
            let w = sampled(4.0, 41, |x| a * f1(x) + b * f2(x), -b, b);
            for i in [5usize, 20, 33] {
                let lhs = frac_laplacian(&w, i, s).unwrap();
                let rhs = a * frac_laplacian(&u, i, s).unwrap() + b * frac_laplacian(&v, i, s).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            }
        }
    }
}
