//! Projected gradient descent with Barzilai-Borwein steps and Armijo backtracking.

use serde::{Deserialize, Serialize};

use crate::energy::QuadForm;
use crate::potential::DoubleWell;
use crate::quad::{G3_W, G3_X};

use super::{ConstraintSet, SolveOptions};

/// `kin · (uᵀKu - 2fᵀu + c0) + pot · ∫ W(u)` over the grid range.
pub(crate) struct Problem<'a> {
    pub qf: QuadForm,
    pub kin: f64,
    pub pot: f64,
    pub w: &'a DoubleWell,
    pub x: Vec<f64>,
}

impl Problem<'_> {
    fn potential(&self, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let mut acc = 0.0;
        let mut g = grad;
        for c in 0..self.x.len() - 1 {
            let h = self.x[c + 1] - self.x[c];
            let (a, b) = (u[c], u[c + 1]);
            let mut e = 0.0;
            let (mut ga, mut gb) = (0.0, 0.0);
            for k in 0..3 {
                let t = G3_X[k];
                let v = a + (b - a) * t;
                e += G3_W[k] * self.w.eval(v);
                if g.is_some() {
                    let d = G3_W[k] * self.w.deriv(v);
                    ga += d * (1.0 - t);
                    gb += d * t;
                }
            }
            acc += h * e;
            if let Some(g) = g.as_deref_mut() {
                g[c] += self.pot * h * ga;
                g[c + 1] += self.pot * h * gb;
            }
        }
        acc
    }

    /// `J(v) - J(u)` without forming either value, given `K u` and `K v`.
    fn change(&self, u: &[f64], ku: &[f64], v: &[f64], kv: &[f64]) -> f64 {
        let f = self.qf.linear();
        let mut quad = 0.0;
        for i in 0..u.len() {
            let d = v[i] - u[i];
            quad += d * (kv[i] + ku[i] - 2.0 * f[i]);
        }
        let mut pot = 0.0;
        for c in 0..self.x.len() - 1 {
            let h = self.x[c + 1] - self.x[c];
            let mut e = 0.0;
            for k in 0..3 {
                let t = G3_X[k];
                let a = u[c] + (u[c + 1] - u[c]) * t;
                let b = v[c] + (v[c + 1] - v[c]) * t;
                e += G3_W[k] * (self.w.eval(b) - self.w.eval(a));
            }
            pot += h * e;
        }
        self.kin * quad + self.pot * pot
    }

    /// Objective and gradient given `ku = K u`.
    pub fn eval(&self, u: &[f64], ku: &[f64]) -> (f64, Vec<f64>) {
        let f = self.qf.linear();
        let quad = crate::energy::dot(u, ku) - 2.0 * crate::energy::dot(&f, u) + self.qf.constant();
        let mut grad: Vec<f64> = ku
            .iter()
            .zip(&f)
            .map(|(a, b)| 2.0 * self.kin * (a - b))
            .collect();
        let p = self.potential(u, Some(&mut grad));
        (self.kin * quad + self.pot * p, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub pgnorm: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub u: Vec<f64>,
    pub energy: f64,
    pub pg_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

const ARMIJO_C: f64 = 1e-4;
const STALL_ITERS: usize = 200;

/// Sup-norm of the projected gradient step in the lumped-mass metric.
fn pg_norm(u: &[f64], g: &[f64], d: &[f64], cons: &ConstraintSet) -> f64 {
    let mut m = 0.0f64;
    for i in 0..u.len() {
        if cons.frozen[i].is_some() {
            continue;
        }
        let p = (u[i] - g[i] / d[i]).clamp(cons.lower[i], cons.upper[i]);
        m = m.max((p - u[i]).abs());
    }
    m
}

pub(crate) fn minimize(p: &Problem, cons: &ConstraintSet, u0: &[f64], opts: &SolveOptions) -> Outcome {
    let n = u0.len();
    let d = p.qf.lumped_mass().to_vec();
    let mut u = u0.to_vec();
    cons.project(&mut u);
    let mut ku = vec![0.0; n];
    p.qf.apply(&u, &mut ku);
    let (mut e, mut g) = p.eval(&u, &ku);
    let mut trace = Vec::new();

    let scaled_sup = |g: &[f64]| {
        (0..n)
            .filter(|&i| cons.frozen[i].is_none())
            .fold(0.0f64, |m, i| m.max((g[i] / d[i]).abs()))
    };
    let gs = scaled_sup(&g);
    let mut t = if gs > 0.0 { 0.1 / gs } else { 1.0 };
    let mut pg = pg_norm(&u, &g, &d, cons);
    let mut iters = 0;
    let mut converged = pg <= opts.tol_pg;
    let mut best_pg = pg;
    let mut best_pg_at = (0usize, e);
    trace.push(TraceRow {
        iter: 0,
        energy: e,
        pgnorm: pg,
    });

    let mut un = vec![0.0; n];
    let mut kun = vec![0.0; n];
    while !converged && iters < opts.max_iters {
        iters += 1;
        let mut accepted = false;
        let mut en = e;
        let mut gn = Vec::new();
        for _ in 0..60 {
            for i in 0..n {
                un[i] = u[i] - t * g[i] / d[i];
            }
            cons.project(&mut un);
            p.qf.apply(&un, &mut kun);
            let (ev, gv) = p.eval(&un, &kun);
            let decrease: f64 = (0..n).map(|i| g[i] * (un[i] - u[i])).sum();
            // the change is formed directly: J itself carries large cancelling terms
            if p.change(&u, &ku, &un, &kun) <= ARMIJO_C * decrease {
                en = ev;
                gn = gv;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        // Barzilai-Borwein step in the lumped-mass metric
        let mut sds = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = un[i] - u[i];
            sds += d[i] * s * s;
            sy += s * (gn[i] - g[i]);
        }
        t = if sy > 0.0 { (sds / sy).clamp(1e-14, 1e14) } else { 2.0 * t };

        let pg_new = pg_norm(&un, &gn, &d, cons);
        if pg_new < best_pg {
            best_pg = pg_new;
            best_pg_at = (iters, en);
        }
        // stalled: no new pg low for a while and a flat energy since the last one
        let flat = (best_pg_at.1 - en).abs() / en.abs().max(1e-300) <= opts.tol_energy;
        let stalled = iters - best_pg_at.0 >= STALL_ITERS && flat;
        std::mem::swap(&mut u, &mut un);
        std::mem::swap(&mut ku, &mut kun);
        e = en;
        g = gn;
        pg = pg_new;
        trace.push(TraceRow {
            iter: iters,
            energy: e,
            pgnorm: pg,
        });
        converged = pg <= opts.tol_pg;
        if stalled {
            break;
        }
    }
    Outcome {
        u,
        energy: e,
        pg_norm: pg,
        iterations: iters,
        converged,
        trace,
    }
}
