//! Constrained minimizers: heteroclinic, boundary layer, s-harmonic replacement
//! and the direct minimization of `E_ε`.

mod optimize;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::energy::{
    cauchy_gap, check_s, energy_q, functional_f1, functional_g, functional_g_normalized, is_half,
    LadderEntry, NormalizedLadder, QuadForm, ScalingParams,
};
use crate::funcrep::{Datum, Grid1D, GridFunction, Interp, Interval, Spacing, TailModel};
use crate::potential::DoubleWell;
use crate::{FracError, Result};

pub use optimize::TraceRow;
use optimize::{minimize, Outcome, Problem};

/// Sign constraint of `Y_κ` near one endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideConstraint {
    /// `u ≥ value` within the radius.
    AtLeast(f64),
    /// `u ≤ value` within the radius.
    AtMost(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YKappa {
    pub kappa: f64,
    pub left: Option<SideConstraint>,
    pub right: Option<SideConstraint>,
}

/// Per-node box bounds, frozen values and the optional `Y_κ` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub frozen: Vec<Option<f64>>,
    pub y_kappa: Option<YKappa>,
}

impl ConstraintSet {
    pub fn boxed(n: usize, lower: f64, upper: f64) -> Self {
        Self {
            lower: vec![lower; n],
            upper: vec![upper; n],
            frozen: vec![None; n],
            y_kappa: None,
        }
    }

    pub fn freeze(&mut self, i: usize, v: f64) {
        self.frozen[i] = Some(v);
    }

    pub fn n_free(&self) -> usize {
        self.frozen.iter().filter(|f| f.is_none()).count()
    }

    /// Frozen values must respect the bounds.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.lower.len() {
            if self.lower[i] > self.upper[i] {
                return Err(FracError::PreconditionViolated(format!(
                    "empty box at node {i}: [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
            if let Some(v) = self.frozen[i] {
                if v < self.lower[i] - 1e-15 || v > self.upper[i] + 1e-15 {
                    return Err(FracError::PreconditionViolated(format!(
                        "frozen value {v} at node {i} outside [{}, {}]",
                        self.lower[i], self.upper[i]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Clamp into the box and reset frozen nodes.
    pub fn project(&self, u: &mut [f64]) {
        for i in 0..u.len() {
            u[i] = match self.frozen[i] {
                Some(v) => v,
                None => u[i].clamp(self.lower[i], self.upper[i]),
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Initializer {
    /// Linear interpolation between the two far states.
    Ramp,
    /// `tanh`-like step between the far states at `at` with the given width.
    Step { at: f64, width: f64 },
    /// Constant value inside the free region.
    PurePhase { value: f64 },
    /// The exterior datum evaluated inside the domain.
    Datum,
    /// Nodal values supplied by the caller.
    Given { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    BarzilaiBorweinArmijo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub tol_energy: f64,
    pub tol_pg: f64,
    pub step_rule: StepRule,
    pub inits: Vec<Initializer>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol_energy: 1e-10,
            tol_pg: 1e-6,
            step_rule: StepRule::BarzilaiBorweinArmijo,
            inits: vec![Initializer::Step { at: 0.0, width: 1.0 }],
        }
    }
}

impl SolveOptions {
    pub fn with_inits(mut self, inits: Vec<Initializer>) -> Self {
        self.inits = inits;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.inits.is_empty() {
            return Err(FracError::InvalidParameter(
                "at least one initializer is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    Heteroclinic,
    BoundaryLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub s: f64,
    /// Datum value at the frozen side, for boundary layers.
    pub gamma: Option<f64>,
    /// Far state at `-∞`.
    pub sign: f64,
}

/// Least-squares fit of `|u - target| ≈ C |x|^(-p)` on a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub window: (f64, f64),
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    pub profile: GridFunction,
    pub energy: f64,
    pub spec: LayerSpec,
    pub normalization: String,
    pub decay_fit: Option<DecayFit>,
    pub converged: bool,
    pub iterations: usize,
    pub pg_norm: f64,
    pub trace: Vec<TraceRow>,
}

impl LayerProfile {
    /// Whether the nodal values are monotone in the expected direction.
    pub fn is_monotone(&self) -> bool {
        let v = self.profile.values();
        let up = match self.spec.kind {
            LayerKind::Heteroclinic => true,
            LayerKind::BoundaryLayer => self.spec.sign < 0.0,
        };
        v.windows(2)
            .all(|p| if up { p[1] >= p[0] } else { p[1] <= p[0] })
    }
}

/// `iter,energy,pgnorm` rows.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("iter,energy,pgnorm\n");
    for r in trace {
        let _ = writeln!(out, "{},{:.16e},{:.16e}", r.iter, r.energy, r.pgnorm);
    }
    out
}

/// Fit `log|u - target|` against `log|x|` over nodes with `|x|` in `[a, b]`.
pub fn fit_decay(
    x: &[f64],
    u: &[f64],
    target: impl Fn(f64) -> f64,
    window: (f64, f64),
) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(u)
        .filter(|(x, _)| {
            let a = x.abs();
            a >= window.0 && a <= window.1
        })
        .filter_map(|(&x, &v)| {
            let d = (v - target(x)).abs();
            (d > 0.0).then(|| (x.abs().ln(), d.ln()))
        })
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(DecayFit {
        exponent: -slope,
        window,
        r2,
    })
}

fn init_values(init: &Initializer, x: &[f64], far_left: f64, far_right: f64, datum: Option<&Datum>) -> Result<Vec<f64>> {
    let (a, b) = (x[0], x[x.len() - 1]);
    Ok(match init {
        Initializer::Ramp => x
            .iter()
            .map(|&t| far_left + (far_right - far_left) * (t - a) / (b - a))
            .collect(),
        Initializer::Step { at, width } => x
            .iter()
            .map(|&t| {
                let r = 0.5 * (1.0 + ((t - at) / width).tanh());
                far_left + (far_right - far_left) * r
            })
            .collect(),
        Initializer::PurePhase { value } => vec![*value; x.len()],
        Initializer::Datum => {
            let g = datum.ok_or_else(|| {
                FracError::InvalidParameter("datum initializer needs a datum".into())
            })?;
            x.iter().map(|&t| g.eval(t).clamp(-1.0, 1.0)).collect()
        }
        Initializer::Given { values } => {
            if values.len() != x.len() {
                return Err(FracError::InvalidParameter(format!(
                    "initial profile has {} values for {} nodes",
                    values.len(),
                    x.len()
                )));
            }
            values.clone()
        }
    })
}

/// Run every initializer and keep the best converged result.
///
/// Ties are broken by the number of sign changes, then by initializer order.
fn multi_start(
    p: &Problem,
    cons: &ConstraintSet,
    starts: &[Vec<f64>],
    opts: &SolveOptions,
) -> (Outcome, Vec<Outcome>) {
    let all: Vec<Outcome> = starts.par_iter().map(|u0| minimize(p, cons, u0, opts)).collect();
    let sign_changes = |u: &[f64]| u.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
    let pick = |only_converged: bool| {
        all.iter()
            .enumerate()
            .filter(|(_, o)| o.converged || !only_converged)
            .min_by(|(i, a), (j, b)| {
                a.energy
                    .total_cmp(&b.energy)
                    .then(sign_changes(&a.u).cmp(&sign_changes(&b.u)))
                    .then(i.cmp(j))
            })
            .map(|(_, o)| o.clone())
    };
    let best = pick(true).or_else(|| pick(false)).expect("at least one start");
    (best, all)
}

/// First point where the piecewise-linear data crosses `level`.
fn level_crossing(x: &[f64], v: &[f64], level: f64) -> Option<f64> {
    for i in 0..x.len() - 1 {
        let (a, b) = (v[i] - level, v[i + 1] - level);
        if a == 0.0 {
            return Some(x[i]);
        }
        if (a < 0.0) != (b < 0.0) {
            return Some(x[i] - a * (x[i + 1] - x[i]) / (b - a));
        }
    }
    None
}

/// `u_γ(x) = u₀(x + x_γ)` with `u₀(x_γ) = γ`, the heteroclinic slid to pass through `γ` at 0.
pub fn shifted_heteroclinic(u0: &GridFunction, gamma: f64) -> Result<GridFunction> {
    let xg = level_crossing(u0.grid().nodes(), u0.values(), gamma).ok_or_else(|| {
        FracError::PreconditionViolated(format!("profile never reaches {gamma}"))
    })?;
    Ok(u0.translate(-xg))
}

/// Heteroclinic `u₀` from `-1` to `+1` on a symmetric grid `[-L, L]` with `u(0) = 0`.
pub fn solve_heteroclinic(
    s: f64,
    w: &DoubleWell,
    grid: &Grid1D,
    opts: &SolveOptions,
) -> Result<LayerProfile> {
    check_s(s)?;
    opts.validate()?;
    let x = grid.nodes().to_vec();
    let n = x.len();
    let l = grid.right();
    if (grid.left() + l).abs() > 1e-12 * l {
        return Err(FracError::PreconditionViolated(
            "heteroclinic grid must be symmetric about 0".into(),
        ));
    }
    let centre = x
        .iter()
        .position(|&t| t.abs() <= 1e-12 * l)
        .ok_or_else(|| FracError::PreconditionViolated("grid must contain the node 0".into()))?;
    let qf = QuadForm::assemble(grid, s, Some(-1.0), Some(1.0))?;
    let mut cons = ConstraintSet::boxed(n, -1.0, 1.0);
    cons.freeze(centre, 0.0);
    let pinned = qf.edges_pinned();
    if pinned {
        cons.freeze(0, -1.0);
        cons.freeze(n - 1, 1.0);
    }
    let p = Problem {
        qf,
        kin: 1.0,
        pot: 1.0,
        w,
        x: x.clone(),
    };
    let starts = opts
        .inits
        .iter()
        .map(|i| init_values(i, &x, -1.0, 1.0, None))
        .collect::<Result<Vec<_>>>()?;
    let (best, _) = multi_start(&p, &cons, &starts, opts);

    let mut profile = GridFunction::new(
        grid.clone(),
        best.u.clone(),
        TailModel::Constant(-1.0),
        TailModel::Constant(1.0),
        Interp::PiecewiseLinear,
    )?;
    // re-center on the interpolated zero
    if let Some(z) = level_crossing(&x, profile.values(), 0.0) {
        if z != 0.0 {
            let shifted = profile.translate(-z);
            let mut v = shifted.resample(grid.clone())?.values().to_vec();
            v[centre] = 0.0;
            if pinned {
                v[0] = -1.0;
                v[n - 1] = 1.0;
            }
            profile = profile.with_values(v)?;
        }
    }
    let energy = if is_half(s) {
        symmetric_ladder(&profile, &half_ladder(l), s, w)?.limit
    } else if s > 0.5 {
        functional_g(&profile, &Interval::real_line(), s, w)?
    } else {
        functional_g(&profile, &Interval::new(-l, l), s, w)?
    };
    let decay_fit = fit_decay(
        &x,
        profile.values(),
        |t| t.signum(),
        (0.25 * l, 0.5 * l),
    );
    Ok(LayerProfile {
        profile,
        energy,
        spec: LayerSpec {
            kind: LayerKind::Heteroclinic,
            s,
            gamma: None,
            sign: -1.0,
        },
        normalization: if is_half(s) {
            "u(0)=0 pin; energy is the slope of G(u, B_R) in ln R".into()
        } else {
            "u(0)=0 pin".into()
        },
        decay_fit,
        converged: best.converged,
        iterations: best.iterations,
        pg_norm: best.pg_norm,
        trace: best.trace,
    })
}

/// Radii `L/16, L/8, L/4, L/2` used for normalized ladders on a window of size `L`.
pub(crate) fn half_ladder(l: f64) -> Vec<f64> {
    [16.0, 8.0, 4.0, 2.0]
        .iter()
        .map(|d| l / d)
        .filter(|&r| r > 1.0)
        .collect()
}

/// `G_s(u, (-R, R))` over a ladder of radii, normalized by `ln R`.
///
/// `limit` is the slope of `G` against `ln R` over the last two rungs, which
/// removes the `O(1/ln R)` offset of the plain quotient.
pub fn symmetric_ladder(
    u: &GridFunction,
    radii: &[f64],
    s: f64,
    w: &DoubleWell,
) -> Result<NormalizedLadder> {
    if radii.len() < 2 || radii.windows(2).any(|p| p[1] <= p[0]) || radii[0] <= 1.0 {
        return Err(FracError::InvalidParameter(
            "symmetric ladder needs two or more increasing radii above 1".into(),
        ));
    }
    let entries = radii
        .iter()
        .map(|&r| {
            let energy = functional_g(u, &Interval::new(-r, r), s, w)?;
            Ok(LadderEntry {
                r,
                energy,
                normalized: energy / r.ln(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let slopes: Vec<f64> = entries
        .windows(2)
        .map(|p| (p[1].energy - p[0].energy) / (p[1].r.ln() - p[0].r.ln()))
        .collect();
    Ok(NormalizedLadder {
        limit: *slopes.last().unwrap(),
        cauchy_gap: cauchy_gap(&slopes),
        entries,
    })
}

/// Boundary layer `w₀(·; sign, γ)` on a grid `[-L, 0]`, frozen to `γ` on `R⁺`.
pub fn solve_boundary_layer(
    s: f64,
    gamma: f64,
    sign: f64,
    w: &DoubleWell,
    grid: &Grid1D,
    opts: &SolveOptions,
) -> Result<LayerProfile> {
    check_s(s)?;
    opts.validate()?;
    if !(gamma.abs() < 1.0) {
        return Err(FracError::GammaAtWell(gamma.abs()));
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(FracError::InvalidParameter(format!("sign must be ±1, got {sign}")));
    }
    if grid.right().abs() > 1e-12 * grid.left().abs() {
        return Err(FracError::PreconditionViolated(
            "boundary-layer grid must end at 0".into(),
        ));
    }
    let x = grid.nodes().to_vec();
    let n = x.len();
    let l = -grid.left();
    let qf = QuadForm::assemble(grid, s, Some(sign), Some(gamma))?;
    let (lo, hi) = if sign < 0.0 { (-1.0, gamma) } else { (gamma, 1.0) };
    let mut cons = ConstraintSet::boxed(n, lo, hi);
    if qf.edges_pinned() {
        cons.freeze(0, sign);
        cons.freeze(n - 1, gamma);
    }
    let p = Problem {
        qf,
        kin: 1.0,
        pot: 1.0,
        w,
        x: x.clone(),
    };
    let starts = opts
        .inits
        .iter()
        .map(|i| init_values(i, &x, sign, gamma, None))
        .collect::<Result<Vec<_>>>()?;
    let (best, _) = multi_start(&p, &cons, &starts, opts);
    let profile = GridFunction::new(
        grid.clone(),
        best.u.clone(),
        TailModel::Constant(sign),
        TailModel::Constant(gamma),
        Interp::PiecewiseLinear,
    )?;
    let energy = boundary_energy(&profile, s, w, l)?;
    let decay_fit = fit_decay(&x, profile.values(), |_| sign, (0.25 * l, 0.5 * l));
    Ok(LayerProfile {
        profile,
        energy,
        spec: LayerSpec {
            kind: LayerKind::BoundaryLayer,
            s,
            gamma: Some(gamma),
            sign,
        },
        normalization: "none".into(),
        decay_fit,
        converged: best.converged,
        iterations: best.iterations,
        pg_norm: best.pg_norm,
        trace: best.trace,
    })
}

/// `G_s(w, R⁻)` for `s > 1/2`, the normalized ladder value at `s = 1/2`, and the
/// window energy `G_s(w, (-L, 0))` for `s < 1/2`.
fn boundary_energy(w0: &GridFunction, s: f64, w: &DoubleWell, l: f64) -> Result<f64> {
    if is_half(s) {
        Ok(functional_g_normalized(w0, &half_ladder(l), s, w)?.limit)
    } else if s > 0.5 {
        functional_g(w0, &Interval::negative_half(), s, w)
    } else {
        functional_g(w0, &Interval::new(-l, 0.0), s, w)
    }
}

/// Minimizer of `u(Q_{(-1,1)})` with `u = sign(x)` outside `(-δ, δ)`.
///
/// Solved as a symmetric positive-definite system on the free nodes by
/// conjugate gradients.
pub fn solve_s_harmonic(delta: f64, s: f64, grid: &Grid1D) -> Result<GridFunction> {
    check_s(s)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(FracError::InvalidParameter(format!("delta must lie in (0, 1], got {delta}")));
    }
    if s >= 0.5 {
        return Err(FracError::InvalidParameter("s-harmonic replacement needs s < 1/2".into()));
    }
    if (grid.left() + 1.0).abs() > 1e-12 || (grid.right() - 1.0).abs() > 1e-12 {
        return Err(FracError::PreconditionViolated("grid must span [-1, 1]".into()));
    }
    let x = grid.nodes();
    let n = x.len();
    let qf = QuadForm::assemble(grid, s, Some(-1.0), Some(1.0))?;
    let tol = 1e-12;
    let free: Vec<usize> = (0..n).filter(|&i| x[i].abs() < delta - tol).collect();
    let mut u: Vec<f64> = x.iter().map(|&t| if t > 0.0 { 1.0 } else if t < 0.0 { -1.0 } else { 0.0 }).collect();
    for &i in &free {
        u[i] = 0.0;
    }
    if !free.is_empty() {
        let f = qf.linear();
        let k = qf.matrix();
        // rhs = f_F - K_{F,C} u_C
        let mut uc = u.clone();
        for &i in &free {
            uc[i] = 0.0;
        }
        let mut kuc = vec![0.0; n];
        qf.apply(&uc, &mut kuc);
        let b: Vec<f64> = free.iter().map(|&i| f[i] - kuc[i]).collect();
        let m = free.len();
        let apply = |v: &[f64], out: &mut [f64]| {
            out.par_iter_mut().enumerate().for_each(|(a, o)| {
                let row = &k[free[a] * n..(free[a] + 1) * n];
                let mut acc = 0.0;
                for (bb, &j) in free.iter().enumerate() {
                    acc += row[j] * v[bb];
                }
                *o = acc;
            });
        };
        let diag: Vec<f64> = free.iter().map(|&i| k[i * n + i]).collect();
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(FracError::SingularSystem("non-positive diagonal".into()));
        }
        let sol = pcg(apply, &b, &diag, 1e-13, 20 * m + 100)?;
        for (a, &i) in free.iter().enumerate() {
            u[i] = sol[a];
        }
    }
    GridFunction::new(
        grid.clone(),
        u,
        TailModel::Constant(-1.0),
        TailModel::Constant(1.0),
        Interp::PiecewiseLinear,
    )
}

/// Jacobi-preconditioned conjugate gradients.
fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    diag: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let m = b.len();
    let dot = crate::energy::dot;
    let mut xk = vec![0.0; m];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(xk);
    }
    let mut ap = vec![0.0; m];
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(FracError::SingularSystem(format!("pᵀKp = {pap}")));
        }
        let alpha = rz / pap;
        for i in 0..m {
            xk[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= rtol * bnorm {
            return Ok(xk);
        }
        for i in 0..m {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(FracError::SingularSystem("conjugate gradients did not converge".into()))
}

/// Result of the direct minimization of `E_ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MEpsResult {
    pub s: f64,
    pub eps: f64,
    /// Minimum of `E_ε`.
    pub value: f64,
    /// `E_ε / ε`.
    pub value_f1: f64,
    pub argmin: GridFunction,
    pub best_init: usize,
    /// `F^{(1)}` of every start, `None` when that start did not converge.
    pub start_values: Vec<Option<f64>>,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

/// Default multi-start set: pure phases, the datum, and single interfaces.
pub fn m_eps_inits(omega: &Interval, eps: f64) -> Vec<Initializer> {
    let mut inits = vec![
        Initializer::PurePhase { value: -1.0 },
        Initializer::PurePhase { value: 1.0 },
        Initializer::Datum,
    ];
    let count = (2 + (omega.len() / eps).ceil() as usize).min(24);
    let per_side = count.div_ceil(2);
    for k in 0..per_side {
        let at = omega.lo + omega.len() * (k as f64 + 0.5) / per_side as f64;
        inits.push(Initializer::Step { at, width: eps });
        inits.push(Initializer::Step { at, width: -eps });
    }
    inits
}

/// `m_ε` (`κ = 0`) or `m_ε^κ`, minimized over the nodal values on `grid`.
///
/// `grid` must span `Ω`. A datum that is not constant outside `Ω` is
/// represented by frozen nodes appended out to `10 |Ω|`. Steps in `opts.inits`
/// go from `-1` to `+1` for positive width and the reverse for negative width.
#[allow(clippy::too_many_arguments)]
pub fn solve_m_eps(
    s: f64,
    eps: f64,
    omega: &Interval,
    g: &Datum,
    kappa: f64,
    w: &DoubleWell,
    grid: &Grid1D,
    opts: &SolveOptions,
) -> Result<MEpsResult> {
    let params = ScalingParams::new(s, eps)?;
    opts.validate()?;
    if (grid.left() - omega.lo).abs() > 1e-12 || (grid.right() - omega.hi).abs() > 1e-12 {
        return Err(FracError::PreconditionViolated("grid must span Ω".into()));
    }
    if !(kappa >= 0.0 && kappa < 0.5 * omega.len()) {
        return Err(FracError::InvalidParameter(format!(
            "kappa must lie in [0, |Ω|/2), got {kappa}"
        )));
    }
    let (gl, gr) = (g.eval(omega.lo), g.eval(omega.hi));
    if s >= 0.5 && !(gl.abs() < 1.0 && gr.abs() < 1.0) {
        return Err(FracError::PreconditionViolated(
            "|g| < 1 on ∂Ω is required for s ≥ 1/2".into(),
        ));
    }

    // extend the grid when the datum varies outside Ω
    let (full, n_left) = if g.constant_outside(omega) {
        (grid.clone(), 0)
    } else {
        extend_grid(grid, 10.0 * omega.len())?
    };
    let x = full.nodes().to_vec();
    let n = x.len();
    let (tl, tr) = if g.constant_outside(omega) {
        (gl, gr)
    } else {
        g.far_values(omega, 10.0 * omega.len())
    };
    let qf = QuadForm::assemble(&full, s, Some(tl), Some(tr))?;
    let pinned = qf.edges_pinned();
    let mut base = ConstraintSet::boxed(n, -1.0, 1.0);
    let n_omega = grid.len();
    for i in 0..n {
        if i < n_left || i >= n_left + n_omega {
            base.freeze(i, g.eval(x[i]).clamp(-1.0, 1.0));
        }
    }
    if pinned {
        base.freeze(n_left, gl);
        base.freeze(n_left + n_omega - 1, gr);
    }

    // Y_κ: one constraint set per branch choice at zero data
    let side = |v: f64| -> Vec<Option<SideConstraint>> {
        if kappa == 0.0 {
            vec![None]
        } else if v > 0.0 {
            vec![Some(SideConstraint::AtLeast(v))]
        } else if v < 0.0 {
            vec![Some(SideConstraint::AtMost(v))]
        } else {
            vec![Some(SideConstraint::AtLeast(0.0)), Some(SideConstraint::AtMost(0.0))]
        }
    };
    let mut branches = Vec::new();
    for l in side(gl) {
        for r in side(gr) {
            let mut c = base.clone();
            for i in n_left..n_left + n_omega {
                let apply = |c: &mut ConstraintSet, sc: Option<SideConstraint>| match sc {
                    Some(SideConstraint::AtLeast(v)) => c.lower[i] = c.lower[i].max(v),
                    Some(SideConstraint::AtMost(v)) => c.upper[i] = c.upper[i].min(v),
                    None => {}
                };
                if (x[i] - omega.lo).abs() < kappa {
                    apply(&mut c, l);
                }
                if (x[i] - omega.hi).abs() < kappa {
                    apply(&mut c, r);
                }
            }
            c.y_kappa = (kappa > 0.0).then_some(YKappa {
                kappa,
                left: l,
                right: r,
            });
            c.validate()?;
            branches.push(c);
        }
    }

    // work with F1 / b̃ = (a/b) u(Q) + ∫W, which keeps the residual scale O(1)
    let kin = params.a_eps / params.b_eps;
    let p = Problem {
        qf,
        kin,
        pot: 1.0,
        w,
        x: x.clone(),
    };
    let starts: Vec<Vec<f64>> = opts
        .inits
        .iter()
        .map(|init| match init {
            Initializer::Step { at, width } => {
                let (a, b, wd) = if *width >= 0.0 { (-1.0, 1.0, *width) } else { (1.0, -1.0, -width) };
                init_values(&Initializer::Step { at: *at, width: wd }, &x, a, b, Some(g))
            }
            other => init_values(other, &x, -1.0, 1.0, Some(g)),
        })
        .collect::<Result<_>>()?;

    let mut candidates = Vec::new();
    for cons in &branches {
        let (best, all) = multi_start(&p, cons, &starts, opts);
        candidates.push((best, all));
    }
    let (bi, (best, all)) = candidates
        .into_iter()
        .enumerate()
        .min_by(|a, b| {
            let ka = (!a.1 .0.converged, a.1 .0.energy);
            let kb = (!b.1 .0.converged, b.1 .0.energy);
            ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(a.0.cmp(&b.0))
        })
        .unwrap();
    let _ = bi;
    let best_init = all
        .iter()
        .position(|o| o.u == best.u)
        .unwrap_or(0);

    let argmin_full = GridFunction::new(
        full.clone(),
        best.u.clone(),
        TailModel::Constant(tl),
        TailModel::Constant(tr),
        Interp::PiecewiseLinear,
    )?;
    let value_f1 = functional_f1(&argmin_full, &params, omega, w)?;
    let argmin = if n_left == 0 && full.len() == n_omega {
        argmin_full
    } else {
        GridFunction::new(
            grid.clone(),
            best.u[n_left..n_left + n_omega].to_vec(),
            TailModel::Constant(gl),
            TailModel::Constant(gr),
            Interp::PiecewiseLinear,
        )?
    };
    let start_values = all
        .iter()
        .map(|o| o.converged.then(|| o.energy * params.b_tilde))
        .collect();
    Ok(MEpsResult {
        s,
        eps,
        value: value_f1 * eps,
        value_f1,
        argmin,
        best_init,
        start_values,
        converged: best.converged,
        trace: best.trace,
    })
}

/// Append nodes on both sides out to distance `reach`, growing geometrically.
fn extend_grid(grid: &Grid1D, reach: f64) -> Result<(Grid1D, usize)> {
    let x = grid.nodes();
    let h0 = grid.cell_len(0).min(grid.cell_len(grid.n_cells() - 1));
    let mut left = Vec::new();
    let mut h = h0;
    let mut d = 0.0;
    while d < reach {
        h = (h * 1.15).min(0.05 * reach);
        d = (d + h).min(reach);
        left.push(x[0] - d);
    }
    let n_left = left.len();
    let mut nodes: Vec<f64> = left.into_iter().rev().collect();
    nodes.extend_from_slice(x);
    let mut h = h0;
    let mut d = 0.0;
    let right = x[x.len() - 1];
    while d < reach {
        h = (h * 1.15).min(0.05 * reach);
        d = (d + h).min(reach);
        nodes.push(right + d);
    }
    Ok((Grid1D::from_nodes(nodes, Spacing::Custom)?, n_left))
}

/// `u(Q_{(-1,1)})` of a profile, used for the replacement energies.
pub fn q_energy(u: &GridFunction, s: f64) -> Result<f64> {
    energy_q(u, &Interval::new(-1.0, 1.0), s)
}

#[cfg(test)]
mod tests;
