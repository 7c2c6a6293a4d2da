//! First-order expansion of the minimum values: `m₁`, `c_⋆`, `Ψ`, recovery
//! sequences, the small-`s` counterexample and the `s ↘ 1/2` sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{
    b_r, cauchy_gap, check_s, energy_q, functional_f1, interaction, is_half, potential_integral,
    ScalingParams,
};
use crate::funcrep::{
    phase_to_function, BinaryPhase, Datum, Grid1D, GridFunction, Interp, Interval, Spacing,
    TailModel,
};
use crate::potential::DoubleWell;
use crate::solvers::{
    solve_boundary_layer, solve_heteroclinic, solve_s_harmonic, LayerProfile,
    SolveOptions,
};
use crate::{FracError, Result};

/// Grid and solver settings for layer problems in rescaled units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    /// Truncation length: `[-L, L]` for heteroclinics, `[-L, 0]` for boundary layers.
    pub l: f64,
    pub h_min: f64,
    pub growth: f64,
    pub solve: SolveOptions,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            l: 400.0,
            h_min: 0.02,
            growth: 1.05,
            solve: SolveOptions::default(),
        }
    }
}

impl LayerConfig {
    pub fn with_l(mut self, l: f64) -> Self {
        self.l = l;
        self
    }

    pub fn symmetric_grid(&self) -> Result<Grid1D> {
        Grid1D::graded(-self.l, self.l, &[0.0], self.h_min, self.growth, self.l / 100.0)
    }

    pub fn half_grid(&self) -> Result<Grid1D> {
        Grid1D::graded(-self.l, 0.0, &[0.0], self.h_min, self.growth, self.l / 100.0)
    }
}

/// Grid on `Ω` for `solve_m_eps`, graded toward `∂Ω`, the midpoint and the
/// datum's transition points with `h_min = h_rel ε`.
pub fn omega_grid(omega: &Interval, g: &Datum, eps: f64, h_rel: f64) -> Result<Grid1D> {
    let mut foci = vec![omega.lo, 0.5 * (omega.lo + omega.hi), omega.hi];
    foci.extend(datum_transitions(g, omega));
    foci.sort_by(f64::total_cmp);
    Grid1D::graded(omega.lo, omega.hi, &foci, h_rel * eps, 1.05, 0.02 * omega.len())
}

// ---------------------------------------------------------------- m₁ for s < 1/2

/// Nelder-Mead simplex minimization.
fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = (0..=n)
        .map(|i| {
            let mut x = x0.to_vec();
            if i > 0 {
                x[i - 1] += step;
            }
            let v = f(&x);
            (x, v)
        })
        .collect();
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let spread = simplex
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= tol * (1.0 + best.abs()) && spread <= tol {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr < worst { along(0.5) } else { along(-0.5) };
            let fc = f(&xc);
            if fc < worst.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for j in 0..n {
                        x[j] = x0[j] + 0.5 * (x[j] - x0[j]);
                    }
                    *v = f(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// `χ_E - χ_{E^c}` on `Ω` with the datum outside.
///
/// A datum that varies outside `Ω` is sampled cell-wise out to `10 |Ω|`.
pub fn phase_with_datum(e: &BinaryPhase, g: &Datum) -> Result<GridFunction> {
    let om = e.omega;
    if g.constant_outside(&om) {
        let (l, r) = g.far_values(&om, 1.0);
        return phase_to_function(e, TailModel::Constant(l), TailModel::Constant(r));
    }
    let inner = phase_to_function(e, TailModel::Constant(0.0), TailModel::Constant(0.0))?;
    let reach = 10.0 * om.len();
    let mut offsets = vec![0.0];
    let mut h = om.len() / 400.0;
    while *offsets.last().unwrap() < reach {
        let next = (offsets.last().unwrap() + h).min(reach);
        offsets.push(next);
        h *= 1.08;
    }
    let mut nodes: Vec<f64> = offsets.iter().rev().map(|d| om.lo - d).collect();
    let mut values: Vec<f64> = nodes
        .windows(2)
        .map(|p| g.eval(0.5 * (p[0] + p[1])))
        .collect();
    nodes.pop();
    nodes.extend_from_slice(inner.grid().nodes());
    values.extend_from_slice(inner.values());
    for p in offsets.windows(2) {
        nodes.push(om.hi + p[1]);
        values.push(g.eval(om.hi + 0.5 * (p[0] + p[1])));
    }
    let (l, r) = g.far_values(&om, reach);
    GridFunction::new_unconstrained(
        Grid1D::from_nodes(nodes, Spacing::Custom)?,
        values,
        TailModel::Constant(l),
        TailModel::Constant(r),
        Interp::PiecewiseConstant,
    )
}

/// `u(Ω,Ω) + 2u(Ω,Ω^c)` for `u = χ_E - χ_{E^c}` in `Ω` and `u = g` outside.
pub fn phase_energy(e: &BinaryPhase, g: &Datum, s: f64) -> Result<f64> {
    energy_q(&phase_with_datum(e, g)?, &e.omega, s)
}

/// Jump positions from unconstrained coordinates: clamped into `Ω`, sorted,
/// and coincident pairs removed (they cancel).
fn normalize_jumps(om: &Interval, raw: &[f64]) -> Vec<f64> {
    let margin = 1e-9 * om.len();
    let mut j: Vec<f64> = raw
        .iter()
        .map(|x| x.clamp(om.lo + margin, om.hi - margin))
        .collect();
    j.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(j.len());
    for x in j {
        match out.last() {
            Some(&y) if x - y <= margin => {
                out.pop();
            }
            _ => out.push(x),
        }
    }
    // jumps on the boundary margin change nothing
    out.retain(|&x| x > om.lo + margin && x < om.hi - margin);
    out
}

fn trace_mismatch(e: &BinaryPhase, g: &Datum) -> usize {
    let gl = g.eval(e.omega.lo - 1e-12 * e.omega.len().max(1.0));
    let gr = g.eval(e.omega.hi + 1e-12 * e.omega.len().max(1.0));
    usize::from(gl * e.sign_left() < 0.0) + usize::from(gr * e.sign_right() < 0.0)
}

/// Transition points of a step or ramp datum that lie inside `Ω`.
fn datum_transitions(g: &Datum, om: &Interval) -> Vec<f64> {
    match g {
        Datum::Step { at, .. } | Datum::Ramp { at, .. } if om.contains(*at) => vec![*at],
        _ => vec![],
    }
}

/// Total distance from the jumps of `E` to the nearest datum transition.
fn transition_offset(e: &BinaryPhase, g: &Datum) -> f64 {
    let at = datum_transitions(g, &e.omega);
    if at.is_empty() {
        return 0.0;
    }
    e.jumps
        .iter()
        .map(|j| at.iter().map(|a| (j - a).abs()).fold(f64::INFINITY, f64::min))
        .sum()
}

/// `m₁ = inf u(Ω,Ω) + 2u(Ω,Ω^c)` over `±1` phases with at most `max_jumps` jumps.
///
/// Energies within `1e-9` relative are ties; ties prefer phases whose endpoint
/// signs agree with the datum outside, then fewer jumps, then jumps nearest to
/// the datum's transition point.
pub fn compute_m1_small_s(
    omega: &Interval,
    g: &Datum,
    s: f64,
    max_jumps: usize,
) -> Result<(f64, BinaryPhase)> {
    check_s(s)?;
    if s >= 0.5 {
        return Err(FracError::InvalidParameter("m₁ by jump optimization needs s < 1/2".into()));
    }
    let om = *omega;
    let mut cases = Vec::new();
    for k in 0..=max_jumps {
        for left in [-1.0, 1.0] {
            cases.push((k, left));
        }
    }
    let results: Vec<(f64, BinaryPhase)> = cases
        .par_iter()
        .map(|&(k, left)| -> Result<(f64, BinaryPhase)> {
            let energy_of = |raw: &[f64]| -> f64 {
                let j = normalize_jumps(&om, raw);
                BinaryPhase::new(om, j, left)
                    .and_then(|e| phase_energy(&e, g, s))
                    .unwrap_or(f64::INFINITY)
            };
            if k == 0 {
                let e = BinaryPhase::new(om, vec![], left)?;
                return Ok((phase_energy(&e, g, s)?, e));
            }
            // evenly spaced start plus two shifted variants
            let mut best: Option<(Vec<f64>, f64)> = None;
            for shift in [0.0, -0.25, 0.25] {
                let x0: Vec<f64> = (0..k)
                    .map(|i| om.lo + om.len() * (i as f64 + 0.5 + shift) / k as f64)
                    .collect();
                let r = nelder_mead(energy_of, &x0, 0.1 * om.len() / k as f64, 1e-10, 4000);
                if best.as_ref().is_none_or(|b| r.1 < b.1) {
                    best = Some(r);
                }
            }
            let (x, v) = best.unwrap();
            let mut out = (v, BinaryPhase::new(om, normalize_jumps(&om, &x), left)?);
            // the datum's own transition points are a candidate too
            let at = datum_transitions(g, &om);
            if at.len() == k {
                let e = BinaryPhase::new(om, at, left)?;
                let v = phase_energy(&e, g, s)?;
                if v <= out.0 + 1e-9 * out.0.abs() {
                    out = (v, e);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let emin = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * emin.abs().max(1e-300);
    let best = results
        .into_iter()
        .filter(|r| r.0 <= emin + tol)
        .min_by(|a, b| {
            (trace_mismatch(&a.1, g), a.1.perimeter())
                .cmp(&(trace_mismatch(&b.1, g), b.1.perimeter()))
                .then(transition_offset(&a.1, g).total_cmp(&transition_offset(&b.1, g)))
        })
        .unwrap();
    Ok(best)
}

// ---------------------------------------------------------------- c⋆ and Ψ

/// Layer energy of the heteroclinic: `G_s(u₀, R)` for `s > 1/2`, and for
/// `s = 1/2` the slope of `G_s(u₀, (-R, R))` in `ln R`.
pub fn compute_c_star(s: f64, w: &DoubleWell, cfg: &LayerConfig) -> Result<f64> {
    check_s(s)?;
    if s < 0.5 && !is_half(s) {
        return Err(FracError::InvalidParameter("c_⋆ is defined for s ≥ 1/2".into()));
    }
    Ok(heteroclinic(s, w, cfg)?.energy)
}

pub fn heteroclinic(s: f64, w: &DoubleWell, cfg: &LayerConfig) -> Result<LayerProfile> {
    solve_heteroclinic(s, w, &cfg.symmetric_grid()?, &cfg.solve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiReport {
    pub gamma: f64,
    pub sign: f64,
    pub s: f64,
    pub r_ladder: Vec<f64>,
    pub psi1_r: Vec<f64>,
    pub psi2_r: Vec<f64>,
    pub potential_r: Vec<f64>,
    /// `Ψ₁^r + 2Ψ₂^r + b_r ∫W` at the largest `r`.
    pub psi_limit: f64,
    /// Relative change of that sum over the last two radii.
    pub cauchy_gap: f64,
    pub converged: bool,
}

impl PsiReport {
    pub fn totals(&self) -> Vec<f64> {
        (0..self.r_ladder.len())
            .map(|i| self.psi1_r[i] + 2.0 * self.psi2_r[i] + self.potential_r[i])
            .collect()
    }
}

/// `Ψ(sign, γ)` through its `r`-approximants, from one boundary-layer solve on
/// a window of length at least `2 max r`.
pub fn compute_psi(
    s: f64,
    gamma: f64,
    sign: f64,
    w: &DoubleWell,
    r_ladder: &[f64],
    cfg: &LayerConfig,
) -> Result<PsiReport> {
    check_s(s)?;
    if s < 0.5 && !is_half(s) {
        return Err(FracError::InvalidParameter("Ψ is defined for s ≥ 1/2".into()));
    }
    if !(gamma.abs() < 1.0) {
        return Err(FracError::GammaAtWell(gamma.abs()));
    }
    if r_ladder.is_empty() || r_ladder.windows(2).any(|p| p[1] <= p[0]) || r_ladder[0] <= 1.0 {
        return Err(FracError::InvalidParameter(
            "r ladder must be increasing with r > 1".into(),
        ));
    }
    let r_max = *r_ladder.last().unwrap();
    let cfg = cfg.clone().with_l(cfg.l.max(2.0 * r_max));
    let layer = solve_boundary_layer(s, gamma, sign, w, &cfg.half_grid()?, &cfg.solve)?;
    psi_from_layer(&layer, w, r_ladder)
}

/// The `r`-approximants of `Ψ` for an already solved boundary layer.
pub fn psi_from_layer(layer: &LayerProfile, w: &DoubleWell, r_ladder: &[f64]) -> Result<PsiReport> {
    let s = layer.spec.s;
    let gamma = layer
        .spec
        .gamma
        .ok_or_else(|| FracError::InvalidParameter("profile is not a boundary layer".into()))?;
    let u = &layer.profile;
    let rows = r_ladder
        .par_iter()
        .map(|&r| -> Result<(f64, f64, f64)> {
            let b = b_r(s, r);
            let minus = Interval::new(-r, 0.0);
            let plus = Interval::new(0.0, r);
            Ok((
                b * interaction(u, &minus, &minus, s)?,
                b * interaction(u, &minus, &plus, s)?,
                b * potential_integral(u, &minus, w)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = PsiReport {
        gamma,
        sign: layer.spec.sign,
        s,
        r_ladder: r_ladder.to_vec(),
        psi1_r: rows.iter().map(|r| r.0).collect(),
        psi2_r: rows.iter().map(|r| r.1).collect(),
        potential_r: rows.iter().map(|r| r.2).collect(),
        psi_limit: 0.0,
        cauchy_gap: 0.0,
        converged: layer.converged,
    };
    let totals = report.totals();
    report.psi_limit = *totals.last().unwrap();
    report.cauchy_gap = cauchy_gap(&totals);
    Ok(report)
}

// ---------------------------------------------------------------- recovery sequence

/// Precomputed layers for a recovery sequence on `Ω` with a phase `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryLayers {
    pub u0: LayerProfile,
    pub left: LayerProfile,
    pub right: LayerProfile,
}

/// Solve the heteroclinic and the two boundary layers `w₀(·; sgn_E(x̄), g(x̄))`.
pub fn recovery_layers(
    s: f64,
    e: &BinaryPhase,
    g: &Datum,
    w: &DoubleWell,
    cfg: &LayerConfig,
) -> Result<RecoveryLayers> {
    let om = e.omega;
    let u0 = heteroclinic(s, w, cfg)?;
    let half = cfg.half_grid()?;
    let left = solve_boundary_layer(s, g.eval(om.lo), e.sign_left(), w, &half, &cfg.solve)?;
    let right = solve_boundary_layer(s, g.eval(om.hi), e.sign_right(), w, &half, &cfg.solve)?;
    Ok(RecoveryLayers { u0, left, right })
}

/// Default scale `ρ(ε)`: `ε^{1-1/(4s)}` for `s > 1/2`, `1/|ln ε|²` at `s = 1/2`
/// and `√ε` below.
pub fn default_rho(s: f64, eps: f64) -> f64 {
    if is_half(s) {
        1.0 / eps.ln().powi(2)
    } else if s > 0.5 {
        eps.powf(1.0 - 1.0 / (4.0 * s))
    } else {
        eps.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub eps: f64,
    pub rho: f64,
    /// `ã_ε / ρ^{2s}`; small values mean good scale separation.
    pub scale_ratio: f64,
    pub warnings: Vec<String>,
    pub v: GridFunction,
    /// `F^{(1)}_ε(v_ε)`.
    pub f1: f64,
}

/// `v_ε`: `g` outside `Ω`, boundary layers within `ρ` of `∂Ω`, a linear bridge
/// up to `2ρ`, and `u₀(d̃/ε)` in the bulk, sampled on a grid graded toward
/// `∂Ω` and the jumps of `E`.
#[allow(clippy::too_many_arguments)]
pub fn build_recovery_sequence(
    s: f64,
    eps: f64,
    rho: Option<f64>,
    e: &BinaryPhase,
    g: &Datum,
    w: &DoubleWell,
    layers: &RecoveryLayers,
    h_rel: f64,
) -> Result<Recovery> {
    let params = ScalingParams::new(s, eps)?;
    let om = e.omega;
    let rho = rho.unwrap_or_else(|| default_rho(s, eps));
    if !(rho > eps) {
        return Err(FracError::ScaleViolation(format!("rho = {rho} must exceed eps = {eps}")));
    }
    let room = e
        .jumps
        .iter()
        .map(|&j| (j - om.lo).min(om.hi - j))
        .fold(0.5 * om.len(), f64::min);
    if 2.0 * rho >= room {
        return Err(FracError::PreconditionViolated(format!(
            "2 rho = {} reaches a jump or the opposite boundary (room {room})",
            2.0 * rho
        )));
    }
    let scale_ratio = params.a_tilde / rho.powf(2.0 * s);
    let mut warnings = Vec::new();
    if scale_ratio > 0.1 {
        warnings.push(format!(
            "weak scale separation: a_tilde / rho^(2s) = {scale_ratio:.3e} > 0.1"
        ));
    }
    let eval = |p: &LayerProfile, t: f64| p.profile.eval(t);
    let v_at = |x: f64| -> Result<f64> {
        let dl = x - om.lo;
        let dr = om.hi - x;
        let bulk = || eval(&layers.u0, e.signed_distance(x) / eps);
        let (d, layer) = if dl <= dr { (dl, &layers.left) } else { (dr, &layers.right) };
        if d <= rho {
            eval(layer, -d / eps)
        } else if d < 2.0 * rho {
            let th = (d - rho) / rho;
            Ok((1.0 - th) * eval(layer, -d / eps)? + th * bulk()?)
        } else {
            bulk()
        }
    };
    let mut foci = vec![om.lo, om.hi];
    foci.extend_from_slice(&e.jumps);
    let grid = Grid1D::graded(om.lo, om.hi, &foci, h_rel * eps, 1.05, 0.02 * om.len())?;
    let mut values = grid.nodes().iter().map(|&x| v_at(x)).collect::<Result<Vec<_>>>()?;
    // exact matching with the datum at the boundary
    let n = values.len();
    values[0] = g.eval(om.lo);
    values[n - 1] = g.eval(om.hi);
    let v = datum_extended(grid, values, g, &om)?;
    let f1 = functional_f1(&v, &params, &om, w)?;
    Ok(Recovery {
        eps,
        rho,
        scale_ratio,
        warnings,
        v,
        f1,
    })
}

/// Attach the datum outside `Ω`: constant tails or sampled nodes out to `10 |Ω|`.
fn datum_extended(grid: Grid1D, values: Vec<f64>, g: &Datum, om: &Interval) -> Result<GridFunction> {
    if g.constant_outside(om) {
        let (l, r) = g.far_values(om, 1.0);
        return GridFunction::new(grid, values, TailModel::Constant(l), TailModel::Constant(r), Interp::PiecewiseLinear);
    }
    let reach = 10.0 * om.len();
    let h0 = grid.cell_len(0);
    let mut offsets = Vec::new();
    let mut d = 0.0;
    let mut h = h0;
    while d < reach {
        h *= 1.1;
        d = (d + h).min(reach);
        offsets.push(d);
    }
    let mut nodes: Vec<f64> = offsets.iter().rev().map(|d| om.lo - d).collect();
    let mut vals: Vec<f64> = nodes.iter().map(|&x| g.eval(x)).collect();
    nodes.extend_from_slice(grid.nodes());
    vals.extend(values);
    for d in &offsets {
        nodes.push(om.hi + d);
        vals.push(g.eval(om.hi + d));
    }
    let (l, r) = g.far_values(om, reach);
    GridFunction::new(
        Grid1D::from_nodes(nodes, Spacing::Custom)?,
        vals,
        TailModel::Constant(l),
        TailModel::Constant(r),
        Interp::PiecewiseLinear,
    )
}

/// `c_⋆ Per(E, Ω) + Ψ(sgn_E(x̄₁), g(x̄₁)) + Ψ(sgn_E(x̄₂), g(x̄₂))` from solved layers.
pub fn m1_large_s(
    e: &BinaryPhase,
    layers: &RecoveryLayers,
    w: &DoubleWell,
    r_ladder: &[f64],
) -> Result<(f64, PsiReport, PsiReport)> {
    let pl = psi_from_layer(&layers.left, w, r_ladder)?;
    let pr = psi_from_layer(&layers.right, w, r_ladder)?;
    Ok((
        layers.u0.energy * e.perimeter() as f64 + pl.psi_limit + pr.psi_limit,
        pl,
        pr,
    ))
}

// ---------------------------------------------------------------- counterexample

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub delta: f64,
    /// `u_δ(Q)` from a fresh solve.
    pub uq: f64,
    /// `ū(Q) - ς δ^{1-2s}`.
    pub predicted: f64,
    pub rel_err: f64,
    /// `ς` recovered from this solve.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRow {
    pub eps: f64,
    pub delta_star_numeric: f64,
    pub delta_star_formula: f64,
    pub f_numeric: f64,
    pub f_formula: f64,
    /// `F^{(1)}_ε(u_{δ*}) - m₁` with the energy evaluated by quadrature.
    pub defect_numeric: f64,
    pub defect_formula: f64,
    /// `defect_numeric / ε^{1-2s}`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuRow {
    pub mu: f64,
    /// `(F^{(1)} - m₁)/ε^μ` along the ε list.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub s: f64,
    pub sigma_c: f64,
    pub omega_c: f64,
    pub ubar_q: f64,
    pub u1_q: f64,
    pub scaling: Vec<ScalingCheck>,
    pub rows: Vec<CounterexampleRow>,
    pub mu_divergence: Vec<MuRow>,
}

/// `δ* = ((1-2s) ς / ω)^{1/(2s)} ε`, the minimizer of `f(δ) = -ς δ^{1-2s} + ω δ / ε^{2s}`.
pub fn delta_star(s: f64, sigma: f64, omega: f64, eps: f64) -> f64 {
    ((1.0 - 2.0 * s) * sigma / omega).powf(1.0 / (2.0 * s)) * eps
}

/// `-2s ((1-2s)/ω)^{(1-2s)/(2s)} ς^{1/(2s)} ε^{1-2s}`.
pub fn defect_formula(s: f64, sigma: f64, omega: f64, eps: f64) -> f64 {
    -2.0 * s
        * ((1.0 - 2.0 * s) / omega).powf((1.0 - 2.0 * s) / (2.0 * s))
        * sigma.powf(1.0 / (2.0 * s))
        * eps.powf(1.0 - 2.0 * s)
}

/// `n` halving values of ε starting where `δ*` equals `delta_max`.
pub fn counterexample_eps_ladder(s: f64, sigma: f64, omega: f64, delta_max: f64, n: usize) -> Vec<f64> {
    let e0 = delta_max / delta_star(s, sigma, omega, 1.0);
    (0..n).map(|k| e0 * 0.5f64.powi(k as i32)).collect()
}

fn f_delta(s: f64, sigma: f64, omega: f64, eps: f64, delta: f64) -> f64 {
    -sigma * delta.powf(1.0 - 2.0 * s) + omega * delta / eps.powf(2.0 * s)
}

/// Default grid for the counterexample: graded toward `0, ±1/4, ±1/2, ±1`.
pub fn counterexample_grid(h_min: f64) -> Result<Grid1D> {
    Grid1D::graded(
        -1.0,
        1.0,
        &[-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0],
        h_min,
        1.05,
        0.01,
    )
}

/// `u_δ(x) = u₁(x/δ)` on `(-δ, δ)` and `sign(x)` elsewhere, on a grid that
/// spans `[-1, 1]`.
fn scaled_replacement(u1: &GridFunction, delta: f64) -> Result<GridFunction> {
    let inner: Vec<f64> = u1.grid().nodes().iter().map(|x| x * delta).collect();
    let mut nodes = inner.clone();
    if delta < 1.0 {
        let mut out = Vec::new();
        let mut d = delta;
        let mut h = delta * (inner[inner.len() - 1] - inner[inner.len() - 2]);
        h = h.max(1e-6 * delta);
        while d < 1.0 {
            h = (h * 1.2).min(0.02);
            d = (d + h).min(1.0);
            out.push(d);
        }
        let mut left: Vec<f64> = out.iter().rev().map(|d| -d).collect();
        left.extend(nodes);
        left.extend(out);
        nodes = left;
    }
    let values = nodes
        .iter()
        .map(|&x| {
            if x.abs() < delta {
                u1.eval(x / delta)
            } else {
                Ok(x.signum())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(
        Grid1D::from_nodes(nodes, Spacing::Custom)?,
        values,
        TailModel::Constant(-1.0),
        TailModel::Constant(1.0),
        Interp::PiecewiseLinear,
    )
}

/// The small-`s` counterexample on `Ω = (-1, 1)` with `g = sign`.
pub fn run_counterexample(
    s: f64,
    eps_list: &[f64],
    grid: &Grid1D,
    w: &DoubleWell,
) -> Result<CounterexampleReport> {
    check_s(s)?;
    if s >= 0.5 {
        return Err(FracError::InvalidParameter("the counterexample needs s < 1/2".into()));
    }
    let om = Interval::new(-1.0, 1.0);
    let bar = phase_to_function(
        &BinaryPhase::new(om, vec![0.0], -1.0)?,
        TailModel::Constant(-1.0),
        TailModel::Constant(1.0),
    )?;
    let ubar_q = energy_q(&bar, &om, s)?;
    let u1 = solve_s_harmonic(1.0, s, grid)?;
    let u1_q = energy_q(&u1, &om, s)?;
    let sigma = ubar_q - u1_q;
    let omega = potential_integral(&u1, &om, w)?;

    let scaling = [0.5, 0.25]
        .par_iter()
        .map(|&delta| -> Result<ScalingCheck> {
            let ud = solve_s_harmonic(delta, s, grid)?;
            let uq = energy_q(&ud, &om, s)?;
            let predicted = ubar_q - sigma * delta.powf(1.0 - 2.0 * s);
            Ok(ScalingCheck {
                delta,
                uq,
                predicted,
                rel_err: (uq - predicted).abs() / ubar_q,
                sigma: (ubar_q - uq) / delta.powf(1.0 - 2.0 * s),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = eps_list
        .par_iter()
        .map(|&eps| -> Result<CounterexampleRow> {
            let ds = delta_star(s, sigma, omega, eps);
            // geometric δ-grid on (0, 1]
            let m = 200_000;
            let (lo, hi) = ((ds.min(1.0) * 1e-3).ln(), 0.0f64);
            let mut best = (f64::INFINITY, 1.0);
            for k in 0..=m {
                let d = (lo + (hi - lo) * k as f64 / m as f64).exp();
                let f = f_delta(s, sigma, omega, eps, d);
                if f < best.0 {
                    best = (f, d);
                }
            }
            let params = ScalingParams::new(s, eps)?;
            let v = scaled_replacement(&u1, ds.min(1.0))?;
            let f1 = functional_f1(&v, &params, &om, w)?;
            let defect_numeric = f1 - ubar_q;
            Ok(CounterexampleRow {
                eps,
                delta_star_numeric: best.1,
                delta_star_formula: ds,
                f_numeric: best.0,
                f_formula: f_delta(s, sigma, omega, eps, ds),
                defect_numeric,
                defect_formula: defect_formula(s, sigma, omega, eps),
                ratio: defect_numeric / eps.powf(1.0 - 2.0 * s),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mu_divergence = [1.0 - 2.0 * s + 0.1, 0.5, 1.0]
        .iter()
        .map(|&mu| MuRow {
            mu,
            values: rows
                .iter()
                .map(|r| r.defect_numeric / r.eps.powf(mu))
                .collect(),
        })
        .collect();

    Ok(CounterexampleReport {
        s,
        sigma_c: sigma,
        omega_c: omega,
        ubar_q,
        u1_q,
        scaling,
        rows,
        mu_divergence,
    })
}

// ---------------------------------------------------------------- s ↘ 1/2

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s: f64,
    pub energy: f64,
    pub decay_exponent: Option<f64>,
    /// Sup-distance on the window to the previous profile in the list.
    pub dist_prev: Option<f64>,
    /// Sup-distance on the window to the `s = 1/2` profile.
    pub dist_half: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub gamma: f64,
    pub window: (f64, f64),
    pub rows: Vec<SweepRow>,
    pub half_energy: f64,
}

/// Boundary layers `w_s(·; -1, γ)` along decreasing `s`, compared with the
/// direct `s = 1/2` solve on a compact window.
pub fn sweep_s_to_half(
    gamma: f64,
    w: &DoubleWell,
    s_list: &[f64],
    grid: &Grid1D,
    opts: &SolveOptions,
    window: (f64, f64),
) -> Result<SweepReport> {
    if s_list.is_empty() || s_list.iter().any(|&s| !(s > 0.5 && s < 1.0)) {
        return Err(FracError::InvalidParameter("s list must lie in (1/2, 1)".into()));
    }
    if s_list.windows(2).any(|p| p[1] >= p[0]) {
        return Err(FracError::InvalidParameter("s list must decrease".into()));
    }
    let mut all: Vec<f64> = s_list.to_vec();
    all.push(0.5);
    let layers = all
        .par_iter()
        .map(|&s| solve_boundary_layer(s, gamma, -1.0, w, grid, opts))
        .collect::<Result<Vec<_>>>()?;
    let probe: Vec<f64> = grid
        .nodes()
        .iter()
        .copied()
        .filter(|&x| x >= window.0 && x <= window.1)
        .collect();
    let dist = |a: &LayerProfile, b: &LayerProfile| -> Result<f64> {
        let mut m = 0.0f64;
        for &x in &probe {
            m = m.max((a.profile.eval(x)? - b.profile.eval(x)?).abs());
        }
        Ok(m)
    };
    let half = layers.last().unwrap();
    let mut rows = Vec::new();
    for (i, &s) in s_list.iter().enumerate() {
        rows.push(SweepRow {
            s,
            energy: layers[i].energy,
            decay_exponent: layers[i].decay_fit.map(|f| f.exponent),
            dist_prev: if i > 0 { Some(dist(&layers[i], &layers[i - 1])?) } else { None },
            dist_half: dist(&layers[i], half)?,
            converged: layers[i].converged,
        });
    }
    Ok(SweepReport {
        gamma,
        window,
        rows,
        half_energy: half.energy,
    })
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub s: f64,
    pub eps_ladder: Vec<f64>,
    pub m_eps: Vec<f64>,
    pub m0: f64,
    pub m1_fit: f64,
    pub m1_theory: Option<f64>,
    pub gap: Option<f64>,
}

/// Two-point Richardson extrapolation (order 1) of `m_ε/ε` over the last two rungs.
pub fn fit_expansion(
    eps_ladder: &[f64],
    m_eps: &[f64],
    s: f64,
    m1_theory: Option<f64>,
) -> Result<ExpansionReport> {
    check_s(s)?;
    let n = eps_ladder.len();
    if n < 4 || m_eps.len() != n {
        return Err(FracError::InvalidParameter(
            "need at least 4 ladder points with matching values".into(),
        ));
    }
    let ratio = eps_ladder[1] / eps_ladder[0];
    if !(ratio > 0.0 && ratio < 1.0)
        || eps_ladder
            .windows(2)
            .any(|p| ((p[1] / p[0]) - ratio).abs() > 1e-9 * ratio)
    {
        return Err(FracError::InvalidParameter(
            "eps ladder must decrease with a constant ratio".into(),
        ));
    }
    let q: Vec<f64> = m_eps.iter().zip(eps_ladder).map(|(m, e)| m / e).collect();
    let noise = 1e-9 * q.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let steps: Vec<f64> = q.windows(2).map(|p| p[1] - p[0]).collect();
    let up = steps.iter().any(|&d| d > noise);
    let down = steps.iter().any(|&d| d < -noise);
    if up && down {
        return Err(FracError::IllConditionedFit(format!(
            "m_eps/eps is not monotone along the ladder: {q:?}"
        )));
    }
    let (e1, e2) = (eps_ladder[n - 2], eps_ladder[n - 1]);
    let m1_fit = (e1 * q[n - 1] - e2 * q[n - 2]) / (e1 - e2);
    let gap = m1_theory.map(|t| (m1_fit - t).abs() / t.abs());
    Ok(ExpansionReport {
        s,
        eps_ladder: eps_ladder.to_vec(),
        m_eps: m_eps.to_vec(),
        m0: 0.0,
        m1_fit,
        m1_theory,
        gap,
    })
}
