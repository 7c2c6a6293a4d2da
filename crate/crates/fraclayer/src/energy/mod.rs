//! Gagliardo interaction integrals and the assembled energy functionals.
//!
//! Every functional is evaluated on an exact piecewise description of the grid
//! function over all of R: constant tails are integrated analytically, pairs of
//! nearby pieces with closed forms, and separated pieces with 4x4 Gauss.

mod pairs;
mod pieces;
mod quadform;

use serde::{Deserialize, Serialize};

pub use quadform::QuadForm;
pub(crate) use quadform::dot;

use crate::funcrep::{GridFunction, Interval};
use crate::potential::DoubleWell;
use crate::{FracError, Result};
use pieces::{build_pieces, potential_sum, require_coverage, weighted_sum, Weighting};


/// `s = 1/2` up to rounding.
pub fn is_half(s: f64) -> bool {
    (s - 0.5).abs() < 1e-14
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// s in (0, 1/2)
    Small,
    Half,
    /// s in (1/2, 1)
    Large,
}

impl Regime {
    pub fn of(s: f64) -> Self {
        if is_half(s) {
            Regime::Half
        } else if s < 0.5 {
            Regime::Small
        } else {
            Regime::Large
        }
    }
}

/// Scale factors of the energy and of its first-order rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub s: f64,
    pub eps: f64,
    pub a_eps: f64,
    pub b_eps: f64,
    pub a_tilde: f64,
    pub b_tilde: f64,
}

impl ScalingParams {
    pub fn new(s: f64, eps: f64) -> Result<Self> {
        check_s(s)?;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(FracError::InvalidParameter(format!("eps must be > 0, got {eps}")));
        }
        let (a_eps, b_eps) = match Regime::of(s) {
            Regime::Small => (eps, eps.powf(1.0 - 2.0 * s)),
            Regime::Half => {
                let l = eps.ln().abs();
                if l == 0.0 {
                    return Err(FracError::InvalidParameter(
                        "eps = 1 makes the s = 1/2 scaling degenerate".into(),
                    ));
                }
                (eps / l, 1.0 / l)
            }
            Regime::Large => (eps.powf(2.0 * s), 1.0),
        };
        Ok(Self {
            s,
            eps,
            a_eps,
            b_eps,
            a_tilde: a_eps / eps,
            b_tilde: b_eps / eps,
        })
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.s)
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.s, eps)
    }

    pub fn b_r(&self, r: f64) -> f64 {
        b_r(self.s, r)
    }
}

/// Window normalization: `1/|ln r|` at `s = 1/2`, otherwise 1.
pub fn b_r(s: f64, r: f64) -> f64 {
    if is_half(s) {
        1.0 / r.ln().abs()
    } else {
        1.0
    }
}

pub(crate) fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(FracError::InvalidParameter(format!("s must lie in (0,1), got {s}")))
    }
}

fn ends(iv: &[&Interval]) -> Vec<f64> {
    iv.iter().flat_map(|i| [i.lo, i.hi]).collect()
}

/// `u(A, B) = ∫_A ∫_B |u(x)-u(y)|^2 |x-y|^(-1-2s) dy dx`.
pub fn interaction(u: &GridFunction, a: &Interval, b: &Interval, s: f64) -> Result<f64> {
    interaction_with_cuts(u, a, b, s, &[])
}

fn interaction_with_cuts(
    u: &GridFunction,
    a: &Interval,
    b: &Interval,
    s: f64,
    extra: &[f64],
) -> Result<f64> {
    check_s(s)?;
    require_coverage(u, a)?;
    require_coverage(u, b)?;
    let mut cuts = ends(&[a, b]);
    cuts.extend_from_slice(extra);
    let pieces = build_pieces(u, &cuts);
    weighted_sum(&pieces, s, Weighting::Interaction, a, b)
}

/// `u(Q_Ω) = u(Ω,Ω) + 2u(Ω,Ω^c)`.
pub fn energy_q(u: &GridFunction, omega: &Interval, s: f64) -> Result<f64> {
    energy_q_with_cuts(u, omega, s, &[])
}

fn energy_q_with_cuts(u: &GridFunction, omega: &Interval, s: f64, extra: &[f64]) -> Result<f64> {
    check_s(s)?;
    require_coverage(u, &Interval::real_line())?;
    let mut cuts = ends(&[omega]);
    cuts.extend_from_slice(extra);
    let pieces = build_pieces(u, &cuts);
    weighted_sum(&pieces, s, Weighting::Q, omega, omega)
}

/// `∫_A W(u)`.
pub fn potential_integral(u: &GridFunction, a: &Interval, w: &DoubleWell) -> Result<f64> {
    potential_with_cuts(u, a, w, &[])
}

fn potential_with_cuts(u: &GridFunction, a: &Interval, w: &DoubleWell, extra: &[f64]) -> Result<f64> {
    require_coverage(u, a)?;
    let mut cuts = ends(&[a]);
    cuts.extend_from_slice(extra);
    let pieces = build_pieces(u, &cuts);
    potential_sum(&pieces, w, a)
}

/// `ã_ε u(Q_Ω) + b̃_ε ∫_Ω W(u)`.
pub fn functional_f1(
    u: &GridFunction,
    params: &ScalingParams,
    omega: &Interval,
    w: &DoubleWell,
) -> Result<f64> {
    f1_with_cuts(u, params, omega, w, &[])
}

fn f1_with_cuts(
    u: &GridFunction,
    params: &ScalingParams,
    omega: &Interval,
    w: &DoubleWell,
    extra: &[f64],
) -> Result<f64> {
    let kin = energy_q_with_cuts(u, omega, params.s, extra)?;
    let pot = potential_with_cuts(u, omega, w, extra)?;
    Ok(params.a_tilde * kin + params.b_tilde * pot)
}

/// `G_s(u, A) = u(Q_A) + ∫_A W(u)`.
pub fn functional_g(u: &GridFunction, a: &Interval, s: f64, w: &DoubleWell) -> Result<f64> {
    Ok(energy_q(u, a, s)? + potential_integral(u, a, w)?)
}

/// One rung of a normalized ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub r: f64,
    pub energy: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedLadder {
    pub entries: Vec<LadderEntry>,
    /// Last normalized value.
    pub limit: f64,
    /// Relative change over the last rung.
    pub cauchy_gap: f64,
}

/// `G_s(u, (-R, 0)) / ln R` over an increasing ladder of radii.
pub fn functional_g_normalized(
    u: &GridFunction,
    r_ladder: &[f64],
    s: f64,
    w: &DoubleWell,
) -> Result<NormalizedLadder> {
    if r_ladder.is_empty() || r_ladder.windows(2).any(|p| p[1] <= p[0]) || r_ladder[0] <= 1.0 {
        return Err(FracError::InvalidParameter(
            "R ladder must be strictly increasing with R > 1".into(),
        ));
    }
    let entries = r_ladder
        .iter()
        .map(|&r| {
            let energy = functional_g(u, &Interval::new(-r, 0.0), s, w)?;
            Ok(LadderEntry {
                r,
                energy,
                normalized: energy / r.ln(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let limit = entries.last().unwrap().normalized;
    let cauchy_gap = cauchy_gap(&entries.iter().map(|e| e.normalized).collect::<Vec<_>>());
    Ok(NormalizedLadder {
        entries,
        limit,
        cauchy_gap,
    })
}

/// Relative change between the last two entries of a sequence.
pub fn cauchy_gap(v: &[f64]) -> f64 {
    match v {
        [.., a, b] => {
            let scale = b.abs().max(a.abs());
            if scale == 0.0 {
                0.0
            } else {
                (b - a).abs() / scale
            }
        }
        _ => f64::NAN,
    }
}

/// `ã_ε [u(C,C) + 2u(C, A∖C)] + b̃_ε ∫_C W(u)` with `C = A ∩ Ω`.
pub fn functional_i(
    u: &GridFunction,
    a: &Interval,
    omega: &Interval,
    params: &ScalingParams,
    w: &DoubleWell,
) -> Result<f64> {
    check_s(params.s)?;
    let c = a.intersect(omega).ok_or_else(|| {
        FracError::PreconditionViolated("A and Ω do not overlap".into())
    })?;
    require_coverage(u, a)?;
    let pieces = build_pieces(u, &ends(&[a, &c]));
    let kin = weighted_sum(&pieces, params.s, Weighting::Local, a, &c)?;
    let pot = potential_sum(&pieces, w, &c)?;
    Ok(params.a_tilde * kin + params.b_tilde * pot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub absolute: f64,
    pub relative: f64,
}

impl Residual {
    fn new(lhs: f64, rhs: f64) -> Self {
        let absolute = (lhs - rhs).abs();
        let scale = lhs.abs().max(rhs.abs());
        Residual {
            absolute,
            relative: if scale == 0.0 { 0.0 } else { absolute / scale },
        }
    }
}

/// Whether `v = w` outside `A ∩ B` as piecewise-linear functions on a shared grid.
fn agree_outside(v: &GridFunction, w: &GridFunction, ab: Option<&Interval>) -> bool {
    if v.grid() != w.grid() || v.left_tail() != w.left_tail() || v.right_tail() != w.right_tail()
    {
        return false;
    }
    let x = v.grid().nodes();
    let n = x.len();
    v.values()
        .iter()
        .zip(w.values())
        .enumerate()
        .all(|(i, (a, b))| {
            if a == b {
                return true;
            }
            let Some(ab) = ab else { return false };
            // the hat function of node i must stay inside the closure of A ∩ B
            let lo = x[i.saturating_sub(1)];
            let hi = x[(i + 1).min(n - 1)];
            let lo = if i == 0 { f64::NEG_INFINITY } else { lo };
            let hi = if i == n - 1 { f64::INFINITY } else { hi };
            lo >= ab.lo && hi <= ab.hi
        })
}

/// Residual of `[F1(w,A) - F1(v,A)] - [F1(w,B) - F1(v,B)]`.
///
/// The relative residual is scaled by the largest of the four energies.
pub fn check_energy_difference(
    v: &GridFunction,
    w: &GridFunction,
    a: &Interval,
    b: &Interval,
    params: &ScalingParams,
    wp: &DoubleWell,
) -> Result<Residual> {
    let ab = a.intersect(b);
    if !agree_outside(v, w, ab.as_ref()) {
        return Err(FracError::PreconditionViolated(
            "v and w differ outside A ∩ B".into(),
        ));
    }
    // a common set of cuts keeps the quadrature of every pair identical
    let cuts = ends(&[a, b]);
    let fwa = f1_with_cuts(w, params, a, wp, &cuts)?;
    let fva = f1_with_cuts(v, params, a, wp, &cuts)?;
    let fwb = f1_with_cuts(w, params, b, wp, &cuts)?;
    let fvb = f1_with_cuts(v, params, b, wp, &cuts)?;
    let scale = [fwa, fva, fwb, fvb].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let absolute = ((fwa - fva) - (fwb - fvb)).abs();
    Ok(Residual {
        absolute,
        relative: if scale == 0.0 { 0.0 } else { absolute / scale },
    })
}

/// Factor `c` in `F1_ε(u_ρ, A) = c · F1_{ρε}(u, ρA)`.
pub fn rescaling_factor(s: f64, eps: f64, rho: f64) -> f64 {
    match Regime::of(s) {
        Regime::Large => 1.0,
        Regime::Half => (rho * eps).ln().abs() / eps.ln().abs(),
        Regime::Small => rho.powf(2.0 * s - 1.0),
    }
}

/// Residual of the rescaling identity for `u_ρ(x) = u(ρx)`.
///
/// For `ρε = 1` the comparison is against `G_s(u, A/ε)` with the factor
/// `|ln ε|^-1` at `s = 1/2` and `ε^(1-2s)` for `s < 1/2`.
pub fn check_rescaling(
    u: &GridFunction,
    rho: f64,
    params: &ScalingParams,
    a: &Interval,
    w: &DoubleWell,
) -> Result<Residual> {
    let s = params.s;
    let u_rho = u.rescale(rho)?;
    let lhs = functional_f1(&u_rho, params, a, w)?;
    let ra = a.scaled(rho);
    let re = rho * params.eps;
    let rhs = if (re - 1.0).abs() < 1e-12 {
        let g = functional_g(u, &ra, s, w)?;
        match Regime::of(s) {
            Regime::Large => g,
            Regime::Half => g / params.eps.ln().abs(),
            Regime::Small => params.eps.powf(1.0 - 2.0 * s) * g,
        }
    } else {
        let p2 = params.with_eps(re)?;
        rescaling_factor(s, params.eps, rho) * functional_f1(u, &p2, &ra, w)?
    };
    Ok(Residual::new(lhs, rhs))
}

/// `(a^(1-2s) - b^(1-2s)) / (2s - 1)`, which tends to `ln(b/a)` as `s -> 1/2`.
pub fn ln_limit_quotient(a: f64, b: f64, s: f64) -> f64 {
    (a.powf(1.0 - 2.0 * s) - b.powf(1.0 - 2.0 * s)) / (2.0 * s - 1.0)
}
