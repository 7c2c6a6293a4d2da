//! Piecewise description of a grid function on all of R and the weighted pair sum.

use rayon::prelude::*;

use super::pairs::{kernel, lin_const, lin_self, linlin, rect, NEAR_RATIO};
use crate::funcrep::{GridFunction, Interp, Interval};
use crate::quad::{G3_W, G3_X, G4_W, G4_X};
use crate::potential::DoubleWell;
use crate::{FracError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Piece {
    Lin { x0: f64, x1: f64, v0: f64, v1: f64 },
    Const { x0: f64, x1: f64, c: f64 },
}

impl Piece {
    pub fn lo(&self) -> f64 {
        match *self {
            Piece::Lin { x0, .. } | Piece::Const { x0, .. } => x0,
        }
    }

    pub fn hi(&self) -> f64 {
        match *self {
            Piece::Lin { x1, .. } | Piece::Const { x1, .. } => x1,
        }
    }

    /// A point deciding region membership.
    pub fn probe(&self) -> f64 {
        let (a, b) = (self.lo(), self.hi());
        match (a.is_finite(), b.is_finite()) {
            (true, true) => 0.5 * (a + b),
            (false, true) => b - 1.0,
            (true, false) => a + 1.0,
            (false, false) => 0.0,
        }
    }
}

fn snap_tol(x: f64, h: f64) -> f64 {
    1e-12 * (x.abs() + h)
}

/// Split `u` into pieces over R, cutting at the finite points in `cuts`.
///
/// Undefined tails produce no pieces.
pub(crate) fn build_pieces(u: &GridFunction, cuts: &[f64]) -> Vec<Piece> {
    let mut cuts: Vec<f64> = cuts.iter().copied().filter(|c| c.is_finite()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let g = u.grid();
    let x = g.nodes();
    let v = u.values();
    let left = g.left();
    let right = g.right();
    let mut out = Vec::with_capacity(x.len() + cuts.len() + 2);

    if let Some(c) = u.left_tail().value() {
        let mut lo = f64::NEG_INFINITY;
        for &cut in cuts.iter().filter(|&&c| c < left - snap_tol(left, 0.0)) {
            out.push(Piece::Const { x0: lo, x1: cut, c });
            lo = cut;
        }
        out.push(Piece::Const { x0: lo, x1: left, c });
    }

    let mut ci = 0;
    for i in 0..g.n_cells() {
        let (a, b) = (x[i], x[i + 1]);
        let h = b - a;
        while ci < cuts.len() && cuts[ci] <= a + snap_tol(a, h) {
            ci += 1;
        }
        let mut lo = a;
        let mut k = ci;
        while k < cuts.len() && cuts[k] < b - snap_tol(b, h) {
            let cut = cuts[k];
            push_sub(&mut out, u.interp(), x, v, i, lo, cut);
            lo = cut;
            k += 1;
        }
        push_sub(&mut out, u.interp(), x, v, i, lo, b);
        ci = k;
    }

    if let Some(c) = u.right_tail().value() {
        let mut lo = right;
        for &cut in cuts.iter().filter(|&&c| c > right + snap_tol(right, 0.0)) {
            out.push(Piece::Const { x0: lo, x1: cut, c });
            lo = cut;
        }
        out.push(Piece::Const {
            x0: lo,
            x1: f64::INFINITY,
            c,
        });
    }
    out
}

fn push_sub(out: &mut Vec<Piece>, interp: Interp, x: &[f64], v: &[f64], i: usize, lo: f64, hi: f64) {
    match interp {
        Interp::PiecewiseConstant => out.push(Piece::Const {
            x0: lo,
            x1: hi,
            c: v[i],
        }),
        Interp::PiecewiseLinear => {
            let (a, b) = (x[i], x[i + 1]);
            let val = |p: f64| {
                if p == a {
                    v[i]
                } else if p == b {
                    v[i + 1]
                } else {
                    v[i] + (v[i + 1] - v[i]) * (p - a) / (b - a)
                }
            };
            out.push(Piece::Lin {
                x0: lo,
                x1: hi,
                v0: val(lo),
                v1: val(hi),
            })
        }
    }
}

/// Which region pairs are counted.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Weighting {
    /// `u(A, B)` with regions `(A, B)`.
    Interaction,
    /// `u(Q_Ω)` with regions `(Ω, -)`.
    Q,
    /// `u(C,C) + 2u(C, A∖C)` with regions `(A, C)`.
    Local,
}

impl Weighting {
    fn weight(self, p: (bool, bool), q: (bool, bool), diag: bool) -> f64 {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        match (self, diag) {
            (Weighting::Interaction, true) => b(p.0 && p.1),
            (Weighting::Interaction, false) => b(p.0 && q.1) + b(q.0 && p.1),
            (Weighting::Q, true) => b(p.0),
            (Weighting::Q, false) => 2.0 * b(p.0 || q.0),
            (Weighting::Local, true) => b(p.1),
            (Weighting::Local, false) => 2.0 * b(p.0 && q.0 && (p.1 || q.1)),
        }
    }
}

/// Kernel weights for far pairs of aligned cells of a uniform lattice.
struct UniformCache {
    h: f64,
    origin: f64,
    // per integer offset k: 16 Gauss weights including h^2 and the kernel
    table: Vec<[f64; 16]>,
}

impl UniformCache {
    fn new(pieces: &[Piece], s: f64) -> Option<Self> {
        let lins: Vec<(f64, f64)> = pieces
            .iter()
            .filter_map(|p| match *p {
                Piece::Lin { x0, x1, .. } => Some((x0, x1)),
                _ => None,
            })
            .collect();
        if lins.len() < 8 {
            return None;
        }
        let h = lins[0].1 - lins[0].0;
        let origin = lins[0].0;
        let span = lins.last().unwrap().1 - origin;
        let kmax = (span / h).round() as usize + 1;
        let table = (0..=kmax)
            .map(|k| {
                let mut t = [0.0; 16];
                if (k as f64) < NEAR_RATIO + 1.0 {
                    return t;
                }
                for a in 0..4 {
                    for b in 0..4 {
                        let d = h * (k as f64 + G4_X[b] - G4_X[a]);
                        t[4 * a + b] = G4_W[a] * G4_W[b] * h * h * kernel(d, s);
                    }
                }
                t
            })
            .collect();
        Some(Self { h, origin, table })
    }

    /// Lattice index of a piece that is exactly one aligned cell.
    fn index(&self, x0: f64, x1: f64) -> Option<i64> {
        if ((x1 - x0) - self.h).abs() > 1e-9 * self.h {
            return None;
        }
        let k = (x0 - self.origin) / self.h;
        let kr = k.round();
        ((k - kr).abs() < 1e-7).then_some(kr as i64)
    }
}

fn pair_value(p: &Piece, q: &Piece, s: f64, cache: Option<&UniformCache>) -> f64 {
    match (*p, *q) {
        (
            Piece::Lin { x0, x1, v0, v1 },
            Piece::Lin {
                x0: y0,
                x1: y1,
                v0: w0,
                v1: w1,
            },
        ) => {
            if let Some(c) = cache {
                if let (Some(i), Some(j)) = (c.index(x0, x1), c.index(y0, y1)) {
                    let k = (j - i) as usize;
                    if (k as f64) >= NEAR_RATIO + 1.0 && k < c.table.len() {
                        let t = &c.table[k];
                        let mut acc = 0.0;
                        for a in 0..4 {
                            let ua = v0 + (v1 - v0) * G4_X[a];
                            for b in 0..4 {
                                let d = ua - (w0 + (w1 - w0) * G4_X[b]);
                                acc += t[4 * a + b] * d * d;
                            }
                        }
                        return acc;
                    }
                }
            }
            linlin([x0, x1, v0, v1], [y0, y1, w0, w1], s)
        }
        (Piece::Lin { x0, x1, v0, v1 }, Piece::Const { x0: c0, x1: c1, c }) => {
            // constant to the right: near edge c0
            lin_const(c0 - x1, c1 - x1, x1 - x0, v1, v0, c, s)
        }
        (Piece::Const { x0: c0, x1: c1, c }, Piece::Lin { x0, x1, v0, v1 }) => {
            lin_const(x0 - c1, x0 - c0, x1 - x0, v0, v1, c, s)
        }
        (Piece::Const { x0, x1, c: a }, Piece::Const { x0: y0, x1: y1, c: b }) => {
            if a == b {
                0.0
            } else {
                (a - b) * (a - b) * rect(x0, x1, y0, y1, s)
            }
        }
    }
}

fn self_value(p: &Piece, s: f64) -> f64 {
    match *p {
        Piece::Lin { x0, x1, v0, v1 } => lin_self(x1 - x0, (v1 - v0) / (x1 - x0), s),
        Piece::Const { .. } => 0.0,
    }
}

fn membership(p: &Piece, r1: &Interval, r2: &Interval) -> (bool, bool) {
    let m = p.probe();
    (r1.contains(m), r2.contains(m))
}

/// Check that the tails needed to cover `need` are defined.
pub(crate) fn require_coverage(u: &GridFunction, need: &Interval) -> Result<()> {
    if need.lo < u.grid().left() && u.left_tail().value().is_none() {
        return Err(FracError::UndefinedTail(format!(
            "region reaches {} left of the grid with no left tail",
            need.lo
        )));
    }
    if need.hi > u.grid().right() && u.right_tail().value().is_none() {
        return Err(FracError::UndefinedTail(format!(
            "region reaches {} right of the grid with no right tail",
            need.hi
        )));
    }
    Ok(())
}

/// Weighted sum of pair integrals over `pieces`.
pub(crate) fn weighted_sum(
    pieces: &[Piece],
    s: f64,
    kind: Weighting,
    r1: &Interval,
    r2: &Interval,
) -> Result<f64> {
    let flags: Vec<(bool, bool)> = pieces.iter().map(|p| membership(p, r1, r2)).collect();
    let cache = UniformCache::new(pieces, s);
    let partial: Vec<f64> = (0..pieces.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            let w = kind.weight(flags[i], flags[i], true);
            if w != 0.0 {
                acc += w * self_value(&pieces[i], s);
            }
            for j in i + 1..pieces.len() {
                let w = kind.weight(flags[i], flags[j], false);
                if w != 0.0 {
                    acc += w * pair_value(&pieces[i], &pieces[j], s, cache.as_ref());
                }
            }
            acc
        })
        .collect();
    let total: f64 = partial.iter().sum();
    if !total.is_finite() {
        return Err(FracError::DivergentEnergy(format!(
            "interaction integral diverges at s = {s} (jump inside the interaction region)"
        )));
    }
    Ok(total)
}

/// `∫_region W(u)`.
pub(crate) fn potential_sum(pieces: &[Piece], w: &DoubleWell, region: &Interval) -> Result<f64> {
    let mut acc = 0.0;
    for p in pieces {
        if !region.contains(p.probe()) {
            continue;
        }
        match *p {
            Piece::Lin { x0, x1, v0, v1 } => {
                let h = x1 - x0;
                let mut a = 0.0;
                for k in 0..3 {
                    a += G3_W[k] * w.eval(v0 + (v1 - v0) * G3_X[k]);
                }
                acc += a * h;
            }
            Piece::Const { x0, x1, c } => {
                // clip to the region so half-line regions stay finite
                let lo = x0.max(region.lo);
                let hi = x1.min(region.hi);
                let wc = w.eval(c);
                if wc != 0.0 {
                    acc += wc * (hi - lo);
                }
            }
        }
    }
    if !acc.is_finite() {
        return Err(FracError::DivergentEnergy(
            "potential integral diverges: a tail sits off the wells on an unbounded region".into(),
        ));
    }
    Ok(acc)
}
