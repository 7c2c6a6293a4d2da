//! Grid representation of functions on the real line.
//!
//! A [`GridFunction`] stores values on a finite grid and models the two
//! unbounded ends by constant tails, so evaluation is defined on all of R.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{FracError, Result};

/// An interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval endpoints out of order: ({lo}, {hi})");
        Self { lo, hi }
    }

    pub fn real_line() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// R^- = (-∞, 0).
    pub fn negative_half() -> Self {
        Self::new(f64::NEG_INFINITY, 0.0)
    }

    pub fn positive_half() -> Self {
        Self::new(0.0, f64::INFINITY)
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    /// Open-interval membership.
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (hi > lo).then(|| Interval::new(lo, hi))
    }

    /// `self \ other` as at most two intervals.
    pub fn minus(&self, other: &Interval) -> Vec<Interval> {
        let mut out = Vec::new();
        if other.lo > self.lo {
            let hi = other.lo.min(self.hi);
            if hi > self.lo {
                out.push(Interval::new(self.lo, hi));
            }
        }
        if other.hi < self.hi {
            let lo = other.hi.max(self.lo);
            if self.hi > lo {
                out.push(Interval::new(lo, self.hi));
            }
        }
        out
    }

    /// Complement in R.
    pub fn complement(&self) -> Vec<Interval> {
        Interval::real_line().minus(self)
    }

    pub fn scaled(&self, rho: f64) -> Interval {
        Interval::new(self.lo * rho, self.hi * rho)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Spacing {
    Uniform,
    /// Spacing grows geometrically away from the listed points.
    Graded { toward: Vec<f64> },
    Custom,
}

/// Strictly increasing nodes with at least three entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    nodes: Vec<f64>,
    spacing: Spacing,
}

impl Grid1D {
    pub fn from_nodes(nodes: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(FracError::InvalidParameter(format!(
                "a grid needs at least 3 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().any(|x| !x.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FracError::InvalidParameter(
                "grid nodes must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { nodes, spacing })
    }

    /// `n` equispaced nodes on `[left, right]`.
    pub fn uniform(left: f64, right: f64, n: usize) -> Result<Self> {
        if n < 3 || !(right > left) {
            return Err(FracError::InvalidParameter(format!(
                "uniform grid needs n >= 3 and left < right (n = {n}, [{left}, {right}])"
            )));
        }
        let h = (right - left) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| left + h * i as f64).collect();
        nodes[n - 1] = right;
        Self::from_nodes(nodes, Spacing::Uniform)
    }

    /// Nodes clustering geometrically toward the points `foci`.
    ///
    /// The local spacing is `min(h_max, h_min + (growth - 1) * dist(x, foci))`,
    /// so it grows by roughly the factor `growth` per cell away from a focus.
    /// Foci inside `[left, right]` become nodes.
    pub fn graded(
        left: f64,
        right: f64,
        foci: &[f64],
        h_min: f64,
        growth: f64,
        h_max: f64,
    ) -> Result<Self> {
        if !(right > left) || !(h_min > 0.0) || !(growth >= 1.0) || !(h_max >= h_min) {
            return Err(FracError::InvalidParameter(format!(
                "graded grid parameters invalid: [{left}, {right}], h_min {h_min}, growth {growth}, h_max {h_max}"
            )));
        }
        let mut breaks: Vec<f64> = foci
            .iter()
            .copied()
            .filter(|&p| p > left && p < right)
            .collect();
        breaks.push(left);
        breaks.push(right);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let spacing = |x: f64| {
            let d = foci
                .iter()
                .map(|p| (x - p).abs())
                .fold(f64::INFINITY, f64::min);
            let d = if d.is_finite() { d } else { 0.0 };
            (h_min + (growth - 1.0) * d).min(h_max)
        };
        let mut nodes = vec![left];
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            // march from both ends toward the middle so both ends are resolved
            let mid = 0.5 * (a + b);
            let mut from_a = vec![a];
            while *from_a.last().unwrap() < mid {
                let x = *from_a.last().unwrap();
                from_a.push(x + spacing(x));
            }
            let mut from_b = vec![b];
            while *from_b.last().unwrap() > mid {
                let x = *from_b.last().unwrap();
                from_b.push(x - spacing(x));
            }
            // drop the two overshooting points and bridge the middle gap
            from_a.pop();
            from_b.pop();
            let lo = *from_a.last().unwrap();
            let hi = *from_b.last().unwrap();
            let gap = hi - lo;
            let h_mid = spacing(mid);
            let k = (gap / h_mid).ceil().max(1.0) as usize;
            for x in from_a.iter().skip(1) {
                nodes.push(*x);
            }
            for j in 1..k {
                nodes.push(lo + gap * j as f64 / k as f64);
            }
            for x in from_b.iter().rev() {
                nodes.push(*x);
            }
        }
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
        Self::from_nodes(nodes, Spacing::Graded { toward: foci.to_vec() })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn spacing(&self) -> &Spacing {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn left(&self) -> f64 {
        self.nodes[0]
    }

    pub fn right(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn cell_len(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    /// Index `i` of the cell `[x_i, x_{i+1}]` containing `x` (clamped).
    pub fn locate(&self, x: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Nodes mapped by `x -> x / rho`.
    pub fn rescaled(&self, rho: f64) -> Grid1D {
        let spacing = match &self.spacing {
            Spacing::Graded { toward } => Spacing::Graded {
                toward: toward.iter().map(|p| p / rho).collect(),
            },
            other => other.clone(),
        };
        Grid1D {
            nodes: self.nodes.iter().map(|x| x / rho).collect(),
            spacing,
        }
    }

    /// Nodes translated by `shift`.
    pub fn shifted(&self, shift: f64) -> Grid1D {
        let spacing = match &self.spacing {
            Spacing::Graded { toward } => Spacing::Graded {
                toward: toward.iter().map(|p| p + shift).collect(),
            },
            other => other.clone(),
        };
        Grid1D {
            nodes: self.nodes.iter().map(|x| x + shift).collect(),
            spacing,
        }
    }

    /// Whether all cells have the same length up to rounding.
    pub fn is_uniform(&self) -> bool {
        let h0 = self.cell_len(0);
        (0..self.n_cells()).all(|i| (self.cell_len(i) - h0).abs() <= 1e-9 * h0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum TailModel {
    Constant(f64),
    None,
}

impl TailModel {
    pub fn value(&self) -> Option<f64> {
        match self {
            TailModel::Constant(c) => Some(*c),
            TailModel::None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interp {
    PiecewiseLinear,
    PiecewiseConstant,
}

/// Values on a grid plus constant tails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: Grid1D,
    values: Vec<f64>,
    left_tail: TailModel,
    right_tail: TailModel,
    interp: Interp,
    unconstrained: bool,
}

impl GridFunction {
    /// Values are clamped into [-1, 1].
    pub fn new(
        grid: Grid1D,
        values: Vec<f64>,
        left_tail: TailModel,
        right_tail: TailModel,
        interp: Interp,
    ) -> Result<Self> {
        Self::build(grid, values, left_tail, right_tail, interp, false)
    }

    /// Values kept as given.
    pub fn new_unconstrained(
        grid: Grid1D,
        values: Vec<f64>,
        left_tail: TailModel,
        right_tail: TailModel,
        interp: Interp,
    ) -> Result<Self> {
        Self::build(grid, values, left_tail, right_tail, interp, true)
    }

    fn build(
        grid: Grid1D,
        mut values: Vec<f64>,
        left_tail: TailModel,
        right_tail: TailModel,
        interp: Interp,
        unconstrained: bool,
    ) -> Result<Self> {
        let expected = match interp {
            Interp::PiecewiseLinear => grid.len(),
            Interp::PiecewiseConstant => grid.n_cells(),
        };
        if values.len() != expected {
            return Err(FracError::InvalidParameter(format!(
                "expected {expected} values for {interp:?}, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FracError::InvalidParameter("non-finite grid value".into()));
        }
        if !unconstrained {
            for v in values.iter_mut() {
                *v = v.clamp(-1.0, 1.0);
            }
        }
        Ok(Self {
            grid,
            values,
            left_tail,
            right_tail,
            interp,
            unconstrained,
        })
    }

    /// Piecewise-linear samples of `f` at the nodes.
    pub fn sample(
        grid: Grid1D,
        f: impl Fn(f64) -> f64,
        left_tail: TailModel,
        right_tail: TailModel,
    ) -> Result<Self> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid, values, left_tail, right_tail, Interp::PiecewiseLinear)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_tail(&self) -> TailModel {
        self.left_tail
    }

    pub fn right_tail(&self) -> TailModel {
        self.right_tail
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn is_unconstrained(&self) -> bool {
        self.unconstrained
    }

    /// Same grid and tails, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::build(
            self.grid.clone(),
            values,
            self.left_tail,
            self.right_tail,
            self.interp,
            self.unconstrained,
        )
    }

    pub fn with_tails(&self, left: TailModel, right: TailModel) -> Self {
        let mut out = self.clone();
        out.left_tail = left;
        out.right_tail = right;
        out
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let g = &self.grid;
        if x < g.left() {
            return self.left_tail.value().ok_or_else(|| {
                FracError::UndefinedTail(format!("x = {x} lies in an undefined left tail"))
            });
        }
        if x > g.right() {
            return self.right_tail.value().ok_or_else(|| {
                FracError::UndefinedTail(format!("x = {x} lies in an undefined right tail"))
            });
        }
        let i = g.locate(x);
        Ok(match self.interp {
            Interp::PiecewiseConstant => self.values[i],
            Interp::PiecewiseLinear => {
                let (x0, x1) = (g.nodes()[i], g.nodes()[i + 1]);
                let t = (x - x0) / (x1 - x0);
                self.values[i] + t * (self.values[i + 1] - self.values[i])
            }
        })
    }

    /// `u_rho(x) = u(rho x)`: nodes divided by `rho`, tails kept.
    pub fn rescale(&self, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(FracError::InvalidParameter(format!("rho must be > 0, got {rho}")));
        }
        let mut out = self.clone();
        out.grid = self.grid.rescaled(rho);
        Ok(out)
    }

    /// `x -> u(x - shift)`.
    pub fn translate(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.grid = self.grid.shifted(shift);
        out
    }

    /// Resample onto `grid` by evaluation; piecewise-linear output.
    pub fn resample(&self, grid: Grid1D) -> Result<Self> {
        let values = grid
            .nodes()
            .iter()
            .map(|&x| self.eval(x))
            .collect::<Result<Vec<_>>>()?;
        Self::build(
            grid,
            values,
            self.left_tail,
            self.right_tail,
            Interp::PiecewiseLinear,
            self.unconstrained,
        )
    }

    /// Split every cell of a piecewise-constant function into `k` equal cells.
    pub fn refine_cells(&self, k: usize) -> Result<Self> {
        assert!(k >= 1);
        if self.interp != Interp::PiecewiseConstant {
            return Err(FracError::InvalidParameter(
                "refine_cells applies to piecewise-constant functions".into(),
            ));
        }
        let x = self.grid.nodes();
        let mut nodes = Vec::with_capacity(self.grid.n_cells() * k + 1);
        let mut values = Vec::with_capacity(self.grid.n_cells() * k);
        for i in 0..self.grid.n_cells() {
            let h = (x[i + 1] - x[i]) / k as f64;
            for j in 0..k {
                nodes.push(x[i] + h * j as f64);
                values.push(self.values[i]);
            }
        }
        nodes.push(self.grid.right());
        let grid = Grid1D::from_nodes(nodes, Spacing::Custom)?;
        Self::build(
            grid,
            values,
            self.left_tail,
            self.right_tail,
            Interp::PiecewiseConstant,
            self.unconstrained,
        )
    }

    /// Nodal value nearest to `x` from inside the grid; a grid stand-in for the trace.
    pub fn nearest_nodal_value(&self, x: f64) -> f64 {
        let nodes = self.grid.nodes();
        let i = match nodes.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => i,
            Err(i) => {
                if i == 0 {
                    0
                } else if i >= nodes.len() {
                    nodes.len() - 1
                } else if (x - nodes[i - 1]) <= (nodes[i] - x) {
                    i - 1
                } else {
                    i
                }
            }
        };
        match self.interp {
            Interp::PiecewiseLinear => self.values[i],
            Interp::PiecewiseConstant => self.values[i.min(self.values.len() - 1)],
        }
    }
}

/// A set `E ∩ Ω` encoded by its jump points inside `Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryPhase {
    pub omega: Interval,
    pub jumps: Vec<f64>,
    /// Value of `χ_E - χ_{E^c}` just right of the left endpoint.
    pub left_sign: f64,
}

impl BinaryPhase {
    pub fn new(omega: Interval, mut jumps: Vec<f64>, left_sign: f64) -> Result<Self> {
        if left_sign != 1.0 && left_sign != -1.0 {
            return Err(FracError::InvalidParameter(format!(
                "left_sign must be +1 or -1, got {left_sign}"
            )));
        }
        jumps.sort_by(f64::total_cmp);
        if let Some(&j) = jumps.iter().find(|&&j| !omega.contains(j)) {
            return Err(FracError::JumpOutsideDomain(format!(
                "jump {j} not inside ({}, {})",
                omega.lo, omega.hi
            )));
        }
        if jumps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FracError::InvalidParameter("jumps must be distinct".into()));
        }
        Ok(Self {
            omega,
            jumps,
            left_sign,
        })
    }

    /// Per(E, Ω): the number of jumps.
    pub fn perimeter(&self) -> usize {
        self.jumps.len()
    }

    /// The induced ±1 value at `x ∈ Ω` (right-continuous at jumps).
    pub fn sign_at(&self, x: f64) -> f64 {
        let k = self.jumps.iter().filter(|&&j| j <= x).count();
        if k % 2 == 0 {
            self.left_sign
        } else {
            -self.left_sign
        }
    }

    /// Trace sign at the left endpoint.
    pub fn sign_left(&self) -> f64 {
        self.left_sign
    }

    /// Trace sign at the right endpoint.
    pub fn sign_right(&self) -> f64 {
        if self.jumps.len() % 2 == 0 {
            self.left_sign
        } else {
            -self.left_sign
        }
    }

    /// Distance to the nearest jump, positive where the induced function is +1.
    ///
    /// Without jumps the distance is infinite.
    pub fn signed_distance(&self, x: f64) -> f64 {
        let d = self
            .jumps
            .iter()
            .map(|j| (x - j).abs())
            .fold(f64::INFINITY, f64::min);
        if d == 0.0 {
            return 0.0;
        }
        self.sign_at(x) * d
    }
}

/// `χ_E - χ_{E^c}` on Ω as a piecewise-constant grid function with the given tails.
pub fn phase_to_function(
    e: &BinaryPhase,
    left_tail: TailModel,
    right_tail: TailModel,
) -> Result<GridFunction> {
    for &j in &e.jumps {
        if !e.omega.contains(j) {
            return Err(FracError::JumpOutsideDomain(format!("jump {j}")));
        }
    }
    let mut nodes = vec![e.omega.lo];
    nodes.extend(e.jumps.iter().copied());
    nodes.push(e.omega.hi);
    let mut values = Vec::with_capacity(nodes.len() - 1);
    let mut sign = e.left_sign;
    for _ in 0..nodes.len() - 1 {
        values.push(sign);
        sign = -sign;
    }
    if nodes.len() == 2 {
        // a single cell; split it so the grid has three nodes
        let mid = 0.5 * (nodes[0] + nodes[1]);
        nodes.insert(1, mid);
        values.push(values[0]);
    }
    let grid = Grid1D::from_nodes(nodes, Spacing::Custom)?;
    GridFunction::new(grid, values, left_tail, right_tail, Interp::PiecewiseConstant)
}

/// Exterior datum `g`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Datum {
    Constant { value: f64 },
    /// `left` for `x < at`, `right` for `x > at`.
    Step { at: f64, left: f64, right: f64 },
    /// Linear ramp from `left` to `right` over `[at - width/2, at + width/2]`.
    Ramp { at: f64, width: f64, left: f64, right: f64 },
    #[serde(skip)]
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for Datum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Datum::Constant { value } => write!(f, "Constant({value})"),
            Datum::Step { at, left, right } => write!(f, "Step({at}; {left} -> {right})"),
            Datum::Ramp {
                at,
                width,
                left,
                right,
            } => write!(f, "Ramp({at}, {width}; {left} -> {right})"),
            Datum::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Datum {
    pub fn constant(value: f64) -> Self {
        Datum::Constant { value }
    }

    /// sign(x - at).
    pub fn sign(at: f64) -> Self {
        Datum::Step {
            at,
            left: -1.0,
            right: 1.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Datum::Constant { value } => *value,
            Datum::Step { at, left, right } => {
                if x < *at {
                    *left
                } else if x > *at {
                    *right
                } else {
                    0.5 * (left + right)
                }
            }
            Datum::Ramp {
                at,
                width,
                left,
                right,
            } => {
                let t = ((x - at) / width + 0.5).clamp(0.0, 1.0);
                left + t * (right - left)
            }
            Datum::Custom { f, .. } => f(x),
        }
    }

    /// Whether `g` is constant on `(-∞, a]` and on `[b, ∞)`.
    pub fn constant_outside(&self, omega: &Interval) -> bool {
        match self {
            Datum::Constant { .. } => true,
            Datum::Step { at, .. } => omega.lo <= *at && *at <= omega.hi,
            Datum::Ramp { at, width, .. } => {
                omega.lo <= at - 0.5 * width && at + 0.5 * width <= omega.hi
            }
            Datum::Custom { .. } => false,
        }
    }

    /// Values of `g` far to the left and right of `omega`.
    pub fn far_values(&self, omega: &Interval, cutoff: f64) -> (f64, f64) {
        (self.eval(omega.lo - cutoff), self.eval(omega.hi + cutoff))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tanh_profile(n: usize) -> GridFunction {
        let grid = Grid1D::uniform(-5.0, 5.0, n).unwrap();
        GridFunction::sample(
            grid,
            |x| x.tanh(),
            TailModel::Constant(-1.0),
            TailModel::Constant(1.0),
        )
        .unwrap()
    }

    #[test]
    fn constant_far_away() {
        let g = Grid1D::uniform(-1.0, 1.0, 5).unwrap();
        let u = GridFunction::sample(
            g,
            |_| 0.3,
            TailModel::Constant(0.3),
            TailModel::Constant(0.3),
        )
        .unwrap();
        assert_eq!(u.eval(1e6).unwrap(), 0.3);
    }

    #[test]
    fn linear_interpolation() {
        let g = Grid1D::from_nodes(vec![0.0, 1.0, 2.0], Spacing::Custom).unwrap();
        let u = GridFunction::new(
            g,
            vec![0.0, 1.0, 1.0],
            TailModel::None,
            TailModel::None,
            Interp::PiecewiseLinear,
        )
        .unwrap();
        assert_eq!(u.eval(0.5).unwrap(), 0.5);
        assert!(matches!(u.eval(-1.0), Err(FracError::UndefinedTail(_))));
    }

    #[test]
    fn values_are_clamped() {
        let g = Grid1D::uniform(0.0, 1.0, 3).unwrap();
        let u = GridFunction::new(
            g.clone(),
            vec![-2.0, 0.0, 3.0],
            TailModel::None,
            TailModel::None,
            Interp::PiecewiseLinear,
        )
        .unwrap();
        assert_eq!(u.values(), &[-1.0, 0.0, 1.0]);
        let v = GridFunction::new_unconstrained(
            g,
            vec![-2.0, 0.0, 3.0],
            TailModel::None,
            TailModel::None,
            Interp::PiecewiseLinear,
        )
        .unwrap();
        assert_eq!(v.values(), &[-2.0, 0.0, 3.0]);
    }

    #[test]
    fn rescale_identity_and_definition() {
        let u = tanh_profile(101);
        let same = u.rescale(1.0).unwrap();
        assert_eq!(same, u);
        let u2 = u.rescale(2.0).unwrap();
        assert!((u2.eval(1.0).unwrap() - u.eval(2.0).unwrap()).abs() < 1e-15);
        assert_eq!(u2.eval(10.0).unwrap(), 1.0);
    }

    #[test]
    fn phase_function_matches_sign() {
        let e = BinaryPhase::new(Interval::new(-1.0, 1.0), vec![0.0], -1.0).unwrap();
        let u = phase_to_function(&e, TailModel::Constant(-1.0), TailModel::Constant(1.0)).unwrap();
        for &x in &[-3.0, -0.5, 0.5, 3.0] {
            assert_eq!(u.eval(x).unwrap(), x.signum());
        }
        assert_eq!(e.perimeter(), 1);
        let e0 = BinaryPhase::new(Interval::new(-1.0, 1.0), vec![], 1.0).unwrap();
        assert_eq!(e0.perimeter(), 0);
        let u0 = phase_to_function(&e0, TailModel::Constant(1.0), TailModel::Constant(1.0)).unwrap();
        assert!(u0.values().iter().all(|&v| v == 1.0));
        let e2 = BinaryPhase::new(Interval::new(-1.0, 1.0), vec![-0.5, 0.5], 1.0).unwrap();
        assert_eq!(e2.perimeter(), 2);
    }

    #[test]
    fn jump_outside_is_rejected() {
        let r = BinaryPhase::new(Interval::new(-1.0, 1.0), vec![1.5], 1.0);
        assert!(matches!(r, Err(FracError::JumpOutsideDomain(_))));
    }

    #[test]
    fn signed_distance_examples() {
        let e = BinaryPhase::new(Interval::new(-1.0, 1.0), vec![0.0], -1.0).unwrap();
        assert!((e.signed_distance(0.3) - 0.3).abs() < 1e-15);
        assert!((e.signed_distance(-0.2) + 0.2).abs() < 1e-15);
        assert_eq!(e.signed_distance(0.0), 0.0);
    }

    #[test]
    fn graded_grid_clusters_toward_focus() {
        let g = Grid1D::graded(-10.0, 0.0, &[0.0], 0.01, 1.1, 1.0).unwrap();
        let x = g.nodes();
        assert_eq!(*x.last().unwrap(), 0.0);
        assert_eq!(x[0], -10.0);
        // spacing is non-increasing toward the focus, up to the bridge cells
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let k = h.len();
        assert!(h[k - 1] < 0.011);
        assert!(h[k - 1] <= h[k / 2]);
        assert!(h[k / 2] <= h[0] * 1.01 + 1e-12);
    }

    #[test]
    fn datum_values() {
        let d = Datum::sign(0.0);
        assert_eq!(d.eval(-2.0), -1.0);
        assert_eq!(d.eval(2.0), 1.0);
        assert!(d.constant_outside(&Interval::new(-1.0, 1.0)));
        let r = Datum::Ramp {
            at: 0.0,
            width: 1.0,
            left: 0.0,
            right: 1.0,
        };
        assert_eq!(r.eval(0.0), 0.5);
        assert!(!r.constant_outside(&Interval::new(-0.2, 0.2)));
    }

    proptest! {
        #[test]
        fn rescale_composes(a in 0.2f64..5.0, b in 0.2f64..5.0) {
            let u = tanh_profile(41);
            let ab = u.rescale(a).unwrap().rescale(b).unwrap();
            let direct = u.rescale(a * b).unwrap();
            for (x, y) in ab.grid().nodes().iter().zip(direct.grid().nodes()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
            prop_assert_eq!(ab.values(), direct.values());
        }

        #[test]
        fn phase_function_is_binary(j1 in -0.9f64..-0.05, j2 in 0.05f64..0.9, ls in prop::bool::ANY) {
            let sign = if ls { 1.0 } else { -1.0 };
            let e = BinaryPhase::new(Interval::new(-1.0, 1.0), vec![j1, j2], sign).unwrap();
            let u = phase_to_function(&e, TailModel::None, TailModel::None).unwrap();
            prop_assert!(u.values().iter().all(|&v| v == 1.0 || v == -1.0));
            for w in u.values().windows(2) {
                prop_assert_eq!(w[0], -w[1]);
            }
        }

        #[test]
        fn signed_distance_is_lipschitz(x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let e = BinaryPhase::new(Interval::new(-1.0, 1.0), vec![-0.3, 0.4], 1.0).unwrap();
            let dx = e.signed_distance(x);
            let dy = e.signed_distance(y);
            prop_assert!((dx - dy).abs() <= (x - y).abs() + 1e-12);
        }
    }
}
