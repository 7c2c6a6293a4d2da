//! Double integrals of `|u(x)-u(y)|^2 |x-y|^(-1-2s)` over pairs of pieces.
//!
//! `X` always lies to the left of `Y`. Near pairs use exact reductions to
//! power integrals, separated pairs use 4x4 Gauss-Legendre.

use crate::quad::{pint, G4_W, G4_X};

/// Pairs closer than `NEAR_RATIO * max(hx, hy)` use the exact formulas.
pub(crate) const NEAR_RATIO: f64 = 3.0;

/// Polynomial of degree at most 3 in the ascending basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Poly3(pub [f64; 4]);

impl Poly3 {
    pub fn constant(c: f64) -> Self {
        Poly3([c, 0.0, 0.0, 0.0])
    }

    pub fn linear(c0: f64, c1: f64) -> Self {
        Poly3([c0, c1, 0.0, 0.0])
    }

    pub fn add(self, o: Self) -> Self {
        let mut r = [0.0; 4];
        for (k, v) in r.iter_mut().enumerate() {
            *v = self.0[k] + o.0[k];
        }
        Poly3(r)
    }

    pub fn sub(self, o: Self) -> Self {
        let mut r = [0.0; 4];
        for (k, v) in r.iter_mut().enumerate() {
            *v = self.0[k] - o.0[k];
        }
        Poly3(r)
    }

    pub fn scale(self, a: f64) -> Self {
        Poly3(self.0.map(|c| a * c))
    }

    /// Product; terms above degree 3 must vanish.
    pub fn mul(self, o: Self) -> Self {
        let mut r = [0.0; 4];
        for i in 0..4 {
            if self.0[i] == 0.0 {
                continue;
            }
            for j in 0..4 {
                if o.0[j] == 0.0 {
                    continue;
                }
                debug_assert!(i + j <= 3, "degree overflow in Poly3::mul");
                if i + j <= 3 {
                    r[i + j] += self.0[i] * o.0[j];
                }
            }
        }
        Poly3(r)
    }

    /// Coefficients of `p(t - g)` in powers of `t`.
    pub fn shift(self, g: f64) -> Self {
        if g == 0.0 {
            return self;
        }
        const BINOM: [[f64; 4]; 4] = [
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [1.0, 2.0, 1.0, 0.0],
            [1.0, 3.0, 3.0, 1.0],
        ];
        let mut r = [0.0; 4];
        for k in 0..4 {
            if self.0[k] == 0.0 {
                continue;
            }
            let mut gp = 1.0;
            for j in (0..=k).rev() {
                r[j] += self.0[k] * BINOM[k][j] * gp;
                gp *= -g;
            }
        }
        Poly3(r)
    }
}

/// `∫_a^b p(t) t^(-1-2s) dt`, skipping zero coefficients so `0 * ∞` never occurs.
fn poly_power_integral(p: Poly3, a: f64, b: f64, s: f64) -> f64 {
    let mut acc = 0.0;
    for (j, &c) in p.0.iter().enumerate() {
        if c != 0.0 {
            acc += c * pint(a, b, j as f64 - 2.0 * s);
        }
    }
    acc
}

/// Exact `∫_0^hx ∫_0^hy (J - mx ξ - my η)^2 (g + ξ + η)^(-1-2s) dη dξ`.
///
/// `ξ` is the distance from the right end of `X`, `η` from the left end of `Y`,
/// `J = u(x1) - u(y0)` and `mx`, `my` are the slopes. Returns `+∞` when the
/// integral diverges (`g = 0`, `J ≠ 0`, `s ≥ 1/2`).
pub(crate) fn linlin_exact(hx: f64, hy: f64, g: f64, j: f64, mx: f64, my: f64, s: f64) -> f64 {
    // with w = ξ + η, the integrand is (P(w) + q ξ)^2 where P = J - my w
    let p = Poly3::linear(j, -my);
    let q = my - mx;
    let w = Poly3::linear(0.0, 1.0);
    let lo = hx.min(hy);
    let hi = hx.max(hy);
    let top = hx + hy;
    // limits of ξ on each w-subinterval
    let segments: [(f64, f64, Poly3, Poly3); 3] = [
        (0.0, lo, Poly3::constant(0.0), w),
        (
            lo,
            hi,
            if hx <= hy {
                Poly3::constant(0.0)
            } else {
                w.sub(Poly3::constant(hy))
            },
            if hx <= hy { Poly3::constant(hx) } else { w },
        ),
        (hi, top, w.sub(Poly3::constant(hy)), Poly3::constant(hx)),
    ];
    let mut total = 0.0;
    for (wl, wh, a, b) in segments {
        if wh <= wl {
            continue;
        }
        let d1 = b.sub(a);
        let d2 = b.mul(b).sub(a.mul(a));
        let d3 = b.mul(b).mul(b).sub(a.mul(a).mul(a));
        let poly = p
            .mul(p)
            .mul(d1)
            .add(p.mul(d2).scale(q))
            .add(d3.scale(q * q / 3.0));
        total += poly_power_integral(poly.shift(g), g + wl, g + wh, s);
    }
    total
}

/// Same-cell integral of a linear piece with slope `m` and length `h`.
pub(crate) fn lin_self(h: f64, m: f64, s: f64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    m * m * 2.0 * h.powf(3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s))
}

#[inline]
pub(crate) fn kernel(d: f64, s: f64) -> f64 {
    d.powf(-1.0 - 2.0 * s)
}

/// 4x4 Gauss approximation for linear pieces `X = [x0,x1]` left of `Y = [y0,y1]`.
pub(crate) fn linlin_gauss(x: [f64; 4], y: [f64; 4], s: f64) -> f64 {
    let [x0, x1, u0, u1] = x;
    let [y0, y1, w0, w1] = y;
    let hx = x1 - x0;
    let hy = y1 - y0;
    let mut acc = 0.0;
    for a in 0..4 {
        let xa = x0 + hx * G4_X[a];
        let ua = u0 + (u1 - u0) * G4_X[a];
        let mut inner = 0.0;
        for b in 0..4 {
            let yb = y0 + hy * G4_X[b];
            let wb = w0 + (w1 - w0) * G4_X[b];
            let d = ua - wb;
            inner += G4_W[b] * d * d * kernel(yb - xa, s);
        }
        acc += G4_W[a] * inner;
    }
    acc * hx * hy
}

/// Linear pieces, `X` left of `Y`; exact when near, Gauss otherwise.
pub(crate) fn linlin(x: [f64; 4], y: [f64; 4], s: f64) -> f64 {
    let hx = x[1] - x[0];
    let hy = y[1] - y[0];
    let g = (y[0] - x[1]).max(0.0);
    if g < NEAR_RATIO * hx.max(hy) {
        let j = x[3] - y[2];
        let mx = (x[3] - x[2]) / hx;
        let my = (y[3] - y[2]) / hy;
        linlin_exact(hx, hy, g, j, mx, my, s)
    } else {
        linlin_gauss(x, y, s)
    }
}

/// `∫ (u - c)^2 t^(-2s) dt` over a linear piece at distances `t ∈ [gap, gap + h]`.
///
/// `v_near` is the value at distance `gap`, `v_far` at `gap + h`.
pub(crate) fn edge_moment(gap: f64, h: f64, v_near: f64, v_far: f64, c: f64, s: f64) -> f64 {
    if gap.is_infinite() {
        return 0.0;
    }
    if gap >= NEAR_RATIO * h {
        let mut acc = 0.0;
        for k in 0..4 {
            let t = gap + h * G4_X[k];
            let d = v_near + (v_far - v_near) * G4_X[k] - c;
            acc += G4_W[k] * d * d * t.powf(-2.0 * s);
        }
        return acc * h;
    }
    // u - c = α + σ t in the distance variable
    let sigma = (v_far - v_near) / h;
    let alpha = (v_near - c) - sigma * gap;
    let e = 1.0 - 2.0 * s;
    let mut acc = 0.0;
    if alpha != 0.0 {
        acc += alpha * alpha * pint(gap, gap + h, e);
    }
    if alpha != 0.0 && sigma != 0.0 {
        acc += 2.0 * alpha * sigma * pint(gap, gap + h, e + 1.0);
    }
    if sigma != 0.0 {
        acc += sigma * sigma * pint(gap, gap + h, e + 2.0);
    }
    acc
}

/// Linear piece against a constant piece on the interval with edges `near`, `far`
/// measured as distances from the linear piece's closer endpoint.
///
/// `gap_near <= gap_far`; `gap_far` may be infinite.
pub(crate) fn lin_const(
    gap_near: f64,
    gap_far: f64,
    h: f64,
    v_near: f64,
    v_far: f64,
    c: f64,
    s: f64,
) -> f64 {
    let t_near = edge_moment(gap_near, h, v_near, v_far, c, s);
    if t_near.is_infinite() {
        return f64::INFINITY;
    }
    let t_far = edge_moment(gap_far, h, v_near, v_far, c, s);
    (t_near - t_far) / (2.0 * s)
}

/// `∫_{x0}^{x1} ∫_{y0}^{y1} |x-y|^(-1-2s) dy dx` for `x1 <= y0`; ends may be infinite.
pub(crate) fn rect(x0: f64, x1: f64, y0: f64, y1: f64, s: f64) -> f64 {
    let e = 1.0 - 2.0 * s;
    let c = (y0 - x1).max(0.0);
    let phi = |a: f64, b: f64| if a >= b { 0.0 } else { pint(a, b, e) };
    let val = if x0.is_infinite() && y1.is_infinite() {
        phi(c, f64::INFINITY)
    } else if y1.is_infinite() {
        // φ(C, D) - φ(A, B) with A = B = ∞
        phi(c, y0 - x0)
    } else if x0.is_infinite() {
        // φ(C, A) - φ(D, B) with D = B = ∞
        phi(c, y1 - x1)
    } else {
        let a = y1 - x1;
        let b = y1 - x0;
        let d = y0 - x0;
        let v1 = phi(c, a);
        if v1.is_infinite() {
            return f64::INFINITY;
        }
        v1 - phi(d, b)
    };
    val / (2.0 * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussRule;

    /// Brute-force tensor Gauss with geometric grading toward the shared corner.
    fn brute(x: [f64; 4], y: [f64; 4], s: f64) -> f64 {
        let g = GaussRule::new(20);
        let levels = 40;
        let panels = |a: f64, b: f64, toward_right: bool| {
            let mut out = Vec::new();
            let mut lo = a;
            let mut hi = b;
            for _ in 0..levels {
                if toward_right {
                    let mid = 0.5 * (lo + hi);
                    out.push((lo, mid));
                    lo = mid;
                } else {
                    let mid = 0.5 * (lo + hi);
                    out.push((mid, hi));
                    hi = mid;
                }
            }
            out.push((lo, hi));
            out
        };
        let px = panels(x[0], x[1], true);
        let py = panels(y[0], y[1], false);
        let mut acc = 0.0;
        for &(a, b) in &px {
            for (xx, wx) in g.on(a, b) {
                let ux = x[2] + (x[3] - x[2]) * (xx - x[0]) / (x[1] - x[0]);
                for &(c, d) in &py {
                    for (yy, wy) in g.on(c, d) {
                        let uy = y[2] + (y[3] - y[2]) * (yy - y[0]) / (y[1] - y[0]);
                        acc += wx * wy * (ux - uy).powi(2) * kernel(yy - xx, s);
                    }
                }
            }
        }
        acc
    }

    #[test]
    fn exact_matches_brute_force_adjacent() {
        for &s in &[0.2, 0.5, 0.75] {
            let x = [0.0, 0.3, 0.1, 0.7];
            let y = [0.3, 0.8, 0.7, -0.2];
            let e = linlin(x, y, s);
            let b = brute(x, y, s);
            assert!((e - b).abs() < 1e-6 * b, "s={s}: {e} vs {b}");
        }
    }

    #[test]
    fn exact_matches_brute_force_gap() {
        for &s in &[0.3, 0.6] {
            let x = [0.0, 0.4, 0.2, -0.5];
            let y = [0.7, 0.9, 0.4, 0.1];
            let e = linlin_exact(0.4, 0.2, 0.3, -0.5 - 0.4, -0.7 / 0.4, -0.3 / 0.2, s);
            let b = brute(x, y, s);
            assert!((e - b).abs() < 1e-9 * b, "s={s}: {e} vs {b}");
        }
    }

    #[test]
    fn jump_at_shared_node_diverges_iff_s_large() {
        assert!(linlin_exact(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.6).is_infinite());
        assert!(linlin_exact(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.5).is_infinite());
        let v = linlin_exact(1.0, 1.0, 0.0, 2.0, 0.0, 0.0, 0.25);
        // 4 * 4(2 - √2) / 2 on the unit square, see the rectangle identity
        let expect = 4.0 * rect(0.0, 1.0, 1.0, 2.0, 0.25);
        assert!((v - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn self_formula_matches_brute_force() {
        // split the cell in two and add the three sub-pairs
        let s = 0.6;
        let whole = lin_self(1.0, 2.0, s);
        let half = lin_self(0.5, 2.0, s);
        let cross = linlin([0.0, 0.5, 0.0, 1.0], [0.5, 1.0, 1.0, 2.0], s);
        assert!((whole - (2.0 * half + 2.0 * cross)).abs() < 1e-12 * whole);
    }

    #[test]
    fn rect_unit_square_closed_form() {
        let s = 0.25;
        let v = rect(-1.0, 0.0, 0.0, 1.0, s);
        assert!((v - 4.0 * (2.0 - 2f64.sqrt())).abs() < 1e-13);
        let tail = rect(-1.0, 0.0, 1.0, f64::INFINITY, s);
        let expect = (2f64.powf(0.5) - 1.0) / (2.0 * s * 0.5);
        assert!((tail - expect).abs() < 1e-13);
        assert!(rect(-1.0, 0.0, 0.0, 1.0, 0.5).is_infinite());
    }

    #[test]
    fn lin_const_matches_gauss_limit() {
        // a linear piece against a far constant interval: compare with a Gauss sum
        let s = 0.7;
        let g = GaussRule::new(30);
        let (x0, x1, v0, v1, c) = (0.0, 0.5, 0.2, -0.4, 0.9);
        let (y0, y1) = (0.5, 3.0);
        let exact = lin_const(0.0, y1 - x1, x1 - x0, v1, v0, c, s);
        let mut acc = 0.0;
        for (xx, wx) in g.on(x0, x1) {
            let ux = v0 + (v1 - v0) * (xx - x0) / (x1 - x0);
            let inner = ((y0 - xx).powf(-2.0 * s) - (y1 - xx).powf(-2.0 * s)) / (2.0 * s);
            acc += wx * (ux - c).powi(2) * inner;
        }
        // the inner kernel is singular at x1 only through (u - c)^2 ≠ 0 there; s > 1/2 diverges
        assert!(exact.is_infinite());
        let exact = lin_const(0.0, y1 - x1, x1 - x0, c, v0, c, s);
        // the integrand behaves like (x1 - x)^(2-2s); grade toward x1
        let mut acc2 = 0.0;
        let mut lo = x0;
        for k in 0..=40 {
            let hi = if k == 40 { x1 } else { x1 - (x1 - lo) * 0.5 };
            for (xx, wx) in g.on(lo, hi) {
                let ux = v0 + (c - v0) * (xx - x0) / (x1 - x0);
                let inner = ((y0 - xx).powf(-2.0 * s) - (y1 - xx).powf(-2.0 * s)) / (2.0 * s);
                acc2 += wx * (ux - c).powi(2) * inner;
            }
            lo = hi;
        }
        assert!(acc.is_finite());
        assert!((exact - acc2).abs() < 1e-8 * acc2, "{exact} vs {acc2}");
    }

    #[test]
    fn shift_is_exact_for_cubics() {
        let p = Poly3([1.0, -2.0, 0.5, 3.0]);
        let q = p.shift(0.7);
        for &t in &[0.0, 0.3, 1.9] {
            let w: f64 = t - 0.7;
            let lhs = p.0[0] + p.0[1] * w + p.0[2] * w * w + p.0[3] * w * w * w;
            let rhs = q.0[0] + q.0[1] * t + q.0[2] * t * t + q.0[3] * t * t * t;
            assert!((lhs - rhs).abs() < 1e-13);
        }
    }
}
