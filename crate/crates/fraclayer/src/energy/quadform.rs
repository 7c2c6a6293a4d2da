//! Dense quadratic form of `u(Q_Ω)` in the nodal values of a piecewise-linear function.
//!
//! `Ω` is the grid range and the exterior is given by constant tails, so
//! `u(Q_Ω) = uᵀKu - 2fᵀu + c0`. `K` depends on the grid and `s` only.

use rayon::prelude::*;

use super::pairs::{kernel, linlin_exact};
use crate::funcrep::Grid1D;
use crate::quad::{pint, G4_W, G4_X};
use crate::{FracError, Result};

/// Cell pairs with index distance up to this use the exact formulas.
const NEAR_CELLS: usize = 3;

#[derive(Debug, Clone)]
pub struct QuadForm {
    n: usize,
    s: f64,
    k: Vec<f64>,
    f_left: Vec<f64>,
    f_right: Vec<f64>,
    c_left: f64,
    c_right: f64,
    left_tail: Option<f64>,
    right_tail: Option<f64>,
    lumped: Vec<f64>,
}

/// Local 4x4 form of a near pair over `[u_a, u_a+1, u_b, u_b+1]`.
fn near_local(hx: f64, hy: f64, gap: f64, adjacent: bool, s: f64) -> [[f64; 4]; 4] {
    let i = |j: f64, mx: f64, my: f64| linlin_exact(hx, hy, gap, j, mx, my, s);
    // rows of T map nodal values to (J, mX, mY)
    let t: [[f64; 4]; 3] = [
        [0.0, 1.0, -1.0, 0.0],
        [-1.0 / hx, 1.0 / hx, 0.0, 0.0],
        [0.0, 0.0, -1.0 / hy, 1.0 / hy],
    ];
    let mut g = [[0.0; 3]; 3];
    let basis = |k: usize| {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        e
    };
    let first = if adjacent { 1 } else { 0 };
    for k in first..3 {
        let e = basis(k);
        g[k][k] = i(e[0], e[1], e[2]);
    }
    for k in first..3 {
        for l in k + 1..3 {
            let (ek, el) = (basis(k), basis(l));
            let both = i(ek[0] + el[0], ek[1] + el[1], ek[2] + el[2]);
            let v = 0.5 * (both - g[k][k] - g[l][l]);
            g[k][l] = v;
            g[l][k] = v;
        }
    }
    let mut out = [[0.0; 4]; 4];
    for p in 0..4 {
        for q in 0..4 {
            let mut acc = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    acc += t[k][p] * g[k][l] * t[l][q];
                }
            }
            out[p][q] = acc;
        }
    }
    out
}

/// `∫ ψ_k ψ_l t^(-2s) dt` over `t ∈ [gap, gap+h]`, `ψ_0 = 1-ξ`, `ψ_1 = ξ`,
/// `ξ = (t-gap)/h`. The `ψ_0 ψ_0` entry is dropped when it diverges.
fn tail_moments(gap: f64, h: f64, s: f64) -> [[f64; 2]; 2] {
    if gap >= 3.0 * h {
        let mut m = [[0.0; 2]; 2];
        for k in 0..4 {
            let xi = G4_X[k];
            let w = G4_W[k] * h * (gap + h * xi).powf(-2.0 * s);
            let psi = [1.0 - xi, xi];
            for p in 0..2 {
                for q in 0..2 {
                    m[p][q] += w * psi[p] * psi[q];
                }
            }
        }
        return m;
    }
    let e = 1.0 - 2.0 * s;
    let mu: [f64; 3] = if gap == 0.0 {
        let hp = h.powf(e);
        [
            if e > 0.0 { hp / e } else { f64::INFINITY },
            hp / (e + 1.0),
            hp / (e + 2.0),
        ]
    } else {
        let p0 = pint(gap, gap + h, e);
        let p1 = pint(gap, gap + h, e + 1.0);
        let p2 = pint(gap, gap + h, e + 2.0);
        [
            p0,
            (p1 - gap * p0) / h,
            (p2 - 2.0 * gap * p1 + gap * gap * p0) / (h * h),
        ]
    };
    let m00 = if mu[0].is_finite() {
        mu[0] - 2.0 * mu[1] + mu[2]
    } else {
        0.0
    };
    [[m00, mu[1] - mu[2]], [mu[1] - mu[2], mu[2]]]
}

struct Rows<'a> {
    a: usize,
    n: usize,
    data: &'a mut [f64],
}

impl Rows<'_> {
    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i <= j);
        let r = i - self.a;
        debug_assert!(r < 2);
        self.data[r * self.n + j] += v;
    }

    /// Add the upper part of a local symmetric form with global indices `idx`;
    /// only entries whose row is owned by this task are written.
    fn add_local<const M: usize>(&mut self, idx: [usize; M], l: &[[f64; M]; M], owned: impl Fn(usize, usize) -> bool) {
        for p in 0..M {
            for q in 0..M {
                let (i, j) = (idx[p], idx[q]);
                if i > j || !owned(p, q) {
                    continue;
                }
                self.add(i, j, l[p][q]);
            }
        }
    }
}

impl QuadForm {
    /// Assemble the form on `grid` with optional constant tails.
    ///
    /// For `s >= 1/2` a tail makes the adjacent node a pinned value: the form
    /// is only meaningful when that node equals the tail value.
    pub fn assemble(
        grid: &Grid1D,
        s: f64,
        left_tail: Option<f64>,
        right_tail: Option<f64>,
    ) -> Result<Self> {
        super::check_s(s)?;
        let x = grid.nodes().to_vec();
        let n = x.len();
        let nc = n - 1;
        let h: Vec<f64> = (0..nc).map(|a| x[a + 1] - x[a]).collect();
        let uniform = grid.is_uniform();
        let h0 = h[0];

        let self_coef = |h: f64| 2.0 * h.powf(1.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s));

        // Toeplitz tables for uniform grids
        let near_tab: Vec<[[f64; 4]; 4]> = if uniform {
            (1..=NEAR_CELLS)
                .map(|d| near_local(h0, h0, (d - 1) as f64 * h0, d == 1, s))
                .collect()
        } else {
            Vec::new()
        };
        let far_xy = |hx: f64, hy: f64, xa: f64, xb: f64| -> [[f64; 2]; 2] {
            let mut b = [[0.0; 2]; 2];
            for al in 0..4 {
                let xx = xa + hx * G4_X[al];
                let phi = [1.0 - G4_X[al], G4_X[al]];
                for be in 0..4 {
                    let yy = xb + hy * G4_X[be];
                    let psi = [1.0 - G4_X[be], G4_X[be]];
                    // pair weight 2 times cross term -2, split over the two mirrored entries
                    let w = -2.0 * G4_W[al] * G4_W[be] * hx * hy * kernel(yy - xx, s);
                    for i in 0..2 {
                        for j in 0..2 {
                            b[i][j] += w * phi[i] * psi[j];
                        }
                    }
                }
            }
            b
        };
        let far_tab: Vec<[[f64; 2]; 2]> = if uniform {
            (0..nc)
                .map(|d| {
                    if d <= NEAR_CELLS {
                        [[0.0; 2]; 2]
                    } else {
                        far_xy(h0, h0, 0.0, d as f64 * h0)
                    }
                })
                .collect()
        } else {
            Vec::new()
        };

        let has_l = left_tail.is_some();
        let has_r = right_tail.is_some();

        let fill = |a: usize, rows: &mut Rows| {
            let ha = h[a];
            // same cell
            let c = self_coef(ha);
            rows.add(a, a, c);
            rows.add(a, a + 1, -c);
            rows.add(a + 1, a + 1, c);

            // near pairs: XX and XY parts for partners to the right,
            // YY parts for partners to the left
            for d in 1..=NEAR_CELLS {
                if a + d < nc {
                    let b = a + d;
                    let l = if uniform {
                        near_tab[d - 1]
                    } else {
                        near_local(ha, h[b], x[b] - x[a + 1], d == 1, s)
                    };
                    let l2 = l.map(|r| r.map(|v| 2.0 * v));
                    rows.add_local([a, a + 1, b, b + 1], &l2, |p, q| p < 2 || q < 2);
                }
                if a >= d {
                    let b = a - d;
                    let l = if uniform {
                        near_tab[d - 1]
                    } else {
                        near_local(h[b], ha, x[a] - x[b + 1], d == 1, s)
                    };
                    let l2 = l.map(|r| r.map(|v| 2.0 * v));
                    rows.add_local([b, b + 1, a, a + 1], &l2, |p, q| p >= 2 && q >= 2);
                }
            }

            // far pairs to the right: cross terms
            for b in a + NEAR_CELLS + 1..nc {
                let blk = if uniform {
                    far_tab[b - a]
                } else {
                    far_xy(ha, h[b], x[a], x[b])
                };
                for i in 0..2 {
                    for j in 0..2 {
                        rows.add(a + i, b + j, blk[i][j]);
                    }
                }
            }

            // far pairs on both sides: squared terms with the exact inner integral
            let left_far = (a > NEAR_CELLS).then(|| (x[0], x[a - NEAR_CELLS]));
            let right_far = (a + NEAR_CELLS + 1 < nc).then(|| (x[a + NEAR_CELLS + 1], x[nc]));
            if left_far.is_some() || right_far.is_some() {
                let mut m = [[0.0; 2]; 2];
                for al in 0..4 {
                    let xx = x[a] + ha * G4_X[al];
                    let mut kf = 0.0;
                    if let Some((lo, hi)) = left_far {
                        kf += (xx - hi).powf(-2.0 * s) - (xx - lo).powf(-2.0 * s);
                    }
                    if let Some((lo, hi)) = right_far {
                        kf += (lo - xx).powf(-2.0 * s) - (hi - xx).powf(-2.0 * s);
                    }
                    let w = 2.0 * G4_W[al] * ha * kf / (2.0 * s);
                    let phi = [1.0 - G4_X[al], G4_X[al]];
                    for i in 0..2 {
                        for j in 0..2 {
                            m[i][j] += w * phi[i] * phi[j];
                        }
                    }
                }
                rows.add(a, a, m[0][0]);
                rows.add(a, a + 1, m[0][1]);
                rows.add(a + 1, a + 1, m[1][1]);
            }

            // tails: the u-u block of the cell-tail form
            if has_l {
                let m = tail_moments(x[a] - x[0], ha, s);
                let f = 2.0 / (2.0 * s);
                rows.add(a, a, f * m[0][0]);
                rows.add(a, a + 1, f * m[0][1]);
                rows.add(a + 1, a + 1, f * m[1][1]);
            }
            if has_r {
                // near node is a + 1
                let m = tail_moments(x[nc] - x[a + 1], ha, s);
                let f = 2.0 / (2.0 * s);
                rows.add(a + 1, a + 1, f * m[0][0]);
                rows.add(a, a + 1, f * m[0][1]);
                rows.add(a, a, f * m[1][1]);
            }
        };

        let mut k = vec![0.0; n * n];
        // even cells own rows (a, a+1) in the first phase, odd cells in the second
        k.par_chunks_mut(2 * n).enumerate().for_each(|(c, data)| {
            let a = 2 * c;
            if a < nc {
                fill(a, &mut Rows { a, n, data });
            }
        });
        k[n..].par_chunks_mut(2 * n).enumerate().for_each(|(c, data)| {
            let a = 2 * c + 1;
            if a < nc {
                fill(a, &mut Rows { a, n, data });
            }
        });
        for i in 0..n {
            for j in i + 1..n {
                k[j * n + i] = k[i * n + j];
            }
        }

        // tail couplings to the unknowns, per unit tail value
        let mut f_left = vec![0.0; n];
        let mut f_right = vec![0.0; n];
        let mut c_left = 0.0;
        let mut c_right = 0.0;
        let scale = 2.0 / (2.0 * s);
        for a in 0..nc {
            if has_l {
                let m = tail_moments(x[a] - x[0], h[a], s);
                let r0 = scale * (m[0][0] + m[0][1]);
                let r1 = scale * (m[1][0] + m[1][1]);
                f_left[a] += r0;
                f_left[a + 1] += r1;
                c_left += r0 + r1;
            }
            if has_r {
                let m = tail_moments(x[nc] - x[a + 1], h[a], s);
                let r_near = scale * (m[0][0] + m[0][1]);
                let r_far = scale * (m[1][0] + m[1][1]);
                f_right[a + 1] += r_near;
                f_right[a] += r_far;
                c_right += r_near + r_far;
            }
        }

        let mut lumped = vec![0.0; n];
        for a in 0..nc {
            lumped[a] += 0.5 * h[a];
            lumped[a + 1] += 0.5 * h[a];
        }

        if k.iter().any(|v| !v.is_finite()) {
            return Err(FracError::DivergentEnergy(
                "non-finite stiffness entry".into(),
            ));
        }
        Ok(Self {
            n,
            s,
            k,
            f_left,
            f_right,
            c_left,
            c_right,
            left_tail,
            right_tail,
            lumped,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Whether tail-adjacent nodes must carry the tail value.
    pub fn edges_pinned(&self) -> bool {
        self.s >= 0.5 || super::is_half(self.s)
    }

    pub fn tails(&self) -> (Option<f64>, Option<f64>) {
        (self.left_tail, self.right_tail)
    }

    /// Change tail values; tails must already exist.
    pub fn set_tails(&mut self, left: Option<f64>, right: Option<f64>) {
        assert_eq!(left.is_some(), self.left_tail.is_some());
        assert_eq!(right.is_some(), self.right_tail.is_some());
        self.left_tail = left;
        self.right_tail = right;
    }

    pub fn matrix(&self) -> &[f64] {
        &self.k
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// `f` with the current tail values.
    pub fn linear(&self) -> Vec<f64> {
        let cl = self.left_tail.unwrap_or(0.0);
        let cr = self.right_tail.unwrap_or(0.0);
        self.f_left
            .iter()
            .zip(&self.f_right)
            .map(|(l, r)| cl * l + cr * r)
            .collect()
    }

    pub fn constant(&self) -> f64 {
        let cl = self.left_tail.unwrap_or(0.0);
        let cr = self.right_tail.unwrap_or(0.0);
        cl * cl * self.c_left + cr * cr * self.c_right
    }

    /// `out = K u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let row = &self.k[i * n..(i + 1) * n];
            *o = dot(row, u);
        });
    }

    /// `uᵀKu - 2fᵀu + c0`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let mut ku = vec![0.0; self.n];
        self.apply(u, &mut ku);
        let f = self.linear();
        dot(u, &ku) - 2.0 * dot(&f, u) + self.constant()
    }

    /// Gradient `2(Ku - f)`.
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut ku = vec![0.0; self.n];
        self.apply(u, &mut ku);
        let f = self.linear();
        ku.iter().zip(&f).map(|(a, b)| 2.0 * (a - b)).collect()
    }
}

/// Sequential dot product; fixed summation order.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
