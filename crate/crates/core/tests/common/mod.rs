//! Reference assembly in physical coordinates: product-form Lagrange
//! polynomials on each cell and a fixed 5-point Gauss table. Shares no
//! code with the library beyond looking up DoF numbers by coordinates.

#![allow(dead_code)]

use stils::FunctionSpace;

const GAUSS5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Gauss points and weights on `[a, b]`.
pub fn gauss(a: f64, b: f64) -> Vec<(f64, f64)> {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    GAUSS5.iter().map(|&(s, w)| (m + r * s, r * w)).collect()
}

/// Value and derivative of the Lagrange polynomial of node `i`.
pub fn lagrange(nodes: &[f64], i: usize, s: f64) -> (f64, f64) {
    let mut val = 1.0;
    let mut der = 0.0;
    for (j, &nj) in nodes.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = nodes[i] - nj;
        der = der * (s - nj) / d + val / d;
        val *= (s - nj) / d;
    }
    (val, der)
}

pub type Field = fn(f64, f64) -> f64;

/// Problem data: velocity `u`, its divergence, the source `f`, `f′` and
/// inflow value `c_b`.
#[derive(Clone, Copy)]
pub struct Data {
    pub u: Field,
    pub ux: Field,
    pub f: fn(f64) -> f64,
    pub df: fn(f64) -> f64,
    pub cb: Field,
}

pub struct Oracle {
    pub nx: usize,
    pub nt: usize,
    pub k: usize,
    pub xr: (f64, f64),
    pub tr: (f64, f64),
    pub data: Data,
}

/// Local basis on one cell: node coordinates and `(φ, φ_x, φ_t)` at a
/// point.
struct LocalBasis {
    xs: Vec<f64>,
    ts: Vec<f64>,
}

impl LocalBasis {
    fn len(&self) -> usize {
        self.xs.len() * self.ts.len()
    }
    fn node(&self, a: usize) -> (f64, f64) {
        let m = self.xs.len();
        (self.xs[a % m], self.ts[a / m])
    }
    fn eval(&self, a: usize, x: f64, t: f64) -> (f64, f64, f64) {
        let m = self.xs.len();
        let (lx, dlx) = lagrange(&self.xs, a % m, x);
        let (lt, dlt) = lagrange(&self.ts, a / m, t);
        (lx * lt, dlx * lt, lx * dlt)
    }
}

/// A dense matrix or vector indexed by library DoF numbers.
pub struct Dense {
    pub n: usize,
    pub m: Vec<f64>,
}

impl Dense {
    fn zeros(n: usize) -> Self {
        Self { n, m: vec![0.0; n * n] }
    }
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.n + j]
    }
    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.m[i * self.n + j] += v;
    }
}

impl Oracle {
    fn cell_bounds(&self, i: usize, j: usize) -> ((f64, f64), (f64, f64)) {
        let hx = (self.xr.1 - self.xr.0) / self.nx as f64;
        let ht = (self.tr.1 - self.tr.0) / self.nt as f64;
        let x0 = self.xr.0 + i as f64 * hx;
        let t0 = self.tr.0 + j as f64 * ht;
        ((x0, x0 + hx), (t0, t0 + ht))
    }

    fn basis(&self, i: usize, j: usize) -> LocalBasis {
        let ((x0, x1), (t0, t1)) = self.cell_bounds(i, j);
        let k = self.k as f64;
        LocalBasis {
            xs: (0..=self.k).map(|a| x0 + (x1 - x0) * a as f64 / k).collect(),
            ts: (0..=self.k).map(|a| t0 + (t1 - t0) * a as f64 / k).collect(),
        }
    }

    /// Library DoF of local node `a` of cell `(i, j)`, found by position.
    fn dof(&self, space: &FunctionSpace, i: usize, j: usize, node: (f64, f64)) -> usize {
        let ((x0, x1), (t0, t1)) = self.cell_bounds(i, j);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        let cell = space
            .mesh()
            .cells()
            .iter()
            .find(|c| close(c.x.0, x0) && close(c.x.1, x1) && close(c.t.0, t0) && close(c.t.1, t1))
            .expect("cell by bounds");
        *space
            .cell_dofs(cell.id)
            .iter()
            .find(|&&d| {
                let p = space.dof_coords()[d];
                close(p.0, node.0) && close(p.1, node.1)
            })
            .expect("dof by position")
    }

    fn stream(&self, b: &LocalBasis, a: usize, x: f64, t: f64) -> (f64, f64, f64, f64) {
        let (p, px, pt) = b.eval(a, x, t);
        let d = &self.data;
        (p, px, pt, pt + (d.u)(x, t) * px + (d.ux)(x, t) * p)
    }

    /// `∫ S φ_j S φ_i + λ ∇φ_j·∇φ_i − ∫ f′(c) φ_j S φ_i` (the last term only
    /// with `state`).
    pub fn volume(&self, space: &FunctionSpace, lambda: f64, state: Option<Field>) -> Dense {
        let mut out = Dense::zeros(space.ndofs());
        for j in 0..self.nt {
            for i in 0..self.nx {
                let b = self.basis(i, j);
                let ((x0, x1), (t0, t1)) = self.cell_bounds(i, j);
                let dofs: Vec<usize> = (0..b.len()).map(|a| self.dof(space, i, j, b.node(a))).collect();
                for &(x, wx) in &gauss(x0, x1) {
                    for &(t, wt) in &gauss(t0, t1) {
                        let w = wx * wt;
                        let fp = state.map(|c| (self.data.df)(c(x, t))).unwrap_or(0.0);
                        for r in 0..b.len() {
                            let (_, rx, rt, sr) = self.stream(&b, r, x, t);
                            for s in 0..b.len() {
                                let (ps, sx, st, ss) = self.stream(&b, s, x, t);
                                let v = sr * ss + lambda * (rx * sx + rt * st) - fp * ps * sr;
                                out.add(dofs[r], dofs[s], w * v);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// `∫ f(c) S φ_i`.
    pub fn source(&self, space: &FunctionSpace, c: Field) -> Vec<f64> {
        let mut out = vec![0.0; space.ndofs()];
        for j in 0..self.nt {
            for i in 0..self.nx {
                let b = self.basis(i, j);
                let ((x0, x1), (t0, t1)) = self.cell_bounds(i, j);
                for &(x, wx) in &gauss(x0, x1) {
                    for &(t, wt) in &gauss(t0, t1) {
                        let fc = (self.data.f)(c(x, t));
                        for r in 0..b.len() {
                            let d = self.dof(space, i, j, b.node(r));
                            out[d] += wx * wt * fc * self.stream(&b, r, x, t).3;
                        }
                    }
                }
            }
        }
        out
    }

    /// Edge terms of the DG form for positive `u`: interior jumps of the
    /// normal flux and the inflow trace on `x = x0` and `t = t0`, each
    /// scaled by the inverse edge length. Returns the matrix and the inflow
    /// right-hand side.
    pub fn dg_edges(&self, space: &FunctionSpace) -> (Dense, Vec<f64>) {
        let mut mat = Dense::zeros(space.ndofs());
        let mut rhs = vec![0.0; space.ndofs()];
        let d = self.data;
        // one-sided contributions: (cell, flux at point, edge points)
        type Side = ((usize, usize), f64);
        let mut jump = |sides: &[Side], x: f64, t: f64, w: f64| {
            let mut terms: Vec<(usize, f64)> = Vec::new();
            for &((i, j), fl) in sides {
                let b = self.basis(i, j);
                for a in 0..b.len() {
                    terms.push((self.dof(space, i, j, b.node(a)), fl * b.eval(a, x, t).0));
                }
            }
            for &(p, vp) in &terms {
                for &(q, vq) in &terms {
                    mat.add(p, q, w * vp * vq);
                }
            }
            if sides.len() == 1 {
                let fl = sides[0].1;
                for &(p, vp) in &terms {
                    rhs[p] += w * vp * fl * (d.cb)(x, t);
                }
            }
        };
        for j in 0..self.nt {
            for i in 0..self.nx {
                let ((x0, x1), (t0, t1)) = self.cell_bounds(i, j);
                let (hx, ht) = (x1 - x0, t1 - t0);
                // left side of the cell
                for &(t, w) in &gauss(t0, t1) {
                    let u = (d.u)(x0, t);
                    if i == 0 {
                        jump(&[((i, j), -u)], x0, t, w / ht);
                    } else {
                        jump(&[((i - 1, j), u), ((i, j), -u)], x0, t, w / ht);
                    }
                }
                // bottom side
                for &(x, w) in &gauss(x0, x1) {
                    if j == 0 {
                        jump(&[((i, j), -1.0)], x, t0, w / hx);
                    } else {
                        jump(&[((i, j - 1), 1.0), ((i, j), -1.0)], x, t0, w / hx);
                    }
                }
            }
        }
        (mat, rhs)
    }
}

/// Largest entrywise difference relative to the largest oracle entry.
pub fn rel_diff(lib: &[Vec<f64>], oracle: &Dense) -> f64 {
    let scale = oracle.m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0f64;
    for (i, row) in lib.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((v - oracle.at(i, j)).abs());
        }
    }
    worst / scale
}

pub fn rel_diff_vec(lib: &[f64], oracle: &[f64]) -> f64 {
    let scale = oracle.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    lib.iter().zip(oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

/// Smallest eigenvalue of the symmetric matrix `a` restricted to `keep`.
pub fn min_eigenvalue(a: &[Vec<f64>], keep: &[usize]) -> f64 {
    let n = keep.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |r, c| a[keep[r]][keep[c]]);
    m.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `u = 1 + x/2` and the stiff cubic source with `μ = 7`.
pub fn stiff_data() -> Data {
    Data {
        u: |x, _| 1.0 + 0.5 * x,
        ux: |_, _| 0.5,
        f: |s| -7.0 * s * (s - 1.0) * (s - 0.5),
        df: |s| -7.0 * (3.0 * s * s - 3.0 * s + 0.5),
        cb: |x, t| 1.0 - 0.25 * x + t,
    }
}
