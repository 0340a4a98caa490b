//! Rectangular space-time meshes of `Q = Ω × (t₀, t₁)` with one space
//! dimension, their edge topology and the inflow part of the boundary.
//!
//! Cells are numbered row-major with time as the slow index:
//! `cell = j * nx + i` covers `[x_i, x_{i+1}] × [t_j, t_{j+1}]`.
//! Space-time vectors are written `(t, x)` throughout, so `ũ = (1, u)`.

use crate::forms::VelocityField;
use crate::{Error, Result};

/// Tensor Gauss rule on the reference square `[0, 1]²`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    /// Local coordinates `(ξ, τ)`; `ξ` along space, `τ` along time.
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
    pub line: GaussLine,
}

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussLine {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLine {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss rule needs at least one point");
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            points.push(0.5 * (1.0 - z));
            weights.push(0.5 * w);
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Tensor Gauss rule with `order` points per variable, exact for
/// polynomials of degree `2·order − 1` in each variable.
pub fn quadrature_rule(order: usize) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be at least 1".into()));
    }
    let line = GaussLine::new(order);
    let mut points = Vec::with_capacity(order * order);
    let mut weights = Vec::with_capacity(order * order);
    for (&tau, &wt) in line.points.iter().zip(&line.weights) {
        for (&xi, &wx) in line.points.iter().zip(&line.weights) {
            points.push((xi, tau));
            weights.push(wx * wt);
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        line,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub i: usize,
    pub j: usize,
    pub x: (f64, f64),
    pub t: (f64, f64),
}

impl Cell {
    pub fn dx(&self) -> f64 {
        self.x.1 - self.x.0
    }

    pub fn dt(&self) -> f64 {
        self.t.1 - self.t.0
    }

    pub fn area(&self) -> f64 {
        self.dx() * self.dt()
    }

    /// Cell size `h_T`, the longer side.
    pub fn size(&self) -> f64 {
        self.dx().max(self.dt())
    }

    /// Physical point of local coordinates `(ξ, τ) ∈ [0, 1]²`.
    #[inline]
    pub fn map(&self, xi: f64, tau: f64) -> (f64, f64) {
        (self.x.0 + xi * self.dx(), self.t.0 + tau * self.dt())
    }

    #[inline]
    pub fn local(&self, x: f64, t: f64) -> (f64, f64) {
        ((x - self.x.0) / self.dx(), (t - self.t.0) / self.dt())
    }

    /// Move a point on the cell boundary a hair towards the center, so a
    /// cell-wise discontinuous velocity is sampled from this cell.
    pub fn nudge(&self, x: f64, t: f64) -> (f64, f64) {
        let cx = 0.5 * (self.x.0 + self.x.1);
        let ct = 0.5 * (self.t.0 + self.t.1);
        let s = 1e-9;
        (x + s * (cx - x), t + s * (ct - t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// `x = const`, spanning an interval in time.
    Vertical,
    /// `t = const`, spanning an interval in space.
    Horizontal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub orientation: Orientation,
    /// The fixed coordinate (`x` for vertical edges, `t` for horizontal).
    pub coord: f64,
    /// The varying coordinate's interval.
    pub span: (f64, f64),
    /// Cell on the low side (left or below).
    pub minus: Option<usize>,
    /// Cell on the high side (right or above).
    pub plus: Option<usize>,
}

impl Edge {
    pub fn length(&self) -> f64 {
        self.span.1 - self.span.0
    }

    pub fn is_interior(&self) -> bool {
        self.minus.is_some() && self.plus.is_some()
    }

    /// Unit normal pointing from `minus` to `plus`, as `(n_t, n_x)`.
    pub fn normal(&self) -> (f64, f64) {
        match self.orientation {
            Orientation::Vertical => (0.0, 1.0),
            Orientation::Horizontal => (1.0, 0.0),
        }
    }

    /// Outward normal of `cell` on this edge.
    pub fn outward_normal(&self, cell: usize) -> (f64, f64) {
        let (nt, nx) = self.normal();
        if self.minus == Some(cell) {
            (nt, nx)
        } else {
            (-nt, -nx)
        }
    }

    /// The only adjacent cell of a boundary edge.
    pub fn boundary_cell(&self) -> Option<usize> {
        match (self.minus, self.plus) {
            (Some(c), None) | (None, Some(c)) => Some(c),
            _ => None,
        }
    }

    /// Point at parameter `s ∈ [0, 1]` along the edge, as `(x, t)`.
    #[inline]
    pub fn point(&self, s: f64) -> (f64, f64) {
        let v = self.span.0 + s * self.length();
        match self.orientation {
            Orientation::Vertical => (self.coord, v),
            Orientation::Horizontal => (v, self.coord),
        }
    }
}

/// Uniform rectangular partition of a space-time box.
#[derive(Clone, Debug)]
pub struct SpaceTimeMesh {
    pub nx: usize,
    pub nt: usize,
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
    cells: Vec<Cell>,
    edges: Vec<Edge>,
    /// Per cell: `[left, right, bottom, top]` edge ids.
    cell_edges: Vec<[usize; 4]>,
}

/// Uniform `nx × nt` mesh of `x_range × t_range`.
pub fn build_mesh(
    nx: usize,
    nt: usize,
    x_range: (f64, f64),
    t_range: (f64, f64),
) -> Result<SpaceTimeMesh> {
    if nx == 0 || nt == 0 {
        return Err(Error::InvalidMesh(format!("cell counts must be positive, got {nx}×{nt}")));
    }
    for (name, (a, b)) in [("x", x_range), ("t", t_range)] {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidMesh(format!("{name} range ({a}, {b}) is degenerate")));
        }
    }
    let xs = grid(x_range, nx);
    let ts = grid(t_range, nt);

    let mut cells = Vec::with_capacity(nx * nt);
    for j in 0..nt {
        for i in 0..nx {
            cells.push(Cell {
                id: j * nx + i,
                i,
                j,
                x: (xs[i], xs[i + 1]),
                t: (ts[j], ts[j + 1]),
            });
        }
    }

    // Vertical edges first (row by row in time), then horizontal ones.
    let mut edges = Vec::with_capacity((nx + 1) * nt + nx * (nt + 1));
    let mut cell_edges = vec![[usize::MAX; 4]; nx * nt];
    for j in 0..nt {
        for i in 0..=nx {
            let id = edges.len();
            let minus = (i > 0).then(|| j * nx + i - 1);
            let plus = (i < nx).then(|| j * nx + i);
            if let Some(c) = minus {
                cell_edges[c][1] = id;
            }
            if let Some(c) = plus {
                cell_edges[c][0] = id;
            }
            edges.push(Edge {
                id,
                orientation: Orientation::Vertical,
                coord: xs[i],
                span: (ts[j], ts[j + 1]),
                minus,
                plus,
            });
        }
    }
    for j in 0..=nt {
        for i in 0..nx {
            let id = edges.len();
            let minus = (j > 0).then(|| (j - 1) * nx + i);
            let plus = (j < nt).then(|| j * nx + i);
            if let Some(c) = minus {
                cell_edges[c][3] = id;
            }
            if let Some(c) = plus {
                cell_edges[c][2] = id;
            }
            edges.push(Edge {
                id,
                orientation: Orientation::Horizontal,
                coord: ts[j],
                span: (xs[i], xs[i + 1]),
                minus,
                plus,
            });
        }
    }

    Ok(SpaceTimeMesh {
        nx,
        nt,
        x_range,
        t_range,
        cells,
        edges,
        cell_edges,
    })
}

fn grid((a, b): (f64, f64), n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 })
        .collect()
}

impl SpaceTimeMesh {
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: usize) -> &Cell {
        &self.cells[id]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.is_interior())
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| !e.is_interior())
    }

    /// `[left, right, bottom, top]` edge ids of a cell.
    pub fn cell_edges(&self, cell: usize) -> [usize; 4] {
        self.cell_edges[cell]
    }

    pub fn dx(&self) -> f64 {
        (self.x_range.1 - self.x_range.0) / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t_range.1 - self.t_range.0) / self.nt as f64
    }

    /// Mesh size `h = max(Δx, Δt)`.
    pub fn h(&self) -> f64 {
        self.dx().max(self.dt())
    }

    pub fn area(&self) -> f64 {
        (self.x_range.1 - self.x_range.0) * (self.t_range.1 - self.t_range.0)
    }

    /// Smallest and largest `h_T / h_e` over all cells and their edges.
    pub fn shape_regularity(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for cell in &self.cells {
            for e in self.cell_edges[cell.id] {
                let r = cell.size() / self.edges[e].length();
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        (lo, hi)
    }

    /// Cell containing `(x, t)`; points on shared edges go to the lower index.
    pub fn locate(&self, x: f64, t: f64) -> Option<usize> {
        let (x0, x1) = self.x_range;
        let (t0, t1) = self.t_range;
        let tol = 1e-12;
        if x < x0 - tol * (x1 - x0) || x > x1 + tol * (x1 - x0) {
            return None;
        }
        if t < t0 - tol * (t1 - t0) || t > t1 + tol * (t1 - t0) {
            return None;
        }
        let i = (((x - x0) / self.dx()).floor().max(0.0) as usize).min(self.nx - 1);
        let j = (((t - t0) / self.dt()).floor().max(0.0) as usize).min(self.nt - 1);
        Some(j * self.nx + i)
    }
}

/// An inflow edge together with `(ũ, ñ)` sampled at the edge quadrature
/// points.
#[derive(Clone, Debug)]
pub struct InflowEdge {
    pub edge: usize,
    pub flux: Vec<f64>,
}

/// Split of `∂Q` into the inflow part `∂Q₋` and the rest.
#[derive(Clone, Debug)]
pub struct BoundaryPartition {
    pub inflow: Vec<InflowEdge>,
    pub other: Vec<usize>,
    /// Edge quadrature the stored fluxes refer to.
    pub line: GaussLine,
    pub warnings: Vec<String>,
    is_inflow: Vec<bool>,
}

impl BoundaryPartition {
    pub fn is_inflow(&self, edge: usize) -> bool {
        self.is_inflow[edge]
    }

    pub fn inflow_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.inflow.iter().map(|e| e.edge)
    }
}

/// Default number of edge quadrature points used by [`classify_boundary`].
pub const DEFAULT_EDGE_POINTS: usize = 4;

pub fn classify_boundary(mesh: &SpaceTimeMesh, u: &VelocityField) -> BoundaryPartition {
    classify_boundary_with(mesh, u, DEFAULT_EDGE_POINTS)
}

/// Classify every boundary edge by the sign of `(ũ, ñ)` at `points` Gauss
/// points. An edge is inflow when the sign is strictly negative at every
/// point; an edge with mixed signs falls back to the sign of `∫_e (ũ, ñ)`
/// and records a warning.
pub fn classify_boundary_with(
    mesh: &SpaceTimeMesh,
    u: &VelocityField,
    points: usize,
) -> BoundaryPartition {
    let line = GaussLine::new(points.max(1));
    let mut inflow = Vec::new();
    let mut other = Vec::new();
    let mut warnings = Vec::new();
    let mut is_inflow = vec![false; mesh.edges.len()];

    for edge in mesh.boundary_edges() {
        let cell_id = edge.boundary_cell().expect("boundary edge has one cell");
        let cell = &mesh.cells[cell_id];
        let (nt, nx) = edge.outward_normal(cell_id);
        let flux: Vec<f64> = line
            .points
            .iter()
            .map(|&s| {
                let (x, t) = edge.point(s);
                let (x, t) = cell.nudge(x, t);
                nt + nx * u.eval(x, t)
            })
            .collect();
        let negatives = flux.iter().filter(|&&v| v < 0.0).count();
        let inflowing = if negatives == flux.len() {
            true
        } else if negatives == 0 {
            false
        } else {
            let mean: f64 = flux.iter().zip(&line.weights).map(|(v, w)| v * w).sum();
            let msg = format!(
                "edge {} has mixed-sign (ũ,ñ); classified as {} by its mean {mean:.3e}",
                edge.id,
                if mean < 0.0 { "inflow" } else { "non-inflow" }
            );
            log::warn!("{msg}");
            warnings.push(msg);
            mean < 0.0
        };
        if inflowing {
            is_inflow[edge.id] = true;
            inflow.push(InflowEdge { edge: edge.id, flux });
        } else {
            other.push(edge.id);
        }
    }

    BoundaryPartition {
        inflow,
        other,
        line,
        warnings,
        is_inflow,
    }
}
