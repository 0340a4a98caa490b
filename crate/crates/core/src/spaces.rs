//! Tensor-product `Q_k` spaces on a [`SpaceTimeMesh`], continuous or
//! discontinuous, and the fields that live on them.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::forms::VelocityField;
use crate::linalg::{BandLu, TripletBuilder};
use crate::mesh::{
    classify_boundary_with, quadrature_rule, BoundaryPartition, Cell, Edge, Orientation,
    QuadratureRule, SpaceTimeMesh,
};
use crate::{Error, Result};

/// One-dimensional Lagrange basis on equispaced nodes of `[0, 1]`, stored as
/// monomial coefficients.
#[derive(Clone, Debug)]
pub struct Lagrange1d {
    pub degree: usize,
    pub nodes: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
}

impl Lagrange1d {
    pub fn new(degree: usize) -> Self {
        let nodes: Vec<f64> = (0..=degree).map(|i| i as f64 / degree as f64).collect();
        let coeffs = (0..=degree)
            .map(|a| {
                let mut poly = vec![1.0];
                for (b, &xb) in nodes.iter().enumerate() {
                    if b == a {
                        continue;
                    }
                    let denom = nodes[a] - xb;
                    let mut next = vec![0.0; poly.len() + 1];
                    for (p, &c) in poly.iter().enumerate() {
                        next[p + 1] += c / denom;
                        next[p] -= c * xb / denom;
                    }
                    poly = next;
                }
                poly
            })
            .collect();
        Self {
            degree,
            nodes,
            coeffs,
        }
    }

    /// `order`-th derivative of basis function `a` at `s`.
    pub fn derivative(&self, a: usize, order: usize, s: f64) -> f64 {
        let c = &self.coeffs[a];
        let mut acc = 0.0;
        for p in (order..c.len()).rev() {
            let falling: f64 = (0..order).map(|q| (p - q) as f64).product();
            acc = acc * s + c[p] * falling;
        }
        acc
    }

    #[inline]
    pub fn value(&self, a: usize, s: f64) -> f64 {
        self.derivative(a, 0, s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuity {
    Continuous,
    Discontinuous,
}

/// Basis values and first derivatives on the reference square at a fixed
/// set of points. Row-major `[point][basis]`.
#[derive(Clone, Debug)]
pub struct ReferenceTable {
    pub npoints: usize,
    pub nbasis: usize,
    pub phi: Vec<f64>,
    pub d_xi: Vec<f64>,
    pub d_tau: Vec<f64>,
}

impl ReferenceTable {
    pub fn new(basis: &Lagrange1d, points: &[(f64, f64)]) -> Self {
        let m = basis.degree + 1;
        let nbasis = m * m;
        let mut phi = Vec::with_capacity(points.len() * nbasis);
        let mut d_xi = Vec::with_capacity(points.len() * nbasis);
        let mut d_tau = Vec::with_capacity(points.len() * nbasis);
        for &(xi, tau) in points {
            for jt in 0..m {
                let bt = basis.value(jt, tau);
                let dbt = basis.derivative(jt, 1, tau);
                for ix in 0..m {
                    let bx = basis.value(ix, xi);
                    let dbx = basis.derivative(ix, 1, xi);
                    phi.push(bx * bt);
                    d_xi.push(dbx * bt);
                    d_tau.push(bx * dbt);
                }
            }
        }
        Self {
            npoints: points.len(),
            nbasis,
            phi,
            d_xi,
            d_tau,
        }
    }
}

/// Physical quadrature data of one cell: points, weights, basis values and
/// gradients, and the velocity sampled at the points.
#[derive(Clone, Debug)]
pub struct CellValues {
    pub cell: Cell,
    pub nbasis: usize,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi_dx: Vec<f64>,
    pub dphi_dt: Vec<f64>,
    pub u: Vec<f64>,
    pub div_u: Vec<f64>,
}

impl CellValues {
    pub fn npoints(&self) -> usize {
        self.w.len()
    }

    /// Space-time divergence `∂_t φ_a + u ∂_x φ_a + φ_a div u` at point `q`.
    #[inline]
    pub fn stream(&self, q: usize, a: usize) -> f64 {
        let k = q * self.nbasis + a;
        self.dphi_dt[k] + self.u[q] * self.dphi_dx[k] + self.div_u[q] * self.phi[k]
    }

    #[inline]
    pub fn phi(&self, q: usize, a: usize) -> f64 {
        self.phi[q * self.nbasis + a]
    }

    /// `Σ_a c_a φ_a` at every point.
    pub fn interpolate(&self, local: &[f64]) -> Vec<f64> {
        (0..self.npoints())
            .map(|q| (0..self.nbasis).map(|a| local[a] * self.phi(q, a)).sum())
            .collect()
    }

    pub fn interpolate_stream(&self, local: &[f64]) -> Vec<f64> {
        (0..self.npoints())
            .map(|q| (0..self.nbasis).map(|a| local[a] * self.stream(q, a)).sum())
            .collect()
    }

    /// `(∂_t, ∂_x)` of the local expansion at every point.
    pub fn interpolate_gradient(&self, local: &[f64]) -> Vec<(f64, f64)> {
        (0..self.npoints())
            .map(|q| {
                let base = q * self.nbasis;
                let mut g = (0.0, 0.0);
                for (a, &c) in local.iter().enumerate() {
                    g.0 += c * self.dphi_dt[base + a];
                    g.1 += c * self.dphi_dx[base + a];
                }
                g
            })
            .collect()
    }
}

/// Basis values of one cell along one of its sides.
#[derive(Clone, Debug)]
pub struct SideValues {
    pub cell: usize,
    pub nbasis: usize,
    /// `[point][basis]`, points ordered along the edge parameter.
    pub phi: Vec<f64>,
    /// Velocity sampled from inside the cell.
    pub u: Vec<f64>,
    /// Outward normal of the cell, `(n_t, n_x)`.
    pub normal: (f64, f64),
}

impl SideValues {
    /// `(ũ, ñ)` at edge point `q`, outward from this cell.
    #[inline]
    pub fn flux(&self, q: usize) -> f64 {
        self.normal.0 + self.normal.1 * self.u[q]
    }

    #[inline]
    pub fn phi(&self, q: usize, a: usize) -> f64 {
        self.phi[q * self.nbasis + a]
    }

    pub fn interpolate(&self, local: &[f64]) -> Vec<f64> {
        let nq = self.phi.len() / self.nbasis;
        (0..nq)
            .map(|q| (0..self.nbasis).map(|a| local[a] * self.phi(q, a)).sum())
            .collect()
    }
}

/// Continuous or discontinuous `Q_k` space.
pub struct FunctionSpace {
    mesh: Arc<SpaceTimeMesh>,
    degree: usize,
    continuity: Continuity,
    ndofs: usize,
    /// `nbasis` DoF ids per cell.
    cell_dofs: Vec<usize>,
    dof_coords: Vec<(f64, f64)>,
    basis: Lagrange1d,
    quad: QuadratureRule,
    table: ReferenceTable,
    /// Tables on the four reference sides `[left, right, bottom, top]`.
    side_tables: [ReferenceTable; 4],
}

impl fmt::Debug for FunctionSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionSpace")
            .field("degree", &self.degree)
            .field("continuity", &self.continuity)
            .field("ndofs", &self.ndofs)
            .field("nx", &self.mesh.nx)
            .field("nt", &self.mesh.nt)
            .finish()
    }
}

pub fn build_space(mesh: Arc<SpaceTimeMesh>, degree: usize, continuity: Continuity) -> Result<Arc<FunctionSpace>> {
    if degree == 0 {
        return Err(Error::InvalidArgument("polynomial degree must be at least 1".into()));
    }
    FunctionSpace::with_quadrature(mesh, degree, continuity, degree + 2)
}

impl FunctionSpace {
    pub fn with_quadrature(
        mesh: Arc<SpaceTimeMesh>,
        degree: usize,
        continuity: Continuity,
        quad_order: usize,
    ) -> Result<Arc<Self>> {
        if degree == 0 {
            return Err(Error::InvalidArgument("polynomial degree must be at least 1".into()));
        }
        let k = degree;
        let m = k + 1;
        let nb = m * m;
        let basis = Lagrange1d::new(k);
        let ncells = mesh.num_cells();
        let mut cell_dofs = Vec::with_capacity(ncells * nb);
        let mut dof_coords;
        let ndofs;
        match continuity {
            Continuity::Continuous => {
                let row = mesh.nx * k + 1;
                ndofs = row * (mesh.nt * k + 1);
                dof_coords = vec![(0.0, 0.0); ndofs];
                for cell in mesh.cells() {
                    for jt in 0..m {
                        for ix in 0..m {
                            let id = (cell.j * k + jt) * row + cell.i * k + ix;
                            cell_dofs.push(id);
                            dof_coords[id] = cell.map(basis.nodes[ix], basis.nodes[jt]);
                        }
                    }
                }
            }
            Continuity::Discontinuous => {
                ndofs = ncells * nb;
                dof_coords = Vec::with_capacity(ndofs);
                for cell in mesh.cells() {
                    for jt in 0..m {
                        for ix in 0..m {
                            cell_dofs.push(dof_coords.len());
                            dof_coords.push(cell.map(basis.nodes[ix], basis.nodes[jt]));
                        }
                    }
                }
            }
        }
        let quad = quadrature_rule(quad_order)?;
        let table = ReferenceTable::new(&basis, &quad.points);
        let line = &quad.line.points;
        let side = |f: &dyn Fn(f64) -> (f64, f64)| {
            let pts: Vec<(f64, f64)> = line.iter().map(|&s| f(s)).collect();
            ReferenceTable::new(&basis, &pts)
        };
        let side_tables = [
            side(&|s| (0.0, s)),
            side(&|s| (1.0, s)),
            side(&|s| (s, 0.0)),
            side(&|s| (s, 1.0)),
        ];
        Ok(Arc::new(Self {
            mesh,
            degree,
            continuity,
            ndofs,
            cell_dofs,
            dof_coords,
            basis,
            quad,
            table,
            side_tables,
        }))
    }

    pub fn mesh(&self) -> &Arc<SpaceTimeMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    pub fn nbasis(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    pub fn basis(&self) -> &Lagrange1d {
        &self.basis
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quad
    }

    /// Number of edge quadrature points (matches the cell rule).
    pub fn edge_points(&self) -> usize {
        self.quad.line.len()
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let nb = self.nbasis();
        &self.cell_dofs[cell * nb..(cell + 1) * nb]
    }

    pub fn dof_coords(&self) -> &[(f64, f64)] {
        &self.dof_coords
    }

    /// Nodes per row of the global node grid (continuous numbering).
    pub fn node_row_len(&self) -> usize {
        self.mesh.nx * self.degree + 1
    }

    /// Boundary partition sampled with this space's edge rule.
    pub fn classify(&self, u: &VelocityField) -> BoundaryPartition {
        classify_boundary_with(&self.mesh, u, self.edge_points())
    }

    /// DoFs lying on inflow edges. Only meaningful for continuous spaces.
    pub fn inflow_dofs(&self, partition: &BoundaryPartition) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for id in partition.inflow_ids() {
            let edge = self.mesh.edge(id);
            let cell = edge.boundary_cell().expect("boundary edge");
            let side = self.side_of(edge, cell);
            for a in self.side_local_nodes(side) {
                set.insert(self.cell_dofs(cell)[a]);
            }
        }
        set.into_iter().collect()
    }

    /// Local node indices on side `[left, right, bottom, top]`.
    pub fn side_local_nodes(&self, side: usize) -> Vec<usize> {
        let m = self.degree + 1;
        (0..m)
            .map(|s| match side {
                0 => s * m,
                1 => s * m + m - 1,
                2 => s,
                _ => (m - 1) * m + s,
            })
            .collect()
    }

    /// Which side of `cell` the edge is: 0 left, 1 right, 2 bottom, 3 top.
    pub fn side_of(&self, edge: &Edge, cell: usize) -> usize {
        let plus = edge.plus == Some(cell);
        match (edge.orientation, plus) {
            (Orientation::Vertical, true) => 0,
            (Orientation::Vertical, false) => 1,
            (Orientation::Horizontal, true) => 2,
            (Orientation::Horizontal, false) => 3,
        }
    }

    pub fn cell_values(&self, cell_id: usize, u: &VelocityField) -> CellValues {
        let cell = *self.mesh.cell(cell_id);
        let (dx, dt) = (cell.dx(), cell.dt());
        let area = cell.area();
        let tab = &self.table;
        let nq = tab.npoints;
        let mut x = Vec::with_capacity(nq);
        let mut t = Vec::with_capacity(nq);
        let mut w = Vec::with_capacity(nq);
        let mut uu = Vec::with_capacity(nq);
        let mut du = Vec::with_capacity(nq);
        for (q, &(xi, tau)) in self.quad.points.iter().enumerate() {
            let (px, pt) = cell.map(xi, tau);
            x.push(px);
            t.push(pt);
            w.push(self.quad.weights[q] * area);
            uu.push(u.eval(px, pt));
            du.push(u.div(px, pt));
        }
        CellValues {
            cell,
            nbasis: tab.nbasis,
            x,
            t,
            w,
            phi: tab.phi.clone(),
            dphi_dx: tab.d_xi.iter().map(|v| v / dx).collect(),
            dphi_dt: tab.d_tau.iter().map(|v| v / dt).collect(),
            u: uu,
            div_u: du,
        }
    }

    /// Basis of `cell` restricted to `edge`, at the edge Gauss points.
    pub fn side_values(&self, edge: &Edge, cell: usize, u: &VelocityField) -> SideValues {
        let side = self.side_of(edge, cell);
        let c = self.mesh.cell(cell);
        let u = self
            .quad
            .line
            .points
            .iter()
            .map(|&s| {
                let (x, t) = edge.point(s);
                let (x, t) = c.nudge(x, t);
                u.eval(x, t)
            })
            .collect();
        SideValues {
            cell,
            nbasis: self.nbasis(),
            phi: self.side_tables[side].phi.clone(),
            u,
            normal: edge.outward_normal(cell),
        }
    }

    pub fn zero_field(self: &Arc<Self>) -> DiscreteField {
        DiscreteField {
            space: self.clone(),
            coeffs: vec![0.0; self.ndofs],
        }
    }

    pub fn field(self: &Arc<Self>, coeffs: Vec<f64>) -> Result<DiscreteField> {
        DiscreteField::new(self.clone(), coeffs)
    }

    /// Value of basis `a` of any cell at local point `(ξ, τ)`, with its
    /// reference derivatives.
    fn local_basis(&self, a: usize, xi: f64, tau: f64) -> (f64, f64, f64) {
        let m = self.degree + 1;
        let (ix, jt) = (a % m, a / m);
        let b = &self.basis;
        let (bx, bt) = (b.value(ix, xi), b.value(jt, tau));
        (bx * bt, b.derivative(ix, 1, xi) * bt, bx * b.derivative(jt, 1, tau))
    }
}

/// Coefficient vector over the DoFs of a [`FunctionSpace`].
#[derive(Clone)]
pub struct DiscreteField {
    space: Arc<FunctionSpace>,
    pub coeffs: Vec<f64>,
}

impl fmt::Debug for DiscreteField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteField")
            .field("space", &self.space)
            .field("len", &self.coeffs.len())
            .finish()
    }
}

impl DiscreteField {
    pub fn new(space: Arc<FunctionSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.ndofs() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for a space with {} DoFs",
                coeffs.len(),
                space.ndofs()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        &self.space
    }

    pub fn same_space(&self, other: &DiscreteField) -> bool {
        Arc::ptr_eq(&self.space, &other.space)
    }

    pub fn local(&self, cell: usize) -> Vec<f64> {
        self.space.cell_dofs(cell).iter().map(|&d| self.coeffs[d]).collect()
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &DiscreteField, b: f64) -> Result<DiscreteField> {
        if !self.same_space(other) {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self {
            space: self.space.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    /// Value at local coordinates of a cell.
    pub fn value_at(&self, cell: usize, xi: f64, tau: f64) -> f64 {
        let dofs = self.space.cell_dofs(cell);
        (0..dofs.len())
            .map(|a| self.coeffs[dofs[a]] * self.space.local_basis(a, xi, tau).0)
            .sum()
    }

    /// `(∂_t, ∂_x)` at local coordinates of a cell.
    pub fn gradient_at(&self, cell: usize, xi: f64, tau: f64) -> (f64, f64) {
        let c = self.space.mesh.cell(cell);
        let dofs = self.space.cell_dofs(cell);
        let mut g = (0.0, 0.0);
        for (a, &d) in dofs.iter().enumerate() {
            let (_, dxi, dtau) = self.space.local_basis(a, xi, tau);
            g.0 += self.coeffs[d] * dtau / c.dt();
            g.1 += self.coeffs[d] * dxi / c.dx();
        }
        g
    }

    /// `∂_t φ + u ∂_x φ + φ div u` at local coordinates of a cell.
    pub fn stream_derivative(&self, u: &VelocityField, cell: usize, xi: f64, tau: f64) -> f64 {
        let (x, t) = self.space.mesh.cell(cell).map(xi, tau);
        let (gt, gx) = self.gradient_at(cell, xi, tau);
        gt + u.eval(x, t) * gx + u.div(x, t) * self.value_at(cell, xi, tau)
    }

    /// Value at a physical point. On shared edges the lower-indexed cell
    /// wins.
    pub fn evaluate(&self, x: f64, t: f64) -> Option<f64> {
        let cell = self.space.mesh.locate(x, t)?;
        let (xi, tau) = self.space.mesh.cell(cell).local(x, t);
        Some(self.value_at(cell, xi, tau))
    }

    /// Values on the global `(nx·k + 1) × (nt·k + 1)` node grid, row-major
    /// with time slow. Discontinuous fields are averaged over the cells
    /// sharing a node.
    pub fn grid_values(&self) -> Vec<(f64, f64, f64)> {
        let sp = &self.space;
        let mesh = &sp.mesh;
        let k = sp.degree;
        let row = sp.node_row_len();
        let nrows = mesh.nt * k + 1;
        let mut sum = vec![0.0; row * nrows];
        let mut count = vec![0u32; row * nrows];
        let mut coords = vec![(0.0, 0.0); row * nrows];
        let m = k + 1;
        for cell in mesh.cells() {
            let dofs = sp.cell_dofs(cell.id);
            for jt in 0..m {
                for ix in 0..m {
                    let g = (cell.j * k + jt) * row + cell.i * k + ix;
                    sum[g] += self.coeffs[dofs[jt * m + ix]];
                    count[g] += 1;
                    coords[g] = sp.dof_coords[dofs[jt * m + ix]];
                }
            }
        }
        coords
            .into_iter()
            .zip(sum.iter().zip(&count))
            .map(|((x, t), (s, &c))| (x, t, s / c as f64))
            .collect()
    }

    /// Values along the top time level `t = t₁` at the grid nodes.
    pub fn top_trace(&self) -> Vec<(f64, f64)> {
        let row = self.space.node_row_len();
        let grid = self.grid_values();
        grid[grid.len() - row..].iter().map(|&(x, _, c)| (x, c)).collect()
    }

    pub fn norm(&self, kind: NormKind, u: &VelocityField) -> Result<f64> {
        let sp = &self.space;
        let mut acc = 0.0;
        for cell in 0..sp.mesh.num_cells() {
            let cv = sp.cell_values(cell, u);
            let local = self.local(cell);
            match kind {
                NormKind::L2 => {
                    let v = cv.interpolate(&local);
                    acc += v.iter().zip(&cv.w).map(|(v, w)| w * v * v).sum::<f64>();
                }
                NormKind::Energy1u | NormKind::Dg => {
                    let s = cv.interpolate_stream(&local);
                    acc += s.iter().zip(&cv.w).map(|(s, w)| w * s * s).sum::<f64>();
                }
                NormKind::PenalizedV { lambda } => {
                    if lambda < 0.0 {
                        return Err(Error::InvalidArgument(format!("negative λ = {lambda}")));
                    }
                    let s = cv.interpolate_stream(&local);
                    let g = cv.interpolate_gradient(&local);
                    for q in 0..cv.npoints() {
                        acc += cv.w[q] * (s[q] * s[q] + lambda * (g[q].0 * g[q].0 + g[q].1 * g[q].1));
                    }
                }
            }
        }
        match kind {
            NormKind::Energy1u => {
                let part = sp.classify(u);
                acc += self.inflow_weighted_trace(&part, false);
            }
            NormKind::Dg => {
                let part = sp.classify(u);
                acc += self.inflow_weighted_trace(&part, true);
                acc += self.interior_jump_energy(u);
            }
            _ => {}
        }
        Ok(acc.max(0.0).sqrt())
    }

    /// `−∫_{∂Q₋} φ² (ũ,ñ)`, or `Σ h_e⁻¹ ∫ (ũ,ñ)² φ²` when `jump_scaled`.
    fn inflow_weighted_trace(&self, part: &BoundaryPartition, jump_scaled: bool) -> f64 {
        let sp = &self.space;
        let mut acc = 0.0;
        for ie in &part.inflow {
            let edge = sp.mesh.edge(ie.edge);
            let cell = edge.boundary_cell().expect("boundary edge");
            let side = sp.side_of(edge, cell);
            let vals = interpolate_side(&sp.side_tables[side], &self.local(cell));
            let len = edge.length();
            for (q, v) in vals.iter().enumerate() {
                let w = part.line.weights[q] * len;
                let fl = ie.flux[q];
                acc += if jump_scaled {
                    w * fl * fl * v * v / len
                } else {
                    -w * fl * v * v
                };
            }
        }
        acc
    }

    /// `Σ_{interior e} h_e⁻¹ ∫_e [(ũ,ñ)φ]²`.
    pub fn interior_jump_energy(&self, u: &VelocityField) -> f64 {
        self.interior_jumps(u).iter().map(|(_, j2)| j2).sum()
    }

    /// Per interior edge: `(edge id, h_e⁻¹ ‖[(ũ,ñ)φ]‖²_{0,e})`.
    pub fn interior_jumps(&self, u: &VelocityField) -> Vec<(usize, f64)> {
        let sp = &self.space;
        let line = &sp.quad.line;
        sp.mesh
            .interior_edges()
            .map(|edge| {
                let (m, p) = (edge.minus.unwrap(), edge.plus.unwrap());
                let sm = sp.side_values(edge, m, u);
                let spv = sp.side_values(edge, p, u);
                let vm = sm.interpolate(&self.local(m));
                let vp = spv.interpolate(&self.local(p));
                let len = edge.length();
                let j2: f64 = (0..line.len())
                    .map(|q| {
                        let j = sm.flux(q) * vm[q] + spv.flux(q) * vp[q];
                        line.weights[q] * len * j * j
                    })
                    .sum();
                (edge.id, j2 / len)
            })
            .collect()
    }

    /// Broken seminorm `Σ_T |φ|²_{k+1,T}` (all derivatives of total order
    /// `k + 1`).
    pub fn broken_seminorm_sq(&self) -> f64 {
        let sp = &self.space;
        let k = sp.degree;
        let m = k + 1;
        let b = &sp.basis;
        let mut acc = 0.0;
        for cell in sp.mesh.cells() {
            let local = self.local(cell.id);
            for ox in 1..=k {
                let ot = k + 1 - ox;
                if ot > k {
                    continue;
                }
                let scale = cell.dx().powi(-(ox as i32)) * cell.dt().powi(-(ot as i32));
                for (q, &(xi, tau)) in sp.quad.points.iter().enumerate() {
                    let mut v = 0.0;
                    for jt in 0..m {
                        for ix in 0..m {
                            v += local[jt * m + ix] * b.derivative(ix, ox, xi) * b.derivative(jt, ot, tau);
                        }
                    }
                    v *= scale;
                    acc += sp.quad.weights[q] * cell.area() * v * v;
                }
            }
        }
        acc
    }

    /// `‖φ − g‖_{L²(Q)}` by cell quadrature.
    pub fn l2_error<G: Fn(f64, f64) -> f64>(&self, g: G) -> f64 {
        let sp = &self.space;
        let u = VelocityField::constant(0.0);
        let mut acc = 0.0;
        for cell in 0..sp.mesh.num_cells() {
            let cv = sp.cell_values(cell, &u);
            let v = cv.interpolate(&self.local(cell));
            for q in 0..cv.npoints() {
                let e = v[q] - g(cv.x[q], cv.t[q]);
                acc += cv.w[q] * e * e;
            }
        }
        acc.sqrt()
    }

    /// Error against a smooth function in the streamline part of the
    /// energy norms: `(Σ_T ‖S(φ − g)‖² + trace)^½`, where the trace part is
    /// `−∫_{∂Q₋}(φ−g)²(ũ,ñ)` for [`NormKind::Energy1u`] or the jump
    /// penalties for [`NormKind::Dg`].
    pub fn energy_error(&self, exact: &ExactSolution, u: &VelocityField, kind: NormKind) -> Result<f64> {
        let sp = &self.space;
        let mut acc = 0.0;
        for cell in 0..sp.mesh.num_cells() {
            let cv = sp.cell_values(cell, u);
            let local = self.local(cell);
            let s = cv.interpolate_stream(&local);
            let g = cv.interpolate_gradient(&local);
            for q in 0..cv.npoints() {
                let (x, t) = (cv.x[q], cv.t[q]);
                let se = exact.dt(x, t) + cv.u[q] * exact.dx(x, t) + cv.div_u[q] * exact.value(x, t);
                let d = s[q] - se;
                acc += cv.w[q] * d * d;
                if let NormKind::PenalizedV { lambda } = kind {
                    let et = g[q].0 - exact.dt(x, t);
                    let ex = g[q].1 - exact.dx(x, t);
                    acc += cv.w[q] * lambda * (et * et + ex * ex);
                }
            }
        }
        let part = sp.classify(u);
        let line = &part.line;
        match kind {
            NormKind::Energy1u | NormKind::Dg => {
                for ie in &part.inflow {
                    let edge = sp.mesh.edge(ie.edge);
                    let cell = edge.boundary_cell().unwrap();
                    let side = sp.side_of(edge, cell);
                    let vals = interpolate_side(&sp.side_tables[side], &self.local(cell));
                    let len = edge.length();
                    for q in 0..line.len() {
                        let (x, t) = edge.point(line.points[q]);
                        let e = vals[q] - exact.value(x, t);
                        let fl = ie.flux[q];
                        let w = line.weights[q] * len;
                        acc += if kind == NormKind::Dg { w * fl * fl * e * e / len } else { -w * fl * e * e };
                    }
                }
                if kind == NormKind::Dg {
                    acc += self.interior_jump_energy(u);
                }
            }
            NormKind::L2 => return Ok(self.l2_error(|x, t| exact.value(x, t))),
            NormKind::PenalizedV { .. } => {}
        }
        Ok(acc.sqrt())
    }
}

fn interpolate_side(table: &ReferenceTable, local: &[f64]) -> Vec<f64> {
    (0..table.npoints)
        .map(|q| (0..table.nbasis).map(|a| local[a] * table.phi[q * table.nbasis + a]).sum())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    L2,
    /// `(‖S φ‖² − ∫_{∂Q₋} φ²(ũ,ñ))^½`.
    Energy1u,
    /// `(‖S φ‖² + λ‖∇̃φ‖²)^½`; `λ = 1` gives the plain `|·|_𝕍` norm.
    PenalizedV { lambda: f64 },
    /// `𝒜(φ, φ)^½` with interior and inflow jump penalties.
    Dg,
}

impl NormKind {
    pub fn label(&self) -> String {
        match self {
            NormKind::L2 => "L2".into(),
            NormKind::Energy1u => "energy_1u".into(),
            NormKind::PenalizedV { lambda } => format!("penalized_V(lambda={lambda})"),
            NormKind::Dg => "DG".into(),
        }
    }
}

/// Smooth function with its first derivatives, used for manufactured
/// solutions and error norms.
#[derive(Clone)]
pub struct ExactSolution {
    value: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    dt: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    dx: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl ExactSolution {
    pub fn new<V, T, X>(value: V, dt: T, dx: X) -> Self
    where
        V: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        T: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        X: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            dt: Arc::new(dt),
            dx: Arc::new(dx),
        }
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        (self.value)(x, t)
    }

    pub fn dt(&self, x: f64, t: f64) -> f64 {
        (self.dt)(x, t)
    }

    pub fn dx(&self, x: f64, t: f64) -> f64 {
        (self.dx)(x, t)
    }
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactSolution(..)")
    }
}

/// Field matching `g` at every node.
pub fn nodal_interpolate<G: Fn(f64, f64) -> f64>(space: &Arc<FunctionSpace>, g: G) -> DiscreteField {
    let coeffs = space.dof_coords.iter().map(|&(x, t)| g(x, t)).collect();
    DiscreteField {
        space: space.clone(),
        coeffs,
    }
}

/// L² projection: `∫ (g − P g) φ = 0` for every basis function.
pub fn l2_project<G: Fn(f64, f64) -> f64>(space: &Arc<FunctionSpace>, g: G) -> Result<DiscreteField> {
    let u = VelocityField::constant(0.0);
    let nb = space.nbasis();
    let ncells = space.mesh.num_cells();
    match space.continuity {
        Continuity::Discontinuous => {
            let mut coeffs = vec![0.0; space.ndofs];
            for cell in 0..ncells {
                let cv = space.cell_values(cell, &u);
                let mut mass = DMatrix::<f64>::zeros(nb, nb);
                let mut rhs = DVector::<f64>::zeros(nb);
                for q in 0..cv.npoints() {
                    let gq = g(cv.x[q], cv.t[q]);
                    for a in 0..nb {
                        rhs[a] += cv.w[q] * gq * cv.phi(q, a);
                        for b in 0..nb {
                            mass[(a, b)] += cv.w[q] * cv.phi(q, a) * cv.phi(q, b);
                        }
                    }
                }
                let chol = mass.cholesky().ok_or_else(|| {
                    Error::InvalidArgument(format!("singular local mass matrix on cell {cell}"))
                })?;
                let sol = chol.solve(&rhs);
                for (a, &d) in space.cell_dofs(cell).iter().enumerate() {
                    coeffs[d] = sol[a];
                }
            }
            space.field(coeffs)
        }
        Continuity::Continuous => {
            let mut mass = TripletBuilder::new(space.ndofs, space.ndofs);
            let mut rhs = vec![0.0; space.ndofs];
            for cell in 0..ncells {
                let cv = space.cell_values(cell, &u);
                let dofs = space.cell_dofs(cell);
                for q in 0..cv.npoints() {
                    let gq = g(cv.x[q], cv.t[q]);
                    for a in 0..nb {
                        rhs[dofs[a]] += cv.w[q] * gq * cv.phi(q, a);
                        for b in 0..nb {
                            mass.add(dofs[a], dofs[b], cv.w[q] * cv.phi(q, a) * cv.phi(q, b));
                        }
                    }
                }
            }
            let lu = BandLu::factor(&mass.build())?;
            space.field(lu.solve(&rhs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    fn space(nx: usize, nt: usize, k: usize, c: Continuity) -> Arc<FunctionSpace> {
        let mesh = Arc::new(build_mesh(nx, nt, (0.0, 1.0), (0.0, 1.0)).unwrap());
        build_space(mesh, k, c).unwrap()
    }

    #[test]
    fn dof_counts() {
        assert_eq!(space(2, 2, 1, Continuity::Continuous).ndofs(), 9);
        assert_eq!(space(2, 2, 1, Continuity::Discontinuous).ndofs(), 16);
        let mesh = Arc::new(build_mesh(60, 65, (0.0, 1.0), (0.0, 0.25)).unwrap());
        assert_eq!(build_space(mesh, 1, Continuity::Continuous).unwrap().ndofs(), 61 * 66);
        assert_eq!(space(3, 2, 2, Continuity::Continuous).ndofs(), 7 * 5);
        assert!(build_space(Arc::new(build_mesh(1, 1, (0.0, 1.0), (0.0, 1.0)).unwrap()), 0, Continuity::Continuous).is_err());
    }

    #[test]
    fn lagrange_is_nodal() {
        for k in 1..=3 {
            let b = Lagrange1d::new(k);
            for a in 0..=k {
                for (i, &x) in b.nodes.iter().enumerate() {
                    let expect = if i == a { 1.0 } else { 0.0 };
                    assert!((b.value(a, x) - expect).abs() < 1e-13);
                }
            }
            // partition of unity and zero derivative sum
            let s: f64 = (0..=k).map(|a| b.value(a, 0.37)).sum();
            let ds: f64 = (0..=k).map(|a| b.derivative(a, 1, 0.37)).sum();
            assert!((s - 1.0).abs() < 1e-13 && ds.abs() < 1e-12);
        }
    }

    #[test]
    fn continuous_dofs_are_shared() {
        let sp = space(2, 2, 1, Continuity::Continuous);
        // cells 0 and 1 share the vertical edge x = 1/2
        let a = sp.cell_dofs(0);
        let b = sp.cell_dofs(1);
        assert_eq!(a[1], b[0]);
        assert_eq!(a[3], b[2]);
        for cell in 0..4 {
            for (l, &d) in sp.cell_dofs(cell).iter().enumerate() {
                let m = 2;
                let c = sp.mesh().cell(cell);
                let expect = c.map((l % m) as f64, (l / m) as f64);
                assert_eq!(sp.dof_coords()[d], expect);
            }
        }
    }

    #[test]
    fn stream_derivative_examples() {
        let sp = space(2, 2, 2, Continuity::Continuous);
        let t_field = nodal_interpolate(&sp, |_, t| t);
        let x_field = nodal_interpolate(&sp, |x, _| x);
        let xt = nodal_interpolate(&sp, |x, t| x * t);
        let c = VelocityField::constant(0.4);
        let one = VelocityField::constant(1.0);
        let lin = VelocityField::from_fn(|x, _| x, |_, _| 1.0);
        for cell in 0..4 {
            for &(xi, tau) in &[(0.2, 0.7), (0.5, 0.5)] {
                assert!((t_field.stream_derivative(&c, cell, xi, tau) - 1.0).abs() < 1e-12);
                assert!((x_field.stream_derivative(&one, cell, xi, tau) - 1.0).abs() < 1e-12);
                let (x, t) = sp.mesh().cell(cell).map(xi, tau);
                // ∂_t(xt) + x·∂_x(xt) + xt·1
                let expect = x * (1.0 + 2.0 * t);
                assert!((xt.stream_derivative(&lin, cell, xi, tau) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolation_reproduces_qk() {
        let sp = space(3, 2, 1, Continuity::Continuous);
        let f = nodal_interpolate(&sp, |x, t| 3.0 * x - t);
        for &(x, t) in &[(0.1, 0.2), (0.77, 0.91), (0.5, 0.5)] {
            assert!((f.evaluate(x, t).unwrap() - (3.0 * x - t)).abs() < 1e-13);
        }
        let sp2 = space(2, 2, 2, Continuity::Discontinuous);
        let g = nodal_interpolate(&sp2, |x, t| x * x * t * t - x * t);
        assert!((g.evaluate(0.3, 0.8).unwrap() - (0.09 * 0.64 - 0.24)).abs() < 1e-13);
    }

    #[test]
    fn interpolation_error_of_square() {
        // Q1 interpolant of x² misses by Δx²/4 at cell midpoints.
        let n = 5;
        let sp = space(n, 1, 1, Continuity::Continuous);
        let f = nodal_interpolate(&sp, |x, _| x * x);
        let dx = 1.0 / n as f64;
        let mut worst: f64 = 0.0;
        for s in 0..=1000 {
            let x = s as f64 / 1000.0;
            worst = worst.max((f.evaluate(x, 0.5).unwrap() - x * x).abs());
        }
        assert!((worst - dx * dx / 4.0).abs() < 1e-12);
    }

    #[test]
    fn projection_is_identity_on_space() {
        for c in [Continuity::Continuous, Continuity::Discontinuous] {
            let sp = space(3, 2, 2, c);
            let g = |x: f64, t: f64| x * x * t - 2.0 * t * t + x;
            let p = l2_project(&sp, g).unwrap();
            let i = nodal_interpolate(&sp, g);
            for (a, b) in p.coeffs.iter().zip(&i.coeffs) {
                assert!((a - b).abs() < 1e-10);
            }
            let z = l2_project(&sp, |_, _| 0.0).unwrap();
            assert!(z.coeffs.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn projection_is_galerkin_orthogonal() {
        let sp = space(3, 3, 1, Continuity::Continuous);
        let g = |x: f64, t: f64| (3.0 * x).sin() * (t + 0.5).exp();
        let p = l2_project(&sp, g).unwrap();
        let u = VelocityField::constant(0.0);
        let mut resid = vec![0.0; sp.ndofs()];
        for cell in 0..sp.mesh().num_cells() {
            let cv = sp.cell_values(cell, &u);
            let v = cv.interpolate(&p.local(cell));
            for q in 0..cv.npoints() {
                for (a, &d) in sp.cell_dofs(cell).iter().enumerate() {
                    resid[d] += cv.w[q] * (g(cv.x[q], cv.t[q]) - v[q]) * cv.phi(q, a);
                }
            }
        }
        assert!(resid.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn norm_examples() {
        let sp = space(2, 2, 1, Continuity::Continuous);
        let one_u = VelocityField::constant(1.0);
        let zero_u = VelocityField::constant(0.0);
        let zero = sp.zero_field();
        for kind in [NormKind::L2, NormKind::Energy1u, NormKind::PenalizedV { lambda: 1.0 }, NormKind::Dg] {
            assert_eq!(zero.norm(kind, &one_u).unwrap(), 0.0);
        }
        let one = nodal_interpolate(&sp, |_, _| 1.0);
        let e = one.norm(NormKind::Energy1u, &one_u).unwrap();
        assert!((e * e - 2.0).abs() < 1e-13);
        let t = nodal_interpolate(&sp, |_, t| t);
        let v = t.norm(NormKind::PenalizedV { lambda: 1.0 }, &zero_u).unwrap();
        assert!((v * v - 2.0).abs() < 1e-13);
        assert!(t.norm(NormKind::PenalizedV { lambda: -1.0 }, &zero_u).is_err());
    }

    #[test]
    fn continuous_fields_have_no_jumps() {
        let sp = space(3, 3, 2, Continuity::Continuous);
        let f = nodal_interpolate(&sp, |x, t| (x - 0.3 * t).sin());
        let u = VelocityField::from_fn(|x, _| 1.0 + x, |_, _| 1.0);
        // u is sampled just inside each cell, so only O(1e-9) jumps remain
        assert!(f.interior_jump_energy(&u) < 1e-14);
        let one = VelocityField::constant(1.0);
        assert!(f.interior_jump_energy(&one) < 1e-26);
    }

    #[test]
    fn broken_seminorm_of_bilinear() {
        // |xt|_{2} on Q1: only ∂x∂t = 1 survives.
        let sp = space(2, 3, 1, Continuity::Discontinuous);
        let f = nodal_interpolate(&sp, |x, t| 2.0 * x * t + x - t);
        assert!((f.broken_seminorm_sq() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn grid_values_average_dg() {
        let sp = space(2, 2, 1, Continuity::Discontinuous);
        let f = nodal_interpolate(&sp, |x, t| x + t);
        let g = f.grid_values();
        assert_eq!(g.len(), 9);
        for (x, t, c) in g {
            assert!((c - (x + t)).abs() < 1e-14);
        }
    }
}
