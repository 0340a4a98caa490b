use std::sync::Arc;

use super::{same_mesh, Discretization, ProblemSpec, RieszMap, SparseSystem};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::{BoundaryPartition, Edge};
use crate::spaces::{nodal_interpolate, CellValues, Continuity, DiscreteField, FunctionSpace};
use crate::{Error, Result};

/// `c_b` at a boundary point: the initial profile on the bottom of the box,
/// the lateral data elsewhere.
pub fn boundary_value(spec: &ProblemSpec, x: f64, t: f64) -> f64 {
    let t0 = spec.t_range.0;
    let tol = 1e-12 * (spec.t_range.1 - t0).abs().max(1.0);
    if (t - t0).abs() <= tol {
        spec.inflow.initial(x)
    } else {
        spec.inflow.lateral(x, t)
    }
}

/// Inflow DoFs of a continuous space and the lifting `C_b`: nodal values of
/// `c_b` there, zero elsewhere.
pub fn apply_inflow(space: &Arc<FunctionSpace>, spec: &ProblemSpec) -> Result<(Vec<usize>, DiscreteField)> {
    if space.continuity() != Continuity::Continuous {
        return Err(Error::InvalidArgument("inflow lifting needs a continuous space".into()));
    }
    let part = space.classify(&spec.velocity);
    let dofs = space.inflow_dofs(&part);
    let mut coeffs = vec![0.0; space.ndofs()];
    for &d in &dofs {
        let (x, t) = space.dof_coords()[d];
        coeffs[d] = boundary_value(spec, x, t);
    }
    Ok((dofs, space.field(coeffs)?))
}

/// Values, time and space derivatives of `c` at the quadrature points of
/// `cv` (which may belong to a different space on the same mesh).
struct Samples {
    val: Vec<f64>,
    gt: Vec<f64>,
    gx: Vec<f64>,
}

impl Samples {
    fn stream(&self, cv: &CellValues, q: usize) -> f64 {
        self.gt[q] + cv.u[q] * self.gx[q] + cv.div_u[q] * self.val[q]
    }
}

fn sample_cell(c: &DiscreteField, test: &FunctionSpace, cv: &CellValues) -> Samples {
    let cell = cv.cell.id;
    if std::ptr::eq(c.space().as_ref(), test) {
        let local = c.local(cell);
        let val = cv.interpolate(&local);
        let (gt, gx) = cv.interpolate_gradient(&local).into_iter().unzip();
        Samples { val, gt, gx }
    } else {
        let pts = &test.quadrature().points;
        let val = pts.iter().map(|&(xi, tau)| c.value_at(cell, xi, tau)).collect();
        let (gt, gx) = pts.iter().map(|&(xi, tau)| c.gradient_at(cell, xi, tau)).unzip();
        Samples { val, gt, gx }
    }
}

/// Values of `c` from inside `cell` at the Gauss points of `edge`.
fn sample_side(c: &DiscreteField, test: &FunctionSpace, edge: &Edge, cell: usize) -> Vec<f64> {
    let side = test.side_of(edge, cell);
    test.quadrature()
        .line
        .points
        .iter()
        .map(|&s| {
            let (xi, tau) = match side {
                0 => (0.0, s),
                1 => (1.0, s),
                2 => (s, 0.0),
                _ => (s, 1.0),
            };
            c.value_at(cell, xi, tau)
        })
        .collect()
}

fn check_field(space: &FunctionSpace, c: &DiscreteField) -> Result<()> {
    if !same_mesh(space.mesh(), c.space().mesh()) {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

/// Local matrix `Σ_q w (S φ_a S φ_b + λ ∇̃φ_a·∇̃φ_b)`, row `a`.
fn cell_matrix(cv: &CellValues, lambda: f64) -> Vec<f64> {
    let nb = cv.nbasis;
    let mut k = vec![0.0; nb * nb];
    for q in 0..cv.npoints() {
        let w = cv.w[q];
        let base = q * nb;
        for a in 0..nb {
            let sa = cv.stream(q, a);
            for b in 0..nb {
                let mut v = sa * cv.stream(q, b);
                if lambda != 0.0 {
                    v += lambda
                        * (cv.dphi_dt[base + a] * cv.dphi_dt[base + b] + cv.dphi_dx[base + a] * cv.dphi_dx[base + b]);
                }
                k[a * nb + b] += w * v;
            }
        }
    }
    k
}

/// Local `Σ_q w f′(c) φ_b S φ_a`, row `a`.
fn cell_jacobian(cv: &CellValues, spec: &ProblemSpec, c: &Samples) -> Vec<f64> {
    let nb = cv.nbasis;
    let mut j = vec![0.0; nb * nb];
    for q in 0..cv.npoints() {
        let wf = cv.w[q] * spec.source.derivative(c.val[q]);
        for a in 0..nb {
            let sa = cv.stream(q, a);
            for b in 0..nb {
                j[a * nb + b] += wf * cv.phi(q, b) * sa;
            }
        }
    }
    j
}

fn scatter(builder: &mut TripletBuilder, dofs: &[usize], local: &[f64]) {
    let nb = dofs.len();
    for a in 0..nb {
        for b in 0..nb {
            builder.add(dofs[a], dofs[b], local[a * nb + b]);
        }
    }
}

/// Interior and inflow jump penalties of `𝒜`.
fn add_dg_edges(builder: &mut TripletBuilder, space: &FunctionSpace, spec: &ProblemSpec, part: &BoundaryPartition) {
    let u = &spec.velocity;
    let mesh = space.mesh();
    let line = &part.line;
    let nb = space.nbasis();
    for edge in mesh.interior_edges() {
        let (m, p) = (edge.minus.unwrap(), edge.plus.unwrap());
        let sm = space.side_values(edge, m, u);
        let sp = space.side_values(edge, p, u);
        let (dm, dp) = (space.cell_dofs(m), space.cell_dofs(p));
        // jump basis: first nb entries from the minus cell, then plus
        let mut local = vec![0.0; 4 * nb * nb];
        for q in 0..line.len() {
            let w = line.weights[q];
            let (fm, fp) = (sm.flux(q), sp.flux(q));
            let jump = |k: usize| if k < nb { fm * sm.phi(q, k) } else { fp * sp.phi(q, k - nb) };
            for a in 0..2 * nb {
                let ja = jump(a);
                for b in 0..2 * nb {
                    local[a * 2 * nb + b] += w * ja * jump(b);
                }
            }
        }
        let dof = |k: usize| if k < nb { dm[k] } else { dp[k - nb] };
        for a in 0..2 * nb {
            for b in 0..2 * nb {
                builder.add(dof(a), dof(b), local[a * 2 * nb + b]);
            }
        }
    }
    for ie in &part.inflow {
        let edge = mesh.edge(ie.edge);
        let cell = edge.boundary_cell().unwrap();
        let sv = space.side_values(edge, cell, u);
        let dofs = space.cell_dofs(cell);
        let mut local = vec![0.0; nb * nb];
        for q in 0..line.len() {
            let w = line.weights[q] * ie.flux[q] * ie.flux[q];
            for a in 0..nb {
                for b in 0..nb {
                    local[a * nb + b] += w * sv.phi(q, a) * sv.phi(q, b);
                }
            }
        }
        scatter(builder, dofs, &local);
    }
}

fn assemble_matrix(
    space: &FunctionSpace,
    spec: &ProblemSpec,
    disc: Discretization,
    state: Option<&DiscreteField>,
) -> Result<CsrMatrix> {
    disc.check(space.continuity())?;
    let n = space.ndofs();
    let lambda = disc.lambda();
    let mut builder = TripletBuilder::new(n, n);
    for cell in 0..space.mesh().num_cells() {
        let cv = space.cell_values(cell, &spec.velocity);
        let mut k = cell_matrix(&cv, lambda);
        if let Some(c) = state {
            let s = sample_cell(c, space, &cv);
            let j = cell_jacobian(&cv, spec, &s);
            for (kv, jv) in k.iter_mut().zip(&j) {
                *kv -= jv;
            }
        }
        scatter(&mut builder, space.cell_dofs(cell), &k);
    }
    if disc == Discretization::Dg {
        let part = space.classify(&spec.velocity);
        add_dg_edges(&mut builder, space, spec, &part);
    }
    Ok(builder.build())
}

/// Matrix of `a_λ` (penalized) or `𝒜` (DG), with no constraints applied.
pub fn assemble_base(space: &FunctionSpace, spec: &ProblemSpec, disc: Discretization) -> Result<CsrMatrix> {
    assemble_matrix(space, spec, disc, None)
}

/// `a_λ` on a continuous space, inflow DoFs constrained to the lifting.
pub fn assemble_penalized(space: &Arc<FunctionSpace>, spec: &ProblemSpec, lambda: f64) -> Result<SparseSystem> {
    let matrix = assemble_matrix(space, spec, Discretization::Penalized { lambda }, None)?;
    let (constrained, lifting) = apply_inflow(space, spec)?;
    let values = constrained.iter().map(|&d| lifting.coeffs[d]).collect();
    Ok(SparseSystem {
        rhs: vec![0.0; matrix.nrows],
        matrix,
        constrained,
        values,
    })
}

/// `∫ f(c) S φ_i`.
pub fn assemble_source_vector(space: &FunctionSpace, spec: &ProblemSpec, c: &DiscreteField) -> Result<Vec<f64>> {
    check_field(space, c)?;
    let mut rhs = vec![0.0; space.ndofs()];
    for cell in 0..space.mesh().num_cells() {
        let cv = space.cell_values(cell, &spec.velocity);
        let s = sample_cell(c, space, &cv);
        let dofs = space.cell_dofs(cell);
        for q in 0..cv.npoints() {
            let wf = cv.w[q] * spec.source.eval_at(cv.x[q], cv.t[q], s.val[q]);
            for (a, &d) in dofs.iter().enumerate() {
                rhs[d] += wf * cv.stream(q, a);
            }
        }
    }
    Ok(rhs)
}

/// `∫ (f(ρ) − S C_b) S φ_i`.
pub fn assemble_source_rhs(
    space: &FunctionSpace,
    spec: &ProblemSpec,
    rho: &DiscreteField,
    lifting: &DiscreteField,
) -> Result<Vec<f64>> {
    check_field(space, rho)?;
    check_field(space, lifting)?;
    let mut rhs = vec![0.0; space.ndofs()];
    for cell in 0..space.mesh().num_cells() {
        let cv = space.cell_values(cell, &spec.velocity);
        let r = sample_cell(rho, space, &cv);
        let l = sample_cell(lifting, space, &cv);
        let dofs = space.cell_dofs(cell);
        for q in 0..cv.npoints() {
            let g = cv.w[q] * (spec.source.eval_at(cv.x[q], cv.t[q], r.val[q]) - l.stream(&cv, q));
            for (a, &d) in dofs.iter().enumerate() {
                rhs[d] += g * cv.stream(q, a);
            }
        }
    }
    Ok(rhs)
}

/// `∫ f′(c) φ_j S φ_i`.
pub fn assemble_source_jacobian(space: &FunctionSpace, spec: &ProblemSpec, c: &DiscreteField) -> Result<CsrMatrix> {
    check_field(space, c)?;
    let n = space.ndofs();
    let mut builder = TripletBuilder::new(n, n);
    for cell in 0..space.mesh().num_cells() {
        let cv = space.cell_values(cell, &spec.velocity);
        let s = sample_cell(c, space, &cv);
        scatter(&mut builder, space.cell_dofs(cell), &cell_jacobian(&cv, spec, &s));
    }
    Ok(builder.build())
}

/// Weak inflow data of the DG method: `Σ_{e ⊂ ∂Q₋} h_e⁻¹ ∫ (ũ,ñ)² c_b φ_i`.
pub fn dg_inflow_rhs(space: &FunctionSpace, spec: &ProblemSpec) -> Vec<f64> {
    let part = space.classify(&spec.velocity);
    let mut rhs = vec![0.0; space.ndofs()];
    let line = &part.line;
    for ie in &part.inflow {
        let edge = space.mesh().edge(ie.edge);
        let cell = edge.boundary_cell().unwrap();
        let sv = space.side_values(edge, cell, &spec.velocity);
        let dofs = space.cell_dofs(cell);
        for q in 0..line.len() {
            let (x, t) = edge.point(line.points[q]);
            let g = line.weights[q] * ie.flux[q] * ie.flux[q] * boundary_value(spec, x, t);
            for (a, &d) in dofs.iter().enumerate() {
                rhs[d] += g * sv.phi(q, a);
            }
        }
    }
    rhs
}

/// DG system `𝒜 c = ∫ f(s) S φ + inflow data`, with `s` the given source
/// state.
pub fn assemble_dg(space: &FunctionSpace, spec: &ProblemSpec, source_field: &DiscreteField) -> Result<SparseSystem> {
    let matrix = assemble_matrix(space, spec, Discretization::Dg, None)?;
    let mut rhs = assemble_source_vector(space, spec, source_field)?;
    for (r, b) in rhs.iter_mut().zip(dg_inflow_rhs(space, spec)) {
        *r += b;
    }
    Ok(SparseSystem::unconstrained(matrix, rhs))
}

/// Jacobian `β(c)`: the base form minus `∫ f′(c) φ_j S φ_i`.
pub fn assemble_jacobian(
    space: &FunctionSpace,
    spec: &ProblemSpec,
    c: &DiscreteField,
    disc: Discretization,
) -> Result<CsrMatrix> {
    check_field(space, c)?;
    assemble_matrix(space, spec, disc, Some(c))
}

/// Damped Newton system for `c_{n+1}`: matrix `β(c_n)`, right-hand side
/// `β(c_n) c_n − δt F(c_n)`. Continuous spaces keep the inflow DoFs at `c_b`.
pub fn assemble_newton(
    space: &Arc<FunctionSpace>,
    spec: &ProblemSpec,
    c_n: &DiscreteField,
    dt: f64,
    disc: Discretization,
) -> Result<SparseSystem> {
    if !(dt > 0.0 && dt <= 1.0) {
        return Err(Error::InvalidArgument(format!("δt = {dt} outside (0, 1]")));
    }
    let matrix = assemble_jacobian(space, spec, c_n, disc)?;
    let r = residual_vector(space, spec, c_n, disc)?;
    let bc = matrix.mul_vec(&c_n.coeffs);
    let rhs = bc.iter().zip(&r).map(|(b, r)| b - dt * r).collect();
    let (constrained, values) = match disc {
        Discretization::Penalized { .. } => {
            let (dofs, lifting) = apply_inflow(space, spec)?;
            let vals = dofs.iter().map(|&d| lifting.coeffs[d]).collect();
            (dofs, vals)
        }
        Discretization::Dg => (Vec::new(), Vec::new()),
    };
    Ok(SparseSystem {
        matrix,
        rhs,
        constrained,
        values,
    })
}

/// Nonlinear residual `⟨F(c), φ_i⟩` with its dual-norm estimate.
#[derive(Clone, Debug)]
pub struct Residual {
    pub vector: Vec<f64>,
    /// Norm of the discrete Riesz representative in the base form.
    pub dual_norm: f64,
    /// Plain Euclidean norm of `vector`.
    pub euclidean: f64,
}

/// `⟨F(c), φ_i⟩` tested against the basis of `test` (same mesh as `c`).
/// Rows of constrained inflow DoFs are zero.
pub fn residual_vector(
    test: &Arc<FunctionSpace>,
    spec: &ProblemSpec,
    c: &DiscreteField,
    disc: Discretization,
) -> Result<Vec<f64>> {
    disc.check(test.continuity())?;
    check_field(test, c)?;
    let lambda = disc.lambda();
    let u = &spec.velocity;
    let mut r = vec![0.0; test.ndofs()];
    for cell in 0..test.mesh().num_cells() {
        let cv = test.cell_values(cell, u);
        let s = sample_cell(c, test, &cv);
        let dofs = test.cell_dofs(cell);
        let nb = cv.nbasis;
        for q in 0..cv.npoints() {
            let w = cv.w[q];
            let res = s.stream(&cv, q) - spec.source.eval_at(cv.x[q], cv.t[q], s.val[q]);
            for (a, &d) in dofs.iter().enumerate() {
                let mut v = res * cv.stream(q, a);
                if lambda != 0.0 {
                    v += lambda * (s.gt[q] * cv.dphi_dt[q * nb + a] + s.gx[q] * cv.dphi_dx[q * nb + a]);
                }
                r[d] += w * v;
            }
        }
    }
    match disc {
        Discretization::Penalized { .. } => {
            let part = test.classify(u);
            for d in test.inflow_dofs(&part) {
                r[d] = 0.0;
            }
        }
        Discretization::Dg => {
            let part = test.classify(u);
            let line = &part.line;
            for edge in test.mesh().interior_edges() {
                let (m, p) = (edge.minus.unwrap(), edge.plus.unwrap());
                let sm = test.side_values(edge, m, u);
                let sp = test.side_values(edge, p, u);
                let cm = sample_side(c, test, edge, m);
                let cp = sample_side(c, test, edge, p);
                let (dm, dp) = (test.cell_dofs(m), test.cell_dofs(p));
                for q in 0..line.len() {
                    let jc = line.weights[q] * (sm.flux(q) * cm[q] + sp.flux(q) * cp[q]);
                    for a in 0..sm.nbasis {
                        r[dm[a]] += jc * sm.flux(q) * sm.phi(q, a);
                        r[dp[a]] += jc * sp.flux(q) * sp.phi(q, a);
                    }
                }
            }
            for ie in &part.inflow {
                let edge = test.mesh().edge(ie.edge);
                let cell = edge.boundary_cell().unwrap();
                let sv = test.side_values(edge, cell, u);
                let cv = sample_side(c, test, edge, cell);
                let dofs = test.cell_dofs(cell);
                for q in 0..line.len() {
                    let (x, t) = edge.point(line.points[q]);
                    let g = line.weights[q] * ie.flux[q] * ie.flux[q] * (cv[q] - boundary_value(spec, x, t));
                    for (a, &d) in dofs.iter().enumerate() {
                        r[d] += g * sv.phi(q, a);
                    }
                }
            }
        }
    }
    Ok(r)
}

/// Residual of `c` tested against its own space.
pub fn residual(space: &Arc<FunctionSpace>, spec: &ProblemSpec, c: &DiscreteField, disc: Discretization) -> Result<Residual> {
    residual_in(space, spec, c, disc)
}

/// Residual of `c` tested against another space on the same mesh, e.g. a
/// higher degree one to approximate the continuous dual norm.
pub fn residual_in(
    test: &Arc<FunctionSpace>,
    spec: &ProblemSpec,
    c: &DiscreteField,
    disc: Discretization,
) -> Result<Residual> {
    let vector = residual_vector(test, spec, c, disc)?;
    let base = assemble_base(test, spec, disc)?;
    let constrained = match disc {
        Discretization::Penalized { .. } => test.inflow_dofs(&test.classify(&spec.velocity)),
        Discretization::Dg => Vec::new(),
    };
    let dual_norm = RieszMap::new(&base, &constrained)?.dual_norm(&vector);
    let euclidean = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(Residual {
        vector,
        dual_norm,
        euclidean,
    })
}

/// Nodal interpolation of `c_b` over the whole space; a convenient initial
/// guess for DG runs.
pub(crate) fn boundary_extension(space: &Arc<FunctionSpace>, spec: &ProblemSpec) -> DiscreteField {
    nodal_interpolate(space, |x, t| boundary_value(spec, x, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{InflowData, Source, VelocityField};
    use crate::mesh::build_mesh;
    use crate::spaces::build_space;

    fn spec(u: f64, f: Source, cb: f64) -> ProblemSpec {
        ProblemSpec::new(VelocityField::constant(u), f, InflowData::constant(cb), (0.0, 1.0), (0.0, 1.0)).unwrap()
    }

    fn space(n: usize, k: usize, c: Continuity) -> Arc<FunctionSpace> {
        build_space(Arc::new(build_mesh(n, n, (0.0, 1.0), (0.0, 1.0)).unwrap()), k, c).unwrap()
    }

    #[test]
    fn characteristic_field_has_zero_energy() {
        let sp = space(1, 1, Continuity::Continuous);
        let s = spec(1.0, Source::zero(), 0.0);
        let a = assemble_base(&sp, &s, Discretization::Penalized { lambda: 0.0 }).unwrap();
        let phi = nodal_interpolate(&sp, |x, t| x - t);
        assert!(a.bilinear(&phi.coeffs, &phi.coeffs).abs() < 1e-14);
    }

    #[test]
    fn negative_lambda_rejected() {
        let sp = space(2, 1, Continuity::Continuous);
        assert!(assemble_penalized(&sp, &spec(1.0, Source::zero(), 0.0), -0.5).is_err());
    }

    #[test]
    fn unit_source_rhs_on_one_cell() {
        let sp = space(1, 1, Continuity::Continuous);
        let s = spec(0.0, Source::affine(0.0, 1.0), 0.0);
        let zero = sp.zero_field();
        let rhs = assemble_source_rhs(&sp, &s, &zero, &zero).unwrap();
        // bottom nodes −1/2, top nodes +1/2
        for (r, e) in rhs.iter().zip([-0.5, -0.5, 0.5, 0.5]) {
            assert!((r - e).abs() < 1e-14);
        }
    }

    #[test]
    fn inflow_lifting_for_unit_data() {
        let sp = space(3, 1, Continuity::Continuous);
        let s = spec(1.0, Source::zero(), 1.0);
        let (dofs, lift) = apply_inflow(&sp, &s).unwrap();
        // bottom row (4) plus left column above it (3)
        assert_eq!(dofs.len(), 7);
        for (d, &(x, t)) in sp.dof_coords().iter().enumerate() {
            let on = t == 0.0 || x == 0.0;
            assert_eq!(lift.coeffs[d], if on { 1.0 } else { 0.0 });
        }
        let s0 = spec(1.0, Source::zero(), 0.0);
        let (_, lift0) = apply_inflow(&sp, &s0).unwrap();
        assert!(lift0.coeffs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_cell_dg_reproduces_constant() {
        let sp = space(1, 1, Continuity::Discontinuous);
        let s = spec(1.0, Source::zero(), 1.0);
        let sys = assemble_dg(&sp, &s, &sp.zero_field()).unwrap();
        let lu = crate::linalg::BandLu::factor(&sys.matrix).unwrap();
        let x = lu.solve(&sys.rhs);
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn newton_without_source_equals_base() {
        for disc in [Discretization::Penalized { lambda: 0.3 }, Discretization::Dg] {
            let sp = space(2, 1, disc.continuity());
            let s = spec(0.7, Source::zero(), 1.0);
            let c = nodal_interpolate(&sp, |x, t| x * t + 0.2);
            let base = assemble_base(&sp, &s, disc).unwrap();
            let newton = assemble_newton(&sp, &s, &c, 1.0, disc).unwrap();
            assert_eq!(base.values, newton.matrix.values);
            assert_eq!(base.col_idx, newton.matrix.col_idx);
        }
    }

    #[test]
    fn zero_is_a_solution() {
        let s = spec(1.0, Source::new("cubic", |c| c * c * c, |c| 3.0 * c * c, 3.0, (-1.0, 1.0)), 0.0);
        for disc in [Discretization::Penalized { lambda: 0.5 }, Discretization::Dg] {
            let sp = space(2, 1, disc.continuity());
            let r = residual(&sp, &s, &sp.zero_field(), disc).unwrap();
            assert_eq!(r.euclidean, 0.0);
            assert_eq!(r.dual_norm, 0.0);
        }
    }
}
