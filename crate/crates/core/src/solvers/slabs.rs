use std::sync::Arc;
use std::time::Instant;

use super::{newton_adaptive_solve, picard_solve, Discretization, NewtonConfig, PicardConfig, SolverReport};
use crate::forms::{apply_inflow, boundary_extension, ProblemSpec};
use crate::mesh::build_mesh;
use crate::spaces::{build_space, Continuity, DiscreteField, FunctionSpace};
use crate::{Error, Result};

/// Nonlinear solver used on each slab.
#[derive(Clone, Debug)]
pub enum InnerSolver {
    Picard(PicardConfig),
    Newton(NewtonConfig),
}

impl InnerSolver {
    pub fn solve(
        &self,
        spec: &ProblemSpec,
        disc: Discretization,
        c0: &DiscreteField,
    ) -> Result<(DiscreteField, SolverReport)> {
        match self {
            InnerSolver::Picard(cfg) => picard_solve(spec, disc, c0, cfg),
            InnerSolver::Newton(cfg) => newton_adaptive_solve(spec, disc, c0, cfg),
        }
    }
}

/// Starting iterate: the inflow lifting for continuous spaces, the
/// boundary data extended by nodal interpolation for DG.
pub fn initial_guess(space: &Arc<FunctionSpace>, spec: &ProblemSpec) -> Result<DiscreteField> {
    match space.continuity() {
        Continuity::Continuous => Ok(apply_inflow(space, spec)?.1),
        Continuity::Discontinuous => Ok(boundary_extension(space, spec)),
    }
}

/// Solve slab by slab in time. Slab `j` covers `nt / slabs` time rows of
/// `space`'s mesh and takes the top trace of slab `j − 1` as initial data.
/// The slab fields are copied into a field on `space`.
pub fn march_time_slabs(
    spec: &ProblemSpec,
    disc: Discretization,
    space: &Arc<FunctionSpace>,
    slabs: usize,
    inner: &InnerSolver,
) -> Result<(DiscreteField, SolverReport)> {
    let start = Instant::now();
    let mesh = space.mesh();
    if slabs == 0 || !mesh.nt.is_multiple_of(slabs) {
        return Err(Error::InvalidArgument(format!(
            "{slabs} slabs do not divide {} time cells",
            mesh.nt
        )));
    }
    disc.check(space.continuity())?;
    let rows = mesh.nt / slabs;
    let k = space.degree();
    let nb = space.nbasis();
    let mut global = space.zero_field();
    let mut report = SolverReport::new("slabs", disc, disc.norm_kind());
    report.converged = true;
    let mut prev: Option<DiscreteField> = None;
    for j in 0..slabs {
        let first = mesh.cell(j * rows * mesh.nx);
        let last = mesh.cell(((j + 1) * rows - 1) * mesh.nx);
        let t_range = (first.t.0, last.t.1);
        let slab_mesh = Arc::new(build_mesh(mesh.nx, rows, mesh.x_range, t_range)?);
        let slab_space = build_space(slab_mesh, k, space.continuity())?;
        let mut slab_spec = spec.clone();
        slab_spec.t_range = t_range;
        if let Some(p) = prev.take() {
            let t0 = t_range.0;
            slab_spec.inflow = spec.inflow.with_initial(move |x| p.evaluate(x, t0).unwrap_or(0.0));
        }
        let c0 = initial_guess(&slab_space, &slab_spec).map_err(|e| wrap(j, e))?;
        let (c, r) = inner.solve(&slab_spec, disc, &c0).map_err(|e| wrap(j, e))?;

        for cell in slab_space.mesh().cells() {
            let gcell = (j * rows + cell.j) * mesh.nx + cell.i;
            let (src, dst) = (slab_space.cell_dofs(cell.id), space.cell_dofs(gcell));
            // continuous spaces rewrite the shared bottom row with the
            // same constrained values
            for a in 0..nb {
                global.coeffs[dst[a]] = c.coeffs[src[a]];
            }
        }
        report.iterations += r.iterations;
        report.residual_history.extend(&r.residual_history);
        report.increment_history.extend(&r.increment_history);
        report.dt_history.extend(&r.dt_history);
        report.update_norms.extend(&r.update_norms);
        report.contraction_ratios.extend(&r.contraction_ratios);
        report.epsilon = r.epsilon;
        report.converged &= r.converged;
        report.warnings.extend(r.warnings.into_iter().map(|w| format!("slab {j}: {w}")));
        prev = Some(c);
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((global, report))
}

fn wrap(slab: usize, e: Error) -> Error {
    Error::Slab {
        slab,
        source: Box::new(e),
    }
}
