use std::time::Instant;

use log::debug;

use super::{solve_reduced, Discretization, LinearMethod, SolverReport};
use crate::forms::{apply_inflow, assemble_base, assemble_jacobian, residual_vector, ProblemSpec, RieszMap, SparseSystem};
use crate::spaces::{DiscreteField, NormKind};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct NewtonConfig {
    /// `ε` in `δt = min(√(2ε/‖N‖), 1)`.
    pub epsilon: f64,
    /// Stop when the residual dual norm is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Norm of the Newton update; `None` uses the base form of the
    /// discretization.
    pub norm: Option<NormKind>,
    pub linear: LinearMethod,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            tol: 1e-9,
            max_iter: 50,
            norm: None,
            linear: LinearMethod::Direct,
        }
    }
}

/// Step length `min(√(2ε/‖N‖), 1)`.
pub fn adaptive_step(epsilon: f64, update_norm: f64) -> f64 {
    (2.0 * epsilon / update_norm).sqrt().min(1.0)
}

/// One accepted damped Newton step.
#[derive(Debug)]
pub struct NewtonStep<'a> {
    pub iteration: usize,
    pub c_prev: &'a DiscreteField,
    pub c_next: &'a DiscreteField,
    pub dt: f64,
    pub update_norm: f64,
}

pub fn newton_adaptive_solve(
    spec: &ProblemSpec,
    disc: Discretization,
    c0: &DiscreteField,
    cfg: &NewtonConfig,
) -> Result<(DiscreteField, SolverReport)> {
    newton_with_observer(spec, disc, c0, cfg, &mut |_| {})
}

/// Damped Newton iteration; `observer` sees every step.
pub fn newton_with_observer(
    spec: &ProblemSpec,
    disc: Discretization,
    c0: &DiscreteField,
    cfg: &NewtonConfig,
    observer: &mut dyn FnMut(&NewtonStep<'_>),
) -> Result<(DiscreteField, SolverReport)> {
    let start = Instant::now();
    if !(cfg.epsilon > 0.0 && cfg.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ε = {} and tol = {} must be positive",
            cfg.epsilon, cfg.tol
        )));
    }
    let space = c0.space().clone();
    disc.check(space.continuity())?;
    let u = &spec.velocity;
    let norm = cfg.norm.unwrap_or(disc.norm_kind());
    let mut report = SolverReport::new("newton", disc, norm);
    report.epsilon = Some(cfg.epsilon);

    let base = assemble_base(&space, spec, disc)?;
    let mut c = c0.clone();
    let constrained = match disc {
        Discretization::Penalized { .. } => {
            let (dofs, lift) = apply_inflow(&space, spec)?;
            for &d in &dofs {
                c.coeffs[d] = lift.coeffs[d];
            }
            dofs
        }
        Discretization::Dg => Vec::new(),
    };
    let riesz = RieszMap::new(&base, &constrained)?;

    for it in 0..=cfg.max_iter {
        let r = residual_vector(&space, spec, &c, disc)?;
        let res = riesz.dual_norm(&r);
        report.residual_history.push(res);
        debug!("newton {it}: residual {res:.3e}");
        if res <= cfg.tol {
            report.converged = true;
            break;
        }
        if it == cfg.max_iter {
            break;
        }
        // β(c_n) N = −F(c_n), N = 0 on constrained DoFs
        let sys = SparseSystem {
            matrix: assemble_jacobian(&space, spec, &c, disc)?,
            rhs: r.iter().map(|v| -v).collect(),
            constrained: constrained.clone(),
            values: vec![0.0; constrained.len()],
        };
        let (a, b, free) = sys.reduce();
        let x = solve_reduced(&a, &b, cfg.linear, 1e-13).map_err(|e| match e {
            Error::SingularMatrix { .. } => Error::SingularJacobian { iteration: it + 1 },
            other => other,
        })?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian { iteration: it + 1 });
        }
        let n = space.field(sys.expand(&free, &x))?;
        let n_norm = match cfg.norm {
            None => base.bilinear(&n.coeffs, &n.coeffs).max(0.0).sqrt(),
            Some(kind) => n.norm(kind, u)?,
        };
        if n_norm == 0.0 {
            report.converged = res <= cfg.tol;
            break;
        }
        let dt = adaptive_step(cfg.epsilon, n_norm);
        let next = c.combine(1.0, &n, dt)?;
        report.iterations = it + 1;
        report.update_norms.push(n_norm);
        report.dt_history.push(dt);
        report.increment_history.push(dt * n_norm);
        observer(&NewtonStep {
            iteration: it + 1,
            c_prev: &c,
            c_next: &next,
            dt,
            update_norm: n_norm,
        });
        c = next;
    }
    report.wall_time = start.elapsed().as_secs_f64();
    if !report.converged {
        return Err(Error::NotConverged {
            driver: "newton",
            report: Box::new(report),
        });
    }
    Ok((c, report))
}
