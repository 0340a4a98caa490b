use std::time::Instant;

use log::{debug, warn};

use super::{estimate_poincare, solve_reduced, Discretization, LinearMethod, SolverReport};
use crate::forms::{apply_inflow, assemble_base, assemble_source_vector, dg_inflow_rhs, ProblemSpec, SparseSystem};
use crate::linalg::BandLu;
use crate::spaces::{build_space, Continuity, DiscreteField, NormKind};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct PicardConfig {
    /// Stop once both the increment and the residual drop below this.
    pub tol: f64,
    pub max_iter: usize,
    /// `None` picks CG for the penalized form and LU for DG.
    pub linear: Option<LinearMethod>,
    pub linear_tol: f64,
    /// Estimate `c_p` first and warn when `k_f c_p ≥ 1`.
    pub check_contraction: bool,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            linear: None,
            linear_tol: 1e-12,
            check_contraction: true,
        }
    }
}

/// Fixed-point iteration with the source frozen at the previous iterate.
///
/// Increments are measured in the energy norm `‖S·‖` (with inflow trace)
/// for the penalized method and in the DG norm otherwise.
pub fn picard_solve(
    spec: &ProblemSpec,
    disc: Discretization,
    c0: &DiscreteField,
    cfg: &PicardConfig,
) -> Result<(DiscreteField, SolverReport)> {
    let start = Instant::now();
    let space = c0.space().clone();
    disc.check(space.continuity())?;
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", cfg.tol)));
    }
    let u = &spec.velocity;
    let norm = match disc {
        Discretization::Penalized { .. } => NormKind::Energy1u,
        Discretization::Dg => NormKind::Dg,
    };
    let mut report = SolverReport::new("picard", disc, norm);

    if cfg.check_contraction {
        let cont = if space.continuity() == Continuity::Continuous {
            space.clone()
        } else {
            build_space(space.mesh().clone(), space.degree(), Continuity::Continuous)?
        };
        match estimate_poincare(&cont, u) {
            Ok(cp) => {
                report.poincare_estimate = Some(cp);
                let q = spec.source.lipschitz * cp;
                if q >= 1.0 {
                    let msg = format!("k_f·c_p = {q:.4} ≥ 1: the fixed-point map may not contract");
                    warn!("{msg}");
                    report.warnings.push(msg);
                }
            }
            Err(e) => report.warnings.push(format!("Poincaré estimate unavailable: {e}")),
        }
    }

    let base = assemble_base(&space, spec, disc)?;
    let (constrained, values) = match disc {
        Discretization::Penalized { .. } => {
            let (dofs, lift) = apply_inflow(&space, spec)?;
            let v = dofs.iter().map(|&d| lift.coeffs[d]).collect();
            (dofs, v)
        }
        Discretization::Dg => (Vec::new(), Vec::new()),
    };
    let sys = SparseSystem {
        rhs: vec![0.0; base.nrows],
        matrix: base,
        constrained,
        values,
    };
    // b_f − A_fc x_c with b = 0 gives the constant lifting part
    let (a_ff, lift_rhs, free) = sys.reduce();
    let lu = BandLu::factor(&a_ff)?;
    let method = cfg.linear.unwrap_or(match disc {
        Discretization::Penalized { .. } => LinearMethod::Cg,
        Discretization::Dg => LinearMethod::Direct,
    });
    let weak_inflow = match disc {
        Discretization::Dg => Some(dg_inflow_rhs(&space, spec)),
        _ => None,
    };
    let load = |c: &DiscreteField| -> Result<Vec<f64>> {
        let mut v = assemble_source_vector(&space, spec, c)?;
        if let Some(w) = &weak_inflow {
            for (a, b) in v.iter_mut().zip(w) {
                *a += b;
            }
        }
        Ok(v)
    };

    let mut c = c0.clone();
    for (&d, &v) in sys.constrained.iter().zip(&sys.values) {
        c.coeffs[d] = v;
    }
    let mut src = load(&c)?;
    let mut prev_inc: Option<f64> = None;
    for it in 1..=cfg.max_iter {
        let b: Vec<f64> = free.iter().zip(&lift_rhs).map(|(&i, l)| src[i] + l).collect();
        let x = match method {
            LinearMethod::Direct => lu.solve(&b),
            m => solve_reduced(&a_ff, &b, m, cfg.linear_tol)?,
        };
        let next = space.field(sys.expand(&free, &x))?;
        let inc = next.combine(1.0, &c, -1.0)?.norm(norm, u)?;
        src = load(&next)?;
        let ax = sys.matrix.mul_vec(&next.coeffs);
        let r: Vec<f64> = free.iter().map(|&i| ax[i] - src[i]).collect();
        let z = lu.solve(&r);
        let res = r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();

        report.iterations = it;
        report.increment_history.push(inc);
        report.residual_history.push(res);
        if let Some(p) = prev_inc {
            if p > 0.0 {
                report.contraction_ratios.push(inc / p);
            }
        }
        debug!("picard {it}: increment {inc:.3e} residual {res:.3e}");
        prev_inc = Some(inc);
        c = next;
        if inc <= cfg.tol && res <= cfg.tol {
            report.converged = true;
            break;
        }
    }
    report.wall_time = start.elapsed().as_secs_f64();
    if !report.converged {
        return Err(Error::NotConverged {
            driver: "picard",
            report: Box::new(report),
        });
    }
    Ok((c, report))
}
