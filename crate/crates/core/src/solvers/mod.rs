//! Linear solves and the nonlinear drivers: Picard iteration, damped
//! Newton with adaptive step length, and time-slab marching.

mod newton;
mod picard;
mod poincare;
mod slabs;

use crate::linalg::{bicgstab, conjugate_gradient, BandLu};
use crate::Result;
pub use crate::forms::Discretization;
use crate::forms::SparseSystem;
use crate::spaces::NormKind;

pub use newton::{adaptive_step, newton_adaptive_solve, newton_with_observer, NewtonConfig, NewtonStep};
pub use picard::{picard_solve, PicardConfig};
pub use poincare::{estimate_poincare, estimate_poincare_with};
pub use slabs::{initial_guess, march_time_slabs, InnerSolver};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearMethod {
    Direct,
    Cg,
    Bicgstab,
}

impl LinearMethod {
    pub fn label(&self) -> &'static str {
        match self {
            LinearMethod::Direct => "direct",
            LinearMethod::Cg => "cg",
            LinearMethod::Bicgstab => "bicgstab",
        }
    }
}

/// Solve `system` with its constraints eliminated. The returned vector is
/// full length with constrained DoFs at their prescribed values.
pub fn solve_linear(system: &SparseSystem, method: LinearMethod, tol: f64) -> Result<Vec<f64>> {
    let (a, b, free) = system.reduce();
    let x = solve_reduced(&a, &b, method, tol)?;
    Ok(system.expand(&free, &x))
}

pub(crate) fn solve_reduced(a: &crate::linalg::CsrMatrix, b: &[f64], method: LinearMethod, tol: f64) -> Result<Vec<f64>> {
    if b.is_empty() {
        return Ok(Vec::new());
    }
    let cap = (10 * b.len()).max(1000);
    Ok(match method {
        LinearMethod::Direct => BandLu::factor(a)?.solve(b),
        LinearMethod::Cg => conjugate_gradient(a, b, tol, cap)?.x,
        LinearMethod::Bicgstab => bicgstab(a, b, tol, cap)?.x,
    })
}

/// History of a nonlinear solve.
#[derive(Clone, Debug, Default)]
pub struct SolverReport {
    pub driver: String,
    pub discretization: String,
    pub iterations: usize,
    /// Dual-norm residual estimate after each iteration (Picard) or at each
    /// iterate `c_n` including the last (Newton).
    pub residual_history: Vec<f64>,
    /// `‖c_{n+1} − c_n‖` in [`SolverReport::increment_norm`].
    pub increment_history: Vec<f64>,
    /// Newton step lengths `δt_n`.
    pub dt_history: Vec<f64>,
    /// Newton update norms `‖N_F(c_n)‖` that produced `dt_history`.
    pub update_norms: Vec<f64>,
    /// `ε` of the step-length rule, when Newton ran.
    pub epsilon: Option<f64>,
    /// Increment ratios of consecutive Picard iterations.
    pub contraction_ratios: Vec<f64>,
    pub increment_norm: String,
    pub converged: bool,
    pub wall_time: f64,
    pub poincare_estimate: Option<f64>,
    pub warnings: Vec<String>,
}

impl SolverReport {
    pub(crate) fn new(driver: &str, disc: Discretization, norm: NormKind) -> Self {
        Self {
            driver: driver.into(),
            discretization: disc.label(),
            increment_norm: norm.label(),
            ..Default::default()
        }
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }
}
