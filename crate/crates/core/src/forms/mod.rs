//! Bilinear and linear forms: the penalized least-squares form `a_λ`, the
//! jump-penalized DG form `𝒜`, source right-hand sides, Newton Jacobians and
//! nonlinear residuals.

mod assemble;
mod problem;

use std::sync::Arc;

pub use assemble::{
    apply_inflow, assemble_base, assemble_dg, assemble_jacobian, assemble_newton, assemble_penalized,
    assemble_source_jacobian, assemble_source_rhs, assemble_source_vector, boundary_value, dg_inflow_rhs, residual,
    residual_in, residual_vector, Residual,
};
pub(crate) use assemble::boundary_extension;
pub use problem::{InflowData, ProblemSpec, Source, VelocityField};

use crate::linalg::{BandLu, CsrMatrix};
use crate::spaces::{Continuity, NormKind};
use crate::{Error, Result};

/// Which discrete problem is being solved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Discretization {
    /// Continuous `Q_k`, inflow imposed strongly, penalty `λ‖∇̃c‖²`.
    Penalized { lambda: f64 },
    /// Discontinuous `Q_k` with jump penalties, inflow imposed weakly.
    Dg,
}

impl Discretization {
    pub fn continuity(&self) -> Continuity {
        match self {
            Discretization::Penalized { .. } => Continuity::Continuous,
            Discretization::Dg => Continuity::Discontinuous,
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            Discretization::Penalized { lambda } => *lambda,
            Discretization::Dg => 0.0,
        }
    }

    /// Norm induced by the base bilinear form.
    pub fn norm_kind(&self) -> NormKind {
        match self {
            Discretization::Penalized { lambda } => NormKind::PenalizedV { lambda: *lambda },
            Discretization::Dg => NormKind::Dg,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Discretization::Penalized { lambda } => format!("penalized(lambda={lambda})"),
            Discretization::Dg => "dg".into(),
        }
    }

    pub(crate) fn check(&self, continuity: Continuity) -> Result<()> {
        if let Discretization::Penalized { lambda } = self {
            if !(*lambda >= 0.0) {
                return Err(Error::InvalidArgument(format!("penalty λ = {lambda} must be non-negative")));
            }
        }
        if continuity != self.continuity() {
            return Err(Error::InvalidArgument(format!(
                "{} needs a {:?} space, got {continuity:?}",
                self.label(),
                self.continuity()
            )));
        }
        Ok(())
    }
}

/// Assembled matrix and right-hand side, plus Dirichlet-type constraints.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Sorted constrained DoFs.
    pub constrained: Vec<usize>,
    /// Prescribed values, parallel to `constrained`.
    pub values: Vec<f64>,
}

impl SparseSystem {
    pub fn unconstrained(matrix: CsrMatrix, rhs: Vec<f64>) -> Self {
        Self {
            matrix,
            rhs,
            constrained: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        let mut mark = vec![true; self.dim()];
        for &c in &self.constrained {
            mark[c] = false;
        }
        (0..self.dim()).filter(|&i| mark[i]).collect()
    }

    /// `(A_ff, b_f − A_fc x_c, free)`.
    pub fn reduce(&self) -> (CsrMatrix, Vec<f64>, Vec<usize>) {
        let free = self.free_dofs();
        if self.constrained.is_empty() {
            return (self.matrix.clone(), self.rhs.clone(), free);
        }
        let mut xc = vec![0.0; self.dim()];
        for (&c, &v) in self.constrained.iter().zip(&self.values) {
            xc[c] = v;
        }
        let rhs = free
            .iter()
            .map(|&i| self.rhs[i] - self.matrix.row(i).map(|(j, a)| a * xc[j]).sum::<f64>())
            .collect();
        (self.matrix.submatrix(&free), rhs, free)
    }

    /// Full vector from free values and the prescribed ones.
    pub fn expand(&self, free: &[usize], x_free: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (&i, &v) in free.iter().zip(x_free) {
            x[i] = v;
        }
        for (&c, &v) in self.constrained.iter().zip(&self.values) {
            x[c] = v;
        }
        x
    }

    /// `‖A x − b‖` over free rows, relative to `‖b_f − A_fc x_c‖`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let (a, b, free) = self.reduce();
        let xf: Vec<f64> = free.iter().map(|&i| x[i]).collect();
        let ax = a.mul_vec(&xf);
        let num: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let den = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

/// Factorized base form restricted to the free DoFs, used to turn residual
/// vectors into dual norms.
#[derive(Clone, Debug)]
pub struct RieszMap {
    lu: BandLu,
    free: Vec<usize>,
}

impl RieszMap {
    pub fn new(base: &CsrMatrix, constrained: &[usize]) -> Result<Self> {
        let sys = SparseSystem {
            matrix: base.clone(),
            rhs: vec![0.0; base.nrows],
            constrained: constrained.to_vec(),
            values: vec![0.0; constrained.len()],
        };
        let (a, _, free) = sys.reduce();
        Ok(Self {
            lu: BandLu::factor(&a)?,
            free,
        })
    }

    /// `(r_f · A_ff⁻¹ r_f)^½`, the norm of the Riesz representative.
    pub fn dual_norm(&self, r: &[f64]) -> f64 {
        let rf: Vec<f64> = self.free.iter().map(|&i| r[i]).collect();
        let z = self.lu.solve(&rf);
        rf.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }
}

pub(crate) fn same_mesh(a: &Arc<crate::SpaceTimeMesh>, b: &Arc<crate::SpaceTimeMesh>) -> bool {
    Arc::ptr_eq(a, b) || (a.nx == b.nx && a.nt == b.nt && a.x_range == b.x_range && a.t_range == b.t_range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;

    #[test]
    fn reduce_and_expand() {
        let mut b = TripletBuilder::new(3, 3);
        for i in 0..3 {
            b.add(i, i, 2.0);
        }
        b.add(0, 1, -1.0);
        b.add(1, 0, -1.0);
        b.add(1, 2, -1.0);
        b.add(2, 1, -1.0);
        let sys = SparseSystem {
            matrix: b.build(),
            rhs: vec![0.0, 1.0, 0.0],
            constrained: vec![0],
            values: vec![3.0],
        };
        let (a, r, free) = sys.reduce();
        assert_eq!(free, vec![1, 2]);
        assert_eq!(a.nrows, 2);
        assert_eq!(r, vec![4.0, 0.0]);
        let x = sys.expand(&free, &[8.0 / 3.0, 4.0 / 3.0]);
        assert_eq!(x[0], 3.0);
        assert!(sys.relative_residual(&x) < 1e-14);
    }

    #[test]
    fn discretization_checks() {
        assert!(Discretization::Penalized { lambda: -1.0 }.check(Continuity::Continuous).is_err());
        assert!(Discretization::Penalized { lambda: f64::NAN }.check(Continuity::Continuous).is_err());
        assert!(Discretization::Dg.check(Continuity::Continuous).is_err());
        assert!(Discretization::Dg.check(Continuity::Discontinuous).is_ok());
    }
}
