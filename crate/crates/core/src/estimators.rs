//! Cell and edge residual indicators of a damped Newton step and their
//! aggregated bounds.

use crate::forms::{boundary_value, Discretization, ProblemSpec, Source};
use crate::spaces::DiscreteField;
use crate::{Error, Result};

/// `c_{n+1} − (1 − δt) c_n`.
pub fn combined_iterate(c_next: &DiscreteField, c_prev: &DiscreteField, dt: f64) -> Result<DiscreteField> {
    c_next.combine(1.0, c_prev, -(1.0 - dt))
}

/// `f^{δt}(c_{n+1}) = δt f(c_n) + f′(c_n)(c_{n+1} − c_n)`, evaluated
/// pointwise.
#[derive(Clone, Debug)]
pub struct LinearizedSource {
    c_next: DiscreteField,
    c_prev: DiscreteField,
    dt: f64,
    source: Source,
}

impl LinearizedSource {
    /// From the two iterate values at `(x, t)`.
    #[inline]
    pub fn from_values(&self, x: f64, t: f64, next: f64, prev: f64) -> f64 {
        self.dt * self.source.eval_at(x, t, prev) + self.source.derivative(prev) * (next - prev)
    }

    pub fn eval_local(&self, cell: usize, xi: f64, tau: f64) -> f64 {
        let (x, t) = self.c_next.space().mesh().cell(cell).map(xi, tau);
        self.from_values(x, t, self.c_next.value_at(cell, xi, tau), self.c_prev.value_at(cell, xi, tau))
    }

    pub fn eval(&self, x: f64, t: f64) -> Option<f64> {
        Some(self.from_values(x, t, self.c_next.evaluate(x, t)?, self.c_prev.evaluate(x, t)?))
    }
}

pub fn linearized_source(
    c_next: &DiscreteField,
    c_prev: &DiscreteField,
    dt: f64,
    spec: &ProblemSpec,
) -> Result<LinearizedSource> {
    if !c_next.same_space(c_prev) {
        return Err(Error::SpaceMismatch);
    }
    Ok(LinearizedSource {
        c_next: c_next.clone(),
        c_prev: c_prev.clone(),
        dt,
        source: spec.source.clone(),
    })
}

/// Per-cell `α_T, β_T, γ_T` and per-edge `α_e, β_e` (indexed by edge id,
/// zero where an indicator does not apply).
#[derive(Clone, Debug)]
pub struct ErrorIndicators {
    pub alpha_t: Vec<f64>,
    pub beta_t: Vec<f64>,
    pub gamma_t: Vec<f64>,
    pub alpha_e: Vec<f64>,
    pub beta_e: Vec<f64>,
    /// Edge lengths `h_e`.
    pub edge_h: Vec<f64>,
    pub h: f64,
    pub degree: usize,
    pub lambda: f64,
    pub dt: f64,
}

impl ErrorIndicators {
    pub fn sum_sq(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum()
    }
}

/// Indicators of the step `c_prev → c_next` with step length `dt`.
///
/// `α_T` measures `S(c^{δt}) − f(c^{δt})` for DG and `S(c^{δt}) − f^{δt}`
/// for the penalized method; `α_e` is the interior jump of `(ũ,ñ)c^{δt}`
/// and `β_e = ‖(ũ,ñ) c_b‖` on inflow edges.
pub fn compute_indicators(
    c_next: &DiscreteField,
    c_prev: &DiscreteField,
    dt: f64,
    spec: &ProblemSpec,
    disc: Discretization,
) -> Result<ErrorIndicators> {
    let cc = combined_iterate(c_next, c_prev, dt)?;
    let lin = linearized_source(c_next, c_prev, dt, spec)?;
    let space = c_next.space();
    let mesh = space.mesh();
    let u = &spec.velocity;
    let f = &spec.source;
    let ncells = mesh.num_cells();
    let (mut alpha_t, mut beta_t, mut gamma_t) = (vec![0.0; ncells], vec![0.0; ncells], vec![0.0; ncells]);
    for cell in 0..ncells {
        let cv = space.cell_values(cell, u);
        let loc = cc.local(cell);
        let vals = cv.interpolate(&loc);
        let stream = cv.interpolate_stream(&loc);
        let grad = cv.interpolate_gradient(&loc);
        let next = cv.interpolate(&c_next.local(cell));
        let prev = cv.interpolate(&c_prev.local(cell));
        let (mut a, mut b, mut g) = (0.0, 0.0, 0.0);
        for q in 0..cv.npoints() {
            let w = cv.w[q];
            let flin = lin.from_values(cv.x[q], cv.t[q], next[q], prev[q]);
            let fcc = f.eval_at(cv.x[q], cv.t[q], vals[q]);
            let ra = match disc {
                Discretization::Dg => stream[q] - fcc,
                Discretization::Penalized { .. } => stream[q] - flin,
            };
            a += w * ra * ra;
            b += w * (flin - fcc) * (flin - fcc);
            g += w * (grad[q].0 * grad[q].0 + grad[q].1 * grad[q].1);
        }
        alpha_t[cell] = a.sqrt();
        beta_t[cell] = b.sqrt();
        gamma_t[cell] = g.sqrt();
    }

    let nedges = mesh.edges().len();
    let edge_h: Vec<f64> = mesh.edges().iter().map(|e| e.length()).collect();
    let mut alpha_e = vec![0.0; nedges];
    for (id, j2) in cc.interior_jumps(u) {
        // interior_jumps carries h_e⁻¹
        alpha_e[id] = (j2 * edge_h[id]).max(0.0).sqrt();
    }
    let mut beta_e = vec![0.0; nedges];
    let part = space.classify(u);
    for ie in &part.inflow {
        let edge = mesh.edge(ie.edge);
        let mut acc = 0.0;
        for q in 0..part.line.len() {
            let (x, t) = edge.point(part.line.points[q]);
            let v = ie.flux[q] * boundary_value(spec, x, t);
            acc += part.line.weights[q] * edge.length() * v * v;
        }
        beta_e[ie.edge] = acc.sqrt();
    }
    Ok(ErrorIndicators {
        alpha_t,
        beta_t,
        gamma_t,
        alpha_e,
        beta_e,
        edge_h,
        h: mesh.h(),
        degree: space.degree(),
        lambda: disc.lambda(),
        dt,
    })
}

/// `(η_dg, η_pen)`:
///
/// ```text
/// η_dg  = h^k max(‖β‖, max(‖α_T‖, ‖h_e^{-1/2} α_e‖ + ‖h_e^{-1/2} β_e‖))
/// η_pen = h^k (‖α_T‖ + ‖β_T‖ + λ ‖γ_T‖)
/// ```
pub fn aggregate_bound(ind: &ErrorIndicators) -> (f64, f64) {
    let sa = ErrorIndicators::sum_sq(&ind.alpha_t).sqrt();
    let sb = ErrorIndicators::sum_sq(&ind.beta_t).sqrt();
    let sg = ErrorIndicators::sum_sq(&ind.gamma_t).sqrt();
    let weighted = |v: &[f64]| {
        v.iter()
            .zip(&ind.edge_h)
            .map(|(a, h)| a * a / h)
            .sum::<f64>()
            .sqrt()
    };
    let ae = weighted(&ind.alpha_e);
    let be = weighted(&ind.beta_e);
    let hk = ind.h.powi(ind.degree as i32);
    let eta_dg = hk * sb.max(sa.max(ae + be));
    let eta_pen = hk * (sa + sb + ind.lambda * sg);
    (eta_dg, eta_pen)
}
