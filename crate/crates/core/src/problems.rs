//! Benchmark catalog: a stiff traveling wave, a smooth linear problem with
//! known solution, and a constant state.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::forms::{Discretization, InflowData, ProblemSpec, Source, VelocityField};
use crate::spaces::{DiscreteField, ExactSolution};
use crate::{Error, Result};

/// `f(s) = −μ s (s − 1)(s − 1/2)`, Lipschitz constant `μ/2` on `[0, 1]`.
pub fn stiff_source(mu: f64) -> Result<Source> {
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("μ = {mu} must be positive")));
    }
    Ok(Source::new(
        format!("stiff(mu={mu})"),
        move |s| -mu * s * (s - 1.0) * (s - 0.5),
        move |s| -mu * (3.0 * s * s - 3.0 * s + 0.5),
        mu / 2.0,
        (0.0, 1.0),
    ))
}

/// 1 for `x ≤ 0.3`, else 0.
pub fn step_initial(x: f64) -> f64 {
    if x <= 0.3 {
        1.0
    } else {
        0.0
    }
}

/// Limit profile `ω(x − t)` of the stiff problem with step initial data.
pub fn exact_wave(x: f64, t: f64) -> f64 {
    let c = step_initial(x - t);
    if c > 0.5 {
        1.0
    } else if c == 0.5 {
        0.5
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Picard,
    Newton,
}

impl SolverKind {
    pub fn label(&self) -> &'static str {
        match self {
            SolverKind::Picard => "picard",
            SolverKind::Newton => "newton",
        }
    }
}

type PointFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A problem with its default discretization settings.
#[derive(Clone)]
pub struct Benchmark {
    pub name: String,
    pub spec: ProblemSpec,
    /// Exact or limit solution, when known.
    pub exact: Option<PointFn>,
    /// Smooth exact solution with derivatives, for error norms.
    pub smooth: Option<ExactSolution>,
    pub nx: usize,
    pub nt: usize,
    pub degree: usize,
    pub disc: Discretization,
    pub solver: SolverKind,
    /// Choices not fixed by the problem statement itself.
    pub notes: Vec<String>,
}

impl fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Benchmark")
            .field("name", &self.name)
            .field("spec", &self.spec)
            .field("nx", &self.nx)
            .field("nt", &self.nt)
            .field("degree", &self.degree)
            .field("disc", &self.disc)
            .field("solver", &self.solver)
            .finish()
    }
}

pub const BENCHMARKS: [&str; 4] = ["stiff-picard", "stiff-newton", "linear-smooth", "constant"];

/// Parameters of the stiff traveling-wave family.
#[derive(Clone, Copy, Debug)]
pub struct StiffParams {
    pub mu: f64,
    pub x_range: (f64, f64),
    pub final_time: f64,
    pub velocity: f64,
    pub lateral: f64,
}

impl Default for StiffParams {
    fn default() -> Self {
        Self {
            mu: 1.0 / 7.0,
            x_range: (0.0, 1.0),
            final_time: 0.25,
            velocity: 1.0,
            lateral: 1.0,
        }
    }
}

pub fn stiff_spec(p: StiffParams) -> Result<ProblemSpec> {
    let lateral = p.lateral;
    ProblemSpec::new(
        VelocityField::constant(p.velocity),
        stiff_source(p.mu)?,
        InflowData::new(step_initial, move |_, _| lateral),
        p.x_range,
        (0.0, p.final_time),
    )
}

fn stiff_notes(p: &StiffParams) -> Vec<String> {
    vec![
        format!("domain x in ({}, {})", p.x_range.0, p.x_range.1),
        format!("final time T = {}", p.final_time),
        format!("velocity u = {}", p.velocity),
        format!("lateral inflow c1 = {}", p.lateral),
    ]
}

/// Stiff wave driven by Picard iteration: `μ = 1/7`, `λ = 5/12`, 60×65.
pub fn stiff_picard() -> Result<Benchmark> {
    stiff_picard_with(StiffParams::default())
}

pub fn stiff_picard_with(p: StiffParams) -> Result<Benchmark> {
    Ok(Benchmark {
        name: "stiff-picard".into(),
        spec: stiff_spec(p)?,
        exact: Some(Arc::new(exact_wave)),
        smooth: None,
        nx: 60,
        nt: 65,
        degree: 1,
        disc: Discretization::Penalized { lambda: 5.0 / 12.0 },
        solver: SolverKind::Picard,
        notes: stiff_notes(&p),
    })
}

/// Stiff wave driven by damped Newton: `μ = 7`, `λ = 5/12`, 20×25.
pub fn stiff_newton() -> Result<Benchmark> {
    stiff_newton_with(StiffParams {
        mu: 7.0,
        ..Default::default()
    })
}

pub fn stiff_newton_with(p: StiffParams) -> Result<Benchmark> {
    Ok(Benchmark {
        name: "stiff-newton".into(),
        spec: stiff_spec(p)?,
        exact: Some(Arc::new(exact_wave)),
        smooth: None,
        nx: 20,
        nt: 25,
        degree: 1,
        disc: Discretization::Penalized { lambda: 5.0 / 12.0 },
        solver: SolverKind::Newton,
        notes: stiff_notes(&p),
    })
}

/// Benchmark with a prescribed smooth solution for constant velocity. The
/// forcing `g = ∂_t e + u ∂_x e` makes `e` exact; inflow data is `e`.
pub fn manufactured_linear(
    u_const: f64,
    exact: ExactSolution,
    x_range: (f64, f64),
    t_range: (f64, f64),
) -> Result<Benchmark> {
    let e = exact.clone();
    let forcing = move |x: f64, t: f64| e.dt(x, t) + u_const * e.dx(x, t);
    let zero_forcing = sampled_zero(&forcing, x_range, t_range);
    let source = if zero_forcing {
        Source::zero()
    } else {
        Source::zero().with_forcing(forcing)
    };
    let e = exact.clone();
    let spec = ProblemSpec::new(
        VelocityField::constant(u_const),
        source,
        InflowData::from_fn(move |x, t| e.value(x, t)),
        x_range,
        t_range,
    )?;
    let e = exact.clone();
    Ok(Benchmark {
        name: "manufactured".into(),
        spec,
        exact: Some(Arc::new(move |x, t| e.value(x, t))),
        smooth: Some(exact),
        nx: 8,
        nt: 8,
        degree: 1,
        disc: Discretization::Penalized { lambda: 0.0 },
        solver: SolverKind::Picard,
        notes: vec![format!("velocity u = {u_const}")],
    })
}

fn sampled_zero(g: &dyn Fn(f64, f64) -> f64, x: (f64, f64), t: (f64, f64)) -> bool {
    (0..=16).all(|i| {
        (0..=16).all(|j| {
            let xs = x.0 + (x.1 - x.0) * i as f64 / 16.0;
            let ts = t.0 + (t.1 - t.0) * j as f64 / 16.0;
            g(xs, ts).abs() < 1e-12
        })
    })
}

/// `sin(2π(x − t))` transported with unit speed on `(0,1)²`.
pub fn linear_smooth() -> Result<Benchmark> {
    let w = 2.0 * PI;
    let exact = ExactSolution::new(
        move |x, t| (w * (x - t)).sin(),
        move |x, t| -w * (w * (x - t)).cos(),
        move |x, t| w * (w * (x - t)).cos(),
    );
    let mut b = manufactured_linear(1.0, exact, (0.0, 1.0), (0.0, 1.0))?;
    b.name = "linear-smooth".into();
    b.notes.push("exact solution sin(2 pi (x - t)) on (0,1) x (0,1)".into());
    Ok(b)
}

/// `c ≡ 1` under the stiff source (`f(1) = 0`).
pub fn constant() -> Result<Benchmark> {
    constant_with(StiffParams {
        mu: 7.0,
        ..Default::default()
    })
}

/// `c ≡ 1` for any stiff parameters; `lateral` is ignored.
pub fn constant_with(p: StiffParams) -> Result<Benchmark> {
    let spec = ProblemSpec::new(
        VelocityField::constant(p.velocity),
        stiff_source(p.mu)?,
        InflowData::constant(1.0),
        p.x_range,
        (0.0, p.final_time),
    )?;
    Ok(Benchmark {
        name: "constant".into(),
        spec,
        exact: Some(Arc::new(|_, _| 1.0)),
        smooth: Some(ExactSolution::new(|_, _| 1.0, |_, _| 0.0, |_, _| 0.0)),
        nx: 8,
        nt: 8,
        degree: 1,
        disc: Discretization::Penalized { lambda: 5.0 / 12.0 },
        solver: SolverKind::Newton,
        notes: vec![format!("c = 1 with stiff source mu = {}", p.mu)],
    })
}

pub fn benchmark(name: &str) -> Result<Benchmark> {
    match name {
        "stiff-picard" => stiff_picard(),
        "stiff-newton" => stiff_newton(),
        "linear-smooth" => linear_smooth(),
        "constant" => constant(),
        other => Err(Error::InvalidArgument(format!(
            "unknown benchmark `{other}` (expected one of {})",
            BENCHMARKS.join(", ")
        ))),
    }
}

/// First `x` along the top time level where the solution drops through
/// 1/2, by linear interpolation between grid nodes.
pub fn front_position(field: &DiscreteField) -> Option<f64> {
    let trace = field.top_trace();
    trace.windows(2).find_map(|w| {
        let ((x0, c0), (x1, c1)) = (w[0], w[1]);
        if c0 >= 0.5 && c1 < 0.5 {
            Some(x0 + (c0 - 0.5) / (c0 - c1) * (x1 - x0))
        } else {
            None
        }
    })
}
