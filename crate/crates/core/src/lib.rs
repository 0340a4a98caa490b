//! Space-time least-squares finite elements for semi-linear conservation laws
//!
//! ```text
//! ∂c/∂t + div(u c) = f(c)   in Q = Ω × (0, T)
//! c = c_b                   on the inflow boundary ∂Q₋
//! ```
//!
//! The time variable is treated as one more coordinate, so the transport
//! operator becomes the space-time divergence `∂_t c + ∂_x(u c)` acting on a
//! function of `(x, t)`. Two discretizations are provided on rectangular
//! space-time meshes:
//!
//! * a continuous `Q_k` least-squares method with an optional gradient
//!   penalty `λ‖∇̃c‖²` ([`Discretization::Penalized`]), and
//! * a discontinuous `Q_k` method that replaces continuity with
//!   `h_e⁻¹`-weighted jump penalties ([`Discretization::Dg`]).
//!
//! The nonlinear source is handled by Picard iteration or by a damped Newton
//! method whose step length adapts to the size of the Newton update. After a
//! Newton step the [`estimators`] module produces cell and edge residual
//! indicators.
//!
//! Start with [`problems`] for ready-made benchmarks, or build a
//! [`ProblemSpec`] by hand and pass it to one of the drivers in [`solvers`].

pub mod cli;
mod error;
pub mod estimators;
pub mod forms;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod solvers;
pub mod spaces;

pub use error::{Error, Result};
pub use forms::{InflowData, ProblemSpec, Source, SparseSystem, VelocityField};
pub use mesh::{build_mesh, classify_boundary, quadrature_rule, SpaceTimeMesh};
pub use solvers::{Discretization, NewtonConfig, PicardConfig, SolverReport};
pub use spaces::{build_space, Continuity, DiscreteField, FunctionSpace, NormKind};
