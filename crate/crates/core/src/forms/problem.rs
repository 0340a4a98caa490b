use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

type ScalarFn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type ScalarFn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Advection velocity `u(x, t)` together with its divergence `∂_x u`.
///
/// Only point samples are ever taken, so `u` may jump between cells. On a
/// cell edge the assembly samples just inside the cell it is integrating
/// over.
#[derive(Clone)]
pub struct VelocityField {
    u: ScalarFn2,
    div: ScalarFn2,
    /// Uniform bound on `|u|`, when known.
    sup: Option<f64>,
    constant: Option<f64>,
}

impl VelocityField {
    pub fn constant(value: f64) -> Self {
        Self {
            u: Arc::new(move |_, _| value),
            div: Arc::new(|_, _| 0.0),
            sup: Some(value.abs()),
            constant: Some(value),
        }
    }

    pub fn from_fn<U, D>(u: U, div: D) -> Self
    where
        U: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            u: Arc::new(u),
            div: Arc::new(div),
            sup: None,
            constant: None,
        }
    }

    pub fn with_sup(mut self, sup: f64) -> Self {
        self.sup = Some(sup);
        self
    }

    #[inline]
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        (self.u)(x, t)
    }

    #[inline]
    pub fn div(&self, x: f64, t: f64) -> f64 {
        (self.div)(x, t)
    }

    pub fn sup(&self) -> Option<f64> {
        self.sup
    }

    /// `Some(u)` when the field was built with [`VelocityField::constant`].
    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }
}

impl fmt::Debug for VelocityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(c) => write!(f, "VelocityField::constant({c})"),
            None => write!(f, "VelocityField::from_fn(..)"),
        }
    }
}

/// Reaction term `f(c)` with derivative and a Lipschitz bound valid on
/// `range`.
#[derive(Clone)]
pub struct Source {
    f: ScalarFn1,
    df: ScalarFn1,
    /// State-independent part `g(x, t)`, added to `f(c)`.
    forcing: Option<ScalarFn2>,
    pub lipschitz: f64,
    pub range: (f64, f64),
    label: String,
}

impl Source {
    pub fn new<F, D>(label: impl Into<String>, f: F, df: D, lipschitz: f64, range: (f64, f64)) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            df: Arc::new(df),
            forcing: None,
            lipschitz,
            range,
            label: label.into(),
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0, |_| 0.0, 0.0, (f64::NEG_INFINITY, f64::INFINITY))
    }

    /// `f(s) = a s + b`.
    pub fn affine(a: f64, b: f64) -> Self {
        Self::new(
            format!("affine({a}, {b})"),
            move |s| a * s + b,
            move |_| a,
            a.abs(),
            (f64::NEG_INFINITY, f64::INFINITY),
        )
    }

    /// Add a forcing term `g(x, t)`.
    pub fn with_forcing<G>(mut self, g: G) -> Self
    where
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.forcing = Some(Arc::new(g));
        self
    }

    pub fn has_forcing(&self) -> bool {
        self.forcing.is_some()
    }

    /// `f(s)` without the forcing term.
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    /// `f(s) + g(x, t)`.
    #[inline]
    pub fn eval_at(&self, x: f64, t: f64, s: f64) -> f64 {
        let v = (self.f)(s);
        match &self.forcing {
            Some(g) => v + g(x, t),
            None => v,
        }
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        (self.df)(s)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Sampled check of `|f(a) − f(b)| ≤ k_f |a − b|` on the declared range.
    /// Returns the largest observed difference quotient.
    pub fn sampled_lipschitz(&self, samples: usize) -> f64 {
        let (lo, hi) = self.range;
        let (lo, hi) = (lo.max(-1e3), hi.min(1e3));
        let pts: Vec<f64> = (0..=samples)
            .map(|i| lo + (hi - lo) * i as f64 / samples as f64)
            .collect();
        pts.windows(2)
            .map(|w| ((self.eval(w[1]) - self.eval(w[0])) / (w[1] - w[0])).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Source")
            .field("label", &self.label)
            .field("lipschitz", &self.lipschitz)
            .field("range", &self.range)
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

/// Inflow data `c_b`: `c₀(x)` on the bottom slab `t = t₀` and `c₁(x, t)` on
/// the lateral inflow boundary.
#[derive(Clone)]
pub struct InflowData {
    initial: ScalarFn1,
    lateral: ScalarFn2,
}

impl InflowData {
    pub fn new<I, L>(initial: I, lateral: L) -> Self
    where
        I: Fn(f64) -> f64 + Send + Sync + 'static,
        L: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            initial: Arc::new(initial),
            lateral: Arc::new(lateral),
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(move |_| value, move |_, _| value)
    }

    /// Same function on the whole inflow boundary.
    pub fn from_fn<G>(g: G) -> Self
    where
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let g = Arc::new(g);
        let g0 = g.clone();
        Self {
            initial: Arc::new(move |x| g0(x, 0.0)),
            lateral: g,
        }
    }

    #[inline]
    pub fn initial(&self, x: f64) -> f64 {
        (self.initial)(x)
    }

    #[inline]
    pub fn lateral(&self, x: f64, t: f64) -> f64 {
        (self.lateral)(x, t)
    }

    /// Replace the initial profile, keeping the lateral data.
    pub fn with_initial<I>(&self, initial: I) -> Self
    where
        I: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            initial: Arc::new(initial),
            lateral: self.lateral.clone(),
        }
    }
}

impl fmt::Debug for InflowData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("InflowData(..)")
    }
}

/// Everything that defines one semi-linear conservation law on a space-time
/// box.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub velocity: VelocityField,
    pub source: Source,
    pub inflow: InflowData,
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
}

impl ProblemSpec {
    pub fn new(
        velocity: VelocityField,
        source: Source,
        inflow: InflowData,
        x_range: (f64, f64),
        t_range: (f64, f64),
    ) -> Result<Self> {
        for (name, (a, b)) in [("x_range", x_range), ("t_range", t_range)] {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::InvalidArgument(format!("{name} ({a}, {b}) is empty")));
            }
        }
        Ok(Self {
            velocity,
            source,
            inflow,
            x_range,
            t_range,
        })
    }

    pub fn final_time(&self) -> f64 {
        self.t_range.1 - self.t_range.0
    }

    /// Smallest penalty `λ` for which the penalized problem has a unique
    /// solution: `2 T² |f′|² ‖ũ‖²` with `‖ũ‖² = 1 + sup|u|²`.
    pub fn uniqueness_threshold(&self) -> Option<f64> {
        let sup = self.velocity.sup()?;
        let t = self.final_time();
        let k = self.source.lipschitz;
        Some(2.0 * t * t * k * k * (1.0 + sup * sup))
    }
}
