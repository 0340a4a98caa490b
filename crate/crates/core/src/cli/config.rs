use std::fmt::Display;
use std::path::{Path, PathBuf};

use crate::forms::Discretization;
use crate::problems::{self, Benchmark, SolverKind, StiffParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiscKind {
    Penalized,
    Dg,
}

/// Everything a batch run needs. `None` means "benchmark default".
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub benchmark: String,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub nx: Option<usize>,
    pub nt: Option<usize>,
    pub degree: Option<usize>,
    pub solver: Option<SolverKind>,
    pub disc: Option<DiscKind>,
    pub slabs: usize,
    pub tol: Option<f64>,
    pub epsilon: f64,
    pub max_iter: Option<usize>,
    pub out: PathBuf,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub final_time: Option<f64>,
    pub velocity: Option<f64>,
    pub lateral: Option<f64>,
    /// Refinement levels of a convergence study.
    pub levels: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            benchmark: String::new(),
            mu: None,
            lambda: None,
            nx: None,
            nt: None,
            degree: None,
            solver: None,
            disc: None,
            slabs: 1,
            tol: None,
            epsilon: 0.5,
            max_iter: None,
            out: PathBuf::from("out"),
            x_min: None,
            x_max: None,
            final_time: None,
            velocity: None,
            lateral: None,
            levels: 3,
        }
    }
}

pub const KEYS: [&str; 19] = [
    "benchmark",
    "mu",
    "lambda",
    "nx",
    "nt",
    "degree",
    "solver",
    "disc",
    "slabs",
    "tol",
    "epsilon",
    "max_iter",
    "out",
    "x_min",
    "x_max",
    "final_time",
    "velocity",
    "lateral",
    "levels",
];

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigValue {
        key: key.into(),
        message: message.into(),
    }
}

/// A real number or a fraction `p/q`. Integer fractions are divided once,
/// so `5/12` gives the nearest double to 5/12.
pub fn parse_number(key: &str, s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let (p, q) = (p.trim(), q.trim());
            let (num, den) = match (p.parse::<i64>(), q.parse::<i64>()) {
                (Ok(a), Ok(b)) => (a as f64, b as f64),
                _ => (
                    p.parse::<f64>().map_err(|_| bad(key, format!("`{s}` is not a number")))?,
                    q.parse::<f64>().map_err(|_| bad(key, format!("`{s}` is not a number")))?,
                ),
            };
            if den == 0.0 {
                return Err(bad(key, "zero denominator"));
            }
            num / den
        }
        None => s.parse::<f64>().map_err(|_| bad(key, format!("`{s}` is not a number")))?,
    };
    if !v.is_finite() {
        return Err(bad(key, format!("`{s}` is not finite")));
    }
    Ok(v)
}

fn positive(key: &str, s: &str) -> Result<f64> {
    let v = parse_number(key, s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(bad(key, format!("{v} must be positive")))
    }
}

fn count(key: &str, s: &str) -> Result<usize> {
    match s.trim().parse::<i64>() {
        Ok(n) if n >= 1 => Ok(n as usize),
        Ok(n) => Err(bad(key, format!("{n} must be a positive integer"))),
        Err(_) => Err(bad(key, format!("`{}` is not an integer", s.trim()))),
    }
}

impl RunConfig {
    pub fn for_benchmark(name: &str) -> Self {
        Self {
            benchmark: name.into(),
            ..Default::default()
        }
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "benchmark" => {
                if !problems::BENCHMARKS.contains(&v) {
                    return Err(bad(
                        key,
                        format!("unknown benchmark `{v}` (one of {})", problems::BENCHMARKS.join(", ")),
                    ));
                }
                self.benchmark = v.into();
            }
            "mu" => self.mu = Some(positive(key, v)?),
            "lambda" => {
                let l = parse_number(key, v)?;
                if l < 0.0 {
                    return Err(bad(key, format!("{l} must be non-negative")));
                }
                self.lambda = Some(l);
            }
            "nx" => self.nx = Some(count(key, v)?),
            "nt" => self.nt = Some(count(key, v)?),
            "degree" => self.degree = Some(count(key, v)?),
            "solver" => {
                self.solver = Some(match v {
                    "picard" => SolverKind::Picard,
                    "newton" => SolverKind::Newton,
                    _ => return Err(bad(key, format!("`{v}` is not picard or newton"))),
                })
            }
            "disc" => {
                self.disc = Some(match v {
                    "penalized" => DiscKind::Penalized,
                    "dg" => DiscKind::Dg,
                    _ => return Err(bad(key, format!("`{v}` is not penalized or dg"))),
                })
            }
            "slabs" => self.slabs = count(key, v)?,
            "tol" => self.tol = Some(positive(key, v)?),
            "epsilon" => self.epsilon = positive(key, v)?,
            "max_iter" => self.max_iter = Some(count(key, v)?),
            "out" => {
                if v.is_empty() {
                    return Err(bad(key, "empty path"));
                }
                self.out = PathBuf::from(v);
            }
            "x_min" => self.x_min = Some(parse_number(key, v)?),
            "x_max" => self.x_max = Some(parse_number(key, v)?),
            "final_time" => self.final_time = Some(positive(key, v)?),
            "velocity" => self.velocity = Some(parse_number(key, v)?),
            "lateral" => self.lateral = Some(parse_number(key, v)?),
            "levels" => self.levels = count(key, v)?,
            other => return Err(Error::UnknownKey(other.into())),
        }
        Ok(())
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line: n + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::ConfigSyntax {
                    line: n + 1,
                    message: "empty key or value".into(),
                });
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Cross-field checks that single keys cannot catch.
    pub fn validate(&self) -> Result<()> {
        if self.benchmark.is_empty() {
            return Err(bad("benchmark", "missing"));
        }
        if let (Some(a), Some(b)) = (self.x_min, self.x_max) {
            if a >= b {
                return Err(bad("x_max", format!("x_max = {b} must exceed x_min = {a}")));
            }
        }
        if self.disc == Some(DiscKind::Dg) && self.lambda.is_some_and(|l| l > 0.0) {
            return Err(bad("lambda", "the DG form has no gradient penalty"));
        }
        Ok(())
    }

    /// The benchmark with physical overrides applied.
    pub fn benchmark(&self) -> Result<Benchmark> {
        let physical = [
            ("mu", self.mu),
            ("x_min", self.x_min),
            ("x_max", self.x_max),
            ("final_time", self.final_time),
            ("velocity", self.velocity),
            ("lateral", self.lateral),
        ];
        let stiff = |mu: f64| {
            let d = StiffParams::default();
            StiffParams {
                mu: self.mu.unwrap_or(mu),
                x_range: (self.x_min.unwrap_or(d.x_range.0), self.x_max.unwrap_or(d.x_range.1)),
                final_time: self.final_time.unwrap_or(d.final_time),
                velocity: self.velocity.unwrap_or(d.velocity),
                lateral: self.lateral.unwrap_or(d.lateral),
            }
        };
        let r = match self.benchmark.as_str() {
            "stiff-picard" => problems::stiff_picard_with(stiff(1.0 / 7.0)),
            "stiff-newton" => problems::stiff_newton_with(stiff(7.0)),
            "constant" => {
                if self.lateral.is_some() {
                    return Err(bad("lateral", "the constant benchmark fixes c = 1"));
                }
                problems::constant_with(stiff(7.0))
            }
            "linear-smooth" => {
                if let Some((k, _)) = physical.iter().find(|(_, v)| v.is_some()) {
                    return Err(bad(k, "linear-smooth has a fixed problem"));
                }
                problems::linear_smooth()
            }
            other => return Err(bad("benchmark", format!("unknown benchmark `{other}`"))),
        };
        r.map_err(|e| bad("benchmark", e.to_string()))
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let bench = self.benchmark()?;
        let disc = match self.disc.unwrap_or(match bench.disc {
            Discretization::Dg => DiscKind::Dg,
            Discretization::Penalized { .. } => DiscKind::Penalized,
        }) {
            DiscKind::Dg => Discretization::Dg,
            DiscKind::Penalized => Discretization::Penalized {
                lambda: self.lambda.unwrap_or(bench.disc.lambda()),
            },
        };
        let nt = self.nt.unwrap_or(bench.nt);
        if !nt.is_multiple_of(self.slabs) {
            return Err(bad("slabs", format!("{} slabs do not divide nt = {nt}", self.slabs)));
        }
        let solver = self.solver.unwrap_or(bench.solver);
        Ok(Resolved {
            nx: self.nx.unwrap_or(bench.nx),
            nt,
            degree: self.degree.unwrap_or(bench.degree),
            disc,
            solver,
            slabs: self.slabs,
            tol: self.tol.unwrap_or(match solver {
                SolverKind::Picard => 1e-8,
                SolverKind::Newton => 1e-9,
            }),
            epsilon: self.epsilon,
            max_iter: self.max_iter.unwrap_or(match solver {
                SolverKind::Picard => 100,
                SolverKind::Newton => 50,
            }),
            out: self.out.clone(),
            levels: self.levels,
            bench,
        })
    }
}

/// Config file, then flags on top.
pub fn parse_config(path: Option<&Path>, flags: &[(&str, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = path {
        cfg.apply_text(&std::fs::read_to_string(p)?)?;
    }
    for (k, v) in flags {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// A config with all defaults filled in.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub bench: Benchmark,
    pub nx: usize,
    pub nt: usize,
    pub degree: usize,
    pub disc: Discretization,
    pub solver: SolverKind,
    pub slabs: usize,
    pub tol: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub out: PathBuf,
    pub levels: usize,
}

impl Resolved {
    /// `key = value` pairs for CSV headers.
    pub fn echo(&self) -> Vec<(String, String)> {
        let s = &self.bench.spec;
        let mut v: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, x: &dyn Display| v.push((k.into(), x.to_string()));
        put("benchmark", &self.bench.name);
        put("source", &s.source.label());
        put("x_range", &format!("{} {}", s.x_range.0, s.x_range.1));
        put("t_range", &format!("{} {}", s.t_range.0, s.t_range.1));
        put("nx", &self.nx);
        put("nt", &self.nt);
        put("degree", &self.degree);
        put("disc", &self.disc.label());
        put("solver", &self.solver.label());
        put("slabs", &self.slabs);
        put("tol", &self.tol);
        put("epsilon", &self.epsilon);
        put("max_iter", &self.max_iter);
        put("levels", &self.levels);
        for n in &self.bench.notes {
            put("note", n);
        }
        v
    }
}
