use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};

use super::config::Resolved;
use crate::estimators::{compute_indicators, ErrorIndicators};
use crate::forms::Discretization;
use crate::mesh::build_mesh;
use crate::problems::SolverKind;
use crate::solvers::{
    initial_guess, march_time_slabs, newton_with_observer, picard_solve, InnerSolver, NewtonConfig, PicardConfig,
    SolverReport,
};
use crate::spaces::{build_space, DiscreteField, NormKind};
use crate::{Error, Result};

/// Exit status for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged { .. }
        | Error::LinearNotConverged { .. }
        | Error::SingularJacobian { .. }
        | Error::EigenStagnation { .. } => 2,
        Error::Slab { source, .. } => exit_code(source),
        Error::ConfigSyntax { .. } | Error::UnknownKey(_) | Error::ConfigValue { .. } | Error::InvalidArgument(_) => 3,
        _ => 1,
    }
}

fn failed_report(e: &Error) -> Option<&SolverReport> {
    match e {
        Error::NotConverged { report, .. } => Some(report),
        Error::Slab { source, .. } => failed_report(source),
        _ => None,
    }
}

pub struct RunOutcome {
    pub field: DiscreteField,
    pub report: SolverReport,
    pub indicators: ErrorIndicators,
    pub files: Vec<PathBuf>,
}

fn picard_config(r: &Resolved) -> PicardConfig {
    PicardConfig {
        tol: r.tol,
        max_iter: r.max_iter,
        ..Default::default()
    }
}

fn newton_config(r: &Resolved) -> NewtonConfig {
    NewtonConfig {
        epsilon: r.epsilon,
        tol: r.tol,
        max_iter: r.max_iter,
        ..Default::default()
    }
}

/// Solve on an `nx × nt` mesh and compute the indicators of the last step.
pub fn solve(r: &Resolved, nx: usize, nt: usize) -> Result<(DiscreteField, SolverReport, ErrorIndicators)> {
    let spec = &r.bench.spec;
    let mesh = Arc::new(build_mesh(nx, nt, spec.x_range, spec.t_range)?);
    let space = build_space(mesh, r.degree, r.disc.continuity())?;
    if r.slabs > 1 {
        let inner = match r.solver {
            SolverKind::Picard => InnerSolver::Picard(picard_config(r)),
            SolverKind::Newton => InnerSolver::Newton(newton_config(r)),
        };
        let (c, report) = march_time_slabs(spec, r.disc, &space, r.slabs, &inner)?;
        let ind = compute_indicators(&c, &c, 1.0, spec, r.disc)?;
        return Ok((c, report, ind));
    }
    let c0 = initial_guess(&space, spec)?;
    match r.solver {
        SolverKind::Picard => {
            let (c, report) = picard_solve(spec, r.disc, &c0, &picard_config(r))?;
            let ind = compute_indicators(&c, &c, 1.0, spec, r.disc)?;
            Ok((c, report, ind))
        }
        SolverKind::Newton => {
            let mut last: Option<(DiscreteField, f64)> = None;
            let (c, report) = newton_with_observer(spec, r.disc, &c0, &newton_config(r), &mut |s| {
                last = Some((s.c_prev.clone(), s.dt));
            })?;
            let (prev, dt) = last.unwrap_or_else(|| (c.clone(), 1.0));
            let ind = compute_indicators(&c, &prev, dt, spec, r.disc)?;
            Ok((c, report, ind))
        }
    }
}

fn header(w: &mut impl Write, r: &Resolved, what: &str) -> std::io::Result<()> {
    writeln!(w, "# stils {what}")?;
    for (k, v) in r.echo() {
        writeln!(w, "# {k} = {v}")?;
    }
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    writeln!(w, "# generated unix_time = {secs}")
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<fs::File>)> {
    let p = dir.join(name);
    Ok((p.clone(), BufWriter::new(fs::File::create(p)?)))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_solution(w: &mut impl Write, c: &DiscreteField) -> std::io::Result<()> {
    writeln!(w, "x,t,c")?;
    for (x, t, v) in c.grid_values() {
        writeln!(w, "{x},{t},{v}")?;
    }
    Ok(())
}

/// One row per iteration; Newton runs get a row 0 with the initial
/// residual.
pub fn write_report(w: &mut impl Write, rep: &SolverReport) -> std::io::Result<()> {
    writeln!(w, "iter,residual,increment,dt,contraction_ratio")?;
    let newton = !rep.dt_history.is_empty() || rep.epsilon.is_some();
    let rows = rep.residual_history.len().max(rep.increment_history.len());
    for i in 0..rows {
        let (iter, inc, dt, ratio) = if newton {
            if i == 0 {
                (0, None, None, None)
            } else {
                (i, rep.increment_history.get(i - 1).copied(), rep.dt_history.get(i - 1).copied(), None)
            }
        } else {
            let ratio = if i == 0 { None } else { rep.contraction_ratios.get(i - 1).copied() };
            (i + 1, rep.increment_history.get(i).copied(), None, ratio)
        };
        writeln!(
            w,
            "{iter},{},{},{},{}",
            opt(rep.residual_history.get(i).copied()),
            opt(inc),
            opt(dt),
            opt(ratio)
        )?;
    }
    Ok(())
}

pub fn write_indicators(w: &mut impl Write, ind: &ErrorIndicators, disc: Discretization) -> std::io::Result<()> {
    writeln!(w, "id,kind,value")?;
    let cells: [(&str, &[f64]); 3] = [("alpha_T", &ind.alpha_t), ("beta_T", &ind.beta_t), ("gamma_T", &ind.gamma_t)];
    for (kind, v) in cells {
        if kind == "gamma_T" && disc == Discretization::Dg {
            continue;
        }
        for (id, x) in v.iter().enumerate() {
            writeln!(w, "{id},{kind},{x}")?;
        }
    }
    for (kind, v) in [("alpha_e", &ind.alpha_e), ("beta_e", &ind.beta_e)] {
        for (id, x) in v.iter().enumerate() {
            writeln!(w, "{id},{kind},{x}")?;
        }
    }
    Ok(())
}

/// Run one solve and write `solution.csv`, `report.csv` and
/// `indicators.csv` into `r.out`. A non-converged solve still writes its
/// report, and every file then ends in a `# FAILED` line.
pub fn run(r: &Resolved) -> Result<RunOutcome> {
    fs::create_dir_all(&r.out)?;
    info!("{} on {}x{} ({}, {})", r.bench.name, r.nx, r.nt, r.solver.label(), r.disc.label());
    match solve(r, r.nx, r.nt) {
        Ok((field, report, indicators)) => {
            for w in &report.warnings {
                warn!("{w}");
            }
            let mut files = Vec::new();
            let (p, mut w) = create(&r.out, "solution.csv")?;
            header(&mut w, r, "solution")?;
            write_solution(&mut w, &field)?;
            w.flush()?;
            files.push(p);
            let (p, mut w) = create(&r.out, "report.csv")?;
            header(&mut w, r, "report")?;
            write_report(&mut w, &report)?;
            w.flush()?;
            files.push(p);
            let (p, mut w) = create(&r.out, "indicators.csv")?;
            header(&mut w, r, "indicators")?;
            write_indicators(&mut w, &indicators, r.disc)?;
            w.flush()?;
            files.push(p);
            Ok(RunOutcome {
                field,
                report,
                indicators,
                files,
            })
        }
        Err(e) => {
            for name in ["solution", "report", "indicators"] {
                let (_, mut w) = create(&r.out, &format!("{name}.csv"))?;
                header(&mut w, r, name)?;
                if name == "report" {
                    if let Some(rep) = failed_report(&e) {
                        write_report(&mut w, rep)?;
                    }
                }
                writeln!(w, "# FAILED: {e}")?;
                w.flush()?;
            }
            Err(e)
        }
    }
}

/// Errors of one refinement level.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub nx: usize,
    pub nt: usize,
    pub h: f64,
    pub l2_error: f64,
    pub energy_error: f64,
    /// `log₂` ratio to the previous level; `None` on the first level.
    pub l2_rate: Option<f64>,
    pub energy_rate: Option<f64>,
}

/// Errors below this are treated as exact and their rates as saturated.
pub const SATURATION: f64 = 1e-10;

fn rate(prev: f64, cur: f64) -> Option<f64> {
    if prev <= SATURATION || cur <= SATURATION {
        None
    } else {
        Some((prev / cur).log2())
    }
}

/// Solve on `levels` dyadic refinements of `nx × nt` and tabulate errors
/// in L² and in the energy (penalized) or DG norm.
pub fn convergence_study(r: &Resolved) -> Result<Vec<StudyRow>> {
    let exact = r.bench.smooth.clone().ok_or_else(|| Error::ConfigValue {
        key: "benchmark".into(),
        message: format!("{} has no smooth exact solution", r.bench.name),
    })?;
    let kind = match r.disc {
        Discretization::Dg => NormKind::Dg,
        Discretization::Penalized { .. } => NormKind::Energy1u,
    };
    let mut rows: Vec<StudyRow> = Vec::new();
    for level in 0..r.levels {
        let (nx, nt) = (r.nx << level, r.nt << level);
        let (c, _, _) = solve(r, nx, nt)?;
        let l2 = c.l2_error(|x, t| exact.value(x, t));
        let en = c.energy_error(&exact, &r.bench.spec.velocity, kind)?;
        let (l2_rate, energy_rate) = match rows.last() {
            Some(p) => (rate(p.l2_error, l2), rate(p.energy_error, en)),
            None => (None, None),
        };
        info!("level {level}: {nx}x{nt} L2 {l2:.3e} energy {en:.3e}");
        rows.push(StudyRow {
            level,
            nx,
            nt,
            h: c.space().mesh().h(),
            l2_error: l2,
            energy_error: en,
            l2_rate,
            energy_rate,
        });
    }
    Ok(rows)
}

pub fn write_rates(w: &mut impl Write, rows: &[StudyRow]) -> std::io::Result<()> {
    writeln!(w, "level,nx,nt,h,l2_error,energy_error,l2_rate,energy_rate")?;
    let cell = |first: bool, r: Option<f64>| match (first, r) {
        (true, _) => String::new(),
        (false, Some(v)) => v.to_string(),
        (false, None) => "saturated".into(),
    };
    for row in rows {
        let first = row.level == 0;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            row.level,
            row.nx,
            row.nt,
            row.h,
            row.l2_error,
            row.energy_error,
            cell(first, row.l2_rate),
            cell(first, row.energy_rate)
        )?;
    }
    Ok(())
}

/// [`convergence_study`] plus `rates.csv` in `r.out`.
pub fn study(r: &Resolved) -> Result<(Vec<StudyRow>, PathBuf)> {
    fs::create_dir_all(&r.out)?;
    let rows = convergence_study(r)?;
    let (p, mut w) = create(&r.out, "rates.csv")?;
    header(&mut w, r, "convergence study")?;
    write_rates(&mut w, &rows)?;
    w.flush()?;
    Ok((rows, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::RunConfig;

    fn resolved(name: &str, dir: &Path, extra: &[(&str, &str)]) -> Resolved {
        let mut cfg = RunConfig::for_benchmark(name);
        cfg.out = dir.to_path_buf();
        for (k, v) in extra {
            cfg.set(k, v).unwrap();
        }
        cfg.resolve().unwrap()
    }

    fn body(p: &Path) -> String {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn constant_run_writes_ones() {
        let dir = tempfile::tempdir().unwrap();
        let r = resolved("constant", dir.path(), &[]);
        let out = run(&r).unwrap();
        assert_eq!(out.files.len(), 3);
        let text = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
        assert!(text.lines().any(|l| l == "# benchmark = constant"));
        let mut n = 0;
        for l in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let c: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
            assert!((c - 1.0).abs() < 1e-8);
            n += 1;
        }
        assert_eq!(n, 81);
    }

    #[test]
    fn bodies_are_deterministic() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            run(&resolved("stiff-newton", d.path(), &[("nx", "6"), ("nt", "6")])).unwrap();
        }
        for f in ["solution.csv", "report.csv", "indicators.csv"] {
            assert_eq!(body(&a.path().join(f)), body(&b.path().join(f)), "{f}");
        }
    }

    #[test]
    fn failure_keeps_partial_report() {
        let dir = tempfile::tempdir().unwrap();
        let r = resolved("stiff-newton", dir.path(), &[("nx", "6"), ("nt", "6"), ("max_iter", "1"), ("epsilon", "1e-4")]);
        let e = run(&r).err().unwrap();
        assert_eq!(exit_code(&e), 2);
        let rep = fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert!(rep.lines().last().unwrap().starts_with("# FAILED"));
        assert!(rep.lines().any(|l| l.starts_with("1,")));
    }

    #[test]
    fn exact_in_space_saturates() {
        let dir = tempfile::tempdir().unwrap();
        let r = resolved("constant", dir.path(), &[("nx", "2"), ("nt", "2"), ("levels", "2")]);
        let (rows, p) = study(&r).unwrap();
        assert!(rows.iter().all(|row| row.l2_error <= 1e-8 && row.energy_error <= 1e-8));
        assert!(rows[1].l2_rate.is_none());
        let text = fs::read_to_string(p).unwrap();
        assert!(text.lines().last().unwrap().ends_with("saturated,saturated"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::UnknownKey("x".into())), 3);
        let nc = Error::NotConverged {
            driver: "picard",
            report: Box::default(),
        };
        assert_eq!(exit_code(&Error::Slab { slab: 1, source: Box::new(nc) }), 2);
        assert_eq!(exit_code(&Error::SpaceMismatch), 1);
    }
}
