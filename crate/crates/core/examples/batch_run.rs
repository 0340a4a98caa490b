//! Drive the batch runner from a config text and list the CSV artifacts.

use stils::cli::{run, RunConfig};

const CONFIG: &str = "
# stiff wave with Newton on a coarse mesh
benchmark = stiff-newton
nx = 10
nt = 12
lambda = 5/12
epsilon = 1/2
";

fn main() -> stils::Result<()> {
    let dir = std::env::temp_dir().join("stils-batch-run");
    let mut cfg = RunConfig::default();
    cfg.apply_text(CONFIG)?;
    cfg.out = dir.clone();
    let out = run(&cfg.resolve()?)?;
    println!("{} iterations, converged = {}", out.report.iterations, out.report.converged);
    for f in &out.files {
        let text = std::fs::read_to_string(f)?;
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        println!("{}: {} rows, columns `{}`", f.display(), body.len() - 1, body[0]);
    }
    Ok(())
}
