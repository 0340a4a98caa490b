//! Picard iteration on the stiff traveling wave with μ = 1/7 and the
//! gradient-penalized least-squares form.

use std::sync::Arc;

use stils::problems::{front_position, stiff_picard};
use stils::solvers::{initial_guess, picard_solve, PicardConfig};
use stils::{build_mesh, build_space};

fn main() -> stils::Result<()> {
    env_logger::init();
    let b = stiff_picard()?;
    let mesh = Arc::new(build_mesh(b.nx, b.nt, b.spec.x_range, b.spec.t_range)?);
    let space = build_space(mesh, b.degree, b.disc.continuity())?;
    let c0 = initial_guess(&space, &b.spec)?;
    let (c, report) = picard_solve(&b.spec, b.disc, &c0, &PicardConfig::default())?;

    println!("{} iterations in {:.2} s", report.iterations, report.wall_time);
    if let Some(cp) = report.poincare_estimate {
        println!("c_p ≈ {cp:.4}, k_f c_p ≈ {:.4}", b.spec.source.lipschitz * cp);
    }
    for (i, (inc, r)) in report.increment_history.iter().zip(&report.residual_history).enumerate() {
        println!("  {:2}: increment {inc:.3e}  residual {r:.3e}", i + 1);
    }
    println!("contraction ratios {:?}", report.contraction_ratios);
    println!("front at t = {}: {:?}", b.spec.final_time(), front_position(&c));
    for (x, v) in c.top_trace().iter().step_by(6) {
        println!("  c({x:.2}) = {v:.3}");
    }
    Ok(())
}
