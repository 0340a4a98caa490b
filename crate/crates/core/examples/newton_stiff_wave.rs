//! Damped Newton with the adaptive step rule on the stiff wave, μ = 7.
//! Pass ε as the first argument.

use std::sync::Arc;

use stils::problems::{front_position, stiff_newton};
use stils::solvers::{initial_guess, newton_adaptive_solve, NewtonConfig};
use stils::{build_mesh, build_space};

fn main() -> stils::Result<()> {
    let epsilon = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let b = stiff_newton()?;
    let mesh = Arc::new(build_mesh(b.nx, b.nt, b.spec.x_range, b.spec.t_range)?);
    let space = build_space(mesh, b.degree, b.disc.continuity())?;
    let c0 = initial_guess(&space, &b.spec)?;
    let cfg = NewtonConfig {
        epsilon,
        ..Default::default()
    };
    let (c, report) = newton_adaptive_solve(&b.spec, b.disc, &c0, &cfg)?;

    println!("ε = {epsilon}: {} iterations", report.iterations);
    println!(" n  |N_F(c_n)|   dt_n      residual");
    for (n, (nn, dt)) in report.update_norms.iter().zip(&report.dt_history).enumerate() {
        println!("{n:2}  {nn:.3e}  {dt:.4}  {:.3e}", report.residual_history[n]);
    }
    println!("final residual {:.3e}", report.final_residual().unwrap_or(f64::NAN));
    println!("front: {:?}", front_position(&c));
    Ok(())
}
