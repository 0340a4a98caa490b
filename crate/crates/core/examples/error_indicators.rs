//! Cell and edge indicators along a damped Newton run and the aggregated
//! bounds η_dg, η_pen.

use std::sync::Arc;

use stils::estimators::{aggregate_bound, compute_indicators, ErrorIndicators};
use stils::problems::stiff_newton;
use stils::solvers::{initial_guess, newton_with_observer, NewtonConfig};
use stils::{build_mesh, build_space};

fn main() -> stils::Result<()> {
    let b = stiff_newton()?;
    let mesh = Arc::new(build_mesh(b.nx, b.nt, b.spec.x_range, b.spec.t_range)?);
    let space = build_space(mesh, b.degree, b.disc.continuity())?;
    let c0 = initial_guess(&space, &b.spec)?;
    let mut rows = Vec::new();
    newton_with_observer(&b.spec, b.disc, &c0, &NewtonConfig::default(), &mut |s| {
        let ind = compute_indicators(s.c_next, s.c_prev, s.dt, &b.spec, b.disc).expect("indicators");
        rows.push((s.iteration, s.dt, ind));
    })?;
    println!(" n   dt      Σα_T²      Σβ_T²      Σγ_T²      η_pen");
    for (n, dt, ind) in &rows {
        let (_, pen) = aggregate_bound(ind);
        println!(
            "{n:2}  {dt:.3}  {:.3e}  {:.3e}  {:.3e}  {pen:.3e}",
            ErrorIndicators::sum_sq(&ind.alpha_t),
            ErrorIndicators::sum_sq(&ind.beta_t),
            ErrorIndicators::sum_sq(&ind.gamma_t)
        );
    }
    Ok(())
}
