//! March the smooth linear benchmark slab by slab and compare with the
//! global space-time solve.

use std::sync::Arc;

use stils::problems::linear_smooth;
use stils::solvers::{initial_guess, march_time_slabs, picard_solve, InnerSolver, LinearMethod, PicardConfig};
use stils::{build_mesh, build_space, Discretization, NormKind};

fn main() -> stils::Result<()> {
    let b = linear_smooth()?;
    let exact = b.smooth.clone().expect("smooth benchmark");
    let n = 16;
    let cfg = PicardConfig {
        check_contraction: false,
        linear: Some(LinearMethod::Direct),
        ..Default::default()
    };
    for disc in [Discretization::Penalized { lambda: 0.0 }, Discretization::Dg] {
        let mesh = Arc::new(build_mesh(n, n, b.spec.x_range, b.spec.t_range)?);
        let space = build_space(mesh, 1, disc.continuity())?;
        let (global, _) = picard_solve(&b.spec, disc, &initial_guess(&space, &b.spec)?, &cfg)?;
        println!("{}: global L2 error {:.3e}", disc.label(), global.l2_error(|x, t| exact.value(x, t)));
        for slabs in [2, 4, n] {
            let (c, _) = march_time_slabs(&b.spec, disc, &space, slabs, &InnerSolver::Picard(cfg.clone()))?;
            let diff = c.combine(1.0, &global, -1.0)?.norm(NormKind::L2, &b.spec.velocity)?;
            println!(
                "  {slabs:2} slabs: L2 error {:.3e}, distance to global {diff:.3e}",
                c.l2_error(|x, t| exact.value(x, t))
            );
        }
    }
    Ok(())
}
