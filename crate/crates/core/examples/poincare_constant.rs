//! Discrete Poincaré constant for u ≡ 1 under refinement, next to the
//! sharp one-dimensional value 1/k with k tan(kT) = 1.

use std::sync::Arc;

use stils::solvers::estimate_poincare;
use stils::{build_mesh, build_space, Continuity, VelocityField};

fn sharp(t: f64) -> f64 {
    let (mut lo, mut hi) = (1e-12, std::f64::consts::FRAC_PI_2 / t - 1e-12);
    for _ in 0..200 {
        let k = 0.5 * (lo + hi);
        if k * (k * t).tan() < 1.0 {
            lo = k;
        } else {
            hi = k;
        }
    }
    2.0 / (lo + hi)
}

fn main() -> stils::Result<()> {
    let u = VelocityField::constant(1.0);
    for t in [0.25, 1.0] {
        print!("T = {t}: sharp {:.4}, 2T = {}, discrete", sharp(t), 2.0 * t);
        for n in [4, 8, 16] {
            let mesh = Arc::new(build_mesh(n, n, (0.0, 1.0), (0.0, t))?);
            let space = build_space(mesh, 1, Continuity::Continuous)?;
            print!(" {n}x{n}: {:.4}", estimate_poincare(&space, &u)?);
        }
        println!();
    }
    Ok(())
}
