//! Error and observed rates on the smooth linear benchmark for both
//! discretizations and degrees 1 and 2.

use stils::cli::{convergence_study, DiscKind, RunConfig};

fn main() -> stils::Result<()> {
    for disc in [DiscKind::Penalized, DiscKind::Dg] {
        for k in [1, 2] {
            let mut cfg = RunConfig::for_benchmark("linear-smooth");
            cfg.disc = Some(disc);
            cfg.degree = Some(k);
            cfg.levels = 4;
            println!("{disc:?}, k = {k}");
            for row in convergence_study(&cfg.resolve()?)? {
                let rate = |r: Option<f64>| r.map(|v| format!("{v:5.2}")).unwrap_or_else(|| "    -".into());
                println!(
                    "  {:3}x{:<3} L2 {:.3e} {}  energy {:.3e} {}",
                    row.nx,
                    row.nt,
                    row.l2_error,
                    rate(row.l2_rate),
                    row.energy_error,
                    rate(row.energy_rate)
                );
            }
        }
    }
    Ok(())
}
