use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stils::cli::{self, RunConfig};

/// Space-time least-squares solver for ∂c/∂t + div(uc) = f(c).
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one benchmark and write solution.csv, report.csv, indicators.csv.
    #[command(allow_negative_numbers = true)]
    Run(Common),
    /// Refine a benchmark with known solution and write rates.csv.
    #[command(allow_negative_numbers = true)]
    Study {
        #[command(flatten)]
        common: Common,
        /// Number of dyadic refinement levels [default: 3]
        #[arg(long)]
        levels: Option<String>,
    },
}

/// Numeric flags accept fractions such as `5/12`. Unset flags fall back to
/// the config file, then to the benchmark defaults.
#[derive(Args)]
struct Common {
    /// stiff-picard, stiff-newton, linear-smooth or constant
    #[arg(long)]
    benchmark: Option<String>,
    /// `key = value` file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Source stiffness μ [stiff-picard 1/7, others 7]
    #[arg(long)]
    mu: Option<String>,
    /// Gradient penalty λ [5/12 for stiff benchmarks, 0 for linear-smooth]
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    nt: Option<String>,
    /// Polynomial degree k [1]
    #[arg(long)]
    degree: Option<String>,
    /// picard or newton
    #[arg(long)]
    solver: Option<String>,
    /// penalized or dg
    #[arg(long)]
    disc: Option<String>,
    /// Number of time slabs [1]
    #[arg(long)]
    slabs: Option<String>,
    /// Residual tolerance [picard 1e-8, newton 1e-9]
    #[arg(long)]
    tol: Option<String>,
    /// ε of the Newton step rule [0.5]
    #[arg(long)]
    epsilon: Option<String>,
    /// Iteration cap [picard 100, newton 50]
    #[arg(long)]
    max_iter: Option<String>,
    /// Output directory [out]
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    x_min: Option<String>,
    #[arg(long)]
    x_max: Option<String>,
    /// Final time T [1/4 for stiff benchmarks]
    #[arg(long)]
    final_time: Option<String>,
    /// Constant velocity u [1]
    #[arg(long)]
    velocity: Option<String>,
    /// Lateral inflow value c₁ [1]
    #[arg(long)]
    lateral: Option<String>,
}

impl Common {
    fn flags(self) -> (Option<PathBuf>, Vec<(&'static str, String)>) {
        let pairs = [
            ("benchmark", self.benchmark),
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("nx", self.nx),
            ("nt", self.nt),
            ("degree", self.degree),
            ("solver", self.solver),
            ("disc", self.disc),
            ("slabs", self.slabs),
            ("tol", self.tol),
            ("epsilon", self.epsilon),
            ("max_iter", self.max_iter),
            ("out", self.out),
            ("x_min", self.x_min),
            ("x_max", self.x_max),
            ("final_time", self.final_time),
            ("velocity", self.velocity),
            ("lateral", self.lateral),
        ];
        let flags = pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect();
        (self.config, flags)
    }
}

fn config(common: Common, extra: Vec<(&'static str, String)>) -> stils::Result<cli::Resolved> {
    let (path, mut flags) = common.flags();
    flags.extend(extra);
    let cfg: RunConfig = cli::parse_config(path.as_deref(), &flags)?;
    cfg.resolve()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(common) => config(common, vec![]).and_then(|r| {
            let out = cli::run(&r)?;
            println!(
                "{}: {} iterations, residual {:.3e}, {:.2} s",
                r.bench.name,
                out.report.iterations,
                out.report.final_residual().unwrap_or(f64::NAN),
                out.report.wall_time
            );
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }),
        Command::Study { common, levels } => {
            let extra = levels.map(|l| vec![("levels", l)]).unwrap_or_default();
            config(common, extra).and_then(|r| {
                let (rows, path) = cli::study(&r)?;
                for row in &rows {
                    println!(
                        "{:>4}x{:<4} L2 {:.3e} {:>6}  energy {:.3e} {:>6}",
                        row.nx,
                        row.nt,
                        row.l2_error,
                        row.l2_rate.map(|v| format!("{v:.2}")).unwrap_or_default(),
                        row.energy_error,
                        row.energy_rate.map(|v| format!("{v:.2}")).unwrap_or_default(),
                    );
                }
                println!("wrote {}", path.display());
                Ok(())
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
