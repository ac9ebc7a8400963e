use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dwr_adapt::{run, CliError, RunConfig, Strategy, EXIT_USAGE};
use dwr_core::dwr::format_sci;

#[derive(Parser)]
#[command(name = "dwr-adapt", version, about = "Goal-oriented adaptive finite element runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one adaptive experiment.
    Run {
        /// JSON configuration; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        problem: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        tol: Option<f64>,
        /// dwr, error_balancing[:theta], fixed_fraction:f, uniform or adhoc
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        max_dofs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write level_<k>.vtk for every level.
        #[arg(long)]
        vtk: bool,
        /// Record wall time per level (makes table.csv non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// List the registered problems.
    List,
}

fn load(config: Option<PathBuf>) -> Result<RunConfig, CliError> {
    match config {
        Some(path) => RunConfig::from_json(&std::fs::read_to_string(&path)?),
        None => Ok(RunConfig::default()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match cli.command {
        Command::List => {
            for p in dwr_core::problems::registry::<f64>() {
                println!("{:<4} {}", p.name, p.description);
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, problem, tol, strategy, max_dofs, out, vtk, timing } => {
            let mut cfg = match load(config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("dwr-adapt: {e}");
                    return ExitCode::from(e.exit_code());
                }
            };
            cfg.problem = problem.unwrap_or(cfg.problem);
            cfg.tol = tol.unwrap_or(cfg.tol);
            cfg.strategy = strategy.unwrap_or(cfg.strategy);
            cfg.max_dofs = max_dofs.unwrap_or(cfg.max_dofs);
            cfg.output_dir = out.unwrap_or(cfg.output_dir);
            cfg.emit_vtk |= vtk;
            cfg.record_wall_time |= timing;
            match run(&cfg) {
                Ok(report) => {
                    for r in &report.table.rows {
                        println!(
                            "level {:>2}  dofs {:>7}  J_h {}  eta {}  I_eff {}",
                            r.level,
                            r.n_dofs,
                            format_sci(r.j_h),
                            format_sci(r.eta),
                            r.i_eff.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
                        );
                    }
                    if let Some(e) = &report.table.error {
                        eprintln!("dwr-adapt: {e}");
                    }
                    println!("stop: {:?}", report.table.stop.expect("finished runs have a stop reason"));
                    ExitCode::from(report.exit_code)
                }
                Err(e) => {
                    eprintln!("dwr-adapt: {e}");
                    ExitCode::from(e.exit_code())
                }
            }
        }
    }
}
