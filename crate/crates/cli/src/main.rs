use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use glmm_cli::{mesh_cmd, run, verify, vortex_law, CliFailure, RunConfig};

/// Min-max construction of Ginzburg-Landau critical points on model
/// geometries, with energy-concentration diagnostics.
#[derive(Parser)]
#[command(name = "glmm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline described by a TOML config file.
    Run {
        /// Path to the configuration file.
        config: PathBuf,
    },
    /// Re-check the persisted invariants of a completed run directory.
    Verify {
        /// Artifact directory produced by `run`.
        dir: PathBuf,
    },
    /// Build a model mesh and write it to a file.
    ///
    /// MODEL is <name>:<parameter>, e.g. sphere:4, torus2d:32, torus3d:16.
    Mesh {
        model: String,
        out: PathBuf,
    },
    /// Integrate the planar vortex energy over a disk for each ε and fit
    /// the log law.
    VortexLaw {
        /// Comma-separated ε list, e.g. 1e-2,1e-3,1e-4.
        eps_list: String,
        /// Disk radius.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Quadrature panels per branch.
        #[arg(long, default_value_t = 64)]
        quadrature: usize,
    },
}

fn fail(e: CliFailure) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match run(&cfg) {
                Ok(dir) => {
                    println!("run complete: artifacts in {}", dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify { dir } => match verify(&dir) {
            Ok(report) => {
                print!("{}", report.render());
                if report.all_passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(3)
                }
            }
            Err(e) => fail(e),
        },
        Command::Mesh { model, out } => match mesh_cmd(&model, &out) {
            Ok(line) => {
                println!("{line}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::VortexLaw {
            eps_list,
            radius,
            quadrature,
        } => {
            let eps: Result<Vec<f64>, _> =
                eps_list.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let eps = match eps {
                Ok(v) => v,
                Err(_) => {
                    return fail(CliFailure::Validation(format!(
                        "bad epsilon list '{eps_list}'"
                    )))
                }
            };
            match vortex_law(&eps, radius, quadrature) {
                Ok((rows, slope, intercept)) => {
                    println!("# glvortexlaw 1");
                    println!("eps log_inv_eps energy");
                    for (e, v) in rows {
                        println!("{e} {} {v}", (radius / e).ln());
                    }
                    println!("# slope {slope}");
                    println!("# intercept {intercept}");
                    println!(
                        "# slope/pi {} (deviation {:.3}%)",
                        slope / std::f64::consts::PI,
                        100.0 * (slope - std::f64::consts::PI).abs() / std::f64::consts::PI
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
