use std::path::PathBuf;
use std::process::ExitCode;

use billiard_cli::{cmd_spectrum, cmd_sweep, cmd_validate, cmd_verify, error_code, load_config, Suite};
use clap::{Parser, Subcommand, ValueEnum};

/// Dirichlet eigenpairs and non-concentration checks for partially rectangular billiards.
#[derive(Parser)]
#[command(name = "billiard", version)]
struct Cli {
    /// Flat key = value config file; defaults apply without one.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (overrides jobs).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Energy window (overrides window).
    #[arg(long, global = true, num_args = 2, value_names = ["LO", "HI"])]
    window: Option<Vec<f64>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the profile against the wing conditions.
    Validate,
    /// Solve for eigenpairs in the window and update the cache.
    Spectrum,
    /// Run one verification suite.
    Verify {
        #[arg(value_enum)]
        which: Which,
    },
    /// Spectrum, bound sweeps for every eps and the resonance table.
    Sweep,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Onedim,
    Forms,
    Bounds,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let window = cli.window.as_deref().map(|w| (w[0], w[1]));
    let result =
        load_config(cli.config.as_deref(), cli.out.as_deref(), cli.jobs, window).and_then(|cfg| match cli.command {
            Command::Validate => cmd_validate(&cfg),
            Command::Spectrum => cmd_spectrum(&cfg),
            Command::Verify { which } => cmd_verify(
                &cfg,
                match which {
                    Which::Onedim => Suite::Onedim,
                    Which::Forms => Suite::Forms,
                    Which::Bounds => Suite::Bounds,
                },
            ),
            Command::Sweep => cmd_sweep(&cfg),
        });
    match result {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_code(&e))
        }
    }
}
