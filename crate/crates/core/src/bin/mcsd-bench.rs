use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use mcsd::bench::{self, CommandOutcome};
use mcsd::verify::Level;

#[derive(Parser)]
#[command(name = "mcsd-bench", version, about = "Stiefel-manifold optimizer benchmarks and bound checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the configured methods on the weighted-PCA instance.
    PcaBench { config: PathBuf },
    /// Run RGD at each constant step size.
    RgdSweep {
        config: PathBuf,
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
        steps: Vec<f64>,
    },
    /// Check that every iterate of every method stays on the manifold.
    OrthViolation { config: PathBuf },
    /// Run the bound-verification suite.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: LevelArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::PcaBench { config } => bench::cmd_pca_bench(&config),
        Command::RgdSweep { config, steps } => bench::cmd_rgd_sweep(&config, &steps),
        Command::OrthViolation { config } => bench::cmd_orth_violation(&config),
        Command::Verify { level, seed } => {
            let level = match level {
                LevelArg::Fast => Level::Fast,
                LevelArg::Full => Level::Full,
            };
            bench::cmd_verify(level, seed)
        }
    };
    let code = match result {
        Ok(CommandOutcome { passed, message }) => {
            if passed {
                print!("{message}");
            } else {
                eprint!("{message}");
            }
            if !message.ends_with('\n') {
                println!();
            }
            if passed {
                bench::EXIT_OK
            } else {
                bench::EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            bench::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
