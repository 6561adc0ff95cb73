use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fpk_flow::cli::{exit_code, load_config, replay, run, RunOptions, SCHEMA};

#[derive(Parser)]
#[command(
    name = "fpkflow",
    version,
    about = "Flow selection for Fokker–Planck–Kolmogorov equations"
)]
struct Cli {
    /// Print the annotated config schema with defaults and exit.
    #[arg(long)]
    print_schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a config file.
    Run {
        config: PathBuf,
        /// Exit 1 if the probe finds the problem not well-posed.
        #[arg(long)]
        expect_wellposed: bool,
        /// Override `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Artifact directory (default: runs/<config stem>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a stored selection trace and compare.
    Replay { trace: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.print_schema {
        print!("{SCHEMA}");
        return ExitCode::SUCCESS;
    }
    let code = match cli.command {
        None => {
            eprintln!("nothing to do; see --help");
            2
        }
        Some(Command::Run {
            config,
            expect_wellposed,
            seed,
            out,
        }) => {
            let out = out.unwrap_or_else(|| {
                let stem = config.file_stem().unwrap_or_default();
                PathBuf::from("runs").join(stem)
            });
            let result = load_config(&config).and_then(|cfg| {
                run(
                    &cfg,
                    &RunOptions {
                        out: out.clone(),
                        seed,
                        expect_wellposed,
                        config_path: Some(config.clone()),
                    },
                )
            });
            match result {
                Ok(outcome) => {
                    for s in &outcome.report.stages {
                        println!(
                            "{:<10} {}  {}",
                            s.stage.name(),
                            if s.passed { "pass" } else { "FAIL" },
                            s.detail
                        );
                    }
                    if outcome.exit_code != 0 {
                        eprintln!("{}", outcome.message);
                    }
                    println!("artifacts in {}", out.display());
                    outcome.exit_code
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
        Some(Command::Replay { trace }) => match replay(&trace) {
            Ok(r) if r.identical() => {
                println!("replay identical ({} steps)", r.steps);
                0
            }
            Ok(r) => {
                println!("replay diverged:");
                for d in &r.diffs {
                    println!("  {d}");
                }
                1
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
    };
    ExitCode::from(code as u8)
}
