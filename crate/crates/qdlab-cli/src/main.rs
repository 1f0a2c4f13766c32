use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qdlab_cli::{run, write_report, Command, ExperimentConfig, Track};

#[derive(Parser)]
#[command(name = "qdlab", version, about = "Experiments on Diophantine exponents and decay of measures")]
struct Cli {
    /// JSON config `{"subcommand": ..., "seed": ..., "params": {...}}`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "qdlab-out")]
    out: PathBuf,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    track: Option<Track>,
    #[command(subcommand)]
    command: Option<Command>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are operational errors; exit code 2 is reserved for assertions
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let config = match (&cli.config, cli.command) {
        (Some(_), Some(_)) => {
            eprintln!("error: give either --config or a subcommand");
            return ExitCode::from(1);
        }
        (Some(path), None) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            };
            match ExperimentConfig::from_json(&text, 0) {
                Ok(mut c) => {
                    if let Some(s) = cli.seed {
                        c.seed = s;
                    }
                    if cli.track.is_some() {
                        c.track = cli.track;
                    }
                    c
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
        }
        (None, Some(command)) => ExperimentConfig { command, seed: cli.seed.unwrap_or(0), track: cli.track },
        (None, None) => {
            eprintln!("error: a subcommand or --config is required (see --help)");
            return ExitCode::from(1);
        }
    };
    match run(&config) {
        Ok(report) => {
            if let Err(e) = write_report(&report, &cli.out) {
                eprintln!("error: cannot write report: {e}");
                return ExitCode::from(1);
            }
            for w in &report.body.warnings {
                eprintln!("warning: {w}");
            }
            let status = if report.body.passed { "passed" } else { "FAILED" };
            println!("{}: {status} ({:.2} s), report in {}", config.command.name(), report.wall_clock_s, cli.out.display());
            ExitCode::from(if report.body.passed { 0 } else { 2 })
        }
        Err(qdlab::Error::Assertion { what, report }) => {
            let _ = std::fs::create_dir_all(&cli.out);
            let _ = std::fs::write(cli.out.join("counterexample.json"), &report);
            eprintln!("assertion failed: {what}");
            eprintln!("{report}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
