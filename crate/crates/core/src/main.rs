use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use starkshield::cli::{exit_code, parse_config, run, Experiment, Overrides};

/// Run one simulation experiment and write CSV results plus manifest.json.
#[derive(Debug, Parser)]
#[command(name = "starkshield", version)]
struct Args {
    /// noise-validate | ramsey | gain-sweep | spectroscopy | qpt | protection-table
    experiment: String,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set ramsey.n_trajectories=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides { sets: args.sets, out: args.out, seed: args.seed, threads: args.threads };
    let cfg =
        match Experiment::parse(&args.experiment).and_then(|e| parse_config(e, args.config.as_deref(), &overrides)) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        };
    match run(&cfg) {
        Ok(m) => {
            println!("{} finished in {:.1}s; results in {}", m.experiment, m.duration_seconds, cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
