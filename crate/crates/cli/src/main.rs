use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use ris_locate::experiments::{
    load_config, oracle_report, run_experiment, to_csv_string, ExperimentSpec, FigureId, ORACLES,
};
use ris_locate::par::Execution;
use ris_locate::pipeline::{Scenario, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "ris-locate",
    version,
    about = "Positioning-based channel estimation for RIS-aided mmWave links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo sweep for one figure and write CSV.
    Run {
        /// dist-rmse, loc-rmse, mse-vs-sigma, nmse-vs-sigma, snr-vs-x or throughput-vs-x
        figure: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        /// Defaults to the `seed` key of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run trials in order on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Parse and check a scenario file.
    ValidateConfig { path: PathBuf },
    /// Print reference values from an independent oracle.
    Oracle {
        /// cml, fim, crlb or array-gain
        name: String,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            figure,
            config,
            trials,
            seed,
            out,
            sequential,
        } => {
            let figure: FigureId = figure.parse()?;
            let cfg = match &config {
                Some(path) => load_config(path).with_context(|| format!("loading {}", path.display()))?,
                None => ScenarioConfig::baseline(),
            };
            let mut spec = ExperimentSpec::new(figure);
            spec.seed = seed.unwrap_or(cfg.seed);
            if let Some(n) = trials {
                spec.trials = n;
            }
            spec.out = out;
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let table = run_experiment(&spec, &cfg, exec)?;
            let text = to_csv_string(&table)?;
            match &spec.out {
                Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
        Command::ValidateConfig { path } => {
            let cfg = load_config(&path).with_context(|| format!("loading {}", path.display()))?;
            let scenario = Scenario::new(cfg)?;
            let c = &scenario.config;
            println!("ok: {}", path.display());
            println!(
                "elements {} ({} x {})",
                c.layout.len(),
                c.layout.n_rows,
                c.layout.n_cols
            );
            println!(
                "sub-bands {} at {:?} Hz spacing around {:?} Hz",
                c.grid.count, c.grid.subband_width, c.grid.center_frequency
            );
            println!("anchor rectangle {:?} m x {:?} m", scenario.rect.a(), scenario.rect.b());
            println!("unit-set received SNR {:?} dB", scenario.rus_snr_db());
            println!("pilot slots {}", scenario.pilot_slots());
        }
        Command::Oracle { name } => {
            if !ORACLES.contains(&name.as_str()) {
                anyhow::bail!("unknown oracle `{name}`, expected one of {}", ORACLES.join(", "));
            }
            println!("{}", oracle_report(&name)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
