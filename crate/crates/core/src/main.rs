use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ncrelay::experiments::{csv_string, emit_csv, gnuplot_script, run_experiment, ExperimentConfig, Scenario};

#[derive(Parser)]
#[command(name = "ncrelay", version, about = "Monte-Carlo experiments for network-coded AF relay chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV table.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: Option<String>,
        /// Comma-separated SNR values in dB.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        snr: Option<Vec<f64>>,
        /// Comma-separated pilot correlations.
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of hop pairs N.
        #[arg(long)]
        n_hops: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Output CSV; stdout when neither this nor `out_path` is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a gnuplot script next to the CSV.
        #[arg(long)]
        emit_gnuplot: bool,
    },
    /// Print the available scenarios.
    ListScenarios,
    /// Parse and check a config file.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> ncrelay::Result<()> {
    match cli.command {
        Command::ListScenarios => {
            for sc in Scenario::ALL {
                println!("{:<18} {}", sc.name(), sc.description());
            }
        }
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            println!(
                "ok: scenario {}, {} grid point(s), {} trials",
                cfg.scenario,
                cfg.snr_db.len() * cfg.rho.len(),
                cfg.trials
            );
        }
        Command::Run { config, scenario, snr, rho, trials, seed, n_hops, workers, out, emit_gnuplot } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = scenario {
                cfg.scenario = s.parse()?;
            }
            if let Some(v) = snr {
                cfg.snr_db = v;
            }
            if let Some(v) = rho {
                cfg.rho = v;
            }
            if let Some(v) = trials {
                cfg.trials = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = n_hops {
                cfg.n_hops = v;
            }
            if let Some(v) = workers {
                cfg.workers = v;
            }
            if out.is_some() {
                cfg.out_path = out;
            }
            cfg.validate()?;
            let table = run_experiment(&cfg)?;
            match &cfg.out_path {
                Some(path) => {
                    emit_csv(&table, path)?;
                    if emit_gnuplot {
                        std::fs::write(path.with_extension("gp"), gnuplot_script(&table, path))?;
                    }
                }
                None => {
                    if emit_gnuplot {
                        return Err(ncrelay::Error::Config("--emit-gnuplot needs an output path".into()));
                    }
                    print!("{}", csv_string(&table));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
