use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use robust_bf::cvae::{load_model, Variant};
use robust_bf::harness::{self, ExperimentConfig, ExperimentReport, Solver};

#[derive(Parser)]
#[command(name = "robust-bf", version, about = "Limited-feedback robust beamforming experiments")]
struct Cli {
    /// TOML experiment config; defaults are used for missing keys.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (ROBUST_BF_OUT takes precedence).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Offline,
    Online,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Wmmse,
    Stochastic,
    Ezf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig1,
    FigOffline,
    FigOnline,
    Table1,
    FigCompare,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the channel dataset.
    GenChannels,
    /// Type I PMI/CQI for every UE and snapshot.
    GenFeedback {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train the CVAE for one scheme.
    TrainCvae {
        #[arg(long, value_enum)]
        scheme: Scheme,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Variance of AWGN added to the offline training channels.
        #[arg(long, default_value_t = 0.0)]
        noise_variance: f64,
    },
    /// Run one beamforming solver at a test snapshot.
    Beamform {
        #[arg(long, value_enum)]
        solver: SolverArg,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// CVAE model files for the stochastic solver (one shared, or one per UE).
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        /// Snapshot index; defaults to the first test snapshot.
        #[arg(long)]
        time: Option<usize>,
        /// Hand the true channels to WMMSE/EZF instead of the coarse estimates.
        #[arg(long)]
        perfect_csi: bool,
    },
    /// Regenerate the data behind a figure or table.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
    /// Convert a binary channel dataset to CSV.
    ExportCsv {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "channels.csv")]
        name: String,
    },
}

fn run(cli: Cli) -> robust_bf::Result<ExperimentReport> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    match cli.command {
        Command::GenChannels => harness::gen_channels(&cfg),
        Command::GenFeedback { dataset } => harness::gen_feedback(&cfg, dataset.as_deref()),
        Command::TrainCvae {
            scheme,
            dataset,
            noise_variance,
        } => {
            let v = match scheme {
                Scheme::Offline => Variant::Offline,
                Scheme::Online => Variant::Online,
            };
            harness::train_cvae(&cfg, v, dataset.as_deref(), noise_variance)
        }
        Command::Beamform {
            solver,
            dataset,
            models,
            time,
            perfect_csi,
        } => {
            let solver = match solver {
                SolverArg::Wmmse => Solver::Wmmse,
                SolverArg::Stochastic => Solver::Stochastic,
                SolverArg::Ezf => Solver::Ezf,
            };
            let models = models.iter().map(|p| load_model(p)).collect::<robust_bf::Result<Vec<_>>>()?;
            harness::beamform(&cfg, solver, dataset.as_deref(), &models, time, perfect_csi)
        }
        Command::Reproduce { figure } => match figure {
            Figure::Fig1 => harness::run_motivation(&cfg),
            Figure::FigOffline => harness::run_offline_scheme(&cfg),
            Figure::FigOnline => harness::run_online_scheme(&cfg),
            Figure::Table1 => harness::run_table1(&cfg),
            Figure::FigCompare => harness::run_compare(&cfg),
        },
        Command::ExportCsv { dataset, name } => harness::export_csv(&cfg, &dataset, &name),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(report) => {
            for f in &report.files {
                println!("wrote {f}");
            }
            for (k, v) in &report.scalars {
                println!("{k} = {v}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
