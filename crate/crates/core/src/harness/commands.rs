//! The individual pipeline stages behind the command-line tool. Each one
//! writes into the resolved output directory and returns a report.

use std::path::Path;
use std::time::Instant;

use crate::beamforming::{ezf, stochastic_wmmse, sum_rate, wmmse, TraceRow};
use crate::channel::ChannelDataset;
use crate::cvae::{save_model, CvaeModel, Variant};
use crate::feedback::write_feedback_csv;
use crate::linalg::CVector;
use crate::rng::child_seed;
use crate::{Error, Result};

use super::config::ExperimentConfig;
use super::data::{Observation, Scenario};
use super::experiments::{channel_samples, train_offline, train_online, Generator};
use super::output::{write_report, ExperimentReport, OutputSink};

/// Dataset file written by `gen_channels`.
pub const CHANNELS_FILE: &str = "channels.bgch";

/// Beamforming solvers reachable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Wmmse,
    Stochastic,
    Ezf,
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wmmse" => Ok(Solver::Wmmse),
            "stochastic" => Ok(Solver::Stochastic),
            "ezf" => Ok(Solver::Ezf),
            other => Err(Error::Config(format!("unknown solver {other:?}"))),
        }
    }
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Wmmse => "wmmse",
            Solver::Stochastic => "stochastic",
            Solver::Ezf => "ezf",
        }
    }
}

struct Stage {
    sink: OutputSink,
    report: ExperimentReport,
    started: Instant,
}

impl Stage {
    fn new(cfg: &ExperimentConfig, name: &str) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash()?;
        Ok(Self {
            sink: OutputSink::new(&cfg.resolved_output_dir(), &hash, cfg.master_seed)?,
            report: ExperimentReport {
                experiment: name.to_string(),
                config_hash: hash,
                master_seed: cfg.master_seed,
                ..ExperimentReport::default()
            },
            started: Instant::now(),
        })
    }

    fn finish(mut self) -> Result<ExperimentReport> {
        let root = self.sink.root().to_path_buf();
        self.report.files = self.sink.into_files();
        self.report.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        write_report(&root, &self.report)?;
        Ok(self.report)
    }
}

/// Loads a dataset from `path`, or simulates the configured one.
pub fn scenario_from(cfg: &ExperimentConfig, dataset: Option<&Path>) -> Result<Scenario> {
    match dataset {
        Some(p) => {
            let data = ChannelDataset::load(p).map_err(|e| e.context(format!("loading {}", p.display())))?;
            Scenario::from_dataset(cfg, data)
        }
        None => Scenario::new(cfg),
    }
}

pub fn gen_channels(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut stage = Stage::new(cfg, "gen_channels")?;
    let scenario = Scenario::new(cfg)?;
    scenario.dataset.save(&stage.sink.path(CHANNELS_FILE))?;
    stage.sink.record_external(CHANNELS_FILE);
    let d = &scenario.dataset;
    let mean_power = d.snapshots.iter().map(|s| s.h.norm_squared()).sum::<f64>() / (d.snapshots.len() * d.n_antennas()) as f64;
    stage.report.scalars.insert("mean_power_per_antenna".into(), mean_power);
    stage
        .report
        .seeds
        .insert("channel".into(), child_seed(cfg.master_seed, "channel", cfg.channel.rng_seed));
    stage.finish()
}

pub fn gen_feedback(cfg: &ExperimentConfig, dataset: Option<&Path>) -> Result<ExperimentReport> {
    let mut stage = Stage::new(cfg, "gen_feedback")?;
    let scenario = scenario_from(cfg, dataset)?;
    let d = &scenario.dataset;
    let records = (0..d.n_ues())
        .flat_map(|ue| (0..d.n_snapshots()).map(move |t| (ue, t)))
        .map(|(ue, t)| scenario.observe_snapshot(ue, t).map(|o| o.feedback))
        .collect::<Result<Vec<_>>>()?;
    write_feedback_csv(stage.sink.create("feedback.csv")?, &records)?;
    stage.finish()
}

/// Trains the offline model (optionally on noise-injected channels) or one
/// online model per UE, and stores them as `.bgvm` files.
pub fn train_cvae(
    cfg: &ExperimentConfig,
    scheme: Variant,
    dataset: Option<&Path>,
    noise_variance: f64,
) -> Result<ExperimentReport> {
    let mut stage = Stage::new(cfg, &format!("train_cvae_{}", variant_name(scheme)))?;
    let scenario = scenario_from(cfg, dataset)?;
    let trained = match scheme {
        Variant::Offline => vec![("cvae_offline".to_string(), train_offline(cfg, &scenario, noise_variance)?)],
        Variant::Online => {
            let size = cfg.evaluation.online_train_size.unwrap_or(cfg.n_train_snapshots());
            train_online(cfg, &scenario, size)?
                .into_iter()
                .enumerate()
                .map(|(ue, m)| (format!("cvae_online_ue{ue}"), m))
                .collect()
        }
    };
    for (name, (model, history)) in &trained {
        let file = format!("{name}.bgvm");
        save_model(&stage.sink.path(&file), model)?;
        stage.sink.record_external(&file);
        let rows: Vec<Vec<f64>> = history
            .epochs
            .iter()
            .enumerate()
            .map(|(e, t)| vec![e as f64, t.loss, t.kl, t.recon])
            .collect();
        stage
            .sink
            .write_table(&format!("{name}_training.csv"), &["epoch", "loss", "kl", "recon"], &rows)?;
        if let Some(last) = history.last() {
            stage.report.scalars.insert(format!("{name}_final_loss"), last.loss);
        }
    }
    stage.finish()
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Offline => "offline",
        Variant::Online => "online",
    }
}

/// Runs one solver at test time `t` (defaults to the first test snapshot).
/// WMMSE and EZF use the scaled coarse estimates, or the true channels with
/// `perfect_csi`. Stochastic WMMSE draws from the CVAE models when given
/// (one shared or one per UE) and from codebook samples otherwise. The
/// trace is always scored on the true channels.
pub fn beamform(
    cfg: &ExperimentConfig,
    solver: Solver,
    dataset: Option<&Path>,
    models: &[CvaeModel],
    t: Option<usize>,
    perfect_csi: bool,
) -> Result<ExperimentReport> {
    let mut stage = Stage::new(cfg, &format!("beamform_{}", solver.name()))?;
    let scenario = scenario_from(cfg, dataset)?;
    let t = t.unwrap_or(scenario.split);
    if t >= scenario.dataset.n_snapshots() {
        return Err(Error::Index {
            index: t,
            len: scenario.dataset.n_snapshots(),
        });
    }
    let l = scenario.n_ues();
    let p = cfg.solver.power_budget;
    let opts = cfg.solver.options(l, child_seed(cfg.master_seed, "beamform", t as u64));
    let obs: Vec<Observation> = (0..l).map(|ue| scenario.observe_snapshot(ue, t)).collect::<Result<_>>()?;
    let truth: Vec<CVector> = obs.iter().map(|o| o.h.clone()).collect();
    let known: Vec<CVector> = if perfect_csi {
        truth.clone()
    } else {
        obs.iter().map(Observation::scaled_estimate).collect()
    };

    let trace: Vec<TraceRow> = match solver {
        Solver::Wmmse => {
            let res = wmmse(&known, p, &opts)?;
            let rate = sum_rate(&truth, &res.v, &opts.sigma)?;
            stage.report.scalars.insert("sum_rate".into(), rate);
            res.trace
        }
        Solver::Ezf => {
            let v = ezf(&known, p)?;
            let rate = sum_rate(&truth, &v, &opts.sigma)?;
            stage.report.scalars.insert("sum_rate".into(), rate);
            vec![TraceRow {
                iteration: 1,
                sum_rate: rate,
                power: v.total_power(),
                mu: 0.0,
            }]
        }
        Solver::Stochastic => {
            let generator = match models.len() {
                0 => None,
                1 => Some(Generator::Shared(&models[0])),
                n if n == l => Some(Generator::PerUe(models)),
                n => return Err(Error::Config(format!("need 1 or {l} models, got {n}"))),
            };
            let n = cfg.evaluation.n_samples;
            let seed = child_seed(cfg.master_seed, "beamform-samples", t as u64);
            let per_ue = channel_samples(cfg, &scenario, &obs, generator, n, seed)?;
            let stream = (0..n).map(|r| per_ue.iter().map(|s| s[r].clone()).collect::<Vec<_>>());
            let init = wmmse(&known, p, &opts)?.v;
            let res = stochastic_wmmse(stream, p, &opts, Some(init), Some(&truth))?;
            let last = res.trace.last().map_or(f64::NAN, |r| r.sum_rate);
            stage.report.scalars.insert("sum_rate".into(), last);
            res.trace
        }
    };
    crate::beamforming::write_trace_csv(stage.sink.create(&format!("beamform_{}.csv", solver.name()))?, &trace)?;
    stage.finish()
}

/// Dumps a binary channel dataset as CSV, one row per antenna entry.
pub fn export_csv(cfg: &ExperimentConfig, dataset: &Path, name: &str) -> Result<ExperimentReport> {
    let mut stage = Stage::new(cfg, "export_csv")?;
    let data = ChannelDataset::load(dataset).map_err(|e| e.context(format!("loading {}", dataset.display())))?;
    data.export_csv(stage.sink.create(name)?)?;
    stage.finish()
}
