//! End-to-end experiments. Each `run_*` function is a pure function of the
//! config (and its master seed) at the level of the files it writes.

use std::time::Instant;

use rayon::prelude::*;

use crate::beamforming::{
    ezf, ssum_update_p, ssum_update_v, stochastic_wmmse, sum_rate, wmmse, BeamformerSet, SolverOptions, SsumState,
};
use crate::channel::{generate_channel_set, ChannelConfig};
use crate::cvae::{save_model, train_cvae, CvaeModel, TrainHistory, Variant};
use crate::feedback::{sample_codebook_channel, type2_estimate};
use crate::linalg::{complex_gaussian, CVector};
use crate::metrics::{empirical_cdf, linear_grid, median, principal_angle, write_cdf_csv, CdfCurve};
use crate::rng::{child_rng, child_seed};
use crate::{Complex64, Error, Result};

use super::config::ExperimentConfig;
use super::data::{Observation, Scenario};
use super::output::{write_report, ExperimentReport, OutputSink};

/// Where refined samples for each UE come from.
#[derive(Clone, Copy)]
pub enum Generator<'a> {
    Shared(&'a CvaeModel),
    PerUe(&'a [CvaeModel]),
}

impl<'a> Generator<'a> {
    pub fn model(&self, ue: usize) -> &'a CvaeModel {
        match *self {
            Generator::Shared(m) => m,
            Generator::PerUe(ms) => &ms[ue],
        }
    }
}

/// Trial-averaged sum-rate (nats, on the true channels) against the number
/// of channel samples. Flat baselines are repeated across the axis.
#[derive(Clone, Debug, PartialEq)]
pub struct SumRateCurves {
    pub n_samples: Vec<usize>,
    pub series: Vec<(String, Vec<f64>)>,
}

impl SumRateCurves {
    pub fn get(&self, label: &str) -> Option<&[f64]> {
        self.series.iter().find(|(l, _)| l == label).map(|(_, v)| v.as_slice())
    }

    pub fn final_value(&self, label: &str) -> Option<f64> {
        self.get(label).and_then(|v| v.last().copied())
    }

    pub fn max_value(&self, label: &str) -> Option<f64> {
        self.get(label).map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.n_samples
            .iter()
            .enumerate()
            .map(|(k, n)| {
                std::iter::once(*n as f64)
                    .chain(self.series.iter().map(|(_, v)| v[k]))
                    .collect()
            })
            .collect()
    }

    fn header(&self) -> Vec<&str> {
        std::iter::once("n_samples")
            .chain(self.series.iter().map(|(l, _)| l.as_str()))
            .collect()
    }
}

fn scaled(v: &CVector, gain: f64) -> CVector {
    v * Complex64::new(gain, 0.0)
}

/// `count` channel samples per UE scaled to the reported gain `√η`:
/// decoded CVAE samples when a generator is given, otherwise Gaussian
/// perturbations of the unit-norm coarse estimate.
pub fn channel_samples(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    obs: &[Observation],
    generator: Option<Generator<'_>>,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<CVector>>> {
    obs.iter()
        .enumerate()
        .map(|(ue, o)| {
            let gain = o.feedback.cqi.sqrt();
            let s = child_seed(seed, "ue", ue as u64);
            let samples = match generator {
                Some(g) => g.model(ue).generate_refined_samples(&o.h_hat, o.feedback.cqi, count, s)?,
                None => sample_codebook_channel(
                    &o.feedback,
                    &scenario.q,
                    &scenario.type1,
                    cfg.feedback.sample_sigma,
                    count,
                    s,
                )?,
            };
            Ok(samples.iter().map(|x| scaled(x, gain)).collect())
        })
        .collect()
}

/// Per-trial curves for every method, in the order: each generator, the
/// codebook-sample stream, WMMSE and EZF on the coarse estimates.
fn beamforming_trial(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    generators: &[(String, Generator<'_>)],
    trial: usize,
    t: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let l = scenario.n_ues();
    let n = cfg.evaluation.n_samples;
    let p = cfg.solver.power_budget;
    let opts = cfg.solver.options(l, seed);
    let obs: Vec<Observation> = (0..l).map(|ue| scenario.observe_snapshot(ue, t)).collect::<Result<_>>()?;
    let truth: Vec<CVector> = obs.iter().map(|o| o.h.clone()).collect();
    let coarse: Vec<CVector> = obs.iter().map(Observation::scaled_estimate).collect();

    let w = wmmse(&coarse, p, &opts)?;
    let wmmse_rate = sum_rate(&truth, &w.v, &opts.sigma)?;
    let ezf_rate = sum_rate(&truth, &ezf(&coarse, p)?, &opts.sigma)?;

    let run_stream = |per_ue: Vec<Vec<CVector>>| -> Result<Vec<f64>> {
        let stream = (0..n).map(|r| per_ue.iter().map(|s| s[r].clone()).collect::<Vec<_>>());
        let res = stochastic_wmmse(stream, p, &opts, Some(w.v.clone()), Some(&truth))?;
        Ok(res.trace.iter().map(|row| row.sum_rate).collect())
    };

    let mut out = Vec::with_capacity(generators.len() + 3);
    for (g_idx, (_, generator)) in generators.iter().enumerate() {
        let s = child_seed(seed, "refined-samples", (trial * generators.len() + g_idx) as u64);
        out.push(run_stream(channel_samples(cfg, scenario, &obs, Some(*generator), n, s)?)?);
    }
    let s = child_seed(seed, "codebook-samples", trial as u64);
    out.push(run_stream(channel_samples(cfg, scenario, &obs, None, n, s)?)?);
    out.push(vec![wmmse_rate; n]);
    out.push(vec![ezf_rate; n]);
    Ok(out)
}

/// Runs every beamforming method on `n_trials` test snapshots and averages
/// the curves in trial order.
pub fn evaluate_beamforming(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    generators: &[(String, Generator<'_>)],
    seed: u64,
) -> Result<SumRateCurves> {
    let times = scenario.trial_times(cfg.evaluation.n_trials);
    let per_trial: Vec<Vec<Vec<f64>>> = times
        .par_iter()
        .enumerate()
        .map(|(k, &t)| beamforming_trial(cfg, scenario, generators, k, t, seed).map_err(|e| e.context(format!("trial {k}"))))
        .collect::<Result<_>>()?;
    let mut labels: Vec<String> = generators.iter().map(|(l, _)| l.clone()).collect();
    labels.extend(["stochastic_codebook", "wmmse_coarse", "ezf_coarse"].map(String::from));
    let n = cfg.evaluation.n_samples;
    let k = per_trial.len() as f64;
    let series = labels
        .into_iter()
        .enumerate()
        .map(|(m, label)| {
            let mut acc = vec![0.0; n];
            for trial in &per_trial {
                for (a, v) in acc.iter_mut().zip(&trial[m]) {
                    *a += v;
                }
            }
            (label, acc.into_iter().map(|a| a / k).collect())
        })
        .collect();
    Ok(SumRateCurves {
        n_samples: (1..=n).collect(),
        series,
    })
}

/// Principal angles (degrees) of several estimators over the test set.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleStudy {
    pub series: Vec<(String, Vec<f64>)>,
}

impl AngleStudy {
    pub fn get(&self, label: &str) -> Option<&[f64]> {
        self.series.iter().find(|(l, _)| l == label).map(|(_, v)| v.as_slice())
    }

    pub fn median(&self, label: &str) -> Result<f64> {
        median(self.get(label).ok_or_else(|| Error::Config(format!("no series {label}")))?)
    }

    pub fn cdfs(&self, points: usize) -> Result<Vec<(String, CdfCurve)>> {
        let grid = linear_grid(0.0, 90.0, points);
        self.series
            .iter()
            .map(|(l, v)| Ok((l.clone(), empirical_cdf(v, &grid)?)))
            .collect()
    }
}

/// Angles of the coarse estimates and of one refined sample per test input
/// for each generator.
pub fn angle_study(
    test: &[Observation],
    generators: &[(String, Generator<'_>)],
    seed: u64,
) -> Result<AngleStudy> {
    let mut series = vec![(
        "coarse".to_string(),
        test.iter().map(|o| principal_angle(&o.h, &o.h_hat)).collect::<Result<Vec<_>>>()?,
    )];
    for (g_idx, (label, generator)) in generators.iter().enumerate() {
        let angles = test
            .par_iter()
            .enumerate()
            .map(|(i, o)| {
                let s = child_seed(seed, "angle-samples", (g_idx * test.len() + i) as u64);
                let model = generator.model(o.feedback.ue_index);
                let x = model.generate_refined_samples(&o.h_hat, o.feedback.cqi, 1, s)?;
                principal_angle(&o.h, &x[0])
            })
            .collect::<Result<Vec<_>>>()?;
        series.push((label.clone(), angles));
    }
    Ok(AngleStudy { series })
}

fn type2_angles(scenario: &Scenario, cfg: &ExperimentConfig, test: &[Observation]) -> Result<Vec<f64>> {
    test.par_iter()
        .map(|o| {
            let h2 = type2_estimate(&o.h, &scenario.q, &scenario.type2_basis, &cfg.feedback.type2)?;
            principal_angle(&o.h, &h2)
        })
        .collect()
}

/// Trains the offline model on (possibly noise-injected) training channels.
pub fn train_offline(cfg: &ExperimentConfig, scenario: &Scenario, noise_variance: f64) -> Result<(CvaeModel, TrainHistory)> {
    let seed = child_seed(cfg.master_seed, "cvae-offline", noise_variance.to_bits());
    let records = scenario.offline_records(noise_variance, seed)?;
    let hyper = crate::cvae::TrainHyper {
        rng_seed: seed,
        ..cfg.cvae.train.clone()
    };
    train_cvae(&records, &cfg.cvae.architecture(Variant::Offline), &hyper)
        .map_err(|e| e.context(format!("offline training (noise variance {noise_variance})")))
}

/// Trains one online model per UE on its last `size` training snapshots.
pub fn train_online(cfg: &ExperimentConfig, scenario: &Scenario, size: usize) -> Result<Vec<(CvaeModel, TrainHistory)>> {
    (0..scenario.n_ues())
        .into_par_iter()
        .map(|ue| {
            let seed = child_seed(cfg.master_seed, "cvae-online", (ue * 1_000_003 + size) as u64);
            let records = scenario.online_records(ue, size, &cfg.feedback.type2)?;
            let hyper = crate::cvae::TrainHyper {
                rng_seed: seed,
                ..cfg.cvae.train.clone()
            };
            train_cvae(&records, &cfg.cvae.architecture(Variant::Online), &hyper)
                .map_err(|e| e.context(format!("online training for UE {ue}")))
        })
        .collect()
}

fn online_size(cfg: &ExperimentConfig) -> usize {
    cfg.evaluation.online_train_size.unwrap_or(cfg.n_train_snapshots())
}

struct Run {
    name: &'static str,
    started: Instant,
    sink: OutputSink,
    report: ExperimentReport,
}

impl Run {
    fn new(cfg: &ExperimentConfig, name: &'static str) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash()?;
        let root = cfg.resolved_output_dir();
        Ok(Self {
            name,
            started: Instant::now(),
            sink: OutputSink::new(&root, &hash, cfg.master_seed)?,
            report: ExperimentReport {
                experiment: name.to_string(),
                config_hash: hash,
                master_seed: cfg.master_seed,
                ..ExperimentReport::default()
            },
        })
    }

    fn scalar(&mut self, key: impl Into<String>, value: f64) {
        self.report.scalars.insert(key.into(), value);
    }

    fn seed(&mut self, key: impl Into<String>, value: u64) {
        self.report.seeds.insert(key.into(), value);
    }

    fn write_curves(&mut self, name: &str, curves: &SumRateCurves) -> Result<()> {
        self.sink.write_table(name, &curves.header(), &curves.rows())
    }

    fn write_angles(&mut self, name: &str, study: &AngleStudy, points: usize) -> Result<()> {
        let cdfs = study.cdfs(points)?;
        let refs: Vec<(&str, &CdfCurve)> = cdfs.iter().map(|(l, c)| (l.as_str(), c)).collect();
        write_cdf_csv(self.sink.create(name)?, &refs)
    }

    fn write_history(&mut self, name: &str, history: &TrainHistory) -> Result<()> {
        let rows: Vec<Vec<f64>> = history
            .epochs
            .iter()
            .enumerate()
            .map(|(e, t)| vec![e as f64, t.loss, t.kl, t.recon])
            .collect();
        self.sink.write_table(name, &["epoch", "loss", "kl", "recon"], &rows)
    }

    fn save_model(&mut self, name: &str, model: &CvaeModel) -> Result<()> {
        save_model(&self.sink.path(name), model)?;
        self.sink.record_external(name);
        Ok(())
    }

    fn finish(mut self) -> Result<ExperimentReport> {
        self.report.files = self.sink.into_files();
        self.report.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        log::info!("{} finished in {:.1}s", self.name, self.report.wall_clock_seconds);
        Ok(self.report)
    }
}

fn finish_and_write(run: Run) -> Result<ExperimentReport> {
    let root = run.sink.root().to_path_buf();
    let report = run.finish()?;
    write_report(&root, &report)?;
    Ok(report)
}

/// Trial-averaged curves of the motivation study.
#[derive(Clone, Debug, PartialEq)]
pub struct MotivationCurves {
    pub stochastic: Vec<f64>,
    pub wmmse: f64,
}

impl MotivationCurves {
    /// First sample count from which the stochastic curve stays above the
    /// WMMSE line, provided it started at or below it.
    pub fn crossing(&self) -> Option<usize> {
        if self.stochastic.first().is_none_or(|v| *v > self.wmmse) {
            return None;
        }
        let last_below = self.stochastic.iter().rposition(|v| *v <= self.wmmse)?;
        (last_below + 1 < self.stochastic.len()).then_some(last_below + 2)
    }
}

fn motivation_channels(cfg: &ExperimentConfig) -> Result<crate::channel::ChannelDataset> {
    let m = &cfg.evaluation.motivation;
    generate_channel_set(&ChannelConfig {
        n_antennas: m.n_antennas,
        n_ues: m.n_ues,
        n_snapshots: m.n_trials,
        rng_seed: child_seed(cfg.master_seed, "motivation-channel", 0),
        ..cfg.channel.clone()
    })
}

/// One motivation trial around the ground-truth channels `centers`: the
/// stochastic curve and the WMMSE-on-sample-mean level, both measured as
/// the average rate over fresh draws from the perturbation distribution.
pub fn motivation_trial(cfg: &ExperimentConfig, centers: &[CVector], trial: usize) -> Result<(Vec<f64>, f64)> {
    let m = &cfg.evaluation.motivation;
    let n = centers[0].len();
    let l = centers.len();
    let var = m.sigma * m.sigma;
    let opts = SolverOptions {
        sigma: vec![m.sigma; l],
        ..cfg.solver.options(l, 0)
    };
    let mut rng = child_rng(cfg.master_seed, "motivation-samples", trial as u64);
    let draw = |rng: &mut crate::rng::SimRng| -> Vec<CVector> {
        centers.iter().map(|c| c + complex_gaussian(rng, n, var)).collect()
    };
    let samples: Vec<Vec<CVector>> = (0..m.n_samples).map(|_| draw(&mut rng)).collect();
    let held_out: Vec<Vec<CVector>> = (0..m.n_eval_draws).map(|_| draw(&mut rng)).collect();
    let average_rate = |v: &BeamformerSet| -> Result<f64> {
        let mut acc = 0.0;
        for h in &held_out {
            acc += sum_rate(h, v, &opts.sigma)?;
        }
        Ok(acc / held_out.len() as f64)
    };

    let inv = Complex64::new(1.0 / samples.len() as f64, 0.0);
    let sample_mean: Vec<CVector> = (0..l)
        .map(|i| samples.iter().fold(CVector::zeros(n), |acc, s| acc + &s[i]) * inv)
        .collect();
    let w = wmmse(&sample_mean, m.power_budget, &opts)?;
    let wmmse_rate = average_rate(&w.v)?;

    let mut state = SsumState::new(BeamformerSet::mrt(&samples[0], m.power_budget));
    let mut curve = Vec::with_capacity(samples.len());
    for h in &samples {
        let aux = ssum_update_p(&state.v, h, &opts)?;
        state.accumulate(&aux, h, opts.rho);
        state.v = ssum_update_v(&state, &opts)?.0;
        curve.push(average_rate(&state.v)?);
    }
    Ok((curve, wmmse_rate))
}

pub fn motivation_curves(cfg: &ExperimentConfig) -> Result<MotivationCurves> {
    let m = &cfg.evaluation.motivation;
    let data = motivation_channels(cfg)?;
    let scale = Complex64::new(m.channel_scale, 0.0);
    let trials: Vec<(Vec<f64>, f64)> = (0..m.n_trials)
        .into_par_iter()
        .map(|t| {
            let centers: Vec<CVector> = data.at_time(t).into_iter().map(|h| h * scale).collect();
            motivation_trial(cfg, &centers, t).map_err(|e| e.context(format!("motivation trial {t}")))
        })
        .collect::<Result<_>>()?;
    let k = trials.len() as f64;
    let mut stochastic = vec![0.0; m.n_samples];
    let mut wmmse_level = 0.0;
    for (curve, w) in &trials {
        for (a, v) in stochastic.iter_mut().zip(curve) {
            *a += v / k;
        }
        wmmse_level += w / k;
    }
    Ok(MotivationCurves {
        stochastic,
        wmmse: wmmse_level,
    })
}

/// Stochastic WMMSE vs WMMSE on the sample mean, against the sample count.
pub fn run_motivation(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut run = Run::new(cfg, "fig1")?;
    let curves = motivation_curves(cfg)?;
    let rows: Vec<Vec<f64>> = curves
        .stochastic
        .iter()
        .enumerate()
        .map(|(k, s)| vec![(k + 1) as f64, *s, curves.wmmse])
        .collect();
    run.sink.write_table("fig1.csv", &["n_samples", "sumrate_stochastic", "sumrate_wmmse"], &rows)?;
    run.scalar("sumrate_wmmse", curves.wmmse);
    run.scalar("sumrate_stochastic_final", *curves.stochastic.last().expect("n_samples >= 1"));
    if let Some(c) = curves.crossing() {
        run.scalar("crossing_n_samples", c as f64);
    }
    run.seed("motivation_channel", child_seed(cfg.master_seed, "motivation-channel", 0));
    finish_and_write(run)
}

fn record_angle_scalars(run: &mut Run, study: &AngleStudy, refined: &str, points: usize) -> Result<()> {
    let coarse_median = study.median("coarse")?;
    let cdfs = study.cdfs(points)?;
    let curve = |label: &str| cdfs.iter().find(|(l, _)| l == label).map(|(_, c)| c.clone());
    run.scalar("median_angle_coarse_deg", coarse_median);
    run.scalar(format!("median_angle_{refined}_deg"), study.median(refined)?);
    if let (Some(c), Some(r)) = (curve("coarse"), curve(refined)) {
        run.scalar(format!("cdf_{refined}_at_coarse_median"), r.value_at(coarse_median));
        run.scalar("cdf_coarse_at_coarse_median", c.value_at(coarse_median));
    }
    Ok(())
}

fn record_rate_scalars(run: &mut Run, curves: &SumRateCurves) {
    for (label, _) in &curves.series {
        if let (Some(f), Some(m)) = (curves.final_value(label), curves.max_value(label)) {
            run.scalar(format!("final_sumrate_{label}"), f);
            run.scalar(format!("max_sumrate_{label}"), m);
        }
    }
}

/// Offline scheme: train one CVAE on simulated ground truth, then compare
/// refined and coarse estimates and the beamformers built from them.
pub fn run_offline_scheme(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut run = Run::new(cfg, "fig_offline")?;
    let scenario = Scenario::new(cfg)?;
    let (model, history) = train_offline(cfg, &scenario, 0.0)?;
    run.save_model("cvae_offline.bgvm", &model)?;
    run.write_history("offline_training.csv", &history)?;

    let test = scenario.test_observations()?;
    let gens = [("offline".to_string(), Generator::Shared(&model))];
    let angles = angle_study(&test, &gens, child_seed(cfg.master_seed, "angles", 0))?;
    run.write_angles("offline_angle_cdf.csv", &angles, cfg.evaluation.cdf_points)?;
    record_angle_scalars(&mut run, &angles, "offline", cfg.evaluation.cdf_points)?;

    let gens = [("stochastic_cvae".to_string(), Generator::Shared(&model))];
    let curves = evaluate_beamforming(cfg, &scenario, &gens, child_seed(cfg.master_seed, "beamforming", 0))?;
    run.write_curves("offline_sumrate.csv", &curves)?;
    record_rate_scalars(&mut run, &curves);
    run.seed("channel", child_seed(cfg.master_seed, "channel", cfg.channel.rng_seed));
    run.seed("cvae_offline", child_seed(cfg.master_seed, "cvae-offline", 0f64.to_bits()));
    finish_and_write(run)
}

/// Largest trial-averaged sum-rate of stochastic WMMSE on online-CVAE samples
/// for each per-UE training size.
pub fn online_table(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<Vec<(usize, f64, f64)>> {
    cfg.evaluation
        .table_sizes
        .iter()
        .map(|&size| {
            let models: Vec<CvaeModel> = train_online(cfg, scenario, size)?.into_iter().map(|(m, _)| m).collect();
            let gens = [("stochastic_cvae".to_string(), Generator::PerUe(&models))];
            let curves = evaluate_beamforming(cfg, scenario, &gens, child_seed(cfg.master_seed, "beamforming", 0))?;
            Ok((
                size,
                curves.max_value("stochastic_cvae").expect("series exists"),
                curves.final_value("wmmse_coarse").expect("series exists"),
            ))
        })
        .collect()
}

fn write_table1(run: &mut Run, rows: &[(usize, f64, f64)]) -> Result<()> {
    let table: Vec<Vec<f64>> = rows.iter().map(|(s, m, w)| vec![*s as f64, *m, *w]).collect();
    run.sink
        .write_table("table1.csv", &["train_snapshots_per_ue", "max_sumrate_online", "sumrate_wmmse_coarse"], &table)?;
    for (s, m, _) in rows {
        run.scalar(format!("max_sumrate_online_{s}"), *m);
    }
    Ok(())
}

/// Online scheme: one CVAE per UE trained on Type II estimates.
pub fn run_online_scheme(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut run = Run::new(cfg, "fig_online")?;
    let scenario = Scenario::new(cfg)?;
    let size = online_size(cfg);
    let trained = train_online(cfg, &scenario, size)?;
    let models: Vec<CvaeModel> = trained.iter().map(|(m, _)| m.clone()).collect();
    for (ue, (m, h)) in trained.iter().enumerate() {
        run.save_model(&format!("cvae_online_ue{ue}.bgvm"), m)?;
        run.write_history(&format!("online_training_ue{ue}.csv"), h)?;
    }

    let test = scenario.test_observations()?;
    let gens = [("online".to_string(), Generator::PerUe(&models))];
    let mut angles = angle_study(&test, &gens, child_seed(cfg.master_seed, "angles", 0))?;
    angles.series.insert(1, ("type2".to_string(), type2_angles(&scenario, cfg, &test)?));
    run.write_angles("online_angle_cdf.csv", &angles, cfg.evaluation.cdf_points)?;
    record_angle_scalars(&mut run, &angles, "online", cfg.evaluation.cdf_points)?;
    run.scalar("median_angle_type2_deg", angles.median("type2")?);

    let gens = [("stochastic_cvae".to_string(), Generator::PerUe(&models))];
    let curves = evaluate_beamforming(cfg, &scenario, &gens, child_seed(cfg.master_seed, "beamforming", 0))?;
    run.write_curves("online_sumrate.csv", &curves)?;
    record_rate_scalars(&mut run, &curves);

    let rows = online_table(cfg, &scenario)?;
    write_table1(&mut run, &rows)?;
    run.seed("channel", child_seed(cfg.master_seed, "channel", cfg.channel.rng_seed));
    finish_and_write(run)
}

/// Only the training-size table of the online scheme.
pub fn run_table1(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut run = Run::new(cfg, "table1")?;
    let scenario = Scenario::new(cfg)?;
    let rows = online_table(cfg, &scenario)?;
    write_table1(&mut run, &rows)?;
    finish_and_write(run)
}

fn variance_label(v: f64) -> String {
    format!("offline_sigma_{}", crate::io::format_f64(v))
}

/// Offline schemes trained with increasing simulator mismatch against the
/// online scheme.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut run = Run::new(cfg, "fig_compare")?;
    let scenario = Scenario::new(cfg)?;
    let mut offline = Vec::new();
    for &v in &cfg.evaluation.noise_variances {
        offline.push((v, train_offline(cfg, &scenario, v)?.0));
    }
    let online: Vec<CvaeModel> = train_online(cfg, &scenario, online_size(cfg))?
        .into_iter()
        .map(|(m, _)| m)
        .collect();

    let mut gens: Vec<(String, Generator<'_>)> =
        offline.iter().map(|(v, m)| (variance_label(*v), Generator::Shared(m))).collect();
    gens.push(("online".to_string(), Generator::PerUe(&online)));

    let test = scenario.test_observations()?;
    let angles = angle_study(&test, &gens, child_seed(cfg.master_seed, "angles", 0))?;
    run.write_angles("compare_angle_cdf.csv", &angles, cfg.evaluation.cdf_points)?;
    run.scalar("median_angle_coarse_deg", angles.median("coarse")?);
    for (label, _) in &gens {
        run.scalar(format!("median_angle_{label}_deg"), angles.median(label)?);
    }

    let rate_gens: Vec<(String, Generator<'_>)> =
        gens.iter().map(|(l, g)| (format!("stochastic_{l}"), *g)).collect();
    let curves = evaluate_beamforming(cfg, &scenario, &rate_gens, child_seed(cfg.master_seed, "beamforming", 0))?;
    run.write_curves("compare_sumrate.csv", &curves)?;
    record_rate_scalars(&mut run, &curves);
    finish_and_write(run)
}
