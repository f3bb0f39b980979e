//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beamforming::SolverOptions;
use crate::channel::ChannelConfig;
use crate::cvae::{Architecture, TrainHyper, Variant};
use crate::feedback::Type2Params;
use crate::{Error, Result};

/// Overrides `output_dir` when set.
pub const OUTPUT_ENV: &str = "ROBUST_BF_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedbackSettings {
    pub n_ports: usize,
    pub oversampling: usize,
    pub type2: Type2Params,
    /// Per-entry deviation of the perturbation added to the unit-norm
    /// coarse estimate when drawing codebook samples.
    pub sample_sigma: f64,
}

impl Default for FeedbackSettings {
    fn default() -> Self {
        Self {
            n_ports: 8,
            oversampling: 4,
            type2: Type2Params::default(),
            sample_sigma: 0.1,
        }
    }
}

impl FeedbackSettings {
    pub fn codebook_size(&self) -> usize {
        self.n_ports * self.oversampling
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub power_budget: f64,
    /// Receiver noise standard deviation, shared by all UEs.
    pub noise_sigma: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub power_tol: f64,
    pub rate_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            power_budget: 1.0,
            noise_sigma: 1.0,
            rho: d.rho,
            max_iters: d.max_iters,
            power_tol: d.power_tol,
            rate_tol: d.rate_tol,
        }
    }
}

impl SolverSettings {
    pub fn options(&self, n_ues: usize, rng_seed: u64) -> SolverOptions {
        SolverOptions {
            rho: self.rho,
            max_iters: self.max_iters,
            power_tol: self.power_tol,
            rate_tol: self.rate_tol,
            sigma: vec![self.noise_sigma; n_ues],
            rng_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvaeSettings {
    /// Scheme used by `train-cvae` when none is given on the command line.
    pub variant: Variant,
    pub offline_width: Option<usize>,
    pub online_width: Option<usize>,
    pub latent_dim: usize,
    pub train: TrainHyper,
}

impl Default for CvaeSettings {
    fn default() -> Self {
        Self {
            variant: Variant::Offline,
            offline_width: None,
            online_width: None,
            latent_dim: 2,
            train: TrainHyper::default(),
        }
    }
}

impl CvaeSettings {
    pub fn architecture(&self, variant: Variant) -> Architecture {
        Architecture {
            variant,
            hidden_width: match variant {
                Variant::Offline => self.offline_width,
                Variant::Online => self.online_width,
            },
            latent_dim: self.latent_dim,
        }
    }
}

/// The synthetic Gaussian-perturbation study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotivationSettings {
    pub n_antennas: usize,
    pub n_ues: usize,
    pub n_trials: usize,
    pub n_samples: usize,
    /// Per-entry deviation of the perturbation around each true channel;
    /// also the receiver noise deviation.
    pub sigma: f64,
    /// Amplitude applied to the simulated (unit average power) channels.
    pub channel_scale: f64,
    pub power_budget: f64,
    /// Fresh draws used to estimate the average rate of each beamformer.
    pub n_eval_draws: usize,
}

impl Default for MotivationSettings {
    fn default() -> Self {
        Self {
            n_antennas: 8,
            n_ues: 4,
            n_trials: 100,
            n_samples: 100,
            sigma: 0.1,
            channel_scale: 0.1,
            power_budget: 10.0,
            n_eval_draws: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSettings {
    /// Test snapshots (all UEs at one time index) used for beamforming.
    pub n_trials: usize,
    /// Channel samples fed to stochastic WMMSE per trial.
    pub n_samples: usize,
    /// Fraction of each UE's time series held out (taken from the end).
    pub test_fraction: f64,
    /// Variances of the AWGN added to offline training channels.
    pub noise_variances: Vec<f64>,
    /// Per-UE online training-set sizes for the table.
    pub table_sizes: Vec<usize>,
    /// Per-UE online training-set size of the main online run. `None` uses
    /// the full training portion.
    pub online_train_size: Option<usize>,
    /// Number of points of the angle grid on [0°, 90°].
    pub cdf_points: usize,
    pub motivation: MotivationSettings,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            n_trials: 20,
            n_samples: 100,
            test_fraction: 0.1,
            noise_variances: vec![0.0, 0.2, 0.4],
            table_sizes: vec![100, 500, 1000],
            online_train_size: None,
            cdf_points: 181,
            motivation: MotivationSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub channel: ChannelConfig,
    pub feedback: FeedbackSettings,
    pub solver: SolverSettings,
    pub cvae: CvaeSettings,
    pub evaluation: EvaluationSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 2024,
            output_dir: PathBuf::from("out"),
            channel: ChannelConfig::desk(),
            feedback: FeedbackSettings::default(),
            solver: SolverSettings::default(),
            cvae: CvaeSettings::default(),
            evaluation: EvaluationSettings::default(),
        }
    }
}

impl ExperimentConfig {
    /// The full-size setup: 32 antennas, 10 UEs, 10 000 snapshots each.
    pub fn full_scale() -> Self {
        Self {
            channel: ChannelConfig::full(),
            ..Self::default()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| e.context(format!("in {}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        let fb = &self.feedback;
        if fb.n_ports == 0 || fb.n_ports > self.channel.n_antennas || fb.oversampling == 0 {
            return Err(Error::Config(format!(
                "need 1 <= n_ports <= n_antennas and oversampling >= 1, got {} ports, {} antennas, oversampling {}",
                fb.n_ports, self.channel.n_antennas, fb.oversampling
            )));
        }
        if fb.type2.k_beams == 0 || fb.type2.k_beams > fb.n_ports {
            return Err(Error::Config("type2.k_beams must lie in 1..=n_ports".into()));
        }
        if !(fb.sample_sigma >= 0.0) {
            return Err(Error::Config("sample_sigma must be nonnegative".into()));
        }
        let s = &self.solver;
        if !(s.power_budget > 0.0) || !(s.noise_sigma > 0.0) {
            return Err(Error::Config("power_budget and noise_sigma must be positive".into()));
        }
        s.options(1, 0).validate(1)?;
        self.cvae.train.validate()?;
        if self.cvae.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be positive".into()));
        }
        let e = &self.evaluation;
        if !(e.test_fraction > 0.0 && e.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
        }
        let n_test = self.n_test_snapshots();
        if n_test == 0 || n_test == self.channel.n_snapshots {
            return Err(Error::Config("split leaves an empty train or test set".into()));
        }
        if e.n_trials == 0 || e.n_trials > n_test {
            return Err(Error::Config(format!("n_trials must lie in 1..={n_test}")));
        }
        if e.n_samples == 0 || e.cdf_points < 2 {
            return Err(Error::Config("n_samples >= 1 and cdf_points >= 2 required".into()));
        }
        if e.noise_variances.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("noise variances must be nonnegative".into()));
        }
        let n_train = self.channel.n_snapshots - n_test;
        for &size in e.table_sizes.iter().chain(e.online_train_size.iter()) {
            if size < self.cvae.train.batch_size || size > n_train {
                return Err(Error::Config(format!(
                    "online training size {size} must lie in {}..={n_train}",
                    self.cvae.train.batch_size
                )));
            }
        }
        let m = &e.motivation;
        if m.n_antennas == 0 || m.n_ues == 0 || m.n_trials == 0 || m.n_samples == 0 || m.n_eval_draws == 0 {
            return Err(Error::Config("motivation sizes must be positive".into()));
        }
        if !(m.sigma >= 0.0) || !(m.channel_scale > 0.0) || !(m.power_budget > 0.0) {
            return Err(Error::Config("motivation sigma/scale/power out of range".into()));
        }
        Ok(())
    }

    pub fn n_test_snapshots(&self) -> usize {
        ((self.channel.n_snapshots as f64) * self.evaluation.test_fraction).round() as usize
    }

    pub fn n_train_snapshots(&self) -> usize {
        self.channel.n_snapshots - self.n_test_snapshots()
    }

    /// Hex prefix of the SHA-256 of the canonical TOML form. The output
    /// directory is not part of the experiment and is left out.
    pub fn hash(&self) -> Result<String> {
        let canonical = Self {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let digest = Sha256::digest(canonical.to_toml_string()?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }

    /// `output_dir`, unless the environment override is set.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        ExperimentConfig::full_scale().validate().unwrap();
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "master_seed = 9\n[channel]\nn_ues = 3\n[cvae.train]\nepochs = 2\n[evaluation.motivation]\nn_trials = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.channel.n_ues, 3);
        assert_eq!(cfg.channel.n_antennas, 16);
        assert_eq!(cfg.cvae.train.epochs, 2);
        assert_eq!(cfg.cvae.train.batch_size, 64);
        assert_eq!(cfg.evaluation.motivation.n_trials, 5);
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.master_seed += 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 16);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let bad = [
            "[feedback]\nn_ports = 0\n",
            "[solver]\nnoise_sigma = 0.0\n",
            "[evaluation]\ntest_fraction = 1.5\n",
            "[evaluation]\ntable_sizes = [10]\n",
            "[cvae.train]\nbatch_size = 0\n",
            "unknown_field = [",
        ];
        for text in bad {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
    }
}
