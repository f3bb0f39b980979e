//! Dataset generation, feedback and train/test splits.

use rayon::prelude::*;

use crate::channel::{generate_channel_set, ChannelConfig, ChannelDataset};
use crate::cvae::TrainingRecord;
use crate::feedback::{
    build_type1_codebook, build_type2_basis, build_virtual_antenna_matrix, coarse_estimate, compute_feedback,
    type2_estimate, Codebook, FeedbackRecord, VirtualAntennaMatrix,
};
use crate::linalg::{complex_gaussian, CVector};
use crate::rng::{child_rng, child_seed};
use crate::Result;

use super::config::ExperimentConfig;

/// What the BS knows about one UE at one time, next to the truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub h: CVector,
    pub feedback: FeedbackRecord,
    /// Unit-norm coarse estimate `Q a_pmi`.
    pub h_hat: CVector,
}

impl Observation {
    /// Coarse estimate scaled to the reported channel gain, `√η ĥ`.
    pub fn scaled_estimate(&self) -> CVector {
        &self.h_hat * crate::Complex64::new(self.feedback.cqi.sqrt(), 0.0)
    }
}

/// Channels plus the feedback machinery shared by every experiment.
pub struct Scenario {
    pub dataset: ChannelDataset,
    pub q: VirtualAntennaMatrix,
    pub type1: Codebook,
    pub type2_basis: Codebook,
    /// First test time index of every UE.
    pub split: usize,
}

impl Scenario {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let channel = ChannelConfig {
            rng_seed: child_seed(cfg.master_seed, "channel", cfg.channel.rng_seed),
            ..cfg.channel.clone()
        };
        let dataset = generate_channel_set(&channel)?;
        Self::from_dataset(cfg, dataset)
    }

    pub fn from_dataset(cfg: &ExperimentConfig, dataset: ChannelDataset) -> Result<Self> {
        let q = build_virtual_antenna_matrix(dataset.n_antennas(), cfg.feedback.n_ports)?;
        let type1 = build_type1_codebook(cfg.feedback.n_ports, cfg.feedback.oversampling)?;
        let type2_basis = build_type2_basis(cfg.feedback.n_ports)?;
        let split = dataset.n_snapshots() - cfg.n_test_snapshots().min(dataset.n_snapshots());
        Ok(Self {
            dataset,
            q,
            type1,
            type2_basis,
            split,
        })
    }

    pub fn n_ues(&self) -> usize {
        self.dataset.n_ues()
    }

    /// Type I feedback on an arbitrary channel.
    pub fn observe(&self, h: CVector, ue: usize, t: usize) -> Result<Observation> {
        let feedback = compute_feedback(&h, &self.q, &self.type1, ue, t)?;
        let h_hat = coarse_estimate(&feedback, &self.q, &self.type1)?;
        Ok(Observation { h, feedback, h_hat })
    }

    pub fn observe_snapshot(&self, ue: usize, t: usize) -> Result<Observation> {
        self.observe(self.dataset.get(ue, t).h.clone(), ue, t)
    }

    /// Test time indices used as beamforming trials, evenly spread over the
    /// test window.
    pub fn trial_times(&self, n_trials: usize) -> Vec<usize> {
        let n_test = self.dataset.n_snapshots() - self.split;
        (0..n_trials).map(|k| self.split + k * n_test / n_trials).collect()
    }

    /// Feedback for every test snapshot, UE-major.
    pub fn test_observations(&self) -> Result<Vec<Observation>> {
        let jobs: Vec<(usize, usize)> = (0..self.n_ues())
            .flat_map(|ue| (self.split..self.dataset.n_snapshots()).map(move |t| (ue, t)))
            .collect();
        jobs.par_iter().map(|&(ue, t)| self.observe_snapshot(ue, t)).collect()
    }

    /// Offline records over all UEs' training snapshots. With a positive
    /// `noise_variance` the channels are first corrupted by AWGN of that
    /// per-entry variance (simulator mismatch), and feedback is computed
    /// from the corrupted channels.
    pub fn offline_records(&self, noise_variance: f64, seed: u64) -> Result<Vec<TrainingRecord>> {
        let mut out = Vec::with_capacity(self.n_ues() * self.split);
        for ue in 0..self.n_ues() {
            let mut rng = child_rng(seed, "train-noise", ue as u64);
            for t in 0..self.split {
                let mut h = self.dataset.get(ue, t).h.clone();
                if noise_variance > 0.0 {
                    h += complex_gaussian(&mut rng, h.len(), noise_variance);
                }
                let obs = self.observe(h, ue, t)?;
                out.push(TrainingRecord {
                    h: obs.h,
                    h_hat: obs.h_hat,
                    eta: obs.feedback.cqi,
                });
            }
        }
        Ok(out)
    }

    /// Online records of one UE: the last `size` training snapshots with the
    /// Type II estimate standing in for the channel.
    pub fn online_records(&self, ue: usize, size: usize, params: &crate::feedback::Type2Params) -> Result<Vec<TrainingRecord>> {
        let start = self.split.saturating_sub(size);
        (start..self.split)
            .map(|t| {
                let obs = self.observe_snapshot(ue, t)?;
                let h2 = type2_estimate(&obs.h, &self.q, &self.type2_basis, params)?;
                Ok(TrainingRecord {
                    h: h2,
                    h_hat: obs.h_hat,
                    eta: obs.feedback.cqi,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.channel.n_antennas = 8;
        c.channel.n_ues = 2;
        c.channel.n_snapshots = 100;
        c.feedback.n_ports = 4;
        c.feedback.type2.k_beams = 2;
        c.evaluation.table_sizes = vec![64];
        c.evaluation.n_trials = 5;
        c.validate().unwrap();
        c
    }

    #[test]
    fn split_is_temporal_and_sized() {
        let s = Scenario::new(&cfg()).unwrap();
        assert_eq!(s.split, 90);
        assert_eq!(s.trial_times(5), vec![90, 92, 94, 96, 98]);
        let test = s.test_observations().unwrap();
        assert_eq!(test.len(), 20);
        assert!(test.iter().all(|o| o.feedback.time_index >= 90));
        assert_eq!(s.offline_records(0.0, 1).unwrap().len(), 180);
        let online = s.online_records(1, 64, &cfg().feedback.type2).unwrap();
        assert_eq!(online.len(), 64);
    }

    #[test]
    fn noise_injection_changes_only_training_data() {
        let s = Scenario::new(&cfg()).unwrap();
        let clean = s.offline_records(0.0, 1).unwrap();
        let noisy = s.offline_records(0.2, 1).unwrap();
        assert_eq!(clean[0].h, s.dataset.get(0, 0).h);
        assert_ne!(noisy[0].h, clean[0].h);
        assert_eq!(noisy, s.offline_records(0.2, 1).unwrap());
    }

    #[test]
    fn scaled_estimate_has_cqi_power() {
        let s = Scenario::new(&cfg()).unwrap();
        let o = s.observe_snapshot(0, 3).unwrap();
        assert!((o.scaled_estimate().norm_squared() - o.feedback.cqi).abs() < 1e-9 * o.feedback.cqi.max(1.0));
    }
}
