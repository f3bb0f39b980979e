//! Clustered geometric channel model.
//!
//! Each UE sees `n_paths` plane waves arriving from angles drawn once around
//! a per-UE mean angle. Every path gain is an independent unit-power Jakes
//! process realised as a sum of sinusoids, so snapshots of one UE stay in a
//! low-dimensional subspace while decorrelating over time at the configured
//! normalized Doppler rate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::CVector;
use crate::rng::{child_seed, rng_from_seed, SimRng};
use crate::{Error, Result};

/// Sinusoids per Jakes path-gain process.
pub const SINUSOIDS_PER_PATH: usize = 32;

/// Half-width of the uniform jitter applied to the evenly spaced UE mean angles.
pub const MEAN_ANGLE_JITTER_DEG: f64 = 2.0;

const MEAN_ANGLE_RANGE_DEG: f64 = 60.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub n_antennas: usize,
    pub n_ues: usize,
    pub n_snapshots: usize,
    pub n_paths: usize,
    pub angle_spread_deg: f64,
    /// Doppler frequency times sampling interval.
    pub normalized_doppler: f64,
    pub rng_seed: u64,
}

impl Default for ChannelConfig {
    /// Desk-scale scenario: 16 antennas, 4 UEs, 5556 snapshots each.
    fn default() -> Self {
        Self {
            n_antennas: 16,
            n_ues: 4,
            n_snapshots: 5_556,
            n_paths: 8,
            angle_spread_deg: 10.0,
            normalized_doppler: 0.278,
            rng_seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn desk() -> Self {
        Self::default()
    }

    /// Full-size scenario: 32 antennas, 10 UEs, 10000 snapshots each.
    pub fn full() -> Self {
        Self {
            n_antennas: 32,
            n_ues: 10,
            n_snapshots: 10_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 || self.n_ues == 0 || self.n_paths == 0 || self.n_snapshots == 0 {
            return Err(Error::Config(
                "n_antennas, n_ues, n_paths and n_snapshots must be positive".into(),
            ));
        }
        if !(0.0..=0.5).contains(&self.normalized_doppler) {
            return Err(Error::Config(format!(
                "normalized_doppler {} outside [0, 0.5]",
                self.normalized_doppler
            )));
        }
        if !(self.angle_spread_deg >= 0.0 && self.angle_spread_deg <= 180.0) {
            return Err(Error::Config(format!(
                "angle_spread_deg {} outside [0, 180]",
                self.angle_spread_deg
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSnapshot {
    pub ue_index: usize,
    pub time_index: usize,
    pub h: CVector,
}

/// Snapshots stored UE-major then time-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDataset {
    pub config: ChannelConfig,
    pub snapshots: Vec<ChannelSnapshot>,
}

impl ChannelDataset {
    pub fn n_antennas(&self) -> usize {
        self.config.n_antennas
    }

    pub fn n_ues(&self) -> usize {
        self.config.n_ues
    }

    pub fn n_snapshots(&self) -> usize {
        self.config.n_snapshots
    }

    pub fn get(&self, ue: usize, t: usize) -> &ChannelSnapshot {
        &self.snapshots[ue * self.config.n_snapshots + t]
    }

    pub fn ue_series(&self, ue: usize) -> &[ChannelSnapshot] {
        let t = self.config.n_snapshots;
        &self.snapshots[ue * t..(ue + 1) * t]
    }

    /// All UE channels at time `t`, ordered by UE.
    pub fn at_time(&self, t: usize) -> Vec<CVector> {
        (0..self.n_ues()).map(|ue| self.get(ue, t).h.clone()).collect()
    }
}

/// Uniform linear array response with half-wavelength spacing, unit norm.
pub fn steering_vector(angle_deg: f64, n_antennas: usize) -> Result<CVector> {
    if n_antennas == 0 {
        return Err(Error::Domain("steering vector needs at least one antenna".into()));
    }
    if !(-90.0..=90.0).contains(&angle_deg) {
        return Err(Error::Domain(format!("angle {angle_deg} deg outside [-90, 90]")));
    }
    let s = angle_deg.to_radians().sin();
    let scale = 1.0 / (n_antennas as f64).sqrt();
    Ok(CVector::from_fn(n_antennas, |k, _| {
        Complex64::from_polar(scale, PI * k as f64 * s)
    }))
}

/// Unit-power fading process with autocorrelation close to `J0(2π f_d τ)`.
///
/// Arrival angles of the sinusoids are equally spaced on the circle with a
/// random common rotation, phases are i.i.d. uniform.
#[derive(Clone, Debug, PartialEq)]
pub struct JakesProcess {
    angular_freqs: Vec<f64>,
    phases: Vec<f64>,
}

impl JakesProcess {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, normalized_doppler: f64) -> Self {
        let n = SINUSOIDS_PER_PATH;
        let rotation: f64 = rng.random::<f64>() * 2.0 * PI;
        let angular_freqs = (0..n)
            .map(|s| {
                let alpha = (2.0 * PI * s as f64 + rotation) / n as f64;
                2.0 * PI * normalized_doppler * alpha.cos()
            })
            .collect();
        let phases = (0..n).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        Self {
            angular_freqs,
            phases,
        }
    }

    pub fn sample(&self, t: f64) -> Complex64 {
        let scale = 1.0 / (self.angular_freqs.len() as f64).sqrt();
        self.angular_freqs
            .iter()
            .zip(&self.phases)
            .map(|(w, p)| Complex64::from_polar(scale, w * t + p))
            .sum()
    }
}

/// The frozen geometry and fading processes of one UE.
#[derive(Clone, Debug)]
pub struct UeChannelModel {
    pub mean_angle_deg: f64,
    pub path_angles_deg: Vec<f64>,
    pub gains: Vec<JakesProcess>,
    steering: Vec<CVector>,
    scale: f64,
}

impl UeChannelModel {
    pub fn new(config: &ChannelConfig, ue: usize) -> Result<Self> {
        config.validate()?;
        let mut rng: SimRng = rng_from_seed(child_seed(config.rng_seed, "channel-ue", ue as u64));

        let base = if config.n_ues == 1 {
            0.0
        } else {
            -MEAN_ANGLE_RANGE_DEG
                + 2.0 * MEAN_ANGLE_RANGE_DEG * ue as f64 / (config.n_ues - 1) as f64
        };
        let jitter = (rng.random::<f64>() - 0.5) * 2.0 * MEAN_ANGLE_JITTER_DEG;
        let mean_angle_deg = base + jitter;

        let path_angles_deg: Vec<f64> = (0..config.n_paths)
            .map(|_| {
                let offset = (rng.random::<f64>() - 0.5) * config.angle_spread_deg;
                (mean_angle_deg + offset).clamp(-90.0, 90.0)
            })
            .collect();
        let gains = (0..config.n_paths)
            .map(|_| JakesProcess::new(&mut rng, config.normalized_doppler))
            .collect();
        let steering = path_angles_deg
            .iter()
            .map(|&a| steering_vector(a, config.n_antennas))
            .collect::<Result<Vec<_>>>()?;
        let scale = (config.n_antennas as f64 / config.n_paths as f64).sqrt();

        Ok(Self {
            mean_angle_deg,
            path_angles_deg,
            gains,
            steering,
            scale,
        })
    }

    pub fn snapshot(&self, t: usize) -> CVector {
        let n = self.steering[0].len();
        let mut h = CVector::zeros(n);
        for (g, a) in self.gains.iter().zip(&self.steering) {
            h.axpy(g.sample(t as f64) * self.scale, a, Complex64::new(1.0, 0.0));
        }
        h
    }
}

/// Generates `n_ues × n_snapshots` snapshots. UEs are produced in parallel
/// from independent seeded streams; the output order is fixed.
pub fn generate_channel_set(config: &ChannelConfig) -> Result<ChannelDataset> {
    config.validate()?;
    let per_ue: Vec<Vec<ChannelSnapshot>> = (0..config.n_ues)
        .into_par_iter()
        .map(|ue| {
            let model = UeChannelModel::new(config, ue)?;
            Ok((0..config.n_snapshots)
                .map(|t| ChannelSnapshot {
                    ue_index: ue,
                    time_index: t,
                    h: model.snapshot(t),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(ChannelDataset {
        config: config.clone(),
        snapshots: per_ue.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::principal_angle;

    fn small(doppler: f64) -> ChannelConfig {
        ChannelConfig {
            n_antennas: 8,
            n_ues: 3,
            n_snapshots: 50,
            n_paths: 4,
            angle_spread_deg: 10.0,
            normalized_doppler: doppler,
            rng_seed: 11,
        }
    }

    #[test]
    fn steering_broadside_is_flat() {
        let a = steering_vector(0.0, 4).unwrap();
        for z in a.iter() {
            assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn steering_endfire_alternates() {
        let a = steering_vector(90.0, 2).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((a[0] - Complex64::new(r, 0.0)).norm() < 1e-15);
        assert!((a[1] - Complex64::new(-r, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_has_unit_norm() {
        let a = steering_vector(30.0, 8).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-14);
        assert!((a.dotc(&a).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn steering_rejects_bad_angles() {
        assert!(matches!(steering_vector(90.5, 4), Err(Error::Domain(_))));
        assert!(matches!(steering_vector(-91.0, 4), Err(Error::Domain(_))));
        assert!(steering_vector(0.0, 0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = small(0.1);
        assert!(c.validate().is_ok());
        c.normalized_doppler = 0.6;
        assert!(c.validate().is_err());
        c = small(0.1);
        c.n_paths = 0;
        assert!(c.validate().is_err());
        assert!(generate_channel_set(&c).is_err());
    }

    #[test]
    fn zero_doppler_freezes_snapshots() {
        let ds = generate_channel_set(&small(0.0)).unwrap();
        for ue in 0..3 {
            let first = &ds.get(ue, 0).h;
            for snap in ds.ue_series(ue) {
                assert_eq!(&snap.h, first);
            }
        }
    }

    #[test]
    fn single_path_snapshots_share_one_direction() {
        let mut c = small(0.2);
        c.n_paths = 1;
        c.angle_spread_deg = 0.0;
        let ds = generate_channel_set(&c).unwrap();
        let series = ds.ue_series(1);
        for a in series.iter().step_by(7) {
            for b in series.iter().step_by(5) {
                let angle = principal_angle(&a.h, &b.h).unwrap().to_radians();
                assert!(angle < 1e-6, "angle {angle}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_indexed() {
        let c = small(0.15);
        let a = generate_channel_set(&c).unwrap();
        let b = generate_channel_set(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.snapshots.len(), 3 * 50);
        let s = a.get(2, 17);
        assert_eq!((s.ue_index, s.time_index), (2, 17));
        assert!(a.snapshots.iter().all(|s| s.h.norm() > 0.0));

        let mut other = c.clone();
        other.rng_seed += 1;
        assert_ne!(a, generate_channel_set(&other).unwrap());
    }
}
