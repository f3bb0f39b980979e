//! Downlink beamforming: rate/MSE evaluation and the WMMSE, stochastic
//! WMMSE (SSUM) and zero-forcing solvers.
//!
//! Conventions: UE `i` receives `y_i = h_i^H x + n_i` and detects with
//! `ŝ_i = conj(u_i) y_i`. Rates are in nats.

mod ezf;
mod solve;
mod ssum;
mod wmmse;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::io::format_f64;
use crate::linalg::{norm_sqr, CVector};
use crate::{Error, Result};

pub use ezf::ezf;
pub use solve::{solve_regularized, RegularizedSolution};
pub use ssum::{
    ssum_update_p, ssum_update_v, stochastic_wmmse, surrogate_objective, AuxVars, SsumState,
    StochasticResult,
};
pub use wmmse::{wmmse, wmmse_from, WmmseResult};

/// Beamforming vectors for all UEs together with the sum-power budget.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamformerSet {
    pub v: Vec<CVector>,
    pub power_budget: f64,
}

impl BeamformerSet {
    pub fn zeros(n_ues: usize, n_antennas: usize, power_budget: f64) -> Self {
        Self {
            v: vec![CVector::zeros(n_antennas); n_ues],
            power_budget,
        }
    }

    /// Maximum-ratio transmission with an equal power split,
    /// `v_i = √(P/L) h_i/‖h_i‖`. Zero channels get zero beams.
    pub fn mrt(h: &[CVector], power_budget: f64) -> Self {
        let per_ue = (power_budget / h.len() as f64).sqrt();
        let v = h
            .iter()
            .map(|hi| {
                let n = hi.norm();
                if n > 0.0 {
                    hi * Complex64::new(per_ue / n, 0.0)
                } else {
                    CVector::zeros(hi.len())
                }
            })
            .collect();
        Self { v, power_budget }
    }

    pub fn n_ues(&self) -> usize {
        self.v.len()
    }

    pub fn total_power(&self) -> f64 {
        self.v.iter().map(norm_sqr).sum()
    }

    pub fn is_feasible(&self) -> bool {
        self.total_power() <= self.power_budget * (1.0 + 1e-6)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Proximal weight of the SSUM surrogate.
    pub rho: f64,
    pub max_iters: usize,
    /// Relative tolerance on the active power constraint.
    pub power_tol: f64,
    /// WMMSE stops once the sum-rate gain per iteration drops below this.
    pub rate_tol: f64,
    /// Receiver noise standard deviation per UE.
    pub sigma: Vec<f64>,
    pub rng_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: 0.01,
            max_iters: 200,
            power_tol: 1e-8,
            rate_tol: 1e-6,
            sigma: vec![1.0],
            rng_seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn with_noise(n_ues: usize, sigma: f64) -> Self {
        Self {
            sigma: vec![sigma; n_ues],
            ..Self::default()
        }
    }

    pub fn validate(&self, n_ues: usize) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.power_tol > 0.0 && self.rate_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.sigma.len() != n_ues {
            return Err(Error::Dimension {
                expected: n_ues,
                got: self.sigma.len(),
            });
        }
        if self.sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("noise deviations must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One row of a solver trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub sum_rate: f64,
    pub power: f64,
    pub mu: f64,
}

/// Trace CSV with columns `iteration,sum_rate_nats,power,mu`.
pub fn write_trace_csv<W: Write>(w: W, trace: &[TraceRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iteration", "sum_rate_nats", "power", "mu"])?;
    for row in trace {
        out.write_record([
            row.iteration.to_string(),
            format_f64(row.sum_rate),
            format_f64(row.power),
            format_f64(row.mu),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn check_dims(h: &CVector, v: &BeamformerSet, ue: usize) -> Result<()> {
    if ue >= v.n_ues() {
        return Err(Error::Index {
            index: ue,
            len: v.n_ues(),
        });
    }
    for vl in &v.v {
        if vl.len() != h.len() {
            return Err(Error::Dimension {
                expected: h.len(),
                got: vl.len(),
            });
        }
    }
    Ok(())
}

/// `J_i = Σ_l |h_i^H v_l|² + σ_i²`.
fn received_power(h: &CVector, v: &BeamformerSet, sigma: f64) -> f64 {
    v.v.iter().map(|vl| h.dotc(vl).norm_sqr()).sum::<f64>() + sigma * sigma
}

/// Scalar MSE `E_i(u) = |1 − conj(u) h^H v_i|² + |u|² (Σ_{l≠i} |h^H v_l|² + σ²)`.
pub fn mse(h: &CVector, v: &BeamformerSet, ue: usize, u: Complex64, sigma: f64) -> Result<f64> {
    check_dims(h, v, ue)?;
    let own = h.dotc(&v.v[ue]);
    let interference: f64 = v
        .v
        .iter()
        .enumerate()
        .filter(|(l, _)| *l != ue)
        .map(|(_, vl)| h.dotc(vl).norm_sqr())
        .sum();
    let err = Complex64::new(1.0, 0.0) - u.conj() * own;
    Ok(err.norm_sqr() + u.norm_sqr() * (interference + sigma * sigma))
}

/// `u_i = h_i^H v_i / J_i`.
pub fn mmse_detector(h: &CVector, v: &BeamformerSet, ue: usize, sigma: f64) -> Result<Complex64> {
    check_dims(h, v, ue)?;
    let j = received_power(h, v, sigma);
    if j == 0.0 {
        return Err(Error::Degenerate(
            "zero received power and zero noise: MMSE detector undefined".into(),
        ));
    }
    Ok(h.dotc(&v.v[ue]) / j)
}

pub fn sinr(h: &CVector, v: &BeamformerSet, ue: usize, sigma: f64) -> Result<f64> {
    check_dims(h, v, ue)?;
    let signal = h.dotc(&v.v[ue]).norm_sqr();
    let rest = received_power(h, v, sigma) - signal;
    if signal == 0.0 {
        return Ok(0.0);
    }
    Ok(signal / rest.max(0.0))
}

/// `ln(1 + SINR_i)`, which equals `ln(1/E_i)` at the MMSE detector.
pub fn user_rate(h: &CVector, v: &BeamformerSet, ue: usize, sigma: f64) -> Result<f64> {
    Ok(sinr(h, v, ue, sigma)?.ln_1p())
}

pub fn sum_rate(h: &[CVector], v: &BeamformerSet, sigmas: &[f64]) -> Result<f64> {
    if h.len() != v.n_ues() || sigmas.len() != h.len() {
        return Err(Error::Dimension {
            expected: v.n_ues(),
            got: h.len().min(sigmas.len()),
        });
    }
    h.iter()
        .zip(sigmas)
        .enumerate()
        .map(|(i, (hi, s))| user_rate(hi, v, i, *s))
        .sum()
}

/// Negative sum-rate `g(v, h)` at the MMSE detectors.
pub fn negative_sum_rate(h: &[CVector], v: &BeamformerSet, sigmas: &[f64]) -> Result<f64> {
    Ok(-sum_rate(h, v, sigmas)?)
}

pub fn to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
