//! Deterministic WMMSE: alternate MMSE detectors, MSE weights and a
//! power-constrained least-squares beamformer update.

use num_complex::Complex64;

use super::solve::solve_regularized;
use super::ssum::ssum_update_p;
use super::{sum_rate, BeamformerSet, SolverOptions, TraceRow};
use crate::linalg::{CMatrix, CVector};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct WmmseResult {
    /// Best iterate seen.
    pub v: BeamformerSet,
    /// Row 0 is the initial point.
    pub trace: Vec<TraceRow>,
    pub converged: bool,
}

impl WmmseResult {
    pub fn sum_rate(&self) -> f64 {
        self.trace.iter().map(|r| r.sum_rate).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// WMMSE from the equal-split MRT starting point.
pub fn wmmse(h: &[CVector], power_budget: f64, opts: &SolverOptions) -> Result<WmmseResult> {
    wmmse_from(h, power_budget, opts, BeamformerSet::mrt(h, power_budget))
}

pub fn wmmse_from(
    h: &[CVector],
    power_budget: f64,
    opts: &SolverOptions,
    init: BeamformerSet,
) -> Result<WmmseResult> {
    if h.is_empty() {
        return Err(Error::Empty("WMMSE needs at least one UE"));
    }
    if !(power_budget > 0.0) {
        return Err(Error::Config("power budget must be positive".into()));
    }
    opts.validate(h.len())?;
    let n = h[0].len();

    let mut v = BeamformerSet { power_budget, ..init };
    let mut rate = sum_rate(h, &v, &opts.sigma)?;
    let mut trace = vec![TraceRow {
        iteration: 0,
        sum_rate: rate,
        power: v.total_power(),
        mu: f64::NAN,
    }];
    let mut best = (v.clone(), rate);
    let mut converged = false;

    for iteration in 1..=opts.max_iters {
        let aux = ssum_update_p(&v, h, opts)?;
        let mut a = CMatrix::zeros(n, n);
        for (l, hl) in h.iter().enumerate() {
            let c = aux.w[l] * aux.u[l].norm_sqr();
            a.ger(Complex64::new(c, 0.0), hl, &hl.conjugate(), Complex64::new(1.0, 0.0));
        }
        let b: Vec<CVector> = h
            .iter()
            .enumerate()
            .map(|(i, hi)| hi * (aux.u[i] * aux.w[i]))
            .collect();
        let sol = solve_regularized(&a, &b, 0.0, power_budget, opts.power_tol)?;
        v = BeamformerSet {
            v: sol.v,
            power_budget,
        };
        let next = sum_rate(h, &v, &opts.sigma)?;
        trace.push(TraceRow {
            iteration,
            sum_rate: next,
            power: sol.power,
            mu: sol.mu,
        });
        if next > best.1 {
            best = (v.clone(), next);
        }
        let gain = next - rate;
        rate = next;
        if gain.abs() < opts.rate_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("WMMSE did not converge within {} iterations", opts.max_iters);
    }
    Ok(WmmseResult {
        v: best.0,
        trace,
        converged,
    })
}
