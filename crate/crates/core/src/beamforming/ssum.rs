//! Stochastic WMMSE via successive upper-bound minimisation.
//!
//! Per drawn sample `h^r` the auxiliary variables `(w, z)` are refreshed at
//! the previous iterate (`w_i = 1/E_i`, `z_i = v_i`, detector `u_i` held at
//! its MMSE value), and the beamformers minimise the running average of the
//! resulting convex surrogates. The average is kept as sufficient
//! statistics: `Ā = mean_k Σ_l w_l |u_l|² h_l h_l^H` and
//! `b̄_i = mean_k (w_i u_i h_i + ρ z_i)`.

use num_complex::Complex64;

use super::solve::solve_regularized;
use super::{mmse_detector, mse, negative_sum_rate, sum_rate, BeamformerSet, SolverOptions, TraceRow};
use crate::linalg::{CMatrix, CVector};
use crate::{Error, Result};

/// Surrogate parameters at one expansion point.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxVars {
    pub w: Vec<f64>,
    pub z: Vec<CVector>,
    /// MMSE detectors at the expansion point; fixed inside the surrogate.
    pub u: Vec<Complex64>,
}

/// Closed-form minimiser of the surrogate over `(w, z)` at `v_prev`.
pub fn ssum_update_p(v_prev: &BeamformerSet, h: &[CVector], opts: &SolverOptions) -> Result<AuxVars> {
    check(h, v_prev, opts)?;
    let mut w = Vec::with_capacity(h.len());
    let mut u = Vec::with_capacity(h.len());
    for (i, hi) in h.iter().enumerate() {
        let ui = mmse_detector(hi, v_prev, i, opts.sigma[i])?;
        let e = mse(hi, v_prev, i, ui, opts.sigma[i])?;
        if !(e > 0.0) {
            return Err(Error::Degenerate(format!("MSE of UE {i} is zero")));
        }
        w.push(1.0 / e);
        u.push(ui);
    }
    Ok(AuxVars {
        w,
        z: v_prev.v.clone(),
        u,
    })
}

/// `𝒢(v, p, h) = Σ_i [−ln w_i + w_i E_i(u_i, v, h_i) + ρ‖v_i − z_i‖² − 1]`.
pub fn surrogate_objective(
    v: &BeamformerSet,
    aux: &AuxVars,
    h: &[CVector],
    opts: &SolverOptions,
) -> Result<f64> {
    check(h, v, opts)?;
    let mut total = 0.0;
    for (i, hi) in h.iter().enumerate() {
        let e = mse(hi, v, i, aux.u[i], opts.sigma[i])?;
        let prox = (&v.v[i] - &aux.z[i]).norm_squared();
        total += -aux.w[i].ln() + aux.w[i] * e + opts.rho * prox - 1.0;
    }
    Ok(total)
}

fn check(h: &[CVector], v: &BeamformerSet, opts: &SolverOptions) -> Result<()> {
    if h.len() != v.n_ues() {
        return Err(Error::Dimension {
            expected: v.n_ues(),
            got: h.len(),
        });
    }
    if opts.sigma.len() != h.len() {
        return Err(Error::Dimension {
            expected: h.len(),
            got: opts.sigma.len(),
        });
    }
    Ok(())
}

/// Running sufficient statistics of the averaged surrogate.
#[derive(Clone, Debug)]
pub struct SsumState {
    pub iteration: usize,
    pub quadratic: CMatrix,
    pub linear: Vec<CVector>,
    pub v: BeamformerSet,
}

impl SsumState {
    pub fn new(init: BeamformerSet) -> Self {
        let n = init.v.first().map_or(0, |x| x.len());
        let l = init.n_ues();
        Self {
            iteration: 0,
            quadratic: CMatrix::zeros(n, n),
            linear: vec![CVector::zeros(n); l],
            v: init,
        }
    }

    /// Folds the surrogate for `(aux, h)` into the running averages.
    pub fn accumulate(&mut self, aux: &AuxVars, h: &[CVector], rho: f64) {
        self.iteration += 1;
        let r = self.iteration as f64;
        let keep = Complex64::new((r - 1.0) / r, 0.0);
        let add = 1.0 / r;
        let mut quad = CMatrix::zeros(self.quadratic.nrows(), self.quadratic.ncols());
        for (l, hl) in h.iter().enumerate() {
            let c = aux.w[l] * aux.u[l].norm_sqr();
            quad.ger(Complex64::new(c, 0.0), hl, &hl.conjugate(), Complex64::new(1.0, 0.0));
        }
        self.quadratic = &self.quadratic * keep + quad * Complex64::new(add, 0.0);
        for (i, hi) in h.iter().enumerate() {
            let term = hi * (aux.u[i] * aux.w[i]) + &aux.z[i] * Complex64::new(rho, 0.0);
            self.linear[i] = &self.linear[i] * keep + term * Complex64::new(add, 0.0);
        }
    }
}

/// Minimises the averaged surrogate under the sum-power constraint.
/// Returns the beamformers and the multiplier `μ`.
pub fn ssum_update_v(state: &SsumState, opts: &SolverOptions) -> Result<(BeamformerSet, f64)> {
    let sol = solve_regularized(
        &state.quadratic,
        &state.linear,
        opts.rho,
        state.v.power_budget,
        opts.power_tol,
    )?;
    Ok((
        BeamformerSet {
            v: sol.v,
            power_budget: state.v.power_budget,
        },
        sol.mu,
    ))
}

#[derive(Clone, Debug)]
pub struct StochasticResult {
    pub v: BeamformerSet,
    /// One row per processed sample. `sum_rate` is measured on the
    /// evaluation channel when one was given, else on the drawn sample.
    pub trace: Vec<TraceRow>,
}

/// Runs one SSUM iteration per sample drawn from `samples`.
///
/// `init` defaults to MRT on the first sample.
pub fn stochastic_wmmse<I>(
    samples: I,
    power_budget: f64,
    opts: &SolverOptions,
    init: Option<BeamformerSet>,
    eval: Option<&[CVector]>,
) -> Result<StochasticResult>
where
    I: IntoIterator<Item = Vec<CVector>>,
{
    if !(power_budget > 0.0) {
        return Err(Error::Config("power budget must be positive".into()));
    }
    let mut samples = samples.into_iter().peekable();
    let first = samples.peek().ok_or(Error::Empty("stochastic WMMSE needs at least one sample"))?;
    opts.validate(first.len())?;
    let init = match init {
        Some(v) => BeamformerSet { power_budget, ..v },
        None => BeamformerSet::mrt(first, power_budget),
    };
    let mut state = SsumState::new(init);
    let mut trace = Vec::new();
    for h in samples {
        let aux = ssum_update_p(&state.v, &h, opts)?;
        state.accumulate(&aux, &h, opts.rho);
        let (v, mu) = ssum_update_v(&state, opts)?;
        state.v = v;
        let rate = match eval {
            Some(truth) => sum_rate(truth, &state.v, &opts.sigma)?,
            None => -negative_sum_rate(&h, &state.v, &opts.sigma)?,
        };
        trace.push(TraceRow {
            iteration: state.iteration,
            sum_rate: rate,
            power: state.v.total_power(),
            mu,
        });
    }
    Ok(StochasticResult { v: state.v, trace })
}
