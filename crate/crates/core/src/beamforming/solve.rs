//! The shared beamformer update: minimise
//! `Σ_i v_i^H (A + sI) v_i − 2 Re(b_i^H v_i)` subject to `Σ_i ‖v_i‖² ≤ P`.
//!
//! The minimiser is `v_i = (A + (s + μ)I)^{-1} b_i` with the multiplier
//! `μ ≥ 0` found by bisection on the monotone power function. One Hermitian
//! eigendecomposition of `A` makes every trial `μ` a diagonal solve.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::linalg::{CMatrix, CVector};
use crate::{Error, Result};

const MAX_HALVINGS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedSolution {
    pub v: Vec<CVector>,
    pub mu: f64,
    pub power: f64,
}

struct Spectral {
    vectors: CMatrix,
    values: Vec<f64>,
    /// Squared magnitudes of `U^H b_i`, one row per UE.
    weights: Vec<Vec<f64>>,
    coords: Vec<CVector>,
    null_tol: f64,
}

impl Spectral {
    fn power(&self, shift: f64, mu: f64) -> f64 {
        let mut total = 0.0;
        for w in &self.weights {
            for (k, wk) in w.iter().enumerate() {
                let d = self.values[k] + shift + mu;
                if d <= self.null_tol {
                    if *wk > 0.0 {
                        return f64::INFINITY;
                    }
                    continue;
                }
                total += wk / (d * d);
            }
        }
        total
    }

    fn beams(&self, shift: f64, mu: f64) -> Vec<CVector> {
        self.coords
            .iter()
            .map(|c| {
                let scaled = CVector::from_fn(c.len(), |k, _| {
                    let d = self.values[k] + shift + mu;
                    if d <= self.null_tol {
                        Complex64::new(0.0, 0.0)
                    } else {
                        c[k] / d
                    }
                });
                &self.vectors * scaled
            })
            .collect()
    }
}

pub fn solve_regularized(
    a: &CMatrix,
    b: &[CVector],
    shift: f64,
    power_budget: f64,
    power_tol: f64,
) -> Result<RegularizedSolution> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: a.ncols(),
        });
    }
    if let Some(bad) = b.iter().find(|bi| bi.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: bad.len(),
        });
    }
    if !(power_budget > 0.0) || !(shift >= 0.0) {
        return Err(Error::Config("power budget must be positive and shift nonnegative".into()));
    }

    let b_energy: f64 = b.iter().map(|bi| bi.norm_squared()).sum();
    if b_energy == 0.0 {
        return Ok(RegularizedSolution {
            v: vec![CVector::zeros(n); b.len()],
            mu: 0.0,
            power: 0.0,
        });
    }

    let hermitian = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(hermitian);
    let values: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let scale = values.iter().fold(0.0f64, |m, l| m.max(*l));
    let null_tol = 1e-12 * (1.0 + scale);
    let coords: Vec<CVector> = b.iter().map(|bi| eig.eigenvectors.ad_mul(bi)).collect();
    let weights = coords
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let floor = 1e-24 * b[i].norm_squared();
            c.iter()
                .map(|z| {
                    let w = z.norm_sqr();
                    if w <= floor {
                        0.0
                    } else {
                        w
                    }
                })
                .collect()
        })
        .collect();
    let spectral = Spectral {
        vectors: eig.eigenvectors,
        values,
        weights,
        coords,
        null_tol,
    };

    let unconstrained = spectral.power(shift, 0.0);
    if unconstrained <= power_budget {
        let v = spectral.beams(shift, 0.0);
        let power = v.iter().map(|x| x.norm_squared()).sum();
        return Ok(RegularizedSolution { v, mu: 0.0, power });
    }

    let mut lo = 0.0f64;
    let mut hi = (b_energy / power_budget).sqrt();
    let p_hi = spectral.power(shift, hi);
    if !(p_hi <= power_budget * (1.0 + power_tol)) {
        return Err(Error::Internal(format!(
            "bisection bracket failed: power({hi}) = {p_hi} > {power_budget}"
        )));
    }
    let mut mu = hi;
    for _ in 0..MAX_HALVINGS {
        let mid = 0.5 * (lo + hi);
        let p = spectral.power(shift, mid);
        if (p - power_budget).abs() <= power_tol * power_budget {
            mu = mid;
            break;
        }
        if p > power_budget {
            lo = mid;
        } else {
            hi = mid;
        }
        mu = hi;
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let v = spectral.beams(shift, mu);
    let power = v.iter().map(|x| x.norm_squared()).sum();
    Ok(RegularizedSolution { v, mu, power })
}
