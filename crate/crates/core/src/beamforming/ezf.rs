//! Zero-forcing baseline with equal per-UE power.

use num_complex::Complex64;

use super::BeamformerSet;
use crate::linalg::{columns, CVector};
use crate::{Error, Result};

const PINV_RTOL: f64 = 1e-10;

/// Columns of the pseudo-inverse of `H^H`, each scaled to power `P/L`.
/// Rank-deficient channel sets fall back to the truncated pseudo-inverse
/// (singular values below `1e-10·σ_max` are dropped).
pub fn ezf(h: &[CVector], power_budget: f64) -> Result<BeamformerSet> {
    if h.is_empty() {
        return Err(Error::Empty("EZF needs at least one UE"));
    }
    if !(power_budget > 0.0) {
        return Err(Error::Config("power budget must be positive".into()));
    }
    let n = h[0].len();
    if let Some(bad) = h.iter().find(|x| x.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: bad.len(),
        });
    }
    let hh = columns(h).adjoint();
    let svd = hh.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
    if smax == 0.0 {
        return Ok(BeamformerSet::zeros(h.len(), n, power_budget));
    }
    let pinv = svd
        .pseudo_inverse(PINV_RTOL * smax)
        .map_err(|e| Error::Internal(format!("pseudo-inverse failed: {e}")))?;
    let per_ue = (power_budget / h.len() as f64).sqrt();
    let v = (0..h.len())
        .map(|l| {
            let col: CVector = pinv.column(l).into_owned();
            let norm = col.norm();
            if norm > 0.0 {
                col * Complex64::new(per_ue / norm, 0.0)
            } else {
                col
            }
        })
        .collect();
    Ok(BeamformerSet { v, power_budget })
}
