//! Principal angles and empirical CDFs.

use std::cmp::Ordering;
use std::io::Write;

use crate::io::format_f64;
use crate::linalg::CVector;
use crate::{Error, Result};

/// Angle in degrees between the lines spanned by `h` and `h_est`,
/// `arccos(|h^H ĥ| / (‖h‖‖ĥ‖))`.
///
/// Evaluated as `atan2(‖residual‖, |projection|)`, which keeps full precision
/// near 0° and 90°. Arguments are put in a canonical order first so the
/// result is exactly symmetric.
pub fn principal_angle(h: &CVector, h_est: &CVector) -> Result<f64> {
    if h.len() != h_est.len() {
        return Err(Error::Dimension {
            expected: h.len(),
            got: h_est.len(),
        });
    }
    let (a, b) = if lexicographic(h, h_est) == Ordering::Greater {
        (h_est, h)
    } else {
        (h, h_est)
    };
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("principal angle of a zero vector".into()));
    }
    let au = a.unscale(na);
    let bu = b.unscale(nb);
    let c = au.dotc(&bu);
    let residual = &bu - &au * c;
    Ok(residual.norm().atan2(c.norm()).to_degrees().clamp(0.0, 90.0))
}

fn lexicographic(a: &CVector, b: &CVector) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

#[derive(Clone, Debug, PartialEq)]
pub struct CdfCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl CdfCurve {
    /// Pointwise `self ≥ other` over grid points `≤ cutoff`. Both curves
    /// must share a grid.
    pub fn dominates(&self, other: &CdfCurve, cutoff: f64) -> Result<bool> {
        if self.grid != other.grid {
            return Err(Error::Domain("CDF curves are on different grids".into()));
        }
        Ok(self
            .grid
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .filter(|(g, _)| **g <= cutoff)
            .all(|(_, (a, b))| a >= b))
    }

    /// Value at the largest grid point `≤ x` (0 below the grid).
    pub fn value_at(&self, x: f64) -> f64 {
        let idx = self.grid.partition_point(|g| *g <= x);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }
}

/// `values[k]` is the fraction of samples `≤ grid[k]`. The grid is sorted
/// before evaluation.
pub fn empirical_cdf(samples: &[f64], grid: &[f64]) -> Result<CdfCurve> {
    if samples.is_empty() {
        return Err(Error::Empty("empirical_cdf needs samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let values = grid
        .iter()
        .map(|g| sorted.partition_point(|s| s <= g) as f64 / n)
        .collect();
    Ok(CdfCurve { grid, values })
}

/// Evenly spaced grid of `n` points over `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Sample median (mean of the two central order statistics for even n).
pub fn median(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("median of an empty sample"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Ok(if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    })
}

pub fn mean(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Writes `grid_value,cdf_value,series_label` rows for every curve.
pub fn write_cdf_csv<W: Write>(w: W, curves: &[(&str, &CdfCurve)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["grid_value", "cdf_value", "series_label"])?;
    for (label, curve) in curves {
        for (g, v) in curve.grid.iter().zip(&curve.values) {
            out.write_record([format_f64(*g), format_f64(*v), label.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::linalg::complex_gaussian;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::Rng;

    fn cv(v: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&(r, i)| Complex64::new(r, i)))
    }

    #[test]
    fn identical_and_orthogonal() {
        let h = cv(&[(1.0, 2.0), (-0.5, 0.3), (0.0, 1.0)]);
        assert_eq!(principal_angle(&h, &h).unwrap(), 0.0);
        let e1 = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        let e2 = cv(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!((principal_angle(&e1, &e2).unwrap() - 90.0).abs() < 1e-12);
    }

    #[test]
    fn scale_and_phase_invariant() {
        let mut rng = rng_from_seed(3);
        for _ in 0..50 {
            let h = complex_gaussian(&mut rng, 6, 1.0);
            let c = rng.random_range(0.1..10.0);
            let phi = rng.random_range(0.0..6.28);
            let g = &h * Complex64::from_polar(c, phi);
            assert!(principal_angle(&h, &g).unwrap() < 1e-6);
        }
    }

    #[test]
    fn zero_vector_is_domain_error() {
        let h = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        let z = CVector::zeros(2);
        assert!(matches!(principal_angle(&h, &z), Err(Error::Domain(_))));
        assert!(matches!(principal_angle(&z, &h), Err(Error::Domain(_))));
    }

    #[test]
    fn cdf_counting() {
        let c = empirical_cdf(&[1.0, 2.0, 3.0], &[2.0]).unwrap();
        assert!((c.values[0] - 2.0 / 3.0).abs() < 1e-15);
        let c = empirical_cdf(&[1.0, 2.0, 3.0], &[0.5, 10.0]).unwrap();
        assert_eq!(c.values, vec![0.0, 1.0]);
        assert!(empirical_cdf(&[], &[1.0]).is_err());
    }

    #[test]
    fn uniform_cdf_close_to_identity() {
        let mut rng = rng_from_seed(9);
        let samples: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let grid = linear_grid(0.0, 1.0, 201);
        let c = empirical_cdf(&samples, &grid).unwrap();
        let worst = c
            .grid
            .iter()
            .zip(&c.values)
            .map(|(g, v)| (g - v).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.01, "max deviation {worst}");
    }

    #[test]
    fn dominance_comparator() {
        let grid = linear_grid(0.0, 4.0, 5);
        let left = empirical_cdf(&[0.5, 1.5], &grid).unwrap();
        let right = empirical_cdf(&[2.5, 3.5], &grid).unwrap();
        assert!(left.dominates(&right, 4.0).unwrap());
        assert!(!right.dominates(&left, 4.0).unwrap());
        let other = empirical_cdf(&[1.0], &[0.0, 1.0]).unwrap();
        assert!(left.dominates(&other, 1.0).is_err());
        assert_eq!(left.value_at(1.7), 0.5);
        assert_eq!(left.value_at(-1.0), 0.0);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
    }

    proptest! {
        #[test]
        fn angle_is_symmetric_and_bounded(
            a in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4),
            b in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4),
        ) {
            let (a, b) = (cv(&a), cv(&b));
            prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
            let ab = principal_angle(&a, &b).unwrap();
            let ba = principal_angle(&b, &a).unwrap();
            prop_assert_eq!(ab.to_bits(), ba.to_bits());
            prop_assert!((0.0..=90.0).contains(&ab));
            let cos = a.dotc(&b).norm() / (a.norm() * b.norm());
            prop_assert!((ab - cos.clamp(0.0, 1.0).acos().to_degrees()).abs() < 1e-5);
        }

        #[test]
        fn cdf_is_monotone_and_bounded(
            samples in prop::collection::vec(-10.0f64..10.0, 1..50),
            grid in prop::collection::vec(-12.0f64..12.0, 1..30),
        ) {
            let c = empirical_cdf(&samples, &grid).unwrap();
            prop_assert!(c.values.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.values.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
        }
    }
}
