//! Codebook feedback emulation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{complex_gaussian, CMatrix, CVector};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Port-to-antenna mapping with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualAntennaMatrix {
    pub q: CMatrix,
}

impl VirtualAntennaMatrix {
    pub fn n_antennas(&self) -> usize {
        self.q.nrows()
    }

    pub fn n_ports(&self) -> usize {
        self.q.ncols()
    }

    /// `Q^H h`.
    pub fn to_ports(&self, h: &CVector) -> CVector {
        self.q.ad_mul(h)
    }

    /// `Q a`.
    pub fn to_antennas(&self, a: &CVector) -> CVector {
        &self.q * a
    }
}

/// Columns `⌊k·N_A/N_P⌋` of the unitary `N_A`-point DFT matrix.
pub fn build_virtual_antenna_matrix(
    n_antennas: usize,
    n_ports: usize,
) -> Result<VirtualAntennaMatrix> {
    if n_ports == 0 || n_ports > n_antennas {
        return Err(Error::Config(format!(
            "need 1 <= n_ports <= n_antennas, got n_ports={n_ports}, n_antennas={n_antennas}"
        )));
    }
    let scale = 1.0 / (n_antennas as f64).sqrt();
    let q = CMatrix::from_fn(n_antennas, n_ports, |row, k| {
        let col = k * n_antennas / n_ports;
        // Reduce the exponent modulo N_A before scaling to keep the phase exact.
        let e = (row * col) % n_antennas;
        Complex64::from_polar(scale, 2.0 * PI * e as f64 / n_antennas as f64)
    });
    Ok(VirtualAntennaMatrix { q })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodebookKind {
    TypeI,
    TypeIIBasis,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    pub vectors: Vec<CVector>,
    pub kind: CodebookKind,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn n_ports(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.len())
    }
}

fn dft_beams(n_ports: usize, m: usize, kind: CodebookKind) -> Codebook {
    let scale = 1.0 / (n_ports as f64).sqrt();
    let vectors = (0..m)
        .map(|beam| {
            CVector::from_fn(n_ports, |k, _| {
                let e = (k * beam) % m;
                Complex64::from_polar(scale, 2.0 * PI * e as f64 / m as f64)
            })
        })
        .collect();
    Codebook { vectors, kind }
}

/// Oversampled DFT beams: `M = n_ports·oversampling`, entry `k` of beam `m`
/// is `exp(j2πkm/M)/√N_P`.
pub fn build_type1_codebook(n_ports: usize, oversampling: usize) -> Result<Codebook> {
    if n_ports == 0 || oversampling == 0 {
        return Err(Error::Config("n_ports and oversampling must be positive".into()));
    }
    Ok(dft_beams(n_ports, n_ports * oversampling, CodebookKind::TypeI))
}

/// The orthonormal `N_P`-point DFT basis used by the Type II surrogate.
pub fn build_type2_basis(n_ports: usize) -> Result<Codebook> {
    if n_ports == 0 {
        return Err(Error::Config("n_ports must be positive".into()));
    }
    Ok(dft_beams(n_ports, n_ports, CodebookKind::TypeIIBasis))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub ue_index: usize,
    pub time_index: usize,
    pub pmi: usize,
    pub cqi: f64,
}

/// Single-snapshot PMI/CQI: `argmax_m |a_m^H Q^H h|²`, ties to the smallest
/// index. The zero channel reports `pmi = 0, cqi = 0`.
pub fn compute_feedback(
    h: &CVector,
    q: &VirtualAntennaMatrix,
    cb: &Codebook,
    ue_index: usize,
    time_index: usize,
) -> Result<FeedbackRecord> {
    if h.len() != q.n_antennas() {
        return Err(Error::Dimension {
            expected: q.n_antennas(),
            got: h.len(),
        });
    }
    if cb.n_ports() != q.n_ports() {
        return Err(Error::Dimension {
            expected: q.n_ports(),
            got: cb.n_ports(),
        });
    }
    let ports = q.to_ports(h);
    let mut pmi = 0;
    let mut cqi = 0.0;
    for (m, a) in cb.vectors.iter().enumerate() {
        let score = a.dotc(&ports).norm_sqr();
        if score > cqi {
            cqi = score;
            pmi = m;
        }
    }
    Ok(FeedbackRecord {
        ue_index,
        time_index,
        pmi,
        cqi,
    })
}

/// `ĥ = Q a_pmi`.
pub fn coarse_estimate(
    rec: &FeedbackRecord,
    q: &VirtualAntennaMatrix,
    cb: &Codebook,
) -> Result<CVector> {
    let a = cb.vectors.get(rec.pmi).ok_or(Error::Index {
        index: rec.pmi,
        len: cb.len(),
    })?;
    Ok(q.to_antennas(a))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Type2Params {
    pub k_beams: usize,
    /// `None` leaves amplitudes unquantized.
    pub amp_bits: Option<u32>,
    /// `None` leaves phases unquantized.
    pub phase_bits: Option<u32>,
}

impl Default for Type2Params {
    fn default() -> Self {
        Self {
            k_beams: 4,
            amp_bits: Some(3),
            phase_bits: Some(4),
        }
    }
}

impl Type2Params {
    pub fn unquantized(k_beams: usize) -> Self {
        Self {
            k_beams,
            amp_bits: None,
            phase_bits: None,
        }
    }
}

/// Type II surrogate: strongest `k_beams` basis coefficients of `Q^H h`,
/// amplitudes (relative to the strongest) quantized uniformly on `[0, 1]`,
/// phases (relative to the strongest) quantized uniformly on `[0, 2π)`.
pub fn type2_estimate(
    h: &CVector,
    q: &VirtualAntennaMatrix,
    basis: &Codebook,
    params: &Type2Params,
) -> Result<CVector> {
    if h.len() != q.n_antennas() {
        return Err(Error::Dimension {
            expected: q.n_antennas(),
            got: h.len(),
        });
    }
    if params.k_beams == 0 || params.k_beams > basis.len() || params.k_beams > q.n_ports() {
        return Err(Error::Config(format!(
            "k_beams {} must be in 1..={}",
            params.k_beams,
            basis.len().min(q.n_ports())
        )));
    }
    if params.amp_bits == Some(0) || params.phase_bits == Some(0) {
        return Err(Error::Config("quantizer bit widths must be at least 1".into()));
    }
    if h.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(Error::Degenerate("type2_estimate of a zero channel".into()));
    }

    let ports = q.to_ports(h);
    let coeffs: Vec<Complex64> = basis.vectors.iter().map(|b| b.dotc(&ports)).collect();
    let mut order: Vec<usize> = (0..coeffs.len()).collect();
    // Stable sort keeps the smaller index first among equal magnitudes.
    order.sort_by(|&a, &b| coeffs[b].norm().total_cmp(&coeffs[a].norm()));
    let strongest = coeffs[order[0]];
    if strongest.norm() == 0.0 {
        return Err(Error::Degenerate("channel is orthogonal to the port space".into()));
    }

    let mut combined = CVector::zeros(q.n_ports());
    for &idx in order.iter().take(params.k_beams) {
        let rel = coeffs[idx] / strongest;
        let amp = match params.amp_bits {
            Some(bits) => quantize_unit(rel.norm().min(1.0), bits),
            None => rel.norm(),
        };
        let phase = match params.phase_bits {
            Some(bits) => quantize_phase(rel.arg(), bits),
            None => rel.arg(),
        };
        combined.axpy(Complex64::from_polar(amp, phase), &basis.vectors[idx], Complex64::new(1.0, 0.0));
    }
    let est = q.to_antennas(&combined);
    let n = est.norm();
    if n == 0.0 {
        return Err(Error::Degenerate("quantized Type II estimate vanished".into()));
    }
    Ok(est.unscale(n))
}

fn quantize_unit(x: f64, bits: u32) -> f64 {
    let levels = ((1u64 << bits.min(52)) - 1) as f64;
    if levels == 0.0 {
        return 1.0;
    }
    (x * levels).round() / levels
}

fn quantize_phase(phi: f64, bits: u32) -> f64 {
    let levels = (1u64 << bits.min(52)) as f64;
    let step = 2.0 * PI / levels;
    let wrapped = phi.rem_euclid(2.0 * PI);
    ((wrapped / step).round() % levels) * step
}

/// Draws `count` samples `ĥ + n`, `n ~ CN(0, σ²I)`, around the coarse
/// estimate of `rec`.
pub fn sample_codebook_channel(
    rec: &FeedbackRecord,
    q: &VirtualAntennaMatrix,
    cb: &Codebook,
    sigma: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<CVector>> {
    if !(sigma >= 0.0) {
        return Err(Error::Config(format!("sigma must be nonnegative, got {sigma}")));
    }
    if count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    let hat = coarse_estimate(rec, q, cb)?;
    let mut rng = rng_from_seed(seed);
    Ok((0..count)
        .map(|_| {
            if sigma == 0.0 {
                hat.clone()
            } else {
                &hat + complex_gaussian(&mut rng, hat.len(), sigma * sigma)
            }
        })
        .collect())
}

/// Feedback log CSV with columns `ue,t,pmi,cqi`.
pub fn write_feedback_csv<W: std::io::Write>(w: W, records: &[FeedbackRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["ue", "t", "pmi", "cqi"])?;
    for r in records {
        out.write_record([
            r.ue_index.to_string(),
            r.time_index.to_string(),
            r.pmi.to_string(),
            crate::io::format_f64(r.cqi),
        ])?;
    }
    out.flush()?;
    Ok(())
}
