//! Binary containers and CSV exports.
//!
//! Channel container layout (all little endian):
//!
//! ```text
//! magic   b"BGCH"
//! version u32
//! n_a     u32   antennas
//! l       u32   UEs
//! t       u32   snapshots per UE
//! data    l * t * n_a pairs of f64 (re, im), UE-major then time-major
//! ```
//!
//! Estimate dumps (coarse, Type II, refined) reuse the same container.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::channel::{ChannelConfig, ChannelDataset, ChannelSnapshot};
use crate::linalg::CVector;
use crate::{Error, Result};

pub const CHANNEL_MAGIC: [u8; 4] = *b"BGCH";
pub const CHANNEL_VERSION: u32 = 1;

/// A dense `(ue, time, antenna)` block of complex samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    pub n_ues: usize,
    pub n_times: usize,
    pub n_antennas: usize,
    pub data: Vec<Complex64>,
}

impl ComplexTensor {
    pub fn from_vectors(n_ues: usize, n_times: usize, vectors: &[CVector]) -> Result<Self> {
        if vectors.len() != n_ues * n_times {
            return Err(Error::Dimension {
                expected: n_ues * n_times,
                got: vectors.len(),
            });
        }
        let n_antennas = vectors.first().map_or(0, |v| v.len());
        let mut data = Vec::with_capacity(vectors.len() * n_antennas);
        for v in vectors {
            if v.len() != n_antennas {
                return Err(Error::Dimension {
                    expected: n_antennas,
                    got: v.len(),
                });
            }
            data.extend(v.iter().copied());
        }
        Ok(Self {
            n_ues,
            n_times,
            n_antennas,
            data,
        })
    }

    pub fn vector(&self, ue: usize, t: usize) -> CVector {
        let start = (ue * self.n_times + t) * self.n_antennas;
        CVector::from_column_slice(&self.data[start..start + self.n_antennas])
    }
}

pub fn write_tensor<W: Write>(mut w: W, tensor: &ComplexTensor) -> Result<()> {
    w.write_all(&CHANNEL_MAGIC)?;
    for x in [
        CHANNEL_VERSION,
        dim_u32(tensor.n_antennas)?,
        dim_u32(tensor.n_ues)?,
        dim_u32(tensor.n_times)?,
    ] {
        w.write_all(&x.to_le_bytes())?;
    }
    for z in &tensor.data {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<ComplexTensor> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if magic != CHANNEL_MAGIC {
        return Err(Error::Format(format!("bad channel magic {magic:?}")));
    }
    let version = read_u32(&mut r, "version")?;
    if version != CHANNEL_VERSION {
        return Err(Error::Format(format!("unsupported channel version {version}")));
    }
    let n_antennas = read_u32(&mut r, "n_antennas")? as usize;
    let n_ues = read_u32(&mut r, "n_ues")? as usize;
    let n_times = read_u32(&mut r, "n_times")? as usize;
    let count = n_antennas
        .checked_mul(n_ues)
        .and_then(|x| x.checked_mul(n_times))
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 16 {
        return Err(Error::Format(format!(
            "payload has {} bytes, header implies {}",
            bytes.len(),
            count * 16
        )));
    }
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    Ok(ComplexTensor {
        n_ues,
        n_times,
        n_antennas,
        data,
    })
}

pub fn save_tensor(path: &Path, tensor: &ComplexTensor) -> Result<()> {
    write_tensor(BufWriter::new(File::create(path)?), tensor)
}

pub fn load_tensor(path: &Path) -> Result<ComplexTensor> {
    read_tensor(BufReader::new(File::open(path)?))
}

impl ChannelDataset {
    pub fn to_tensor(&self) -> ComplexTensor {
        let vectors: Vec<CVector> = self.snapshots.iter().map(|s| s.h.clone()).collect();
        ComplexTensor::from_vectors(self.n_ues(), self.n_snapshots(), &vectors)
            .expect("dataset dimensions are consistent")
    }

    /// Rebuilds a dataset from a container. Only the dimensions of the
    /// config survive the round trip; the remaining fields take defaults.
    pub fn from_tensor(tensor: &ComplexTensor) -> Self {
        let config = ChannelConfig {
            n_antennas: tensor.n_antennas,
            n_ues: tensor.n_ues,
            n_snapshots: tensor.n_times,
            ..ChannelConfig::default()
        };
        let snapshots = (0..tensor.n_ues)
            .flat_map(|ue| (0..tensor.n_times).map(move |t| (ue, t)))
            .map(|(ue, t)| ChannelSnapshot {
                ue_index: ue,
                time_index: t,
                h: tensor.vector(ue, t),
            })
            .collect();
        Self { config, snapshots }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_tensor(path, &self.to_tensor())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_tensor(&load_tensor(path)?))
    }

    /// CSV with columns `ue,t,antenna,re,im`, one row per complex entry.
    pub fn export_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["ue", "t", "antenna", "re", "im"])?;
        for s in &self.snapshots {
            for (k, z) in s.h.iter().enumerate() {
                out.write_record(&[
                    s.ue_index.to_string(),
                    s.time_index.to_string(),
                    k.to_string(),
                    format_f64(z.re),
                    format_f64(z.im),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal representation.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

fn dim_u32(x: usize) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::Format(format!("dimension {x} exceeds u32")))
}

pub(crate) fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated file while reading {what}")),
        _ => Error::Io(e),
    })
}

pub(crate) fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_channel_set;

    fn dataset() -> ChannelDataset {
        generate_channel_set(&ChannelConfig {
            n_antennas: 4,
            n_ues: 2,
            n_snapshots: 6,
            n_paths: 3,
            ..ChannelConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let ds = dataset();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &ds.to_tensor()).unwrap();
        assert_eq!(&buf[..4], b"BGCH");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 6);
        assert_eq!(buf.len(), 20 + 4 * 2 * 6 * 16);
        let first_re = f64::from_le_bytes(buf[20..28].try_into().unwrap());
        assert_eq!(first_re, ds.get(0, 0).h[0].re);
        // second UE starts after 6 snapshots of 4 antennas
        let off = 20 + 6 * 4 * 16;
        let ue1_im = f64::from_le_bytes(buf[off + 8..off + 16].try_into().unwrap());
        assert_eq!(ue1_im, ds.get(1, 0).h[0].im);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ds = dataset();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &ds.to_tensor()).unwrap();
        let back = ChannelDataset::from_tensor(&read_tensor(&buf[..]).unwrap());
        assert_eq!(back.snapshots, ds.snapshots);
    }

    #[test]
    fn truncated_and_corrupt_files_are_rejected() {
        let ds = dataset();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &ds.to_tensor()).unwrap();
        for cut in [0, 3, 10, 20, buf.len() - 1] {
            assert!(matches!(read_tensor(&buf[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_tensor(&bad[..]), Err(Error::Format(_))));
        let mut bad = buf;
        bad[4] = 9;
        assert!(matches!(read_tensor(&bad[..]), Err(Error::Format(_))));
    }

    #[test]
    fn csv_row_count() {
        let ds = dataset();
        let mut out = Vec::new();
        ds.export_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 2 * 6);
        assert!(text.starts_with("ue,t,antenna,re,im\n"));
    }
}
