//! Model files.
//!
//! ```text
//! magic      b"BGVM"
//! version    u32
//! variant    u32   0 offline, 1 online
//! latent     u32
//! antennas   u32
//! cqi        f64 mean, f64 std
//! manifest   encoder, mu head, log-variance head, decoder (see below)
//! n_params   u64, then that many f64 in parameter order
//! n_stats    u64, then running means/variances in layer order
//! ```
//!
//! A stack manifest is `u32 count` followed per layer by a `u32` tag:
//! `0` linear (`u32 in`, `u32 out`), `1` batch norm (`u32 dim`, `f64
//! momentum`), `2` ReLU, `3` residual (nested stack manifest).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::layers::{BatchNorm, Layer, LayerStack, Linear};
use super::model::{CqiScaler, CvaeModel, Variant};
use crate::io::{read_exact, read_f64, read_u32};
use crate::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"BGVM";
pub const MODEL_VERSION: u32 = 1;
const MAX_DIM: u32 = 1 << 20;
const MAX_DEPTH: usize = 8;

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} exceeds u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_manifest<W: Write>(w: &mut W, stack: &LayerStack) -> Result<()> {
    put_u32(w, stack.layers.len())?;
    for l in &stack.layers {
        match l {
            Layer::Linear(x) => {
                put_u32(w, 0)?;
                put_u32(w, x.n_in())?;
                put_u32(w, x.n_out())?;
            }
            Layer::BatchNorm(b) => {
                put_u32(w, 1)?;
                put_u32(w, b.dim())?;
                w.write_all(&b.momentum.to_le_bytes())?;
            }
            Layer::Relu => put_u32(w, 2)?,
            Layer::Residual(s) => {
                put_u32(w, 3)?;
                write_manifest(w, s)?;
            }
        }
    }
    Ok(())
}

fn read_dim<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = read_u32(r, what)?;
    if v == 0 || v > MAX_DIM {
        return Err(Error::Format(format!("implausible {what} {v}")));
    }
    Ok(v as usize)
}

fn read_manifest<R: Read>(r: &mut R, depth: usize) -> Result<LayerStack> {
    if depth > MAX_DEPTH {
        return Err(Error::Format("layer manifest nests too deeply".into()));
    }
    let count = read_u32(r, "layer count")?;
    if count > MAX_DIM {
        return Err(Error::Format(format!("implausible layer count {count}")));
    }
    let mut layers = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let layer = match read_u32(r, "layer tag")? {
            0 => {
                let n_in = read_dim(r, "linear input width")?;
                let n_out = read_dim(r, "linear output width")?;
                Layer::Linear(Linear {
                    weight: DMatrix::zeros(n_out, n_in),
                    bias: DVector::zeros(n_out),
                })
            }
            1 => {
                let dim = read_dim(r, "batch-norm width")?;
                let mut bn = BatchNorm::new(dim);
                bn.momentum = read_f64(r, "batch-norm momentum")?;
                Layer::BatchNorm(bn)
            }
            2 => Layer::Relu,
            3 => Layer::Residual(read_manifest(r, depth + 1)?),
            t => return Err(Error::Format(format!("unknown layer tag {t}"))),
        };
        layers.push(layer);
    }
    Ok(LayerStack::new(layers))
}

fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    w.write_all(&(xs.len() as u64).to_le_bytes())?;
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, expected: usize, what: &str) -> Result<Vec<f64>> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    let n = u64::from_le_bytes(b);
    if n != expected as u64 {
        return Err(Error::Format(format!("{what}: manifest implies {expected} values, file has {n}")));
    }
    let mut raw = vec![0u8; expected * 8];
    read_exact(r, &mut raw, what)?;
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn write_model<W: Write>(w: W, model: &CvaeModel) -> Result<()> {
    model.validate()?;
    write_unchecked(w, model)
}

fn write_unchecked<W: Write>(mut w: W, model: &CvaeModel) -> Result<()> {
    w.write_all(&MODEL_MAGIC)?;
    put_u32(&mut w, MODEL_VERSION as usize)?;
    put_u32(
        &mut w,
        match model.variant {
            Variant::Offline => 0,
            Variant::Online => 1,
        },
    )?;
    put_u32(&mut w, model.latent_dim)?;
    put_u32(&mut w, model.n_antennas)?;
    w.write_all(&model.cqi.mean.to_le_bytes())?;
    w.write_all(&model.cqi.std.to_le_bytes())?;
    write_manifest(&mut w, &model.encoder)?;
    for head in [&model.mu_head, &model.logvar_head] {
        write_manifest(&mut w, &LayerStack::new(vec![Layer::Linear(head.clone())]))?;
    }
    write_manifest(&mut w, &model.decoder)?;
    write_f64s(&mut w, &model.params())?;
    let mut stats = Vec::new();
    model.encoder.running_stats(&mut stats);
    model.decoder.running_stats(&mut stats);
    write_f64s(&mut w, &stats)?;
    w.flush()?;
    Ok(())
}

fn stats_len(stack: &LayerStack) -> usize {
    let mut v = Vec::new();
    stack.running_stats(&mut v);
    v.len()
}

fn read_head<R: Read>(r: &mut R) -> Result<Linear> {
    let mut stack = read_manifest(r, 0)?;
    match (stack.layers.len(), stack.layers.pop()) {
        (1, Some(Layer::Linear(l))) => Ok(l),
        _ => Err(Error::Format("latent head must be a single linear layer".into())),
    }
}

pub fn read_model<R: Read>(mut r: R) -> Result<CvaeModel> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if magic != MODEL_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r, "version")?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let variant = match read_u32(&mut r, "variant")? {
        0 => Variant::Offline,
        1 => Variant::Online,
        v => return Err(Error::Format(format!("unknown variant {v}"))),
    };
    let latent_dim = read_dim(&mut r, "latent dimension")?;
    let n_antennas = read_dim(&mut r, "antenna count")?;
    let cqi = CqiScaler {
        mean: read_f64(&mut r, "CQI mean")?,
        std: read_f64(&mut r, "CQI std")?,
    };
    let encoder = read_manifest(&mut r, 0)?;
    let mu_head = read_head(&mut r)?;
    let logvar_head = read_head(&mut r)?;
    let decoder = read_manifest(&mut r, 0)?;
    let mut model = CvaeModel {
        variant,
        n_antennas,
        latent_dim,
        encoder,
        mu_head,
        logvar_head,
        decoder,
        cqi,
    };
    let params = read_f64s(&mut r, model.param_count(), "parameters")?;
    model.set_params(&params)?;
    let n_stats = stats_len(&model.encoder) + stats_len(&model.decoder);
    let stats = read_f64s(&mut r, n_stats, "running statistics")?;
    let mut src = stats.as_slice();
    model.encoder.set_running_stats(&mut src);
    model.decoder.set_running_stats(&mut src);
    model.validate()?;
    Ok(model)
}

pub fn save_model(path: &Path, model: &CvaeModel) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::from(e).context(format!("creating {}", path.display())))?;
    write_model(BufWriter::new(f), model)
}

pub fn load_model(path: &Path) -> Result<CvaeModel> {
    let f = File::open(path).map_err(|e| Error::from(e).context(format!("opening {}", path.display())))?;
    read_model(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvae::model::Architecture;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn model(variant: Variant) -> CvaeModel {
        let mut rng = rng_from_seed(70);
        let mut m = CvaeModel::new(&mut rng, 3, &Architecture::new(variant, 5)).unwrap();
        let mut p = m.params();
        for v in &mut p {
            *v += rng.random_range(-0.1..0.1);
        }
        m.set_params(&p).unwrap();
        m.cqi = CqiScaler { mean: -0.3, std: 1.7 };
        if let Layer::BatchNorm(b) = &mut m.encoder.layers[1] {
            b.running_var[0] = 2.5;
            b.running_mean[2] = 0.125;
        }
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for variant in [Variant::Offline, Variant::Online] {
            let m = model(variant);
            let mut buf = Vec::new();
            write_model(&mut buf, &m).unwrap();
            let back = read_model(buf.as_slice()).unwrap();
            assert_eq!(back, m);
            let mut again = Vec::new();
            write_model(&mut again, &back).unwrap();
            assert_eq!(again, buf);
        }
    }

    #[test]
    fn truncation_and_corruption_are_format_errors() {
        let m = model(Variant::Online);
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        for cut in [0, 3, 10, 40, buf.len() / 2, buf.len() - 1] {
            assert!(matches!(read_model(&buf[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_model(bad.as_slice()), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(read_model(bad.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn broken_dimension_chain_is_rejected() {
        let mut m = model(Variant::Online);
        let keep = m.decoder.layers.len() - 2;
        m.decoder.layers.truncate(keep);
        assert!(write_model(Vec::new(), &m).is_err());
        let mut buf = Vec::new();
        write_unchecked(&mut buf, &m).unwrap();
        assert!(matches!(read_model(buf.as_slice()), Err(Error::Format(_))));
    }
}
