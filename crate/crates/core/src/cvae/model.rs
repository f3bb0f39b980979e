//! The conditional VAE: encoder `q(z | h, ĥ, η)`, decoder `f(ĥ, z, η)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::layers::{Init, Layer, LayerStack, Linear, Mode, StackCache};
use crate::linalg::CVector;
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Added to the CQI before taking `log10`.
pub const CQI_FLOOR: f64 = 1e-12;
/// Guards the cosine-similarity denominator.
pub const COSINE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Offline,
    Online,
}

impl Variant {
    pub fn default_width(self) -> usize {
        match self {
            Variant::Offline => 512,
            Variant::Online => 128,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "offline" => Ok(Variant::Offline),
            "online" => Ok(Variant::Online),
            _ => Err(Error::Config(format!("unknown scheme {s:?}"))),
        }
    }
}

/// Network shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub variant: Variant,
    /// `None` picks the variant's default width.
    pub hidden_width: Option<usize>,
    pub latent_dim: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            variant: Variant::Offline,
            hidden_width: None,
            latent_dim: 2,
        }
    }
}

impl Architecture {
    pub fn new(variant: Variant, hidden_width: usize) -> Self {
        Self {
            variant,
            hidden_width: Some(hidden_width),
            latent_dim: 2,
        }
    }

    pub fn width(&self) -> usize {
        self.hidden_width.unwrap_or_else(|| self.variant.default_width())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLatent {
    pub mu: DVector<f64>,
    pub log_var: DVector<f64>,
}

/// One supervised example: target channel, coarse estimate and CQI.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRecord {
    pub h: CVector,
    pub h_hat: CVector,
    pub eta: f64,
}

/// Standardization of `log10(η + ε)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CqiScaler {
    pub mean: f64,
    pub std: f64,
}

impl Default for CqiScaler {
    fn default() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }
}

impl CqiScaler {
    pub fn fit(etas: impl IntoIterator<Item = f64>) -> Self {
        let logs: Vec<f64> = etas.into_iter().map(|e| (e + CQI_FLOOR).log10()).collect();
        if logs.is_empty() {
            return Self::default();
        }
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        Self { mean, std }
    }

    pub fn feature(&self, eta: f64) -> f64 {
        ((eta + CQI_FLOOR).log10() - self.mean) / self.std
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvaeModel {
    pub variant: Variant,
    pub n_antennas: usize,
    pub latent_dim: usize,
    pub encoder: LayerStack,
    pub mu_head: Linear,
    pub logvar_head: Linear,
    pub decoder: LayerStack,
    pub cqi: CqiScaler,
}

/// Loss terms averaged over a batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossTerms {
    pub loss: f64,
    pub kl: f64,
    pub recon: f64,
}

/// Training-mode forward state kept for the backward pass.
pub struct ForwardPass {
    pub terms: LossTerms,
    enc_cache: StackCache,
    dec_cache: StackCache,
    enc_out: DMatrix<f64>,
    mu: DMatrix<f64>,
    log_var: DMatrix<f64>,
    noise: DMatrix<f64>,
    dec_out: DMatrix<f64>,
    targets: Vec<CVector>,
    kl_weight: f64,
}

impl ForwardPass {
    /// ReLU on/off states of encoder then decoder. Two passes with equal
    /// patterns lie in the same linear piece of the network.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut p = self.enc_cache.relu_pattern();
        p.extend(self.dec_cache.relu_pattern());
        p
    }
}

impl CvaeModel {
    /// Freshly initialized network for `n_antennas`-element channels.
    pub fn new<R: Rng + ?Sized>(rng: &mut R, n_antennas: usize, arch: &Architecture) -> Result<Self> {
        if n_antennas == 0 || arch.latent_dim == 0 || arch.width() == 0 {
            return Err(Error::Config("antennas, latent_dim and width must be positive".into()));
        }
        let w = arch.width();
        let enc_in = 4 * n_antennas + 1;
        let dec_in = 2 * n_antennas + arch.latent_dim + 1;
        let out = 2 * n_antennas;

        let mut encoder = LayerStack::default();
        encoder.push_fbr(rng, enc_in, w);
        for _ in 0..3 {
            encoder.push_fbr(rng, w, w);
        }
        let mu_head = Linear::new(rng, w, arch.latent_dim, Init::Xavier);
        let logvar_head = Linear::new(rng, w, arch.latent_dim, Init::Xavier);

        let mut decoder = LayerStack::default();
        decoder.push_fbr(rng, dec_in, w);
        let tail_fbr = match arch.variant {
            Variant::Offline => {
                for _ in 0..6 {
                    decoder.push_residual(rng, w);
                }
                4
            }
            Variant::Online => 4,
        };
        for _ in 0..tail_fbr {
            decoder.push_fbr(rng, w, w);
        }
        decoder.layers.push(Layer::Linear(Linear::new(rng, w, out, Init::Xavier)));
        decoder.layers.push(Layer::BatchNorm(super::layers::BatchNorm::new(out)));

        let model = Self {
            variant: arch.variant,
            n_antennas,
            latent_dim: arch.latent_dim,
            encoder,
            mu_head,
            logvar_head,
            decoder,
            cqi: CqiScaler::default(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn encoder_input_dim(&self) -> usize {
        4 * self.n_antennas + 1
    }

    pub fn decoder_input_dim(&self) -> usize {
        2 * self.n_antennas + self.latent_dim + 1
    }

    /// Checks the width chain of every stack.
    pub fn validate(&self) -> Result<()> {
        let bad = |e: String| Error::Format(format!("invalid network: {e}"));
        if self.latent_dim == 0 {
            return Err(bad("latent_dim must be positive".into()));
        }
        let enc = self.encoder.output_dim(self.encoder_input_dim()).map_err(|e| bad(format!("encoder {e}")))?;
        for (name, head) in [("mu", &self.mu_head), ("log-variance", &self.logvar_head)] {
            if head.n_in() != enc || head.n_out() != self.latent_dim || head.bias.len() != self.latent_dim {
                return Err(bad(format!("{name} head is {}x{}", head.n_out(), head.n_in())));
            }
        }
        let dec = self.decoder.output_dim(self.decoder_input_dim()).map_err(|e| bad(format!("decoder {e}")))?;
        if dec != 2 * self.n_antennas {
            return Err(bad(format!("decoder emits {dec} reals, need {}", 2 * self.n_antennas)));
        }
        if !(self.cqi.std > 0.0) || !self.cqi.mean.is_finite() {
            return Err(bad("CQI scaler".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count()
            + self.mu_head.weight.len()
            + self.mu_head.bias.len()
            + self.logvar_head.weight.len()
            + self.logvar_head.bias.len()
            + self.decoder.param_count()
    }

    /// Order: encoder, μ head, log-variance head, decoder.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.encoder.params(&mut out);
        for head in [&self.mu_head, &self.logvar_head] {
            out.extend_from_slice(head.weight.as_slice());
            out.extend_from_slice(head.bias.as_slice());
        }
        self.decoder.params(&mut out);
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut src = flat;
        self.encoder.set_params(&mut src);
        for head in [&mut self.mu_head, &mut self.logvar_head] {
            let (w, rest) = src.split_at(head.weight.len());
            head.weight.as_mut_slice().copy_from_slice(w);
            let (b, rest) = rest.split_at(head.bias.len());
            head.bias.as_mut_slice().copy_from_slice(b);
            src = rest;
        }
        self.decoder.set_params(&mut src);
        Ok(())
    }

    fn check_len(&self, v: &CVector) -> Result<()> {
        if v.len() != self.n_antennas {
            return Err(Error::Dimension {
                expected: self.n_antennas,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Columns `[Re h; Im h; Re ĥ; Im ĥ; η̃]`.
    pub fn encoder_inputs(&self, records: &[TrainingRecord]) -> Result<DMatrix<f64>> {
        let n = self.n_antennas;
        let mut x = DMatrix::zeros(self.encoder_input_dim(), records.len());
        for (c, r) in records.iter().enumerate() {
            self.check_len(&r.h)?;
            self.check_len(&r.h_hat)?;
            for k in 0..n {
                x[(k, c)] = r.h[k].re;
                x[(n + k, c)] = r.h[k].im;
                x[(2 * n + k, c)] = r.h_hat[k].re;
                x[(3 * n + k, c)] = r.h_hat[k].im;
            }
            x[(4 * n, c)] = self.cqi.feature(r.eta);
        }
        Ok(x)
    }

    /// Columns `[Re ĥ; Im ĥ; z; η̃]`.
    fn decoder_inputs(&self, h_hat: &[&CVector], eta: &[f64], z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.n_antennas;
        if z.nrows() != self.latent_dim {
            return Err(Error::Dimension {
                expected: self.latent_dim,
                got: z.nrows(),
            });
        }
        let mut x = DMatrix::zeros(self.decoder_input_dim(), h_hat.len());
        for (c, hh) in h_hat.iter().enumerate() {
            self.check_len(hh)?;
            for k in 0..n {
                x[(k, c)] = hh[k].re;
                x[(n + k, c)] = hh[k].im;
            }
            for d in 0..self.latent_dim {
                x[(2 * n + d, c)] = z[(d, c)];
            }
            x[(2 * n + self.latent_dim, c)] = self.cqi.feature(eta[c]);
        }
        Ok(x)
    }

    /// Posterior parameters in inference mode.
    pub fn encode(&self, h: &CVector, h_hat: &CVector, eta: f64) -> Result<GaussianLatent> {
        let rec = TrainingRecord {
            h: h.clone(),
            h_hat: h_hat.clone(),
            eta,
        };
        let x = self.encoder_inputs(std::slice::from_ref(&rec))?;
        let e = self.encoder.infer(&x);
        Ok(GaussianLatent {
            mu: self.mu_head.forward(&e).column(0).into_owned(),
            log_var: self.logvar_head.forward(&e).column(0).into_owned(),
        })
    }

    /// Decoder mean (not normalized).
    pub fn decode(&self, h_hat: &CVector, z: &DVector<f64>, eta: f64) -> Result<CVector> {
        let zm = DMatrix::from_column_slice(z.len(), 1, z.as_slice());
        let out = self.decode_batch(&[h_hat], &[eta], &zm)?;
        Ok(out.into_iter().next().expect("one column"))
    }

    /// Decodes one column of `z` per `(ĥ, η)` pair.
    pub fn decode_batch(&self, h_hat: &[&CVector], eta: &[f64], z: &DMatrix<f64>) -> Result<Vec<CVector>> {
        if h_hat.len() != eta.len() || h_hat.len() != z.ncols() {
            return Err(Error::Dimension {
                expected: h_hat.len(),
                got: z.ncols().min(eta.len()),
            });
        }
        let x = self.decoder_inputs(h_hat, eta, z)?;
        let y = self.decoder.infer(&x);
        Ok((0..y.ncols()).map(|c| real_to_complex(&y, c, self.n_antennas)).collect())
    }

    /// Training-mode forward over a batch with the given reparameterization noise
    /// (`latent_dim × batch`).
    pub fn forward_train(&self, batch: &[TrainingRecord], noise: &DMatrix<f64>, kl_weight: f64) -> Result<ForwardPass> {
        self.forward(batch, noise, kl_weight, Mode::Train)
    }

    pub fn forward(
        &self,
        batch: &[TrainingRecord],
        noise: &DMatrix<f64>,
        kl_weight: f64,
        mode: Mode,
    ) -> Result<ForwardPass> {
        if batch.is_empty() {
            return Err(Error::Empty("loss needs a nonempty batch"));
        }
        if noise.shape() != (self.latent_dim, batch.len()) {
            return Err(Error::Dimension {
                expected: self.latent_dim * batch.len(),
                got: noise.len(),
            });
        }
        let x = self.encoder_inputs(batch)?;
        let (enc_out, enc_cache) = self.encoder.forward(&x, mode);
        let mu = self.mu_head.forward(&enc_out);
        let log_var = self.logvar_head.forward(&enc_out);
        let z = reparameterize_batch(&mu, &log_var, noise);

        let hh: Vec<&CVector> = batch.iter().map(|r| &r.h_hat).collect();
        let eta: Vec<f64> = batch.iter().map(|r| r.eta).collect();
        let dx = self.decoder_inputs(&hh, &eta, &z)?;
        let (dec_out, dec_cache) = self.decoder.forward(&dx, mode);

        let b = batch.len() as f64;
        let mut kl = 0.0;
        let mut recon = 0.0;
        for c in 0..batch.len() {
            kl += kl_divergence(&mu.column(c).into_owned(), &log_var.column(c).into_owned());
            recon += 1.0 - cosine_similarity(&batch[c].h, &real_to_complex(&dec_out, c, self.n_antennas));
        }
        kl /= b;
        recon /= b;
        Ok(ForwardPass {
            terms: LossTerms {
                loss: kl_weight * kl + recon,
                kl,
                recon,
            },
            enc_cache,
            dec_cache,
            enc_out,
            mu,
            log_var,
            noise: noise.clone(),
            dec_out,
            targets: batch.iter().map(|r| r.h.clone()).collect(),
            kl_weight,
        })
    }

    /// Gradient of the batch loss in [`CvaeModel::params`] order.
    pub fn backward(&self, pass: &ForwardPass) -> Vec<f64> {
        let n = self.n_antennas;
        let batch = pass.targets.len();
        let bf = batch as f64;

        let mut d_dec = DMatrix::zeros(2 * n, batch);
        for (c, h) in pass.targets.iter().enumerate() {
            let x = real_to_complex(&pass.dec_out, c, n);
            let g = cosine_gradient(h, &x);
            for k in 0..n {
                d_dec[(k, c)] = -g[k].re / bf;
                d_dec[(n + k, c)] = -g[k].im / bf;
            }
        }
        let (d_dec_in, dec_grads) = self.decoder.backward(&pass.dec_cache, &d_dec);

        let beta = pass.kl_weight;
        let mut d_mu = DMatrix::zeros(self.latent_dim, batch);
        let mut d_lv = DMatrix::zeros(self.latent_dim, batch);
        for c in 0..batch {
            for d in 0..self.latent_dim {
                let (mu, lv, eps) = (pass.mu[(d, c)], pass.log_var[(d, c)], pass.noise[(d, c)]);
                let dz = d_dec_in[(2 * n + d, c)];
                d_mu[(d, c)] = dz + beta * mu / bf;
                d_lv[(d, c)] = dz * eps * 0.5 * (0.5 * lv).exp() + beta * 0.5 * (lv.exp() - 1.0) / bf;
            }
        }
        let mut mu_grads = Vec::new();
        let mut lv_grads = Vec::new();
        let d_enc = self.mu_head.backward(&pass.enc_out, &d_mu, &mut mu_grads)
            + self.logvar_head.backward(&pass.enc_out, &d_lv, &mut lv_grads);
        let (_, enc_grads) = self.encoder.backward(&pass.enc_cache, &d_enc);

        let mut out = enc_grads;
        out.extend(mu_grads);
        out.extend(lv_grads);
        out.extend(dec_grads);
        out
    }

    /// Folds the batch statistics of a training pass into the running estimates.
    pub fn update_running_stats(&mut self, pass: &ForwardPass) {
        self.encoder.update_running_stats(&pass.enc_cache);
        self.decoder.update_running_stats(&pass.dec_cache);
    }

    /// `count` unit-norm decodes with latent draws from the prior.
    pub fn generate_refined_samples(&self, h_hat: &CVector, eta: f64, count: usize, seed: u64) -> Result<Vec<CVector>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let mut rng = rng_from_seed(seed);
        let z = DMatrix::from_fn(self.latent_dim, count, |_, _| rng.sample::<f64, _>(StandardNormal));
        let hh = vec![h_hat; count];
        let eta = vec![eta; count];
        Ok(self
            .decode_batch(&hh, &eta, &z)?
            .into_iter()
            .map(|x| {
                let norm = x.norm();
                if norm > 0.0 {
                    x.unscale(norm)
                } else {
                    x
                }
            })
            .collect())
    }
}

fn real_to_complex(y: &DMatrix<f64>, col: usize, n: usize) -> CVector {
    CVector::from_fn(n, |k, _| Complex64::new(y[(k, col)], y[(n + k, col)]))
}

/// `z = μ + exp(log_var / 2) ⊙ noise`.
pub fn reparameterize(latent: &GaussianLatent, noise: &DVector<f64>) -> Result<DVector<f64>> {
    if latent.mu.len() != noise.len() || latent.log_var.len() != noise.len() {
        return Err(Error::Dimension {
            expected: latent.mu.len(),
            got: noise.len(),
        });
    }
    Ok(DVector::from_fn(noise.len(), |d, _| {
        latent.mu[d] + (0.5 * latent.log_var[d]).exp() * noise[d]
    }))
}

fn reparameterize_batch(mu: &DMatrix<f64>, log_var: &DMatrix<f64>, noise: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(mu.nrows(), mu.ncols(), |r, c| {
        mu[(r, c)] + (0.5 * log_var[(r, c)]).exp() * noise[(r, c)]
    })
}

/// `KL(N(μ, diag(exp(log_var))) ‖ N(0, I))`.
pub fn kl_divergence(mu: &DVector<f64>, log_var: &DVector<f64>) -> f64 {
    0.5 * mu
        .iter()
        .zip(log_var.iter())
        .map(|(m, lv)| lv.exp() + m * m - 1.0 - lv)
        .sum::<f64>()
}

/// `|h^H x| / max(‖h‖‖x‖, ε)`, clipped to 1 so collinear inputs give
/// exactly 1.
pub fn cosine_similarity(h: &CVector, x: &CVector) -> f64 {
    (h.dotc(x).norm() / cosine_denominator(h, x)).min(1.0)
}

fn cosine_denominator(h: &CVector, x: &CVector) -> f64 {
    (h.norm_squared() * x.norm_squared()).sqrt().max(COSINE_EPS)
}

/// Gradient of [`cosine_similarity`] with respect to `(Re x, Im x)`, packed
/// as `re + i·im`.
fn cosine_gradient(h: &CVector, x: &CVector) -> CVector {
    let c = h.dotc(x);
    let a = c.norm();
    let hn = h.norm();
    let xn = x.norm();
    let d = cosine_denominator(h, x);
    let floored = d == COSINE_EPS;
    CVector::from_fn(x.len(), |k, _| {
        let da = if a > 0.0 {
            let w = c * h[k];
            Complex64::new(w.re, w.im) / a
        } else {
            Complex64::new(0.0, 0.0)
        };
        if floored || xn == 0.0 {
            return da / d;
        }
        da / d - x[k] / xn * (a * hn / (d * d))
    })
}
