//! Sequence autoencoder anomaly detector.
//!
//! Trips are arc-length resampled to a fixed length, normalized into the unit
//! square by the corpus box, encoded by a gated recurrent cell into a latent
//! vector, and decoded back; the anomaly score is the mean squared
//! reconstruction error `(1/n) * sum_i ||x_i - x'_i||^2`. Trips that do not
//! move like the normal training population reconstruct badly and score high.
//!
//! The model optionally trains variationally (posterior sampling plus a KL
//! term against a Gaussian mixture prior in latent space); scoring always
//! uses the posterior mean, so scores are deterministic. Backpropagation
//! through time is explicit and finite-difference checked.

mod nn;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::seeds;
use crate::trajectory::{PlanarBounds, PlanarTrack};
use crate::Result;
use nn::{GruCache, GruCell, Mat};

const LOGVAR_CLAMP: f64 = 8.0;

fn default_hidden() -> usize {
    32
}
fn default_latent() -> usize {
    8
}
fn default_mixture() -> usize {
    1
}
fn default_lr() -> f64 {
    0.01
}
fn default_epochs() -> usize {
    30
}
fn default_batch() -> usize {
    32
}
fn default_max_len() -> usize {
    32
}
fn default_kl_weight() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeqModelConfig {
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "default_latent")]
    pub latent_dim: usize,
    /// Gaussian prior components; 1 plus `variational = false` is a plain
    /// autoencoder.
    #[serde(default = "default_mixture")]
    pub n_mixture: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fixed resample length of every input trip.
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    /// Sample the latent posterior during training and add the KL term.
    #[serde(default)]
    pub variational: bool,
    /// Weight of the KL term (beta).
    #[serde(default = "default_kl_weight")]
    pub kl_weight: f64,
    /// Run the finite-difference gradient check before training.
    #[serde(default)]
    pub grad_check: bool,
}

impl Default for SeqModelConfig {
    fn default() -> Self {
        SeqModelConfig {
            hidden_dim: default_hidden(),
            latent_dim: default_latent(),
            n_mixture: default_mixture(),
            learning_rate: default_lr(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            seed: 0,
            max_len: default_max_len(),
            variational: false,
            kl_weight: default_kl_weight(),
            grad_check: false,
        }
    }
}

impl SeqModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden_dim", self.hidden_dim),
            ("latent_dim", self.latent_dim),
            ("n_mixture", self.n_mixture),
            ("batch_size", self.batch_size),
            ("max_len", self.max_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!(
                    "seq config {name} must be positive"
                )));
            }
        }
        if self.max_len < 2 {
            return Err(Error::invalid("seq config max_len must be at least 2"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("seq config learning_rate must be positive"));
        }
        if self.kl_weight < 0.0 {
            return Err(Error::invalid("seq config kl_weight must be non-negative"));
        }
        Ok(())
    }
}

/// Encoder/decoder parameters. Cloned zeroed copies of this struct double as
/// gradient and optimizer-moment buffers.
#[derive(Debug, Clone)]
pub struct SeqModel {
    pub cfg: SeqModelConfig,
    enc: GruCell,
    dec: GruCell,
    w_mu: Mat,
    b_mu: Vec<f64>,
    w_lv: Mat,
    b_lv: Vec<f64>,
    w_zh: Mat,
    b_zh: Vec<f64>,
    w_out: Mat,
    b_out: Vec<f64>,
    /// Mixture component means, `n_mixture x latent_dim` (uniform weights).
    prior_means: Mat,
}

const TENSOR_NAMES: &[&str] = &[
    "enc.w_r",
    "enc.u_r",
    "enc.b_r",
    "enc.w_u",
    "enc.u_u",
    "enc.b_u",
    "enc.w_n",
    "enc.u_n",
    "enc.b_n",
    "dec.w_r",
    "dec.u_r",
    "dec.b_r",
    "dec.w_u",
    "dec.u_u",
    "dec.b_u",
    "dec.w_n",
    "dec.u_n",
    "dec.b_n",
    "w_mu",
    "b_mu",
    "w_lv",
    "b_lv",
    "w_zh",
    "b_zh",
    "w_out",
    "b_out",
    "prior_means",
];

impl SeqModel {
    pub fn init(cfg: &SeqModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seeds::stream(cfg.seed, &["seq-init"]);
        let (h, l) = (cfg.hidden_dim, cfg.latent_dim);
        let mut prior_means = Mat::zeros(cfg.n_mixture, l);
        if cfg.n_mixture > 1 {
            for v in &mut prior_means.data {
                *v = rng.random_range(-0.5..0.5);
            }
        }
        Ok(SeqModel {
            cfg: *cfg,
            enc: GruCell::glorot(2, h, &mut rng),
            dec: GruCell::glorot(2, h, &mut rng),
            w_mu: Mat::glorot(l, h, &mut rng),
            b_mu: vec![0.0; l],
            w_lv: Mat::glorot(l, h, &mut rng),
            b_lv: vec![0.0; l],
            w_zh: Mat::glorot(h, l, &mut rng),
            b_zh: vec![0.0; h],
            w_out: Mat::glorot(2, h, &mut rng),
            b_out: vec![0.0; 2],
            prior_means,
        })
    }

    fn zeros_like(&self) -> Self {
        let (h, l) = (self.cfg.hidden_dim, self.cfg.latent_dim);
        SeqModel {
            cfg: self.cfg,
            enc: GruCell::zeros(2, h),
            dec: GruCell::zeros(2, h),
            w_mu: Mat::zeros(l, h),
            b_mu: vec![0.0; l],
            w_lv: Mat::zeros(l, h),
            b_lv: vec![0.0; l],
            w_zh: Mat::zeros(h, l),
            b_zh: vec![0.0; h],
            w_out: Mat::zeros(2, h),
            b_out: vec![0.0; 2],
            prior_means: Mat::zeros(self.cfg.n_mixture, l),
        }
    }

    pub fn tensor_names() -> &'static [&'static str] {
        TENSOR_NAMES
    }

    pub fn tensor_mut(&mut self, name: &str) -> &mut Vec<f64> {
        match name {
            "enc.w_r" => &mut self.enc.w_r.data,
            "enc.u_r" => &mut self.enc.u_r.data,
            "enc.b_r" => &mut self.enc.b_r,
            "enc.w_u" => &mut self.enc.w_u.data,
            "enc.u_u" => &mut self.enc.u_u.data,
            "enc.b_u" => &mut self.enc.b_u,
            "enc.w_n" => &mut self.enc.w_n.data,
            "enc.u_n" => &mut self.enc.u_n.data,
            "enc.b_n" => &mut self.enc.b_n,
            "dec.w_r" => &mut self.dec.w_r.data,
            "dec.u_r" => &mut self.dec.u_r.data,
            "dec.b_r" => &mut self.dec.b_r,
            "dec.w_u" => &mut self.dec.w_u.data,
            "dec.u_u" => &mut self.dec.u_u.data,
            "dec.b_u" => &mut self.dec.b_u,
            "dec.w_n" => &mut self.dec.w_n.data,
            "dec.u_n" => &mut self.dec.u_n.data,
            "dec.b_n" => &mut self.dec.b_n,
            "w_mu" => &mut self.w_mu.data,
            "b_mu" => &mut self.b_mu,
            "w_lv" => &mut self.w_lv.data,
            "b_lv" => &mut self.b_lv,
            "w_zh" => &mut self.w_zh.data,
            "b_zh" => &mut self.b_zh,
            "w_out" => &mut self.w_out.data,
            "b_out" => &mut self.b_out,
            "prior_means" => &mut self.prior_means.data,
            other => panic!("unknown tensor {other}"),
        }
    }

    pub fn param_count(&mut self) -> usize {
        TENSOR_NAMES.iter().map(|n| self.tensor_mut(n).len()).sum()
    }
}

/// Arc-length resample to exactly `max_len` points, then normalize into the
/// unit square spanned by `bounds`.
pub fn preprocess(
    track: &PlanarTrack,
    bounds: &PlanarBounds,
    max_len: usize,
) -> Result<Vec<[f64; 2]>> {
    if !(bounds.width() > 0.0) || !(bounds.height() > 0.0) {
        return Err(Error::DegenerateBbox);
    }
    if track.points.len() < 2 {
        return Err(Error::TooShort {
            id: track.id.clone(),
            n: track.points.len(),
            min: 2,
        });
    }
    let pts = &track.points;
    let mut cumulative = Vec::with_capacity(pts.len());
    let mut total = 0.0;
    cumulative.push(0.0);
    for w in pts.windows(2) {
        total += w[0].dist(&w[1]);
        cumulative.push(total);
    }

    let mut out = Vec::with_capacity(max_len);
    let normalize = |x: f64, y: f64| {
        [
            (x - bounds.min_x) / bounds.width(),
            (y - bounds.min_y) / bounds.height(),
        ]
    };
    if total == 0.0 {
        out.resize(max_len, normalize(pts[0].x, pts[0].y));
        return Ok(out);
    }
    let mut seg = 0usize;
    for i in 0..max_len {
        let target = total * i as f64 / (max_len - 1) as f64;
        while seg + 2 < pts.len() && cumulative[seg + 1] < target {
            seg += 1;
        }
        let seg_len = cumulative[seg + 1] - cumulative[seg];
        let t = if seg_len > 0.0 {
            ((target - cumulative[seg]) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let x = pts[seg].x + t * (pts[seg + 1].x - pts[seg].x);
        let y = pts[seg].y + t * (pts[seg + 1].y - pts[seg].y);
        out.push(normalize(x, y));
    }
    Ok(out)
}

struct ForwardCache {
    enc_caches: Vec<GruCache>,
    enc_h: Vec<f64>,
    mu: Vec<f64>,
    lv_raw: Vec<f64>,
    lv: Vec<f64>,
    z: Vec<f64>,
    g0: Vec<f64>,
    dec_caches: Vec<GruCache>,
    dec_hidden: Vec<Vec<f64>>,
    xhats: Vec<[f64; 2]>,
    /// Mixture responsibilities of the KL soft-min bound.
    resp: Vec<f64>,
    kl: f64,
    recon: f64,
}

fn forward(model: &SeqModel, xs: &[[f64; 2]], eta: Option<&[f64]>) -> ForwardCache {
    let h_dim = model.cfg.hidden_dim;
    let l_dim = model.cfg.latent_dim;
    let len = xs.len();

    let mut h = vec![0.0; h_dim];
    let mut enc_caches = Vec::with_capacity(len);
    for x in xs {
        let (h_new, cache) = model.enc.forward(x, &h);
        h = h_new;
        enc_caches.push(cache);
    }

    let mut mu = vec![0.0; l_dim];
    let mut lv_raw = vec![0.0; l_dim];
    model.w_mu.matvec(&h, &mut mu);
    model.w_lv.matvec(&h, &mut lv_raw);
    for i in 0..l_dim {
        mu[i] += model.b_mu[i];
        lv_raw[i] += model.b_lv[i];
    }
    let lv: Vec<f64> = lv_raw
        .iter()
        .map(|v| v.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP))
        .collect();

    let z: Vec<f64> = match eta {
        Some(eta) => (0..l_dim)
            .map(|i| mu[i] + (lv[i] / 2.0).exp() * eta[i])
            .collect(),
        None => mu.clone(),
    };

    // KLterm against the mixture prior via the soft-min bound
    // -ln sum_k w_k exp(-KL_k), exact for a single component.
    let k_comp = model.cfg.n_mixture;
    let mut kls = Vec::with_capacity(k_comp);
    for k in 0..k_comp {
        let mk = &model.prior_means.data[k * l_dim..(k + 1) * l_dim];
        let kl_k: f64 = (0..l_dim)
            .map(|i| 0.5 * ((mu[i] - mk[i]).powi(2) + lv[i].exp() - 1.0 - lv[i]))
            .sum();
        kls.push(kl_k);
    }
    let kl_min = kls.iter().cloned().fold(f64::INFINITY, f64::min);
    let weight = 1.0 / k_comp as f64;
    let denom: f64 = kls.iter().map(|k| weight * (-(k - kl_min)).exp()).sum();
    let kl = kl_min - denom.ln();
    let resp: Vec<f64> = kls
        .iter()
        .map(|k| weight * (-(k - kl_min)).exp() / denom)
        .collect();

    let mut g0_pre = vec![0.0; h_dim];
    model.w_zh.matvec(&z, &mut g0_pre);
    let g0: Vec<f64> = g0_pre
        .iter()
        .zip(&model.b_zh)
        .map(|(v, b)| (v + b).tanh())
        .collect();

    let mut dec_caches = Vec::with_capacity(len);
    let mut dec_hidden = Vec::with_capacity(len);
    let mut xhats = Vec::with_capacity(len);
    let mut g = g0.clone();
    let mut feed = [0.0, 0.0];
    let mut recon = 0.0;
    for x in xs {
        let (g_new, cache) = model.dec.forward(&feed, &g);
        let mut xhat = [0.0, 0.0];
        model.w_out.matvec(&g_new, &mut xhat);
        xhat[0] += model.b_out[0];
        xhat[1] += model.b_out[1];
        recon += (xhat[0] - x[0]).powi(2) + (xhat[1] - x[1]).powi(2);
        dec_caches.push(cache);
        dec_hidden.push(g_new.clone());
        xhats.push(xhat);
        feed = xhat;
        g = g_new;
    }
    recon /= len as f64;

    ForwardCache {
        enc_caches,
        enc_h: h,
        mu,
        lv_raw,
        lv,
        z,
        g0,
        dec_caches,
        dec_hidden,
        xhats,
        resp,
        kl,
        recon,
    }
}

/// Loss of one trip: reconstruction MSE plus (variational only) beta * KL.
fn trip_loss(model: &SeqModel, xs: &[[f64; 2]], eta: Option<&[f64]>) -> f64 {
    let cache = forward(model, xs, eta);
    if model.cfg.variational {
        cache.recon + model.cfg.kl_weight * cache.kl
    } else {
        cache.recon
    }
}

/// Accumulate `weight`-scaled gradients of one trip's loss into `grads`.
fn backward(
    model: &SeqModel,
    xs: &[[f64; 2]],
    eta: Option<&[f64]>,
    cache: &ForwardCache,
    grads: &mut SeqModel,
    weight: f64,
) {
    let h_dim = model.cfg.hidden_dim;
    let l_dim = model.cfg.latent_dim;
    let len = xs.len();
    let variational = model.cfg.variational;
    let beta = model.cfg.kl_weight;

    // Decoder walk, backwards through time with the autoregressive feed.
    let mut dh = vec![0.0; h_dim];
    let mut dfeed = vec![0.0; 2];
    for t in (0..len).rev() {
        let scale = weight * 2.0 / len as f64;
        let dxhat = [
            scale * (cache.xhats[t][0] - xs[t][0]) + dfeed[0],
            scale * (cache.xhats[t][1] - xs[t][1]) + dfeed[1],
        ];
        grads.w_out.outer_acc(&dxhat, &cache.dec_hidden[t]);
        grads.b_out[0] += dxhat[0];
        grads.b_out[1] += dxhat[1];
        let mut dg = dh;
        model.w_out.matvec_t_acc(&dxhat, &mut dg);
        let (dh_prev, dx) = model
            .dec
            .backward(&cache.dec_caches[t], &dg, &mut grads.dec);
        dh = dh_prev;
        dfeed = dx;
    }
    // dh is now the gradient at g0; the first feed is constant.
    let da: Vec<f64> = (0..h_dim)
        .map(|i| dh[i] * (1.0 - cache.g0[i] * cache.g0[i]))
        .collect();
    grads.w_zh.outer_acc(&da, &cache.z);
    for i in 0..h_dim {
        grads.b_zh[i] += da[i];
    }
    let mut dz = vec![0.0; l_dim];
    model.w_zh.matvec_t_acc(&da, &mut dz);

    let mut dmu = dz.clone();
    let mut dlv = vec![0.0; l_dim];
    if let Some(eta) = eta {
        for i in 0..l_dim {
            dlv[i] = dz[i] * eta[i] * (cache.lv[i] / 2.0).exp() * 0.5;
        }
    }
    if variational {
        // d(beta * KL)/dmu = beta * sum_k resp_k (mu - m_k); prior means get
        // the mirrored gradient; logvar derivative is component-independent.
        for i in 0..l_dim {
            let mut acc = 0.0;
            for k in 0..model.cfg.n_mixture {
                let mk = model.prior_means.data[k * l_dim + i];
                let diff = cache.mu[i] - mk;
                acc += cache.resp[k] * diff;
                grads.prior_means.data[k * l_dim + i] -= weight * beta * cache.resp[k] * diff;
            }
            dmu[i] += weight * beta * acc;
            dlv[i] += weight * beta * 0.5 * (cache.lv[i].exp() - 1.0);
        }
    }
    // Clamp mask on the raw logvar.
    let dlv_raw: Vec<f64> = (0..l_dim)
        .map(|i| {
            if cache.lv_raw[i].abs() < LOGVAR_CLAMP {
                dlv[i]
            } else {
                0.0
            }
        })
        .collect();

    grads.w_mu.outer_acc(&dmu, &cache.enc_h);
    grads.w_lv.outer_acc(&dlv_raw, &cache.enc_h);
    for i in 0..l_dim {
        grads.b_mu[i] += dmu[i];
        grads.b_lv[i] += dlv_raw[i];
    }
    let mut dhe = vec![0.0; h_dim];
    model.w_mu.matvec_t_acc(&dmu, &mut dhe);
    model.w_lv.matvec_t_acc(&dlv_raw, &mut dhe);
    for t in (0..len).rev() {
        let (dh_prev, _dx) = model
            .enc
            .backward(&cache.enc_caches[t], &dhe, &mut grads.enc);
        dhe = dh_prev;
    }
}

/// Mean loss over a batch; pure in `(model, batch, noise)`.
pub(crate) fn batch_loss(
    model: &SeqModel,
    batch: &[&Vec<[f64; 2]>],
    noise: Option<&[Vec<f64>]>,
) -> f64 {
    let mut total = 0.0;
    for (i, xs) in batch.iter().enumerate() {
        let eta = noise.map(|n| n[i].as_slice());
        total += trip_loss(model, xs, eta);
    }
    total / batch.len() as f64
}

fn batch_loss_and_grads(
    model: &SeqModel,
    batch: &[&Vec<[f64; 2]>],
    noise: Option<&[Vec<f64>]>,
    grads: &mut SeqModel,
) -> f64 {
    let weight = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for (i, xs) in batch.iter().enumerate() {
        let eta = noise.map(|n| n[i].as_slice());
        let cache = forward(model, xs, eta);
        total += if model.cfg.variational {
            cache.recon + model.cfg.kl_weight * cache.kl
        } else {
            cache.recon
        };
        backward(model, xs, eta, &cache, grads, weight);
    }
    total * weight
}

/// Per-tensor max relative error between analytic and central-difference
/// gradients.
pub fn gradient_check(model: &SeqModel, trips: &[Vec<[f64; 2]>], step: f64) -> Vec<(String, f64)> {
    let batch: Vec<&Vec<[f64; 2]>> = trips.iter().collect();
    let noise: Option<Vec<Vec<f64>>> = model.cfg.variational.then(|| {
        let mut rng = seeds::stream(model.cfg.seed, &["grad-check-noise"]);
        trips
            .iter()
            .map(|_| {
                (0..model.cfg.latent_dim)
                    .map(|_| {
                        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                    })
                    .collect()
            })
            .collect()
    });

    let mut grads = model.zeros_like();
    batch_loss_and_grads(model, &batch, noise.as_deref(), &mut grads);

    let mut report = Vec::with_capacity(TENSOR_NAMES.len());
    let mut probe = model.clone();
    for name in TENSOR_NAMES {
        let len = probe.tensor_mut(name).len();
        let mut worst: f64 = 0.0;
        for i in 0..len {
            let original = probe.tensor_mut(name)[i];
            probe.tensor_mut(name)[i] = original + step;
            let plus = batch_loss(&probe, &batch, noise.as_deref());
            probe.tensor_mut(name)[i] = original - step;
            let minus = batch_loss(&probe, &batch, noise.as_deref());
            probe.tensor_mut(name)[i] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let analytic = grads.tensor_mut(name)[i];
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        report.push((name.to_string(), worst));
    }
    report
}

/// Training diagnostics.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub per_epoch_loss: Vec<f64>,
    /// Mean reconstruction error of held-out normal trips under the final
    /// model, posterior mean decoding.
    pub holdout_recon: Option<f64>,
    pub grad_check: Option<Vec<(String, f64)>>,
    pub param_count: usize,
}

struct Adam {
    m: SeqModel,
    v: SeqModel,
    t: usize,
}

impl Adam {
    fn new(model: &SeqModel) -> Self {
        Adam {
            m: model.zeros_like(),
            v: model.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut SeqModel, grads: &mut SeqModel, lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t as i32);
        let bc2 = 1.0 - B2.powi(self.t as i32);
        for name in TENSOR_NAMES {
            let g: Vec<f64> = grads.tensor_mut(name).clone();
            let m = self.m.tensor_mut(name);
            for (mi, gi) in m.iter_mut().zip(&g) {
                *mi = B1 * *mi + (1.0 - B1) * gi;
            }
            let m: Vec<f64> = m.clone();
            let v = self.v.tensor_mut(name);
            for (vi, gi) in v.iter_mut().zip(&g) {
                *vi = B2 * *vi + (1.0 - B2) * gi * gi;
            }
            let v: Vec<f64> = v.clone();
            let params = model.tensor_mut(name);
            for i in 0..params.len() {
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
            }
        }
    }
}

/// Train on normal trips only.
///
/// A deterministic tenth of the input (at least one trip, when there are ten
/// or more) is held out for the final reconstruction figure. Aborts with a
/// diagnostic if the loss ever goes non-finite.
pub fn train(
    tracks: &[PlanarTrack],
    bounds: &PlanarBounds,
    cfg: &SeqModelConfig,
) -> Result<(SeqModel, TrainReport)> {
    cfg.validate()?;
    let mut model = SeqModel::init(cfg)?;
    let prepared: Vec<Vec<[f64; 2]>> = tracks
        .iter()
        .map(|t| preprocess(t, bounds, cfg.max_len))
        .collect::<Result<_>>()?;
    if prepared.is_empty() {
        return Err(Error::invalid("seq training needs at least one trip"));
    }

    let mut order: Vec<usize> = (0..prepared.len()).collect();
    order.shuffle(&mut seeds::stream(cfg.seed, &["seq-holdout"]));
    let n_holdout = if prepared.len() >= 10 {
        prepared.len() / 10
    } else {
        0
    };
    let (holdout_idx, train_idx) = order.split_at(n_holdout);

    let grad_check_report = cfg.grad_check.then(|| {
        let sample: Vec<Vec<[f64; 2]>> = train_idx
            .iter()
            .take(2)
            .map(|&i| prepared[i].clone())
            .collect();
        gradient_check(&model, &sample, 1e-5)
    });

    let mut report = TrainReport {
        per_epoch_loss: Vec::with_capacity(cfg.epochs),
        holdout_recon: None,
        grad_check: grad_check_report,
        param_count: model.param_count(),
    };
    if cfg.epochs == 0 {
        return Ok((model, report));
    }

    let mut adam = Adam::new(&model);
    let mut grads = model.zeros_like();
    for epoch in 0..cfg.epochs {
        let mut idx: Vec<usize> = train_idx.to_vec();
        idx.shuffle(&mut seeds::stream(
            cfg.seed,
            &["seq-epoch", &epoch.to_string()],
        ));
        let mut noise_rng = seeds::stream(cfg.seed, &["seq-noise", &epoch.to_string()]);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for (batch_no, chunk) in idx.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Vec<[f64; 2]>> = chunk.iter().map(|&i| &prepared[i]).collect();
            let noise: Option<Vec<Vec<f64>>> = cfg.variational.then(|| {
                batch
                    .iter()
                    .map(|_| {
                        (0..cfg.latent_dim)
                            .map(|_| {
                                <StandardNormal as Distribution<f64>>::sample(
                                    &StandardNormal,
                                    &mut noise_rng,
                                )
                            })
                            .collect()
                    })
                    .collect()
            });
            for name in TENSOR_NAMES {
                grads.tensor_mut(name).iter_mut().for_each(|g| *g = 0.0);
            }
            let mean_loss = batch_loss_and_grads(&model, &batch, noise.as_deref(), &mut grads);
            if !mean_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            adam.step(&mut model, &mut grads, cfg.learning_rate);
            epoch_loss += mean_loss * batch.len() as f64;
            seen += batch.len();
        }
        report.per_epoch_loss.push(epoch_loss / seen as f64);
    }

    if !holdout_idx.is_empty() {
        let total: f64 = holdout_idx
            .iter()
            .map(|&i| forward(&model, &prepared[i], None).recon)
            .sum();
        report.holdout_recon = Some(total / holdout_idx.len() as f64);
    }
    Ok((model, report))
}

/// Anomaly score of one trip: mean squared reconstruction error in normalized
/// coordinates, posterior-mean decoding. Deterministic.
pub fn score(model: &SeqModel, track: &PlanarTrack, bounds: &PlanarBounds) -> Result<f64> {
    let xs = preprocess(track, bounds, model.cfg.max_len)?;
    Ok(forward(model, &xs, None).recon)
}

/// Score every test trip.
pub fn detect(
    model: &SeqModel,
    test: &[PlanarTrack],
    bounds: &PlanarBounds,
) -> Result<Vec<(String, f64)>> {
    test.iter()
        .map(|t| Ok((t.id.clone(), score(model, t, bounds)?)))
        .collect()
}

/// Versioned text checkpoint of config plus every named tensor.
pub fn save_checkpoint(path: &std::path::Path, model: &SeqModel) -> Result<()> {
    use std::io::Write;
    let mut out = String::new();
    out.push_str("privtraj-seq-checkpoint v1\n");
    out.push_str(&serde_json::to_string(&model.cfg).expect("config serializes"));
    out.push('\n');
    let mut copy = model.clone();
    for name in TENSOR_NAMES {
        let data = copy.tensor_mut(name);
        out.push_str(&format!("tensor {name} {}\n", data.len()));
        for (i, v) in data.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<SeqModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("privtraj-seq-checkpoint v1") {
        return Err(Error::BadCheckpoint("bad magic line".into()));
    }
    let cfg: SeqModelConfig = serde_json::from_str(
        lines
            .next()
            .ok_or_else(|| Error::BadCheckpoint("missing config".into()))?,
    )
    .map_err(|e| Error::BadCheckpoint(e.to_string()))?;
    let mut model = SeqModel::init(&cfg)?;
    for name in TENSOR_NAMES {
        let header = lines
            .next()
            .ok_or_else(|| Error::BadCheckpoint("truncated".into()))?;
        let expected_len = model.tensor_mut(name).len();
        let expected_header = format!("tensor {name} {expected_len}");
        if header != expected_header {
            return Err(Error::BadCheckpoint(format!(
                "expected {expected_header:?}, found {header:?}"
            )));
        }
        let values = lines
            .next()
            .ok_or_else(|| Error::BadCheckpoint("truncated".into()))?;
        let parsed: std::result::Result<Vec<f64>, _> =
            values.split(' ').map(str::parse::<f64>).collect();
        let parsed = parsed.map_err(|e| Error::BadCheckpoint(e.to_string()))?;
        if parsed.len() != expected_len {
            return Err(Error::BadCheckpoint(format!(
                "tensor {name} has wrong length"
            )));
        }
        *model.tensor_mut(name) = parsed;
    }
    Ok(model)
}
