//! Denoising autoencoder with a classification head on the latent code.
//!
//! Encoder: input → hidden → z (both rectified). Decoder: z → input (linear).
//! Head: z → 2 logits → softmax, class 0 = collusive.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_rows, corrupt_input, Standardizer};
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::rng;

pub const DAC_FORMAT_VERSION: u32 = 1;
pub const COLLUSIVE: usize = 0;
pub const OTHER: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DacConfig {
    pub hidden: usize,
    pub ae_epochs: usize,
    pub clf_epochs: usize,
    pub corruption: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weight of the reconstruction loss during the classification stage.
    pub recon_weight: f64,
    pub seed: u64,
}

impl Default for DacConfig {
    fn default() -> Self {
        DacConfig {
            hidden: 128,
            ae_epochs: 25,
            clf_epochs: 150,
            corruption: 0.1,
            learning_rate: 1e-3,
            batch_size: 32,
            recon_weight: 1.0,
            seed: 0,
        }
    }
}

impl DacConfig {
    /// Same network trained as a plain MLP: no pretraining, no
    /// reconstruction loss, no corruption.
    pub fn mlp_baseline(&self) -> Self {
        DacConfig {
            ae_epochs: 0,
            corruption: 0.0,
            recon_weight: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Layout {
    input: usize,
    hidden: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    w4: usize,
    b4: usize,
    total: usize,
}

impl Layout {
    fn new(input: usize, hidden: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + hidden * input;
        let w2 = b1 + hidden;
        let b2 = w2 + hidden * hidden;
        let w3 = b2 + hidden;
        let b3 = w3 + input * hidden;
        let w4 = b3 + input;
        let b4 = w4 + 2 * hidden;
        Layout {
            input,
            hidden,
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            w4,
            b4,
            total: b4 + 2,
        }
    }

    fn is_head(&self, i: usize) -> bool {
        i >= self.w4
    }
}

/// Which losses a gradient evaluation includes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub reconstruction: f64,
    pub classification: f64,
}

struct Cache {
    h1: Vec<f64>,
    z: Vec<f64>,
    recon: Vec<f64>,
    probs: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DacModel {
    pub format_version: u32,
    pub config: DacConfig,
    pub scaler: Standardizer,
    layout: Layout,
    params: Vec<f64>,
    /// Mean reconstruction loss of each pretraining epoch.
    pub pretrain_losses: Vec<f64>,
    /// Mean total loss of each classification epoch.
    pub train_losses: Vec<f64>,
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n_in).zip(b)) {
        *o = bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

impl DacModel {
    /// Untrained model with seeded He/Glorot initialization.
    pub fn init(input_dim: usize, scaler: Standardizer, config: &DacConfig) -> Result<Self> {
        if input_dim == 0 || config.hidden == 0 {
            return Err(Error::invalid("DAC needs positive input and hidden sizes"));
        }
        if scaler.dim() != input_dim {
            return Err(Error::DimensionMismatch {
                expected: input_dim,
                got: scaler.dim(),
            });
        }
        let layout = Layout::new(input_dim, config.hidden);
        let mut params = vec![0.0; layout.total];
        let mut r = rng::stage_rng(config.seed, "dac-init");
        let mut fill = |range: std::ops::Range<usize>, std: f64, params: &mut [f64]| {
            let d = Normal::new(0.0, std).expect("positive std");
            for p in &mut params[range] {
                *p = d.sample(&mut r);
            }
        };
        let (i, h) = (input_dim as f64, config.hidden as f64);
        fill(layout.w1..layout.b1, (2.0 / i).sqrt(), &mut params);
        fill(layout.w2..layout.b2, (2.0 / h).sqrt(), &mut params);
        fill(layout.w3..layout.b3, (2.0 / (h + i)).sqrt(), &mut params);
        fill(layout.w4..layout.b4, (2.0 / (h + 2.0)).sqrt(), &mut params);
        Ok(DacModel {
            format_version: DAC_FORMAT_VERSION,
            config: config.clone(),
            scaler,
            layout,
            params,
            pretrain_losses: Vec::new(),
            train_losses: Vec::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input
    }

    pub fn n_params(&self) -> usize {
        self.layout.total
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, x: &[f64]) -> Cache {
        let l = &self.layout;
        let p = &self.params;
        let mut h1 = vec![0.0; l.hidden];
        affine(&p[l.w1..l.b1], &p[l.b1..l.w2], x, &mut h1);
        h1.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut z = vec![0.0; l.hidden];
        affine(&p[l.w2..l.b2], &p[l.b2..l.w3], &h1, &mut z);
        z.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut recon = vec![0.0; l.input];
        affine(&p[l.w3..l.b3], &p[l.b3..l.w4], &z, &mut recon);
        let mut logits = [0.0; 2];
        affine(&p[l.w4..l.b4], &p[l.b4..l.total], &z, &mut logits);
        Cache {
            h1,
            z,
            recon,
            probs: softmax(logits),
        }
    }

    /// Mean loss over the batch and its gradient. `inputs` are the
    /// (possibly corrupted) standardized inputs, `targets` the clean ones.
    /// Reconstruction error is averaged over examples and coordinates;
    /// cross-entropy over the labeled examples.
    pub fn loss_and_gradient(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        labels: &[Option<usize>],
        weights: LossWeights,
    ) -> (f64, Vec<f64>) {
        let l = self.layout;
        let p = &self.params;
        let mut g = vec![0.0; l.total];
        let n = inputs.len() as f64;
        let n_labeled = labels.iter().filter(|y| y.is_some()).count() as f64;
        let mut loss = 0.0;
        let mut dz = vec![0.0; l.hidden];
        let mut dh1 = vec![0.0; l.hidden];
        for ((x, t), y) in inputs.iter().zip(targets).zip(labels) {
            let c = self.forward(x);
            dz.iter_mut().for_each(|v| *v = 0.0);
            if weights.reconstruction != 0.0 {
                let scale = weights.reconstruction / (n * l.input as f64);
                for k in 0..l.input {
                    let diff = c.recon[k] - t[k];
                    loss += scale * diff * diff;
                    let d = 2.0 * scale * diff;
                    g[l.b3 + k] += d;
                    let row = l.w3 + k * l.hidden;
                    for j in 0..l.hidden {
                        g[row + j] += d * c.z[j];
                        dz[j] += d * p[row + j];
                    }
                }
            }
            if let (Some(y), true) = (y, weights.classification != 0.0) {
                let scale = weights.classification / n_labeled;
                loss -= scale * c.probs[*y].max(f64::MIN_POSITIVE).ln();
                for k in 0..2 {
                    let d = scale * (c.probs[k] - if k == *y { 1.0 } else { 0.0 });
                    g[l.b4 + k] += d;
                    let row = l.w4 + k * l.hidden;
                    for j in 0..l.hidden {
                        g[row + j] += d * c.z[j];
                        dz[j] += d * p[row + j];
                    }
                }
            }
            dh1.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..l.hidden {
                if c.z[j] <= 0.0 {
                    continue;
                }
                let d = dz[j];
                g[l.b2 + j] += d;
                let row = l.w2 + j * l.hidden;
                for (i, h) in c.h1.iter().enumerate() {
                    g[row + i] += d * h;
                    dh1[i] += d * p[row + i];
                }
            }
            for j in 0..l.hidden {
                if c.h1[j] <= 0.0 {
                    continue;
                }
                let d = dh1[j];
                g[l.b1 + j] += d;
                let row = l.w1 + j * l.input;
                for (i, xi) in x.iter().enumerate() {
                    g[row + i] += d * xi;
                }
            }
        }
        (loss, g)
    }

    /// Class probabilities `[collusive, other]` for a raw feature vector.
    pub fn predict(&self, v: &[f64]) -> Result<[f64; 2]> {
        let x = self.scaler.transform(v)?;
        Ok(self.forward(&x).probs)
    }

    /// Probabilities for an already standardized input.
    pub fn predict_standardized(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.forward(x).probs)
    }

    pub fn collusive_probability(&self, v: &[f64]) -> Result<f64> {
        Ok(self.predict(v)?[COLLUSIVE])
    }

    /// Reconstruction of a raw vector, in standardized units.
    pub fn reconstruct(&self, v: &[f64]) -> Result<Vec<f64>> {
        let x = self.scaler.transform(v)?;
        Ok(self.forward(&x).recon)
    }
}

/// Train on all `inputs`; `labels[i]` is `Some(true)` for collusive,
/// `Some(false)` for other, `None` for unlabeled (reconstruction only).
pub fn train_dac(inputs: &[Vec<f64>], labels: &[Option<bool>], config: &DacConfig) -> Result<DacModel> {
    let dim = check_rows(inputs)?;
    if labels.len() != inputs.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|l| **l == Some(true)).count();
    let n_neg = labels.iter().filter(|l| **l == Some(false)).count();
    if n_pos < 2 || n_neg < 2 {
        return Err(Error::InsufficientData(format!(
            "classification stage needs >= 2 labeled examples per class, got {n_pos} collusive and {n_neg} other"
        )));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let scaler = Standardizer::fit(inputs)?;
    let mut model = DacModel::init(dim, scaler, config)?;
    let clean: Vec<Vec<f64>> = model.scaler.transform_all(inputs)?;
    let classes: Vec<Option<usize>> = labels
        .iter()
        .map(|l| l.map(|c| if c { COLLUSIVE } else { OTHER }))
        .collect();
    let mut shuffle_rng = rng::stage_rng(config.seed, "dac-batches");
    let mut noise_rng = rng::stage_rng(config.seed, "dac-corruption");
    let head_frozen: Vec<bool> = (0..model.layout.total).map(|i| !model.layout.is_head(i)).collect();

    let mut run_stage = |model: &mut DacModel,
                         epochs: usize,
                         members: &[usize],
                         weights: LossWeights,
                         mask: Option<&[bool]>|
     -> Result<Vec<f64>> {
        let mut adam = Adam::new(model.layout.total, config.learning_rate);
        let mut losses = Vec::with_capacity(epochs);
        let mut order = members.to_vec();
        for _ in 0..epochs {
            order.shuffle(&mut shuffle_rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(config.batch_size) {
                let mut xs = Vec::with_capacity(batch.len());
                for &i in batch {
                    let noisy = corrupt_input(&inputs[i], config.corruption, &mut noise_rng)?;
                    xs.push(model.scaler.transform(&noisy)?);
                }
                let ts: Vec<Vec<f64>> = batch.iter().map(|&i| clean[i].clone()).collect();
                let ys: Vec<Option<usize>> = batch.iter().map(|&i| classes[i]).collect();
                let (loss, grad) = model.loss_and_gradient(&xs, &ts, &ys, weights);
                if !loss.is_finite() {
                    return Err(Error::Numerical("DAC loss diverged".into()));
                }
                epoch_loss += loss * batch.len() as f64;
                adam.step(&mut model.params, &grad, mask);
            }
            losses.push(epoch_loss / members.len() as f64);
        }
        Ok(losses)
    };

    let everyone: Vec<usize> = (0..inputs.len()).collect();
    model.pretrain_losses = run_stage(
        &mut model,
        config.ae_epochs,
        &everyone,
        LossWeights {
            reconstruction: 1.0,
            classification: 0.0,
        },
        Some(&head_frozen),
    )?;
    let labeled: Vec<usize> = everyone.iter().copied().filter(|&i| classes[i].is_some()).collect();
    model.train_losses = run_stage(
        &mut model,
        config.clf_epochs,
        &labeled,
        LossWeights {
            reconstruction: config.recon_weight,
            classification: 1.0,
        },
        None,
    )?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn unit_scaler(dim: usize) -> Standardizer {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
            constant: vec![false; dim],
        }
    }

    #[test]
    fn parameter_count_at_seven_inputs() {
        let m = DacModel::init(7, unit_scaler(7), &DacConfig::default()).unwrap();
        assert_eq!(m.n_params(), 7 * 128 + 128 + 128 * 128 + 128 + 128 * 7 + 7 + 128 * 2 + 2);
        assert_eq!(m.n_params(), 18_697);
    }

    #[test]
    fn finite_difference_gradient() {
        let cfg = DacConfig {
            hidden: 6,
            ..Default::default()
        };
        let mut m = DacModel::init(3, unit_scaler(3), &cfg).unwrap();
        let mut r = seeded(3);
        let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let ts: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let ys = vec![Some(0), Some(1), None, Some(1)];
        let w = LossWeights {
            reconstruction: 0.7,
            classification: 1.0,
        };
        let (_, g) = m.loss_and_gradient(&xs, &ts, &ys, w);
        for i in 0..m.n_params() {
            let orig = m.params[i];
            m.params[i] = orig + 1e-5;
            let up = m.loss_and_gradient(&xs, &ts, &ys, w).0;
            m.params[i] = orig - 1e-5;
            let down = m.loss_and_gradient(&xs, &ts, &ys, w).0;
            m.params[i] = orig;
            let fd = (up - down) / 2e-5;
            let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6);
            assert!(rel < 1e-4, "param {i}: analytic {} fd {fd}", g[i]);
        }
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax([1.0, 2.5]);
        let b = softmax([101.0, 102.5]);
        assert!((a[0] - b[0]).abs() < 1e-12);
        assert!((a[0] + a[1] - 1.0).abs() < 1e-12);
    }

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Option<bool>>) {
        let mut r = seeded(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let pos = i % 2 == 0;
            let c = if pos { 3.0 } else { -3.0 };
            xs.push((0..7).map(|_| c + r.random_range(-1.0..1.0)).collect());
            ys.push(Some(pos));
        }
        (xs, ys)
    }

    #[test]
    fn separable_clusters_train_to_high_accuracy() {
        let (xs, ys) = blobs(80, 5);
        let cfg = DacConfig {
            hidden: 32,
            ae_epochs: 5,
            clf_epochs: 20,
            ..Default::default()
        };
        let m = train_dac(&xs, &ys, &cfg).unwrap();
        let correct = xs
            .iter()
            .zip(&ys)
            .filter(|(x, y)| (m.collusive_probability(x).unwrap() > 0.5) == y.unwrap())
            .count();
        assert!(correct as f64 / xs.len() as f64 >= 0.95);
        let p = m.predict(&xs[0]).unwrap();
        assert_eq!(p, m.predict(&xs[0]).unwrap());
        assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn pretraining_reduces_reconstruction_loss() {
        let (xs, ys) = blobs(64, 9);
        let cfg = DacConfig {
            hidden: 32,
            clf_epochs: 1,
            ..Default::default()
        };
        let m = train_dac(&xs, &ys, &cfg).unwrap();
        assert_eq!(m.pretrain_losses.len(), 25);
        assert!(m.pretrain_losses[24] < m.pretrain_losses[0]);
    }

    #[test]
    fn single_class_rejected() {
        let (xs, _) = blobs(10, 1);
        let ys = vec![Some(true); 10];
        assert!(train_dac(&xs, &ys, &DacConfig::default()).is_err());
    }

    #[test]
    fn deterministic_training() {
        let (xs, ys) = blobs(20, 2);
        let cfg = DacConfig {
            hidden: 8,
            ae_epochs: 2,
            clf_epochs: 3,
            ..Default::default()
        };
        assert_eq!(train_dac(&xs, &ys, &cfg).unwrap(), train_dac(&xs, &ys, &cfg).unwrap());
    }

    #[test]
    fn mlp_baseline_leaves_decoder_untouched() {
        let (xs, ys) = blobs(20, 2);
        let cfg = DacConfig {
            hidden: 8,
            clf_epochs: 3,
            ..Default::default()
        }
        .mlp_baseline();
        let m = train_dac(&xs, &ys, &cfg).unwrap();
        let init = DacModel::init(7, m.scaler.clone(), &cfg).unwrap();
        let l = m.layout;
        assert_eq!(m.params[l.w3..l.w4], init.params[l.w3..l.w4]);
        assert!(m.pretrain_losses.is_empty());
    }
}
