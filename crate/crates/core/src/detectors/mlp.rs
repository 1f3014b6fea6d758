//! A small fully-connected binary classifier trained from scratch.
//!
//! Architecture: [2n′ → h1 → h2 → 1] with rectifier hidden activations and a
//! logistic output, trained by minibatch Adam on binary cross-entropy. The
//! network is deliberately tiny (hand-rolled, f64, single-threaded), which
//! keeps training deterministic given the seed and lets the analytic
//! gradients be checked against finite differences.
//!
//! Inputs are the concatenated received copies [y1; y2] of a frame prefix,
//! standardised per feature with statistics estimated on the training set and
//! stored in the model.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use crate::channel::ReceivedPair;
use crate::detectors::{calibrate_threshold, ThresholdDirection, MD_TARGET};
use crate::error::{Error, Result};
use crate::rng::substream;

const MAGIC: &[u8; 12] = b"ECHODET-MLP\0";
const FORMAT_VERSION: u32 = 1;

/// Trained classifier: architecture, flat parameter vector, decision
/// threshold and feature-standardisation statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// [input, h1, h2, 1]
    dims: [usize; 4],
    /// w1 | b1 | w2 | b2 | w3 | b3, matrices row-major.
    params: Vec<f64>,
    /// Attack is declared when the output probability is >= threshold.
    pub threshold: f64,
    feat_mean: Vec<f64>,
    feat_std: Vec<f64>,
    /// Seed the model was initialised/trained with.
    pub seed: u64,
}

/// Training hyper-parameters. `train_frames` / `val_frames` size the data
/// partitions generated by the evaluation layer; the trainer itself consumes
/// whatever frames it is handed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub train_frames: usize,
    pub val_frames: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 8,
            batch_size: 512,
            step_size: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            train_frames: 100_000,
            val_frames: 20_000,
            seed: 0,
        }
    }
}

/// Trained model plus the per-epoch training losses.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub epoch_losses: Vec<f64>,
}

fn param_count(dims: &[usize; 4]) -> usize {
    dims[1] * dims[0] + dims[1] + dims[2] * dims[1] + dims[2] + dims[3] * dims[2] + dims[3]
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy from the logit, in a form that never evaluates
/// ln(0): max(z, 0) − z·t + ln(1 + exp(−|z|)).
fn bce_from_logit(z: f64, t: f64) -> f64 {
    z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
}

impl MlpModel {
    /// Fresh model with symmetric uniform fan-in-scaled weights,
    /// U(−1/√fan_in, 1/√fan_in), zero biases, identity standardisation and
    /// threshold 0.5.
    pub fn new_random(input_dim: usize, h1: usize, h2: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || h1 == 0 || h2 == 0 {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        let dims = [input_dim, h1, h2, 1];
        let mut params = vec![0.0; param_count(&dims)];
        let mut rng = substream(seed, 0);
        let mut offset = 0;
        for layer in 0..3 {
            let (rows, cols) = (dims[layer + 1], dims[layer]);
            let bound = 1.0 / (cols as f64).sqrt();
            for w in params[offset..offset + rows * cols].iter_mut() {
                *w = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
            offset += rows * cols + rows; // biases stay zero
        }
        Ok(MlpModel {
            dims,
            params,
            threshold: 0.5,
            feat_mean: vec![0.0; input_dim],
            feat_std: vec![1.0; input_dim],
            seed,
        })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    /// Frame prefix length the model consumes (half the input width).
    pub fn n_prime(&self) -> usize {
        self.dims[0] / 2
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn feature_stats(&self) -> (&[f64], &[f64]) {
        (&self.feat_mean, &self.feat_std)
    }

    fn offsets(&self) -> [usize; 6] {
        let [i, h1, h2, o] = self.dims;
        let w1 = 0;
        let b1 = w1 + h1 * i;
        let w2 = b1 + h1;
        let b2 = w2 + h2 * h1;
        let w3 = b2 + h2;
        let b3 = w3 + o * h2;
        [w1, b1, w2, b2, w3, b3]
    }

    /// Output probability for one feature vector (no standardisation),
    /// logistic(W3·relu(W2·relu(W1·f + b1) + b2) + b3).
    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.dims[0] {
            return Err(Error::invalid(format!(
                "feature length {} does not match input width {}",
                features.len(),
                self.dims[0]
            )));
        }
        Ok(sigmoid(self.logit(features)))
    }

    fn logit(&self, features: &[f64]) -> f64 {
        let [i, h1, h2, _] = self.dims;
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let p = &self.params;
        let mut a1 = vec![0.0; h1];
        for r in 0..h1 {
            let row = &p[w1 + r * i..w1 + (r + 1) * i];
            let mut z = p[b1 + r];
            for (w, f) in row.iter().zip(features) {
                z += w * f;
            }
            a1[r] = z.max(0.0);
        }
        let mut a2 = vec![0.0; h2];
        for r in 0..h2 {
            let row = &p[w2 + r * h1..w2 + (r + 1) * h1];
            let mut z = p[b2 + r];
            for (w, a) in row.iter().zip(&a1) {
                z += w * a;
            }
            a2[r] = z.max(0.0);
        }
        let mut z3 = p[b3];
        for (w, a) in p[w3..w3 + h2].iter().zip(&a2) {
            z3 += w * a;
        }
        z3
    }

    /// Standardised features [y1[..n′]; y2[..n′]] for one received pair.
    pub fn features_for(&self, pair: &ReceivedPair) -> Result<Vec<f64>> {
        let np = self.n_prime();
        if pair.len() < np {
            return Err(Error::invalid(format!(
                "pair length {} shorter than detector prefix {np}",
                pair.len()
            )));
        }
        let mut f = Vec::with_capacity(2 * np);
        f.extend_from_slice(&pair.y1[..np]);
        f.extend_from_slice(&pair.y2[..np]);
        for (v, (m, s)) in f.iter_mut().zip(self.feat_mean.iter().zip(&self.feat_std)) {
            *v = (*v - m) / s;
        }
        Ok(f)
    }

    /// Attack probability for one received pair.
    pub fn score_pair(&self, pair: &ReceivedPair) -> Result<f64> {
        self.forward(&self.features_for(pair)?)
    }

    /// Write the model in the flat versioned binary format (documented in
    /// the README); round-trips bit-exactly.
    pub fn save_to(&self, w: &mut dyn Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        for d in self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&self.threshold.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in self.feat_mean.iter().chain(&self.feat_std) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for v in &self.params {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load_from(r: &mut dyn Read) -> Result<Self> {
        let mut magic = [0u8; 12];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format version {version}"
            )));
        }
        let mut dims = [0usize; 4];
        for d in dims.iter_mut() {
            *d = read_u32(r)? as usize;
        }
        if dims[3] != 1 || dims.iter().any(|&d| d == 0) {
            return Err(Error::ModelFormat(format!("bad layer sizes {dims:?}")));
        }
        let threshold = read_f64(r)?;
        let seed = read_u64(r)?;
        let feat_mean = read_f64_vec(r, dims[0])?;
        let feat_std = read_f64_vec(r, dims[0])?;
        let count = read_u64(r)? as usize;
        if count != param_count(&dims) {
            return Err(Error::ModelFormat(format!(
                "parameter count {count} does not match layer sizes {dims:?}"
            )));
        }
        let params = read_f64_vec(r, count)?;
        Ok(MlpModel {
            dims,
            params,
            threshold,
            feat_mean,
            feat_std,
            seed,
        })
    }

    pub fn save_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_from(&mut BufReader::new(File::open(path)?))
    }
}

fn read_u32(r: &mut dyn Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut dyn Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut dyn Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64_vec(r: &mut dyn Read, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

/// Mean binary cross-entropy of the model on a flattened batch.
pub fn batch_loss(model: &MlpModel, features: &[f64], labels: &[f64]) -> f64 {
    let dim = model.dims[0];
    assert_eq!(features.len(), labels.len() * dim, "ragged batch");
    labels
        .iter()
        .enumerate()
        .map(|(i, &t)| bce_from_logit(model.logit(&features[i * dim..(i + 1) * dim]), t))
        .sum::<f64>()
        / labels.len() as f64
}

/// Mean loss and its gradient with respect to the flat parameter vector.
pub fn batch_loss_and_grad(
    model: &MlpModel,
    features: &[f64],
    labels: &[f64],
) -> (f64, Vec<f64>) {
    let [i, h1, h2, _] = model.dims;
    let [w1, b1, w2, b2, w3, b3] = model.offsets();
    let p = &model.params;
    assert_eq!(features.len(), labels.len() * i, "ragged batch");

    let mut grad = vec![0.0; p.len()];
    let mut z1 = vec![0.0; h1];
    let mut a1 = vec![0.0; h1];
    let mut z2 = vec![0.0; h2];
    let mut a2 = vec![0.0; h2];
    let mut d1 = vec![0.0; h1];
    let mut d2 = vec![0.0; h2];
    let mut loss = 0.0;

    for (s, &t) in labels.iter().enumerate() {
        let x = &features[s * i..(s + 1) * i];
        for r in 0..h1 {
            let row = &p[w1 + r * i..w1 + (r + 1) * i];
            let mut z = p[b1 + r];
            for (w, f) in row.iter().zip(x) {
                z += w * f;
            }
            z1[r] = z;
            a1[r] = z.max(0.0);
        }
        for r in 0..h2 {
            let row = &p[w2 + r * h1..w2 + (r + 1) * h1];
            let mut z = p[b2 + r];
            for (w, a) in row.iter().zip(&a1) {
                z += w * a;
            }
            z2[r] = z;
            a2[r] = z.max(0.0);
        }
        let mut z3 = p[b3];
        for (w, a) in p[w3..w3 + h2].iter().zip(&a2) {
            z3 += w * a;
        }
        loss += bce_from_logit(z3, t);

        // Backward.
        let d3 = sigmoid(z3) - t;
        for r in 0..h2 {
            grad[w3 + r] += d3 * a2[r];
            d2[r] = if z2[r] > 0.0 { d3 * p[w3 + r] } else { 0.0 };
        }
        grad[b3] += d3;
        for r in 0..h1 {
            d1[r] = 0.0;
        }
        for r in 0..h2 {
            if d2[r] == 0.0 {
                continue;
            }
            let row = &p[w2 + r * h1..w2 + (r + 1) * h1];
            let g = &mut grad[w2 + r * h1..w2 + (r + 1) * h1];
            for c in 0..h1 {
                g[c] += d2[r] * a1[c];
            }
            for c in 0..h1 {
                d1[c] += d2[r] * row[c];
            }
            grad[b2 + r] += d2[r];
        }
        for r in 0..h1 {
            let d = if z1[r] > 0.0 { d1[r] } else { 0.0 };
            if d == 0.0 {
                continue;
            }
            let g = &mut grad[w1 + r * i..w1 + (r + 1) * i];
            for (gc, f) in g.iter_mut().zip(x) {
                *gc += d * f;
            }
            grad[b1 + r] += d;
        }
    }

    let inv = 1.0 / labels.len() as f64;
    for g in grad.iter_mut() {
        *g *= inv;
    }
    (loss * inv, grad)
}

/// Train a classifier on labelled received pairs (ground truth taken from
/// each pair) and calibrate its decision threshold to the standard 0.1%
/// miss-detection target on the attacked training frames.
pub fn mlp_train(pairs: &[ReceivedPair], n_prime: usize, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.epochs == 0 {
        return Err(Error::invalid("epochs must be at least 1"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch_size must be at least 1"));
    }
    if n_prime == 0 {
        return Err(Error::invalid("n_prime must be at least 1"));
    }
    if pairs.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if pairs.iter().any(|p| p.len() < n_prime) {
        return Err(Error::invalid("all pairs must be at least n_prime long"));
    }
    let attacked = pairs.iter().filter(|p| p.truth.attacked()).count();
    if attacked == 0 || attacked == pairs.len() {
        return Err(Error::invalid("training data must contain both classes"));
    }

    let dim = 2 * n_prime;
    let n = pairs.len();
    let mut features = vec![0.0; n * dim];
    let mut labels = vec![0.0; n];
    for (s, pair) in pairs.iter().enumerate() {
        let row = &mut features[s * dim..(s + 1) * dim];
        row[..n_prime].copy_from_slice(&pair.y1[..n_prime]);
        row[n_prime..].copy_from_slice(&pair.y2[..n_prime]);
        labels[s] = if pair.truth.attacked() { 1.0 } else { 0.0 };
    }

    // Per-feature standardisation from the training set.
    let mut mean = vec![0.0; dim];
    let mut std = vec![0.0; dim];
    for s in 0..n {
        for c in 0..dim {
            mean[c] += features[s * dim + c];
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    for s in 0..n {
        for c in 0..dim {
            let d = features[s * dim + c] - mean[c];
            std[c] += d * d;
        }
    }
    for s in std.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    for s in 0..n {
        for c in 0..dim {
            features[s * dim + c] = (features[s * dim + c] - mean[c]) / std[c];
        }
    }

    let h1 = (4 * n_prime).min(256);
    let h2 = (h1 / 2).max(1);
    let mut model = MlpModel::new_random(dim, h1, h2, cfg.seed)?;
    model.feat_mean = mean;
    model.feat_std = std;

    let mut adam_m = vec![0.0; model.params.len()];
    let mut adam_v = vec![0.0; model.params.len()];
    let mut step = 0u32;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = substream(cfg.seed, 1);
    let mut batch_features = vec![0.0; cfg.batch_size.min(n) * dim];
    let mut batch_labels = vec![0.0; cfg.batch_size.min(n)];
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        // Fisher-Yates shuffle.
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            for (b, &s) in chunk.iter().enumerate() {
                batch_features[b * dim..(b + 1) * dim]
                    .copy_from_slice(&features[s * dim..(s + 1) * dim]);
                batch_labels[b] = labels[s];
            }
            let (loss, grad) = batch_loss_and_grad(
                &model,
                &batch_features[..chunk.len() * dim],
                &batch_labels[..chunk.len()],
            );
            epoch_loss += loss * chunk.len() as f64;

            step += 1;
            let bc1 = 1.0 - cfg.beta1.powi(step as i32);
            let bc2 = 1.0 - cfg.beta2.powi(step as i32);
            for (k, g) in grad.iter().enumerate() {
                adam_m[k] = cfg.beta1 * adam_m[k] + (1.0 - cfg.beta1) * g;
                adam_v[k] = cfg.beta2 * adam_v[k] + (1.0 - cfg.beta2) * g * g;
                let m_hat = adam_m[k] / bc1;
                let v_hat = adam_v[k] / bc2;
                model.params[k] -= cfg.step_size * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
        epoch_loss /= n as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::TrainingFailure(format!(
                "loss became non-finite in epoch {epoch} (step size {})",
                cfg.step_size
            )));
        }
        epoch_losses.push(epoch_loss);
    }

    if epoch_losses[cfg.epochs - 1] > epoch_losses[0] {
        return Err(Error::TrainingFailure(format!(
            "training did not converge: first-epoch loss {} < final-epoch loss {}",
            epoch_losses[0],
            epoch_losses[cfg.epochs - 1]
        )));
    }

    // Threshold from attacked training frames at the 0.1% miss target.
    let attack_scores: Vec<f64> = (0..n)
        .filter(|&s| labels[s] == 1.0)
        .map(|s| {
            let z = model.logit(&features[s * dim..(s + 1) * dim]);
            sigmoid(z)
        })
        .collect();
    model.threshold =
        calibrate_threshold(&attack_scores, MD_TARGET, ThresholdDirection::AttackIfHigh)?;

    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}
