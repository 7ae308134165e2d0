//! Siamese pair classifier.
//!
//! Both sentence embeddings pass through one shared fully-connected ReLU
//! layer; a two-way softmax head over [u_tr; v_tr; |u_tr - v_tr|] is trained
//! with cross-entropy on positive/negative pairs. At scoring time the head is
//! discarded and the cosine of the two transformed embeddings is the score.
//!
//! Everything runs in f64 with hand-derived gradients; training is
//! single-threaded and bit-deterministic given the seed.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::{EmbeddingMatrix, ZERO_NORM_EPS};
use crate::error::CoreError;
use crate::rng::derive_rng;
use crate::score::{ScoreEntry, ScoreTable};

const STREAM_INIT: u64 = 10;
const STREAM_SHUFFLE: u64 = 11;

/// Class index 1 is "parallel", class index 0 is "not parallel".
pub const CLASS_NEGATIVE: usize = 0;
pub const CLASS_POSITIVE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Shared transform, hidden_dim x input_dim row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    /// Softmax head, 2 x (3 * hidden_dim) row-major.
    pub v: Vec<f64>,
    pub c: [f64; 2],
    pub meta: TrainMeta,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            hidden_dim: 256,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), CoreError> {
        if self.learning_rate <= 0.0 {
            return Err(CoreError::InvalidConfig("learning rate must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 || self.hidden_dim == 0
        {
            return Err(CoreError::InvalidConfig(
                "batch size, epochs, patience, and hidden dim must be positive",
            ));
        }
        Ok(())
    }
}

/// One training example: row indices into the two embedding matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairExample {
    pub src_row: usize,
    pub tgt_row: usize,
    pub positive: bool,
}

fn to_f64(row: &[f32]) -> Vec<f64> {
    row.iter().map(|&x| f64::from(x)).collect()
}

fn relu_layer(model: &ClassifierModel, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (h, d) = (model.hidden_dim, model.input_dim);
    let mut pre = vec![0.0; h];
    for i in 0..h {
        let row = &model.w[i * d..(i + 1) * d];
        let mut acc = model.b[i];
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        pre[i] = acc;
    }
    let post = pre.iter().map(|&p| p.max(0.0)).collect();
    (pre, post)
}

fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = libm::exp(logits[0] - m);
    let e1 = libm::exp(logits[1] - m);
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

fn head_features(u_tr: &[f64], v_tr: &[f64]) -> Vec<f64> {
    let h = u_tr.len();
    let mut phi = Vec::with_capacity(3 * h);
    phi.extend_from_slice(u_tr);
    phi.extend_from_slice(v_tr);
    for i in 0..h {
        phi.push((u_tr[i] - v_tr[i]).abs());
    }
    phi
}

/// Full forward pass: class probabilities plus both transformed embeddings.
pub fn forward(
    u: &[f32],
    v: &[f32],
    model: &ClassifierModel,
) -> Result<([f64; 2], Vec<f64>, Vec<f64>), CoreError> {
    if u.len() != model.input_dim || v.len() != model.input_dim {
        return Err(CoreError::DimMismatch {
            left: u.len().max(v.len()),
            right: model.input_dim,
        });
    }
    let (_, u_tr) = relu_layer(model, &to_f64(u));
    let (_, v_tr) = relu_layer(model, &to_f64(v));
    let phi = head_features(&u_tr, &v_tr);
    let h3 = 3 * model.hidden_dim;
    let mut logits = [model.c[0], model.c[1]];
    for k in 0..2 {
        let row = &model.v[k * h3..(k + 1) * h3];
        for (vv, pv) in row.iter().zip(&phi) {
            logits[k] += vv * pv;
        }
    }
    Ok((softmax2(logits), u_tr, v_tr))
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub v: Vec<f64>,
    pub c: [f64; 2],
}

impl Gradients {
    fn zeros(model: &ClassifierModel) -> Self {
        Self {
            w: vec![0.0; model.w.len()],
            b: vec![0.0; model.b.len()],
            v: vec![0.0; model.v.len()],
            c: [0.0; 2],
        }
    }

    fn scale(&mut self, s: f64) {
        for g in self.w.iter_mut().chain(&mut self.b).chain(&mut self.v) {
            *g *= s;
        }
        self.c[0] *= s;
        self.c[1] *= s;
    }
}

fn example_rows<'a>(
    ex: &PairExample,
    src: &'a EmbeddingMatrix,
    tgt: &'a EmbeddingMatrix,
) -> Result<(&'a [f32], &'a [f32]), CoreError> {
    Ok((src.try_row(ex.src_row)?, tgt.try_row(ex.tgt_row)?))
}

/// Mean cross-entropy of a batch.
pub fn batch_loss(
    model: &ClassifierModel,
    batch: &[PairExample],
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
) -> Result<f64, CoreError> {
    let mut loss = 0.0;
    for ex in batch {
        let (u, v) = example_rows(ex, src, tgt)?;
        let (probs, _, _) = forward(u, v, model)?;
        let label = if ex.positive { CLASS_POSITIVE } else { CLASS_NEGATIVE };
        loss -= libm::log(probs[label].max(1e-300));
    }
    Ok(loss / batch.len() as f64)
}

/// Mean cross-entropy gradient of a batch with respect to every parameter.
pub fn batch_gradients(
    model: &ClassifierModel,
    batch: &[PairExample],
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
) -> Result<Gradients, CoreError> {
    let (h, d) = (model.hidden_dim, model.input_dim);
    let h3 = 3 * h;
    let mut grads = Gradients::zeros(model);
    for ex in batch {
        let (u32_row, v32_row) = example_rows(ex, src, tgt)?;
        let u = to_f64(u32_row);
        let v = to_f64(v32_row);
        let (u_pre, u_tr) = relu_layer(model, &u);
        let (v_pre, v_tr) = relu_layer(model, &v);
        let phi = head_features(&u_tr, &v_tr);
        let mut logits = [model.c[0], model.c[1]];
        for k in 0..2 {
            let row = &model.v[k * h3..(k + 1) * h3];
            for (vv, pv) in row.iter().zip(&phi) {
                logits[k] += vv * pv;
            }
        }
        let probs = softmax2(logits);
        let label = if ex.positive { CLASS_POSITIVE } else { CLASS_NEGATIVE };

        let mut dlogits = probs;
        dlogits[label] -= 1.0;

        grads.c[0] += dlogits[0];
        grads.c[1] += dlogits[1];
        let mut dphi = vec![0.0; h3];
        for k in 0..2 {
            let vrow = &model.v[k * h3..(k + 1) * h3];
            let grow = &mut grads.v[k * h3..(k + 1) * h3];
            for j in 0..h3 {
                grow[j] += dlogits[k] * phi[j];
                dphi[j] += dlogits[k] * vrow[j];
            }
        }

        // phi = [u_tr; v_tr; |u_tr - v_tr|]
        let mut du_tr = vec![0.0; h];
        let mut dv_tr = vec![0.0; h];
        for i in 0..h {
            let diff = u_tr[i] - v_tr[i];
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            du_tr[i] = dphi[i] + dphi[2 * h + i] * sign;
            dv_tr[i] = dphi[h + i] - dphi[2 * h + i] * sign;
        }

        for i in 0..h {
            let du_pre = if u_pre[i] > 0.0 { du_tr[i] } else { 0.0 };
            let dv_pre = if v_pre[i] > 0.0 { dv_tr[i] } else { 0.0 };
            grads.b[i] += du_pre + dv_pre;
            let wrow = &mut grads.w[i * d..(i + 1) * d];
            for j in 0..d {
                wrow[j] += du_pre * u[j] + dv_pre * v[j];
            }
        }
    }
    grads.scale(1.0 / batch.len() as f64);
    Ok(grads)
}

fn init_model(input_dim: usize, config: &TrainConfig) -> ClassifierModel {
    let h = config.hidden_dim;
    let mut rng = derive_rng(config.seed, STREAM_INIT, 0);
    let uniform = |fan_in: usize, n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let bound = 1.0 / libm::sqrt(fan_in as f64);
        (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
    };
    let w = uniform(input_dim, h * input_dim, &mut rng);
    let b = uniform(input_dim, h, &mut rng);
    let v = uniform(3 * h, 2 * 3 * h, &mut rng);
    let c_vals = uniform(3 * h, 2, &mut rng);
    ClassifierModel {
        input_dim,
        hidden_dim: h,
        w,
        b,
        v,
        c: [c_vals[0], c_vals[1]],
        meta: TrainMeta {
            seed: config.seed,
            epochs_run: 0,
            val_accuracy: 0.0,
        },
    }
}

fn accuracy(
    model: &ClassifierModel,
    examples: &[PairExample],
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
) -> Result<f64, CoreError> {
    let mut hits = 0usize;
    for ex in examples {
        let (u, v) = example_rows(ex, src, tgt)?;
        let (probs, _, _) = forward(u, v, model)?;
        let predicted_positive = probs[CLASS_POSITIVE] > probs[CLASS_NEGATIVE];
        if predicted_positive == ex.positive {
            hits += 1;
        }
    }
    Ok(hits as f64 / examples.len() as f64)
}

fn both_classes(examples: &[PairExample]) -> bool {
    examples.iter().any(|e| e.positive) && examples.iter().any(|e| !e.positive)
}

/// Mini-batch gradient descent with early stopping on validation accuracy;
/// returns the best-validation snapshot.
pub fn train(
    train_set: &[PairExample],
    val_set: &[PairExample],
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    config: &TrainConfig,
) -> Result<ClassifierModel, CoreError> {
    config.validate()?;
    if !both_classes(train_set) || !both_classes(val_set) {
        return Err(CoreError::DegenerateLabels);
    }
    let mut model = init_model(src.dim(), config);
    if src.dim() != tgt.dim() {
        return Err(CoreError::DimMismatch {
            left: src.dim(),
            right: tgt.dim(),
        });
    }

    let mut best = model.clone();
    let mut best_acc = accuracy(&model, val_set, src, tgt)?;
    best.meta.val_accuracy = best_acc;
    let mut stale_epochs = 0usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.max_epochs {
        let mut rng = derive_rng(config.seed, STREAM_SHUFFLE, epoch as u64);
        order.shuffle(&mut rng);
        for batch_ids in order.chunks(config.batch_size) {
            let batch: Vec<PairExample> = batch_ids.iter().map(|&i| train_set[i]).collect();
            let grads = batch_gradients(&model, &batch, src, tgt)?;
            let lr = config.learning_rate;
            for (p, g) in model.w.iter_mut().zip(&grads.w) {
                *p -= lr * g;
            }
            for (p, g) in model.b.iter_mut().zip(&grads.b) {
                *p -= lr * g;
            }
            for (p, g) in model.v.iter_mut().zip(&grads.v) {
                *p -= lr * g;
            }
            model.c[0] -= lr * grads.c[0];
            model.c[1] -= lr * grads.c[1];
        }
        let loss = batch_loss(&model, train_set, src, tgt)?;
        if !loss.is_finite() {
            return Err(CoreError::DivergedTraining);
        }
        let val_acc = accuracy(&model, val_set, src, tgt)?;
        model.meta.epochs_run = epoch + 1;
        if val_acc > best_acc {
            best_acc = val_acc;
            best = model.clone();
            best.meta.val_accuracy = val_acc;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
    }
    Ok(best)
}

/// Cosine similarity of the transformed embeddings; 0.0 when either
/// transform collapses to the zero vector.
pub fn classifier_score(u: &[f32], v: &[f32], model: &ClassifierModel) -> Result<f64, CoreError> {
    let (_, u_tr, v_tr) = forward(u, v, model)?;
    let norm = |x: &[f64]| libm::sqrt(x.iter().map(|a| a * a).sum());
    let (nu, nv) = (norm(&u_tr), norm(&v_tr));
    if nu < ZERO_NORM_EPS || nv < ZERO_NORM_EPS {
        return Ok(0.0);
    }
    let dot: f64 = u_tr.iter().zip(&v_tr).map(|(a, b)| a * b).sum();
    Ok(dot / (nu * nv))
}

/// Classifier score for every candidate pair.
pub fn score_corpus_classifier(
    pairs: &[(usize, usize)],
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    model: &ClassifierModel,
) -> Result<ScoreTable, CoreError> {
    let entries = pairs
        .iter()
        .map(|&(i, j)| {
            let u = src.try_row(i)?;
            let v = tgt.try_row(j)?;
            Ok(ScoreEntry::accepted(classifier_score(u, v, model)?))
        })
        .collect::<Result<_, CoreError>>()?;
    Ok(ScoreTable { entries })
}
