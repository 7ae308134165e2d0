//! Gradient and training-behavior checks for the pair classifier.

use bitfilt_core::classifier::{
    batch_gradients, batch_loss, classifier_score, forward, train, PairExample, TrainConfig,
};
use bitfilt_core::embedding::EmbeddingMatrix;
use bitfilt_core::rng::derive_rng;
use rand::Rng;

fn random_matrix(seed: u64, rows: usize, dim: usize) -> EmbeddingMatrix {
    let mut rng = derive_rng(seed, 30, 0);
    let data = (0..rows * dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    EmbeddingMatrix::from_data(data, dim).unwrap()
}

fn random_examples(rows: usize) -> Vec<PairExample> {
    (0..rows)
        .map(|i| PairExample {
            src_row: i,
            tgt_row: i,
            positive: i % 2 == 0,
        })
        .collect()
}

/// Central finite differences over every parameter tensor, returning the
/// worst relative error against the analytic gradient.
pub fn max_gradient_rel_error(seed: u64, dim: usize, hidden: usize, batch_rows: usize) -> f64 {
    let src = random_matrix(seed, batch_rows, dim);
    let tgt = random_matrix(seed + 1, batch_rows, dim);
    let examples = random_examples(batch_rows);
    let config = TrainConfig {
        hidden_dim: hidden,
        seed,
        max_epochs: 1,
        ..TrainConfig::default()
    };
    // One step of training just to land on a generic parameter point.
    let mut model = train(&examples, &examples, &src, &tgt, &config).unwrap();
    let analytic = batch_gradients(&model, &examples, &src, &tgt).unwrap();

    let step = 1e-5;
    let mut worst: f64 = 0.0;
    macro_rules! check_tensor {
        ($field:ident, $grad:expr) => {
            for idx in 0..$grad.len() {
                let saved = model.$field[idx];
                model.$field[idx] = saved + step;
                let up = batch_loss(&model, &examples, &src, &tgt).unwrap();
                model.$field[idx] = saved - step;
                let down = batch_loss(&model, &examples, &src, &tgt).unwrap();
                model.$field[idx] = saved;
                let fd = (up - down) / (2.0 * step);
                let g = $grad[idx];
                let denom = g.abs().max(fd.abs()).max(1e-6);
                worst = worst.max((g - fd).abs() / denom);
            }
        };
    }
    check_tensor!(w, analytic.w);
    check_tensor!(b, analytic.b);
    check_tensor!(v, analytic.v);
    check_tensor!(c, analytic.c);
    worst
}

#[test]
fn gradients_match_finite_differences() {
    for seed in [3u64, 17, 91] {
        let err = max_gradient_rel_error(seed, 6, 4, 8);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn training_loss_is_non_increasing_at_small_rate() {
    // Separable toy data, tiny learning rate: full-set loss after each
    // training run of e epochs must not increase with e.
    let dim = 8;
    let src = random_matrix(500, 60, dim);
    let mut tgt_data = Vec::new();
    let mut rng = derive_rng(501, 31, 0);
    for i in 0..60 {
        if i % 2 == 0 {
            tgt_data.extend(src.row(i).iter().map(|&x| x + rng.gen_range(-0.01f32..0.01)));
        } else {
            for _ in 0..dim {
                tgt_data.push(rng.gen_range(-1.0f32..1.0));
            }
        }
    }
    let tgt = EmbeddingMatrix::from_data(tgt_data, dim).unwrap();
    let examples = random_examples(60);

    let mut last = f64::INFINITY;
    for epochs in [1usize, 3, 6, 10] {
        let config = TrainConfig {
            learning_rate: 1e-4,
            hidden_dim: 8,
            max_epochs: epochs,
            patience: 100,
            seed: 7,
            batch_size: 10,
        };
        // Train without early stopping interference by validating on train.
        let model = train(&examples, &examples, &src, &tgt, &config).unwrap();
        let mut full = model.clone();
        full.meta.epochs_run = 0; // metadata is irrelevant to the loss
        let loss = batch_loss(&full, &examples, &src, &tgt).unwrap();
        assert!(
            loss <= last + 1e-9,
            "loss rose from {last} to {loss} at {epochs} epochs"
        );
        last = loss;
    }
}

#[test]
fn classifier_score_is_within_unit_interval() {
    // ReLU outputs are non-negative, so the cosine of transformed vectors
    // lands in [0, 1].
    let dim = 5;
    let src = random_matrix(600, 30, dim);
    let tgt = random_matrix(601, 30, dim);
    let examples = random_examples(30);
    let config = TrainConfig {
        hidden_dim: 6,
        max_epochs: 3,
        seed: 11,
        ..TrainConfig::default()
    };
    let model = train(&examples, &examples, &src, &tgt, &config).unwrap();
    for i in 0..30 {
        let s = classifier_score(src.row(i), tgt.row(i), &model).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&s), "score {s}");
        let (probs, _, _) = forward(src.row(i), tgt.row(i), &model).unwrap();
        assert!((probs[0] + probs[1] - 1.0).abs() < 1e-9);
        assert!(probs[0] > 0.0 && probs[1] > 0.0);
    }
}
