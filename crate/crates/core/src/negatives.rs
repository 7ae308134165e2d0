//! Negative-pair generation for classifier training.
//!
//! Each positive pair contributes one negative whose target side is corrupted
//! by one of three strategies: replace with a nearby sentence from the target
//! corpus, truncate 30-70% of trailing words, or swap the order of 30-70% of
//! the words. Targets of fewer than two words always fall back to the
//! adjacent strategy. Generation is deterministic: every draw comes from a
//! counter-based stream keyed by the positive-pair index.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::CoreError;
use crate::rng::derive_rng;

const STREAM_NEGATIVES: u64 = 1;
const STREAM_SPLIT: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Adjacent,
    Truncate,
    Swap,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Adjacent => "adjacent",
            Strategy::Truncate => "truncate",
            Strategy::Swap => "swap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone)]
pub struct CorruptionSpec {
    pub window: usize,
    pub fraction_lo: f64,
    pub fraction_hi: f64,
    pub strategy_weights: [f64; 3],
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            window: 2,
            fraction_lo: 0.3,
            fraction_hi: 0.7,
            strategy_weights: [1.0, 1.0, 1.0],
            seed: 0,
        }
    }
}

impl CorruptionSpec {
    fn validate(&self) -> Result<(), CoreError> {
        if self.window == 0 {
            return Err(CoreError::InvalidConfig("window must be >= 1"));
        }
        if !(self.fraction_lo > 0.0
            && self.fraction_lo <= self.fraction_hi
            && self.fraction_hi < 1.0)
        {
            return Err(CoreError::InvalidConfig("fraction range must satisfy 0 < lo <= hi < 1"));
        }
        if self.strategy_weights.iter().any(|&w| w < 0.0)
            || self.strategy_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(CoreError::InvalidConfig(
                "strategy weights must be non-negative with positive sum",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub src: String,
    pub tgt: String,
    pub label: Label,
    pub strategy: Option<Strategy>,
}

/// Training examples plus a class-balanced validation split, disjoint from
/// the training half by originating positive-pair index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPairSet {
    pub train: Vec<LabeledPair>,
    pub validation: Vec<LabeledPair>,
}

/// Uniformly picks a sentence within `window` positions of `i`, excluding
/// `i` itself and clipping at the corpus bounds.
pub fn adjacent_negative(
    corpus: &[String],
    i: usize,
    window: usize,
    rng: &mut ChaCha8Rng,
) -> Result<String, CoreError> {
    if corpus.len() < 2 {
        return Err(CoreError::NoAdjacent);
    }
    if i >= corpus.len() {
        return Err(CoreError::IndexOutOfRange {
            index: i,
            len: corpus.len(),
        });
    }
    let lo = i.saturating_sub(window);
    let hi = (i + window).min(corpus.len() - 1);
    let candidates: Vec<usize> = (lo..=hi).filter(|&j| j != i).collect();
    let j = candidates[rng.gen_range(0..candidates.len())];
    Ok(corpus[j].clone())
}

/// Half-away-from-zero rounding, bit-reproducible across platforms.
fn round_half_away(x: f64) -> usize {
    libm::round(x) as usize
}

fn draw_fraction(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Removes the trailing round(f*n) words for f drawn in the fraction range;
/// always keeps at least one word and removes at least one.
pub fn truncate_negative(
    sentence: &str,
    rng: &mut ChaCha8Rng,
    lo: f64,
    hi: f64,
) -> Result<String, CoreError> {
    let words: Vec<&str> = sentence.split_whitespace().collect();
    let n = words.len();
    if n < 2 {
        return Err(CoreError::TooShort { words: n });
    }
    let f = draw_fraction(rng, lo, hi);
    let removed = round_half_away(f * n as f64).clamp(1, n - 1);
    Ok(words[..n - removed].join(" "))
}

/// Permutes max(2, round(f*n)) word positions chosen uniformly without
/// replacement; the permutation is re-drawn until the selected words move
/// (at most 16 attempts, then a rotation by one is applied). The word
/// multiset is preserved.
pub fn swap_negative(
    sentence: &str,
    rng: &mut ChaCha8Rng,
    lo: f64,
    hi: f64,
) -> Result<String, CoreError> {
    let mut words: Vec<&str> = sentence.split_whitespace().collect();
    let n = words.len();
    if n < 2 {
        return Err(CoreError::TooShort { words: n });
    }
    let f = draw_fraction(rng, lo, hi);
    let m = round_half_away(f * n as f64).max(2).min(n);

    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(rng);
    let mut selected: Vec<usize> = positions[..m].to_vec();
    selected.sort_unstable();

    let original: Vec<&str> = selected.iter().map(|&p| words[p]).collect();
    let mut permuted = original.clone();
    let mut attempts = 0;
    loop {
        permuted.shuffle(rng);
        if permuted != original || attempts >= 16 {
            break;
        }
        attempts += 1;
    }
    if permuted == original {
        permuted.rotate_left(1);
    }
    for (&pos, &word) in selected.iter().zip(&permuted) {
        words[pos] = word;
    }
    Ok(words.join(" "))
}

fn draw_strategy(rng: &mut ChaCha8Rng, weights: &[f64; 3]) -> Strategy {
    let total: f64 = weights.iter().sum();
    let u = rng.gen_range(0.0..total);
    if u < weights[0] {
        Strategy::Adjacent
    } else if u < weights[0] + weights[1] {
        Strategy::Truncate
    } else {
        Strategy::Swap
    }
}

fn adjacent_differing(
    corpus: &[String],
    i: usize,
    window: usize,
    rng: &mut ChaCha8Rng,
) -> Result<String, CoreError> {
    // Prefer a neighbor whose text actually differs; duplicated corpus lines
    // would otherwise produce a "negative" identical to the positive.
    for _ in 0..8 {
        let candidate = adjacent_negative(corpus, i, window, rng)?;
        if candidate != corpus[i] {
            return Ok(candidate);
        }
    }
    adjacent_negative(corpus, i, window, rng)
}

/// Builds the labeled training set: each positive pair, plus one negative
/// with the same source and a corrupted target.
pub fn build_training_set(
    positives: &[(String, String)],
    spec: &CorruptionSpec,
) -> Result<LabeledPairSet, CoreError> {
    const MIN_PAIRS: usize = 20;
    spec.validate()?;
    if positives.len() < MIN_PAIRS {
        return Err(CoreError::TooFewPairs {
            got: positives.len(),
            need: MIN_PAIRS,
        });
    }
    let targets: Vec<String> = positives.iter().map(|(_, t)| t.clone()).collect();

    let mut examples: Vec<(LabeledPair, LabeledPair)> = Vec::with_capacity(positives.len());
    for (i, (src, tgt)) in positives.iter().enumerate() {
        let mut rng = derive_rng(spec.seed, STREAM_NEGATIVES, i as u64);
        let word_count = tgt.split_whitespace().count();
        let mut strategy = if word_count < 2 {
            Strategy::Adjacent
        } else {
            draw_strategy(&mut rng, &spec.strategy_weights)
        };
        let mut negative = match strategy {
            Strategy::Adjacent => adjacent_differing(&targets, i, spec.window, &mut rng)?,
            Strategy::Truncate => {
                truncate_negative(tgt, &mut rng, spec.fraction_lo, spec.fraction_hi)?
            }
            Strategy::Swap => swap_negative(tgt, &mut rng, spec.fraction_lo, spec.fraction_hi)?,
        };
        if negative == *tgt {
            // Duplicate-word swap can reproduce the original text.
            strategy = Strategy::Adjacent;
            negative = adjacent_differing(&targets, i, spec.window, &mut rng)?;
        }
        examples.push((
            LabeledPair {
                src: src.clone(),
                tgt: tgt.clone(),
                label: Label::Positive,
                strategy: None,
            },
            LabeledPair {
                src: src.clone(),
                tgt: negative,
                label: Label::Negative,
                strategy: Some(strategy),
            },
        ));
    }

    // Validation holds min(500, 10% of all examples), taken as whole
    // positive/negative couples so classes stay balanced and the split is
    // disjoint by originating pair index.
    let total_examples = 2 * positives.len();
    let val_examples = 500usize.min(total_examples / 10);
    let val_couples = val_examples / 2;
    let mut indices: Vec<usize> = (0..positives.len()).collect();
    let mut split_rng = derive_rng(spec.seed, STREAM_SPLIT, 0);
    indices.shuffle(&mut split_rng);
    let mut in_validation = alloc::vec![false; positives.len()];
    for &i in indices.iter().take(val_couples) {
        in_validation[i] = true;
    }

    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (i, (pos, neg)) in examples.into_iter().enumerate() {
        let bucket = if in_validation[i] {
            &mut validation
        } else {
            &mut train
        };
        bucket.push(pos);
        bucket.push(neg);
    }
    Ok(LabeledPairSet { train, validation })
}
