//! Score fusion and token-budgeted selection.
//!
//! The final score of a pair is the plain sum of its baseline-margin,
//! custom-margin, and classifier scores, each optionally min-max normalized
//! to [0, 1] first. Pairs failing the language gate are pinned to a sentinel
//! far below any reachable score and flagged rejected; rejected entries never
//! contribute to the min/max statistics and are never selected.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::score::{ScoreEntry, ScoreTable};

pub const DEFAULT_SENTINEL: f64 = -1e30;
pub const DEFAULT_BUDGET_TOKENS: u64 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    None,
    MinMax,
}

#[derive(Debug, Clone, Copy)]
pub struct CombineConfig {
    pub normalization: Normalization,
    pub sentinel: f64,
}

impl Default for CombineConfig {
    fn default() -> Self {
        Self {
            normalization: Normalization::None,
            sentinel: DEFAULT_SENTINEL,
        }
    }
}

/// Outcome of budget selection: kept pair indices in score order.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub kept_indices: Vec<usize>,
    pub cumulative_tokens: u64,
    pub cutoff_score: f64,
    pub rejected_count: usize,
}

/// Affine rescale of the non-rejected scores to [0, 1]. Rejected entries
/// keep their score and flag and are excluded from the min/max statistics.
pub fn minmax_normalize(scores: &ScoreTable) -> Result<ScoreTable, CoreError> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut live = 0usize;
    for e in &scores.entries {
        if !e.rejected {
            min = min.min(e.score);
            max = max.max(e.score);
            live += 1;
        }
    }
    if live < 2 {
        return Err(CoreError::InvalidConfig(
            "min-max normalization needs at least two non-rejected scores",
        ));
    }
    if max == min {
        return Err(CoreError::DegenerateRange);
    }
    let span = max - min;
    let entries = scores
        .entries
        .iter()
        .map(|e| {
            if e.rejected {
                *e
            } else {
                ScoreEntry {
                    score: (e.score - min) / span,
                    rejected: false,
                }
            }
        })
        .collect();
    Ok(ScoreTable { entries })
}

fn check_len(a: &ScoreTable, b: &ScoreTable) -> Result<(), CoreError> {
    if a.len() != b.len() {
        return Err(CoreError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Fuses the three component tables into the final score. `mask[i] = false`
/// (or a pre-rejected component entry) pins pair i to the sentinel.
pub fn combine(
    base: &ScoreTable,
    custom: &ScoreTable,
    cls: &ScoreTable,
    mask: Option<&[bool]>,
    config: &CombineConfig,
) -> Result<ScoreTable, CoreError> {
    check_len(base, custom)?;
    check_len(base, cls)?;
    if let Some(mask) = mask {
        if mask.len() != base.len() {
            return Err(CoreError::LengthMismatch {
                left: mask.len(),
                right: base.len(),
            });
        }
    }

    let rejected_at = |i: usize| {
        base.entries[i].rejected
            || custom.entries[i].rejected
            || cls.entries[i].rejected
            || mask.map(|m| !m[i]).unwrap_or(false)
    };

    // Pre-apply rejection so masked pairs stay out of each component's
    // min/max statistics.
    let component = |t: &ScoreTable| -> Result<ScoreTable, CoreError> {
        let marked = ScoreTable {
            entries: t
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| ScoreEntry {
                    score: e.score,
                    rejected: rejected_at(i),
                })
                .collect(),
        };
        match config.normalization {
            Normalization::None => Ok(marked),
            Normalization::MinMax => minmax_normalize(&marked),
        }
    };
    let base = component(base)?;
    let custom = component(custom)?;
    let cls = component(cls)?;

    let entries = (0..base.len())
        .map(|i| {
            if rejected_at(i) {
                ScoreEntry {
                    score: config.sentinel,
                    rejected: true,
                }
            } else {
                ScoreEntry::accepted(
                    base.entries[i].score + custom.entries[i].score + cls.entries[i].score,
                )
            }
        })
        .collect();
    Ok(ScoreTable { entries })
}

/// Whitespace token count per sentence.
pub fn count_english_tokens(sentences: &[String]) -> Vec<u64> {
    sentences
        .iter()
        .map(|s| s.split_whitespace().count() as u64)
        .collect()
}

/// Keeps pairs in descending score order (ties: lower index first) while the
/// cumulative English token count before each pair is below the budget, so
/// the pair that crosses the budget is included. Rejected pairs are skipped.
pub fn select_by_budget(
    scores: &ScoreTable,
    english_token_counts: &[u64],
    budget: u64,
) -> Result<SelectionReport, CoreError> {
    if english_token_counts.len() != scores.len() {
        return Err(CoreError::LengthMismatch {
            left: english_token_counts.len(),
            right: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len())
        .filter(|&i| !scores.entries[i].rejected)
        .collect();
    order.sort_by(|&a, &b| {
        scores.entries[b]
            .score
            .total_cmp(&scores.entries[a].score)
            .then(a.cmp(&b))
    });
    let rejected_count = scores.len() - order.len();

    let mut kept_indices = Vec::new();
    let mut cumulative_tokens: u64 = 0;
    let mut cutoff_score = f64::NEG_INFINITY;
    for i in order {
        if cumulative_tokens >= budget {
            break;
        }
        cumulative_tokens += english_token_counts[i];
        cutoff_score = scores.entries[i].score;
        kept_indices.push(i);
    }
    Ok(SelectionReport {
        kept_indices,
        cumulative_tokens,
        cutoff_score,
        rejected_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn table(scores: &[f64]) -> ScoreTable {
        ScoreTable::from_scores(scores.iter().copied())
    }

    #[test]
    fn minmax_endpoints() {
        let out = minmax_normalize(&table(&[2.0, 4.0, 6.0])).unwrap();
        let s: Vec<f64> = out.scores().collect();
        assert_eq!(s, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn minmax_constant_scores_error() {
        assert_eq!(
            minmax_normalize(&table(&[5.0, 5.0, 5.0])).unwrap_err(),
            CoreError::DegenerateRange
        );
    }

    #[test]
    fn minmax_ignores_rejected_entries() {
        let mut t = table(&[2.0, 4.0, -1e30]);
        t.entries[2].rejected = true;
        let out = minmax_normalize(&t).unwrap();
        assert_eq!(out.entries[0].score, 0.0);
        assert_eq!(out.entries[1].score, 1.0);
        assert!(out.entries[2].rejected);
        assert_eq!(out.entries[2].score, -1e30);
    }

    #[test]
    fn combine_is_plain_sum() {
        let out = combine(
            &table(&[0.2, 0.0]),
            &table(&[0.3, 0.0]),
            &table(&[0.1, 0.0]),
            None,
            &CombineConfig::default(),
        )
        .unwrap();
        assert!((out.entries[0].score - 0.6).abs() < 1e-12);
    }

    #[test]
    fn masked_pair_gets_sentinel() {
        let out = combine(
            &table(&[0.9, 0.2]),
            &table(&[0.9, 0.2]),
            &table(&[0.9, 0.2]),
            Some(&[false, true]),
            &CombineConfig::default(),
        )
        .unwrap();
        assert_eq!(out.entries[0].score, DEFAULT_SENTINEL);
        assert!(out.entries[0].rejected);
        assert!(!out.entries[1].rejected);
    }

    #[test]
    fn minmax_combined_scores_bounded_by_three() {
        let cfg = CombineConfig {
            normalization: Normalization::MinMax,
            ..CombineConfig::default()
        };
        let out = combine(
            &table(&[1.0, 5.0, 3.0]),
            &table(&[-2.0, 0.0, 7.0]),
            &table(&[0.4, 0.9, 0.1]),
            None,
            &cfg,
        )
        .unwrap();
        for e in &out.entries {
            assert!((0.0..=3.0).contains(&e.score));
        }
    }

    #[test]
    fn token_counting_collapses_whitespace() {
        let counts = count_english_tokens(&[
            "the quick fox".to_string(),
            "  a   b ".to_string(),
            "".to_string(),
        ]);
        assert_eq!(counts, vec![3, 2, 0]);
    }

    #[test]
    fn budget_exact_fit() {
        let r = select_by_budget(&table(&[3.0, 2.0, 1.0]), &[3, 2, 2], 5).unwrap();
        assert_eq!(r.kept_indices, vec![0, 1]);
        assert_eq!(r.cumulative_tokens, 5);
    }

    #[test]
    fn budget_crossing_pair_is_included() {
        let r = select_by_budget(&table(&[3.0, 2.0, 1.0]), &[3, 2, 2], 4).unwrap();
        assert_eq!(r.kept_indices, vec![0, 1]);
        assert_eq!(r.cumulative_tokens, 5);
    }

    #[test]
    fn oversized_budget_keeps_everything_unmasked() {
        let mut t = table(&[3.0, 2.0, 1.0]);
        t.entries[1].rejected = true;
        let r = select_by_budget(&t, &[3, 2, 2], 1_000_000).unwrap();
        assert_eq!(r.kept_indices, vec![0, 2]);
        assert_eq!(r.rejected_count, 1);
    }

    #[test]
    fn empty_input_gives_empty_report() {
        let r = select_by_budget(&ScoreTable::default(), &[], 100).unwrap();
        assert!(r.kept_indices.is_empty());
        assert_eq!(r.cumulative_tokens, 0);
    }
}
