//! The score table: the common currency between scorers, the combiner, and
//! the budget selector.

use alloc::vec::Vec;

/// One scored pair. `rejected` marks pairs masked out by the language gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreEntry {
    pub score: f64,
    pub rejected: bool,
}

impl ScoreEntry {
    pub fn accepted(score: f64) -> Self {
        Self {
            score,
            rejected: false,
        }
    }
}

/// Per-pair-index sequence of scores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    pub entries: Vec<ScoreEntry>,
}

impl ScoreTable {
    pub fn from_scores(scores: impl IntoIterator<Item = f64>) -> Self {
        Self {
            entries: scores.into_iter().map(ScoreEntry::accepted).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.score)
    }
}
