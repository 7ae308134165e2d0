//! Windowed character-n-gram language identification.
//!
//! A naive-Bayes model over character n-grams assigns each fixed-width
//! character window of a sentence to its most likely language; the verdict
//! reports the fraction of windows voting for each language. Downstream, the
//! gate keeps a sentence only when the expected source language holds at
//! least the threshold fraction (default 0.8, inclusive).
//!
//! This stands in for external language-ID tools that report per-language
//! constituent percentages; precomputed verdict files can be substituted at
//! the CLI level.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::CoreError;

pub const DEFAULT_NGRAM_ORDER: usize = 3;
pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_STRIDE: usize = 10;
pub const DEFAULT_THRESHOLD: f64 = 0.8;

/// Per-language add-one-smoothed n-gram statistics.
///
/// Probability mass: a gram seen c times gets (c+1)/(total+vocab+1); all
/// unseen grams share 1/(total+vocab+1). The +1 bucket makes the smoothed
/// distribution proper.
#[derive(Debug, Clone, PartialEq)]
pub struct LangStats {
    pub log_probs: BTreeMap<String, f64>,
    pub unseen_log_prob: f64,
    pub vocab_size: usize,
    pub total_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangIdModel {
    /// Sorted language codes; ties in window votes go to the earliest code.
    pub languages: Vec<String>,
    pub ngram_order: usize,
    pub stats: Vec<LangStats>,
}

/// Per-sentence association of language code to constituent fraction.
/// Fractions sum to 1 within 1e-6.
#[derive(Debug, Clone, PartialEq)]
pub struct LangIdVerdict {
    pub fractions: BTreeMap<String, f64>,
}

impl LangIdVerdict {
    pub fn fraction(&self, lang: &str) -> Option<f64> {
        self.fractions.get(lang).copied()
    }
}

fn ngrams(chars: &[char], order: usize) -> Vec<String> {
    if chars.is_empty() {
        return Vec::new();
    }
    if chars.len() < order {
        return alloc::vec![chars.iter().collect()];
    }
    chars
        .windows(order)
        .map(|w| w.iter().collect())
        .collect()
}

/// Trains a model from per-language sentence corpora.
pub fn train_langid(
    corpora: &BTreeMap<String, Vec<String>>,
    ngram_order: usize,
) -> Result<LangIdModel, CoreError> {
    if ngram_order == 0 {
        return Err(CoreError::InvalidConfig("ngram order must be >= 1"));
    }
    if corpora.len() < 2 {
        return Err(CoreError::NeedTwoLanguages);
    }
    let mut languages = Vec::new();
    let mut stats = Vec::new();
    for (lang_index, (lang, sentences)) in corpora.iter().enumerate() {
        if sentences.is_empty() {
            return Err(CoreError::EmptyCorpus { lang_index });
        }
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        let mut total: u64 = 0;
        for sentence in sentences {
            let chars: Vec<char> = sentence.chars().collect();
            for gram in ngrams(&chars, ngram_order) {
                *counts.entry(gram).or_insert(0) += 1;
                total += 1;
            }
        }
        let vocab_size = counts.len();
        let denom = (total + vocab_size as u64 + 1) as f64;
        let log_probs = counts
            .into_iter()
            .map(|(g, c)| (g, libm::log((c + 1) as f64 / denom)))
            .collect();
        languages.push(lang.clone());
        stats.push(LangStats {
            log_probs,
            unseen_log_prob: libm::log(1.0 / denom),
            vocab_size,
            total_count: total,
        });
    }
    Ok(LangIdModel {
        languages,
        ngram_order,
        stats,
    })
}

fn window_log_likelihood(window: &[char], stats: &LangStats, order: usize) -> f64 {
    ngrams(window, order)
        .iter()
        .map(|g| {
            stats
                .log_probs
                .get(g)
                .copied()
                .unwrap_or(stats.unseen_log_prob)
        })
        .sum()
}

fn window_starts(len: usize, window: usize, stride: usize) -> Vec<usize> {
    if len <= window {
        return alloc::vec![0];
    }
    let mut starts: Vec<usize> = (0..)
        .step_by(stride.max(1))
        .take_while(|s| s + window <= len)
        .collect();
    if *starts.last().unwrap() != len - window {
        starts.push(len - window);
    }
    starts
}

/// Identifies constituent-language fractions with explicit window geometry.
pub fn identify_windowed(
    sentence: &str,
    model: &LangIdModel,
    window: usize,
    stride: usize,
) -> LangIdVerdict {
    let chars: Vec<char> = sentence.chars().collect();
    let n_langs = model.languages.len();
    if chars.iter().all(|c| c.is_whitespace()) {
        let uniform = 1.0 / n_langs as f64;
        return LangIdVerdict {
            fractions: model
                .languages
                .iter()
                .map(|l| (l.clone(), uniform))
                .collect(),
        };
    }
    let window = window.max(1);
    let starts = window_starts(chars.len(), window, stride);
    let mut votes = alloc::vec![0usize; n_langs];
    for &start in &starts {
        let end = (start + window).min(chars.len());
        let slice = &chars[start..end];
        let mut best = 0usize;
        let mut best_ll = f64::NEG_INFINITY;
        for (li, stats) in model.stats.iter().enumerate() {
            let ll = window_log_likelihood(slice, stats, model.ngram_order);
            if ll > best_ll {
                best_ll = ll;
                best = li;
            }
        }
        votes[best] += 1;
    }
    let total = starts.len() as f64;
    LangIdVerdict {
        fractions: model
            .languages
            .iter()
            .zip(&votes)
            .map(|(l, &v)| (l.clone(), v as f64 / total))
            .collect(),
    }
}

/// Identifies constituent-language fractions with the default 20-char
/// windows at stride 10.
pub fn identify(sentence: &str, model: &LangIdModel) -> LangIdVerdict {
    identify_windowed(sentence, model, DEFAULT_WINDOW, DEFAULT_STRIDE)
}

/// True iff the source-language fraction meets the threshold (inclusive).
pub fn gate(verdict: &LangIdVerdict, source_lang: &str, threshold: f64) -> Result<bool, CoreError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CoreError::InvalidConfig("threshold must be in [0, 1]"));
    }
    verdict
        .fraction(source_lang)
        .map(|f| f >= threshold)
        .ok_or(CoreError::UnknownLanguage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn two_lang_model() -> LangIdModel {
        let mut corpora = BTreeMap::new();
        corpora.insert(
            "en".to_string(),
            vec!["the cat sat on the mat".to_string(), "a quick brown fox".to_string()],
        );
        corpora.insert(
            "xx".to_string(),
            vec!["ααβ γδγ δββ αγα".to_string(), "βγδ δγα ααγ".to_string()],
        );
        train_langid(&corpora, 3).unwrap()
    }

    #[test]
    fn train_requires_two_languages() {
        let mut corpora = BTreeMap::new();
        corpora.insert("en".to_string(), vec!["hi".to_string()]);
        assert_eq!(train_langid(&corpora, 3).unwrap_err(), CoreError::NeedTwoLanguages);
    }

    #[test]
    fn train_rejects_empty_corpus() {
        let mut corpora = BTreeMap::new();
        corpora.insert("en".to_string(), Vec::new());
        corpora.insert("xx".to_string(), vec!["a".to_string()]);
        assert!(matches!(
            train_langid(&corpora, 3),
            Err(CoreError::EmptyCorpus { .. })
        ));
    }

    #[test]
    fn pure_script_sentences_are_assigned_fully() {
        let model = two_lang_model();
        let v = identify("the cat sat on the mat", &model);
        assert!(v.fraction("en").unwrap() >= 0.99);
        let v = identify("ααβ γδγ αγα", &model);
        assert!(v.fraction("xx").unwrap() >= 0.99);
    }

    #[test]
    fn mixed_sentence_splits_votes() {
        let model = two_lang_model();
        // Two 20-char halves in different scripts.
        let half_en = "the cat sat the cat ";
        let half_xx = "ααβ γδγ δββ αγα ββγγ";
        let v = identify(&alloc::format!("{half_en}{half_xx}"), &model);
        let en = v.fraction("en").unwrap();
        assert!((0.3..=0.7).contains(&en), "en fraction {en}");
        let sum: f64 = v.fractions.values().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_sentence_is_uniform() {
        let model = two_lang_model();
        let v = identify("", &model);
        assert_eq!(v.fraction("en"), Some(0.5));
        assert_eq!(v.fraction("xx"), Some(0.5));
    }

    #[test]
    fn gate_threshold_is_inclusive() {
        let mut fractions = BTreeMap::new();
        fractions.insert("ps".to_string(), 0.85);
        fractions.insert("en".to_string(), 0.15);
        let v = LangIdVerdict { fractions };
        assert!(gate(&v, "ps", 0.8).unwrap());

        let mut fractions = BTreeMap::new();
        fractions.insert("ps".to_string(), 0.80);
        fractions.insert("en".to_string(), 0.20);
        let v = LangIdVerdict { fractions };
        assert!(gate(&v, "ps", 0.8).unwrap());

        let mut fractions = BTreeMap::new();
        fractions.insert("ps".to_string(), 0.5);
        fractions.insert("en".to_string(), 0.5);
        let v = LangIdVerdict { fractions };
        assert!(!gate(&v, "ps", 0.8).unwrap());
    }

    #[test]
    fn gate_unknown_language_errors() {
        let mut fractions = BTreeMap::new();
        fractions.insert("en".to_string(), 1.0);
        let v = LangIdVerdict { fractions };
        assert_eq!(gate(&v, "km", 0.8).unwrap_err(), CoreError::UnknownLanguage);
    }
}
