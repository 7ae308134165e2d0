//! File-based stage orchestration.
//!
//! A JSON manifest names every input, the stage configuration, and an output
//! directory. `run` executes langid gating, margin scoring for the
//! pretrained and custom embedding roles, classifier scoring, score fusion,
//! and budget selection, writing every intermediate as its own file so any
//! stage can be swapped for an external tool. Reruns with identical inputs
//! produce bitwise-identical outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bitfilt_core::combine::{
    combine, count_english_tokens, select_by_budget, CombineConfig, Normalization,
    SelectionReport, DEFAULT_BUDGET_TOKENS,
};
use bitfilt_core::langid::{gate, identify, DEFAULT_THRESHOLD};
use bitfilt_core::margin::{MarginConfig, MarginVariant};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats;
use crate::parallel::{par_score_corpus, par_score_corpus_classifier};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: anyhow::Error,
    },
    #[error("stale input {path}: digest {actual} does not match pinned {expected}")]
    StaleInput {
        path: String,
        expected: String,
        actual: String,
    },
    #[error("manifest: {0}")]
    Manifest(String),
}

fn stage_err<E: Into<anyhow::Error>>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        source: e.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestInputs {
    /// Source-side sentences, one per line, indexed by pair source index.
    pub src_text: PathBuf,
    /// English-side sentences, one per line, indexed by pair target index.
    pub tgt_text: PathBuf,
    /// Candidate pairs TSV: `src_index<TAB>tgt_index`.
    pub pairs: PathBuf,
    pub pretrained_src_emb: PathBuf,
    pub pretrained_tgt_emb: PathBuf,
    pub custom_src_emb: PathBuf,
    pub custom_tgt_emb: PathBuf,
    pub langid_model: Option<PathBuf>,
    pub classifier_model: PathBuf,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_k() -> usize {
    4
}

fn default_variant() -> String {
    "ratio".to_string()
}

fn default_normalize() -> String {
    "none".to_string()
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET_TOKENS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestConfig {
    /// Expected source language code; langid gating is skipped when absent
    /// (all pairs pass, mirroring a no-langid configuration).
    pub lang: Option<String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_variant")]
    pub variant: String,
    #[serde(default = "default_normalize")]
    pub normalize: String,
    #[serde(default = "default_budget")]
    pub budget_tokens: u64,
    /// Dim for raw (headerless) embedding files.
    pub emb_dim: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub seed: u64,
    pub inputs: ManifestInputs,
    pub config: ManifestConfig,
    /// Optional sha256 pins, keyed by input path as written in `inputs`.
    #[serde(default)]
    pub digests: BTreeMap<String, String>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub output: String,
    pub sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    pub kept: usize,
    pub cumulative_tokens: u64,
    pub cutoff_score: f64,
    pub rejected_by_langid: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn verify_digests(manifest: &PipelineManifest) -> Result<(), PipelineError> {
    for (path, expected) in &manifest.digests {
        let bytes = formats::read_bytes(Path::new(path)).map_err(stage_err("verify-digests"))?;
        let actual = sha256_hex(&bytes);
        if &actual != expected {
            return Err(PipelineError::StaleInput {
                path: path.clone(),
                expected: expected.clone(),
                actual,
            });
        }
    }
    Ok(())
}

pub fn parse_variant(s: &str) -> Result<MarginVariant, String> {
    match s {
        "ratio" => Ok(MarginVariant::Ratio),
        "distance" => Ok(MarginVariant::Distance),
        "absolute" => Ok(MarginVariant::Absolute),
        other => Err(format!("unknown margin variant {other:?}")),
    }
}

pub fn parse_normalization(s: &str) -> Result<Normalization, String> {
    match s {
        "none" => Ok(Normalization::None),
        "minmax" => Ok(Normalization::MinMax),
        other => Err(format!("unknown normalization {other:?}")),
    }
}

pub fn load_manifest(path: &Path) -> Result<PipelineManifest, PipelineError> {
    let bytes = formats::read_bytes(path).map_err(stage_err("load-manifest"))?;
    serde_json::from_slice(&bytes).map_err(|e| PipelineError::Manifest(e.to_string()))
}

/// Executes every stage and returns the final selection plus the run report.
pub fn run(manifest: &PipelineManifest) -> Result<(SelectionReport, RunReport), PipelineError> {
    verify_digests(manifest)?;
    let cfg = &manifest.config;
    let variant = parse_variant(&cfg.variant).map_err(PipelineError::Manifest)?;
    let normalization = parse_normalization(&cfg.normalize).map_err(PipelineError::Manifest)?;

    std::fs::create_dir_all(&manifest.out_dir)
        .map_err(|e| stage_err("prepare-out-dir")(anyhow::Error::new(e)))?;
    let out = |name: &str| manifest.out_dir.join(name);
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut record = |stage: &str, path: &Path| -> Result<(), PipelineError> {
        let bytes = formats::read_bytes(path).map_err(stage_err("record-output"))?;
        stages.push(StageRecord {
            stage: stage.to_string(),
            output: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    };

    let inputs = &manifest.inputs;
    let pairs = formats::read_pairs(&inputs.pairs).map_err(stage_err("load-pairs"))?;
    let src_text = formats::read_lines(&inputs.src_text).map_err(stage_err("load-src-text"))?;
    let tgt_text = formats::read_lines(&inputs.tgt_text).map_err(stage_err("load-tgt-text"))?;

    // Stage 1: language-ID gate over the source side of each pair.
    let mask: Option<Vec<bool>> = match (&cfg.lang, &inputs.langid_model) {
        (Some(lang), Some(model_path)) => {
            let model =
                formats::read_langid_model(model_path).map_err(stage_err("langid"))?;
            let mut verdicts = Vec::with_capacity(pairs.len());
            let mut mask = Vec::with_capacity(pairs.len());
            for &(i, _) in &pairs {
                let sentence = src_text.get(i).ok_or_else(|| {
                    stage_err("langid")(anyhow::anyhow!(
                        "pair source index {i} exceeds {} text lines",
                        src_text.len()
                    ))
                })?;
                let verdict = identify(sentence, &model);
                let pass = gate(&verdict, lang, cfg.threshold).map_err(stage_err("langid"))?;
                verdicts.push((verdict, pass));
                mask.push(pass);
            }
            let path = out("verdicts.tsv");
            formats::write_verdicts(&verdicts, &path).map_err(stage_err("langid"))?;
            record("langid", &path)?;
            Some(mask)
        }
        (None, _) => None,
        (Some(_), None) => {
            return Err(PipelineError::Manifest(
                "config.lang is set but inputs.langid_model is missing".to_string(),
            ))
        }
    };

    let margin_config = MarginConfig {
        k: cfg.k,
        variant,
        ..MarginConfig::default()
    };
    let load_emb = |path: &Path, stage: &'static str| {
        formats::load_embeddings(path, cfg.emb_dim).map_err(stage_err(stage))
    };

    // Stage 2: margin score in the pretrained-embedding role.
    let base = {
        let src = load_emb(&inputs.pretrained_src_emb, "margin-pretrained")?;
        let tgt = load_emb(&inputs.pretrained_tgt_emb, "margin-pretrained")?;
        let table = par_score_corpus(&src, &tgt, &pairs, &margin_config)
            .map_err(stage_err("margin-pretrained"))?;
        let path = out("margin_pretrained.tsv");
        formats::write_score_table(&table, &path).map_err(stage_err("margin-pretrained"))?;
        record("margin-pretrained", &path)?;
        table
    };

    // Stage 3: margin score in the custom-embedding role.
    let custom = {
        let src = load_emb(&inputs.custom_src_emb, "margin-custom")?;
        let tgt = load_emb(&inputs.custom_tgt_emb, "margin-custom")?;
        let table = par_score_corpus(&src, &tgt, &pairs, &margin_config)
            .map_err(stage_err("margin-custom"))?;
        let path = out("margin_custom.tsv");
        formats::write_score_table(&table, &path).map_err(stage_err("margin-custom"))?;
        record("margin-custom", &path)?;
        table
    };

    // Stage 4: classifier score over the pretrained embeddings.
    let cls = {
        let model = formats::read_classifier_model(&inputs.classifier_model)
            .map_err(stage_err("classifier"))?;
        let src = load_emb(&inputs.pretrained_src_emb, "classifier")?;
        let tgt = load_emb(&inputs.pretrained_tgt_emb, "classifier")?;
        let table = par_score_corpus_classifier(&pairs, &src, &tgt, &model)
            .map_err(stage_err("classifier"))?;
        let path = out("classifier.tsv");
        formats::write_score_table(&table, &path).map_err(stage_err("classifier"))?;
        record("classifier", &path)?;
        table
    };

    // Stage 5: fusion.
    let combined = {
        let combine_config = CombineConfig {
            normalization,
            ..CombineConfig::default()
        };
        let table = combine(&base, &custom, &cls, mask.as_deref(), &combine_config)
            .map_err(stage_err("combine"))?;
        let path = out("combined.tsv");
        formats::write_score_table(&table, &path).map_err(stage_err("combine"))?;
        record("combine", &path)?;
        table
    };

    // Stage 6: token-budgeted selection.
    let tokens: Vec<u64> = {
        let per_line = count_english_tokens(&tgt_text);
        pairs
            .iter()
            .map(|&(_, j)| {
                per_line.get(j).copied().ok_or_else(|| {
                    stage_err("select")(anyhow::anyhow!(
                        "pair target index {j} exceeds {} text lines",
                        tgt_text.len()
                    ))
                })
            })
            .collect::<Result<_, _>>()?
    };
    let report = select_by_budget(&combined, &tokens, cfg.budget_tokens)
        .map_err(stage_err("select"))?;
    let selection_path = out("selection.tsv");
    formats::write_selection(&report, &combined, &selection_path).map_err(stage_err("select"))?;
    record("select", &selection_path)?;

    let submission_path = out("submission.tsv");
    {
        let src_per_pair: Vec<String> = pairs.iter().map(|&(i, _)| src_text[i].clone()).collect();
        let tgt_per_pair: Vec<String> = pairs.iter().map(|&(_, j)| tgt_text[j].clone()).collect();
        formats::write_submission(&report, &combined, &src_per_pair, &tgt_per_pair, &submission_path)
            .map_err(stage_err("select"))?;
        record("submission", &submission_path)?;
    }

    let run_report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: manifest.seed,
        stages,
        kept: report.kept_indices.len(),
        cumulative_tokens: report.cumulative_tokens,
        cutoff_score: report.cutoff_score,
        rejected_by_langid: report.rejected_count,
    };
    let report_json = serde_json::to_vec_pretty(&run_report)
        .map_err(|e| stage_err("report")(anyhow::Error::new(e)))?;
    formats::write_all(&out("report.json"), &report_json).map_err(stage_err("report"))?;

    Ok((report, run_report))
}
