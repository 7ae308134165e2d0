//! Command-line interface. One subcommand per pipeline stage, file-based
//! handoffs, one seed flag feeding every random draw.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use bitfilt_core::classifier::{self, PairExample, TrainConfig};
use bitfilt_core::combine::{
    combine, count_english_tokens, select_by_budget, CombineConfig, DEFAULT_BUDGET_TOKENS,
};
use bitfilt_core::langid::{self, DEFAULT_NGRAM_ORDER, DEFAULT_THRESHOLD};
use bitfilt_core::margin::MarginConfig;
use bitfilt_core::negatives::{build_training_set, CorruptionSpec, Label};
use bitfilt_core::EmbeddingMatrix;
use clap::{Args, Parser, Subcommand};

use crate::formats;
use crate::parallel::{par_score_corpus, par_score_corpus_classifier};
use crate::pipeline;

#[derive(Parser)]
#[command(name = "bitfilt", version, about = "Parallel-corpus filtering toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_positive_usize(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("{s:?} is not an integer"))?;
    if v >= 1 {
        Ok(v)
    } else {
        Err("value must be >= 1".to_string())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Language identification: train a model or score sentences.
    Langid {
        #[command(subcommand)]
        action: LangidAction,
    },
    /// Margin-score candidate pairs with exact k-NN search.
    Margin(MarginArgs),
    /// Generate labeled positive/negative pairs from parallel data.
    Negatives(NegativesArgs),
    /// Pair classifier: train or score.
    Classifier {
        #[command(subcommand)]
        action: ClassifierAction,
    },
    /// Fuse baseline, custom, and classifier score tables.
    Combine(CombineArgs),
    /// Select top-scoring pairs under an English token budget.
    Select(SelectArgs),
    /// Bidirectional top-1 retrieval accuracy of two aligned embedding sets.
    EvalBucc(EvalBuccArgs),
    /// Run the whole pipeline from a JSON manifest.
    Pipeline {
        #[command(subcommand)]
        action: PipelineAction,
    },
}

#[derive(Subcommand)]
enum LangidAction {
    /// Train a character-n-gram model from per-language corpora.
    Train {
        /// Training corpus as lang=path; repeat per language.
        #[arg(long = "corpus", required = true)]
        corpora: Vec<String>,
        /// Character n-gram order.
        #[arg(long, default_value_t = DEFAULT_NGRAM_ORDER, value_parser = parse_positive_usize)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score sentences and emit a verdict file.
    Score {
        #[arg(long)]
        model: PathBuf,
        /// Sentences, one per line.
        #[arg(long)]
        input: PathBuf,
        /// Expected source language code.
        #[arg(long)]
        lang: String,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD, value_parser = parse_fraction)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct MarginArgs {
    #[arg(long = "src-emb")]
    src_emb: PathBuf,
    #[arg(long = "tgt-emb")]
    tgt_emb: PathBuf,
    /// Candidate pairs TSV: src_index<TAB>tgt_index.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value_t = 4, value_parser = parse_positive_usize)]
    k: usize,
    #[arg(long, default_value = "ratio")]
    variant: String,
    /// Row width for raw (headerless) embedding files.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NegativesArgs {
    /// Positive pairs TSV: src_sentence<TAB>tgt_sentence.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value_t = 2, value_parser = parse_positive_usize)]
    window: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Strategy weights adjacent,truncate,swap.
    #[arg(long, default_value = "1,1,1")]
    weights: String,
    /// Training-set output; the validation split lands in <out>.val.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ClassifierAction {
    Train {
        /// Labeled pairs TSV (the `negatives` output); line i aligns with
        /// row i of both embedding files.
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "src-emb")]
        src_emb: PathBuf,
        #[arg(long = "tgt-emb")]
        tgt_emb: PathBuf,
        /// Optional held-out labeled pairs with their own embedding files.
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long = "val-src-emb", requires = "val")]
        val_src_emb: Option<PathBuf>,
        #[arg(long = "val-tgt-emb", requires = "val")]
        val_tgt_emb: Option<PathBuf>,
        #[arg(long, default_value_t = 256, value_parser = parse_positive_usize)]
        hidden: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 64, value_parser = parse_positive_usize)]
        batch: usize,
        #[arg(long, default_value_t = 50, value_parser = parse_positive_usize)]
        epochs: usize,
        #[arg(long, default_value_t = 5, value_parser = parse_positive_usize)]
        patience: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long = "src-emb")]
        src_emb: PathBuf,
        #[arg(long = "tgt-emb")]
        tgt_emb: PathBuf,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CombineArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    custom: PathBuf,
    #[arg(long)]
    cls: PathBuf,
    /// Verdict file; pairs whose line says `fail` get the sentinel score.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value = "none")]
    normalize: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    scores: PathBuf,
    /// English-side sentences, one per line, aligned with the score table.
    #[arg(long)]
    english: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BUDGET_TOKENS)]
    budget: u64,
    #[arg(long)]
    out: PathBuf,
    /// Optional source sentences for a submission-style file.
    #[arg(long = "src-text", requires = "submission")]
    src_text: Option<PathBuf>,
    /// Where to write score<TAB>src<TAB>tgt lines.
    #[arg(long, requires = "src_text")]
    submission: Option<PathBuf>,
}

#[derive(Args)]
struct EvalBuccArgs {
    #[arg(long = "src-emb")]
    src_emb: PathBuf,
    #[arg(long = "tgt-emb")]
    tgt_emb: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
    /// Above this row count the similarity matrix is never materialized.
    #[arg(long, default_value_t = 20_000)]
    cap: usize,
}

#[derive(Subcommand)]
enum PipelineAction {
    Run {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn load_emb(path: &PathBuf, dim: Option<usize>) -> Result<EmbeddingMatrix> {
    Ok(formats::load_embeddings(path, dim)?)
}

fn split_examples(labeled: &[bitfilt_core::negatives::LabeledPair]) -> Vec<bool> {
    labeled.iter().map(|p| p.label == Label::Positive).collect()
}

fn stratified_tail_split(positives: &[usize], negatives: &[usize], val_total: usize) -> Vec<usize> {
    let per_class = val_total / 2;
    let mut val: Vec<usize> = Vec::new();
    val.extend(positives.iter().rev().take(per_class));
    val.extend(negatives.iter().rev().take(per_class));
    val.sort_unstable();
    val
}

fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Langid { action } => match action {
            LangidAction::Train { corpora, order, out } => {
                let mut map = BTreeMap::new();
                for spec in corpora {
                    let (lang, path) = spec
                        .split_once('=')
                        .ok_or_else(|| anyhow!("--corpus expects lang=path, got {spec:?}"))?;
                    let lines = formats::read_lines(std::path::Path::new(path))?;
                    map.insert(lang.to_string(), lines);
                }
                let model = langid::train_langid(&map, order)?;
                formats::write_langid_model(&model, &out)?;
            }
            LangidAction::Score {
                model,
                input,
                lang,
                threshold,
                out,
            } => {
                let model = formats::read_langid_model(&model)?;
                let sentences = formats::read_lines(&input)?;
                let mut verdicts = Vec::with_capacity(sentences.len());
                for sentence in &sentences {
                    let v = langid::identify(sentence, &model);
                    let pass = langid::gate(&v, &lang, threshold)?;
                    verdicts.push((v, pass));
                }
                formats::write_verdicts(&verdicts, &out)?;
            }
        },
        Command::Margin(args) => {
            let src = load_emb(&args.src_emb, args.dim)?;
            let tgt = load_emb(&args.tgt_emb, args.dim)?;
            let pairs = formats::read_pairs(&args.pairs)?;
            let config = MarginConfig {
                k: args.k,
                variant: pipeline::parse_variant(&args.variant).map_err(|e| anyhow!(e))?,
                ..MarginConfig::default()
            };
            let table = par_score_corpus(&src, &tgt, &pairs, &config)?;
            formats::write_score_table(&table, &args.out)?;
        }
        Command::Negatives(args) => {
            let lines = formats::read_lines(&args.pairs)?;
            let positives: Vec<(String, String)> = lines
                .iter()
                .enumerate()
                .map(|(lineno, line)| {
                    line.split_once('\t')
                        .map(|(s, t)| (s.to_string(), t.to_string()))
                        .ok_or_else(|| {
                            anyhow!("{}: line {} is not src<TAB>tgt", args.pairs.display(), lineno + 1)
                        })
                })
                .collect::<Result<_>>()?;
            let weights: Vec<f64> = args
                .weights
                .split(',')
                .map(|w| w.parse::<f64>().context("bad --weights"))
                .collect::<Result<_>>()?;
            if weights.len() != 3 {
                bail!("--weights expects three comma-separated numbers");
            }
            let spec = CorruptionSpec {
                window: args.window,
                seed: args.seed,
                strategy_weights: [weights[0], weights[1], weights[2]],
                ..CorruptionSpec::default()
            };
            let set = build_training_set(&positives, &spec)?;
            formats::write_labeled_pairs(&set.train, &args.out)?;
            let mut val_path = args.out.as_os_str().to_owned();
            val_path.push(".val.tsv");
            formats::write_labeled_pairs(&set.validation, &PathBuf::from(val_path))?;
        }
        Command::Classifier { action } => match action {
            ClassifierAction::Train {
                data,
                src_emb,
                tgt_emb,
                val,
                val_src_emb,
                val_tgt_emb,
                hidden,
                lr,
                batch,
                epochs,
                patience,
                seed,
                dim,
                out,
            } => {
                let labeled = formats::read_labeled_pairs(&data)?;
                let src = load_emb(&src_emb, dim)?;
                let tgt = load_emb(&tgt_emb, dim)?;
                if src.rows() != labeled.len() || tgt.rows() != labeled.len() {
                    bail!(
                        "embedding rows ({}, {}) must match the {} data lines",
                        src.rows(),
                        tgt.rows(),
                        labeled.len()
                    );
                }
                let positive = split_examples(&labeled);
                let example = |i: usize| PairExample {
                    src_row: i,
                    tgt_row: i,
                    positive: positive[i],
                };
                let config = TrainConfig {
                    learning_rate: lr,
                    batch_size: batch,
                    max_epochs: epochs,
                    patience,
                    seed,
                    hidden_dim: hidden,
                };
                let model = match (val, val_src_emb, val_tgt_emb) {
                    (Some(val), Some(vs), Some(vt)) => {
                        let val_labeled = formats::read_labeled_pairs(&val)?;
                        let val_src = load_emb(&vs, dim)?;
                        let val_tgt = load_emb(&vt, dim)?;
                        // Separate matrices: shift validation rows past the
                        // training rows in a stacked pair list is not
                        // possible, so train on two example sets directly.
                        let train_examples: Vec<PairExample> =
                            (0..labeled.len()).map(example).collect();
                        let val_positive = split_examples(&val_labeled);
                        let val_examples: Vec<PairExample> = (0..val_labeled.len())
                            .map(|i| PairExample {
                                src_row: i,
                                tgt_row: i,
                                positive: val_positive[i],
                            })
                            .collect();
                        // Stack embeddings so one matrix serves both sets.
                        let stack = |a: &EmbeddingMatrix, b: &EmbeddingMatrix| -> Result<EmbeddingMatrix> {
                            if a.dim() != b.dim() {
                                bail!("train/val embedding dims differ");
                            }
                            let mut data = a.data().to_vec();
                            data.extend_from_slice(b.data());
                            Ok(EmbeddingMatrix::from_data(data, a.dim())?)
                        };
                        let stacked_src = stack(&src, &val_src)?;
                        let stacked_tgt = stack(&tgt, &val_tgt)?;
                        let offset = labeled.len();
                        let val_examples: Vec<PairExample> = val_examples
                            .iter()
                            .map(|e| PairExample {
                                src_row: e.src_row + offset,
                                tgt_row: e.tgt_row + offset,
                                positive: e.positive,
                            })
                            .collect();
                        classifier::train(
                            &train_examples,
                            &val_examples,
                            &stacked_src,
                            &stacked_tgt,
                            &config,
                        )?
                    }
                    _ => {
                        // Self-split: hold out min(500, 10%) examples,
                        // stratified from the tail of each class.
                        let pos_idx: Vec<usize> =
                            (0..labeled.len()).filter(|&i| positive[i]).collect();
                        let neg_idx: Vec<usize> =
                            (0..labeled.len()).filter(|&i| !positive[i]).collect();
                        let val_total = 500.min(labeled.len() / 10);
                        let val_ids = stratified_tail_split(&pos_idx, &neg_idx, val_total);
                        let in_val: std::collections::BTreeSet<usize> =
                            val_ids.iter().copied().collect();
                        let train_examples: Vec<PairExample> = (0..labeled.len())
                            .filter(|i| !in_val.contains(i))
                            .map(example)
                            .collect();
                        let val_examples: Vec<PairExample> =
                            val_ids.into_iter().map(example).collect();
                        classifier::train(&train_examples, &val_examples, &src, &tgt, &config)?
                    }
                };
                formats::write_classifier_model(&model, &out)?;
                eprintln!(
                    "trained {} epochs, validation accuracy {:.4}",
                    model.meta.epochs_run, model.meta.val_accuracy
                );
            }
            ClassifierAction::Score {
                model,
                pairs,
                src_emb,
                tgt_emb,
                dim,
                out,
            } => {
                let model = formats::read_classifier_model(&model)?;
                let pairs = formats::read_pairs(&pairs)?;
                let src = load_emb(&src_emb, dim)?;
                let tgt = load_emb(&tgt_emb, dim)?;
                let table = par_score_corpus_classifier(&pairs, &src, &tgt, &model)?;
                formats::write_score_table(&table, &out)?;
            }
        },
        Command::Combine(args) => {
            let base = formats::read_score_table(&args.base)?;
            let custom = formats::read_score_table(&args.custom)?;
            let cls = formats::read_score_table(&args.cls)?;
            let mask = match &args.mask {
                Some(path) => Some(
                    formats::read_verdicts(path)?
                        .into_iter()
                        .map(|(_, pass)| pass)
                        .collect::<Vec<bool>>(),
                ),
                None => None,
            };
            let config = CombineConfig {
                normalization: pipeline::parse_normalization(&args.normalize)
                    .map_err(|e| anyhow!(e))?,
                ..CombineConfig::default()
            };
            let table = combine(&base, &custom, &cls, mask.as_deref(), &config)?;
            formats::write_score_table(&table, &args.out)?;
        }
        Command::Select(args) => {
            let scores = formats::read_score_table(&args.scores)?;
            let english = formats::read_lines(&args.english)?;
            if english.len() != scores.len() {
                bail!(
                    "{} english lines but {} scores",
                    english.len(),
                    scores.len()
                );
            }
            let tokens = count_english_tokens(&english);
            let report = select_by_budget(&scores, &tokens, args.budget)?;
            formats::write_selection(&report, &scores, &args.out)?;
            if let (Some(src_text), Some(submission)) = (&args.src_text, &args.submission) {
                let src = formats::read_lines(src_text)?;
                if src.len() != scores.len() {
                    bail!("{} source lines but {} scores", src.len(), scores.len());
                }
                formats::write_submission(&report, &scores, &src, &english, submission)?;
            }
            let json: formats::SelectionReportJson = (&report).into();
            println!("{}", serde_json::to_string(&json)?);
        }
        Command::EvalBucc(args) => {
            let src = load_emb(&args.src_emb, args.dim)?;
            let tgt = load_emb(&args.tgt_emb, args.dim)?;
            let n = src.rows();
            let accuracy = if n <= args.cap {
                bitfilt_core::bucc::bucc_accuracy(&bitfilt_core::bucc::similarity_matrix(
                    &src, &tgt,
                )?)?
            } else {
                bitfilt_core::bucc::streaming_accuracy(&src, &tgt, 1024)?
            };
            println!("{}", serde_json::json!({ "n": n, "accuracy": accuracy }));
        }
        Command::Pipeline { action } => match action {
            PipelineAction::Run { manifest } => {
                let manifest = pipeline::load_manifest(&manifest)?;
                let (_, run_report) = pipeline::run(&manifest)?;
                println!("{}", serde_json::to_string_pretty(&run_report)?);
            }
        },
    }
    Ok(())
}

/// Entry point; returns the process exit status. Usage errors exit 2,
/// runtime failures exit 1.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
