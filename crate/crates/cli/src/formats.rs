//! On-disk formats.
//!
//! - Embeddings: headered `EMB1` (magic, u32 rows, u32 dim, f32 payload,
//!   little-endian) or headerless raw f32 rows with the dim supplied by the
//!   caller.
//! - Score tables: TSV `pair_index<TAB>score`, scores printed with 9
//!   significant digits. Rejected pairs are carried by the sentinel value.
//! - Language-ID model `LID1` and classifier model `CLS1`: versioned binary.
//! - Verdicts, candidate pairs, labeled pairs, selections: UTF-8 TSV.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use bitfilt_core::classifier::{ClassifierModel, TrainMeta};
use bitfilt_core::combine::SelectionReport;
use bitfilt_core::langid::{LangIdModel, LangIdVerdict, LangStats};
use bitfilt_core::negatives::{Label, LabeledPair, Strategy};
use bitfilt_core::score::{ScoreEntry, ScoreTable};
use bitfilt_core::{CoreError, EmbeddingMatrix};

pub const EMB_MAGIC: &[u8; 4] = b"EMB1";
pub const LID_MAGIC: &[u8; 4] = b"LID1";
pub const CLS_MAGIC: &[u8; 4] = b"CLS1";

/// Scores at or below this on re-read are treated as langid-rejected.
pub const REJECTED_THRESHOLD: f64 = -1e29;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },
    #[error("dim mismatch in {path}: header says {header}, flag says {flag}")]
    DimMismatch {
        path: String,
        header: usize,
        flag: usize,
    },
    #[error("raw embedding file {path} needs an explicit --dim")]
    MissingDim { path: String },
    #[error(transparent)]
    Core(#[from] CoreError),
}

fn io_err(path: &Path, source: io::Error) -> FormatError {
    FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> FormatError {
    FormatError::MalformedFile {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------- embeddings

/// Loads a headered `EMB1` file, or a raw f32 dump when `dim` is given.
pub fn load_embeddings(path: &Path, dim: Option<usize>) -> Result<EmbeddingMatrix, FormatError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() >= 12 && &bytes[..4] == EMB_MAGIC {
        let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let file_dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if let Some(d) = dim {
            if d != file_dim {
                return Err(FormatError::DimMismatch {
                    path: path.display().to_string(),
                    header: file_dim,
                    flag: d,
                });
            }
        }
        let payload = &bytes[12..];
        if payload.len() != rows * file_dim * 4 {
            return Err(malformed(
                path,
                format!(
                    "expected {} payload bytes for {rows}x{file_dim}, found {}",
                    rows * file_dim * 4,
                    payload.len()
                ),
            ));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(EmbeddingMatrix::from_data(data, file_dim)?)
    } else {
        let dim = dim.ok_or_else(|| FormatError::MissingDim {
            path: path.display().to_string(),
        })?;
        if dim == 0 || bytes.len() % (4 * dim) != 0 || bytes.is_empty() {
            return Err(malformed(
                path,
                format!("{} bytes is not a multiple of a {dim}-float row", bytes.len()),
            ));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(EmbeddingMatrix::from_data(data, dim)?)
    }
}

/// Writes the headered `EMB1` format. `load_embeddings` inverts this
/// bit-exactly on the payload.
pub fn write_embeddings(matrix: &EmbeddingMatrix, path: &Path) -> Result<(), FormatError> {
    let mut out = Vec::with_capacity(12 + matrix.data().len() * 4);
    out.extend_from_slice(EMB_MAGIC);
    out.extend_from_slice(&(matrix.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(matrix.dim() as u32).to_le_bytes());
    for x in matrix.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

// --------------------------------------------------------------- score files

fn format_score(score: f64) -> String {
    format!("{score:.8e}")
}

pub fn write_score_table(table: &ScoreTable, path: &Path) -> Result<(), FormatError> {
    let mut out = String::new();
    for (i, e) in table.entries.iter().enumerate() {
        out.push_str(&format!("{i}\t{}\n", format_score(e.score)));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_score_table(path: &Path) -> Result<ScoreTable, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let index: usize = cols
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| malformed(path, format!("line {}: bad index", lineno + 1)))?;
        let score: f64 = cols
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| malformed(path, format!("line {}: bad score", lineno + 1)))?;
        if index != entries.len() {
            return Err(malformed(
                path,
                format!("line {}: indices must be dense and ordered", lineno + 1),
            ));
        }
        entries.push(ScoreEntry {
            score,
            rejected: score <= REJECTED_THRESHOLD,
        });
    }
    Ok(ScoreTable { entries })
}

// ------------------------------------------------------------------- pairs

pub fn read_pairs(path: &Path) -> Result<Vec<(usize, usize)>, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let parse = |c: Option<&str>| c.and_then(|v| v.parse::<usize>().ok());
        match (parse(cols.next()), parse(cols.next())) {
            (Some(i), Some(j)) => pairs.push((i, j)),
            _ => {
                return Err(malformed(
                    path,
                    format!("line {}: expected src<TAB>tgt indices", lineno + 1),
                ))
            }
        }
    }
    Ok(pairs)
}

pub fn write_pairs(pairs: &[(usize, usize)], path: &Path) -> Result<(), FormatError> {
    let mut out = String::new();
    for (i, j) in pairs {
        out.push_str(&format!("{i}\t{j}\n"));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

// ----------------------------------------------------------------- verdicts

/// One verdict line: `index<TAB>lang:frac,lang:frac,...<TAB>pass|fail`.
pub fn write_verdicts(
    verdicts: &[(LangIdVerdict, bool)],
    path: &Path,
) -> Result<(), FormatError> {
    let mut out = String::new();
    for (i, (v, pass)) in verdicts.iter().enumerate() {
        let fractions = v
            .fractions
            .iter()
            .map(|(lang, f)| format!("{lang}:{f:.6}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&format!(
            "{i}\t{fractions}\t{}\n",
            if *pass { "pass" } else { "fail" }
        ));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Reads a verdict file back to (fractions, pass) per line.
pub fn read_verdicts(path: &Path) -> Result<Vec<(LangIdVerdict, bool)>, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(malformed(path, format!("line {}: expected 3 columns", lineno + 1)));
        }
        let mut fractions = BTreeMap::new();
        for part in cols[1].split(',') {
            let (lang, frac) = part.split_once(':').ok_or_else(|| {
                malformed(path, format!("line {}: bad lang:frac entry", lineno + 1))
            })?;
            let frac: f64 = frac
                .parse()
                .map_err(|_| malformed(path, format!("line {}: bad fraction", lineno + 1)))?;
            fractions.insert(lang.to_string(), frac);
        }
        let pass = match cols[2] {
            "pass" => true,
            "fail" => false,
            other => {
                return Err(malformed(
                    path,
                    format!("line {}: expected pass|fail, found {other:?}", lineno + 1),
                ))
            }
        };
        out.push((LangIdVerdict { fractions }, pass));
    }
    Ok(out)
}

// ------------------------------------------------------------- labeled pairs

/// `src<TAB>tgt<TAB>label<TAB>strategy`; positives carry `-` as strategy.
pub fn write_labeled_pairs(pairs: &[LabeledPair], path: &Path) -> Result<(), FormatError> {
    let mut out = String::new();
    for p in pairs {
        let label = match p.label {
            Label::Positive => "positive",
            Label::Negative => "negative",
        };
        let strategy = p.strategy.map(|s| s.name()).unwrap_or("-");
        out.push_str(&format!("{}\t{}\t{label}\t{strategy}\n", p.src, p.tgt));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_labeled_pairs(path: &Path) -> Result<Vec<LabeledPair>, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(malformed(path, format!("line {}: expected 4 columns", lineno + 1)));
        }
        let label = match cols[2] {
            "positive" => Label::Positive,
            "negative" => Label::Negative,
            other => {
                return Err(malformed(
                    path,
                    format!("line {}: unknown label {other:?}", lineno + 1),
                ))
            }
        };
        let strategy = match cols[3] {
            "-" => None,
            "adjacent" => Some(Strategy::Adjacent),
            "truncate" => Some(Strategy::Truncate),
            "swap" => Some(Strategy::Swap),
            other => {
                return Err(malformed(
                    path,
                    format!("line {}: unknown strategy {other:?}", lineno + 1),
                ))
            }
        };
        out.push(LabeledPair {
            src: cols[0].to_string(),
            tgt: cols[1].to_string(),
            label,
            strategy,
        });
    }
    Ok(out)
}

// -------------------------------------------------------------- text corpora

pub fn read_lines(path: &Path) -> Result<Vec<String>, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}

// ------------------------------------------------------------- langid model

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.pos + n > self.bytes.len() {
            return Err(malformed(self.path, "unexpected end of file"));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, FormatError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| malformed(self.path, "invalid UTF-8"))
    }
}

pub fn write_langid_model(model: &LangIdModel, path: &Path) -> Result<(), FormatError> {
    let mut out = Vec::new();
    out.extend_from_slice(LID_MAGIC);
    out.extend_from_slice(&1u32.to_le_bytes()); // version
    out.extend_from_slice(&(model.ngram_order as u32).to_le_bytes());
    out.extend_from_slice(&(model.languages.len() as u32).to_le_bytes());
    for lang in &model.languages {
        push_str(&mut out, lang);
    }
    for stats in &model.stats {
        out.extend_from_slice(&stats.total_count.to_le_bytes());
        out.extend_from_slice(&(stats.vocab_size as u64).to_le_bytes());
        out.extend_from_slice(&stats.unseen_log_prob.to_le_bytes());
        out.extend_from_slice(&(stats.log_probs.len() as u64).to_le_bytes());
        for (gram, lp) in &stats.log_probs {
            push_str(&mut out, gram);
            out.extend_from_slice(&lp.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_langid_model(path: &Path) -> Result<LangIdModel, FormatError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if cur.take(4)? != LID_MAGIC {
        return Err(malformed(path, "bad magic, expected LID1"));
    }
    let version = cur.u32()?;
    if version != 1 {
        return Err(malformed(path, format!("unsupported version {version}")));
    }
    let ngram_order = cur.u32()? as usize;
    let n_langs = cur.u32()? as usize;
    let mut languages = Vec::with_capacity(n_langs);
    for _ in 0..n_langs {
        languages.push(cur.string()?);
    }
    let mut stats = Vec::with_capacity(n_langs);
    for _ in 0..n_langs {
        let total_count = cur.u64()?;
        let vocab_size = cur.u64()? as usize;
        let unseen_log_prob = cur.f64()?;
        let n_entries = cur.u64()? as usize;
        let mut log_probs = BTreeMap::new();
        for _ in 0..n_entries {
            let gram = cur.string()?;
            let lp = cur.f64()?;
            log_probs.insert(gram, lp);
        }
        stats.push(LangStats {
            log_probs,
            unseen_log_prob,
            vocab_size,
            total_count,
        });
    }
    Ok(LangIdModel {
        languages,
        ngram_order,
        stats,
    })
}

// ---------------------------------------------------------- classifier model

pub fn write_classifier_model(model: &ClassifierModel, path: &Path) -> Result<(), FormatError> {
    let mut out = Vec::new();
    out.extend_from_slice(CLS_MAGIC);
    out.extend_from_slice(&1u32.to_le_bytes()); // version
    out.extend_from_slice(&(model.input_dim as u32).to_le_bytes());
    out.extend_from_slice(&(model.hidden_dim as u32).to_le_bytes());
    out.extend_from_slice(&model.meta.seed.to_le_bytes());
    out.extend_from_slice(&(model.meta.epochs_run as u64).to_le_bytes());
    out.extend_from_slice(&model.meta.val_accuracy.to_le_bytes());
    for x in model.w.iter().chain(&model.b).chain(&model.v).chain(&model.c) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_classifier_model(path: &Path) -> Result<ClassifierModel, FormatError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if cur.take(4)? != CLS_MAGIC {
        return Err(malformed(path, "bad magic, expected CLS1"));
    }
    let version = cur.u32()?;
    if version != 1 {
        return Err(malformed(path, format!("unsupported version {version}")));
    }
    let input_dim = cur.u32()? as usize;
    let hidden_dim = cur.u32()? as usize;
    let seed = cur.u64()?;
    let epochs_run = cur.u64()? as usize;
    let val_accuracy = cur.f64()?;
    let tensor = |n: usize, cur: &mut Cursor| -> Result<Vec<f64>, FormatError> {
        (0..n).map(|_| cur.f64()).collect()
    };
    let w = tensor(hidden_dim * input_dim, &mut cur)?;
    let b = tensor(hidden_dim, &mut cur)?;
    let v = tensor(2 * 3 * hidden_dim, &mut cur)?;
    let c = tensor(2, &mut cur)?;
    if cur.pos != bytes.len() {
        return Err(malformed(path, "trailing bytes after parameters"));
    }
    Ok(ClassifierModel {
        input_dim,
        hidden_dim,
        w,
        b,
        v,
        c: [c[0], c[1]],
        meta: TrainMeta {
            seed,
            epochs_run,
            val_accuracy,
        },
    })
}

// ---------------------------------------------------------------- selection

/// Kept pairs: `pair_index<TAB>score`, in score order.
pub fn write_selection(
    report: &SelectionReport,
    scores: &ScoreTable,
    path: &Path,
) -> Result<(), FormatError> {
    let mut out = String::new();
    for &i in &report.kept_indices {
        out.push_str(&format!("{i}\t{}\n", format_score(scores.entries[i].score)));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Submission-style file: `score<TAB>src_sentence<TAB>tgt_sentence`.
pub fn write_submission(
    report: &SelectionReport,
    scores: &ScoreTable,
    src_sentences: &[String],
    tgt_sentences: &[String],
    path: &Path,
) -> Result<(), FormatError> {
    let mut out = String::new();
    for &i in &report.kept_indices {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            format_score(scores.entries[i].score),
            src_sentences[i],
            tgt_sentences[i]
        ));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct SelectionReportJson {
    pub kept: usize,
    pub cumulative_tokens: u64,
    pub cutoff_score: f64,
    pub rejected_count: usize,
}

impl From<&SelectionReport> for SelectionReportJson {
    fn from(r: &SelectionReport) -> Self {
        Self {
            kept: r.kept_indices.len(),
            cumulative_tokens: r.cumulative_tokens,
            cutoff_score: r.cutoff_score,
            rejected_count: r.rejected_count,
        }
    }
}

/// Buffered writer helper for large outputs.
pub fn write_all(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(bytes).map_err(|e| io_err(path, e))
}

/// Reads a whole file, for digesting.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| io_err(path, e))?;
    Ok(buf)
}
