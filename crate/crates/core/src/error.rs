use core::fmt;

/// Errors raised by the computation kernels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoreError {
    /// Vector or matrix dimensions do not agree.
    DimMismatch { left: usize, right: usize },
    /// Payload length is not a multiple of the row width.
    MalformedShape { len: usize, dim: usize },
    /// Aligned matrices must have equal row counts.
    RowCountMismatch { left: usize, right: usize },
    /// A similarity matrix with zero rows has no accuracy.
    EmptyMatrix,
    /// Margin scoring needs at least one neighbor per side.
    EmptyNeighborhood,
    /// A pair references a row outside the matrix.
    IndexOutOfRange { index: usize, len: usize },
    /// Language-ID training corpus has no sentences.
    EmptyCorpus { lang_index: usize },
    /// Language-ID needs at least two languages.
    NeedTwoLanguages,
    /// Language code absent from the verdict.
    UnknownLanguage,
    /// Cannot draw an adjacent negative from a single-sentence corpus.
    NoAdjacent,
    /// Sentence too short to truncate or swap.
    TooShort { words: usize },
    /// Training-set construction needs a minimum number of positives.
    TooFewPairs { got: usize, need: usize },
    /// Classifier training data contains a single class.
    DegenerateLabels,
    /// Training loss became non-finite.
    DivergedTraining,
    /// Min-max normalization over a constant score vector.
    DegenerateRange,
    /// Score tables being fused have different lengths.
    LengthMismatch { left: usize, right: usize },
    /// A configuration value is outside its valid range.
    InvalidConfig(&'static str),
}

impl core::error::Error for CoreError {}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::DimMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            CoreError::MalformedShape { len, dim } => {
                write!(f, "payload of {len} values is not a multiple of dim {dim}")
            }
            CoreError::RowCountMismatch { left, right } => {
                write!(f, "row count mismatch: {left} vs {right}")
            }
            CoreError::EmptyMatrix => write!(f, "similarity matrix is empty"),
            CoreError::EmptyNeighborhood => write!(f, "neighbor list is empty"),
            CoreError::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for {len} rows")
            }
            CoreError::EmptyCorpus { lang_index } => {
                write!(f, "training corpus #{lang_index} is empty")
            }
            CoreError::NeedTwoLanguages => write!(f, "need at least two languages"),
            CoreError::UnknownLanguage => write!(f, "unknown language code"),
            CoreError::NoAdjacent => write!(f, "corpus of one sentence has no adjacent negative"),
            CoreError::TooShort { words } => {
                write!(f, "sentence of {words} word(s) is too short to corrupt")
            }
            CoreError::TooFewPairs { got, need } => {
                write!(f, "need at least {need} positive pairs, got {got}")
            }
            CoreError::DegenerateLabels => write!(f, "training data contains a single class"),
            CoreError::DivergedTraining => write!(f, "training loss became non-finite"),
            CoreError::DegenerateRange => {
                write!(f, "constant scores: min-max range is degenerate")
            }
            CoreError::LengthMismatch { left, right } => {
                write!(f, "score table length mismatch: {left} vs {right}")
            }
            CoreError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}
