//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]. The harness records failed
//! grid cells by [`Error::kind`], so variant names double as stable status
//! strings (`failed:ZeroNorm`, ...).

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("row selection is empty")]
    EmptySelection,
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must have at least one row and one column (got {n}x{d})")]
    EmptyMatrix { n: usize, d: usize },
    #[error("non-finite value at flat index {0}")]
    NonFiniteValue(usize),
    #[error("vector norm is zero (degenerate direction)")]
    ZeroNorm,
    #[error("vector norm {0} is not within tolerance of 1")]
    NotUnitNorm(f64),
    #[error("selected rows have zero variance")]
    DegenerateVariance,

    #[error("bad magic bytes {0:?}, expected \"CAVB\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    VersionMismatch(u32),
    #[error("file truncated: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: u64, found: u64 },
    #[error("{0} trailing bytes after matrix payload")]
    TrailingBytes(u64),
    #[error("label table: {0}")]
    LabelTable(String),
    #[error("unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("paired sampling requested but the label table has no pair mapping")]
    NoPairMapping,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("only one class present")]
    SingleClass,
    #[error("loss became non-finite during optimisation")]
    NonFiniteLoss,
    #[error("evaluation set is empty")]
    EmptyEval,

    #[error("all rows are zero; cannot normalise")]
    AllZeroRows,
    #[error("no SAE neuron survives density filtering at any threshold")]
    NoSurvivingNeurons,
    #[error("stage-one selection produced no active latents")]
    FewerThanKActive,
    #[error("method {0} requires SAE parameters")]
    MissingSae(String),
    #[error("all pairs are identical; no difference vectors")]
    AllPairsIdentical,

    #[error("score set has an empty side")]
    EmptySide,
    #[error("negative scores have (near) zero variance or fewer than two samples")]
    DegenerateNegatives,
    #[error("no other concept vectors supplied")]
    EmptyOthers,
    #[error("baseline AUC is zero")]
    DegenerateBaseline,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("accuracy gap {0} is below the steering-disparity guard")]
    DegenerateGap(f64),
    #[error("empty input")]
    Empty,

    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("unknown method id {0:?}")]
    UnknownMethod(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Variant name, used as the failure status of a report cell.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptySelection => "EmptySelection",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptyMatrix { .. } => "EmptyMatrix",
            Error::NonFiniteValue(_) => "NonFiniteValue",
            Error::ZeroNorm => "ZeroNorm",
            Error::NotUnitNorm(_) => "NotUnitNorm",
            Error::DegenerateVariance => "DegenerateVariance",
            Error::BadMagic(_) => "BadMagic",
            Error::VersionMismatch(_) => "VersionMismatch",
            Error::TruncatedFile { .. } => "TruncatedFile",
            Error::TrailingBytes(_) => "TrailingBytes",
            Error::LabelTable(_) => "LabelTable",
            Error::UnknownConcept(_) => "UnknownConcept",
            Error::NoPairMapping => "NoPairMapping",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::SingleClass => "SingleClass",
            Error::NonFiniteLoss => "NonFiniteLoss",
            Error::EmptyEval => "EmptyEval",
            Error::AllZeroRows => "AllZeroRows",
            Error::NoSurvivingNeurons => "NoSurvivingNeurons",
            Error::FewerThanKActive => "FewerThanKActive",
            Error::MissingSae(_) => "MissingSae",
            Error::AllPairsIdentical => "AllPairsIdentical",
            Error::EmptySide => "EmptySide",
            Error::DegenerateNegatives => "DegenerateNegatives",
            Error::EmptyOthers => "EmptyOthers",
            Error::DegenerateBaseline => "DegenerateBaseline",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::DegenerateGap(_) => "DegenerateGap",
            Error::Empty => "Empty",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::UnknownMethod(_) => "UnknownMethod",
            Error::Io { .. } => "Io",
            Error::Parse { .. } => "Parse",
        }
    }
}
