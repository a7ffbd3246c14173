use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("swap ({i}, {j}) is not an A-to-B cross-swap under the current labels")]
    SwapOrientation { i: usize, j: usize },

    #[error("index {0} appears in more than one swap")]
    NotDisjoint(usize),

    #[error("index {index} out of range for {len} observations")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("label vector has {got_a} A / {got_b} B labels, expected {n1} / {n2}")]
    LabelCounts {
        got_a: usize,
        got_b: usize,
        n1: usize,
        n2: usize,
    },

    #[error("group {group} has {size} points; at least 2 are required")]
    DegenerateGroup { group: char, size: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("operation requires d = 1, got d = {0}")]
    UnsupportedDimension(usize),

    #[error("representative set of size {0} is too small (need at least 2)")]
    RepresentativesTooSmall(usize),

    #[error("admissible swap set is empty")]
    EmptySwapSet,

    #[error("no usable block design after {attempts} attempt(s)")]
    DegenerateDesign { attempts: usize },

    #[error("degenerate diagnostics: {0}")]
    DegenerateDiagnostics(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
