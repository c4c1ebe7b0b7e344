use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left_rows}x{left_cols} and {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrix data has {len} values, expected {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },

    #[error("{context}: non-finite value at row {row}, column {col}")]
    NonFinite {
        context: &'static str,
        row: usize,
        col: usize,
    },

    #[error("eps must be positive (got {0})")]
    InvalidEps(f64),

    #[error("{mechanism}: vanishing denominator {value:e} at row {row}")]
    VanishingDenominator {
        mechanism: &'static str,
        row: usize,
        value: f64,
    },

    #[error("unknown feature map `{0}` (registered: elu_plus_one)")]
    UnknownFeatureMap(String),

    #[error("unknown attention mechanism `{0}`")]
    UnknownMechanism(String),

    #[error("weight matrix for N = {n} exceeds the materialization guard N <= {max}")]
    WeightMatrixTooLarge { n: usize, max: usize },

    #[error(
        "{mechanism} at N = {n} needs {required} bytes of weight storage, over the {budget}-byte budget; \
         cap N at {suggested_max_n} or raise the budget"
    )]
    MemoryBudgetExceeded {
        mechanism: String,
        n: usize,
        required: u128,
        budget: u64,
        suggested_max_n: usize,
    },

    #[error("slope fit needs at least {required} distinct N values, got {distinct}")]
    InsufficientSweep { distinct: usize, required: usize },

    #[error("cannot fit records mixing {0} and {1}")]
    MixedRecords(String, String),

    #[error("at least {required} repeats are required, got {got}")]
    TooFewRepeats { got: usize, required: usize },

    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),

    #[error(
        "{mechanism}: output[{row}, {col}] = {value} escapes the value hull [{min}, {max}]"
    )]
    ConvexHullViolation {
        mechanism: String,
        row: usize,
        col: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("tsr: bad magic")]
    BadMagic,

    #[error("tsr: unknown element type tag {0}")]
    UnknownElementType(u8),

    #[error("tsr: element type {found} does not match requested {expected}")]
    ElementTypeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("tsr: unsupported rank {0} (only rank 2 is supported)")]
    UnsupportedRank(u8),

    #[error("tsr: reserved header field is {0}, expected 0")]
    ReservedNonZero(u16),

    #[error("tsr: truncated {what}: expected {expected} bytes, found {found}")]
    Truncated {
        what: &'static str,
        expected: u64,
        found: u64,
    },

    #[error("tsr: {trailing} trailing bytes after payload")]
    TrailingBytes { trailing: u64 },

    #[error("tsr: dimensions {rows}x{cols} overflow the addressable size")]
    DimensionOverflow { rows: u64, cols: u64 },

    #[error("feature map sidecar: {0}")]
    Sidecar(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    ) -> Self {
        Error::ShapeMismatch {
            op,
            left_rows: left.0,
            left_cols: left.1,
            right_rows: right.0,
            right_cols: right.1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
