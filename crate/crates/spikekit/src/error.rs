//! Error types shared across the crate.
//!
//! Numeric code returns `TensorError` (shape or finiteness violations),
//! the spike-path machinery returns `FoldError`, and the I/O-facing
//! modules have their own enums. `Error` is the umbrella the CLI and
//! bindings use.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: shape {shape:?} does not hold {len} elements")]
    ShapeLenMismatch {
        op: &'static str,
        shape: Vec<usize>,
        len: usize,
    },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("{op} expects {expected}, got shape {got:?}")]
    BadRank {
        op: &'static str,
        expected: &'static str,
        got: Vec<usize>,
    },
    #[error("backward expects a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum FoldError {
    #[error("activation at {index:?} is {value}, not an integer multiple of 1/{n}")]
    NonIntegerActivation {
        index: Vec<usize>,
        value: f64,
        n: f64,
    },
    #[error("unfolded count {count} at {index:?} outside [0, {d}]")]
    OutOfRange {
        index: Vec<usize>,
        count: i64,
        d: u32,
    },
    #[error("equivalence is only defined for integerized clipping bounds; layer {layer} uses continuous bounds")]
    ContinuousBounds { layer: usize },
    #[error("layer {layer}: {kind} neurons have no integer-valued unfolding")]
    UnsupportedKind { layer: usize, kind: &'static str },
    #[error("layer {layer} shape mismatch: weight is {rows}x{cols}, input has {input} features")]
    LayerShape {
        layer: usize,
        rows: usize,
        cols: usize,
        input: usize,
    },
    #[error("checkpoint: {0}")]
    Container(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic {found:#010x} at byte offset 0, expected {expected:#010x}")]
    BadMagic {
        path: String,
        found: u32,
        expected: u32,
    },
    #[error("{path}: truncated at byte offset {offset}: {what}")]
    Truncated {
        path: String,
        offset: u64,
        what: String,
    },
    #[error("{path}: image count {images} does not match label count {labels}")]
    CountMismatch {
        path: String,
        images: usize,
        labels: usize,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}, batch {batch}{}", layer_hint(.layer))]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        layer: Option<usize>,
    },
    #[error("{0}")]
    BadConfig(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

fn layer_hint(layer: &Option<usize>) -> String {
    match layer {
        Some(l) => format!(" (first non-finite activation in layer {l})"),
        None => String::new(),
    }
}

/// Umbrella error for callers that cross module boundaries (CLI, bindings).
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
