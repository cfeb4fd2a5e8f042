//! Error type shared across the crate.

use std::fmt;
use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Topology fields violate an invariant (zero dimension, width out of range).
    InvalidTopology(String),
    /// Matrix/vector shapes do not line up.
    ShapeMismatch { expected: String, found: String },
    /// Requested accumulator width cannot hold the worst-case value.
    AccWidthTooSmall { required: u32, given: u32 },
    /// Weight file does not start with the expected magic bytes.
    BadMagic,
    /// Weight file version is not supported.
    UnsupportedVersion(u8),
    /// Weight file ended before all declared data was read.
    TruncatedFile,
    /// Weight file has bytes past the last declared matrix.
    TrailingData,
    /// Packed nibble storage only covers 4-bit weights.
    UnsupportedWeightWidth(u32),
    /// Value does not fit the signed range of the given width.
    ValueOutOfRange { value: i64, width: u32 },
    /// Token id is outside the vocabulary.
    TokenOutOfRange { token: usize, vocab: usize },
    /// Attention was asked to run over an empty KV cache.
    EmptyCache,
    /// Sampling parameter (k or p) is invalid.
    InvalidSampling(String),
    /// Neuron synthesis got a weight row of the wrong length.
    FanInMismatch { expected: usize, found: usize },
    /// Netlist evaluation found an input with no bound value trace.
    UnboundInput(String),
    /// A node produced a value outside its declared bit-width.
    WidthViolation { node: usize, value: i64, width: u32 },
    /// Netlist structure is not evaluable (combinational cycle, missing driver).
    MalformedNetlist(String),
    /// Testbench vector does not match the module's port widths.
    VectorWidthMismatch { port: String, value: i64, width: u32 },
    /// A cost/area/latency model was given an argument outside its domain.
    InvalidModelInput(String),
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidTopology(msg) => write!(f, "invalid topology: {msg}"),
            Error::ShapeMismatch { expected, found } => {
                write!(f, "shape mismatch: expected {expected}, found {found}")
            }
            Error::AccWidthTooSmall { required, given } => write!(
                f,
                "accumulator width {given} too small: worst case needs {required} bits"
            ),
            Error::BadMagic => write!(f, "bad magic: not a weight bundle file"),
            Error::UnsupportedVersion(v) => write!(f, "unsupported weight file version {v}"),
            Error::TruncatedFile => write!(f, "truncated weight file"),
            Error::TrailingData => write!(f, "trailing bytes after last matrix"),
            Error::UnsupportedWeightWidth(w) => {
                write!(f, "packed storage requires weight width 4, got {w}")
            }
            Error::ValueOutOfRange { value, width } => {
                write!(f, "value {value} outside signed {width}-bit range")
            }
            Error::TokenOutOfRange { token, vocab } => {
                write!(f, "token {token} outside vocabulary of size {vocab}")
            }
            Error::EmptyCache => write!(f, "attention over an empty KV cache"),
            Error::InvalidSampling(msg) => write!(f, "invalid sampling parameter: {msg}"),
            Error::FanInMismatch { expected, found } => {
                write!(f, "fan-in mismatch: declared {expected}, got {found} weights")
            }
            Error::UnboundInput(name) => write!(f, "netlist input '{name}' has no bound value"),
            Error::WidthViolation { node, value, width } => {
                write!(f, "node n{node} value {value} exceeds its {width}-bit width")
            }
            Error::MalformedNetlist(msg) => write!(f, "malformed netlist: {msg}"),
            Error::VectorWidthMismatch { port, value, width } => {
                write!(f, "vector value {value} does not fit port '{port}' ({width} bits)")
            }
            Error::InvalidModelInput(msg) => write!(f, "invalid model input: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}
