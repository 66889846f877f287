//! Error type shared across the workspace.

use std::fmt;
use std::io;

/// Errors raised by codebook construction, scanning, identification and the
/// experiment harness.
#[derive(Debug)]
pub enum Error {
    /// Modulus is not a prime number.
    NotPrime(u64),
    /// Modulus exceeds the 31-bit bound that keeps products inside `u64`.
    ModulusTooLarge(u64),
    /// Hash key lies outside `[0, p)`.
    KeyOutOfRange { key: u64, modulus: u64 },
    /// Beam count does not divide the direction count.
    IndivisibleGrid { directions: usize, beams: usize },
    /// Arm count does not divide the element count.
    IndivisibleArray { elements: usize, arms: usize },
    /// Vector lengths disagree.
    LengthMismatch { left: usize, right: usize },
    /// Grid size must be a power of two.
    NotPowerOfTwo(usize),
    /// Direction index outside the grid.
    IndexOutOfRange { index: usize, len: usize },
    /// Codebooks or scenario parameters disagree.
    ConfigMismatch(String),
    /// Beam sets passed to the identifier disagree on rounds, beams or grid.
    InconsistentBeamSets(String),
    /// Demultiplexing needs more slots than the trace provides.
    InsufficientSlots { required: usize, available: usize },
    /// Training method name not recognized.
    UnknownMethod(String),
    /// No round count within the search cap met the accuracy target.
    TargetUnreachable {
        directions: usize,
        target: f64,
        best: f64,
        max_rounds: usize,
    },
    /// Required config key absent.
    MissingKey(&'static str),
    /// Config key or value malformed, unknown or out of range.
    InvalidConfig(String),
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotPrime(p) => write!(f, "{p} is not prime"),
            Error::ModulusTooLarge(p) => write!(f, "modulus {p} exceeds 2^31"),
            Error::KeyOutOfRange { key, modulus } => {
                write!(f, "key {key} outside field of modulus {modulus}")
            }
            Error::IndivisibleGrid { directions, beams } => {
                write!(f, "{beams} beams do not divide {directions} directions")
            }
            Error::IndivisibleArray { elements, arms } => {
                write!(f, "{arms} arms do not divide {elements} array elements")
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::NotPowerOfTwo(n) => write!(f, "{n} is not a power of two"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::ConfigMismatch(msg) => write!(f, "configuration mismatch: {msg}"),
            Error::InconsistentBeamSets(msg) => write!(f, "inconsistent beam sets: {msg}"),
            Error::InsufficientSlots {
                required,
                available,
            } => write!(
                f,
                "demultiplexing needs {required} slots but the trace has {available}"
            ),
            Error::UnknownMethod(name) => write!(f, "unknown training method '{name}'"),
            Error::TargetUnreachable {
                directions,
                target,
                best,
                max_rounds,
            } => write!(
                f,
                "accuracy target {target} unreachable at N={directions}: best {best} within L <= {max_rounds}"
            ),
            Error::MissingKey(key) => write!(f, "missing config key '{key}'"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
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

impl Error {
    /// Process exit code for the CLI: 3 for unreachable accuracy targets,
    /// 1 for i/o failures, 2 for everything configuration-shaped.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TargetUnreachable { .. } => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
