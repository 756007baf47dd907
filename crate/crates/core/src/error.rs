use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid modulus {0}: expected a prime in [2, 2^32)")]
    InvalidModulus(u64),

    #[error("no compression possible for p={p}, k={k}, beta={beta}: Q=2^{t} leaves room for {capacity} residue(s) per word")]
    NoCompression {
        p: u64,
        k: u64,
        beta: u32,
        t: u32,
        capacity: u32,
    },

    #[error("{len} residues do not fit in {slots} slots")]
    SlotOverflow { len: usize, slots: usize },

    #[error("word {value} has more than {digits} base-2^{t} digits")]
    DigitOverflow { value: u128, t: u32, digits: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("plan mismatch: {0}")]
    PlanMismatch(String),

    #[error("unsupported algorithm '{0}'")]
    UnsupportedAlgorithm(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}
