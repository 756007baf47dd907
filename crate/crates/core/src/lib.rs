//! Matrix multiplication over small prime fields GF(p) with several
//! residues stored per machine word as a Q-adic number.
//!
//! The building blocks are in [`pack`] (packing, extraction, REDQ) and
//! [`plan`] (choosing `Q = 2^t` and the number of residues per word); the
//! products themselves are in [`gemm`].

pub mod algo;
pub mod bench;
pub mod cli;
pub mod error;
pub mod field;
pub mod gemm;
pub mod io;
pub mod matrix;
pub mod pack;
pub mod plan;
pub mod word;

pub use error::{Error, Result};
pub use field::{PrimeModulus, Residue};
pub use matrix::{CompressedMatrix, ResidueMatrix};
pub use pack::PackedWord;
pub use plan::{plan_compression, plan_full, Algorithm, CompressionPlan, FullPlan};
pub use word::Word;
