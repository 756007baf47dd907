//! Uniform entry point over all multiplication methods, used by the CLI,
//! the verifier and the benchmarks.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::PrimeModulus;
use crate::gemm;
use crate::matrix::ResidueMatrix;
use crate::plan::{self, CompressionPlan, FullPlan};
use crate::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Naive,
    Common,
    Right,
    Left,
    Full,
    Blocked,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Naive,
        Method::Common,
        Method::Right,
        Method::Left,
        Method::Full,
        Method::Blocked,
    ];

    pub const COMPRESSED: [Method; 5] = [
        Method::Common,
        Method::Right,
        Method::Left,
        Method::Full,
        Method::Blocked,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Common => "common",
            Method::Right => "right",
            Method::Left => "left",
            Method::Full => "full",
            Method::Blocked => "blocked",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnsupportedAlgorithm(s.to_string()))
    }
}

/// Packing parameters chosen for one method and one problem shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodPlan {
    Naive,
    Single(CompressionPlan),
    Blocked { plan: CompressionPlan, kpanel: usize },
    Full(FullPlan),
}

impl MethodPlan {
    /// `log2 Q`, or 0 when nothing is packed.
    pub fn t(&self) -> u32 {
        match self {
            MethodPlan::Naive => 0,
            MethodPlan::Single(p) | MethodPlan::Blocked { plan: p, .. } => p.t(),
            MethodPlan::Full(f) => f.t(),
        }
    }

    /// Residues per word.
    pub fn e(&self) -> u32 {
        match self {
            MethodPlan::Naive => 1,
            MethodPlan::Single(p) | MethodPlan::Blocked { plan: p, .. } => p.e(),
            MethodPlan::Full(f) => f.digits(),
        }
    }
}

impl fmt::Display for MethodPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodPlan::Naive => f.write_str("uncompressed"),
            MethodPlan::Single(p) => write!(f, "{p}"),
            MethodPlan::Blocked { plan, kpanel } => write!(f, "{plan} kpanel={kpanel}"),
            MethodPlan::Full(p) => write!(f, "{p}"),
        }
    }
}

/// Default plan of `method` for an `m x k` by `k x n` product.
pub fn choose_plan(method: Method, modulus: PrimeModulus, m: usize, k: usize, n: usize, beta: u32) -> Result<MethodPlan> {
    let (m, k, n) = (m as u64, k as u64, n as u64);
    Ok(match method {
        Method::Naive => MethodPlan::Naive,
        Method::Common => MethodPlan::Single(plan::plan_compression(modulus, k, beta)?),
        Method::Right => MethodPlan::Single(plan::plan_packing(modulus, k, n, beta)?),
        Method::Left => MethodPlan::Single(plan::plan_packing(modulus, k, m, beta)?),
        Method::Full => MethodPlan::Full(plan::plan_full(modulus, k, beta)?),
        Method::Blocked => {
            let (plan, kpanel) = plan::plan_panels(modulus, k, beta)?;
            MethodPlan::Blocked { plan, kpanel: kpanel as usize }
        }
    })
}

/// Multiplies with `method` under `plan` and returns the unpacked result.
pub fn run<W: Word>(
    method: Method,
    plan: &MethodPlan,
    a: &ResidueMatrix,
    b: &ResidueMatrix,
    modulus: PrimeModulus,
) -> Result<ResidueMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch {
            left: crate::error::shape(a.rows(), a.cols()),
            right: crate::error::shape(b.rows(), b.cols()),
        });
    }
    match (method, plan) {
        (Method::Naive, _) => gemm::naive_gemm(a, b, modulus),
        (Method::Common, MethodPlan::Single(p)) => gemm::mul_common_compressed::<W>(a, b, p),
        (Method::Right, MethodPlan::Single(p)) => {
            let cb = gemm::compress_rows_forward::<W>(b, p)?;
            gemm::mul_right_compressed(a, &cb)?.unpack()
        }
        (Method::Left, MethodPlan::Single(p)) => {
            let ca = gemm::compress_cols_forward::<W>(a, p)?;
            gemm::mul_left_compressed(&ca, b)?.unpack()
        }
        (Method::Full, MethodPlan::Full(p)) => gemm::mul_full_compressed::<W>(a, b, p),
        (Method::Blocked, MethodPlan::Blocked { plan, kpanel }) => gemm::blocked_accumulate::<W>(a, b, plan, *kpanel),
        (method, plan) => Err(Error::PlanMismatch(format!("{method} cannot run under plan {plan}"))),
    }
}
