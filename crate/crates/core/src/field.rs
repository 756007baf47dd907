//! Scalar arithmetic in the positive representation `[0, p-1]` of GF(p).

use std::fmt;

use crate::error::{Error, Result};

/// A small prime modulus together with `(p-1)^2`, the largest product of two
/// residues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeModulus {
    p: u32,
    pm1sq: u64,
}

impl PrimeModulus {
    pub fn new(p: u64) -> Result<Self> {
        if p < 2 || p > u32::MAX as u64 || !is_prime(p) {
            return Err(Error::InvalidModulus(p));
        }
        Ok(Self {
            p: p as u32,
            pm1sq: (p - 1) * (p - 1),
        })
    }

    #[inline]
    pub const fn p(self) -> u32 {
        self.p
    }

    /// `(p-1)^2`.
    #[inline]
    pub const fn pm1sq(self) -> u64 {
        self.pm1sq
    }
}

impl fmt::Display for PrimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.p)
    }
}

fn is_prime(n: u64) -> bool {
    if n < 4 {
        return n >= 2;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut f = 3u64;
    while f * f <= n {
        if n.is_multiple_of(f) {
            return false;
        }
        f += 2;
    }
    true
}

/// An element of GF(p), always held in `[0, p-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Residue(u32);

impl Residue {
    /// Wraps `value`, which must already be reduced.
    pub fn new(value: u32, m: PrimeModulus) -> Result<Self> {
        if value >= m.p {
            return Err(Error::InvalidArgument(format!(
                "residue {value} out of range for p={}",
                m.p
            )));
        }
        Ok(Self(value))
    }

    #[inline]
    pub const fn value(self) -> u32 {
        self.0
    }
}

impl From<Residue> for u32 {
    fn from(r: Residue) -> u32 {
        r.0
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[inline]
pub fn reduce(x: u64, m: PrimeModulus) -> Residue {
    Residue((x % m.p as u64) as u32)
}

/// `(acc + a*b) mod p`, widened to 64 bits before multiplying.
#[inline]
pub fn addmul(acc: Residue, a: Residue, b: Residue, m: PrimeModulus) -> Residue {
    reduce(acc.0 as u64 + a.0 as u64 * b.0 as u64, m)
}
