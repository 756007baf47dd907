//! Conversions between residue vectors and Q-adic packed words.
//!
//! A vector `v` of at most `e` residues is stored forward as
//! `sum v_i Q^i`, or reversed as `sum v_(d-i) Q^i`. The product of a
//! reversed word by a forward one carries the dot product of the two
//! vectors in its degree-`d` digit.

use crate::error::{Error, Result};
use crate::field::{reduce, Residue};
use crate::plan::CompressionPlan;
use crate::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PackedWord<W: Word = f64>(W);

impl<W: Word> PackedWord<W> {
    #[inline]
    pub fn new(value: W) -> Self {
        Self(value)
    }

    #[inline]
    pub fn from_u64(value: u64) -> Self {
        Self(W::from_u64(value))
    }

    #[inline]
    pub fn value(self) -> W {
        self.0
    }

    #[inline]
    pub fn to_u64(self) -> u64 {
        self.0.to_u64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reversed,
}

/// Which logical axis is grouped into words. `Row` packs consecutive entries
/// of each row (the column count shrinks); `Column` packs down each column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackOrientation {
    pub direction: Direction,
    pub axis: Axis,
    pub slots: usize,
}

#[inline]
fn check_slots(len: usize, plan: &CompressionPlan) -> Result<()> {
    let slots = plan.e() as usize;
    if len > slots {
        return Err(Error::SlotOverflow { len, slots });
    }
    Ok(())
}

/// Horner evaluation at `2^t` of `v` read from the highest coefficient down.
#[inline]
pub(crate) fn horner<W: Word>(v: impl DoubleEndedIterator<Item = u32>, t: u32) -> W {
    let q = W::from_u64(1u64 << t);
    let mut r = W::default();
    for x in v.rev() {
        r = r.mul(q).add(W::from_u64(x as u64));
    }
    r
}

/// `sum v_i Q^i`; missing high slots are zero.
pub fn compress_forward<W: Word>(v: &[u32], plan: &CompressionPlan) -> Result<PackedWord<W>> {
    check_slots(v.len(), plan)?;
    debug_assert!(v.iter().all(|&x| x < plan.p()));
    Ok(PackedWord(horner(v.iter().copied(), plan.t())))
}

/// `sum v_(d-i) Q^i` over the full degree `d`. A short vector is padded
/// with zeros at its end, which shifts the reversed word up by
/// `Q^(e - len)`.
pub fn compress_reverse<W: Word>(v: &[u32], plan: &CompressionPlan) -> Result<PackedWord<W>> {
    check_slots(v.len(), plan)?;
    debug_assert!(v.iter().all(|&x| x < plan.p()));
    Ok(PackedWord(reverse_word(v, plan.t(), plan.e() as usize)))
}

#[inline]
pub(crate) fn reverse_word<W: Word>(v: &[u32], t: u32, slots: usize) -> W {
    let q = W::from_u64(1u64 << t);
    let mut r = W::default();
    for &x in v {
        r = r.mul(q).add(W::from_u64(x as u64));
    }
    for _ in v.len()..slots {
        r = r.mul(q);
    }
    r
}

/// Degree-`d` coefficient of `w`, reduced mod `p`.
///
/// `w` is a single exact word here; products whose full value exceeds
/// `2^beta` go through [`ProductAccumulator`].
pub fn extract_coefficient<W: Word>(w: PackedWord<W>, plan: &CompressionPlan) -> Residue {
    debug_assert!(w.0.to_u64() < 1u64 << plan.beta().min(63));
    let digit = W::acc_digit(&W::acc_from(w.0), plan);
    reduce(digit, plan.modulus())
}

/// Delayed-reduction sum of reversed-by-forward word products.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProductAccumulator<W: Word = f64> {
    acc: W::Acc,
}

impl<W: Word> ProductAccumulator<W> {
    pub fn new() -> Self {
        Self { acc: W::Acc::default() }
    }

    #[inline]
    pub fn add_product(&mut self, reversed: PackedWord<W>, forward: PackedWord<W>) {
        W::acc_add_product(&mut self.acc, reversed.0, forward.0);
    }

    /// The accumulated dot product mod `p`.
    pub fn coefficient(&self, plan: &CompressionPlan) -> Residue {
        reduce(W::acc_digit(&self.acc, plan), plan.modulus())
    }
}

/// `extract_coefficient(reverse(a) * forward(b))` for vectors of at most `e`
/// residues.
pub fn packed_dot<W: Word>(a: &[u32], b: &[u32], plan: &CompressionPlan) -> Result<Residue> {
    let mut acc = ProductAccumulator::<W>::new();
    acc.add_product(compress_reverse(a, plan)?, compress_forward(b, plan)?);
    Ok(acc.coefficient(plan))
}

#[inline]
fn check_digits(w: u64, t: u32, digits: usize) -> Result<()> {
    let bits = t as usize * digits;
    if bits < 64 && w >> bits != 0 {
        return Err(Error::DigitOverflow {
            value: w as u128,
            t,
            digits,
        });
    }
    Ok(())
}

/// The `e` base-`Q` digits of `w`, lowest first, not reduced mod `p`.
pub fn extract_all<W: Word>(w: PackedWord<W>, plan: &CompressionPlan) -> Result<Vec<u64>> {
    let x = w.0.to_u64();
    let digits = plan.e() as usize;
    check_digits(x, plan.t(), digits)?;
    Ok(unpack_digits(x, plan.t(), digits).collect())
}

#[inline]
pub(crate) fn unpack_digits(x: u64, t: u32, digits: usize) -> impl Iterator<Item = u64> {
    let mask = (1u64 << t) - 1;
    (0..digits).map(move |i| (x >> (t as usize * i)) & mask)
}

/// Reduces every base-`2^t` digit of `x` mod `p` in one pass.
#[inline]
pub(crate) fn redq_raw(x: u64, t: u32, digits: usize, p: u32) -> u64 {
    let mask = (1u64 << t) - 1;
    let p = p as u64;
    let mut out = 0u64;
    for i in 0..digits {
        let shift = t as usize * i;
        out |= (((x >> shift) & mask) % p) << shift;
    }
    out
}

/// Simultaneous reduction of all `e` digits: `sum (c_i mod p) Q^i`.
pub fn redq<W: Word>(w: PackedWord<W>, plan: &CompressionPlan) -> Result<PackedWord<W>> {
    let x = w.0.to_u64();
    let digits = plan.e() as usize;
    check_digits(x, plan.t(), digits)?;
    Ok(PackedWord(W::from_u64(redq_raw(x, plan.t(), digits, plan.p()))))
}

/// Forward-packs consecutive groups of `e` residues; the last group may be
/// short.
pub(crate) fn pack_forward_groups<W: Word>(residues: &[u32], plan: &CompressionPlan) -> Vec<PackedWord<W>> {
    residues
        .chunks(plan.e() as usize)
        .map(|g| PackedWord(horner(g.iter().copied(), plan.t())))
        .collect()
}

/// Extracts the dot product held in each raw product word, then repacks the
/// residues forward, `e` per word.
pub fn reduce_and_compress<W: Word>(row: &[PackedWord<W>], plan: &CompressionPlan) -> Result<Vec<PackedWord<W>>> {
    let residues: Vec<u32> = row
        .iter()
        .map(|&w| extract_coefficient(w, plan).value())
        .collect();
    Ok(pack_forward_groups(&residues, plan))
}
