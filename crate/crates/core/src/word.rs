//! Machine words that hold Q-adic packed residues.
//!
//! A backend only has to do exact integer arithmetic on values below
//! `2^MAX_BETA`. Two are provided: `f64` (53 exactly representable bits) and
//! `u64` (63 bits, one kept free so sums of in-range words never wrap).
//!
//! Common-dimension products `reverse(a) * forward(b)` are the exception:
//! their full value reaches `Q^(2d+1)`, far above `2^beta`, and only the
//! digits up to degree `d` matter. Each backend therefore has an
//! accumulator type for them. `u64` simply wraps, which keeps the low
//! `t(d+1) <= 64` bits intact. `f64` keeps the rounded running sum together
//! with the exact sum of every rounding error (two-product and two-sum
//! terms), so the digit read back through the reciprocal of `Q^d` is exact.

use std::fmt::Debug;

use crate::plan::{CompressionPlan, Extraction};

pub trait Word: Copy + Default + PartialEq + PartialOrd + Debug + Send + Sync + 'static {
    /// Running sum of packed products along a common dimension.
    type Acc: Copy + Default + Debug + Send + Sync;

    const NAME: &'static str;
    /// Largest `beta` this backend represents exactly.
    const MAX_BETA: u32;

    /// `v` must be below `2^MAX_BETA`.
    fn from_u64(v: u64) -> Self;
    fn to_u64(self) -> u64;
    fn add(self, rhs: Self) -> Self;
    fn mul(self, rhs: Self) -> Self;
    /// `self + a * b`; the caller guarantees the result is below `2^beta`.
    fn mul_add(self, a: Self, b: Self) -> Self;

    fn acc_from(w: Self) -> Self::Acc;
    /// `acc += a * b` where the product may exceed `2^beta`.
    fn acc_add_product(acc: &mut Self::Acc, a: Self, b: Self);
    /// `acc += other`.
    fn acc_merge(acc: &mut Self::Acc, other: &Self::Acc);
    /// Degree-`d` digit of the accumulated value, in `[0, Q)`.
    fn acc_digit(acc: &Self::Acc, plan: &CompressionPlan) -> u64;
}

impl Word for u64 {
    type Acc = u64;

    const NAME: &'static str = "int";
    const MAX_BETA: u32 = 63;

    #[inline]
    fn from_u64(v: u64) -> Self {
        v
    }
    #[inline]
    fn to_u64(self) -> u64 {
        self
    }
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        self * rhs
    }
    #[inline]
    fn mul_add(self, a: Self, b: Self) -> Self {
        self + a * b
    }

    #[inline]
    fn acc_from(w: Self) -> u64 {
        w
    }
    #[inline]
    fn acc_add_product(acc: &mut u64, a: Self, b: Self) {
        *acc = acc.wrapping_add(a.wrapping_mul(b));
    }
    #[inline]
    fn acc_merge(acc: &mut u64, other: &u64) {
        *acc = acc.wrapping_add(*other);
    }
    #[inline]
    fn acc_digit(acc: &u64, plan: &CompressionPlan) -> u64 {
        (acc >> (plan.t() * plan.d())) & plan.q_mask()
    }
}

/// Rounded running sum plus the exact total of all rounding errors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    pub hi: f64,
    pub err: f64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        let e = (self.hi - (s - bp)) + (x - bp);
        self.hi = s;
        self.err += e;
    }
}

const MANTISSA_BITS: u32 = 52;
const MANTISSA_MASK: u64 = (1u64 << MANTISSA_BITS) - 1;

impl Word for f64 {
    type Acc = CompensatedSum;

    const NAME: &'static str = "float";
    const MAX_BETA: u32 = 53;

    #[inline]
    fn from_u64(v: u64) -> Self {
        debug_assert!(v < 1u64 << 53);
        v as f64
    }
    #[inline]
    fn to_u64(self) -> u64 {
        debug_assert!((0.0..9007199254740992.0).contains(&self) && self.fract() == 0.0);
        self as u64
    }
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        self * rhs
    }
    #[inline]
    fn mul_add(self, a: Self, b: Self) -> Self {
        self + a * b
    }

    #[inline]
    fn acc_from(w: Self) -> CompensatedSum {
        CompensatedSum { hi: w, err: 0.0 }
    }
    #[inline]
    fn acc_add_product(acc: &mut CompensatedSum, a: Self, b: Self) {
        let p = a * b;
        let lo = a.mul_add(b, -p);
        acc.add(p);
        acc.err += lo;
    }
    #[inline]
    fn acc_merge(acc: &mut CompensatedSum, other: &CompensatedSum) {
        acc.add(other.hi);
        acc.err += other.err;
    }

    fn acc_digit(acc: &CompensatedSum, plan: &CompressionPlan) -> u64 {
        let td = (plan.t() * plan.d()) as i32;
        if plan.extraction() == Extraction::AdditiveOffset {
            let top = plan.t() as i32 * (2 * plan.d() as i32 + 1);
            let offset = pow2(top);
            if acc.hi < offset && top - (MANTISSA_BITS as i32) <= td {
                let s = acc.hi + offset;
                if s >= 2.0 * offset {
                    return reciprocal_digit(acc, plan);
                }
                let rounded = s - offset;
                let rounding = acc.hi - rounded;
                let lsb = top - MANTISSA_BITS as i32;
                let shift = (td - lsb) as u32;
                let bits = s.to_bits() & MANTISSA_MASK;
                let high = bits >> shift;
                let rest = (bits & ((1u64 << shift) - 1)) as f64 * pow2(lsb);
                let carry = floor_i64((rest + rounding + acc.err) * plan.inv_qd());
                return (high as i64).wrapping_add(carry) as u64 & plan.q_mask();
            }
        }
        reciprocal_digit(acc, plan)
    }
}

/// `2^e` for normal exponents.
#[inline]
fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((1023 + e) as u64) << MANTISSA_BITS)
}

/// `floor(x)` for `|x| < 2^63`, without a library call.
#[inline]
fn floor_i64(x: f64) -> i64 {
    let i = x as i64;
    i - ((i as f64) > x) as i64
}

#[inline]
fn reciprocal_digit(acc: &CompensatedSum, plan: &CompressionPlan) -> u64 {
    let inv = plan.inv_qd();
    // floor(hi / Q^d) and the remainder are both exact: Q^d is a power of two.
    let high = floor_i64(acc.hi * inv);
    let rest = acc.hi - high as f64 / inv;
    let carry = floor_i64((rest + acc.err) * inv);
    high.wrapping_add(carry) as u64 & plan.q_mask()
}
