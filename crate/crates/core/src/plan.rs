//! Choosing the packing base `Q = 2^t` and the number of residues per word.
//!
//! Two bounds drive every choice here. Delayed reduction over a common
//! dimension `k` needs every Q-adic digit of an accumulated product to stay
//! below `Q`, i.e. `k (p-1)^2 < Q`. The word itself must hold `e = d+1`
//! digits exactly, i.e. `Q^e < 2^beta`. With `Q = 2^t` the first bound
//! fixes the smallest usable `t` and the second caps `e` at
//! `floor((beta-1)/t)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::PrimeModulus;

/// Mantissa bits of an IEEE-754 binary64.
pub const DEFAULT_BETA: u32 = 53;

/// How the degree-`d` digit of a common-dimension product is recovered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extraction {
    /// Multiply by the precomputed reciprocal of `Q^d`, floor, mask with `Q-1`.
    #[default]
    Reciprocal,
    /// Add `Q^(2d+1)` so the wanted digits sit at fixed mantissa positions,
    /// then read them off the bit pattern. Costs a factor `2^(1/(d+1))` in
    /// the largest legal `k`.
    AdditiveOffset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionPlan {
    modulus: PrimeModulus,
    t: u32,
    d: u32,
    capacity: u32,
    beta: u32,
    kmax: u64,
    inv_qd: f64,
    extraction: Extraction,
}

/// Smallest `t >= 1` with `2^t > k (p-1)^2`.
pub fn min_exponent(m: PrimeModulus, k: u64) -> u32 {
    let bound = k as u128 * m.pm1sq() as u128;
    let t = 128 - bound.leading_zeros();
    t.max(1)
}

/// `floor((2^t - 1) / (p-1)^2)`.
fn kmax_for(m: PrimeModulus, t: u32) -> u64 {
    let q = 1u128 << t;
    let k = (q - 1) / m.pm1sq() as u128;
    k.min(u64::MAX as u128) as u64
}

/// Number of base-`2^t` digits that fit strictly below `2^beta`.
fn capacity_for(t: u32, beta: u32) -> u32 {
    (beta - 1) / t
}

fn check_beta(beta: u32) -> Result<()> {
    if !(2..=64).contains(&beta) {
        return Err(Error::InvalidArgument(format!(
            "beta must lie in [2, 64], got {beta}"
        )));
    }
    Ok(())
}

impl CompressionPlan {
    /// A plan with an explicitly chosen `Q = 2^t` and degree `d`, validated
    /// against both bounds.
    pub fn with_degree(modulus: PrimeModulus, t: u32, d: u32, beta: u32) -> Result<Self> {
        check_beta(beta)?;
        if t == 0 || t >= 64 {
            return Err(Error::InvalidArgument(format!("t must lie in [1, 63], got {t}")));
        }
        let e = d + 1;
        if t as u64 * e as u64 >= beta as u64 {
            return Err(Error::PlanMismatch(format!(
                "Q^{e} = 2^{} does not fit below 2^{beta}",
                t as u64 * e as u64
            )));
        }
        let kmax = kmax_for(modulus, t);
        if kmax == 0 {
            return Err(Error::PlanMismatch(format!(
                "Q = 2^{t} cannot hold a single product (p-1)^2 = {}",
                modulus.pm1sq()
            )));
        }
        Ok(Self {
            modulus,
            t,
            d,
            capacity: capacity_for(t, beta),
            beta,
            kmax,
            inv_qd: (-((t * d) as i32) as f64).exp2(),
            extraction: Extraction::Reciprocal,
        })
    }

    /// Switches to additive-offset extraction, shrinking `kmax` by
    /// `2^(1/(d+1))`.
    pub fn with_additive_offset(mut self) -> Self {
        if self.extraction == Extraction::AdditiveOffset {
            return self;
        }
        let shrink = 2f64.powf(1.0 / (self.d + 1) as f64);
        self.kmax = (self.kmax as f64 / shrink).floor() as u64;
        self.extraction = Extraction::AdditiveOffset;
        self
    }

    #[inline]
    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }
    #[inline]
    pub fn p(&self) -> u32 {
        self.modulus.p()
    }
    #[inline]
    pub fn t(&self) -> u32 {
        self.t
    }
    /// `Q = 2^t`.
    #[inline]
    pub fn q(&self) -> u64 {
        1u64 << self.t
    }
    #[inline]
    pub fn q_mask(&self) -> u64 {
        self.q() - 1
    }
    /// Packing degree.
    #[inline]
    pub fn d(&self) -> u32 {
        self.d
    }
    /// Residues per word, `d+1`.
    #[inline]
    pub fn e(&self) -> u32 {
        self.d + 1
    }
    /// Digits a word could hold before capping by the packed dimension.
    #[inline]
    pub fn capacity(&self) -> u32 {
        self.capacity
    }
    #[inline]
    pub fn beta(&self) -> u32 {
        self.beta
    }
    /// Largest common dimension whose delayed accumulation stays exact.
    #[inline]
    pub fn kmax(&self) -> u64 {
        self.kmax
    }
    /// `2^(-t d)`, exact in binary64.
    #[inline]
    pub fn inv_qd(&self) -> f64 {
        self.inv_qd
    }
    #[inline]
    pub fn extraction(&self) -> Extraction {
        self.extraction
    }

    pub fn predicted_gain(
        &self,
        algorithm: Algorithm,
        m: u64,
        k: u64,
        n: u64,
        omega: f64,
    ) -> Result<GainEstimate> {
        predicted_gain(self.e(), algorithm, m, k, n, omega)
    }
}

impl fmt::Display for CompressionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "p={} Q=2^{} d={} e={} beta={} kmax={}",
            self.p(),
            self.t,
            self.d,
            self.e(),
            self.beta,
            self.kmax
        )
    }
}

/// Plan for a common dimension `k`: minimal `t`, then as many slots as the
/// word holds, capped at `k`.
pub fn plan_compression(m: PrimeModulus, k: u64, beta: u32) -> Result<CompressionPlan> {
    plan_packing(m, k, k, beta)
}

/// Like [`plan_compression`], but the slot count is capped by `packed_len`,
/// the length of the axis being packed. The right, left and full algorithms
/// pack an outer dimension rather than `k`.
pub fn plan_packing(m: PrimeModulus, k: u64, packed_len: u64, beta: u32) -> Result<CompressionPlan> {
    check_beta(beta)?;
    if k == 0 || packed_len == 0 {
        return Err(Error::InvalidArgument("dimensions must be at least 1".into()));
    }
    let t = min_exponent(m, k);
    let capacity = if t >= beta { 0 } else { capacity_for(t, beta) };
    if capacity < 2 {
        return Err(Error::NoCompression {
            p: m.p() as u64,
            k,
            beta,
            t,
            capacity,
        });
    }
    let e = (capacity as u64).min(packed_len) as u32;
    CompressionPlan::with_degree(m, t, e - 1, beta)
}

/// Plan for additive-offset extraction: the smallest `t` whose shrunken
/// `kmax` still covers `k`.
pub fn plan_compression_additive(m: PrimeModulus, k: u64, beta: u32) -> Result<CompressionPlan> {
    let base = plan_compression(m, k, beta)?;
    let mut t = base.t();
    loop {
        let capacity = capacity_for(t, beta);
        if capacity < 2 {
            return Err(Error::NoCompression {
                p: m.p() as u64,
                k,
                beta,
                t,
                capacity,
            });
        }
        let e = (capacity as u64).min(k) as u32;
        let plan = CompressionPlan::with_degree(m, t, e - 1, beta)?.with_additive_offset();
        if plan.kmax() >= k {
            return Ok(plan);
        }
        t += 1;
    }
}

/// Relative cost of one degree-`d` digit extraction, in packed mul-adds.
const EXTRACTION_COST: u64 = 4;

/// Splits a long common dimension into panels, each reduced separately.
///
/// Every `t` from the smallest usable one up to the single-panel `t` is
/// considered with panel length `min(k, kmax(t))`. Smaller `t` packs more
/// residues per word but pays one extraction per output entry per panel, so
/// the choice minimizes `panels * (words_per_panel + EXTRACTION_COST)`.
/// Ties go to the larger `t`.
pub fn plan_panels(m: PrimeModulus, k: u64, beta: u32) -> Result<(CompressionPlan, u64)> {
    check_beta(beta)?;
    if k == 0 {
        return Err(Error::InvalidArgument("dimensions must be at least 1".into()));
    }
    let t_lo = min_exponent(m, 1);
    let t_hi = min_exponent(m, k);
    let mut best: Option<(u32, u32, u64, u64)> = None;
    for t in t_lo..=t_hi.min(beta - 1) {
        let capacity = capacity_for(t, beta);
        if capacity < 2 {
            break;
        }
        let kpanel = k.min(kmax_for(m, t));
        let e = (capacity as u64).min(kpanel) as u32;
        let cost = k.div_ceil(kpanel) * (kpanel.div_ceil(e as u64) + EXTRACTION_COST);
        if best.is_none_or(|(_, _, _, c)| cost <= c) {
            best = Some((t, e, kpanel, cost));
        }
    }
    let Some((t, e, kpanel, _)) = best else {
        return Err(Error::NoCompression {
            p: m.p() as u64,
            k,
            beta,
            t: t_lo,
            capacity: if t_lo >= beta { 0 } else { capacity_for(t_lo, beta) },
        });
    };
    Ok((CompressionPlan::with_degree(m, t, e - 1, beta)?, kpanel))
}

/// Two-variable packing: `dq+1` digits in base `Q` nested inside `dtheta+1`
/// digits in base `Theta = Q^(dq+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FullPlan {
    modulus: PrimeModulus,
    t: u32,
    beta: u32,
    kmax: u64,
    capacity: u32,
    dq: u32,
    dtheta: u32,
}

impl FullPlan {
    pub fn with_degrees(modulus: PrimeModulus, t: u32, dq: u32, dtheta: u32, beta: u32) -> Result<Self> {
        check_beta(beta)?;
        if t == 0 || t >= 64 {
            return Err(Error::InvalidArgument(format!("t must lie in [1, 63], got {t}")));
        }
        let bits = t as u64 * (dq as u64 + 1) * (dtheta as u64 + 1);
        if bits >= beta as u64 {
            return Err(Error::PlanMismatch(format!(
                "Q^((dq+1)(dtheta+1)) = 2^{bits} does not fit below 2^{beta}"
            )));
        }
        let kmax = kmax_for(modulus, t);
        if kmax == 0 {
            return Err(Error::PlanMismatch(format!(
                "Q = 2^{t} cannot hold a single product (p-1)^2 = {}",
                modulus.pm1sq()
            )));
        }
        Ok(Self {
            modulus,
            t,
            beta,
            kmax,
            capacity: capacity_for(t, beta),
            dq,
            dtheta,
        })
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }
    pub fn p(&self) -> u32 {
        self.modulus.p()
    }
    pub fn t(&self) -> u32 {
        self.t
    }
    pub fn q(&self) -> u64 {
        1u64 << self.t
    }
    pub fn beta(&self) -> u32 {
        self.beta
    }
    pub fn kmax(&self) -> u64 {
        self.kmax
    }
    /// `floor((beta-1)/t)`, the digits a word could hold.
    pub fn capacity(&self) -> u32 {
        self.capacity
    }
    pub fn dq(&self) -> u32 {
        self.dq
    }
    pub fn dtheta(&self) -> u32 {
        self.dtheta
    }
    /// Residues per word along the `Q` axis.
    pub fn q_slots(&self) -> u32 {
        self.dq + 1
    }
    /// Residues per word along the `Theta` axis.
    pub fn theta_slots(&self) -> u32 {
        self.dtheta + 1
    }
    /// `log2(Theta) = t (dq+1)`.
    pub fn theta_exponent(&self) -> u32 {
        self.t * self.q_slots()
    }
    /// Base-`Q` digits in one product word, `(dq+1)(dtheta+1)`.
    pub fn digits(&self) -> u32 {
        self.q_slots() * self.theta_slots()
    }
}

impl fmt::Display for FullPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "p={} Q=2^{} dq={} dtheta={} Theta=2^{} beta={} kmax={}",
            self.p(),
            self.t,
            self.dq,
            self.dtheta,
            self.theta_exponent(),
            self.beta,
            self.kmax
        )
    }
}

pub fn plan_full(m: PrimeModulus, k: u64, beta: u32) -> Result<FullPlan> {
    check_beta(beta)?;
    if k == 0 {
        return Err(Error::InvalidArgument("dimensions must be at least 1".into()));
    }
    let t = min_exponent(m, k);
    let capacity = if t >= beta { 0 } else { capacity_for(t, beta) };
    if capacity < 4 {
        return Err(Error::NoCompression {
            p: m.p() as u64,
            k,
            beta,
            t,
            capacity,
        });
    }
    let q_slots = (capacity as f64).sqrt().floor() as u32;
    // sqrt may be off by one for large capacities; settle it in integers.
    let q_slots = (q_slots.saturating_sub(1)..=q_slots + 1)
        .filter(|s| s * s <= capacity)
        .max()
        .unwrap();
    let theta_slots = capacity / q_slots;
    FullPlan::with_degrees(m, t, q_slots - 1, theta_slots - 1, beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    CommonCompressed,
    RightCompressed,
    LeftCompressed,
    FullCompressed,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::CommonCompressed,
        Algorithm::RightCompressed,
        Algorithm::LeftCompressed,
        Algorithm::FullCompressed,
    ];
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "common" => Ok(Self::CommonCompressed),
            "right" => Ok(Self::RightCompressed),
            "left" => Ok(Self::LeftCompressed),
            "full" => Ok(Self::FullCompressed),
            other => Err(Error::UnsupportedAlgorithm(other.to_string())),
        }
    }
}

/// Modular reduction or conversion primitive counted by [`GainEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    /// One classical scalar reduction.
    Redc,
    /// Simultaneous reduction of all `e` digits of a word.
    Redq(u32),
    /// Packing `e` residues into a word.
    Init(u32),
    /// Unpacking a word into its `e` digits.
    Extract(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpCount {
    pub count: f64,
    pub kind: Primitive,
}

/// Operation, reduction and conversion counts of one algorithm, up to the
/// constant hidden in the arithmetic cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEstimate {
    pub algorithm: Algorithm,
    pub e: u32,
    pub omega: f64,
    pub ops: f64,
    pub uncompressed_ops: f64,
    pub reductions: OpCount,
    pub conversions: OpCount,
}

impl GainEstimate {
    /// Arithmetic speed-up over the same algorithm with one residue per
    /// word, `uncompressed_ops / ops` in closed form.
    pub fn op_ratio(&self) -> f64 {
        let e = self.e as f64;
        match self.algorithm {
            Algorithm::FullCompressed => e.powf((self.omega - 1.0) / 2.0),
            _ => e.powf(self.omega - 2.0),
        }
    }
}

fn op_counts(e: u32, algorithm: Algorithm, m: f64, k: f64, n: f64, omega: f64) -> (f64, OpCount, OpCount) {
    let ef = e as f64;
    match algorithm {
        Algorithm::CommonCompressed => (
            m * n * (k / ef).powf(omega - 2.0),
            OpCount { count: m * n, kind: Primitive::Redc },
            OpCount { count: m * n / ef, kind: Primitive::Init(e) },
        ),
        Algorithm::RightCompressed => (
            m * k * (n / ef).powf(omega - 2.0),
            OpCount { count: m * (n / ef), kind: Primitive::Redq(e) },
            OpCount { count: m * n / ef, kind: Primitive::Extract(e) },
        ),
        Algorithm::LeftCompressed => (
            n * k * (m / ef).powf(omega - 2.0),
            OpCount { count: (m / ef) * n, kind: Primitive::Redq(e) },
            OpCount { count: m * n / ef, kind: Primitive::Extract(e) },
        ),
        Algorithm::FullCompressed => (
            k * (m * n / ef).powf((omega - 1.0) / 2.0),
            OpCount { count: (m / ef.sqrt()) * (n / ef.sqrt()), kind: Primitive::Redq(e) },
            OpCount { count: m * n / ef, kind: Primitive::Init(e) },
        ),
    }
}

/// Evaluates the operation-count model of `algorithm` at compression factor
/// `e` and matrix exponent `omega`.
pub fn predicted_gain(
    e: u32,
    algorithm: Algorithm,
    m: u64,
    k: u64,
    n: u64,
    omega: f64,
) -> Result<GainEstimate> {
    if !(2.0..=3.0).contains(&omega) {
        return Err(Error::InvalidArgument(format!("omega must lie in [2, 3], got {omega}")));
    }
    if e == 0 {
        return Err(Error::InvalidArgument("compression factor must be at least 1".into()));
    }
    let (m, k, n) = (m as f64, k as f64, n as f64);
    let (ops, reductions, conversions) = op_counts(e, algorithm, m, k, n, omega);
    let (uncompressed_ops, _, _) = op_counts(1, algorithm, m, k, n, omega);
    Ok(GainEstimate {
        algorithm,
        e,
        omega,
        ops,
        uncompressed_ops,
        reductions,
        conversions,
    })
}
