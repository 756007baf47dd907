//! Timed runs that separate word arithmetic from conversions.
//!
//! "Multiply" covers only the packed product loop. "Convert" covers
//! packing the operands, extracting or REDQ-reducing the products and
//! unpacking the result.

use std::fmt;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::algo::{choose_plan, Method, MethodPlan};
use crate::error::Result;
use crate::field::PrimeModulus;
use crate::gemm;
use crate::matrix::ResidueMatrix;
use crate::word::Word;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub algorithm: Method,
    pub p: u32,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub t: u32,
    pub e: u32,
    pub seconds_multiply: f64,
    pub seconds_convert: f64,
    pub checksum: u32,
}

impl TimingRecord {
    pub const HEADER: &'static str = "algorithm,p,m,k,n,t,e,seconds_multiply,seconds_convert,checksum";
}

impl fmt::Display for TimingRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{:.9},{:.9},{}",
            self.algorithm,
            self.p,
            self.m,
            self.k,
            self.n,
            self.t,
            self.e,
            self.seconds_multiply,
            self.seconds_convert,
            self.checksum
        )
    }
}

/// The two seeded operands of a benchmark: `A` is drawn first, then `B`.
pub fn seeded_operands(modulus: PrimeModulus, m: usize, k: usize, n: usize, seed: u64) -> (ResidueMatrix, ResidueMatrix) {
    let mut rng = StdRng::seed_from_u64(seed);
    let a = ResidueMatrix::random(m, k, modulus, &mut rng);
    let b = ResidueMatrix::random(k, n, modulus, &mut rng);
    (a, b)
}

#[derive(Debug, Default, Clone, Copy)]
struct Phases {
    multiply: Duration,
    convert: Duration,
}

impl Phases {
    fn convert<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.convert += t0.elapsed();
        out
    }

    fn multiply<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.multiply += t0.elapsed();
        out
    }
}

fn timed_common<W: Word>(
    a: &ResidueMatrix,
    b: &ResidueMatrix,
    plan: &crate::plan::CompressionPlan,
    ph: &mut Phases,
) -> Result<ResidueMatrix> {
    let (ca, cb) = ph.convert(|| -> Result<_> {
        Ok((
            gemm::compress_rows_reversed::<W>(a, plan)?,
            gemm::compress_cols_forward::<W>(b, plan)?,
        ))
    })?;
    let acc = ph.multiply(|| gemm::common_products(&ca, &cb))?;
    Ok(ph.convert(|| gemm::extract_common(&acc, plan)))
}

fn timed_run<W: Word>(
    method: Method,
    plan: &MethodPlan,
    a: &ResidueMatrix,
    b: &ResidueMatrix,
    modulus: PrimeModulus,
) -> Result<(ResidueMatrix, Phases)> {
    let mut ph = Phases::default();
    let c = match (method, plan) {
        (Method::Common, MethodPlan::Single(p)) => timed_common::<W>(a, b, p, &mut ph)?,
        (Method::Right, MethodPlan::Single(p)) => {
            let cb = ph.convert(|| gemm::compress_rows_forward::<W>(b, p))?;
            let mut cc = ph.multiply(|| gemm::right_products(a, &cb))?;
            ph.convert(|| {
                gemm::redq_matrix(&mut cc);
                cc.unpack()
            })?
        }
        (Method::Left, MethodPlan::Single(p)) => {
            let ca = ph.convert(|| gemm::compress_cols_forward::<W>(a, p))?;
            let mut cc = ph.multiply(|| gemm::left_products(&ca, b))?;
            ph.convert(|| {
                gemm::redq_matrix(&mut cc);
                cc.unpack()
            })?
        }
        (Method::Full, MethodPlan::Full(p)) => {
            let ops = ph.convert(|| gemm::FullOperands::<W>::pack(a, b, p))?;
            let words = ph.multiply(|| ops.multiply());
            ph.convert(|| words.reduce_unpack())
        }
        (Method::Blocked, MethodPlan::Blocked { plan, kpanel }) => {
            let k = a.cols();
            let p = modulus.p();
            let mut c = ResidueMatrix::zeros(a.rows(), b.cols());
            for lo in (0..k).step_by(*kpanel) {
                let hi = (lo + kpanel).min(k);
                let (pa, pb) = ph.convert(|| {
                    let pa = ResidueMatrix::from_raw(
                        a.rows(),
                        hi - lo,
                        (0..a.rows()).flat_map(|r| a.row(r)[lo..hi].iter().copied()).collect(),
                    );
                    let pb = ResidueMatrix::from_raw(hi - lo, b.cols(), b.data()[lo * b.cols()..hi * b.cols()].to_vec());
                    (pa, pb)
                });
                let part = timed_common::<W>(&pa, &pb, plan, &mut ph)?;
                ph.convert(|| {
                    for i in 0..c.rows() {
                        for j in 0..c.cols() {
                            let s = c.get(i, j) + part.get(i, j);
                            c.set(i, j, if s >= p { s - p } else { s });
                        }
                    }
                });
            }
            c
        }
        _ => ph.multiply(|| crate::algo::run::<W>(method, plan, a, b, modulus))?,
    };
    Ok((c, ph))
}

/// Runs `method` `reps` times on seeded operands. `plan` overrides the
/// default choice, e.g. to time the same kernel with one residue per word.
#[allow(clippy::too_many_arguments)]
pub fn run_bench<W: Word>(
    method: Method,
    modulus: PrimeModulus,
    (m, k, n): (usize, usize, usize),
    reps: usize,
    seed: u64,
    beta: u32,
    plan: Option<MethodPlan>,
) -> Result<Vec<TimingRecord>> {
    let plan = match plan {
        Some(p) => p,
        None => choose_plan(method, modulus, m, k, n, beta)?,
    };
    let (a, b) = seeded_operands(modulus, m, k, n, seed);
    let mut out = Vec::with_capacity(reps);
    for _ in 0..reps {
        let (c, ph) = timed_run::<W>(method, &plan, &a, &b, modulus)?;
        out.push(TimingRecord {
            algorithm: method,
            p: modulus.p(),
            m,
            k,
            n,
            t: plan.t(),
            e: plan.e(),
            seconds_multiply: ph.multiply.as_secs_f64(),
            seconds_convert: ph.convert.as_secs_f64(),
            checksum: c.checksum(),
        });
    }
    Ok(out)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_checksums() {
        let m3 = PrimeModulus::new(3).unwrap();
        let naive = run_bench::<f64>(Method::Naive, m3, (20, 30, 10), 1, 5, 53, None).unwrap();
        for method in Method::COMPRESSED {
            let recs = run_bench::<f64>(method, m3, (20, 30, 10), 3, 5, 53, None).unwrap();
            assert_eq!(recs.len(), 3);
            for r in &recs {
                assert_eq!(r.checksum, naive[0].checksum, "{method}");
                assert!(r.seconds_multiply >= 0.0 && r.seconds_convert >= 0.0);
            }
        }
        let line = naive[0].to_string();
        assert_eq!(line.split(',').count(), TimingRecord::HEADER.split(',').count());
        assert!(line.starts_with("naive,3,20,30,10,0,1,"));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
