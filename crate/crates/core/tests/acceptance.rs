//! Acceptance checks, one line per criterion. Exits non-zero if any fails.
//!
//! Run alone with `cargo test -p qadic-core --test acceptance`.

use std::process::ExitCode;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use qadic::algo::{self, choose_plan, Method, MethodPlan};
use qadic::bench::{median, run_bench};
use qadic::gemm::{self, FullOperands};
use qadic::pack::{compress_forward, compress_reverse, extract_all, extract_coefficient, packed_dot, redq, ProductAccumulator};
use qadic::plan::{plan_compression, plan_full, predicted_gain, Algorithm, CompressionPlan, Primitive};
use qadic::{PackedWord, PrimeModulus, ResidueMatrix, Word};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn modulus(p: u64) -> PrimeModulus {
    PrimeModulus::new(p).unwrap()
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

const P3_COLUMNS: [(u64, u32, u32); 7] = [
    (7, 5, 7),
    (15, 6, 8),
    (31, 7, 7),
    (63, 8, 6),
    (255, 10, 5),
    (2047, 13, 4),
    (32767, 17, 3),
];

fn p3_plans() -> Vec<CompressionPlan> {
    P3_COLUMNS
        .iter()
        .map(|&(k, _, _)| plan_compression(modulus(3), k, 53).unwrap())
        .collect()
}

fn oracle_backend<W: Word>(p: u64, seed: u64) -> Outcome {
    let m = modulus(p);
    let mut rng = StdRng::seed_from_u64(seed);
    let dims = (rng.gen_range(1..=64), rng.gen_range(1..=64), rng.gen_range(1..=64));
    let a = ResidueMatrix::random(dims.0, dims.1, m, &mut rng);
    let b = ResidueMatrix::random(dims.1, dims.2, m, &mut rng);
    let want = gemm::naive_gemm(&a, &b, m).unwrap();
    for method in Method::COMPRESSED {
        let mut plan = choose_plan(method, m, dims.0, dims.1, dims.2, 53).map_err(|e| format!("{method}: {e}"))?;
        // Make blocking actually split the common dimension.
        if let MethodPlan::Blocked { .. } = plan {
            if dims.1 >= 2 {
                let kpanel = dims.1.div_ceil(2);
                plan = MethodPlan::Blocked { plan: plan_compression(m, kpanel as u64, 53).unwrap(), kpanel };
            }
        }
        let got = algo::run::<W>(method, &plan, &a, &b, m).map_err(|e| format!("{method}: {e}"))?;
        ensure!(got == want, "p={p} seed={seed} dims={dims:?} {} {method} differs from naive", W::NAME);
    }
    Ok(String::new())
}

fn criterion_1() -> Outcome {
    let mut cases = 0;
    for p in [2, 3, 5, 7, 11] {
        for seed in 0..200 {
            oracle_backend::<f64>(p, seed)?;
            oracle_backend::<u64>(p, seed)?;
            cases += 1;
        }
    }
    Ok(format!("{cases} shapes x 5 methods x 2 backends"))
}

fn criterion_2() -> Outcome {
    for &(k, t, e) in &P3_COLUMNS {
        let plan = plan_compression(modulus(3), k, 53).map_err(|e| e.to_string())?;
        ensure!(
            (plan.t(), plan.e()) == (t, e),
            "k={k}: got (t, e) = ({}, {}), want ({t}, {e})",
            plan.t(),
            plan.e()
        );
    }
    Ok("7 columns".into())
}

fn random_dot<W: Word>(plan: &CompressionPlan, rng: &mut StdRng) -> Outcome {
    let p = plan.p();
    let len = rng.gen_range(0..=plan.e() as usize);
    let a: Vec<u32> = (0..len).map(|_| rng.gen_range(0..p)).collect();
    let b: Vec<u32> = (0..len).map(|_| rng.gen_range(0..p)).collect();
    let want = a.iter().zip(&b).map(|(&x, &y)| x as u64 * y as u64).sum::<u64>() % p as u64;
    let got = packed_dot::<W>(&a, &b, plan).unwrap().value() as u64;
    ensure!(got == want, "{} {plan}: a={a:?} b={b:?} got {got} want {want}", W::NAME);
    Ok(String::new())
}

fn criterion_3() -> Outcome {
    let plan = CompressionPlan::with_degree(modulus(3), 5, 1, 53).unwrap();
    let mut exhaustive = 0;
    for code in 0..81u32 {
        let a = [code % 3, code / 3 % 3];
        let b = [code / 9 % 3, code / 27];
        let w = compress_reverse::<f64>(&a, &plan).unwrap().value() * compress_forward::<f64>(&b, &plan).unwrap().value();
        let got = extract_coefficient(PackedWord::new(w), &plan).value();
        ensure!(got == (a[0] * b[0] + a[1] * b[1]) % 3, "a={a:?} b={b:?}: got {got}");
        exhaustive += 1;
    }
    let mut rng = StdRng::seed_from_u64(3);
    let plans = p3_plans();
    for plan in &plans {
        for _ in 0..10_000 {
            random_dot::<f64>(plan, &mut rng)?;
            random_dot::<u64>(plan, &mut rng)?;
        }
    }
    Ok(format!("{exhaustive} exhaustive, 10^4 random per plan on {} plans", plans.len()))
}

fn all_two_digit<W: Word>(plan: &CompressionPlan, k: usize) -> u32 {
    let twos = vec![2u32; k];
    let e = plan.e() as usize;
    let mut acc = ProductAccumulator::<W>::new();
    for g in twos.chunks(e) {
        acc.add_product(compress_reverse(g, plan).unwrap(), compress_forward(g, plan).unwrap());
    }
    acc.coefficient(plan).value()
}

fn criterion_4() -> Outcome {
    let k = 32767usize;
    let plan = plan_compression(modulus(3), k as u64, 53).unwrap();
    ensure!((plan.t(), plan.e()) == (17, 3), "unexpected plan {plan}");
    let (t, e) = (plan.t(), plan.e() as usize);
    // Exact accumulated value in 128-bit integers.
    let word = |g: &[u32], rev: bool| -> u128 {
        let mut v = g.to_vec();
        if rev {
            v.reverse();
            let mut padded = vec![0u32; e - g.len()];
            padded.extend(v);
            v = padded;
        }
        v.iter().rev().fold(0u128, |acc, &x| (acc << t) | x as u128)
    };
    let twos = vec![2u32; k];
    let total: u128 = twos.chunks(e).map(|g| word(g, true) * word(g, false)).sum();
    let high = total >> (t * plan.d());
    ensure!(high < 1u128 << 53, "floor(w / Q^d) = {high} reaches 2^53");
    let want = (4 * k as u64 % 3) as u32;
    ensure!(want == 1, "scalar formula gives {want}");
    let digit = (high & (plan.q() as u128 - 1)) as u64;
    ensure!(digit % 3 == 1, "exact digit {digit} is not 1 mod 3");
    ensure!(all_two_digit::<f64>(&plan, k) == want, "float accumulator disagrees");
    ensure!(all_two_digit::<u64>(&plan, k) == want, "int accumulator disagrees");
    let a = ResidueMatrix::new(1, k, twos.clone(), modulus(3)).unwrap();
    let b = ResidueMatrix::new(k, 1, twos, modulus(3)).unwrap();
    let c = gemm::mul_common_compressed::<f64>(&a, &b, &plan).unwrap();
    ensure!(c.get(0, 0) == want, "matrix product gives {}", c.get(0, 0));
    Ok(format!("floor(w / Q^d) = 2^{:.2} < 2^53, digit = 1", (high as f64).log2()))
}

fn criterion_5() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let plans = p3_plans();
    for plan in &plans {
        let e = plan.e() as usize;
        for _ in 0..10_000 {
            let digits: Vec<u64> = (0..e).map(|_| rng.gen_range(0..plan.q())).collect();
            let w = digits.iter().rev().fold(0u64, |acc, &c| (acc << plan.t()) | c);
            let want: Vec<u64> = extract_all(PackedWord::<u64>::from_u64(w), plan)
                .unwrap()
                .iter()
                .map(|c| c % plan.p() as u64)
                .collect();
            for r in [
                redq(PackedWord::<u64>::from_u64(w), plan).unwrap().to_u64(),
                redq(PackedWord::<f64>::from_u64(w), plan).unwrap().to_u64(),
            ] {
                let r = PackedWord::<u64>::from_u64(r);
                ensure!(extract_all(r, plan).unwrap() == want, "{plan}: redq({w}) digits differ");
                ensure!(redq(r, plan).unwrap() == r, "{plan}: redq not idempotent on {w}");
            }
        }
    }
    Ok(format!("10^4 words per plan on {} plans", plans.len()))
}

fn criterion_6() -> Outcome {
    let primes = (2u64..=257).filter(|&p| PrimeModulus::new(p).is_ok());
    let mut plans = 0;
    for p in primes {
        for k in (0..24).map(|i| 1u64 << i).chain([3, 7, 100, 1000, 250, 10_000]) {
            for beta in [24, 32, 53, 63] {
                let Ok(fp) = plan_full(modulus(p), k, beta) else { continue };
                let word_bound = (1u128 << fp.t()).checked_pow(fp.digits());
                ensure!(
                    word_bound.is_some_and(|w| w < 1u128 << beta),
                    "p={p} k={k} beta={beta}: Q^digits does not fit, {fp}"
                );
                plans += 1;
            }
        }
    }
    // Largest possible entries at the largest legal k for each prime.
    let mut rng = StdRng::seed_from_u64(6);
    let mut words = 0;
    for p in [2u64, 3, 5, 7, 11, 13] {
        let m = modulus(p);
        let fp = plan_full(m, 40, 53).unwrap();
        let k = fp.kmax().min(4096) as usize;
        let dims = (rng.gen_range(1..=12), rng.gen_range(1..=12));
        let fill = |r, c| ResidueMatrix::new(r, c, vec![p as u32 - 1; r * c], m).unwrap();
        let cases = [
            (fill(dims.0, k), fill(k, dims.1)),
            (ResidueMatrix::random(dims.0, k, m, &mut rng), ResidueMatrix::random(k, dims.1, m, &mut rng)),
        ];
        for (a, b) in cases {
            let out = FullOperands::<f64>::pack(&a, &b, &fp).unwrap().multiply();
            for w in &out.words {
                ensure!(w.to_u64() < 1u64 << 53, "p={p} k={k}: word {} reaches 2^53", w.to_u64());
            }
            words += out.words.len();
            ensure!(out.reduce_unpack() == gemm::naive_gemm(&a, &b, m).unwrap(), "p={p} k={k}: wrong product");
        }
    }
    Ok(format!("{plans} plans checked, {words} product words below 2^53"))
}

fn criterion_7() -> Outcome {
    let m = modulus(3);
    let dims = (1024, 1024, 1024);
    let reps = 5;
    let plan = plan_compression(m, 1024, 53).unwrap();
    ensure!(plan.e() >= 3, "plan {plan} packs fewer than 3 residues");
    let baseline = CompressionPlan::with_degree(m, plan.t(), 0, 53).unwrap();
    let packed = run_bench::<f64>(Method::Common, m, dims, reps, 0, 53, Some(MethodPlan::Single(plan))).unwrap();
    let single = run_bench::<f64>(Method::Common, m, dims, reps, 0, 53, Some(MethodPlan::Single(baseline))).unwrap();
    ensure!(packed[0].checksum == single[0].checksum, "checksums differ");
    let mut mul: Vec<f64> = packed.iter().map(|r| r.seconds_multiply).collect();
    let mut conv: Vec<f64> = packed.iter().map(|r| r.seconds_convert).collect();
    let mut base: Vec<f64> = single.iter().map(|r| r.seconds_multiply).collect();
    let (mul, conv, base) = (median(&mut mul), median(&mut conv), median(&mut base));
    let speed = mul / base;
    let share = conv / mul;
    let detail = format!(
        "e={}: multiply {mul:.3}s vs {base:.3}s at e=1 (ratio {speed:.3} <= 0.75), convert share {share:.3} <= 0.10",
        plan.e()
    );
    ensure!(speed <= 0.75 && share <= 0.10, "{detail}");
    Ok(detail)
}

fn criterion_8() -> Outcome {
    let mut rows = 0;
    for e in 1..=8u32 {
        for (m, k, n) in [(120u64, 240u64, 360u64), (1000, 1000, 1000), (64, 4096, 16)] {
            let ef = e as f64;
            let (mf, nf) = (m as f64, n as f64);
            for alg in Algorithm::ALL {
                let g = predicted_gain(e, alg, m, k, n, 3.0).map_err(|e| e.to_string())?;
                ensure!(g.op_ratio() == ef, "{alg:?} e={e}: ratio {}", g.op_ratio());
                let counted = g.uncompressed_ops / g.ops;
                ensure!((counted - ef).abs() <= 1e-12 * ef, "{alg:?} e={e}: counted ratio {counted}");
                let (red, conv) = match alg {
                    Algorithm::CommonCompressed => ((mf * nf, Primitive::Redc), (mf * nf / ef, Primitive::Init(e))),
                    Algorithm::RightCompressed => ((mf * (nf / ef), Primitive::Redq(e)), (mf * nf / ef, Primitive::Extract(e))),
                    Algorithm::LeftCompressed => (((mf / ef) * nf, Primitive::Redq(e)), (mf * nf / ef, Primitive::Extract(e))),
                    Algorithm::FullCompressed => (
                        ((mf / ef.sqrt()) * (nf / ef.sqrt()), Primitive::Redq(e)),
                        (mf * nf / ef, Primitive::Init(e)),
                    ),
                };
                ensure!(
                    (g.reductions.count, g.reductions.kind) == red,
                    "{alg:?} e={e}: reductions {:?}",
                    g.reductions
                );
                ensure!(
                    (g.conversions.count, g.conversions.kind) == conv,
                    "{alg:?} e={e}: conversions {:?}",
                    g.conversions
                );
                rows += 1;
            }
        }
    }
    Ok(format!("{rows} rows"))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("oracle equivalence", criterion_1),
        ("compression factor by k", criterion_2),
        ("dot-product packing identity", criterion_3),
        ("bound-edge safety", criterion_4),
        ("simultaneous reduction", criterion_5),
        ("full compression fits the word", criterion_6),
        ("timing ratios", criterion_7),
        ("operation-count formulas", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
