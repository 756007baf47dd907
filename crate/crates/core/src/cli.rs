use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::algo::{self, choose_plan, Method, MethodPlan};
use crate::bench::{run_bench, TimingRecord};
use crate::error::{Error, Result};
use crate::field::PrimeModulus;
use crate::gemm::naive_gemm;
use crate::io::{read_matrix, write_matrix};
use crate::matrix::ResidueMatrix;
use crate::plan::{self, Algorithm, CompressionPlan, DEFAULT_BETA};
use crate::word::Word;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qadic", version, about = "Compressed matrix multiplication over small prime fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Show Q, degree and compression factor for a prime and common dimension.
    Plan(PlanArgs),
    /// Multiply two matrix files.
    Gemm(GemmArgs),
    /// Check every compressed method against the naive product on random inputs.
    Verify(VerifyArgs),
    /// Time one method on seeded random matrices and print CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    /// binary64 words, 53 exact bits
    Float,
    /// 64-bit integer words, 63 exact bits
    Int,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub k: u64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub bits: u32,
    /// Two-variable (Q, Theta) packing.
    #[arg(long)]
    pub full: bool,
    /// Split k into panels when that packs more residues per word.
    #[arg(long, conflicts_with = "full")]
    pub panels: bool,
    /// Plan for additive-offset extraction.
    #[arg(long, conflicts_with_all = ["full", "panels"])]
    pub additive: bool,
    /// Also print predicted operation counts for k x k x k at this exponent.
    #[arg(long)]
    pub omega: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GemmArgs {
    #[arg(long, default_value = "common")]
    pub algo: String,
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Expected modulus; must match the file headers when given.
    #[arg(long)]
    pub p: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub bits: u32,
    #[arg(long, value_enum, default_value_t = Backend::Float)]
    pub backend: Backend,
    /// Panel length for `--algo blocked` (default: chosen by the planner).
    #[arg(long)]
    pub kpanel: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub p: u64,
    #[arg(long, default_value_t = 32)]
    pub max_dim: usize,
    #[arg(long, default_value_t = 100)]
    pub seeds: u64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub bits: u32,
    /// Restrict to one backend (default: both).
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "common")]
    pub algo: String,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub bits: u32,
    #[arg(long, value_enum, default_value_t = Backend::Float)]
    pub backend: Backend,
    /// Force this many residues per word, keeping the planned Q.
    #[arg(long)]
    pub slots: Option<u32>,
    /// Use additive-offset extraction (common only).
    #[arg(long)]
    pub additive: bool,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoCompression { .. } | Error::PlanMismatch(_) => EXIT_INFEASIBLE,
        _ => EXIT_USAGE,
    }
}

/// Runs a parsed command, writing results to `out` and diagnostics to
/// `err`. Returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(&a, out),
        Command::Gemm(a) => cmd_gemm(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if matches!(e, Error::NoCompression { .. }) {
                let _ = writeln!(err, "hint: a shorter common dimension (e.g. --algo blocked) may still compress");
            }
            exit_code(&e)
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Parse(format!("write failed: {e}"))
}

fn print_plan(plan: &CompressionPlan, out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "Q=2^{} t={} d={} e={} capacity={} kmax={}",
        plan.t(),
        plan.t(),
        plan.d(),
        plan.e(),
        plan.capacity(),
        plan.kmax()
    )
    .map_err(io_err)
}

pub fn cmd_plan(args: &PlanArgs, out: &mut dyn Write) -> Result<i32> {
    let m = PrimeModulus::new(args.p)?;
    writeln!(out, "p={} k={} beta={}", m.p(), args.k, args.bits).map_err(io_err)?;
    let e = if args.full {
        let fp = plan::plan_full(m, args.k, args.bits)?;
        writeln!(
            out,
            "Q=2^{} t={} dq={} dtheta={} dq+1={} dtheta+1={} Theta=2^{} capacity={} kmax={}",
            fp.t(),
            fp.t(),
            fp.dq(),
            fp.dtheta(),
            fp.q_slots(),
            fp.theta_slots(),
            fp.theta_exponent(),
            fp.capacity(),
            fp.kmax()
        )
        .map_err(io_err)?;
        fp.digits()
    } else if args.panels {
        let (plan, kpanel) = plan::plan_panels(m, args.k, args.bits)?;
        print_plan(&plan, out)?;
        writeln!(out, "kpanel={kpanel} panels={}", args.k.div_ceil(kpanel)).map_err(io_err)?;
        plan.e()
    } else if args.additive {
        let plan = plan::plan_compression_additive(m, args.k, args.bits)?;
        print_plan(&plan, out)?;
        writeln!(out, "extraction=additive-offset").map_err(io_err)?;
        plan.e()
    } else {
        let plan = plan::plan_compression(m, args.k, args.bits)?;
        print_plan(&plan, out)?;
        plan.e()
    };
    if let Some(omega) = args.omega {
        // Full compression packs (dq+1)(dtheta+1) residues, the others e.
        let (e_single, e_full) = if args.full {
            (plan::plan_compression(m, args.k, args.bits).ok().map(|p| p.e()), Some(e))
        } else {
            (Some(e), plan::plan_full(m, args.k, args.bits).ok().map(|f| f.digits()))
        };
        writeln!(out, "algorithm,e,ops,op_ratio,reductions,reduction_kind,conversions,conversion_kind").map_err(io_err)?;
        for alg in Algorithm::ALL {
            let e = match alg {
                Algorithm::FullCompressed => e_full,
                _ => e_single,
            };
            let Some(e) = e else { continue };
            let g = plan::predicted_gain(e, alg, args.k, args.k, args.k, omega)?;
            writeln!(
                out,
                "{:?},{e},{:.6e},{:.4},{:.6e},{:?},{:.6e},{:?}",
                alg,
                g.ops,
                g.op_ratio(),
                g.reductions.count,
                g.reductions.kind,
                g.conversions.count,
                g.conversions.kind
            )
            .map_err(io_err)?;
        }
    }
    Ok(EXIT_OK)
}

fn gemm_with<W: Word>(
    method: Method,
    a: &ResidueMatrix,
    b: &ResidueMatrix,
    m: PrimeModulus,
    args: &GemmArgs,
) -> Result<(ResidueMatrix, MethodPlan)> {
    let mut plan = choose_plan(method, m, a.rows(), a.cols(), b.cols(), args.bits)?;
    if let (Some(kpanel), MethodPlan::Blocked { .. }) = (args.kpanel, &plan) {
        let p = plan::plan_compression(m, kpanel as u64, args.bits)?;
        plan = MethodPlan::Blocked { plan: p, kpanel };
    }
    let c = algo::run::<W>(method, &plan, a, b, m)?;
    Ok((c, plan))
}

pub fn cmd_gemm(args: &GemmArgs, out: &mut dyn Write) -> Result<i32> {
    let method: Method = args.algo.parse()?;
    let (pa, a) = read_matrix(&args.a)?;
    let (pb, b) = read_matrix(&args.b)?;
    if pa != pb {
        return Err(Error::Parse(format!("operands use different moduli {pa} and {pb}")));
    }
    if let Some(p) = args.p {
        if p != pa.p() as u64 {
            return Err(Error::Parse(format!("--p {p} does not match file modulus {pa}")));
        }
    }
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch {
            left: format!("A is {}x{}", a.rows(), a.cols()),
            right: format!("B is {}x{}", b.rows(), b.cols()),
        });
    }
    let (c, plan) = match args.backend {
        Backend::Float => gemm_with::<f64>(method, &a, &b, pa, args)?,
        Backend::Int => gemm_with::<u64>(method, &a, &b, pa, args)?,
    };
    write_matrix(&args.out, &c, pa)?;
    writeln!(
        out,
        "{method}: {}x{} * {}x{} mod {} [{plan}] -> {}",
        a.rows(),
        a.cols(),
        b.rows(),
        b.cols(),
        pa,
        args.out.display()
    )
    .map_err(io_err)?;
    Ok(EXIT_OK)
}

/// Plan used by the verifier: the default one, except that blocking is
/// forced to use at least two panels whenever `k >= 2`.
fn verify_plan(method: Method, m: PrimeModulus, dims: (usize, usize, usize), beta: u32) -> Result<MethodPlan> {
    let plan = choose_plan(method, m, dims.0, dims.1, dims.2, beta)?;
    match plan {
        MethodPlan::Blocked { kpanel, .. } if kpanel >= dims.1 && dims.1 >= 2 => {
            let kpanel = dims.1.div_ceil(2);
            Ok(MethodPlan::Blocked {
                plan: plan::plan_compression(m, kpanel as u64, beta)?,
                kpanel,
            })
        }
        other => Ok(other),
    }
}

#[derive(Debug, Default)]
struct Tally {
    passed: usize,
    skipped: usize,
    failure: Option<String>,
}

fn verify_backend<W: Word>(args: &VerifyArgs, m: PrimeModulus, out: &mut dyn Write) -> Result<bool> {
    let mut tallies: Vec<(Method, Tally)> = Method::COMPRESSED.iter().map(|&x| (x, Tally::default())).collect();
    for seed in 0..args.seeds {
        let mut rng = StdRng::seed_from_u64(seed);
        let dims = (
            rng.gen_range(1..=args.max_dim),
            rng.gen_range(1..=args.max_dim),
            rng.gen_range(1..=args.max_dim),
        );
        let a = ResidueMatrix::random(dims.0, dims.1, m, &mut rng);
        let b = ResidueMatrix::random(dims.1, dims.2, m, &mut rng);
        let want = naive_gemm(&a, &b, m)?;
        for (method, tally) in tallies.iter_mut() {
            if tally.failure.is_some() {
                continue;
            }
            let plan = match verify_plan(*method, m, dims, args.bits) {
                Ok(p) => p,
                Err(Error::NoCompression { .. }) => {
                    tally.skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let got = match algo::run::<W>(*method, &plan, &a, &b, m) {
                Ok(c) => c,
                Err(e) => {
                    tally.failure = Some(format!("seed={seed} dims={dims:?}: {e}"));
                    continue;
                }
            };
            if got != want {
                let (i, j) = (0..want.rows())
                    .flat_map(|i| (0..want.cols()).map(move |j| (i, j)))
                    .find(|&(i, j)| got.get(i, j) != want.get(i, j))
                    .unwrap();
                tally.failure = Some(format!(
                    "seed={seed} dims={dims:?} at ({i}, {j}): got {} want {}",
                    got.get(i, j),
                    want.get(i, j)
                ));
            } else {
                tally.passed += 1;
            }
        }
    }
    let mut ok = true;
    for (method, tally) in &tallies {
        match &tally.failure {
            None => writeln!(
                out,
                "{:<5} {:<8} pass ({} cases, {} skipped: no compression)",
                W::NAME,
                method.name(),
                tally.passed,
                tally.skipped
            ),
            Some(msg) => {
                ok = false;
                writeln!(out, "{:<5} {:<8} FAIL {msg}", W::NAME, method.name())
            }
        }
        .map_err(io_err)?;
    }
    Ok(ok)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let m = PrimeModulus::new(args.p)?;
    if args.max_dim == 0 {
        return Err(Error::InvalidArgument("--max-dim must be at least 1".into()));
    }
    let mut ok = true;
    if args.backend != Some(Backend::Int) && args.bits <= f64::MAX_BETA {
        ok &= verify_backend::<f64>(args, m, out)?;
    }
    if args.backend != Some(Backend::Float) {
        ok &= verify_backend::<u64>(args, m, out)?;
    }
    Ok(if ok { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn bench_plan(args: &BenchArgs, method: Method, m: PrimeModulus) -> Result<MethodPlan> {
    let mut plan = if args.additive {
        if method != Method::Common {
            return Err(Error::InvalidArgument("--additive applies to --algo common only".into()));
        }
        MethodPlan::Single(plan::plan_compression_additive(m, args.k as u64, args.bits)?)
    } else {
        choose_plan(method, m, args.m, args.k, args.n, args.bits)?
    };
    if let Some(slots) = args.slots {
        if slots == 0 {
            return Err(Error::InvalidArgument("--slots must be at least 1".into()));
        }
        let rebuild = |p: &CompressionPlan| -> Result<CompressionPlan> {
            let q = CompressionPlan::with_degree(m, p.t(), slots - 1, args.bits)?;
            Ok(if args.additive { q.with_additive_offset() } else { q })
        };
        plan = match plan {
            MethodPlan::Naive => MethodPlan::Naive,
            MethodPlan::Single(p) => MethodPlan::Single(rebuild(&p)?),
            MethodPlan::Blocked { plan, kpanel } => MethodPlan::Blocked { plan: rebuild(&plan)?, kpanel },
            MethodPlan::Full(_) => {
                return Err(Error::InvalidArgument("--slots does not apply to --algo full".into()));
            }
        };
    }
    Ok(plan)
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let method: Method = args.algo.parse()?;
    let m = PrimeModulus::new(args.p)?;
    if args.m == 0 || args.k == 0 || args.n == 0 {
        return Err(Error::InvalidArgument("dimensions must be at least 1".into()));
    }
    let plan = bench_plan(args, method, m)?;
    let dims = (args.m, args.k, args.n);
    let records = match args.backend {
        Backend::Float => run_bench::<f64>(method, m, dims, args.reps, args.seed, args.bits, Some(plan))?,
        Backend::Int => run_bench::<u64>(method, m, dims, args.reps, args.seed, args.bits, Some(plan))?,
    };
    writeln!(out, "{}", TimingRecord::HEADER).map_err(io_err)?;
    for r in &records {
        writeln!(out, "{r}").map_err(io_err)?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let cli = Cli::try_parse_from(std::iter::once("qadic").chain(args.iter().copied())).unwrap();
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(cli, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn plan_reports_q_and_e() {
        let (code, out, _) = run_args(&["plan", "--p", "3", "--k", "200", "--bits", "53"]);
        assert_eq!(code, 0);
        assert!(out.contains("Q=2^10"), "{out}");
        assert!(out.contains("e=5"), "{out}");

        let (code, out, _) = run_args(&["plan", "--p", "3", "--k", "200", "--full"]);
        assert_eq!(code, 0);
        assert!(out.contains("dq+1=2") && out.contains("dtheta+1=2"), "{out}");

        let (code, _, err) = run_args(&["plan", "--p", "100003", "--k", "10"]);
        assert_eq!(code, EXIT_INFEASIBLE);
        assert!(err.contains("no compression"), "{err}");

        let (code, _, _) = run_args(&["plan", "--p", "4", "--k", "10"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn plan_prints_gain_rows() {
        let (code, out, _) = run_args(&["plan", "--p", "3", "--k", "255", "--omega", "3"]);
        assert_eq!(code, 0);
        assert!(out.lines().any(|l| l.starts_with("FullCompressed,4,") && l.contains(",4.0000,")), "{out}");
    }

    #[test]
    fn verify_small_primes() {
        let (code, out, _) = run_args(&["verify", "--p", "2", "--max-dim", "8", "--seeds", "10"]);
        assert_eq!(code, 0, "{out}");
        assert_eq!(out.lines().filter(|l| l.contains(" pass ")).count(), 10);
        let (code, _, _) = run_args(&["verify", "--p", "4", "--max-dim", "8", "--seeds", "1"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn bench_rows() {
        let (code, out, _) = run_args(&[
            "bench", "--p", "3", "--m", "16", "--k", "16", "--n", "16", "--algo", "common", "--reps", "3",
        ]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], TimingRecord::HEADER);
        assert_eq!(lines.len(), 4);

        let (code, out, _) = run_args(&[
            "bench", "--p", "3", "--m", "16", "--k", "16", "--n", "16", "--algo", "common", "--slots", "1",
        ]);
        assert_eq!(code, 0);
        assert!(out.lines().nth(1).unwrap().starts_with("common,3,16,16,16,7,1,"), "{out}");

        let (code, _, err) = run_args(&[
            "bench", "--p", "101", "--m", "4", "--k", "10000", "--n", "4", "--algo", "common",
        ]);
        assert_eq!(code, EXIT_INFEASIBLE);
        assert!(err.contains("blocked"), "{err}");
    }
}
