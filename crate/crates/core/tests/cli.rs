use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qadic::io::{format_matrix, parse_matrix};
use qadic::{gemm, PrimeModulus, ResidueMatrix};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn qadic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qadic")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, a: &ResidueMatrix, m: PrimeModulus) -> String {
    let path = dir.join(name);
    fs::write(&path, format_matrix(a, m)).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn plan_prints_q_and_e() {
    let o = qadic(&["plan", "--p", "3", "--k", "2047"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("Q=2^13") && out.contains("e=4"), "{out}");

    let o = qadic(&["plan", "--p", "3", "--k", "10000", "--panels"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("kpanel=255"), "{}", stdout(&o));
}

#[test]
fn gemm_writes_the_product() {
    let dir = tempfile::tempdir().unwrap();
    let m = PrimeModulus::new(7).unwrap();
    let mut rng = StdRng::seed_from_u64(1);
    let a = ResidueMatrix::random(9, 13, m, &mut rng);
    let b = ResidueMatrix::random(13, 4, m, &mut rng);
    let pa = write(dir.path(), "a.txt", &a, m);
    let pb = write(dir.path(), "b.txt", &b, m);
    let want = gemm::naive_gemm(&a, &b, m).unwrap();
    for algo in ["naive", "common", "right", "left", "full", "blocked"] {
        for backend in ["float", "int"] {
            let out = dir.path().join(format!("c-{algo}-{backend}.txt"));
            let o = qadic(&[
                "gemm", "--algo", algo, "--a", &pa, "--b", &pb, "--out", out.to_str().unwrap(), "--backend", backend,
            ]);
            assert!(o.status.success(), "{algo}: {}", stderr(&o));
            let (pm, c) = parse_matrix(&fs::read_to_string(&out).unwrap()).unwrap();
            assert_eq!(pm, m);
            assert_eq!(c, want, "{algo} {backend}");
        }
    }
}

#[test]
fn gemm_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let m = PrimeModulus::new(3).unwrap();
    let a = ResidueMatrix::zeros(2, 3);
    let pa = write(dir.path(), "a.txt", &a, m);
    let out = dir.path().join("c.txt");
    let out = out.to_str().unwrap();

    let o = qadic(&["gemm", "--a", &pa, "--b", &pa, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dimension mismatch"), "{}", stderr(&o));

    let o = qadic(&["gemm", "--algo", "strassen", "--a", &pa, "--b", &pa, "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = qadic(&["gemm", "--p", "5", "--a", &pa, "--b", &pa, "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "M 3 1 1\n7\n").unwrap();
    let o = qadic(&["gemm", "--a", bad.to_str().unwrap(), "--b", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!Path::new(out).exists());
}

#[test]
fn verify_passes_and_rejects_composites() {
    let o = qadic(&["verify", "--p", "5", "--max-dim", "16", "--seeds", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().map(|l| l.split_whitespace().collect()).collect();
    for backend in ["float", "int"] {
        for name in ["common", "right", "left", "full", "blocked"] {
            assert!(rows.iter().any(|r| r[..3] == [backend, name, "pass"]), "{out}");
        }
    }
    assert!(!out.contains("FAIL"));

    let o = qadic(&["verify", "--p", "9", "--max-dim", "4", "--seeds", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty());
}

#[test]
fn bench_is_deterministic() {
    let args = ["bench", "--p", "3", "--m", "40", "--k", "70", "--n", "30", "--reps", "2", "--seed", "9"];
    let mut sums = Vec::new();
    for algo in ["naive", "common", "right", "left", "full", "blocked"] {
        let mut a = args.to_vec();
        a.extend(["--algo", algo]);
        let o = qadic(&a);
        assert!(o.status.success(), "{algo}: {}", stderr(&o));
        let out = stdout(&o);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "algorithm,p,m,k,n,t,e,seconds_multiply,seconds_convert,checksum");
        assert_eq!(lines.len(), 3);
        for l in &lines[1..] {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 10);
            assert_eq!(f[0], algo);
            sums.push(f[9].to_string());
        }
    }
    assert!(sums.iter().all(|s| *s == sums[0]), "{sums:?}");
}

#[test]
fn infeasible_plan_exits_3() {
    let o = qadic(&["plan", "--p", "65521", "--k", "1000"]);
    assert_eq!(o.status.code(), Some(3));
    let o = qadic(&["bench", "--p", "3", "--m", "2", "--k", "2", "--n", "2", "--algo", "full", "--slots", "2"]);
    assert_eq!(o.status.code(), Some(2));
}
