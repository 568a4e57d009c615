//! End-to-end checks on the compiled binary: exit codes, output schemas,
//! and cross-invocation determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tilefact"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn mtx_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/mtx")
}

#[test]
fn factor_check_passes() {
    for kind in ["chol", "qr", "lu"] {
        let out = run(&[
            "factor", "--kind", kind, "--n", "128", "--b", "32", "--s", "16", "--threads", "2",
            "--check",
        ]);
        assert!(out.status.success(), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        let text = stdout(&out);
        assert!(text.contains("check: ok"), "{kind}: {text}");
        assert!(text.contains("output-hash:"));
    }
}

#[test]
fn divisibility_error_exits_2() {
    let out = run(&["factor", "--kind", "chol", "--n", "512", "--b", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divide"));
}

#[test]
fn output_hash_is_thread_independent() {
    let hash_of = |threads: &str| {
        let out = run(&[
            "factor", "--kind", "qr", "--n", "256", "--b", "64", "--s", "16", "--threads",
            threads, "--check",
        ]);
        assert!(out.status.success());
        stdout(&out)
            .lines()
            .find(|l| l.starts_with("output-hash:"))
            .expect("hash line")
            .to_string()
    };
    assert_eq!(hash_of("1"), hash_of("8"));
}

#[test]
fn trace_csv_written() {
    let dir = std::env::temp_dir();
    let path = dir.join("tilefact_cli_trace_test.csv");
    let _ = std::fs::remove_file(&path);
    let out = run(&[
        "factor", "--kind", "lu", "--n", "64", "--b", "16", "--threads", "2", "--trace",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "worker,task_kind,k,i,j,start_ns,end_ns");
    assert!(lines.count() > 0);
    let _ = std::fs::remove_file(&path);
}

#[test]
fn bench_csv_schema_and_median_lines() {
    let dir = std::env::temp_dir();
    let path = dir.join("tilefact_cli_bench_test.csv");
    let _ = std::fs::remove_file(&path);
    let out = run(&[
        "bench", "--kind", "chol", "--n-list", "64,128", "--b", "32", "--threads-list", "1,2",
        "--reps", "2", "--seed", "7", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "kind,m,n,b,s,threads,rep,wall_s,model_flops,gflops,true_model_flops,status"
    );
    // 2 sizes x 2 thread counts x 2 reps
    assert_eq!(lines.count(), 8);
    let summary = stdout(&out);
    assert_eq!(summary.lines().filter(|l| l.starts_with("bench ")).count(), 4);
    let _ = std::fs::remove_file(&path);
}

#[test]
fn bench_csv_deterministic_except_wall_fields() {
    let invoke = || {
        let out = run(&[
            "bench", "--kind", "lu", "--n", "64", "--b", "16", "--s", "8", "--threads", "1",
            "--reps", "2", "--seed", "11",
        ]);
        assert!(out.status.success());
        stdout(&out)
    };
    let normalize = |text: String| -> Vec<String> {
        text.lines()
            .filter(|l| l.contains(','))
            .map(|l| {
                let cols: Vec<&str> = l.split(',').collect();
                // blank out wall-clock-derived fields (wall_s, gflops)
                cols.iter()
                    .enumerate()
                    .map(|(i, c)| if i == 7 || i == 9 { "_" } else { *c })
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect()
    };
    assert_eq!(normalize(invoke()), normalize(invoke()));
}

#[test]
fn bench_weak_scaling_sizes() {
    let out = run(&[
        "bench", "--kind", "qr", "--weak", "--nloc", "64", "--b", "32", "--s", "8",
        "--threads-list", "1,4", "--reps", "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    // nloc=64: 1 worker -> n=64; 4 workers -> n=128 (64*2 rounded to tiles)
    assert!(text.contains("n=64 b=32 s=8 threads=1"), "{text}");
    assert!(text.contains("n=128 b=32 s=8 threads=4"), "{text}");
}

#[test]
fn stability_random_csv() {
    let out = run(&[
        "stability", "--experiment", "random", "--n", "64", "--p-list", "1,2,4", "--sample",
        "2", "--seed", "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "matrix,n,b,p,method,be_fact,be_soln,norm_N,norm_U,norm_absNU,flags"
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn stability_mtx_runs_on_bundled_corpus() {
    let dir = std::env::temp_dir();
    let path = dir.join("tilefact_cli_mtx_test.csv");
    let hist = dir.join("tilefact_cli_mtx_test.csv.hist.csv");
    let _ = std::fs::remove_file(&path);
    let _ = std::fs::remove_file(&hist);
    let out = run(&[
        "stability", "--experiment", "mtx", "--dir", mtx_corpus().to_str().unwrap(), "--p",
        "32", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let reports = std::fs::read_to_string(&path).unwrap();
    assert!(reports.starts_with("matrix,n,b,p,method,"));
    assert!(reports.contains("zero_row_singular"));
    assert!(reports.contains("singular"));
    let hist_text = std::fs::read_to_string(&hist).unwrap();
    assert!(hist_text.starts_with("bin_upper,count_soln,count_fact"));
    let _ = std::fs::remove_file(&path);
    let _ = std::fs::remove_file(&hist);
}

#[test]
fn stability_missing_dir_exits_2() {
    let out = run(&[
        "stability", "--experiment", "mtx", "--dir", "/nonexistent/such/dir", "--p", "32",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dag_dump_matches_plan_and_is_deterministic() {
    let invoke = || stdout(&run(&["dag", "--kind", "qr", "--p", "3", "--q", "3"]));
    let first = invoke();
    assert_eq!(first, invoke());
    let task_lines: Vec<&str> = first.lines().filter(|l| !l.contains("->")).collect();
    assert_eq!(task_lines.len(), 14); // 3 geqrt + 3 larfb + 3 tsqrt + 5 ssrfb
    assert_eq!(task_lines.iter().filter(|l| l.starts_with("geqrt")).count(), 3);
    assert_eq!(task_lines.iter().filter(|l| l.starts_with("ssrfb")).count(), 5);

    let single = stdout(&run(&["dag", "--kind", "chol", "--p", "1"]));
    assert_eq!(single.trim(), "potf2 0 0 0 3");
}

#[test]
fn implausible_rates_are_flagged_when_peak_supplied() {
    let out = bin()
        .env("TILEFACT_PEAK_PER_CORE", "0.000001")
        .args([
            "bench", "--kind", "chol", "--n", "64", "--b", "32", "--threads", "1", "--reps", "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    let data_line = text.lines().find(|l| l.starts_with("chol,")).expect("data row");
    assert!(data_line.ends_with("suspect-rate"), "{data_line}");
}

#[test]
fn env_var_supplies_default_threads() {
    let out = bin()
        .env("TILEFACT_THREADS", "2")
        .args(["factor", "--kind", "chol", "--n", "64", "--b", "32"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("threads=2"));
}
