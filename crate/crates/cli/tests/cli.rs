use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bbv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbv")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bbv-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn corpus_file(name: &str) -> String {
    format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn run_prints_output_and_result() {
    let dir = scratch("run");
    let prog = dir.join("p.js");
    fs::write(&prog, "print(\"hi\");\nfunction f() { return 1.5 + 1; }\n").unwrap();
    let out = bbv(&["run", prog.to_str().unwrap(), "--entry", "f", "--mode", "baseline"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "hi\n2.5f\n");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn exit_codes_distinguish_runtime_and_compile_errors() {
    let dir = scratch("codes");
    let bad_runtime = dir.join("r.js");
    let bad_syntax = dir.join("s.js");
    fs::write(&bad_runtime, "var x = \"a\" & 1;").unwrap();
    fs::write(&bad_syntax, "function (").unwrap();
    assert_eq!(bbv(&["run", bad_runtime.to_str().unwrap()]).status.code(), Some(1));
    let out = bbv(&["run", bad_syntax.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("syntax error"));
    assert_eq!(bbv(&["run", dir.join("missing.js").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(bbv(&["run", bad_runtime.to_str().unwrap(), "--maxvers", "lots"]).status.code(), Some(2));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn stats_and_dumps() {
    let dir = scratch("stats");
    let stats = dir.join("s.json");
    let sum = corpus_file("sum.js");
    let out = bbv(&[
        "run",
        &sum,
        "--entry",
        "bench",
        "--maxvers",
        "inf",
        "--stats",
        stats.to_str().unwrap(),
        "--dump-ir",
        "--dump-analysis",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("function sum(v0)"));
    assert!(stdout.contains("is_i32"));
    assert!(stdout.trim_end().ends_with("124750"));
    let json = fs::read_to_string(&stats).unwrap();
    for key in ["\"tests_by_kind\"", "\"versions_histogram\"", "\"maxvers\": \"inf\"", "\"stub_hits\""] {
        assert!(json.contains(key), "{key} missing from {json}");
    }
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bench_writes_identical_reports() {
    let dir = scratch("bench");
    let suite = dir.join("suite");
    fs::create_dir_all(&suite).unwrap();
    fs::copy(corpus_file("sum.js"), suite.join("sum.js")).unwrap();
    fs::copy(corpus_file("recursive_fib.js"), suite.join("fib.js")).unwrap();
    let run = |tag: &str| {
        let paths: Vec<PathBuf> = ["json", "csv", "md"].iter().map(|e| dir.join(format!("{tag}.{e}"))).collect();
        let mut args = vec!["bench", "--suite", suite.to_str().unwrap(), "--modes", "baseline,bbv-lazy", "--limits", "0,5,inf"];
        for p in &paths {
            args.push("--out");
            args.push(p.to_str().unwrap());
        }
        let mut args: Vec<String> = args.into_iter().map(String::from).collect();
        args.extend(["--warmup", "2", "--iters", "2"].map(String::from));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        assert!(bbv(&refs).status.success());
        paths.iter().map(|p| fs::read_to_string(p).unwrap()).collect::<Vec<_>>()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    assert!(a[0].starts_with("{\n  \"config\""));
    // Header plus 2 benchmarks x 2 modes x 3 limits.
    assert_eq!(a[1].lines().count(), 1 + 12);
    assert!(a[2].contains("| fib | bbv-lazy | inf |"));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bench_rejects_missing_warmup() {
    let out = bbv(&["bench", "--warmup", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
