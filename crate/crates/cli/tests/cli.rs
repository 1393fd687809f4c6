use std::path::Path;
use std::process::{Command, Output};

use magep_cli::report::validate;
use serde_json::Value;

fn magep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn magep_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magep"))
        .args(args)
        .env("MAGEP_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = magep(&[
            "gen",
            "--L",
            "2",
            "--n",
            "1,2,1",
            "--d",
            "1",
            "--count",
            "5",
            "--seed",
            "7",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let names = files(&a);
    assert_eq!(names.len(), 5);
    assert_eq!(names, files(&b));
    for n in &names {
        assert_eq!(std::fs::read(a.join(n)).unwrap(), std::fs::read(b.join(n)).unwrap());
    }
    // File k uses seed + k, so shifting the seed shifts the files.
    let c = dir.path().join("c");
    magep(&[
        "gen",
        "--n",
        "1,2,1",
        "--count",
        "1",
        "--seed",
        "8",
        "--out-dir",
        c.to_str().unwrap(),
    ]);
    assert_eq!(
        std::fs::read(c.join("u0000.mgw.json")).unwrap(),
        std::fs::read(a.join("u0001.mgw.json")).unwrap()
    );
    let (spec, _) = magep_core::weightspace::load(a.join("u0003.mgw.json")).unwrap();
    assert_eq!(spec.widths(), &[1, 2, 1]);
}

#[test]
fn gen_flag_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = magep(&["gen", "--n", "1,0,1", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_1 must be >= 1"));
    let o = magep(&["gen", "--L", "3", "--n", "1,2,1", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = magep(&[
        "gen",
        "--n",
        "1,2,1",
        "--count",
        "0",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(!out.exists() || files(&out).is_empty());
    assert_eq!(code(&magep(&["gen", "--n", "1,2,1", "--dist", "cauchy:0,1"])), 2);
    assert_eq!(
        code(&magep(&[
            "gen",
            "--n",
            "1,2,1",
            "--dist",
            "uniform:1,-1",
            "--out-dir",
            out.to_str().unwrap()
        ])),
        2
    );
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let nested = blocker.join("sub");
    let o = magep(&["gen", "--n", "1,2,1", "--out-dir", nested.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let o = magep(&[
        "check",
        "--suite",
        "group",
        "--trials",
        "2",
        "--out",
        nested.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&magep(&["check", "--suite", "everything"])), 2);
    assert_eq!(code(&magep(&["check", "--layers", "1"])), 2);
    assert_eq!(code(&magep(&["check", "--tol", "equiv"])), 2);
    assert_eq!(code(&magep(&["check", "--scale-range", "0,4"])), 2);
    assert_eq!(code(&magep(&["fit", "--lambda", "-1"])), 2);
    assert_eq!(code(&magep(&["fit", "--activation", "gelu"])), 2);
    assert_eq!(code(&magep(&["bench", "--reps", "0"])), 2);
    assert_eq!(code(&magep(&["frobnicate"])), 2);
    assert_eq!(
        code(&magep_env(&["check", "--suite", "group", "--trials", "1"], "zero")),
        2
    );
}

#[test]
fn check_report_is_independent_of_thread_count() {
    let args = ["check", "--suite", "stack", "--trials", "12", "--seed", "4"];
    let one = magep_env(&args, "1");
    let four = magep_env(&args, "4");
    assert_eq!(code(&one), 0);
    assert_eq!(stdout_json(&one), stdout_json(&four));
    validate(&stdout_json(&one)).unwrap();
}

#[test]
fn tolerance_override_can_fail_a_suite() {
    let o = magep(&["check", "--suite", "inv", "--trials", "5", "--tol", "inv.invariance=0"]);
    assert_eq!(code(&o), 1);
    let r = stdout_json(&o);
    validate(&r).unwrap();
    assert_eq!(r["suites"][0]["checks"][0]["tolerance"], 0.0);
}

#[test]
fn worst_trial_replays_from_report() {
    let o = magep(&["check", "--suite", "equiv", "--trials", "6", "--seed", "9"]);
    let r = stdout_json(&o);
    let w = &r["suites"][0]["checks"][0]["worst_trial"];
    let index = w["index"].as_u64().unwrap();
    assert_eq!(
        w["seed"].as_u64().unwrap(),
        magep_core::densekit::derive_seed(9, "equiv", index)
    );
    let residual = r["suites"][0]["checks"][0]["residuals"][index as usize]
        .as_f64()
        .unwrap();
    assert_eq!(residual, r["suites"][0]["checks"][0]["value"].as_f64().unwrap());
    let perm = w["group"]["layers"][0]["perm"].as_array().unwrap();
    assert!(perm.iter().all(|p| p.as_u64().unwrap() >= 1));
}

#[test]
fn fit_writes_result_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.mgfit.json");
    let rep = dir.path().join("p.json");
    let o = magep(&[
        "fit",
        "--target",
        "planted",
        "--n",
        "1,2,1",
        "--lambda",
        "1e-10",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
        "--report",
        rep.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let line = String::from_utf8_lossy(&o.stdout);
    assert!(
        line.contains("test_mse=") && line.contains("invariance_residual="),
        "{line}"
    );
    let fit = magep_core::fitting::load_fit(&out).unwrap();
    assert_eq!(fit.n_features, 8);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    validate(&report).unwrap();
    assert!(report["test_mse"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn bench_outputs_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("b.json");
    let o = magep(&[
        "bench",
        "--reps",
        "1",
        "--layers",
        "2",
        "--widths",
        "2,3",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let table = String::from_utf8_lossy(&o.stdout);
    assert_eq!(table.lines().count(), 3, "{table}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    validate(&report).unwrap();
    for p in report["points"].as_array().unwrap() {
        assert_eq!(p["optimized"]["samples_s"].as_array().unwrap().len(), 1);
        assert!(p["optimized"]["min_s"].is_null());
    }
}
