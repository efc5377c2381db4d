use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqsafe")).args(args).output().unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn train_small(dir: &Path, out: &str, curve: &str) -> Output {
    run(&[
        "train",
        "--net",
        &data("two_bus.json"),
        "--scenario",
        &data("two_bus_scenario.json"),
        "--spec",
        &data("spec.json"),
        "--episodes",
        "3",
        "--batch",
        "2",
        "--k",
        "100",
        "--hidden",
        "3",
        "--projection",
        "on",
        "--out",
        &path(dir, out),
        "--curve",
        &path(dir, curve),
    ])
}

#[test]
fn simulate_39_bus_writes_all_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "traj.csv");
    let o = run(&[
        "simulate",
        "--net",
        &data("ieee39.json"),
        "--scenario",
        &data("ieee39_scenario.json"),
        "--spec",
        &data("spec.json"),
        "--controller",
        "analytic-safe-baseline",
        "--seed",
        "7",
        "--horizon",
        "3",
        "--out",
        &out,
        "--report",
        &path(dir.path(), "verdict.json"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header.split(',').filter(|c| c.starts_with("omega_")).count(), 39);
    assert!(text.lines().any(|l| l.starts_with("# config=")));
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path(dir.path(), "verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["checks"].as_array().unwrap().len(), 4);
}

#[test]
fn verify_equilibrium_run_exits_zero_and_unforced_run_fails() {
    let dir = tempfile::tempdir().unwrap();
    let eq = path(dir.path(), "eq.csv");
    let o = run(&[
        "simulate",
        "--net",
        &data("two_bus.json"),
        "--scenario",
        &data("equilibrium_scenario.json"),
        "--spec",
        &data("spec.json"),
        "--out",
        &eq,
        "--report",
        &path(dir.path(), "r.json"),
    ]);
    assert!(o.status.success());
    let v = run(&["verify", "--traj", &eq, "--spec", &data("spec.json")]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));

    let bad = path(dir.path(), "zero.csv");
    run(&[
        "simulate",
        "--net",
        &data("ieee39.json"),
        "--scenario",
        &data("ieee39_scenario.json"),
        "--spec",
        &data("spec.json"),
        "--horizon",
        "5",
        "--out",
        &bad,
        "--report",
        &path(dir.path(), "r2.json"),
    ]);
    let v = run(&["verify", "--traj", &bad]);
    assert_eq!(v.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&v.stdout).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn compare_three_controllers_gives_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train_small(dir.path(), "c.json", "curve.csv").status.success());
    let o = run(&[
        "train",
        "--net",
        &data("two_bus.json"),
        "--scenario",
        &data("two_bus_scenario.json"),
        "--spec",
        &data("spec.json"),
        "--policy",
        "rl-monotone-baseline",
        "--episodes",
        "2",
        "--batch",
        "2",
        "--k",
        "100",
        "--hidden",
        "3",
        "--out",
        &path(dir.path(), "m.json"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = path(dir.path(), "table.csv");
    let list = format!("{},{},analytic-safe-baseline", path(dir.path(), "c.json"), path(dir.path(), "m.json"));
    let o = run(&[
        "compare",
        "--net",
        &data("two_bus.json"),
        "--scenario",
        &data("two_bus_scenario.json"),
        "--spec",
        &data("spec.json"),
        "--controllers",
        &list,
        "--seed",
        "4",
        "--out",
        &table,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "method,stability,safety,cost,cost_short,max_abs_nadir,settling_time");
    let methods: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["rl-constrained", "rl-monotone-baseline", "analytic-safe-baseline"]);
}

#[test]
fn same_argv_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train_small(dir.path(), "a.json", "a.csv").status.success());
    assert!(train_small(dir.path(), "b.json", "b.csv").status.success());
    let read = |n: &str| std::fs::read(path(dir.path(), n)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a.csv"), read("b.csv"));
    let sim = |out: &str| {
        run(&[
            "simulate",
            "--net",
            &data("two_bus.json"),
            "--scenario",
            &data("two_bus_scenario.json"),
            "--spec",
            &data("spec.json"),
            "--controller",
            &path(dir.path(), "a.json"),
            "--noise",
            "0.05",
            "--seed",
            "9",
            "--out",
            &path(dir.path(), out),
            "--report",
            &path(dir.path(), "r.json"),
        ])
    };
    assert!(sim("s1.csv").status.success());
    assert!(sim("s2.csv").status.success());
    assert_eq!(read("s1.csv"), read("s2.csv"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--projection", "maybe"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate",
        "--net",
        &path(dir.path(), "missing.json"),
        "--scenario",
        &data("two_bus_scenario.json"),
        "--out",
        &path(dir.path(), "x.csv"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));

    let bad = path(dir.path(), "bad.json");
    std::fs::write(&bad, "{\"buses\": [], \"lines\": [],\n \"extra\": 1}").unwrap();
    let o = run(&[
        "simulate",
        "--net",
        &bad,
        "--scenario",
        &data("two_bus_scenario.json"),
        "--out",
        &path(dir.path(), "x.csv"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("extra") && err.contains("line 2"), "{err}");

    let o = run(&[
        "compare",
        "--net",
        &data("two_bus.json"),
        "--scenario",
        &data("two_bus_scenario.json"),
        "--spec",
        &data("spec.json"),
        "--controllers",
        &path(dir.path(), "nope.json"),
        "--out",
        &path(dir.path(), "t.csv"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));
}
