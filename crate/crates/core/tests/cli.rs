use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nonlocal-lab"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn report(dir: &Path, name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("out").join(name).join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn empty_config_prints_usage_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.toml"), "# nothing here\n").unwrap();
    let out = run(dir.path(), &["--config", "empty.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage:"));
    let bare = run(dir.path(), &[]);
    assert!(!bare.status.success());
}

#[test]
fn unknown_keys_are_reported_with_their_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[params]\nsigma = 1.5\nsgima = 1.2\n").unwrap();
    let out = run(dir.path(), &["solve", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("sgima"), "{err}");
}

#[test]
fn precondition_violations_are_forwarded() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["solve", "--sigma-sweep", "2.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_with_zero_data_writes_a_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["solve", "--out", "out", "--resolution", "8", "--quiet"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(dir.path(), "solve");
    assert_eq!(rep["passed"], true);
    let csv = std::fs::read_to_string(dir.path().join("out/solve/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,u"));
    let mut rows = 0;
    for l in lines {
        let u: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(u, 0.0);
        rows += 1;
    }
    assert!(rows > 0);
    assert!(dir.path().join("out/solve/trajectory.dat").exists());
}

#[test]
fn subcommand_from_the_config_and_failed_assertions_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // a zero tolerance on the refinement change cannot hold
    std::fs::write(
        dir.path().join("c.toml"),
        "subcommand = \"counterexample\"\n[counterexample]\nmax_change = 0.0\n",
    )
    .unwrap();
    let out = run(dir.path(), &["--config", "c.toml", "--out", "out", "--resolution", "16", "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
    let rep = report(dir.path(), "counterexample");
    assert_eq!(rep["passed"], false);
    let a = rep["assertions"].as_array().unwrap();
    let failed: Vec<_> = a.iter().filter(|x| x["passed"] == false).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0]["lhs"].is_number() && failed[0]["rhs"].is_number() && failed[0]["margin"].as_f64().unwrap() < 0.0);
}

#[test]
fn reports_are_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let strip = |mut v: serde_json::Value| {
        v.as_object_mut().unwrap().remove("wall_clock_seconds");
        v
    };
    let args = ["cz-demo", "--out", "out", "--seed", "7", "--quiet"];
    assert!(run(dir.path(), &args).status.success());
    let first = strip(report(dir.path(), "cz-demo"));
    let csv1 = std::fs::read(dir.path().join("out/cz-demo/cz_sets.csv")).unwrap();
    assert!(run(dir.path(), &args).status.success());
    assert_eq!(first, strip(report(dir.path(), "cz-demo")));
    std::fs::copy(dir.path().join("out/cz-demo/inputs.toml"), dir.path().join("replay.toml")).unwrap();
    assert!(run(dir.path(), &["--config", "replay.toml", "--quiet"]).status.success());
    assert_eq!(first, strip(report(dir.path(), "cz-demo")));
    assert_eq!(csv1, std::fs::read(dir.path().join("out/cz-demo/cz_sets.csv")).unwrap());
}

#[test]
fn light_subcommands_write_their_reports() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, res) in [("counterexample", "16"), ("cz-demo", "16"), ("verify-barriers", "8")] {
        let out = run(dir.path(), &[cmd, "--out", "out", "--resolution", res, "--quiet"]);
        assert!(out.status.code().is_some_and(|c| c <= 1), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let rep = report(dir.path(), cmd);
        assert_eq!(rep["name"], cmd);
        for t in rep["tables"].as_array().unwrap() {
            for f in ["csv", "dat"] {
                assert!(dir.path().join("out").join(cmd).join(t[f].as_str().unwrap()).exists());
            }
        }
    }
}
