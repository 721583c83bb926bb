use std::path::Path;
use std::process::{Command, Output};

fn dirp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = dirp(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn round_trip_through_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "--family", "toy", "--n", "2", "--q", "1", "--seed", "3", "--out", "inst.toml"]);
    ok(d, &["train-crl", "--instance", "inst.toml", "--periods", "4000", "--seed", "1", "--out", "w.txt", "--log", "log.csv"]);
    assert!(std::fs::read_to_string(d.join("w.txt")).unwrap().starts_with("dirp-weights/1"));
    assert!(std::fs::read_to_string(d.join("log.csv")).unwrap().starts_with("period,cbar"));

    ok(d, &["vi", "--instance", "inst.toml", "--out", "pol.bin"]);
    ok(d, &["slice", "--policy", "pol.bin", "--instance", "inst.toml", "--fix", "x0=2", "--axes", "x1,x2", "--out", "grid.csv"]);
    assert!(std::fs::read_to_string(d.join("grid.csv")).unwrap().starts_with("x1,x2,sell,a1,a2"));

    for policy in [&["--policy", "zero"][..], &["--policy", "crl", "--weights", "w.txt"], &["--policy", "vi", "--table", "pol.bin"]] {
        let mut args = vec!["simulate", "--instance", "inst.toml", "--periods", "1500", "--warmup", "100", "--seed", "2"];
        args.extend_from_slice(policy);
        let report = ok(d, &args);
        assert!(report.starts_with("component,value"));
        assert!(report.contains("total,"));
    }

    let levels = ok(d, &["po2", "--instance", "inst.toml", "--sim-periods", "1000", "--sim-warmup", "10", "--report", "po2.csv"]);
    assert!(levels.starts_with("customer,interval,order_up_to,offset"));
    assert_eq!(levels.lines().count(), 3);
}

#[test]
fn experiment_commands_write_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("grid.toml"),
        r#"format = "dirp-experiment/1"
family = "toy"
sizes = [[2, 1]]
seeds = [1]
methods = ["crl", "po2"]

[protocol]
train_periods = 2000
sim_periods = 1200
sim_warmup = 100
lcrl_sim_periods = 60
lcrl_warmup = 10
scenarios = 3
"#,
    )
    .unwrap();
    ok(d, &["compare", "--spec", "grid.toml", "--out-dir", "out"]);
    let results = std::fs::read_to_string(d.join("out/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 3);
    assert!(d.join("out/timings.csv").exists());
    ok(d, &["compare", "--spec", "grid.toml", "--out-dir", "again"]);
    assert_eq!(std::fs::read_to_string(d.join("again/results.csv")).unwrap(), results);

    ok(d, &["ablate", "--spec", "grid.toml", "--masks", "1111,1000", "--out-dir", "out"]);
    assert_eq!(std::fs::read_to_string(d.join("out/ablation.csv")).unwrap().lines().count(), 3);
    ok(d, &["sweep", "--spec", "grid.toml", "--kind", "horizon", "--values", "0,1", "--out-dir", "out"]);
    assert!(std::fs::read_to_string(d.join("out/sweep_horizon.csv")).unwrap().contains("horizon_0"));
}

#[test]
fn failures_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert!(!dirp(d, &["simulate", "--instance", "missing.toml", "--policy", "zero"]).status.success());
    ok(d, &["gen", "--family", "main", "--n", "9", "--q", "5", "--out", "big.toml"]);
    let out = dirp(d, &["vi", "--instance", "big.toml", "--out", "p.bin"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("state"));
    assert!(!dirp(d, &["simulate", "--instance", "big.toml", "--policy", "crl"]).status.success());
}
