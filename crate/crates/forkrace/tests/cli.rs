use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_forkrace"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("forkrace-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn body(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn analytic_table() {
    let out = stdout(&["analytic", "--alpha", "0.3", "0.2", "--n", "2"]);
    let rows = body(&out);
    assert_eq!(rows.len(), 2);
    let header: Vec<&str> = rows[0].split(',').collect();
    let values: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(header.len(), values.len());
    let k = header.iter().position(|h| *h == "Rhat_1").unwrap();
    assert!(values[k].starts_with("0.31366666"));
    assert!(out.lines().next().unwrap().starts_with("# forkrace"));
}

#[test]
fn daa_rows() {
    let out = stdout(&["daa", "--alpha", "0.22", "--m", "2", "--n", "4", "--k", "100", "1000"]);
    let rows = body(&out);
    assert_eq!(rows.len(), 3);
    assert!(rows[1].contains(",51,"));
}

#[test]
fn simulation_is_reproducible() {
    let a = scratch("a.csv");
    let b = scratch("b.csv");
    for p in [&a, &b] {
        let st = bin()
            .args(["simulate", "--alpha", "0.3", "0.25", "--n", "3", "--rounds", "20000", "--seed", "4", "--out"])
            .arg(p)
            .status()
            .unwrap();
        assert!(st.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn sweep_grid() {
    let out = stdout(&[
        "sweep", "--target", "analytic", "--sweep", "alpha:0.1:0.3:0.1", "--sweep", "n:2:4:2", "--alpha", "0.2", "--m", "2",
    ]);
    let rows = body(&out);
    assert_eq!(rows.len(), 1 + 3 * 2);
    assert!(rows[0].starts_with("alpha,n,"));
    let single = stdout(&["sweep", "--target", "analytic", "--alpha", "0.2", "--m", "2"]);
    assert_eq!(body(&single).len(), 2);
}

#[test]
fn sweep_keeps_points_without_crossing() {
    let out = stdout(&["sweep", "--target", "threshold", "--sweep", "gamma:0.5:1:0.5", "--m", "2", "--n", "2", "--model", "n2"]);
    let rows = body(&out);
    assert_eq!(rows.len(), 3);
    assert!(rows[2].contains("nan"));
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code().unwrap();
    assert_eq!(code(&["analytic", "--alpha", "0.7", "0.5"]), 1);
    assert_eq!(code(&["simulate", "--alpha", "0.3", "0.2", "--rounds", "0"]), 1);
    assert_eq!(code(&["bogus"]), 1);
    assert_eq!(code(&["--help"]), 0);
    let nc = ["threshold", "--m", "2", "--n", "2", "--model", "n2", "--gamma", "1", "1", "--theta", "0.5", "0.5"];
    assert_eq!(code(&nc), 2);
}

#[test]
fn config_file_input() {
    let p = scratch("cfg.toml");
    std::fs::write(&p, "alpha = [0.3, 0.2]\nn_max = 2\n").unwrap();
    let from_file = stdout(&["analytic", "--config", p.to_str().unwrap()]);
    let from_flags = stdout(&["analytic", "--alpha", "0.3", "0.2", "--n", "2"]);
    assert_eq!(body(&from_file), body(&from_flags));
    std::fs::write(&p, "alpha = [0.3, 0.2]\nwhat = 1\n").unwrap();
    let st = bin().args(["analytic", "--config", p.to_str().unwrap()]).status().unwrap();
    assert_eq!(st.code(), Some(1));
}

#[test]
fn axis_parsing() {
    let (f, v) = forkrace::cli::parse_axis("alpha:0.1:0.3:0.1").unwrap();
    assert_eq!(f, "alpha");
    assert_eq!(v.len(), 3);
    assert!(forkrace::cli::parse_axis("alpha:0.3:0.1:0.1").is_err());
    assert!(forkrace::cli::parse_axis("alpha:0.1:0.3").is_err());
}
