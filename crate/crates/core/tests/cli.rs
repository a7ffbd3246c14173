use std::path::Path;
use std::process::{Command, Output};

fn blockperm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockperm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_input(dir: &Path) -> String {
    let mut text = String::from("x,y,group\n");
    for k in 0..24 {
        let t = k as f64;
        let (x, y) = ((t * 0.7).sin(), (t * 1.3).cos());
        let (g, shift) = if k < 12 { ("A", 0.0) } else { ("B", 1.0) };
        text.push_str(&format!("{},{},{g}\n", x + shift, y));
    }
    let path = dir.join("input.csv");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn test_subcommand_prints_record_and_dumps_stats() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path());
    let dump = dir.path().join("perm.csv");
    let out = blockperm(&[
        "test", "--input", &input, "--rho", "0.5", "--blocks", "2", "--perms", "30", "--seed", "3",
        "--dump-perm-stats", dump.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    let keys: Vec<&str> = line.split_whitespace().map(|kv| kv.split('=').next().unwrap()).collect();
    assert_eq!(keys, ["p_value", "observed", "critical", "reject", "n1", "n2", "L_max"]);
    assert!(line.contains("n1=12 n2=12 L_max=6"));
    let dumped = std::fs::read_to_string(dump).unwrap();
    assert_eq!(dumped.lines().count(), 31);

    // same seed, same record
    let again = blockperm(&[
        "test", "--input", &input, "--rho", "0.5", "--blocks", "2", "--perms", "30", "--seed", "3",
    ]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), line);
}

#[test]
fn mmd_and_full_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path());
    let out = blockperm(&[
        "test", "--input", &input, "--statistic", "mmd", "--scheme", "full", "--bandwidth", "1.5", "--perms", "20",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("L_max=12"));
}

#[test]
fn diagnose_reports_all_fields() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path());
    let out = blockperm(&["diagnose", "--input", &input, "--rho", "0.5", "--blocks", "2", "--perms", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["v_star", "M_bound", "r", "L_max", "rho_min", "rho_opt", "q_rest_bound", "feasible"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{key}="))), "missing {key}");
    }
}

#[test]
fn simulate_writes_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.txt");
    std::fs::write(
        &spec,
        "[experiment]\nstatistic = mean\nd = 1\nn_grid = 16\nshift = 1.0\nn_sim = 5\n\
         [test]\nperms = 19\nrho = 0.5\nblocks = 2\nseed = 1\n[variance]\ndatasets = 2\nreplicates = 100\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = blockperm(&["simulate", "--spec", spec.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 5);
    assert!(out_dir.join("variance.csv").exists());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "x,group\n1.0,A\n2.0,C\n").unwrap();
    let out = blockperm(&["test", "--input", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = blockperm(&["test", "--input", path.to_str().unwrap(), "--scheme", "sideways"]);
    assert!(!out.status.success());
}
