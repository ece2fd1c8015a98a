use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_robin-ucp");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "alpha = 1.0
r_grid = [0.1, 0.2, 0.25]
[solution]
name = \"robin-cosexp\"
params = [1.0]
[quadrature]
n_rad = 24
n_ang = 48
";

#[test]
fn unknown_key_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &SMALL.replace("alpha =", "alpha_ ="));
    let out = run(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha_"));
}

#[test]
fn empty_grid_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "empty.toml", &SMALL.replace("[0.1, 0.2, 0.25]", "[]"));
    let out = run(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn missing_source_exits_with_validation_code() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--builtin", "no-such-config"]).status.code(), Some(1));
}

#[test]
fn numerical_failure_is_flagged_in_the_summary() {
    // exp(800 x_2) overflows inside the half-disk
    let dir = tempfile::tempdir().unwrap();
    let text = "r_grid = [0.25, 0.5]\n[solution]\nname = \"separable\"\nparams = [0.0, 800.0]\n";
    let cfg = write_config(dir.path(), "overflow.toml", text);
    let out_dir = dir.path().join("out");
    let out = run(&["--config", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.starts_with("status = failed"));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(&["--config", &cfg, "-o", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(run(&["--config", &cfg, "-o", b.to_str().unwrap(), "--workers", "1"]).status.code(), Some(0));
    for f in ["profile.csv", "ledger.csv", "doubling.csv", "vanishing.csv", "summary.txt", "plot.gp"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let profile = std::fs::read_to_string(a.join("profile.csv")).unwrap();
    let header: Vec<&str> = profile.lines().next().unwrap().split(',').collect();
    // plot.gp refers to columns 14 and 18
    assert_eq!(header[13], "N");
    assert_eq!(header[17], "Ntilde");
    assert_eq!(profile.lines().count(), 4);
}

#[test]
fn check_only_prints_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never");
    let cfg = write_config(dir.path(), "c.toml", &format!("output_dir = \"{}\"\n{SMALL}", out_dir.display()));
    let out = run(&["--config", &cfg, "--check-only"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gradient_consistency"));
    assert!(stdout.contains("status = ok"));
    assert!(!out_dir.exists());
}

#[test]
fn catalogue_listing_is_stable() {
    let a = run(&["--list-catalogue", "--machine"]);
    let b = run(&["--list-catalogue", "--machine"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    for name in ["homogeneous", "robin-exponential", "robin-cosexp", "H-derivative", "fem-coshcos"] {
        assert!(text.lines().any(|l| l == name), "{name}");
    }
}

#[test]
fn builtin_configs_run_clean() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["homogeneous-k2", "robin-exponential-4"] {
        let out_dir = dir.path().join(name);
        let out = run(&["--builtin", name, "-o", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
        assert!(summary.contains("status = ok"));
    }
}

#[test]
fn homogeneous_builtin_reports_the_euler_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--builtin", "homogeneous-k2", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let profile = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    let mut lines = profile.lines();
    let n_col = lines.next().unwrap().split(',').position(|h| h == "N").unwrap();
    for line in lines {
        let n: f64 = line.split(',').nth(n_col).unwrap().parse().unwrap();
        // ⟨Du, x⟩ = 2u and α = 1 in the config: N = 2(α+1)·2
        assert!((n - 8.0).abs() < 1e-9, "{line}");
    }
}
