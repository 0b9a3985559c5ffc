//! End-to-end runs of the `nullwave` binary: exit statuses, file headers and
//! reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nullwave::energy::CSV_HEADER;

const SMALL: &str = r#"
[grid]
x_min = -20.0
x_max = 20.0
m = 401

[time]
t_final = 4.0
cadence = 5

[weight]
delta = 0.5

[data]
eps = 0.1

[[data.field]]
f = { kind = "gaussian", width = 1.0 }
g = { kind = "gaussian", center = 0.5, width = 1.5 }

[nonlinearity]
preset = "null"

[output]
snapshots = "csv"
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn nullwave(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nullwave"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn check_null_on_wave_form() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "preset = \"null\"",
        "[[nonlinearity.block]]\ni = 1\nk = 1\nl = 1\ncoeffs = [1.0, 0.0, 0.0, -1.0]",
    );
    let cfg = write(dir.path(), "c.toml", &text);
    let o = nullwave(&["check-null"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "null");

    let o = nullwave(&["check-null"], &configs_dir().join("not_null.toml"), dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "not null");
}

#[test]
fn simulate_writes_headers_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("run");
    let o = nullwave(&["simulate", "--quiet"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let csv = std::fs::read_to_string(out.join("energy.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    // ticks at steps 0, 5, ..., 40
    assert_eq!(csv.lines().count(), 1 + 9);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("bootstrap = pass"));
    assert!(summary.contains("blowup = none"));
    let snaps = std::fs::read_to_string(out.join("snapshots.csv")).unwrap();
    assert_eq!(snaps.lines().next().unwrap(), "t,field,j,x,phi,p,q");
    assert_eq!(snaps.lines().count(), 1 + 9 * 401);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("snapshots = \"csv\"", "snapshots = \"binary\"");
    let cfg = write(dir.path(), "c.toml", &text);
    let names = ["energy.csv", "summary.txt", "snapshots.bin"];
    let mut seen: Vec<Vec<Vec<u8>>> = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = nullwave(&["energy-report", "--quiet"], &cfg, &out);
        assert_eq!(o.status.code(), Some(0));
        seen.push(names.iter().map(|n| std::fs::read(out.join(n)).unwrap()).collect());
    }
    for (k, n) in names.iter().enumerate() {
        assert!(!seen[0][k].is_empty(), "{n}");
        assert_eq!(seen[0][k], seen[1][k], "{n} differs between runs");
    }
}

#[test]
fn converge_writes_order_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = nullwave(&["converge", "--quiet"], &configs_dir().join("linear.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("h,error,order"));
    let rows: Vec<Vec<f64>> =
        lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0][2].is_nan());
    for r in &rows[1..] {
        assert!((1.8..=2.2).contains(&r[2]), "{r:?}");
    }
}

#[test]
fn john_blowup_is_a_violation() {
    let dir = tempfile::tempdir().unwrap();
    let o = nullwave(&["simulate", "--quiet"], &configs_dir().join("john.toml"), dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("blowup t="), "{err}");
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("theorem_regime = false"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("delta = 0.5", "delta = 1.5").replace("m = 401", "m = 1");
    let cfg = write(dir.path(), "bad.toml", &bad);
    let o = nullwave(&["simulate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error kind="), "{err}");
    assert!(err.contains("(0, 1)") && err.contains("grid"), "{err}");

    let cfg = write(dir.path(), "syntax.toml", "[grid]\nx_min = = 1\n");
    let o = nullwave(&["simulate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = nullwave(&["simulate"], &dir.path().join("missing.toml"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seedless_rejects_seeded_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("seed = 7\n{SMALL}"));
    let o = nullwave(&["simulate", "--seedless", "--quiet"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = nullwave(&["check-null", "--quiet"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn wave_reaching_the_edge_is_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("t_final = 4.0", "t_final = 30.0");
    let cfg = write(dir.path(), "c.toml", &text);
    let o = nullwave(&["simulate", "--quiet"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_ladder_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let o = nullwave(&["increment-scaling", "--quiet"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eps_ladder"));
}

#[test]
fn shipped_configs_parse() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            nullwave::config::load_config(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}
