use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn bouncy(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bouncy")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SAMPLE: &str = r#"
seed = 11
refresh_rate = 1.0
horizon = 2000.0
potential = { kind = "gaussian", precision = [[1.0, 0.0], [0.0, 1.0]] }
velocity = { kind = "uniform_sphere", dim = 2, radius = 1.0 }
initial = { x = [0.0, 0.0], y = [1.0, 0.0] }
write_events = true
"#;

#[test]
fn sample_writes_moments_with_provenance() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sample.toml", SAMPLE);
    let out = dir.path().join("out");
    let o = bouncy(&["sample", &cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("moments.csv")).unwrap();
    let mut lines = text.lines();
    let meta = lines.next().unwrap();
    assert!(meta.starts_with("# bouncy sample artifact_version=1 config_sha256="), "{meta}");
    assert!(meta.contains("seed=11"));
    assert_eq!(lines.next(), Some("observable,estimate,se"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 5);
    // x1² near 1 within a generous band for T = 2000
    let x1sq: f64 = rows[1][1].parse().unwrap();
    assert!((x1sq - 1.0).abs() < 0.25, "{x1sq}");
    let events = fs::read_to_string(out.join("events.jsonl")).unwrap();
    assert!(events.lines().next().unwrap().contains("\"meta\""));
    assert!(events.lines().count() > 100);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sample.toml", SAMPLE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(bouncy(&["sample", &cfg], &a).status.success());
    assert!(bouncy(&["sample", &cfg], &b).status.success());
    for name in ["moments.csv", "events.jsonl"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sample.toml", SAMPLE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(bouncy(&["sample", &cfg], &a).status.success());
    assert!(bouncy(&["sample", &cfg, "--seed", "12"], &b).status.success());
    let tb = fs::read_to_string(b.join("moments.csv")).unwrap();
    assert!(tb.lines().next().unwrap().contains("seed=12"));
    assert_ne!(fs::read_to_string(a.join("moments.csv")).unwrap(), tb);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "alpha.toml", "seed = 3\ndim = 2\nr = [0.5, 1.0, 2.0]\nm = [1.0, inf]\nmc_draws = 2000\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(bouncy(&["alpha-tilde", &cfg, "--workers", "1"], &a).status.success());
    assert!(bouncy(&["alpha-tilde", &cfg, "--workers", "3"], &b).status.success());
    assert_eq!(fs::read(a.join("alpha_tilde.csv")).unwrap(), fs::read(b.join("alpha_tilde.csv")).unwrap());
}

#[test]
fn bundled_harris_chain_passes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = bouncy(&["harris"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("harris.json")).unwrap()).unwrap();
    for key in ["alpha", "gamma", "C1", "zeta", "kappa", "worst_ratio", "pass"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["kappa"], 0.875);
    assert_eq!(report["zeta"], 0.12);
    assert_eq!(report["pass"], true);
    assert!(report["worst_ratio"].as_f64().unwrap() <= 0.875);
}

#[test]
fn failed_hypotheses_exit_one_with_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "harris.toml",
        "[chain]\nkernel = [[1.0, 0.0], [0.0, 1.0]]\nweights = [1.0, 1.0]\nalpha = 0.2\ngamma = 0.5\nc1 = 1.0\nc2 = 4.0\n",
    );
    let out = dir.path().join("out");
    let o = bouncy(&["harris", &cfg], &out);
    assert_eq!(o.status.code(), Some(1));
    let report = fs::read_to_string(out.join("harris.json")).unwrap();
    assert!(report.contains("\"pass\": false") && report.contains("diagnostic"), "{report}");
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let unknown = write(&dir, "unknown.toml", &format!("{SAMPLE}\nspeed = 3\n"));
    let o = bouncy(&["sample", &unknown], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("speed"));

    let bad_dim = write(&dir, "dim.toml", &SAMPLE.replace("x = [0.0, 0.0]", "x = [0.0]"));
    assert_eq!(bouncy(&["sample", &bad_dim], &out).status.code(), Some(2));

    let missing = dir.path().join("nope.toml");
    assert_eq!(bouncy(&["sample", missing.to_str().unwrap()], &out).status.code(), Some(2));

    let gaussian_needed = write(&dir, "couple.toml", r#"
refresh_rate = 1.0
compact_radius = 2.0
horizons = [1.0]
runs = 10
bound_samples = 10
potential = { kind = "gaussian", precision = [[1.0, 0.0], [0.0, 1.0]] }
velocity = { kind = "uniform_sphere", dim = 2, radius = 1.0 }
first = { x = [0.0, 0.0], y = [0.0, 0.0] }
second = { x = [1.0, 0.0], y = [0.0, 0.0] }
"#);
    assert_eq!(bouncy(&["couple", &gaussian_needed], &out).status.code(), Some(2));
}

#[test]
fn anneal_writes_runs_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "anneal.toml",
        r#"
seed = 9
refresh_rate = 1.0
eta = 0.3
horizons = [10.0, 50.0]
runs = 20
potential = { kind = "double_well1d", tilt = 0.3 }
velocity = { kind = "uniform_sphere", dim = 1, radius = 1.0 }
schedule = { form = { kind = "log", beta0 = 1.0, d2 = 1.0 } }
initial = { x = [1.0], y = [1.0] }
"#,
    );
    let out = dir.path().join("out");
    let o = bouncy(&["anneal", &cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs = fs::read_to_string(out.join("runs.jsonl")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 40);
    let rec: serde_json::Value = serde_json::from_str(runs.lines().nth(1).unwrap()).unwrap();
    for key in ["seed", "U_final", "success"] {
        assert!(rec.get(key).is_some(), "missing {key}");
    }
    let summary = fs::read_to_string(out.join("anneal_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2 + 2);
}
