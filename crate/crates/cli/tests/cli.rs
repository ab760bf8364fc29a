use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bbdoa(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbdoa"))
        .args(args)
        .current_dir(dir)
        .env_remove("BBDOA_JOBS")
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SCENARIO: &str = r#"
name = "tiny"
frequency_hz = 3000.0
trials = 4
estimators = ["cbf", "qspice-gnr2"]
seed = 3

[array]
elements = 8
design_hz = 3000.0

[sources]
angles_deg = [-20.0, 25.0]
powers = [1.0]

[noise]
kind = "uniform-gaussian"
variance = 1.0

[sweep]
snr_db = [10.0, 20.0]
snapshots = [40]
"#;

const PROCESSING: &str = r#"
sources = 2
frequency_hz = 3000.0

[array]
elements = 8
design_hz = 3000.0
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn cable_sensitivity_of_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("cable.toml");
    let out = bbdoa(&["cable-sens", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    let value: f64 = text.split_whitespace().next().unwrap().parse().unwrap();
    assert!(value < 0.0 && value.is_finite(), "{text}");
}

#[test]
fn simulate_then_estimate_recovers_sources() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "s.toml", SCENARIO);
    let processing = write(dir.path(), "p.toml", PROCESSING);
    for record in ["rec.bin", "rec.csv"] {
        let sim = bbdoa(&["simulate", "--config", &scenario, "--point", "1", "-o", record], dir.path());
        assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
        let est = bbdoa(&["estimate", record, "--config", &processing, "-o", "spec.csv"], dir.path());
        assert!(est.status.success(), "{}", String::from_utf8_lossy(&est.stderr));
        let line = stdout(&est);
        let angles: Vec<f64> = line
            .trim()
            .trim_start_matches("angles_deg = ")
            .split(", ")
            .map(|s| s.parse().unwrap())
            .collect();
        assert!((angles[0] + 20.0).abs() < 0.5 && (angles[1] - 25.0).abs() < 0.5, "{line}");
        let table = fs::read_to_string(dir.path().join("spec.csv")).unwrap();
        assert!(table.starts_with("# manifest config_sha256="));
        assert!(dir.path().join("spec.gp").exists());
    }
}

#[test]
fn flags_override_the_processing_file() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "s.toml", SCENARIO);
    let processing = write(dir.path(), "p.toml", PROCESSING);
    bbdoa(&["simulate", "--config", &scenario, "-o", "rec.bin"], dir.path());
    let est = bbdoa(
        &["estimate", "rec.bin", "--config", &processing, "--estimator", "cbf", "--sources", "1", "--grid-step", "0.5", "-o", "spec.csv"],
        dir.path(),
    );
    assert!(est.status.success());
    assert_eq!(stdout(&est).split(", ").count(), 1);
    let table = fs::read_to_string(dir.path().join("spec.csv")).unwrap();
    assert!(table.lines().next().unwrap().ends_with("estimator=cbf"));
    assert!(table.contains("\n-89.5,"));
}

#[test]
fn bench_tables_do_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "s.toml", SCENARIO);
    let one = bbdoa(&["bench", "--config", &scenario, "--jobs", "1", "--out-dir", "a"], dir.path());
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    let two = Command::new(env!("CARGO_BIN_EXE_bbdoa"))
        .args(["bench", "--config", &scenario, "--out-dir", "b"])
        .current_dir(dir.path())
        .env("BBDOA_JOBS", "2")
        .output()
        .unwrap();
    assert!(two.status.success());
    let a = fs::read(dir.path().join("a/tiny.csv")).unwrap();
    let b = fs::read(dir.path().join("b/tiny.csv")).unwrap();
    assert_eq!(a, b);
    for name in ["tiny_timing.csv", "tiny.gp"] {
        assert!(dir.path().join("a").join(name).exists(), "{name}");
    }
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let processing = write(dir.path(), "p.toml", PROCESSING);
    let code = |args: &[&str]| bbdoa(args, dir.path()).status.code().unwrap();

    // configuration
    let bad = write(dir.path(), "bad.toml", "sources = 0\n[array]\nelements = 8\ndesign_hz = 3000.0\n");
    write(dir.path(), "rec.csv", "# channels=8 samples=1 rate=none kind=complex\n");
    assert_eq!(code(&["estimate", "rec.csv", "--config", &bad, "-o", "x.csv"]), 2);
    assert_eq!(code(&["bench", "--preset", "no-such-scenario"]), 2);
    let typo = write(dir.path(), "typo.toml", "sorces = 2\n");
    assert_eq!(code(&["estimate", "rec.csv", "--config", &typo, "-o", "x.csv"]), 2);

    // data
    write(dir.path(), "junk.bin", "not a record at all, definitely not");
    assert_eq!(code(&["estimate", "junk.bin", "--config", &processing, "-o", "x.csv"]), 3);
    assert_eq!(code(&["estimate", "missing.bin", "--config", &processing, "-o", "x.csv"]), 3);
    let scenario = write(dir.path(), "s.toml", &SCENARIO.replace("elements = 8", "elements = 6"));
    bbdoa(&["simulate", "--config", &scenario, "-o", "six.bin"], dir.path());
    assert_eq!(code(&["estimate", "six.bin", "--config", &processing, "-o", "x.csv"]), 3);

    // undefined result
    let flat = fs::read_to_string(configs().join("cable.toml"))
        .unwrap()
        .replace("external_pressure = 1.0", "external_pressure = 0.0");
    let flat = write(dir.path(), "flat.toml", &flat);
    assert_eq!(code(&["cable-sens", "--config", &flat]), 4);
}
