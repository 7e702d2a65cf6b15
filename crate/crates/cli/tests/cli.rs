use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
nx = 32
ny = 32
h = 10.0
f_hz = 8.0
layers = 2
cells = 2
repetitions = 1
sources = [[16, 8]]

[model]
kind = "rough-layered"
seed = 3
"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> (i32, String) {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ptrace"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

/// Report columns that do not hold wall times.
fn numeric_columns(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let values: Vec<&str> = lines.next().unwrap().split(',').collect();
    header.iter().zip(values).filter(|(h, _)| !h.ends_with("_s")).map(|(h, v)| format!("{h}={v}")).collect()
}

#[test]
fn solve_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), CONFIG, &["solve"]);
    assert_eq!(code, 0, "{err}");
    let out = dir.path().join("out");
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("nx,ny,npml,layers,cells,strategy,"));
    let field = std::fs::read(out.join("field.helm-u")).unwrap();
    let header = b"HELM-U v1 32 32\n";
    assert_eq!(&field[..header.len()], header);
    assert_eq!(field.len() - header.len(), 32 * 32 * 16);
    assert!(out.join("field.pgm").is_file());
}

#[test]
fn missing_model_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CONFIG.replace("kind = \"rough-layered\"\nseed = 3", "file = \"/does/not/exist.helm-m\"");
    let (code, err) = run(dir.path(), &cfg, &["solve"]);
    assert_eq!(code, 2);
    assert!(err.contains("not found"), "{err}");
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), "nx = \"wide\"", &["solve"]).0, 2);
    assert_eq!(run(dir.path(), &CONFIG.replace("layers = 2", "layers = 9"), &["solve"]).0, 2);
}

#[test]
fn stalled_solve_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CONFIG.replace("layers = 2", "layers = 4\nmaxit = 1\ntol = 1e-13");
    let (code, err) = run(dir.path(), &cfg, &["solve"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path(), CONFIG, &["solve", "--seed", "11", "--threads", "1"]).0, 0);
    assert_eq!(run(b.path(), CONFIG, &["solve", "--seed", "11", "--threads", "3"]).0, 0);
    let (ra, rb) = (a.path().join("out/report.csv"), b.path().join("out/report.csv"));
    assert_eq!(numeric_columns(&ra), numeric_columns(&rb));
    let fa = std::fs::read(a.path().join("out/field.helm-u")).unwrap();
    let fb = std::fs::read(b.path().join("out/field.helm-u")).unwrap();
    assert_eq!(fa, fb);
}

#[test]
fn seed_changes_the_model() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path(), CONFIG, &["solve", "--seed", "1"]).0, 0);
    assert_eq!(run(b.path(), CONFIG, &["solve", "--seed", "2"]).0, 0);
    let fa = std::fs::read(a.path().join("out/field.helm-u")).unwrap();
    let fb = std::fs::read(b.path().join("out/field.helm-u")).unwrap();
    assert_ne!(fa, fb);
}

#[test]
fn snapshots_end_with_the_converged_field() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), CONFIG, &["snapshots"]);
    assert_eq!(code, 0, "{err}");
    let out = dir.path().join("out");
    assert!(out.join("snapshot_000.helm-u").is_file());
    assert!(out.join("snapshot_final.pgm").is_file());
    assert_eq!(run(dir.path(), CONFIG, &["solve"]).0, 0);
    assert_eq!(
        std::fs::read(out.join("snapshot_final.helm-u")).unwrap(),
        std::fs::read(out.join("field.helm-u")).unwrap()
    );
}

#[test]
fn study_writes_rows_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), CONFIG, &["study", "--sizes", "16,32", "--partitions", "2x1,2x2"]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(dir.path().join("out/study.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert_eq!(lines.iter().filter(|l| l.starts_with("slope,")).count(), 2);
}

#[test]
fn bad_partition_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), CONFIG, &["study", "--partitions", "2by2"]).0, 2);
}
