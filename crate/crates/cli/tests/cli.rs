use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modspace"))
}

fn studies_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../studies")
}

fn bundled() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(studies_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json") && p.file_name().unwrap() != "schema.json")
        .collect();
    v.sort();
    v
}

fn run(config: &Path, out: &Path, threads: usize) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let s = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(s.trim()).unwrap_or_else(|_| panic!("stderr is not json: {s}"))
}

#[test]
fn bundled_studies_are_deterministic() {
    let configs = bundled();
    assert_eq!(configs.len(), 10);
    for cfg in configs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run(&cfg, a.path(), 1);
        let rb = run(&cfg, b.path(), 4);
        assert!(ra.status.success(), "{}: {}", cfg.display(), String::from_utf8_lossy(&ra.stderr));
        assert!(rb.status.success(), "{}: {}", cfg.display(), String::from_utf8_lossy(&rb.stderr));
        let pa = PathBuf::from(String::from_utf8(ra.stdout).unwrap().trim());
        let pb = PathBuf::from(String::from_utf8(rb.stdout).unwrap().trim());
        let (ba, bb) = (fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
        assert!(!ba.is_empty());
        assert_eq!(ba, bb, "{} differs between runs", cfg.display());
        assert!(String::from_utf8(ba).unwrap().starts_with("# anchor: "));
    }
}

#[test]
fn gaussian_stft_value_at_origin() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&studies_dir().join("stft-gaussian.json"), dir.path(), 1);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("stft-gaussian.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("0.000000000000000e0,0.000000000000000e0,")).unwrap();
    let abs: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    let expected = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    assert!((abs - expected).abs() < 1e-6, "{abs}");
}

#[test]
fn young_hypothesis_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"kind":"young","p":["1","2"],"r":["2","2"],"periodic":[false,false],"batches":1,"m":2,"half_width":2}"#,
    );
    let out = run(&cfg, dir.path(), 1);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("young.csv").exists());
}

#[test]
fn empty_corpus_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "empty.json",
        r#"{"kind":"coeffs","corpus":{"standard":false},"exponents":["2"]}"#,
    );
    let out = run(&cfg, dir.path(), 1);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert!(err["message"].as_str().unwrap().contains("empty corpus"), "{err}");
}

#[test]
fn validate_accepts_bundled_configs() {
    for cfg in bundled() {
        let out = bin().arg("validate").arg(&cfg).output().unwrap();
        assert!(out.status.success(), "{}: {}", cfg.display(), String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: "));
    }
}

#[test]
fn unknown_weight_form_reports_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "w.json",
        r#"{"kind":"coeffs","corpus":{"standard":true},"exponents":["inf"],"weight":{"form":"cubic","params":[1.0],"dim":1}}"#,
    );
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "config");
    assert!(err["pointer"].as_str().unwrap().starts_with("/weight"), "{err}");
}

#[test]
fn unknown_kind_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.json", r#"{"kind":"nonsense"}"#);
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().arg("validate").arg(dir.path().join("absent.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn truncated_phase_grid_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(studies_dir().join("modnorm-corpus.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["grid"]["ranges"] = serde_json::json!([[-1, 0], [-1, 0]]);
    let cfg = write_config(dir.path(), "small.json", &v.to_string());
    let out = run(&cfg, dir.path(), 1);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
