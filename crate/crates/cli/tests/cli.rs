use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cantorspec(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cantorspec"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn validate_warns_about_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let o = cantorspec(&["validate"], &configs().join("mixed.conf"), dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("atomless=false"));
    let v = read_json(&dir.path().join("validate.json"));
    assert_eq!(v["data"]["atomless"], false);
    assert_eq!(v["data"]["aperiodic"], true);
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["config_sha256"], v["config_sha256"]);
}

#[test]
fn free_spectrum_is_one_band() {
    let dir = tempfile::tempdir().unwrap();
    let o = cantorspec(&["spectrum"], &configs().join("free.conf"), dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bands = fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    let rows: Vec<&str> = bands.lines().skip(2).collect();
    assert_eq!(rows.len(), 1, "{bands}");
    let cols: Vec<f64> = rows[0].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(cols[1], 0.0);
    assert_eq!(cols[2], 10.0);
    let gamma = fs::read_to_string(dir.path().join("gamma_bands.csv")).unwrap();
    assert_eq!(gamma.lines().skip(2).count(), 1, "{gamma}");
}

#[test]
fn report_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("mixed.conf");
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let o = cantorspec(&["report", "--seed", "11", "--threads", threads], &cfg, dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest = read_json(&a.path().join("manifest.json"));
    let files: Vec<String> =
        manifest["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap().to_string()).collect();
    assert!(files.iter().any(|f| f == "report.json"));
    for f in &files {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
        if f.ends_with(".csv") || f.ends_with(".dat") {
            let hash = manifest["config_sha256"].as_str().unwrap();
            assert!(String::from_utf8(x).unwrap().starts_with(&format!("# manifest {hash}")));
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "version = 1\n[model]\nperiodic = a\n[piece a]\nlength = 1\nmass 3\n").unwrap();
    let o = cantorspec(&["validate"], &bad, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 6"));

    let missing = dir.path().join("nope.conf");
    assert_eq!(cantorspec(&["validate"], &missing, dir.path()).status.code(), Some(2));
}
