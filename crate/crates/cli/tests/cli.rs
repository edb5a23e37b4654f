use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bosegas")).args(args).arg("--out").arg(out).arg("--quiet").output().unwrap()
}

fn config(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn verify_quick_passes_on_bundled_square() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--quick", "--config", &config("square.toml")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(dir.path().join("verify_report.txt")).unwrap();
    assert_eq!(report.lines().filter(|l| l.starts_with("PASS [")).count(), 12, "{report}");
    assert!(report.ends_with("12/12 checks passed\n"));
}

#[test]
fn delta_f_sweep_is_monotone_and_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["delta-f", "--config", &config("square.toml")], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = dir.path().join("delta_f.csv");
    let rho = csv_column(&csv, "rho");
    let df = csv_column(&csv, "delta_f");
    let scaled = csv_column(&csv, "delta_f_over_rho2");
    assert_eq!(rho, vec![1e-2, 1e-3, 1e-4, 1e-5]);
    assert!(df.windows(2).all(|w| w[1] < w[0]));
    let a = 1.0 - 1f64.tanh();
    let r = csv_column(&csv, "ratio_r")[0];
    let want = 4.0 * std::f64::consts::PI * a * (2.0 - (1.0 - r).powi(2));
    for s in scaled {
        assert!((s - want).abs() <= 1e-8 * want, "{s} vs {want}");
    }
}

#[test]
fn unknown_key_exits_two_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[fock]\nbetaa = [1.0]\n").unwrap();
    let o = run(&["fock", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("betaa"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn invalid_value_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[potential]\nkind = \"square\"\nv0 = -1.0\nr0 = 1.0\n").unwrap();
    let o = run(&["scattering", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn check_failure_exits_one_naming_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    std::fs::write(&cfg, "[tolerances]\nfourier_ratio = 0.5\n").unwrap();
    let o = run(&["scattering", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("fourier_max_ratio"), "{err}");
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap();
    assert!(manifest.contains("\"status\": \"fail\""));
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["scattering", "thermo", "delta-f", "fock", "trial-state", "upper-bound", "bridge"] {
        let (a, b) = (dir.path().join(format!("{cmd}-a")), dir.path().join(format!("{cmd}-b")));
        for d in [&a, &b] {
            assert_eq!(run(&[cmd, "--config", &config("ramp.toml"), "--seed", "7"], d).status.code(), Some(0), "{cmd}");
        }
        for entry in std::fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            if name != "manifest.json" {
                assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{cmd} {name:?}");
            }
        }
    }
    let c = dir.path().join("bridge-c");
    run(&["bridge", "--config", &config("ramp.toml"), "--seed", "8"], &c);
    assert_ne!(std::fs::read(c.join("bridge_corpus.csv")).unwrap(), std::fs::read(dir.path().join("bridge-a/bridge_corpus.csv")).unwrap());
}

#[test]
fn manifest_hashes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["scattering", "--config", &config("table.toml")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "scattering");
    assert_eq!(m["seed"], 2024);
    assert_eq!(m["config"]["potential"]["kind"], "table");
    assert!(m["versions"]["bosegas"].is_string());
    let files = m["files"].as_array().unwrap();
    let mut listed: Vec<String> = Vec::new();
    for f in files {
        let name = f["name"].as_str().unwrap();
        let bytes = std::fs::read(dir.path().join(name)).unwrap();
        let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f["sha256"].as_str().unwrap(), hex, "{name}");
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
        listed.push(name.to_string());
    }
    let mut on_disk: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    listed.sort();
    assert_eq!(listed, on_disk);
}

#[test]
fn csv_uses_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    run(&["scattering", "--config", &config("square.toml")], dir.path());
    let text = std::fs::read_to_string(dir.path().join("scattering_summary.csv")).unwrap();
    let a_line = text.lines().find(|l| l.starts_with("a,")).unwrap();
    let a: f64 = a_line[2..].parse().unwrap();
    assert_eq!(a_line[2..].trim_start_matches("0.").len(), 17, "{a_line}");
    assert!((a - (1.0 - 1f64.tanh())).abs() < 1e-9);
}
