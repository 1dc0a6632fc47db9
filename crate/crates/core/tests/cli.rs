use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrng-ripple"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin(&["frobnicate"], dir.path())), 2);
    assert_eq!(code(&bin(&["extract", "missing.bits"], dir.path())), 2);
    std::fs::write(dir.path().join("bad.toml"), "[suite]\nstream_count = 0\n").unwrap();
    assert_eq!(code(&bin(&["--config", "bad.toml", "config"], dir.path())), 2);
    std::fs::write(dir.path().join("typo.toml"), "[suite]\nstreams = 10\n").unwrap();
    assert_eq!(code(&bin(&["--config", "typo.toml", "config"], dir.path())), 2);
}

#[test]
fn config_prints_effective_toml() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[toeplitz]\nm = 512\n").unwrap();
    let o = bin(&["--config", "c.toml", "--seed", "9", "--quick", "config"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("master_seed = 9"));
    assert!(text.contains("m = 512"));
    assert!(text.contains("total_bits = 1000000"));
}

#[test]
fn attacked_raw_fails_nist_and_extraction_hides_it() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| bin(args, dir.path());
    assert_eq!(code(&run(&["--quick", "--out", "sim", "simulate"])), 0);
    let raw = run(&["--quick", "--out", "raw", "nist", "sim/raw.bits"]);
    assert_eq!(code(&raw), 1);
    assert!(String::from_utf8_lossy(&raw.stdout).contains("Failure"));
    assert_eq!(code(&run(&["--quick", "--out", "ext", "extract", "sim/raw.bits"])), 0);
    let fin = run(&["--quick", "--out", "fin", "nist", "ext/final.bits"]);
    assert_eq!(code(&fin), 0, "{}", String::from_utf8_lossy(&fin.stdout));
    let replay = run(&["--out", "again", "replay", "ext/extract.manifest.json"]);
    assert_eq!(code(&replay), 0, "{}", String::from_utf8_lossy(&replay.stderr));
}

#[test]
fn sweep_accepts_custom_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(
        &["--quick", "--out", "s", "sweep", "--amplitudes-mvpp", "0,700", "--repeats", "1"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let tsv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(tsv.lines().count(), 3);
    assert!(tsv.starts_with("amplitude_vpp_mv"));
}
