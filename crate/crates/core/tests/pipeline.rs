use qrng_ripple::bits::{BitFormat, BitStream};
use qrng_ripple::extractor::{build_toeplitz, discarded_bits, extract_stream, SeedSource};
use qrng_ripple::pipeline::config::{ExperimentConfig, FULL_SCALE_BITS};
use qrng_ripple::pipeline::manifest::RunManifest;
use qrng_ripple::pipeline::{cmd_extract, cmd_nist, cmd_reproduce, cmd_simulate, replay};

fn quick_in(dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default().quick();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

#[test]
fn full_scale_extraction_length() {
    let spec = build_toeplitz(1024, 2048, SeedSource::Integer(1)).unwrap();
    let raw = BitStream::zeros(FULL_SCALE_BITS);
    assert_eq!(discarded_bits(&spec, raw.len()), 1792);
    let out = extract_stream(&spec, &raw).unwrap();
    assert_eq!(out.len(), 3_076_096);
    let (streams, rest) = out.split_streams(10);
    assert_eq!(streams[0].len(), 307_609);
    assert_eq!(rest, 6);
}

#[test]
fn simulate_replays_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_in(&dir.path().join("run"));
    let (raw, m) = cmd_simulate(&cfg, false).unwrap();
    assert_eq!(raw.len(), 1_000_000);
    assert!(m.seeds.contains_key("source/attacked"));
    let manifest_path = cfg.output_dir.join(m.file_name());
    let read = RunManifest::read(&manifest_path).unwrap();
    assert_eq!(read.artifacts, m.artifacts);
    let matched = replay(&manifest_path, &dir.path().join("again")).unwrap();
    assert_eq!(matched, vec!["raw.bits".to_string()]);
}

#[test]
fn seeds_separate_legs_and_masters() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick_in(dir.path());
    cfg.total_bits = 20_000;
    let (a, _) = cmd_simulate(&cfg, false).unwrap();
    let (b, _) = cmd_simulate(&cfg, true).unwrap();
    cfg.master_seed += 1;
    let (c, _) = cmd_simulate(&cfg, false).unwrap();
    assert_ne!(a, b);
    assert_ne!(a, c);
}

#[test]
fn constant_input_warns_and_discards_are_counted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_in(dir.path());
    let input = dir.path().join("zeros.bits");
    BitStream::zeros(10_000).save(&input, BitFormat::Ascii).unwrap();
    let (out, m) = cmd_extract(&cfg, &input).unwrap();
    assert_eq!(out.len(), 4 * 1024);
    assert!(out.is_constant());
    assert_eq!(m.discarded_bits["extractor_tail"], 10_000 - 4 * 2048);
    assert_eq!(m.warnings.len(), 1);
    assert!(m.warnings[0].contains("constant"));
}

#[test]
fn nist_records_split_remainder() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick_in(dir.path());
    cfg.suite.stream_count = 3;
    let (raw, _) = cmd_simulate(&cfg, true).unwrap();
    let (rep, m) = cmd_nist(&cfg, &cfg.output_dir.join("raw.bits")).unwrap();
    assert_eq!(rep.stream_count, 3);
    assert_eq!(m.discarded_bits["stream_split"], raw.len() % 3);
    for name in ["nist-report.json", "nist-report.jsonl", "nist-report.txt"] {
        assert!(cfg.output_dir.join(name).exists(), "{name}");
    }
}

#[test]
fn nist_rejects_changed_input_on_replay() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick_in(dir.path());
    cfg.total_bits = 40_000;
    cfg.suite.stream_count = 1;
    cmd_simulate(&cfg, true).unwrap();
    let input = cfg.output_dir.join("raw.bits");
    let (_, m) = cmd_nist(&cfg, &input).unwrap();
    let manifest_path = cfg.output_dir.join(m.file_name());
    BitStream::zeros(40_000).save(&input, BitFormat::Ascii).unwrap();
    assert!(replay(&manifest_path, &dir.path().join("replay")).is_err());
}

#[test]
fn quick_reproduce_accounts_for_every_bit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_in(dir.path());
    let out = cmd_reproduce(&cfg).unwrap();
    let m = &out.manifest;
    for leg in ["baseline", "attacked"] {
        assert_eq!(m.discarded_bits[&format!("{leg}/extractor_tail")], 1_000_000 % 2048);
        assert_eq!(m.discarded_bits[&format!("{leg}/raw_stream_split")], 0);
        // 488 blocks of 1024 bits split ten ways.
        assert_eq!(m.discarded_bits[&format!("{leg}/final_stream_split")], 499_712 % 10);
    }
    assert!(out.pattern.attacked_raw_failure);
    assert_eq!(out.sweep.len(), 9);
    assert_eq!(m.artifacts.len(), 7);
    let replayed = replay(&cfg.output_dir.join(m.file_name()), &dir.path().join("replay")).unwrap();
    assert_eq!(replayed.len(), 7);
}

#[test]
fn phase_reproduce_skips_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::phase_default().quick();
    cfg.output_dir = dir.path().to_path_buf();
    let out = cmd_reproduce(&cfg).unwrap();
    assert!(out.sweep.is_empty());
    assert_eq!(out.pattern.peak_rho_ok, None);
    assert!(out.pattern.attacked_raw_failure);
    assert!(!cfg.output_dir.join("sweep.tsv").exists());
    assert!(out.text.contains("not measured"));
}
