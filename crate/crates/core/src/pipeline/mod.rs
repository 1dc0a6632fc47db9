//! End-to-end experiments: simulate, sweep, extract, test, reproduce.
//!
//! Library entry points return in-memory results and also write their
//! artifacts plus a `<command>.manifest.json` into `output_dir`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::bits::{BitStream, BitsError};
use crate::extractor::{build_toeplitz, discarded_bits, extract_stream, ExtractorError, SeedSource, ToeplitzSpec};
use crate::seeds::derive_seed;
use crate::signal::{digitize, sweep_correlation, SignalError, SweepPoint};
use crate::source::{generate_ase_trace, generate_phase_trace, AttackProfile, SourceError};
use crate::sts::{run_full_suite, RowVerdict, StsError, SuiteReport, Verdict};

pub mod config;
pub mod manifest;
pub mod report;

pub use config::{ExperimentConfig, SourceConfig};
pub use manifest::{Artifact, CommandRecord, RunManifest};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Extractor(#[from] ExtractorError),
    #[error(transparent)]
    Sts(#[from] StsError),
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error("config parse error: {0}")]
    TomlParse(#[from] toml::de::Error),
    #[error("config write error: {0}")]
    TomlWrite(#[from] toml::ser::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("leg {leg}: {source}")]
    Leg {
        leg: String,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("replay mismatch: {0}")]
    Replay(String),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn in_leg(self, leg: &str) -> Self {
        PipelineError::Leg {
            leg: leg.to_string(),
            source: Box::new(self),
        }
    }
}

/// Peak-to-peak millivolts of a peak amplitude in volts.
pub fn amplitude_vpp_mv(amplitude_v: f64) -> f64 {
    (amplitude_v * 2000.0 * 1e6).round() / 1e6
}

fn ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))
}

fn bit_file_bytes(bits: &BitStream) -> Vec<u8> {
    let mut buf = Vec::with_capacity(bits.as_bytes().len() + 16);
    bits.write_binary(&mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn source_seed_label(baseline: bool) -> &'static str {
    if baseline {
        "source/baseline"
    } else {
        "source/attacked"
    }
}

/// Raw bits of one acquisition: trace, DC removal, zero-crossing binarisation.
///
/// `baseline` turns the attack off. Returns the bits and the source seed used.
pub fn simulate_raw(cfg: &ExperimentConfig, baseline: bool) -> Result<(BitStream, u64), PipelineError> {
    let seed = derive_seed(cfg.master_seed, source_seed_label(baseline));
    let attack = if baseline {
        AttackProfile::off()
    } else {
        cfg.attack.clone()
    };
    let trace = match cfg.source.with_seed(seed) {
        SourceConfig::Ase(c) => generate_ase_trace(&c, &attack, cfg.total_bits)?,
        SourceConfig::Phase(c) => generate_phase_trace(&c, &attack, cfg.total_bits)?,
    };
    Ok((digitize(&trace), seed))
}

/// The configured extractor and its integer seed (when not file-backed).
pub fn toeplitz_for(cfg: &ExperimentConfig) -> Result<(ToeplitzSpec, Option<u64>), PipelineError> {
    let t = &cfg.toeplitz;
    let (source, seed) = match &t.seed_file {
        Some(path) => (SeedSource::File(path.clone()), None),
        None => {
            let s = derive_seed(cfg.master_seed, "toeplitz");
            (SeedSource::Integer(s), Some(s))
        }
    };
    Ok((build_toeplitz(t.m, t.n, source)?, seed))
}

/// Splits `bits` into the configured number of streams and runs the battery.
/// Returns the report and the split remainder.
pub fn run_suite_on(cfg: &ExperimentConfig, bits: &BitStream) -> Result<(SuiteReport, usize), PipelineError> {
    let (streams, remainder) = bits.split_streams(cfg.suite.stream_count);
    let params = cfg.suite.params_for(streams[0].len());
    let report = run_full_suite(&streams, &params, cfg.suite.alpha)?;
    Ok((report, remainder))
}

fn warn_if_constant(bits: &BitStream, manifest: &mut RunManifest) {
    if bits.is_constant() {
        let msg = format!(
            "raw input of {} bits is constant; the extractor output carries no randomness",
            bits.len()
        );
        log::warn!("{msg}");
        manifest.warnings.push(msg);
    }
}

/// Simulates one raw acquisition and writes `raw.bits`.
pub fn cmd_simulate(cfg: &ExperimentConfig, baseline: bool) -> Result<(BitStream, RunManifest), PipelineError> {
    cfg.validate()?;
    ensure_dir(&cfg.output_dir)?;
    let mut m = RunManifest::new(CommandRecord::Simulate { baseline }, cfg);
    let t = Instant::now();
    let (raw, seed) = simulate_raw(cfg, baseline)?;
    m.timing_ms.insert("simulate".into(), ms(t));
    m.seeds.insert(source_seed_label(baseline).into(), seed);
    m.artifacts.push(manifest::write_artifact(
        &cfg.output_dir,
        "raw.bits",
        &bit_file_bytes(&raw),
        Some(raw.len()),
    )?);
    m.write(&cfg.output_dir)?;
    Ok((raw, m))
}

/// Correlation sweep over `cfg.sweep.amplitudes`; writes `sweep.tsv` and `sweep.jsonl`.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(Vec<SweepPoint>, RunManifest), PipelineError> {
    cfg.validate()?;
    ensure_dir(&cfg.output_dir)?;
    let mut m = RunManifest::new(CommandRecord::Sweep, cfg);
    let t = Instant::now();
    let (points, seed) = sweep_points(cfg)?;
    m.timing_ms.insert("sweep".into(), ms(t));
    m.seeds.insert("sweep".into(), seed);
    let mut jsonl = String::new();
    report::push_sweep_records(&mut jsonl, &points);
    m.artifacts.push(manifest::write_artifact(
        &cfg.output_dir,
        "sweep.tsv",
        report::sweep_tsv(&points).as_bytes(),
        None,
    )?);
    m.artifacts.push(manifest::write_artifact(&cfg.output_dir, "sweep.jsonl", jsonl.as_bytes(), None)?);
    record_peak(&mut m, &points);
    m.write(&cfg.output_dir)?;
    Ok((points, m))
}

fn sweep_points(cfg: &ExperimentConfig) -> Result<(Vec<SweepPoint>, u64), PipelineError> {
    let SourceConfig::Ase(ase) = &cfg.source else {
        return Err(PipelineError::Config("the correlation sweep needs an ASE source".into()));
    };
    let seed = derive_seed(cfg.master_seed, "sweep");
    let mut ase = ase.clone();
    ase.seed = seed;
    let points = sweep_correlation(&ase, &cfg.sweep.amplitudes, &cfg.attack, cfg.sweep.bits, cfg.sweep.repeats)?;
    Ok((points, seed))
}

/// Highest mean correlation and its position in the sweep.
pub fn peak(points: &[SweepPoint]) -> Option<(usize, &SweepPoint)> {
    points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.mean_rho.total_cmp(&b.1.mean_rho))
}

fn record_peak(m: &mut RunManifest, points: &[SweepPoint]) {
    if let Some((_, p)) = peak(points) {
        m.verdicts.peak_mean_rho = Some(p.mean_rho);
        m.verdicts.peak_amplitude_vpp_mv = Some(amplitude_vpp_mv(p.amplitude));
    }
}

/// Toeplitz-extracts the bit file at `input` into `output_dir/final.bits`.
pub fn cmd_extract(cfg: &ExperimentConfig, input: &Path) -> Result<(BitStream, RunManifest), PipelineError> {
    cfg.validate()?;
    ensure_dir(&cfg.output_dir)?;
    let input_sha256 = manifest::file_sha256(input)?;
    let raw = BitStream::load(input)?;
    let mut m = RunManifest::new(
        CommandRecord::Extract {
            input: input.to_path_buf(),
            input_sha256,
        },
        cfg,
    );
    warn_if_constant(&raw, &mut m);
    let t = Instant::now();
    let (spec, seed) = toeplitz_for(cfg)?;
    let out = extract_stream(&spec, &raw)?;
    m.timing_ms.insert("extract".into(), ms(t));
    if let Some(s) = seed {
        m.seeds.insert("toeplitz".into(), s);
    }
    m.discarded_bits
        .insert("extractor_tail".into(), discarded_bits(&spec, raw.len()));
    m.artifacts.push(manifest::write_artifact(
        &cfg.output_dir,
        "final.bits",
        &bit_file_bytes(&out),
        Some(out.len()),
    )?);
    m.write(&cfg.output_dir)?;
    Ok((out, m))
}

/// Runs the battery on the bit file at `input`; writes `nist-report.{json,jsonl,txt}`.
pub fn cmd_nist(cfg: &ExperimentConfig, input: &Path) -> Result<(SuiteReport, RunManifest), PipelineError> {
    cfg.validate()?;
    ensure_dir(&cfg.output_dir)?;
    let input_sha256 = manifest::file_sha256(input)?;
    let bits = BitStream::load(input)?;
    let mut m = RunManifest::new(
        CommandRecord::Nist {
            input: input.to_path_buf(),
            input_sha256,
        },
        cfg,
    );
    let t = Instant::now();
    let (rep, remainder) = run_suite_on(cfg, &bits)?;
    m.timing_ms.insert("nist".into(), ms(t));
    m.discarded_bits.insert("stream_split".into(), remainder);
    let name = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into());
    let mut jsonl = String::new();
    report::push_suite_records(&mut jsonl, &name, &rep);
    let table = report::suite_table(&format!("SP 800-22 results: {name}"), &[(name.as_str(), &rep)]);
    let dir = &cfg.output_dir;
    m.artifacts.push(manifest::write_artifact(
        dir,
        "nist-report.json",
        (serde_json::to_string(&rep)? + "\n").as_bytes(),
        None,
    )?);
    m.artifacts.push(manifest::write_artifact(dir, "nist-report.jsonl", jsonl.as_bytes(), None)?);
    m.artifacts.push(manifest::write_artifact(dir, "nist-report.txt", table.as_bytes(), None)?);
    m.verdicts
        .suites
        .insert(name, report::verdict_label(rep.overall).into());
    m.write(dir)?;
    Ok((rep, m))
}

/// One source setting carried through raw testing and extraction.
#[derive(Debug, Clone)]
pub struct LegPair {
    pub raw_bits: BitStream,
    pub final_bits: BitStream,
    pub raw: SuiteReport,
    pub extracted: SuiteReport,
    pub source_seed: u64,
    pub split_remainder_raw: usize,
    pub split_remainder_final: usize,
    pub timing_ms: [u64; 3],
}

/// Simulate, test raw, extract, test final.
pub fn run_leg_pair(cfg: &ExperimentConfig, spec: &ToeplitzSpec, baseline: bool) -> Result<LegPair, PipelineError> {
    let t = Instant::now();
    let (raw_bits, source_seed) = simulate_raw(cfg, baseline)?;
    let t_sim = ms(t);
    let t = Instant::now();
    let (raw, split_remainder_raw) = run_suite_on(cfg, &raw_bits)?;
    let final_bits = extract_stream(spec, &raw_bits)?;
    let (extracted, split_remainder_final) = run_suite_on(cfg, &final_bits)?;
    let t_suite = ms(t);
    Ok(LegPair {
        raw_bits,
        final_bits,
        raw,
        extracted,
        source_seed,
        split_remainder_raw,
        split_remainder_final,
        timing_ms: [t_sim, t_suite, 0],
    })
}

/// The headline checks of the reproduction.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternCheck {
    pub attacked_raw_failure: bool,
    /// Every row of the attacked raw report is Failed or not applicable.
    pub attacked_raw_all_fail: bool,
    pub attacked_extracted_success: bool,
    pub baseline_extracted_success: bool,
    /// `None` when no sweep was run (phase source).
    pub peak_mean_rho: Option<f64>,
    pub peak_rho_ok: Option<bool>,
}

impl PatternCheck {
    pub fn reproduced(&self) -> bool {
        self.attacked_raw_failure
            && self.attacked_extracted_success
            && self.baseline_extracted_success
            && self.peak_rho_ok.unwrap_or(true)
    }
}

/// Minimum peak correlation the reproduction expects from the sweep.
pub const MIN_PEAK_RHO: f64 = 0.85;

#[derive(Debug, Clone)]
pub struct ReproduceOutcome {
    pub baseline: LegPair,
    pub attacked: LegPair,
    pub sweep: Vec<SweepPoint>,
    pub pattern: PatternCheck,
    /// The text report, byte-identical for equal configs.
    pub text: String,
    pub jsonl: String,
    pub manifest: RunManifest,
}

pub fn check_pattern(baseline: &LegPair, attacked: &LegPair, sweep: &[SweepPoint]) -> PatternCheck {
    let peak_mean_rho = peak(sweep).map(|(_, p)| p.mean_rho);
    PatternCheck {
        attacked_raw_failure: attacked.raw.overall == Verdict::Failure,
        attacked_raw_all_fail: attacked
            .raw
            .summaries
            .iter()
            .all(|s| s.verdict != RowVerdict::Passed),
        attacked_extracted_success: attacked.extracted.overall == Verdict::Success,
        baseline_extracted_success: baseline.extracted.overall == Verdict::Success,
        peak_mean_rho,
        peak_rho_ok: peak_mean_rho.map(|r| r >= MIN_PEAK_RHO),
    }
}

/// Runs all four legs ({baseline, attacked} x {raw, extracted}) and, for the
/// ASE source, the correlation sweep, writing the consolidated report.
pub fn cmd_reproduce(cfg: &ExperimentConfig) -> Result<ReproduceOutcome, PipelineError> {
    cfg.validate()?;
    ensure_dir(&cfg.output_dir)?;
    let mut m = RunManifest::new(CommandRecord::Reproduce, cfg);
    let (spec, toeplitz_seed) = toeplitz_for(cfg)?;
    let t = Instant::now();
    let ((baseline, attacked), sweep) = rayon::join(
        || {
            rayon::join(
                || run_leg_pair(cfg, &spec, true).map_err(|e| e.in_leg("baseline")),
                || run_leg_pair(cfg, &spec, false).map_err(|e| e.in_leg("attacked")),
            )
        },
        || match cfg.source {
            SourceConfig::Ase(_) => sweep_points(cfg).map(Some).map_err(|e| e.in_leg("sweep")),
            SourceConfig::Phase(_) => Ok(None),
        },
    );
    let (baseline, attacked) = (baseline?, attacked?);
    let (sweep, sweep_seed) = sweep?.unzip();
    let sweep = sweep.unwrap_or_default();
    m.timing_ms.insert("total".into(), ms(t));
    for (name, leg) in [("baseline", &baseline), ("attacked", &attacked)] {
        m.timing_ms.insert(format!("{name}/simulate"), leg.timing_ms[0]);
        m.timing_ms.insert(format!("{name}/suites"), leg.timing_ms[1]);
        m.seeds.insert(source_seed_label(name == "baseline").into(), leg.source_seed);
        m.discarded_bits
            .insert(format!("{name}/extractor_tail"), discarded_bits(&spec, leg.raw_bits.len()));
        m.discarded_bits
            .insert(format!("{name}/raw_stream_split"), leg.split_remainder_raw);
        m.discarded_bits
            .insert(format!("{name}/final_stream_split"), leg.split_remainder_final);
    }
    if let Some(s) = toeplitz_seed {
        m.seeds.insert("toeplitz".into(), s);
    }
    if let Some(s) = sweep_seed {
        m.seeds.insert("sweep".into(), s);
    }

    let pattern = check_pattern(&baseline, &attacked, &sweep);
    let text = render_reproduce_text(cfg, &baseline, &attacked, &sweep, &pattern);
    let jsonl = render_reproduce_jsonl(&baseline, &attacked, &sweep, &pattern);

    let dir = &cfg.output_dir;
    for (name, bits) in [
        ("baseline_raw.bits", &baseline.raw_bits),
        ("attacked_raw.bits", &attacked.raw_bits),
        ("baseline_final.bits", &baseline.final_bits),
        ("attacked_final.bits", &attacked.final_bits),
    ] {
        m.artifacts.push(manifest::write_artifact(dir, name, &bit_file_bytes(bits), Some(bits.len()))?);
    }
    if !sweep.is_empty() {
        m.artifacts.push(manifest::write_artifact(dir, "sweep.tsv", report::sweep_tsv(&sweep).as_bytes(), None)?);
    }
    m.artifacts.push(manifest::write_artifact(dir, "reproduce.txt", text.as_bytes(), None)?);
    m.artifacts.push(manifest::write_artifact(dir, "reproduce.jsonl", jsonl.as_bytes(), None)?);
    for (leg, r) in [
        ("baseline-raw", &baseline.raw),
        ("attacked-raw", &attacked.raw),
        ("baseline-extracted", &baseline.extracted),
        ("attacked-extracted", &attacked.extracted),
    ] {
        m.verdicts.suites.insert(leg.into(), report::verdict_label(r.overall).into());
    }
    record_peak(&mut m, &sweep);
    m.verdicts.pattern_reproduced = Some(pattern.reproduced());
    m.write(dir)?;
    Ok(ReproduceOutcome {
        baseline,
        attacked,
        sweep,
        pattern,
        text,
        jsonl,
        manifest: m,
    })
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "NO"
    }
}

fn render_reproduce_text(
    cfg: &ExperimentConfig,
    baseline: &LegPair,
    attacked: &LegPair,
    sweep: &[SweepPoint],
    pattern: &PatternCheck,
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Ripple-attack concealment reproduction (master seed {}, {} raw bits, {} streams)\n",
        cfg.master_seed, cfg.total_bits, cfg.suite.stream_count
    );
    out.push_str(&report::suite_table(
        "Raw sequences",
        &[("Baseline", &baseline.raw), ("Ripple-Attack", &attacked.raw)],
    ));
    out.push('\n');
    out.push_str(&report::suite_table(
        &format!(
            "Final sequences ({}x{} Toeplitz extraction)",
            cfg.toeplitz.m, cfg.toeplitz.n
        ),
        &[("Baseline", &baseline.extracted), ("Ripple-Attack", &attacked.extracted)],
    ));
    if !sweep.is_empty() {
        out.push_str("\nCorrelation sweep (mean of repeats)\n");
        for p in sweep {
            let _ = writeln!(out, "{:>6.0} mVpp  rho = {:.4}", amplitude_vpp_mv(p.amplitude), p.mean_rho);
        }
    }
    let _ = writeln!(out, "\nattacked raw overall Failure:        {}", yes_no(pattern.attacked_raw_failure));
    let _ = writeln!(out, "attacked raw fails every applicable: {}", yes_no(pattern.attacked_raw_all_fail));
    let _ = writeln!(out, "attacked extracted overall Success:  {}", yes_no(pattern.attacked_extracted_success));
    let _ = writeln!(out, "baseline extracted overall Success:  {}", yes_no(pattern.baseline_extracted_success));
    match (pattern.peak_mean_rho, pattern.peak_rho_ok) {
        (Some(rho), Some(ok)) => {
            let _ = writeln!(out, "peak mean rho {rho:.4} >= {MIN_PEAK_RHO}:       {}", yes_no(ok));
        }
        _ => out.push_str("peak mean rho:                       not measured\n"),
    }
    let _ = writeln!(out, "pattern reproduced:                  {}", yes_no(pattern.reproduced()));
    out
}

#[derive(serde::Serialize)]
struct PatternRecord {
    record: &'static str,
    attacked_raw_failure: bool,
    attacked_raw_all_fail: bool,
    attacked_extracted_success: bool,
    baseline_extracted_success: bool,
    peak_mean_rho: Option<f64>,
    reproduced: bool,
}

fn render_reproduce_jsonl(
    baseline: &LegPair,
    attacked: &LegPair,
    sweep: &[SweepPoint],
    pattern: &PatternCheck,
) -> String {
    let mut out = String::new();
    report::push_suite_records(&mut out, "baseline-raw", &baseline.raw);
    report::push_suite_records(&mut out, "attacked-raw", &attacked.raw);
    report::push_suite_records(&mut out, "baseline-extracted", &baseline.extracted);
    report::push_suite_records(&mut out, "attacked-extracted", &attacked.extracted);
    report::push_sweep_records(&mut out, sweep);
    report::push_json(
        &mut out,
        &PatternRecord {
            record: "pattern",
            attacked_raw_failure: pattern.attacked_raw_failure,
            attacked_raw_all_fail: pattern.attacked_raw_all_fail,
            attacked_extracted_success: pattern.attacked_extracted_success,
            baseline_extracted_success: pattern.baseline_extracted_success,
            peak_mean_rho: pattern.peak_mean_rho,
            reproduced: pattern.reproduced(),
        },
    );
    out
}

/// Re-runs the command recorded in `manifest_path` into `into_dir` and
/// compares every artifact digest. Returns the names that matched.
pub fn replay(manifest_path: &Path, into_dir: &Path) -> Result<Vec<String>, PipelineError> {
    let recorded = RunManifest::read(manifest_path)?;
    let mut cfg = recorded.config.clone();
    cfg.output_dir = into_dir.to_path_buf();
    let fresh = match &recorded.command {
        CommandRecord::Simulate { baseline } => cmd_simulate(&cfg, *baseline)?.1,
        CommandRecord::Sweep => cmd_sweep(&cfg)?.1,
        CommandRecord::Reproduce => cmd_reproduce(&cfg)?.manifest,
        CommandRecord::Extract { input, input_sha256 } | CommandRecord::Nist { input, input_sha256 } => {
            let actual = manifest::file_sha256(input)?;
            if &actual != input_sha256 {
                return Err(PipelineError::Replay(format!(
                    "input {} changed since the run",
                    input.display()
                )));
            }
            if matches!(recorded.command, CommandRecord::Extract { .. }) {
                cmd_extract(&cfg, input)?.1
            } else {
                cmd_nist(&cfg, input)?.1
            }
        }
    };
    let mut matched = Vec::new();
    for a in &recorded.artifacts {
        match fresh.artifact(&a.name) {
            Some(b) if b.sha256 == a.sha256 => matched.push(a.name.clone()),
            Some(_) => return Err(PipelineError::Replay(format!("{} digest differs", a.name))),
            None => return Err(PipelineError::Replay(format!("{} was not produced", a.name))),
        }
    }
    Ok(matched)
}
