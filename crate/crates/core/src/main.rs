use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qrng_ripple::pipeline::{self, report, ExperimentConfig, PipelineError};
use qrng_ripple::sts::Verdict;

/// Ripple-attack simulation, Toeplitz extraction and SP 800-22 testing.
///
/// Exit status: 0 when the expected pattern is reproduced (or the command
/// succeeded), 1 when it is violated, 2 on usage or I/O errors.
#[derive(Parser)]
#[command(name = "qrng-ripple", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed; every stage seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML config layered over the calibrated defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// 10^6-bit raw acquisitions instead of full scale.
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one raw acquisition and write raw.bits.
    Simulate {
        /// Leave the ripple off.
        #[arg(long)]
        baseline: bool,
    },
    /// Correlation of output bits with the ripple across amplitudes.
    Sweep {
        /// Peak-to-peak amplitudes in mV (comma separated).
        #[arg(long, value_delimiter = ',')]
        amplitudes_mvpp: Option<Vec<f64>>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Toeplitz-extract a raw bit file into final.bits.
    Extract {
        input: PathBuf,
    },
    /// Run the SP 800-22 battery on a bit file.
    Nist {
        input: PathBuf,
        #[arg(long)]
        streams: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run all four legs and the sweep and check the concealment pattern.
    Reproduce,
    /// Re-run a recorded command and compare artifact digests.
    Replay {
        manifest: PathBuf,
    },
    /// Print the effective configuration as TOML.
    Config,
}

fn load_config(c: &Common) -> Result<ExperimentConfig, PipelineError> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if c.quick {
        cfg = cfg.quick();
    }
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, PipelineError> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate { baseline } => {
            let (raw, m) = pipeline::cmd_simulate(&cfg, baseline)?;
            println!(
                "wrote {} ({} bits)",
                cfg.output_dir.join("raw.bits").display(),
                raw.len()
            );
            println!("manifest {}", cfg.output_dir.join(m.file_name()).display());
            Ok(true)
        }
        Command::Sweep {
            amplitudes_mvpp,
            repeats,
        } => {
            if let Some(a) = amplitudes_mvpp {
                cfg.sweep.amplitudes = a.iter().map(|mv| mv / 2000.0).collect();
            }
            if let Some(r) = repeats {
                cfg.sweep.repeats = r;
            }
            let (points, _) = pipeline::cmd_sweep(&cfg)?;
            print!("{}", report::sweep_tsv(&points));
            Ok(true)
        }
        Command::Extract { input } => {
            let (out, m) = pipeline::cmd_extract(&cfg, &input)?;
            println!(
                "wrote {} ({} bits, {} input bits discarded)",
                cfg.output_dir.join("final.bits").display(),
                out.len(),
                m.discarded_bits.values().sum::<usize>()
            );
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            Ok(true)
        }
        Command::Nist {
            input,
            streams,
            alpha,
        } => {
            if let Some(s) = streams {
                cfg.suite.stream_count = s;
            }
            if let Some(a) = alpha {
                cfg.suite.alpha = a;
            }
            let (rep, _) = pipeline::cmd_nist(&cfg, &input)?;
            print!(
                "{}",
                report::suite_table(&input.display().to_string(), &[("Result", &rep)])
            );
            Ok(rep.overall == Verdict::Success)
        }
        Command::Reproduce => {
            let out = pipeline::cmd_reproduce(&cfg)?;
            print!("{}", out.text);
            Ok(out.pattern.reproduced())
        }
        Command::Replay { manifest } => {
            let dir = cli
                .common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("replay"));
            let matched = pipeline::replay(&manifest, &dir)?;
            println!("{} artifacts reproduced bit-exactly", matched.len());
            Ok(true)
        }
        Command::Config => {
            print!("{}", cfg.to_toml_string()?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
