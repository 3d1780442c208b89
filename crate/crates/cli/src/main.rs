use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use semiadv_core::experiment::{
    run_sweep, run_trial_detailed, verify, write_bundle, write_csv, write_csv_file,
    AdversaryConfig, AlgorithmConfig, AlgorithmKind, ExperimentConfig, Expr, PartitionConfig,
};
use semiadv_core::matrix::{
    frobenius_norm, infty_to_one_bruteforce, operator_norm, BRUTE_FORCE_LIMIT,
    DEFAULT_OPNORM_MAX_ITER,
};
use semiadv_core::sdp::grothendieck_bracket;
use semiadv_core::{RealMatrix, SdpOptions, SdpVariant};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "semiadv",
    version,
    about = "Semi-adversarial correlation clustering experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance bundle for one (setting, trial).
    Gen {
        #[command(flatten)]
        point: PointArgs,
        /// Bundle directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one trial and print the result as JSON.
    Run {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_enum)]
        algo: Option<Algo>,
        #[arg(long, value_enum)]
        variant: Option<Variant>,
        /// Print the recursion frames as JSON lines on stderr.
        #[arg(long)]
        trace: bool,
        /// Also write the predicted partition to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (setting, trial) of a config and write the CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV path; falls back to the config's output path, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Norm report for a matrix file.
    Norms {
        #[arg(long)]
        file: PathBuf,
        /// Seed for the SDP restarts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the acceptance suite.
    Verify {
        /// Comma-separated criterion ids; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Spectral,
    Sdp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Eps,
    EpsFree,
}

/// Selects one point of a config; the flags override or replace its lists.
#[derive(Args)]
struct PointArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// Budget in ordered entries, or an expression such as "0.5*eps^2*n^2".
    #[arg(long)]
    budget: Option<Expr>,
    /// Adversary strategy name.
    #[arg(long)]
    adversary: Option<String>,
    #[arg(long)]
    m_vertices: Option<Expr>,
    #[arg(long)]
    pair_count: Option<Expr>,
    #[arg(long, default_value_t = 0)]
    setting: usize,
    #[arg(long, default_value_t = 0)]
    trial: usize,
}

/// Error class for the exit code.
enum Failure {
    Config(anyhow::Error),
    Verify,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

impl From<semiadv_core::Error> for Failure {
    fn from(e: semiadv_core::Error) -> Self {
        Failure::Config(e.into())
    }
}

fn workers(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

impl PointArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let (Some(n), Some(k), Some(eps)) = (self.n, self.k, self.eps) else {
                    bail!("without --config, --n, --k and --eps are required");
                };
                ExperimentConfig {
                    n: vec![n],
                    k: vec![k],
                    epsilon: vec![eps],
                    budget: vec![Expr::constant(0)],
                    partition: PartitionConfig::Equal,
                    adversary: AdversaryConfig::default(),
                    algorithm: AlgorithmConfig::default(),
                    trials: 1,
                    base_seed: 0,
                    output: None,
                }
            }
        };
        if let Some(n) = self.n {
            cfg.n = vec![n];
        }
        if let Some(k) = self.k {
            cfg.k = vec![k];
        }
        if let Some(eps) = self.eps {
            cfg.epsilon = vec![eps];
        }
        if let Some(b) = &self.budget {
            cfg.budget = vec![b.clone()];
        }
        if let Some(name) = &self.adversary {
            cfg.adversary = AdversaryConfig {
                name: name.clone(),
                ..AdversaryConfig::default()
            };
        }
        if self.m_vertices.is_some() {
            cfg.adversary.m_vertices = self.m_vertices.clone();
        }
        if self.pair_count.is_some() {
            cfg.adversary.pair_count = self.pair_count.clone();
        }
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        cfg.validate()?;
        if self.trial >= cfg.trials && self.config.is_some() {
            bail!(
                "trial {} out of range (config has {})",
                self.trial,
                cfg.trials
            );
        }
        Ok(cfg)
    }
}

fn pick_point(
    cfg: &ExperimentConfig,
    setting: usize,
) -> anyhow::Result<semiadv_core::experiment::SettingPoint> {
    let mut points = cfg.points()?;
    if setting >= points.len() {
        bail!(
            "setting {setting} out of range (config has {})",
            points.len()
        );
    }
    Ok(points.swap_remove(setting))
}

fn gen(point: &PointArgs, out: &Path) -> Result<(), Failure> {
    let cfg = point.config()?;
    let pt = pick_point(&cfg, point.setting)?;
    let seed = semiadv_core::experiment::trial_seed(cfg.base_seed, pt.setting_id, point.trial);
    let inst =
        semiadv_core::experiment::generate_instance(&pt, cfg.partition.mode(pt.n, pt.k), seed)?;
    write_bundle(out, &inst).with_context(|| format!("writing bundle to {}", out.display()))?;
    println!(
        "{}",
        json!({"bundle": out, "seed": seed, "adversary": pt.strategy.name(), "entries_used": inst.ledger.entries_used})
    );
    Ok(())
}

fn run(
    point: &PointArgs,
    algo: Option<Algo>,
    variant: Option<Variant>,
    trace: bool,
    out: Option<&PathBuf>,
) -> Result<(), Failure> {
    let mut cfg = point.config()?;
    if let Some(a) = algo {
        cfg.algorithm.kind = match a {
            Algo::Spectral => AlgorithmKind::Spectral,
            Algo::Sdp => AlgorithmKind::Sdp,
        };
    }
    if let Some(v) = variant {
        cfg.algorithm.variant = match v {
            Variant::Eps => SdpVariant::Eps,
            Variant::EpsFree => SdpVariant::EpsFree,
        };
    }
    cfg.validate()?;
    let pt = pick_point(&cfg, point.setting)?;
    let outcome = run_trial_detailed(&cfg, &pt, point.trial);
    let predicted = outcome
        .output
        .as_ref()
        .map(|o| o.partition.assignment().to_vec());
    let attempts = outcome.output.as_ref().map(|o| o.attempts);
    if trace {
        let mut err = std::io::stderr().lock();
        for frame in outcome.output.iter().flat_map(|o| &o.trace) {
            writeln!(
                err,
                "{}",
                serde_json::to_string(frame).context("serializing trace")?
            )
            .context("writing trace")?;
        }
    }
    if let (Some(path), Some(o)) = (out, &outcome.output) {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        o.partition.write_text(BufWriter::new(file))?;
    }
    println!(
        "{}",
        json!({
            "record": outcome.record,
            "attempts": attempts,
            "predicted": predicted,
            "truth": outcome.instance.as_ref().map(|i| i.partition.assignment().to_vec()),
        })
    );
    Ok(())
}

fn sweep(
    config: &Path,
    seed: Option<u64>,
    out: Option<&PathBuf>,
    w: Option<usize>,
) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let rows = run_sweep(&cfg, workers(w))?;
    match out.or(cfg.output.as_ref()) {
        Some(path) => {
            write_csv_file(&rows, path).with_context(|| format!("writing {}", path.display()))?
        }
        None => write_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn norms(file: &Path, seed: u64) -> Result<(), Failure> {
    let f = File::open(file).with_context(|| format!("opening {}", file.display()))?;
    let a = RealMatrix::read_text(BufReader::new(f))?;
    let bracket = grothendieck_bracket(&a, &SdpOptions::default().with_seed(seed))?;
    let brute = if a.n() <= BRUTE_FORCE_LIMIT {
        Some(infty_to_one_bruteforce(&a)?)
    } else {
        None
    };
    let report = json!({
        "n": a.n(),
        "frobenius": frobenius_norm(&a),
        "operator": operator_norm(&a, 1e-10, DEFAULT_OPNORM_MAX_ITER)?,
        "sdp_value": bracket.sdp_value,
        "infty_to_one": brute,
        "grothendieck_bracket": [bracket.lower, bracket.upper],
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&report).context("serializing report")?
    );
    Ok(())
}

fn run_verify(only: &[usize], w: Option<usize>) -> Result<(), Failure> {
    let ids: Vec<usize> = if only.is_empty() {
        verify::CRITERIA.iter().map(|c| c.0).collect()
    } else {
        only.to_vec()
    };
    let mut failed = 0;
    for id in ids {
        let report = verify::run_criterion(id, workers(w))
            .ok_or_else(|| anyhow::anyhow!("unknown criterion {id}"))?;
        println!("{report}");
        failed += usize::from(!report.passed);
    }
    if failed > 0 {
        return Err(Failure::Verify);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen { point, out } => gen(point, out),
        Command::Run {
            point,
            algo,
            variant,
            trace,
            out,
        } => run(point, *algo, *variant, *trace, out.as_ref()),
        Command::Sweep {
            config,
            seed,
            out,
            workers,
        } => sweep(config, *seed, out.as_ref(), *workers),
        Command::Norms { file, seed } => norms(file, *seed),
        Command::Verify { only, workers } => run_verify(only, *workers),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Verify) => ExitCode::from(2),
    }
}
