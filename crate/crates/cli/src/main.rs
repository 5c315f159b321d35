use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use edgeho::harness::config::CONFIG_KEYS;
use edgeho::harness::sweep::write_sweep_csv;
use edgeho::harness::{run_single, run_sweep, run_verify, ExperimentConfig, SweepKind};

/// Handover planning for edge-served LLM sessions: Monte Carlo sweeps,
/// single-scenario reports and oracle verification.
///
/// Any configuration key can also be given as `--key value`
/// (for example `--c-max 4096` or `--r-bh 6e9`).
#[derive(Parser, Debug)]
#[command(name = "edgeho", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Worst-user HO delay versus backhaul capacity (Gbps).
    SweepRate(Common),
    /// Worst-user HO delay versus prefill speed 1/a (tokens/s).
    SweepCompute(Common),
    /// Worst-user HO delay versus maximum context length (tokens).
    SweepCache(Common),
    /// Worst-user HO delay versus number of UEs.
    SweepUsers(Common),
    /// Total streaming delay versus inter-BS distance (m), with the no-HO baseline.
    SweepDbs(Common),
    /// Plans, schedule and per-UE delays for one seeded scenario.
    Single(Common),
    /// Cross-check planner and scheduler against the oracles.
    Verify(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Monte Carlo trials per sweep point (random instances per K for `verify`).
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial n uses a seed derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Flat key=value configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Comma-separated sweep values overriding the axis defaults.
    #[arg(long, value_name = "LIST")]
    values: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    /// Charge the batch overhead t_s + b even when L = 0.
    #[arg(long)]
    charge_prefill_overhead_at_zero: bool,
    /// Hold each UE's streaming rate at its value when streaming starts.
    #[arg(long)]
    freeze_snr_at_handover: bool,
    /// Print the effective configuration and exit.
    #[arg(long)]
    emit_config: bool,
}

const VERIFY_TRIALS: usize = 1000;

type Overrides = Vec<(String, String)>;

impl Command {
    fn parts(&self) -> (SweepKind, &Common) {
        match self {
            Command::SweepRate(c) => (SweepKind::Rate, c),
            Command::SweepCompute(c) => (SweepKind::Compute, c),
            Command::SweepCache(c) => (SweepKind::Cache, c),
            Command::SweepUsers(c) => (SweepKind::Users, c),
            Command::SweepDbs(c) => (SweepKind::BsDistance, c),
            Command::Single(c) => (SweepKind::Single, c),
            Command::Verify(c) => (SweepKind::Verify, c),
        }
    }
}

/// Splits `--key value` / `--key=value` pairs for configuration keys that
/// have no dedicated flag out of the argument list.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides)> {
    let dedicated = [
        "trials",
        "seed",
        "threads",
        "charge_prefill_overhead_at_zero",
        "freeze_snr_at_handover",
    ];
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.replace('-', "_"), Some(v.to_string())),
            None => (flag.replace('-', "_"), None),
        };
        if !CONFIG_KEYS.contains(&name.as_str()) || dedicated.contains(&name.as_str()) || name == "sweep_values" {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().with_context(|| format!("--{flag} needs a value"))?,
        };
        overrides.push((name, value));
    }
    Ok((rest, overrides))
}

fn build_config(kind: SweepKind, c: &Common, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(kind);
    if kind == SweepKind::Verify {
        cfg.trials = VERIFY_TRIALS;
    }
    if let Some(path) = &c.config {
        cfg.apply_file(path).with_context(|| format!("reading config {}", path.display()))?;
    }
    for (key, value) in overrides {
        cfg.set(key, value).with_context(|| format!("--{}", key.replace('_', "-")))?;
    }
    if let Some(v) = &c.values {
        cfg.set("sweep_values", v).context("--values")?;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if let Some(s) = c.seed {
        cfg.base_seed = s;
    }
    if let Some(t) = c.threads {
        cfg.threads = t;
    }
    if c.charge_prefill_overhead_at_zero {
        cfg.params.charge_prefill_overhead_at_zero = true;
    }
    if c.freeze_snr_at_handover {
        cfg.params.freeze_snr_at_handover = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Runs the command; `Ok(false)` means verification failed.
fn run(kind: SweepKind, c: &Common, cfg: &ExperimentConfig) -> Result<bool> {
    let mut out = output(&c.out)?;
    match kind {
        SweepKind::Single => {
            let report = run_single(&cfg.params, cfg.base_seed)?;
            out.write_all(report.render()?.as_bytes())?;
        }
        SweepKind::Verify => {
            let report = run_verify(cfg.trials, cfg.base_seed, cfg.threads, cfg.params.delay_options())?;
            writeln!(out, "{report}")?;
            out.flush()?;
            return Ok(report.passed());
        }
        _ => {
            let rows = run_sweep(cfg)?;
            write_sweep_csv(&rows, cfg.base_seed, &mut out)?;
        }
    }
    out.flush()?;
    Ok(true)
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let (kind, common) = cli.command.parts();
    let cfg = match build_config(kind, common, &overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if common.emit_config {
        print!("{}", cfg.emit());
        return ExitCode::SUCCESS;
    }
    match run(kind, common, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
