//! `autocat`: simulate, verify and sweep stochastic autocatalytic networks.
//!
//! Exit codes: 0 pass, 1 check failed, 2 usage or configuration error,
//! 3 resource cap (event cap, state-space cap).

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use autocat_core::analytic::{Conditional, MixtureStationary};
use autocat_core::model::NetworkConfig;
use autocat_core::scaling::{alpha_crossings, scaling_sweep};
use autocat_core::simulate::{default_initial_state, ensemble_sample, simulate_trajectory, SimOptions};
use autocat_core::verify::{
    drift_report, lumpability_check, master_equation_residual_range, moment_zscore_report, oracle_report,
    VerificationReport,
};
use autocat_core::{Error, ReactionNetwork, State, Topology};

const EVENT_CAP_VAR: &str = "AUTOCAT_EVENT_CAP";

#[derive(Parser, Debug)]
#[command(name = "autocat", version, about = "Stochastic autocatalytic reaction networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one trajectory, or an ensemble of end states with --trajectories > 1.
    Simulate(SimulateArgs),
    /// Run a verification check and emit a JSON report.
    Verify(VerifyArgs),
    /// Evaluate the stationary law across a volume grid.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Network configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// End time T.
    #[arg(long)]
    time: f64,
    #[arg(long, default_value_t = 1)]
    trajectories: usize,
    /// Initial counts, comma separated; defaults to the rounded mean lambda_i/delta_i.
    #[arg(long, value_delimiter = ',')]
    initial: Option<Vec<u64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Check {
    Lumpability,
    MasterEq,
    Drift,
    Oracle,
    Moments,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Ansatz {
    /// The closed-form conditional the network's hypotheses give.
    Auto,
    /// Force the uniform simplex law, whatever the parameters.
    Uniform,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    check: Check,
    #[command(flatten)]
    common: Common,
    /// Largest level checked (lumpability, master-eq) or truncation level (oracle).
    #[arg(long)]
    n_max: Option<u64>,
    /// Check a single level (master-eq).
    #[arg(long, conflicts_with = "n_max")]
    n: Option<u64>,
    /// Norm bound of the exhaustive drift scan.
    #[arg(long, default_value_t = 200)]
    scan: u64,
    #[arg(long, value_enum, default_value_t = Ansatz::Auto)]
    ansatz: Ansatz,
    /// Total-variation tolerance (oracle).
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// End time (moments).
    #[arg(long)]
    time: Option<f64>,
    /// Ensemble size (moments).
    #[arg(long)]
    trajectories: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Volume grid, comma separated; overrides the configured V.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    volumes: Option<Vec<String>>,
    /// Reference level for flatness and corner mass; defaults to round(mu).
    #[arg(long)]
    n: Option<u64>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    args: Vec<String>,
    version: &'static str,
    seed: Option<u64>,
    config_path: String,
    config: &'a NetworkConfig,
    outputs: Vec<String>,
    wall_time_s: f64,
    #[serde(skip_serializing_if = "Value::is_null")]
    summary: Value,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("autocat: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::EventCapExceeded { .. } | Error::SizeCap { .. }) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let start = Instant::now();
    match cli.command {
        Command::Simulate(a) => simulate(a, start),
        Command::Verify(a) => verify(a, start),
        Command::Sweep(a) => sweep(a, start),
    }
}

fn load_config(path: &Path) -> anyhow::Result<(NetworkConfig, ReactionNetwork)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let cfg = NetworkConfig::from_json(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let net = cfg.build().context("building network")?;
    Ok((cfg, net))
}

fn sim_options() -> anyhow::Result<SimOptions> {
    let mut opts = SimOptions::default();
    if let Ok(v) = std::env::var(EVENT_CAP_VAR) {
        opts.event_cap = v
            .trim()
            .parse()
            .with_context(|| format!("{EVENT_CAP_VAR}={v:?} is not a nonnegative integer"))?;
    }
    Ok(opts)
}

/// Write `body` to `out` (or stdout) and, for files, a `<out>.meta.json` sidecar.
fn emit<F>(common: &Common, meta: Metadata<'_>, body: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match &common.out {
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush()?;
        }
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            body(&mut w).with_context(|| format!("writing {}", path.display()))?;
            w.flush()?;
            let side = sidecar_path(path);
            let meta = Metadata {
                outputs: vec![path.display().to_string()],
                ..meta
            };
            let text = serde_json::to_string_pretty(&meta)? + "\n";
            fs::write(&side, text).with_context(|| format!("writing {}", side.display()))?;
        }
    }
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn metadata<'a>(command: &'a str, common: &Common, cfg: &'a NetworkConfig, seed: Option<u64>, start: Instant) -> Metadata<'a> {
    Metadata {
        command,
        args: std::env::args().skip(1).collect(),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config_path: common.config.display().to_string(),
        config: cfg,
        outputs: Vec::new(),
        wall_time_s: start.elapsed().as_secs_f64(),
        summary: Value::Null,
    }
}

fn simulate(a: SimulateArgs, start: Instant) -> anyhow::Result<bool> {
    if a.common.format == Some(Format::Json) {
        bail!("simulate writes CSV only");
    }
    let (cfg, net) = load_config(&a.common.config)?;
    let x0 = match &a.initial {
        Some(v) => State::new(v.clone()),
        None => default_initial_state(&net),
    };
    let opts = sim_options()?;
    if a.trajectories == 0 {
        bail!("--trajectories must be at least 1");
    }
    if a.trajectories == 1 {
        let traj = simulate_trajectory(&net, &x0, a.time, a.seed, opts)?;
        let mut meta = metadata("simulate", &a.common, &cfg, Some(a.seed), start);
        meta.summary = json!({ "kind": "trajectory", "initial_state": x0.counts(), "end_time": a.time,
                               "events": traj.n_events(), "final_state": traj.final_state() });
        emit(&a.common, meta, |w| traj.write_csv(w))?;
    } else {
        let ens = ensemble_sample(&net, &x0, a.time, a.trajectories, a.seed, opts)?;
        let mut meta = metadata("simulate", &a.common, &cfg, Some(a.seed), start);
        meta.summary = json!({ "kind": "ensemble", "initial_state": x0.counts(), "end_time": a.time,
                               "trajectories": a.trajectories, "seed_derivation": "splitmix64(master, index)" });
        emit(&a.common, meta, |w| ens.write_csv(w))?;
    }
    Ok(true)
}

fn verify(a: VerifyArgs, start: Instant) -> anyhow::Result<bool> {
    if a.common.format == Some(Format::Csv) {
        bail!("verification reports are JSON only");
    }
    let (cfg, net) = load_config(&a.common.config)?;
    let mut seed = None;
    let report: VerificationReport = match a.check {
        Check::Lumpability => lumpability_check(&net, a.n_max.unwrap_or(30)),
        Check::MasterEq => {
            let cond = match a.ansatz {
                Ansatz::Auto => MixtureStationary::for_network(&net)?.conditional,
                Ansatz::Uniform => Conditional::UniformSimplex { d: net.dimension() },
            };
            match a.n {
                Some(n) => autocat_core::verify::master_equation_residual(&net, &cond, n)?,
                None => master_equation_residual_range(&net, &cond, a.n_max.unwrap_or(30))?,
            }
        }
        Check::Drift => {
            let dr = drift_report(&net, a.scan)?;
            let mut rep = dr.report;
            if let Some(p) = rep.params.as_object_mut() {
                p.insert("certificate".into(), serde_json::to_value(dr.certificate)?);
                p.insert("scanned_states".into(), json!(dr.scanned_states));
                p.insert("violations".into(), json!(dr.violations));
                p.insert("autocatalytic_nonzero".into(), json!(dr.autocatalytic_nonzero));
            }
            rep
        }
        Check::Oracle => oracle_report(&net, a.n_max.unwrap_or(25), a.tolerance)?,
        Check::Moments => {
            let time = a.time.context("moments needs --time")?;
            let n_traj = a.trajectories.context("moments needs --trajectories")?;
            let volume = cfg.volume.as_ref().map_or(1.0, |v| v.volume);
            let ms = MixtureStationary::for_network(&net)?;
            let x0 = default_initial_state(&net);
            let ens = ensemble_sample(&net, &x0, time, n_traj, a.seed, sim_options()?)?;
            seed = Some(a.seed);
            moment_zscore_report(&ens, &ms, volume)?
        }
    };
    let passed = report.passed;
    let mut meta = metadata("verify", &a.common, &cfg, seed, start);
    meta.summary = json!({ "check": report.check, "passed": passed });
    emit(&a.common, meta, |w| writeln!(w, "{}", report.to_json()))?;
    Ok(passed)
}

fn parse_volumes(raw: &[String]) -> anyhow::Result<Vec<f64>> {
    raw.iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("bad volume {s:?}")))
        .collect()
}

fn sweep(a: SweepArgs, start: Instant) -> anyhow::Result<bool> {
    let (cfg, _) = load_config(&a.common.config)?;
    let vc = cfg
        .volume
        .as_ref()
        .context("sweep needs a \"volume\" block with primed parameters")?;
    let volumes = match &a.volumes {
        Some(raw) => parse_volumes(raw)?,
        None => vec![vc.volume],
    };
    if volumes.is_empty() {
        bail!("empty volume grid");
    }
    let primed = vc.primed();
    let sweep = scaling_sweep(&primed, &volumes, cfg.dimension, cfg.topology, a.n)?;
    let crossings = if cfg.topology == Topology::TkCycle && cfg.dimension > 2 {
        None
    } else {
        alpha_crossings(&primed, cfg.dimension, cfg.topology).ok()
    };
    let mut meta = metadata("sweep", &a.common, &cfg, None, start);
    meta.summary = json!({ "volumes": volumes, "alpha_crossings": crossings });
    match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => emit(&a.common, meta, |w| sweep.write_csv(w))?,
        Format::Json => {
            let doc = json!({ "sweep": sweep, "alpha_crossings": crossings });
            let text = serde_json::to_string_pretty(&doc)?;
            emit(&a.common, meta, |w| writeln!(w, "{text}"))?
        }
    }
    Ok(true)
}
