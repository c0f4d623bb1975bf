//! `occ`: run, sweep and verify compression episodes from the command line.
//!
//! Exit status is 0 when every applicable guarantee holds, 2 when at least
//! one is violated and 1 on any error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use occ_core::channel::ChannelSpec;
use occ_core::harness::config::{derive_seed, stream, RunConfig, Scheme};
use occ_core::harness::episode::{block_search, episode_verdicts, Aggregates, BoundContext, EpisodeSummary};
use occ_core::harness::sweep::{sweep, write_csv};
use occ_core::harness::trace::{read_steps, summary_to_json, write_episode};
use occ_core::harness::{run_episode, EpisodeSetup};
use occ_core::predictor::corpus_to_u16le;

#[derive(Parser)]
#[command(name = "occ", version, about = "Online conformal compression simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and print its summary.
    Run(RunArgs),
    /// Run a grid of targets, schemes and seeds and write CSV.
    Sweep(SweepArgs),
    /// Recompute the guarantee checks of a stored episode from its trace.
    Verify(VerifyArgs),
    /// Report the fixed level an offline block baseline would pick.
    BlockSearch(Overrides),
    /// Write the configured source sequence to a file.
    GenSource(GenArgs),
}

/// Config file plus per-field overrides shared by every subcommand.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for `trace.jsonl` and `summary.json`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Target distortion.
    #[arg(long = "D")]
    target: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// `ideal`, `bernoulli:E`, `periodic:P[,O]`, `ge:A,B,EB,EG`, `pattern:0,1,..` or JSON.
    #[arg(long)]
    channel: Option<String>,
    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<usize>,
}

impl Overrides {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let mut value: serde_json::Value =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                // a scheme on the command line fills a config that has none
                if let (Some(s), Some(obj)) = (self.scheme, value.as_object_mut()) {
                    obj.entry("scheme").or_insert(serde_json::to_value(s)?);
                }
                serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))?
            }
            None => RunConfig::new(self.scheme.unwrap_or(Scheme::Ocsc)),
        };
        if let Some(s) = self.scheme {
            cfg.scheme = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.output.dir = Some(d.clone());
        }
        let h = &mut cfg.hyperparameters;
        if let Some(v) = self.target {
            h.target = v;
        }
        if let Some(v) = self.eta {
            h.eta = v;
        }
        if let Some(v) = self.lambda0 {
            h.lambda0 = v;
        }
        if self.epsilon.is_some() {
            h.epsilon = self.epsilon;
        }
        if let Some(c) = &self.channel {
            cfg.channel = ChannelSpec::parse(c)?;
        }
        if let Some(t) = self.horizon {
            cfg.horizon = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
    /// Skip the per-step trace file.
    #[arg(long)]
    no_trace: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Overrides,
    /// Comma-separated targets.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"
    )]
    targets: Vec<f64>,
    /// Comma-separated schemes; defaults to the configured one.
    #[arg(long, value_delimiter = ',')]
    schemes: Vec<Scheme>,
    /// Number of seeds, counted up from `--seed` (or the config seed).
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// CSV output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Episode directory holding `summary.json` and `trace.jsonl`.
    dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// Little-endian `u16` per symbol.
    U16,
    Json,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long, value_enum, default_value = "u16")]
    format: Format,
    #[arg(long)]
    out: PathBuf,
}

/// Outcome of a subcommand that checks guarantees.
enum Status {
    Ok,
    Violated,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violated) => ExitCode::from(2),
        // a closed pipe (`occ run | head`) is not a failure
        Err(e) if e.chain().any(is_broken_pipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn is_broken_pipe(e: &(dyn std::error::Error + 'static)) -> bool {
    let io = match e.downcast_ref::<occ_core::error::Error>() {
        Some(occ_core::error::Error::Io(io)) => Some(io),
        _ => e.downcast_ref::<io::Error>(),
    };
    io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn dispatch(cmd: Command) -> Result<Status> {
    match cmd {
        Command::Run(a) => run(&a),
        Command::Sweep(a) => run_sweep(&a),
        Command::Verify(a) => verify(&a.dir),
        Command::BlockSearch(o) => run_block_search(&o),
        Command::GenSource(a) => gen_source(&a),
    }
}

fn status(violated: bool) -> Status {
    if violated {
        Status::Violated
    } else {
        Status::Ok
    }
}

fn run(a: &RunArgs) -> Result<Status> {
    let cfg = a.common.config()?;
    let ep = run_episode(&cfg)?;
    if let Some(dir) = &cfg.output.dir {
        write_episode(dir, &ep, cfg.output.trace && !a.no_trace)
            .with_context(|| format!("writing {}", dir.display()))?;
    }
    writeln!(io::stdout().lock(), "{}", summary_to_json(&ep.summary)?)?;
    Ok(status(ep.summary.any_violated()))
}

fn run_sweep(a: &SweepArgs) -> Result<Status> {
    let cfg = a.common.config()?;
    let schemes = if a.schemes.is_empty() {
        vec![cfg.scheme]
    } else {
        a.schemes.clone()
    };
    let seeds: Vec<u64> = (0..a.seeds).map(|k| cfg.seed + k).collect();
    let rows = sweep(&cfg, &a.targets, &schemes, &seeds);
    match &a.out {
        Some(path) => write_csv(fs::File::create(path)?, &rows)?,
        None => write_csv(io::stdout().lock(), &rows)?,
    }
    if let Some(r) = rows.iter().find(|r| r.error.is_some()) {
        bail!(
            "D = {} {} seed {}: {}",
            r.target,
            r.scheme,
            r.seed,
            r.error.as_deref().unwrap_or_default()
        );
    }
    Ok(status(rows.iter().any(|r| r.verdict == "violated")))
}

fn verify(dir: &Path) -> Result<Status> {
    let summary_path = dir.join("summary.json");
    let summary: EpisodeSummary = serde_json::from_str(
        &fs::read_to_string(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?,
    )
    .with_context(|| format!("parsing {}", summary_path.display()))?;
    let cfg = summary
        .config
        .as_ref()
        .context("summary has no config echo; cannot rebuild the bound constants")?;
    let trace_path = dir.join("trace.jsonl");
    let steps = read_steps(
        &fs::read_to_string(&trace_path).with_context(|| format!("reading {}", trace_path.display()))?,
    )?;
    let agg = Aggregates::from_steps(&steps)?;
    if agg != summary.aggregates {
        bail!("trace aggregates disagree with summary.json");
    }
    let setup = EpisodeSetup::from_config(cfg)?;
    let erasures: Vec<bool> = steps.iter().map(|s| s.erased).collect();
    let (verdicts, _) = episode_verdicts(&BoundContext::from_setup(&setup), &agg, &erasures)?;
    let mut out = io::stdout().lock();
    for v in &verdicts {
        writeln!(
            out,
            "{:<22} {:<15} lhs={} rhs={} slack={}",
            v.name,
            serde_json::to_value(v.status)?.as_str().unwrap_or("?"),
            fmt_opt(v.lhs),
            fmt_opt(v.rhs),
            fmt_opt(v.slack)
        )?;
    }
    Ok(status(verdicts.iter().any(|v| v.violated())))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.6e}"))
}

fn run_block_search(o: &Overrides) -> Result<Status> {
    let cfg = o.config()?;
    if !cfg.scheme.is_block() {
        bail!(
            "block-search needs --scheme block_csc or block_crdc, got {}",
            cfg.scheme
        );
    }
    let outcome = block_search(&EpisodeSetup::from_config(&cfg)?)?;
    writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(&outcome)?)?;
    Ok(Status::Ok)
}

fn gen_source(a: &GenArgs) -> Result<Status> {
    let cfg = a.common.config()?;
    let sample = cfg
        .source
        .generate(cfg.alphabet, cfg.horizon, derive_seed(cfg.seed, stream::SOURCE))?;
    let bytes = match a.format {
        Format::U16 => corpus_to_u16le(&sample.symbols)?,
        Format::Json => serde_json::to_vec(&sample.symbols)?,
    };
    fs::write(&a.out, bytes).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(Status::Ok)
}
