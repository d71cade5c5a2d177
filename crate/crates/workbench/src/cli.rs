//! Command-line front end, shared by the `cnu` binary and its tests.

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use cnu_core::{Belief, Dist, DistJson, Net, Observation, UpdateStrategy};
use serde_json::json;

use crate::bench::{bench, Backend, BenchConfig};
use crate::error::WbError;
use crate::gen::{gen_net, GenParams, PriorKind};
use crate::server::{serve, AppState, NetBundle};
use crate::session::{run_session, BeliefBackend, DenseBelief};

#[derive(Debug, Parser)]
#[command(name = "cnu", version, about = "Belief tracking for condition/event nets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Net files: validation and generation.
    #[command(subcommand)]
    Net(NetCommand),
    /// The dense reference implementation.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Observation sessions.
    #[command(subcommand)]
    Session(SessionCommand),
    /// Dense-versus-network runtime comparison.
    Bench(BenchArgs),
    /// HTTP service for observer consoles.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory for JSON snapshots of nets and sessions.
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum NetCommand {
    /// Checks a net (or a net with prior) and prints a summary.
    Validate { file: PathBuf },
    /// Prints a random net with its prior.
    Gen {
        #[arg(long)]
        places: usize,
        #[arg(long)]
        transitions: Option<usize>,
        #[arg(long, default_value_t = 2)]
        max_pre: usize,
        #[arg(long, default_value_t = 2)]
        max_post: usize,
        #[arg(long, default_value_t = 0.5)]
        marked_fraction: f64,
        /// Use independent places marked with this probability instead of a
        /// random chain network.
        #[arg(long)]
        bernoulli: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Applies one operation to a distribution file and prints the result.
    ///
    /// Operations: `assert:P,Q=1`, `nassert:P=0`, `set:P,Q=0` where places are
    /// names (with --net) or 1-based indices, and `observe:T=Success` (needs
    /// --net; outcomes Success, FailPre, FailPost).
    Apply {
        dist: PathBuf,
        op: String,
        #[arg(long)]
        net: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SessionCommand {
    /// Runs policy-driven attempts against the net's initial marking.
    Run {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, default_value_t = 100)]
        ops: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "eager")]
        strategy: UpdateStrategy,
        #[arg(long, default_value = "mbn")]
        backend: Backend,
    },
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON array of generator parameters.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value = "dense,mbn", value_delimiter = ',')]
    backends: Vec<Backend>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seconds per cell.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, default_value_t = 100)]
    ops: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "eager")]
    strategy: UpdateStrategy,
}

/// Writes to stdout; a closed pipe ends output quietly.
fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn read(path: &PathBuf) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Accepts either a bare net or a `{net, prior}` bundle.
pub fn read_bundle(text: &str) -> anyhow::Result<NetBundle> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let bundle = if value.get("net").is_some() {
        serde_json::from_value(value)?
    } else {
        NetBundle { net: serde_json::from_value(value)?, prior: None }
    };
    Ok(bundle)
}

fn parse_places(list: &str, net: Option<&Net>) -> anyhow::Result<Vec<usize>> {
    if list.trim().is_empty() {
        return Ok(Vec::new());
    }
    list.split(',')
        .map(|p| {
            let p = p.trim();
            match (p.parse::<usize>(), net) {
                (Ok(i), _) if i >= 1 => Ok(i - 1),
                (_, Some(net)) => Ok(net.place_index(p)?),
                _ => bail!("place `{p}` needs --net or a 1-based index"),
            }
        })
        .collect()
}

/// Applies an oracle operation string to a distribution.
pub fn apply_op(dist: &Dist<f64>, op: &str, net: Option<&Net>) -> anyhow::Result<Dist<f64>> {
    let (kind, rest) = op.split_once(':').context("operation must look like `kind:args=value`")?;
    let (args, value) = rest.rsplit_once('=').context("operation needs `=value`")?;
    let bit = || match value.trim() {
        "1" => Ok(true),
        "0" => Ok(false),
        v => bail!("value must be 0 or 1, got `{v}`"),
    };
    Ok(match kind {
        "assert" => dist.assert(&parse_places(args, net)?, bit()?)?,
        "nassert" => dist.nassert(&parse_places(args, net)?, bit()?)?,
        "set" => dist.set(&parse_places(args, net)?, bit()?)?,
        "observe" => {
            let net = net.context("observe needs --net")?;
            let outcome: Observation = value.trim().parse()?;
            dist.observe(net, args.trim(), outcome)?
        }
        other => bail!("unknown operation `{other}`"),
    })
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Net(NetCommand::Validate { file }) => {
            let bundle = read_bundle(&read(&file)?)?;
            let (net, prior) = bundle.load()?;
            let summary = json!({
                "valid": true,
                "places": net.place_count(),
                "transitions": net.transitions().len(),
                "observers": net.observers().keys().collect::<Vec<_>>(),
                "prior_nodes": prior.nodes().len(),
            });
            emit(&serde_json::to_string_pretty(&summary)?)?;
        }
        Command::Net(NetCommand::Gen { places, transitions, max_pre, max_post, marked_fraction, bernoulli, seed }) => {
            let params = GenParams {
                n_places: places,
                n_transitions: transitions.unwrap_or(places),
                max_pre,
                max_post,
                marked_fraction,
                prior: bernoulli.map_or(PriorKind::RandomChainObn, |q| PriorKind::IndependentBernoulli { q }),
                seed,
            };
            let (net, prior) = gen_net(&params)?;
            let bundle = NetBundle { net: net.to_json(), prior: Some(prior.to_json()) };
            emit(&serde_json::to_string_pretty(&bundle)?)?;
        }
        Command::Oracle(OracleCommand::Apply { dist, op, net }) => {
            let json: DistJson = serde_json::from_str(&read(&dist)?)?;
            let d = Dist::from_json(&json)?;
            let net = net.map(|p| -> anyhow::Result<Net> { Ok(Net::from_json_str(&read(&p)?)?) }).transpose()?;
            let out = apply_op(&d, &op, net.as_ref())?;
            emit(&serde_json::to_string_pretty(&out.to_json())?)?;
        }
        Command::Session(SessionCommand::Run { net, ops, seed, strategy, backend }) => {
            let (net, prior) = read_bundle(&read(&net)?)?.load()?;
            let (trace, marginals) = match backend {
                Backend::Mbn => {
                    let mut run = run_session(&net, Belief::new(prior, strategy)?, ops, seed, None)?;
                    (run.session.trace().to_vec(), run.session.marginals()?)
                }
                Backend::Dense => {
                    let mut run = run_session(&net, DenseBelief::from_prior(&prior)?, ops, seed, None)?;
                    let m = run.session.belief_mut().marginals()?;
                    (run.session.trace().to_vec(), m)
                }
            };
            let out = json!({
                "trace": trace,
                "marginals": net.places().iter().zip(&marginals).map(|(p, v)| json!({"place": p, "p1": v})).collect::<Vec<_>>(),
            });
            emit(&serde_json::to_string_pretty(&out)?)?;
        }
        Command::Bench(args) => {
            let grid: Vec<GenParams> = serde_json::from_str(&read(&args.grid)?)?;
            let cfg = BenchConfig {
                ops: args.ops,
                timeout: Duration::from_secs_f64(args.timeout),
                strategy: args.strategy,
                jobs: args.jobs,
            };
            let cells = bench(&grid, &args.backends, &cfg)?;
            let text = serde_json::to_string_pretty(&cells)?;
            match args.out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?,
                None => emit(&text)?,
            }
        }
        Command::Serve { port, state_dir } => {
            let state = match state_dir {
                Some(dir) => AppState::with_state_dir(dir)?,
                None => AppState::new(),
            };
            tokio::runtime::Runtime::new()?.block_on(serve(port, state))?;
        }
    }
    Ok(())
}

/// Machine-readable code for a CLI failure, when it has one.
pub fn error_code(e: &anyhow::Error) -> Option<&'static str> {
    if let Some(w) = e.downcast_ref::<WbError>() {
        return Some(w.code());
    }
    e.downcast_ref::<cnu_core::Error>().map(|c| c.code())
}
