//! The dense-versus-network runtime comparison: every grid cell runs the
//! same seeded session against each backend.

use std::time::{Duration, Instant};

use cnu_core::{Belief, Net, Observation, UpdateStrategy};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{WbError, WbResult};
use crate::gen::{gen_net, GenParams};
use crate::session::{run_session, BeliefBackend, DenseBelief, SessionRun, TraceEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Dense,
    Mbn,
}

impl std::str::FromStr for Backend {
    type Err = WbError;

    fn from_str(s: &str) -> WbResult<Self> {
        match s {
            "dense" => Ok(Backend::Dense),
            "mbn" => Ok(Backend::Mbn),
            other => Err(WbError::BadRequest(format!("unknown backend `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub ops: usize,
    pub timeout: Duration,
    pub strategy: UpdateStrategy,
    /// Worker threads; cells run one per worker.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { ops: 100, timeout: Duration::from_secs(60), strategy: UpdateStrategy::Eager, jobs: 1 }
    }
}

/// One record per grid cell and backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub params: GenParams,
    pub backend: Backend,
    pub mean_ms: f64,
    pub ops: usize,
    pub timeout: bool,
    pub successes: usize,
    /// Largest marginal difference to the other backend, when both finished.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_diff: Option<f64>,
    /// Set on the network cell when the dense cell finished too.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalent: Option<bool>,
}

/// Tolerance for calling the two backends equivalent.
pub const EQUIVALENCE_TOL: f64 = 1e-6;

struct Outcome {
    cell: BenchCell,
    trace: Vec<TraceEntry>,
    marginals: Option<Vec<f64>>,
}

fn run_backend(net: &Net, prior: &cnu_core::Mbn<f64>, params: &GenParams, backend: Backend, cfg: &BenchConfig) -> WbResult<Outcome> {
    let start = Instant::now();
    let deadline = Some(start + cfg.timeout);
    fn finish<B: BeliefBackend>(run: WbResult<SessionRun<B>>) -> WbResult<(Vec<TraceEntry>, bool, Option<Vec<f64>>)> {
        let mut run = run?;
        let marginals = if run.timed_out { None } else { Some(run.session.marginals()?) };
        Ok((run.session.trace().to_vec(), run.timed_out, marginals))
    }
    let (trace, timed_out, marginals) = match backend {
        Backend::Dense => {
            let belief = DenseBelief::from_prior(prior)?;
            if Instant::now() >= start + cfg.timeout {
                (Vec::new(), true, None)
            } else {
                finish(run_session(net, belief, cfg.ops, params.seed, deadline))?
            }
        }
        Backend::Mbn => finish(run_session(net, Belief::new(prior.clone(), cfg.strategy)?, cfg.ops, params.seed, deadline))?,
    };
    let cell = BenchCell {
        params: params.clone(),
        backend,
        mean_ms: start.elapsed().as_secs_f64() * 1e3,
        ops: trace.len(),
        timeout: timed_out,
        successes: trace.iter().filter(|e| e.outcome == Observation::Success).count(),
        max_diff: None,
        equivalent: None,
    };
    Ok(Outcome { cell, trace, marginals })
}

fn run_cell(params: &GenParams, backends: &[Backend], cfg: &BenchConfig) -> WbResult<Vec<BenchCell>> {
    let (net, prior) = gen_net(params)?;
    let outcomes = backends.iter().map(|&b| run_backend(&net, &prior, params, b, cfg)).collect::<WbResult<Vec<_>>>()?;
    let mut cells: Vec<BenchCell> = outcomes.iter().map(|o| o.cell.clone()).collect();
    let dense = outcomes.iter().position(|o| o.cell.backend == Backend::Dense);
    let mbn = outcomes.iter().position(|o| o.cell.backend == Backend::Mbn);
    if let (Some(d), Some(m)) = (dense, mbn) {
        if let (Some(a), Some(b)) = (&outcomes[d].marginals, &outcomes[m].marginals) {
            let diff = a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
            let same_trace = outcomes[d].trace.iter().zip(&outcomes[m].trace).all(|(x, y)| x.transition == y.transition && x.outcome == y.outcome);
            cells[d].max_diff = Some(diff);
            cells[m].max_diff = Some(diff);
            cells[m].equivalent = Some(same_trace && diff <= EQUIVALENCE_TOL);
        }
    }
    Ok(cells)
}

/// Runs every grid entry against every backend. Timeouts are recorded in
/// the cell; other failures abort.
pub fn bench(grid: &[GenParams], backends: &[Backend], cfg: &BenchConfig) -> WbResult<Vec<BenchCell>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| WbError::BadRequest(e.to_string()))?;
    let per_cell: Vec<WbResult<Vec<BenchCell>>> =
        pool.install(|| grid.par_iter().map(|p| run_cell(p, backends, cfg)).collect());
    per_cell.into_iter().try_fold(Vec::new(), |mut acc, cells| {
        acc.extend(cells?);
        Ok(acc)
    })
}
