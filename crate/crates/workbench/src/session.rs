//! Observation sessions: a hidden true marking, a belief about it, and a
//! policy that keeps choosing transitions to attempt.

use std::time::Instant;

use cnu_core::{Belief, Dist, EnabledStatus, FireOutcome, Marking, Mbn, Net, Observation, TieBreak, UpdateStrategy, ZERO_MASS};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{WbError, WbResult};
use crate::gen::expand_obn;

/// How a session represents its belief.
pub trait BeliefBackend {
    /// Probability that attempting `t` succeeds.
    fn whatif(&mut self, net: &Net, t: &str) -> WbResult<f64>;
    /// Conditions on an outcome, returning its prior probability.
    fn observe(&mut self, net: &Net, t: &str, outcome: Observation) -> WbResult<f64>;
    fn marginals(&mut self) -> WbResult<Vec<f64>>;
    /// Mass of one marking, where the backend can afford to compute it.
    fn mass_of(&mut self, m: &Marking) -> WbResult<Option<f64>>;
}

impl BeliefBackend for Belief<f64> {
    fn whatif(&mut self, net: &Net, t: &str) -> WbResult<f64> {
        Ok(Belief::whatif(self, net, t)?)
    }

    fn observe(&mut self, net: &Net, t: &str, outcome: Observation) -> WbResult<f64> {
        Ok(Belief::observe(self, net, t, outcome)?.event_probability)
    }

    fn marginals(&mut self) -> WbResult<Vec<f64>> {
        Ok(Belief::marginals(self)?)
    }

    fn mass_of(&mut self, m: &Marking) -> WbResult<Option<f64>> {
        if m.len() > 12 {
            return Ok(None);
        }
        self.flush()?;
        let joint = self.mbn().eval()?;
        Ok(Some(joint.get(m.code(), 0)))
    }
}

/// The explicit joint distribution.
#[derive(Debug, Clone)]
pub struct DenseBelief(pub Dist<f64>);

impl DenseBelief {
    pub fn from_prior(prior: &Mbn<f64>) -> WbResult<Self> {
        let n = prior.outputs().len();
        Ok(DenseBelief(Dist::new(n, expand_obn(prior)?)?))
    }
}

impl BeliefBackend for DenseBelief {
    fn whatif(&mut self, net: &Net, t: &str) -> WbResult<f64> {
        Ok(self.0.prob_enabled(net, t)?)
    }

    fn observe(&mut self, net: &Net, t: &str, outcome: Observation) -> WbResult<f64> {
        let p = self.0.event_probability(net, t, outcome)?;
        self.0 = self.0.observe(net, t, outcome)?;
        Ok(p)
    }

    fn marginals(&mut self) -> WbResult<Vec<f64>> {
        Ok(self.0.marginals())
    }

    fn mass_of(&mut self, m: &Marking) -> WbResult<Option<f64>> {
        Ok(Some(self.0.mass_of(m)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub transition: String,
    pub outcome: Observation,
    #[serde(rename = "p_B")]
    pub p_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireReport {
    pub outcome: Observation,
    #[serde(rename = "p_B")]
    pub p_b: f64,
    pub marginals: Vec<f64>,
}

/// A running session. The hidden marking is never exposed through the
/// belief; only outcomes of attempts reach the observer.
#[derive(Debug, Clone)]
pub struct Session<B> {
    net: Net,
    hidden: Marking,
    belief: B,
    observer: Option<String>,
    trace: Vec<TraceEntry>,
    rng: ChaCha8Rng,
    tie_break: TieBreak,
}

impl<B: BeliefBackend> Session<B> {
    /// Starts from the net's initial marking as the hidden truth.
    pub fn new(net: Net, belief: B, observer: Option<String>, seed: u64) -> Self {
        let hidden = net.initial_marking().clone();
        Session { net, hidden, belief, observer, trace: Vec::new(), rng: ChaCha8Rng::seed_from_u64(seed), tie_break: TieBreak::PreFirst }
    }

    pub fn net(&self) -> &Net {
        &self.net
    }

    pub fn belief(&self) -> &B {
        &self.belief
    }

    pub fn belief_mut(&mut self) -> &mut B {
        &mut self.belief
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn observer(&self) -> Option<&str> {
        self.observer.as_deref()
    }

    pub fn whatif(&mut self, t: &str) -> WbResult<f64> {
        self.belief.whatif(&self.net, t)
    }

    /// Success probabilities of every transition, in net order.
    pub fn whatif_all(&mut self) -> WbResult<Vec<(String, f64)>> {
        let names: Vec<String> = self.net.transitions().iter().map(|t| t.name.clone()).collect();
        names.into_iter().map(|t| Ok((t.clone(), self.whatif(&t)?))).collect()
    }

    pub fn marginals(&mut self) -> WbResult<Vec<f64>> {
        self.belief.marginals()
    }

    /// Attempts `t` against the hidden marking and updates the belief with
    /// the outcome.
    pub fn fire(&mut self, t: &str) -> WbResult<FireReport> {
        self.net.transition(t)?;
        if !self.net.permits(self.observer.as_deref(), t) {
            return Err(WbError::Forbidden {
                observer: self.observer.clone().unwrap_or_default(),
                transition: t.to_string(),
            });
        }
        let fired = self.net.fire(&self.hidden, t, self.tie_break)?;
        let outcome = fired.observation();
        let p_b = self.belief.observe(&self.net, t, outcome)?;
        if let FireOutcome::Success(next) = fired {
            self.hidden = next;
        }
        self.trace.push(TraceEntry { transition: t.to_string(), outcome, p_b });
        Ok(FireReport { outcome, p_b, marginals: self.belief.marginals()? })
    }

    /// One policy step. With probability 1/3 a transition enabled at the
    /// hidden marking is attempted. Otherwise the attempt is one that fails
    /// at the hidden marking, preferably one the belief still considers
    /// possible, so that the success rate stays near 1/3.
    pub fn step(&mut self, deadline: Option<Instant>) -> WbResult<TraceEntry> {
        let names: Vec<String> = self.net.transitions().iter().map(|t| t.name.clone()).collect();
        let mut possible = Vec::new();
        for t in &names {
            check_deadline(deadline)?;
            possible.push(self.whatif(t)? > ZERO_MASS);
        }
        if !possible.contains(&true) {
            return Err(WbError::NoFireableBelief);
        }
        let enabled: Vec<bool> = names
            .iter()
            .map(|t| self.net.enabled_status(&self.hidden, t).is_ok_and(|s| s == EnabledStatus::Enabled))
            .collect();
        let pool = |pred: &dyn Fn(usize) -> bool| -> Vec<usize> { (0..names.len()).filter(|&i| pred(i)).collect() };
        let succeed = enabled.contains(&true) && self.rng.random_bool(1.0 / 3.0);
        let candidates = if succeed {
            pool(&|i| enabled[i])
        } else {
            [pool(&|i| possible[i] && !enabled[i]), pool(&|i| !enabled[i]), pool(&|i| possible[i])]
                .into_iter()
                .find(|c| !c.is_empty())
                .expect("some transition is possible")
        };
        let pick = names[*candidates.choose(&mut self.rng).expect("non-empty pool")].clone();
        check_deadline(deadline)?;
        let report = self.fire(&pick)?;
        Ok(TraceEntry { transition: pick, outcome: report.outcome, p_b: report.p_b })
    }

    /// Checks that the hidden marking keeps positive mass.
    pub fn hidden_is_possible(&mut self) -> WbResult<Option<bool>> {
        let hidden = self.hidden.clone();
        Ok(self.belief.mass_of(&hidden)?.map(|p| p > 0.0))
    }
}

fn check_deadline(deadline: Option<Instant>) -> WbResult<()> {
    match deadline {
        Some(d) if Instant::now() >= d => Err(WbError::Timeout),
        _ => Ok(()),
    }
}

/// Result of [`run_session`].
#[derive(Debug, Clone)]
pub struct SessionRun<B> {
    pub session: Session<B>,
    pub timed_out: bool,
}

/// Runs `n_ops` policy steps. A deadline stops the run early and is
/// reported rather than treated as an error.
pub fn run_session<B: BeliefBackend>(
    net: &Net,
    belief: B,
    n_ops: usize,
    seed: u64,
    deadline: Option<Instant>,
) -> WbResult<SessionRun<B>> {
    let mut session = Session::new(net.clone(), belief, None, seed);
    for _ in 0..n_ops {
        match session.step(deadline) {
            Ok(_) => {}
            Err(WbError::Timeout) => return Ok(SessionRun { session, timed_out: true }),
            Err(e) => return Err(e),
        }
    }
    Ok(SessionRun { session, timed_out: false })
}

/// Starts a network-backed session from a prior.
pub fn mbn_session(net: &Net, prior: Mbn<f64>, strategy: UpdateStrategy, observer: Option<String>, seed: u64) -> WbResult<Session<Belief<f64>>> {
    Ok(Session::new(net.clone(), Belief::new(prior, strategy)?, observer, seed))
}

/// Re-applies a recorded trace to a belief.
pub fn replay<B: BeliefBackend>(net: &Net, belief: &mut B, trace: &[TraceEntry]) -> WbResult<()> {
    for e in trace {
        belief.observe(net, &e.transition, e.outcome)?;
    }
    Ok(())
}
