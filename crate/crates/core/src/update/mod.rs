//! Belief updates on modular Bayesian networks: surgery for the dense
//! operations, simplification rules, arc reversal and normalization.

mod normalize;
mod observe;
mod reversal;
mod rewrite;
mod split;
mod surgery;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::mbn::{Mbn, ObnCertificate};
use crate::net::{Net, Observation};
use crate::scalar::Scalar;

pub use normalize::{normalize, normalize_via_closure, simplify};
pub use observe::{apply_surgery, event_probability, observe_mbn};
pub use reversal::{eliminate_hidden_node, reverse_arc};
pub use rewrite::{measure, rewrite_fixpoint};
pub use split::{matrix_to_mbn, split_matrix};
pub use surgery::{insert_assert, insert_nassert, insert_set};

/// When simplification runs: after every observation, or once per batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum UpdateStrategy {
    Eager,
    Lazy { batch: usize },
}

impl UpdateStrategy {
    pub fn validate(self) -> Result<Self> {
        match self {
            UpdateStrategy::Lazy { batch: 0 } => Err(Error::InvalidStrategy("lazy batch must be at least 1".into())),
            s => Ok(s),
        }
    }
}

impl fmt::Display for UpdateStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpdateStrategy::Eager => f.write_str("eager"),
            UpdateStrategy::Lazy { batch } => write!(f, "lazy:{batch}"),
        }
    }
}

impl FromStr for UpdateStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidStrategy(format!("`{s}` is neither `eager` nor `lazy:N`"));
        match s.split_once(':') {
            None if s == "eager" => Ok(UpdateStrategy::Eager),
            Some(("lazy", n)) => UpdateStrategy::Lazy { batch: n.parse().map_err(|_| bad())? }.validate(),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for UpdateStrategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<UpdateStrategy> for String {
    fn from(s: UpdateStrategy) -> String {
        s.to_string()
    }
}

/// Outcome of normalizing a network.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationReport<T: Scalar = f64> {
    /// Mass factored out, the product of the per-node factors.
    pub p_b: T,
    /// Nodes rescaled and the mass each carried.
    pub factors: Vec<(NodeId, T)>,
    /// The network had zero mass and was returned unchanged.
    pub zero_mass: bool,
    /// Simplification was postponed; `p_b` is then one.
    pub deferred: bool,
    /// Probability of the observed event under the belief before the update.
    pub event_probability: T,
}

impl<T: Scalar> NormalizationReport<T> {
    pub(crate) fn unit() -> Self {
        NormalizationReport {
            p_b: T::one(),
            factors: Vec::new(),
            zero_mass: false,
            deferred: false,
            event_probability: T::one(),
        }
    }
}

/// A belief held as a network, updated under a fixed strategy. Queries
/// settle any postponed simplification first.
#[derive(Debug, Clone)]
pub struct Belief<T: Scalar = f64> {
    mbn: Mbn<T>,
    strategy: UpdateStrategy,
    pending: usize,
}

impl<T: Scalar> Belief<T> {
    pub fn new(prior: Mbn<T>, strategy: UpdateStrategy) -> Result<Self> {
        if let ObnCertificate::Fails(reason) = prior.is_obn() {
            return Err(Error::NotObn(format!("{reason:?}")));
        }
        Ok(Belief { mbn: prior, strategy: strategy.validate()?, pending: 0 })
    }

    pub fn mbn(&self) -> &Mbn<T> {
        &self.mbn
    }

    pub fn into_mbn(self) -> Mbn<T> {
        self.mbn
    }

    pub fn strategy(&self) -> UpdateStrategy {
        self.strategy
    }

    /// Observations whose simplification is still outstanding.
    pub fn pending(&self) -> usize {
        self.pending
    }

    pub fn observe(&mut self, net: &Net, t: &str, outcome: Observation) -> Result<NormalizationReport<T>> {
        let (next, report) = observe_mbn(&self.mbn, net, t, outcome, self.strategy)?;
        self.mbn = next;
        let UpdateStrategy::Lazy { batch } = self.strategy else { return Ok(report) };
        self.pending += 1;
        if self.pending < batch {
            return Ok(report);
        }
        let mut flushed = self.flush()?.expect("observations are pending");
        flushed.event_probability = report.event_probability;
        Ok(flushed)
    }

    /// Runs any postponed simplification.
    pub fn flush(&mut self) -> Result<Option<NormalizationReport<T>>> {
        if self.pending == 0 {
            return Ok(None);
        }
        let report = normalize::simplify_in_place(&mut self.mbn)?;
        if report.zero_mass {
            return Err(Error::ImpossibleObservation);
        }
        self.pending = 0;
        Ok(Some(report))
    }

    /// Probability that each place is marked.
    pub fn marginals(&mut self) -> Result<Vec<T>> {
        self.flush()?;
        (0..self.mbn.outputs().len()).map(|i| Ok(self.mbn.marginal(&[i])?.get(1, 0))).collect()
    }

    /// Probability that attempting `t` succeeds.
    pub fn whatif(&mut self, net: &Net, t: &str) -> Result<T> {
        self.flush()?;
        event_probability(&self.mbn, net, t, Observation::Success)
    }
}
