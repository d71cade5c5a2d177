//! Condition/event nets: places hold at most one token, a transition fires
//! when its pre-places are all marked and its post-places are all empty.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A possible world: bit `i` is set iff place `i` holds a token.
///
/// Places are numbered from zero in declaration order; when a marking is
/// read as a binary number the first place is the most significant bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking(Vec<bool>);

impl Marking {
    pub fn empty(n: usize) -> Self {
        Marking(vec![false; n])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Marking(bits)
    }

    /// Marking with exactly the given places marked.
    pub fn from_places(n: usize, marked: impl IntoIterator<Item = usize>) -> Self {
        let mut bits = vec![false; n];
        for p in marked {
            bits[p] = true;
        }
        Marking(bits)
    }

    /// Decodes a binary code with the first place as the most significant bit.
    pub fn from_code(code: usize, n: usize) -> Self {
        Marking((0..n).map(|i| code >> (n - 1 - i) & 1 == 1).collect())
    }

    pub fn code(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| acc << 1 | usize::from(b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, place: usize) -> bool {
        self.0[place]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn marked(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub name: String,
    pub pre: BTreeSet<usize>,
    pub post: BTreeSet<usize>,
}

impl Transition {
    /// Places mentioned by the transition, pre-set first.
    pub fn touched(&self) -> impl Iterator<Item = usize> + '_ {
        self.pre.iter().chain(self.post.iter()).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnabledStatus {
    Enabled,
    BlockedPre,
    BlockedPost,
    BlockedBoth,
}

/// What an observer learns from an attempt to fire a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observation {
    Success,
    FailPre,
    FailPost,
}

impl Observation {
    pub fn name(self) -> &'static str {
        match self {
            Observation::Success => "Success",
            Observation::FailPre => "FailPre",
            Observation::FailPost => "FailPost",
        }
    }
}

impl std::str::FromStr for Observation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "success" => Ok(Observation::Success),
            "failpre" => Ok(Observation::FailPre),
            "failpost" => Ok(Observation::FailPost),
            _ => Err(Error::Parse(format!("unknown outcome `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FireOutcome {
    Success(Marking),
    FailPre,
    FailPost,
}

impl FireOutcome {
    pub fn observation(&self) -> Observation {
        match self {
            FireOutcome::Success(_) => Observation::Success,
            FireOutcome::FailPre => Observation::FailPre,
            FireOutcome::FailPost => Observation::FailPost,
        }
    }
}

/// Which failure is reported when a transition is blocked for both reasons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    PreFirst,
    /// Seeded coin flip; the choice is a pure function of seed, transition and marking.
    Random(u64),
}

/// An immutable condition/event net.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    places: Vec<String>,
    transitions: Vec<Transition>,
    initial_marking: Marking,
    observers: BTreeMap<String, BTreeSet<String>>,
}

impl Net {
    pub fn new(
        places: Vec<String>,
        transitions: Vec<Transition>,
        initial_marking: Marking,
        observers: BTreeMap<String, BTreeSet<String>>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &places {
            if !seen.insert(p.as_str()) {
                return Err(Error::InvalidNet(format!("duplicate place `{p}`")));
            }
        }
        let n = places.len();
        let mut names = HashSet::new();
        for t in &transitions {
            if !names.insert(t.name.as_str()) {
                return Err(Error::InvalidNet(format!("duplicate transition `{}`", t.name)));
            }
            if let Some(p) = t.touched().find(|&p| p >= n) {
                return Err(Error::InvalidNet(format!(
                    "transition `{}` refers to place index {p} outside the net",
                    t.name
                )));
            }
            if !t.pre.is_disjoint(&t.post) {
                return Err(Error::InvalidNet(format!(
                    "transition `{}` has overlapping pre- and post-set",
                    t.name
                )));
            }
        }
        if initial_marking.len() != n {
            return Err(Error::MarkingLengthMismatch { expected: n, got: initial_marking.len() });
        }
        for (observer, allowed) in &observers {
            if let Some(t) = allowed.iter().find(|t| !names.contains(t.as_str())) {
                return Err(Error::InvalidNet(format!(
                    "observer `{observer}` refers to unknown transition `{t}`"
                )));
            }
        }
        Ok(Net { places, transitions, initial_marking, observers })
    }

    pub fn place_count(&self) -> usize {
        self.places.len()
    }

    pub fn places(&self) -> &[String] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial_marking
    }

    pub fn observers(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.observers
    }

    pub fn place_index(&self, name: &str) -> Result<usize> {
        self.places
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::UnknownPlace(name.to_string()))
    }

    pub fn transition(&self, name: &str) -> Result<&Transition> {
        self.transitions
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::UnknownTransition(name.to_string()))
    }

    /// Whether `observer` may fire `transition`. Unknown observers and nets
    /// without an observer table impose no restriction.
    pub fn permits(&self, observer: Option<&str>, transition: &str) -> bool {
        match observer.and_then(|o| self.observers.get(o)) {
            Some(allowed) => allowed.contains(transition),
            None => true,
        }
    }

    fn check_marking(&self, m: &Marking) -> Result<()> {
        if m.len() != self.places.len() {
            return Err(Error::MarkingLengthMismatch { expected: self.places.len(), got: m.len() });
        }
        Ok(())
    }

    pub fn enabled_status(&self, m: &Marking, t: &str) -> Result<EnabledStatus> {
        let t = self.transition(t)?;
        self.check_marking(m)?;
        Ok(status_of(t, m))
    }

    pub fn fire(&self, m: &Marking, t: &str, tie_break: TieBreak) -> Result<FireOutcome> {
        let tr = self.transition(t)?;
        self.check_marking(m)?;
        Ok(match status_of(tr, m) {
            EnabledStatus::Enabled => {
                let mut bits = m.0.clone();
                for &p in &tr.pre {
                    bits[p] = false;
                }
                for &p in &tr.post {
                    bits[p] = true;
                }
                FireOutcome::Success(Marking(bits))
            }
            EnabledStatus::BlockedPre => FireOutcome::FailPre,
            EnabledStatus::BlockedPost => FireOutcome::FailPost,
            EnabledStatus::BlockedBoth => match tie_break {
                TieBreak::PreFirst => FireOutcome::FailPre,
                TieBreak::Random(seed) => {
                    let t_index = self.transitions.iter().position(|x| x.name == t).unwrap_or(0);
                    let mix = seed
                        ^ (t_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
                        ^ hash_bits(m.bits());
                    if ChaCha8Rng::seed_from_u64(mix).random_bool(0.5) {
                        FireOutcome::FailPre
                    } else {
                        FireOutcome::FailPost
                    }
                }
            },
        })
    }

    pub fn to_json(&self) -> NetJson {
        let names = |set: &BTreeSet<usize>| set.iter().map(|&p| self.places[p].clone()).collect();
        NetJson {
            places: self.places.clone(),
            transitions: self
                .transitions
                .iter()
                .map(|t| TransitionJson { name: t.name.clone(), pre: names(&t.pre), post: names(&t.post) })
                .collect(),
            initial_marking: self.initial_marking.marked().map(|p| self.places[p].clone()).collect(),
            observers: self.observers.clone(),
        }
    }

    pub fn from_json(json: &NetJson) -> Result<Self> {
        let index = |name: &String| {
            json.places
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| Error::InvalidNet(format!("unknown place `{name}`")))
        };
        let mut transitions = Vec::with_capacity(json.transitions.len());
        for t in &json.transitions {
            transitions.push(Transition {
                name: t.name.clone(),
                pre: t.pre.iter().map(index).collect::<Result<_>>()?,
                post: t.post.iter().map(index).collect::<Result<_>>()?,
            });
        }
        let marked = json.initial_marking.iter().map(index).collect::<Result<Vec<_>>>()?;
        let m0 = Marking::from_places(json.places.len(), marked);
        Net::new(json.places.clone(), transitions, m0, json.observers.clone())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Net::from_json(&serde_json::from_str(s)?)
    }
}

fn status_of(t: &Transition, m: &Marking) -> EnabledStatus {
    let pre_ok = t.pre.iter().all(|&p| m.get(p));
    let post_ok = t.post.iter().all(|&p| !m.get(p));
    match (pre_ok, post_ok) {
        (true, true) => EnabledStatus::Enabled,
        (false, true) => EnabledStatus::BlockedPre,
        (true, false) => EnabledStatus::BlockedPost,
        (false, false) => EnabledStatus::BlockedBoth,
    }
}

fn hash_bits(bits: &[bool]) -> u64 {
    // FNV-1a over the bit pattern; stable across platforms and runs.
    bits.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Wire format of a net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetJson {
    pub places: Vec<String>,
    pub transitions: Vec<TransitionJson>,
    #[serde(default)]
    pub initial_marking: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub observers: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionJson {
    pub name: String,
    #[serde(default)]
    pub pre: Vec<String>,
    #[serde(default)]
    pub post: Vec<String>,
}
