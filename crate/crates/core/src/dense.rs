//! Explicit probability mass over all `2^n` markings.
//!
//! This is the reference semantics for every belief update; the factored
//! engine in [`crate::update`] is checked against it. Storage is indexed by
//! marking code (ascending), JSON uses the descending convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::StochMatrix;
use crate::net::{Marking, Net, Observation};
use crate::scalar::{Scalar, EPS_NORM, ZERO_MASS};

/// Largest number of places a dense distribution may range over.
pub const MAX_DENSE_PLACES: usize = 26;

#[derive(Debug, Clone, PartialEq)]
pub struct Dist<T: Scalar = f64> {
    n: usize,
    mass: Vec<T>,
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_DENSE_PLACES {
        return Err(Error::DenseTooLarge(n));
    }
    Ok(())
}

fn place_mask(n: usize, places: &[usize]) -> Result<usize> {
    let mut mask = 0usize;
    for &p in places {
        if p >= n {
            return Err(Error::UnknownPlace(format!("#{p}")));
        }
        mask |= 1 << (n - 1 - p);
    }
    Ok(mask)
}

impl<T: Scalar> Dist<T> {
    /// Validates nonnegativity and normalization of code-indexed masses.
    pub fn new(n: usize, mass: Vec<T>) -> Result<Self> {
        check_size(n)?;
        if mass.len() != 1 << n {
            return Err(Error::InvalidDistribution(format!(
                "expected {} entries for {n} places, got {}",
                1usize << n,
                mass.len()
            )));
        }
        if let Some(v) = mass.iter().find(|v| !v.is_finite() || **v < T::zero()) {
            return Err(Error::InvalidDistribution(format!("entry {v} is not a probability")));
        }
        let total: T = mass.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(EPS_NORM) {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
        }
        Ok(Dist { n, mass })
    }

    /// Masses listed from the all-marked marking down to the empty one.
    pub fn from_desc(n: usize, mut mass_desc: Vec<T>) -> Result<Self> {
        mass_desc.reverse();
        Dist::new(n, mass_desc)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        check_size(n)?;
        let p = T::one() / T::lit((1u64 << n) as f64);
        Ok(Dist { n, mass: vec![p; 1 << n] })
    }

    pub fn point(m: &Marking) -> Result<Self> {
        check_size(m.len())?;
        let mut mass = vec![T::zero(); 1 << m.len()];
        mass[m.code()] = T::one();
        Ok(Dist { n: m.len(), mass })
    }

    /// Reads a `0 -> n` stochastic matrix as a distribution.
    pub fn from_matrix(p: &StochMatrix<T>) -> Result<Self> {
        if p.inputs() != 0 {
            return Err(Error::TypeMismatch(format!("expected a 0->n matrix, got {}->{}", p.inputs(), p.outputs())));
        }
        Dist::new(p.outputs(), p.data().to_vec())
    }

    pub fn to_matrix(&self) -> Result<StochMatrix<T>> {
        StochMatrix::new(0, self.n, self.mass.clone())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn masses(&self) -> &[T] {
        &self.mass
    }

    pub fn mass_desc(&self) -> Vec<T> {
        self.mass.iter().rev().copied().collect()
    }

    pub fn mass_of(&self, m: &Marking) -> T {
        self.mass[m.code()]
    }

    /// Probability that every place of `places` holds value `b`.
    pub fn prob_all(&self, places: &[usize], b: bool) -> Result<T> {
        let mask = place_mask(self.n, places)?;
        let target = if b { mask } else { 0 };
        Ok(self.sum_where(|c| c & mask == target))
    }

    /// Probability that a transition can fire.
    pub fn prob_enabled(&self, net: &Net, t: &str) -> Result<T> {
        let tr = net.transition(t)?;
        self.check_net(net)?;
        let pre = place_mask(self.n, &tr.pre.iter().copied().collect::<Vec<_>>())?;
        let post = place_mask(self.n, &tr.post.iter().copied().collect::<Vec<_>>())?;
        Ok(self.sum_where(|c| c & pre == pre && c & post == 0))
    }

    /// Probability of observing `outcome` when attempting `t`.
    pub fn event_probability(&self, net: &Net, t: &str, outcome: Observation) -> Result<T> {
        let tr = net.transition(t)?;
        self.check_net(net)?;
        let pre: Vec<usize> = tr.pre.iter().copied().collect();
        let post: Vec<usize> = tr.post.iter().copied().collect();
        Ok(match outcome {
            Observation::Success => self.prob_enabled(net, t)?,
            Observation::FailPre if pre.is_empty() => T::zero(),
            Observation::FailPost if post.is_empty() => T::zero(),
            Observation::FailPre => T::one() - self.prob_all(&pre, true)?,
            Observation::FailPost => T::one() - self.prob_all(&post, false)?,
        })
    }

    /// Probability that each place is marked, in place order.
    pub fn marginals(&self) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let bit = 1 << (self.n - 1 - i);
                self.sum_where(|c| c & bit != 0)
            })
            .collect()
    }

    fn sum_where(&self, pred: impl Fn(usize) -> bool) -> T {
        self.mass.iter().enumerate().filter(|(c, _)| pred(*c)).map(|(_, &v)| v).sum()
    }

    fn check_net(&self, net: &Net) -> Result<()> {
        if net.place_count() != self.n {
            return Err(Error::MarkingLengthMismatch { expected: net.place_count(), got: self.n });
        }
        Ok(())
    }

    fn condition(&self, keep: impl Fn(usize) -> bool) -> Result<Self> {
        let total = self.sum_where(&keep);
        if total <= T::lit(ZERO_MASS) {
            return Err(Error::ImpossibleCondition);
        }
        let mass = self
            .mass
            .iter()
            .enumerate()
            .map(|(c, &v)| if keep(c) { v / total } else { T::zero() })
            .collect();
        Ok(Dist { n: self.n, mass })
    }

    /// Conditions on every place of `places` holding value `b`.
    pub fn assert(&self, places: &[usize], b: bool) -> Result<Self> {
        let mask = place_mask(self.n, places)?;
        if mask == 0 {
            return Ok(self.clone());
        }
        let target = if b { mask } else { 0 };
        self.condition(|c| c & mask == target)
    }

    /// Conditions on at least one place of `places` not holding value `b`.
    pub fn nassert(&self, places: &[usize], b: bool) -> Result<Self> {
        if places.is_empty() {
            return Err(Error::EmptyPlaceSet);
        }
        let mask = place_mask(self.n, places)?;
        let target = if b { mask } else { 0 };
        self.condition(|c| c & mask != target)
    }

    /// Forces every place of `places` to `b`, keeping the marginal on the rest.
    pub fn set(&self, places: &[usize], b: bool) -> Result<Self> {
        let mask = place_mask(self.n, places)?;
        let target = if b { mask } else { 0 };
        let mut mass = vec![T::zero(); self.mass.len()];
        for (c, &v) in self.mass.iter().enumerate() {
            let to = (c & !mask) | target;
            mass[to] = mass[to] + v;
        }
        Ok(Dist { n: self.n, mass })
    }

    /// Belief after attempting `t` and observing `outcome`.
    pub fn observe(&self, net: &Net, t: &str, outcome: Observation) -> Result<Self> {
        let tr = net.transition(t)?;
        self.check_net(net)?;
        let pre: Vec<usize> = tr.pre.iter().copied().collect();
        let post: Vec<usize> = tr.post.iter().copied().collect();
        let impossible = |e: Error| match e {
            Error::ImpossibleCondition | Error::EmptyPlaceSet => Error::ImpossibleObservation,
            other => other,
        };
        match outcome {
            Observation::Success => self
                .assert(&pre, true)
                .and_then(|d| d.assert(&post, false))
                .map_err(impossible)?
                .set(&pre, false)?
                .set(&post, true),
            Observation::FailPre => self.nassert(&pre, true).map_err(impossible),
            Observation::FailPost => self.nassert(&post, false).map_err(impossible),
        }
    }

    pub fn max_abs_diff(&self, other: &Dist<T>) -> T {
        if self.n != other.n {
            return T::infinity();
        }
        self.mass
            .iter()
            .zip(&other.mass)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    pub fn to_json(&self) -> DistJson {
        DistJson { n: self.n, order: DESC_BINARY.into(), mass: self.mass_desc().into_iter().map(Scalar::as_f64).collect() }
    }

    pub fn from_json(json: &DistJson) -> Result<Self> {
        if json.order != DESC_BINARY {
            return Err(Error::Parse(format!("unsupported order `{}`", json.order)));
        }
        let mass = json.mass.iter().map(|&v| T::from_f64(v).unwrap_or_else(T::nan)).collect();
        Dist::from_desc(json.n, mass)
    }
}

const DESC_BINARY: &str = "desc-binary";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistJson {
    pub n: usize,
    pub order: String,
    pub mass: Vec<f64>,
}
