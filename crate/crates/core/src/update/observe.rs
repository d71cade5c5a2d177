//! Conditioning a network belief on the outcome of a transition attempt.

use crate::error::{Error, Result};
use crate::mbn::Mbn;
use crate::net::{Net, Observation};
use crate::scalar::{Scalar, ZERO_MASS};

use super::normalize::simplify_in_place;
use super::surgery::{insert_assert, insert_nassert, insert_set};
use super::{NormalizationReport, UpdateStrategy};

/// Probability, under the normalized belief, of the event the update for
/// `outcome` conditions on. A failed postcondition only conditions on the
/// postset, exactly like the update itself.
pub fn event_probability<T: Scalar>(mbn: &Mbn<T>, net: &Net, t: &str, outcome: Observation) -> Result<T> {
    let tr = net.transition(t)?;
    check_net(mbn, net)?;
    let places: Vec<usize> = tr.pre.union(&tr.post).copied().collect();
    let marg = mbn.marginal(&places)?;
    let k = places.len();
    let bit = |c: usize, p: usize| {
        let pos = places.iter().position(|&q| q == p).expect("touched place");
        c >> (k - 1 - pos) & 1 == 1
    };
    let all = |c: usize, set: &std::collections::BTreeSet<usize>, b: bool| set.iter().all(|&p| bit(c, p) == b);
    let (mut hit, mut total) = (T::zero(), T::zero());
    for c in 0..1usize << k {
        let v = marg.get(c, 0);
        total = total + v;
        let pre_ok = all(c, &tr.pre, true);
        let post_ok = all(c, &tr.post, false);
        let counts = match outcome {
            Observation::Success => pre_ok && post_ok,
            Observation::FailPre => !tr.pre.is_empty() && !pre_ok,
            Observation::FailPost => !tr.post.is_empty() && !post_ok,
        };
        if counts {
            hit = hit + v;
        }
    }
    if total <= T::lit(ZERO_MASS) {
        return Err(Error::ImpossibleCondition);
    }
    Ok(hit / total)
}

/// The raw, unsimplified network after the surgery for `outcome`.
pub fn apply_surgery<T: Scalar>(mbn: &Mbn<T>, net: &Net, t: &str, outcome: Observation) -> Result<Mbn<T>> {
    let tr = net.transition(t)?;
    check_net(mbn, net)?;
    let pre: Vec<usize> = tr.pre.iter().copied().collect();
    let post: Vec<usize> = tr.post.iter().copied().collect();
    let impossible = |e: Error| if e == Error::EmptyPlaceSet { Error::ImpossibleObservation } else { e };
    match outcome {
        Observation::Success => {
            let m = insert_assert(mbn, &pre, true)?;
            let m = insert_assert(&m, &post, false)?;
            let m = insert_set(&m, &pre, false)?;
            insert_set(&m, &post, true)
        }
        Observation::FailPre => insert_nassert(mbn, &pre, true).map_err(impossible),
        Observation::FailPost => insert_nassert(mbn, &post, false).map_err(impossible),
    }
}

/// Updates the belief with the outcome of attempting `t`. Eager strategies
/// simplify immediately; lazy ones return the raw network and report the
/// normalization as deferred.
pub fn observe_mbn<T: Scalar>(
    mbn: &Mbn<T>,
    net: &Net,
    t: &str,
    outcome: Observation,
    strategy: UpdateStrategy,
) -> Result<(Mbn<T>, NormalizationReport<T>)> {
    let p = event_probability(mbn, net, t, outcome).map_err(|e| match e {
        Error::ImpossibleCondition => Error::ImpossibleObservation,
        other => other,
    })?;
    if p <= T::lit(ZERO_MASS) {
        return Err(Error::ImpossibleObservation);
    }
    let mut raw = apply_surgery(mbn, net, t, outcome)?;
    let mut report = match strategy {
        UpdateStrategy::Eager => {
            let report = simplify_in_place(&mut raw)?;
            if report.zero_mass {
                return Err(Error::ImpossibleObservation);
            }
            report
        }
        UpdateStrategy::Lazy { .. } => NormalizationReport { deferred: true, ..NormalizationReport::unit() },
    };
    report.event_probability = p;
    Ok((raw, report))
}

fn check_net<T: Scalar>(mbn: &Mbn<T>, net: &Net) -> Result<()> {
    if mbn.outputs().len() != net.place_count() || mbn.inputs() != 0 {
        return Err(Error::TypeMismatch(format!(
            "belief of type {}->{} does not match a net with {} places",
            mbn.inputs(),
            mbn.outputs().len(),
            net.place_count()
        )));
    }
    Ok(())
}
