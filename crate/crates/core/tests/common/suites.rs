//! One check per acceptance criterion. Each returns a one-line summary on
//! success and the first violation otherwise, so the same code backs the
//! per-crate integration tests and the workspace acceptance report.

use std::collections::BTreeMap;
use std::time::Instant;

use cnu_core::fixtures::{self, fig2};
use cnu_core::graph::{CausalityGraph, GraphConstant};
use cnu_core::mbn::{constant_network, unit_network};
use cnu_core::update::{
    eliminate_hidden_node, insert_assert, insert_nassert, insert_set, measure, normalize, observe_mbn,
    rewrite_fixpoint, split_matrix,
};
use cnu_core::{
    Belief, Dist, Error, Marking, MatrixKind, Mbn, MbnNode, Net, ObnCertificate, Observation, StochMatrix,
    UpdateStrategy, Wire,
};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::*;

pub type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn k(kind: MatrixKind<f64>) -> M {
    StochMatrix::constant(kind).unwrap()
}

fn seq(a: &M, b: &M) -> M {
    a.compose(b).unwrap()
}

fn par(a: &M, b: &M) -> M {
    a.tensor(b).unwrap()
}

fn close(a: &M, b: &M, tol: f64, what: &str) -> Result<f64, String> {
    let d = dist(a, b);
    ensure!(d <= tol, "{what}: distance {d:e} exceeds {tol:e}");
    Ok(d)
}

fn dist_of(mbn: &Mbn<f64>) -> Dist<f64> {
    Dist::from_matrix(&mbn.eval().unwrap()).unwrap()
}

fn outcomes() -> [Observation; 3] {
    [Observation::Success, Observation::FailPre, Observation::FailPost]
}

/// Dense replay of the two-step example, column by column.
pub fn criterion_1() -> Outcome {
    let start = Instant::now();
    let net = fixtures::fig2_net();
    let p = |name: &str| net.place_index(name).unwrap();
    let (s1, s2, s3) = (p("S1"), p("S2"), p("S3"));
    let init = Dist::from_desc(3, fig2::INIT.to_vec()).unwrap();
    let steps = [
        init.assert(&[s2], true).unwrap(),
        init.assert(&[s2], true).unwrap().assert(&[s3], false).unwrap(),
        init.assert(&[s2], true).unwrap().assert(&[s3], false).unwrap().set(&[s2], false).unwrap(),
    ];
    let after_t4 = steps[2].set(&[s3], true).unwrap();
    let after_t1 = after_t4.nassert(&[s1], true).unwrap();
    let expected = [fig2::AS_S2_1, fig2::AS_S3_0, fig2::SET_S2_0, fig2::SET_S3_1, fig2::NAS_S1_1];
    let got = [&steps[0], &steps[1], &steps[2], &after_t4, &after_t1];
    let mut worst: f64 = 0.0;
    for (i, (d, col)) in got.iter().zip(expected).enumerate() {
        let e = vec_dist(&d.mass_desc(), &col);
        ensure!(e <= 1e-12, "column {} off by {e:e}", i + 1);
        worst = worst.max(e);
    }
    let via_observe = init
        .observe(&net, "t4", Observation::Success)
        .and_then(|d| d.observe(&net, "t1", Observation::FailPre))
        .map_err(|e| e.to_string())?;
    ensure!(via_observe.max_abs_diff(&after_t1) <= 1e-12, "observe disagrees with the primitive chain");
    let point = Marking::from_places(3, [s3]);
    ensure!((after_t1.mass_of(&point) - 1.0).abs() <= 1e-12, "final belief is not the point mass on S3");
    let elapsed = start.elapsed();
    ensure!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    Ok(format!("5 columns, max error {worst:.1e}, {:.2} ms", elapsed.as_secs_f64() * 1e3))
}

/// Factored pipeline from the three-node prior with eager simplification.
pub fn criterion_2() -> Outcome {
    let net = fixtures::fig2_net();
    let prior = fixtures::fig4_mbn();
    let init_err = vec_dist(&dist_of(&prior).mass_desc(), &fig2::INIT);
    ensure!(init_err <= 1e-9, "prior evaluates {init_err:e} away from the initial column");
    let (b1, r1) =
        observe_mbn(&prior, &net, "t4", Observation::Success, UpdateStrategy::Eager).map_err(|e| e.to_string())?;
    let (b2, r2) =
        observe_mbn(&b1, &net, "t1", Observation::FailPre, UpdateStrategy::Eager).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (name, b, col) in [("t4", &b1, fig2::SET_S3_1), ("t1", &b2, fig2::NAS_S1_1)] {
        ensure!(b.is_obn() == ObnCertificate::IsObn, "belief after {name} is not ordinary: {:?}", b.is_obn());
        let e = vec_dist(&dist_of(b).mass_desc(), &col);
        ensure!(e <= 1e-9, "belief after {name} off by {e:e}");
        worst = worst.max(e);
    }
    ensure!((r1.p_b - 1.0 / 3.0).abs() <= 1e-9, "first p_B = {}", r1.p_b);
    ensure!((r2.p_b - 0.5).abs() <= 1e-9, "second p_B = {}", r2.p_b);
    Ok(format!("p_B = {:.6}, {:.6}; max error {worst:.1e}", r1.p_b, r2.p_b))
}

/// Dense conditioning against enumeration from the definition.
pub fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = r.random_range(1..=5);
        let ts = r.random_range(1..=4);
        let net = random_net(&mut r, n, ts);
        let mass = random_dist(&mut r, n);
        let d = Dist::new(n, mass.clone()).unwrap();
        for t in net.transitions() {
            for o in outcomes() {
                match (d.observe(&net, &t.name, o), brute_observe(&net, &mass, &t.name, o)) {
                    (Ok(got), Some(want)) => {
                        let e = vec_dist(got.masses(), &want);
                        ensure!(e <= 1e-12, "case {case}, {} {o:?}: off by {e:e}", t.name);
                        worst = worst.max(e);
                        checked += 1;
                    }
                    (Err(Error::ImpossibleObservation), None) => {}
                    (got, want) => {
                        return Err(format!("case {case}, {} {o:?}: got {got:?}, expected {want:?}", t.name));
                    }
                }
            }
        }
    }
    Ok(format!("100 nets, {checked} conditional distributions, max error {worst:.1e}"))
}

fn matrix_axioms(r: &mut ChaCha8Rng) -> Result<f64, String> {
    let mass = if r.random_bool(0.5) { Mass::Stochastic } else { Mass::Sub };
    let d: Vec<usize> = (0..6).map(|_| r.random_range(0..=2)).collect();
    let t1 = random_matrix(r, d[0], d[1], mass);
    let t3 = random_matrix(r, d[1], d[2], mass);
    let t2 = random_matrix(r, d[3], d[4], mass);
    let t4 = random_matrix(r, d[4], d[5], mass);
    let t5 = random_matrix(r, d[2], d[0], mass);
    let mut worst: f64 = 0.0;
    let mut eq = |a: M, b: M, what: &str| -> Result<(), String> {
        worst = worst.max(close(&a, &b, 1e-12, what)?);
        Ok(())
    };
    eq(seq(&t1, &t3), compose_oracle(&t1, &t3), "composition")?;
    eq(par(&t1, &t2), tensor_oracle(&t1, &t2), "tensor")?;
    eq(par(&seq(&t1, &t3), &seq(&t2, &t4)), seq(&par(&t1, &t2), &par(&t3, &t4)), "interchange")?;
    eq(seq(&seq(&t1, &t3), &t5), seq(&t1, &seq(&t3, &t5)), "associativity of ;")?;
    eq(par(&par(&t1, &t2), &t3), par(&t1, &par(&t2, &t3)), "associativity of tensor")?;
    eq(seq(&M::id(t1.inputs()), &t1), t1.clone(), "left identity")?;
    eq(seq(&t1, &M::id(t1.outputs())), t1.clone(), "right identity")?;
    eq(par(&M::id(0), &t1), t1.clone(), "id_0 on the left")?;
    eq(par(&t1, &M::id(0)), t1.clone(), "id_0 on the right")?;
    let m = r.random_range(0..=2);
    let (kk, l) = (t1.inputs(), t1.outputs());
    eq(
        seq(&par(&t1, &M::id(m)), &k(MatrixKind::Sigma(l, m))),
        seq(&k(MatrixKind::Sigma(kk, m)), &par(&M::id(m), &t1)),
        "naturality of sigma",
    )?;
    let (inp, out) = (mass == Mass::Stochastic, [t1.is_stochastic(), seq(&t1, &t3).is_stochastic()]);
    if inp {
        ensure!(out.iter().all(|&s| s), "composites of stochastic matrices must be stochastic");
    }
    let sums = par(&seq(&t1, &t3), &t2).column_sums();
    ensure!(sums.iter().all(|&s| s <= 1.0 + 1e-12), "composites of sub-stochastic matrices exceed mass one");
    Ok(worst)
}

fn constant_laws() -> Result<(), String> {
    let nabla = k(MatrixKind::Nabla(1));
    let sigma = k(MatrixKind::Sigma(1, 1));
    let top = k(MatrixKind::Top(1));
    let id = M::id(1);
    close(&seq(&sigma, &sigma), &M::id(2), 1e-12, "sigma;sigma")?;
    close(&seq(&nabla, &par(&nabla, &id)), &seq(&nabla, &par(&id, &nabla)), 1e-12, "coassociativity")?;
    close(&nabla, &seq(&nabla, &sigma), 1e-12, "cocommutativity")?;
    close(&seq(&nabla, &par(&id, &top)), &id, 1e-12, "counit")?;
    for n in 0..=4 {
        close(&M::id(n + 1), &par(&M::id(n), &id), 1e-12, "id_{n+1}")?;
        close(&k(MatrixKind::Sigma(n, 0)), &M::id(n), 1e-12, "sigma_{n,0}")?;
        close(&k(MatrixKind::Sigma(0, n)), &M::id(n), 1e-12, "sigma_{0,n}")?;
        let s_n1 = k(MatrixKind::Sigma(n, 1));
        let rhs = seq(&par(&id, &s_n1), &par(&sigma, &M::id(n)));
        close(&k(MatrixKind::Sigma(n + 1, 1)), &rhs, 1e-12, "sigma_{n+1,1}")?;
        for m in 0..=3 {
            let rhs = seq(&par(&k(MatrixKind::Sigma(n, m)), &id), &par(&M::id(m), &s_n1));
            close(&k(MatrixKind::Sigma(n, m + 1)), &rhs, 1e-12, "sigma_{n,m+1}")?;
        }
        if n >= 1 {
            let rhs = seq(
                &par(&k(MatrixKind::Nabla(n)), &nabla),
                &par(&par(&M::id(n), &s_n1), &id),
            );
            close(&k(MatrixKind::Nabla(n + 1)), &rhs, 1e-12, "nabla_{n+1}")?;
            close(&k(MatrixKind::Top(n + 1)), &par(&k(MatrixKind::Top(n)), &top), 1e-12, "top_{n+1}")?;
        }
    }
    Ok(())
}

fn random_graph(r: &mut ChaCha8Rng, inputs: usize, outputs: usize) -> CausalityGraph {
    let nodes = r.random_range(0..=4);
    random_mbn(r, inputs, nodes, outputs, 2, false).graph()
}

fn iso(a: &CausalityGraph, b: &CausalityGraph, what: &str) -> Result<(), String> {
    ensure!(a.isomorphic(b).is_some(), "{what}: graphs are not isomorphic");
    Ok(())
}

fn gseq(a: &CausalityGraph, b: &CausalityGraph) -> CausalityGraph {
    a.compose(b).unwrap()
}

fn gc(c: GraphConstant) -> CausalityGraph {
    CausalityGraph::constant(c)
}

fn graph_axioms(r: &mut ChaCha8Rng) -> Result<(), String> {
    let d: Vec<usize> = (0..6).map(|_| r.random_range(0..=3)).collect();
    let t1 = random_graph(r, d[0], d[1]);
    let t3 = random_graph(r, d[1], d[2]);
    let t2 = random_graph(r, d[3], d[4]);
    let t4 = random_graph(r, d[4], d[5]);
    let t5 = random_graph(r, d[2], d[0]);
    let id = CausalityGraph::identity;
    iso(&gseq(&t1, &t3).tensor(&gseq(&t2, &t4)), &gseq(&t1.tensor(&t2), &t3.tensor(&t4)), "interchange")?;
    iso(&gseq(&gseq(&t1, &t3), &t5), &gseq(&t1, &gseq(&t3, &t5)), "associativity of ;")?;
    iso(&t1.tensor(&t2).tensor(&t3), &t1.tensor(&t2.tensor(&t3)), "associativity of tensor")?;
    iso(&gseq(&id(d[0]), &t1), &t1, "left identity")?;
    iso(&gseq(&t1, &id(d[1])), &t1, "right identity")?;
    iso(&id(0).tensor(&t1), &t1, "id_0 on the left")?;
    iso(&t1.tensor(&id(0)), &t1, "id_0 on the right")?;
    let m = r.random_range(0..=2);
    iso(
        &gseq(&t1.tensor(&id(m)), &gc(GraphConstant::Sigma(d[1], m))),
        &gseq(&gc(GraphConstant::Sigma(d[0], m)), &id(m).tensor(&t1)),
        "naturality of sigma",
    )?;
    let nabla = gc(GraphConstant::Nabla(1));
    let sigma = gc(GraphConstant::Sigma(1, 1));
    let top = gc(GraphConstant::Top(1));
    iso(&gseq(&sigma, &sigma), &id(2), "sigma;sigma")?;
    iso(&gseq(&nabla, &nabla.tensor(&id(1))), &gseq(&nabla, &id(1).tensor(&nabla)), "coassociativity")?;
    iso(&nabla, &gseq(&nabla, &sigma), "cocommutativity")?;
    iso(&gseq(&nabla, &id(1).tensor(&top)), &id(1), "counit")?;
    let n = r.random_range(1..=4);
    let s_n1 = gc(GraphConstant::Sigma(n, 1));
    iso(
        &gc(GraphConstant::Sigma(n + 1, 1)),
        &gseq(&id(1).tensor(&s_n1), &sigma.tensor(&id(n))),
        "sigma_{n+1,1}",
    )?;
    iso(
        &gc(GraphConstant::Sigma(n, m + 1)),
        &gseq(&gc(GraphConstant::Sigma(n, m)).tensor(&id(1)), &id(m).tensor(&s_n1)),
        "sigma_{n,m+1}",
    )?;
    iso(
        &gc(GraphConstant::Nabla(n + 1)),
        &gseq(&gc(GraphConstant::Nabla(n)).tensor(&nabla), &id(n).tensor(&s_n1).tensor(&id(1))),
        "nabla_{n+1}",
    )?;
    iso(&gc(GraphConstant::Top(n + 1)), &gc(GraphConstant::Top(n)).tensor(&top), "top_{n+1}")?;
    Ok(())
}

/// Monoidal and comonoid laws for matrices (numerically) and graphs (up to
/// isomorphism).
pub fn criterion_4() -> Outcome {
    let mut r = rng(4);
    constant_laws()?;
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        worst = worst.max(matrix_axioms(&mut r).map_err(|e| format!("matrix instance {i}: {e}"))?);
        graph_axioms(&mut r).map_err(|e| format!("graph instance {i}: {e}"))?;
    }
    Ok(format!("200 matrix and 200 graph instances, max error {worst:.1e}"))
}

/// Evaluation respects composition and tensor, and constants denote the
/// constant matrices.
pub fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let (n, m, l) = (r.random_range(0..=3), r.random_range(0..=3), r.random_range(0..=3));
        let sub = r.random_bool(0.5);
        let sizes: Vec<usize> = [6, 6, 2, 5, 3].iter().map(|&hi| r.random_range(0..=hi)).collect();
        let b1 = random_mbn(&mut r, n, sizes[0], m, 3, sub);
        let b2 = random_mbn(&mut r, m, sizes[1], l, 3, sub);
        let b3 = random_mbn(&mut r, sizes[2], sizes[3], sizes[4], 3, sub);
        let (e1, e2, e3) = (naive_eval(&b1), naive_eval(&b2), naive_eval(&b3));
        for (b, e) in [(&b1, &e1), (&b2, &e2), (&b3, &e3)] {
            worst = worst.max(close(&b.eval().unwrap(), e, 1e-9, &format!("instance {i}: eval"))?);
        }
        let composed = b1.compose(&b2).map_err(|e| e.to_string())?;
        worst = worst.max(close(&composed.eval().unwrap(), &compose_oracle(&e1, &e2), 1e-9, &format!("instance {i}: composition"))?);
        let tensored = b1.tensor(&b3).map_err(|e| e.to_string())?;
        worst = worst.max(close(&tensored.eval().unwrap(), &tensor_oracle(&e1, &e3), 1e-9, &format!("instance {i}: tensor"))?);
    }
    for n in 0..=4 {
        let mut pairs = vec![
            (GraphConstant::Id(n), MatrixKind::Id(n)),
            (GraphConstant::Top(n), MatrixKind::Top(n)),
            (GraphConstant::Nabla(n), MatrixKind::Nabla(n)),
        ];
        pairs.extend((0..=3).map(|m| (GraphConstant::Sigma(n, m), MatrixKind::Sigma(n, m))));
        for (g, mk) in pairs {
            close(&constant_network::<f64>(g).eval().unwrap(), &k(mk), 0.0, &format!("constant {g:?}"))?;
        }
    }
    for b in [false, true] {
        close(&unit_network::<f64>("u", b).eval().unwrap(), &k(MatrixKind::One(b)), 0.0, "point constant")?;
    }
    Ok(format!("200 network pairs, max error {worst:.1e}; constants exact"))
}

/// Marginal and conditional reassemble to the original matrix.
pub fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for n in 0..=5 {
        for m in 2..=5 {
            for kk in 1..m {
                for mass in [Mass::Stochastic, Mass::Sub] {
                    let mut p = random_matrix(&mut r, n, m, mass);
                    if r.random_bool(0.3) {
                        p = zero_some_entries(&mut r, &p);
                    }
                    let (front, back) = split_matrix(&p, kk).map_err(|e| e.to_string())?;
                    let keep = m - kk;
                    let rebuilt = StochMatrix::from_fn(n, m, |x, z| {
                        let (hi, lo) = (x >> kk, x & ((1 << kk) - 1));
                        front.get(hi, z) * back.get(lo, hi << n | z)
                    })
                    .unwrap();
                    worst = worst.max(close(&rebuilt, &p, 1e-9, &format!("n={n} m={m} k={kk}"))?);
                    ensure!(
                        (front.inputs(), front.outputs(), back.inputs(), back.outputs()) == (n, keep, keep + n, kk),
                        "split types"
                    );
                    ensure!(back.is_stochastic(), "back is not stochastic for n={n} m={m} k={kk}");
                    ensure!(
                        front.is_stochastic() == p.is_stochastic(),
                        "front stochastic {} but input stochastic {}",
                        front.is_stochastic(),
                        p.is_stochastic()
                    );
                    count += 1;
                }
            }
        }
    }
    ensure!(split_matrix(&random_matrix(&mut r, 1, 3, Mass::Stochastic), 3).is_err(), "k = m must be rejected");
    Ok(format!("{count} splits, max error {worst:.1e}"))
}

/// Sets roughly half the entries of a matrix to zero, keeping column sums
/// at most one.
pub fn zero_some_entries(r: &mut ChaCha8Rng, p: &M) -> M {
    StochMatrix::from_fn(p.inputs(), p.outputs(), |x, y| if r.random_bool(0.5) { 0.0 } else { p.get(x, y) }).unwrap()
}

fn f(kk: usize, b: bool) -> M {
    k(MatrixKind::F(kk, b))
}

fn one(b: bool) -> M {
    k(MatrixKind::One(b))
}

fn sub_stochastic_equalities(r: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut checks = 0;
    let mut eq = |a: M, b: M, what: String| -> Result<(), String> {
        close(&a, &b, 1e-12, &what)?;
        checks += 1;
        Ok(())
    };
    for b in [false, true] {
        eq(seq(&one(b), &k(MatrixKind::Nabla(1))), par(&one(b), &one(b)), format!("F1 b={b}"))?;
        for kk in 1..=5 {
            let nabla = k(MatrixKind::Nabla(kk));
            let fk = f(kk, b);
            eq(seq(&nabla, &par(&fk, &M::id(kk))), seq(&fk, &nabla), format!("F3 left k={kk}"))?;
            eq(seq(&nabla, &par(&M::id(kk), &fk)), seq(&fk, &nabla), format!("F3 right k={kk}"))?;
            eq(seq(&nabla, &par(&fk, &fk)), seq(&fk, &nabla), format!("F3 both k={kk}"))?;
            if kk > 1 {
                let rest = M::id(kk - 1);
                eq(seq(&par(&one(b), &rest), &fk), par(&one(b), &f(kk - 1, b)), format!("F4 first k={kk}"))?;
                eq(seq(&par(&rest, &one(b)), &fk), par(&f(kk - 1, b), &one(b)), format!("F4 last k={kk}"))?;
                eq(seq(&par(&one(!b), &rest), &fk), par(&one(!b), &rest), format!("F5 first k={kk}"))?;
                eq(seq(&par(&rest, &one(!b)), &fk), par(&rest, &one(!b)), format!("F5 last k={kk}"))?;
            }
            for m in 0..=3 {
                let p = random_matrix(r, kk, m, Mass::Stochastic);
                eq(seq(&p, &k(MatrixKind::Top(m))), k(MatrixKind::Top(kk)), format!("F2 k={kk} m={m}"))?;
                let q = random_matrix(r, kk, m, Mass::Sub);
                ensure!(
                    dist(&seq(&q, &k(MatrixKind::Top(m))), &k(MatrixKind::Top(kk))) > 1e-3,
                    "F2 must fail for sub-stochastic matrices"
                );
            }
        }
        // With a single wire the absorbed F is the zero matrix.
        eq(seq(&one(b), &f(1, b)), StochMatrix::zeros(0, 1).unwrap(), format!("F4 k=1 b={b}"))?;
    }
    Ok(checks)
}

/// Random OBN with every node stochastic, plus one node `v` removed from
/// the outputs.
fn hide_one(r: &mut ChaCha8Rng, obn: &Mbn<f64>) -> (Mbn<f64>, u32) {
    let ids: Vec<u32> = obn.nodes().keys().copied().collect();
    let v = *ids.choose(r).unwrap();
    let outputs = obn.outputs().iter().copied().filter(|w| *w != Wire::Node(v)).collect();
    (Mbn::from_nodes(0, obn.nodes().clone(), outputs).unwrap(), v)
}

fn arcs(mbn: &Mbn<f64>) -> Vec<(u32, u32)> {
    mbn.nodes()
        .iter()
        .flat_map(|(&y, node)| node.sources.iter().filter_map(move |w| w.node().map(|u| (u, y))))
        .collect()
}

/// Sub-stochastic equalities, then semantic preservation by each rewriting
/// operation on random networks.
pub fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let equalities = sub_stochastic_equalities(&mut r)?;
    let (mut reversals, mut worst) = (0, 0.0f64);
    for i in 0..200 {
        let inputs = r.random_range(0..=2);
        let (nodes, outputs) = (r.random_range(1..=8), r.random_range(0..=4));
        let raw = random_mbn(&mut r, inputs, nodes, outputs, 3, true);
        let before = naive_eval(&raw);
        let rewritten = rewrite_fixpoint(&raw);
        worst = worst.max(close(&rewritten.eval().unwrap(), &before, 1e-9, &format!("instance {i}: rewrite"))?);
        ensure!(measure(&rewritten) <= measure(&raw), "instance {i}: rewriting increased the measure");

        let (nodes, outputs) = (r.random_range(1..=8), r.random_range(1..=4));
        let closed = random_mbn(&mut r, 0, nodes, outputs, 3, true);
        let before = naive_eval(&closed);
        let (normalized, report) = normalize(&closed).map_err(|e| format!("instance {i}: {e}"))?;
        ensure!(!report.zero_mass, "instance {i}: unexpected zero mass");
        let product: f64 = report.factors.iter().map(|(_, q)| q).product();
        ensure!((product - report.p_b).abs() <= 1e-9, "instance {i}: p_B is not the product of the factors");
        ensure!(
            normalized.nodes().values().all(|n| n.matrix.is_stochastic()),
            "instance {i}: normalized network keeps a sub-stochastic node"
        );
        let rescaled = normalized.eval().unwrap().scaled(report.p_b);
        worst = worst.max(close(&rescaled, &before, 1e-9, &format!("instance {i}: normalize"))?);

        let size = r.random_range(2..=7);
        let obn = random_obn(&mut r, size, 3);
        let (hidden, v) = hide_one(&mut r, &obn);
        let before = naive_eval(&hidden);
        let eliminated = eliminate_hidden_node(&hidden, v).map_err(|e| format!("instance {i}: {e}"))?;
        ensure!(!eliminated.nodes().contains_key(&v), "instance {i}: node {v} survived elimination");
        worst = worst.max(close(&eliminated.eval().unwrap(), &before, 1e-9, &format!("instance {i}: eliminate"))?);

        let before = naive_eval(&obn);
        for (u, y) in arcs(&obn) {
            match cnu_core::update::reverse_arc(&obn, u, y) {
                Ok(rev) => {
                    let e = close(&rev.eval().unwrap(), &before, 1e-9, &format!("instance {i}: reverse {u}->{y}"))?;
                    worst = worst.max(e);
                    ensure!(rev.is_obn().holds(), "instance {i}: reversal left the ordinary form");
                    ensure!(
                        rev.node(y).unwrap().sources.iter().all(|w| *w != Wire::Node(u)),
                        "instance {i}: arc {u}->{y} still present"
                    );
                    reversals += 1;
                }
                Err(Error::NotPathClosed) => {}
                Err(e) => return Err(format!("instance {i}: reverse {u}->{y}: {e}")),
            }
        }
    }
    Ok(format!(
        "{equalities} equalities; 200 networks per operation ({reversals} reversals), max error {worst:.1e}"
    ))
}

/// Random prior, random net, and a driver that picks observations with
/// positive probability under the dense belief.
pub struct Scenario {
    pub net: Net,
    pub prior: Mbn<f64>,
}

pub fn scenario(r: &mut ChaCha8Rng, max_places: usize) -> Scenario {
    let n = r.random_range(2..=max_places);
    let ts = r.random_range(2..=n + 2);
    let net = random_net(r, n, ts);
    Scenario { net, prior: random_obn(r, n, 2) }
}

/// Draws a transition and an outcome with positive probability.
pub fn draw_observation(r: &mut ChaCha8Rng, net: &Net, d: &Dist<f64>) -> (String, Observation) {
    let mut options = Vec::new();
    for t in net.transitions() {
        for o in outcomes() {
            let p = d.event_probability(net, &t.name, o).unwrap();
            if p > 1e-6 {
                options.push((t.name.clone(), o, p));
            }
        }
    }
    let total: f64 = options.iter().map(|o| o.2).sum();
    let mut x = r.random::<f64>() * total;
    for (t, o, p) in &options {
        if x < *p {
            return (t.clone(), *o);
        }
        x -= p;
    }
    let (t, o, _) = options.last().expect("some outcome is always possible");
    (t.clone(), *o)
}

fn run_against_dense(r: &mut ChaCha8Rng, s: &Scenario, strategy: UpdateStrategy, steps: usize) -> Result<f64, String> {
    let mut belief = Belief::new(s.prior.clone(), strategy).map_err(|e| e.to_string())?;
    let mut dense = dist_of(&s.prior);
    let mut worst: f64 = 0.0;
    for step in 0..steps {
        let (t, o) = draw_observation(r, &s.net, &dense);
        dense = dense.observe(&s.net, &t, o).map_err(|e| format!("dense step {step}: {e}"))?;
        belief.observe(&s.net, &t, o).map_err(|e| format!("step {step} ({t} {o:?}): {e}"))?;
        let query = step % 7 == 6 || step + 1 == steps;
        if belief.pending() == 0 || query {
            let marginals = belief.marginals().map_err(|e| e.to_string())?;
            ensure!(belief.mbn().is_obn().holds(), "step {step}: belief is not ordinary at a query");
            let e = dist_of(belief.mbn()).max_abs_diff(&dense).max(vec_dist(&marginals, &dense.marginals()));
            ensure!(e <= 1e-6, "step {step} ({t} {o:?}): {e:e} away from dense replay");
            worst = worst.max(e);
        }
    }
    Ok(worst)
}

/// Factored beliefs track the dense replay over long random runs.
pub fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let s = scenario(&mut r, 10);
        for strategy in [UpdateStrategy::Eager, UpdateStrategy::Lazy { batch: 5 }] {
            let e = run_against_dense(&mut r, &s, strategy, 100).map_err(|e| format!("net {case}, {strategy}: {e}"))?;
            worst = worst.max(e);
        }
    }
    Ok(format!("50 nets x 100 observations x 2 strategies, max error {worst:.1e}"))
}

/// Prior whose node entries are drawn from {0, 1/2, 1}, so that many
/// observations hit zero-mass corners.
pub fn coarse_obn(r: &mut ChaCha8Rng, n: usize) -> Mbn<f64> {
    let base = random_obn(r, n, 2);
    let nodes: BTreeMap<u32, MbnNode<f64>> = base
        .nodes()
        .iter()
        .map(|(&id, node)| {
            let mut node = node.clone();
            node.matrix = StochMatrix::from_fn(node.matrix.inputs(), 1, |x, y| {
                let q = [0.0, 0.5, 1.0][(y * 7 + id as usize * 3) % 3];
                if x == 1 { q } else { 1.0 - q }
            })
            .unwrap();
            (id, node)
        })
        .collect();
    Mbn::from_nodes(0, nodes, base.outputs().to_vec()).unwrap()
}

fn scan(mbn: &Mbn<f64>) -> Result<usize, String> {
    ensure!(mbn.is_finite(), "non-finite node matrix");
    ensure!(mbn.eval().unwrap().is_finite(), "non-finite evaluation");
    Ok(mbn.nodes().len() + 1)
}

/// Impossible observations are rejected and no computation produces NaN.
pub fn criterion_10() -> Outcome {
    let net = fixtures::fig2_net();
    let mut belief = Belief::new(fixtures::fig4_mbn(), UpdateStrategy::Eager).unwrap();
    belief.observe(&net, "t4", Observation::Success).unwrap();
    let w = belief.whatif(&net, "t4").unwrap();
    ensure!(w == 0.0, "what-if of t4 after firing it should be zero, got {w}");
    let before = belief.mbn().clone();
    ensure!(
        matches!(belief.observe(&net, "t4", Observation::Success), Err(Error::ImpossibleObservation)),
        "factored belief accepted an impossible firing"
    );
    ensure!(belief.mbn() == &before, "a rejected observation changed the belief");
    let dense = dist_of(&before);
    ensure!(
        matches!(dense.observe(&net, "t4", Observation::Success), Err(Error::ImpossibleObservation)),
        "dense belief accepted an impossible firing"
    );
    ensure!(matches!(dense.nassert(&[], true), Err(Error::EmptyPlaceSet)), "dense nassert over no places");
    ensure!(
        matches!(insert_nassert(&before, &[], true), Err(Error::EmptyPlaceSet)),
        "factored nassert over no places"
    );

    let mut r = rng(10);
    let mut scanned = 0;
    for case in 0..40 {
        let n = r.random_range(2..=7);
        let net = random_net(&mut r, n, n + 1);
        let prior = if case % 2 == 0 { coarse_obn(&mut r, n) } else { random_obn(&mut r, n, 2) };
        let strategy = if case % 4 < 2 { UpdateStrategy::Eager } else { UpdateStrategy::Lazy { batch: 3 } };
        let mut belief = Belief::new(prior.clone(), strategy).unwrap();
        let mut dense = dist_of(&prior);
        for step in 0..40 {
            let t = net.transitions()[r.random_range(0..net.transitions().len())].name.clone();
            let o = outcomes()[r.random_range(0..3)];
            let expected = dense.event_probability(&net, &t, o).unwrap();
            match belief.observe(&net, &t, o) {
                Ok(report) => {
                    ensure!(expected > 0.0, "case {case} step {step}: accepted zero-probability {t} {o:?}");
                    ensure!(report.p_b.is_finite() && report.event_probability.is_finite(), "non-finite report");
                    dense = dense.observe(&net, &t, o).unwrap();
                }
                Err(Error::ImpossibleObservation) => {
                    ensure!(expected <= 1e-12, "case {case} step {step}: rejected {t} {o:?} with mass {expected}");
                    continue;
                }
                Err(e) => return Err(format!("case {case} step {step}: {e}")),
            }
            scanned += scan(belief.mbn()).map_err(|e| format!("case {case} step {step}: {e}"))?;
            ensure!(dense.masses().iter().all(|v| v.is_finite()), "non-finite dense mass");
            for m in belief.marginals().unwrap() {
                ensure!(m.is_finite() && (-1e-12..=1.0 + 1e-12).contains(&m), "marginal {m} out of range");
            }
        }
    }
    for (op, b) in [("assert", true), ("set", false), ("nassert", true)] {
        let mbn = coarse_obn(&mut r, 4);
        let surg = match op {
            "assert" => insert_assert(&mbn, &[0, 2], b),
            "set" => insert_set(&mbn, &[1, 3], b),
            _ => insert_nassert(&mbn, &[0, 1], b),
        }
        .unwrap();
        let (res, report) = normalize(&surg).unwrap();
        ensure!(report.p_b.is_finite(), "{op}: non-finite p_B");
        scanned += scan(&res)?;
    }
    Ok(format!("impossible firing and empty nassert rejected; {scanned} matrices scanned, all finite"))
}
