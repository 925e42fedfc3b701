//! Seeded generators for tables and weighted nests.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64`, so a seed
//! reproduces its instance on every platform.

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metric::{CircularOrdering, QuasiMetric};
use crate::certify::{Demand, Routing};
use crate::io::Certificate;
use crate::nest::{EdgeId, PathId, PlanarNest};
use crate::rational::{ExtendedRational, Rational};
use crate::realize::WeightedInstance;
use crate::lp::{Constraint, DualSimplex, LpOutcome, Relation};
use crate::weights::{terminal_distances, Graph};

pub const SEED_ENV: &str = "OSREAL_SEED";

/// Seed from `OSREAL_SEED`, or `fallback`.
pub fn env_seed(fallback: u64) -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.parse().ok()).unwrap_or(fallback)
}

pub fn terminal_names(k: usize) -> Vec<String> {
    let width = k.saturating_sub(1).to_string().len();
    (0..k).map(|i| format!("t{i:0width$}")).collect()
}

/// Six terminals `a, t4, t1, b, t3, t2` clockwise. Neighbours are 4 apart
/// going clockwise and 1 going back; terminals two apart are 4 and 2;
/// opposite terminals are 3 apart both ways.
pub fn worked_example_metric() -> QuasiMetric {
    let sigma = worked_example_ordering();
    let order = sigma.names();
    let names: Vec<String> = ["a", "b", "t1", "t2", "t3", "t4"].iter().map(|s| s.to_string()).collect();
    let pos = |n: &str| order.iter().position(|x| x == n).expect("on ring");
    let names2 = names.clone();
    QuasiMetric::from_fn(names, |i, j| {
        if i == j {
            return ExtendedRational::zero();
        }
        let steps = (pos(&names2[j]) + 6 - pos(&names2[i])) % 6;
        ExtendedRational::from_int(match steps {
            1 | 2 => 4,
            3 => 3,
            4 => 2,
            _ => 1,
        })
    })
    .expect("distinct names")
}

pub fn worked_example_ordering() -> CircularOrdering {
    CircularOrdering::from_strs(&["a", "t4", "t1", "b", "t3", "t2"]).expect("distinct")
}

/// The example nest with `t1 -> t2` and `t3 -> t4` crossing at `p`, and
/// `a -> b` inserted passing `p` on its left and on its right: passing on
/// the left, `a -> b` crosses `t1 -> t2` before `p`.
pub fn worked_example_nests() -> (PlanarNest, PlanarNest) {
    let d = worked_example_metric();
    let mut base = PlanarNest::from_metric(&d, &worked_example_ordering()).expect("six names");
    let t = |n: &str| d.index_of(n).expect("example name");
    let tr = base.trajectories(t("t1"), t("t2"), 0).find(|tr| tr.steps.is_empty()).expect("empty disc");
    base.insert_path(&tr).expect("valid");
    let tr = base.trajectories(t("t3"), t("t4"), 0).find(|tr| tr.steps.len() == 1).expect("one crossing");
    base.insert_path(&tr).expect("valid");
    let before_p = base.paths()[0].edges[0];
    let mut out = [None, None];
    for tr in base.trajectories(t("a"), t("b"), 0).filter(|tr| tr.steps.len() == 2) {
        let side = if tr.steps.iter().any(|st| st.edge == before_p) { 0 } else { 1 };
        if out[side].is_none() {
            let mut n = base.clone();
            n.insert_path(&tr).expect("valid");
            out[side] = Some(n);
        }
    }
    let [Some(left), Some(right)] = out else { panic!("both sides of p are reachable") };
    (left, right)
}

/// `p` up to its first vertex on `q`, then `q` from there on.
pub fn splice(nest: &PlanarNest, p: PathId, q: PathId) -> Option<Vec<EdgeId>> {
    let qv = nest.path_vertices(q);
    let pv = nest.path_vertices(p);
    let (i, j) = pv.iter().enumerate().find_map(|(i, v)| qv.iter().position(|w| w == v).map(|j| (i, j)))?;
    let mut walk = nest.paths()[p].edges[..i].to_vec();
    walk.extend_from_slice(&nest.paths()[q].edges[j..]);
    Some(walk)
}

/// `C = {(a,b), (t1,t2), (t3,t4)}` against `C' = {(a,t4), (t1,b), (t3,t2)}`
/// with `C'` routed on the paths of `nest` by splicing.
pub fn worked_example_certificate(nest: &PlanarNest) -> Option<Certificate> {
    let d = worked_example_metric();
    let t = |n: &str| d.index_of(n).expect("example name");
    let c = Demand::from_pairs([(t("a"), t("b")), (t("t1"), t("t2")), (t("t3"), t("t4"))]);
    let cprime = Demand::from_pairs([(t("a"), t("t4")), (t("t1"), t("b")), (t("t3"), t("t2"))]);
    let mut routing = Routing::default();
    for (i, (s, u)) in cprime.instances().into_iter().enumerate() {
        let from = nest.paths().iter().position(|p| p.src == s && c.get(p.src, p.dst) > 0)?;
        let to = nest.paths().iter().position(|p| p.dst == u && c.get(p.src, p.dst) > 0)?;
        routing.0.insert(i, splice(nest, from, to)?);
    }
    Some(Certificate { a: t("a"), b: t("b"), c, cprime, routing })
}

/// Random positive integer entries closed under shortest paths.
pub fn gen_random_quasimetric(k: usize, seed: u64) -> QuasiMetric {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = vec![0i64; k * k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                m[i * k + j] = rng.gen_range(1..=20);
            }
        }
    }
    for via in 0..k {
        for i in 0..k {
            for j in 0..k {
                let alt = m[i * k + via] + m[via * k + j];
                if alt < m[i * k + j] {
                    m[i * k + j] = alt;
                }
            }
        }
    }
    QuasiMetric::from_fn(terminal_names(k), |i, j| ExtendedRational::from_int(m[i * k + j])).expect("distinct names")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NestConfig {
    pub k: usize,
    /// Paths between random ordered pairs, after the ring if any.
    pub paths: usize,
    /// Paths in both directions between boundary neighbours, inserted first,
    /// which makes every distance finite.
    pub ring: bool,
    pub max_numerator: i64,
    pub max_denominator: i64,
    /// Trajectories considered per random path; one is picked at random.
    pub candidates: usize,
    pub seed: u64,
}

impl NestConfig {
    pub fn new(k: usize, paths: usize, seed: u64) -> Self {
        NestConfig { k, paths, ring: false, max_numerator: 9, max_denominator: 1, candidates: 24, seed }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedNest {
    pub instance: WeightedInstance,
    pub metric: QuasiMetric,
}

/// Random trajectories drawn in `cfg` order; the returned generator has
/// not yet been used for weights.
fn random_structure(cfg: &NestConfig) -> (PlanarNest, ChaCha8Rng) {
    assert!(cfg.k >= 2, "need two terminals");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let names = terminal_names(cfg.k);
    let mut order = names.clone();
    order.shuffle(&mut rng);
    let sigma = CircularOrdering::new(order).expect("distinct");
    let mut nest = PlanarNest::empty(&names, &sigma).expect("k >= 2");
    let k = cfg.k;

    if cfg.ring {
        let s = nest.sigma().to_vec();
        for i in 0..k {
            let (u, v) = (s[i], s[(i + 1) % k]);
            for (x, y) in [(u, v), (v, u)] {
                if k == 2 && nest.path_for(x, y).is_some() {
                    continue;
                }
                let tr = nest.trajectories(x, y, 0).next().expect("neighbours share a face");
                nest.insert_path(&tr).expect("valid trajectory");
            }
        }
    }
    let mut free: Vec<(usize, usize)> =
        (0..k).flat_map(|t| (0..k).map(move |u| (t, u))).filter(|&(t, u)| t != u && nest.path_for(t, u).is_none()).collect();
    free.shuffle(&mut rng);
    for &(t, u) in free.iter().take(cfg.paths) {
        let pool: Vec<_> = nest.trajectories(t, u, 0).take(cfg.candidates.max(1)).collect();
        let tr = pool.choose(&mut rng).expect("the disc always admits a route").clone();
        nest.insert_path(&tr).expect("valid trajectory");
    }
    (nest, rng)
}

fn finish(nest: PlanarNest, weights: Vec<Rational>, all_designated: bool) -> GeneratedNest {
    let k = nest.terminals().len();
    let table = terminal_distances(&nest, &weights);
    let mut designated = vec![None; k * k];
    for (i, p) in nest.paths().iter().enumerate() {
        let len: Rational = p.edges.iter().map(|&e| weights[e].clone()).sum();
        let slot = p.src * k + p.dst;
        if designated[slot].is_none() && (all_designated || table[slot] == len) {
            designated[slot] = Some(i);
        }
    }
    let metric = QuasiMetric::new(nest.terminals().to_vec(), table).expect("distinct names");
    GeneratedNest { instance: WeightedInstance { nest, weights, designated }, metric }
}

pub fn gen_random_nest(cfg: &NestConfig) -> GeneratedNest {
    let (nest, mut rng) = random_structure(cfg);
    let mut weights = vec![Rational::from_integer(0.into()); nest.edges().len()];
    for e in nest.path_edges().collect::<Vec<_>>() {
        let n = rng.gen_range(1..=cfg.max_numerator.max(1));
        let dd = rng.gen_range(1..=cfg.max_denominator.max(1));
        weights[e] = Rational::new(BigInt::from(n), BigInt::from(dd));
    }
    finish(nest, weights, false)
}

/// Like [`gen_random_nest`], but with [`shortest_path_weights`], so every
/// path is registered and shortest. `None` when this drawing admits no
/// such weights.
pub fn gen_shortest_nest(cfg: &NestConfig) -> Option<GeneratedNest> {
    let (nest, _) = random_structure(cfg);
    let weights = shortest_path_weights(&nest)?;
    Some(finish(nest, weights, true))
}

/// Weights of least total, each at least 1, under which every path is a
/// shortest path between its ends; `None` if there are none.
pub fn shortest_path_weights(nest: &PlanarNest) -> Option<Vec<Rational>> {
    let edges: Vec<usize> = nest.path_edges().collect();
    let mut col = vec![usize::MAX; nest.edges().len()];
    for (j, &e) in edges.iter().enumerate() {
        col[e] = j;
    }
    let one = Rational::from_integer(1.into());
    let zero = Rational::from_integer(0.into());
    let mut lp = DualSimplex::new(edges.len(), Some(vec![one.clone(); edges.len()]));
    for j in 0..edges.len() {
        lp.add(Constraint { coeffs: vec![(j, one.clone())], relation: Relation::Ge, rhs: one.clone() });
    }
    let g = Graph::new(nest);
    loop {
        let LpOutcome::Feasible(x) = lp.solve() else { return None };
        let mut weights = vec![zero.clone(); nest.edges().len()];
        for (j, &e) in edges.iter().enumerate() {
            weights[e] = x[j].clone();
        }
        let mut cut = false;
        for p in nest.paths() {
            let s = nest.terminal_vertex(p.src);
            let t = nest.terminal_vertex(p.dst);
            let dist = g.distances(&weights, s);
            let len: Rational = p.edges.iter().map(|&e| weights[e].clone()).sum();
            if dist[t].as_ref().is_some_and(|d| *d < len) {
                let walk = g.least_shortest_path(&weights, &dist, s, t).expect("reachable");
                let mut c: Vec<(usize, Rational)> = Vec::new();
                for (&e, sign) in p.edges.iter().map(|e| (e, 1)).chain(walk.iter().map(|e| (e, -1))) {
                    match c.iter_mut().find(|(j, _)| *j == col[e]) {
                        Some((_, a)) => *a += Rational::from_integer(sign.into()),
                        None => c.push((col[e], Rational::from_integer(sign.into()))),
                    }
                }
                c.retain(|(_, a)| *a != zero);
                lp.add(Constraint { coeffs: c, relation: Relation::Le, rhs: zero.clone() });
                cut = true;
            }
        }
        if !cut {
            return Some(weights);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{monge_check, validate};

    #[test]
    fn worked_example_is_monge_on_its_ring() {
        let d = worked_example_metric();
        assert!(validate(&d).is_empty());
        assert!(monge_check(&d, &worked_example_ordering()).unwrap().is_pass());
        assert_eq!(d.get("a", "t4").unwrap(), &ExtendedRational::from_int(4));
        assert_eq!(d.get("t4", "a").unwrap(), &ExtendedRational::from_int(1));
        assert_eq!(d.get("a", "t1").unwrap(), &ExtendedRational::from_int(4));
        assert_eq!(d.get("t1", "a").unwrap(), &ExtendedRational::from_int(2));
        assert_eq!(d.get("a", "b").unwrap(), &ExtendedRational::from_int(3));
        assert_eq!(d.get("b", "a").unwrap(), &ExtendedRational::from_int(3));
    }

    #[test]
    fn worked_example_insertions() {
        use crate::certify::check_routing;
        use crate::metric::PartialQuasiMetric;
        use crate::weights::{check_weights_with, CheckOptions, WeightCheck};
        let d = worked_example_metric();
        let (left, right) = worked_example_nests();
        let t = |n: &str| d.index_of(n).unwrap();
        let mut seen = PartialQuasiMetric::unknown(d.terminals().to_vec());
        for (s, u) in [("t1", "t2"), ("t3", "t4"), ("a", "b")] {
            seen.set(t(s), t(u), d.d(t(s), t(u)).clone());
        }
        let opts = CheckOptions { lower_bounds: Some(d.entries().to_vec()), ..Default::default() };
        let check = |n: &PlanarNest| check_weights_with(n, &seen, &opts).unwrap().outcome.unwrap();
        assert!(matches!(check(&left), WeightCheck::Infeasible(_)));
        assert!(check(&right).is_feasible());
        let cert = worked_example_certificate(&left).unwrap();
        assert_eq!(cert.routing.0.len(), 3);
        assert!(check_routing(&left, &cert.c, &cert.cprime, &cert.routing).unwrap());
        // passing on the right, the spliced walks need an edge twice
        let other = worked_example_certificate(&right);
        assert!(other.is_none_or(|c| !check_routing(&right, &c.c, &c.cprime, &c.routing).unwrap()));
    }

    #[test]
    fn same_seed_same_nest() {
        let c = NestConfig::new(5, 6, 11);
        let a = gen_random_nest(&c);
        let b = gen_random_nest(&c);
        assert_eq!(a.instance, b.instance);
        assert_eq!(a.metric, b.metric);
    }

    #[test]
    fn generated_tables_are_valid_and_monge() {
        for seed in 0..10 {
            let mut c = NestConfig::new(5, 5, seed);
            c.ring = seed % 2 == 0;
            let g = gen_random_nest(&c);
            assert!(validate(&g.metric).is_empty());
            assert!(monge_check(&g.metric, &g.instance.sigma()).unwrap().is_pass());
            g.instance.nest.check_invariants().unwrap();
            if c.ring {
                assert!(!g.metric.has_infinite());
            }
        }
    }

    #[test]
    fn random_quasimetric_is_valid() {
        for seed in 0..5 {
            assert!(validate(&gen_random_quasimetric(6, seed)).is_empty());
        }
    }
}
