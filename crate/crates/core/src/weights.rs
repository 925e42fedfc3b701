//! Nonnegative edge weights that make every designated path shortest and
//! realize a partial table, found by cutting planes over the exact LP.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashSet, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{Constraint, DualSimplex, Farkas, LpOutcome, Relation};
use crate::metric::{PartialQuasiMetric, Terminal};
use crate::nest::{EdgeId, PathId, PlanarNest, VertexId};
use crate::rational::{ExtendedRational, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeightError {
    #[error("no registered path for known pair ({0}, {1})")]
    MissingPath(String, String),
    #[error("table and nest disagree on the terminal set")]
    TerminalMismatch,
    #[error("separation did not converge after {rounds} rounds ({constraints} constraints)")]
    IterationCap { rounds: usize, constraints: usize },
    #[error("negative or infinite distance entry for ({0}, {1})")]
    BadEntry(String, String),
}

/// Edge weights indexed by edge id; boundary arcs carry zero and are never
/// traversed.
pub type Weights = Vec<Rational>;

/// A path-length constraint on the nest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathConstraint {
    pub src: Terminal,
    pub dst: Terminal,
    pub edges: Vec<EdgeId>,
    pub relation: Relation,
    #[serde(with = "crate::io::rational_serde")]
    pub rhs: Rational,
    /// `true` for the registered path of the pair.
    pub designated: bool,
}

impl PathConstraint {
    fn key(&self) -> (Relation, BTreeSet<EdgeId>) {
        (self.relation, self.edges.iter().copied().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FarkasWitness {
    pub constraints: Vec<PathConstraint>,
    pub multipliers: Vec<Rational>,
}

impl FarkasWitness {
    /// Replays the certificate over edge usage counts.
    pub fn verify(&self, edge_count: usize) -> bool {
        let cs = lp_rows(&self.constraints, &|e| Some(e), edge_count);
        Farkas { multipliers: self.multipliers.clone() }.verify(edge_count, &cs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Infeasibility {
    /// The LP over the accumulated constraints has no solution.
    Farkas(FarkasWitness),
    /// A pair marked unreachable is connected by this walk.
    Reachable { src: Terminal, dst: Terminal, walk: Vec<EdgeId> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightCheck {
    Feasible(Weights),
    Infeasible(Infeasibility),
}

impl WeightCheck {
    pub fn is_feasible(&self) -> bool {
        matches!(self, WeightCheck::Feasible(_))
    }
}

#[derive(Debug, Clone, Default)]
pub struct WeightReport {
    pub outcome: Option<WeightCheck>,
    pub rounds: usize,
    pub pivots: usize,
    /// Every constraint handed to the LP, in order.
    pub log: Vec<PathConstraint>,
}

#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    /// Extra lower-bound cuts to seed the LP with.
    pub seed_cuts: Vec<PathConstraint>,
    pub max_rounds: Option<usize>,
    /// Distance lower bounds for pairs the partial metric leaves unknown,
    /// row-major `k * k`. Such pairs get no designated path, only the
    /// requirement that every walk is at least this long.
    pub lower_bounds: Option<Vec<ExtendedRational>>,
}

fn lp_rows(cs: &[PathConstraint], col: &dyn Fn(EdgeId) -> Option<usize>, _n: usize) -> Vec<Constraint> {
    cs.iter()
        .map(|c| {
            let mut coeffs: Vec<(usize, Rational)> = Vec::new();
            for &e in &c.edges {
                let j = col(e).expect("path edge column");
                match coeffs.iter_mut().find(|(k, _)| *k == j) {
                    Some((_, a)) => *a += Rational::one(),
                    None => coeffs.push((j, Rational::one())),
                }
            }
            Constraint { coeffs, relation: c.relation, rhs: c.rhs.clone() }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// shortest paths

pub(crate) struct Graph {
    out: Vec<Vec<(EdgeId, VertexId)>>,
    inc: Vec<Vec<(EdgeId, VertexId)>>,
}

impl Graph {
    pub(crate) fn new(nest: &PlanarNest) -> Self {
        let mut out = vec![Vec::new(); nest.vertex_count()];
        let mut inc = vec![Vec::new(); nest.vertex_count()];
        for e in nest.path_edges() {
            let ed = &nest.edges()[e];
            out[ed.from].push((e, ed.to));
            inc[ed.to].push((e, ed.from));
        }
        Graph { out, inc }
    }

    pub(crate) fn reachable_from(&self, s: VertexId) -> Vec<bool> {
        let mut seen = vec![false; self.out.len()];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &(_, v) in &self.out[u] {
                if !seen[v] {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        seen
    }

    /// Exact Dijkstra; `None` marks unreachable vertices.
    pub(crate) fn distances(&self, w: &[Rational], s: VertexId) -> Vec<Option<Rational>> {
        let n = self.out.len();
        let mut dist: Vec<Option<Rational>> = vec![None; n];
        let mut done = vec![false; n];
        dist[s] = Some(Rational::zero());
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((Rational::zero(), s)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            for &(e, v) in &self.out[u] {
                let nd = &d + &w[e];
                if dist[v].as_ref().is_none_or(|x| nd < *x) {
                    dist[v] = Some(nd.clone());
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist
    }

    /// Shortest `s`-`t` path whose edge-id sequence is lexicographically least.
    pub(crate) fn least_shortest_path(&self, w: &[Rational], dist: &[Option<Rational>], s: VertexId, t: VertexId) -> Option<Vec<EdgeId>> {
        dist[t].as_ref()?;
        let n = self.out.len();
        let tight = |u: VertexId, e: EdgeId, v: VertexId| match (&dist[u], &dist[v]) {
            (Some(du), Some(dv)) => &(du + &w[e]) == dv,
            _ => false,
        };
        let mut visited = vec![false; n];
        visited[s] = true;
        let mut u = s;
        let mut path = Vec::new();
        while u != t {
            // vertices that reach t over tight edges avoiding visited ones
            let mut good = vec![false; n];
            good[t] = true;
            let mut q = VecDeque::from([t]);
            while let Some(y) = q.pop_front() {
                for &(e, x) in &self.inc[y] {
                    if !good[x] && !visited[x] && tight(x, e, y) {
                        good[x] = true;
                        q.push_back(x);
                    }
                }
            }
            let mut cand: Vec<(EdgeId, VertexId)> =
                self.out[u].iter().copied().filter(|&(e, v)| !visited[v] && good[v] && tight(u, e, v)).collect();
            cand.sort_unstable();
            let &(e, v) = cand.first()?;
            path.push(e);
            visited[v] = true;
            u = v;
        }
        Some(path)
    }
}

/// Shortest-path distance between every ordered pair of terminals.
pub fn terminal_distances(nest: &PlanarNest, w: &[Rational]) -> Vec<ExtendedRational> {
    let k = nest.terminals().len();
    let g = Graph::new(nest);
    let mut out = vec![ExtendedRational::Infinite; k * k];
    for t in 0..k {
        let dist = g.distances(w, nest.terminal_vertex(t));
        for u in 0..k {
            if let Some(d) = &dist[nest.terminal_vertex(u)] {
                out[t * k + u] = ExtendedRational::Finite(d.clone());
            }
        }
    }
    out
}

pub fn path_length(nest: &PlanarNest, w: &[Rational], p: PathId) -> Rational {
    nest.paths()[p].edges.iter().map(|&e| &w[e]).fold(Rational::zero(), |a, b| a + b)
}

// ---------------------------------------------------------------------------
// the separation loop

pub fn check_weights(nest: &PlanarNest, d: &PartialQuasiMetric) -> Result<WeightCheck, WeightError> {
    check_weights_with(nest, d, &CheckOptions::default()).map(|r| r.outcome.expect("set"))
}

pub fn check_weights_with(nest: &PlanarNest, d: &PartialQuasiMetric, opts: &CheckOptions) -> Result<WeightReport, WeightError> {
    if d.terminals() != nest.terminals() {
        return Err(WeightError::TerminalMismatch);
    }
    let k = d.len();
    let name = |t: Terminal| d.terminals()[t].clone();
    let g = Graph::new(nest);
    let mut report = WeightReport::default();

    let mut finite_pairs = Vec::new();
    for (t, u) in d.known_pairs() {
        match d.get(t, u).expect("known") {
            ExtendedRational::Infinite => {
                let reach = g.reachable_from(nest.terminal_vertex(t));
                if reach[nest.terminal_vertex(u)] {
                    let walk = unreachable_walk(&g, nest.terminal_vertex(t), nest.terminal_vertex(u));
                    report.outcome = Some(WeightCheck::Infeasible(Infeasibility::Reachable { src: t, dst: u, walk }));
                    return Ok(report);
                }
            }
            ExtendedRational::Finite(r) => {
                if r.is_negative() {
                    return Err(WeightError::BadEntry(name(t), name(u)));
                }
                let p = nest.path_for(t, u).ok_or_else(|| WeightError::MissingPath(name(t), name(u)))?;
                finite_pairs.push((t, u, r.clone(), p));
            }
        }
    }
    let mut bounded: Vec<(Terminal, Terminal, Rational)> = finite_pairs.iter().map(|(t, u, r, _)| (*t, *u, r.clone())).collect();
    if let Some(lb) = &opts.lower_bounds {
        if lb.len() != k * k {
            return Err(WeightError::TerminalMismatch);
        }
        for t in 0..k {
            for u in 0..k {
                if t == u || d.get(t, u).is_some() {
                    continue;
                }
                match &lb[t * k + u] {
                    ExtendedRational::Infinite => {
                        if g.reachable_from(nest.terminal_vertex(t))[nest.terminal_vertex(u)] {
                            let walk = unreachable_walk(&g, nest.terminal_vertex(t), nest.terminal_vertex(u));
                            report.outcome = Some(WeightCheck::Infeasible(Infeasibility::Reachable { src: t, dst: u, walk }));
                            return Ok(report);
                        }
                    }
                    ExtendedRational::Finite(r) if r.is_positive() => bounded.push((t, u, r.clone())),
                    ExtendedRational::Finite(_) => {}
                }
            }
        }
    }
    let bound_of = |t: Terminal, u: Terminal| -> Option<Rational> {
        match d.get(t, u) {
            Some(ExtendedRational::Finite(r)) => Some(r.clone()),
            Some(ExtendedRational::Infinite) => None,
            None => match opts.lower_bounds.as_ref().map(|lb| &lb[t * k + u]) {
                Some(ExtendedRational::Finite(r)) => Some(r.clone()),
                _ => None,
            },
        }
    };

    let cols: Vec<EdgeId> = nest.path_edges().collect();
    let mut col_of = vec![None; nest.edges().len()];
    for (j, &e) in cols.iter().enumerate() {
        col_of[e] = Some(j);
    }
    let col = |e: EdgeId| col_of.get(e).copied().flatten();
    let n = cols.len();

    let mut lp = DualSimplex::new(n, None);
    let mut keys = HashSet::new();
    let mut push = |lp: &mut DualSimplex, report: &mut WeightReport, c: PathConstraint| -> bool {
        if c.edges.iter().any(|&e| col(e).is_none()) || !keys.insert(c.key()) {
            return false;
        }
        let row = lp_rows(std::slice::from_ref(&c), &col, n).pop().expect("one row");
        lp.add(row);
        report.log.push(c);
        true
    };
    for (t, u, r, p) in &finite_pairs {
        let edges = nest.paths()[*p].edges.clone();
        for rel in [Relation::Le, Relation::Ge] {
            let c = PathConstraint { src: *t, dst: *u, edges: edges.clone(), relation: rel, rhs: r.clone(), designated: true };
            push(&mut lp, &mut report, c);
        }
    }
    for c in &opts.seed_cuts {
        let known = bound_of(c.src, c.dst).is_some_and(|r| r == c.rhs);
        if known && c.relation == Relation::Ge {
            push(&mut lp, &mut report, PathConstraint { designated: false, ..c.clone() });
        }
    }

    let cap = opts.max_rounds.unwrap_or_else(|| (nest.edges().len() * finite_pairs.len().max(1) * 4).max(16));
    loop {
        report.rounds += 1;
        if report.rounds > cap {
            return Err(WeightError::IterationCap { rounds: cap, constraints: report.log.len() });
        }
        let x = match lp.solve() {
            LpOutcome::Infeasible(f) => {
                report.pivots = lp.pivots();
                report.outcome = Some(WeightCheck::Infeasible(Infeasibility::Farkas(FarkasWitness {
                    constraints: report.log.clone(),
                    multipliers: f.multipliers,
                })));
                return Ok(report);
            }
            LpOutcome::Feasible(x) => x,
        };
        let mut w = vec![Rational::zero(); nest.edges().len()];
        for (j, &e) in cols.iter().enumerate() {
            w[e] = x[j].clone();
        }
        let mut added = false;
        let mut by_source: Vec<Option<Vec<Option<Rational>>>> = vec![None; k];
        for (t, u, r) in &bounded {
            let s = nest.terminal_vertex(*t);
            let dist = by_source[*t].get_or_insert_with(|| g.distances(&w, s));
            let tv = nest.terminal_vertex(*u);
            let short = matches!(&dist[tv], Some(x) if x < r);
            if short {
                let edges = g.least_shortest_path(&w, dist, s, tv).expect("reachable");
                let c = PathConstraint { src: *t, dst: *u, edges, relation: Relation::Ge, rhs: r.clone(), designated: false };
                added |= push(&mut lp, &mut report, c);
            }
        }
        if !added {
            report.pivots = lp.pivots();
            report.outcome = Some(WeightCheck::Feasible(w));
            return Ok(report);
        }
    }
}

fn unreachable_walk(g: &Graph, s: VertexId, t: VertexId) -> Vec<EdgeId> {
    let n = g.out.len();
    let mut pred: Vec<Option<(VertexId, EdgeId)>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[s] = true;
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &(e, v) in &g.out[u] {
            if !seen[v] {
                seen[v] = true;
                pred[v] = Some((u, e));
                q.push_back(v);
            }
        }
    }
    let mut walk = Vec::new();
    let mut v = t;
    while let Some((u, e)) = pred[v] {
        walk.push(e);
        v = u;
    }
    walk.reverse();
    walk
}

// ---------------------------------------------------------------------------
// certificates as flows

/// A weighted family of terminal-to-terminal paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminalFlow {
    /// `(source, target, edges, amount)` with positive integer amounts.
    pub paths: Vec<(Terminal, Terminal, Vec<EdgeId>, u64)>,
}

impl TerminalFlow {
    pub fn demand(&self) -> std::collections::BTreeMap<(Terminal, Terminal), u64> {
        let mut m = std::collections::BTreeMap::new();
        for (s, t, _, a) in &self.paths {
            *m.entry((*s, *t)).or_insert(0) += a;
        }
        m
    }

    pub fn edge_usage(&self, edge_count: usize) -> Vec<u64> {
        let mut u = vec![0; edge_count];
        for (_, _, es, a) in &self.paths {
            for &e in es {
                u[e] += a;
            }
        }
        u
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Flows {
    /// `upper` comes from the `<=` rows, `lower` from the `>=` rows; `lower`
    /// uses no edge more often than `upper`, yet costs more under the table.
    Pair { upper: TerminalFlow, lower: TerminalFlow },
    /// Scaling to integers would exceed the size bound.
    Unavailable,
}

const MAX_SCALE_BITS: u64 = 256;

/// Turns a Farkas witness into two integral flows.
pub fn farkas_to_flows(w: &FarkasWitness) -> Flows {
    let mut lcm = BigInt::one();
    for y in &w.multipliers {
        if !y.is_zero() {
            lcm = lcm.lcm(y.denom());
        }
    }
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for (c, y) in w.constraints.iter().zip(&w.multipliers) {
        if y.is_zero() {
            continue;
        }
        let a = y.numer() * (&lcm / y.denom());
        if a.bits() > MAX_SCALE_BITS {
            return Flows::Unavailable;
        }
        let Some(a) = a.to_u64() else { return Flows::Unavailable };
        let entry = (c.src, c.dst, c.edges.clone(), a);
        match c.relation {
            Relation::Le => upper.push(entry),
            Relation::Ge => lower.push(entry),
        }
    }
    Flows::Pair { upper: TerminalFlow { paths: upper }, lower: TerminalFlow { paths: lower } }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::CircularOrdering;
    use crate::rational::rat;

    fn square() -> PlanarNest {
        let t: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        PlanarNest::empty(&t, &CircularOrdering::new(t.clone()).unwrap()).unwrap()
    }

    #[test]
    fn crossing_paths_feasible_and_infeasible() {
        let mut n = square();
        let tr = n.trajectories(0, 2, 0).next().unwrap();
        n.insert_path(&tr).unwrap();
        let tr = n.trajectories(1, 3, 0).next().unwrap();
        n.insert_path(&tr).unwrap();
        let mut d = PartialQuasiMetric::unknown(n.terminals().to_vec());
        d.set(0, 2, ExtendedRational::from_int(4));
        d.set(1, 3, ExtendedRational::from_int(4));
        match check_weights(&n, &d).unwrap() {
            WeightCheck::Feasible(w) => {
                assert_eq!(path_length(&n, &w, 0), rat(4));
                assert_eq!(path_length(&n, &w, 1), rat(4));
            }
            other => panic!("{other:?}"),
        }
        // no path from a to d exists, so d(a,d) = inf is consistent only if
        // the crossing gives no route; it does: a -> x -> d
        d.set(0, 3, ExtendedRational::Infinite);
        assert!(matches!(
            check_weights(&n, &d).unwrap(),
            WeightCheck::Infeasible(Infeasibility::Reachable { .. })
        ));
    }

    #[test]
    fn missing_path_is_an_error() {
        let n = square();
        let mut d = PartialQuasiMetric::unknown(n.terminals().to_vec());
        d.set(0, 1, ExtendedRational::from_int(1));
        assert!(matches!(check_weights(&n, &d), Err(WeightError::MissingPath(..))));
    }
}
