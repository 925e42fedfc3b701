//! Demands, restricting pairs, routings, and the telescoped Monge chain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{CircularOrdering, MetricError, QuasiMetric, Terminal};
use crate::nest::{EdgeId, EdgeKind, PlanarNest};
use crate::rational::ExtendedRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertifyError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("terminal index {0} out of range")]
    UnknownTerminal(Terminal),
    #[error("edge {0} is not a path edge of the nest")]
    UnknownEdge(EdgeId),
    #[error("not a good sequence: {0}")]
    NotGood(String),
}

/// A multiset of ordered terminal pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand(BTreeMap<(Terminal, Terminal), u64>);

impl Demand {
    pub fn new() -> Self {
        Demand::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (Terminal, Terminal)>>(pairs: I) -> Self {
        let mut d = Demand::new();
        for (s, t) in pairs {
            d.add(s, t, 1);
        }
        d
    }

    pub fn add(&mut self, s: Terminal, t: Terminal, mult: u64) {
        if mult > 0 {
            *self.0.entry((s, t)).or_insert(0) += mult;
        }
    }

    pub fn get(&self, s: Terminal, t: Terminal) -> u64 {
        self.0.get(&(s, t)).copied().unwrap_or(0)
    }

    /// `(source, target, multiplicity)` with positive multiplicities.
    pub fn iter(&self) -> impl Iterator<Item = (Terminal, Terminal, u64)> + '_ {
        self.0.iter().map(|(&(s, t), &m)| (s, t, m))
    }

    /// One entry per unit of demand, in pair order.
    pub fn instances(&self) -> Vec<(Terminal, Terminal)> {
        self.iter().flat_map(|(s, t, m)| std::iter::repeat_n((s, t), m as usize)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check(&self, k: usize) -> Result<(), CertifyError> {
        match self.0.keys().flat_map(|&(s, t)| [s, t]).find(|&x| x >= k) {
            Some(x) => Err(CertifyError::UnknownTerminal(x)),
            None => Ok(()),
        }
    }
}

/// `sum D(t, t') * C(t, t')`.
pub fn demand_cost(d: &QuasiMetric, c: &Demand) -> Result<ExtendedRational, CertifyError> {
    c.check(d.len())?;
    let mut total = ExtendedRational::zero();
    for (s, t, m) in c.iter() {
        for _ in 0..m {
            total = total + d.d(s, t).clone();
        }
    }
    Ok(total)
}

/// Same out-degree and in-degree at every terminal.
pub fn aligned(c: &Demand, cp: &Demand) -> bool {
    let degrees = |x: &Demand| {
        let mut out: BTreeMap<Terminal, u64> = BTreeMap::new();
        let mut inc: BTreeMap<Terminal, u64> = BTreeMap::new();
        for (s, t, m) in x.iter() {
            *out.entry(s).or_insert(0) += m;
            *inc.entry(t).or_insert(0) += m;
        }
        (out, inc)
    };
    degrees(c) == degrees(cp)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestrictingPair {
    pub c: Demand,
    pub cprime: Demand,
    /// The pair being inserted.
    pub context: (Terminal, Terminal),
    /// Pairs whose paths are already in the nest.
    pub seen: Vec<(Terminal, Terminal)>,
}

/// `C` uses only seen pairs and contains `(a, b)`, the two demands are
/// aligned, and `C` is strictly cheaper than `C'`.
pub fn is_restricting_pair(d: &QuasiMetric, rp: &RestrictingPair) -> bool {
    let (a, b) = rp.context;
    let r1 = rp.c.get(a, b) > 0 && rp.c.iter().all(|(s, t, _)| rp.seen.contains(&(s, t)));
    let r2 = aligned(&rp.c, &rp.cprime);
    let r3 = match (demand_cost(d, &rp.c), demand_cost(d, &rp.cprime)) {
        (Ok(x), Ok(y)) => x < y,
        _ => false,
    };
    r1 && r2 && r3
}

/// An explicit edge path for each unit of `C'`, indexed like
/// [`Demand::instances`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Routing(pub BTreeMap<usize, Vec<EdgeId>>);

/// Whether `routing` carries every unit of `cprime` inside the capacities
/// that `c` puts on the registered paths.
pub fn check_routing(nest: &PlanarNest, c: &Demand, cprime: &Demand, routing: &Routing) -> Result<bool, CertifyError> {
    let k = nest.terminals().len();
    c.check(k)?;
    cprime.check(k)?;
    for es in routing.0.values() {
        if let Some(&e) = es.iter().find(|&&e| e >= nest.edges().len() || nest.edges()[e].kind == EdgeKind::Boundary) {
            return Err(CertifyError::UnknownEdge(e));
        }
    }
    let units = cprime.instances();
    if routing.0.len() != units.len() || routing.0.keys().any(|&i| i >= units.len()) {
        return Ok(false);
    }
    let mut usage = vec![0u64; nest.edges().len()];
    for (i, &(s, t)) in units.iter().enumerate() {
        let es = &routing.0[&i];
        let mut at = nest.terminal_vertex(s);
        for &e in es {
            if nest.edges()[e].from != at {
                return Ok(false);
            }
            at = nest.edges()[e].to;
            usage[e] += 1;
        }
        if at != nest.terminal_vertex(t) || es.is_empty() && s != t {
            return Ok(false);
        }
    }
    let mut cap = vec![0u64; nest.edges().len()];
    for (s, t, m) in c.iter() {
        if let Some(p) = nest.path_for(s, t) {
            for &e in &nest.paths()[p].edges {
                cap[e] += m;
            }
        }
    }
    Ok(usage.iter().zip(&cap).all(|(u, c)| u <= c))
}

/// Whether `(s1, t1)` and `(s2, t2)` have four distinct ends that
/// alternate around `sigma`.
pub fn crossing(sigma: &CircularOrdering, d: &QuasiMetric, p1: (Terminal, Terminal), p2: (Terminal, Terminal)) -> Result<bool, CertifyError> {
    let ord = sigma.positions(d)?;
    let mut pos = vec![0; ord.len()];
    for (i, &t) in ord.iter().enumerate() {
        pos[t] = i;
    }
    let ends = [p1.0, p1.1, p2.0, p2.1];
    if let Some(&t) = ends.iter().find(|&&t| t >= ord.len()) {
        return Err(CertifyError::UnknownTerminal(t));
    }
    let [a, b, c, e] = ends.map(|t| pos[t]);
    let distinct = a != b && a != c && a != e && b != c && b != e && c != e;
    let between = |x: usize| (a < x && x < b) || (b < x && x < a);
    Ok(distinct && between(c) != between(e))
}

/// The two boundary segments between `a` and `b`: left runs clockwise
/// from `a` to `b`, right from `b` back to `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Segment {
    Left,
    Right,
}

struct Split {
    pos: Vec<usize>,
    a: usize,
    ab: usize,
    k: usize,
}

impl Split {
    fn new(d: &QuasiMetric, sigma: &CircularOrdering, a: Terminal, b: Terminal) -> Result<Self, CertifyError> {
        let ord = sigma.positions(d)?;
        let k = ord.len();
        let mut pos = vec![0; k];
        for (i, &t) in ord.iter().enumerate() {
            pos[t] = i;
        }
        for t in [a, b] {
            if t >= k {
                return Err(CertifyError::UnknownTerminal(t));
            }
        }
        let ab = (pos[b] + k - pos[a]) % k;
        let pa = pos[a];
        Ok(Split { pos, a: pa, ab, k })
    }

    /// `None` for `a` and `b` themselves.
    fn locate(&self, x: Terminal) -> Option<(Segment, usize)> {
        let cw = (self.pos[x] + self.k - self.a) % self.k;
        if cw == 0 || cw == self.ab {
            None
        } else if cw < self.ab {
            Some((Segment::Left, cw))
        } else {
            Some((Segment::Right, self.k - cw))
        }
    }

    /// Both points on one segment, the first closer to `a`.
    fn precedes(&self, x: Terminal, y: Terminal) -> bool {
        match (self.locate(x), self.locate(y)) {
            (Some((s, i)), Some((t, j))) => s == t && i < j,
            _ => false,
        }
    }

    fn is_crossing_path(&self, x: Terminal, y: Terminal) -> bool {
        match (self.locate(x), self.locate(y)) {
            (Some((s, _)), Some((t, _))) => s != t,
            _ => false,
        }
    }

    fn same_segment(&self, x: Terminal, y: Terminal) -> bool {
        matches!((self.locate(x), self.locate(y)), (Some((s, _)), Some((t, _))) if s == t)
    }

    /// Path `x -> y` precedes path `x2 -> y2`.
    fn path_precedes(&self, (x, y): (Terminal, Terminal), (x2, y2): (Terminal, Terminal)) -> bool {
        if self.same_segment(x, x2) {
            self.precedes(x, x2) && self.precedes(y, y2)
        } else {
            self.same_segment(x, y2) && self.precedes(x, y2)
        }
    }
}

/// Whether `endpoints` is the endpoint list of a good sequence for the
/// context `(a, b)`: each pair runs between the two boundary segments and
/// precedes the next.
pub fn is_good_sequence(d: &QuasiMetric, sigma: &CircularOrdering, a: Terminal, b: Terminal, endpoints: &[(Terminal, Terminal)]) -> Result<bool, CertifyError> {
    let split = Split::new(d, sigma, a, b)?;
    if let Some(&t) = endpoints.iter().flat_map(|p| [&p.0, &p.1]).find(|&&t| t >= d.len()) {
        return Err(CertifyError::UnknownTerminal(t));
    }
    Ok(endpoints.iter().all(|&(x, y)| split.is_crossing_path(x, y))
        && endpoints.windows(2).all(|w| split.path_precedes(w[0], w[1])))
}

/// `D(a,b) + sum D(x_i,y_i) >= D(a,y_1) + D(x_1,y_2) + ... + D(x_r,b)` for
/// the endpoint list of a good sequence.
pub fn chain_inequality(d: &QuasiMetric, sigma: &CircularOrdering, a: Terminal, b: Terminal, endpoints: &[(Terminal, Terminal)]) -> Result<bool, CertifyError> {
    if !is_good_sequence(d, sigma, a, b, endpoints)? {
        return Err(CertifyError::NotGood(format!("{endpoints:?}")));
    }
    let mut lhs = Demand::from_pairs(endpoints.iter().copied());
    lhs.add(a, b, 1);
    let mut rhs = Demand::new();
    let mut from = a;
    for &(x, y) in endpoints {
        rhs.add(from, y, 1);
        from = x;
    }
    rhs.add(from, b, 1);
    Ok(demand_cost(d, &lhs)? >= demand_cost(d, &rhs)?)
}

/// A random good endpoint list of length at most `max_len` for `(a, b)`,
/// built by drawing crossing pairs and keeping those that extend the chain.
/// A few draws are made and the longest kept.
pub fn sample_good_sequence<R: rand::Rng>(d: &QuasiMetric, sigma: &CircularOrdering, a: Terminal, b: Terminal, max_len: usize, rng: &mut R) -> Result<Vec<(Terminal, Terminal)>, CertifyError> {
    let split = Split::new(d, sigma, a, b)?;
    let k = d.len();
    let crossing_pairs: Vec<(Terminal, Terminal)> =
        (0..k).flat_map(|x| (0..k).map(move |y| (x, y))).filter(|&(x, y)| split.is_crossing_path(x, y)).collect();
    let target = rng.gen_range(0..=max_len);
    let mut best: Vec<(Terminal, Terminal)> = Vec::new();
    for _ in 0..8 {
        let mut out: Vec<(Terminal, Terminal)> = Vec::new();
        while out.len() < target {
            let next: Vec<_> = crossing_pairs.iter().copied().filter(|&q| out.last().is_none_or(|&p| split.path_precedes(p, q))).collect();
            if next.is_empty() {
                break;
            }
            out.push(next[rng.gen_range(0..next.len())]);
        }
        if out.len() > best.len() {
            best = out;
        }
        if best.len() == target {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{worked_example_metric, worked_example_ordering};

    fn ex() -> (QuasiMetric, CircularOrdering) {
        (worked_example_metric(), worked_example_ordering())
    }

    fn t(d: &QuasiMetric, n: &str) -> Terminal {
        d.index_of(n).unwrap()
    }

    #[test]
    fn worked_example_costs() {
        let (d, _) = ex();
        let c = Demand::from_pairs([(t(&d, "a"), t(&d, "b")), (t(&d, "t1"), t(&d, "t2")), (t(&d, "t3"), t(&d, "t4"))]);
        let cp = Demand::from_pairs([(t(&d, "a"), t(&d, "t4")), (t(&d, "t1"), t(&d, "b")), (t(&d, "t3"), t(&d, "t2"))]);
        assert_eq!(demand_cost(&d, &c).unwrap(), ExtendedRational::from_int(9));
        assert_eq!(demand_cost(&d, &cp).unwrap(), ExtendedRational::from_int(12));
        assert!(aligned(&c, &cp));
        assert_eq!(demand_cost(&d, &Demand::new()).unwrap(), ExtendedRational::zero());
        let mut short = cp.clone();
        short.0.remove(&(t(&d, "a"), t(&d, "t4")));
        assert!(!aligned(&c, &short));
        let seen = vec![(t(&d, "a"), t(&d, "b")), (t(&d, "t1"), t(&d, "t2")), (t(&d, "t3"), t(&d, "t4"))];
        let rp = RestrictingPair { c: c.clone(), cprime: cp, context: (t(&d, "a"), t(&d, "b")), seen: seen.clone() };
        assert!(is_restricting_pair(&d, &rp));
        let same = RestrictingPair { c: c.clone(), cprime: c, context: rp.context, seen };
        assert!(!is_restricting_pair(&d, &same));
    }

    #[test]
    fn crossing_predicate() {
        let d = QuasiMetric::from_ints(&["a", "b", "c", "d"], &[&[Some(0); 4], &[Some(0); 4], &[Some(0); 4], &[Some(0); 4]]).unwrap();
        let s = CircularOrdering::from_strs(&["a", "c", "b", "d"]).unwrap();
        assert!(crossing(&s, &d, (0, 1), (2, 3)).unwrap());
        assert!(!crossing(&s, &d, (0, 2), (1, 3)).unwrap());
        assert!(!crossing(&s, &d, (0, 1), (1, 3)).unwrap());
        let (e, es) = ex();
        assert!(crossing(&es, &e, (t(&e, "a"), t(&e, "b")), (t(&e, "t1"), t(&e, "t2"))).unwrap());
        assert!(crossing(&es, &e, (t(&e, "t1"), t(&e, "t2")), (t(&e, "t3"), t(&e, "t4"))).unwrap());
    }

    #[test]
    fn short_chains() {
        let (d, s) = ex();
        let (a, b) = (t(&d, "a"), t(&d, "b"));
        assert!(chain_inequality(&d, &s, a, b, &[]).unwrap());
        assert!(chain_inequality(&d, &s, a, b, &[(t(&d, "t1"), t(&d, "t2"))]).unwrap());
        // t4 and t1 are both left of a -> b, so (t4, t1) does not cross
        assert!(chain_inequality(&d, &s, a, b, &[(t(&d, "t4"), t(&d, "t1"))]).is_err());
    }
}
