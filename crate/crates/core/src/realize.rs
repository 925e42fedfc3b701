//! Building a weighted planar nest whose terminal distances equal a given
//! Monge quasi-metric, one shortest path at a time.

use std::time::Instant;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{monge_check, validate, CircularOrdering, MetricError, MongeResult, MongeViolation, PartialQuasiMetric, QuasiMetric, Terminal, Violation};
use crate::nest::{EdgeId, NestError, PathId, PlanarNest};
use crate::rational::{ExtendedRational, Rational};
use crate::search::{find_ordering, SearchOutcome};
use crate::weights::{check_weights_with, path_length, terminal_distances, CheckOptions, PathConstraint, WeightCheck, WeightError, Weights};

#[derive(Debug, Error)]
pub enum RealizeError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("input is not a quasi-metric: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    NotQuasiMetric(Vec<Violation>),
    #[error("ordering violates the Monge inequality at {:?}", .0.quadruple)]
    MongeViolated(MongeViolation),
    #[error("no circular ordering makes the table Monge")]
    NotRealizable,
    #[error("no feasible trajectory for ({src}, {dst}) after {tried} candidates")]
    SearchExhausted { src: String, dst: String, tried: usize },
    #[error(transparent)]
    Nest(#[from] NestError),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error("internal check failed: {0}")]
    Internal(String),
}

/// A nest with weights, its ordering, and the path registered for each
/// pair whose distance it must carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedInstance {
    pub nest: PlanarNest,
    pub weights: Weights,
    /// Row-major over terminal pairs.
    pub designated: Vec<Option<PathId>>,
}

impl WeightedInstance {
    /// Registers every path for its own pair, first path wins.
    pub fn with_all_designated(nest: PlanarNest, weights: Weights) -> Self {
        let k = nest.terminals().len();
        let mut designated = vec![None; k * k];
        for (i, p) in nest.paths().iter().enumerate() {
            let slot = &mut designated[p.src * k + p.dst];
            if slot.is_none() {
                *slot = Some(i);
            }
        }
        WeightedInstance { nest, weights, designated }
    }

    pub fn designated_for(&self, s: Terminal, t: Terminal) -> Option<PathId> {
        self.designated[s * self.nest.terminals().len() + t]
    }

    pub fn sigma(&self) -> CircularOrdering {
        self.nest.ordering()
    }

    pub fn realized_metric(&self) -> QuasiMetric {
        QuasiMetric::new(self.nest.terminals().to_vec(), terminal_distances(&self.nest, &self.weights))
            .expect("terminals are distinct")
    }

    pub fn path_length(&self, p: PathId) -> Rational {
        path_length(&self.nest, &self.weights, p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Discrepancy {
    Ordering { expected: String, actual: String },
    Structure { detail: String },
    Weight { edge: EdgeId, detail: String },
    Distance { from: String, to: String, expected: String, actual: String },
    DesignatedLength { from: String, to: String, path: PathId, expected: String, actual: String },
}

/// Recomputes every terminal distance from scratch and compares.
pub fn verify(inst: &WeightedInstance, d: &QuasiMetric) -> Vec<Discrepancy> {
    let mut out = Vec::new();
    let nest = &inst.nest;
    if nest.terminals() != d.terminals() {
        out.push(Discrepancy::Structure { detail: "terminal sets differ".into() });
        return out;
    }
    if let Err(e) = nest.check_invariants() {
        out.push(Discrepancy::Structure { detail: e.to_string() });
    }
    if inst.weights.len() != nest.edges().len() {
        out.push(Discrepancy::Structure { detail: "one weight per edge expected".into() });
        return out;
    }
    for e in nest.path_edges() {
        if inst.weights[e].is_negative() {
            out.push(Discrepancy::Weight { edge: e, detail: "negative".into() });
        }
    }
    let got = terminal_distances(nest, &inst.weights);
    let k = d.len();
    for t in 0..k {
        for u in 0..k {
            if t == u {
                continue;
            }
            if got[t * k + u] != *d.d(t, u) {
                out.push(Discrepancy::Distance {
                    from: d.name(t).into(),
                    to: d.name(u).into(),
                    expected: d.d(t, u).to_string(),
                    actual: got[t * k + u].to_string(),
                });
            }
            if let Some(p) = inst.designated_for(t, u) {
                let len = ExtendedRational::Finite(inst.path_length(p));
                if len != *d.d(t, u) {
                    out.push(Discrepancy::DesignatedLength {
                        from: d.name(t).into(),
                        to: d.name(u).into(),
                        path: p,
                        expected: d.d(t, u).to_string(),
                        actual: len.to_string(),
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct RealizeOptions {
    /// Highest face-revisit level tried before giving up on a pair.
    pub max_revisits: usize,
    /// Trajectories tried per pair and level.
    pub trajectory_cap: usize,
    /// Reuse cuts from the previous accepted check.
    pub carry_cuts: bool,
    pub check_invariants: bool,
    /// Hold every unseen pair to its final distance as a lower bound while
    /// inserting. Insertions only add walks, so a pair that is already too
    /// short can never be repaired later.
    pub lookahead: bool,
}

impl Default for RealizeOptions {
    fn default() -> Self {
        RealizeOptions { max_revisits: 2, trajectory_cap: 20_000, carry_cuts: true, check_invariants: true, lookahead: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InsertionStat {
    pub src: String,
    pub dst: String,
    pub tried: usize,
    pub revisit_level: usize,
    pub crossings: usize,
    pub lp_rounds: usize,
}

#[derive(Debug, Clone)]
pub struct RealizeReport {
    pub instance: WeightedInstance,
    pub stats: Vec<InsertionStat>,
    pub diagnostics: Vec<String>,
    /// Constraints of the final weight computation.
    pub constraint_log: Vec<PathConstraint>,
    pub millis: u128,
}

/// Finite off-diagonal pairs by nonincreasing distance, ties by names.
pub fn stream_order(d: &QuasiMetric) -> Vec<(Terminal, Terminal)> {
    let k = d.len();
    let mut pairs: Vec<(Terminal, Terminal)> =
        (0..k).flat_map(|t| (0..k).map(move |u| (t, u))).filter(|&(t, u)| t != u && d.d(t, u).is_finite()).collect();
    pairs.sort_by(|&(a, b), &(c, e)| {
        d.d(c, e).cmp(d.d(a, b)).then_with(|| d.name(a).cmp(d.name(c))).then_with(|| d.name(b).cmp(d.name(e)))
    });
    pairs
}

pub fn realize(d: &QuasiMetric, sigma: &CircularOrdering) -> Result<WeightedInstance, RealizeError> {
    realize_with(d, sigma, &RealizeOptions::default()).map(|r| r.instance)
}

pub fn realize_auto(d: &QuasiMetric) -> Result<WeightedInstance, RealizeError> {
    match find_ordering(d) {
        SearchOutcome::Found(s) => realize(d, &s),
        SearchOutcome::NotRealizable(_) => Err(RealizeError::NotRealizable),
    }
}

fn carry(cuts: &[PathConstraint], splits: &[(EdgeId, EdgeId, usize)]) -> Vec<PathConstraint> {
    if splits.is_empty() {
        return cuts.to_vec();
    }
    let mut second = std::collections::HashMap::new();
    for &(e, e2, _) in splits {
        second.insert(e, e2);
    }
    cuts.iter()
        .map(|c| {
            let mut edges = Vec::with_capacity(c.edges.len() + 2);
            for &e in &c.edges {
                edges.push(e);
                if let Some(&e2) = second.get(&e) {
                    edges.push(e2);
                }
            }
            PathConstraint { edges, ..c.clone() }
        })
        .collect()
}

pub fn realize_with(d: &QuasiMetric, sigma: &CircularOrdering, opts: &RealizeOptions) -> Result<RealizeReport, RealizeError> {
    let started = Instant::now();
    let violations = validate(d);
    if !violations.is_empty() {
        return Err(RealizeError::NotQuasiMetric(violations));
    }
    if let MongeResult::Violation(v) = monge_check(d, sigma)? {
        return Err(RealizeError::MongeViolated(v));
    }
    let k = d.len();
    let mut nest = PlanarNest::from_metric(d, sigma)?;
    let mut partial = PartialQuasiMetric::unknown(d.terminals().to_vec());
    for t in 0..k {
        for u in 0..k {
            if t != u && d.d(t, u).is_infinite() {
                partial.set(t, u, ExtendedRational::Infinite);
            }
        }
    }
    let mut stats = Vec::new();
    let mut diagnostics = Vec::new();
    let mut cuts: Vec<PathConstraint> = Vec::new();
    let mut last_log = Vec::new();
    let mut last_weights: Option<Weights> = None;
    let pairs = stream_order(d);
    let bounds = opts.lookahead.then(|| d.entries().to_vec());

    for (m, &(t, u)) in pairs.iter().enumerate() {
        partial.set(t, u, d.d(t, u).clone());
        let mut tried = 0;
        let mut accepted = None;
        'levels: for level in 0..=opts.max_revisits {
            let mut at_level = 0;
            for tr in nest.trajectories(t, u, level) {
                if level > 0 && tr.max_revisits() < level {
                    continue;
                }
                if at_level >= opts.trajectory_cap {
                    break;
                }
                at_level += 1;
                tried += 1;
                let rec = nest.insert_path(&tr)?;
                let seed = if opts.carry_cuts { carry(&cuts, &rec.splits) } else { Vec::new() };
                let rep = check_weights_with(&nest, &partial, &CheckOptions { seed_cuts: seed, max_rounds: None, lower_bounds: bounds.clone() })?;
                match rep.outcome.expect("outcome set") {
                    WeightCheck::Feasible(w) => {
                        if opts.check_invariants {
                            nest.check_invariants().map_err(|e| RealizeError::Internal(e.to_string()))?;
                        }
                        cuts = rep.log.iter().filter(|c| !c.designated).cloned().collect();
                        last_log = rep.log;
                        last_weights = Some(w);
                        accepted = Some((level, tr.steps.len(), rep.rounds));
                        break 'levels;
                    }
                    WeightCheck::Infeasible(_) => nest.undo(rec),
                }
            }
        }
        let Some((level, crossings, rounds)) = accepted else {
            return Err(RealizeError::SearchExhausted { src: d.name(t).into(), dst: d.name(u).into(), tried });
        };
        if level > 0 {
            diagnostics.push(format!("({}, {}) needed revisit level {level}", d.name(t), d.name(u)));
        }
        let inserted = m + 1;
        let bound = inserted * (inserted - 1) / 2 + inserted * k;
        if nest.vertex_count() > bound {
            diagnostics.push(format!("vertex count {} exceeds {bound} after {inserted} paths", nest.vertex_count()));
        }
        stats.push(InsertionStat {
            src: d.name(t).into(),
            dst: d.name(u).into(),
            tried,
            revisit_level: level,
            crossings,
            lp_rounds: rounds,
        });
    }

    // every entry is known by now, so the last accepted check already used
    // the full table
    let weights = match last_weights {
        Some(w) => w,
        None => vec![Rational::zero(); nest.edges().len()],
    };
    let inst = WeightedInstance::with_all_designated(nest, weights);
    let problems = verify(&inst, d);
    if !problems.is_empty() {
        return Err(RealizeError::Internal(format!("verification failed: {:?}", problems[0])));
    }
    Ok(RealizeReport { instance: inst, stats, diagnostics, constraint_log: last_log, millis: started.elapsed().as_millis() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::worked_example_metric;

    #[test]
    fn stream_is_nonincreasing() {
        let d = worked_example_metric();
        let s = stream_order(&d);
        assert_eq!(s.len(), 30);
        for w in s.windows(2) {
            assert!(d.d(w[0].0, w[0].1) >= d.d(w[1].0, w[1].1));
        }
    }

    #[test]
    fn realizes_worked_example() {
        let d = worked_example_metric();
        let sigma = CircularOrdering::from_strs(&["a", "t4", "t1", "b", "t3", "t2"]).unwrap();
        let inst = realize(&d, &sigma).unwrap();
        assert!(verify(&inst, &d).is_empty());
    }

    #[test]
    fn rejects_non_monge_ordering() {
        let d = worked_example_metric();
        let sigma = CircularOrdering::from_strs(&["a", "b", "t1", "t2", "t3", "t4"]).unwrap();
        assert!(matches!(realize(&d, &sigma), Err(RealizeError::MongeViolated(_))));
    }
}
