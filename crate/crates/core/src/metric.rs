//! Quasi-metrics on named terminals, circular orderings and the Monge test.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{ExtendedRational, Rational};

pub type Terminal = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("duplicate terminal `{0}`")]
    DuplicateTerminal(String),
    #[error("unknown terminal `{0}`")]
    UnknownTerminal(String),
    #[error("expected {expected} entries, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("ordering does not list exactly the terminals of the metric")]
    OrderingMismatch,
    #[error("entry ({0}, {1}) is unknown")]
    UnknownEntry(String, String),
}

/// A complete table `d(t, t')` over a finite terminal set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasiMetric {
    terminals: Vec<String>,
    index: HashMap<String, Terminal>,
    entries: Vec<ExtendedRational>,
}

fn build_index(terminals: &[String]) -> Result<HashMap<String, Terminal>, MetricError> {
    let mut index = HashMap::new();
    for (i, t) in terminals.iter().enumerate() {
        if index.insert(t.clone(), i).is_some() {
            return Err(MetricError::DuplicateTerminal(t.clone()));
        }
    }
    Ok(index)
}

impl QuasiMetric {
    pub fn new(terminals: Vec<String>, entries: Vec<ExtendedRational>) -> Result<Self, MetricError> {
        let k = terminals.len();
        if entries.len() != k * k {
            return Err(MetricError::Shape { expected: k * k, found: entries.len() });
        }
        let index = build_index(&terminals)?;
        Ok(QuasiMetric { terminals, index, entries })
    }

    pub fn from_fn(
        terminals: Vec<String>,
        mut f: impl FnMut(Terminal, Terminal) -> ExtendedRational,
    ) -> Result<Self, MetricError> {
        let k = terminals.len();
        let entries = (0..k * k).map(|i| f(i / k, i % k)).collect();
        Self::new(terminals, entries)
    }

    /// Integer table with `None` for infinity; handy for fixtures.
    pub fn from_ints(names: &[&str], rows: &[&[Option<i64>]]) -> Result<Self, MetricError> {
        let terminals: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let mut entries = Vec::new();
        for row in rows {
            for v in row.iter() {
                entries.push(match v {
                    Some(n) => ExtendedRational::from_int(*n),
                    None => ExtendedRational::Infinite,
                });
            }
        }
        Self::new(terminals, entries)
    }

    pub fn len(&self) -> usize {
        self.terminals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminals.is_empty()
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn name(&self, t: Terminal) -> &str {
        &self.terminals[t]
    }

    pub fn index_of(&self, name: &str) -> Result<Terminal, MetricError> {
        self.index.get(name).copied().ok_or_else(|| MetricError::UnknownTerminal(name.to_string()))
    }

    pub fn d(&self, t: Terminal, u: Terminal) -> &ExtendedRational {
        &self.entries[t * self.len() + u]
    }

    pub fn get(&self, t: &str, u: &str) -> Result<&ExtendedRational, MetricError> {
        Ok(self.d(self.index_of(t)?, self.index_of(u)?))
    }

    pub fn entries(&self) -> &[ExtendedRational] {
        &self.entries
    }

    pub fn has_infinite(&self) -> bool {
        self.entries.iter().any(|e| e.is_infinite())
    }

    pub fn scaled(&self, lambda: &Rational) -> QuasiMetric {
        QuasiMetric {
            terminals: self.terminals.clone(),
            index: self.index.clone(),
            entries: self.entries.iter().map(|e| e.scale(lambda)).collect(),
        }
    }

    /// Restriction to a subset, keeping the order of `subset`.
    pub fn induce(&self, subset: &[Terminal]) -> QuasiMetric {
        let names = subset.iter().map(|&t| self.terminals[t].clone()).collect();
        QuasiMetric::from_fn(names, |i, j| self.d(subset[i], subset[j]).clone())
            .expect("subset of distinct terminals")
    }

    /// Terminal indices sorted by name.
    pub fn sorted_terminals(&self) -> Vec<Terminal> {
        let mut v: Vec<Terminal> = (0..self.len()).collect();
        v.sort_by(|&a, &b| self.terminals[a].cmp(&self.terminals[b]));
        v
    }

    pub fn to_partial(&self) -> PartialQuasiMetric {
        PartialQuasiMetric {
            terminals: self.terminals.clone(),
            entries: self.entries.iter().cloned().map(Some).collect(),
        }
    }
}

/// A table in which some entries are not yet known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialQuasiMetric {
    terminals: Vec<String>,
    entries: Vec<Option<ExtendedRational>>,
}

impl PartialQuasiMetric {
    pub fn unknown(terminals: Vec<String>) -> Self {
        let k = terminals.len();
        let mut entries = vec![None; k * k];
        for t in 0..k {
            entries[t * k + t] = Some(ExtendedRational::zero());
        }
        PartialQuasiMetric { terminals, entries }
    }

    pub fn new(terminals: Vec<String>, entries: Vec<Option<ExtendedRational>>) -> Result<Self, MetricError> {
        let k = terminals.len();
        if entries.len() != k * k {
            return Err(MetricError::Shape { expected: k * k, found: entries.len() });
        }
        build_index(&terminals)?;
        Ok(PartialQuasiMetric { terminals, entries })
    }

    pub fn len(&self) -> usize {
        self.terminals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminals.is_empty()
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn get(&self, t: Terminal, u: Terminal) -> Option<&ExtendedRational> {
        self.entries[t * self.len() + u].as_ref()
    }

    pub fn set(&mut self, t: Terminal, u: Terminal, v: ExtendedRational) {
        let k = self.len();
        self.entries[t * k + u] = Some(v);
    }

    pub fn entries(&self) -> &[Option<ExtendedRational>] {
        &self.entries
    }

    /// Known off-diagonal pairs, in row-major order.
    pub fn known_pairs(&self) -> Vec<(Terminal, Terminal)> {
        let k = self.len();
        let mut out = Vec::new();
        for t in 0..k {
            for u in 0..k {
                if t != u && self.get(t, u).is_some() {
                    out.push((t, u));
                }
            }
        }
        out
    }

    pub fn to_complete(&self) -> Result<QuasiMetric, MetricError> {
        let k = self.len();
        let mut entries = Vec::with_capacity(k * k);
        for (i, e) in self.entries.iter().enumerate() {
            match e {
                Some(v) => entries.push(v.clone()),
                None => {
                    return Err(MetricError::UnknownEntry(
                        self.terminals[i / k].clone(),
                        self.terminals[i % k].clone(),
                    ))
                }
            }
        }
        QuasiMetric::new(self.terminals.clone(), entries)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonzeroDiagonal { terminal: String, value: String },
    NonPositive { from: String, to: String, value: String },
    Triangle { from: String, via: String, to: String, direct: String, detour: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonzeroDiagonal { terminal, value } => {
                write!(f, "d({terminal},{terminal}) = {value}, expected 0")
            }
            Violation::NonPositive { from, to, value } => {
                write!(f, "d({from},{to}) = {value} is not positive")
            }
            Violation::Triangle { from, via, to, direct, detour } => write!(
                f,
                "d({from},{to}) = {direct} exceeds d({from},{via}) + d({via},{to}) = {detour}"
            ),
        }
    }
}

/// All quasi-metric axiom violations, diagonal first, then positivity,
/// then triangles in `(t, t', t'')` index order.
pub fn validate(d: &QuasiMetric) -> Vec<Violation> {
    let k = d.len();
    let mut out = Vec::new();
    for t in 0..k {
        let v = d.d(t, t);
        if *v != ExtendedRational::zero() {
            out.push(Violation::NonzeroDiagonal { terminal: d.name(t).into(), value: v.to_string() });
        }
    }
    for t in 0..k {
        for u in 0..k {
            if t != u && !d.d(t, u).is_positive() {
                out.push(Violation::NonPositive {
                    from: d.name(t).into(),
                    to: d.name(u).into(),
                    value: d.d(t, u).to_string(),
                });
            }
        }
    }
    for t in 0..k {
        for via in 0..k {
            for u in 0..k {
                let detour = d.d(t, via) + d.d(via, u);
                if *d.d(t, u) > detour {
                    out.push(Violation::Triangle {
                        from: d.name(t).into(),
                        via: d.name(via).into(),
                        to: d.name(u).into(),
                        direct: d.d(t, u).to_string(),
                        detour: detour.to_string(),
                    });
                }
            }
        }
    }
    out
}

/// A cyclic sequence of distinct terminal names, read clockwise.
///
/// Two orderings are equal when one is a rotation of the other.
#[derive(Debug, Clone, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CircularOrdering(Vec<String>);

impl CircularOrdering {
    pub fn new(names: Vec<String>) -> Result<Self, MetricError> {
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n.clone()) {
                return Err(MetricError::DuplicateTerminal(n.clone()));
            }
        }
        Ok(CircularOrdering(names))
    }

    pub fn from_strs(names: &[&str]) -> Result<Self, MetricError> {
        Self::new(names.iter().map(|s| s.to_string()).collect())
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Rotated so that the least name comes first.
    pub fn canonical(&self) -> Vec<String> {
        match self.0.iter().enumerate().min_by(|a, b| a.1.cmp(b.1)) {
            Some((i, _)) => {
                let mut v = self.0.clone();
                v.rotate_left(i);
                v
            }
            None => Vec::new(),
        }
    }

    pub fn rotate(&self, steps: usize) -> Self {
        let mut v = self.0.clone();
        if !v.is_empty() {
            let s = steps % v.len();
            v.rotate_left(s);
        }
        CircularOrdering(v)
    }

    pub fn mirror(&self) -> Self {
        let mut v = self.0.clone();
        v.reverse();
        CircularOrdering(v)
    }

    /// Indices into `d` in clockwise order, starting at the least name.
    pub fn positions(&self, d: &QuasiMetric) -> Result<Vec<Terminal>, MetricError> {
        if self.len() != d.len() {
            return Err(MetricError::OrderingMismatch);
        }
        self.canonical()
            .iter()
            .map(|n| d.index_of(n).map_err(|_| MetricError::OrderingMismatch))
            .collect()
    }

    pub fn from_indices(d: &QuasiMetric, order: &[Terminal]) -> Self {
        CircularOrdering(order.iter().map(|&t| d.name(t).to_string()).collect())
    }
}

impl PartialEq for CircularOrdering {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl fmt::Display for CircularOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MongeViolation {
    /// `(t1, t2, t3, t4)` in clockwise order.
    pub quadruple: [String; 4],
    /// `d(t1,t3) + d(t2,t4)`
    pub lhs: String,
    /// `d(t1,t4) + d(t2,t3)`
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MongeResult {
    Pass,
    Violation(MongeViolation),
}

impl MongeResult {
    pub fn is_pass(&self) -> bool {
        matches!(self, MongeResult::Pass)
    }
}

/// Whether `d(t1,t3) + d(t2,t4) >= d(t1,t4) + d(t2,t3)` holds.
pub(crate) fn aligned_ok(d: &QuasiMetric, q: [Terminal; 4]) -> bool {
    let [t1, t2, t3, t4] = q;
    d.d(t1, t3) + d.d(t2, t4) >= d.d(t1, t4) + d.d(t2, t3)
}

/// Checks every clockwise-aligned quadruple. The reported violation is the
/// first one met when 4-subsets are enumerated in lexicographic order of
/// their positions in the canonical rotation, each tried at its four
/// rotations in turn.
pub fn monge_check(d: &QuasiMetric, sigma: &CircularOrdering) -> Result<MongeResult, MetricError> {
    let ord = sigma.positions(d)?;
    Ok(match first_monge_violation(d, &ord) {
        None => MongeResult::Pass,
        Some(q) => MongeResult::Violation(MongeViolation {
            quadruple: q.map(|t| d.name(t).to_string()),
            lhs: (d.d(q[0], q[2]) + d.d(q[1], q[3])).to_string(),
            rhs: (d.d(q[0], q[3]) + d.d(q[1], q[2])).to_string(),
        }),
    })
}

pub(crate) fn first_monge_violation(d: &QuasiMetric, ord: &[Terminal]) -> Option<[Terminal; 4]> {
    let k = ord.len();
    for i in 0..k {
        for j in i + 1..k {
            for l in j + 1..k {
                for m in l + 1..k {
                    let p = [ord[i], ord[j], ord[l], ord[m]];
                    for r in 0..4 {
                        let q = [p[r], p[(r + 1) % 4], p[(r + 2) % 4], p[(r + 3) % 4]];
                        if !aligned_ok(d, q) {
                            return Some(q);
                        }
                    }
                }
            }
        }
    }
    None
}
