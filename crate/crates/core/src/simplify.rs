//! Shrinking a realizing nest while keeping every terminal distance.
//!
//! Two rewrites remove vertices shared by a pair of paths. Case 1: the
//! paths meet at `x1` and later at `x2` in the same order; their
//! `x1 -> x2` pieces are exchanged and both meeting points smoothed away.
//! Case 2: they meet in opposite orders and bound a lens that no third
//! path crosses from side to side; both paths are redrawn off the lens,
//! which leaves the third-path pieces inside it on their own side.
//!
//! Each rewrite only merges runs of consecutive edges into single edges of
//! the same total weight and drops edges no path uses, so walks can only
//! disappear while every registered path keeps its length. Distances are
//! therefore unchanged as long as each finite pair has a shortest path
//! registered, which [`simplify`] checks up front and re-verifies after
//! every step.

use std::collections::HashMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::rational_serde;
use crate::metric::QuasiMetric;
use crate::nest::{dart_edge, EdgeId, EdgeKind, FaceId, NestError, PathId, PlanarNest, VertexId};
use crate::rational::Rational;
use crate::realize::{verify, Discrepancy, WeightedInstance};

#[derive(Debug, Error)]
pub enum SimplifyError {
    #[error("instance does not verify: {0:?}")]
    Unverified(Vec<Discrepancy>),
    #[error("path {path} is longer than its pair's distance")]
    NotShortest { path: PathId },
    #[error("no path registered for the finite pair ({from}, {to})")]
    Uncovered { from: String, to: String },
    #[error("witness does not match the instance: {0}")]
    BadWitness(String),
    #[error("exchanged pieces differ in length: {left} vs {right}")]
    LengthMismatch { left: String, right: String },
    #[error("path {path} would keep a loop of positive length")]
    PositiveLoop { path: PathId },
    #[error(transparent)]
    Structure(#[from] NestError),
    #[error("rewrite {step} broke the distance table: {detail}")]
    Rewrite { step: usize, detail: String, log: Vec<RewriteEvent> },
    #[error("{0} lens witnesses remain but none can be redrawn planarly")]
    Blocked(usize),
}

/// Paths `P, P'` meeting at `x1` and then `x2` on both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case1Witness {
    pub paths: (PathId, PathId),
    pub pivots: (VertexId, VertexId),
}

/// `x1` before `x2` on `P`, `x2` before `x1` on `P'`, with no shared
/// vertex in between on either path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case2Witness {
    pub paths: (PathId, PathId),
    pub pivots: (VertexId, VertexId),
    /// Faces enclosed by `P[x1..x2]` and `P'[x2..x1]`.
    pub region: Vec<FaceId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewriteKind {
    Case1,
    Case2,
}

/// Consecutive edges of one path replaced by the first of them, carrying
/// their total weight. Ids refer to the instance before the rewrite, with
/// earlier merges of the same event already applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentMerge {
    pub path: PathId,
    pub edges: Vec<EdgeId>,
    #[serde(with = "rational_serde")]
    pub weight: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteEvent {
    pub kind: RewriteKind,
    pub paths: (PathId, PathId),
    pub pivots: (VertexId, VertexId),
    pub vertices_before: usize,
    pub vertices_after: usize,
    pub edges_before: usize,
    pub edges_after: usize,
    pub merges: Vec<SegmentMerge>,
    /// Zero-length loops cut out of a path after an exchange.
    pub dropped: Vec<EdgeId>,
}

impl RewriteEvent {
    pub fn vertices_removed(&self) -> usize {
        self.vertices_before - self.vertices_after
    }

    /// Replays the merges on the weights before the rewrite and checks that
    /// each recorded weight is the total of its segment.
    pub fn merges_preserve_lengths(&self, before: &[Rational]) -> bool {
        let mut w = before.to_vec();
        for m in &self.merges {
            let Some(total) = m.edges.iter().map(|&e| w.get(e).cloned()).sum::<Option<Rational>>() else {
                return false;
            };
            if total != m.weight {
                return false;
            }
            w[m.edges[0]] = total;
        }
        self.dropped.iter().all(|&e| w.get(e).is_some_and(|x| x.is_zero()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplifyOptions {
    /// Recompute the full distance table after every rewrite instead of
    /// only at the fixpoint.
    pub verify_each: bool,
}

impl Default for SimplifyOptions {
    fn default() -> Self {
        SimplifyOptions { verify_each: true }
    }
}

#[derive(Debug, Clone)]
pub struct Simplified {
    pub instance: WeightedInstance,
    pub log: Vec<RewriteEvent>,
}

/// Largest number of vertices two paths may share at a fixpoint.
pub fn shared_vertex_bound(k: usize) -> usize {
    k * k.saturating_sub(1) + 1
}

/// Largest vertex count of a fixpoint, boundary vertices included.
pub fn vertex_bound(k: usize) -> u128 {
    let m = (k * k.saturating_sub(1)) as u128;
    m * m.saturating_sub(1) / 2 * (m + 1) + k as u128
}

/// Number of vertices paths `p` and `q` have in common.
pub fn shared_vertices(nest: &PlanarNest, p: PathId, q: PathId) -> usize {
    let qv = nest.path_vertices(q);
    nest.path_vertices(p).iter().filter(|v| qv.contains(v)).count()
}

// ---------------------------------------------------------------------------
// detection

/// Shared vertices of two paths as `(index on p, index on q, vertex)`,
/// ordered along `p`.
fn meetings(pv: &[VertexId], qv: &[VertexId]) -> Vec<(usize, usize, VertexId)> {
    let at: HashMap<VertexId, usize> = qv.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    pv.iter().enumerate().filter_map(|(i, v)| at.get(v).map(|&j| (i, j, *v))).collect()
}

fn all_path_vertices(nest: &PlanarNest) -> Vec<Vec<VertexId>> {
    (0..nest.paths().len()).map(|p| nest.path_vertices(p)).collect()
}

fn is_terminal(nest: &PlanarNest, v: VertexId) -> bool {
    nest.vertices()[v].terminal.is_some()
}

fn ensure_verified(inst: &WeightedInstance) -> Result<(), SimplifyError> {
    let bad = verify(inst, &inst.realized_metric());
    if bad.is_empty() {
        Ok(())
    } else {
        Err(SimplifyError::Unverified(bad))
    }
}

/// Least pair `p < q` with two vertices met in the same order, `x1, x2`
/// consecutive among the shared vertices along `p`.
pub fn find_case1(inst: &WeightedInstance) -> Result<Option<Case1Witness>, SimplifyError> {
    ensure_verified(inst)?;
    Ok(case1_in(&inst.nest))
}

fn case1_in(nest: &PlanarNest) -> Option<Case1Witness> {
    let pv = all_path_vertices(nest);
    for p in 0..pv.len() {
        for q in p + 1..pv.len() {
            let m = meetings(&pv[p], &pv[q]);
            for w in m.windows(2) {
                let (a, b) = (w[0], w[1]);
                // two paths of one pair meeting only at their ends change nothing
                if a.1 < b.1 && !(is_terminal(nest, a.2) && is_terminal(nest, b.2)) {
                    return Some(Case1Witness { paths: (p, q), pivots: (a.2, b.2) });
                }
            }
        }
    }
    None
}

/// Least pair `p < q` bounding a lens between two crossings, with no
/// third path meeting both sides of it.
pub fn find_case2(inst: &WeightedInstance) -> Result<Option<Case2Witness>, SimplifyError> {
    ensure_verified(inst)?;
    Ok(case2_in(&inst.nest).into_iter().next())
}

fn case2_in(nest: &PlanarNest) -> Vec<Case2Witness> {
    let pv = all_path_vertices(nest);
    let mut out = Vec::new();
    for p in 0..pv.len() {
        for q in p + 1..pv.len() {
            let m = meetings(&pv[p], &pv[q]);
            for w in m.windows(2) {
                let (a, b) = (w[0], w[1]);
                if a.1 <= b.1 || is_terminal(nest, a.2) || is_terminal(nest, b.2) {
                    continue;
                }
                if m.iter().any(|x| b.1 < x.1 && x.1 < a.1) {
                    continue;
                }
                let side_a = &pv[p][a.0 + 1..b.0];
                let side_b = &pv[q][b.1 + 1..a.1];
                let locked = (0..pv.len()).filter(|&r| r != p && r != q).any(|r| {
                    pv[r].iter().any(|v| side_a.contains(v)) && pv[r].iter().any(|v| side_b.contains(v))
                });
                if locked {
                    continue;
                }
                let mut walls = nest.paths()[p].edges[a.0..b.0].to_vec();
                walls.extend_from_slice(&nest.paths()[q].edges[b.1..a.1]);
                out.push(Case2Witness { paths: (p, q), pivots: (a.2, b.2), region: enclosed_faces(nest, &walls) });
            }
        }
    }
    out
}

/// Faces on the inner side of a closed curve made of `walls`.
fn enclosed_faces(nest: &PlanarNest, walls: &[EdgeId]) -> Vec<FaceId> {
    let faces = nest.faces();
    let mut wall = vec![false; nest.edges().len()];
    for &e in walls {
        wall[e] = true;
    }
    let flood = |start: FaceId| -> Option<Vec<FaceId>> {
        let mut seen = vec![false; faces.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(f) = stack.pop() {
            if f == faces.outer {
                return None;
            }
            for &d in &faces.walks[f] {
                if wall[dart_edge(d)] {
                    continue;
                }
                let g = faces.face_of[d ^ 1];
                if !seen[g] {
                    seen[g] = true;
                    stack.push(g);
                }
            }
        }
        Some((0..faces.len()).filter(|&f| seen[f]).collect())
    };
    let e = walls[0];
    flood(faces.face_of[2 * e]).or_else(|| flood(faces.face_of[2 * e + 1])).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// rewriting

struct Work {
    nest: PlanarNest,
    weights: Vec<Rational>,
    dead: Vec<bool>,
    merges: Vec<SegmentMerge>,
    dropped: Vec<EdgeId>,
}

impl Work {
    fn new(inst: &WeightedInstance) -> Self {
        Work {
            nest: inst.nest.clone(),
            weights: inst.weights.clone(),
            dead: vec![false; inst.nest.edges().len()],
            merges: Vec::new(),
            dropped: Vec::new(),
        }
    }

    fn unhook(&mut self, d: usize) {
        let v = self.nest.origin(d);
        self.nest.vertices[v].rotation.retain(|&x| x != d);
    }

    /// Replaces edges `i..=j` of path `p` by the first of them.
    fn merge(&mut self, p: PathId, i: usize, j: usize) {
        if i == j {
            return;
        }
        let es = self.nest.paths[p].edges[i..=j].to_vec();
        let (first, last) = (es[0], es[es.len() - 1]);
        let end = self.nest.edges[last].to;
        for (m, &e) in es.iter().enumerate() {
            if m > 0 {
                self.unhook(2 * e);
            }
            if m + 1 < es.len() {
                self.unhook(2 * e + 1);
            }
        }
        let rot = &mut self.nest.vertices[end].rotation;
        let at = rot.iter().position(|&d| d == 2 * last + 1).expect("head dart");
        rot[at] = 2 * first + 1;
        self.nest.edges[first].to = end;
        let total: Rational = es.iter().map(|&e| self.weights[e].clone()).sum();
        self.weights[first] = total.clone();
        for &e in &es[1..] {
            self.dead[e] = true;
            self.weights[e] = Rational::zero();
        }
        self.nest.paths[p].edges.splice(i..=j, [first]);
        self.merges.push(SegmentMerge { path: p, edges: es, weight: total });
    }

    /// Cuts closed sub-walks out of path `p`; they must weigh nothing.
    fn excise_loops(&mut self, p: PathId) -> Result<(), SimplifyError> {
        loop {
            let vs = self.nest.path_vertices(p);
            let mut first: HashMap<VertexId, usize> = HashMap::new();
            let Some((i, j)) = vs.iter().enumerate().find_map(|(j, &v)| first.insert(v, j).map(|i| (i, j))) else {
                return Ok(());
            };
            let cut: Vec<EdgeId> = self.nest.paths[p].edges[i..j].to_vec();
            if cut.iter().any(|&e| !self.weights[e].is_zero()) {
                return Err(SimplifyError::PositiveLoop { path: p });
            }
            for &e in &cut {
                self.unhook(2 * e);
                self.unhook(2 * e + 1);
                self.dead[e] = true;
            }
            self.nest.paths[p].edges.drain(i..j);
            self.dropped.extend(cut);
        }
    }

    fn is_crossing(&self, v: VertexId) -> bool {
        let r = &self.nest.vertices[v].rotation;
        r.len() == 4
            && (0..2).all(|i| {
                let (a, b) = (r[i], r[i + 2]);
                self.nest.edges[dart_edge(a)].kind == self.nest.edges[dart_edge(b)].kind && a % 2 != b % 2
            })
    }

    /// A path running through `v` as `(path, index of the edge entering v)`.
    fn pass_through(&self, v: VertexId) -> Option<(PathId, usize)> {
        self.nest.vertices[v].rotation.iter().filter(|&&d| d % 2 == 1).find_map(|&d| {
            let e = dart_edge(d);
            let EdgeKind::Path(p) = self.nest.edges[e].kind else { return None };
            let edges = &self.nest.paths[p].edges;
            let i = edges.iter().position(|&f| f == e)?;
            (i + 1 < edges.len()).then_some((p, i))
        })
    }

    /// Smooths every interior vertex that is no longer a proper crossing.
    fn smooth(&mut self) -> Result<(), SimplifyError> {
        loop {
            let mut changed = false;
            for v in 0..self.nest.vertices.len() {
                if self.nest.vertices[v].terminal.is_some()
                    || self.nest.vertices[v].rotation.is_empty()
                    || self.is_crossing(v)
                {
                    continue;
                }
                let Some((p, i)) = self.pass_through(v) else {
                    return Err(NestError::Invariant(format!("vertex {v} has darts but no path through it")).into());
                };
                self.merge(p, i, i + 1);
                changed = true;
            }
            if !changed {
                return Ok(());
            }
        }
    }

    fn finish(mut self, kind: RewriteKind, paths: (PathId, PathId), pivots: (VertexId, VertexId), before: &WeightedInstance) -> Result<(WeightedInstance, RewriteEvent), SimplifyError> {
        self.smooth()?;
        let dead_v: Vec<bool> =
            self.nest.vertices.iter().map(|v| v.terminal.is_none() && v.rotation.is_empty()).collect();
        let (_, emap) = self.nest.compact(&dead_v, &self.dead);
        let mut weights = vec![Rational::zero(); self.nest.edges.len()];
        for (e, w) in self.weights.into_iter().enumerate() {
            if emap[e] != usize::MAX {
                weights[emap[e]] = w;
            }
        }
        self.nest.check_invariants()?;
        let event = RewriteEvent {
            kind,
            paths,
            pivots,
            vertices_before: before.nest.vertex_count(),
            vertices_after: self.nest.vertex_count(),
            edges_before: before.nest.edges().len(),
            edges_after: self.nest.edges.len(),
            merges: self.merges,
            dropped: self.dropped,
        };
        Ok((WeightedInstance { nest: self.nest, weights, designated: before.designated.clone() }, event))
    }
}

/// Positions of `x1` and `x2` on `p`, in that order.
fn positions(nest: &PlanarNest, p: PathId, x1: VertexId, x2: VertexId) -> Result<(usize, usize), SimplifyError> {
    if p >= nest.paths().len() {
        return Err(SimplifyError::BadWitness(format!("no path {p}")));
    }
    let vs = nest.path_vertices(p);
    let at = |x| vs.iter().position(|&v| v == x);
    match (at(x1), at(x2)) {
        (Some(i), Some(j)) if i < j => Ok((i, j)),
        _ => Err(SimplifyError::BadWitness(format!("path {p} does not visit {x1} before {x2}"))),
    }
}

fn piece_length(inst: &WeightedInstance, p: PathId, i: usize, j: usize) -> Rational {
    inst.nest.paths()[p].edges[i..j].iter().map(|&e| inst.weights[e].clone()).sum()
}

/// Exchanges the `x1 -> x2` pieces of the two paths, cuts the loops this
/// may close and smooths the vertices left as touchings.
pub fn apply_case1(inst: &WeightedInstance, w: &Case1Witness) -> Result<(WeightedInstance, RewriteEvent), SimplifyError> {
    let (p, q) = w.paths;
    let (x1, x2) = w.pivots;
    if p == q {
        return Err(SimplifyError::BadWitness("paths must differ".into()));
    }
    let (i1, i2) = positions(&inst.nest, p, x1, x2)?;
    let (j1, j2) = positions(&inst.nest, q, x1, x2)?;
    let (left, right) = (piece_length(inst, p, i1, i2), piece_length(inst, q, j1, j2));
    if left != right {
        return Err(SimplifyError::LengthMismatch { left: left.to_string(), right: right.to_string() });
    }
    let mut work = Work::new(inst);
    let pe = work.nest.paths[p].edges.clone();
    let qe = work.nest.paths[q].edges.clone();
    let new_p: Vec<EdgeId> = pe[..i1].iter().chain(&qe[j1..j2]).chain(&pe[i2..]).copied().collect();
    let new_q: Vec<EdgeId> = qe[..j1].iter().chain(&pe[i1..i2]).chain(&qe[j2..]).copied().collect();
    for &e in &qe[j1..j2] {
        work.nest.edges[e].kind = EdgeKind::Path(p);
    }
    for &e in &pe[i1..i2] {
        work.nest.edges[e].kind = EdgeKind::Path(q);
    }
    work.nest.paths[p].edges = new_p;
    work.nest.paths[q].edges = new_q;
    work.excise_loops(p)?;
    work.excise_loops(q)?;
    work.finish(RewriteKind::Case1, w.paths, w.pivots, inst)
}

/// Redraws both paths off the lens: each keeps its length as one edge
/// from its last vertex before the lens to its first vertex after it.
/// Third-path pieces inside stay where they are, cut loose from the lens
/// sides. Fails with a structural error when the redrawn edges cannot be
/// embedded without crossings.
pub fn apply_case2(inst: &WeightedInstance, w: &Case2Witness) -> Result<(WeightedInstance, RewriteEvent), SimplifyError> {
    let (p, q) = w.paths;
    let (x1, x2) = w.pivots;
    if p == q {
        return Err(SimplifyError::BadWitness("paths must differ".into()));
    }
    let (i1, i2) = positions(&inst.nest, p, x1, x2)?;
    let (j1, j2) = positions(&inst.nest, q, x2, x1)?;
    let inner = |len: usize, a: usize, b: usize| a > 0 && b < len;
    if !inner(inst.nest.paths()[p].edges.len(), i1, i2) || !inner(inst.nest.paths()[q].edges.len(), j1, j2) {
        return Err(SimplifyError::BadWitness("lens corners must be crossings".into()));
    }
    let mut work = Work::new(inst);
    work.merge(p, i1 - 1, i2);
    work.merge(q, j1 - 1, j2);
    work.finish(RewriteKind::Case2, w.paths, w.pivots, inst)
}

/// Checks that rewriting cannot change a distance: the instance verifies,
/// every path is shortest, and every finite pair has a path.
fn check_preconditions(inst: &WeightedInstance, d: &QuasiMetric) -> Result<(), SimplifyError> {
    let bad = verify(inst, d);
    if !bad.is_empty() {
        return Err(SimplifyError::Unverified(bad));
    }
    let nest = &inst.nest;
    for (i, p) in nest.paths().iter().enumerate() {
        if d.d(p.src, p.dst).finite() != Some(&inst.path_length(i)) {
            return Err(SimplifyError::NotShortest { path: i });
        }
    }
    let k = nest.terminals().len();
    for s in 0..k {
        for t in 0..k {
            if s != t && d.d(s, t).is_finite() && nest.path_for(s, t).is_none() {
                return Err(SimplifyError::Uncovered { from: d.name(s).into(), to: d.name(t).into() });
            }
        }
    }
    Ok(())
}

/// Rewrites until neither case applies, Case 1 first each round.
pub fn simplify(inst: &WeightedInstance, opts: SimplifyOptions) -> Result<Simplified, SimplifyError> {
    let d = inst.realized_metric();
    check_preconditions(inst, &d)?;
    let mut cur = inst.clone();
    let mut log: Vec<RewriteEvent> = Vec::new();
    loop {
        let step = if let Some(w) = case1_in(&cur.nest) {
            Some(apply_case1(&cur, &w)?)
        } else {
            let lenses = case2_in(&cur.nest);
            let total = lenses.len();
            let mut applied = None;
            for w in &lenses {
                match apply_case2(&cur, w) {
                    Ok(r) => {
                        applied = Some(r);
                        break;
                    }
                    Err(SimplifyError::Structure(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            if applied.is_none() && total > 0 {
                return Err(SimplifyError::Blocked(total));
            }
            applied
        };
        let Some((next, event)) = step else { break };
        log.push(event);
        if opts.verify_each {
            let bad = verify(&next, &d);
            if !bad.is_empty() {
                return Err(SimplifyError::Rewrite { step: log.len() - 1, detail: format!("{bad:?}"), log });
            }
        }
        cur = next;
    }
    let bad = verify(&cur, &d);
    if !bad.is_empty() {
        return Err(SimplifyError::Rewrite { step: log.len().saturating_sub(1), detail: format!("{bad:?}"), log });
    }
    Ok(Simplified { instance: cur, log })
}
