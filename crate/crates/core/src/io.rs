//! File formats: tables, orderings, instances, certificates and rewrite
//! logs as JSON, plus DOT and SVG drawings for inspection.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{Demand, Routing};
use crate::metric::{CircularOrdering, MetricError, PartialQuasiMetric, QuasiMetric, Terminal};
use crate::nest::{Edge, EdgeId, EdgeKind, NestError, NestPath, PathId, PlanarNest, Vertex, VertexId};
use crate::rational::{format_rational, parse_rational, ExtendedRational, ParseRationalError, Rational};
use crate::realize::WeightedInstance;
use crate::simplify::RewriteEvent;

pub mod rational_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::rational::{format_rational, parse_rational, Rational};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Rational(#[from] ParseRationalError),
    #[error(transparent)]
    Nest(#[from] NestError),
    #[error("{0}")]
    Format(String),
}

fn format_err<T>(m: impl Into<String>) -> Result<T, IoError> {
    Err(IoError::Format(m.into()))
}

// ---------------------------------------------------------------------------
// tables and orderings

#[derive(Debug, Serialize, Deserialize)]
struct MetricFile {
    terminals: Vec<String>,
    /// Row-major; `"p/q"`, `"inf"` or `"*"` for unknown.
    d: Vec<String>,
}

fn parse_entries(f: &MetricFile) -> Result<Vec<Option<ExtendedRational>>, IoError> {
    let k = f.terminals.len();
    if f.d.len() != k * k {
        return Err(MetricError::Shape { expected: k * k, found: f.d.len() }.into());
    }
    let mut out = Vec::with_capacity(k * k);
    for (i, s) in f.d.iter().enumerate() {
        let v = if s.trim() == "*" { None } else { Some(s.parse::<ExtendedRational>()?) };
        if i / k == i % k && v != Some(ExtendedRational::zero()) {
            return format_err(format!("diagonal entry for {} must be \"0\"", f.terminals[i / k]));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn parse_metric(s: &str) -> Result<QuasiMetric, IoError> {
    let f: MetricFile = serde_json::from_str(s)?;
    let entries = parse_entries(&f)?;
    if entries.iter().any(|e| e.is_none()) {
        return format_err("table has unknown entries");
    }
    Ok(QuasiMetric::new(f.terminals, entries.into_iter().flatten().collect())?)
}

pub fn parse_partial_metric(s: &str) -> Result<PartialQuasiMetric, IoError> {
    let f: MetricFile = serde_json::from_str(s)?;
    let entries = parse_entries(&f)?;
    Ok(PartialQuasiMetric::new(f.terminals, entries)?)
}

pub fn metric_to_json(d: &QuasiMetric) -> String {
    let f = MetricFile { terminals: d.terminals().to_vec(), d: d.entries().iter().map(|e| e.to_string()).collect() };
    serde_json::to_string_pretty(&f).expect("plain data")
}

pub fn partial_metric_to_json(d: &PartialQuasiMetric) -> String {
    let f = MetricFile {
        terminals: d.terminals().to_vec(),
        d: d.entries().iter().map(|e| e.as_ref().map_or("*".to_string(), |v| v.to_string())).collect(),
    };
    serde_json::to_string_pretty(&f).expect("plain data")
}

pub fn parse_ordering(s: &str) -> Result<CircularOrdering, IoError> {
    Ok(serde_json::from_str(s)?)
}

pub fn ordering_to_json(o: &CircularOrdering) -> String {
    serde_json::to_string(o).expect("plain data")
}

// ---------------------------------------------------------------------------
// instances

#[derive(Debug, Serialize, Deserialize)]
struct VertexRecord {
    id: VertexId,
    terminal: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    id: EdgeId,
    from: VertexId,
    to: VertexId,
    /// `None` for boundary arcs.
    path: Option<PathId>,
    /// Position on the path.
    index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PathRecord {
    src: String,
    dst: String,
    edges: Vec<EdgeId>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DesignatedRecord {
    src: String,
    dst: String,
    path: PathId,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    terminals: Vec<String>,
    sigma: Vec<String>,
    vertices: Vec<VertexRecord>,
    edges: Vec<EdgeRecord>,
    /// Edge ends leaving each vertex, counterclockwise: `2e` is the tail
    /// end of edge `e`, `2e + 1` its head end.
    rotation: BTreeMap<VertexId, Vec<usize>>,
    paths: BTreeMap<PathId, PathRecord>,
    #[serde(default)]
    designated: Vec<DesignatedRecord>,
}

fn instance_file(nest: &PlanarNest, weights: Option<&[Rational]>, designated: &[Option<PathId>]) -> InstanceFile {
    let names = nest.terminals();
    let k = names.len();
    let mut index = vec![None; nest.edges().len()];
    for p in nest.paths() {
        for (i, &e) in p.edges.iter().enumerate() {
            index[e] = Some(i);
        }
    }
    InstanceFile {
        terminals: names.to_vec(),
        sigma: nest.sigma().iter().map(|&t| names[t].clone()).collect(),
        vertices: nest
            .vertices()
            .iter()
            .enumerate()
            .map(|(id, v)| VertexRecord { id, terminal: v.terminal.map(|t| names[t].clone()) })
            .collect(),
        edges: nest
            .edges()
            .iter()
            .enumerate()
            .map(|(id, e)| EdgeRecord {
                id,
                from: e.from,
                to: e.to,
                path: match e.kind {
                    EdgeKind::Boundary => None,
                    EdgeKind::Path(p) => Some(p),
                },
                index: index[id],
                weight: weights.map(|w| format_rational(&w[id])),
            })
            .collect(),
        rotation: nest.vertices().iter().enumerate().map(|(i, v)| (i, v.rotation.clone())).collect(),
        paths: nest
            .paths()
            .iter()
            .enumerate()
            .map(|(i, p)| (i, PathRecord { src: names[p.src].clone(), dst: names[p.dst].clone(), edges: p.edges.clone() }))
            .collect(),
        designated: designated
            .iter()
            .enumerate()
            .filter_map(|(slot, p)| p.map(|p| DesignatedRecord { src: names[slot / k].clone(), dst: names[slot % k].clone(), path: p }))
            .collect(),
    }
}

pub fn nest_to_json(nest: &PlanarNest) -> String {
    serde_json::to_string_pretty(&instance_file(nest, None, &[])).expect("plain data")
}

pub fn instance_to_json(inst: &WeightedInstance) -> String {
    serde_json::to_string_pretty(&instance_file(&inst.nest, Some(&inst.weights), &inst.designated)).expect("plain data")
}

fn build_nest(f: &InstanceFile) -> Result<PlanarNest, IoError> {
    let k = f.terminals.len();
    let lookup = |n: &str| -> Result<Terminal, IoError> {
        f.terminals.iter().position(|t| t == n).ok_or_else(|| IoError::Format(format!("unknown terminal {n}")))
    };
    let sigma = CircularOrdering::new(f.sigma.clone())?;
    if sigma.len() != k {
        return Err(MetricError::OrderingMismatch.into());
    }
    let sigma: Vec<Terminal> = f.sigma.iter().map(|n| lookup(n)).collect::<Result<_, _>>()?;
    let mut terminal_vertex = vec![usize::MAX; k];
    let mut vertices = Vec::with_capacity(f.vertices.len());
    for (i, v) in f.vertices.iter().enumerate() {
        if v.id != i {
            return format_err("vertex ids must be 0, 1, 2, ... in order");
        }
        let terminal = v.terminal.as_deref().map(lookup).transpose()?;
        if let Some(t) = terminal {
            if terminal_vertex[t] != usize::MAX {
                return format_err(format!("terminal {} placed twice", f.terminals[t]));
            }
            terminal_vertex[t] = i;
        }
        let rotation = f.rotation.get(&i).cloned().unwrap_or_default();
        vertices.push(Vertex { terminal, rotation });
    }
    if terminal_vertex.contains(&usize::MAX) {
        return format_err("every terminal needs a vertex");
    }
    if f.rotation.keys().any(|&v| v >= vertices.len()) {
        return format_err("rotation names an unknown vertex");
    }
    let mut edges = Vec::with_capacity(f.edges.len());
    for (i, e) in f.edges.iter().enumerate() {
        if e.id != i || e.from >= vertices.len() || e.to >= vertices.len() {
            return format_err(format!("edge record {i} is malformed"));
        }
        let kind = match e.path {
            None => EdgeKind::Boundary,
            Some(p) => EdgeKind::Path(p),
        };
        edges.push(Edge { from: e.from, to: e.to, kind });
    }
    let mut paths = Vec::with_capacity(f.paths.len());
    for (i, (&id, p)) in f.paths.iter().enumerate() {
        if id != i {
            return format_err("path ids must be 0, 1, 2, ... in order");
        }
        if let Some(&e) = p.edges.iter().find(|&&e| e >= edges.len()) {
            return format_err(format!("path {i} names unknown edge {e}"));
        }
        for (j, &e) in p.edges.iter().enumerate() {
            if f.edges[e].path != Some(i) || f.edges[e].index != Some(j) {
                return format_err(format!("edge {e} disagrees with path {i}"));
            }
        }
        paths.push(NestPath { src: lookup(&p.src)?, dst: lookup(&p.dst)?, edges: p.edges.clone() });
    }
    let nest = PlanarNest { terminals: f.terminals.clone(), sigma, vertices, edges, paths, terminal_vertex };
    nest.check_invariants()?;
    Ok(nest)
}

pub fn parse_nest(s: &str) -> Result<PlanarNest, IoError> {
    let f: InstanceFile = serde_json::from_str(s)?;
    build_nest(&f)
}

/// Reads an instance; every path edge must carry a weight, boundary arcs
/// default to zero.
pub fn parse_instance(s: &str) -> Result<WeightedInstance, IoError> {
    let f: InstanceFile = serde_json::from_str(s)?;
    let nest = build_nest(&f)?;
    let mut weights = Vec::with_capacity(f.edges.len());
    for e in &f.edges {
        weights.push(match (&e.weight, e.path) {
            (Some(w), _) => parse_rational(w)?,
            (None, None) => Rational::from_integer(0.into()),
            (None, Some(_)) => return format_err(format!("edge {} has no weight", e.id)),
        });
    }
    let k = nest.terminals().len();
    let mut designated = vec![None; k * k];
    for r in &f.designated {
        let (s, t) = (nest.terminals().iter().position(|n| *n == r.src), nest.terminals().iter().position(|n| *n == r.dst));
        let (Some(s), Some(t)) = (s, t) else { return format_err("designated pair names an unknown terminal") };
        match nest.paths().get(r.path) {
            Some(p) if p.src == s && p.dst == t => designated[s * k + t] = Some(r.path),
            _ => return format_err(format!("path {} does not run {} -> {}", r.path, r.src, r.dst)),
        }
    }
    Ok(WeightedInstance { nest, weights, designated })
}

// ---------------------------------------------------------------------------
// certificates and logs

/// A restricting pair for `(a, b)` together with a routing of `C'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub a: Terminal,
    pub b: Terminal,
    pub c: Demand,
    pub cprime: Demand,
    pub routing: Routing,
}

#[derive(Debug, Serialize, Deserialize)]
struct CertificateFile {
    a: String,
    b: String,
    #[serde(rename = "C")]
    c: Vec<(String, String, u64)>,
    #[serde(rename = "Cprime")]
    cprime: Vec<(String, String, u64)>,
    routing: BTreeMap<usize, Vec<EdgeId>>,
}

pub fn certificate_to_json(c: &Certificate, terminals: &[String]) -> String {
    let pairs = |d: &Demand| d.iter().map(|(s, t, m)| (terminals[s].clone(), terminals[t].clone(), m)).collect();
    let f = CertificateFile {
        a: terminals[c.a].clone(),
        b: terminals[c.b].clone(),
        c: pairs(&c.c),
        cprime: pairs(&c.cprime),
        routing: c.routing.0.clone(),
    };
    serde_json::to_string_pretty(&f).expect("plain data")
}

pub fn parse_certificate(s: &str, terminals: &[String]) -> Result<Certificate, IoError> {
    let f: CertificateFile = serde_json::from_str(s)?;
    let lookup = |n: &str| -> Result<Terminal, IoError> {
        terminals.iter().position(|t| t == n).ok_or_else(|| IoError::Format(format!("unknown terminal {n}")))
    };
    let demand = |v: &[(String, String, u64)]| -> Result<Demand, IoError> {
        let mut d = Demand::new();
        for (s, t, m) in v {
            d.add(lookup(s)?, lookup(t)?, *m);
        }
        Ok(d)
    };
    Ok(Certificate {
        a: lookup(&f.a)?,
        b: lookup(&f.b)?,
        c: demand(&f.c)?,
        cprime: demand(&f.cprime)?,
        routing: Routing(f.routing),
    })
}

/// One JSON object per line.
pub fn events_to_jsonl(events: &[RewriteEvent]) -> String {
    events.iter().map(|e| serde_json::to_string(e).expect("plain data") + "\n").collect()
}

pub fn parse_events(s: &str) -> Result<Vec<RewriteEvent>, IoError> {
    s.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(IoError::from)).collect()
}

// ---------------------------------------------------------------------------
// drawings

pub fn to_dot(inst: &WeightedInstance) -> String {
    let nest = &inst.nest;
    let mut s = String::from("digraph nest {\n  node [shape=point];\n");
    for (i, v) in nest.vertices().iter().enumerate() {
        if let Some(t) = v.terminal {
            let _ = writeln!(s, "  v{i} [shape=circle, label=\"{}\"];", nest.terminals()[t]);
        }
    }
    for (i, e) in nest.edges().iter().enumerate() {
        match e.kind {
            EdgeKind::Boundary => {
                let _ = writeln!(s, "  v{} -> v{} [style=dashed, arrowhead=none];", e.from, e.to);
            }
            EdgeKind::Path(p) => {
                let w = inst.weights.get(i).map(format_rational).unwrap_or_default();
                let _ = writeln!(s, "  v{} -> v{} [label=\"e{i} p{p} {w}\"];", e.from, e.to);
            }
        }
    }
    s.push_str("}\n");
    s
}

/// Terminals evenly on a circle in ordering order, other vertices at the
/// average of their neighbours after repeated relaxation.
fn layout(nest: &PlanarNest) -> Vec<(f64, f64)> {
    let n = nest.vertex_count();
    let k = nest.sigma().len();
    let mut pos = vec![(0.0, 0.0); n];
    let mut fixed = vec![false; n];
    for (i, &t) in nest.sigma().iter().enumerate() {
        let ang = std::f64::consts::TAU * i as f64 / k as f64;
        let v = nest.terminal_vertex(t);
        pos[v] = (ang.cos(), ang.sin());
        fixed[v] = true;
    }
    let mut adj = vec![Vec::new(); n];
    for e in nest.path_edges() {
        let ed = &nest.edges()[e];
        adj[ed.from].push(ed.to);
        adj[ed.to].push(ed.from);
    }
    for _ in 0..500 {
        for v in 0..n {
            if fixed[v] || adj[v].is_empty() {
                continue;
            }
            let (sx, sy) = adj[v].iter().fold((0.0, 0.0), |a, &u| (a.0 + pos[u].0, a.1 + pos[u].1));
            let m = adj[v].len() as f64;
            pos[v] = (sx / m, sy / m);
        }
    }
    pos
}

pub fn to_svg(inst: &WeightedInstance) -> String {
    let nest = &inst.nest;
    let pos = layout(nest);
    let (size, r) = (600.0, 260.0);
    let at = |v: VertexId| (size / 2.0 + r * pos[v].0, size / 2.0 + r * pos[v].1);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\">\n");
    let _ = writeln!(s, "<circle cx=\"{}\" cy=\"{}\" r=\"{r}\" fill=\"none\" stroke=\"#bbb\"/>", size / 2.0, size / 2.0);
    let np = nest.paths().len().max(1);
    for e in nest.path_edges() {
        let ed = &nest.edges()[e];
        let EdgeKind::Path(p) = ed.kind else { continue };
        let ((x1, y1), (x2, y2)) = (at(ed.from), at(ed.to));
        let hue = 360 * p / np;
        let _ = writeln!(s, "<line x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" y2=\"{y2:.1}\" stroke=\"hsl({hue},70%,45%)\" stroke-width=\"2\"/>");
    }
    for (i, v) in nest.vertices().iter().enumerate() {
        let (x, y) = at(i);
        match v.terminal {
            Some(t) => {
                let _ = writeln!(s, "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"6\" fill=\"#222\"/>");
                let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\">{}</text>", x + 8.0, y - 8.0, nest.terminals()[t]);
            }
            None => {
                let _ = writeln!(s, "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"2.5\" fill=\"#555\"/>");
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_random_nest, worked_example_metric, worked_example_ordering, NestConfig};

    #[test]
    fn metric_round_trip() {
        let d = worked_example_metric();
        assert_eq!(parse_metric(&metric_to_json(&d)).unwrap(), d);
        let mut p = PartialQuasiMetric::unknown(d.terminals().to_vec());
        p.set(0, 1, ExtendedRational::Infinite);
        p.set(1, 0, "3/2".parse().unwrap());
        assert_eq!(parse_partial_metric(&partial_metric_to_json(&p)).unwrap(), p);
        assert!(parse_metric(&partial_metric_to_json(&p)).is_err());
    }

    #[test]
    fn nonzero_diagonal_rejected() {
        let s = r#"{"terminals":["a","b"],"d":["0","1","1","2"]}"#;
        assert!(matches!(parse_metric(s), Err(IoError::Format(_))));
    }

    #[test]
    fn ordering_round_trip() {
        let o = worked_example_ordering();
        assert_eq!(parse_ordering(&ordering_to_json(&o)).unwrap(), o);
    }

    #[test]
    fn instance_round_trip() {
        for seed in 0..5 {
            let g = gen_random_nest(&NestConfig::new(5, 6, seed));
            let back = parse_instance(&instance_to_json(&g.instance)).unwrap();
            assert_eq!(back, g.instance);
            assert_eq!(parse_nest(&nest_to_json(&g.instance.nest)).unwrap(), g.instance.nest);
            assert!(to_dot(&g.instance).starts_with("digraph"));
            assert!(to_svg(&g.instance).contains("<line"));
        }
    }

    #[test]
    fn tampered_rotation_rejected() {
        let g = gen_random_nest(&NestConfig::new(4, 3, 1));
        let mut f: serde_json::Value = serde_json::from_str(&instance_to_json(&g.instance)).unwrap();
        let rot = f["rotation"]["0"].as_array_mut().unwrap();
        rot.reverse();
        assert!(parse_instance(&f.to_string()).is_err());
    }

    #[test]
    fn certificate_round_trip() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut routing = Routing::default();
        routing.0.insert(0, vec![3, 4]);
        let c = Certificate {
            a: 0,
            b: 1,
            c: Demand::from_pairs([(0, 1), (2, 0)]),
            cprime: Demand::from_pairs([(0, 0)]),
            routing,
        };
        assert_eq!(parse_certificate(&certificate_to_json(&c, &names), &names).unwrap(), c);
    }
}
