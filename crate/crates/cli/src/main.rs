//! `osreal`: decide, realize, shrink and check directed distance tables.
//!
//! Exit codes: 0 affirmative, 1 negative decision, 2 bad input, 3 internal
//! failure. With `--json` every command prints one JSON object on stdout.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use osreal_core::certify::{check_routing, is_restricting_pair, CertifyError, RestrictingPair};
use osreal_core::gen::{gen_random_nest, gen_random_quasimetric, gen_shortest_nest, NestConfig, SEED_ENV};
use osreal_core::io;
use osreal_core::metric::{validate, CircularOrdering, MongeResult, QuasiMetric};
use osreal_core::realize::{realize_with, verify, RealizeError, RealizeOptions, WeightedInstance};
use osreal_core::search::{find_ordering, SearchOutcome};
use osreal_core::simplify::{simplify, SimplifyError, SimplifyOptions};
use osreal_core::weights::PathConstraint;

#[derive(Parser)]
#[command(name = "osreal", version, about = "Directed distance tables realized by planar nests")]
struct Cli {
    /// Print one machine-readable JSON object on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check that a table is a quasi-metric.
    Validate { metric: PathBuf },
    /// Check the Monge inequalities of a table against an ordering.
    CheckMonge {
        metric: PathBuf,
        #[arg(long)]
        ordering: PathBuf,
    },
    /// Find a circular ordering making the table Monge.
    FindOrdering { metric: PathBuf },
    /// Build a weighted nest realizing the table.
    Realize {
        metric: PathBuf,
        #[arg(long, required_unless_present = "auto", conflicts_with = "auto")]
        ordering: Option<PathBuf>,
        /// Search for the ordering first.
        #[arg(long)]
        auto: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Write the constraints of the final weight computation, one per line.
        #[arg(long)]
        constraint_log: Option<PathBuf>,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Rewrite a realizing instance until no pair of paths can be uncrossed.
    Simplify {
        instance: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Write the rewrite events as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Only verify at the fixpoint.
        #[arg(long)]
        fast: bool,
    },
    /// Recompute the distances of an instance and compare with a table.
    Verify {
        instance: PathBuf,
        #[arg(long)]
        metric: PathBuf,
    },
    /// Check a restricting pair and its routing in an instance.
    Certify {
        instance: PathBuf,
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
    },
    /// Generate a random nest or table.
    Gen {
        #[arg(long, value_enum, default_value_t = GenKind::Nest)]
        kind: GenKind,
        #[arg(long)]
        k: usize,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        /// Random paths beyond the ring; defaults to k.
        #[arg(long)]
        paths: Option<usize>,
        /// Start with paths both ways between boundary neighbours.
        #[arg(long)]
        ring: bool,
        /// Choose weights making every path shortest.
        #[arg(long)]
        shortest: bool,
        /// Instance file (nest kinds).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Distance table file.
        #[arg(long)]
        metric_out: Option<PathBuf>,
        /// Boundary ordering file (nest kinds).
        #[arg(long)]
        ordering_out: Option<PathBuf>,
    },
    /// Generate, realize, simplify and verify in one go.
    RoundTrip {
        #[arg(long)]
        k: usize,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        paths: Option<usize>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Nest,
    Quasimetric,
}

/// What a command reports: exit code, JSON body, human text.
struct Report {
    code: u8,
    body: Value,
    text: String,
}

impl Report {
    fn new(code: u8, body: Value, text: impl Into<String>) -> Self {
        Report { code, body, text: text.into() }
    }
}

enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Internal(e) => e,
        }
    }
}

type Outcome = Result<Report, Failure>;

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn internal<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Internal(e.into())
}

fn read(p: &Path) -> Result<String, Failure> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(input)
}

fn write(p: &Path, s: &str) -> Result<(), Failure> {
    fs::write(p, s).with_context(|| format!("writing {}", p.display())).map_err(internal)
}

fn load_metric(p: &Path) -> Result<QuasiMetric, Failure> {
    io::parse_metric(&read(p)?).with_context(|| format!("parsing {}", p.display())).map_err(input)
}

fn load_ordering(p: &Path) -> Result<CircularOrdering, Failure> {
    io::parse_ordering(&read(p)?).with_context(|| format!("parsing {}", p.display())).map_err(input)
}

fn load_instance(p: &Path) -> Result<WeightedInstance, Failure> {
    io::parse_instance(&read(p)?).with_context(|| format!("parsing {}", p.display())).map_err(input)
}

fn as_value(s: &str) -> Value {
    serde_json::from_str(s).expect("emitted JSON parses")
}

/// Writes the artifact to `out`, or returns it for stdout.
fn emit(out: &Option<PathBuf>, artifact: String) -> Result<Option<String>, Failure> {
    match out {
        Some(p) => write(p, &artifact).map(|_| None),
        None => Ok(Some(artifact)),
    }
}

fn ordering_of(inst: &WeightedInstance) -> CircularOrdering {
    let names = inst.nest.terminals();
    CircularOrdering::new(inst.nest.sigma().iter().map(|&t| names[t].clone()).collect()).expect("distinct names")
}

fn constraint_line(c: &PathConstraint, names: &[String]) -> String {
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for &e in &c.edges {
        match counts.iter_mut().find(|(x, _)| *x == e) {
            Some((_, n)) => *n += 1,
            None => counts.push((e, 1)),
        }
    }
    counts.sort();
    let lhs: Vec<String> = counts.iter().map(|&(e, n)| if n == 1 { format!("w{e}") } else { format!("{n} w{e}") }).collect();
    let rel = match c.relation {
        osreal_core::lp::Relation::Le => "<=",
        osreal_core::lp::Relation::Ge => ">=",
    };
    let tag = if c.designated { " designated" } else { "" };
    format!(
        "{} -> {}: {} {} {}{}",
        names[c.src],
        names[c.dst],
        lhs.join(" + "),
        rel,
        osreal_core::rational::format_rational(&c.rhs),
        tag
    )
}

// ---------------------------------------------------------------------------
// commands

fn cmd_validate(metric: &Path) -> Outcome {
    let d = load_metric(metric)?;
    let v = validate(&d);
    if v.is_empty() {
        Ok(Report::new(0, json!({"valid": true}), "valid quasi-metric"))
    } else {
        let msgs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        Ok(Report::new(1, json!({"valid": false, "violations": v}), format!("not a quasi-metric:\n{}", msgs.join("\n"))))
    }
}

fn cmd_check_monge(metric: &Path, ordering: &Path) -> Outcome {
    let d = load_metric(metric)?;
    let sigma = load_ordering(ordering)?;
    match osreal_core::monge_check(&d, &sigma).map_err(input)? {
        MongeResult::Pass => Ok(Report::new(0, json!({"monge": true}), "Monge: pass")),
        MongeResult::Violation(v) => {
            let text = format!("Monge violated at ({}): {} < {}", v.quadruple.join(", "), v.lhs, v.rhs);
            Ok(Report::new(1, json!({"monge": false, "violation": v}), text))
        }
    }
}

fn cmd_find_ordering(metric: &Path) -> Outcome {
    let d = load_metric(metric)?;
    let bad = validate(&d);
    if !bad.is_empty() {
        return Err(input(anyhow!("not a quasi-metric: {}", bad[0])));
    }
    match find_ordering(&d) {
        SearchOutcome::Found(sigma) => {
            let o = as_value(&io::ordering_to_json(&sigma));
            Ok(Report::new(0, json!({"realizable": true, "ordering": o}), io::ordering_to_json(&sigma)))
        }
        SearchOutcome::NotRealizable(nr) => {
            let quad = nr.failures.iter().find_map(|f| f.quadruple.clone());
            let text = match &quad {
                Some(q) => format!("not realizable; witness quadruple ({})", q.join(", ")),
                None => "not realizable".to_string(),
            };
            Ok(Report::new(1, json!({"realizable": false, "witness": quad, "failures": nr.failures}), text))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_realize(
    metric: &Path,
    ordering: &Option<PathBuf>,
    out: &Option<PathBuf>,
    constraint_log: &Option<PathBuf>,
    dot: &Option<PathBuf>,
    svg: &Option<PathBuf>,
) -> Outcome {
    let d = load_metric(metric)?;
    let sigma = match ordering {
        Some(p) => load_ordering(p)?,
        None => match find_ordering(&d) {
            SearchOutcome::Found(s) => s,
            SearchOutcome::NotRealizable(nr) => {
                let quad = nr.failures.iter().find_map(|f| f.quadruple.clone());
                return Ok(Report::new(1, json!({"realizable": false, "witness": quad}), "not realizable"));
            }
        },
    };
    let report = match realize_with(&d, &sigma, &RealizeOptions::default()) {
        Ok(r) => r,
        Err(e) => {
            return match e {
                RealizeError::Metric(_) | RealizeError::NotQuasiMetric(_) => Err(input(e)),
                RealizeError::MongeViolated(ref v) => {
                    Ok(Report::new(1, json!({"realizable": false, "violation": v}), e.to_string()))
                }
                RealizeError::NotRealizable => Ok(Report::new(1, json!({"realizable": false}), e.to_string())),
                _ => Err(internal(e)),
            }
        }
    };
    let inst = &report.instance;
    if let Some(p) = constraint_log {
        let lines: Vec<String> = report.constraint_log.iter().map(|c| constraint_line(c, d.terminals())).collect();
        write(p, &(lines.join("\n") + "\n"))?;
    }
    if let Some(p) = dot {
        write(p, &io::to_dot(inst))?;
    }
    if let Some(p) = svg {
        write(p, &io::to_svg(inst))?;
    }
    let summary = json!({
        "realizable": true,
        "ordering": as_value(&io::ordering_to_json(&sigma)),
        "vertices": inst.nest.vertex_count(),
        "edges": inst.nest.edges().len(),
        "paths": inst.nest.paths().len(),
        "millis": report.millis as u64,
        "insertions": report.stats,
    });
    finish_artifact(summary, out, io::instance_to_json(inst), format!(
        "realized with {} vertices and {} paths",
        inst.nest.vertex_count(),
        inst.nest.paths().len()
    ))
}

/// Adds the artifact to the body, or writes it when `out` is given.
fn finish_artifact(mut body: Value, out: &Option<PathBuf>, artifact: String, text: String) -> Outcome {
    match emit(out, artifact)? {
        Some(a) => {
            body["instance"] = as_value(&a);
            Ok(Report::new(0, body, a))
        }
        None => Ok(Report::new(0, body, text)),
    }
}

fn cmd_simplify(instance: &Path, out: &Option<PathBuf>, log: &Option<PathBuf>, fast: bool) -> Outcome {
    let inst = load_instance(instance)?;
    let s = match simplify(&inst, SimplifyOptions { verify_each: !fast }) {
        Ok(s) => s,
        Err(e) => {
            return match e {
                SimplifyError::Unverified(_)
                | SimplifyError::NotShortest { .. }
                | SimplifyError::Uncovered { .. }
                | SimplifyError::BadWitness(_) => Err(input(e)),
                _ => Err(internal(e)),
            }
        }
    };
    if let Some(p) = log {
        write(p, &io::events_to_jsonl(&s.log))?;
    }
    let body = json!({
        "rewrites": s.log.len(),
        "vertices_before": inst.nest.vertex_count(),
        "vertices_after": s.instance.nest.vertex_count(),
    });
    let text = format!(
        "{} rewrites, {} -> {} vertices",
        s.log.len(),
        inst.nest.vertex_count(),
        s.instance.nest.vertex_count()
    );
    finish_artifact(body, out, io::instance_to_json(&s.instance), text)
}

fn cmd_verify(instance: &Path, metric: &Path) -> Outcome {
    let inst = load_instance(instance)?;
    let d = load_metric(metric)?;
    let bad = verify(&inst, &d);
    if bad.is_empty() {
        Ok(Report::new(0, json!({"verified": true}), "verified"))
    } else {
        let text = format!("{} discrepancies, first: {:?}", bad.len(), bad[0]);
        Ok(Report::new(1, json!({"verified": false, "discrepancies": bad}), text))
    }
}

fn cmd_certify(instance: &Path, metric: &Path, certificate: &Path) -> Outcome {
    let inst = load_instance(instance)?;
    let d = load_metric(metric)?;
    if d.terminals() != inst.nest.terminals() {
        return Err(input(anyhow!("table and instance name different terminals")));
    }
    let cert = io::parse_certificate(&read(certificate)?, d.terminals()).map_err(input)?;
    let mut seen: Vec<_> = inst.nest.paths().iter().map(|p| (p.src, p.dst)).collect();
    seen.push((cert.a, cert.b));
    let rp = RestrictingPair { c: cert.c.clone(), cprime: cert.cprime.clone(), context: (cert.a, cert.b), seen };
    let restricting = is_restricting_pair(&d, &rp);
    let routed = match check_routing(&inst.nest, &cert.c, &cert.cprime, &cert.routing) {
        Ok(b) => b,
        Err(e @ (CertifyError::UnknownEdge(_) | CertifyError::UnknownTerminal(_))) => return Err(input(e)),
        Err(e) => return Err(internal(e)),
    };
    let ok = restricting && routed;
    let text = format!(
        "certificate {}: restricting pair {}, routing {}",
        if ok { "accepted" } else { "rejected" },
        if restricting { "ok" } else { "fails" },
        if routed { "ok" } else { "fails" }
    );
    Ok(Report::new(if ok { 0 } else { 1 }, json!({"accepted": ok, "restricting": restricting, "routing": routed}), text))
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    kind: GenKind,
    k: usize,
    seed: u64,
    paths: Option<usize>,
    ring: bool,
    shortest: bool,
    out: &Option<PathBuf>,
    metric_out: &Option<PathBuf>,
    ordering_out: &Option<PathBuf>,
) -> Outcome {
    if k < 2 {
        return Err(input(anyhow!("need at least two terminals")));
    }
    if kind == GenKind::Quasimetric {
        let d = gen_random_quasimetric(k, seed);
        let m = io::metric_to_json(&d);
        let target = metric_out.clone().or_else(|| out.clone());
        return match emit(&target, m)? {
            Some(m) => Ok(Report::new(0, json!({"metric": as_value(&m)}), m)),
            None => Ok(Report::new(0, json!({"k": k, "seed": seed}), format!("wrote table for k={k}"))),
        };
    }
    let mut cfg = NestConfig::new(k, paths.unwrap_or(k), seed);
    cfg.ring = ring;
    let g = if shortest {
        match gen_shortest_nest(&cfg) {
            Some(g) => g,
            None => return Ok(Report::new(1, json!({"generated": false}), "this drawing admits no all-shortest weights")),
        }
    } else {
        gen_random_nest(&cfg)
    };
    let sigma = ordering_of(&g.instance);
    if let Some(p) = metric_out {
        write(p, &io::metric_to_json(&g.metric))?;
    }
    if let Some(p) = ordering_out {
        write(p, &io::ordering_to_json(&sigma))?;
    }
    let body = json!({
        "k": k,
        "seed": seed,
        "vertices": g.instance.nest.vertex_count(),
        "paths": g.instance.nest.paths().len(),
        "ordering": as_value(&io::ordering_to_json(&sigma)),
    });
    let text = format!("generated {} paths on {} vertices", g.instance.nest.paths().len(), g.instance.nest.vertex_count());
    finish_artifact(body, out, io::instance_to_json(&g.instance), text)
}

fn cmd_round_trip(k: usize, seed: u64, paths: Option<usize>) -> Outcome {
    if k < 2 {
        return Err(input(anyhow!("need at least two terminals")));
    }
    let g = gen_random_nest(&NestConfig::new(k, paths.unwrap_or(k), seed));
    let sigma = ordering_of(&g.instance);
    let realized = realize_with(&g.metric, &sigma, &RealizeOptions::default()).map_err(internal)?.instance;
    let first = verify(&realized, &g.metric);
    let simplified = simplify(&realized, SimplifyOptions::default()).map_err(internal)?;
    let second = verify(&simplified.instance, &g.metric);
    let ok = first.is_empty() && second.is_empty();
    let body = json!({
        "ok": ok,
        "k": k,
        "seed": seed,
        "realized_vertices": realized.nest.vertex_count(),
        "simplified_vertices": simplified.instance.nest.vertex_count(),
        "rewrites": simplified.log.len(),
        "discrepancies": first.into_iter().chain(second).collect::<Vec<_>>(),
    });
    let text = format!(
        "round trip {}: {} -> {} vertices after {} rewrites",
        if ok { "ok" } else { "FAILED" },
        realized.nest.vertex_count(),
        simplified.instance.nest.vertex_count(),
        simplified.log.len()
    );
    Ok(Report::new(if ok { 0 } else { 1 }, body, text))
}

fn run(cmd: &Cmd) -> Outcome {
    match cmd {
        Cmd::Validate { metric } => cmd_validate(metric),
        Cmd::CheckMonge { metric, ordering } => cmd_check_monge(metric, ordering),
        Cmd::FindOrdering { metric } => cmd_find_ordering(metric),
        Cmd::Realize { metric, ordering, auto: _, out, constraint_log, dot, svg } => {
            cmd_realize(metric, ordering, out, constraint_log, dot, svg)
        }
        Cmd::Simplify { instance, out, log, fast } => cmd_simplify(instance, out, log, *fast),
        Cmd::Verify { instance, metric } => cmd_verify(instance, metric),
        Cmd::Certify { instance, metric, certificate } => cmd_certify(instance, metric, certificate),
        Cmd::Gen { kind, k, seed, paths, ring, shortest, out, metric_out, ordering_out } => {
            cmd_gen(*kind, *k, *seed, *paths, *ring, *shortest, out, metric_out, ordering_out)
        }
        Cmd::RoundTrip { k, seed, paths } => cmd_round_trip(*k, *seed, *paths),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (code, body, text) = match run(&cli.cmd) {
        Ok(r) => (r.code, r.body, Some(r.text)),
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            (f.code(), json!({"error": format!("{:#}", f.error())}), None)
        }
    };
    if cli.json {
        let mut body = body;
        body["exit"] = json!(code);
        println!("{}", serde_json::to_string_pretty(&body).expect("plain data"));
    } else if let Some(t) = text {
        println!("{t}");
    }
    ExitCode::from(code)
}
