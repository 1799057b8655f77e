//! Line-oriented text formats for every pipeline artifact.
//!
//! Blank lines and `#` comments are ignored on input. Writers emit no
//! comments, so write, read, write is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::community::{CommunityPartition, HubSet};
use crate::error::{parse_err, Error, Result};
use crate::grid::{Coord, Topology};
use crate::mapping::{Flow, TaskGraph};
use crate::num::Scalar;

/// Non-empty lines with comments stripped, tagged with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn num<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what} `{field}`")))
}

fn scalar<S: Scalar>(line: usize, field: &str) -> Result<S> {
    let v: f64 = num(line, field, "number")?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite number `{field}`")));
    }
    Ok(S::lit(v))
}

fn arity(line: usize, fields: &[&str], n: usize, shape: &str) -> Result<()> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(parse_err(line, format!("expected `{shape}`")))
    }
}

fn relabel(line: usize, e: Error) -> Error {
    match e {
        Error::InvalidTopology(m) | Error::InvalidParameter(m) => parse_err(line, m),
        other => other,
    }
}

/// Header `t n`, then `id row col` per node, then `u v length` per link.
pub fn write_topology(topo: &Topology) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", topo.t(), topo.node_count());
    for (i, c) in topo.coords().iter().enumerate() {
        let _ = writeln!(s, "{i} {} {}", c.row, c.col);
    }
    for l in topo.links() {
        let _ = writeln!(s, "{} {} {}", l.u, l.v, l.length);
    }
    s
}

pub fn read_topology(text: &str) -> Result<Topology> {
    let mut lines = content_lines(text);
    let (hl, head) = lines.next().ok_or_else(|| parse_err(1, "empty topology file"))?;
    arity(hl, &head, 2, "t n")?;
    let t: usize = num(hl, head[0], "side")?;
    let n: usize = num(hl, head[1], "node count")?;
    let mut coords = Vec::with_capacity(n);
    for i in 0..n {
        let (ln, f) = lines
            .next()
            .ok_or_else(|| parse_err(hl, format!("expected {n} node lines, found {i}")))?;
        arity(ln, &f, 3, "id row col")?;
        let id: usize = num(ln, f[0], "node id")?;
        if id != i {
            return Err(parse_err(ln, format!("node ids must be consecutive, expected {i}")));
        }
        coords.push(Coord::new(num(ln, f[1], "row")?, num(ln, f[2], "column")?));
    }
    let mut topo = Topology::with_coords(t, coords).map_err(|e| relabel(hl, e))?;
    for (ln, f) in lines {
        arity(ln, &f, 3, "u v length")?;
        topo.add_link_with_length(num(ln, f[0], "node")?, num(ln, f[1], "node")?, num(ln, f[2], "length")?)
            .map_err(|e| relabel(ln, e))?;
    }
    Ok(topo)
}

/// `node community` per node.
pub fn write_partition<S>(part: &CommunityPartition<S>) -> String {
    let mut s = String::new();
    for (u, c) in part.assign.iter().enumerate() {
        let _ = writeln!(s, "{u} {c}");
    }
    s
}

/// Community labels per node; modularity is recomputed on `topo`.
pub fn read_partition<S: Scalar>(text: &str, topo: &Topology, max_size: usize) -> Result<CommunityPartition<S>> {
    let mut labels = vec![usize::MAX; topo.node_count()];
    for (ln, f) in content_lines(text) {
        arity(ln, &f, 2, "node community")?;
        let u: usize = num(ln, f[0], "node")?;
        let c: usize = num(ln, f[1], "community")?;
        match labels.get_mut(u) {
            Some(slot) if *slot == usize::MAX => *slot = c,
            Some(_) => return Err(parse_err(ln, format!("node {u} listed twice"))),
            None => return Err(parse_err(ln, format!("node {u} outside the topology"))),
        }
    }
    if let Some(u) = labels.iter().position(|&c| c == usize::MAX) {
        return Err(parse_err(0, format!("node {u} has no community")));
    }
    let part = CommunityPartition::from_labels(topo, &labels, max_size);
    if part.assign != labels {
        return Err(parse_err(0, "community ids must be 0.. in order of first appearance"));
    }
    Ok(part)
}

/// `community hub...` per community.
pub fn write_hubs<S>(hubs: &HubSet<S>) -> String {
    let mut s = String::new();
    for (c, hs) in hubs.hubs.iter().enumerate() {
        let _ = write!(s, "{c}");
        for h in hs {
            let _ = write!(s, " {h}");
        }
        s.push('\n');
    }
    s
}

/// Hub lists per community, in community order.
pub fn read_hubs(text: &str) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for (ln, f) in content_lines(text) {
        let c: usize = num(ln, f[0], "community")?;
        if c != out.len() {
            return Err(parse_err(ln, format!("expected community {}", out.len())));
        }
        if f.len() < 2 {
            return Err(parse_err(ln, "a community needs at least one hub"));
        }
        out.push(f[1..].iter().map(|x| num(ln, x, "hub")).collect::<Result<_>>()?);
    }
    Ok(out)
}

/// Header `tasks n`, then `u v demand` per flow.
pub fn write_task_graph<S: Scalar>(tg: &TaskGraph<S>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tasks {}", tg.task_count());
    for f in tg.flows() {
        let _ = writeln!(s, "{} {} {}", f.src, f.dst, f.demand);
    }
    s
}

/// Without a `tasks n` header the task count is one past the largest id.
pub fn read_task_graph<S: Scalar>(text: &str) -> Result<TaskGraph<S>> {
    let mut declared = None;
    let mut flows = Vec::new();
    let mut last = 0;
    for (ln, f) in content_lines(text) {
        last = ln;
        if f[0] == "tasks" {
            arity(ln, &f, 2, "tasks n")?;
            if declared.is_some() || !flows.is_empty() {
                return Err(parse_err(ln, "`tasks` header must come first"));
            }
            declared = Some(num::<usize>(ln, f[1], "task count")?);
            continue;
        }
        arity(ln, &f, 3, "u v demand")?;
        let flow = Flow::new(num(ln, f[0], "task")?, num(ln, f[1], "task")?, scalar(ln, f[2])?);
        if flow.src == flow.dst {
            return Err(parse_err(ln, format!("self-loop at task {}", flow.src)));
        }
        if !(flow.demand > S::zero()) {
            return Err(parse_err(ln, "demand must be positive"));
        }
        if declared.is_some_and(|n| flow.src >= n || flow.dst >= n) {
            return Err(parse_err(ln, "task id beyond the declared count"));
        }
        flows.push(flow);
    }
    let n = declared.unwrap_or_else(|| flows.iter().map(|f| f.src.max(f.dst) + 1).max().unwrap_or(0));
    TaskGraph::new(n, flows).map_err(|e| relabel(last, e))
}

/// `task core` per task.
pub fn write_placement(core_of: &[usize]) -> String {
    let mut s = String::new();
    for (t, c) in core_of.iter().enumerate() {
        let _ = writeln!(s, "{t} {c}");
    }
    s
}

/// Core per task; tasks must be listed once each and cores used at most once.
pub fn read_placement(text: &str) -> Result<Vec<usize>> {
    let mut map = BTreeMap::new();
    let mut used = BTreeMap::new();
    for (ln, f) in content_lines(text) {
        arity(ln, &f, 2, "task core")?;
        let t: usize = num(ln, f[0], "task")?;
        let c: usize = num(ln, f[1], "core")?;
        if map.insert(t, c).is_some() {
            return Err(parse_err(ln, format!("task {t} placed twice")));
        }
        if let Some(other) = used.insert(c, t) {
            return Err(parse_err(ln, format!("core {c} already holds task {other}")));
        }
    }
    let core_of: Vec<usize> = map.values().copied().collect();
    if map.keys().enumerate().any(|(i, &t)| i != t) {
        return Err(parse_err(0, "task ids must be 0..n"));
    }
    Ok(core_of)
}

/// One routed flow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouteEntry {
    pub nodes: Vec<usize>,
    pub feasible: bool,
}

impl RouteEntry {
    pub fn src(&self) -> usize {
        self.nodes[0]
    }

    pub fn dst(&self) -> usize {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn hops(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// `src dst hopcount node0 .. nodeH feasible` per flow.
pub fn write_routes(routes: &[RouteEntry]) -> String {
    let mut s = String::new();
    for r in routes {
        let _ = write!(s, "{} {} {}", r.src(), r.dst(), r.hops());
        for n in &r.nodes {
            let _ = write!(s, " {n}");
        }
        let _ = writeln!(s, " {}", u8::from(r.feasible));
    }
    s
}

pub fn read_routes(text: &str) -> Result<Vec<RouteEntry>> {
    let mut out = Vec::new();
    for (ln, f) in content_lines(text) {
        if f.len() < 6 {
            return Err(parse_err(ln, "expected `src dst hopcount node0 .. nodeH feasible`"));
        }
        let src: usize = num(ln, f[0], "source")?;
        let dst: usize = num(ln, f[1], "destination")?;
        let hops: usize = num(ln, f[2], "hop count")?;
        if f.len() != hops + 5 {
            return Err(parse_err(ln, format!("hop count {hops} needs {} nodes", hops + 1)));
        }
        let nodes: Vec<usize> = f[3..3 + hops + 1]
            .iter()
            .map(|x| num(ln, x, "node"))
            .collect::<Result<_>>()?;
        if nodes[0] != src || nodes[hops] != dst {
            return Err(parse_err(ln, "path endpoints disagree with src and dst"));
        }
        let feasible = match f[f.len() - 1] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(ln, format!("feasible flag must be 0 or 1, got `{other}`"))),
        };
        out.push(RouteEntry { nodes, feasible });
    }
    Ok(out)
}

/// Traffic table: `src dst rate` per flow, rate in packets per cycle.
pub fn write_traffic<S: Scalar>(flows: &[crate::simulator::InjectFlow<S>]) -> String {
    let mut s = String::new();
    for f in flows {
        let _ = writeln!(s, "{} {} {}", f.src, f.dst, f.rate);
    }
    s
}

pub fn read_traffic<S: Scalar>(text: &str) -> Result<Vec<crate::simulator::InjectFlow<S>>> {
    content_lines(text)
        .map(|(ln, f)| {
            arity(ln, &f, 3, "src dst rate")?;
            let rate: S = scalar(ln, f[2])?;
            if !(rate > S::zero() && rate < S::one()) {
                return Err(parse_err(ln, "rate must lie in (0, 1)"));
            }
            Ok(crate::simulator::InjectFlow {
                src: num(ln, f[0], "source")?,
                dst: num(ln, f[1], "destination")?,
                rate,
            })
        })
        .collect()
}

/// Counts from an edge-list import.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IngestSummary {
    pub tasks: usize,
    pub flows: usize,
    pub edges_read: usize,
    pub duplicates_merged: usize,
    pub self_loops_dropped: usize,
}

/// Imports a `u v [w]` edge list. Original ids are renumbered `0..k` in
/// ascending order, demand is `w` or 1, repeated directed edges have their
/// demands summed, and self-loops are dropped since they never use the
/// network. Returns the original id of each task alongside the graph.
pub fn ingest_snap<S: Scalar>(text: &str) -> Result<(TaskGraph<S>, Vec<u64>, IngestSummary)> {
    let mut edges = Vec::new();
    for (ln, f) in content_lines(text) {
        if f.len() != 2 && f.len() != 3 {
            return Err(parse_err(ln, "expected `u v [w]`"));
        }
        let u: u64 = num(ln, f[0], "node")?;
        let v: u64 = num(ln, f[1], "node")?;
        let w: S = if f.len() == 3 { scalar(ln, f[2])? } else { S::one() };
        if !(w > S::zero()) {
            return Err(parse_err(ln, "weight must be positive"));
        }
        edges.push((u, v, w));
    }
    let mut ids: Vec<u64> = edges.iter().flat_map(|&(u, v, _)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    let index = |x: u64| ids.binary_search(&x).expect("id collected above");
    let mut merged: BTreeMap<(usize, usize), S> = BTreeMap::new();
    let mut loops = 0;
    let mut dups = 0;
    for &(u, v, w) in &edges {
        if u == v {
            loops += 1;
            continue;
        }
        let e = merged.entry((index(u), index(v))).or_insert_with(S::zero);
        if *e > S::zero() {
            dups += 1;
        }
        *e = *e + w;
    }
    let flows: Vec<Flow<S>> = merged.into_iter().map(|((a, b), d)| Flow::new(a, b, d)).collect();
    let summary = IngestSummary {
        tasks: ids.len(),
        flows: flows.len(),
        edges_read: edges.len(),
        duplicates_merged: dups,
        self_loops_dropped: loops,
    };
    Ok((TaskGraph::new(ids.len(), flows)?, ids, summary))
}
