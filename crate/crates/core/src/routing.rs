//! Deadlock-free deterministic routing.
//!
//! Turn prohibition removes nodes one at a time, always a lowest-degree
//! node whose removal keeps the rest connected, and forbids every turn at it
//! between two neighbours that are still present. Any channel cycle would
//! pivot at its earliest-removed node through two later-removed neighbours,
//! which is forbidden, so the channel dependency graph is acyclic; the
//! removal order keeps every pair reachable through permitted turns.
//!
//! Routes are found by Lagrangian relaxation of link capacity and per-flow
//! hop limits: each iteration solves one least-cost path problem per flow
//! on the (node, incoming link) state graph, then moves the multipliers
//! along the subgradient.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, VecDeque};

use crate::error::{invalid, Error, Result};
use crate::grid::{bfs_hops, ChannelId, Topology, UNREACHABLE};
use crate::mapping::Flow;
use crate::num::{total_cmp, Scalar};
use crate::par::map_indices;
use crate::powermodel::{per_bit_energies, PowerParams};

/// Directed channel from `u` towards its neighbour at adjacency slot `slot`.
fn out_channel(topo: &Topology, u: usize, slot: usize) -> ChannelId {
    let (v, l) = topo.neighbors(u)[slot];
    debug_assert_eq!(topo.link(l).other(u), v);
    if topo.link(l).u == u {
        2 * l
    } else {
        2 * l + 1
    }
}

/// Prohibited turns `(a, b, c)`: entering `b` from `a` and leaving to `c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TurnSet {
    offset: Vec<usize>,
    allowed: Vec<bool>,
    order: Vec<usize>,
    prohibited: usize,
    total: usize,
}

impl TurnSet {
    /// Every turn except U-turns permitted.
    pub fn permissive(topo: &Topology) -> Self {
        let mut offset = Vec::with_capacity(topo.node_count() + 1);
        let mut allowed = Vec::new();
        let mut total = 0;
        for u in 0..topo.node_count() {
            offset.push(allowed.len());
            let d = topo.degree(u);
            total += d * d.saturating_sub(1);
            allowed.extend((0..d * d).map(|x| x / d != x % d));
        }
        offset.push(allowed.len());
        Self {
            offset,
            allowed,
            order: Vec::new(),
            prohibited: 0,
            total,
        }
    }

    fn degree_at(&self, b: usize) -> usize {
        let block = self.offset[b + 1] - self.offset[b];
        (block as f64).sqrt().round() as usize
    }

    /// Turn through `b` between adjacency slots `i` (in) and `j` (out).
    pub fn permits_slots(&self, b: usize, i: usize, j: usize) -> bool {
        self.allowed[self.offset[b] + i * self.degree_at(b) + j]
    }

    fn forbid_slots(&mut self, b: usize, i: usize, j: usize) {
        let idx = self.offset[b] + i * self.degree_at(b) + j;
        if self.allowed[idx] {
            self.allowed[idx] = false;
            self.prohibited += 1;
        }
    }

    /// `false` for U-turns, prohibited turns, and non-adjacent triples.
    pub fn permits(&self, topo: &Topology, a: usize, b: usize, c: usize) -> bool {
        let nb = topo.neighbors(b);
        match (
            nb.iter().position(|&(x, _)| x == a),
            nb.iter().position(|&(x, _)| x == c),
        ) {
            (Some(i), Some(j)) => self.permits_slots(b, i, j),
            _ => false,
        }
    }

    /// Forbids a turn; adjacent triples only.
    pub fn prohibit(&mut self, topo: &Topology, a: usize, b: usize, c: usize) -> Result<()> {
        let nb = topo.neighbors(b);
        let i = nb.iter().position(|&(x, _)| x == a);
        let j = nb.iter().position(|&(x, _)| x == c);
        match (i, j) {
            (Some(i), Some(j)) if i != j => {
                self.forbid_slots(b, i, j);
                Ok(())
            }
            _ => Err(invalid(format!("({a}, {b}, {c}) is not a turn"))),
        }
    }

    /// Prohibited turns as `(in, pivot, out)` node triples, sorted.
    pub fn prohibited_turns(&self, topo: &Topology) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.prohibited);
        for b in 0..topo.node_count() {
            let nb = topo.neighbors(b);
            for (i, &(a, _)) in nb.iter().enumerate() {
                for (j, &(c, _)) in nb.iter().enumerate() {
                    if i != j && !self.permits_slots(b, i, j) {
                        out.push((a, b, c));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn prohibited_count(&self) -> usize {
        self.prohibited
    }

    /// Turns excluding U-turns.
    pub fn total_turns(&self) -> usize {
        self.total
    }

    pub fn prohibited_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.prohibited as f64 / self.total as f64
        }
    }

    /// Node removal order of the construction (empty for hand-built sets).
    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

/// Articulation points of the subgraph induced by `alive`.
fn articulation_points(topo: &Topology, alive: &[bool]) -> Vec<bool> {
    let n = topo.node_count();
    let mut disc = vec![0usize; n];
    let mut low = vec![0usize; n];
    let mut art = vec![false; n];
    let mut timer = 0;
    // (node, parent, next adjacency slot)
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for root in 0..n {
        if !alive[root] || disc[root] != 0 {
            continue;
        }
        timer += 1;
        disc[root] = timer;
        low[root] = timer;
        let mut root_children = 0;
        stack.push((root, usize::MAX, 0));
        while let Some(&mut (u, parent, ref mut slot)) = stack.last_mut() {
            let nb = topo.neighbors(u);
            if *slot < nb.len() {
                let v = nb[*slot].0;
                *slot += 1;
                if !alive[v] || v == parent {
                    continue;
                }
                if disc[v] == 0 {
                    timer += 1;
                    disc[v] = timer;
                    low[v] = timer;
                    if u == root {
                        root_children += 1;
                    }
                    stack.push((v, u, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if p != root && low[u] >= disc[p] {
                        art[p] = true;
                    }
                }
            }
        }
        art[root] = root_children > 1;
    }
    art
}

/// Builds the prohibited turn set for a connected topology.
pub fn turn_prohibition(topo: &Topology) -> Result<TurnSet> {
    if !topo.is_connected() {
        return Err(Error::InvalidTopology(
            "turn prohibition needs a connected topology".into(),
        ));
    }
    let n = topo.node_count();
    let mut ts = TurnSet::permissive(topo);
    let mut alive = vec![true; n];
    let mut rem_deg = topo.degrees();
    for _ in 0..n {
        let art = articulation_points(topo, &alive);
        let a = (0..n)
            .filter(|&u| alive[u] && !art[u])
            .min_by_key(|&u| (rem_deg[u], u))
            .expect("a connected graph has a non-articulation node");
        let nb = topo.neighbors(a);
        for i in 0..nb.len() {
            for j in 0..nb.len() {
                if i != j && alive[nb[i].0] && alive[nb[j].0] {
                    ts.forbid_slots(a, i, j);
                }
            }
        }
        alive[a] = false;
        for &(b, _) in nb {
            rem_deg[b] -= 1;
        }
        ts.order.push(a);
    }
    Ok(ts)
}

/// Cycle check on the channel dependency graph formed by all permitted turns.
pub fn turnset_cdg_acyclic(topo: &Topology, ts: &TurnSet) -> bool {
    let mut deps = Vec::new();
    for b in 0..topo.node_count() {
        let d = topo.degree(b);
        for i in 0..d {
            for j in 0..d {
                if i != j && ts.permits_slots(b, i, j) {
                    let a = topo.neighbors(b)[i].0;
                    let Some(ch_in) = topo.channel(a, b) else { continue };
                    deps.push((ch_in, out_channel(topo, b, j)));
                }
            }
        }
    }
    acyclic(topo.channel_count(), &deps)
}

/// Cycle check on the channel dependencies induced by consecutive hops of
/// the given node paths.
pub fn paths_cdg_acyclic(topo: &Topology, paths: &[Vec<usize>]) -> bool {
    let mut deps = Vec::new();
    for p in paths {
        let chans: Vec<Option<ChannelId>> = p.windows(2).map(|w| topo.channel(w[0], w[1])).collect();
        for w in chans.windows(2) {
            if let [Some(a), Some(b)] = w {
                deps.push((*a, *b));
            }
        }
    }
    acyclic(topo.channel_count(), &deps)
}

fn acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0usize; n];
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        indeg[b] += 1;
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop_front() {
        seen += 1;
        for &w in &adj[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    seen == n
}

/// Precomputed channel transitions: for each channel `u -> v`, the adjacency
/// slot of `u` at `v`.
struct StateGraph<'a> {
    topo: &'a Topology,
    ts: &'a TurnSet,
    in_slot: Vec<usize>,
}

impl<'a> StateGraph<'a> {
    fn new(topo: &'a Topology, ts: &'a TurnSet) -> Self {
        let in_slot = (0..topo.channel_count())
            .map(|ch| {
                let (u, v) = topo.channel_ends(ch);
                topo.neighbors(v)
                    .iter()
                    .position(|&(x, _)| x == u)
                    .expect("channel endpoints are adjacent")
            })
            .collect();
        Self { topo, ts, in_slot }
    }

    /// Permitted successor channels of `ch` as `(next channel, head node)`.
    fn successors(&self, ch: ChannelId) -> impl Iterator<Item = (ChannelId, usize)> + '_ {
        let (_, v) = self.topo.channel_ends(ch);
        let i = self.in_slot[ch];
        self.topo
            .neighbors(v)
            .iter()
            .enumerate()
            .filter(move |&(j, _)| self.ts.permits_slots(v, i, j))
            .map(move |(j, &(w, _))| (out_channel(self.topo, v, j), w))
    }

    fn starts(&self, src: usize) -> impl Iterator<Item = (ChannelId, usize)> + '_ {
        (0..self.topo.degree(src)).map(move |j| (out_channel(self.topo, src, j), self.topo.neighbors(src)[j].0))
    }

    fn head(&self, ch: ChannelId) -> usize {
        self.topo.channel_ends(ch).1
    }

    fn nodes_of(&self, src: usize, chans: &[ChannelId]) -> Vec<usize> {
        let mut nodes = Vec::with_capacity(chans.len() + 1);
        nodes.push(src);
        nodes.extend(chans.iter().map(|&c| self.head(c)));
        nodes
    }
}

const NO_PARENT: u32 = u32::MAX;

/// Breadth-first search over permitted turns from one source: parent channel
/// per channel and the best arriving channel per node.
#[derive(Clone, Debug)]
struct LegalTree {
    parent: Vec<u32>,
    arrive: Vec<u32>,
}

fn legal_bfs(g: &StateGraph<'_>, src: usize) -> LegalTree {
    let nch = g.topo.channel_count();
    let mut dist = vec![u32::MAX; nch];
    let mut parent = vec![NO_PARENT; nch];
    let mut arrive = vec![NO_PARENT; g.topo.node_count()];
    let mut arrive_d = vec![u32::MAX; g.topo.node_count()];
    let mut queue = VecDeque::new();
    for (ch, _) in g.starts(src) {
        dist[ch] = 1;
        queue.push_back(ch);
    }
    while let Some(ch) = queue.pop_front() {
        let h = g.head(ch);
        if (dist[ch], ch as u32) < (arrive_d[h], arrive[h]) && h != src {
            arrive_d[h] = dist[ch];
            arrive[h] = ch as u32;
        }
        for (nx, _) in g.successors(ch) {
            if dist[nx] == u32::MAX {
                dist[nx] = dist[ch] + 1;
                parent[nx] = ch as u32;
                queue.push_back(nx);
            }
        }
    }
    LegalTree { parent, arrive }
}

impl LegalTree {
    fn channels_to(&self, dst: usize) -> Option<Vec<ChannelId>> {
        let mut ch = self.arrive[dst];
        if ch == NO_PARENT {
            return None;
        }
        let mut out = Vec::new();
        while ch != NO_PARENT {
            out.push(ch as usize);
            ch = self.parent[ch as usize];
        }
        out.reverse();
        Some(out)
    }
}

/// Minimum number of hops from `src` to every node using permitted turns.
pub fn legal_hops_from(topo: &Topology, ts: &TurnSet, src: usize) -> Vec<u16> {
    let g = StateGraph::new(topo, ts);
    let tree = legal_bfs(&g, src);
    (0..topo.node_count())
        .map(|d| {
            if d == src {
                0
            } else {
                tree.channels_to(d).map_or(UNREACHABLE, |c| c.len() as u16)
            }
        })
        .collect()
}

/// Fraction of ordered node pairs connected through permitted turns.
pub fn legal_reachability(topo: &Topology, ts: &TurnSet) -> f64 {
    let n = topo.node_count();
    if n < 2 {
        return 1.0;
    }
    let g = StateGraph::new(topo, ts);
    let reached: usize = map_indices(n, |s| {
        let tree = legal_bfs(&g, s);
        (0..n).filter(|&d| d != s && tree.arrive[d] != NO_PARENT).count()
    })
    .into_iter()
    .sum();
    reached as f64 / (n * (n - 1)) as f64
}

/// Source routes: explicit per-pair paths, with permitted-turn minimum-hop
/// routes computed on demand for pairs without one.
#[derive(Debug)]
pub struct RouteTable<'a> {
    explicit: HashMap<(usize, usize), Vec<usize>>,
    fallback: Option<(StateGraph<'a>, TreeCache)>,
}

/// Legal shortest-path trees by destination, built lazily.
type TreeCache = std::sync::Mutex<HashMap<usize, std::sync::Arc<LegalTree>>>;

impl std::fmt::Debug for StateGraph<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateGraph").finish_non_exhaustive()
    }
}

impl<'a> RouteTable<'a> {
    pub fn from_paths(paths: impl IntoIterator<Item = Vec<usize>>) -> Self {
        let explicit = paths
            .into_iter()
            .filter(|p| p.len() >= 2)
            .map(|p| ((p[0], p[p.len() - 1]), p))
            .collect();
        Self {
            explicit,
            fallback: None,
        }
    }

    /// Minimum-hop routes over permitted turns for every pair.
    pub fn min_hop(topo: &'a Topology, ts: &'a TurnSet) -> Self {
        Self {
            explicit: HashMap::new(),
            fallback: Some((StateGraph::new(topo, ts), Default::default())),
        }
    }

    /// Explicit routes take precedence over the minimum-hop fallback.
    pub fn with_fallback(mut self, topo: &'a Topology, ts: &'a TurnSet) -> Self {
        self.fallback = Some((StateGraph::new(topo, ts), Default::default()));
        self
    }

    pub fn explicit_len(&self) -> usize {
        self.explicit.len()
    }

    /// Node sequence from `src` to `dst`, inclusive.
    pub fn path(&self, src: usize, dst: usize) -> Option<Vec<usize>> {
        if src == dst {
            return Some(vec![src]);
        }
        if let Some(p) = self.explicit.get(&(src, dst)) {
            return Some(p.clone());
        }
        let (g, cache) = self.fallback.as_ref()?;
        let tree = {
            let mut c = cache.lock().expect("route cache poisoned");
            c.entry(src)
                .or_insert_with(|| std::sync::Arc::new(legal_bfs(g, src)))
                .clone()
        };
        tree.channels_to(dst).map(|ch| g.nodes_of(src, &ch))
    }
}

/// Routing inputs shared by every commodity.
#[derive(Clone, Debug)]
pub struct RoutingParams<S> {
    /// Hop limit per flow.
    pub hop_limit: usize,
    /// Capacity of each directed channel, MB/s.
    pub link_capacity: S,
    /// Per-hop penalty; `None` uses the median per-hop energy cost.
    pub xi: Option<S>,
    pub max_iterations: usize,
    pub stall_iterations: usize,
    pub power: PowerParams<S>,
}

impl<S: Scalar> Default for RoutingParams<S> {
    fn default() -> Self {
        Self {
            hop_limit: 12,
            link_capacity: S::lit(4000.0),
            xi: None,
            max_iterations: 500,
            stall_iterations: 50,
            power: PowerParams::default(),
        }
    }
}

/// One multicommodity routing instance.
#[derive(Clone, Debug)]
pub struct RoutingProblem<'a, S> {
    pub topo: &'a Topology,
    pub flows: Vec<Flow<S>>,
    pub hop_limit: Vec<usize>,
    pub link_capacity: S,
    pub xi: S,
    /// `J_s` of the receiving switch plus `J_l` of the link, per channel.
    pub channel_energy: Vec<S>,
    pub max_iterations: usize,
    pub stall_iterations: usize,
}

fn median<S: Scalar>(mut v: Vec<S>) -> S {
    if v.is_empty() {
        return S::zero();
    }
    v.sort_by(|a, b| total_cmp(*a, *b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / S::lit(2.0)
    }
}

impl<'a, S: Scalar> RoutingProblem<'a, S> {
    pub fn new(topo: &'a Topology, flows: Vec<Flow<S>>, params: &RoutingParams<S>) -> Result<Self> {
        let n = topo.node_count();
        for f in &flows {
            if f.src >= n || f.dst >= n || f.src == f.dst {
                return Err(invalid(format!("flow {}->{} is not a core pair", f.src, f.dst)));
            }
            if !(f.demand > S::zero()) {
                return Err(invalid(format!("flow {}->{} needs positive demand", f.src, f.dst)));
            }
        }
        if !(params.link_capacity > S::zero()) {
            return Err(invalid("link capacity must be positive"));
        }
        let channel_energy: Vec<S> = (0..topo.channel_count())
            .map(|ch| {
                let (_, v) = topo.channel_ends(ch);
                let (js, jl) = per_bit_energies(topo.degree(v) + 1, topo.link(ch / 2).length, &params.power);
                js + jl
            })
            .collect();
        let xi = match params.xi {
            Some(x) => x,
            None => median(channel_energy.clone()) * median(flows.iter().map(|f| f.demand).collect()),
        };
        Ok(Self {
            topo,
            hop_limit: vec![params.hop_limit; flows.len()],
            flows,
            link_capacity: params.link_capacity,
            xi,
            channel_energy,
            max_iterations: params.max_iterations,
            stall_iterations: params.stall_iterations,
        })
    }

    /// `p + xi` of one flow on one channel.
    pub fn hop_cost(&self, flow: usize, ch: ChannelId) -> S {
        self.channel_energy[ch] * self.flows[flow].demand + self.xi
    }

    /// Objective contribution of a node path for `flow`.
    pub fn path_cost(&self, flow: usize, path: &[usize]) -> Option<S> {
        path.windows(2)
            .map(|w| self.topo.channel(w[0], w[1]).map(|ch| self.hop_cost(flow, ch)))
            .sum()
    }
}

/// `p + xi + mu_link * cr + mu_flow`, with `p = (J_s + J_l) * cr`.
pub fn flow_link_cost<S: Scalar>(j_s: S, j_l: S, demand: S, xi: S, mu_link: S, mu_flow: S) -> S {
    (j_s + j_l) * demand + xi + mu_link * demand + mu_flow
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoutingSolution<S> {
    /// Node path per flow, source first.
    pub paths: Vec<Vec<usize>>,
    pub hop_ok: Vec<bool>,
    pub capacity_ok: Vec<bool>,
    /// Flows whose hop limit is below the permitted-turn minimum hop count.
    pub infeasible_upfront: Vec<bool>,
    /// Percentage of flows meeting both limits.
    pub success: S,
    /// Sum of `p + xi` over all flows' hops.
    pub objective: S,
    pub channel_load: Vec<S>,
    pub mu_link: Vec<S>,
    pub mu_flow: Vec<S>,
    /// Best Lagrangian dual value seen, one entry per iteration.
    pub dual_history: Vec<S>,
    pub iterations: usize,
}

impl<S: Scalar> RoutingSolution<S> {
    pub fn best_dual(&self) -> S {
        self.dual_history.last().copied().unwrap_or_else(S::zero)
    }
}

#[derive(Clone, Copy, Debug)]
struct HeapItem<S> {
    f: S,
    g: S,
    ch: u32,
}

impl<S: Scalar> PartialEq for HeapItem<S> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for HeapItem<S> {}
impl<S: Scalar> PartialOrd for HeapItem<S> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<S: Scalar> Ord for HeapItem<S> {
    fn cmp(&self, o: &Self) -> Ordering {
        total_cmp(self.f, o.f).then(self.ch.cmp(&o.ch))
    }
}

/// A* over channels from `src` to `dst` with per-channel costs `cost(ch)`,
/// each at least `min_step`. `hops_to_dst` are unrestricted hop counts, so
/// `min_step * hops` never overestimates. With `simple`, extensions onto a
/// node already on the partial path are skipped.
#[allow(clippy::too_many_arguments)]
fn least_cost<S: Scalar>(
    g: &StateGraph<'_>,
    src: usize,
    dst: usize,
    hops_to_dst: &[u16],
    min_step: S,
    cost: &dyn Fn(ChannelId) -> S,
    simple: bool,
) -> Option<Vec<ChannelId>> {
    let nch = g.topo.channel_count();
    let mut best = vec![S::infinity(); nch];
    let mut parent = vec![NO_PARENT; nch];
    let mut closed = vec![false; nch];
    let mut heap = BinaryHeap::new();
    let h = |v: usize| min_step * S::lit(f64::from(hops_to_dst[v]));
    let on_path = |mut ch: u32, w: usize, parent: &[u32]| {
        if w == src {
            return true;
        }
        while ch != NO_PARENT {
            if g.head(ch as usize) == w {
                return true;
            }
            ch = parent[ch as usize];
        }
        false
    };
    for (ch, w) in g.starts(src) {
        let c = cost(ch);
        if c < best[ch] {
            best[ch] = c;
            heap.push(Reverse(HeapItem {
                f: c + h(w),
                g: c,
                ch: ch as u32,
            }));
        }
    }
    while let Some(Reverse(item)) = heap.pop() {
        let ch = item.ch as usize;
        if closed[ch] || item.g > best[ch] {
            continue;
        }
        closed[ch] = true;
        if g.head(ch) == dst {
            let mut out = Vec::new();
            let mut c = item.ch;
            while c != NO_PARENT {
                out.push(c as usize);
                c = parent[c as usize];
            }
            out.reverse();
            return Some(out);
        }
        for (nx, w) in g.successors(ch) {
            if closed[nx] || (simple && on_path(item.ch, w, &parent)) {
                continue;
            }
            let c = item.g + cost(nx);
            if c < best[nx] {
                best[nx] = c;
                parent[nx] = item.ch;
                heap.push(Reverse(HeapItem {
                    f: c + h(w),
                    g: c,
                    ch: nx as u32,
                }));
            }
        }
    }
    None
}

fn is_simple(nodes: &[usize]) -> bool {
    let mut seen = nodes.to_vec();
    seen.sort_unstable();
    seen.windows(2).all(|w| w[0] != w[1])
}

struct Evaluation<S> {
    load: Vec<S>,
    hop_ok: Vec<bool>,
    capacity_ok: Vec<bool>,
    success: S,
    objective: S,
}

fn evaluate<S: Scalar>(problem: &RoutingProblem<'_, S>, chans: &[Vec<ChannelId>], upfront: &[bool]) -> Evaluation<S> {
    let mut load = vec![S::zero(); problem.topo.channel_count()];
    for (f, cs) in chans.iter().enumerate() {
        for &c in cs {
            load[c] = load[c] + problem.flows[f].demand;
        }
    }
    let cap = problem.link_capacity;
    let hop_ok: Vec<bool> = chans
        .iter()
        .enumerate()
        .map(|(f, cs)| !upfront[f] && cs.len() <= problem.hop_limit[f])
        .collect();
    let capacity_ok: Vec<bool> = chans.iter().map(|cs| cs.iter().all(|&c| load[c] <= cap)).collect();
    let ok = hop_ok.iter().zip(&capacity_ok).filter(|(a, b)| **a && **b).count();
    let success = if chans.is_empty() {
        S::lit(100.0)
    } else {
        S::lit(100.0) * S::from_usize_lossy(ok) / S::from_usize_lossy(chans.len())
    };
    let objective = chans
        .iter()
        .enumerate()
        .map(|(f, cs)| cs.iter().map(|&c| problem.hop_cost(f, c)).sum::<S>())
        .sum();
    Evaluation {
        load,
        hop_ok,
        capacity_ok,
        success,
        objective,
    }
}

/// Primal repair of a relaxed solution: flows on overloaded channels,
/// heaviest first, move to the cheapest path whose channels all have room
/// for them, if that path meets their hop limit.
fn repair<S: Scalar>(
    problem: &RoutingProblem<'_, S>,
    g: &StateGraph<'_>,
    to_dst: &HashMap<usize, Vec<u16>>,
    e_min: S,
    mu_link: &[S],
    chans: &[Vec<ChannelId>],
    ev: &Evaluation<S>,
) -> Vec<Vec<ChannelId>> {
    let cap = problem.link_capacity;
    let mut out = chans.to_vec();
    let mut load = ev.load.clone();
    let mut order: Vec<usize> = (0..out.len()).filter(|&i| !ev.capacity_ok[i]).collect();
    order.sort_by(|&a, &b| total_cmp(problem.flows[b].demand, problem.flows[a].demand).then(a.cmp(&b)));
    for i in order {
        let f = &problem.flows[i];
        if out[i].iter().all(|&c| load[c] <= cap) {
            continue;
        }
        for &c in &out[i] {
            load[c] = load[c] - f.demand;
        }
        let cost = |ch: ChannelId| {
            if load[ch] + f.demand > cap {
                S::infinity()
            } else {
                problem.hop_cost(i, ch) + mu_link[ch] * f.demand
            }
        };
        let min_step = e_min * f.demand + problem.xi;
        let found = least_cost(g, f.src, f.dst, &to_dst[&f.dst], min_step, &cost, true)
            .filter(|p| p.len() <= problem.hop_limit[i]);
        if let Some(p) = found {
            out[i] = p;
        }
        for &c in &out[i] {
            load[c] = load[c] + f.demand;
        }
    }
    out
}

/// Lagrangian-relaxation routing with subgradient multiplier updates.
pub fn lagrangian_route<S: Scalar>(problem: &RoutingProblem<'_, S>, ts: &TurnSet) -> Result<RoutingSolution<S>> {
    let topo = problem.topo;
    let g = StateGraph::new(topo, ts);
    let nf = problem.flows.len();
    let nch = topo.channel_count();
    let cap = problem.link_capacity;

    let mut dsts: Vec<usize> = problem.flows.iter().map(|f| f.dst).collect();
    dsts.sort_unstable();
    dsts.dedup();
    let to_dst: HashMap<usize, Vec<u16>> = dsts.iter().map(|&d| (d, bfs_hops(topo, d))).collect();

    let mut srcs: Vec<usize> = problem.flows.iter().map(|f| f.src).collect();
    srcs.sort_unstable();
    srcs.dedup();
    let legal: HashMap<usize, Vec<u16>> = srcs
        .iter()
        .zip(map_indices(srcs.len(), |i| legal_hops_from(topo, ts, srcs[i])))
        .map(|(&s, h)| (s, h))
        .collect();
    let mut upfront = vec![false; nf];
    for (i, f) in problem.flows.iter().enumerate() {
        let h = legal[&f.src][f.dst];
        if h == UNREACHABLE {
            return Err(Error::Unreachable { from: f.src, to: f.dst });
        }
        upfront[i] = usize::from(h) > problem.hop_limit[i];
    }

    let e_min = problem
        .channel_energy
        .iter()
        .copied()
        .min_by(|a, b| total_cmp(*a, *b))
        .unwrap_or_else(S::zero);
    let e_med = median(problem.channel_energy.clone());
    let max_demand = problem
        .flows
        .iter()
        .map(|f| f.demand)
        .max_by(|a, b| total_cmp(*a, *b))
        .unwrap_or_else(S::one);
    let med_demand = median(problem.flows.iter().map(|f| f.demand).collect());
    // steps in the units of the costs they scale
    let theta_link = e_med / max_demand;
    let theta_flow = e_med * med_demand + problem.xi;

    let mut mu_link = vec![S::zero(); nch];
    let mut mu_flow = vec![S::zero(); nf];
    let mut best: Option<(Vec<Vec<ChannelId>>, Evaluation<S>)> = None;
    let mut dual_history = Vec::new();
    let mut best_dual = S::neg_infinity();
    let mut stall = 0;
    let mut iterations = 0;
    let eps = S::lit(1e-12);

    for k in 1..=problem.max_iterations.max(1) {
        iterations = k;
        let routed: Vec<(Vec<ChannelId>, S)> = map_indices(nf, |i| {
            let f = &problem.flows[i];
            let cost = |ch: ChannelId| {
                problem.channel_energy[ch] * f.demand + problem.xi + mu_link[ch] * f.demand + mu_flow[i]
            };
            let min_step = e_min * f.demand + problem.xi + mu_flow[i];
            let hops = &to_dst[&f.dst];
            let mut chans =
                least_cost(&g, f.src, f.dst, hops, min_step, &cost, false).expect("legal reachability was checked");
            if !is_simple(&g.nodes_of(f.src, &chans)) {
                if let Some(c) = least_cost(&g, f.src, f.dst, hops, min_step, &cost, true) {
                    chans = c;
                }
            }
            let lagr = chans.iter().map(|&c| cost(c)).sum::<S>();
            (chans, lagr)
        });
        // zero multipliers are skipped so unbounded limits do not yield NaN
        let dual = routed.iter().map(|r| r.1).sum::<S>()
            - mu_link.iter().filter(|m| **m > S::zero()).map(|&m| m * cap).sum::<S>()
            - mu_flow
                .iter()
                .zip(&problem.hop_limit)
                .filter(|(m, _)| **m > S::zero())
                .map(|(&m, &lc)| m * S::from_usize_lossy(lc))
                .sum::<S>();
        if dual > best_dual {
            best_dual = dual;
        }
        dual_history.push(best_dual);

        let chans: Vec<Vec<ChannelId>> = routed.into_iter().map(|r| r.0).collect();
        let ev = evaluate(problem, &chans, &upfront);
        let load = ev.load.clone();
        let lens: Vec<usize> = chans.iter().map(Vec::len).collect();
        let mut candidates = Vec::with_capacity(2);
        if ev.capacity_ok.iter().any(|ok| !ok) {
            let repaired = repair(problem, &g, &to_dst, e_min, &mu_link, &chans, &ev);
            let rev = evaluate(problem, &repaired, &upfront);
            candidates.push((repaired, rev));
        }
        candidates.push((chans, ev));
        let mut better = false;
        for (c, e) in candidates {
            let wins = match &best {
                None => true,
                Some((_, b)) => {
                    e.success > b.success
                        || (e.success == b.success && e.objective < b.objective - eps * b.objective.abs())
                }
            };
            if wins {
                best = Some((c, e));
                better = true;
            }
        }
        if better {
            stall = 0;
        } else {
            stall += 1;
            if stall >= problem.stall_iterations {
                break;
            }
        }

        let step = S::one() / S::from_usize_lossy(k);
        let mut changed = false;
        for c in 0..nch {
            let next = (mu_link[c] + step * theta_link * (load[c] - cap)).max(S::zero());
            changed |= next != mu_link[c];
            mu_link[c] = next;
        }
        for i in 0..nf {
            if upfront[i] {
                continue;
            }
            let gsub = S::from_usize_lossy(lens[i]) - S::from_usize_lossy(problem.hop_limit[i]);
            let next = (mu_flow[i] + step * theta_flow * gsub).max(S::zero());
            changed |= next != mu_flow[i];
            mu_flow[i] = next;
        }
        if !changed {
            // zero subgradient: the relaxed optimum is primal feasible
            break;
        }
    }

    let (chans, ev) = best.expect("at least one iteration ran");
    Ok(RoutingSolution {
        paths: chans
            .iter()
            .zip(&problem.flows)
            .map(|(c, f)| g.nodes_of(f.src, c))
            .collect(),
        hop_ok: ev.hop_ok,
        capacity_ok: ev.capacity_ok,
        infeasible_upfront: upfront,
        success: ev.success,
        objective: ev.objective,
        channel_load: ev.load,
        mu_link,
        mu_flow,
        dual_history,
        iterations,
    })
}

/// Exact optimum of a small routing instance.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution<S> {
    pub paths: Vec<Vec<usize>>,
    pub objective: S,
}

pub const ORACLE_MAX_NODES: usize = 10;
pub const ORACLE_MAX_FLOWS: usize = 4;

/// Exhaustive search over permitted simple paths; `Ok(None)` when no joint
/// assignment meets every hop limit and channel capacity.
pub fn ilp_oracle<S: Scalar>(problem: &RoutingProblem<'_, S>, ts: &TurnSet) -> Result<Option<OracleSolution<S>>> {
    let topo = problem.topo;
    if topo.node_count() > ORACLE_MAX_NODES || problem.flows.len() > ORACLE_MAX_FLOWS {
        return Err(invalid(format!(
            "oracle handles at most {ORACLE_MAX_NODES} nodes and {ORACLE_MAX_FLOWS} flows"
        )));
    }
    let g = StateGraph::new(topo, ts);
    let cap = problem.link_capacity;
    let mut options: Vec<Vec<(S, Vec<ChannelId>)>> = Vec::new();
    for (i, f) in problem.flows.iter().enumerate() {
        let mut found = Vec::new();
        let mut stack: Vec<ChannelId> = Vec::new();
        let mut on = vec![false; topo.node_count()];
        on[f.src] = true;
        enumerate_paths(
            &g,
            f.dst,
            problem.hop_limit[i],
            &mut stack,
            &mut on,
            None,
            &mut |p| {
                let c = p.iter().map(|&c| problem.hop_cost(i, c)).sum::<S>();
                if f.demand <= cap {
                    found.push((c, p.to_vec()));
                }
            },
            f.src,
        );
        found.sort_by(|a, b| total_cmp(a.0, b.0).then(a.1.cmp(&b.1)));
        if found.is_empty() {
            return Ok(None);
        }
        options.push(found);
    }
    let suffix_min: Vec<S> = {
        let mut v = vec![S::zero(); options.len() + 1];
        for i in (0..options.len()).rev() {
            v[i] = v[i + 1] + options[i][0].0;
        }
        v
    };
    let mut load = vec![S::zero(); topo.channel_count()];
    let mut choice = vec![0usize; options.len()];
    let mut best: Option<(S, Vec<usize>)> = None;
    branch(
        problem,
        &options,
        &suffix_min,
        0,
        S::zero(),
        &mut load,
        &mut choice,
        &mut best,
    );
    Ok(best.map(|(obj, pick)| OracleSolution {
        paths: pick
            .iter()
            .enumerate()
            .map(|(i, &k)| g.nodes_of(problem.flows[i].src, &options[i][k].1))
            .collect(),
        objective: obj,
    }))
}

#[allow(clippy::too_many_arguments)]
fn enumerate_paths(
    g: &StateGraph<'_>,
    dst: usize,
    limit: usize,
    stack: &mut Vec<ChannelId>,
    on: &mut [bool],
    last: Option<ChannelId>,
    emit: &mut dyn FnMut(&[ChannelId]),
    src: usize,
) {
    if stack.len() >= limit {
        return;
    }
    let next: Vec<(ChannelId, usize)> = match last {
        None => g.starts(src).collect(),
        Some(ch) => g.successors(ch).collect(),
    };
    for (ch, w) in next {
        if on[w] {
            continue;
        }
        stack.push(ch);
        if w == dst {
            emit(stack);
        } else {
            on[w] = true;
            enumerate_paths(g, dst, limit, stack, on, Some(ch), emit, src);
            on[w] = false;
        }
        stack.pop();
    }
}

#[allow(clippy::too_many_arguments)]
fn branch<S: Scalar>(
    problem: &RoutingProblem<'_, S>,
    options: &[Vec<(S, Vec<ChannelId>)>],
    suffix_min: &[S],
    i: usize,
    acc: S,
    load: &mut [S],
    choice: &mut [usize],
    best: &mut Option<(S, Vec<usize>)>,
) {
    if let Some((b, _)) = best {
        if acc + suffix_min[i] >= *b {
            return;
        }
    }
    if i == options.len() {
        *best = Some((acc, choice.to_vec()));
        return;
    }
    let d = problem.flows[i].demand;
    for (k, (c, chans)) in options[i].iter().enumerate() {
        if chans.iter().any(|&ch| load[ch] + d > problem.link_capacity) {
            continue;
        }
        for &ch in chans {
            load[ch] = load[ch] + d;
        }
        choice[i] = k;
        branch(problem, options, suffix_min, i + 1, acc + *c, load, choice, best);
        for &ch in chans {
            load[ch] = load[ch] - d;
        }
    }
}

/// Independent re-check of a routing solution.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport<S> {
    /// Path is simple, starts at the source, ends at the sink, follows links.
    pub path_ok: Vec<bool>,
    pub turns_ok: Vec<bool>,
    pub hop_ok: Vec<bool>,
    pub capacity_ok: Vec<bool>,
    pub success: S,
    pub cdg_acyclic: bool,
    pub issues: Vec<String>,
}

impl<S> ValidationReport<S> {
    pub fn all_valid(&self) -> bool {
        self.path_ok.iter().all(|&x| x) && self.turns_ok.iter().all(|&x| x) && self.cdg_acyclic
    }
}

pub fn validate_solution<S: Scalar>(
    problem: &RoutingProblem<'_, S>,
    ts: &TurnSet,
    paths: &[Vec<usize>],
) -> ValidationReport<S> {
    let topo = problem.topo;
    let nf = problem.flows.len();
    let mut issues = Vec::new();
    let mut path_ok = vec![true; nf];
    let mut turns_ok = vec![true; nf];
    let mut load = vec![S::zero(); topo.channel_count()];
    if paths.len() != nf {
        issues.push(format!("{} paths for {nf} flows", paths.len()));
    }
    for (i, f) in problem.flows.iter().enumerate() {
        let Some(p) = paths.get(i) else {
            path_ok[i] = false;
            turns_ok[i] = false;
            continue;
        };
        if p.first() != Some(&f.src) || p.last() != Some(&f.dst) || p.len() < 2 {
            path_ok[i] = false;
            issues.push(format!("flow {i}: path does not join {} to {}", f.src, f.dst));
        }
        if !is_simple(p) {
            path_ok[i] = false;
            issues.push(format!("flow {i}: path revisits a node"));
        }
        for w in p.windows(2) {
            match topo.channel(w[0], w[1]) {
                Some(ch) => load[ch] = load[ch] + f.demand,
                None => {
                    path_ok[i] = false;
                    issues.push(format!("flow {i}: no link {}-{}", w[0], w[1]));
                }
            }
        }
        for w in p.windows(3) {
            if !ts.permits(topo, w[0], w[1], w[2]) {
                turns_ok[i] = false;
                issues.push(format!("flow {i}: prohibited turn {}-{}-{}", w[0], w[1], w[2]));
            }
        }
    }
    let cap = problem.link_capacity;
    let hop_ok: Vec<bool> = (0..nf)
        .map(|i| {
            paths
                .get(i)
                .is_some_and(|p| p.len().saturating_sub(1) <= problem.hop_limit[i])
        })
        .collect();
    let capacity_ok: Vec<bool> = (0..nf)
        .map(|i| {
            paths.get(i).is_some_and(|p| {
                p.windows(2)
                    .all(|w| topo.channel(w[0], w[1]).is_none_or(|ch| load[ch] <= cap))
            })
        })
        .collect();
    let ok = (0..nf)
        .filter(|&i| path_ok[i] && turns_ok[i] && hop_ok[i] && capacity_ok[i])
        .count();
    let success = if nf == 0 {
        S::lit(100.0)
    } else {
        S::lit(100.0) * S::from_usize_lossy(ok) / S::from_usize_lossy(nf)
    };
    ValidationReport {
        path_ok,
        turns_ok,
        hop_ok,
        capacity_ok,
        success,
        cdg_acyclic: paths_cdg_acyclic(topo, paths),
        issues,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, Topology};

    fn ring4() -> Topology {
        // the 2x2 mesh is the 4-cycle 0-1-3-2
        let t = build_mesh(2).unwrap();
        assert_eq!(t.link_count(), 4);
        t
    }

    #[test]
    fn tree_needs_no_prohibition() {
        let mut t = Topology::full_grid(3).unwrap();
        for (a, b) in [(0, 1), (1, 2), (1, 4), (4, 7), (3, 4), (4, 5), (6, 7), (7, 8)] {
            t.add_link(a, b).unwrap();
        }
        let ts = turn_prohibition(&t).unwrap();
        assert_eq!(ts.prohibited_count(), 0);
        assert!(turnset_cdg_acyclic(&t, &ts));
    }

    #[test]
    fn four_cycle_breaks_at_one_node() {
        let t = ring4();
        assert!(!turnset_cdg_acyclic(&t, &TurnSet::permissive(&t)));
        let ts = turn_prohibition(&t).unwrap();
        let turns = ts.prohibited_turns(&t);
        // one turn in each rotational direction, both at the same pivot
        assert_eq!(turns.len(), 2);
        assert_eq!(turns[0].1, turns[1].1);
        assert!(turnset_cdg_acyclic(&t, &ts));
        assert_eq!(legal_reachability(&t, &ts), 1.0);
    }

    #[test]
    fn mesh_turns_are_sound() {
        let t = build_mesh(6).unwrap();
        let ts = turn_prohibition(&t).unwrap();
        assert!(turnset_cdg_acyclic(&t, &ts));
        assert_eq!(legal_reachability(&t, &ts), 1.0);
        assert!(ts.prohibited_fraction() <= 1.0 / 3.0);
    }

    #[test]
    fn link_cost_arithmetic() {
        let c: f64 = flow_link_cost(1e-9, 2e-9, 100.0, 0.0, 0.0, 0.0);
        assert!((c - 3e-7).abs() < 1e-20);
        assert_eq!(flow_link_cost(0.0, 0.0, 5.0, 1.0, 2.0, 3.0), 14.0);
    }

    #[test]
    fn single_link_flow() {
        let t = build_mesh(2).unwrap();
        let ts = turn_prohibition(&t).unwrap();
        let p = RoutingProblem::new(&t, vec![Flow::new(0, 1, 10.0f64)], &RoutingParams::default()).unwrap();
        let s = lagrangian_route(&p, &ts).unwrap();
        assert_eq!(s.paths, vec![vec![0, 1]]);
        assert_eq!(s.success, 100.0);
    }

    #[test]
    fn route_table_prefers_explicit() {
        let t = build_mesh(3).unwrap();
        let ts = turn_prohibition(&t).unwrap();
        let rt = RouteTable::from_paths([vec![0, 3, 4]]).with_fallback(&t, &ts);
        assert_eq!(rt.path(0, 4).unwrap(), vec![0, 3, 4]);
        let p = rt.path(8, 0).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(rt.path(2, 2).unwrap(), vec![2]);
    }
}
