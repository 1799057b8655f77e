//! Task-to-core mapping.
//!
//! Tasks are first split into groups that match the topology's communities
//! exactly in size, the split is refined by simulated annealing over
//! cross-community swaps, and each group is then placed greedily onto the
//! cores of its community.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::community::{CommunityPartition, HubSet};
use crate::error::{invalid, Error, Result};
use crate::grid::{HopTable, Topology};
use crate::num::{total_cmp, Scalar};

/// Directed flow with a bandwidth demand in MB/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flow<S> {
    pub src: usize,
    pub dst: usize,
    pub demand: S,
}

impl<S> Flow<S> {
    pub fn new(src: usize, dst: usize, demand: S) -> Self {
        Self { src, dst, demand }
    }
}

/// Application task graph; tasks are `0..task_count`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskGraph<S> {
    task_count: usize,
    flows: Vec<Flow<S>>,
}

impl<S: Scalar> TaskGraph<S> {
    pub fn new(task_count: usize, flows: Vec<Flow<S>>) -> Result<Self> {
        for f in &flows {
            if f.src >= task_count || f.dst >= task_count {
                return Err(invalid(format!(
                    "flow {}->{} references a task beyond {task_count}",
                    f.src, f.dst
                )));
            }
            if f.src == f.dst {
                return Err(invalid(format!("flow {}->{} is a self-loop", f.src, f.dst)));
            }
            if !(f.demand > S::zero()) || !f.demand.is_finite() {
                return Err(invalid(format!("flow {}->{} needs a positive demand", f.src, f.dst)));
            }
        }
        Ok(Self { task_count, flows })
    }

    pub fn task_count(&self) -> usize {
        self.task_count
    }

    pub fn flows(&self) -> &[Flow<S>] {
        &self.flows
    }

    /// Total demand into and out of each task.
    pub fn task_demand(&self) -> Vec<S> {
        let mut d = vec![S::zero(); self.task_count];
        for f in &self.flows {
            d[f.src] = d[f.src] + f.demand;
            d[f.dst] = d[f.dst] + f.demand;
        }
        d
    }

    /// Undirected neighbour lists with demands of both directions summed.
    pub fn neighbours(&self) -> Vec<Vec<(usize, S)>> {
        let mut maps: Vec<BTreeMap<usize, S>> = vec![BTreeMap::new(); self.task_count];
        for f in &self.flows {
            for (a, b) in [(f.src, f.dst), (f.dst, f.src)] {
                let e = maps[a].entry(b).or_insert_with(S::zero);
                *e = *e + f.demand;
            }
        }
        maps.into_iter().map(|m| m.into_iter().collect()).collect()
    }
}

/// Pads the task graph with traffic-free spare tasks up to `n` tasks.
pub fn pad_spares<S: Scalar>(tg: &TaskGraph<S>, n: usize) -> Result<TaskGraph<S>> {
    if tg.task_count > n {
        return Err(invalid(format!("{} tasks do not fit on {n} cores", tg.task_count)));
    }
    Ok(TaskGraph {
        task_count: n,
        flows: tg.flows.clone(),
    })
}

/// Annealing schedule for [`sa_refine`].
#[derive(Clone, Debug, PartialEq)]
pub struct SaSchedule<S> {
    /// Initial temperature as a fraction of the starting cost.
    pub t0_factor: S,
    pub cooling: S,
    /// Swap attempts per temperature, per community.
    pub swaps_per_community: usize,
    /// Stop after this many temperatures without a new best.
    pub stall_temperatures: usize,
    pub max_temperatures: usize,
    pub seed: u64,
}

impl<S: Scalar> Default for SaSchedule<S> {
    fn default() -> Self {
        Self {
            t0_factor: S::lit(0.05),
            cooling: S::lit(0.995),
            swaps_per_community: 200,
            stall_temperatures: 50,
            max_temperatures: 3000,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MappingCostParams<S> {
    /// Switch pipeline stages charged per hop.
    pub r: S,
    /// Penalty on inter-community demand; must exceed 1.
    pub phi: S,
    pub sa: SaSchedule<S>,
}

impl<S: Scalar> Default for MappingCostParams<S> {
    fn default() -> Self {
        Self {
            r: S::lit(4.0),
            phi: S::lit(2.0),
            sa: SaSchedule::default(),
        }
    }
}

impl<S: Scalar> MappingCostParams<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > S::one()) {
            return Err(invalid("inter-community penalty phi must exceed 1"));
        }
        if !(self.r >= S::one()) {
            return Err(invalid("stage count r must be at least 1"));
        }
        let sa = &self.sa;
        if !(sa.cooling > S::zero() && sa.cooling < S::one()) || !(sa.t0_factor >= S::zero()) {
            return Err(invalid("annealing needs cooling in (0, 1) and t0_factor >= 0"));
        }
        Ok(())
    }
}

/// Precomputed per-community and per-community-pair distance terms.
#[derive(Clone, Debug)]
pub struct CommunityCosts<S> {
    /// `r * h_x + d_x` over all core pairs of community `x`.
    pub intra: Vec<S>,
    /// `r * h_xy + d_xy` over hub pairs of communities `x` and `y`.
    pub inter: Vec<Vec<S>>,
    pub phi: S,
}

impl<S: Scalar> CommunityCosts<S> {
    pub fn new(
        topo: &Topology,
        hops: &HopTable,
        part: &CommunityPartition<S>,
        hubs: &HubSet<S>,
        params: &MappingCostParams<S>,
    ) -> Self {
        let r = params.r;
        let pair_avg = |a: &[usize], b: &[usize], skip_same: bool| {
            let mut sum = S::zero();
            let mut count = 0usize;
            for &u in a {
                for &v in b {
                    if skip_same && u == v {
                        continue;
                    }
                    let h = S::lit(f64::from(hops.get(u, v)));
                    sum = sum + r * h + S::lit(f64::from(topo.distance(u, v)));
                    count += 1;
                }
            }
            if count == 0 {
                S::zero()
            } else {
                sum / S::from_usize_lossy(count)
            }
        };
        let intra = part.communities.iter().map(|c| pair_avg(c, c, true)).collect();
        let k = part.len();
        let mut inter = vec![vec![S::zero(); k]; k];
        for x in 0..k {
            for y in x + 1..k {
                let v = pair_avg(&hubs.hubs[x], &hubs.hubs[y], false);
                inter[x][y] = v;
                inter[y][x] = v;
            }
        }
        Self {
            intra,
            inter,
            phi: params.phi,
        }
    }

    /// Weight of one unit of demand between communities `x` and `y`.
    pub fn coef(&self, x: usize, y: usize) -> S {
        if x == y {
            self.intra[x]
        } else {
            self.phi * self.inter[x][y]
        }
    }
}

/// Task-to-community assignment; `groups[x]` lists the tasks of community `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub community: Vec<usize>,
}

impl Assignment {
    pub fn groups(&self, communities: usize) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); communities];
        for (t, &c) in self.community.iter().enumerate() {
            g[c].push(t);
        }
        g
    }

    /// Size-exactness against the community sizes.
    pub fn matches<S>(&self, part: &CommunityPartition<S>) -> bool {
        let mut sizes = vec![0usize; part.communities.len()];
        for &c in &self.community {
            if c >= sizes.len() {
                return false;
            }
            sizes[c] += 1;
        }
        sizes.iter().zip(&part.communities).all(|(&s, c)| s == c.len())
    }
}

/// `sum_x intra_x * cr_x + phi * sum_{x<y} inter_xy * cr_xy`.
pub fn assignment_cost<S: Scalar>(tg: &TaskGraph<S>, assign: &Assignment, costs: &CommunityCosts<S>) -> S {
    tg.flows
        .iter()
        .map(|f| f.demand * costs.coef(assign.community[f.src], assign.community[f.dst]))
        .sum()
}

/// Demand crossing community boundaries.
pub fn cut_demand<S: Scalar>(tg: &TaskGraph<S>, assign: &Assignment) -> S {
    tg.flows
        .iter()
        .filter(|f| assign.community[f.src] != assign.community[f.dst])
        .map(|f| f.demand)
        .sum()
}

/// Size-exact split of the padded task graph across communities with small
/// cut demand: greedy graph growing from the heaviest free task, then
/// pairwise-swap refinement until no swap lowers the cut.
pub fn initial_assignment<S: Scalar>(tg: &TaskGraph<S>, part: &CommunityPartition<S>) -> Result<Assignment> {
    let n = tg.task_count;
    let total: usize = part.communities.iter().map(Vec::len).sum();
    if total != n {
        return Err(Error::Infeasible(format!(
            "{n} tasks cannot fill communities totalling {total} cores"
        )));
    }
    let nbrs = tg.neighbours();
    let demand = tg.task_demand();
    let mut by_weight: Vec<usize> = (0..n).collect();
    by_weight.sort_by(|&a, &b| total_cmp(demand[b], demand[a]).then(a.cmp(&b)));

    const FREE: usize = usize::MAX;
    let mut community = vec![FREE; n];
    let mut conn = vec![S::zero(); n];
    let mut heavy = 0;
    for (x, members) in part.communities.iter().enumerate() {
        let mut frontier: Vec<usize> = Vec::new();
        for _ in 0..members.len() {
            // strongest attachment to the group so far, else the heaviest free task
            let pick = frontier
                .iter()
                .enumerate()
                .filter(|(_, &t)| community[t] == FREE)
                .max_by(|(_, &a), (_, &b)| total_cmp(conn[a], conn[b]).then(b.cmp(&a)))
                .map(|(i, &t)| (i, t));
            let t = match pick {
                Some((i, t)) => {
                    frontier.swap_remove(i);
                    t
                }
                None => {
                    while community[by_weight[heavy]] != FREE {
                        heavy += 1;
                    }
                    by_weight[heavy]
                }
            };
            community[t] = x;
            for &(v, d) in &nbrs[t] {
                if community[v] == FREE {
                    if conn[v] == S::zero() {
                        frontier.push(v);
                    }
                    conn[v] = conn[v] + d;
                }
            }
        }
        for &t in &frontier {
            conn[t] = S::zero();
        }
    }
    let mut assign = Assignment { community };
    refine_cut(&nbrs, &mut assign, part.len());
    for _ in 0..10 {
        if !kl_passes(&nbrs, &mut assign, part.len()) {
            break;
        }
        refine_cut(&nbrs, &mut assign, part.len());
    }
    Ok(assign)
}

/// Candidates per side examined for each tentative swap.
const KL_CANDIDATES: usize = 8;

/// One Kernighan-Lin pass over every community pair sharing cut demand.
/// Swaps may lose individually; each pair keeps only its best prefix of
/// swaps, so the cut never grows. Returns whether any pair improved.
fn kl_passes<S: Scalar>(nbrs: &[Vec<(usize, S)>], assign: &mut Assignment, k: usize) -> bool {
    let eps = S::lit(1e-9);
    let mut pairs = std::collections::BTreeSet::new();
    for (t, list) in nbrs.iter().enumerate() {
        for &(v, _) in list {
            let (x, y) = (assign.community[t], assign.community[v]);
            if x < y {
                pairs.insert((x, y));
            }
        }
    }
    let mut improved = false;
    let mut d = vec![S::zero(); nbrs.len()];
    let mut locked = vec![false; nbrs.len()];
    for (x, y) in pairs {
        let groups = assign.groups(k);
        let (gx, gy) = (&groups[x], &groups[y]);
        // d[t]: demand to the other side minus demand to its own side
        for &t in gx.iter().chain(gy) {
            let (own, other) = if assign.community[t] == x { (x, y) } else { (y, x) };
            d[t] = nbrs[t].iter().fold(S::zero(), |acc, &(v, w)| {
                let c = assign.community[v];
                if c == other {
                    acc + w
                } else if c == own {
                    acc - w
                } else {
                    acc
                }
            });
            locked[t] = false;
        }
        let top = |side: &[usize], d: &[S], locked: &[bool]| {
            let mut c: Vec<usize> = side.iter().copied().filter(|&t| !locked[t]).collect();
            c.sort_by(|&a, &b| total_cmp(d[b], d[a]).then(a.cmp(&b)));
            c.truncate(KL_CANDIDATES);
            c
        };
        let weight = |a: usize, b: usize| nbrs[a].iter().find(|&&(v, _)| v == b).map_or(S::zero(), |&(_, w)| w);
        let mut swaps = Vec::new();
        let (mut gain, mut best_gain, mut best_len) = (S::zero(), S::zero(), 0);
        for _ in 0..gx.len().min(gy.len()) {
            let (ca, cb) = (top(gx, &d, &locked), top(gy, &d, &locked));
            let mut pick: Option<(S, usize, usize)> = None;
            for &a in &ca {
                for &b in &cb {
                    let g = d[a] + d[b] - S::lit(2.0) * weight(a, b);
                    if pick.is_none_or(|(pg, _, _)| g > pg) {
                        pick = Some((g, a, b));
                    }
                }
            }
            let Some((g, a, b)) = pick else { break };
            locked[a] = true;
            locked[b] = true;
            for (moved, from) in [(a, x), (b, y)] {
                for &(v, w) in &nbrs[moved] {
                    let c = assign.community[v];
                    if c == from {
                        d[v] = d[v] + S::lit(2.0) * w;
                    } else if c == x || c == y {
                        d[v] = d[v] - S::lit(2.0) * w;
                    }
                }
            }
            // swaps past the best prefix are undone below
            assign.community[a] = y;
            assign.community[b] = x;
            swaps.push((a, b));
            gain = gain + g;
            if gain > best_gain + eps {
                best_gain = gain;
                best_len = swaps.len();
            }
        }
        for &(a, b) in &swaps[best_len..] {
            assign.community[a] = x;
            assign.community[b] = y;
        }
        improved |= best_len > 0;
    }
    improved
}

fn refine_cut<S: Scalar>(nbrs: &[Vec<(usize, S)>], assign: &mut Assignment, k: usize) {
    let n = nbrs.len();
    let eps = S::lit(1e-9);
    let link_to = |t: usize, c: usize, com: &[usize]| {
        nbrs[t]
            .iter()
            .filter(|&&(v, _)| com[v] == c)
            .map(|&(_, d)| d)
            .sum::<S>()
    };
    for _pass in 0..20 {
        let mut groups = assign.groups(k);
        let mut improved = false;
        for a in 0..n {
            let x = assign.community[a];
            let own = link_to(a, x, &assign.community);
            let mut targets: Vec<usize> = nbrs[a].iter().map(|&(v, _)| assign.community[v]).collect();
            targets.sort_unstable();
            targets.dedup();
            let mut best: Option<(S, usize)> = None;
            for &y in targets.iter().filter(|&&y| y != x) {
                let ga = link_to(a, y, &assign.community) - own;
                if !(ga > S::zero()) {
                    continue;
                }
                for &b in &groups[y] {
                    let gb = link_to(b, x, &assign.community) - link_to(b, y, &assign.community);
                    let dab = nbrs[a].iter().find(|&&(v, _)| v == b).map_or(S::zero(), |&(_, d)| d);
                    let gain = ga + gb - dab - dab;
                    if gain > eps && best.is_none_or(|(g, _)| gain > g) {
                        best = Some((gain, b));
                    }
                }
            }
            if let Some((_, b)) = best {
                let y = assign.community[b];
                assign.community[a] = y;
                assign.community[b] = x;
                let pos = groups[y].iter().position(|&t| t == b).expect("member");
                groups[y][pos] = a;
                let pos = groups[x].iter().position(|&t| t == a).expect("member");
                groups[x][pos] = b;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
}

/// Change in cost if tasks `a` and `b` (in different communities) swap.
fn swap_delta<S: Scalar>(nbrs: &[Vec<(usize, S)>], com: &[usize], costs: &CommunityCosts<S>, a: usize, b: usize) -> S {
    let (x, y) = (com[a], com[b]);
    let mut delta = S::zero();
    for &(v, d) in &nbrs[a] {
        if v != b {
            delta = delta + d * (costs.coef(y, com[v]) - costs.coef(x, com[v]));
        }
    }
    for &(v, d) in &nbrs[b] {
        if v != a {
            delta = delta + d * (costs.coef(x, com[v]) - costs.coef(y, com[v]));
        }
    }
    delta
}

/// Anneals over random cross-community swaps; returns the best assignment
/// seen, so the cost never exceeds that of `start`.
pub fn sa_refine<S: Scalar>(
    tg: &TaskGraph<S>,
    start: &Assignment,
    costs: &CommunityCosts<S>,
    schedule: &SaSchedule<S>,
) -> Assignment {
    let n = tg.task_count;
    let k = costs.intra.len();
    let initial = assignment_cost(tg, start, costs);
    if n < 2 || k < 2 || !(initial > S::zero()) {
        return start.clone();
    }
    let nbrs = tg.neighbours();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut cur = start.community.clone();
    let mut cur_cost = initial;
    let mut best = cur.clone();
    let mut best_cost = initial;
    let mut temp = schedule.t0_factor * initial;
    let swaps = schedule.swaps_per_community * k;
    let mut stall = 0;
    for _ in 0..schedule.max_temperatures {
        // progress is a new best or a net descent across the temperature, so
        // the hot random-walk phase does not count as stalling
        let entry_cost = cur_cost;
        let mut improved = false;
        for _ in 0..swaps {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if cur[a] == cur[b] {
                continue;
            }
            let delta = swap_delta(&nbrs, &cur, costs, a, b);
            let accept = delta < S::zero()
                || (temp > S::zero() && {
                    let p = (-delta / temp).exp().as_f64();
                    rng.gen::<f64>() < p
                });
            if accept {
                cur.swap(a, b);
                cur_cost = cur_cost + delta;
                if cur_cost < best_cost - S::lit(1e-9) * initial {
                    best_cost = cur_cost;
                    best.copy_from_slice(&cur);
                    improved = true;
                }
            }
        }
        improved |= cur_cost < entry_cost;
        stall = if improved { 0 } else { stall + 1 };
        if stall >= schedule.stall_temperatures {
            break;
        }
        temp = temp * schedule.cooling;
    }
    let best = Assignment { community: best };
    // guard against drift in the incrementally tracked cost
    if assignment_cost(tg, &best, costs) <= initial {
        best
    } else {
        start.clone()
    }
}

/// Task-to-core placement.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement<S> {
    pub core_of: Vec<usize>,
    /// Sum over flows of `(r * hops + manhattan) * demand` at the final cores.
    pub cost: S,
}

/// Placed cost of a task mapping.
pub fn placement_cost<S: Scalar>(topo: &Topology, hops: &HopTable, tg: &TaskGraph<S>, core_of: &[usize], r: S) -> S {
    tg.flows
        .iter()
        .map(|f| {
            let (a, b) = (core_of[f.src], core_of[f.dst]);
            let h = S::lit(f64::from(hops.get(a, b)));
            f.demand * (r * h + S::lit(f64::from(topo.distance(a, b))))
        })
        .sum()
}

/// Greedy detailed placement. The heaviest task sits on its community's
/// largest hub; then the unplaced task most strongly tied to placed tasks
/// takes the free core of its community with the lowest estimated cost.
/// Unplaced partners are estimated by their community's hubs. Traffic-free
/// tasks fill the leftover cores in id order.
pub fn detailed_place<S: Scalar>(
    topo: &Topology,
    hops: &HopTable,
    tg: &TaskGraph<S>,
    assign: &Assignment,
    part: &CommunityPartition<S>,
    hubs: &HubSet<S>,
    params: &MappingCostParams<S>,
) -> Result<Placement<S>> {
    if !assign.matches(part) {
        return Err(Error::Infeasible("assignment does not match community sizes".into()));
    }
    let n = tg.task_count;
    let k = part.len();
    let r = params.r;
    let nbrs = tg.neighbours();
    let demand = tg.task_demand();
    let dist_cost = |a: usize, b: usize| r * S::lit(f64::from(hops.get(a, b))) + S::lit(f64::from(topo.distance(a, b)));
    // hub_avg[core][y]: mean cost from `core` to the hubs of community y
    let hub_avg: Vec<Vec<S>> = (0..topo.node_count())
        .map(|c| {
            hubs.hubs
                .iter()
                .map(|hs| hs.iter().map(|&h| dist_cost(c, h)).sum::<S>() / S::from_usize_lossy(hs.len()))
                .collect()
        })
        .collect();

    const NONE: usize = usize::MAX;
    let mut core_of = vec![NONE; n];
    let mut used = vec![false; topo.node_count()];
    let mut conn = vec![S::zero(); n];
    let mut pending: Vec<usize> = (0..n).filter(|&t| !nbrs[t].is_empty()).collect();
    let place = |t: usize, c: usize, core_of: &mut Vec<usize>, used: &mut Vec<bool>, conn: &mut Vec<S>| {
        core_of[t] = c;
        used[c] = true;
        for &(v, d) in &nbrs[t] {
            conn[v] = conn[v] + d;
        }
    };
    let mut first = true;
    while !pending.is_empty() {
        // most demand to placed tasks, then heaviest overall, then lowest id
        let (i, &t) = pending
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| {
                total_cmp(conn[a], conn[b])
                    .then(total_cmp(demand[a], demand[b]))
                    .then(b.cmp(&a))
            })
            .expect("nonempty");
        pending.swap_remove(i);
        let x = assign.community[t];
        let core = if first {
            first = false;
            hubs.primary(x)
        } else {
            let mut best: Option<(S, usize)> = None;
            for &c in &part.communities[x] {
                if used[c] {
                    continue;
                }
                let cost = nbrs[t]
                    .iter()
                    .map(|&(v, d)| {
                        if core_of[v] != NONE {
                            d * dist_cost(c, core_of[v])
                        } else {
                            d * hub_avg[c][assign.community[v]]
                        }
                    })
                    .sum::<S>();
                if best.is_none_or(|(b, _)| cost < b) {
                    best = Some((cost, c));
                }
            }
            best.map(|(_, c)| c)
                .ok_or_else(|| Error::Infeasible(format!("community {x} has no free core left")))?
        };
        place(t, core, &mut core_of, &mut used, &mut conn);
    }
    for x in 0..k {
        let mut free = part.communities[x].iter().filter(|&&c| !used[c]);
        let rest: Vec<usize> = (0..n)
            .filter(|&t| assign.community[t] == x && core_of[t] == NONE)
            .collect();
        for t in rest {
            let c = *free
                .next()
                .ok_or_else(|| Error::Infeasible(format!("community {x} has no free core left")))?;
            core_of[t] = c;
        }
    }
    let cost = placement_cost(topo, hops, tg, &core_of, r);
    Ok(Placement { core_of, cost })
}

/// Core-level flows; parallel task flows between one core pair are merged.
pub fn core_comm_graph<S: Scalar>(core_of: &[usize], tg: &TaskGraph<S>) -> Vec<Flow<S>> {
    let mut agg: BTreeMap<(usize, usize), S> = BTreeMap::new();
    for f in &tg.flows {
        let key = (core_of[f.src], core_of[f.dst]);
        let e = agg.entry(key).or_insert_with(S::zero);
        *e = *e + f.demand;
    }
    agg.into_iter()
        .filter(|&((a, b), d)| a != b && d > S::zero())
        .map(|((a, b), d)| Flow::new(a, b, d))
        .collect()
}

/// Outcome of the full mapping pipeline.
#[derive(Clone, Debug)]
pub struct MappingSolution<S> {
    pub initial: Assignment,
    pub initial_cost: S,
    pub refined: Assignment,
    pub refined_cost: S,
    pub placement: Placement<S>,
    pub core_flows: Vec<Flow<S>>,
}

/// Pads, assigns, anneals, and places `tg` on `topo`.
pub fn map_tasks<S: Scalar>(
    topo: &Topology,
    hops: &HopTable,
    tg: &TaskGraph<S>,
    part: &CommunityPartition<S>,
    hubs: &HubSet<S>,
    params: &MappingCostParams<S>,
) -> Result<MappingSolution<S>> {
    params.validate()?;
    let padded = pad_spares(tg, topo.node_count())?;
    let costs = CommunityCosts::new(topo, hops, part, hubs, params);
    let initial = initial_assignment(&padded, part)?;
    let initial_cost = assignment_cost(&padded, &initial, &costs);
    let refined = sa_refine(&padded, &initial, &costs, &params.sa);
    let refined_cost = assignment_cost(&padded, &refined, &costs);
    let placement = detailed_place(topo, hops, &padded, &refined, part, hubs, params)?;
    let core_flows = core_comm_graph(&placement.core_of, &padded);
    Ok(MappingSolution {
        initial,
        initial_cost,
        refined,
        refined_cost,
        placement,
        core_flows,
    })
}

/// Clustered synthetic benchmark: tasks in consecutive clusters, each task
/// sending `intra` flows inside its cluster and `inter` flows to random
/// other tasks; demands uniform in `[lo, hi]`. Repeated pairs keep their
/// first demand.
pub fn planted_task_graph<S: Scalar>(
    tasks: usize,
    clusters: usize,
    intra: usize,
    inter: usize,
    demand: (S, S),
    seed: u64,
) -> Result<TaskGraph<S>> {
    if clusters == 0 || tasks < 2 * clusters {
        return Err(invalid("need at least two tasks per cluster"));
    }
    if !(demand.0 > S::zero()) || !(demand.1 >= demand.0) {
        return Err(invalid("demand range must be positive and ordered"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = tasks.div_ceil(clusters);
    let (lo, hi) = (demand.0.as_f64(), demand.1.as_f64());
    let mut agg: BTreeMap<(usize, usize), S> = BTreeMap::new();
    let mut add = |a: usize, b: usize, rng: &mut ChaCha8Rng| {
        let d = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        agg.entry((a, b)).or_insert_with(|| S::lit(d.round().clamp(lo, hi)));
    };
    for a in 0..tasks {
        let c0 = (a / size) * size;
        let c1 = (c0 + size).min(tasks);
        for _ in 0..intra {
            let b = rng.gen_range(c0..c1);
            if b != a {
                add(a, b, &mut rng);
            }
        }
        for _ in 0..inter {
            let b = rng.gen_range(0..tasks);
            if b != a {
                add(a, b, &mut rng);
            }
        }
    }
    let flows = agg.into_iter().map(|((a, b), d)| Flow::new(a, b, d)).collect();
    TaskGraph::new(tasks, flows)
}
