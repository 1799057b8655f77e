//! Size-capped Louvain community detection and hub classification.
//!
//! Edge weights are `1 / length`, so short links bind nodes more strongly.
//! Moves and merges that would grow a community beyond the cap are skipped.

use std::collections::BTreeMap;

use crate::grid::Topology;
use crate::num::{total_cmp, Scalar};

/// Node-to-community assignment with communities numbered by their
/// smallest member.
#[derive(Clone, Debug, PartialEq)]
pub struct CommunityPartition<S> {
    pub assign: Vec<usize>,
    pub communities: Vec<Vec<usize>>,
    pub modularity: S,
    pub max_size: usize,
}

impl<S: Scalar> CommunityPartition<S> {
    /// Builds a partition from any labelling; labels are renumbered.
    pub fn from_labels(topo: &Topology, labels: &[usize], max_size: usize) -> Self {
        let assign = canonical(labels);
        let count = assign.iter().max().map_or(0, |&c| c + 1);
        let mut communities = vec![Vec::new(); count];
        for (u, &c) in assign.iter().enumerate() {
            communities[c].push(u);
        }
        let modularity = modularity(topo, &assign);
        Self {
            assign,
            communities,
            modularity,
            max_size,
        }
    }

    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    pub fn community_of(&self, u: usize) -> usize {
        self.assign[u]
    }

    pub fn largest(&self) -> usize {
        self.communities.iter().map(Vec::len).max().unwrap_or(0)
    }
}

fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn link_weight<S: Scalar>(length: u32) -> S {
    S::one() / S::lit(f64::from(length))
}

/// Weighted modularity of `assign` with weights `1 / length`.
pub fn modularity<S: Scalar>(topo: &Topology, assign: &[usize]) -> S {
    let count = assign.iter().max().map_or(0, |&c| c + 1);
    let mut inside = vec![S::zero(); count];
    let mut total = vec![S::zero(); count];
    let mut m = S::zero();
    for l in topo.links() {
        let w = link_weight::<S>(l.length);
        m = m + w;
        let (cu, cv) = (assign[l.u], assign[l.v]);
        total[cu] = total[cu] + w;
        total[cv] = total[cv] + w;
        if cu == cv {
            inside[cu] = inside[cu] + w + w;
        }
    }
    if m == S::zero() {
        return S::zero();
    }
    let two_m = m + m;
    inside
        .iter()
        .zip(&total)
        .map(|(&a, &t)| a / two_m - (t / two_m) * (t / two_m))
        .sum()
}

/// Weighted graph of the current aggregation level. `adj` excludes self
/// loops, which are kept in `self_w` (counted once per edge).
struct Level<S> {
    adj: Vec<Vec<(usize, S)>>,
    self_w: Vec<S>,
    size: Vec<usize>,
}

impl<S: Scalar> Level<S> {
    fn strength(&self, u: usize) -> S {
        self.adj[u].iter().map(|&(_, w)| w).sum::<S>() + self.self_w[u] + self.self_w[u]
    }
}

/// One local-moving pass sequence; returns the community label per node
/// and whether any node moved.
fn local_moves<S: Scalar>(g: &Level<S>, m: S, cap: usize) -> (Vec<usize>, bool) {
    let n = g.adj.len();
    let mut comm: Vec<usize> = (0..n).collect();
    let strength: Vec<S> = (0..n).map(|u| g.strength(u)).collect();
    let mut tot = strength.clone();
    let mut csize = g.size.clone();
    let two_m = m + m;
    let mut moved_any = false;
    let mut neigh_w: Vec<S> = vec![S::zero(); n];
    let mut touched: Vec<usize> = Vec::new();
    let eps = S::lit(1e-12);
    loop {
        let mut moved = false;
        for u in 0..n {
            let own = comm[u];
            touched.clear();
            for &(v, w) in &g.adj[u] {
                let c = comm[v];
                if neigh_w[c] == S::zero() {
                    touched.push(c);
                }
                neigh_w[c] = neigh_w[c] + w;
            }
            tot[own] = tot[own] - strength[u];
            csize[own] -= g.size[u];
            // gain of inserting u into c, up to a constant shared by all c
            let gain = |c: usize, kin: S| kin - tot[c] * strength[u] / two_m;
            let mut best = own;
            let mut best_gain = gain(own, neigh_w[own]);
            touched.sort_unstable();
            for &c in &touched {
                if c == own || csize[c] + g.size[u] > cap {
                    continue;
                }
                let gc = gain(c, neigh_w[c]);
                if gc > best_gain + eps {
                    best = c;
                    best_gain = gc;
                }
            }
            tot[best] = tot[best] + strength[u];
            csize[best] += g.size[u];
            if best != own {
                comm[u] = best;
                moved = true;
                moved_any = true;
            }
            for &c in &touched {
                neigh_w[c] = S::zero();
            }
            neigh_w[own] = S::zero();
        }
        if !moved {
            break;
        }
    }
    (comm, moved_any)
}

fn aggregate<S: Scalar>(g: &Level<S>, comm: &[usize]) -> Level<S> {
    let c = comm.iter().max().map_or(0, |&x| x + 1);
    let mut maps: Vec<BTreeMap<usize, S>> = vec![BTreeMap::new(); c];
    let mut self_w = vec![S::zero(); c];
    let mut size = vec![0usize; c];
    for u in 0..g.adj.len() {
        let cu = comm[u];
        size[cu] += g.size[u];
        self_w[cu] = self_w[cu] + g.self_w[u];
        for &(v, w) in &g.adj[u] {
            let cv = comm[v];
            if cu == cv {
                // each internal edge is seen from both ends
                if u < v {
                    self_w[cu] = self_w[cu] + w;
                }
            } else {
                let e = maps[cu].entry(cv).or_insert_with(S::zero);
                *e = *e + w;
            }
        }
    }
    Level {
        adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
        self_w,
        size,
    }
}

/// Louvain with a community size cap `max_size`; sweeps nodes in ascending
/// id order, so the result is deterministic.
pub fn detect_communities<S: Scalar>(topo: &Topology, max_size: usize) -> CommunityPartition<S> {
    let n = topo.node_count();
    let cap = max_size.max(1);
    let mut adj: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
    let mut m = S::zero();
    for l in topo.links() {
        let w = link_weight::<S>(l.length);
        adj[l.u].push((l.v, w));
        adj[l.v].push((l.u, w));
        m = m + w;
    }
    let mut level = Level {
        adj,
        self_w: vec![S::zero(); n],
        size: vec![1; n],
    };
    let mut labels: Vec<usize> = (0..n).collect();
    if m > S::zero() {
        loop {
            let (comm, moved) = local_moves(&level, m, cap);
            if !moved {
                break;
            }
            let comm = canonical(&comm);
            for l in labels.iter_mut() {
                *l = comm[*l];
            }
            level = aggregate(&level, &comm);
        }
    }
    CommunityPartition::from_labels(topo, &labels, max_size)
}

/// `1 - sum_x (kappa_x / degree)^2` where `kappa_x` counts links from `u`
/// into community `x`. Isolated nodes get 0.
pub fn participation_index<S: Scalar>(topo: &Topology, assign: &[usize], u: usize) -> S {
    let deg = topo.degree(u);
    if deg == 0 {
        return S::zero();
    }
    let mut kappa: BTreeMap<usize, usize> = BTreeMap::new();
    for &(v, _) in topo.neighbors(u) {
        *kappa.entry(assign[v]).or_insert(0) += 1;
    }
    let d = S::from_usize_lossy(deg);
    S::one()
        - kappa
            .values()
            .map(|&k| {
                let r = S::from_usize_lossy(k) / d;
                r * r
            })
            .sum::<S>()
}

/// Participation threshold below which a high-degree node is a provincial hub.
pub const HUB_PARTICIPATION: f64 = 0.3;
/// Hubs taken per community when no node passes the hub test.
pub const FALLBACK_HUBS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct HubSet<S> {
    /// Hub nodes per community, by decreasing degree then increasing id.
    pub hubs: Vec<Vec<usize>>,
    pub participation: Vec<S>,
    pub degree: Vec<usize>,
}

impl<S> HubSet<S> {
    /// Largest-degree hub of community `c` (first in order).
    pub fn primary(&self, c: usize) -> usize {
        self.hubs[c][0]
    }
}

/// Provincial hubs: participation below 0.3 and degree at least one
/// standard deviation above the network mean. Communities with none fall
/// back to their three highest-degree nodes.
pub fn classify_hubs<S: Scalar>(topo: &Topology, part: &CommunityPartition<S>) -> HubSet<S> {
    let n = topo.node_count();
    let degree = topo.degrees();
    let participation: Vec<S> = (0..n).map(|u| participation_index(topo, &part.assign, u)).collect();
    let nf = S::from_usize_lossy(n.max(1));
    let mean = degree.iter().map(|&d| S::from_usize_lossy(d)).sum::<S>() / nf;
    let var = degree
        .iter()
        .map(|&d| {
            let x = S::from_usize_lossy(d) - mean;
            x * x
        })
        .sum::<S>()
        / nf;
    let threshold = mean + var.sqrt();
    let p_max = S::lit(HUB_PARTICIPATION);
    let by_degree = |a: &usize, b: &usize| degree[*b].cmp(&degree[*a]).then(a.cmp(b));
    let hubs = part
        .communities
        .iter()
        .map(|members| {
            let mut h: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&u| total_cmp(participation[u], p_max).is_lt() && S::from_usize_lossy(degree[u]) >= threshold)
                .collect();
            if h.is_empty() {
                h = members.clone();
                h.sort_by(by_degree);
                h.truncate(FALLBACK_HUBS);
            }
            h.sort_by(by_degree);
            h
        })
        .collect();
    HubSet {
        hubs,
        participation,
        degree,
    }
}
