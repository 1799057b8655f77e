//! Chip-grid topology representation, regular baselines and hop metrics.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::num::Scalar;

/// Physical spacing between adjacent grid rows/columns.
pub const GRID_PITCH_MM: f64 = 0.1;

/// Wire lengths in comparison tables are reported in units of five grid
/// pitches (0.5 mm); a 32x32 mesh has 1984 unit links and reports 397.
pub const REPORT_LENGTH_PITCHES: f64 = 5.0;

/// Position of a switch on the `t x t` chip grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub row: u32,
    pub col: u32,
}

impl Coord {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.row, self.col)
    }
}

/// Manhattan distance between two grid coordinates.
pub fn manhattan(a: Coord, b: Coord) -> u32 {
    a.row.abs_diff(b.row) + a.col.abs_diff(b.col)
}

/// An undirected physical link. `u < v` always holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub u: usize,
    pub v: usize,
    pub length: u32,
}

impl Link {
    /// The endpoint opposite `x`.
    pub fn other(&self, x: usize) -> usize {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Directed channel id: link `i` traversed `u -> v` is `2i`, `v -> u` is `2i + 1`.
pub type ChannelId = usize;

/// Switches placed on a `t x t` grid plus an undirected link set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    t: usize,
    coords: Vec<Coord>,
    // (neighbor, link index), in insertion order
    adj: Vec<Vec<(usize, usize)>>,
    links: Vec<Link>,
}

impl Topology {
    /// Empty topology with explicit node coordinates.
    pub fn with_coords(t: usize, coords: Vec<Coord>) -> Result<Self> {
        if t == 0 {
            return Err(invalid("grid side must be positive"));
        }
        if coords.len() > t * t {
            return Err(invalid(format!("{} nodes do not fit on a {t}x{t} grid", coords.len())));
        }
        let mut seen = vec![false; t * t];
        for c in &coords {
            let (r, cl) = (c.row as usize, c.col as usize);
            if r >= t || cl >= t {
                return Err(invalid(format!("coordinate {c} outside the {t}x{t} grid")));
            }
            if std::mem::replace(&mut seen[r * t + cl], true) {
                return Err(invalid(format!("coordinate {c} used twice")));
            }
        }
        let n = coords.len();
        Ok(Self {
            t,
            coords,
            adj: vec![Vec::new(); n],
            links: Vec::new(),
        })
    }

    /// Empty topology with one node per grid cell, ids in row-major order.
    pub fn full_grid(t: usize) -> Result<Self> {
        let coords = (0..t)
            .flat_map(|r| (0..t).map(move |c| Coord::new(r as u32, c as u32)))
            .collect();
        Self::with_coords(t, coords)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coord(&self, u: usize) -> Coord {
        self.coords[u]
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn link(&self, idx: usize) -> &Link {
        &self.links[idx]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `(neighbor, link index)` pairs of `u`.
    pub fn neighbors(&self, u: usize) -> &[(usize, usize)] {
        &self.adj[u]
    }

    pub fn distance(&self, u: usize, v: usize) -> u32 {
        manhattan(self.coords[u], self.coords[v])
    }

    pub fn has_link(&self, u: usize, v: usize) -> bool {
        self.link_between(u, v).is_some()
    }

    pub fn link_between(&self, u: usize, v: usize) -> Option<usize> {
        let (a, b) = if self.adj[u].len() <= self.adj[v].len() {
            (u, v)
        } else {
            (v, u)
        };
        self.adj[a].iter().find(|&&(w, _)| w == b).map(|&(_, l)| l)
    }

    /// Directed channel for traversing `from -> to`, if the link exists.
    pub fn channel(&self, from: usize, to: usize) -> Option<ChannelId> {
        self.link_between(from, to)
            .map(|l| if self.links[l].u == from { 2 * l } else { 2 * l + 1 })
    }

    /// `(from, to)` endpoints of a directed channel.
    pub fn channel_ends(&self, ch: ChannelId) -> (usize, usize) {
        let l = &self.links[ch / 2];
        if ch.is_multiple_of(2) {
            (l.u, l.v)
        } else {
            (l.v, l.u)
        }
    }

    pub fn channel_count(&self) -> usize {
        2 * self.links.len()
    }

    /// Adds a link whose length is the Manhattan distance of its endpoints.
    pub fn add_link(&mut self, u: usize, v: usize) -> Result<usize> {
        let n = self.node_count();
        let length = if u < n && v < n { self.distance(u, v) } else { 1 };
        self.add_link_with_length(u, v, length)
    }

    /// Adds a link with an explicit length (wraparound links of a torus are
    /// longer than the Manhattan distance of their endpoints).
    pub fn add_link_with_length(&mut self, u: usize, v: usize, length: u32) -> Result<usize> {
        let n = self.node_count();
        if u >= n || v >= n {
            return Err(Error::InvalidTopology(format!(
                "link {u}-{v} references a missing node"
            )));
        }
        if u == v {
            return Err(Error::InvalidTopology(format!("self-loop at node {u}")));
        }
        if self.has_link(u, v) {
            return Err(Error::InvalidTopology(format!("duplicate link {u}-{v}")));
        }
        if length == 0 {
            return Err(Error::InvalidTopology(format!("link {u}-{v} has zero length")));
        }
        let idx = self.links.len();
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        self.links.push(Link { u: a, v: b, length });
        self.adj[u].push((v, idx));
        self.adj[v].push((u, idx));
        Ok(idx)
    }

    pub fn total_wire_length(&self) -> u64 {
        self.links.iter().map(|l| u64::from(l.length)).sum()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        bfs_hops(self, 0).iter().all(|&h| h != UNREACHABLE)
    }
}

/// 4-neighbour `t x t` mesh with unit-length links.
pub fn build_mesh(t: usize) -> Result<Topology> {
    if t < 2 {
        return Err(invalid(format!("mesh needs t >= 2, got {t}")));
    }
    let mut topo = Topology::full_grid(t)?;
    for r in 0..t {
        for c in 0..t {
            let u = r * t + c;
            if c + 1 < t {
                topo.add_link(u, u + 1)?;
            }
            if r + 1 < t {
                topo.add_link(u, u + t)?;
            }
        }
    }
    Ok(topo)
}

/// Mesh plus one wraparound link per row and per column, each `t - 1` long.
pub fn build_torus(t: usize) -> Result<Topology> {
    if t < 3 {
        return Err(invalid(format!("torus needs t >= 3, got {t}")));
    }
    let mut topo = build_mesh(t)?;
    for r in 0..t {
        topo.add_link_with_length(r * t, r * t + t - 1, (t - 1) as u32)?;
    }
    for c in 0..t {
        topo.add_link_with_length(c, (t - 1) * t + c, (t - 1) as u32)?;
    }
    Ok(topo)
}

pub const UNREACHABLE: u16 = u16::MAX;

/// Unweighted BFS hop counts from `src`.
pub fn bfs_hops(topo: &Topology, src: usize) -> Vec<u16> {
    let mut hops = vec![UNREACHABLE; topo.node_count()];
    let mut queue = VecDeque::new();
    hops[src] = 0;
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        let next = hops[u] + 1;
        for &(v, _) in topo.neighbors(u) {
            if hops[v] == UNREACHABLE {
                hops[v] = next;
                queue.push_back(v);
            }
        }
    }
    hops
}

/// Hop count and, among minimum-hop paths, the minimum total link length from `src`.
pub fn bfs_hops_lengths(topo: &Topology, src: usize) -> (Vec<u16>, Vec<u32>) {
    let n = topo.node_count();
    let mut hops = vec![UNREACHABLE; n];
    let mut lens = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    hops[src] = 0;
    lens[src] = 0;
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        let next = hops[u] + 1;
        let base = lens[u];
        for &(v, l) in topo.neighbors(u) {
            let cand = base + topo.link(l).length;
            if hops[v] == UNREACHABLE {
                hops[v] = next;
                lens[v] = cand;
                queue.push_back(v);
            } else if hops[v] == next && cand < lens[v] {
                lens[v] = cand;
            }
        }
    }
    (hops, lens)
}

/// Dense all-pairs minimum hop table.
#[derive(Clone, Debug)]
pub struct HopTable {
    n: usize,
    hops: Vec<u16>,
}

impl HopTable {
    pub fn get(&self, u: usize, v: usize) -> u16 {
        self.hops[u * self.n + v]
    }

    pub fn row(&self, u: usize) -> &[u16] {
        &self.hops[u * self.n..(u + 1) * self.n]
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn diameter(&self) -> u16 {
        self.hops.iter().copied().max().unwrap_or(0)
    }
}

/// BFS from every source; errors on the first unreachable pair.
pub fn all_pairs_min_hop(topo: &Topology) -> Result<HopTable> {
    let n = topo.node_count();
    let rows = crate::par::map_indices(n, |src| bfs_hops(topo, src));
    let mut hops = Vec::with_capacity(n * n);
    for (src, row) in rows.into_iter().enumerate() {
        if let Some(dst) = row.iter().position(|&h| h == UNREACHABLE) {
            return Err(Error::Unreachable { from: src, to: dst });
        }
        hops.extend_from_slice(&row);
    }
    Ok(HopTable { n, hops })
}

/// `L(u, v)`: minimum total length among minimum-hop `u -> v` paths.
pub fn min_hop_path_length(topo: &Topology, u: usize, v: usize) -> Result<u64> {
    let (hops, lens) = bfs_hops_lengths(topo, u);
    if hops[v] == UNREACHABLE {
        return Err(Error::Unreachable { from: u, to: v });
    }
    Ok(u64::from(lens[v]))
}

/// Topology-level comparison metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct TopologyMetrics<S> {
    /// Mean minimum hop count over ordered distinct node pairs.
    pub avg_hop: S,
    /// Sum of link lengths in grid pitches.
    pub total_wire_length: u64,
    pub link_count: usize,
    /// Sum over ordered distinct pairs of `L(u, v) * H(u, v)`.
    pub rough_comm_cost: u64,
}

impl<S: Scalar> TopologyMetrics<S> {
    /// Wire length in report units of [`REPORT_LENGTH_PITCHES`] pitches.
    pub fn wire_length_report_units(&self) -> S {
        S::from_u64(self.total_wire_length).unwrap() / S::lit(REPORT_LENGTH_PITCHES)
    }
}

/// Sum over ordered distinct pairs of hop count times min-hop path length.
pub fn rough_comm_cost(topo: &Topology) -> Result<u64> {
    Ok(pair_sums(topo)?.1)
}

/// Returns (sum of hops, sum of hops * lengths) over ordered pairs.
fn pair_sums(topo: &Topology) -> Result<(u64, u64)> {
    let n = topo.node_count();
    let partial = crate::par::map_indices(n, |src| {
        let (hops, lens) = bfs_hops_lengths(topo, src);
        let mut h_sum = 0u64;
        let mut c_sum = 0u64;
        for (dst, (&h, &l)) in hops.iter().zip(&lens).enumerate() {
            if h == UNREACHABLE {
                return Err(Error::Unreachable { from: src, to: dst });
            }
            h_sum += u64::from(h);
            c_sum += u64::from(h) * u64::from(l);
        }
        Ok((h_sum, c_sum))
    });
    let mut total = (0u64, 0u64);
    for r in partial {
        let (h, c) = r?;
        total.0 += h;
        total.1 += c;
    }
    Ok(total)
}

pub fn metrics<S: Scalar>(topo: &Topology) -> Result<TopologyMetrics<S>> {
    let n = topo.node_count();
    let (h_sum, c_sum) = pair_sums(topo)?;
    let pairs = n * n.saturating_sub(1);
    let avg_hop = if pairs == 0 {
        S::zero()
    } else {
        S::from_u64(h_sum).unwrap() / S::from_usize_lossy(pairs)
    };
    Ok(TopologyMetrics {
        avg_hop,
        total_wire_length: topo.total_wire_length(),
        link_count: topo.link_count(),
        rough_comm_cost: c_sum,
    })
}
