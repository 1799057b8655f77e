//! Deterministic growth of a limited scale-free, power-law-length topology.

use std::cmp::Ordering;

use crate::error::{invalid, Error, Result};
use crate::grid::{Coord, Topology};
use crate::num::{total_cmp, Scalar};

use super::powerlaw::{compute_ma, degree_frequencies, link_length_distribution};

/// Inputs of the growth procedure.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthParams<S> {
    /// Target node count; must be a perfect square `t * t`.
    pub n: usize,
    /// User maximal switch size.
    pub m: usize,
    /// User maximal link length in grid pitches.
    pub l_a: usize,
    /// Links per new node.
    pub k: usize,
    /// Degree exponent.
    pub gamma: S,
    /// Link-length exponent.
    pub beta: S,
    /// Side of the seed mesh placed at the grid centre.
    pub init_side: usize,
}

impl<S: Scalar> GrowthParams<S> {
    pub fn new(n: usize, m: usize, l_a: usize, gamma: S, beta: S) -> Self {
        Self {
            n,
            m,
            l_a,
            k: 2,
            gamma,
            beta,
            init_side: 4,
        }
    }

    /// Grid side `t` with `t * t == n`.
    pub fn side(&self) -> Result<usize> {
        let t = (self.n as f64).sqrt().round() as usize;
        if t * t != self.n {
            return Err(invalid(format!("node count {} is not a perfect square", self.n)));
        }
        Ok(t)
    }

    pub fn validate(&self) -> Result<usize> {
        let t = self.side()?;
        if self.k < 2 {
            return Err(invalid(format!("k must be >= 2, got {}", self.k)));
        }
        if self.m <= 2 * self.k {
            return Err(invalid(format!("m={} must exceed 2k={}", self.m, 2 * self.k)));
        }
        if self.init_side < 2 || self.init_side > t {
            return Err(invalid(format!(
                "seed mesh side {} must lie in [2, {t}]",
                self.init_side
            )));
        }
        if self.l_a == 0 || self.l_a > 2 * (t - 1) {
            return Err(invalid(format!("l_a={} outside [1, {}]", self.l_a, 2 * (t - 1))));
        }
        if !(self.gamma > S::zero()) || !(self.beta > S::zero()) {
            return Err(invalid("exponents gamma and beta must be positive"));
        }
        Ok(t)
    }
}

/// Expected versus current degree counts during growth.
#[derive(Clone, Debug)]
pub struct DegreeTracker<S> {
    k: usize,
    m_a: usize,
    // all per-degree vectors are indexed by degree, sized m_a + 2
    f: Vec<S>,
    freq: Vec<S>,
    count: Vec<usize>,
    score: Vec<S>,
}

impl<S: Scalar> DegreeTracker<S> {
    /// Tracker seeded with the degrees of the initial topology; expected
    /// counts start at `f_i` times the seed node count.
    pub fn new(k: usize, m_a: usize, gamma: S, seed_degrees: &[usize]) -> Result<Self> {
        let fk = degree_frequencies(m_a, k, gamma)?;
        let mut f = vec![S::zero(); m_a + 2];
        f[k..=m_a].copy_from_slice(&fk);
        let kk = S::from_usize_lossy(k);
        let freq = f.iter().map(|&x| x / kk).collect();
        let mut count = vec![0usize; m_a + 2];
        for &d in seed_degrees {
            if d > m_a {
                return Err(invalid(format!("seed node degree {d} exceeds m_a={m_a}")));
            }
            count[d] += 1;
        }
        let seeds = S::from_usize_lossy(seed_degrees.len());
        let score = f.iter().map(|&x| x * seeds).collect();
        Ok(Self {
            k,
            m_a,
            f,
            freq,
            count,
            score,
        })
    }

    pub fn m_a(&self) -> usize {
        self.m_a
    }

    /// Target frequency `f_i`.
    pub fn frequency(&self, i: usize) -> S {
        self.f.get(i).copied().unwrap_or_else(S::zero)
    }

    pub fn count(&self, i: usize) -> usize {
        self.count.get(i).copied().unwrap_or(0)
    }

    /// `d(i) = n[i] - score[i] - freq[i]`.
    pub fn deviation(&self, i: usize) -> S {
        if i >= self.count.len() {
            return S::zero();
        }
        S::from_usize_lossy(self.count[i]) - self.score[i] - self.freq[i]
    }

    /// Change in total absolute deviation if one more link lands on a degree-`i` node.
    pub fn penalty(&self, i: usize) -> S {
        let hi = self.deviation(i + 1);
        let lo = self.deviation(i);
        ((hi + S::one()).abs() + (lo - S::one()).abs()) - (hi.abs() + lo.abs())
    }

    /// Attachable degrees (`k <= i < m_a`, at least one such node) ordered by
    /// increasing penalty, ties towards the smaller degree.
    pub fn ranked_degrees(&self) -> Vec<usize> {
        let mut ds: Vec<usize> = (self.k..self.m_a).filter(|&i| self.count[i] != 0).collect();
        ds.sort_by(|&a, &b| total_cmp(self.penalty(a), self.penalty(b)).then(a.cmp(&b)));
        ds
    }

    pub fn expected_degree(&self) -> Option<usize> {
        self.ranked_degrees().first().copied()
    }

    /// A link was attached to an existing node of degree `old_degree`.
    pub fn record_link(&mut self, old_degree: usize) {
        if old_degree < self.count.len() && self.count[old_degree] > 0 {
            self.count[old_degree] -= 1;
        }
        if old_degree + 1 < self.count.len() {
            self.count[old_degree + 1] += 1;
        }
        for (s, &fr) in self.score.iter_mut().zip(&self.freq) {
            *s = *s + fr;
        }
    }

    /// A new node finished joining with the given degree.
    pub fn record_join(&mut self, degree: usize) {
        if degree < self.count.len() {
            self.count[degree] += 1;
        }
    }
}

/// Expected versus realised link-length shares.
#[derive(Clone, Debug)]
pub struct LengthTracker<S> {
    expected: Vec<S>,
    actual: Vec<usize>,
    total: usize,
}

impl<S: Scalar> LengthTracker<S> {
    pub fn new(beta: S, l_a: usize, t: usize) -> Result<Self> {
        Ok(Self {
            expected: link_length_distribution(beta, l_a, t)?,
            actual: vec![0; 2 * t.max(1)],
            total: 0,
        })
    }

    pub fn expected(&self, l: usize) -> S {
        self.expected.get(l).copied().unwrap_or_else(S::zero)
    }

    pub fn actual_count(&self, l: usize) -> usize {
        self.actual.get(l).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// `DI(l) = P_expected(l) - P_actual(l)`.
    pub fn deficit(&self, l: usize) -> S {
        let actual = if self.total == 0 {
            S::zero()
        } else {
            S::from_usize_lossy(self.actual_count(l)) / S::from_usize_lossy(self.total)
        };
        self.expected(l) - actual
    }

    pub fn record(&mut self, l: usize) {
        if l >= self.actual.len() {
            self.actual.resize(l + 1, 0);
        }
        self.actual[l] += 1;
        self.total += 1;
    }
}

/// Chosen attachment target for one link of a new node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Attachment {
    pub target: usize,
    pub length: u32,
    /// The link exceeds `l_a` because no node within range could take it.
    pub over_length: bool,
}

/// Step-by-step grower; [`grow`] drives it to completion.
#[derive(Clone, Debug)]
pub struct Grower<S> {
    params: GrowthParams<S>,
    t: usize,
    topo: Topology,
    joined: Vec<bool>,
    degrees: DegreeTracker<S>,
    lengths: LengthTracker<S>,
    order: Vec<usize>,
    next: usize,
    over_length_links: usize,
}

impl<S: Scalar> Grower<S> {
    /// Places the seed mesh at the grid centre and prepares the join order.
    pub fn new(params: GrowthParams<S>) -> Result<Self> {
        let t = params.validate()?;
        let m_a = compute_ma(params.m, params.k, params.gamma)?;
        let mut topo = Topology::full_grid(t)?;
        let s = params.init_side;
        let r0 = (t - s) / 2;
        let mut joined = vec![false; t * t];
        let mut lengths = LengthTracker::new(params.beta, params.l_a, t)?;
        for r in r0..r0 + s {
            for c in r0..r0 + s {
                let u = r * t + c;
                joined[u] = true;
                if c + 1 < r0 + s {
                    topo.add_link(u, u + 1)?;
                    lengths.record(1);
                }
                if r + 1 < r0 + s {
                    topo.add_link(u, u + t)?;
                    lengths.record(1);
                }
            }
        }
        let seed_degrees: Vec<usize> = (0..t * t).filter(|&u| joined[u]).map(|u| topo.degree(u)).collect();
        let degrees = DegreeTracker::new(params.k, m_a, params.gamma, &seed_degrees)?;

        // concentric rings around the seed block, row-major within a ring
        let ring = |u: usize| {
            let (r, c) = (u / t, u % t);
            let off = |x: usize| r0.saturating_sub(x).max(x.saturating_sub(r0 + s - 1));
            off(r).max(off(c))
        };
        let mut order: Vec<usize> = (0..t * t).filter(|&u| !joined[u]).collect();
        order.sort_by_key(|&u| (ring(u), u));

        Ok(Self {
            params,
            t,
            topo,
            joined,
            degrees,
            lengths,
            order,
            next: 0,
            over_length_links: 0,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn degree_tracker(&self) -> &DegreeTracker<S> {
        &self.degrees
    }

    pub fn length_tracker(&self) -> &LengthTracker<S> {
        &self.lengths
    }

    pub fn m_a(&self) -> usize {
        self.degrees.m_a()
    }

    /// Nodes still waiting to join, in join order.
    pub fn pending(&self) -> &[usize] {
        &self.order[self.next..]
    }

    pub fn over_length_links(&self) -> usize {
        self.over_length_links
    }

    fn candidate_cmp(&self, a: (S, u32, usize), b: (S, u32, usize)) -> Ordering {
        // larger deficit first, then shorter, then smaller coordinate
        total_cmp(b.0, a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    }

    /// Picks the node the next link of `new_node` attaches to.
    pub fn select_target(&self, new_node: usize) -> Option<Attachment> {
        let t = self.t as isize;
        let l_a = self.params.l_a as isize;
        let (nr, nc) = ((new_node / self.t) as isize, (new_node % self.t) as isize);
        let m_a = self.degrees.m_a();
        for degree in self.degrees.ranked_degrees() {
            let mut best: Option<(S, u32, usize)> = None;
            for dr in -l_a..=l_a {
                let r = nr + dr;
                if r < 0 || r >= t {
                    continue;
                }
                let rem = l_a - dr.abs();
                for c in (nc - rem).max(0)..=(nc + rem).min(t - 1) {
                    let u = (r * t + c) as usize;
                    if !self.joined[u] || self.topo.degree(u) != degree || self.topo.has_link(new_node, u) {
                        continue;
                    }
                    let len = self.topo.distance(new_node, u);
                    let cand = (self.lengths.deficit(len as usize), len, u);
                    if best.is_none_or(|b| self.candidate_cmp(cand, b) == Ordering::Less) {
                        best = Some(cand);
                    }
                }
            }
            if let Some((_, length, target)) = best {
                return Some(Attachment {
                    target,
                    length,
                    over_length: false,
                });
            }
        }
        // nothing legal within l_a: nearest node that can still take a link
        (0..self.topo.node_count())
            .filter(|&u| {
                self.joined[u]
                    && self.topo.degree(u) < m_a
                    && self.topo.degree(u) >= 1
                    && !self.topo.has_link(new_node, u)
            })
            .min_by_key(|&u| (self.topo.distance(new_node, u), u))
            .map(|target| {
                let length = self.topo.distance(new_node, target);
                Attachment {
                    target,
                    length,
                    over_length: length as usize > self.params.l_a,
                }
            })
    }

    /// Adds the link `new_node - target` and updates both trackers.
    pub fn attach(&mut self, new_node: usize, att: Attachment) -> Result<()> {
        let old_degree = self.topo.degree(att.target);
        self.topo.add_link(new_node, att.target)?;
        self.degrees.record_link(old_degree);
        self.lengths.record(att.length as usize);
        if att.over_length {
            self.over_length_links += 1;
        }
        Ok(())
    }

    /// Joins the next pending node with `k` links. Returns the node, or
    /// `None` once every grid position is part of the topology.
    pub fn add_next(&mut self) -> Result<Option<usize>> {
        let Some(&nn) = self.order.get(self.next) else {
            return Ok(None);
        };
        for _ in 0..self.params.k {
            let att = self.select_target(nn).ok_or_else(|| {
                Error::Infeasible(format!(
                    "node {} has no legal attachment target",
                    Coord::new((nn / self.t) as u32, (nn % self.t) as u32)
                ))
            })?;
            self.attach(nn, att)?;
        }
        self.joined[nn] = true;
        self.degrees.record_join(self.topo.degree(nn));
        self.next += 1;
        Ok(Some(nn))
    }

    pub fn run(mut self) -> Result<GrowthOutcome> {
        while self.add_next()?.is_some() {}
        Ok(GrowthOutcome {
            m_a: self.degrees.m_a(),
            over_length_links: self.over_length_links,
            topology: self.topo,
        })
    }
}

/// Finished topology plus growth diagnostics.
#[derive(Clone, Debug)]
pub struct GrowthOutcome {
    pub topology: Topology,
    pub m_a: usize,
    /// Links that had to exceed `l_a` because nothing in range was legal.
    pub over_length_links: usize,
}

/// Grows the full topology for `params`. Pure function of its input.
pub fn grow<S: Scalar>(params: &GrowthParams<S>) -> Result<Topology> {
    Ok(grow_detailed(params)?.topology)
}

pub fn grow_detailed<S: Scalar>(params: &GrowthParams<S>) -> Result<GrowthOutcome> {
    Grower::new(params.clone())?.run()
}
