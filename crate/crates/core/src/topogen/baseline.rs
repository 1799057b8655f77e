//! Naive preferential-attachment comparison generator (experimental).
//!
//! Nodes join in the same centre-out order as the deterministic grower, but
//! targets are drawn with probability proportional to degree and neither
//! switch size nor link length is capped.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::grid::Topology;

pub fn preferential_attachment(t: usize, k: usize, init_side: usize, seed: u64) -> Result<Topology> {
    if k == 0 || init_side < 2 || init_side > t || init_side * init_side <= k {
        return Err(invalid("need k >= 1 and a seed mesh larger than k nodes"));
    }
    let mut topo = Topology::full_grid(t)?;
    let r0 = (t - init_side) / 2;
    let mut joined = vec![false; t * t];
    // one entry per link endpoint, so uniform sampling is degree-proportional
    let mut ends = Vec::new();
    for r in r0..r0 + init_side {
        for c in r0..r0 + init_side {
            let u = r * t + c;
            joined[u] = true;
            for v in [
                (c + 1 < r0 + init_side).then_some(u + 1),
                (r + 1 < r0 + init_side).then_some(u + t),
            ]
            .into_iter()
            .flatten()
            {
                topo.add_link(u, v)?;
                ends.extend([u, v]);
            }
        }
    }
    let ring = |u: usize| {
        let off = |x: usize| r0.saturating_sub(x).max(x.saturating_sub(r0 + init_side - 1));
        off(u / t).max(off(u % t))
    };
    let mut order: Vec<usize> = (0..t * t).filter(|&u| !joined[u]).collect();
    order.sort_by_key(|&u| (ring(u), u));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for u in order {
        let mut chosen = Vec::with_capacity(k);
        while chosen.len() < k {
            let v = ends[rng.gen_range(0..ends.len())];
            if !chosen.contains(&v) {
                chosen.push(v);
            }
        }
        for v in chosen {
            topo.add_link(u, v)?;
            ends.extend([u, v]);
        }
    }
    Ok(topo)
}
