//! `(gamma, beta)` sweep trading rough communication cost against basic power.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::grid::{build_mesh, metrics, Topology};
use crate::num::{total_cmp, Scalar};
use crate::par::map_indices;
use crate::powermodel::{basic_power, PowerParams};

use super::grow::{grow, GrowthParams};

/// `alpha * C_min / C + (1 - alpha) * P_min / P`.
pub fn basic_obj<S: Scalar>(c: S, p: S, c_min: S, p_min: S, alpha: S) -> Result<S> {
    if !(c > S::zero()) || !(p > S::zero()) {
        return Err(invalid("communication cost and power must be positive"));
    }
    if !(c_min > S::zero()) || !(p_min > S::zero()) {
        return Err(invalid("reference minima must be positive"));
    }
    Ok(alpha * c_min / c + (S::one() - alpha) * p_min / p)
}

/// Sweep inputs. Ranges are inclusive.
#[derive(Clone, Debug)]
pub struct SweepConfig<S> {
    pub n: usize,
    pub m: usize,
    pub l_a: usize,
    pub k: usize,
    pub init_side: usize,
    pub gamma: (S, S),
    pub beta: (S, S),
    pub step: S,
    pub alpha: S,
    /// Selected topology may not exceed this multiple of the mesh basic power.
    pub power_threshold: S,
    pub power: PowerParams<S>,
}

impl<S: Scalar> SweepConfig<S> {
    pub fn new(n: usize, m: usize, l_a: usize, gamma: (S, S), beta: (S, S)) -> Self {
        Self {
            n,
            m,
            l_a,
            k: 2,
            init_side: 4,
            gamma,
            beta,
            step: S::lit(0.1),
            alpha: S::lit(0.5),
            power_threshold: S::lit(1.3),
            power: PowerParams::default(),
        }
    }

    fn axis(&self, (lo, hi): (S, S), name: &str) -> Result<Vec<S>> {
        if !(self.step > S::zero()) {
            return Err(invalid("sweep step must be positive"));
        }
        if !(hi >= lo) {
            return Err(invalid(format!("empty {name} range")));
        }
        let (lo, hi, step) = (lo.as_f64(), hi.as_f64(), self.step.as_f64());
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        // snap to a decimal grid so 0.1 steps print and compare cleanly
        Ok((0..count)
            .map(|i| S::lit(((lo + i as f64 * step) * 1e9).round() / 1e9))
            .collect())
    }

    fn growth(&self, gamma: S, beta: S) -> GrowthParams<S> {
        GrowthParams {
            n: self.n,
            m: self.m,
            l_a: self.l_a,
            k: self.k,
            gamma,
            beta,
            init_side: self.init_side,
        }
    }
}

/// Metrics of one grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry<S> {
    pub gamma: S,
    pub beta: S,
    pub avg_hop: S,
    pub wire_length: u64,
    pub link_count: usize,
    pub comm_cost: u64,
    pub power: S,
    pub obj: S,
}

#[derive(Clone, Debug)]
pub struct SweepResult<S> {
    pub entries: Vec<SweepEntry<S>>,
    /// Index into `entries` of the selected topology.
    pub selected: usize,
    /// Weight in effect when the selection met the power threshold.
    pub alpha: S,
    pub mesh_power: S,
    pub power_threshold: S,
    pub topology: Topology,
}

impl<S: Scalar> SweepResult<S> {
    pub fn best(&self) -> &SweepEntry<S> {
        &self.entries[self.selected]
    }

    /// One CSV row per grid point; OBJ uses the final `alpha`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gamma,beta,avg_hop,wire_length,links,comm_cost,power,obj,selected\n");
        for (i, e) in self.entries.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:.1},{:.1},{:.4},{},{},{},{:.6},{:.6},{}",
                e.gamma.as_f64(),
                e.beta.as_f64(),
                e.avg_hop.as_f64(),
                e.wire_length,
                e.link_count,
                e.comm_cost,
                e.power.as_f64(),
                e.obj.as_f64(),
                u8::from(i == self.selected)
            );
        }
        s
    }
}

fn select<S: Scalar>(entries: &mut [SweepEntry<S>], alpha: S) -> Result<usize> {
    let c_min = entries.iter().map(|e| e.comm_cost).min().unwrap_or(0);
    let p_min = entries
        .iter()
        .map(|e| e.power)
        .min_by(|a, b| total_cmp(*a, *b))
        .unwrap_or_else(S::zero);
    let c_min = S::lit(c_min as f64);
    for e in entries.iter_mut() {
        e.obj = basic_obj(S::lit(e.comm_cost as f64), e.power, c_min, p_min, alpha)?;
    }
    // max OBJ; earliest grid point on ties
    let mut best = 0;
    for (i, e) in entries.iter().enumerate() {
        if total_cmp(e.obj, entries[best].obj).is_gt() {
            best = i;
        }
    }
    Ok(best)
}

/// Grows every grid point, then selects the maximal-OBJ topology, lowering
/// `alpha` in 0.1 steps while the selection exceeds the power threshold.
/// Grid points whose parameters admit no valid topology are skipped.
pub fn sweep<S: Scalar>(cfg: &SweepConfig<S>) -> Result<SweepResult<S>> {
    let gammas = cfg.axis(cfg.gamma, "gamma")?;
    let betas = cfg.axis(cfg.beta, "beta")?;
    cfg.power.validate()?;
    let t = cfg.growth(gammas[0], betas[0]).validate()?;
    let mesh_power = basic_power(&build_mesh(t)?, &cfg.power).total;

    let points: Vec<(S, S)> = gammas
        .iter()
        .flat_map(|&g| betas.iter().map(move |&b| (g, b)))
        .collect();
    let grown = map_indices(points.len(), |i| {
        let (g, b) = points[i];
        let topo = grow(&cfg.growth(g, b))?;
        let m = metrics::<S>(&topo)?;
        let entry = SweepEntry {
            gamma: g,
            beta: b,
            avg_hop: m.avg_hop,
            wire_length: m.total_wire_length,
            link_count: m.link_count,
            comm_cost: m.rough_comm_cost,
            power: basic_power(&topo, &cfg.power).total,
            obj: S::zero(),
        };
        Ok::<_, Error>((entry, topo))
    });
    let mut entries = Vec::new();
    let mut topos = Vec::new();
    let mut last_err = None;
    for r in grown {
        match r {
            Ok((e, t)) => {
                entries.push(e);
                topos.push(t);
            }
            Err(e @ Error::InvalidParameter(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    if entries.is_empty() {
        return Err(last_err.unwrap_or_else(|| invalid("sweep grid is empty")));
    }

    let limit = cfg.power_threshold * mesh_power;
    let tenth = S::lit(0.1);
    let eps = S::lit(1e-9);
    let mut alpha = cfg.alpha;
    loop {
        let best = select(&mut entries, alpha)?;
        if entries[best].power <= limit {
            return Ok(SweepResult {
                selected: best,
                alpha,
                mesh_power,
                power_threshold: cfg.power_threshold,
                topology: topos.swap_remove(best),
                entries,
            });
        }
        if alpha <= eps {
            return Err(Error::Infeasible(format!(
                "no swept topology stays within {} x mesh basic power",
                cfg.power_threshold
            )));
        }
        alpha = (alpha - tenth).max(S::zero());
    }
}
