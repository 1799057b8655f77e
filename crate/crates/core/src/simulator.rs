//! Cycle-driven flit-level wormhole simulator.
//!
//! Input-queued switches with virtual channels and credit flow control.
//! Packets are source routed along the route table. A header spends
//! `pipeline_stages` cycles in every switch it leaves from, then the link
//! delay; body flits stream one per cycle behind it. Delivery at the sink
//! takes no pipeline time, so an unloaded packet arrives after
//! `pipeline * hops + sum(link delays) + flits - 1` cycles.
//!
//! Allocation is separable: every input port nominates one ready VC in
//! round-robin order, then every output port grants one nominee in
//! round-robin order. A header claims the first free VC of its next channel
//! and keeps it until its tail leaves the downstream buffer. Credit returns
//! and VC releases take effect the cycle after they happen, so the order in
//! which switches are visited within a cycle does not matter.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::grid::{bfs_hops, ChannelId, Topology};
use crate::mapping::Flow;
use crate::num::Scalar;
use crate::par::map_indices;
use crate::powermodel::{basic_power, link_delay, PowerParams};
use crate::routing::RouteTable;

/// Width of one latency histogram bucket, cycles.
pub const LATENCY_BUCKET: u64 = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub flit_bits: u32,
    pub packet_flits: usize,
    pub vcs_per_port: usize,
    pub vc_buffer_flits: usize,
    pub pipeline_stages: u32,
    pub warmup_cycles: u64,
    pub measure_cycles: u64,
    /// Extra cycles allowed for measured packets to drain.
    pub drain_cycles: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            flit_bits: 32,
            packet_flits: 5,
            vcs_per_port: 2,
            vc_buffer_flits: 4,
            pipeline_stages: 4,
            warmup_cycles: 30_000,
            measure_cycles: 100_000,
            drain_cycles: 100_000,
            seed: 1,
        }
    }
}

impl SimConfig {
    /// Packet length used for application traffic.
    pub const APPLICATION_PACKET_FLITS: usize = 10;

    pub fn validate(&self) -> Result<()> {
        if self.flit_bits == 0
            || self.packet_flits == 0
            || self.vcs_per_port == 0
            || self.vc_buffer_flits == 0
            || self.pipeline_stages == 0
            || self.measure_cycles == 0
        {
            return Err(invalid("simulator sizes and the measurement window must be positive"));
        }
        if self.packet_flits > usize::from(u16::MAX) || self.vcs_per_port > 255 {
            return Err(invalid("packet or VC count too large"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pattern {
    Uniform,
    Shuffle,
    Bitcomp,
    Randperm,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [Pattern::Uniform, Pattern::Shuffle, Pattern::Bitcomp, Pattern::Randperm];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Uniform => "uniform",
            Pattern::Shuffle => "shuffle",
            Pattern::Bitcomp => "bitcomp",
            Pattern::Randperm => "randperm",
        }
    }
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pattern::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid(format!("unknown traffic pattern {s:?}")))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Destination rule of a synthetic pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Destinations {
    /// Uniformly random node other than the source.
    Uniform { nodes: usize },
    /// Fixed destination per source; sources mapped to themselves stay idle.
    Fixed(Vec<usize>),
}

impl Destinations {
    pub fn pick(&self, src: usize, rng: &mut impl Rng) -> Option<usize> {
        match self {
            Destinations::Uniform { nodes } => {
                if *nodes < 2 {
                    return None;
                }
                let d = rng.gen_range(0..nodes - 1);
                Some(if d >= src { d + 1 } else { d })
            }
            Destinations::Fixed(map) => Some(map[src]).filter(|&d| d != src),
        }
    }
}

pub fn synthetic_pattern(kind: Pattern, nodes: usize, seed: u64) -> Result<Destinations> {
    let pow2 = nodes.is_power_of_two();
    let bits = nodes.trailing_zeros();
    match kind {
        Pattern::Uniform => Ok(Destinations::Uniform { nodes }),
        Pattern::Shuffle | Pattern::Bitcomp if !pow2 || nodes < 2 => {
            Err(invalid(format!("{kind} needs a power-of-two node count, got {nodes}")))
        }
        Pattern::Shuffle => Ok(Destinations::Fixed(
            (0..nodes)
                .map(|s| ((s << 1) | (s >> (bits - 1))) & (nodes - 1))
                .collect(),
        )),
        Pattern::Bitcomp => Ok(Destinations::Fixed((0..nodes).map(|s| !s & (nodes - 1)).collect())),
        Pattern::Randperm => {
            let mut perm: Vec<usize> = (0..nodes).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            Ok(Destinations::Fixed(perm))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InjectFlow<S> {
    pub src: usize,
    pub dst: usize,
    /// Packets per cycle.
    pub rate: S,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrafficSpec<S> {
    /// Every node injects `rate` packets per cycle toward the pattern.
    Synthetic { pattern: Pattern, rate: S },
    /// Independent per-flow injection.
    Table { flows: Vec<InjectFlow<S>> },
}

impl<S: Scalar> TrafficSpec<S> {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: S| r > S::zero() && r < S::one();
        match self {
            TrafficSpec::Synthetic { rate, .. } if !ok(*rate) => Err(invalid("injection rate must lie in (0, 1)")),
            TrafficSpec::Table { flows } => match flows.iter().find(|f| !ok(f.rate) || f.src == f.dst) {
                Some(f) => Err(invalid(format!(
                    "flow {}->{} has an unusable rate or endpoints",
                    f.src, f.dst
                ))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// Flows left out of a converted traffic table.
#[derive(Clone, Debug, PartialEq)]
pub struct RejectedFlow<S> {
    pub flow: Flow<S>,
    pub rate: S,
}

/// Converts bandwidth demands to packet injection rates
/// `cr / (cr_cap * packet_flits)`. Zero demands are dropped silently; flows
/// whose rate would reach one packet per cycle are returned as rejected.
pub fn traffic_from_flows<S: Scalar>(
    flows: &[Flow<S>],
    cr_cap: S,
    packet_flits: usize,
) -> Result<(TrafficSpec<S>, Vec<RejectedFlow<S>>)> {
    if !(cr_cap > S::zero()) || packet_flits == 0 {
        return Err(invalid("capacity and packet size must be positive"));
    }
    let scale = cr_cap * S::from_usize_lossy(packet_flits);
    let mut table = Vec::new();
    let mut rejected = Vec::new();
    for f in flows {
        if !(f.demand > S::zero()) {
            continue;
        }
        let rate = f.demand / scale;
        if rate >= S::one() {
            rejected.push(RejectedFlow { flow: *f, rate });
        } else {
            table.push(InjectFlow {
                src: f.src,
                dst: f.dst,
                rate,
            });
        }
    }
    Ok((TrafficSpec::Table { flows: table }, rejected))
}

/// Communication energy split, watts.
#[derive(Clone, Debug, PartialEq)]
pub struct SimPower<S> {
    pub basic: S,
    pub buffer_write: S,
    pub buffer_read: S,
    pub crossbar: S,
    pub link: S,
    pub allocator: S,
    pub communication: S,
    pub total: S,
}

/// Event counts within the measurement window.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Activity {
    pub buffer_writes: u64,
    pub buffer_reads: u64,
    /// Flit traversals weighted by the radix of the switch crossed.
    pub crossbar_port_flits: u64,
    pub crossbar_flits: u64,
    /// Flit traversals weighted by link length.
    pub link_unit_flits: u64,
    pub allocator_ops: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimReport<S> {
    /// Mean latency of measured packets, creation to tail delivery, cycles.
    pub avg_latency: S,
    /// Counts per `LATENCY_BUCKET`-cycle bucket.
    pub latency_histogram: Vec<u64>,
    /// Offered and accepted load in flits per cycle per node.
    pub offered_throughput: S,
    pub accepted_throughput: S,
    pub avg_hops: S,
    pub packets_injected: u64,
    pub packets_delivered: u64,
    pub flits_injected: u64,
    pub flits_delivered: u64,
    /// Flits still queued at sources or inside the network when the run stopped.
    pub flits_outstanding: u64,
    pub activity: Activity,
    pub power: SimPower<S>,
    pub congested: bool,
    pub deadlock: bool,
    pub cycles: u64,
}

impl<S: Scalar> SimReport<S> {
    pub const CSV_HEADER: &'static str = "avg_latency,avg_hops,offered,accepted,packets_injected,packets_delivered,basic_w,buffer_w,crossbar_w,link_w,allocator_w,total_w,congested,deadlock";

    pub fn csv_row(&self) -> String {
        let p = &self.power;
        format!(
            "{:.4},{:.4},{:.6},{:.6},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            self.avg_latency.as_f64(),
            self.avg_hops.as_f64(),
            self.offered_throughput.as_f64(),
            self.accepted_throughput.as_f64(),
            self.packets_injected,
            self.packets_delivered,
            p.basic.as_f64(),
            (p.buffer_read + p.buffer_write).as_f64(),
            p.crossbar.as_f64(),
            p.link.as_f64(),
            p.allocator.as_f64(),
            p.total.as_f64(),
            u8::from(self.congested),
            u8::from(self.deadlock),
        )
    }
}

impl<S: Scalar> fmt::Display for SimReport<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.power;
        writeln!(f, "avg_latency {:.4}", self.avg_latency.as_f64())?;
        writeln!(f, "avg_hops {:.4}", self.avg_hops.as_f64())?;
        writeln!(
            f,
            "offered_flits_per_node_cycle {:.6}",
            self.offered_throughput.as_f64()
        )?;
        writeln!(
            f,
            "accepted_flits_per_node_cycle {:.6}",
            self.accepted_throughput.as_f64()
        )?;
        writeln!(f, "packets_injected {}", self.packets_injected)?;
        writeln!(f, "packets_delivered {}", self.packets_delivered)?;
        writeln!(f, "power_basic_w {:.6}", p.basic.as_f64())?;
        writeln!(f, "power_buffer_w {:.6}", (p.buffer_read + p.buffer_write).as_f64())?;
        writeln!(f, "power_crossbar_w {:.6}", p.crossbar.as_f64())?;
        writeln!(f, "power_link_w {:.6}", p.link.as_f64())?;
        writeln!(f, "power_allocator_w {:.6}", p.allocator.as_f64())?;
        writeln!(f, "power_total_w {:.6}", p.total.as_f64())?;
        writeln!(f, "congested {}", u8::from(self.congested))?;
        writeln!(f, "deadlock {}", u8::from(self.deadlock))?;
        write!(f, "cycles {}", self.cycles)
    }
}

/// Closed-form latency of a packet crossing `path` with no other traffic.
pub fn zero_load_latency<S: Scalar>(
    topo: &Topology,
    path: &[usize],
    cfg: &SimConfig,
    params: &PowerParams<S>,
) -> Result<u64> {
    let mut total = (cfg.packet_flits as u64).saturating_sub(1);
    for w in path.windows(2) {
        let l = topo
            .link_between(w[0], w[1])
            .ok_or_else(|| Error::InvalidTopology(format!("no link {}-{}", w[0], w[1])))?;
        total += u64::from(cfg.pipeline_stages) + u64::from(link_delay(topo.link(l).length, params));
    }
    Ok(total)
}

/// Communication power from activity counts over `cycles` cycles.
pub fn power_accounting<S: Scalar>(
    activity: &Activity,
    basic: S,
    flit_bits: u32,
    cycles: u64,
    params: &PowerParams<S>,
) -> SimPower<S> {
    let per_sec = if cycles == 0 {
        S::zero()
    } else {
        params.clock_hz / S::lit(cycles as f64)
    };
    let bits = S::lit(f64::from(flit_bits));
    let c = |n: u64| S::lit(n as f64);
    // the fixed per-bit switch energy is split evenly between buffer write and read
    let half = params.j_s_base / S::lit(2.0);
    let buffer_write = c(activity.buffer_writes) * bits * half * per_sec;
    let buffer_read = c(activity.buffer_reads) * bits * half * per_sec;
    let crossbar = c(activity.crossbar_port_flits) * bits * params.j_s_per_port * per_sec;
    let link = c(activity.link_unit_flits) * bits * params.j_l_per_unit * per_sec;
    let allocator = c(activity.allocator_ops) * params.allocator_per_op * per_sec;
    let communication = buffer_write + buffer_read + crossbar + link + allocator;
    SimPower {
        basic,
        buffer_write,
        buffer_read,
        crossbar,
        link,
        allocator,
        communication,
        total: basic + communication,
    }
}

const NONE32: u32 = u32::MAX;
const NO_VC: u8 = u8::MAX;

#[derive(Clone, Copy, Debug)]
struct FlitRec {
    pkt: u32,
    idx: u16,
    /// Index into the packet's channel list of the channel it arrived on.
    hop: u16,
    ready: u64,
}

#[derive(Clone, Debug)]
struct Packet {
    chans: Vec<u32>,
    vcs: Vec<u8>,
    created: u64,
    measured: bool,
    hops_taken: u16,
}

/// An input port's nominee for one output.
#[derive(Clone, Copy, Debug)]
struct Request {
    port: usize,
    /// Global VC index, or `None` for the injection port.
    vc: Option<usize>,
    out: Out,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Out {
    Channel(ChannelId),
    Eject,
}

struct Engine<'a> {
    topo: &'a Topology,
    cfg: &'a SimConfig,
    v: usize,
    p: u64,
    delay: Vec<u64>,
    radix: Vec<u64>,
    in_chs: Vec<Vec<ChannelId>>,
    buf: Vec<VecDeque<FlitRec>>,
    owner: Vec<u32>,
    credits: Vec<u32>,
    in_rr: Vec<u8>,
    out_rr: Vec<u8>,
    ej_rr: Vec<u8>,
    src_q: Vec<VecDeque<u32>>,
    src_sent: Vec<u16>,
    src_ready: Vec<u64>,
    packets: Vec<Packet>,
    pending_credit: Vec<usize>,
    pending_release: Vec<usize>,
    active: Vec<bool>,
    active_list: Vec<usize>,
    in_network: u64,
    last_move: u64,
    measuring: bool,
    act: Activity,
    // statistics over measured packets
    lat_sum: u128,
    hop_sum: u64,
    hist: Vec<u64>,
    delivered_measured: u64,
    outstanding_measured: u64,
    window_flits_offered: u64,
    window_flits_accepted: u64,
    packets_injected: u64,
    flits_injected: u64,
    flits_delivered: u64,
}

impl<'a> Engine<'a> {
    fn new<S: Scalar>(topo: &'a Topology, cfg: &'a SimConfig, params: &'a PowerParams<S>) -> Self {
        let n = topo.node_count();
        let nch = topo.channel_count();
        let v = cfg.vcs_per_port;
        let p = u64::from(cfg.pipeline_stages);
        let delay: Vec<u64> = (0..nch)
            .map(|c| u64::from(link_delay(topo.link(c / 2).length, params)))
            .collect();
        let in_chs = (0..n)
            .map(|u| {
                topo.neighbors(u)
                    .iter()
                    .map(|&(w, _)| topo.channel(w, u).expect("adjacent"))
                    .collect()
            })
            .collect();
        // credits cover the buffer plus the link and pipeline round trip
        let credits = (0..nch * v)
            .map(|i| (cfg.vc_buffer_flits as u64 + delay[i / v] + p) as u32)
            .collect();
        Self {
            topo,
            cfg,
            v,
            p,
            delay,
            radix: (0..n).map(|u| topo.degree(u) as u64 + 1).collect(),
            in_chs,
            buf: vec![VecDeque::new(); nch * v],
            owner: vec![NONE32; nch * v],
            credits,
            in_rr: vec![0; nch],
            out_rr: vec![0; nch],
            ej_rr: vec![0; n],
            src_q: vec![VecDeque::new(); n],
            src_sent: vec![0; n],
            src_ready: vec![0; n],
            packets: Vec::new(),
            pending_credit: Vec::new(),
            pending_release: Vec::new(),
            active: vec![false; n],
            active_list: Vec::new(),
            in_network: 0,
            last_move: 0,
            measuring: false,
            act: Activity::default(),
            lat_sum: 0,
            hop_sum: 0,
            hist: Vec::new(),
            delivered_measured: 0,
            outstanding_measured: 0,
            window_flits_offered: 0,
            window_flits_accepted: 0,
            packets_injected: 0,
            flits_injected: 0,
            flits_delivered: 0,
        }
    }

    fn activate(&mut self, u: usize) {
        if !self.active[u] {
            self.active[u] = true;
            self.active_list.push(u);
        }
    }

    fn inject(&mut self, src: usize, chans: Vec<u32>, now: u64, measured: bool) {
        let id = self.packets.len() as u32;
        let hops = chans.len();
        self.packets.push(Packet {
            chans,
            vcs: vec![NO_VC; hops],
            created: now,
            measured,
            hops_taken: 0,
        });
        if self.src_q[src].is_empty() {
            self.src_ready[src] = now + self.p;
            self.src_sent[src] = 0;
        }
        self.src_q[src].push_back(id);
        self.packets_injected += 1;
        self.flits_injected += self.cfg.packet_flits as u64;
        if measured {
            self.outstanding_measured += 1;
        }
        if self.measuring {
            self.window_flits_offered += self.cfg.packet_flits as u64;
        }
        self.activate(src);
    }

    /// Output VC for the flit's next hop, claiming one for a header.
    fn out_vc(&mut self, pkt: u32, next_hop: usize, is_head: bool) -> Option<usize> {
        let p = &self.packets[pkt as usize];
        let ch = p.chans[next_hop] as usize;
        let vc = p.vcs[next_hop];
        let vc = if vc != NO_VC {
            vc as usize
        } else if is_head {
            let k = (0..self.v).find(|&k| self.owner[ch * self.v + k] == NONE32)?;
            self.owner[ch * self.v + k] = pkt;
            self.packets[pkt as usize].vcs[next_hop] = k as u8;
            if self.measuring {
                self.act.allocator_ops += 1;
            }
            k
        } else {
            return None;
        };
        let g = ch * self.v + vc;
        (self.credits[g] > 0).then_some(g)
    }

    fn step_router(&mut self, u: usize, now: u64) {
        let nports = self.in_chs[u].len() + 1;
        let mut reqs: Vec<Request> = Vec::with_capacity(nports);
        for port in 0..nports - 1 {
            let ch = self.in_chs[u][port];
            let start = self.in_rr[ch] as usize;
            for j in 0..self.v {
                let k = (start + j) % self.v;
                let g = ch * self.v + k;
                let Some(&f) = self.buf[g].front() else { continue };
                if f.ready > now {
                    continue;
                }
                let last = self.packets[f.pkt as usize].chans.len() - 1;
                let out = if usize::from(f.hop) == last {
                    Some(Out::Eject)
                } else {
                    self.out_vc(f.pkt, usize::from(f.hop) + 1, f.idx == 0)
                        .map(|og| Out::Channel(og / self.v))
                };
                if let Some(out) = out {
                    reqs.push(Request { port, vc: Some(g), out });
                    break;
                }
            }
        }
        if let Some(&pkt) = self.src_q[u].front() {
            if self.src_ready[u] <= now {
                let idx = self.src_sent[u];
                if let Some(og) = self.out_vc(pkt, 0, idx == 0) {
                    reqs.push(Request {
                        port: nports - 1,
                        vc: None,
                        out: Out::Channel(og / self.v),
                    });
                }
            }
        }
        if reqs.is_empty() {
            return;
        }
        // output arbitration: round robin over input ports
        reqs.sort_by_key(|r| match r.out {
            Out::Channel(c) => (0, c),
            Out::Eject => (1, 0),
        });
        let mut i = 0;
        while i < reqs.len() {
            let mut j = i;
            while j < reqs.len() && reqs[j].out == reqs[i].out {
                j += 1;
            }
            let ptr = match reqs[i].out {
                Out::Channel(c) => self.out_rr[c] as usize,
                Out::Eject => self.ej_rr[u] as usize,
            };
            let win = *reqs[i..j]
                .iter()
                .min_by_key(|r| (r.port + nports - ptr) % nports)
                .expect("nonempty group");
            let next = ((win.port + 1) % nports) as u8;
            match win.out {
                Out::Channel(c) => self.out_rr[c] = next,
                Out::Eject => self.ej_rr[u] = next,
            }
            self.grant(u, win, now);
            i = j;
        }
    }

    fn grant(&mut self, u: usize, r: Request, now: u64) {
        let flits = self.cfg.packet_flits as u16;
        let (rec, from_source) = match r.vc {
            Some(g) => {
                let f = self.buf[g].pop_front().expect("nominated VC has a flit");
                self.pending_credit.push(g);
                if f.idx + 1 == flits {
                    self.pending_release.push(g);
                }
                let ch = g / self.v;
                self.in_rr[ch] = (((g % self.v) + 1) % self.v) as u8;
                if self.measuring {
                    self.act.buffer_reads += 1;
                }
                (f, false)
            }
            None => {
                let pkt = *self.src_q[u].front().expect("source has a packet");
                let idx = self.src_sent[u];
                self.src_sent[u] += 1;
                if idx + 1 == flits {
                    self.src_q[u].pop_front();
                    self.src_sent[u] = 0;
                    if let Some(&next) = self.src_q[u].front() {
                        self.src_ready[u] = (self.packets[next as usize].created + self.p).max(now + 1);
                    }
                }
                self.in_network += 1;
                (
                    FlitRec {
                        pkt,
                        idx,
                        hop: 0,
                        ready: 0,
                    },
                    true,
                )
            }
        };
        self.last_move = now;
        if self.measuring {
            self.act.crossbar_flits += 1;
            self.act.crossbar_port_flits += self.radix[u];
            self.act.allocator_ops += 1;
        }
        match r.out {
            Out::Eject => self.deliver(rec, now),
            Out::Channel(ch) => {
                let next_hop = if from_source { 0 } else { usize::from(rec.hop) + 1 };
                let pk = &mut self.packets[rec.pkt as usize];
                let vc = pk.vcs[next_hop] as usize;
                let last = pk.chans.len() - 1;
                if rec.idx == 0 {
                    pk.hops_taken += 1;
                }
                let g = ch * self.v + vc;
                self.credits[g] -= 1;
                let arrive = now + self.delay[ch];
                let ready = if rec.idx == 0 && next_hop != last {
                    arrive + self.p
                } else {
                    arrive
                };
                self.buf[g].push_back(FlitRec {
                    pkt: rec.pkt,
                    idx: rec.idx,
                    hop: next_hop as u16,
                    ready,
                });
                if self.measuring {
                    self.act.buffer_writes += 1;
                    self.act.link_unit_flits += u64::from(self.topo.link(ch / 2).length);
                }
                let down = self.topo.channel_ends(ch).1;
                self.activate(down);
            }
        }
    }

    fn queued_flits(&self) -> u64 {
        let per = self.cfg.packet_flits as u64;
        self.src_q
            .iter()
            .zip(&self.src_sent)
            .map(|(q, &sent)| q.len() as u64 * per - if q.is_empty() { 0 } else { sent as u64 })
            .sum()
    }

    fn deliver(&mut self, f: FlitRec, now: u64) {
        self.in_network -= 1;
        self.flits_delivered += 1;
        let pk = &self.packets[f.pkt as usize];
        if self.measuring && pk.measured {
            self.window_flits_accepted += 1;
        }
        if usize::from(f.idx) + 1 == self.cfg.packet_flits {
            if pk.measured {
                let lat = now - pk.created;
                self.lat_sum += u128::from(lat);
                self.hop_sum += u64::from(pk.hops_taken);
                let b = (lat / LATENCY_BUCKET) as usize;
                if self.hist.len() <= b {
                    self.hist.resize(b + 1, 0);
                }
                self.hist[b] += 1;
                self.delivered_measured += 1;
                self.outstanding_measured -= 1;
            }
            let pk = &mut self.packets[f.pkt as usize];
            pk.chans = Vec::new();
            pk.vcs = Vec::new();
        }
    }

    fn router_idle(&self, u: usize) -> bool {
        self.src_q[u].is_empty()
            && self.in_chs[u]
                .iter()
                .all(|&ch| (0..self.v).all(|k| self.buf[ch * self.v + k].is_empty()))
    }

    fn cycle(&mut self, now: u64) {
        for g in std::mem::take(&mut self.pending_credit) {
            self.credits[g] += 1;
        }
        for g in std::mem::take(&mut self.pending_release) {
            self.owner[g] = NONE32;
        }
        let mut list = std::mem::take(&mut self.active_list);
        list.sort_unstable();
        for &u in &list {
            self.step_router(u, now);
        }
        // routers in `list` kept their flag, so `activate` never queued them twice
        for u in list {
            if self.router_idle(u) {
                self.active[u] = false;
            } else {
                self.active_list.push(u);
            }
        }
    }
}

fn diameter(topo: &Topology) -> u64 {
    map_indices(topo.node_count(), |s| {
        bfs_hops(topo, s)
            .into_iter()
            .filter(|&h| h != u16::MAX)
            .max()
            .unwrap_or(0)
    })
    .into_iter()
    .max()
    .map_or(0, u64::from)
}

/// Injection source: node or table flow.
struct Source<S> {
    src: usize,
    dst: Option<usize>,
    rate: S,
}

fn geometric_gap(rng: &mut ChaCha8Rng, log_q: f64) -> u64 {
    // trials until the first success of a per-cycle Bernoulli draw
    let u: f64 = 1.0 - rng.gen::<f64>();
    (u.ln() / log_q).floor() as u64 + 1
}

/// Runs one simulation. Synthetic traffic and table flows without an
/// explicit route use the route table's fallback.
pub fn run<S: Scalar>(
    topo: &Topology,
    routes: &RouteTable<'_>,
    traffic: &TrafficSpec<S>,
    cfg: &SimConfig,
    params: &PowerParams<S>,
) -> Result<SimReport<S>> {
    cfg.validate()?;
    traffic.validate()?;
    params.validate()?;
    let n = topo.node_count();
    let (sources, dests): (Vec<Source<S>>, Option<Destinations>) = match traffic {
        TrafficSpec::Synthetic { pattern, rate } => (
            (0..n)
                .map(|s| Source {
                    src: s,
                    dst: None,
                    rate: *rate,
                })
                .collect(),
            Some(synthetic_pattern(*pattern, n, cfg.seed)?),
        ),
        TrafficSpec::Table { flows } => {
            for f in flows {
                if f.src >= n || f.dst >= n {
                    return Err(invalid(format!("flow {}->{} outside the topology", f.src, f.dst)));
                }
            }
            (
                flows
                    .iter()
                    .map(|f| Source {
                        src: f.src,
                        dst: Some(f.dst),
                        rate: f.rate,
                    })
                    .collect(),
                None,
            )
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let log_q: Vec<f64> = sources.iter().map(|s| (1.0 - s.rate.as_f64()).ln()).collect();
    let mut events: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    for (i, lq) in log_q.iter().enumerate() {
        let t = geometric_gap(&mut rng, *lq) - 1;
        events.push(Reverse((t, i)));
    }

    let mut route_cache: HashMap<(usize, usize), Vec<u32>> = HashMap::new();
    let mut eng = Engine::new(topo, cfg, params);
    let watchdog = 10 * eng.p * diameter(topo).max(1);
    let window_start = cfg.warmup_cycles;
    let window_end = cfg.warmup_cycles + cfg.measure_cycles;
    let hard_end = window_end + cfg.drain_cycles;
    let mut deadlock = false;
    let mut now = 0;
    loop {
        if now >= window_end && (eng.outstanding_measured == 0 || now >= hard_end) {
            break;
        }
        eng.measuring = now >= window_start && now < window_end;
        while let Some(&Reverse((t, i))) = events.peek() {
            if t > now {
                break;
            }
            events.pop();
            let s = &sources[i];
            let dst = match (&dests, s.dst) {
                (_, Some(d)) => Some(d),
                (Some(ds), None) => ds.pick(s.src, &mut rng),
                (None, None) => None,
            };
            if let Some(d) = dst {
                let chans = match route_cache.get(&(s.src, d)) {
                    Some(c) => c.clone(),
                    None => {
                        let path = routes.path(s.src, d).ok_or(Error::Unreachable { from: s.src, to: d })?;
                        let c: Vec<u32> = path
                            .windows(2)
                            .map(|w| {
                                topo.channel(w[0], w[1]).map(|c| c as u32).ok_or_else(|| {
                                    Error::InvalidTopology(format!("route uses missing link {}-{}", w[0], w[1]))
                                })
                            })
                            .collect::<Result<_>>()?;
                        if c.is_empty() {
                            return Err(invalid(format!("empty route {}->{d}", s.src)));
                        }
                        route_cache.insert((s.src, d), c.clone());
                        c
                    }
                };
                let measured = now >= window_start && now < window_end;
                eng.inject(s.src, chans, now, measured);
            }
            events.push(Reverse((now + geometric_gap(&mut rng, log_q[i]), i)));
        }
        eng.cycle(now);
        if eng.in_network > 0 && now.saturating_sub(eng.last_move) > watchdog {
            deadlock = true;
            break;
        }
        now += 1;
    }

    let basic = basic_power(topo, params).total;
    let power = power_accounting(&eng.act, basic, cfg.flit_bits, cfg.measure_cycles, params);
    let window = S::lit((cfg.measure_cycles as f64) * n as f64);
    let offered = S::lit(eng.window_flits_offered as f64) / window;
    let accepted = S::lit(eng.window_flits_accepted as f64) / window;
    let dm = eng.delivered_measured;
    let avg = |x: f64| if dm == 0 { S::zero() } else { S::lit(x / dm as f64) };
    let outstanding = eng.in_network + eng.queued_flits();
    let congested = deadlock
        || eng.outstanding_measured > 0
        || (eng.window_flits_offered > 0
            && (eng.window_flits_accepted as f64) < 0.95 * eng.window_flits_offered as f64);
    Ok(SimReport {
        avg_latency: avg(eng.lat_sum as f64),
        latency_histogram: eng.hist,
        offered_throughput: offered,
        accepted_throughput: accepted,
        avg_hops: avg(eng.hop_sum as f64),
        packets_injected: eng.packets_injected,
        packets_delivered: eng.packets.iter().filter(|p| p.chans.is_empty()).count() as u64,
        flits_injected: eng.flits_injected,
        flits_delivered: eng.flits_delivered,
        flits_outstanding: outstanding,
        activity: eng.act,
        power,
        congested,
        deadlock,
        cycles: now,
    })
}

/// Single packet along `path` on an otherwise idle network; returns its latency.
pub fn single_packet_latency<S: Scalar>(
    topo: &Topology,
    path: &[usize],
    cfg: &SimConfig,
    params: &PowerParams<S>,
) -> Result<u64> {
    cfg.validate()?;
    if path.len() < 2 {
        return Err(invalid("a packet needs at least one hop"));
    }
    let chans: Vec<u32> = path
        .windows(2)
        .map(|w| {
            topo.channel(w[0], w[1])
                .map(|c| c as u32)
                .ok_or_else(|| invalid("path leaves the topology"))
        })
        .collect::<Result<_>>()?;
    let mut eng = Engine::new(topo, cfg, params);
    eng.measuring = true;
    eng.inject(path[0], chans, 0, true);
    let cap = zero_load_latency(topo, path, cfg, params)? * 4 + 64;
    for now in 0..=cap {
        eng.cycle(now);
        if eng.outstanding_measured == 0 {
            return Ok(eng.lat_sum as u64);
        }
    }
    Err(Error::Infeasible("packet was not delivered".into()))
}
