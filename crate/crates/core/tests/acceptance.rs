//! Twelve end-to-end acceptance criteria, one PASS/FAIL line each.
//!
//! Lines go straight to the stderr handle so they show up even when the
//! test harness captures output. A failing criterion is reported, not
//! asserted: the test itself only fails if a criterion cannot be evaluated.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use brainnoc::community::{classify_hubs, detect_communities, modularity, CommunityPartition};
use brainnoc::grid::{all_pairs_min_hop, build_mesh, build_torus, metrics, Topology};
use brainnoc::io;
use brainnoc::mapping::{map_tasks, planted_task_graph, Flow, MappingCostParams};
use brainnoc::powermodel::PowerParams;
use brainnoc::routing::{
    ilp_oracle, lagrangian_route, paths_cdg_acyclic, turn_prohibition, validate_solution, RouteTable, RoutingParams,
    RoutingProblem, TurnSet,
};
use brainnoc::simulator::{
    run, single_packet_latency, traffic_from_flows, zero_load_latency, Pattern, SimConfig, SimReport, TrafficSpec,
};
use brainnoc::topogen::{
    compute_ma, degree_frequencies, grow_detailed, sweep, GrowthOutcome, GrowthParams, SweepConfig,
};

fn line(id: u32, name: &str, pass: bool, detail: &str, started: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "[{verdict}] {id:>2} {name}: {detail} ({:.1}s)",
        started.elapsed().as_secs_f64()
    );
}

fn note(text: &str) {
    let _ = writeln!(std::io::stderr().lock(), "        {text}");
}

fn bnit(n: usize) -> GrowthOutcome {
    grow_detailed(&GrowthParams::new(n, 15, 15, 0.7f64, 1.4)).expect("default growth succeeds")
}

fn c1_ma_table() {
    let t = Instant::now();
    let expected = [
        (0.5, 7),
        (0.6, 7),
        (0.7, 8),
        (0.8, 8),
        (0.9, 8),
        (1.0, 8),
        (1.1, 9),
        (1.2, 9),
        (1.3, 9),
        (1.4, 10),
        (1.5, 10),
        (1.6, 11),
        (1.7, 12),
        (1.8, 13),
        (1.9, 14),
        (2.0, 15),
        (2.1, 15),
        (2.2, 15),
        (2.3, 15),
        (2.4, 15),
        (2.5, 15),
    ];
    let wrong: Vec<String> = expected
        .iter()
        .filter_map(|&(g, ma)| {
            let got = compute_ma(15, 2, g).expect("valid parameters");
            (got != ma).then(|| format!("gamma {g}: {got} != {ma}"))
        })
        .collect();
    let pass = wrong.is_empty() && t.elapsed().as_secs_f64() < 1.0;
    let detail = if wrong.is_empty() {
        "21 gamma values, 9 bands exact".to_string()
    } else {
        wrong.join(", ")
    };
    line(1, "m_a table", pass, &detail, t);
}

fn c2_baselines() {
    let t = Instant::now();
    let mesh = build_mesh(32).unwrap();
    let torus = build_torus(32).unwrap();
    let m = metrics::<f64>(&mesh).unwrap();
    let wl = m.wire_length_report_units().round();
    let pass = (m.avg_hop - 21.33).abs() <= 0.01 && m.link_count == 1984 && wl == 397.0 && torus.link_count() == 2048;
    let detail = format!(
        "mesh avg_hop {:.4}, links {}, WL {wl}; torus links {}",
        m.avg_hop,
        m.link_count,
        torus.link_count()
    );
    line(
        2,
        "mesh/torus baselines",
        pass && t.elapsed().as_secs() < 10,
        &detail,
        t,
    );
}

fn c3_bnit_structure(g: &GrowthOutcome, started: Instant) -> f64 {
    let topo = &g.topology;
    let m = metrics::<f64>(topo).unwrap();
    let wl = m.wire_length_report_units();
    let longest = topo.links().iter().map(|l| l.length).max().unwrap_or(0);
    let pass = topo.link_count() == 2040
        && topo.max_degree() <= g.m_a
        && longest <= 15
        && (6.0..=9.2).contains(&m.avg_hop)
        && (1050.0..=2000.0).contains(&wl)
        && started.elapsed().as_secs() < 120;
    let detail = format!(
        "links {}, max degree {} (m_a {}), longest link {longest}, avg_hop {:.4}, WL {wl:.1}",
        topo.link_count(),
        topo.max_degree(),
        g.m_a,
        m.avg_hop
    );
    line(3, "BNIT structure n=1024", pass, &detail, started);
    m.avg_hop
}

fn c4_scaling(hop_1024: f64, g4096: &GrowthOutcome, started: Instant) {
    let m = metrics::<f64>(&g4096.topology).unwrap();
    let ratio = m.avg_hop / hop_1024;
    let pass = ratio <= 1.6 && m.avg_hop <= 12.0 && started.elapsed().as_secs() < 1200;
    line(
        4,
        "small-world scaling",
        pass,
        &format!("avg_hop(4096) {:.4}, ratio to 1024 {ratio:.4}", m.avg_hop),
        started,
    );
}

fn c5_distributions(g: &GrowthOutcome) {
    let t = Instant::now();
    let topo = &g.topology;
    let n = topo.node_count() as f64;
    let f = degree_frequencies(g.m_a, 2, 0.7f64).unwrap();
    let mut counts = vec![0usize; topo.max_degree().max(g.m_a) + 1];
    for d in topo.degrees() {
        counts[d] += 1;
    }
    let l1: f64 = counts
        .iter()
        .enumerate()
        .map(|(d, &c)| {
            let target = if (2..=g.m_a).contains(&d) { f[d - 2] } else { 0.0 };
            (c as f64 / n - target).abs()
        })
        .sum();
    let mut lens = [0usize; 16];
    for l in topo.links() {
        lens[l.length as usize] += 1;
    }
    let inversions = (1..14).filter(|&l| lens[l + 1] > lens[l]).count();
    let pass = l1 <= 0.15 && inversions <= 2;
    line(
        5,
        "degree/length fidelity",
        pass,
        &format!("degree L1 {l1:.4}, length inversions over 1..14: {inversions}"),
        t,
    );
}

/// Maximum-modularity partition by enumerating restricted growth strings.
fn brute_force_best(topo: &Topology) -> (f64, Vec<usize>) {
    let n = topo.node_count();
    let mut labels = vec![0usize; n];
    let mut best = (f64::NEG_INFINITY, labels.clone());
    fn rec(i: usize, max: usize, labels: &mut Vec<usize>, topo: &Topology, best: &mut (f64, Vec<usize>)) {
        if i == labels.len() {
            let q: f64 = modularity(topo, labels);
            if q > best.0 + 1e-12 {
                *best = (q, labels.clone());
            }
            return;
        }
        for c in 0..=max + 1 {
            labels[i] = c;
            rec(i + 1, max.max(c), labels, topo, best);
        }
    }
    labels[0] = 0;
    rec(1, 0, &mut labels, topo, &mut best);
    best
}

fn c6_communities(g1024: &GrowthOutcome, g4096: &GrowthOutcome) {
    let t = Instant::now();
    let mut two = Topology::full_grid(3).unwrap();
    for (a, b) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        two.add_link(a, b).unwrap();
    }
    for a in 4..9 {
        for b in a + 1..9 {
            two.add_link(a, b).unwrap();
        }
    }
    two.add_link(3, 4).unwrap();
    let found: CommunityPartition<f64> = detect_communities(&two, usize::MAX);
    let (q_best, best) = brute_force_best(&two);
    let planted = vec![0, 0, 0, 0, 1, 1, 1, 1, 1];
    let planted_ok = found.assign == planted && best == planted && found.modularity > 0.3;

    let cap = 150;
    let c1024: CommunityPartition<f64> = detect_communities(&g1024.topology, cap);
    let c4096: CommunityPartition<f64> = detect_communities(&g4096.topology, cap);
    let free4096: CommunityPartition<f64> = detect_communities(&g4096.topology, usize::MAX);
    let capped_ok = c1024.largest() <= cap && c4096.largest() <= cap;
    let gap = (free4096.modularity - c4096.modularity).abs();
    let pass = planted_ok && capped_ok && gap <= 0.05 && t.elapsed().as_secs() < 300;
    line(
        6,
        "community detection",
        pass,
        &format!(
            "planted Q {:.4} (brute force {q_best:.4}), largest {}/{} at 1024/4096, Q capped {:.4} vs uncapped {:.4}",
            found.modularity,
            c1024.largest(),
            c4096.largest(),
            c4096.modularity,
            free4096.modularity
        ),
        t,
    );
}

/// Small random instance: a spanning tree of a 3x3 grid plus extra links,
/// with two to four flows and a capacity that sometimes binds.
fn toy_instance(rng: &mut ChaCha8Rng) -> (Topology, Vec<Flow<f64>>, f64) {
    let mut topo = Topology::full_grid(3).unwrap();
    let mut order: Vec<usize> = (0..9).collect();
    for i in (1..9).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    for i in 1..9 {
        let parent = order[rng.gen_range(0..i)];
        topo.add_link(order[i], parent).unwrap();
    }
    for _ in 0..rng.gen_range(2..6) {
        let (a, b) = (rng.gen_range(0..9), rng.gen_range(0..9));
        if a != b && !topo.has_link(a, b) {
            topo.add_link(a, b).unwrap();
        }
    }
    let mut flows = Vec::new();
    for _ in 0..rng.gen_range(2..=4) {
        let (a, b) = (rng.gen_range(0..9), rng.gen_range(0..9));
        if a != b {
            flows.push(Flow::new(a, b, rng.gen_range(20..300) as f64));
        }
    }
    if flows.is_empty() {
        flows.push(Flow::new(0, 8, 100.0));
    }
    let cap = [300.0, 400.0, 4000.0][rng.gen_range(0..3)];
    (topo, flows, cap)
}

fn c7_routing_vs_oracle() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut done = 0;
    let mut within = 0;
    let mut legal = true;
    let mut worst: f64 = 0.0;
    while done < 20 {
        let (topo, flows, cap) = toy_instance(&mut rng);
        let params = RoutingParams::<f64> {
            hop_limit: 4,
            link_capacity: cap,
            ..RoutingParams::default()
        };
        let ts = turn_prohibition(&topo).unwrap();
        let problem = RoutingProblem::new(&topo, flows, &params).unwrap();
        let Some(opt) = ilp_oracle(&problem, &ts).unwrap() else {
            continue;
        };
        done += 1;
        let sol = lagrangian_route(&problem, &ts).unwrap();
        let v = validate_solution(&problem, &ts, &sol.paths);
        legal &= v.all_valid() && v.turns_ok.iter().all(|&x| x);
        let gap = sol.objective / opt.objective - 1.0;
        worst = worst.max(gap);
        if sol.success == 100.0 && gap <= 0.05 {
            within += 1;
        }
    }
    let pass = within == 20 && legal && t.elapsed().as_secs() < 60;
    line(
        7,
        "routing vs exact oracle",
        pass,
        &format!(
            "{within}/20 feasible and within 5%, worst gap {:.2}%, paths legal and acyclic {legal}",
            100.0 * worst
        ),
        t,
    );
}

struct SynthRun {
    deadlocks: usize,
    mesh_uniform: Option<SimReport<f64>>,
    bnit_uniform: Option<SimReport<f64>>,
}

fn c8_deadlock(mesh: &Topology, mesh_ts: &TurnSet, bnit_t: &Topology, bnit_ts: &TurnSet) -> SynthRun {
    let t = Instant::now();
    let p = PowerParams::<f64>::default();
    let cfg = SimConfig::default();
    let mut out = SynthRun {
        deadlocks: 0,
        mesh_uniform: None,
        bnit_uniform: None,
    };
    let mut congested = Vec::new();
    for (name, topo, ts) in [("mesh", mesh, mesh_ts), ("bnit", bnit_t, bnit_ts)] {
        let table = RouteTable::min_hop(topo, ts);
        for pattern in Pattern::ALL {
            for rate in [1e-4, 1e-3, 2e-3] {
                let r = run(topo, &table, &TrafficSpec::Synthetic { pattern, rate }, &cfg, &p).unwrap();
                if r.deadlock {
                    out.deadlocks += 1;
                }
                if r.congested {
                    congested.push(format!("{name}/{pattern}/{rate}"));
                }
                if pattern == Pattern::Uniform && rate == 2e-3 {
                    if name == "mesh" {
                        out.mesh_uniform = Some(r);
                    } else {
                        out.bnit_uniform = Some(r);
                    }
                }
            }
        }
    }
    let pass = out.deadlocks == 0 && t.elapsed().as_secs() < 1800;
    line(
        8,
        "deadlock freedom",
        pass,
        &format!(
            "24 runs, {} watchdog firings, congested: [{}]",
            out.deadlocks,
            congested.join(" ")
        ),
        t,
    );
    out
}

fn c9_latency(s: &SynthRun, started: Instant) {
    let (Some(m), Some(b)) = (&s.mesh_uniform, &s.bnit_uniform) else {
        line(9, "latency trend", false, "uniform runs missing", started);
        return;
    };
    let ratio = b.avg_latency / m.avg_latency;
    line(
        9,
        "latency trend",
        ratio <= 0.7,
        &format!(
            "uniform 2e-3: BNIT {:.2} vs mesh {:.2} cycles, ratio {ratio:.3}",
            b.avg_latency, m.avg_latency
        ),
        started,
    );
    let bufx = |r: &SimReport<f64>| r.power.buffer_read + r.power.buffer_write + r.power.crossbar;
    note(&format!(
        "buffer+crossbar power mesh/BNIT {:.2} (mesh {:.4} W, BNIT {:.4} W)",
        bufx(m) / bufx(b),
        bufx(m),
        bufx(b)
    ));
}

fn c10_zero_load(topos: &[(&Topology, &TurnSet)]) {
    let t = Instant::now();
    let p = PowerParams::<f64>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    let mut exact = 0;
    for cfg in [
        SimConfig::default(),
        SimConfig {
            packet_flits: 10,
            ..SimConfig::default()
        },
    ] {
        let two = build_mesh(2).unwrap();
        let mut cases: Vec<(&Topology, Vec<usize>)> = vec![(&two, vec![0, 1])];
        for &(topo, ts) in topos {
            let table = RouteTable::min_hop(topo, ts);
            for _ in 0..25 {
                let (a, b) = (rng.gen_range(0..topo.node_count()), rng.gen_range(0..topo.node_count()));
                if a != b {
                    cases.push((topo, table.path(a, b).unwrap()));
                }
            }
        }
        for (topo, path) in cases {
            checked += 1;
            let sim = single_packet_latency(topo, &path, &cfg, &p).unwrap();
            if sim == zero_load_latency(topo, &path, &cfg, &p).unwrap() {
                exact += 1;
            }
        }
    }
    line(
        10,
        "zero-load exactness",
        exact == checked && t.elapsed().as_secs_f64() < 1.0,
        &format!("{exact}/{checked} single packets match the closed form"),
        t,
    );
}

struct AppRun {
    success: f64,
    sim: SimReport<f64>,
}

fn app_pipeline(topo: &Topology, ts: &TurnSet) -> AppRun {
    // about two flows per task, the density of the synthetic benchmarks
    let tg = planted_task_graph::<f64>(1024, 32, 1, 1, (2.0, 300.0), 1).unwrap();
    let part: CommunityPartition<f64> = detect_communities(topo, 150);
    let hubs = classify_hubs(topo, &part);
    let hops = all_pairs_min_hop(topo).unwrap();
    let mapped = map_tasks(topo, &hops, &tg, &part, &hubs, &MappingCostParams::default()).unwrap();
    let params = RoutingParams::<f64>::default();
    let problem = RoutingProblem::new(topo, mapped.core_flows.clone(), &params).unwrap();
    let routed = lagrangian_route(&problem, ts).unwrap();
    let (traffic, rejected) = traffic_from_flows(
        &problem.flows,
        params.link_capacity,
        SimConfig::APPLICATION_PACKET_FLITS,
    )
    .unwrap();
    assert!(rejected.is_empty());
    let table = RouteTable::from_paths(routed.paths.iter().cloned()).with_fallback(topo, ts);
    let cfg = SimConfig {
        packet_flits: SimConfig::APPLICATION_PACKET_FLITS,
        ..SimConfig::default()
    };
    let sim = run(topo, &table, &traffic, &cfg, &PowerParams::default()).unwrap();
    AppRun {
        success: routed.success,
        sim,
    }
}

fn c11_application(mesh: &Topology, mesh_ts: &TurnSet, bnit_t: &Topology, bnit_ts: &TurnSet) {
    let t = Instant::now();
    let b = app_pipeline(bnit_t, bnit_ts);
    let m = app_pipeline(mesh, mesh_ts);
    let ratio = b.sim.avg_hops / m.sim.avg_hops;
    let pass = b.success >= 85.0 && ratio <= 0.6 && t.elapsed().as_secs() < 2700;
    line(
        11,
        "end-to-end application",
        pass,
        &format!(
            "BNIT success {:.2}%, packet hops BNIT {:.3} vs mesh {:.3} (ratio {ratio:.3})",
            b.success, b.sim.avg_hops, m.sim.avg_hops
        ),
        t,
    );
    note(&format!(
        "mesh success {:.2}%; latency BNIT {:.2} vs mesh {:.2}; congested BNIT {} mesh {}",
        m.success, b.sim.avg_latency, m.sim.avg_latency, b.sim.congested, m.sim.congested
    ));
}

/// Every artifact of a small pipeline, serialized.
fn artifacts(seed: u64) -> Vec<String> {
    let n = 256;
    let topo = bnit(n).topology;
    let mut sc = SweepConfig::new(n, 15, 15, (0.6f64, 0.8), (1.3, 1.5));
    sc.power_threshold = 2.0;
    let sw = sweep(&sc).unwrap();
    let part: CommunityPartition<f64> = detect_communities(&topo, 60);
    let hubs = classify_hubs(&topo, &part);
    let tg = planted_task_graph::<f64>(200, 8, 3, 1, (2.0, 300.0), seed).unwrap();
    let hops = all_pairs_min_hop(&topo).unwrap();
    let mut mp = MappingCostParams::<f64>::default();
    mp.sa.seed = seed;
    let mapped = map_tasks(&topo, &hops, &tg, &part, &hubs, &mp).unwrap();
    let ts = turn_prohibition(&topo).unwrap();
    let problem = RoutingProblem::new(&topo, mapped.core_flows.clone(), &RoutingParams::default()).unwrap();
    let routed = lagrangian_route(&problem, &ts).unwrap();
    let entries: Vec<io::RouteEntry> = routed
        .paths
        .iter()
        .map(|p| io::RouteEntry {
            nodes: p.clone(),
            feasible: true,
        })
        .collect();
    let (traffic, _) = traffic_from_flows(&problem.flows, 4000.0, 10).unwrap();
    let table = RouteTable::from_paths(routed.paths.iter().cloned()).with_fallback(&topo, &ts);
    let cfg = SimConfig {
        packet_flits: 10,
        warmup_cycles: 2000,
        measure_cycles: 10000,
        seed,
        ..SimConfig::default()
    };
    let sim = run(&topo, &table, &traffic, &cfg, &PowerParams::<f64>::default()).unwrap();
    let synth = run(
        &topo,
        &RouteTable::min_hop(&topo, &ts),
        &TrafficSpec::Synthetic {
            pattern: Pattern::Randperm,
            rate: 0.002,
        },
        &cfg,
        &PowerParams::<f64>::default(),
    )
    .unwrap();
    vec![
        io::write_topology(&topo),
        sw.to_csv(),
        io::write_topology(&sw.topology),
        io::write_partition(&part),
        io::write_hubs(&hubs),
        io::write_placement(&mapped.placement.core_of),
        io::write_routes(&entries),
        format!("{sim}\n{}", sim.csv_row()),
        format!("{synth}\n{}", synth.csv_row()),
    ]
}

fn c12_determinism() {
    let t = Instant::now();
    let a = artifacts(3);
    let b = artifacts(3);
    let same = a.iter().zip(&b).filter(|(x, y)| x == y).count();
    line(
        12,
        "determinism",
        same == a.len() && t.elapsed().as_secs() < 300,
        &format!("{same}/{} artifacts byte-identical across reruns", a.len()),
        t,
    );
}

#[test]
fn acceptance_criteria() {
    c1_ma_table();
    c2_baselines();
    let t3 = Instant::now();
    let g1024 = bnit(1024);
    let hop_1024 = c3_bnit_structure(&g1024, t3);
    let t4 = Instant::now();
    let g4096 = bnit(4096);
    c4_scaling(hop_1024, &g4096, t4);
    c5_distributions(&g1024);
    c6_communities(&g1024, &g4096);
    drop(g4096);
    c7_routing_vs_oracle();
    let mesh = build_mesh(32).unwrap();
    let mesh_ts = turn_prohibition(&mesh).unwrap();
    let bnit_ts = turn_prohibition(&g1024.topology).unwrap();
    let synth = c8_deadlock(&mesh, &mesh_ts, &g1024.topology, &bnit_ts);
    let t9 = Instant::now();
    c9_latency(&synth, t9);
    c10_zero_load(&[(&mesh, &mesh_ts), (&g1024.topology, &bnit_ts)]);
    c11_application(&mesh, &mesh_ts, &g1024.topology, &bnit_ts);
    c12_determinism();
    assert!(paths_cdg_acyclic(&mesh, &[]));
}
