use proptest::prelude::*;

use brainnoc::grid::{build_mesh, Topology};
use brainnoc::mapping::Flow;
use brainnoc::powermodel::{basic_power, PowerParams};
use brainnoc::routing::{turn_prohibition, RouteTable};
use brainnoc::simulator::{
    power_accounting, run, single_packet_latency, synthetic_pattern, traffic_from_flows, zero_load_latency, Activity,
    Destinations, InjectFlow, Pattern, SimConfig, TrafficSpec,
};
use brainnoc::topogen::{grow, GrowthParams};

fn short(seed: u64) -> SimConfig {
    SimConfig {
        warmup_cycles: 2_000,
        measure_cycles: 20_000,
        drain_cycles: 20_000,
        seed,
        ..SimConfig::default()
    }
}

fn grown(n: usize) -> Topology {
    let t = (n as f64).sqrt() as usize;
    grow(&GrowthParams::new(n, 15, 15.min(2 * (t - 1)), 0.7f64, 1.4)).unwrap()
}

#[test]
fn low_load_latency_matches_zero_load_mean() {
    let topo = build_mesh(8).unwrap();
    let ts = turn_prohibition(&topo).unwrap();
    let table = RouteTable::min_hop(&topo, &ts);
    let cfg = SimConfig {
        warmup_cycles: 5_000,
        measure_cycles: 200_000,
        ..SimConfig::default()
    };
    let p = PowerParams::<f64>::default();
    let mut sum = 0.0;
    let mut pairs = 0.0;
    for s in 0..64 {
        for d in 0..64 {
            if s != d {
                sum += zero_load_latency(&topo, &table.path(s, d).unwrap(), &cfg, &p).unwrap() as f64;
                pairs += 1.0;
            }
        }
    }
    let want = sum / pairs;
    let spec = TrafficSpec::Synthetic {
        pattern: Pattern::Uniform,
        rate: 1e-4,
    };
    let r = run(&topo, &table, &spec, &cfg, &p).unwrap();
    assert!(!r.congested);
    assert!(
        (r.avg_latency - want).abs() <= 0.05 * want,
        "{} vs {want}",
        r.avg_latency
    );
}

#[test]
fn latency_rises_with_load() {
    let topo = build_mesh(8).unwrap();
    let ts = turn_prohibition(&topo).unwrap();
    let table = RouteTable::min_hop(&topo, &ts);
    let p = PowerParams::<f64>::default();
    let cfg = SimConfig {
        measure_cycles: 60_000,
        ..short(2)
    };
    for pattern in Pattern::ALL {
        let mut last = 0.0;
        for rate in [1e-3, 5e-3, 1e-2] {
            let r = run(&topo, &table, &TrafficSpec::Synthetic { pattern, rate }, &cfg, &p).unwrap();
            assert!(!r.deadlock);
            assert!(
                r.avg_latency >= 0.98 * last,
                "{pattern} at {rate}: {} after {last}",
                r.avg_latency
            );
            last = r.avg_latency;
        }
    }
}

#[test]
fn packets_follow_table_paths() {
    let topo = grown(64);
    let ts = turn_prohibition(&topo).unwrap();
    let table = RouteTable::min_hop(&topo, &ts);
    let p = PowerParams::<f64>::default();
    for (s, d) in [(0, 63), (10, 20), (5, 6)] {
        let path = table.path(s, d).unwrap();
        let spec = TrafficSpec::Table {
            flows: vec![InjectFlow {
                src: s,
                dst: d,
                rate: 0.01,
            }],
        };
        let r = run(&topo, &table, &spec, &short(1), &p).unwrap();
        assert!(r.packets_delivered > 0);
        assert_eq!(r.avg_hops, (path.len() - 1) as f64);
        assert!(r.avg_latency >= zero_load_latency(&topo, &path, &short(1), &p).unwrap() as f64);
    }
}

#[test]
fn flits_are_conserved() {
    let topo = build_mesh(4).unwrap();
    let ts = turn_prohibition(&topo).unwrap();
    let table = RouteTable::min_hop(&topo, &ts);
    let spec = TrafficSpec::Synthetic {
        pattern: Pattern::Uniform,
        rate: 0.01,
    };
    let r = run(&topo, &table, &spec, &short(3), &PowerParams::<f64>::default()).unwrap();
    assert!(!r.congested);
    assert_eq!(r.flits_delivered + r.flits_outstanding, r.flits_injected);
    assert!(r.packets_delivered <= r.packets_injected);
    assert_eq!(r.flits_injected, r.packets_injected * 5);
}

#[test]
fn heavy_load_is_flagged() {
    let topo = build_mesh(4).unwrap();
    let ts = turn_prohibition(&topo).unwrap();
    let table = RouteTable::min_hop(&topo, &ts);
    let spec = TrafficSpec::Synthetic {
        pattern: Pattern::Bitcomp,
        rate: 0.5,
    };
    let r = run(&topo, &table, &spec, &short(3), &PowerParams::<f64>::default()).unwrap();
    assert!(r.congested);
    assert!(r.packets_delivered <= r.packets_injected);
    assert!(r.accepted_throughput < r.offered_throughput);
}

#[test]
fn idle_network_draws_basic_power() {
    let topo = build_mesh(4).unwrap();
    let ts = turn_prohibition(&topo).unwrap();
    let table = RouteTable::min_hop(&topo, &ts);
    let p = PowerParams::<f64>::default();
    let r = run(&topo, &table, &TrafficSpec::Table { flows: vec![] }, &short(1), &p).unwrap();
    assert_eq!(r.power.communication, 0.0);
    assert_eq!(r.power.total, basic_power(&topo, &p).total);
}

#[test]
fn doubling_activity_doubles_energy() {
    let p = PowerParams::<f64>::default();
    let a = Activity {
        buffer_writes: 700,
        buffer_reads: 700,
        crossbar_port_flits: 3500,
        crossbar_flits: 700,
        link_unit_flits: 900,
        allocator_ops: 200,
    };
    let b = Activity {
        buffer_writes: 1400,
        buffer_reads: 1400,
        crossbar_port_flits: 7000,
        crossbar_flits: 1400,
        link_unit_flits: 1800,
        allocator_ops: 400,
    };
    let x = power_accounting(&a, 0.0, 32, 1000, &p);
    let y = power_accounting(&b, 0.0, 32, 1000, &p);
    let bx = |s: &brainnoc::simulator::SimPower<f64>| s.buffer_read + s.buffer_write + s.crossbar;
    assert!((bx(&y) - 2.0 * bx(&x)).abs() <= 1e-12 * bx(&y));
    assert!((y.communication - 2.0 * x.communication).abs() <= 1e-12 * y.communication);
}

#[test]
fn application_rates() {
    let flows = vec![Flow::new(0, 1, 4000.0f64), Flow::new(2, 3, 100.0), Flow::new(1, 2, 0.0)];
    let (TrafficSpec::Table { flows: t }, rejected) = traffic_from_flows(&flows, 4000.0, 10).unwrap() else {
        panic!("expected a table")
    };
    assert!(rejected.is_empty());
    assert_eq!(t.len(), 2);
    assert!((t[0].rate - 0.1).abs() < 1e-15);
    assert!((t[1].rate - 0.0025).abs() < 1e-15);
}

#[test]
fn patterns_are_permutations() {
    for kind in [Pattern::Shuffle, Pattern::Bitcomp, Pattern::Randperm] {
        let Destinations::Fixed(map) = synthetic_pattern(kind, 256, 4).unwrap() else {
            panic!("{kind} should be fixed")
        };
        let mut seen = vec![false; 256];
        for &d in &map {
            assert!(!std::mem::replace(&mut seen[d], true), "{kind} repeats {d}");
        }
    }
    assert!(synthetic_pattern(Pattern::Bitcomp, 100, 0).is_err());
    assert!(synthetic_pattern(Pattern::Randperm, 100, 0).is_ok());
}

#[test]
fn reports_are_reproducible() {
    let topo = grown(100);
    let ts = turn_prohibition(&topo).unwrap();
    let table = RouteTable::min_hop(&topo, &ts);
    let p = PowerParams::<f64>::default();
    let spec = TrafficSpec::Synthetic {
        pattern: Pattern::Uniform,
        rate: 0.005,
    };
    let a = run(&topo, &table, &spec, &short(9), &p).unwrap();
    let b = run(&topo, &table, &spec, &short(9), &p).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.csv_row(), b.csv_row());
    let c = run(&topo, &table, &spec, &short(10), &p).unwrap();
    assert_ne!(a.packets_injected, 0);
    assert_ne!(a, c);
}

#[test]
fn rejects_bad_rates() {
    let topo = build_mesh(2).unwrap();
    let ts = turn_prohibition(&topo).unwrap();
    let table = RouteTable::min_hop(&topo, &ts);
    let spec = TrafficSpec::Synthetic {
        pattern: Pattern::Uniform,
        rate: 1.5,
    };
    assert!(run(&topo, &table, &spec, &short(1), &PowerParams::<f64>::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn single_packets_hit_the_closed_form(
        seed in 0u64..1000,
        flits in 1usize..12,
        stages in 1u32..6,
        src in 0usize..64,
        dst in 0usize..64,
    ) {
        prop_assume!(src != dst);
        let topo = grown(64);
        let ts = turn_prohibition(&topo).unwrap();
        let table = RouteTable::min_hop(&topo, &ts);
        let cfg = SimConfig { packet_flits: flits, pipeline_stages: stages, seed, ..SimConfig::default() };
        let p = PowerParams::<f64>::default();
        let path = table.path(src, dst).unwrap();
        prop_assert_eq!(
            single_packet_latency(&topo, &path, &cfg, &p).unwrap(),
            zero_load_latency(&topo, &path, &cfg, &p).unwrap()
        );
    }
}
