use proptest::prelude::*;

use brainnoc::community::{classify_hubs, detect_communities, CommunityPartition};
use brainnoc::io::{
    ingest_snap, read_hubs, read_partition, read_placement, read_routes, read_task_graph, read_topology, read_traffic,
    write_hubs, write_partition, write_placement, write_routes, write_task_graph, write_topology, write_traffic,
    RouteEntry,
};
use brainnoc::mapping::{planted_task_graph, Flow, TaskGraph};
use brainnoc::simulator::InjectFlow;
use brainnoc::topogen::{grow, GrowthParams};
use brainnoc::Error;

fn line_of(e: Error) -> usize {
    match e {
        Error::Parse { line, .. } => line,
        other => panic!("expected a parse error, got {other}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn topology_and_communities_round_trip(t in 5usize..=10, gamma in 0.6f64..1.8, cap in 4usize..40) {
        let topo = grow(&GrowthParams::new(t * t, 15, 8, gamma, 1.4)).unwrap();
        let text = write_topology(&topo);
        let back = read_topology(&text).unwrap();
        prop_assert_eq!(&back, &topo);
        prop_assert_eq!(write_topology(&back), text);

        let part = detect_communities::<f64>(&topo, cap);
        let ptext = write_partition(&part);
        let pback: CommunityPartition<f64> = read_partition(&ptext, &topo, cap).unwrap();
        prop_assert_eq!(&pback.assign, &part.assign);
        prop_assert_eq!(write_partition(&pback), ptext);

        let hubs = classify_hubs(&topo, &part);
        let htext = write_hubs(&hubs);
        prop_assert_eq!(read_hubs(&htext).unwrap(), hubs.hubs);
    }

    #[test]
    fn task_artifacts_round_trip(tasks in 8usize..200, seed in 0u64..100) {
        let tg = planted_task_graph::<f64>(tasks, 4, 3, 1, (2.0, 300.0), seed).unwrap();
        let text = write_task_graph(&tg);
        let back: TaskGraph<f64> = read_task_graph(&text).unwrap();
        prop_assert_eq!(&back, &tg);
        prop_assert_eq!(write_task_graph(&back), text);

        let placement: Vec<usize> = (0..tasks).map(|i| (i + seed as usize) % tasks).collect();
        let ptext = write_placement(&placement);
        prop_assert_eq!(read_placement(&ptext).unwrap(), placement);

        let routes: Vec<RouteEntry> = tg.flows().iter().take(20).map(|f| RouteEntry {
            nodes: vec![f.src, (f.src + 1) % tasks, f.dst],
            feasible: f.demand > 100.0,
        }).collect();
        let rtext = write_routes(&routes);
        let rback = read_routes(&rtext).unwrap();
        prop_assert_eq!(&rback, &routes);
        prop_assert_eq!(write_routes(&rback), rtext);

        let traffic: Vec<InjectFlow<f64>> = tg.flows().iter().map(|f| InjectFlow {
            src: f.src,
            dst: f.dst,
            rate: f.demand / 40000.0,
        }).collect();
        let ttext = write_traffic(&traffic);
        let tback: Vec<InjectFlow<f64>> = read_traffic(&ttext).unwrap();
        prop_assert_eq!(&tback, &traffic);
        prop_assert_eq!(write_traffic(&tback), ttext);
    }
}

#[test]
fn errors_name_the_offending_line() {
    assert_eq!(
        line_of(read_topology("2 4\n0 0 0\n1 0 1\n\n2 1 0\n3 1 1\n0 1 0\n").unwrap_err()),
        7
    );
    assert_eq!(
        line_of(read_task_graph::<f64>("tasks 3\n0 1 5\n1 2 -1\n").unwrap_err()),
        3
    );
    assert_eq!(line_of(read_traffic::<f64>("0 1 0.5\n1 0 2\n").unwrap_err()), 2);
    assert_eq!(
        line_of(read_routes("0 2 2 0 1 2 1\n# note\n0 2 2 0 1 3 1\n").unwrap_err()),
        3
    );
    assert_eq!(line_of(ingest_snap::<f64>("1 2\n3 four\n").unwrap_err()), 2);
}

#[test]
fn hand_edge_list_is_renumbered() {
    let (tg, ids, summary) = ingest_snap::<f64>("5 9\n9 12 3\n12 5\n").unwrap();
    assert_eq!(ids, vec![5, 9, 12]);
    assert_eq!(summary.flows, 3);
    assert_eq!(tg.task_count(), 3);
    assert_eq!(
        tg.flows(),
        &[Flow::new(0, 1, 1.0), Flow::new(1, 2, 3.0), Flow::new(2, 0, 1.0)]
    );
}

#[test]
fn duplicate_edges_are_summed_and_round_trip() {
    let (tg, _, summary) = ingest_snap::<f64>("0 1 2\n0 1 5\n1 0\n0 1\n").unwrap();
    assert_eq!(summary.duplicates_merged, 2);
    assert_eq!(tg.flows(), &[Flow::new(0, 1, 8.0), Flow::new(1, 0, 1.0)]);
    let text = write_task_graph(&tg);
    assert_eq!(read_task_graph::<f64>(&text).unwrap(), tg);
}

#[test]
fn snap_layout_with_comment_header() {
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeSet;
    let (nodes, edges) = (1005usize, 25571usize);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut set: BTreeSet<(usize, usize)> = (0..nodes).map(|i| (i, (i + 1) % nodes)).collect();
    while set.len() < edges {
        let (u, v) = (rng.gen_range(0..nodes), rng.gen_range(0..nodes));
        if u != v {
            set.insert((u, v));
        }
    }
    let mut text = format!("# Directed graph\n# Nodes: {nodes} Edges: {edges}\n# FromNodeId\tToNodeId\n");
    for (u, v) in &set {
        text.push_str(&format!("{u}\t{v}\n"));
    }
    let (tg, ids, summary) = ingest_snap::<f64>(&text).unwrap();
    assert_eq!((summary.tasks, summary.flows), (nodes, edges));
    assert_eq!(tg.task_count(), nodes);
    assert_eq!(ids.len(), nodes);
    assert!(tg.flows().iter().all(|f| f.demand == 1.0));
}
