use proptest::prelude::*;

use brainnoc::grid::{manhattan, metrics};
use brainnoc::topogen::{
    compute_ma, degree_frequencies, grow, grow_detailed, link_length_distribution, sweep, GrowthParams, SweepConfig,
};

fn params(t: usize, m: usize, gamma: f64, beta: f64) -> GrowthParams<f64> {
    let l_a = 15.min(2 * (t - 1));
    GrowthParams::new(t * t, m, l_a, gamma, beta)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grown_topologies_respect_caps(
        t in 6usize..=14,
        m in 8usize..=16,
        gamma in 0.5f64..2.5,
        beta in 0.8f64..2.0,
    ) {
        let p = params(t, m, gamma, beta);
        let g = grow_detailed(&p).unwrap();
        let topo = &g.topology;
        prop_assert!(g.m_a <= m);
        prop_assert!(topo.max_degree() <= g.m_a);
        prop_assert!(topo.is_connected());
        for l in topo.links() {
            prop_assert_eq!(l.length, manhattan(topo.coord(l.u), topo.coord(l.v)));
            prop_assert!(l.length >= 1);
        }
        let over = topo.links().iter().filter(|l| l.length as usize > p.l_a).count();
        prop_assert_eq!(over, g.over_length_links);
    }

    #[test]
    fn average_degree_near_twice_k(t in 10usize..=20, gamma in 0.6f64..1.6) {
        let p = params(t, 15, gamma, 1.4);
        let topo = grow(&p).unwrap();
        let n = topo.node_count() as f64;
        let init_links = 2 * p.init_side * (p.init_side - 1);
        let avg = 2.0 * topo.link_count() as f64 / n;
        prop_assert!((avg - 2.0 * p.k as f64).abs() <= 2.0 * init_links as f64 / n);
    }

    #[test]
    fn frequencies_are_distributions(m in 15usize..=40, gamma in 0.5f64..3.0) {
        let m_a = compute_ma(m, 2, gamma).unwrap();
        let f = degree_frequencies(m_a, 2, gamma).unwrap();
        prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(f.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn length_law_is_a_distribution(l_a in 1usize..=20, beta in 0.2f64..3.0) {
        let p = link_length_distribution(beta, l_a, 32).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cap_never_exceeds_switch_size(m in 5usize..=40, gamma in 0.2f64..4.0) {
        match compute_ma(m, 2, gamma) {
            Ok(ma) => prop_assert!(ma <= m && ma > 4),
            Err(_) => prop_assert!(m < 15 || gamma < 0.5),
        }
    }
}

#[test]
fn growth_is_reproducible() {
    let p = params(16, 15, 0.7, 1.4);
    assert_eq!(grow(&p).unwrap(), grow(&p).unwrap());
}

#[test]
fn link_count_is_fixed_by_growth() {
    // seed mesh plus k links per added node
    let p = params(20, 15, 0.7, 1.4);
    let topo = grow(&p).unwrap();
    let seed = p.init_side * p.init_side;
    let init_links = 2 * p.init_side * (p.init_side - 1);
    assert_eq!(topo.link_count(), init_links + p.k * (p.n - seed));
}

#[test]
fn sweep_selects_best_objective_within_power() {
    let mut cfg = SweepConfig::new(144, 15, 15, (0.6f64, 0.9), (1.2, 1.5));
    cfg.power_threshold = 2.0;
    let r = sweep(&cfg).unwrap();
    assert_eq!(r.entries.len(), 16);
    let sel = r.best();
    assert!(sel.power <= r.power_threshold * r.mesh_power);
    for e in &r.entries {
        assert!(e.obj > 0.0 && e.obj <= 1.0 + 1e-12, "obj {} out of range", e.obj);
        assert!(e.obj <= sel.obj + 1e-12);
    }
    let m = metrics::<f64>(&r.topology).unwrap();
    assert_eq!(m.rough_comm_cost, sel.comm_cost);
    assert_eq!(r.topology.total_wire_length(), sel.wire_length);
}

#[test]
fn rejects_invalid_parameters() {
    assert!(grow(&GrowthParams::new(1000, 15, 15, 0.7f64, 1.4)).is_err());
    assert!(grow(&GrowthParams::new(1024, 4, 15, 0.7f64, 1.4)).is_err());
    assert!(grow(&GrowthParams::new(64, 15, 15, 0.7f64, 1.4)).is_err());
    assert!(grow(&GrowthParams::new(64, 15, 10, -1.0f64, 1.4)).is_err());
}
