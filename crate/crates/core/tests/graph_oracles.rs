mod common;

use std::sync::Arc;

use cogperc::graph::theta_estimate;
use cogperc::pointprocess::sample_primary_field;
use cogperc::{
    build_comm_graph, build_topo_graph, crossing_exists, has_bidirectional_opportunity,
    has_opportunity, sample_primary_slot, sample_secondary_network, BoxRegion, LinkGraph,
    OpportunityContext, Orientation, Point2D, PrimarySlotRealization, SecondaryNetwork, SeededRng,
    SimulationParams,
};
use common::*;
use rand::Rng;

fn instance(seed: u64, n: usize, side: f64) -> (Arc<SecondaryNetwork>, BoxRegion) {
    let region = BoxRegion::centered_square(0.5 * side).unwrap();
    let mut rng = SeededRng::new(seed).rng();
    let pts = uniform_points(n, &region, &mut rng);
    (
        Arc::new(SecondaryNetwork::from_points(pts, region, 0.05).unwrap()),
        region,
    )
}

#[test]
fn opportunity_matches_linear_scan() {
    let params = SimulationParams::reference(50.0, 0.0);
    let region = BoxRegion::centered_square(0.5).unwrap();
    let mut rng = SeededRng::new(1).rng();
    for slot in 0..20 {
        let field = sample_primary_slot(&params, &region, slot, &SeededRng::new(2));
        let ctx = OpportunityContext::new(&field, &params);
        for _ in 0..200 {
            let a = region.point_at(rng.random(), rng.random());
            let b = region.point_at(rng.random(), rng.random());
            let tx_ok = !field
                .rx_points()
                .iter()
                .any(|q| within(&a, q, params.secondary_interference_range));
            let rx_ok = !field
                .tx_points()
                .iter()
                .any(|q| within(&b, q, params.primary_interference_range));
            assert_eq!(has_opportunity(&a, &b, &ctx), tx_ok && rx_ok);
            assert_eq!(
                has_bidirectional_opportunity(&a, &b, &ctx),
                available(&a, &field, &params) && available(&b, &field, &params)
            );
        }
    }
}

#[test]
fn coincident_pair_positions() {
    // A primary pair sitting exactly on a secondary node blocks it both ways.
    let params = SimulationParams::reference(10.0, 0.0);
    let p = Point2D::new(0.1, 0.1);
    let field = PrimarySlotRealization::from_pairs(0, vec![p], vec![p], 0.08);
    let ctx = OpportunityContext::new(&field, &params);
    let q = Point2D::new(0.13, 0.1);
    assert!(!has_opportunity(&p, &q, &ctx));
    assert!(!has_opportunity(&q, &p, &ctx));
    let far = Point2D::new(0.3, 0.3);
    let far2 = Point2D::new(0.33, 0.3);
    assert!(has_bidirectional_opportunity(&far, &far2, &ctx));
}

#[test]
fn opportunity_monotone_under_superposition() {
    let params = SimulationParams::reference(10.0, 0.0);
    let region = BoxRegion::centered_square(0.4).unwrap();
    let (a, b) = (Point2D::new(-0.02, 0.0), Point2D::new(0.02, 0.0));
    for t in 0..300 {
        let base = sample_primary_field(10.0, &params, &region, t, &SeededRng::new(3));
        let extra = sample_primary_field(20.0, &params, &region, t, &SeededRng::new(4));
        let both = base.superposed(&extra);
        let small = has_bidirectional_opportunity(&a, &b, &OpportunityContext::new(&base, &params));
        let large = has_bidirectional_opportunity(&a, &b, &OpportunityContext::new(&both, &params));
        assert!(small || !large);
    }
}

#[test]
fn topo_edges_match_brute_force() {
    for seed in 0..10 {
        let (net, _) = instance(seed, 500, 1.0);
        let topo = build_topo_graph(Arc::clone(&net), 0.05);
        assert_eq!(normalized(topo.edges()), disk_edges(net.points(), 0.05));
        let labels = bfs_labels(net.len(), topo.edges());
        assert_eq!(topo.components().labels(), labels.as_slice());
    }
}

#[test]
fn topo_edges_with_coarse_and_fine_cells() {
    let region = BoxRegion::centered_square(0.5).unwrap();
    let mut rng = SeededRng::new(5).rng();
    let pts = uniform_points(400, &region, &mut rng);
    for cell in [0.01, 0.05, 0.3] {
        let net = Arc::new(SecondaryNetwork::from_points(pts.clone(), region, cell).unwrap());
        let topo = build_topo_graph(net, 0.07);
        assert_eq!(
            normalized(topo.edges()),
            disk_edges(&pts, 0.07),
            "cell {cell}"
        );
    }
}

#[test]
fn comm_edges_match_brute_force() {
    let params = SimulationParams::reference(30.0, 0.0);
    for seed in 0..10 {
        let (net, region) = instance(seed, 500, 1.0);
        let topo = build_topo_graph(Arc::clone(&net), params.secondary_range);
        let field = sample_primary_slot(&params, &region, seed, &SeededRng::new(7));
        let comm = build_comm_graph(&topo, &field, &params);
        let want = comm_edges(net.points(), &field, &params);
        assert_eq!(normalized(comm.edges()), want);
        assert_eq!(
            comm.components().labels(),
            bfs_labels(net.len(), &want).as_slice()
        );
        assert!(comm.edge_count() <= topo.edge_count());
    }
}

#[test]
fn crossing_matches_bfs() {
    let mut seen = [0usize; 2];
    for seed in 0..30 {
        let (net, region) = instance(seed, 500, 1.0);
        let topo = build_topo_graph(Arc::clone(&net), 0.05);
        for o in [Orientation::LeftRight, Orientation::TopBottom] {
            for rect in [
                region,
                region.shrunk(0.1).unwrap(),
                BoxRegion::new(-0.5, 0.2, -0.3, 0.1).unwrap(),
            ] {
                let got = crossing_exists(&topo, &rect, o, 0.05).unwrap();
                assert_eq!(
                    got,
                    bfs_crossing(net.points(), topo.edges(), &rect, o, 0.05)
                );
                seen[got as usize] += 1;
            }
        }
    }
    assert!(
        seen[0] > 0 && seen[1] > 0,
        "both outcomes exercised: {seen:?}"
    );
}

#[test]
fn degenerate_rectangle_rejected() {
    let (net, _) = instance(1, 50, 1.0);
    let topo = build_topo_graph(net, 0.05);
    let flat = BoxRegion {
        x_min: 0.0,
        x_max: 0.0,
        y_min: 0.0,
        y_max: 1.0,
    };
    assert!(crossing_exists(&topo, &flat, Orientation::LeftRight, 0.05).is_err());
}

#[test]
fn scale_invariance_of_graphs() {
    let params = SimulationParams::reference(10.0, 0.0);
    let region = BoxRegion::centered_square(0.75).unwrap();
    for s in [0.5, 2.0, 3.0] {
        let q = params.rescaled(s);
        let big = region.scaled(s).unwrap();
        let a = Arc::new(sample_secondary_network(
            &params,
            &region,
            &SeededRng::new(31),
        ));
        let b = Arc::new(sample_secondary_network(&q, &big, &SeededRng::new(31)));
        let ta = build_topo_graph(a, params.secondary_range);
        let tb = build_topo_graph(b, q.secondary_range);
        // Points near the range boundary can flip under rounding; require near equality.
        let diff = ta.edge_count().abs_diff(tb.edge_count());
        assert!(
            diff <= 2,
            "scale {s}: {} vs {}",
            ta.edge_count(),
            tb.edge_count()
        );
        let fa = sample_primary_slot(&params, &region, 0, &SeededRng::new(32));
        let fb = sample_primary_slot(&q, &big, 0, &SeededRng::new(32));
        assert_eq!(fa.len(), fb.len());
        let ca = build_comm_graph(&ta, &fa, &params);
        let cb = build_comm_graph(&tb, &fb, &q);
        assert!(ca.edge_count().abs_diff(cb.edge_count()) <= 2);
    }
}

#[test]
fn supercritical_and_subcritical_theta() {
    let region = BoxRegion::centered_square(1.0).unwrap();
    let rng = SeededRng::new(41);
    let free = SimulationParams {
        secondary_density: 900.0,
        ..SimulationParams::reference(0.0, 0.0)
    };
    let t = theta_estimate(&free, &region, 10, &rng);
    assert!(t.is_positive() && t.estimate > 0.8, "{t:?}");
    let sparse = SimulationParams {
        secondary_density: 300.0,
        ..free
    };
    assert_eq!(theta_estimate(&sparse, &region, 10, &rng).estimate, 0.0);
    let crowded = SimulationParams::reference(50.0, 0.0);
    assert!(!theta_estimate(&crowded, &region, 10, &rng).is_positive());
}
