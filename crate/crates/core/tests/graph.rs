mod oracles;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hgrl_core::graph::{
    attention_entropy_compare, attention_premise_holds, binary_degree, build_base_adjacency, build_multilevel_graph,
    following_weight, lane_change_weight, node_removal_degree_delta, undirected_edge_count, weighted_degree,
    AdjTag, AttentionMaps, FeatureScale, GraphThresholds, WeightedAdjacency,
};
use hgrl_core::sim::{RoadConfig, VehicleKind, VehicleState};

fn car(id: u32, kind: VehicleKind, lane: u8, pos: f64, speed: f64) -> VehicleState {
    VehicleState::new(id, kind, lane, pos, speed, &RoadConfig::default())
}

#[test]
fn multilevel_graph_matches_all_pairs_oracle() {
    let t = GraphThresholds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let world = oracles::random_world(&mut rng, 6);
        let g = build_multilevel_graph(&world, &t, &BTreeMap::new(), &FeatureScale::default(), 0).unwrap();
        let (ids, l, f) = oracles::brute_force_multilevel(&world, &t);
        assert_eq!(g.adj_l.ids, ids);
        assert_eq!(g.adj_f.ids, ids);
        let n = ids.len();
        for i in 0..n {
            for j in 0..n {
                assert!((g.adj_l.get(i, j) - l[i * n + j]).abs() <= 1e-12, "L {i},{j} in {world:?}");
                assert!((g.adj_f.get(i, j) - f[i * n + j]).abs() <= 1e-12, "F {i},{j} in {world:?}");
            }
        }
    }
}

#[test]
fn removing_a_node_lowers_each_degree_by_its_edge_weight_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let n = rng.random_range(2..=30);
        let adj = oracles::dyadic_graph(&mut rng, n);
        for &u in &adj.ids {
            let d = node_removal_degree_delta(&adj, u).unwrap();
            for (&v, &delta) in &d.weighted {
                assert_eq!(delta, -adj.weight(v, u).unwrap());
            }
        }
    }
}

#[test]
fn removal_is_accurate_for_arbitrary_real_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let n = rng.random_range(2..=30);
        let data: Vec<f64> =
            (0..n * n).map(|k| if k % (n + 1) == 0 { 1.0 } else if rng.random_bool(0.4) { rng.random() } else { 0.0 }).collect();
        let adj = WeightedAdjacency::from_dense(AdjTag::F, (0..n as u32).collect(), data).unwrap();
        let u = rng.random_range(0..n as u32);
        let d = node_removal_degree_delta(&adj, u).unwrap();
        for (&v, &delta) in &d.weighted {
            assert!((delta + adj.weight(v, u).unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn binary_removal_severs_unit_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n = rng.random_range(2..=20);
        let mut adj = oracles::dyadic_graph(&mut rng, n);
        for i in 0..n {
            for j in 0..n {
                if adj.get(i, j) > 0.0 {
                    adj.set(i, j, 1.0);
                }
            }
        }
        let u = rng.random_range(0..n as u32);
        let d = node_removal_degree_delta(&adj, u).unwrap();
        let ui = adj.index_of(u).unwrap();
        let touching = (0..n).filter(|&j| j != ui && (adj.get(ui, j) > 0.0 || adj.get(j, ui) > 0.0)).count();
        assert_eq!(d.edges_before - d.edges_after, touching);
        for (&v, &b) in &d.binary {
            assert_eq!(b, -(adj.weight(v, u).unwrap() as i64));
        }
    }
}

/// An HV in the adjacent lane pulls away from a CAV at constant relative
/// speed: the weighted degree falls smoothly, the binary degree drops by one.
#[test]
fn drifting_neighbor_smooth_versus_binary_jump() {
    let t = GraphThresholds::default();
    let (speed, dt) = (4.0, 0.1);
    let mut weighted = Vec::new();
    let mut binary = Vec::new();
    for k in 0..200 {
        let world = vec![
            car(0, VehicleKind::Cav, 1, 100.0, 20.0),
            car(1, VehicleKind::Hv, 2, 130.0 + speed * dt * f64::from(k), 24.0),
        ];
        let g = build_multilevel_graph(&world, &t, &BTreeMap::new(), &FeatureScale::default(), k as u64).unwrap();
        weighted.push(weighted_degree(&g.adj_l, 0).unwrap());
        binary.push(binary_degree(&build_base_adjacency(&world, &t).unwrap(), 0).unwrap());
    }
    let bound = speed * dt / t.x + 1e-12;
    assert!(weighted.windows(2).all(|w| (w[1] - w[0]).abs() <= bound));
    let jumps: Vec<i64> = binary.windows(2).map(|w| w[1] as i64 - w[0] as i64).filter(|&d| d != 0).collect();
    assert_eq!(jumps, vec![-1]);
    assert_eq!(weighted[0], 1.0 - 30.0 / 50.0);
    assert_eq!(*weighted.last().unwrap(), 0.0);
}

#[test]
fn concentrated_sub_attention_has_lower_entropy() {
    let world: Vec<VehicleState> = (0..30).map(|i| car(i, VehicleKind::Cav, (i % 3) as u8, 10.0 * f64::from(i), 15.0)).collect();
    let g = build_multilevel_graph(&world, &GraphThresholds::default(), &BTreeMap::new(), &FeatureScale::default(), 0)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (sub, global) = oracles::entropy_instance(&mut rng);
        assert!(attention_premise_holds(&sub, &global));
        let maps = AttentionMaps { l: sub.clone(), f: sub.clone(), global: global.clone() };
        let h = attention_entropy_compare(&g, &maps).unwrap();
        assert!(h.h_l < h.h_g);
        let (ps, pg): (Vec<f64>, Vec<f64>) = (sub.values().copied().collect(), global.values().copied().collect());
        assert!((h.h_l - oracles::entropy(&ps)).abs() < 1e-12);
        assert!((h.h_g - oracles::entropy(&pg)).abs() < 1e-12);
    }
}

#[test]
fn entropy_rejects_unknown_nodes_and_unnormalized_maps() {
    let world = vec![car(0, VehicleKind::Cav, 0, 0.0, 10.0), car(1, VehicleKind::Hv, 0, 20.0, 10.0)];
    let g = build_multilevel_graph(&world, &GraphThresholds::default(), &BTreeMap::new(), &FeatureScale::default(), 0)
        .unwrap();
    let ok = BTreeMap::from([(0, 0.5), (1, 0.5)]);
    let unknown = AttentionMaps { l: BTreeMap::from([(7, 1.0)]), f: ok.clone(), global: ok.clone() };
    assert!(attention_entropy_compare(&g, &unknown).is_err());
    let partial = AttentionMaps { l: BTreeMap::from([(0, 0.6)]), f: ok.clone(), global: ok };
    assert!(attention_entropy_compare(&g, &partial).is_err());
}

proptest! {
    #[test]
    fn lane_weight_is_linear_ramp(d in 0.0..200.0f64, x in 1.0..100.0f64) {
        let w = lane_change_weight(d, x).unwrap();
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!((w - oracles::lane_weight(d, x)).abs() < 1e-12);
        prop_assert!(lane_change_weight(d + 0.5, x).unwrap() <= w);
        prop_assert_eq!(lane_change_weight(x, x).unwrap(), 0.0);
    }

    #[test]
    fn lane_weight_is_continuous(d in 0.0..100.0f64) {
        let (a, b) = (lane_change_weight(d, 50.0).unwrap(), lane_change_weight(d + 1e-6, 50.0).unwrap());
        prop_assert!((a - b).abs() <= 1e-6 / 50.0 + 1e-12);
    }

    #[test]
    fn follow_weight_monotone(d in 0.0..79.0f64, dv in -30.0..30.0f64, step in 0.0..5.0f64) {
        let t = GraphThresholds::default();
        let w = following_weight(d, dv, &t).unwrap();
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!((w - oracles::follow_weight(d, dv, &t)).abs() < 1e-12);
        prop_assert!(following_weight(d, dv.abs() + step, &t).unwrap() >= w);
        prop_assert!(following_weight((d + step).min(79.9), dv, &t).unwrap() <= w);
        let near = following_weight(d + 1e-7, dv, &t).unwrap();
        prop_assert!((near - w).abs() < 1e-8);
    }

    #[test]
    fn dimensions_stay_separated(seed in any::<u64>()) {
        let world = oracles::random_world(&mut ChaCha8Rng::seed_from_u64(seed), 8);
        let g = build_multilevel_graph(&world, &GraphThresholds::default(), &BTreeMap::new(), &FeatureScale::default(), 0).unwrap();
        let lane: BTreeMap<u32, &VehicleState> = world.iter().filter(|v| v.active).map(|v| (v.id, v)).collect();
        for (i, j, w) in g.adj_l.edges() {
            prop_assert!(lane[&i].lane.abs_diff(lane[&j].lane) == 1 && lane[&i].is_cav() && w <= 1.0);
        }
        for (i, j, w) in g.adj_f.edges() {
            prop_assert!(lane[&i].lane == lane[&j].lane && lane[&i].is_cav() && w <= 1.0);
        }
        for adj in [&g.adj_l, &g.adj_f] {
            for k in 0..adj.len() {
                prop_assert_eq!(adj.get(k, k), 1.0);
            }
        }
        let base = build_base_adjacency(&world, &GraphThresholds::default()).unwrap();
        for (i, _, w) in base.edges() {
            prop_assert!(lane[&i].is_cav() && w == 1.0);
        }
        prop_assert!(undirected_edge_count(&base) <= base.len() * (base.len() - 1) / 2);
    }
}
