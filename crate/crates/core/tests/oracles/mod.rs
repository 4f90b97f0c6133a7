//! Independent reference implementations shared by the integration tests
//! and the acceptance harness. Written from the definitions, not the code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;

use hgrl_core::graph::{AdjTag, GraphThresholds, WeightedAdjacency};
use hgrl_core::sim::{RoadConfig, VehicleKind, VehicleState};

/// Four-phase braking distance, each phase written out separately.
pub fn braking_distance(v_e: f64, v_f: f64, t1: f64, t2: f64, t3: f64, d: f64, a_max: f64) -> f64 {
    let v_f = if v_f > v_e { v_e } else { v_f };
    let delay = t1 * v_e + t2 * v_e;
    let linear = t3 / 2.0 * (v_e - v_f);
    let constant = (v_e - v_f) * (v_e + v_f) / (2.0 * a_max);
    delay + linear + constant + d
}

pub fn kappa(d_sf: f64, d_es: f64) -> f64 {
    let r = d_sf / d_es - 1.0;
    if r > 1.0 {
        1.0
    } else {
        r
    }
}

pub fn lane_weight(d: f64, x: f64) -> f64 {
    if d >= x {
        0.0
    } else {
        (x - d) / x
    }
}

pub fn follow_weight(d: f64, dv: f64, t: &GraphThresholds) -> f64 {
    if d >= t.y {
        return 0.0;
    }
    let dv = if dv.abs() < t.eps_v { t.eps_v } else { dv.abs() };
    (-(d / t.lambda_d) - t.lambda_v / dv).exp()
}

/// `(pos, id)` order along the road.
fn before(a: &VehicleState, b: &VehicleState) -> bool {
    a.pos < b.pos || (a.pos == b.pos && a.id < b.id)
}

/// All-pairs lane-change and following adjacencies over active vehicles,
/// rows ordered by id. `j` is a following neighbor of `i` when no third
/// same-lane vehicle lies strictly between them.
pub fn brute_force_multilevel(world: &[VehicleState], t: &GraphThresholds) -> (Vec<u32>, Vec<f64>, Vec<f64>) {
    let mut vs: Vec<&VehicleState> = world.iter().filter(|v| v.active).collect();
    vs.sort_by_key(|v| v.id);
    let n = vs.len();
    let mut l = vec![0.0; n * n];
    let mut f = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (vs[i], vs[j]);
            if i == j {
                l[i * n + j] = 1.0;
                f[i * n + j] = 1.0;
                continue;
            }
            if a.kind != VehicleKind::Cav {
                continue;
            }
            let d = (a.pos - b.pos).abs();
            if (a.lane as i32 - b.lane as i32).abs() == 1 {
                l[i * n + j] = lane_weight(d, t.x);
            }
            if a.lane == b.lane {
                let (lo, hi) = if before(a, b) { (a, b) } else { (b, a) };
                let blocked = vs
                    .iter()
                    .any(|c| c.id != a.id && c.id != b.id && c.lane == a.lane && before(lo, c) && before(c, hi));
                if !blocked {
                    f[i * n + j] = follow_weight(d, a.speed - b.speed, t);
                }
            }
        }
    }
    (vs.iter().map(|v| v.id).collect(), l, f)
}

/// Up to `max_n` vehicles (some inactive) on a short stretch, with
/// occasional shared positions and speeds to exercise ties.
pub fn random_world(rng: &mut impl Rng, max_n: usize) -> Vec<VehicleState> {
    let road = RoadConfig::default();
    let n = rng.random_range(1..=max_n);
    let mut world: Vec<VehicleState> = Vec::with_capacity(n);
    let mut ids: Vec<u32> = (0..20).collect();
    for k in 0..n {
        let id = ids.swap_remove(rng.random_range(0..ids.len()));
        let kind = if rng.random_bool(0.5) { VehicleKind::Cav } else { VehicleKind::Hv };
        let lane = rng.random_range(0..3u8);
        let (pos, speed) = if k > 0 && rng.random_bool(0.2) {
            let other = &world[rng.random_range(0..k)];
            (other.pos, other.speed)
        } else {
            (rng.random_range(0.0..160.0), rng.random_range(0.0..35.0))
        };
        let mut v = VehicleState::new(id, kind, lane, pos, speed, &road);
        v.active = k == 0 || rng.random_bool(0.9);
        world.push(v);
    }
    world
}

/// Random weighted graph with weights that are multiples of 1/1024, so
/// every degree sum is exact in binary floating point.
pub fn dyadic_graph(rng: &mut impl Rng, n: usize) -> WeightedAdjacency {
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = if i == j {
                1.0
            } else if rng.random_bool(0.4) {
                f64::from(rng.random_range(1..=1024u32)) / 1024.0
            } else {
                0.0
            };
        }
    }
    WeightedAdjacency::from_dense(AdjTag::L, (0..n as u32).collect(), data).unwrap()
}

pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&q| q > 0.0).map(|q| -q * q.ln()).sum()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Attention-entropy instance in the regime where the premise implies the
/// conclusion: near-uniform global attention over `n ∈ [6, 30]` nodes and a
/// sub-dimension map on at most `n/3` of them, each above its global value.
pub fn entropy_instance(rng: &mut impl Rng) -> (BTreeMap<u32, f64>, BTreeMap<u32, f64>) {
    let n = rng.random_range(6..=30usize);
    let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let global: BTreeMap<u32, f64> = softmax(&logits).into_iter().enumerate().map(|(i, p)| (i as u32, p)).collect();
    let k = rng.random_range(1..=n / 3);
    let mut nodes: Vec<u32> = (0..n as u32).collect();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        chosen.push(nodes.swap_remove(rng.random_range(0..nodes.len())));
    }
    let sub_logits: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p = softmax(&sub_logits);
    // Mix toward uniform until every node beats its global value; the
    // uniform 1/k > 3/n already exceeds every near-uniform global entry.
    let mut mix = 1.0;
    loop {
        let sub: BTreeMap<u32, f64> =
            chosen.iter().zip(&p).map(|(&id, &q)| (id, mix * q + (1.0 - mix) / k as f64)).collect();
        if sub.iter().all(|(id, q)| q > &global[id]) {
            return (sub, global);
        }
        mix *= 0.5;
    }
}
