#![allow(dead_code)]

use hgrl_core::env::{AgentState, Dim};
use hgrl_core::graph::{DimTag, NodeFeatureMatrix};
use hgrl_nn::{Matrix, NetworkSpec, ParamStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hgrl_rl::config::NetConfig;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_net() -> NetConfig {
    NetConfig { encoder: 16, hidden: 16, trunk: 16, critic_trunk: 32, heads: 2, ..NetConfig::default() }
}

pub fn spec(dim: Dim, critic: bool) -> NetworkSpec {
    small_net().spec(dim, critic)
}

/// Random 4-node line-graph sample with the ego at node 0.
pub fn sample(dim: Dim, rng: &mut impl Rng) -> hgrl_nn::GraphSample {
    let tag = match dim {
        Dim::L => DimTag::L,
        Dim::F => DimTag::F,
    };
    let cols = NodeFeatureMatrix::column_names(tag).len();
    let features = Matrix::from_fn(4, cols, |_, _| rng.random_range(-1.0..1.0));
    let mut edges = Vec::new();
    for (u, v) in [(0, 1), (1, 2), (2, 3)] {
        let w = rng.random_range(0.2..1.0);
        edges.push((u, v, w));
        edges.push((v, u, w));
    }
    let state = (0..AgentState::len(dim)).map(|_| rng.random_range(-1.0..1.0)).collect();
    hgrl_nn::GraphSample { features, edges, ego: 0, state }
}

/// Zeroes every parameter, then sets the named ones.
pub fn set_params(store: &mut ParamStore, values: &[(&str, &[f64])]) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let name = store.name(id).to_string();
        let m = store.get_mut(id);
        let (r, c) = m.shape();
        *m = Matrix::zeros(r, c);
        if let Some((_, v)) = values.iter().find(|(n, _)| *n == name) {
            *m = Matrix::new(r, c, v.to_vec()).expect("shape");
        }
    }
}

/// Makes a dueling network output `q` for every input.
pub fn constant_q(store: &mut ParamStore, q: [f64; 3]) {
    let mean = q.iter().sum::<f64>() / 3.0;
    let adv = [q[0] - mean, q[1] - mean, q[2] - mean];
    set_params(store, &[("value.b", &[mean]), ("adv.b", &adv)]);
}
