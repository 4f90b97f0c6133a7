use std::rc::Rc;

use hgrl_nn::{EdgeIndex, GatLayer, GcnLayer, HeadAgg, Matrix, ParamStore, Tape};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn layer(input: usize, width: usize, heads: usize, seed: u64) -> (ParamStore, GatLayer) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let l = GatLayer::new(&mut store, "gat", input, width, heads, 0.2, HeadAgg::Sum, &mut rng).unwrap();
    (store, l)
}

fn forward(store: &ParamStore, l: &GatLayer, h: &Matrix, index: &Rc<EdgeIndex>) -> Matrix {
    let mut tape = Tape::new();
    let vars = store.bind(&mut tape);
    let x = tape.constant(h.clone());
    let out = l.forward(&mut tape, &vars, x, index).unwrap();
    tape.value(out).clone()
}

fn alphas(store: &ParamStore, l: &GatLayer, h: &Matrix, index: &Rc<EdgeIndex>) -> Vec<Vec<f64>> {
    let mut tape = Tape::new();
    let vars = store.bind(&mut tape);
    let x = tape.constant(h.clone());
    let heads = l.attention(&mut tape, &vars, x, index).unwrap();
    heads.into_iter().map(|a| tape.value(a).data().to_vec()).collect()
}

/// Dense reimplementation: masked softmax over `{v : a_uv > 0}` of
/// `exp(LeakyReLU(a·[Wh_u ‖ Wh_v])·a_uv)`, ReLU per head, heads summed.
fn dense_oracle(store: &ParamStore, l: &GatLayer, h: &Matrix, adj: &Matrix) -> Matrix {
    let n = h.rows();
    let mut out = Matrix::zeros(n, l.head_width);
    for head in &l.heads {
        let w = store.get(head.w);
        let ad = store.get(head.a_dst).data();
        let asrc = store.get(head.a_src).data();
        let z = h.matmul(w).unwrap();
        for u in 0..n {
            let nbrs: Vec<usize> = (0..n).filter(|&v| adj.get(u, v) > 0.0).collect();
            let logits: Vec<f64> = nbrs
                .iter()
                .map(|&v| {
                    let s: f64 = (0..l.head_width).map(|k| ad[k] * z.get(u, k) + asrc[k] * z.get(v, k)).sum();
                    let s = if s > 0.0 { s } else { 0.2 * s };
                    s * adj.get(u, v)
                })
                .collect();
            let denom: f64 = logits.iter().map(|x| x.exp()).sum();
            for k in 0..l.head_width {
                let acc: f64 = nbrs.iter().zip(&logits).map(|(&v, x)| x.exp() / denom * z.get(v, k)).sum();
                out.set(u, k, out.get(u, k) + acc.max(0.0));
            }
        }
    }
    out
}

#[test]
fn single_neighbor_gets_full_attention() {
    let (store, l) = layer(2, 3, 1, 0);
    let index = Rc::new(EdgeIndex::new(2, &[(0, 1, 0.4), (1, 1, 1.0)]).unwrap());
    let a = alphas(&store, &l, &Matrix::from_fn(2, 2, |i, j| (i + j) as f64), &index);
    assert_eq!(a[0], vec![1.0, 1.0]);
}

#[test]
fn symmetric_neighbors_split_evenly() {
    let (store, l) = layer(2, 3, 2, 1);
    let index = Rc::new(EdgeIndex::new(3, &[(0, 1, 1.0), (0, 2, 1.0)]).unwrap());
    let h = Matrix::from_rows(&[vec![0.3, -0.2], vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
    for head in alphas(&store, &l, &h, &index) {
        assert!((head[0] - 0.5).abs() < 1e-15 && (head[1] - 0.5).abs() < 1e-15);
    }
}

#[test]
fn identity_configuration_reproduces_input() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut l = GatLayer::new(&mut store, "gat", 3, 3, 1, 0.2, HeadAgg::Sum, &mut rng).unwrap();
    *store.get_mut(l.heads[0].w) = Matrix::identity(3);
    l.activate = false;
    let index = Rc::new(EdgeIndex::new(2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap());
    let h = Matrix::from_rows(&[vec![1.5, -2.0, 0.25], vec![-0.5, 0.0, 3.0]]).unwrap();
    assert_eq!(forward(&store, &l, &h, &index), h);
}

#[test]
fn zero_features_give_zero_output() {
    let (store, l) = layer(4, 5, 3, 3);
    let index = Rc::new(EdgeIndex::new(3, &[(0, 0, 1.0), (0, 1, 0.5), (1, 1, 1.0), (2, 2, 1.0), (2, 0, 0.2)]).unwrap());
    let out = forward(&store, &l, &Matrix::zeros(3, 4), &index);
    assert!(out.data().iter().all(|&x| x == 0.0));
}

#[test]
fn line_graph_matches_dense_oracle() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let l = GatLayer::new(&mut store, "gat", 2, 2, 2, 0.2, HeadAgg::Sum, &mut rng).unwrap();
    *store.get_mut(l.heads[0].w) = Matrix::from_rows(&[vec![1.0, 0.5], vec![-0.5, 1.0]]).unwrap();
    *store.get_mut(l.heads[0].a_dst) = Matrix::column(&[0.3, -0.7]);
    *store.get_mut(l.heads[0].a_src) = Matrix::column(&[1.1, 0.2]);
    *store.get_mut(l.heads[1].w) = Matrix::from_rows(&[vec![0.2, -1.0], vec![0.8, 0.4]]).unwrap();
    *store.get_mut(l.heads[1].a_dst) = Matrix::column(&[-0.4, 0.9]);
    *store.get_mut(l.heads[1].a_src) = Matrix::column(&[0.6, -0.3]);
    let adj = Matrix::from_rows(&[vec![1.0, 0.6, 0.0], vec![0.6, 1.0, 0.3], vec![0.0, 0.3, 1.0]]).unwrap();
    let h = Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.25, -0.75]]).unwrap();
    let index = Rc::new(EdgeIndex::from_dense(&adj).unwrap());
    let got = forward(&store, &l, &h, &index);
    assert!(got.max_abs_diff(&dense_oracle(&store, &l, &h, &adj)) < 1e-12);
}

#[test]
fn gcn_matches_dense_oracle() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let l = GcnLayer::new(&mut store, "gcn", 2, 3, &mut rng);
    let adj = Matrix::from_rows(&[vec![1.0, 0.5, 0.0], vec![0.5, 1.0, 0.8], vec![0.0, 0.0, 1.0]]).unwrap();
    let h = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.5], vec![-1.0, 3.0]]).unwrap();
    // Ã = offdiag(A) + I, row degrees, c_uv = ã_uv / √(d_u d_v).
    let n = 3;
    let a_tilde = Matrix::from_fn(n, n, |u, v| if u == v { 1.0 } else { adj.get(u, v) });
    let deg: Vec<f64> = (0..n).map(|u| (0..n).map(|v| a_tilde.get(u, v)).sum()).collect();
    let c = Matrix::from_fn(n, n, |u, v| a_tilde.get(u, v) / (deg[u] * deg[v]).sqrt());
    let hw = h.matmul(store.get(l.lin.w)).unwrap();
    let want = c.matmul(&hw).unwrap().map(|x| x.max(0.0));
    let index = Rc::new(EdgeIndex::from_dense(&adj).unwrap().gcn_normalized().unwrap());
    let mut tape = Tape::new();
    let vars = store.bind(&mut tape);
    let x = tape.constant(h.clone());
    let out = l.forward(&mut tape, &vars, x, &index).unwrap();
    assert!(tape.value(out).max_abs_diff(&want) < 1e-12);
}

#[test]
fn gcn_symmetric_nodes_agree_and_lone_node_passes_through() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut l = GcnLayer::new(&mut store, "gcn", 2, 2, &mut rng);
    let two = Rc::new(EdgeIndex::new(2, &[(0, 1, 0.7), (1, 0, 0.7)]).unwrap().gcn_normalized().unwrap());
    let mut tape = Tape::new();
    let vars = store.bind(&mut tape);
    let x = tape.constant(Matrix::filled(2, 2, 0.9));
    let out = l.forward(&mut tape, &vars, x, &two).unwrap();
    assert_eq!(tape.value(out).row(0), tape.value(out).row(1));

    *store.get_mut(l.lin.w) = Matrix::identity(2);
    l.activate = false;
    let one = Rc::new(EdgeIndex::new(1, &[(0, 0, 1.0)]).unwrap().gcn_normalized().unwrap());
    let mut tape = Tape::new();
    let vars = store.bind(&mut tape);
    let h = Matrix::from_rows(&[vec![-1.5, 2.5]]).unwrap();
    let x = tape.constant(h.clone());
    let out = l.forward(&mut tape, &vars, x, &one).unwrap();
    assert_eq!(tape.value(out), &h);
}

#[test]
fn shape_mismatch_is_rejected() {
    let (store, l) = layer(3, 2, 1, 7);
    let index = Rc::new(EdgeIndex::new(2, &[(0, 0, 1.0)]).unwrap());
    let mut tape = Tape::new();
    let vars = store.bind(&mut tape);
    let x = tape.constant(Matrix::zeros(2, 4));
    assert!(l.forward(&mut tape, &vars, x, &index).is_err());
}

fn random_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>, Vec<f64>)> {
    (2usize..9).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec((0..n, 0..n, prop_oneof![Just(0.0), 0.05f64..1.0]), 0..(n * n)),
            proptest::collection::vec(-2.0f64..2.0, n * 3),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_rows_normalize_and_mask((n, edges, feats) in random_graph(), seed in 0u64..1000) {
        let (store, l) = layer(3, 4, 3, seed);
        let mut dedup = std::collections::BTreeMap::new();
        for (u, v, w) in edges { dedup.insert((u, v), w); }
        let edges: Vec<_> = dedup.into_iter().map(|((u, v), w)| (u, v, w)).collect();
        let index = Rc::new(EdgeIndex::new(n, &edges).unwrap());
        let h = Matrix::new(n, 3, feats).unwrap();
        for head in alphas(&store, &l, &h, &index) {
            for u in 0..n {
                let seg = index.segment(u);
                if seg.is_empty() { continue; }
                let total: f64 = head[seg.clone()].iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(seg.clone().all(|e| index.weight()[e] > 0.0));
            }
        }
        // Dense view: zero-weight pairs carry exactly zero attention.
        let masked = edges
            .iter()
            .filter(|e| e.2 == 0.0)
            .all(|&(u, v, _)| !index.segment(u).any(|e| index.src()[e] == v));
        prop_assert!(masked);
    }

    #[test]
    fn permutation_equivariance((n, edges, feats) in random_graph(), seed in 0u64..1000, rot in 1usize..8) {
        let (store, l) = layer(3, 4, 3, seed);
        let mut dedup = std::collections::BTreeMap::new();
        for (u, v, w) in edges { dedup.insert((u, v), w); }
        let edges: Vec<_> = dedup.into_iter().map(|((u, v), w)| (u, v, w)).collect();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let h = Matrix::new(n, 3, feats).unwrap();
        let base = forward(&store, &l, &h, &Rc::new(EdgeIndex::new(n, &edges).unwrap()));
        let mut ph = Matrix::zeros(n, 3);
        for i in 0..n { ph.row_mut(perm[i]).copy_from_slice(h.row(i)); }
        let pedges: Vec<_> = edges.iter().map(|&(u, v, w)| (perm[u], perm[v], w)).collect();
        let permuted = forward(&store, &l, &ph, &Rc::new(EdgeIndex::new(n, &pedges).unwrap()));
        for i in 0..n {
            for k in 0..base.cols() {
                prop_assert!((base.get(i, k) - permuted.get(perm[i], k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn isolated_node_changes_nothing((n, edges, feats) in random_graph(), seed in 0u64..1000, extra in proptest::collection::vec(-2.0f64..2.0, 3)) {
        let (store, l) = layer(3, 4, 3, seed);
        let h = Matrix::new(n, 3, feats.clone()).unwrap();
        let base = forward(&store, &l, &h, &Rc::new(EdgeIndex::new(n, &edges).unwrap()));
        let mut grown = feats;
        grown.extend(extra);
        let mut with_self = edges.clone();
        with_self.push((n, n, 1.0));
        let h2 = Matrix::new(n + 1, 3, grown).unwrap();
        let out = forward(&store, &l, &h2, &Rc::new(EdgeIndex::new(n + 1, &with_self).unwrap()));
        for i in 0..n {
            prop_assert_eq!(base.row(i), out.row(i));
        }
    }
}
