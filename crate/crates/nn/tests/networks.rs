use hgrl_nn::{
    dueling_q, Actor, Critic, GraphBatch, GraphSample, HeadAgg, Matrix, NetworkKind, NetworkSpec, ParamStore, QNetwork,
    Tape,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec() -> NetworkSpec {
    NetworkSpec { encoder: 8, hidden: 8, trunk: 8, ..NetworkSpec::new(4, 2) }
}

fn sample(n: usize, shift: f64) -> GraphSample {
    GraphSample {
        features: Matrix::from_fn(n, 4, |i, j| (i as f64 - j as f64) * 0.3 + shift),
        edges: (0..n).map(|v| (0, v, 1.0 / (1.0 + v as f64))).chain((1..n).map(|u| (u, u, 1.0))).collect(),
        ego: 0,
        state: vec![shift, -shift],
    }
}

#[test]
fn output_shapes_and_actor_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let samples = [sample(3, 0.1), sample(5, -0.4), sample(1, 2.0)];
    let batch = GraphBatch::pack(&samples.iter().collect::<Vec<_>>()).unwrap();
    let q = QNetwork::new(spec(), &mut rng).unwrap();
    assert_eq!(q.q_values(&batch).unwrap().shape(), (3, 3));
    let actor = Actor::new(spec(), (-4.5, 3.0), &mut rng).unwrap();
    let a = actor.actions(&batch).unwrap();
    assert_eq!(a.len(), 3);
    // Small output weights start the policy near the middle of the range.
    assert!(a.iter().all(|&x| (x + 0.75).abs() < 0.5), "{a:?}");
    let critic = Critic::new(NetworkSpec { trunk: 16, ..spec() }, 3.0, &mut rng).unwrap();
    assert_eq!(critic.values(&batch, &a).unwrap().len(), 3);
    assert!(critic.values(&batch, &a[..2]).is_err());
}

#[test]
fn samples_in_a_batch_do_not_interact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q = QNetwork::new(spec(), &mut rng).unwrap();
    let (a, b) = (sample(3, 0.1), sample(4, 0.7));
    let alone = q.q_values(&GraphBatch::pack(&[&a]).unwrap()).unwrap();
    let both = q.q_values(&GraphBatch::pack(&[&a, &b]).unwrap()).unwrap();
    assert!(alone.row(0).iter().zip(both.row(0)).all(|(x, y)| (x - y).abs() < 1e-12));
}

#[test]
fn checkpoint_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let q = QNetwork::new(spec(), &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.txt");
    q.store.save(&path).unwrap();
    let mut other = QNetwork::new(spec(), &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
    other.load_params(ParamStore::load(&path).unwrap()).unwrap();
    assert_eq!(other.store, q.store);

    let mut wide = QNetwork::new(NetworkSpec { hidden: 9, ..spec() }, &mut rng).unwrap();
    assert!(wide.load_params(q.store.clone()).is_err());
}

#[test]
fn network_kinds_build_distinct_layouts() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gat = QNetwork::new(spec(), &mut rng).unwrap();
    let concat = QNetwork::new(NetworkSpec { head_agg: HeadAgg::Concat, ..spec() }, &mut rng).unwrap();
    let gcn = QNetwork::new(NetworkSpec { kind: NetworkKind::Gcn, ..spec() }, &mut rng).unwrap();
    let mlp = QNetwork::new(NetworkSpec { kind: NetworkKind::Mlp, ..spec() }, &mut rng).unwrap();
    assert!(concat.store.scalar_count() > gat.store.scalar_count());
    assert!(gat.store.scalar_count() > gcn.store.scalar_count());
    assert!(gcn.store.scalar_count() > mlp.store.scalar_count());
}

#[test]
fn mlp_ignores_neighbors() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mlp = QNetwork::new(NetworkSpec { kind: NetworkKind::Mlp, ..spec() }, &mut rng).unwrap();
    let mut a = sample(3, 0.2);
    let base = mlp.q_values(&GraphBatch::pack(&[&a]).unwrap()).unwrap();
    a.features.row_mut(2).iter_mut().for_each(|x| *x += 5.0);
    assert_eq!(mlp.q_values(&GraphBatch::pack(&[&a]).unwrap()).unwrap(), base);
}

proptest! {
    #[test]
    fn dueling_centered(v in -10.0f64..10.0, d in proptest::collection::vec(-10.0f64..10.0, 3)) {
        let q = dueling_q(v, &d);
        let mean: f64 = q.iter().map(|x| x - v).sum::<f64>() / 3.0;
        prop_assert!(mean.abs() < 1e-12);
        let mut tape = Tape::new();
        let vv = tape.constant(Matrix::scalar(v));
        let dd = tape.constant(Matrix::new(1, 3, d.clone()).unwrap());
        let qq = tape.dueling(vv, dd).unwrap();
        for (a, b) in tape.value(qq).data().iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
