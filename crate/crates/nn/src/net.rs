//! Policy and value networks over packed graph batches.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::graph::GraphBatch;
use crate::layers::{GatLayer, GcnLayer, HeadAgg, Linear};
use crate::matrix::Matrix;
use crate::params::{ParamStore, ParamVars};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    #[default]
    Gat,
    Gcn,
    /// Node encoder on the acting vehicle only; no message passing.
    Mlp,
}

impl FromStr for NetworkKind {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gat" => Ok(NetworkKind::Gat),
            "gcn" => Ok(NetworkKind::Gcn),
            "mlp" => Ok(NetworkKind::Mlp),
            other => Err(NnError::InvalidArgument(format!("network kind {other:?}"))),
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkKind::Gat => "gat",
            NetworkKind::Gcn => "gcn",
            NetworkKind::Mlp => "mlp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    pub head_agg: HeadAgg,
    pub node_features: usize,
    pub state_dim: usize,
    pub encoder: usize,
    pub hidden: usize,
    pub graph_layers: usize,
    pub heads: usize,
    pub trunk: usize,
    pub trunk_layers: usize,
    pub slope: f64,
}

impl NetworkSpec {
    pub fn new(node_features: usize, state_dim: usize) -> Self {
        Self {
            kind: NetworkKind::Gat,
            head_agg: HeadAgg::Sum,
            node_features,
            state_dim,
            encoder: 64,
            hidden: 64,
            graph_layers: 2,
            heads: 3,
            trunk: 64,
            trunk_layers: 1,
            slope: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_features == 0 || self.encoder == 0 || self.hidden == 0 || self.trunk == 0 || self.trunk_layers == 0 {
            return Err(NnError::InvalidArgument("network widths must be positive".into()));
        }
        if self.kind != NetworkKind::Mlp && self.graph_layers == 0 {
            return Err(NnError::InvalidArgument("graph networks need at least one graph layer".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum GraphLayer {
    Gat(GatLayer),
    Gcn(GcnLayer),
}

/// Node encoder, message passing and ego readout; emits `[embedding, state]` per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBody {
    encoder: Linear,
    layers: Vec<GraphLayer>,
    output: usize,
}

impl GraphBody {
    fn new<R: Rng + ?Sized>(spec: &NetworkSpec, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let encoder = Linear::new(store, "enc", spec.node_features, spec.encoder, rng);
        let mut width = spec.encoder;
        let mut layers = Vec::new();
        if spec.kind != NetworkKind::Mlp {
            for l in 0..spec.graph_layers {
                let name = format!("g{l}");
                let layer = match spec.kind {
                    NetworkKind::Gat => {
                        GraphLayer::Gat(GatLayer::new(store, &name, width, spec.hidden, spec.heads, spec.slope, spec.head_agg, rng)?)
                    }
                    _ => GraphLayer::Gcn(GcnLayer::new(store, &name, width, spec.hidden, rng)),
                };
                width = match &layer {
                    GraphLayer::Gat(g) => g.output(),
                    GraphLayer::Gcn(_) => spec.hidden,
                };
                layers.push(layer);
            }
        }
        Ok(Self { encoder, layers, output: width + spec.state_dim })
    }

    pub fn output(&self) -> usize {
        self.output
    }

    fn forward(&self, tape: &mut Tape, vars: &ParamVars, batch: &GraphBatch) -> Result<Var> {
        let x = tape.constant(batch.features.clone());
        let e = self.encoder.forward(tape, vars, x)?;
        let mut h = tape.relu(e);
        for layer in &self.layers {
            h = match layer {
                GraphLayer::Gat(g) => g.forward(tape, vars, h, &batch.edges)?,
                GraphLayer::Gcn(g) => g.forward(tape, vars, h, &batch.gcn_edges)?,
            };
        }
        let ego = tape.gather_rows(h, &batch.ego)?;
        let states = tape.constant(batch.states.clone());
        tape.concat_cols(&[ego, states])
    }
}

fn build_trunk<R: Rng + ?Sized>(store: &mut ParamStore, input: usize, width: usize, layers: usize, rng: &mut R) -> Vec<Linear> {
    let mut out = Vec::with_capacity(layers);
    let mut w = input;
    for l in 0..layers {
        out.push(Linear::new(store, &format!("trunk{l}"), w, width, rng));
        w = width;
    }
    out
}

fn run_trunk(trunk: &[Linear], tape: &mut Tape, vars: &ParamVars, mut x: Var) -> Result<Var> {
    for lin in trunk {
        let y = lin.forward(tape, vars, x)?;
        x = tape.relu(y);
    }
    Ok(x)
}

/// Dueling Q-network over the three lane commands.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub spec: NetworkSpec,
    pub store: ParamStore,
    body: GraphBody,
    trunk: Vec<Linear>,
    value: Linear,
    advantage: Linear,
}

pub const LANE_ACTIONS: usize = 3;

impl QNetwork {
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut store = ParamStore::new();
        let body = GraphBody::new(&spec, &mut store, rng)?;
        let trunk = build_trunk(&mut store, body.output(), spec.trunk, spec.trunk_layers, rng);
        let value = Linear::new(&mut store, "value", spec.trunk, 1, rng);
        let advantage = Linear::new(&mut store, "adv", spec.trunk, LANE_ACTIONS, rng);
        Ok(Self { spec, store, body, trunk, value, advantage })
    }

    pub fn forward(&self, tape: &mut Tape, vars: &ParamVars, batch: &GraphBatch) -> Result<Var> {
        let x = self.body.forward(tape, vars, batch)?;
        let t = run_trunk(&self.trunk, tape, vars, x)?;
        let v = self.value.forward(tape, vars, t)?;
        let d = self.advantage.forward(tape, vars, t)?;
        tape.dueling(v, d)
    }

    /// `B x 3` Q-values without recording gradients.
    pub fn q_values(&self, batch: &GraphBatch) -> Result<Matrix> {
        let mut tape = Tape::new();
        let vars = self.store.bind(&mut tape);
        let q = self.forward(&mut tape, &vars, batch)?;
        Ok(tape.value(q).clone())
    }
}

/// Deterministic acceleration policy bounded to `[lo, hi]` via a scaled tanh.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub spec: NetworkSpec,
    pub store: ParamStore,
    body: GraphBody,
    trunk: Vec<Linear>,
    out: Linear,
    pub bounds: (f64, f64),
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, bounds: (f64, f64), rng: &mut R) -> Result<Self> {
        if !(bounds.0 < bounds.1) {
            return Err(NnError::InvalidArgument(format!("action bounds {bounds:?}")));
        }
        let mut store = ParamStore::new();
        let body = GraphBody::new(&spec, &mut store, rng)?;
        let trunk = build_trunk(&mut store, body.output(), spec.trunk, spec.trunk_layers, rng);
        let out = Linear::new_small(&mut store, "mu", spec.trunk, 1, 3e-3, rng);
        Ok(Self { spec, store, body, trunk, out, bounds })
    }

    pub fn forward(&self, tape: &mut Tape, vars: &ParamVars, batch: &GraphBatch) -> Result<Var> {
        let x = self.body.forward(tape, vars, batch)?;
        let t = run_trunk(&self.trunk, tape, vars, x)?;
        let raw = self.out.forward(tape, vars, t)?;
        let squashed = tape.tanh(raw);
        let (lo, hi) = self.bounds;
        Ok(tape.affine(squashed, (hi - lo) / 2.0, (hi + lo) / 2.0))
    }

    pub fn actions(&self, batch: &GraphBatch) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vars = self.store.bind(&mut tape);
        let a = self.forward(&mut tape, &vars, batch)?;
        Ok(tape.value(a).data().to_vec())
    }
}

/// Action-value network; the action joins the ego embedding at the trunk.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub spec: NetworkSpec,
    pub store: ParamStore,
    body: GraphBody,
    trunk: Vec<Linear>,
    out: Linear,
    action_scale: f64,
}

impl Critic {
    /// `action_scale` divides the action before it enters the trunk.
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, action_scale: f64, rng: &mut R) -> Result<Self> {
        let mut store = ParamStore::new();
        let body = GraphBody::new(&spec, &mut store, rng)?;
        let trunk = build_trunk(&mut store, body.output() + 1, spec.trunk, spec.trunk_layers, rng);
        let out = Linear::new_small(&mut store, "q", spec.trunk, 1, 3e-3, rng);
        Ok(Self { spec, store, body, trunk, out, action_scale })
    }

    pub fn forward(&self, tape: &mut Tape, vars: &ParamVars, batch: &GraphBatch, action: Var) -> Result<Var> {
        if tape.value(action).shape() != (batch.batch_size(), 1) {
            return Err(NnError::Shape("one action per sample expected".into()));
        }
        let x = self.body.forward(tape, vars, batch)?;
        let a = tape.affine(action, 1.0 / self.action_scale, 0.0);
        let xa = tape.concat_cols(&[x, a])?;
        let t = run_trunk(&self.trunk, tape, vars, xa)?;
        self.out.forward(tape, vars, t)
    }

    pub fn values(&self, batch: &GraphBatch, actions: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vars = self.store.bind(&mut tape);
        let a = tape.constant(Matrix::column(actions));
        let q = self.forward(&mut tape, &vars, batch, a)?;
        Ok(tape.value(q).data().to_vec())
    }
}

/// Plain dueling combination for one sample.
pub fn dueling_q(value: f64, advantages: &[f64]) -> Vec<f64> {
    let mean = advantages.iter().sum::<f64>() / advantages.len().max(1) as f64;
    advantages.iter().map(|d| value + d - mean).collect()
}

macro_rules! params_io {
    ($t:ty) => {
        impl $t {
            /// Replaces parameters with `store`, which must match this network's layout.
            pub fn load_params(&mut self, store: ParamStore) -> Result<()> {
                if !self.store.same_layout(&store) {
                    return Err(NnError::Checkpoint("parameter layout does not match the network".into()));
                }
                self.store = store;
                Ok(())
            }
        }
    };
}

params_io!(QNetwork);
params_io!(Actor);
params_io!(Critic);
