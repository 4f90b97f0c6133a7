//! Dense 64-bit matrices, a reverse-mode tape, graph attention and
//! convolution layers, and the policy/value networks built from them.

pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod matrix;
pub mod net;
pub mod params;
pub mod tape;

pub use error::{NnError, Result};
pub use graph::{segment_softmax, EdgeIndex, GraphBatch, GraphSample};
pub use layers::{GatLayer, GcnLayer, HeadAgg, Linear};
pub use matrix::Matrix;
pub use net::{dueling_q, Actor, Critic, NetworkKind, NetworkSpec, QNetwork, LANE_ACTIONS};
pub use params::{soft_update, Adam, AdamConfig, ParamId, ParamStore, ParamVars};
pub use tape::{Gradients, Tape, Var};
