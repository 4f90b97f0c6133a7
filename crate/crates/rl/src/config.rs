use serde::{Deserialize, Serialize};

use hgrl_core::env::{AgentState, Dim};
use hgrl_core::graph::{DimTag, NodeFeatureMatrix};
use hgrl_nn::{HeadAgg, NetworkKind, NetworkSpec};

use crate::error::{Result, RlError};
use crate::schedule::ExploreSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub network_kind: NetworkKind,
    pub head_agg: HeadAgg,
    pub encoder: usize,
    pub hidden: usize,
    pub graph_layers: usize,
    pub heads: usize,
    pub trunk: usize,
    pub critic_trunk: usize,
    pub trunk_layers: usize,
    pub leaky_slope: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            network_kind: NetworkKind::Gat,
            head_agg: HeadAgg::Sum,
            encoder: 64,
            hidden: 64,
            graph_layers: 2,
            heads: 3,
            trunk: 64,
            critic_trunk: 128,
            trunk_layers: 1,
            leaky_slope: 0.2,
        }
    }
}

impl NetConfig {
    pub fn spec(&self, dim: Dim, critic: bool) -> NetworkSpec {
        let tag = match dim {
            Dim::L => DimTag::L,
            Dim::F => DimTag::F,
        };
        NetworkSpec {
            kind: self.network_kind,
            head_agg: self.head_agg,
            node_features: NodeFeatureMatrix::column_names(tag).len(),
            state_dim: AgentState::len(dim),
            encoder: self.encoder,
            hidden: self.hidden,
            graph_layers: self.graph_layers,
            heads: self.heads,
            trunk: if critic { self.critic_trunk } else { self.trunk },
            trunk_layers: self.trunk_layers,
            slope: self.leaky_slope,
        }
    }

    /// Radius of an ego sample that reproduces the full-graph output at
    /// the ego node. Degree normalization needs one extra ring of rows.
    pub fn hops(&self) -> usize {
        match self.network_kind {
            NetworkKind::Mlp => 0,
            NetworkKind::Gat => self.graph_layers,
            NetworkKind::Gcn => self.graph_layers + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec(Dim::L, false).validate()?;
        if self.critic_trunk < 2 * self.trunk {
            return Err(RlError::InvalidArgument("critic trunk must be at least twice the actor trunk".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lr_l: f64,
    pub lr_critic: f64,
    pub lr_actor: f64,
    /// Environment ticks between bursts of online-network updates.
    pub online_interval_l: u64,
    pub online_interval_f: u64,
    /// Gradient steps per burst.
    pub updates_per_interval_l: usize,
    pub updates_per_interval_f: usize,
    /// Environment ticks between soft target updates.
    pub target_interval_l: u64,
    pub target_interval_f: u64,
    pub tau_l: f64,
    pub tau_f: f64,
    pub batch_size: usize,
    pub buffer_l: usize,
    pub buffer_f: usize,
    /// Learning starts once a buffer holds this many batches.
    pub warmup_batches: usize,
    pub explore_l: ExploreSchedule,
    pub explore_f: ExploreSchedule,
    /// Multiplies the scheduled following-noise σ (m/s²).
    pub noise_scale: f64,
    pub max_grad_norm: f64,
    pub episodes: usize,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr_l: 0.00075,
            lr_critic: 0.0001,
            lr_actor: 0.000025,
            online_interval_l: 100,
            online_interval_f: 200,
            updates_per_interval_l: 1,
            updates_per_interval_f: 1,
            target_interval_l: 400,
            target_interval_f: 800,
            tau_l: 0.01,
            tau_f: 0.005,
            batch_size: 64,
            buffer_l: 20_000,
            buffer_f: 100_000,
            warmup_batches: 10,
            explore_l: ExploreSchedule::LANE,
            explore_f: ExploreSchedule::FOLLOW,
            noise_scale: 1.0,
            max_grad_norm: 10.0,
            episodes: 1000,
            checkpoint_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RlError::InvalidArgument(m.into()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if [self.online_interval_l, self.online_interval_f, self.target_interval_l, self.target_interval_f].contains(&0) {
            return bad("update intervals must be positive");
        }
        if self.batch_size == 0 || self.buffer_l < self.batch_size || self.buffer_f < self.batch_size {
            return bad("buffers must hold at least one batch");
        }
        if ![self.lr_l, self.lr_critic, self.lr_actor].iter().all(|&x| x > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..=1.0).contains(&self.tau_l) || !(0.0..=1.0).contains(&self.tau_f) {
            return bad("tau must lie in [0, 1]");
        }
        if !(self.noise_scale >= 0.0) {
            return bad("noise scale must be non-negative");
        }
        self.explore_l.validate()?;
        self.explore_f.validate()
    }

    pub fn warmup(&self) -> usize {
        self.warmup_batches * self.batch_size
    }
}
