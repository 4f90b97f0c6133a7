//! Tick-level episode driver shared by training, evaluation and scripted runs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use hgrl_core::env::{Dim, Env, JointAction, StepResult};
use hgrl_nn::{Actor, GraphBatch, GraphSample, QNetwork};

use crate::agents::{argmax, lane_cmd};
use crate::error::Result;
use crate::metrics::{EpisodeMetrics, MetricsAccumulator};
use crate::sample::sample_for;

/// What a policy sees for one decision: the acting CAVs and, when the policy
/// asked for them, one graph sample per CAV in the same order.
pub struct Decision<'a> {
    pub env: &'a Env,
    pub ids: &'a [u32],
    pub samples: &'a [GraphSample],
}

pub trait Policy {
    /// Lane commands in {−1, 0, 1}, one per id.
    fn lane(&mut self, d: &Decision) -> Result<Vec<i8>>;
    /// Accelerations in m/s², one per id.
    fn accel(&mut self, d: &Decision) -> Result<Vec<f64>>;
    /// Whether `Decision::samples` must be filled.
    fn uses_graphs(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct DecisionRecord<A> {
    pub ids: Vec<u32>,
    pub samples: Vec<GraphSample>,
    pub actions: Vec<A>,
}

#[derive(Debug, Clone)]
pub struct TickRecord {
    /// Tick at which the decisions were taken.
    pub f_tick: u64,
    pub lane: Option<DecisionRecord<i8>>,
    pub follow: DecisionRecord<f64>,
    pub result: StepResult,
}

/// One decision round: lane commands first on L-ticks (fed into the
/// following observation), then accelerations, then the environment step.
pub fn step_env(env: &mut Env, policy: &mut dyn Policy, hops: usize) -> Result<TickRecord> {
    let f_tick = env.clock().f_tick;
    let ids = env.active_cavs();
    let graphs = policy.uses_graphs();
    let lane = if env.clock().is_l_tick() {
        let samples = if graphs {
            let obs = env.observe(Dim::L, None)?;
            ids.iter().map(|&id| sample_for(&obs, id, hops)).collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let actions = policy.lane(&Decision { env, ids: &ids, samples: &samples })?;
        Some(DecisionRecord { ids: ids.clone(), samples, actions })
    } else {
        None
    };
    let l_action = lane.as_ref().map(|d| JointAction::L(d.ids.iter().copied().zip(d.actions.iter().copied()).collect()));
    let samples = if graphs {
        let obs = env.observe(Dim::F, l_action.as_ref())?;
        ids.iter().map(|&id| sample_for(&obs, id, hops)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let actions = policy.accel(&Decision { env, ids: &ids, samples: &samples })?;
    let f_action = JointAction::F(ids.iter().copied().zip(actions.iter().copied()).collect());
    let result = env.step(&f_action, l_action.as_ref())?;
    Ok(TickRecord { f_tick, lane, follow: DecisionRecord { ids, samples, actions }, result })
}

/// Runs `env` to completion, calling `observer` after every tick.
pub fn run_episode(
    env: &mut Env,
    policy: &mut dyn Policy,
    hops: usize,
    mut observer: impl FnMut(&Env, &TickRecord),
) -> Result<EpisodeMetrics> {
    let mut acc = MetricsAccumulator::default();
    while !env.is_done() {
        let rec = step_env(env, policy, hops)?;
        acc.record(env, &rec.result);
        observer(env, &rec);
    }
    Ok(acc.finish(env))
}

/// Noise-free policy from trained networks.
pub struct GreedyPolicy<'a> {
    pub q: &'a QNetwork,
    pub actor: &'a Actor,
}

impl Policy for GreedyPolicy<'_> {
    fn lane(&mut self, d: &Decision) -> Result<Vec<i8>> {
        if d.samples.is_empty() {
            return Ok(Vec::new());
        }
        let q = self.q.q_values(&GraphBatch::pack(&d.samples.iter().collect::<Vec<_>>())?)?;
        Ok((0..d.samples.len()).map(|i| lane_cmd(argmax(q.row(i)))).collect())
    }

    fn accel(&mut self, d: &Decision) -> Result<Vec<f64>> {
        if d.samples.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.actor.actions(&GraphBatch::pack(&d.samples.iter().collect::<Vec<_>>())?)?)
    }
}

/// Fixed commands for every CAV.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy {
    pub lane_cmd: i8,
    pub accel: f64,
}

impl Policy for ConstantPolicy {
    fn lane(&mut self, d: &Decision) -> Result<Vec<i8>> {
        Ok(vec![self.lane_cmd; d.ids.len()])
    }

    fn accel(&mut self, d: &Decision) -> Result<Vec<f64>> {
        Ok(vec![self.accel; d.ids.len()])
    }

    fn uses_graphs(&self) -> bool {
        false
    }
}

/// Uniform lane commands and accelerations.
pub struct UniformPolicy {
    pub rng: ChaCha8Rng,
    pub bounds: (f64, f64),
}

impl Policy for UniformPolicy {
    fn lane(&mut self, d: &Decision) -> Result<Vec<i8>> {
        Ok(d.ids.iter().map(|_| self.rng.random_range(-1..=1)).collect())
    }

    fn accel(&mut self, d: &Decision) -> Result<Vec<f64>> {
        Ok(d.ids.iter().map(|_| self.rng.random_range(self.bounds.0..=self.bounds.1)).collect())
    }

    fn uses_graphs(&self) -> bool {
        false
    }
}
