//! Lane-change (dueling double-Q) and following (deterministic policy
//! gradient) learners sharing one network set across CAVs.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use hgrl_nn::{
    soft_update, Actor, Adam, AdamConfig, Critic, GraphBatch, GraphSample, Matrix, NetworkSpec, QNetwork, Tape, Var,
    LANE_ACTIONS,
};

use crate::error::{Result, RlError};

/// Lane command of Q-column `k`: 0 → −1 (right), 1 → keep, 2 → +1 (left).
pub fn lane_cmd(k: usize) -> i8 {
    k as i8 - 1
}

pub fn lane_index(cmd: i8) -> usize {
    (cmd + 1) as usize
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// `r + γ(1 − terminal)·Q_target(g', argmax_a Q_online(g', a))`.
pub fn double_q_target(reward: f64, gamma: f64, terminal: bool, q_online_next: &[f64], q_target_next: &[f64]) -> f64 {
    if terminal {
        return reward;
    }
    reward + gamma * q_target_next[argmax(q_online_next)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionL {
    pub state: GraphSample,
    pub action: usize,
    pub reward: f64,
    /// `None` when the CAV's episode ended.
    pub next: Option<GraphSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionF {
    pub state: GraphSample,
    pub action: f64,
    pub reward: f64,
    pub next: Option<GraphSample>,
}

fn pack<'a>(samples: impl Iterator<Item = &'a GraphSample>) -> Result<GraphBatch> {
    Ok(GraphBatch::pack(&samples.collect::<Vec<_>>())?)
}

fn check_finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(RlError::Divergence { episode: 0, tick: 0, what, value })
    }
}

#[derive(Debug, Clone)]
pub struct LaneAgent {
    pub online: QNetwork,
    pub target: QNetwork,
    pub adam: Adam,
    pub gamma: f64,
}

impl LaneAgent {
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, lr: f64, max_grad_norm: f64, gamma: f64, rng: &mut R) -> Result<Self> {
        let online = QNetwork::new(spec, rng)?;
        let target = online.clone();
        let adam = Adam::new(&online.store, AdamConfig { max_grad_norm, ..AdamConfig::with_lr(lr) });
        Ok(Self { online, target, adam, gamma })
    }

    /// ε-greedy Q-column choices, one independent draw per sample.
    pub fn select<R: Rng + ?Sized>(&self, samples: &[&GraphSample], eps: f64, rng: &mut R) -> Result<Vec<usize>> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let q = self.online.q_values(&GraphBatch::pack(samples)?)?;
        Ok((0..samples.len())
            .map(|i| if rng.random::<f64>() < eps { rng.random_range(0..LANE_ACTIONS) } else { argmax(q.row(i)) })
            .collect())
    }

    /// Double-Q targets for a batch.
    pub fn targets(&self, batch: &[&TransitionL]) -> Result<Vec<f64>> {
        let live: Vec<&GraphSample> = batch.iter().filter_map(|t| t.next.as_ref()).collect();
        let (qo, qt) = if live.is_empty() {
            (Matrix::zeros(0, LANE_ACTIONS), Matrix::zeros(0, LANE_ACTIONS))
        } else {
            let b = GraphBatch::pack(&live)?;
            (self.online.q_values(&b)?, self.target.q_values(&b)?)
        };
        let mut k = 0;
        Ok(batch
            .iter()
            .map(|t| match t.next {
                None => t.reward,
                Some(_) => {
                    let y = double_q_target(t.reward, self.gamma, false, qo.row(k), qt.row(k));
                    k += 1;
                    y
                }
            })
            .collect())
    }

    /// One TD step; returns the pre-update loss, or `None` for an empty batch.
    pub fn learn(&mut self, batch: &[&TransitionL]) -> Result<Option<f64>> {
        if batch.is_empty() {
            log::warn!("lane-change learner received an empty batch");
            return Ok(None);
        }
        let y = self.targets(batch)?;
        let states = pack(batch.iter().map(|t| &t.state))?;
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let mut tape = Tape::new();
        let vars = self.online.store.bind(&mut tape);
        let q = self.online.forward(&mut tape, &vars, &states)?;
        let picked = tape.pick_cols(q, &actions)?;
        let loss = mse(&mut tape, picked, &y)?;
        let value = check_finite("lane TD loss", tape.value(loss).item())?;
        let mut grads = tape.backward(loss)?;
        let g = self.online.store.collect_grads(&vars, &mut grads);
        self.adam.step(&mut self.online.store, &g)?;
        Ok(Some(value))
    }

    pub fn update_target(&mut self, tau: f64) -> Result<()> {
        Ok(soft_update(&mut self.target.store, &self.online.store, tau)?)
    }
}

fn mse(tape: &mut Tape, pred: Var, target: &[f64]) -> Result<Var> {
    let y = tape.constant(Matrix::column(target));
    let d = tape.sub(pred, y)?;
    let sq = tape.mul(d, d)?;
    Ok(tape.mean(sq))
}

/// Differentiable action-value used for the actor's ascent step.
pub trait ActionValue {
    fn q(&self, tape: &mut Tape, batch: &GraphBatch, action: Var) -> hgrl_nn::Result<Var>;
}

impl ActionValue for Critic {
    fn q(&self, tape: &mut Tape, batch: &GraphBatch, action: Var) -> hgrl_nn::Result<Var> {
        let vars = self.store.bind(tape);
        self.forward(tape, &vars, batch, action)
    }
}

#[derive(Debug, Clone)]
pub struct FollowAgent {
    pub actor: Actor,
    pub critic: Critic,
    pub actor_target: Actor,
    pub critic_target: Critic,
    pub adam_actor: Adam,
    pub adam_critic: Adam,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowLosses {
    pub critic_loss: f64,
    /// Mean `Q(g, μ(g))` before the actor step.
    pub actor_objective: f64,
}

impl FollowAgent {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        actor_spec: NetworkSpec,
        critic_spec: NetworkSpec,
        bounds: (f64, f64),
        lr_actor: f64,
        lr_critic: f64,
        max_grad_norm: f64,
        gamma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let actor = Actor::new(actor_spec, bounds, rng)?;
        let scale = bounds.0.abs().max(bounds.1.abs());
        let critic = Critic::new(critic_spec, scale, rng)?;
        Ok(Self {
            adam_actor: Adam::new(&actor.store, AdamConfig { max_grad_norm, ..AdamConfig::with_lr(lr_actor) }),
            adam_critic: Adam::new(&critic.store, AdamConfig { max_grad_norm, ..AdamConfig::with_lr(lr_critic) }),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            gamma,
        })
    }

    /// `clip(μ(g) + N(0, σ), lo, hi)` per sample.
    pub fn select<R: Rng + ?Sized>(&self, samples: &[&GraphSample], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let mu = self.actor.actions(&GraphBatch::pack(samples)?)?;
        Ok(add_noise(&mu, sigma, self.actor.bounds, rng))
    }

    pub fn targets(&self, batch: &[&TransitionF]) -> Result<Vec<f64>> {
        let live: Vec<&GraphSample> = batch.iter().filter_map(|t| t.next.as_ref()).collect();
        let next_q = if live.is_empty() {
            Vec::new()
        } else {
            let b = GraphBatch::pack(&live)?;
            let a = self.actor_target.actions(&b)?;
            self.critic_target.values(&b, &a)?
        };
        let mut k = 0;
        Ok(batch
            .iter()
            .map(|t| match t.next {
                None => t.reward,
                Some(_) => {
                    k += 1;
                    t.reward + self.gamma * next_q[k - 1]
                }
            })
            .collect())
    }

    pub fn critic_step(&mut self, batch: &[&TransitionF]) -> Result<f64> {
        let y = self.targets(batch)?;
        let states = pack(batch.iter().map(|t| &t.state))?;
        let actions: Vec<f64> = batch.iter().map(|t| t.action).collect();
        let mut tape = Tape::new();
        let vars = self.critic.store.bind(&mut tape);
        let a = tape.constant(Matrix::column(&actions));
        let q = self.critic.forward(&mut tape, &vars, &states, a)?;
        let loss = mse(&mut tape, q, &y)?;
        let value = check_finite("critic loss", tape.value(loss).item())?;
        let mut grads = tape.backward(loss)?;
        let g = self.critic.store.collect_grads(&vars, &mut grads);
        self.adam_critic.step(&mut self.critic.store, &g)?;
        Ok(value)
    }

    pub fn learn(&mut self, batch: &[&TransitionF]) -> Result<Option<FollowLosses>> {
        if batch.is_empty() {
            log::warn!("following learner received an empty batch");
            return Ok(None);
        }
        let critic_loss = self.critic_step(batch)?;
        let states = pack(batch.iter().map(|t| &t.state))?;
        let actor_objective = actor_step(&mut self.actor, &mut self.adam_actor, &states, &self.critic)?;
        Ok(Some(FollowLosses { critic_loss, actor_objective }))
    }

    pub fn update_targets(&mut self, tau: f64) -> Result<()> {
        soft_update(&mut self.actor_target.store, &self.actor.store, tau)?;
        soft_update(&mut self.critic_target.store, &self.critic.store, tau)?;
        Ok(())
    }
}

pub fn add_noise<R: Rng + ?Sized>(mu: &[f64], sigma: f64, bounds: (f64, f64), rng: &mut R) -> Vec<f64> {
    let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("positive sigma"));
    mu.iter()
        .map(|&m| {
            let a = m + noise.as_ref().map_or(0.0, |n| n.sample(rng));
            a.clamp(bounds.0, bounds.1)
        })
        .collect()
}

/// One Adam step ascending `mean Q(g, μ(g))`; returns the objective before the step.
pub fn actor_step(actor: &mut Actor, adam: &mut Adam, states: &GraphBatch, critic: &dyn ActionValue) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = actor.store.bind(&mut tape);
    let a = actor.forward(&mut tape, &vars, states)?;
    let q = critic.q(&mut tape, states, a)?;
    let objective = tape.mean(q);
    let value = check_finite("actor objective", tape.value(objective).item())?;
    let loss = tape.affine(objective, -1.0, 0.0);
    let mut grads = tape.backward(loss)?;
    let g = actor.store.collect_grads(&vars, &mut grads);
    adam.step(&mut actor.store, &g)?;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_mapping() {
        assert_eq!((0..3).map(lane_cmd).collect::<Vec<_>>(), vec![-1, 0, 1]);
        assert_eq!(lane_index(-1), 0);
        assert_eq!(argmax(&[0.0, 5.0, 1.0]), 1);
        assert_eq!(lane_cmd(argmax(&[0.0, 5.0, 1.0])), 0);
    }

    #[test]
    fn double_q_examples() {
        let y = double_q_target(1.0, 0.99, false, &[1.0, 3.0, 2.0], &[0.0, 2.5, 9.0]);
        assert!((y - 3.475).abs() < 1e-12);
        assert_eq!(double_q_target(-2.0, 0.99, true, &[1.0, 3.0, 2.0], &[0.0, 2.5, 9.0]), -2.0);
    }
}
