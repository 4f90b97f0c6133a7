//! Two-timescale training loop: lane decisions every Δ ticks, following
//! decisions every tick, per-CAV transitions into shared replay buffers.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use hgrl_core::env::{Env, EnvConfig};
use hgrl_core::sim::ScenarioConfig;
use hgrl_nn::GraphSample;

use crate::agents::{lane_cmd, lane_index, FollowAgent, LaneAgent, TransitionF, TransitionL};
use crate::buffer::ReplayBuffer;
use crate::config::{NetConfig, TrainConfig};
use crate::episode::{step_env, Decision, Policy};
use crate::error::{Result, RlError};
use crate::metrics::{EpisodeMetrics, MetricsAccumulator};
use crate::schedule::epsilon_at;

use hgrl_core::env::Dim;

const STREAM_INIT: u64 = 1;
const STREAM_EXPLORE: u64 = 2;
const STREAM_REPLAY: u64 = 3;

/// Scenario seed of training episode `episode` under run seed `seed`.
pub fn train_episode_seed(seed: u64, episode: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (episode as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Scenario seed of evaluation episode `episode`; disjoint stream from training.
pub fn eval_episode_seed(seed: u64, episode: usize) -> u64 {
    train_episode_seed(seed, episode) ^ 0xA5A5_A5A5_5A5A_5A5A
}

pub fn env_for(base: &EnvConfig, scenario_seed: u64) -> EnvConfig {
    EnvConfig { scenario: ScenarioConfig { rng_seed: scenario_seed, ..base.scenario.clone() }, ..base.clone() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub scenario_seed: u64,
    pub ticks: u64,
    pub epsilon: f64,
    pub sigma: f64,
    pub updates_l: usize,
    pub updates_f: usize,
    /// Mean losses over the episode's updates; NaN-free, zero when no update ran.
    pub loss_l: f64,
    pub loss_critic: f64,
    pub actor_objective: f64,
    pub metrics: EpisodeMetrics,
}

struct Explorer<'a> {
    lane: &'a LaneAgent,
    follow: &'a FollowAgent,
    eps: f64,
    sigma: f64,
    rng: &'a mut ChaCha8Rng,
}

impl Policy for Explorer<'_> {
    fn lane(&mut self, d: &Decision) -> Result<Vec<i8>> {
        let refs: Vec<&GraphSample> = d.samples.iter().collect();
        Ok(self.lane.select(&refs, self.eps, self.rng)?.into_iter().map(lane_cmd).collect())
    }

    fn accel(&mut self, d: &Decision) -> Result<Vec<f64>> {
        let refs: Vec<&GraphSample> = d.samples.iter().collect();
        self.follow.select(&refs, self.sigma, self.rng)
    }
}

#[derive(Default)]
struct LossTally {
    sum: f64,
    n: usize,
}

impl LossTally {
    fn add(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub net: NetConfig,
    pub env_cfg: EnvConfig,
    pub seed: u64,
    pub lane: LaneAgent,
    pub follow: FollowAgent,
    buf_l: ReplayBuffer<TransitionL>,
    buf_f: ReplayBuffer<TransitionF>,
    rng_explore: ChaCha8Rng,
    rng_replay: ChaCha8Rng,
    /// Lane decisions and following ticks taken so far, for the schedules.
    t_l: u64,
    t_f: u64,
    episode: usize,
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

impl Trainer {
    pub fn new(cfg: TrainConfig, net: NetConfig, env_cfg: EnvConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        net.validate()?;
        env_cfg.validate()?;
        let mut init = stream(seed, STREAM_INIT);
        let bounds = (env_cfg.actions.a_dec, env_cfg.actions.a_acc);
        let lane = LaneAgent::new(net.spec(Dim::L, false), cfg.lr_l, cfg.max_grad_norm, cfg.gamma, &mut init)?;
        let follow = FollowAgent::new(
            net.spec(Dim::F, false),
            net.spec(Dim::F, true),
            bounds,
            cfg.lr_actor,
            cfg.lr_critic,
            cfg.max_grad_norm,
            cfg.gamma,
            &mut init,
        )?;
        Ok(Self {
            buf_l: ReplayBuffer::new(cfg.buffer_l),
            buf_f: ReplayBuffer::new(cfg.buffer_f),
            rng_explore: stream(seed, STREAM_EXPLORE),
            rng_replay: stream(seed, STREAM_REPLAY),
            cfg,
            net,
            env_cfg,
            seed,
            lane,
            follow,
            t_l: 0,
            t_f: 0,
            episode: 0,
        })
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    pub fn buffer_sizes(&self) -> (usize, usize) {
        (self.buf_l.len(), self.buf_f.len())
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_at(self.t_l, &self.cfg.explore_l)
    }

    pub fn sigma(&self) -> f64 {
        self.cfg.noise_scale * epsilon_at(self.t_f, &self.cfg.explore_f)
    }

    fn diverged(&self, tick: u64, e: RlError) -> RlError {
        match e {
            RlError::Divergence { what, value, .. } => {
                log::error!("divergence in episode {} tick {tick}: {what} = {value}", self.episode);
                RlError::Divergence { episode: self.episode, tick, what, value }
            }
            other => other,
        }
    }

    pub fn run_episode(&mut self) -> Result<EpisodeLog> {
        let scenario_seed = train_episode_seed(self.seed, self.episode);
        let mut env = Env::new(env_for(&self.env_cfg, scenario_seed))?;
        let hops = self.net.hops();
        let mut acc = MetricsAccumulator::default();
        let mut pend_l: BTreeMap<u32, (GraphSample, usize, Option<f64>)> = BTreeMap::new();
        let mut pend_f: BTreeMap<u32, (GraphSample, f64, f64)> = BTreeMap::new();
        let (mut loss_l, mut loss_c, mut obj_a) = (LossTally::default(), LossTally::default(), LossTally::default());
        let (eps_start, sigma_start) = (self.epsilon(), self.sigma());
        let mut ticks = 0;

        while !env.is_done() {
            let (eps, sigma) = (self.epsilon(), self.sigma());
            let rec = {
                let mut explorer =
                    Explorer { lane: &self.lane, follow: &self.follow, eps, sigma, rng: &mut self.rng_explore };
                step_env(&mut env, &mut explorer, hops)?
            };
            ticks += 1;
            self.t_f += 1;

            if let Some(l) = &rec.lane {
                self.t_l += 1;
                for (k, &id) in l.ids.iter().enumerate() {
                    if let Some((state, action, Some(reward))) = pend_l.remove(&id) {
                        self.buf_l.push(TransitionL { state, action, reward, next: Some(l.samples[k].clone()) });
                    }
                    pend_l.insert(id, (l.samples[k].clone(), lane_index(l.actions[k]), None));
                }
            }
            for (k, &id) in rec.follow.ids.iter().enumerate() {
                if let Some((state, action, reward)) = pend_f.remove(&id) {
                    self.buf_f.push(TransitionF { state, action, reward, next: Some(rec.follow.samples[k].clone()) });
                }
            }

            let result = &rec.result;
            for (&id, r) in &result.rewards_l {
                if let Some(p) = pend_l.get_mut(&id) {
                    p.2 = Some(r.total);
                }
            }
            for (k, &id) in rec.follow.ids.iter().enumerate() {
                let reward = result.rewards_f[&id].total;
                let (state, action) = (rec.follow.samples[k].clone(), rec.follow.actions[k]);
                if result.resolved.contains_key(&id) {
                    self.buf_f.push(TransitionF { state, action, reward, next: None });
                } else {
                    pend_f.insert(id, (state, action, reward));
                }
            }
            for id in result.resolved.keys() {
                if let Some((state, action, reward)) = pend_l.remove(id) {
                    let reward = reward.expect("lane reward emitted on resolution");
                    self.buf_l.push(TransitionL { state, action, reward, next: None });
                }
            }
            acc.record(&env, result);

            let tick = self.t_f;
            self.learn(tick, &mut loss_l, &mut loss_c, &mut obj_a).map_err(|e| self.diverged(tick, e))?;
        }

        let log = EpisodeLog {
            episode: self.episode,
            scenario_seed,
            ticks,
            epsilon: eps_start,
            sigma: sigma_start,
            updates_l: loss_l.n,
            updates_f: loss_c.n,
            loss_l: loss_l.mean(),
            loss_critic: loss_c.mean(),
            actor_objective: obj_a.mean(),
            metrics: acc.finish(&env),
        };
        self.episode += 1;
        Ok(log)
    }

    fn learn(&mut self, tick: u64, loss_l: &mut LossTally, loss_c: &mut LossTally, obj_a: &mut LossTally) -> Result<()> {
        let cfg = &self.cfg;
        let warm = cfg.warmup();
        if tick % cfg.online_interval_l == 0 && self.buf_l.len() >= warm {
            for _ in 0..cfg.updates_per_interval_l {
                let batch = self.buf_l.sample(cfg.batch_size, &mut self.rng_replay);
                if let Some(l) = self.lane.learn(&batch)? {
                    loss_l.add(l);
                }
            }
        }
        if tick % cfg.target_interval_l == 0 {
            self.lane.update_target(cfg.tau_l)?;
        }
        if tick % cfg.online_interval_f == 0 && self.buf_f.len() >= warm {
            for _ in 0..cfg.updates_per_interval_f {
                let batch = self.buf_f.sample(cfg.batch_size, &mut self.rng_replay);
                if let Some(l) = self.follow.learn(&batch)? {
                    loss_c.add(l.critic_loss);
                    obj_a.add(l.actor_objective);
                }
            }
        }
        if tick % cfg.target_interval_f == 0 {
            self.follow.update_targets(cfg.tau_f)?;
        }
        Ok(())
    }

    /// Draws from the exploration stream; exposed so callers can verify determinism.
    pub fn peek_rng(&mut self) -> u64 {
        self.rng_explore.clone().random()
    }
}
