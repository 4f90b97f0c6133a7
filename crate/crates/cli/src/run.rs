use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use hgrl_core::env::{Dim, Env};
use hgrl_core::graph::GraphSnapshot;
use hgrl_nn::ParamStore;
use hgrl_rl::episode::{run_episode, ConstantPolicy, GreedyPolicy};
use hgrl_rl::trainer::{env_for, eval_episode_seed, EpisodeLog, Trainer};

use crate::config::RunConfig;
use crate::records::{
    export_metrics, export_trajectories, summarize, write_csv, LogRow, MetricsRow, MetricsSummary, TrajectoryRecorder,
    LOG_HEADER,
};

pub const LANE_Q_FILE: &str = "lane_q.params";
pub const ACTOR_FILE: &str = "actor.params";
pub const CRITIC_FILE: &str = "critic.params";

pub fn save_checkpoint(trainer: &Trainer, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    trainer.lane.online.store.save(&dir.join(LANE_Q_FILE))?;
    trainer.follow.actor.store.save(&dir.join(ACTOR_FILE))?;
    trainer.follow.critic.store.save(&dir.join(CRITIC_FILE))?;
    Ok(())
}

/// Loads trained parameters into freshly built networks; layouts must match.
pub fn load_checkpoint(trainer: &mut Trainer, dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        bail!("checkpoint directory {} does not exist", dir.display());
    }
    let load = |f: &str| ParamStore::load(&dir.join(f)).with_context(|| format!("loading {}", dir.join(f).display()));
    trainer.lane.online.load_params(load(LANE_Q_FILE)?).context("lane Q-network")?;
    trainer.follow.actor.load_params(load(ACTOR_FILE)?).context("actor")?;
    trainer.follow.critic.load_params(load(CRITIC_FILE)?).context("critic")?;
    Ok(())
}

pub struct TrainRun {
    pub trainer: Trainer,
    pub logs: Vec<EpisodeLog>,
    pub log_path: PathBuf,
}

/// Trains for `cfg.train.episodes` episodes, writing `train_log.csv`, the
/// resolved config and checkpoints (`checkpoints/ep<N>`, `checkpoints/final`) under `out`.
pub fn run_train(cfg: &RunConfig, seed: u64, out: &Path) -> Result<TrainRun> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.toml"), RunConfig { seed, ..cfg.clone() }.to_toml()?)?;
    let mut trainer = Trainer::new(cfg.train.clone(), cfg.net.clone(), cfg.env.clone(), seed)?;
    let mut logs = Vec::with_capacity(cfg.train.episodes);
    for ep in 0..cfg.train.episodes {
        let log = trainer.run_episode()?;
        log::info!(
            "episode {ep}: success {:.2} L {:.1} F {:.1} eps {:.3} sigma {:.3}",
            log.metrics.p_success,
            log.metrics.l_reward,
            log.metrics.f_reward,
            log.epsilon,
            log.sigma
        );
        logs.push(log);
        if cfg.train.checkpoint_every > 0 && (ep + 1) % cfg.train.checkpoint_every == 0 {
            save_checkpoint(&trainer, &out.join("checkpoints").join(format!("ep{}", ep + 1)))?;
        }
    }
    save_checkpoint(&trainer, &out.join("checkpoints").join("final"))?;
    let log_path = out.join("train_log.csv");
    let rows: Vec<LogRow> = logs.iter().map(LogRow::from).collect();
    write_csv(fs::File::create(&log_path)?, LOG_HEADER, &rows)?;
    Ok(TrainRun { trainer, logs, log_path })
}

#[derive(Debug)]
pub struct EvalReport {
    pub rows: Vec<MetricsRow>,
    pub summary: MetricsSummary,
}

/// Noise-free rollouts of the trainer's current networks on evaluation scenarios.
pub fn evaluate(trainer: &Trainer, seed: u64, episodes: usize, mut traj_out: Option<&Path>) -> Result<EvalReport> {
    let mut rows = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let scenario_seed = eval_episode_seed(seed, ep);
        let mut env = Env::new(env_for(&trainer.env_cfg, scenario_seed))?;
        let mut policy = GreedyPolicy { q: &trainer.lane.online, actor: &trainer.follow.actor };
        let mut recorder = TrajectoryRecorder::default();
        let record = traj_out.is_some();
        let m = run_episode(&mut env, &mut policy, trainer.net.hops(), |env, rec| {
            if record {
                recorder.observe(env, rec);
            }
        })?;
        if let Some(path) = traj_out.take() {
            export_trajectories(&recorder.rows, path)?;
        }
        rows.push(MetricsRow::new(ep, scenario_seed, &m));
    }
    let summary = summarize(&rows);
    Ok(EvalReport { rows, summary })
}

/// Evaluates the checkpoint in `checkpoint` (random-init networks when
/// `None`) and writes `eval_metrics.csv`, `eval_summary.toml` and the first
/// episode's `eval_trajectories.csv` under `out`.
pub fn run_eval(cfg: &RunConfig, seed: u64, checkpoint: Option<&Path>, episodes: usize, out: &Path) -> Result<EvalReport> {
    let mut trainer = Trainer::new(cfg.train.clone(), cfg.net.clone(), cfg.env.clone(), seed)?;
    if let Some(dir) = checkpoint {
        load_checkpoint(&mut trainer, dir)?;
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let report = evaluate(&trainer, seed, episodes, Some(&out.join("eval_trajectories.csv")))?;
    export_metrics(&report.rows, &out.join("eval_metrics.csv"))?;
    fs::write(out.join("eval_summary.toml"), toml::to_string(&report.summary)?)?;
    Ok(report)
}

/// Graph snapshot after `ticks` ticks of lane keeping at zero acceleration.
pub fn inspect_graph(cfg: &RunConfig, seed: u64, ticks: u64) -> Result<GraphSnapshot> {
    let mut env = Env::new(env_for(&cfg.env, eval_episode_seed(seed, 0)))?;
    let mut policy = ConstantPolicy { lane_cmd: 0, accel: 0.0 };
    while env.clock().f_tick < ticks && !env.is_done() {
        hgrl_rl::episode::step_env(&mut env, &mut policy, 0)?;
    }
    Ok(env.observe(Dim::L, None)?.graph.snapshot())
}
