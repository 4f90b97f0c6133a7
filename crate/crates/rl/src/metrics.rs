use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use hgrl_core::env::{energy_increment, Env, StepResult};
use hgrl_core::sim::{CavOutcome, VehicleState};

/// Accelerations below this count as emergency braking, m/s².
pub const EMERGENCY_BRAKE: f64 = -4.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub m_cavs: usize,
    pub successes: usize,
    pub collisions: usize,
    pub missed_exits: usize,
    pub timeouts: usize,
    pub p_success: f64,
    /// Emergency-braking ticks per CAV.
    pub n_braking: f64,
    /// Mean spawn-to-resolution time over resolved CAVs, s.
    pub t_travel: f64,
    /// Normalized traction energy per CAV.
    pub energy: f64,
    /// Per-CAV episode returns, averaged over the scenario's CAVs.
    pub l_reward: f64,
    pub f_reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CavTally {
    pub braking: u32,
    pub energy: f64,
    pub l_reward: f64,
    pub f_reward: f64,
}

/// Per-tick accumulation of the episode metrics.
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    pub cavs: BTreeMap<u32, CavTally>,
}

fn state_of<'a>(env: &'a Env, result: &'a StepResult, id: u32) -> Option<&'a VehicleState> {
    env.sim().vehicle(id).or_else(|| result.tick.removed.iter().find(|v| v.id == id))
}

impl MetricsAccumulator {
    pub fn record(&mut self, env: &Env, result: &StepResult) {
        let dt = env.config().road.dt_f;
        let e_norm = env.config().rewards.e_norm;
        for (&id, r) in &result.rewards_f {
            let tally = self.cavs.entry(id).or_default();
            tally.f_reward += r.total;
            if let Some(v) = state_of(env, result, id) {
                if v.accel < EMERGENCY_BRAKE {
                    tally.braking += 1;
                }
                tally.energy += energy_increment(v.speed, v.accel, dt, e_norm);
            }
        }
        for (&id, r) in &result.rewards_l {
            self.cavs.entry(id).or_default().l_reward += r.total;
        }
    }

    pub fn finish(&self, env: &Env) -> EpisodeMetrics {
        let sim = env.sim();
        let m = sim.scenario().m_cavs;
        let outcomes = sim.final_outcomes();
        let count = |o: CavOutcome| outcomes.values().filter(|&&x| x == o).count();
        let travel: Vec<f64> = outcomes
            .keys()
            .filter_map(|&id| Some(sim.resolve_time(id)? - sim.spawn_time(id)?))
            .collect();
        let per_cav = |f: fn(&CavTally) -> f64| self.cavs.values().map(f).sum::<f64>() / m.max(1) as f64;
        let successes = count(CavOutcome::Success);
        EpisodeMetrics {
            m_cavs: m,
            successes,
            collisions: count(CavOutcome::FailCollision),
            missed_exits: count(CavOutcome::FailMissedExit),
            timeouts: count(CavOutcome::FailTimeout),
            p_success: if m == 0 { 0.0 } else { successes as f64 / m as f64 },
            n_braking: per_cav(|t| f64::from(t.braking)),
            t_travel: if travel.is_empty() { 0.0 } else { travel.iter().sum::<f64>() / travel.len() as f64 },
            energy: per_cav(|t| t.energy),
            l_reward: per_cav(|t| t.l_reward),
            f_reward: per_cav(|t| t.f_reward),
        }
    }
}
