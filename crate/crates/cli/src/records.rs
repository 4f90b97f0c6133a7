//! Trajectory and metric records with fixed CSV layouts (see `docs/csv.md`).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use hgrl_core::env::{energy_increment, Dim, Env};
use hgrl_core::risk::Slot;
use hgrl_core::sim::{CavOutcome, VehicleKind, VehicleState};
use hgrl_rl::episode::TickRecord;
use hgrl_rl::metrics::{EpisodeMetrics, EMERGENCY_BRAKE};
use hgrl_rl::trainer::EpisodeLog;

pub const SCHEMA_VERSION: u32 = 1;

pub const TRAJECTORY_HEADER: &[&str] = &[
    "tick", "time", "id", "kind", "lane", "pos", "speed", "accel", "last_l_cmd",
    "kappa_front", "kappa_left_front", "kappa_right_front", "kappa_rear", "kappa_left_rear", "kappa_right_rear",
    "r_safe", "r_task", "r_comfort", "r_energy", "r_terminal", "r_f", "r_l", "outcome",
];

pub const METRICS_HEADER: &[&str] = &[
    "episode", "scenario_seed", "m_cavs", "successes", "collisions", "missed_exits", "timeouts",
    "p_success", "n_braking", "t_travel", "energy", "l_reward", "f_reward",
];

pub const LOG_HEADER: &[&str] = &[
    "episode", "scenario_seed", "ticks", "epsilon", "sigma", "updates_l", "updates_f", "loss_l", "loss_critic",
    "actor_objective", "p_success", "collisions", "missed_exits", "timeouts", "n_braking", "t_travel", "energy",
    "l_reward", "f_reward",
];

/// One vehicle at the end of one tick. CAV-only columns are empty for HVs;
/// reward columns are empty when no reward was issued that tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub tick: u64,
    pub time: f64,
    pub id: u32,
    pub kind: String,
    pub lane: u8,
    pub pos: f64,
    pub speed: f64,
    pub accel: f64,
    pub last_l_cmd: Option<i8>,
    pub kappa_front: Option<f64>,
    pub kappa_left_front: Option<f64>,
    pub kappa_right_front: Option<f64>,
    pub kappa_rear: Option<f64>,
    pub kappa_left_rear: Option<f64>,
    pub kappa_right_rear: Option<f64>,
    pub r_safe: Option<f64>,
    pub r_task: Option<f64>,
    pub r_comfort: Option<f64>,
    pub r_energy: Option<f64>,
    pub r_terminal: Option<f64>,
    pub r_f: Option<f64>,
    pub r_l: Option<f64>,
    /// Set on the row where a CAV resolves.
    pub outcome: Option<String>,
}

impl TrajectoryRecord {
    pub fn is_cav(&self) -> bool {
        self.kind == "cav"
    }
}

fn kind_label(k: VehicleKind) -> &'static str {
    match k {
        VehicleKind::Cav => "cav",
        VehicleKind::Hv => "hv",
    }
}

/// Collects rows after every tick: all vehicles on the road plus those
/// removed during the tick.
#[derive(Debug, Default)]
pub struct TrajectoryRecorder {
    pub rows: Vec<TrajectoryRecord>,
}

impl TrajectoryRecorder {
    pub fn observe(&mut self, env: &Env, rec: &TickRecord) {
        let sim = env.sim();
        let (tick, time) = (sim.tick(), sim.clock());
        let result = &rec.result;
        let mut vehicles: Vec<&VehicleState> = sim.world().iter().filter(|v| v.active).collect();
        vehicles.extend(result.tick.removed.iter());
        vehicles.sort_by_key(|v| v.id);
        for v in vehicles {
            let cav = v.is_cav();
            let kappas = if cav && v.active { env.scan(v.id, Dim::L).ok() } else { None };
            let k = |s: Slot| kappas.as_ref().and_then(|n| n.kappa(s));
            let f = result.rewards_f.get(&v.id);
            self.rows.push(TrajectoryRecord {
                tick,
                time,
                id: v.id,
                kind: kind_label(v.kind).to_string(),
                lane: v.lane,
                pos: v.pos,
                speed: v.speed,
                accel: v.accel,
                last_l_cmd: cav.then(|| env.last_l_cmd(v.id)),
                kappa_front: k(Slot::Front),
                kappa_left_front: k(Slot::LeftFront),
                kappa_right_front: k(Slot::RightFront),
                kappa_rear: k(Slot::Rear),
                kappa_left_rear: k(Slot::LeftRear),
                kappa_right_rear: k(Slot::RightRear),
                r_safe: f.map(|r| r.safe),
                r_task: f.map(|r| r.task),
                r_comfort: f.map(|r| r.comfort),
                r_energy: f.map(|r| r.energy),
                r_terminal: f.map(|r| r.terminal),
                r_f: f.map(|r| r.total),
                r_l: result.rewards_l.get(&v.id).map(|r| r.total),
                outcome: result.resolved.get(&v.id).map(|o| o.label().to_string()),
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsContext {
    pub m_cavs: usize,
    pub dt: f64,
    pub e_norm: f64,
}

impl MetricsContext {
    pub fn of(env: &Env) -> Self {
        let cfg = env.config();
        Self { m_cavs: cfg.scenario.m_cavs, dt: cfg.road.dt_f, e_norm: cfg.rewards.e_norm }
    }
}

#[derive(Default)]
struct CavRows {
    first_time: Option<f64>,
    last_time: f64,
    braking: u32,
    energy: f64,
    l_reward: f64,
    f_reward: f64,
}

/// Episode metrics from CAV trajectory rows and final outcomes. Only rows
/// where the CAV received a following reward count as controlled ticks.
pub fn compute_metrics(records: &[TrajectoryRecord], outcomes: &BTreeMap<u32, CavOutcome>, ctx: &MetricsContext) -> EpisodeMetrics {
    let mut cavs: BTreeMap<u32, CavRows> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_cav()) {
        let c = cavs.entry(r.id).or_default();
        c.first_time.get_or_insert(r.time);
        c.last_time = r.time;
        if let Some(f) = r.r_f {
            c.f_reward += f;
            if r.accel < EMERGENCY_BRAKE {
                c.braking += 1;
            }
            c.energy += energy_increment(r.speed, r.accel, ctx.dt, ctx.e_norm);
        }
        c.l_reward += r.r_l.unwrap_or(0.0);
    }
    let m = ctx.m_cavs;
    let count = |o: CavOutcome| outcomes.values().filter(|&&x| x == o).count();
    let travel: Vec<f64> = outcomes
        .keys()
        .filter_map(|id| cavs.get(id).and_then(|c| Some(c.last_time - c.first_time?)))
        .collect();
    let per_cav = |f: fn(&CavRows) -> f64| cavs.values().map(f).sum::<f64>() / m.max(1) as f64;
    let successes = count(CavOutcome::Success);
    EpisodeMetrics {
        m_cavs: m,
        successes,
        collisions: count(CavOutcome::FailCollision),
        missed_exits: count(CavOutcome::FailMissedExit),
        timeouts: count(CavOutcome::FailTimeout),
        p_success: if m == 0 { 0.0 } else { successes as f64 / m as f64 },
        n_braking: per_cav(|c| f64::from(c.braking)),
        t_travel: if travel.is_empty() { 0.0 } else { travel.iter().sum::<f64>() / travel.len() as f64 },
        energy: per_cav(|c| c.energy),
        l_reward: per_cav(|c| c.l_reward),
        f_reward: per_cav(|c| c.f_reward),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub scenario_seed: u64,
    pub m_cavs: usize,
    pub successes: usize,
    pub collisions: usize,
    pub missed_exits: usize,
    pub timeouts: usize,
    pub p_success: f64,
    pub n_braking: f64,
    pub t_travel: f64,
    pub energy: f64,
    pub l_reward: f64,
    pub f_reward: f64,
}

impl MetricsRow {
    pub fn new(episode: usize, scenario_seed: u64, m: &EpisodeMetrics) -> Self {
        Self {
            episode,
            scenario_seed,
            m_cavs: m.m_cavs,
            successes: m.successes,
            collisions: m.collisions,
            missed_exits: m.missed_exits,
            timeouts: m.timeouts,
            p_success: m.p_success,
            n_braking: m.n_braking,
            t_travel: m.t_travel,
            energy: m.energy,
            l_reward: m.l_reward,
            f_reward: m.f_reward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub episode: usize,
    pub scenario_seed: u64,
    pub ticks: u64,
    pub epsilon: f64,
    pub sigma: f64,
    pub updates_l: usize,
    pub updates_f: usize,
    pub loss_l: f64,
    pub loss_critic: f64,
    pub actor_objective: f64,
    pub p_success: f64,
    pub collisions: usize,
    pub missed_exits: usize,
    pub timeouts: usize,
    pub n_braking: f64,
    pub t_travel: f64,
    pub energy: f64,
    pub l_reward: f64,
    pub f_reward: f64,
}

impl From<&EpisodeLog> for LogRow {
    fn from(l: &EpisodeLog) -> Self {
        let m = &l.metrics;
        Self {
            episode: l.episode,
            scenario_seed: l.scenario_seed,
            ticks: l.ticks,
            epsilon: l.epsilon,
            sigma: l.sigma,
            updates_l: l.updates_l,
            updates_f: l.updates_f,
            loss_l: l.loss_l,
            loss_critic: l.loss_critic,
            actor_objective: l.actor_objective,
            p_success: m.p_success,
            collisions: m.collisions,
            missed_exits: m.missed_exits,
            timeouts: m.timeouts,
            n_braking: m.n_braking,
            t_travel: m.t_travel,
            energy: m.energy,
            l_reward: m.l_reward,
            f_reward: m.f_reward,
        }
    }
}

/// Writes `rows` under `header`; the header is written even with no rows.
pub fn write_csv<T: Serialize, W: Write>(out: W, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(input: R, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        anyhow::bail!("unexpected CSV header {found:?}");
    }
    r.deserialize().map(|row| row.context("malformed CSV row")).collect()
}

pub fn export_trajectories(records: &[TrajectoryRecord], path: &std::path::Path) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(std::io::BufWriter::new(f), TRAJECTORY_HEADER, records)
}

pub fn export_metrics(rows: &[MetricsRow], path: &std::path::Path) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(std::io::BufWriter::new(f), METRICS_HEADER, rows)
}

/// Mean and population standard deviation of every metric column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub schema_version: u32,
    pub episodes: usize,
    pub mean: BTreeMap<String, f64>,
    pub std: BTreeMap<String, f64>,
}

pub fn summarize(rows: &[MetricsRow]) -> MetricsSummary {
    let columns: [(&str, fn(&MetricsRow) -> f64); 6] = [
        ("p_success", |r| r.p_success),
        ("n_braking", |r| r.n_braking),
        ("t_travel", |r| r.t_travel),
        ("energy", |r| r.energy),
        ("l_reward", |r| r.l_reward),
        ("f_reward", |r| r.f_reward),
    ];
    let n = rows.len().max(1) as f64;
    let mut mean = BTreeMap::new();
    let mut std = BTreeMap::new();
    for (name, get) in columns {
        let mu = rows.iter().map(get).sum::<f64>() / n;
        let var = rows.iter().map(|r| (get(r) - mu).powi(2)).sum::<f64>() / n;
        mean.insert(name.to_string(), mu);
        std.insert(name.to_string(), var.sqrt());
    }
    MetricsSummary { schema_version: SCHEMA_VERSION, episodes: rows.len(), mean, std }
}
