//! Asynchronous two-dimension decision process over the simulator.
//!
//! The following (F) dimension acts every `dt_f` tick, the lane-change (L)
//! dimension every `delta = dt_l / dt_f` ticks. Per-CAV observations combine
//! a self state, safety coefficients of neighbor slots, extra indicators and
//! the dimension's traffic graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::graph::{build_graph, DimTag, EgoGraph, FeatureScale, GraphMode, GraphThresholds, MultilevelGraph};
use crate::risk::{neighbor_scan, BrakingParams, NeighborSlots, ScanDim, Slot};
use crate::sim::{
    CavOutcome, EpisodeStatus, IdmParams, LaneChange, RoadConfig, ScenarioConfig, Simulator, StatusReport, TickReport,
    VehicleState, SPEED_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dim {
    L,
    F,
}

impl Dim {
    pub fn tag(self) -> DimTag {
        match self {
            Dim::L => DimTag::L,
            Dim::F => DimTag::F,
        }
    }

    pub fn scan(self) -> ScanDim {
        match self {
            Dim::L => ScanDim::L,
            Dim::F => ScanDim::F,
        }
    }
}

/// CAV acceleration command bounds, m/s².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionBounds {
    pub a_dec: f64,
    pub a_acc: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self { a_dec: -4.5, a_acc: 3.0 }
    }
}

impl ActionBounds {
    pub fn clip(&self, a: f64) -> f64 {
        a.clamp(self.a_dec, self.a_acc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub c1: f64,
    pub c2: f64,
    pub w_fast: f64,
    /// Distance from the entrance over which the fast-lane bonus fades, m.
    pub fast_horizon_m: f64,
    pub w_slow: f64,
    /// Distance before the exit over which the slow-lane bonus builds, m.
    pub exit_approach_m: f64,
    pub c3: f64,
    pub lane_change_window_s: f64,
    pub r_in: f64,
    pub band_violation_slope: f64,
    pub a_comf: f64,
    pub c5: f64,
    pub c6: f64,
    /// Energy normalizer: a full-throttle second at the speed limit is 1.
    pub e_norm: f64,
    pub w_safe: f64,
    pub w_task: f64,
    pub w_comfort: f64,
    pub w_energy: f64,
    pub success_bonus_l: f64,
    pub missed_exit_penalty_l: f64,
    pub collision_penalty_l: f64,
    pub timeout_penalty_l: f64,
    pub collision_penalty_f: f64,
    pub timeout_penalty_f: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            c1: 3.0,
            c2: 3.0,
            w_fast: 1.0,
            fast_horizon_m: 500.0,
            w_slow: 1.0,
            exit_approach_m: 300.0,
            c3: 0.2,
            lane_change_window_s: 10.0,
            r_in: 0.5,
            band_violation_slope: 0.1,
            a_comf: 2.5,
            c5: 0.5,
            c6: 1.0,
            e_norm: 3.0 * SPEED_LIMIT,
            w_safe: 1.0,
            w_task: 1.0,
            w_comfort: 1.0,
            w_energy: 1.0,
            success_bonus_l: 100.0,
            missed_exit_penalty_l: 300.0,
            collision_penalty_l: 1000.0,
            timeout_penalty_l: 100.0,
            collision_penalty_f: 1000.0,
            timeout_penalty_f: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub safe: f64,
    pub task: f64,
    pub comfort: f64,
    pub energy: f64,
    /// Mission outcome term, nonzero only on the tick a CAV is resolved.
    pub terminal: f64,
    pub total: f64,
}

impl RewardBreakdown {
    fn weighted(safe: f64, task: f64, comfort: f64, energy: f64, terminal: f64, cfg: &RewardConfig) -> Self {
        let total = cfg.w_safe * safe + cfg.w_task * task + cfg.w_comfort * comfort + cfg.w_energy * energy + terminal;
        Self { safe, task, comfort, energy, terminal, total }
    }

    fn accumulate(&mut self, other: &RewardBreakdown) {
        self.safe += other.safe;
        self.task += other.task;
        self.comfort += other.comfort;
        self.energy += other.energy;
        self.terminal += other.terminal;
        self.total += other.total;
    }
}

/// Positive-traction-work proxy, zero under braking or coasting.
pub fn energy_increment(v: f64, accel: f64, dt: f64, e_norm: f64) -> f64 {
    accel.max(0.0) * v * dt / e_norm
}

/// `(safe, task, comfort)` of the lane-change dimension for one CAV.
/// `kappa_max` is the largest κ over the four adjacent-lane slots.
pub fn reward_lane_change(
    cav: &VehicleState,
    kappa_max: f64,
    recent_lane_changes: usize,
    cfg: &RewardConfig,
    road: &RoadConfig,
) -> (f64, f64, f64) {
    let safe = -cfg.c1.powf(kappa_max + 1.0);
    let from_entry = (cav.pos - road.entry_pos).max(0.0);
    let to_exit = (road.exit_pos - cav.pos).max(0.0);
    let f1 = if cav.lane == 2 { cfg.w_fast * (1.0 - from_entry / cfg.fast_horizon_m).max(0.0) } else { 0.0 };
    let f2 = if cav.lane == 0 { cfg.w_slow * (1.0 - to_exit / cfg.exit_approach_m).max(0.0) } else { 0.0 };
    let comfort = -cfg.c3 * recent_lane_changes as f64;
    (safe, f1 + f2, comfort)
}

/// `(safe, task, comfort, energy)` of the following dimension for one CAV.
/// `kappa_max` is the larger κ of the front and rear slots.
pub fn reward_following(
    cav: &VehicleState,
    accel: f64,
    kappa_max: f64,
    dt: f64,
    cfg: &RewardConfig,
    road: &RoadConfig,
) -> (f64, f64, f64, f64) {
    let safe = -cfg.c2.powf(kappa_max + 1.0);
    let (lo, hi) = road.lane_speed_bands[usize::from(cav.lane)];
    let v = cav.speed;
    let task = if v < lo {
        -cfg.band_violation_slope * (lo - v)
    } else if v > hi {
        -cfg.band_violation_slope * (v - hi)
    } else {
        cfg.r_in * dt
    };
    let comfort = -cfg.c5 * (accel.abs() - cfg.a_comf).max(0.0);
    let energy = -cfg.c6 * energy_increment(v, accel, dt, cfg.e_norm);
    (safe, task, comfort, energy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub road: RoadConfig,
    pub scenario: ScenarioConfig,
    pub idm: IdmParams,
    pub thresholds: GraphThresholds,
    pub braking: BrakingParams,
    pub rewards: RewardConfig,
    pub actions: ActionBounds,
    pub graph_mode: GraphMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            road: RoadConfig::default(),
            scenario: ScenarioConfig::default(),
            idm: IdmParams::default(),
            thresholds: GraphThresholds::default(),
            braking: BrakingParams::default(),
            rewards: RewardConfig::default(),
            actions: ActionBounds::default(),
            graph_mode: GraphMode::Multilevel,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.road.validate()?;
        self.scenario.validate()?;
        self.thresholds.validate()?;
        self.braking.validate()?;
        if !(self.actions.a_dec < 0.0 && self.actions.a_acc > 0.0) {
            return Err(CoreError::InvalidArgument("need a_dec < 0 < a_acc".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvClock {
    pub f_tick: u64,
    pub delta: u64,
}

impl EnvClock {
    pub fn l_tick(&self) -> u64 {
        self.f_tick / self.delta
    }

    pub fn is_l_tick(&self) -> bool {
        self.f_tick % self.delta == 0
    }
}

/// Per-CAV state vector `[s_self, s_env, s_add]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: u32,
    /// Normalized `[speed, position, lane]`.
    pub s_self: [f64; 3],
    /// Safety coefficients: six slots for L, front/rear for F.
    pub s_env: Vec<f64>,
    /// `[kind]` for L, `[kind, lane-change command]` for F.
    pub s_add: Vec<f64>,
}

impl AgentState {
    pub fn vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 + self.s_env.len() + self.s_add.len());
        v.extend_from_slice(&self.s_self);
        v.extend_from_slice(&self.s_env);
        v.extend_from_slice(&self.s_add);
        v
    }

    pub fn len(dim: Dim) -> usize {
        match dim {
            Dim::L => 3 + 6 + 1,
            Dim::F => 3 + 2 + 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphObservation {
    pub dim: Dim,
    pub graph: MultilevelGraph,
    pub agents: Vec<AgentState>,
    pub tick: u64,
}

impl GraphObservation {
    pub fn agent(&self, id: u32) -> Option<&AgentState> {
        self.agents.iter().find(|a| a.id == id)
    }

    /// One network sample for CAV `id`: its receptive-field subgraph and state vector.
    pub fn sample(&self, id: u32, hops: usize) -> Result<(EgoGraph, Vec<f64>)> {
        let agent = self.agent(id).ok_or(CoreError::UnknownVehicle(id))?;
        Ok((self.graph.ego_subgraph(self.dim.tag(), id, hops)?, agent.vector()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum JointAction {
    /// Lane commands in {-1, 0, 1} per CAV.
    L(BTreeMap<u32, i8>),
    /// Accelerations per CAV, m/s².
    F(BTreeMap<u32, f64>),
}

impl JointAction {
    pub fn dim(&self) -> Dim {
        match self {
            JointAction::L(_) => Dim::L,
            JointAction::F(_) => Dim::F,
        }
    }

    fn ids(&self) -> BTreeSet<u32> {
        match self {
            JointAction::L(m) => m.keys().copied().collect(),
            JointAction::F(m) => m.keys().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepResult {
    pub rewards_f: BTreeMap<u32, RewardBreakdown>,
    /// L rewards summed over the interval, emitted when an interval closes.
    pub rewards_l: BTreeMap<u32, RewardBreakdown>,
    pub resolved: BTreeMap<u32, CavOutcome>,
    pub lane_changes: BTreeMap<u32, LaneChange>,
    pub kappas_f: BTreeMap<u32, Vec<f64>>,
    pub done: bool,
    pub tick: TickReport,
}

pub struct Env {
    cfg: EnvConfig,
    sim: Simulator,
    delta: u64,
    scale: FeatureScale,
    last_l_cmd: BTreeMap<u32, i8>,
    lane_change_times: BTreeMap<u32, VecDeque<f64>>,
    l_open: BTreeMap<u32, RewardBreakdown>,
    decisions_l: u64,
    decisions_f: u64,
}

impl Env {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let delta = cfg.road.delta()? as u64;
        let scale = FeatureScale {
            pos: cfg.road.length_m,
            lat: f64::from(cfg.road.lanes) * cfg.road.lane_width_m,
            ..FeatureScale::default()
        };
        let sim = Simulator::new(cfg.road.clone(), cfg.scenario.clone(), cfg.idm.clone())?;
        Ok(Self {
            cfg,
            sim,
            delta,
            scale,
            last_l_cmd: BTreeMap::new(),
            lane_change_times: BTreeMap::new(),
            l_open: BTreeMap::new(),
            decisions_l: 0,
            decisions_f: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn sim(&self) -> &Simulator {
        &self.sim
    }

    pub fn clock(&self) -> EnvClock {
        EnvClock { f_tick: self.sim.tick(), delta: self.delta }
    }

    pub fn status(&self) -> StatusReport {
        self.sim.status()
    }

    pub fn is_done(&self) -> bool {
        self.status().status == EpisodeStatus::Done
    }

    pub fn decision_counts(&self) -> (u64, u64) {
        (self.decisions_l, self.decisions_f)
    }

    pub fn last_l_cmd(&self, id: u32) -> i8 {
        self.last_l_cmd.get(&id).copied().unwrap_or(0)
    }

    pub fn active_cavs(&self) -> Vec<u32> {
        self.sim.active_cav_ids()
    }

    pub fn scan(&self, id: u32, dim: Dim) -> Result<NeighborSlots> {
        neighbor_scan(self.sim.world(), id, dim.scan(), &self.cfg.braking)
    }

    /// Builds the observation of `dim`. For F, `pending_l` supplies lane
    /// commands chosen this tick but not yet applied.
    pub fn observe(&self, dim: Dim, pending_l: Option<&JointAction>) -> Result<GraphObservation> {
        let mut last = self.last_l_cmd.clone();
        if let Some(JointAction::L(cmds)) = pending_l {
            last.extend(cmds.iter().map(|(&k, &v)| (k, v)));
        }
        let world = self.sim.world();
        let graph = if world.is_empty() {
            empty_graph(self.sim.tick())
        } else {
            build_graph(self.cfg.graph_mode, world, &self.cfg.thresholds, &last, &self.scale, self.sim.tick())?
        };
        let mut agents = Vec::new();
        for v in world.iter().filter(|v| v.is_cav()) {
            let slots = neighbor_scan(world, v.id, dim.scan(), &self.cfg.braking)?;
            let s_add = match dim {
                Dim::L => vec![v.kind.indicator()],
                Dim::F => vec![v.kind.indicator(), f64::from(last.get(&v.id).copied().unwrap_or(0))],
            };
            agents.push(AgentState {
                id: v.id,
                s_self: [v.speed / self.scale.speed, v.pos / self.scale.pos, f64::from(v.lane) / self.scale.lane],
                s_env: slots.kappas(),
                s_add,
            });
        }
        agents.sort_by_key(|a| a.id);
        Ok(GraphObservation { dim, graph, agents, tick: self.sim.tick() })
    }

    fn check_keys(&self, action: &JointAction) -> Result<()> {
        let expected: BTreeSet<u32> = self.active_cavs().into_iter().collect();
        let got = action.ids();
        if expected != got {
            return Err(CoreError::InvalidArgument(format!(
                "{:?} action covers {got:?} but active CAVs are {expected:?}",
                action.dim()
            )));
        }
        Ok(())
    }

    pub fn step(&mut self, actions_f: &JointAction, actions_l: Option<&JointAction>) -> Result<StepResult> {
        let clock = self.clock();
        match (clock.is_l_tick(), actions_l) {
            (true, None) => {
                return Err(CoreError::InvalidArgument(format!("tick {} requires lane-change actions", clock.f_tick)))
            }
            (false, Some(_)) => {
                return Err(CoreError::InvalidArgument(format!("lane-change actions off schedule at tick {}", clock.f_tick)))
            }
            _ => {}
        }
        let JointAction::F(accels) = actions_f else {
            return Err(CoreError::InvalidArgument("following actions must be accelerations".into()));
        };
        self.check_keys(actions_f)?;

        let mut result = StepResult::default();
        let now = self.sim.clock();
        if let Some(l) = actions_l {
            let JointAction::L(cmds) = l else {
                return Err(CoreError::InvalidArgument("lane-change actions must be lane commands".into()));
            };
            self.check_keys(l)?;
            result.lane_changes = self.sim.apply_lane_changes(cmds)?;
            for (&id, &cmd) in cmds {
                self.last_l_cmd.insert(id, cmd);
                if result.lane_changes[&id] == LaneChange::Applied {
                    self.lane_change_times.entry(id).or_default().push_back(now);
                }
                self.l_open.entry(id).or_default();
            }
            self.decisions_l += 1;
        }

        let clipped: BTreeMap<u32, f64> = accels.iter().map(|(&id, &a)| (id, self.cfg.actions.clip(a))).collect();
        let report = self.sim.step(&clipped)?;
        self.decisions_f += 1;
        let after_clock = self.sim.clock();
        let dt = self.cfg.road.dt_f;
        let cfg = &self.cfg.rewards;
        let road = &self.cfg.road;
        let resolved: BTreeMap<u32, CavOutcome> = report.resolved.iter().copied().collect();

        for &id in accels.keys() {
            let outcome = resolved.get(&id).copied();
            let (state, kappa_f, kappa_l) = match outcome {
                None => {
                    let world = self.sim.world();
                    let v = world.iter().find(|v| v.id == id).expect("unresolved CAV stays active").clone();
                    let f = neighbor_scan(world, id, ScanDim::F, &self.cfg.braking)?;
                    let l = neighbor_scan(world, id, ScanDim::L, &self.cfg.braking)?;
                    result.kappas_f.insert(id, f.kappas());
                    (v, f.max_kappa(&Slot::SAME_LANE), l.max_kappa(&Slot::ADJACENT))
                }
                Some(o) => {
                    let v = report.removed.iter().find(|v| v.id == id).expect("resolved CAV reported").clone();
                    let k = if o == CavOutcome::FailCollision { 1.0 } else { -1.0 };
                    (v, k, k)
                }
            };

            let (safe, task, comfort, energy) = reward_following(&state, state.accel, kappa_f, dt, cfg, road);
            let terminal_f = match outcome {
                Some(CavOutcome::FailCollision) => -cfg.collision_penalty_f,
                Some(CavOutcome::FailTimeout) => -cfg.timeout_penalty_f,
                _ => 0.0,
            };
            result.rewards_f.insert(id, RewardBreakdown::weighted(safe, task, comfort, energy, terminal_f, cfg));

            if let Some(acc) = self.l_open.get_mut(&id) {
                let window = self.lane_change_times.entry(id).or_default();
                while window.front().is_some_and(|&t| t <= after_clock - cfg.lane_change_window_s) {
                    window.pop_front();
                }
                let (safe, task, comfort) = reward_lane_change(&state, kappa_l, window.len(), cfg, road);
                let terminal_l = match outcome {
                    Some(CavOutcome::Success) => cfg.success_bonus_l,
                    Some(CavOutcome::FailMissedExit) => -cfg.missed_exit_penalty_l,
                    Some(CavOutcome::FailCollision) => -cfg.collision_penalty_l,
                    Some(CavOutcome::FailTimeout) => -cfg.timeout_penalty_l,
                    _ => 0.0,
                };
                acc.accumulate(&RewardBreakdown::weighted(safe, task, comfort, 0.0, terminal_l, cfg));
            }
        }

        let closes = self.clock().is_l_tick();
        let open_ids: Vec<u32> = self.l_open.keys().copied().collect();
        for id in open_ids {
            if closes || resolved.contains_key(&id) {
                if let Some(acc) = self.l_open.remove(&id) {
                    result.rewards_l.insert(id, acc);
                }
            }
        }
        for id in resolved.keys() {
            self.last_l_cmd.remove(id);
            self.lane_change_times.remove(id);
        }
        result.resolved = resolved;
        result.done = self.is_done();
        result.tick = report;
        Ok(result)
    }
}

fn empty_graph(tick: u64) -> MultilevelGraph {
    use crate::graph::{AdjTag, NodeFeatureMatrix, WeightedAdjacency};
    let feats = |dim| NodeFeatureMatrix {
        dim,
        ids: Vec::new(),
        cols: NodeFeatureMatrix::column_names(dim).len(),
        data: Vec::new(),
    };
    MultilevelGraph {
        features_global: feats(DimTag::Global),
        features_l: feats(DimTag::L),
        features_f: feats(DimTag::F),
        adj_l: WeightedAdjacency::zeros(AdjTag::L, Vec::new()),
        adj_f: WeightedAdjacency::zeros(AdjTag::F, Vec::new()),
        tick,
    }
}
