//! Fixed-step three-lane highway simulator.
//!
//! Lane 0 is the slow lane on the ramp side, lane 2 the fast lane. CAVs are
//! injected into lane 0 at the on-ramp junction and must leave through the
//! off-ramp from lane 0. Human-driven vehicles enter at the upstream end of
//! every lane, follow the Intelligent Driver Model and never change lanes.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const NUM_LANES: u8 = 3;
pub const SPEED_LIMIT: f64 = 35.0;
pub const VEHICLE_LENGTH: f64 = 5.0;
/// Length of the spawn cell kept clear in front of and behind an entry point.
pub const ENTRY_CELL_M: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VehicleKind {
    Cav,
    Hv,
}

impl VehicleKind {
    /// Indicator column: 1 for a CAV, 0 for an HV.
    pub fn indicator(self) -> f64 {
        match self {
            VehicleKind::Cav => 1.0,
            VehicleKind::Hv => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    RampIn,
    Main,
    RampOut,
}

impl Segment {
    /// Normalized road-segment code used as a node feature.
    pub fn code(self) -> f64 {
        match self {
            Segment::RampIn => 0.0,
            Segment::Main => 0.5,
            Segment::RampOut => 1.0,
        }
    }
}

/// Kinematic and identity record of one vehicle. `pos` is the front bumper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    pub kind: VehicleKind,
    pub lane: u8,
    pub pos: f64,
    pub lat: f64,
    pub speed: f64,
    pub accel: f64,
    pub length: f64,
    pub segment: Segment,
    pub active: bool,
}

impl VehicleState {
    pub fn new(id: u32, kind: VehicleKind, lane: u8, pos: f64, speed: f64, road: &RoadConfig) -> Self {
        Self {
            id,
            kind,
            lane,
            pos,
            lat: road.lane_center(lane),
            speed,
            accel: 0.0,
            length: VEHICLE_LENGTH,
            segment: Segment::Main,
            active: true,
        }
    }

    pub fn is_cav(&self) -> bool {
        self.kind == VehicleKind::Cav
    }

    /// Position of the rear bumper.
    pub fn rear(&self) -> f64 {
        self.pos - self.length
    }
}

/// Bumper-to-bumper gap from `follower` to `leader` (may be negative on overlap).
pub fn bumper_gap(follower: &VehicleState, leader: &VehicleState) -> f64 {
    leader.rear() - follower.pos
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadConfig {
    pub length_m: f64,
    pub lanes: u8,
    pub lane_width_m: f64,
    /// Per-lane (min, max) speed band in m/s, lane 0 first.
    pub lane_speed_bands: [(f64, f64); 3],
    pub entry_pos: f64,
    pub exit_pos: f64,
    pub dt_f: f64,
    pub dt_l: f64,
}

impl Default for RoadConfig {
    fn default() -> Self {
        Self {
            length_m: 1000.0,
            lanes: NUM_LANES,
            lane_width_m: 3.2,
            lane_speed_bands: [(8.0, 15.0), (14.0, 24.0), (20.0, 35.0)],
            entry_pos: 100.0,
            exit_pos: 900.0,
            dt_f: 0.1,
            dt_l: 0.5,
        }
    }
}

impl RoadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lanes != NUM_LANES {
            return Err(CoreError::InvalidArgument(format!(
                "road must have exactly {NUM_LANES} lanes, got {}",
                self.lanes
            )));
        }
        if !(self.length_m > 0.0 && self.lane_width_m > 0.0) {
            return Err(CoreError::InvalidArgument("road length and lane width must be positive".into()));
        }
        if !(0.0 < self.entry_pos && self.entry_pos < self.exit_pos && self.exit_pos < self.length_m) {
            return Err(CoreError::InvalidArgument(format!(
                "need 0 < entry_pos ({}) < exit_pos ({}) < length_m ({})",
                self.entry_pos, self.exit_pos, self.length_m
            )));
        }
        for (lane, (lo, hi)) in self.lane_speed_bands.iter().enumerate() {
            if !(0.0 <= *lo && lo < hi && *hi <= SPEED_LIMIT) {
                return Err(CoreError::InvalidArgument(format!("lane {lane} speed band ({lo}, {hi}) is invalid")));
            }
        }
        self.delta()?;
        Ok(())
    }

    /// Integer ratio of the lane-change period to the following period.
    pub fn delta(&self) -> Result<usize> {
        if !(self.dt_f > 0.0 && self.dt_l > 0.0) {
            return Err(CoreError::InvalidArgument("time steps must be positive".into()));
        }
        let ratio = self.dt_l / self.dt_f;
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 {
            return Err(CoreError::InvalidArgument(format!(
                "dt_l / dt_f must be a positive integer, got {ratio}"
            )));
        }
        Ok(rounded as usize)
    }

    pub fn lane_center(&self, lane: u8) -> f64 {
        (f64::from(lane) + 0.5) * self.lane_width_m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_vehicles: usize,
    pub m_cavs: usize,
    /// HV arrival rate per lane in vehicles per hour.
    pub hv_density_per_lane: [f64; 3],
    pub hv_init_speed_per_lane: [f64; 3],
    pub cav_init_speed: f64,
    pub episode_limit_s: f64,
    pub cav_spawn_window_s: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_vehicles: 50,
            m_cavs: 5,
            hv_density_per_lane: [360.0, 720.0, 720.0],
            hv_init_speed_per_lane: [12.0, 18.0, 22.0],
            cav_init_speed: 15.0,
            episode_limit_s: 150.0,
            cav_spawn_window_s: 50.0,
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_cavs > self.n_vehicles {
            return Err(CoreError::InvalidArgument(format!(
                "m_cavs ({}) exceeds n_vehicles ({})",
                self.m_cavs, self.n_vehicles
            )));
        }
        if self.hv_density_per_lane.iter().any(|d| !(*d > 0.0)) {
            return Err(CoreError::InvalidArgument("all HV densities must be positive".into()));
        }
        let speeds = self.hv_init_speed_per_lane.iter().chain(std::iter::once(&self.cav_init_speed));
        for s in speeds {
            if !(0.0..=SPEED_LIMIT).contains(s) {
                return Err(CoreError::InvalidArgument(format!("initial speed {s} outside [0, {SPEED_LIMIT}]")));
            }
        }
        if !(self.episode_limit_s > 0.0 && self.cav_spawn_window_s >= 0.0) {
            return Err(CoreError::InvalidArgument("episode limit must be positive".into()));
        }
        Ok(())
    }
}

/// Intelligent Driver Model parameters plus the acceleration clamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmParams {
    pub desired_speed: f64,
    pub time_headway: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub min_gap: f64,
    pub exponent: f64,
    pub accel_min: f64,
    pub accel_max: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: 15.0,
            time_headway: 1.5,
            max_accel: 1.5,
            comfort_decel: 2.0,
            min_gap: 2.0,
            exponent: 4.0,
            accel_min: -4.5,
            accel_max: 3.0,
        }
    }
}

impl IdmParams {
    pub fn with_desired_speed(&self, v0: f64) -> Self {
        Self { desired_speed: v0, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmOutcome {
    pub accel: f64,
    /// Set when the leader overlaps the ego vehicle.
    pub overlap: bool,
}

pub fn idm_acceleration(ego: &VehicleState, leader: Option<&VehicleState>, p: &IdmParams) -> IdmOutcome {
    let v = ego.speed;
    let free = p.max_accel * (1.0 - (v / p.desired_speed).powf(p.exponent));
    let raw = match leader {
        None => free,
        Some(lead) => {
            let gap = bumper_gap(ego, lead);
            if gap <= 0.0 {
                return IdmOutcome { accel: p.accel_min, overlap: gap < 0.0 };
            }
            let dv = v - lead.speed;
            let s_star = p.min_gap + (v * p.time_headway + v * dv / (2.0 * (p.max_accel * p.comfort_decel).sqrt())).max(0.0);
            free - p.max_accel * (s_star / gap).powi(2)
        }
    };
    IdmOutcome { accel: raw.clamp(p.accel_min, p.accel_max), overlap: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// CAV left through the off-ramp from lane 0.
    OffRamp,
    /// CAV passed the off-ramp junction outside lane 0.
    MissedExit,
    /// Vehicle ran off the downstream end of the road.
    RoadEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvanceResult {
    pub world: Vec<VehicleState>,
    /// (follower id, leader id) pairs that overlap after the step.
    pub collisions: Vec<(u32, u32)>,
    pub exits: Vec<(u32, ExitKind)>,
}

/// Integrates one fixed step. Speeds are clamped to `[0, SPEED_LIMIT]` and the
/// stored acceleration is the effective one after clamping.
pub fn advance_step(
    world: &[VehicleState],
    accels: &BTreeMap<u32, f64>,
    dt: f64,
    road: &RoadConfig,
) -> Result<AdvanceResult> {
    let mut next = world.to_vec();
    for v in next.iter_mut().filter(|v| v.active) {
        let a = *accels.get(&v.id).ok_or(CoreError::UnknownVehicle(v.id))?;
        if !a.is_finite() {
            return Err(CoreError::InvalidArgument(format!("acceleration for vehicle {} is not finite", v.id)));
        }
        let speed = (v.speed + a * dt).clamp(0.0, SPEED_LIMIT);
        v.pos += 0.5 * (v.speed + speed) * dt;
        v.accel = (speed - v.speed) / dt;
        v.speed = speed;
    }

    let mut collisions = Vec::new();
    let mut collided = Vec::new();
    for lane in 0..NUM_LANES {
        let mut in_lane: Vec<usize> = (0..next.len()).filter(|&i| next[i].active && next[i].lane == lane).collect();
        in_lane.sort_by(|&a, &b| next[a].pos.total_cmp(&next[b].pos).then(next[a].id.cmp(&next[b].id)));
        for pair in in_lane.windows(2) {
            let (f, l) = (&next[pair[0]], &next[pair[1]]);
            if bumper_gap(f, l) < 0.0 {
                collisions.push((f.id, l.id));
                collided.extend([pair[0], pair[1]]);
            }
        }
    }
    for i in collided {
        next[i].active = false;
    }

    let mut exits = Vec::new();
    for v in next.iter_mut().filter(|v| v.active) {
        if v.is_cav() && v.pos >= road.exit_pos {
            v.active = false;
            if v.lane == 0 {
                v.segment = Segment::RampOut;
                exits.push((v.id, ExitKind::OffRamp));
            } else {
                exits.push((v.id, ExitKind::MissedExit));
            }
        } else if v.pos >= road.length_m {
            v.active = false;
            exits.push((v.id, ExitKind::RoadEnd));
        }
    }
    Ok(AdvanceResult { world: next, collisions, exits })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneChange {
    Applied,
    Kept,
    Rejected,
}

/// Discrete lane hop `lane + cmd`. Off-road targets are rejected unchanged.
pub fn apply_lane_change(ego: &VehicleState, cmd: i8, road: &RoadConfig) -> Result<(VehicleState, LaneChange)> {
    if !(-1..=1).contains(&cmd) {
        return Err(CoreError::InvalidArgument(format!("lane command must be -1, 0 or 1, got {cmd}")));
    }
    if !ego.is_cav() || ego.segment != Segment::Main {
        return Err(CoreError::InvalidArgument(format!("vehicle {} is not a CAV on the main road", ego.id)));
    }
    if cmd == 0 {
        return Ok((ego.clone(), LaneChange::Kept));
    }
    let target = i16::from(ego.lane) + i16::from(cmd);
    if !(0..i16::from(road.lanes)).contains(&target) {
        return Ok((ego.clone(), LaneChange::Rejected));
    }
    let mut out = ego.clone();
    out.lane = target as u8;
    out.lat = road.lane_center(out.lane);
    Ok((out, LaneChange::Applied))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CavOutcome {
    InProgress,
    Success,
    FailMissedExit,
    FailCollision,
    FailTimeout,
}

impl CavOutcome {
    pub fn is_resolved(self) -> bool {
        self != CavOutcome::InProgress
    }

    pub fn label(self) -> &'static str {
        match self {
            CavOutcome::InProgress => "in-progress",
            CavOutcome::Success => "success",
            CavOutcome::FailMissedExit => "fail-missed-exit",
            CavOutcome::FailCollision => "fail-collision",
            CavOutcome::FailTimeout => "fail-timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeStatus {
    Running,
    Done,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatusReport {
    pub status: EpisodeStatus,
    pub outcomes: BTreeMap<u32, CavOutcome>,
}

/// `resolved` holds the outcomes of CAVs that already left the world; active
/// CAVs are in progress unless the clock has reached the episode limit.
pub fn episode_status(
    world: &[VehicleState],
    clock: f64,
    scenario: &ScenarioConfig,
    resolved: &BTreeMap<u32, CavOutcome>,
) -> StatusReport {
    let timed_out = clock >= scenario.episode_limit_s - 1e-9;
    let mut outcomes = resolved.clone();
    for v in world.iter().filter(|v| v.active && v.is_cav()) {
        outcomes.entry(v.id).or_insert(if timed_out { CavOutcome::FailTimeout } else { CavOutcome::InProgress });
    }
    let all_resolved = outcomes.len() >= scenario.m_cavs && outcomes.values().all(|o| o.is_resolved());
    let status = if timed_out || all_resolved { EpisodeStatus::Done } else { EpisodeStatus::Running };
    StatusReport { status, outcomes }
}

/// Poisson HV arrivals per lane and pre-drawn CAV ramp-injection times.
#[derive(Debug, Clone)]
pub struct Spawner {
    hv_next: [f64; 3],
    cav_times: VecDeque<f64>,
    hv_spawned: usize,
    hv_cap: usize,
    next_id: u32,
}

impl Spawner {
    pub fn new(scenario: &ScenarioConfig, rng: &mut impl Rng) -> Self {
        let mut cav_times: Vec<f64> =
            (0..scenario.m_cavs).map(|_| rng.random::<f64>() * scenario.cav_spawn_window_s).collect();
        cav_times.sort_by(f64::total_cmp);
        let mut hv_next = [0.0; 3];
        for (lane, next) in hv_next.iter_mut().enumerate() {
            *next = Self::inter_arrival(scenario.hv_density_per_lane[lane], rng);
        }
        Self {
            hv_next,
            cav_times: cav_times.into(),
            hv_spawned: 0,
            hv_cap: scenario.n_vehicles - scenario.m_cavs,
            next_id: 0,
        }
    }

    /// Mean inter-arrival is `3600 / density` seconds.
    fn inter_arrival(density_per_hour: f64, rng: &mut impl Rng) -> f64 {
        Exp::new(density_per_hour / 3600.0).expect("positive rate").sample(rng)
    }

    pub fn pending_cav_times(&self) -> impl Iterator<Item = &f64> {
        self.cav_times.iter()
    }

    pub fn spawn_tick(
        &mut self,
        clock: f64,
        scenario: &ScenarioConfig,
        road: &RoadConfig,
        world: &[VehicleState],
        rng: &mut impl Rng,
    ) -> Vec<VehicleState> {
        let mut spawned: Vec<VehicleState> = Vec::new();
        let eps = 1e-9;
        for lane in 0..NUM_LANES {
            let l = usize::from(lane);
            while self.hv_next[l] <= clock + eps {
                let clear = cell_clear(world.iter().chain(spawned.iter()), lane, 0.0);
                if clear && self.hv_spawned < self.hv_cap {
                    let v = VehicleState::new(self.next_id, VehicleKind::Hv, lane, 0.0, scenario.hv_init_speed_per_lane[l], road);
                    self.next_id += 1;
                    self.hv_spawned += 1;
                    spawned.push(v);
                }
                self.hv_next[l] += Self::inter_arrival(scenario.hv_density_per_lane[l], rng);
            }
        }
        while let Some(&t) = self.cav_times.front() {
            if t > clock + eps || !cell_clear(world.iter().chain(spawned.iter()), 0, road.entry_pos) {
                break;
            }
            self.cav_times.pop_front();
            let v = VehicleState::new(self.next_id, VehicleKind::Cav, 0, road.entry_pos, scenario.cav_init_speed, road);
            self.next_id += 1;
            spawned.push(v);
        }
        spawned
    }
}

fn cell_clear<'a>(mut vehicles: impl Iterator<Item = &'a VehicleState>, lane: u8, at: f64) -> bool {
    !vehicles.any(|v| {
        v.active && v.lane == lane && v.pos > at - VEHICLE_LENGTH - ENTRY_CELL_M && v.rear() < at + ENTRY_CELL_M
    })
}

/// Per-tick summary returned by [`Simulator::step`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickReport {
    pub collisions: Vec<(u32, u32)>,
    /// Final states of CAVs removed during this tick.
    pub removed: Vec<VehicleState>,
    /// CAVs resolved during this tick with their outcome.
    pub resolved: Vec<(u32, CavOutcome)>,
    pub spawned: Vec<u32>,
}

/// Owns one episode's world, clock and RNG stream.
#[derive(Debug, Clone)]
pub struct Simulator {
    road: RoadConfig,
    scenario: ScenarioConfig,
    idm: IdmParams,
    rng: ChaCha8Rng,
    spawner: Spawner,
    world: Vec<VehicleState>,
    tick: u64,
    outcomes: BTreeMap<u32, CavOutcome>,
    spawn_time: BTreeMap<u32, f64>,
    resolve_time: BTreeMap<u32, f64>,
}

impl Simulator {
    pub fn new(road: RoadConfig, scenario: ScenarioConfig, idm: IdmParams) -> Result<Self> {
        road.validate()?;
        scenario.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
        let spawner = Spawner::new(&scenario, &mut rng);
        let mut sim = Self {
            road,
            scenario,
            idm,
            rng,
            spawner,
            world: Vec::new(),
            tick: 0,
            outcomes: BTreeMap::new(),
            spawn_time: BTreeMap::new(),
            resolve_time: BTreeMap::new(),
        };
        sim.spawn();
        Ok(sim)
    }

    pub fn road(&self) -> &RoadConfig {
        &self.road
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn world(&self) -> &[VehicleState] {
        &self.world
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn clock(&self) -> f64 {
        self.tick as f64 * self.road.dt_f
    }

    pub fn vehicle(&self, id: u32) -> Option<&VehicleState> {
        self.world.iter().find(|v| v.id == id)
    }

    pub fn spawn_time(&self, id: u32) -> Option<f64> {
        self.spawn_time.get(&id).copied()
    }

    pub fn resolve_time(&self, id: u32) -> Option<f64> {
        self.resolve_time.get(&id).copied()
    }

    pub fn active_cav_ids(&self) -> Vec<u32> {
        self.world.iter().filter(|v| v.is_cav()).map(|v| v.id).collect()
    }

    pub fn status(&self) -> StatusReport {
        episode_status(&self.world, self.clock(), &self.scenario, &self.outcomes)
    }

    /// Nearest vehicle strictly ahead of `ego` in its lane.
    pub fn leader_of(&self, ego: &VehicleState) -> Option<&VehicleState> {
        leader_in_lane(&self.world, ego, ego.lane)
    }

    pub fn apply_lane_changes(&mut self, cmds: &BTreeMap<u32, i8>) -> Result<BTreeMap<u32, LaneChange>> {
        let mut results = BTreeMap::new();
        for (&id, &cmd) in cmds {
            let idx = self.world.iter().position(|v| v.id == id).ok_or(CoreError::UnknownVehicle(id))?;
            let (next, result) = apply_lane_change(&self.world[idx], cmd, &self.road)?;
            self.world[idx] = next;
            results.insert(id, result);
        }
        Ok(results)
    }

    /// Advances one following step. CAV accelerations come from `cav_accels`
    /// (missing entries mean zero); HVs use the IDM.
    pub fn step(&mut self, cav_accels: &BTreeMap<u32, f64>) -> Result<TickReport> {
        let mut accels = BTreeMap::new();
        for v in &self.world {
            let a = if v.is_cav() {
                cav_accels.get(&v.id).copied().unwrap_or(0.0).clamp(self.idm.accel_min, self.idm.accel_max)
            } else {
                let params = self.idm.with_desired_speed(self.scenario.hv_init_speed_per_lane[usize::from(v.lane)]);
                idm_acceleration(v, self.leader_of(v), &params).accel
            };
            accels.insert(v.id, a);
        }
        let adv = advance_step(&self.world, &accels, self.road.dt_f, &self.road)?;
        self.tick += 1;
        let clock = self.clock();
        let mut report = TickReport { collisions: adv.collisions.clone(), ..Default::default() };

        let collided: Vec<u32> = adv.collisions.iter().flat_map(|&(a, b)| [a, b]).collect();
        for v in adv.world.iter().filter(|v| v.is_cav() && !v.active) {
            let outcome = if collided.contains(&v.id) {
                CavOutcome::FailCollision
            } else {
                match adv.exits.iter().find(|(id, _)| *id == v.id).map(|(_, k)| *k) {
                    Some(ExitKind::OffRamp) => CavOutcome::Success,
                    _ => CavOutcome::FailMissedExit,
                }
            };
            self.outcomes.insert(v.id, outcome);
            self.resolve_time.insert(v.id, clock);
            report.resolved.push((v.id, outcome));
            report.removed.push(v.clone());
        }
        self.world = adv.world.into_iter().filter(|v| v.active).collect();

        if clock >= self.scenario.episode_limit_s - 1e-9 {
            for v in self.world.iter().filter(|v| v.is_cav()) {
                self.outcomes.insert(v.id, CavOutcome::FailTimeout);
                self.resolve_time.insert(v.id, clock);
                report.resolved.push((v.id, CavOutcome::FailTimeout));
                report.removed.push(v.clone());
            }
            self.world.retain(|v| !v.is_cav());
        } else {
            report.spawned = self.spawn();
        }
        Ok(report)
    }

    fn spawn(&mut self) -> Vec<u32> {
        let clock = self.clock();
        let new = self.spawner.spawn_tick(clock, &self.scenario, &self.road, &self.world, &mut self.rng);
        let ids = new.iter().map(|v| v.id).collect();
        for v in new {
            if v.is_cav() {
                self.spawn_time.insert(v.id, clock);
            }
            self.world.push(v);
        }
        ids
    }

    /// Outcomes of every CAV, with unspawned ones reported as timeouts once done.
    pub fn final_outcomes(&self) -> BTreeMap<u32, CavOutcome> {
        self.status().outcomes
    }

    pub fn unspawned_cavs(&self) -> usize {
        self.spawner.pending_cav_times().count()
    }
}

/// Nearest active vehicle ahead of `ego` (by front position) in `lane`.
pub fn leader_in_lane<'a>(world: &'a [VehicleState], ego: &VehicleState, lane: u8) -> Option<&'a VehicleState> {
    world
        .iter()
        .filter(|v| v.active && v.id != ego.id && v.lane == lane && ahead_of(v, ego))
        .min_by(|a, b| a.pos.total_cmp(&b.pos).then(a.id.cmp(&b.id)))
}

/// Nearest active vehicle behind `ego` in `lane`.
pub fn follower_in_lane<'a>(world: &'a [VehicleState], ego: &VehicleState, lane: u8) -> Option<&'a VehicleState> {
    world
        .iter()
        .filter(|v| v.active && v.id != ego.id && v.lane == lane && !ahead_of(v, ego))
        .max_by(|a, b| a.pos.total_cmp(&b.pos).then(a.id.cmp(&b.id)))
}

/// Strict ordering along the road; ties broken by id so every pair is ordered.
fn ahead_of(v: &VehicleState, ego: &VehicleState) -> bool {
    v.pos > ego.pos || (v.pos == ego.pos && v.id > ego.id)
}
