//! Braking safety distance and the standard safety distance coefficient κ.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, CoreError, Result};
use crate::sim::{bumper_gap, follower_in_lane, leader_in_lane, VehicleState, NUM_LANES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrakingParams {
    /// Sensor/communication delay, s.
    pub t1: f64,
    /// Braking-gap elimination time, s.
    pub t2: f64,
    /// Linear braking phase, s.
    pub t3: f64,
    /// Gap left after stopping, m.
    pub d: f64,
    /// Maximum deceleration magnitude, m/s².
    pub a_max: f64,
}

impl Default for BrakingParams {
    fn default() -> Self {
        Self { t1: 0.3, t2: 0.1, t3: 0.24, d: 0.6, a_max: 4.5 }
    }
}

impl BrakingParams {
    pub fn validate(&self) -> Result<()> {
        if [self.t1, self.t2, self.t3, self.d, self.a_max].iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(CoreError::InvalidArgument(format!("braking parameters must be positive: {self:?}")))
        }
    }
}

/// Four-phase braking distance for a vehicle at `v_e` slowing to `v_f`.
/// An opening gap (`v_f > v_e`) is evaluated with `v_f = v_e`.
pub fn braking_safety_distance(v_e: f64, v_f: f64, p: &BrakingParams) -> Result<f64> {
    ensure_finite("v_e", v_e)?;
    ensure_finite("v_f", v_f)?;
    if v_e < 0.0 || v_f < 0.0 {
        return Err(CoreError::InvalidArgument(format!("speeds must be non-negative, got {v_e}, {v_f}")));
    }
    let v_f = v_f.min(v_e);
    Ok((p.t1 + p.t2) * v_e + 0.5 * p.t3 * (v_e - v_f) + (v_e * v_e - v_f * v_f) / (2.0 * p.a_max) + p.d)
}

/// `κ = min(D_sf / D_es - 1, 1)`.
pub fn safety_coefficient(d_sf: f64, d_es: f64) -> Result<f64> {
    ensure_finite("d_sf", d_sf)?;
    if d_es.is_nan() {
        return Err(CoreError::InvalidArgument("d_es is NaN".into()));
    }
    if d_es <= 0.0 {
        return Err(CoreError::DegenerateContact(d_es));
    }
    Ok((d_sf / d_es - 1.0).min(1.0))
}

/// κ assigned to an empty slot.
pub const EMPTY_SLOT_KAPPA: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Front,
    LeftFront,
    RightFront,
    Rear,
    LeftRear,
    RightRear,
}

impl Slot {
    /// Slot order j = 1..6.
    pub const ALL: [Slot; 6] = [Slot::Front, Slot::LeftFront, Slot::RightFront, Slot::Rear, Slot::LeftRear, Slot::RightRear];
    pub const SAME_LANE: [Slot; 2] = [Slot::Front, Slot::Rear];
    pub const ADJACENT: [Slot; 4] = [Slot::LeftFront, Slot::RightFront, Slot::LeftRear, Slot::RightRear];

    /// Lane offset; "left" is toward the fast lane (higher index).
    pub fn lane_offset(self) -> i16 {
        match self {
            Slot::Front | Slot::Rear => 0,
            Slot::LeftFront | Slot::LeftRear => 1,
            Slot::RightFront | Slot::RightRear => -1,
        }
    }

    pub fn is_front(self) -> bool {
        matches!(self, Slot::Front | Slot::LeftFront | Slot::RightFront)
    }

    pub fn label(self) -> &'static str {
        match self {
            Slot::Front => "front",
            Slot::LeftFront => "left_front",
            Slot::RightFront => "right_front",
            Slot::Rear => "rear",
            Slot::LeftRear => "left_rear",
            Slot::RightRear => "right_rear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotReading {
    pub slot: Slot,
    pub neighbor: Option<u32>,
    /// Bumper-to-bumper distance; `None` for empty slots.
    pub gap: Option<f64>,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanDim {
    L,
    F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSlots {
    pub ego: u32,
    pub readings: Vec<SlotReading>,
}

impl NeighborSlots {
    pub fn kappas(&self) -> Vec<f64> {
        self.readings.iter().map(|r| r.kappa).collect()
    }

    pub fn kappa(&self, slot: Slot) -> Option<f64> {
        self.readings.iter().find(|r| r.slot == slot).map(|r| r.kappa)
    }

    pub fn max_kappa(&self, slots: &[Slot]) -> f64 {
        self.readings.iter().filter(|r| slots.contains(&r.slot)).map(|r| r.kappa).fold(EMPTY_SLOT_KAPPA, f64::max)
    }
}

/// κ between the rear vehicle `(speed v_e)` and the front one `(v_f)` at
/// bumper gap `gap`. Non-positive gaps in an adjacent lane read as κ = 1.
pub fn pair_kappa(v_rear: f64, v_front: f64, gap: f64, p: &BrakingParams) -> Result<f64> {
    let d_sf = braking_safety_distance(v_rear, v_front, p)?;
    match safety_coefficient(d_sf, gap) {
        Ok(k) => Ok(k),
        Err(CoreError::DegenerateContact(_)) => Ok(1.0),
        Err(e) => Err(e),
    }
}

/// Six slots for the lane-change dimension, front/rear for following.
pub fn neighbor_scan(world: &[VehicleState], ego_id: u32, dim: ScanDim, p: &BrakingParams) -> Result<NeighborSlots> {
    let ego = world.iter().find(|v| v.id == ego_id && v.active).ok_or(CoreError::UnknownVehicle(ego_id))?;
    let slots: &[Slot] = match dim {
        ScanDim::L => &Slot::ALL,
        ScanDim::F => &Slot::SAME_LANE,
    };
    let mut readings = Vec::with_capacity(slots.len());
    for &slot in slots {
        let lane = i16::from(ego.lane) + slot.lane_offset();
        let neighbor = if (0..i16::from(NUM_LANES)).contains(&lane) {
            let lane = lane as u8;
            if slot.is_front() {
                leader_in_lane(world, ego, lane)
            } else {
                follower_in_lane(world, ego, lane)
            }
        } else {
            None
        };
        let reading = match neighbor {
            None => SlotReading { slot, neighbor: None, gap: None, kappa: EMPTY_SLOT_KAPPA },
            Some(n) => {
                let (rear, front) = if slot.is_front() { (ego, n) } else { (n, ego) };
                let gap = bumper_gap(rear, front);
                SlotReading { slot, neighbor: Some(n.id), gap: Some(gap), kappa: pair_kappa(rear.speed, front.speed, gap, p)? }
            }
        };
        readings.push(reading);
    }
    Ok(NeighborSlots { ego: ego_id, readings })
}
