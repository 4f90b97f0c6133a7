use serde::{Deserialize, Serialize};

use crate::error::{Result, RlError};

/// Geometric decay from `eps0` to `eps_t` over `t_steps`, then held.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExploreSchedule {
    pub eps0: f64,
    pub eps_t: f64,
    pub t_steps: u64,
}

impl ExploreSchedule {
    pub const LANE: ExploreSchedule = ExploreSchedule { eps0: 0.6, eps_t: 0.02, t_steps: 140_000 };
    pub const FOLLOW: ExploreSchedule = ExploreSchedule { eps0: 0.5, eps_t: 0.05, t_steps: 700_000 };

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.eps_t && self.eps_t < self.eps0 && self.eps0 <= 1.0) || self.t_steps == 0 {
            return Err(RlError::InvalidArgument(format!("exploration schedule {self:?}")));
        }
        Ok(())
    }
}

pub fn epsilon_at(t: u64, s: &ExploreSchedule) -> f64 {
    if t == 0 {
        return s.eps0;
    }
    if t >= s.t_steps {
        return s.eps_t;
    }
    s.eps0 * ((s.eps_t / s.eps0).ln() * t as f64 / s.t_steps as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        let s = ExploreSchedule::LANE;
        assert_eq!(epsilon_at(0, &s), 0.6);
        assert_eq!(epsilon_at(140_000, &s), 0.02);
        assert_eq!(epsilon_at(10_000_000, &s), 0.02);
        assert!((epsilon_at(70_000, &s) - (0.6f64 * 0.02).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn invalid_schedules() {
        assert!(ExploreSchedule { eps0: 0.1, eps_t: 0.2, t_steps: 5 }.validate().is_err());
        assert!(ExploreSchedule { eps0: 0.5, eps_t: 0.1, t_steps: 0 }.validate().is_err());
        assert!(ExploreSchedule::FOLLOW.validate().is_ok());
    }
}
