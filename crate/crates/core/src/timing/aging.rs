// SPDX-License-Identifier: Apache-2.0
//! Aging-to-delay scaling.
//!
//! Gate delay is taken inversely proportional to the on-current
//! `I_on ~ mu/2 * C_ox * W/L * (Vdd - Vth)^2`. Only the ratio between the aged
//! and the fresh device is applied, so oxide capacitance and geometry cancel
//! and the factor depends on `Vdd`, `Vth0`, the threshold shift and the
//! mobility loss at a given stress duty cycle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mapping from stress duty cycle to threshold-voltage shift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftModel {
    Linear,
    /// `dvth_max * (duty/100)^p`.
    Power { p: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgingParams {
    pub vdd: f64,
    pub vth0: f64,
    pub dvth_max: f64,
    pub dmu_max_frac: f64,
    pub shift_model: ShiftModel,
}

impl Default for AgingParams {
    fn default() -> Self {
        Self { vdd: 1.1, vth0: 0.40, dvth_max: 0.050, dmu_max_frac: 0.05, shift_model: ShiftModel::Linear }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AgingError {
    #[error("unphysical aging parameters: {0}")]
    Unphysical(String),
    #[error("duty cycle {0}% is not on the 0..=100 step-10 grid")]
    OffGrid(u32),
}

impl AgingParams {
    pub fn check(&self) -> Result<(), AgingError> {
        let headroom = self.vdd - self.vth0 - self.dvth_max;
        if !(self.vth0 + self.dvth_max > 0.0 && headroom > 0.0) {
            return Err(AgingError::Unphysical(format!(
                "need 0 < vth0 + dvth_max < vdd (vdd={}, vth0={}, dvth_max={})",
                self.vdd, self.vth0, self.dvth_max
            )));
        }
        if !(0.0..1.0).contains(&self.dmu_max_frac) {
            return Err(AgingError::Unphysical(format!("dmu_max_frac={} not in [0, 1)", self.dmu_max_frac)));
        }
        if let ShiftModel::Power { p } = self.shift_model {
            if !(p > 0.0 && p.is_finite()) {
                return Err(AgingError::Unphysical(format!("power exponent {p} must be positive")));
            }
        }
        Ok(())
    }

    pub fn delta_vth(&self, duty: AgingState) -> f64 {
        let s = duty.fraction();
        match self.shift_model {
            ShiftModel::Linear => self.dvth_max * s,
            ShiftModel::Power { p } => self.dvth_max * s.powf(p),
        }
    }
}

/// One point of the 11-value stress grid, 0% (fresh) to 100%.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct AgingState(u8);

impl AgingState {
    pub const FRESH: AgingState = AgingState(0);
    pub const MAX: AgingState = AgingState(100);

    pub fn new(duty: u32) -> Result<Self, AgingError> {
        if duty <= 100 && duty % 10 == 0 {
            Ok(Self(duty as u8))
        } else {
            Err(AgingError::OffGrid(duty))
        }
    }

    /// The full grid 0, 10, ..., 100.
    pub fn grid() -> Vec<AgingState> {
        (0..=10).map(|i| AgingState(i * 10)).collect()
    }

    pub fn duty(self) -> u32 {
        self.0 as u32
    }

    pub fn fraction(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl TryFrom<u32> for AgingState {
    type Error = AgingError;

    fn try_from(v: u32) -> Result<Self, Self::Error> {
        AgingState::new(v)
    }
}

impl From<AgingState> for u32 {
    fn from(s: AgingState) -> u32 {
        s.duty()
    }
}

/// Delay multiplier of an aged device relative to a fresh one (>= 1).
pub fn aging_factor(p: &AgingParams, s: AgingState) -> Result<f64, AgingError> {
    p.check()?;
    let od_fresh = p.vdd - p.vth0;
    let od_aged = od_fresh - p.delta_vth(s);
    let mobility_ratio = 1.0 - p.dmu_max_frac * s.fraction();
    if od_aged <= 0.0 || mobility_ratio <= 0.0 {
        return Err(AgingError::Unphysical(format!("non-positive drive at duty {}%", s.duty())));
    }
    let r = od_fresh / od_aged;
    Ok(r * r / mobility_ratio)
}
