// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Serialize, Serializer};

/// Simulated time in thousandths of a unit. Fixed point keeps event order
/// identical on every platform.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const TICKS_PER_UNIT: u64 = 1000;

    /// Rounds to the nearest tick; negative and non-finite inputs are `None`.
    pub fn from_units(units: f64) -> Option<SimTime> {
        if !units.is_finite() || units < 0.0 {
            return None;
        }
        Some(SimTime((units * Self::TICKS_PER_UNIT as f64).round() as u64))
    }

    pub fn as_units(self) -> f64 {
        self.0 as f64 / Self::TICKS_PER_UNIT as f64
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / Self::TICKS_PER_UNIT, self.0 % Self::TICKS_PER_UNIT)
    }
}

// Reports carry the exact decimal string, not a float.
impl Serialize for SimTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}
