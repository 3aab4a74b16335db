use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

/// Linearly decreasing threshold sequence.
///
/// Emits `l_max` values `delta0, delta0 - k, ..., k` where `k` is the
/// decrement and `delta0 = k * l_max`. `floor` is a hard lower bound the
/// solvers never threshold below; it may not exceed the last value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    delta0: f64,
    decrement: f64,
    floor: f64,
    l_max: usize,
}

impl ThresholdSchedule {
    pub fn new(decrement: f64, l_max: usize, floor: f64) -> Result<Self> {
        if !(decrement > 0.0) || !decrement.is_finite() {
            return arg_err(format!("threshold decrement must be positive, got {decrement}"));
        }
        if l_max == 0 {
            return arg_err("schedule needs at least one iteration");
        }
        if !(floor >= 0.0) {
            return arg_err(format!("threshold floor must be nonnegative, got {floor}"));
        }
        if floor > decrement {
            return arg_err(format!(
                "floor {floor} lies above the last scheduled threshold {decrement}"
            ));
        }
        Ok(Self {
            delta0: decrement * l_max as f64,
            decrement,
            floor,
            l_max,
        })
    }

    /// Schedule whose first threshold is `start`.
    pub fn starting_at(start: f64, l_max: usize) -> Result<Self> {
        if l_max == 0 {
            return arg_err("schedule needs at least one iteration");
        }
        Self::new(start / l_max as f64, l_max, 0.0)
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn decrement(&self) -> f64 {
        self.decrement
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Threshold for iteration `i` (0-based), clamped at the floor.
    pub fn value(&self, i: usize) -> f64 {
        (self.delta0 - i as f64 * self.decrement).max(self.floor)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.l_max).map(|i| self.value(i))
    }
}
