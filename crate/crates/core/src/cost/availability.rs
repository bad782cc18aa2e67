use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvailabilityMode {
    /// Flat penalty `α` while busy.
    Binary,
    /// Penalty proportional to the remaining share of the busy action.
    #[default]
    RemainingTime,
}

/// Progress of the action a worker is currently tied to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusyState {
    /// Nominal duration `T` of the busy action, seconds.
    pub nominal: f64,
    /// Elapsed time `t` on it, clamped to `[0, T]`.
    pub elapsed: f64,
}

/// `ξ` of a single worker: zero when available.
pub fn availability_cost(alpha: f64, busy: Option<BusyState>, mode: AvailabilityMode) -> f64 {
    let Some(busy) = busy else { return 0.0 };
    match mode {
        AvailabilityMode::Binary => alpha,
        AvailabilityMode::RemainingTime => {
            if busy.nominal <= 0.0 {
                return 0.0;
            }
            let t = busy.elapsed.clamp(0.0, busy.nominal);
            alpha * (busy.nominal - t) / busy.nominal
        }
    }
}

/// `Ξ` of a candidate: the largest member cost, so a combination is as
/// unavailable as its busiest member.
pub fn collaborative_availability(members: &[f64]) -> f64 {
    members.iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn busy(nominal: f64, elapsed: f64) -> Option<BusyState> {
        Some(BusyState { nominal, elapsed })
    }

    #[test]
    fn available_worker_costs_nothing() {
        assert_eq!(availability_cost(40.0, None, AvailabilityMode::Binary), 0.0);
        assert_eq!(availability_cost(40.0, None, AvailabilityMode::RemainingTime), 0.0);
    }

    #[test]
    fn remaining_time_endpoints() {
        let m = AvailabilityMode::RemainingTime;
        assert_eq!(availability_cost(40.0, busy(20.0, 0.0), m), 40.0);
        assert_eq!(availability_cost(40.0, busy(20.0, 20.0), m), 0.0);
        assert_eq!(availability_cost(40.0, busy(20.0, 5.0), m), 30.0);
    }

    #[test]
    fn binary_ignores_progress() {
        assert_eq!(availability_cost(40.0, busy(20.0, 19.0), AvailabilityMode::Binary), 40.0);
    }

    #[test]
    fn collaboration_takes_the_max() {
        assert_eq!(collaborative_availability(&[0.0, 5.0]), 5.0);
        assert_eq!(collaborative_availability(&[0.0, 0.0]), 0.0);
        assert_eq!(collaborative_availability(&[7.0]), 7.0);
    }

    #[test]
    fn remaining_time_is_nonincreasing() {
        let m = AvailabilityMode::RemainingTime;
        let mut last = f64::INFINITY;
        for i in 0..=200 {
            let v = availability_cost(33.0, busy(17.0, i as f64 * 0.1), m);
            assert!(v <= last);
            last = v;
        }
    }
}
