use serde::{Deserialize, Serialize};

/// Frequency of the tick loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRate {
    pub hz: u32,
}

impl Default for TickRate {
    fn default() -> Self {
        TickRate { hz: 100 }
    }
}

impl TickRate {
    pub fn period_secs(self) -> f64 {
        1.0 / self.hz as f64
    }

    /// Number of whole ticks covering `secs`, rounded to the nearest tick.
    pub fn ticks_for(self, secs: f64) -> u64 {
        (secs * self.hz as f64).round().max(0.0) as u64
    }

    pub fn secs(self, ticks: u64) -> f64 {
        ticks as f64 / self.hz as f64
    }
}

/// Simulated time advanced one tick at a time. Time is kept as an integer
/// tick count so that durations expressed in whole ticks add up exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VirtualClock {
    tick: u64,
    hz: u32,
}

impl VirtualClock {
    pub fn new(rate: TickRate) -> Self {
        VirtualClock {
            tick: 0,
            hz: rate.hz,
        }
    }

    pub fn advance(&mut self) {
        self.tick += 1;
    }

    pub fn jump_to(&mut self, tick: u64) {
        debug_assert!(tick >= self.tick);
        self.tick = tick;
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn rate(&self) -> TickRate {
        TickRate { hz: self.hz }
    }

    pub fn now(&self) -> f64 {
        self.tick as f64 / self.hz as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rate_is_100hz() {
        assert_eq!(TickRate::default().hz, 100);
        assert_eq!(TickRate::default().ticks_for(12.0), 1200);
    }

    #[test]
    fn virtual_clock_counts_ticks() {
        let mut clock = VirtualClock::new(TickRate::default());
        for _ in 0..250 {
            clock.advance();
        }
        assert_eq!(clock.tick(), 250);
        assert_eq!(clock.now(), 2.5);
    }
}
