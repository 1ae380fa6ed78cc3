//! Clock abstraction shared by the real executors and the discrete-event
//! simulator, so that every metric is computed the same way regardless of
//! where the timestamps came from.

use std::fmt;
use std::ops::{Add, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// A point in time (or a span) in microseconds relative to a run start.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Micros(pub u64);

impl Micros {
    pub const ZERO: Micros = Micros(0);

    pub fn from_ms(ms: u64) -> Self {
        Micros(ms * 1_000)
    }

    pub fn from_ms_f64(ms: f64) -> Self {
        Micros((ms * 1_000.0).round() as u64)
    }

    pub fn as_ms_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    /// Whole milliseconds, truncated. Monotone, so orderings survive.
    pub fn as_ms_floor(self) -> u64 {
        self.0 / 1_000
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }

    pub fn saturating_sub(self, other: Micros) -> Micros {
        Micros(self.0.saturating_sub(other.0))
    }

    pub fn to_duration(self) -> Duration {
        Duration::from_micros(self.0)
    }
}

impl Add for Micros {
    type Output = Micros;
    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0 + rhs.0)
    }
}

impl Sub for Micros {
    type Output = Micros;
    fn sub(self, rhs: Micros) -> Micros {
        Micros(self.0 - rhs.0)
    }
}

impl fmt::Display for Micros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Micros;
}

/// Real monotonic time since construction.
#[derive(Debug, Clone)]
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Micros {
        Micros(self.origin.elapsed().as_micros() as u64)
    }
}

/// Simulated time that only moves when told to, and never backwards.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: AtomicU64,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Moves the clock forward to `t`.
    ///
    /// # Panics
    ///
    /// Panics if `t` lies in the past.
    pub fn advance_to(&self, t: Micros) {
        let prev = self.now.fetch_max(t.0, Ordering::SeqCst);
        assert!(
            prev <= t.0,
            "virtual clock moved backwards: now={prev}us, target={}us",
            t.0
        );
    }

    pub fn advance_by(&self, d: Micros) {
        self.now.fetch_add(d.0, Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Micros {
        Micros(self.now.load(Ordering::SeqCst))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn virtual_clock_advances() {
        let c = VirtualClock::new();
        assert_eq!(c.now(), Micros::ZERO);
        c.advance_to(Micros(10));
        c.advance_by(Micros(5));
        assert_eq!(c.now(), Micros(15));
        c.advance_to(Micros(15));
    }

    #[test]
    #[should_panic(expected = "backwards")]
    fn virtual_clock_rejects_going_back() {
        let c = VirtualClock::new();
        c.advance_to(Micros(10));
        c.advance_to(Micros(9));
    }

    #[test]
    fn monotonic_clock_never_decreases() {
        let c = MonotonicClock::new();
        let a = c.now();
        let b = c.now();
        assert!(b >= a);
    }

    #[test]
    fn ms_conversions() {
        assert_eq!(Micros::from_ms(3).0, 3_000);
        assert_eq!(Micros(2_999).as_ms_floor(), 2);
        assert_eq!(Micros::from_ms_f64(0.4), Micros(400));
    }
}
