//! Token bucket used both by the client gate and the simulated provider.
//!
//! The bucket is driven by explicit timestamps so the same code works under
//! the monotonic clock and the simulator's virtual clock.

use crate::clock::Micros;

#[derive(Debug, Clone)]
pub struct TokenBucket {
    rate_per_s: f64,
    capacity: f64,
    tokens: f64,
    last: Micros,
}

impl TokenBucket {
    /// A bucket that allows a one-second burst at `rate_per_s`.
    pub fn new(rate_per_s: f64) -> Self {
        assert!(rate_per_s > 0.0, "rate limit must be positive");
        let capacity = rate_per_s.max(1.0);
        Self {
            rate_per_s,
            capacity,
            tokens: capacity,
            last: Micros::ZERO,
        }
    }

    fn refill(&mut self, now: Micros) {
        if now > self.last {
            let dt = (now - self.last).as_secs_f64();
            self.tokens = (self.tokens + dt * self.rate_per_s).min(self.capacity);
            self.last = now;
        }
    }

    pub fn try_take(&mut self, now: Micros) -> bool {
        self.refill(now);
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            true
        } else {
            false
        }
    }

    /// Earliest instant at which a token will be available.
    pub fn next_available(&mut self, now: Micros) -> Micros {
        self.refill(now);
        if self.tokens >= 1.0 {
            now
        } else {
            let wait_s = (1.0 - self.tokens) / self.rate_per_s;
            now + Micros((wait_s * 1e6).ceil() as u64)
        }
    }
}
