//! Simulated Function-as-a-Service platform.
//!
//! Two modes share the same container lifecycle and billing rules:
//!
//! * [`FaasPlatform`] executes task bodies for real on the caller's thread,
//!   sleeping for the configured invocation overhead and cold-start time.
//! * [`SyntheticSim`] is a single-threaded discrete-event simulator over a
//!   virtual clock. Task durations are supplied by the caller, so runs are
//!   fully deterministic.

mod platform;
mod pool;
mod synthetic;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clock::Micros;

pub use platform::{Admission, FaasPlatform, Invocation};
pub use pool::{ContainerId, ContainerPool};
pub use synthetic::{advance_virtual_clock, ScheduledTask, SimCompletion, SimRun, SyntheticSim};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaasConfig {
    pub provider_concurrency_limit: usize,
    /// Provider-side invocations per second.
    pub rate_limit: f64,
    pub invocation_overhead_ms: f64,
    pub cold_start_ms: f64,
    pub memory_mb: u64,
    pub billing_quantum_ms: u64,
    pub container_keepalive_ms: f64,
}

impl Default for FaasConfig {
    fn default() -> Self {
        Self {
            provider_concurrency_limit: 1_000,
            rate_limit: 10_000.0,
            invocation_overhead_ms: 13.0,
            cold_start_ms: 200.0,
            memory_mb: 1_792,
            billing_quantum_ms: 1,
            container_keepalive_ms: 600_000.0,
        }
    }
}

impl FaasConfig {
    pub fn validate(&self) -> Result<(), FaasError> {
        let durations = [
            ("invocation_overhead_ms", self.invocation_overhead_ms),
            ("cold_start_ms", self.cold_start_ms),
            ("container_keepalive_ms", self.container_keepalive_ms),
        ];
        for (name, v) in durations {
            if !(v >= 0.0) {
                return Err(FaasError::InvalidConfig(format!("{name} must be >= 0")));
            }
        }
        if self.memory_mb == 0 {
            return Err(FaasError::InvalidConfig("memory_mb must be > 0".into()));
        }
        if self.provider_concurrency_limit == 0 {
            return Err(FaasError::InvalidConfig(
                "provider_concurrency_limit must be >= 1".into(),
            ));
        }
        if self.billing_quantum_ms == 0 {
            return Err(FaasError::InvalidConfig(
                "billing_quantum_ms must be >= 1".into(),
            ));
        }
        if !(self.rate_limit > 0.0) {
            return Err(FaasError::InvalidConfig("rate_limit must be > 0".into()));
        }
        Ok(())
    }

    pub fn overhead(&self) -> Micros {
        Micros::from_ms_f64(self.invocation_overhead_ms)
    }

    pub fn cold_start(&self) -> Micros {
        Micros::from_ms_f64(self.cold_start_ms)
    }

    pub fn keepalive(&self) -> Option<Micros> {
        if self.container_keepalive_ms.is_finite() {
            Some(Micros::from_ms_f64(self.container_keepalive_ms))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FaasError {
    #[error("throttled: provider concurrency limit reached")]
    Throttled,
    #[error("rate limited: invocation rate exceeded")]
    RateLimited,
    #[error("negative duration for task {0}")]
    NegativeDuration(usize),
    #[error("invalid submit time for task {0}")]
    InvalidSubmitTime(usize),
    #[error("invalid faas config: {0}")]
    InvalidConfig(String),
}

/// One billed function invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BillingRecord {
    pub invocation_id: u64,
    pub start: Micros,
    pub end: Micros,
    pub billed_ms: u64,
    pub memory_mb: u64,
    pub cold_start: bool,
}

/// Billed milliseconds for a run from `start` to `end`: the duration rounded
/// up to a whole number of quanta, and never less than one quantum.
pub fn bill(start: Micros, end: Micros, quantum_ms: u64) -> u64 {
    assert!(end >= start, "bill: end precedes start");
    assert!(quantum_ms > 0, "bill: zero billing quantum");
    let quantum_us = quantum_ms * 1_000;
    let raw = (end - start).0;
    let quanta = raw.div_ceil(quantum_us).max(1);
    quanta * quantum_ms
}

pub const BILLING_CSV_HEADER: &str = "invocation_id,start_ms,end_ms,billed_ms,memory_mb,cold_start";

pub fn write_billing_csv<W: Write>(records: &[BillingRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{BILLING_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.invocation_id,
            r.start.as_ms_floor(),
            r.end.as_ms_floor(),
            r.billed_ms,
            r.memory_mb,
            r.cold_start
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bill_rounds_up_to_quantum() {
        assert_eq!(bill(Micros(0), Micros(400), 1), 1);
        assert_eq!(bill(Micros(0), Micros(1_000_000), 1), 1_000);
        assert_eq!(bill(Micros(0), Micros(150_000), 100), 200);
        assert_eq!(bill(Micros(5), Micros(5), 100), 100);
    }

    #[test]
    fn defaults_are_valid() {
        let c = FaasConfig::default();
        c.validate().unwrap();
        assert_eq!(c.provider_concurrency_limit, 1_000);
        assert_eq!(c.memory_mb, 1_792);
        assert_eq!(c.invocation_overhead_ms, 13.0);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            FaasConfig {
                memory_mb: 0,
                ..Default::default()
            },
            FaasConfig {
                provider_concurrency_limit: 0,
                ..Default::default()
            },
            FaasConfig {
                cold_start_ms: -1.0,
                ..Default::default()
            },
            FaasConfig {
                billing_quantum_ms: 0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(FaasError::InvalidConfig(_))));
        }
    }

    proptest! {
        #[test]
        fn billing_never_undercharges(durs in proptest::collection::vec(0u64..5_000_000, 1..50), q in 1u64..200) {
            let raw: u64 = durs.iter().sum();
            let billed: u64 = durs.iter().map(|&d| bill(Micros(0), Micros(d), q)).sum();
            prop_assert!(billed * 1_000 >= raw);
            for &d in &durs {
                let b = bill(Micros(0), Micros(d), q);
                prop_assert!(b > 0 && b.is_multiple_of(q));
                // Never more than one quantum of overcharge.
                prop_assert!(b * 1_000 < d + q * 1_000 || d == 0);
            }
        }
    }
}
