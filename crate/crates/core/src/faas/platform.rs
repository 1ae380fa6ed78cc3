use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use bytes::Bytes;
use parking_lot::Mutex;

use super::{bill, BillingRecord, ContainerId, ContainerPool, FaasConfig, FaasError};
use crate::clock::{Clock, Micros};
use crate::exec::{ExecError, Task};
use crate::ratelimit::TokenBucket;
use crate::workload;

/// An admitted invocation holding a container until [`FaasPlatform::finish`].
#[derive(Debug)]
#[must_use = "an admission holds a container until it is finished"]
pub struct Admission {
    pub invocation_id: u64,
    pub container: ContainerId,
    pub cold_start: bool,
    pub admitted_at: Micros,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub result: Result<Bytes, ExecError>,
    pub billing: BillingRecord,
}

struct PlatformState {
    pool: ContainerPool,
    rate: TokenBucket,
    next_invocation: u64,
    billing: Vec<BillingRecord>,
    throttled: u64,
    rate_limited: u64,
}

/// Real-execution FaaS platform. Safe to invoke from many threads; task
/// bodies run on the invoking thread, outside the platform lock.
pub struct FaasPlatform {
    config: FaasConfig,
    clock: Arc<dyn Clock>,
    state: Mutex<PlatformState>,
}

impl FaasPlatform {
    pub fn new(config: FaasConfig, clock: Arc<dyn Clock>) -> Result<Self, FaasError> {
        config.validate()?;
        let state = PlatformState {
            pool: ContainerPool::new(config.keepalive()),
            rate: TokenBucket::new(config.rate_limit),
            next_invocation: 0,
            billing: Vec::new(),
            throttled: 0,
            rate_limited: 0,
        };
        Ok(Self {
            config,
            clock,
            state: Mutex::new(state),
        })
    }

    pub fn config(&self) -> &FaasConfig {
        &self.config
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Admits one invocation, or fails with `Throttled` when the provider
    /// concurrency limit is reached, or `RateLimited` when the provider's
    /// token bucket is empty.
    pub fn admit(&self) -> Result<Admission, FaasError> {
        let now = self.clock.now();
        let mut st = self.state.lock();
        if st.pool.active() >= self.config.provider_concurrency_limit {
            st.throttled += 1;
            return Err(FaasError::Throttled);
        }
        if !st.rate.try_take(now) {
            st.rate_limited += 1;
            return Err(FaasError::RateLimited);
        }
        let (container, cold_start) = st.pool.acquire(now);
        let invocation_id = st.next_invocation;
        st.next_invocation += 1;
        Ok(Admission {
            invocation_id,
            container,
            cold_start,
            admitted_at: now,
        })
    }

    /// Releases the container and records the billing for a body that ran
    /// from `start` to `end`.
    pub fn finish(&self, adm: Admission, start: Micros, end: Micros) -> BillingRecord {
        let record = BillingRecord {
            invocation_id: adm.invocation_id,
            start,
            end,
            billed_ms: bill(start, end, self.config.billing_quantum_ms),
            memory_mb: self.config.memory_mb,
            cold_start: adm.cold_start,
        };
        let mut st = self.state.lock();
        st.pool.release(adm.container, end);
        st.billing.push(record.clone());
        record
    }

    /// Full invocation on the calling thread: admission, overhead and
    /// cold-start delay, task body, billing.
    pub fn invoke(&self, task: &Task) -> Result<Invocation, FaasError> {
        let adm = self.admit()?;
        let mut delay = self.config.overhead();
        if adm.cold_start {
            delay = delay + self.config.cold_start();
        }
        if delay > Micros::ZERO {
            std::thread::sleep(delay.to_duration());
        }
        let start = self.clock.now();
        let result = catch_unwind(AssertUnwindSafe(|| workload::run_task(task)))
            .unwrap_or_else(|_| Err(ExecError::TaskFailed("task panicked".into())));
        let end = self.clock.now().max(start);
        let billing = self.finish(adm, start, end);
        Ok(Invocation { result, billing })
    }

    /// Billing ledger ordered by invocation id.
    pub fn billing(&self) -> Vec<BillingRecord> {
        let mut v = self.state.lock().billing.clone();
        v.sort_by_key(|r| r.invocation_id);
        v
    }

    pub fn active(&self) -> usize {
        self.state.lock().pool.active()
    }

    pub fn peak_active(&self) -> usize {
        self.state.lock().pool.peak_active()
    }

    pub fn cold_starts(&self) -> u64 {
        self.state.lock().pool.created()
    }

    pub fn throttled_count(&self) -> u64 {
        self.state.lock().throttled
    }

    pub fn rate_limited_count(&self) -> u64 {
        self.state.lock().rate_limited
    }
}
