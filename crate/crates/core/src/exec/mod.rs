//! Task, handle and executor contracts shared by every backend.
//!
//! A [`Task`] is a workload tag plus an opaque byte payload. Executors run
//! tasks asynchronously and hand back a [`TaskHandle`]; drivers that need
//! out-of-order completion notification pass a [`CompletionQueue`] at
//! submission time. Every finished task leaves one [`TraceEvent`] in the
//! executor's [`TraceLog`].

mod dispatch;
mod handle;
mod local;
mod overhead;
mod serverless;
mod trace;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use bytes::Bytes;
use serde::{Deserialize, Serialize};

pub use dispatch::{
    Completed, Dispatcher, DurationModel, ExecutorDispatcher, InlineDispatcher,
    LinearDurationModel, SyntheticDispatcher,
};
pub(crate) use handle::CompletionSlot;
pub use handle::{Completion, CompletionQueue, TaskHandle};
pub use local::{LocalExecutor, LocalLoad};
pub use overhead::{measure_overhead, measure_overhead_synthetic, OverheadStats};
pub use serverless::ServerlessExecutor;
pub use trace::{
    concurrency_series, peak_concurrency, write_trace_csv, TraceEvent, TraceLog, TRACE_CSV_HEADER,
};

use crate::faas::BillingRecord;

pub type TaskId = u64;

/// Workload tag carried by every task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    /// Returns its payload unchanged.
    Echo,
    /// Always fails; the payload is the UTF-8 error message.
    Fail,
    /// Sleeps for the number of microseconds in the payload (u64 LE).
    Sleep,
    UtsTraverse,
    MandelRect,
    BcRange,
}

#[derive(Debug, Clone)]
pub struct Task {
    pub kind: TaskKind,
    pub payload: Bytes,
}

impl Task {
    pub fn new(kind: TaskKind, payload: impl Into<Bytes>) -> Self {
        Self {
            kind,
            payload: payload.into(),
        }
    }

    pub fn echo(payload: impl Into<Bytes>) -> Self {
        Self::new(TaskKind::Echo, payload)
    }

    pub fn fail(message: &str) -> Self {
        Self::new(TaskKind::Fail, Bytes::copy_from_slice(message.as_bytes()))
    }

    pub fn sleep(d: std::time::Duration) -> Self {
        Self::new(
            TaskKind::Sleep,
            Bytes::copy_from_slice(&(d.as_micros() as u64).to_le_bytes()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("submit after shutdown")]
    SubmitAfterShutdown,
    #[error("undecodable payload: {0}")]
    UndecodablePayload(String),
    #[error("task failed: {0}")]
    TaskFailed(String),
    #[error("executor aborted before the task completed")]
    ExecutorAborted,
    #[error("function throttled: provider concurrency limit exceeded")]
    Throttled,
    #[error("function invocation rate limited")]
    RateLimited,
}

/// Where a task ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lane {
    Local,
    Serverless,
}

impl Lane {
    pub fn as_str(self) -> &'static str {
        match self {
            Lane::Local => "local",
            Lane::Serverless => "serverless",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneMode {
    Local,
    Serverless,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecutorConfig {
    /// Client-side gate on in-flight tasks.
    pub max_concurrency: usize,
    /// Invocations per second admitted by the client token bucket.
    pub invocation_rate_limit: f64,
    pub lane: LaneMode,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            max_concurrency: 96,
            invocation_rate_limit: 10_000.0,
            lane: LaneMode::Serverless,
        }
    }
}

impl ExecutorConfig {
    pub fn new(max_concurrency: usize, lane: LaneMode) -> Self {
        Self {
            max_concurrency,
            lane,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_concurrency < 1 {
            return Err("max_concurrency must be >= 1".into());
        }
        if !(self.invocation_rate_limit > 0.0) {
            return Err("invocation_rate_limit must be > 0".into());
        }
        Ok(())
    }
}

/// Process-unique task identifiers, shareable between executors that must
/// not collide (the hybrid executor's two lanes).
#[derive(Debug, Default)]
pub struct IdGen(AtomicU64);

impl IdGen {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn next(&self) -> TaskId {
        self.0.fetch_add(1, Ordering::Relaxed)
    }
}

pub trait Executor: Send + Sync {
    /// Submits without blocking. When `notify` is given, the result is also
    /// pushed onto that queue once the task finishes.
    fn submit_with(
        &self,
        task: Task,
        notify: Option<&CompletionQueue>,
    ) -> Result<TaskHandle, ExecError>;

    fn submit(&self, task: Task) -> Result<TaskHandle, ExecError> {
        self.submit_with(task, None)
    }

    /// Stops accepting tasks; already submitted tasks still run.
    fn shutdown(&self);

    fn trace(&self) -> Arc<TraceLog>;

    fn config(&self) -> &ExecutorConfig;

    /// Billing records of serverless invocations issued by this executor.
    fn billing(&self) -> Vec<BillingRecord> {
        Vec::new()
    }

    /// Highest number of simultaneously in-flight tasks observed at the gate.
    fn peak_in_flight(&self) -> usize;
}
