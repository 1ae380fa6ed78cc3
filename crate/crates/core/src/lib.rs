//! Elastic execution of irregular, unbalanced parallel algorithms.
//!
//! The crate is organised around a small task/executor contract ([`exec`])
//! with three backends: a local worker pool, a client for the simulated
//! Function-as-a-Service platform in [`faas`], and the [`hybrid`] executor
//! that overflows from the former to the latter. Three irregular workloads
//! run on top of it ([`uts`], [`mandel`], [`bc`]), and [`metrics`] turns the
//! resulting traces and billing ledgers into characterization and cost
//! reports.

// `!(x >= 0.0)` is the NaN-rejecting form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod bc;
pub mod clock;
pub mod codec;
pub mod exec;
pub mod faas;
pub mod hybrid;
pub mod mandel;
pub mod metrics;
pub mod ratelimit;
pub mod seed;
pub mod uts;
pub mod workload;

pub use clock::{Clock, Micros, MonotonicClock, VirtualClock};
pub use exec::{
    Completion, CompletionQueue, ExecError, Executor, ExecutorConfig, Lane, Task, TaskHandle,
    TaskId, TaskKind, TraceEvent, TraceLog,
};
