//! Typed submission front-ends used by the workload master loops.
//!
//! A [`Dispatcher`] hides whether tasks run on a real executor, inline on the
//! calling thread, or inside the synthetic simulator, so one master loop per
//! workload serves every backend.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Duration;

use super::{CompletionQueue, ExecError, Executor, Lane, TaskId, TraceEvent, TraceLog};
use crate::clock::{Clock, Micros, MonotonicClock};
use crate::codec;
use crate::faas::{FaasConfig, FaasError, SimCompletion, SyntheticSim};
use crate::workload::{self, Workload};

#[derive(Debug)]
pub struct Completed<R> {
    pub task_id: TaskId,
    pub result: Result<R, ExecError>,
}

pub trait Dispatcher<W: Workload> {
    fn dispatch(&mut self, req: W::Request) -> Result<TaskId, ExecError>;

    /// Blocks for the next finished task, in completion order. Returns `None`
    /// once nothing is outstanding.
    fn next(&mut self) -> Option<Completed<W::Response>>;

    /// Dispatched tasks not yet returned by [`Dispatcher::next`].
    fn outstanding(&self) -> usize;
}

/// Submits encoded tasks to an [`Executor`] and drains its completion queue.
pub struct ExecutorDispatcher<'a> {
    exec: &'a dyn Executor,
    queue: CompletionQueue,
    outstanding: usize,
}

impl<'a> ExecutorDispatcher<'a> {
    pub fn new(exec: &'a dyn Executor) -> Self {
        Self {
            exec,
            queue: CompletionQueue::new(),
            outstanding: 0,
        }
    }
}

impl<W: Workload> Dispatcher<W> for ExecutorDispatcher<'_> {
    fn dispatch(&mut self, req: W::Request) -> Result<TaskId, ExecError> {
        let handle = self
            .exec
            .submit_with(workload::task_for::<W>(&req), Some(&self.queue))?;
        self.outstanding += 1;
        Ok(handle.id())
    }

    fn next(&mut self) -> Option<Completed<W::Response>> {
        if self.outstanding == 0 {
            return None;
        }
        loop {
            if let Some(c) = self.queue.poll(Duration::from_millis(1)) {
                self.outstanding -= 1;
                let result = c
                    .result
                    .and_then(|bytes| workload::decode_response::<W>(&bytes));
                return Some(Completed {
                    task_id: c.task_id,
                    result,
                });
            }
        }
    }

    fn outstanding(&self) -> usize {
        self.outstanding
    }
}

/// Runs each task on the calling thread when it is collected, in FIFO order.
/// Requests are still encoded and decoded so the wire path is exercised.
pub struct InlineDispatcher<W: Workload> {
    workload: W,
    pending: VecDeque<(TaskId, Micros, W::Request)>,
    next_id: TaskId,
    clock: MonotonicClock,
    trace: Arc<TraceLog>,
}

impl<W: Workload> InlineDispatcher<W> {
    pub fn new(workload: W) -> Self {
        Self {
            workload,
            pending: VecDeque::new(),
            next_id: 0,
            clock: MonotonicClock::new(),
            trace: Arc::new(TraceLog::new()),
        }
    }

    pub fn trace(&self) -> Arc<TraceLog> {
        self.trace.clone()
    }
}

impl<W: Workload> Dispatcher<W> for InlineDispatcher<W> {
    fn dispatch(&mut self, req: W::Request) -> Result<TaskId, ExecError> {
        let bytes = codec::encode(&req);
        let req = workload::decode_request::<W>(&bytes)?;
        let id = self.next_id;
        self.next_id += 1;
        self.pending.push_back((id, self.clock.now(), req));
        Ok(id)
    }

    fn next(&mut self) -> Option<Completed<W::Response>> {
        let (task_id, submit, req) = self.pending.pop_front()?;
        let start = self.clock.now();
        let result = self.workload.execute(&req);
        let end = self.clock.now();
        if let Ok(resp) = &result {
            self.trace.record(TraceEvent {
                task_id,
                submit,
                start,
                end,
                lane: Lane::Local,
                cold_start: false,
                billed_ms: 0,
                result_bytes: codec::encode(resp).len() as u64,
            });
        }
        Some(Completed { task_id, result })
    }

    fn outstanding(&self) -> usize {
        self.pending.len()
    }
}

/// Maps a task's work units to a simulated body duration.
pub trait DurationModel {
    fn duration(&self, units: u64) -> Micros;
}

impl<F: Fn(u64) -> Micros> DurationModel for F {
    fn duration(&self, units: u64) -> Micros {
        self(units)
    }
}

/// `duration = intercept + per_unit · units`, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearDurationModel {
    pub intercept_us: f64,
    pub per_unit_us: f64,
}

impl LinearDurationModel {
    /// Ordinary least squares over `(units, duration_us)` samples. Needs at
    /// least two distinct unit counts. A negative fitted intercept is
    /// clamped to zero.
    pub fn fit(samples: &[(u64, f64)]) -> Option<Self> {
        let n = samples.len() as f64;
        if samples.len() < 2 {
            return None;
        }
        let mx = samples.iter().map(|s| s.0 as f64).sum::<f64>() / n;
        let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for &(x, y) in samples {
            let dx = x as f64 - mx;
            sxy += dx * (y - my);
            sxx += dx * dx;
        }
        if sxx == 0.0 {
            return None;
        }
        let per_unit_us = sxy / sxx;
        Some(Self {
            intercept_us: (my - per_unit_us * mx).max(0.0),
            per_unit_us,
        })
    }
}

impl DurationModel for LinearDurationModel {
    fn duration(&self, units: u64) -> Micros {
        let us = self.intercept_us + self.per_unit_us * units as f64;
        Micros(us.max(0.0).round() as u64)
    }
}

type SimPayload<R> = Result<R, ExecError>;

/// Runs task bodies for real at dispatch time but schedules them on the
/// synthetic simulator's virtual clock, with durations from a model. The
/// completion order, timing, trace and billing are therefore deterministic.
pub struct SyntheticDispatcher<W: Workload, M: DurationModel> {
    workload: W,
    model: M,
    sim: SyntheticSim<SimPayload<W::Response>>,
}

impl<W: Workload, M: DurationModel> SyntheticDispatcher<W, M> {
    pub fn new(
        workload: W,
        model: M,
        config: FaasConfig,
        gate: usize,
        client_rate: f64,
    ) -> Result<Self, FaasError> {
        Ok(Self {
            workload,
            model,
            sim: SyntheticSim::new(config, gate, client_rate)?,
        })
    }

    pub fn sim(&self) -> &SyntheticSim<SimPayload<W::Response>> {
        &self.sim
    }
}

impl<W: Workload, M: DurationModel> Dispatcher<W> for SyntheticDispatcher<W, M> {
    fn dispatch(&mut self, req: W::Request) -> Result<TaskId, ExecError> {
        let result = self.workload.execute(&req);
        let (duration, bytes) = match &result {
            Ok(resp) => (
                self.model.duration(W::work_units(&req, resp)),
                codec::encode(resp).len() as u64,
            ),
            Err(_) => (self.model.duration(0), 0),
        };
        Ok(self.sim.submit(duration, bytes, result))
    }

    fn next(&mut self) -> Option<Completed<W::Response>> {
        let SimCompletion {
            task_id, outcome, ..
        } = self.sim.next_completion()?;
        Some(Completed {
            task_id,
            result: outcome.and_then(|r| r),
        })
    }

    fn outstanding(&self) -> usize {
        self.sim.outstanding()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_exact_line() {
        let samples: Vec<_> = (1..50u64).map(|x| (x, 20.0 + 0.5 * x as f64)).collect();
        let m = LinearDurationModel::fit(&samples).unwrap();
        assert!((m.intercept_us - 20.0).abs() < 1e-9);
        assert!((m.per_unit_us - 0.5).abs() < 1e-12);
        assert_eq!(m.duration(100), Micros(70));
    }

    #[test]
    fn degenerate_fit() {
        assert!(LinearDurationModel::fit(&[(3, 1.0)]).is_none());
        assert!(LinearDurationModel::fit(&[(3, 1.0), (3, 2.0)]).is_none());
    }
}
