//! Fixed-size local worker pool.

use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam_channel::Sender;
use parking_lot::{Condvar, Mutex};

use super::handle::deliver;
use super::{
    Completion, CompletionQueue, CompletionSlot, ExecError, Executor, ExecutorConfig, IdGen, Lane,
    LaneMode, Task, TaskHandle, TaskId, TraceEvent, TraceLog,
};
use crate::clock::{Clock, Micros, MonotonicClock};
use crate::workload;

struct Job {
    id: TaskId,
    task: Task,
    slot: Arc<CompletionSlot>,
    notify: Option<Sender<Completion>>,
    submitted: Micros,
}

#[derive(Default)]
struct PoolState {
    queue: VecDeque<Job>,
    running: usize,
    shutdown: bool,
}

/// Snapshot of the pool's occupancy, taken under the pool lock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalLoad {
    pub queued: usize,
    pub running: usize,
    pub pool_size: usize,
}

impl LocalLoad {
    pub fn idle_workers(&self) -> usize {
        self.pool_size - self.running
    }
}

struct Shared {
    state: Mutex<PoolState>,
    work: Condvar,
    clock: Arc<dyn Clock>,
    trace: Arc<TraceLog>,
    pool_size: usize,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

pub struct LocalExecutor {
    shared: Arc<Shared>,
    ids: Arc<IdGen>,
    config: ExecutorConfig,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl LocalExecutor {
    /// A pool with `workers` threads.
    pub fn new(workers: usize) -> Self {
        Self::with_parts(
            workers,
            Arc::new(MonotonicClock::new()),
            Arc::new(TraceLog::new()),
            IdGen::new(),
        )
    }

    pub(crate) fn with_parts(
        workers: usize,
        clock: Arc<dyn Clock>,
        trace: Arc<TraceLog>,
        ids: Arc<IdGen>,
    ) -> Self {
        let config = ExecutorConfig::new(workers.max(1), LaneMode::Local);
        let shared = Arc::new(Shared {
            state: Mutex::new(PoolState::default()),
            work: Condvar::new(),
            clock,
            trace,
            pool_size: workers,
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let handles = (0..workers)
            .map(|i| {
                let shared = shared.clone();
                std::thread::Builder::new()
                    .name(format!("local-worker-{i}"))
                    .spawn(move || worker_loop(&shared))
                    .expect("spawn local worker")
            })
            .collect();
        Self {
            shared,
            ids,
            config,
            workers: Mutex::new(handles),
        }
    }

    pub fn pool_size(&self) -> usize {
        self.shared.pool_size
    }

    pub fn load(&self) -> LocalLoad {
        let st = self.shared.state.lock();
        LocalLoad {
            queued: st.queue.len(),
            running: st.running,
            pool_size: self.shared.pool_size,
        }
    }

    /// Runs `decide` on the current load and, if it returns true, enqueues
    /// the task before releasing the pool lock. Used by the hybrid router so
    /// the routing decision and the enqueue are atomic.
    pub(crate) fn submit_if(
        &self,
        id: TaskId,
        task: &Task,
        notify: Option<&CompletionQueue>,
        decide: impl FnOnce(LocalLoad) -> bool,
    ) -> Result<Option<TaskHandle>, ExecError> {
        let mut st = self.shared.state.lock();
        if st.shutdown {
            return Err(ExecError::SubmitAfterShutdown);
        }
        let load = LocalLoad {
            queued: st.queue.len(),
            running: st.running,
            pool_size: self.shared.pool_size,
        };
        if !decide(load) {
            return Ok(None);
        }
        let slot = CompletionSlot::new();
        st.queue.push_back(Job {
            id,
            task: task.clone(),
            slot: slot.clone(),
            notify: notify.map(CompletionQueue::sender),
            submitted: self.shared.clock.now(),
        });
        drop(st);
        self.shared.work.notify_one();
        Ok(Some(TaskHandle::new(id, slot)))
    }

    /// Drops every queued task, failing it with `ExecutorAborted`, and stops
    /// accepting new ones. Running tasks finish normally.
    pub fn shutdown_now(&self) {
        let drained: Vec<Job> = {
            let mut st = self.shared.state.lock();
            st.shutdown = true;
            st.queue.drain(..).collect()
        };
        self.shared.work.notify_all();
        for job in drained {
            deliver(
                job.id,
                &job.slot,
                job.notify.as_ref(),
                Err(ExecError::ExecutorAborted),
            );
        }
    }
}

fn worker_loop(shared: &Shared) {
    loop {
        let job = {
            let mut st = shared.state.lock();
            loop {
                if let Some(job) = st.queue.pop_front() {
                    st.running += 1;
                    break Some(job);
                }
                if st.shutdown {
                    break None;
                }
                shared.work.wait(&mut st);
            }
        };
        let Some(job) = job else { return };

        let now = shared.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        shared.peak.fetch_max(now, Ordering::SeqCst);
        let start = shared.clock.now();
        let result = catch_unwind(AssertUnwindSafe(|| workload::run_task(&job.task)))
            .unwrap_or_else(|_| Err(ExecError::TaskFailed("task panicked".into())));
        let end = shared.clock.now();
        shared.in_flight.fetch_sub(1, Ordering::SeqCst);

        if result.is_ok() {
            shared.trace.record(TraceEvent {
                task_id: job.id,
                submit: job.submitted,
                start: start.max(job.submitted),
                end: end.max(start),
                lane: Lane::Local,
                cold_start: false,
                billed_ms: 0,
                result_bytes: result.as_ref().map(|b| b.len() as u64).unwrap_or(0),
            });
        }
        // Free the worker before notifying, so a driver reacting to the
        // completion sees the slot as available.
        shared.state.lock().running -= 1;
        deliver(job.id, &job.slot, job.notify.as_ref(), result);
    }
}

impl Executor for LocalExecutor {
    fn submit_with(
        &self,
        task: Task,
        notify: Option<&CompletionQueue>,
    ) -> Result<TaskHandle, ExecError> {
        workload::validate(&task)?;
        let id = self.ids.next();
        self.submit_if(id, &task, notify, |_| true)
            .map(|h| h.expect("unconditional submit always enqueues"))
    }

    fn shutdown(&self) {
        self.shared.state.lock().shutdown = true;
        self.shared.work.notify_all();
    }

    fn trace(&self) -> Arc<TraceLog> {
        self.shared.trace.clone()
    }

    fn config(&self) -> &ExecutorConfig {
        &self.config
    }

    fn peak_in_flight(&self) -> usize {
        self.shared.peak.load(Ordering::SeqCst)
    }
}

impl Drop for LocalExecutor {
    fn drop(&mut self) {
        self.shutdown();
        for h in self.workers.lock().drain(..) {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bytes::Bytes;
    use std::time::Duration;

    #[test]
    fn echo_roundtrip() {
        let ex = LocalExecutor::new(2);
        let h = ex.submit(Task::echo(Bytes::from_static(b"x"))).unwrap();
        assert_eq!(h.wait().unwrap(), Bytes::from_static(b"x"));
        assert_eq!(h.wait().unwrap(), Bytes::from_static(b"x"));
    }

    #[test]
    fn failing_task_propagates_error() {
        let ex = LocalExecutor::new(1);
        let h = ex.submit(Task::fail("original cause")).unwrap();
        assert_eq!(
            h.wait(),
            Err(ExecError::TaskFailed("original cause".into()))
        );
        // Failed tasks leave no trace event.
        assert_eq!(ex.trace().len(), 0);
    }

    #[test]
    fn submit_after_shutdown_is_rejected() {
        let ex = LocalExecutor::new(1);
        ex.shutdown();
        assert_eq!(
            ex.submit(Task::echo(Bytes::new())).unwrap_err(),
            ExecError::SubmitAfterShutdown
        );
    }

    #[test]
    fn undecodable_payload_is_rejected_at_submit() {
        let ex = LocalExecutor::new(1);
        let err = ex
            .submit(Task::new(TaskKind::Sleep, Bytes::from_static(b"abc")))
            .unwrap_err();
        assert!(matches!(err, ExecError::UndecodablePayload(_)));
    }

    #[test]
    fn shutdown_now_aborts_queued_tasks() {
        let ex = LocalExecutor::new(1);
        let busy = ex.submit(Task::sleep(Duration::from_millis(50))).unwrap();
        std::thread::sleep(Duration::from_millis(10));
        let queued = ex.submit(Task::echo(Bytes::new())).unwrap();
        ex.shutdown_now();
        assert_eq!(queued.wait(), Err(ExecError::ExecutorAborted));
        assert!(busy.wait().is_ok());
    }

    #[test]
    fn completion_queue_receives_every_result() {
        let ex = LocalExecutor::new(3);
        let q = CompletionQueue::new();
        let mut ids = Vec::new();
        for i in 0..20u8 {
            ids.push(ex.submit_with(Task::echo(vec![i]), Some(&q)).unwrap().id());
        }
        let mut got = Vec::new();
        while got.len() < ids.len() {
            if let Some(c) = q.poll(Duration::from_millis(1)) {
                got.push(c.task_id);
            }
        }
        got.sort();
        assert_eq!(got, ids);
        let trace = ex.trace().events();
        assert_eq!(trace.len(), 20);
        assert!(trace.iter().all(|e| e.lane == Lane::Local));
        assert!(ex.peak_in_flight() <= 3);
    }

    use crate::exec::TaskKind;
}
