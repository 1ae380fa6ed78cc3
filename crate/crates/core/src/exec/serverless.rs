//! Client for the simulated FaaS platform.
//!
//! The client gate is a pool of at most `max_concurrency` dispatcher
//! threads, each of which blocks on one invocation at a time, so the gate
//! behaves as a counting semaphore. Dispatchers are spawned on demand.

use std::collections::VecDeque;
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
use crate::clock::{Micros, MonotonicClock};
use crate::faas::{BillingRecord, FaasConfig, FaasError, FaasPlatform};
use crate::ratelimit::TokenBucket;
use crate::workload;

struct Job {
    id: TaskId,
    task: Task,
    slot: Arc<CompletionSlot>,
    notify: Option<Sender<Completion>>,
    submitted: Micros,
}

#[derive(Default)]
struct GateState {
    queue: VecDeque<Job>,
    idle: usize,
    spawned: usize,
    shutdown: bool,
}

struct Shared {
    platform: Arc<FaasPlatform>,
    state: Mutex<GateState>,
    work: Condvar,
    client_rate: Mutex<TokenBucket>,
    trace: Arc<TraceLog>,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

pub struct ServerlessExecutor {
    shared: Arc<Shared>,
    ids: Arc<IdGen>,
    config: ExecutorConfig,
    threads: Mutex<Vec<JoinHandle<()>>>,
}

impl ServerlessExecutor {
    /// A client on its own platform instance with a fresh monotonic clock.
    pub fn new(config: ExecutorConfig, faas: FaasConfig) -> Result<Self, FaasError> {
        config.validate().map_err(FaasError::InvalidConfig)?;
        let platform = Arc::new(FaasPlatform::new(faas, Arc::new(MonotonicClock::new()))?);
        Ok(Self::with_parts(
            config,
            platform,
            Arc::new(TraceLog::new()),
            IdGen::new(),
        ))
    }

    pub(crate) fn with_parts(
        config: ExecutorConfig,
        platform: Arc<FaasPlatform>,
        trace: Arc<TraceLog>,
        ids: Arc<IdGen>,
    ) -> Self {
        let config = ExecutorConfig {
            lane: LaneMode::Serverless,
            ..config
        };
        let shared = Arc::new(Shared {
            client_rate: Mutex::new(TokenBucket::new(config.invocation_rate_limit)),
            platform,
            state: Mutex::new(GateState::default()),
            work: Condvar::new(),
            trace,
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        Self {
            shared,
            ids,
            config,
            threads: Mutex::new(Vec::new()),
        }
    }

    pub fn platform(&self) -> &Arc<FaasPlatform> {
        &self.shared.platform
    }

    pub(crate) fn submit_id(
        &self,
        id: TaskId,
        task: Task,
        notify: Option<&CompletionQueue>,
    ) -> Result<TaskHandle, ExecError> {
        let slot = CompletionSlot::new();
        let mut st = self.shared.state.lock();
        if st.shutdown {
            return Err(ExecError::SubmitAfterShutdown);
        }
        st.queue.push_back(Job {
            id,
            task,
            slot: slot.clone(),
            notify: notify.map(CompletionQueue::sender),
            submitted: self.shared.platform.clock().now(),
        });
        if st.queue.len() > st.idle && st.spawned < self.config.max_concurrency {
            st.spawned += 1;
            let shared = self.shared.clone();
            let handle = std::thread::Builder::new()
                .name(format!("faas-dispatch-{}", st.spawned))
                .spawn(move || dispatcher_loop(&shared))
                .expect("spawn serverless dispatcher");
            self.threads.lock().push(handle);
        }
        drop(st);
        self.shared.work.notify_one();
        Ok(TaskHandle::new(id, slot))
    }
}

fn take_token(shared: &Shared) {
    let clock = shared.platform.clock();
    loop {
        let now = clock.now();
        let wait_until = {
            let mut bucket = shared.client_rate.lock();
            if bucket.try_take(now) {
                return;
            }
            bucket.next_available(now)
        };
        std::thread::sleep(wait_until.saturating_sub(now).to_duration());
    }
}

fn dispatcher_loop(shared: &Shared) {
    loop {
        let job = {
            let mut st = shared.state.lock();
            loop {
                if let Some(job) = st.queue.pop_front() {
                    break Some(job);
                }
                if st.shutdown {
                    break None;
                }
                st.idle += 1;
                shared.work.wait(&mut st);
                st.idle -= 1;
            }
        };
        let Some(job) = job else { return };

        take_token(shared);
        let now = shared.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        shared.peak.fetch_max(now, Ordering::SeqCst);
        let outcome = shared.platform.invoke(&job.task);
        shared.in_flight.fetch_sub(1, Ordering::SeqCst);

        let result = match outcome {
            Ok(inv) => {
                if let Ok(bytes) = &inv.result {
                    shared.trace.record(TraceEvent {
                        task_id: job.id,
                        submit: job.submitted,
                        start: inv.billing.start.max(job.submitted),
                        end: inv.billing.end,
                        lane: Lane::Serverless,
                        cold_start: inv.billing.cold_start,
                        billed_ms: inv.billing.billed_ms,
                        result_bytes: bytes.len() as u64,
                    });
                }
                inv.result
            }
            Err(FaasError::Throttled) => Err(ExecError::Throttled),
            Err(FaasError::RateLimited) => Err(ExecError::RateLimited),
            Err(e) => Err(ExecError::TaskFailed(e.to_string())),
        };
        deliver(job.id, &job.slot, job.notify.as_ref(), result);
    }
}

impl Executor for ServerlessExecutor {
    fn submit_with(
        &self,
        task: Task,
        notify: Option<&CompletionQueue>,
    ) -> Result<TaskHandle, ExecError> {
        workload::validate(&task)?;
        let id = self.ids.next();
        self.submit_id(id, task, notify)
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

    fn billing(&self) -> Vec<BillingRecord> {
        self.shared.platform.billing()
    }

    fn peak_in_flight(&self) -> usize {
        self.shared.peak.load(Ordering::SeqCst)
    }
}

impl Drop for ServerlessExecutor {
    fn drop(&mut self) {
        self.shutdown();
        for h in self.threads.lock().drain(..) {
            let _ = h.join();
        }
    }
}
