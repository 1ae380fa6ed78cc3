use std::collections::{BTreeMap, VecDeque};

use super::{bill, BillingRecord, ContainerId, ContainerPool, FaasConfig, FaasError};
use crate::clock::{Clock, Micros, VirtualClock};
use crate::exec::{ExecError, Lane, TaskId, TraceEvent};
use crate::ratelimit::TokenBucket;

/// A task finished (or was rejected) at virtual time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimCompletion<T> {
    pub task_id: TaskId,
    pub time: Micros,
    pub outcome: Result<T, ExecError>,
}

struct Job<T> {
    id: TaskId,
    submit: Micros,
    duration: Micros,
    result_bytes: u64,
    payload: T,
}

enum Event<T> {
    Arrive(Job<T>),
    Finish {
        job: Job<T>,
        start: Micros,
        container: ContainerId,
        cold_start: bool,
        invocation_id: u64,
    },
    Reject {
        job: Job<T>,
        error: ExecError,
    },
    Wake,
}

/// Events are ordered by (time, task id, sequence number). Wake-ups carry
/// `TaskId::MAX` so they run after every task event at the same instant.
type EventKey = (Micros, TaskId, u64);

/// Discrete-event simulator of the client gate plus the FaaS platform.
///
/// Single-threaded and fully deterministic: task durations come from the
/// caller, ties are broken by task id, and the virtual clock only moves
/// forward. Each dispatched invocation holds its gate slot and its
/// container from dispatch until the body ends.
pub struct SyntheticSim<T> {
    config: FaasConfig,
    gate: usize,
    clock: VirtualClock,
    events: BTreeMap<EventKey, Event<T>>,
    seq: u64,
    waiting: VecDeque<Job<T>>,
    in_flight: usize,
    peak_in_flight: usize,
    client_rate: TokenBucket,
    provider_rate: TokenBucket,
    wake_pending: bool,
    pool: ContainerPool,
    next_task: TaskId,
    next_invocation: u64,
    trace: Vec<TraceEvent>,
    billing: Vec<BillingRecord>,
}

impl<T> SyntheticSim<T> {
    /// `gate` is the client-side concurrency limit and `client_rate` the
    /// client token-bucket rate in invocations per second.
    pub fn new(config: FaasConfig, gate: usize, client_rate: f64) -> Result<Self, FaasError> {
        config.validate()?;
        if gate == 0 {
            return Err(FaasError::InvalidConfig("gate must be >= 1".into()));
        }
        if !(client_rate > 0.0) {
            return Err(FaasError::InvalidConfig("client rate must be > 0".into()));
        }
        Ok(Self {
            pool: ContainerPool::new(config.keepalive()),
            provider_rate: TokenBucket::new(config.rate_limit),
            client_rate: TokenBucket::new(client_rate),
            config,
            gate,
            clock: VirtualClock::new(),
            events: BTreeMap::new(),
            seq: 0,
            waiting: VecDeque::new(),
            in_flight: 0,
            peak_in_flight: 0,
            wake_pending: false,
            next_task: 0,
            next_invocation: 0,
            trace: Vec::new(),
            billing: Vec::new(),
        })
    }

    pub fn now(&self) -> Micros {
        self.clock.now()
    }

    pub fn config(&self) -> &FaasConfig {
        &self.config
    }

    /// Tasks submitted and not yet delivered by [`Self::next_completion`].
    pub fn outstanding(&self) -> usize {
        self.in_flight
            + self.waiting.len()
            + self
                .events
                .values()
                .filter(|e| matches!(e, Event::Arrive(_)))
                .count()
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight
    }

    pub fn cold_starts(&self) -> u64 {
        self.pool.created()
    }

    pub fn peak_containers(&self) -> usize {
        self.pool.peak_active()
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn billing(&self) -> &[BillingRecord] {
        &self.billing
    }

    fn push_event(&mut self, time: Micros, id: TaskId, ev: Event<T>) {
        self.seq += 1;
        self.events.insert((time, id, self.seq), ev);
    }

    fn new_job(
        &mut self,
        submit: Micros,
        duration: Micros,
        result_bytes: u64,
        payload: T,
    ) -> Job<T> {
        let id = self.next_task;
        self.next_task += 1;
        Job {
            id,
            submit,
            duration,
            result_bytes,
            payload,
        }
    }

    /// Submits a task at the current virtual time.
    pub fn submit(&mut self, duration: Micros, result_bytes: u64, payload: T) -> TaskId {
        let job = self.new_job(self.now(), duration, result_bytes, payload);
        let id = job.id;
        self.waiting.push_back(job);
        self.pump();
        id
    }

    /// Schedules a task to arrive at `at`, which must not lie in the past.
    pub fn submit_at(
        &mut self,
        at: Micros,
        duration: Micros,
        result_bytes: u64,
        payload: T,
    ) -> TaskId {
        assert!(at >= self.now(), "submit_at in the past");
        let job = self.new_job(at, duration, result_bytes, payload);
        let id = job.id;
        self.push_event(at, id, Event::Arrive(job));
        id
    }

    /// Dispatches waiting tasks while the gate and the client bucket allow.
    fn pump(&mut self) {
        let now = self.now();
        while self.in_flight < self.gate && !self.waiting.is_empty() {
            if !self.client_rate.try_take(now) {
                if !self.wake_pending {
                    let at = self.client_rate.next_available(now);
                    self.wake_pending = true;
                    self.push_event(at, TaskId::MAX, Event::Wake);
                }
                break;
            }
            let job = self.waiting.pop_front().expect("checked non-empty");
            self.dispatch(job, now);
        }
    }

    fn dispatch(&mut self, job: Job<T>, now: Micros) {
        self.in_flight += 1;
        self.peak_in_flight = self.peak_in_flight.max(self.in_flight);
        let id = job.id;
        if self.pool.active() >= self.config.provider_concurrency_limit {
            self.push_event(
                now,
                id,
                Event::Reject {
                    job,
                    error: ExecError::Throttled,
                },
            );
            return;
        }
        if !self.provider_rate.try_take(now) {
            self.push_event(
                now,
                id,
                Event::Reject {
                    job,
                    error: ExecError::RateLimited,
                },
            );
            return;
        }
        let (container, cold_start) = self.pool.acquire(now);
        let mut start = now + self.config.overhead();
        if cold_start {
            start = start + self.config.cold_start();
        }
        let end = start + job.duration;
        let invocation_id = self.next_invocation;
        self.next_invocation += 1;
        self.push_event(
            end,
            id,
            Event::Finish {
                job,
                start,
                container,
                cold_start,
                invocation_id,
            },
        );
    }

    /// Advances the clock to the next completion and returns it, or `None`
    /// once nothing is outstanding.
    pub fn next_completion(&mut self) -> Option<SimCompletion<T>> {
        loop {
            let ((time, _, _), ev) = self.events.pop_first()?;
            self.clock.advance_to(time);
            match ev {
                Event::Arrive(job) => {
                    self.waiting.push_back(job);
                    self.pump();
                }
                Event::Wake => {
                    self.wake_pending = false;
                    self.pump();
                }
                Event::Reject { job, error } => {
                    self.in_flight -= 1;
                    self.pump();
                    return Some(SimCompletion {
                        task_id: job.id,
                        time,
                        outcome: Err(error),
                    });
                }
                Event::Finish {
                    job,
                    start,
                    container,
                    cold_start,
                    invocation_id,
                } => {
                    self.in_flight -= 1;
                    self.pool.release(container, time);
                    let billed_ms = bill(start, time, self.config.billing_quantum_ms);
                    self.billing.push(BillingRecord {
                        invocation_id,
                        start,
                        end: time,
                        billed_ms,
                        memory_mb: self.config.memory_mb,
                        cold_start,
                    });
                    self.trace.push(TraceEvent {
                        task_id: job.id,
                        submit: job.submit,
                        start,
                        end: time,
                        lane: Lane::Serverless,
                        cold_start,
                        billed_ms,
                        result_bytes: job.result_bytes,
                    });
                    self.pump();
                    return Some(SimCompletion {
                        task_id: job.id,
                        time,
                        outcome: Ok(job.payload),
                    });
                }
            }
        }
    }
}

/// A task for [`advance_virtual_clock`], in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledTask {
    pub submit_ms: f64,
    pub duration_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub completions: Vec<SimCompletion<()>>,
    pub trace: Vec<TraceEvent>,
    pub billing: Vec<BillingRecord>,
    pub makespan: Micros,
    pub peak_in_flight: usize,
    pub cold_starts: u64,
}

/// Runs a fixed task set through a fresh simulator and returns the ordered
/// completion stream. Task ids follow the order of `tasks`.
pub fn advance_virtual_clock(
    config: &FaasConfig,
    gate: usize,
    client_rate: f64,
    tasks: &[ScheduledTask],
) -> Result<SimRun, FaasError> {
    for (i, t) in tasks.iter().enumerate() {
        if !(t.duration_ms >= 0.0) {
            return Err(FaasError::NegativeDuration(i));
        }
        if !(t.submit_ms >= 0.0) || !t.submit_ms.is_finite() {
            return Err(FaasError::InvalidSubmitTime(i));
        }
    }
    let mut sim = SyntheticSim::new(config.clone(), gate, client_rate)?;
    for t in tasks {
        sim.submit_at(
            Micros::from_ms_f64(t.submit_ms),
            Micros::from_ms_f64(t.duration_ms),
            0,
            (),
        );
    }
    let mut completions = Vec::with_capacity(tasks.len());
    while let Some(c) = sim.next_completion() {
        completions.push(c);
    }
    Ok(SimRun {
        makespan: sim.now(),
        peak_in_flight: sim.peak_in_flight(),
        cold_starts: sim.cold_starts(),
        trace: sim.trace,
        billing: sim.billing,
        completions,
    })
}
