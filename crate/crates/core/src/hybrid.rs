//! Hybrid executor: local workers first, serverless overflow.
//!
//! Each submission is routed once, at submission time, under a routing lock.
//! The local pool's occupancy is sampled and the task enqueued in the same
//! critical section, so the recorded [`RoutingSnapshot`] is exactly the
//! state the decision saw.

use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::clock::{Clock, MonotonicClock};
use crate::exec::{
    CompletionQueue, ExecError, Executor, ExecutorConfig, IdGen, Lane, LaneMode, LocalExecutor,
    LocalLoad, ServerlessExecutor, Task, TaskHandle, TaskId, TraceLog,
};
use crate::faas::{BillingRecord, FaasConfig, FaasError, FaasPlatform};
use crate::workload;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridConfig {
    /// Zero disables the local lane.
    pub local_pool_size: usize,
    pub serverless: ExecutorConfig,
    pub idle_predicate: IdlePredicate,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            local_pool_size: 4,
            serverless: ExecutorConfig::default(),
            idle_predicate: IdlePredicate::default(),
        }
    }
}

/// When the local lane counts as idle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdlePredicate {
    /// Nothing queued and at least one worker free.
    #[default]
    QueueEmptyAndIdleWorker,
    /// Nothing queued, regardless of worker occupancy.
    QueueEmpty,
}

impl IdlePredicate {
    pub fn is_idle(self, load: LocalLoad) -> bool {
        match self {
            IdlePredicate::QueueEmptyAndIdleWorker => load.queued == 0 && load.idle_workers() > 0,
            IdlePredicate::QueueEmpty => load.queued == 0,
        }
    }
}

/// Routing decision for a task submitted while the local lane had `load`.
/// `None` stands for a disabled local lane.
pub fn route(predicate: IdlePredicate, load: Option<LocalLoad>) -> Lane {
    match load {
        Some(l) if l.pool_size > 0 && predicate.is_idle(l) => Lane::Local,
        _ => Lane::Serverless,
    }
}

/// Local-lane state observed by one routing decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingSnapshot {
    pub task_id: TaskId,
    pub queued: usize,
    pub idle_workers: usize,
    pub lane: Lane,
}

pub struct HybridExecutor {
    local: Option<LocalExecutor>,
    serverless: Option<ServerlessExecutor>,
    predicate: IdlePredicate,
    routing: Mutex<Vec<RoutingSnapshot>>,
    ids: Arc<IdGen>,
    trace: Arc<TraceLog>,
    config: ExecutorConfig,
}

impl HybridExecutor {
    /// `faas = None` disables the serverless lane; every task then queues
    /// locally.
    pub fn new(config: HybridConfig, faas: Option<FaasConfig>) -> Result<Self, FaasError> {
        config
            .serverless
            .validate()
            .map_err(FaasError::InvalidConfig)?;
        if config.local_pool_size == 0 && faas.is_none() {
            return Err(FaasError::InvalidConfig(
                "hybrid executor needs at least one lane".into(),
            ));
        }
        let clock: Arc<dyn Clock> = Arc::new(MonotonicClock::new());
        let trace = Arc::new(TraceLog::new());
        let ids = IdGen::new();
        let local = (config.local_pool_size > 0).then(|| {
            LocalExecutor::with_parts(
                config.local_pool_size,
                clock.clone(),
                trace.clone(),
                ids.clone(),
            )
        });
        let serverless = match faas {
            Some(f) => {
                let platform = Arc::new(FaasPlatform::new(f, clock)?);
                Some(ServerlessExecutor::with_parts(
                    config.serverless.clone(),
                    platform,
                    trace.clone(),
                    ids.clone(),
                ))
            }
            None => None,
        };
        let exec_config = ExecutorConfig {
            max_concurrency: config.serverless.max_concurrency + config.local_pool_size,
            lane: LaneMode::Hybrid,
            ..config.serverless
        };
        Ok(Self {
            local,
            serverless,
            predicate: config.idle_predicate,
            routing: Mutex::new(Vec::new()),
            ids,
            trace,
            config: exec_config,
        })
    }

    /// Every routing decision so far, in submission order.
    pub fn routing_log(&self) -> Vec<RoutingSnapshot> {
        self.routing.lock().clone()
    }

    pub fn serverless_lane(&self) -> Option<&ServerlessExecutor> {
        self.serverless.as_ref()
    }
}

impl Executor for HybridExecutor {
    fn submit_with(
        &self,
        task: Task,
        notify: Option<&CompletionQueue>,
    ) -> Result<TaskHandle, ExecError> {
        workload::validate(&task)?;
        let mut log = self.routing.lock();
        let id = self.ids.next();
        let predicate = self.predicate;
        let overflow = self.serverless.is_some();
        let mut seen = LocalLoad {
            queued: 0,
            running: 0,
            pool_size: 0,
        };
        let local_handle = match &self.local {
            Some(local) => local.submit_if(id, &task, notify, |load| {
                seen = load;
                !overflow || route(predicate, Some(load)) == Lane::Local
            })?,
            None => None,
        };
        let (handle, lane) = match local_handle {
            Some(h) => (h, Lane::Local),
            None => {
                let sl = self
                    .serverless
                    .as_ref()
                    .expect("a task not taken locally has a serverless lane");
                (sl.submit_id(id, task, notify)?, Lane::Serverless)
            }
        };
        log.push(RoutingSnapshot {
            task_id: id,
            queued: seen.queued,
            idle_workers: seen.idle_workers(),
            lane,
        });
        Ok(handle)
    }

    fn shutdown(&self) {
        if let Some(l) = &self.local {
            l.shutdown();
        }
        if let Some(s) = &self.serverless {
            s.shutdown();
        }
    }

    fn trace(&self) -> Arc<TraceLog> {
        self.trace.clone()
    }

    fn config(&self) -> &ExecutorConfig {
        &self.config
    }

    fn billing(&self) -> Vec<BillingRecord> {
        self.serverless
            .as_ref()
            .map(|s| s.billing())
            .unwrap_or_default()
    }

    fn peak_in_flight(&self) -> usize {
        self.local.as_ref().map_or(0, |l| l.peak_in_flight())
            + self.serverless.as_ref().map_or(0, |s| s.peak_in_flight())
    }
}
