use std::sync::Arc;
use std::time::Duration;

use bytes::Bytes;
use crossbeam_channel::{Receiver, RecvTimeoutError, Sender};
use parking_lot::{Condvar, Mutex};

use super::{ExecError, TaskId};

/// One-shot result cell shared by an executor and the task's handle.
#[derive(Debug, Default)]
pub(crate) struct CompletionSlot {
    result: Mutex<Option<Result<Bytes, ExecError>>>,
    ready: Condvar,
}

impl CompletionSlot {
    pub(crate) fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    /// Stores the result. Returns false (and drops `result`) if the slot was
    /// already filled, so delivery happens at most once.
    pub(crate) fn complete(&self, result: Result<Bytes, ExecError>) -> bool {
        let mut guard = self.result.lock();
        if guard.is_some() {
            return false;
        }
        *guard = Some(result);
        self.ready.notify_all();
        true
    }
}

/// Handle to a submitted task. Cloneable and awaitable from any thread.
#[derive(Debug, Clone)]
pub struct TaskHandle {
    id: TaskId,
    slot: Arc<CompletionSlot>,
}

impl TaskHandle {
    pub(crate) fn new(id: TaskId, slot: Arc<CompletionSlot>) -> Self {
        Self { id, slot }
    }

    pub fn id(&self) -> TaskId {
        self.id
    }

    /// Blocks until the task finishes. Repeated calls return the same result.
    pub fn wait(&self) -> Result<Bytes, ExecError> {
        let mut guard = self.slot.result.lock();
        while guard.is_none() {
            self.slot.ready.wait(&mut guard);
        }
        guard
            .clone()
            .expect("loop exits only once the slot is filled")
    }

    pub fn wait_timeout(&self, timeout: Duration) -> Option<Result<Bytes, ExecError>> {
        let mut guard = self.slot.result.lock();
        if guard.is_none() {
            self.slot.ready.wait_for(&mut guard, timeout);
        }
        guard.clone()
    }

    pub fn try_result(&self) -> Option<Result<Bytes, ExecError>> {
        self.slot.result.lock().clone()
    }

    pub fn is_done(&self) -> bool {
        self.slot.result.lock().is_some()
    }
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub task_id: TaskId,
    pub result: Result<Bytes, ExecError>,
}

/// Thread-safe queue of completed tasks, consumed by a single driver.
#[derive(Debug, Clone)]
pub struct CompletionQueue {
    tx: Sender<Completion>,
    rx: Receiver<Completion>,
}

impl Default for CompletionQueue {
    fn default() -> Self {
        Self::new()
    }
}

impl CompletionQueue {
    pub fn new() -> Self {
        let (tx, rx) = crossbeam_channel::unbounded();
        Self { tx, rx }
    }

    pub(crate) fn sender(&self) -> Sender<Completion> {
        self.tx.clone()
    }

    /// Waits up to `timeout` for the next completion.
    pub fn poll(&self, timeout: Duration) -> Option<Completion> {
        match self.rx.recv_timeout(timeout) {
            Ok(c) => Some(c),
            Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => None,
        }
    }

    pub fn try_poll(&self) -> Option<Completion> {
        self.rx.try_recv().ok()
    }

    pub fn len(&self) -> usize {
        self.rx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rx.is_empty()
    }
}

/// Fills the slot and, if requested, notifies the completion queue.
pub(crate) fn deliver(
    id: TaskId,
    slot: &CompletionSlot,
    notify: Option<&Sender<Completion>>,
    result: Result<Bytes, ExecError>,
) {
    if let Some(tx) = notify {
        let _ = tx.send(Completion {
            task_id: id,
            result: result.clone(),
        });
    }
    slot.complete(result);
}
