//! Typed workloads on top of the byte-level task contract.
//!
//! Every workload has a request and a response type that travel through
//! [`crate::codec`]. Executors only see [`Task`]s; [`run_task`] is the single
//! place where a task's kind selects the code that runs it.

use bytes::Bytes;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::codec;
use crate::exec::{ExecError, Task, TaskKind};

pub trait Workload {
    type Request: Serialize + DeserializeOwned + Send + 'static;
    type Response: Serialize + DeserializeOwned + Send + 'static;

    const KIND: TaskKind;

    fn execute(&self, req: &Self::Request) -> Result<Self::Response, ExecError>;

    /// Size of the work a finished task performed, used by duration models.
    fn work_units(req: &Self::Request, resp: &Self::Response) -> u64;
}

pub fn task_for<W: Workload>(req: &W::Request) -> Task {
    Task::new(W::KIND, codec::encode(req))
}

pub fn decode_request<W: Workload>(payload: &[u8]) -> Result<W::Request, ExecError> {
    codec::decode(payload).map_err(|e| ExecError::UndecodablePayload(e.to_string()))
}

pub fn decode_response<W: Workload>(payload: &[u8]) -> Result<W::Response, ExecError> {
    codec::decode(payload).map_err(|e| ExecError::UndecodablePayload(e.to_string()))
}

fn run_typed<W: Workload>(w: &W, payload: &[u8]) -> Result<Bytes, ExecError> {
    let req = decode_request::<W>(payload)?;
    let resp = w.execute(&req)?;
    Ok(codec::encode(&resp))
}

fn sleep_micros(payload: &[u8]) -> Result<u64, ExecError> {
    let raw: [u8; 8] = payload.try_into().map_err(|_| {
        ExecError::UndecodablePayload(format!(
            "sleep payload must be 8 bytes, got {}",
            payload.len()
        ))
    })?;
    Ok(u64::from_le_bytes(raw))
}

/// Runs a task body. Called by every executor on its worker threads.
pub fn run_task(task: &Task) -> Result<Bytes, ExecError> {
    match task.kind {
        TaskKind::Echo => Ok(task.payload.clone()),
        TaskKind::Fail => Err(ExecError::TaskFailed(
            String::from_utf8_lossy(&task.payload).into_owned(),
        )),
        TaskKind::Sleep => {
            let us = sleep_micros(&task.payload)?;
            std::thread::sleep(std::time::Duration::from_micros(us));
            Ok(Bytes::new())
        }
        TaskKind::UtsTraverse => run_typed(&crate::uts::UtsWorkload, &task.payload),
        TaskKind::MandelRect => run_typed(&crate::mandel::MandelWorkload, &task.payload),
        TaskKind::BcRange => run_typed(&crate::bc::BcWorkload, &task.payload),
    }
}

/// Checks at submission time that the payload decodes for its kind.
pub fn validate(task: &Task) -> Result<(), ExecError> {
    match task.kind {
        TaskKind::Echo | TaskKind::Fail => Ok(()),
        TaskKind::Sleep => sleep_micros(&task.payload).map(|_| ()),
        TaskKind::UtsTraverse => {
            decode_request::<crate::uts::UtsWorkload>(&task.payload).map(|_| ())
        }
        TaskKind::MandelRect => {
            decode_request::<crate::mandel::MandelWorkload>(&task.payload).map(|_| ())
        }
        TaskKind::BcRange => decode_request::<crate::bc::BcWorkload>(&task.payload).map(|_| ()),
    }
}
