use std::io::Write;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{Lane, TaskId};
use crate::clock::Micros;

/// Lifecycle record of one completed task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub task_id: TaskId,
    pub submit: Micros,
    pub start: Micros,
    pub end: Micros,
    pub lane: Lane,
    pub cold_start: bool,
    /// Billed duration; zero for local-lane tasks.
    pub billed_ms: u64,
    pub result_bytes: u64,
}

impl TraceEvent {
    pub fn duration(&self) -> Micros {
        self.end - self.start
    }
}

pub const TRACE_CSV_HEADER: &str =
    "task_id,submit_ms,start_ms,end_ms,lane,cold_start,billed_ms,result_bytes";

/// Append-only, thread-safe collection of trace events.
#[derive(Debug, Default)]
pub struct TraceLog {
    events: Mutex<Vec<TraceEvent>>,
}

impl TraceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, event: TraceEvent) {
        debug_assert!(event.submit <= event.start && event.start <= event.end);
        self.events.lock().push(event);
    }

    pub fn len(&self) -> usize {
        self.events.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Snapshot ordered by task id.
    pub fn events(&self) -> Vec<TraceEvent> {
        let mut v = self.events.lock().clone();
        v.sort_by_key(|e| e.task_id);
        v
    }

    pub fn find(&self, task_id: TaskId) -> Option<TraceEvent> {
        self.events
            .lock()
            .iter()
            .find(|e| e.task_id == task_id)
            .cloned()
    }

    pub fn clear(&self) {
        self.events.lock().clear();
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_trace_csv(&self.events(), out)
    }
}

/// Writes events as CSV with times in whole milliseconds.
pub fn write_trace_csv<W: Write>(events: &[TraceEvent], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for e in events {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.task_id,
            e.submit.as_ms_floor(),
            e.start.as_ms_floor(),
            e.end.as_ms_floor(),
            e.lane.as_str(),
            e.cold_start,
            e.billed_ms,
            e.result_bytes
        )?;
    }
    Ok(())
}

/// Step series of in-flight tasks (start..end intervals) at every change.
pub fn concurrency_series(events: &[TraceEvent]) -> Vec<(Micros, usize)> {
    let mut edges: Vec<(Micros, i8)> = Vec::with_capacity(events.len() * 2);
    for e in events {
        edges.push((e.start, 1));
        edges.push((e.end, -1));
    }
    // Ends sort before starts at the same instant: a slot freed at t can be
    // reused at t without counting double.
    edges.sort_by_key(|&(t, d)| (t, d));
    let mut out: Vec<(Micros, usize)> = Vec::new();
    let mut cur: i64 = 0;
    for (t, d) in edges {
        cur += d as i64;
        match out.last_mut() {
            Some(last) if last.0 == t => last.1 = cur as usize,
            _ => out.push((t, cur as usize)),
        }
    }
    out
}

pub fn peak_concurrency(events: &[TraceEvent]) -> usize {
    concurrency_series(events)
        .iter()
        .map(|&(_, c)| c)
        .max()
        .unwrap_or(0)
}
