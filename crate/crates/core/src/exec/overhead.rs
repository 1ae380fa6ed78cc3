use std::time::Instant;

use bytes::Bytes;
use serde::{Deserialize, Serialize};

use super::{ExecError, Executor, Task};
use crate::clock::Micros;
use crate::faas::{FaasConfig, FaasError, SyntheticSim};

/// Round-trip minus body time of no-op tasks, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadStats {
    pub samples: usize,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl OverheadStats {
    fn from_samples(mut ms: Vec<f64>) -> Self {
        ms.sort_by(f64::total_cmp);
        let n = ms.len();
        let rank = |q: f64| -> f64 {
            if n == 0 {
                return 0.0;
            }
            let i = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
            ms[i]
        };
        Self {
            samples: n,
            mean_ms: if n == 0 {
                0.0
            } else {
                ms.iter().sum::<f64>() / n as f64
            },
            min_ms: ms.first().copied().unwrap_or(0.0),
            p50_ms: rank(0.5),
            p95_ms: rank(0.95),
            max_ms: ms.last().copied().unwrap_or(0.0),
        }
    }
}

/// Submits and awaits `warmup + samples` empty echo tasks one at a time and
/// reports the overhead of the last `samples`.
///
/// # Panics
///
/// Panics if `warmup` is zero.
pub fn measure_overhead(
    exec: &dyn Executor,
    warmup: usize,
    samples: usize,
) -> Result<OverheadStats, ExecError> {
    assert!(warmup >= 1, "warmup must be at least 1");
    let trace = exec.trace();
    let mut out = Vec::with_capacity(samples);
    for i in 0..warmup + samples {
        let t0 = Instant::now();
        let h = exec.submit(Task::echo(Bytes::new()))?;
        h.wait()?;
        let round_trip = t0.elapsed().as_secs_f64() * 1e3;
        if i >= warmup {
            let body = trace.find(h.id()).map_or(0.0, |e| e.duration().as_ms_f64());
            out.push((round_trip - body).max(0.0));
        }
    }
    Ok(OverheadStats::from_samples(out))
}

/// Same measurement in the synthetic simulator, with zero-length bodies.
pub fn measure_overhead_synthetic(
    config: &FaasConfig,
    warmup: usize,
    samples: usize,
) -> Result<OverheadStats, FaasError> {
    assert!(warmup >= 1, "warmup must be at least 1");
    let mut sim = SyntheticSim::new(config.clone(), 1, f64::MAX)?;
    let mut out = Vec::with_capacity(samples);
    for i in 0..warmup + samples {
        let submitted = sim.now();
        sim.submit(Micros::ZERO, 0, ());
        let done = sim.next_completion().expect("one task outstanding");
        if i >= warmup {
            out.push((done.time - submitted).as_ms_f64());
        }
    }
    Ok(OverheadStats::from_samples(out))
}
