//! Workload characterization and cost model over traces and billing ledgers.

mod cost;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clock::Micros;
use crate::exec::{concurrency_series, TraceEvent};

pub use cost::{
    cost_emr, cost_serverless, gb_seconds, price_performance, price_performance_of, CostBreakdown,
    CostParams, PriceDenominator, C5_2XLARGE_HOURLY, M5_XLARGE_HOURLY,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("empty sample")]
    EmptySample,
    #[error("mean duration is zero")]
    ZeroMean,
    #[error("cost is zero")]
    ZeroCost,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub mu: f64,
    /// Population standard deviation.
    pub sigma: f64,
    pub c_l: f64,
}

pub fn coefficient_of_variation(durations: &[f64]) -> Result<Variation, MetricsError> {
    if durations.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    let n = durations.len() as f64;
    let mu = durations.iter().sum::<f64>() / n;
    if mu == 0.0 {
        return Err(MetricsError::ZeroMean);
    }
    let sigma = (durations.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / n).sqrt();
    Ok(Variation {
        mu,
        sigma,
        c_l: sigma / mu,
    })
}

/// Task body durations (start to end) in milliseconds.
pub fn durations_ms(trace: &[TraceEvent]) -> Vec<f64> {
    trace.iter().map(|e| e.duration().as_ms_f64()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBin {
    pub bin_start_ms: f64,
    pub tasks: u64,
    pub tasks_per_s: f64,
}

/// Histogram of submission times in bins of `bin` starting at time zero.
pub fn task_rate(trace: &[TraceEvent], bin: Micros) -> Result<Vec<RateBin>, MetricsError> {
    if bin == Micros::ZERO {
        return Err(MetricsError::InvalidParams("bin width must be > 0".into()));
    }
    let Some(last) = trace.iter().map(|e| e.submit).max() else {
        return Ok(Vec::new());
    };
    let mut counts = vec![0u64; (last.0 / bin.0) as usize + 1];
    for e in trace {
        counts[(e.submit.0 / bin.0) as usize] += 1;
    }
    let secs = bin.as_secs_f64();
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, tasks)| RateBin {
            bin_start_ms: Micros(i as u64 * bin.0).as_ms_f64(),
            tasks,
            tasks_per_s: tasks as f64 / secs,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub duration_ms: f64,
    pub fraction: f64,
}

/// Empirical CDF of task durations, one point per distinct duration.
pub fn duration_cdf(trace: &[TraceEvent]) -> Vec<CdfPoint> {
    let mut d: Vec<u64> = trace.iter().map(|e| e.duration().0).collect();
    d.sort_unstable();
    let n = d.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, &x) in d.iter().enumerate() {
        let point = CdfPoint {
            duration_ms: Micros(x).as_ms_f64(),
            fraction: (i + 1) as f64 / n,
        };
        match out.last_mut() {
            Some(last) if last.duration_ms == point.duration_ms => *last = point,
            _ => out.push(point),
        }
    }
    out
}

/// Work units per second.
pub fn throughput(units: u64, wall: Micros) -> f64 {
    if wall == Micros::ZERO {
        return 0.0;
    }
    units as f64 / wall.as_secs_f64()
}

/// `parallel / (sequential · workers)`.
///
/// # Panics
///
/// Panics if `workers` is zero or `sequential` is not positive.
pub fn parallel_efficiency(parallel: f64, sequential: f64, workers: u32) -> f64 {
    assert!(workers >= 1, "workers must be >= 1");
    assert!(sequential > 0.0, "sequential throughput must be > 0");
    parallel / (sequential * workers as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub tasks: usize,
    pub mu_l_ms: f64,
    pub sigma_l_ms: f64,
    pub c_l: f64,
    pub throughput: f64,
    pub rate_series: Vec<RateBin>,
    pub cdf_points: Vec<CdfPoint>,
    /// `(time_ms, in_flight)` steps.
    pub concurrency_series: Vec<(f64, usize)>,
}

pub const DEFAULT_RATE_BIN: Micros = Micros(1_000_000);

pub fn characterize(
    trace: &[TraceEvent],
    work_units: u64,
    wall: Micros,
    bin: Micros,
) -> Result<CharacterizationReport, MetricsError> {
    let v = coefficient_of_variation(&durations_ms(trace))?;
    Ok(CharacterizationReport {
        tasks: trace.len(),
        mu_l_ms: v.mu,
        sigma_l_ms: v.sigma,
        c_l: v.c_l,
        throughput: throughput(work_units, wall),
        rate_series: task_rate(trace, bin)?,
        cdf_points: duration_cdf(trace),
        concurrency_series: concurrency_series(trace)
            .into_iter()
            .map(|(t, c)| (t.as_ms_f64(), c))
            .collect(),
    })
}

impl CharacterizationReport {
    pub fn write_rate_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_start_ms,tasks,tasks_per_s")?;
        for b in &self.rate_series {
            writeln!(out, "{},{},{}", b.bin_start_ms, b.tasks, b.tasks_per_s)?;
        }
        Ok(())
    }

    pub fn write_cdf_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "duration_ms,fraction")?;
        for p in &self.cdf_points {
            writeln!(out, "{},{}", p.duration_ms, p.fraction)?;
        }
        Ok(())
    }

    pub fn write_concurrency_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time_ms,in_flight")?;
        for (t, c) in &self.concurrency_series {
            writeln!(out, "{t},{c}")?;
        }
        Ok(())
    }
}
