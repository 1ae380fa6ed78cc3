use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use elastic_core::adaptive::AdaptiveController;
use elastic_core::bc::{bc_oracle, build_graph, run_bc, BcWorkload, RmatParams};
use elastic_core::exec::{
    measure_overhead, measure_overhead_synthetic, write_trace_csv, Dispatcher, ExecutorDispatcher,
    LaneMode, LinearDurationModel, LocalExecutor, OverheadStats, ServerlessExecutor,
    SyntheticDispatcher,
};
use elastic_core::faas::{write_billing_csv, BillingRecord};
use elastic_core::hybrid::{HybridConfig, HybridExecutor};
use elastic_core::mandel::{mariani_silver, naive_escape_time, MandelWorkload};
use elastic_core::metrics::{
    characterize, cost_serverless, gb_seconds, price_performance_of, throughput,
    CharacterizationReport, CostBreakdown, DEFAULT_RATE_BIN,
};
use elastic_core::uts::{run_uts, UtsWorkload, WorkBag};
use elastic_core::workload::Workload;
use elastic_core::{Executor, ExecutorConfig, Micros, TraceEvent};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, ExecutorKind, RunConfig, SimMode, WorkloadKind};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("workload failed: {0}")]
    Workload(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 1,
            RunError::Workload(_) | RunError::Output { .. } => 2,
            RunError::Verification(_) => 3,
        }
    }
}

fn workload_err(e: impl std::fmt::Display) -> RunError {
    RunError::Workload(e.to_string())
}

enum Backend {
    Exec(Box<dyn Executor>),
    Synthetic {
        config: Box<RunConfig>,
        model: LinearDurationModel,
    },
}

fn backend(cfg: &RunConfig) -> Result<Backend, RunError> {
    let r = &cfg.run;
    let gate = |lane| ExecutorConfig {
        max_concurrency: r.max_concurrency,
        invocation_rate_limit: r.client_rate_limit,
        lane,
    };
    Ok(match (r.executor, r.mode) {
        (ExecutorKind::ServerlessSim, SimMode::Synthetic) => Backend::Synthetic {
            config: Box::new(cfg.clone()),
            model: LinearDurationModel {
                intercept_us: r.synthetic_intercept_us,
                per_unit_us: r.synthetic_per_unit_us,
            },
        },
        (_, SimMode::Synthetic) => {
            return Err(ConfigError::Invalid(
                "synthetic mode requires the serverless-sim executor".into(),
            )
            .into())
        }
        (ExecutorKind::Local, SimMode::Execute) => {
            Backend::Exec(Box::new(LocalExecutor::new(r.workers)))
        }
        (ExecutorKind::ServerlessSim, SimMode::Execute) => Backend::Exec(Box::new(
            ServerlessExecutor::new(gate(LaneMode::Serverless), cfg.faas.clone())
                .map_err(workload_err)?,
        )),
        (ExecutorKind::Hybrid, SimMode::Execute) => {
            let hybrid = HybridConfig {
                local_pool_size: r.workers,
                serverless: gate(LaneMode::Hybrid),
                ..Default::default()
            };
            Backend::Exec(Box::new(
                HybridExecutor::new(hybrid, Some(cfg.faas.clone())).map_err(workload_err)?,
            ))
        }
    })
}

/// What a run leaves behind besides its workload result.
struct Captured {
    trace: Vec<TraceEvent>,
    billing: Vec<BillingRecord>,
    wall: Micros,
    peak_in_flight: usize,
}

fn drive<W, T, E>(
    backend: &Backend,
    workload: W,
    body: impl FnOnce(&mut dyn Dispatcher<W>) -> Result<T, E>,
) -> Result<(T, Captured), RunError>
where
    W: Workload,
    E: std::fmt::Display,
{
    match backend {
        Backend::Exec(ex) => {
            let start = Instant::now();
            let out = body(&mut ExecutorDispatcher::new(ex.as_ref())).map_err(workload_err)?;
            let wall = Micros(start.elapsed().as_micros() as u64);
            Ok((
                out,
                Captured {
                    trace: ex.trace().events(),
                    billing: ex.billing(),
                    wall,
                    peak_in_flight: ex.peak_in_flight(),
                },
            ))
        }
        Backend::Synthetic { config, model } => {
            let mut d = SyntheticDispatcher::new(
                workload,
                *model,
                config.faas.clone(),
                config.run.max_concurrency,
                config.run.client_rate_limit,
            )
            .map_err(workload_err)?;
            let out = body(&mut d).map_err(workload_err)?;
            let sim = d.sim();
            Ok((
                out,
                Captured {
                    trace: sim.trace().to_vec(),
                    billing: sim.billing().to_vec(),
                    wall: sim.now(),
                    peak_in_flight: sim.peak_in_flight(),
                },
            ))
        }
    }
}

#[derive(Debug, Serialize)]
struct Verification {
    passed: bool,
    detail: String,
}

#[derive(Debug, Serialize)]
struct Totals {
    tasks: usize,
    work_units: u64,
    wall_time_s: f64,
    throughput: f64,
    invocations: usize,
    cold_starts: usize,
    billed_gb_seconds: f64,
    peak_in_flight: usize,
    /// Absent when the chosen cost denominator is zero.
    price_performance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    config: &'a RunConfig,
    result: Value,
    verification: Option<Verification>,
    characterization: Option<CharacterizationReport>,
    cost: CostBreakdown,
    totals: Totals,
}

/// A finished workload before reporting.
struct Outcome {
    result: Value,
    work_units: u64,
    verification: Option<Verification>,
    captured: Captured,
}

pub struct RunSummary {
    pub report_json: String,
    pub verified: Option<bool>,
}

pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let dir = &cfg.run.output_dir;
    std::fs::create_dir_all(dir).map_err(|source| RunError::Output {
        path: dir.display().to_string(),
        source,
    })?;
    let outcome = match cfg.run.workload {
        WorkloadKind::Uts => run_uts_workload(cfg)?,
        WorkloadKind::Mariani => run_mariani(cfg, dir)?,
        WorkloadKind::Bc => run_bc_workload(cfg, dir)?,
        WorkloadKind::Overhead => run_overhead(cfg)?,
    };
    let Outcome {
        result,
        work_units,
        verification,
        captured,
    } = outcome;

    write_file(dir, "trace.csv", |w| write_trace_csv(&captured.trace, w))?;
    if cfg.run.executor != ExecutorKind::Local {
        write_file(dir, "billing.csv", |w| {
            write_billing_csv(&captured.billing, w)
        })?;
    }
    let characterization =
        characterize(&captured.trace, work_units, captured.wall, DEFAULT_RATE_BIN).ok();
    if let Some(c) = &characterization {
        write_file(dir, "rate.csv", |w| c.write_rate_csv(w))?;
        write_file(dir, "cdf.csv", |w| c.write_cdf_csv(w))?;
        write_file(dir, "concurrency.csv", |w| c.write_concurrency_csv(w))?;
    }

    let wall_s = captured.wall.as_secs_f64();
    let cost = cost_serverless(&captured.billing, wall_s, &cfg.cost);
    let tput = throughput(work_units, captured.wall);
    let report = Report {
        config: cfg,
        result,
        characterization,
        cost,
        totals: Totals {
            tasks: captured.trace.len(),
            work_units,
            wall_time_s: wall_s,
            throughput: tput,
            invocations: captured.billing.len(),
            cold_starts: captured.billing.iter().filter(|b| b.cold_start).count(),
            billed_gb_seconds: gb_seconds(&captured.billing),
            peak_in_flight: captured.peak_in_flight,
            price_performance: price_performance_of(tput, &cost, cfg.run.price_denominator).ok(),
        },
        verification,
    };
    let report_json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(dir, "report.json", |w| writeln!(w, "{report_json}"))?;

    let verified = report.verification.as_ref().map(|v| v.passed);
    if let Some(v) = report.verification.filter(|v| !v.passed) {
        return Err(RunError::Verification(v.detail));
    }
    Ok(RunSummary {
        report_json,
        verified,
    })
}

fn write_file(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), RunError> {
    let path = dir.join(name);
    let err = |source| RunError::Output {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(&path).map_err(err)?);
    f(&mut w).and_then(|_| w.flush()).map_err(err)
}

fn run_uts_workload(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let p = &cfg.uts;
    let mut controller = cfg
        .adaptive
        .schedule
        .clone()
        .filter(|_| cfg.adaptive.enabled)
        .map(AdaptiveController::new);
    let b = backend(cfg)?;
    let (out, captured) = drive(&b, UtsWorkload, |d| {
        run_uts::<UtsWorkload, _>(p, d, controller.as_mut())
    })?;
    let verification = cfg.run.check_oracle.then(|| {
        let expect = WorkBag::root(p.seed).traverse(u64::MAX, &p.tree());
        Verification {
            passed: expect == out.nodes,
            detail: format!("parallel count {} vs sequential count {expect}", out.nodes),
        }
    });
    Ok(Outcome {
        result: json!({
            "node_count": out.nodes,
            "tasks": out.tasks,
            "peak_active": out.peak_active,
            "adaptive_stages_fired": controller.as_ref().map(|c| c.step()),
        }),
        work_units: out.nodes,
        verification,
        captured,
    })
}

fn run_mariani(cfg: &RunConfig, dir: &Path) -> Result<Outcome, RunError> {
    let p = &cfg.mariani;
    let b = backend(cfg)?;
    let (out, captured) = drive(&b, MandelWorkload, |d| mariani_silver(p, d))?;
    write_file(dir, "image.pgm", |w| out.image.write_pgm(w))?;
    let verification = cfg.run.check_oracle.then(|| {
        let expect = naive_escape_time(p);
        let wrong = expect
            .data
            .iter()
            .zip(&out.image.data)
            .filter(|(a, b)| a != b)
            .count();
        Verification {
            passed: wrong == 0,
            detail: format!("{wrong} pixels differ from the escape-time oracle"),
        }
    });
    let pixels = p.width as u64 * p.height as u64;
    Ok(Outcome {
        result: json!({
            "pixels": pixels,
            "tasks": out.tasks,
            "evaluations": out.evaluations,
        }),
        work_units: pixels,
        verification,
        captured,
    })
}

fn run_bc_workload(cfg: &RunConfig, dir: &Path) -> Result<Outcome, RunError> {
    let p = &cfg.bc;
    let b = backend(cfg)?;
    let (out, captured) = drive(&b, BcWorkload, |d| run_bc(p, d))?;
    write_file(dir, "scores.csv", |w| {
        writeln!(w, "vertex,score")?;
        for (v, s) in out.scores.iter().enumerate() {
            writeln!(w, "{v},{s}")?;
        }
        Ok(())
    })?;
    let verification = if cfg.run.check_oracle {
        Some(check_bc(p, &out.scores)?)
    } else {
        None
    };
    let n = out.scores.len() as u64;
    Ok(Outcome {
        result: json!({
            "vertices": n,
            "tasks": out.sources_per_task.len(),
            "sources_per_task": out.sources_per_task,
            "max_score": out.scores.iter().copied().fold(0.0, f64::max),
        }),
        work_units: n,
        verification,
        captured,
    })
}

fn check_bc(p: &RmatParams, scores: &[f64]) -> Result<Verification, RunError> {
    let plain = RmatParams {
        permute: false,
        ..p.clone()
    };
    let expect = bc_oracle(&build_graph(&plain).map_err(workload_err)?).map_err(workload_err)?;
    let dev = expect
        .iter()
        .zip(scores)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(Verification {
        passed: dev <= 1e-9,
        detail: format!("max per-vertex deviation {dev:e} from the enumeration oracle"),
    })
}

fn run_overhead(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let o = &cfg.overhead;
    let (stats, captured): (OverheadStats, Captured) = match backend(cfg)? {
        Backend::Exec(ex) => {
            let start = Instant::now();
            let stats = measure_overhead(ex.as_ref(), o.warmup, o.samples).map_err(workload_err)?;
            let captured = Captured {
                trace: ex.trace().events(),
                billing: ex.billing(),
                wall: Micros(start.elapsed().as_micros() as u64),
                peak_in_flight: ex.peak_in_flight(),
            };
            (stats, captured)
        }
        Backend::Synthetic { config, .. } => {
            let stats = measure_overhead_synthetic(&config.faas, o.warmup, o.samples)
                .map_err(workload_err)?;
            let captured = Captured {
                trace: Vec::new(),
                billing: Vec::new(),
                wall: Micros::ZERO,
                peak_in_flight: 1,
            };
            (stats, captured)
        }
    };
    let tasks = captured.trace.len() as u64;
    Ok(Outcome {
        result: serde_json::to_value(&stats).expect("stats serialize"),
        work_units: tasks,
        verification: None,
        captured,
    })
}
