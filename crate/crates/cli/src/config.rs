use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use elastic_core::adaptive::AdaptiveSchedule;
use elastic_core::bc::RmatParams;
use elastic_core::faas::FaasConfig;
use elastic_core::mandel::MandelParams;
use elastic_core::metrics::{CostParams, PriceDenominator};
use elastic_core::uts::TreeParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown key `{key}` at line {line}")]
    UnknownKey { key: String, line: usize },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadKind {
    #[default]
    Uts,
    Mariani,
    Bc,
    Overhead,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutorKind {
    #[default]
    Local,
    ServerlessSim,
    Hybrid,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// Task bodies run for real, on real time.
    #[default]
    Execute,
    /// Task bodies run for real, durations come from a model on a virtual clock.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub workload: WorkloadKind,
    pub executor: ExecutorKind,
    pub mode: SimMode,
    pub output_dir: PathBuf,
    /// Overrides the workload seeds when set.
    pub seed: Option<u64>,
    /// Local pool size for the local and hybrid executors.
    pub workers: usize,
    /// Client-side gate on in-flight serverless tasks.
    pub max_concurrency: usize,
    pub client_rate_limit: f64,
    /// Synthetic duration model: `intercept + per_unit · work_units`.
    pub synthetic_intercept_us: f64,
    pub synthetic_per_unit_us: f64,
    pub check_oracle: bool,
    pub price_denominator: PriceDenominator,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            workload: WorkloadKind::Uts,
            executor: ExecutorKind::Local,
            mode: SimMode::Execute,
            output_dir: PathBuf::from("out"),
            seed: None,
            workers: 4,
            max_concurrency: 96,
            client_rate_limit: 10_000.0,
            synthetic_intercept_us: 0.0,
            synthetic_per_unit_us: 0.07,
            check_oracle: false,
            price_denominator: PriceDenominator::Execution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverheadSection {
    pub warmup: usize,
    pub samples: usize,
}

impl Default for OverheadSection {
    fn default() -> Self {
        Self {
            warmup: 10,
            samples: 200,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveSection {
    pub enabled: bool,
    /// Defaults to the stock schedule scaled to `max_concurrency`.
    pub schedule: Option<AdaptiveSchedule>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub faas: FaasConfig,
    pub cost: CostParams,
    pub uts: TreeParams,
    pub mariani: MandelParams,
    pub bc: RmatParams,
    pub overhead: OverheadSection,
    pub adaptive: AdaptiveSection,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

pub fn parse_config(src: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(src).map_err(|e| {
        let line = e.span().map_or(1, |s| line_of(src, s.start));
        let message = e.message().to_string();
        match message.strip_prefix("unknown field `") {
            Some(rest) => ConfigError::UnknownKey {
                key: rest.split('`').next().unwrap_or_default().to_string(),
                line,
            },
            None => ConfigError::Parse { line, message },
        }
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&src)
}

/// Command-line overrides. Each flag mirrors one config key.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long, value_enum)]
    pub executor: Option<ExecutorKind>,
    #[arg(long, value_enum)]
    pub mode: Option<SimMode>,
    /// Output directory.
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub max_concurrency: Option<usize>,
    #[arg(long)]
    pub check_oracle: bool,
    #[arg(long)]
    pub adaptive: bool,

    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long)]
    pub b0: Option<f64>,
    /// Split factor of the selected workload.
    #[arg(long)]
    pub split_factor: Option<usize>,
    #[arg(long)]
    pub iters: Option<u64>,

    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long)]
    pub max_dwell: Option<u32>,
    #[arg(long)]
    pub sd: Option<u32>,
    #[arg(long)]
    pub max_depth: Option<u32>,

    #[arg(long)]
    pub scale: Option<u32>,
    #[arg(long)]
    pub edge_factor: Option<u32>,
    #[arg(long)]
    pub tasks: Option<usize>,

    #[arg(long)]
    pub overhead_ms: Option<f64>,
    #[arg(long)]
    pub cold_start_ms: Option<f64>,
    #[arg(long)]
    pub memory_mb: Option<u64>,
    #[arg(long)]
    pub concurrency_limit: Option<usize>,

    #[arg(long)]
    pub samples: Option<usize>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RunConfig {
    pub fn apply(
        &mut self,
        workload: Option<WorkloadKind>,
        o: &Overrides,
    ) -> Result<(), ConfigError> {
        set(&mut self.run.workload, workload);
        set(&mut self.run.executor, o.executor);
        set(&mut self.run.mode, o.mode);
        set(&mut self.run.output_dir, o.output_dir.clone());
        set(&mut self.run.workers, o.workers);
        set(&mut self.run.max_concurrency, o.max_concurrency);
        if o.seed.is_some() {
            self.run.seed = o.seed;
        }
        self.run.check_oracle |= o.check_oracle;
        self.adaptive.enabled |= o.adaptive;

        set(&mut self.uts.depth, o.depth);
        set(&mut self.uts.b0, o.b0);
        set(&mut self.uts.iters, o.iters);
        if let Some(s) = o.split_factor {
            match self.run.workload {
                WorkloadKind::Mariani => self.mariani.split_factor = to_u32(s, "split_factor")?,
                _ => self.uts.split_factor = s,
            }
        }

        set(&mut self.mariani.width, o.width);
        set(&mut self.mariani.height, o.height);
        set(&mut self.mariani.max_dwell, o.max_dwell);
        set(&mut self.mariani.sd, o.sd);
        set(&mut self.mariani.max_depth, o.max_depth);

        set(&mut self.bc.scale, o.scale);
        set(&mut self.bc.edge_factor, o.edge_factor);
        set(&mut self.bc.tasks, o.tasks);

        set(&mut self.faas.invocation_overhead_ms, o.overhead_ms);
        set(&mut self.faas.cold_start_ms, o.cold_start_ms);
        set(&mut self.faas.memory_mb, o.memory_mb);
        set(
            &mut self.faas.provider_concurrency_limit,
            o.concurrency_limit,
        );
        set(&mut self.overhead.samples, o.samples);

        if let Some(seed) = self.run.seed {
            self.uts.seed = u32::try_from(seed).map_err(|_| {
                ConfigError::Invalid(format!("seed {seed} exceeds the 32-bit tree seed range"))
            })?;
            self.bc.seed = seed;
        }
        if self.adaptive.enabled && self.adaptive.schedule.is_none() {
            self.adaptive.schedule = Some(AdaptiveSchedule::default_for(
                self.run.max_concurrency.max(1),
            ));
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        let r = &self.run;
        if r.max_concurrency == 0 {
            return Err(invalid("run.max_concurrency must be >= 1".into()));
        }
        if !(r.client_rate_limit > 0.0) {
            return Err(invalid("run.client_rate_limit must be > 0".into()));
        }
        if !(r.synthetic_intercept_us >= 0.0 && r.synthetic_per_unit_us >= 0.0) {
            return Err(invalid(
                "synthetic duration model terms must be >= 0".into(),
            ));
        }
        if r.workers == 0 && r.executor == ExecutorKind::Local {
            return Err(invalid(
                "run.workers must be >= 1 for the local executor".into(),
            ));
        }
        if r.mode == SimMode::Synthetic && r.executor != ExecutorKind::ServerlessSim {
            return Err(invalid(
                "synthetic mode requires the serverless-sim executor".into(),
            ));
        }
        if self.adaptive.enabled && r.workload != WorkloadKind::Uts {
            return Err(invalid("the adaptive controller only drives uts".into()));
        }
        if self.overhead.warmup == 0 || self.overhead.samples == 0 {
            return Err(invalid(
                "overhead.warmup and overhead.samples must be >= 1".into(),
            ));
        }
        self.faas.validate().map_err(|e| invalid(e.to_string()))?;
        self.cost.validate().map_err(|e| invalid(e.to_string()))?;
        match r.workload {
            WorkloadKind::Uts => self.uts.validate().map_err(|e| invalid(e.to_string()))?,
            WorkloadKind::Mariani => self
                .mariani
                .validate()
                .map_err(|e| invalid(e.to_string()))?,
            WorkloadKind::Bc => self.bc.validate().map_err(|e| invalid(e.to_string()))?,
            WorkloadKind::Overhead => {}
        }
        if let Some(s) = &self.adaptive.schedule {
            s.validate().map_err(invalid)?;
        }
        Ok(())
    }
}

fn to_u32(v: usize, name: &str) -> Result<u32, ConfigError> {
    u32::try_from(v).map_err(|_| ConfigError::Invalid(format!("{name} out of range")))
}
