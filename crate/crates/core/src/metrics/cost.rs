use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::faas::BillingRecord;

/// Hourly price of the m5.xlarge client VM role.
pub const M5_XLARGE_HOURLY: f64 = 0.192;
/// Hourly price of the c5.2xlarge client VM role.
pub const C5_2XLARGE_HOURLY: f64 = 0.34;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostParams {
    /// Dollars per invocation.
    pub lambda_i: f64,
    /// Dollars per GB-second.
    pub lambda_e: f64,
    /// Client VM dollars per hour.
    pub client_vm_price: f64,
    pub emr_worker_price: f64,
    pub emr_master_price: f64,
    pub emr_workers: u32,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            lambda_i: 0.000_000_2,
            lambda_e: 0.000_016_666_7,
            client_vm_price: M5_XLARGE_HOURLY,
            emr_worker_price: 4.35,
            emr_master_price: 0.48,
            emr_workers: 10,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let prices = [
            self.lambda_i,
            self.lambda_e,
            self.client_vm_price,
            self.emr_worker_price,
            self.emr_master_price,
        ];
        if prices.iter().any(|&p| !(p >= 0.0)) {
            return Err(MetricsError::InvalidParams("prices must be >= 0".into()));
        }
        Ok(())
    }
}

/// Serverless run cost in dollars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub invocations: f64,
    pub execution: f64,
    pub client: f64,
    pub total: f64,
}

/// Billed GB-seconds of a ledger.
pub fn gb_seconds(billing: &[BillingRecord]) -> f64 {
    billing
        .iter()
        .map(|r| r.memory_mb as f64 / 1024.0 * r.billed_ms as f64 / 1000.0)
        .sum()
}

/// Invocation, execution and client-VM cost of a serverless run.
pub fn cost_serverless(
    billing: &[BillingRecord],
    wall_time_s: f64,
    p: &CostParams,
) -> CostBreakdown {
    assert!(wall_time_s >= 0.0, "wall time must be >= 0");
    let invocations = p.lambda_i * billing.len() as f64;
    let execution = p.lambda_e * gb_seconds(billing);
    let client = p.client_vm_price / 3600.0 * wall_time_s;
    CostBreakdown {
        invocations,
        execution,
        client,
        total: invocations + execution + client,
    }
}

/// Cost of a managed cluster run: `t/3600 · (workers · worker + master)`.
///
/// # Panics
///
/// Panics if `workers` is zero.
pub fn cost_emr(wall_time_s: f64, workers: u32, p: &CostParams) -> f64 {
    assert!(workers >= 1, "an EMR cluster needs at least one worker");
    wall_time_s / 3600.0 * (workers as f64 * p.emr_worker_price + p.emr_master_price)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceDenominator {
    /// Execution component only.
    #[default]
    Execution,
    Total,
}

/// Throughput per dollar.
pub fn price_performance(throughput: f64, cost: f64) -> Result<f64, MetricsError> {
    if cost <= 0.0 {
        return Err(MetricsError::ZeroCost);
    }
    Ok(throughput / cost)
}

pub fn price_performance_of(
    throughput: f64,
    cost: &CostBreakdown,
    denominator: PriceDenominator,
) -> Result<f64, MetricsError> {
    let c = match denominator {
        PriceDenominator::Execution => cost.execution,
        PriceDenominator::Total => cost.total,
    };
    price_performance(throughput, c)
}
