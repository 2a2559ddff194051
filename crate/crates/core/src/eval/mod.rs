//! Regression metrics and residual analysis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GroupMeans;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    /// `None` when the targets are constant.
    pub r2: Option<f64>,
    pub relmse: Option<f64>,
    pub mae: f64,
    pub mse: f64,
}

pub fn compute_metrics(y: &[f64], y_hat: &[f64]) -> Result<MetricsReport> {
    if y.len() != y_hat.len() {
        return Err(Error::dim("metric inputs", y.len(), y_hat.len()));
    }
    if y.len() < 2 {
        return Err(Error::InvalidInput(format!("metrics need at least 2 rows, got {}", y.len())));
    }
    if y.iter().chain(y_hat).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric inputs".into()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    let mae = y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let relmse = (sst > 0.0).then(|| sse / sst);
    Ok(MetricsReport {
        n: y.len(),
        r2: relmse.map(|r| 1.0 - r),
        relmse,
        mae,
        mse: sse / n,
    })
}

/// Metrics on the model's [0,1] scale and on the 0–100 popularity scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledMetrics {
    pub unit: MetricsReport,
    pub popularity: MetricsReport,
}

pub fn compute_scaled_metrics(pop: &[f64], pop_hat: &[f64]) -> Result<ScaledMetrics> {
    let unit = |v: &[f64]| v.iter().map(|x| x / 100.0).collect::<Vec<_>>();
    Ok(ScaledMetrics {
        unit: compute_metrics(&unit(pop), &unit(pop_hat))?,
        popularity: compute_metrics(pop, pop_hat)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stdev: f64,
    /// Population skewness; 0 for a constant sample.
    pub skew: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(v: &[f64]) -> Result<Summary> {
    if v.is_empty() {
        return Err(Error::InvalidInput("cannot summarize an empty sample".into()));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    Ok(Summary {
        mean,
        stdev: m2.sqrt(),
        skew: if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 },
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorAnalysis {
    pub n: usize,
    /// Summary of `predicted − actual` on the 0–100 scale.
    pub residual: Summary,
    pub actual: Summary,
    pub predicted: Summary,
    pub gate_by_decade: BTreeMap<String, GroupMeans>,
}

/// Decade label such as `"1990s"`.
pub fn decade_key(year: i32) -> String {
    format!("{}s", year.div_euclid(10) * 10)
}

/// Residual and distribution summaries of popularity predictions, with
/// an optional per-decade breakdown of fusion weights carried along.
pub fn error_analysis(pop: &[f64], pop_hat: &[f64], gate_by_decade: Option<&BTreeMap<String, GroupMeans>>) -> Result<ErrorAnalysis> {
    if pop.len() != pop_hat.len() {
        return Err(Error::dim("error analysis inputs", pop.len(), pop_hat.len()));
    }
    let residuals: Vec<f64> = pop_hat.iter().zip(pop).map(|(p, a)| p - a).collect();
    Ok(ErrorAnalysis {
        n: pop.len(),
        residual: summarize(&residuals)?,
        actual: summarize(pop)?,
        predicted: summarize(pop_hat)?,
        gate_by_decade: gate_by_decade.cloned().unwrap_or_default(),
    })
}
