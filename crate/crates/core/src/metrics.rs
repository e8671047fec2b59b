//! Fit and uncertainty scores for inversion output against a known truth:
//! Willmott's index of agreement, RMSE, and the averaged posterior standard
//! deviation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demc::PosteriorSummary;

/// Number of evenly spaced monitoring angles used for all reports.
pub const MONITORING_POINTS: usize = 100;

/// Reported IA adequacy threshold. Reported, not enforced: sub-threshold
/// shapes can still be informative.
pub const IA_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("series lengths differ: {inverted} vs {actual}")]
    LengthMismatch { inverted: usize, actual: usize },
    #[error("need at least {required} points, got {got}")]
    TooFewPoints { required: usize, got: usize },
    #[error("summary holds no per-angle standard deviations")]
    EmptySummary,
}

/// The monitoring angles: `MONITORING_POINTS` points evenly covering
/// [0°, 360°), independent of any mesh.
pub fn monitoring_angles_deg() -> Vec<f64> {
    (0..MONITORING_POINTS)
        .map(|j| j as f64 * 360.0 / MONITORING_POINTS as f64)
        .collect()
}

/// Index of agreement between inverted and actual series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexOfAgreement {
    pub value: f64,
    /// Set when both series are constant and equal to the actual mean, where
    /// the defining ratio is 0/0; the value is then fixed at 1.
    pub degenerate: bool,
}

/// `IA = 1 − Σ(q_I−q_A)² / Σ(|q_I−q̄_A|+|q_A−q̄_A|)²`, in [0, 1].
pub fn index_of_agreement(
    inverted: &[f64],
    actual: &[f64],
) -> Result<IndexOfAgreement, MetricsError> {
    if inverted.len() != actual.len() {
        return Err(MetricsError::LengthMismatch { inverted: inverted.len(), actual: actual.len() });
    }
    if inverted.len() < 2 {
        return Err(MetricsError::TooFewPoints { required: 2, got: inverted.len() });
    }
    let mean_actual = actual.iter().sum::<f64>() / actual.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, a) in inverted.iter().zip(actual) {
        num += (i - a) * (i - a);
        den += ((i - mean_actual).abs() + (a - mean_actual).abs()).powi(2);
    }
    if den == 0.0 {
        return Ok(IndexOfAgreement { value: 1.0, degenerate: true });
    }
    Ok(IndexOfAgreement { value: 1.0 - num / den, degenerate: false })
}

/// Root mean square error between the series, kPa.
pub fn rmse(inverted: &[f64], actual: &[f64]) -> Result<f64, MetricsError> {
    if inverted.len() != actual.len() {
        return Err(MetricsError::LengthMismatch { inverted: inverted.len(), actual: actual.len() });
    }
    if inverted.is_empty() {
        return Err(MetricsError::TooFewPoints { required: 1, got: 0 });
    }
    let sum: f64 = inverted.iter().zip(actual).map(|(i, a)| (i - a) * (i - a)).sum();
    Ok((sum / inverted.len() as f64).sqrt())
}

/// Posterior-uncertainty factor: the arithmetic mean of the per-angle
/// posterior standard deviations, kPa.
pub fn std_factor(summary: &PosteriorSummary) -> Result<f64, MetricsError> {
    if summary.std_kpa.is_empty() {
        return Err(MetricsError::EmptySummary);
    }
    Ok(summary.std_kpa.iter().sum::<f64>() / summary.std_kpa.len() as f64)
}

/// Scores of one inversion against the known truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub ia: f64,
    pub ia_degenerate: bool,
    pub rmse_kpa: f64,
    pub std_kpa: f64,
    pub monitoring_points: usize,
    pub ia_threshold: f64,
    pub meets_threshold: bool,
}

impl MetricReport {
    pub fn new(
        inverted: &[f64],
        actual: &[f64],
        summary: &PosteriorSummary,
    ) -> Result<Self, MetricsError> {
        let ia = index_of_agreement(inverted, actual)?;
        Ok(Self {
            ia: ia.value,
            ia_degenerate: ia.degenerate,
            rmse_kpa: rmse(inverted, actual)?,
            std_kpa: std_factor(summary)?,
            monitoring_points: inverted.len(),
            ia_threshold: IA_THRESHOLD,
            meets_threshold: ia.value >= IA_THRESHOLD,
        })
    }
}
