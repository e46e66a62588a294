//! Summary statistics: mean, sample SD, percent change, and Hedges' g
//! with the small-sample bias correction.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("need at least two values per sample")]
    TooFewSamples,
    #[error("degenerate samples: pooled standard deviation is zero")]
    DegenerateSamples,
    #[error("zero baseline mean")]
    ZeroBaseline,
}

/// Mean and n-1 standard deviation of one sample. `sd` is absent for n = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
}

/// Welford's online algorithm; single pass, numerically stable.
pub fn summarize(values: &[f64]) -> Result<SampleSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = values.len();
    let sd = if n >= 2 {
        Some((m2 / (n - 1) as f64).sqrt())
    } else {
        None
    };
    Ok(SampleSummary { n, mean, sd })
}

/// Standardized mean difference of `condition` relative to `baseline`,
/// pooled n-1 SD, corrected by J = 1 - 3/(4(n_a + n_b) - 9).
///
/// Positive g means the condition mean exceeds the baseline mean.
pub fn hedges_g(baseline: &[f64], condition: &[f64]) -> Result<f64, StatsError> {
    let a = summarize(baseline)?;
    let b = summarize(condition)?;
    let (sa, sb) = match (a.sd, b.sd) {
        (Some(sa), Some(sb)) => (sa, sb),
        _ => return Err(StatsError::TooFewSamples),
    };
    let (na, nb) = (a.n as f64, b.n as f64);
    let pooled_var = ((na - 1.0) * sa * sa + (nb - 1.0) * sb * sb) / (na + nb - 2.0);
    let s_pooled = pooled_var.sqrt();
    if s_pooled == 0.0 {
        return Err(StatsError::DegenerateSamples);
    }
    let correction = 1.0 - 3.0 / (4.0 * (na + nb) - 9.0);
    Ok(correction * (b.mean - a.mean) / s_pooled)
}

/// Percent change of `condition_mean` relative to `baseline_mean`.
pub fn percent_delta(baseline_mean: f64, condition_mean: f64) -> Result<f64, StatsError> {
    if baseline_mean == 0.0 {
        return Err(StatsError::ZeroBaseline);
    }
    Ok(100.0 * (condition_mean - baseline_mean) / baseline_mean)
}
