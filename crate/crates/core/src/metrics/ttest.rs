use serde::Serialize;

use super::MetricsError;

/// One-tailed critical value used for the discrimination test (df = 60, α = 0.05).
pub const DEFAULT_THRESHOLD: f64 = 1.67;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestResult {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub sd: f64,
    pub null_mean: f64,
    pub t_value: f64,
    pub df: usize,
    pub threshold: f64,
    pub rejected: bool,
}

/// One-sample, upper-tailed t-test: `t = (mean − null_mean) / (sd / √n)`,
/// rejected when `t > threshold`.
pub fn one_sample_ttest(samples: &[f64], null_mean: f64, threshold: f64) -> Result<TTestResult, MetricsError> {
    let n = samples.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples(n));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if variance <= 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let sd = variance.sqrt();
    let t_value = (mean - null_mean) / (sd / (n as f64).sqrt());
    Ok(TTestResult {
        n,
        mean,
        sd,
        null_mean,
        t_value,
        df: n - 1,
        threshold,
        rejected: t_value > threshold,
    })
}

/// One numeric response per non-blank line.
pub fn parse_responses(text: &str) -> Result<Vec<f64>, MetricsError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let value: f64 = l.trim().parse().map_err(|e| MetricsError::Parse {
                line: i + 1,
                message: format!("{e}"),
            })?;
            if value.is_finite() {
                Ok(value)
            } else {
                Err(MetricsError::Parse {
                    line: i + 1,
                    message: "non-finite response".into(),
                })
            }
        })
        .collect()
}
