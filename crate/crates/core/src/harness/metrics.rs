use crate::error::{Error, Result};

/// Coefficient of determination `1 - SS_res / SS_tot`; at most 1, unbounded
/// below. Undefined when every true value is identical.
pub fn r_squared(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.is_empty() || truth.len() != predicted.len() {
        return Err(Error::UndefinedRSquared(format!(
            "need equal non-empty inputs, got {} and {}",
            truth.len(),
            predicted.len()
        )));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedRSquared("all true values are identical".into()));
    }
    let ss_res: f64 = truth.iter().zip(predicted).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}
