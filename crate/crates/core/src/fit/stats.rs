use super::{FitError, Result};

/// Normal-consistency factor for the MAD (the 0.75 quantile of N(0, 1)).
pub const MAD_NORMAL_FACTOR: f64 = 0.6745;

/// Median; even lengths average the two central order statistics.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(FitError::Domain("median of empty sequence".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(FitError::Domain("NaN in median input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Median absolute deviation about the median.
pub fn mad(values: &[f64]) -> Result<f64> {
    let m = median(values)?;
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    median(&dev)
}

/// `0.6745 * (r_i - median(r)) / MAD`.
///
/// Returns [`FitError::DegenerateScale`] when the MAD is zero.
pub fn modified_z_scores(residuals: &[f64]) -> Result<Vec<f64>> {
    let m = median(residuals)?;
    let scale = mad(residuals)?;
    if scale == 0.0 {
        return Err(FitError::DegenerateScale);
    }
    Ok(residuals.iter().map(|r| MAD_NORMAL_FACTOR * (r - m) / scale).collect())
}
