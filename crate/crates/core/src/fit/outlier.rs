use super::stats::{mad, median, MAD_NORMAL_FACTOR};
use super::{
    check_ordered, multistart_fit, residuals, FitConfig, FitError, FitResult, RemovalStage, RemovedPoint, Result,
    MIN_ACTIVE_POINTS,
};
use crate::series::RunSeries;

/// A MAD this small relative to the data is treated as zero; residuals are
/// then at round-off level and carry no scale information.
fn degenerate_mad(scale: f64, ys: &[f64]) -> bool {
    let magnitude = ys.iter().fold(1.0f64, |m, y| m.max(y.abs()));
    scale <= 1e-9 * magnitude
}

/// Stage-1: fit, score residuals by modified z-score, drop `|M| > tau`,
/// repeat.
///
/// Stops when a round removes nothing, when the MAD is degenerate, when
/// removal would leave fewer than five active points (flagged as
/// `truncated`, removal not applied), or after `max_outlier_rounds`
/// filtering rounds. Every removal is followed by a refit, so the returned
/// parameters always describe the surviving inliers.
pub fn iterative_outlier_fit(train: &RunSeries, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let xs_all = train.xs();
    let ys_all = train.ys();
    if xs_all.len() < MIN_ACTIVE_POINTS {
        return Err(FitError::InsufficientData {
            needed: MIN_ACTIVE_POINTS,
            got: xs_all.len(),
        });
    }
    check_ordered(&xs_all)?;

    let mut active: Vec<usize> = (0..xs_all.len()).collect();
    let mut removed: Vec<RemovedPoint> = Vec::new();
    let mut truncated = false;
    let mut rounds_used = 0;

    let gather = |idx: &[usize]| -> (Vec<f64>, Vec<f64>) {
        (
            idx.iter().map(|&i| xs_all[i]).collect(),
            idx.iter().map(|&i| ys_all[i]).collect(),
        )
    };

    let (xs, ys) = gather(&active);
    let mut fit = multistart_fit(&xs, &ys, cfg)?;

    while rounds_used < cfg.max_outlier_rounds {
        rounds_used += 1;
        let (xs, ys) = gather(&active);
        let r = residuals(&fit.params, &xs, &ys);
        let center = median(&r)?;
        let scale = mad(&r)?;
        if scale == 0.0 || degenerate_mad(scale, &ys) {
            break;
        }
        let mut keep = Vec::with_capacity(active.len());
        let mut dropped = Vec::new();
        for (k, &i) in active.iter().enumerate() {
            let score = MAD_NORMAL_FACTOR * (r[k] - center) / scale;
            if score.abs() > cfg.z_threshold {
                dropped.push(RemovedPoint {
                    index: i,
                    residual: r[k],
                    stage: RemovalStage::ModifiedZ {
                        round: rounds_used,
                        score,
                    },
                });
            } else {
                keep.push(i);
            }
        }
        if dropped.is_empty() {
            break;
        }
        if keep.len() < MIN_ACTIVE_POINTS {
            truncated = true;
            break;
        }
        active = keep;
        removed.extend(dropped);
        let (xs, ys) = gather(&active);
        fit = multistart_fit(&xs, &ys, cfg)?;
    }

    let (xs, ys) = gather(&active);
    let r2_train = super::pipeline::r_squared(&fit.params, &xs, &ys);
    let mut warnings = Vec::new();
    if truncated {
        warnings.push(format!(
            "outlier removal stopped: fewer than {MIN_ACTIVE_POINTS} points would remain"
        ));
    }
    if !fit.converged {
        warnings.push("curve fit did not converge within the iteration budget".into());
    }
    Ok(FitResult {
        params: fit.params,
        inlier_indices: active,
        removed_outliers: removed,
        r2_train,
        rmse_val: None,
        converged: fit.converged,
        rounds_used,
        truncated,
        n_train: xs_all.len(),
        n_val: 0,
        lts: None,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::SigmoidParams;
    use crate::synth::{generate, SynthSpec};

    fn truth() -> SigmoidParams {
        SigmoidParams::new(70.0, 85.7, 13.0, 1.5)
    }

    #[test]
    fn noise_free_removes_nothing_in_one_round() {
        let spec = SynthSpec::log_grid(truth(), 1.3, 130.0, 17);
        let run = generate(&spec).unwrap().series;
        let res = iterative_outlier_fit(&run, &FitConfig::default()).unwrap();
        assert!(res.removed_outliers.is_empty());
        assert_eq!(res.rounds_used, 1);
        assert_eq!(res.inlier_indices.len(), 17);
    }

    #[test]
    fn injected_outliers_are_removed() {
        let mut spec = SynthSpec::log_grid(truth(), 1.3, 130.0, 17);
        spec.noise_sigma = 0.3;
        spec.seed = 7;
        let mut sample = generate(&spec).unwrap();
        // two hand-placed displacements of +/- 8 points
        sample.series.points[4].y += 8.0;
        sample.series.points[11].y -= 8.0;
        let res = iterative_outlier_fit(&sample.series, &FitConfig::default()).unwrap();
        let removed: Vec<usize> = res.stage1_removed().collect();
        assert!(removed.contains(&4) && removed.contains(&11), "{removed:?}");
        assert!((res.params.ceiling - 85.7).abs() <= 1.0, "{:?}", res.params);
        let mut all: Vec<usize> = res.inlier_indices.iter().copied().chain(removed).collect();
        all.sort_unstable();
        assert_eq!(all, (0..17).collect::<Vec<_>>());
    }

    #[test]
    fn infinite_threshold_is_plain_fit() {
        let mut spec = SynthSpec::log_grid(truth(), 1.3, 130.0, 15);
        spec.noise_sigma = 0.5;
        spec.outlier_fraction = 0.2;
        spec.outlier_shift = 6.0;
        spec.seed = 3;
        let run = generate(&spec).unwrap().series;
        let cfg = FitConfig {
            z_threshold: f64::MAX,
            ..FitConfig::default()
        };
        let res = iterative_outlier_fit(&run, &cfg).unwrap();
        let plain = multistart_fit(&run.xs(), &run.ys(), &cfg).unwrap();
        assert!(res.removed_outliers.is_empty());
        assert_eq!(res.params, plain.params);
    }

    #[test]
    fn rejects_short_input() {
        let run = RunSeries::from_xy("r", &[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(matches!(
            iterative_outlier_fit(&run, &FitConfig::default()),
            Err(FitError::InsufficientData { needed: 5, got: 4 })
        ));
    }
}
