use super::{
    check_ordered, iterative_outlier_fit, lts_fit, residuals, FitConfig, FitError, FitResult, Result,
    MIN_ACTIVE_POINTS, MIN_PIPELINE_POINTS,
};
use crate::scaling::SigmoidParams;
use crate::series::RunSeries;

/// Chronological split: the first `ceil(n * train_fraction)` points train,
/// the rest validate.
pub fn split_train_val(points: &RunSeries, train_fraction: f64) -> Result<(RunSeries, RunSeries)> {
    let n = points.len();
    if n < MIN_ACTIVE_POINTS {
        return Err(FitError::InsufficientData {
            needed: MIN_ACTIVE_POINTS,
            got: n,
        });
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(FitError::InvalidConfig(format!(
            "train_fraction must be in (0, 1], got {train_fraction}"
        )));
    }
    check_ordered(&points.xs())?;
    // 0.85 * 20 is 17.000000000000004 in binary; shave round-off before ceil
    let n_train = ((n as f64 * train_fraction) * (1.0 - 1e-12)).ceil() as usize;
    let n_train = n_train.clamp(1, n);
    let train = RunSeries {
        run_id: points.run_id.clone(),
        points: points.points[..n_train].to_vec(),
    };
    let val = RunSeries {
        run_id: points.run_id.clone(),
        points: points.points[n_train..].to_vec(),
    };
    Ok((train, val))
}

pub(crate) fn r_squared(params: &SigmoidParams, xs: &[f64], ys: &[f64]) -> Option<f64> {
    if ys.is_empty() {
        return None;
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = residuals(params, xs, ys).iter().map(|r| r * r).sum();
    Some(1.0 - ss_res / ss_tot)
}

fn rmse(params: &SigmoidParams, xs: &[f64], ys: &[f64]) -> Option<f64> {
    if ys.is_empty() {
        return None;
    }
    let ss: f64 = residuals(params, xs, ys).iter().map(|r| r * r).sum();
    Some((ss / ys.len() as f64).sqrt())
}

/// `(R^2 over train, RMSE over val)`. R^2 is absent when the training
/// targets have zero variance, RMSE when the validation set is empty.
pub fn fit_metrics(params: &SigmoidParams, train: &RunSeries, val: &RunSeries) -> Result<(Option<f64>, Option<f64>)> {
    if train.is_empty() {
        return Err(FitError::InsufficientData { needed: 1, got: 0 });
    }
    Ok((
        r_squared(params, &train.xs(), &train.ys()),
        rmse(params, &val.xs(), &val.ys()),
    ))
}

/// Split, Stage-1 outlier rejection, optional LTS refinement over the
/// Stage-1 inliers, then metrics.
pub fn robust_fit_pipeline(points: &RunSeries, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    if points.len() < MIN_PIPELINE_POINTS {
        return Err(FitError::InsufficientData {
            needed: MIN_PIPELINE_POINTS,
            got: points.len(),
        });
    }
    let (train, val) = split_train_val(points, cfg.train_fraction)?;
    let mut result = iterative_outlier_fit(&train, cfg)?;

    if cfg.use_lts {
        let inliers = train.select(&result.inlier_indices);
        let refined = lts_fit(&inliers, cfg, &result.params)?;
        // map subset positions back to training-split indices
        let map = &result.inlier_indices;
        let inlier_indices: Vec<usize> = refined.inlier_indices.iter().map(|&k| map[k]).collect();
        let mut removed = result.removed_outliers.clone();
        removed.extend(refined.removed_outliers.iter().map(|r| {
            let mut r = *r;
            r.index = map[r.index];
            r
        }));
        removed.sort_by_key(|r| r.index);
        result.warnings.extend(refined.warnings);
        result = FitResult {
            params: refined.params,
            inlier_indices,
            removed_outliers: removed,
            converged: refined.converged,
            lts: refined.lts,
            ..result
        };
    }

    let final_inliers = train.select(&result.inlier_indices);
    let (r2, rmse_val) = fit_metrics(&result.params, &final_inliers, &val)?;
    result.r2_train = r2;
    result.rmse_val = rmse_val;
    result.n_train = train.len();
    result.n_val = val.len();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    fn truth() -> SigmoidParams {
        SigmoidParams::new(70.0, 85.7, 13.0, 1.5)
    }

    fn ramp(n: usize) -> RunSeries {
        let xs: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let ys: Vec<f64> = (1..=n).map(|i| 50.0 + i as f64).collect();
        RunSeries::from_xy("ramp", &xs, &ys).unwrap()
    }

    #[test]
    fn split_sizes() {
        let (t, v) = split_train_val(&ramp(20), 0.85).unwrap();
        assert_eq!((t.len(), v.len()), (17, 3));
        assert_eq!(t.points[16].x, 17.0);
        let (t, v) = split_train_val(&ramp(20), 1.0).unwrap();
        assert_eq!((t.len(), v.len()), (20, 0));
        let (t, _) = split_train_val(&ramp(6), 0.85).unwrap();
        assert_eq!(t.len(), 6);
        assert!(split_train_val(&ramp(4), 0.85).is_err());
    }

    #[test]
    fn split_rejects_unordered() {
        let mut run = ramp(8);
        run.points.swap(2, 5);
        assert!(matches!(split_train_val(&run, 0.85), Err(FitError::Unordered(_))));
    }

    #[test]
    fn metrics_definitions() {
        let p = truth();
        let xs = [1.0, 5.0, 13.0, 40.0, 100.0];
        let ys: Vec<f64> = xs.iter().map(|&x| p.value(x)).collect();
        let run = RunSeries::from_xy("r", &xs, &ys).unwrap();
        let empty = RunSeries {
            run_id: "v".into(),
            points: vec![],
        };
        let (r2, rmse) = fit_metrics(&p, &run, &run).unwrap();
        assert_eq!(r2, Some(1.0));
        assert_eq!(rmse, Some(0.0));
        assert_eq!(fit_metrics(&p, &run, &empty).unwrap().1, None);

        let flat = SigmoidParams::new(75.0, 75.0, 1.0, 1.0);
        let (r2, _) = fit_metrics(&flat, &run, &run).unwrap();
        assert!(r2.unwrap() <= 0.0);

        let constant = RunSeries::from_xy("c", &[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(fit_metrics(&p, &constant, &empty).unwrap().0, None);
    }

    #[test]
    fn clean_run_rmse_tracks_noise() {
        let mut spec = SynthSpec::log_grid(truth(), 1.3, 130.0, 24);
        spec.noise_sigma = 0.3;
        spec.seed = 21;
        let run = generate(&spec).unwrap().series;
        let res = robust_fit_pipeline(&run, &FitConfig::default()).unwrap();
        assert_eq!((res.n_train, res.n_val), (21, 3));
        let rmse = res.rmse_val.unwrap();
        assert!(rmse < 0.6 && rmse > 0.15 / 2.0, "rmse {rmse}");
    }

    #[test]
    fn lts_indices_map_back_to_training_split() {
        let mut spec = SynthSpec::log_grid(truth(), 1.3, 130.0, 24);
        spec.noise_sigma = 0.3;
        spec.outlier_fraction = 0.1;
        spec.outlier_shift = 8.0;
        spec.seed = 2;
        let run = generate(&spec).unwrap().series;
        let cfg = FitConfig {
            use_lts: true,
            ..FitConfig::default()
        };
        let res = robust_fit_pipeline(&run, &cfg).unwrap();
        let mut all: Vec<usize> = res.inlier_indices.clone();
        all.extend(res.removed_outliers.iter().map(|r| r.index));
        all.sort_unstable();
        assert_eq!(all, (0..res.n_train).collect::<Vec<_>>());
        assert!(res.lts.is_some());
    }

    #[test]
    fn without_lts_matches_stage_one() {
        let mut spec = SynthSpec::log_grid(truth(), 1.3, 130.0, 20);
        spec.noise_sigma = 0.3;
        spec.seed = 4;
        let run = generate(&spec).unwrap().series;
        let cfg = FitConfig::default();
        let res = robust_fit_pipeline(&run, &cfg).unwrap();
        let (train, _) = split_train_val(&run, cfg.train_fraction).unwrap();
        let stage1 = iterative_outlier_fit(&train, &cfg).unwrap();
        assert_eq!(res.params, stage1.params);
        assert_eq!(res.inlier_indices, stage1.inlier_indices);
        assert_eq!(res.removed_outliers, stage1.removed_outliers);
        assert_eq!(res.r2_train, stage1.r2_train);
    }
}
