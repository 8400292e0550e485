use super::{
    check_ordered, fit_sigmoid_nls, residuals, FitConfig, FitError, FitResult, LtsTrace, RemovalStage, RemovedPoint,
    Result, MIN_ACTIVE_POINTS, MIN_FIT_POINTS,
};
use crate::scaling::SigmoidParams;
use crate::series::RunSeries;

/// Upper bound on concentration steps; the subset sequence is finite and
/// in practice stabilizes within a handful.
const MAX_C_STEPS: usize = 100;

/// Relative slack for round-off when checking that a C-step did not
/// increase the trimmed objective.
const MONOTONE_SLACK: f64 = 1e-12;

/// Indices of the `h` smallest squared residuals, ties to the lower index,
/// returned ascending.
fn select_subset(sq: &[f64], h: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sq.len()).collect();
    order.sort_by(|&a, &b| sq[a].total_cmp(&sq[b]).then(a.cmp(&b)));
    let mut subset = order[..h].to_vec();
    subset.sort_unstable();
    subset
}

/// Sum of the `h` smallest squared residuals.
pub fn trimmed_objective(params: &SigmoidParams, xs: &[f64], ys: &[f64], h: usize) -> f64 {
    let mut sq: Vec<f64> = residuals(params, xs, ys).iter().map(|r| r * r).collect();
    sq.sort_by(f64::total_cmp);
    sq[..h.min(sq.len())].iter().sum()
}

/// Least trimmed squares by concentration steps from `init`.
///
/// Each step scores every point under the current parameters, keeps the
/// `h = floor(n * alpha)` best, and refits on them starting from the current
/// parameters. Iteration stops once the subset repeats or the parameters
/// move less than `nls_tolerance`. Returns
/// [`FitError::LtsNotMonotone`] if the trimmed objective ever increases.
pub fn lts_fit(train: &RunSeries, cfg: &FitConfig, init: &SigmoidParams) -> Result<FitResult> {
    cfg.validate()?;
    let xs = train.xs();
    let ys = train.ys();
    let n = xs.len();
    if n < MIN_ACTIVE_POINTS {
        return Err(FitError::InsufficientData {
            needed: MIN_ACTIVE_POINTS,
            got: n,
        });
    }
    check_ordered(&xs)?;
    let h = (n as f64 * cfg.lts_alpha).floor() as usize;
    if h < MIN_FIT_POINTS {
        return Err(FitError::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: h,
        });
    }
    let bounds = cfg.bounds();

    let mut params = *init;
    if let Some(p) = cfg.pin_p_start {
        params.p_start = p;
    }
    if !(params.c_mid > 0.0 && params.steepness > 0.0) {
        return Err(FitError::Domain(format!(
            "initial guess {params:?} has nonpositive c_mid or steepness"
        )));
    }
    params = bounds.clamp_params(&params);
    let mut objective = vec![trimmed_objective(&params, &xs, &ys, h)];
    let mut subset: Vec<usize> = Vec::new();
    let mut fit_converged = true;
    let mut converged = false;
    let mut c_steps = 0;

    while c_steps < MAX_C_STEPS {
        let sq: Vec<f64> = residuals(&params, &xs, &ys).iter().map(|r| r * r).collect();
        let next = select_subset(&sq, h);
        if next == subset {
            converged = true;
            break;
        }
        c_steps += 1;
        let sx: Vec<f64> = next.iter().map(|&i| xs[i]).collect();
        let sy: Vec<f64> = next.iter().map(|&i| ys[i]).collect();
        let out = fit_sigmoid_nls(
            &sx,
            &sy,
            &params,
            &bounds,
            cfg.pin_p_start,
            cfg.nls_max_iters,
            cfg.nls_tolerance,
        )?;
        fit_converged = out.converged;
        let before = *objective.last().unwrap();
        let after = trimmed_objective(&out.params, &xs, &ys, h);
        if after > before * (1.0 + MONOTONE_SLACK) + f64::MIN_POSITIVE {
            return Err(FitError::LtsNotMonotone {
                step: c_steps,
                before,
                after,
            });
        }
        objective.push(after);
        let moved = param_change(&params, &out.params);
        params = out.params;
        subset = next;
        if moved < cfg.nls_tolerance {
            converged = true;
            break;
        }
    }

    let r = residuals(&params, &xs, &ys);
    let removed: Vec<RemovedPoint> = (0..n)
        .filter(|i| subset.binary_search(i).is_err())
        .map(|i| RemovedPoint {
            index: i,
            residual: r[i],
            stage: RemovalStage::Trimmed { c_steps },
        })
        .collect();
    let sx: Vec<f64> = subset.iter().map(|&i| xs[i]).collect();
    let sy: Vec<f64> = subset.iter().map(|&i| ys[i]).collect();
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!(
            "LTS stopped after {MAX_C_STEPS} concentration steps without settling"
        ));
    }
    Ok(FitResult {
        params,
        inlier_indices: subset,
        removed_outliers: removed,
        r2_train: super::pipeline::r_squared(&params, &sx, &sy),
        rmse_val: None,
        converged: fit_converged,
        rounds_used: 0,
        truncated: false,
        n_train: n,
        n_val: 0,
        lts: Some(LtsTrace {
            h,
            alpha: cfg.lts_alpha,
            c_steps,
            objective,
            converged,
        }),
        warnings,
    })
}

fn param_change(a: &SigmoidParams, b: &SigmoidParams) -> f64 {
    let pa = [a.p_start, a.ceiling, a.c_mid.ln(), a.steepness.ln()];
    let pb = [b.p_start, b.ceiling, b.c_mid.ln(), b.steepness.ln()];
    pa.iter()
        .zip(&pb)
        .map(|(x, y)| (x - y).abs() / (1.0 + x.abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::multistart_fit;
    use crate::synth::{generate, SynthSpec};

    fn truth() -> SigmoidParams {
        SigmoidParams::new(70.0, 85.7, 13.0, 1.5)
    }

    #[test]
    fn subset_ties_prefer_lower_index() {
        assert_eq!(select_subset(&[1.0, 0.5, 0.5, 0.5, 2.0], 3), vec![1, 2, 3]);
        assert_eq!(select_subset(&[1.0, 0.5, 0.5, 0.5, 2.0], 2), vec![1, 2]);
    }

    #[test]
    fn alpha_one_is_plain_fit() {
        let mut spec = SynthSpec::log_grid(truth(), 1.3, 130.0, 16);
        spec.noise_sigma = 0.3;
        spec.seed = 11;
        let run = generate(&spec).unwrap().series;
        let cfg = FitConfig {
            lts_alpha: 1.0,
            ..FitConfig::default()
        };
        let plain = multistart_fit(&run.xs(), &run.ys(), &cfg).unwrap();
        let res = lts_fit(&run, &cfg, &plain.params).unwrap();
        assert!(res.removed_outliers.is_empty());
        assert!((res.params.ceiling - plain.params.ceiling).abs() < 1e-6);
        assert!((res.params.c_mid - plain.params.c_mid).abs() / plain.params.c_mid < 1e-6);
    }

    #[test]
    fn resists_displaced_cluster() {
        // 20 points, the last 3 (15%) pushed down by 6 points: plain
        // least squares drags the ceiling, LTS with alpha 0.85 ignores them.
        let mut spec = SynthSpec::log_grid(truth(), 1.3, 130.0, 20);
        spec.noise_sigma = 0.2;
        spec.seed = 5;
        let mut run = generate(&spec).unwrap().series;
        for p in run.points.iter_mut().skip(17) {
            p.y -= 6.0;
        }
        let cfg = FitConfig {
            lts_alpha: 0.85,
            ..FitConfig::default()
        };
        let plain = multistart_fit(&run.xs(), &run.ys(), &cfg).unwrap();
        let res = lts_fit(&run, &cfg, &plain.params).unwrap();
        assert!((plain.params.ceiling - 85.7).abs() > 2.0, "plain {:?}", plain.params);
        assert!((res.params.ceiling - 85.7).abs() <= 1.0, "lts {:?}", res.params);
        let trace = res.lts.unwrap();
        assert_eq!(trace.h, 17);
        assert!(trace.objective.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn h_below_four_rejected() {
        let run = RunSeries::from_xy("r", &[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let cfg = FitConfig {
            lts_alpha: 0.6,
            ..FitConfig::default()
        };
        assert!(matches!(
            lts_fit(&run, &cfg, &truth()),
            Err(FitError::InsufficientData { needed: 4, got: 3 })
        ));
    }
}
