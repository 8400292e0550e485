//! Bounded Levenberg-Marquardt on the sigmoid curve.
//!
//! Internal coordinates are `[p_start, A - p_start, ln c_mid, ln B]`, so
//! `c_mid` and `B` stay positive and the headroom constraint is a plain box.
//! Constraints the iterate sits on, with the descent direction pointing
//! outward, are projected out of each step (a simple active-set method).

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_ordered, FitConfig, FitError, Result, MIN_FIT_POINTS};
use crate::scaling::{ConstraintMode, SigmoidParams, PERFORMANCE_MAX};

/// Box constraints in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub p_start: (f64, f64),
    pub ceiling_max: f64,
    pub c_mid: (f64, f64),
    pub steepness: (f64, f64),
    pub mode: ConstraintMode,
}

impl Bounds {
    pub fn for_mode(mode: ConstraintMode) -> Self {
        Bounds {
            p_start: (0.0, PERFORMANCE_MAX),
            ceiling_max: PERFORMANCE_MAX,
            c_mid: (1e-3, 1e6),
            steepness: (1e-2, 1e2),
            mode,
        }
    }

    fn lower(&self, theta: &Vector4<f64>) -> Vector4<f64> {
        let headroom_lo = match self.mode {
            ConstraintMode::Headroom => 0.0,
            ConstraintMode::Unconstrained => -theta[0],
        };
        Vector4::new(self.p_start.0, headroom_lo, self.c_mid.0.ln(), self.steepness.0.ln())
    }

    fn upper(&self, theta: &Vector4<f64>) -> Vector4<f64> {
        Vector4::new(
            self.p_start.1,
            self.ceiling_max - theta[0],
            self.c_mid.1.ln(),
            self.steepness.1.ln(),
        )
    }

    /// Nearest parameters inside the box.
    pub fn clamp_params(&self, p: &SigmoidParams) -> SigmoidParams {
        to_params(&self.project(to_internal(p)))
    }

    /// Clamp `p_start` first; the headroom box depends on it.
    fn project(&self, mut theta: Vector4<f64>) -> Vector4<f64> {
        theta[0] = theta[0].clamp(self.p_start.0, self.p_start.1);
        let lo = self.lower(&theta);
        let hi = self.upper(&theta);
        for k in 1..4 {
            theta[k] = theta[k].clamp(lo[k], hi[k]);
        }
        theta
    }
}

fn to_internal(p: &SigmoidParams) -> Vector4<f64> {
    Vector4::new(p.p_start, p.ceiling - p.p_start, p.c_mid.ln(), p.steepness.ln())
}

fn to_params(t: &Vector4<f64>) -> SigmoidParams {
    SigmoidParams::new(t[0], t[0] + t[1], t[2].exp(), t[3].exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlsOutcome {
    pub params: SigmoidParams,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn cost(params: &SigmoidParams, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - params.value(x);
            r * r
        })
        .sum()
}

/// Normal equations `(J^T J, J^T r)` in internal coordinates.
fn normal_equations(theta: &Vector4<f64>, xs: &[f64], ys: &[f64]) -> (Matrix4<f64>, Vector4<f64>) {
    let p = to_params(theta);
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for (&x, &y) in xs.iter().zip(ys) {
        let (v, g) = p.value_and_gradient(x);
        // chain rule: A = p_start + headroom, c = exp(theta2), B = exp(theta3)
        let row = Vector4::new(g[0] + g[1], g[1], g[2] * p.c_mid, g[3] * p.steepness);
        let r = y - v;
        jtj += row * row.transpose();
        jtr += row * r;
    }
    (jtj, jtr)
}

/// Projector onto directions that keep every active constraint satisfied.
///
/// A constraint is active when the iterate sits on it and the descent
/// direction `jtr` points outward. The ceiling bound `p_start + headroom <=
/// ceiling_max` couples two coordinates, so it is handled through its normal
/// rather than by freezing a single coordinate.
fn free_projector(bounds: &Bounds, theta: &Vector4<f64>, jtr: &Vector4<f64>, pinned: bool) -> Matrix4<f64> {
    let near = |v: f64, b: f64| (v - b).abs() <= 1e-10 * (1.0 + b.abs());
    let lo = bounds.lower(theta);
    let hi = bounds.upper(theta);
    let mut normals: Vec<Vector4<f64>> = Vec::new();
    let e = |k: usize| {
        let mut v = Vector4::zeros();
        v[k] = 1.0;
        v
    };
    if pinned {
        normals.push(e(0));
    }
    // Outward normal n is blocking when n . jtr > 0.
    let mut push = |n: Vector4<f64>, at_bound: bool| {
        if at_bound && n.dot(jtr) > 0.0 {
            normals.push(n);
        }
    };
    push(-e(0), near(theta[0], bounds.p_start.0));
    push(e(0), near(theta[0], bounds.p_start.1));
    match bounds.mode {
        ConstraintMode::Headroom => push(-e(1), near(theta[1], lo[1])),
        ConstraintMode::Unconstrained => push(-(e(0) + e(1)), near(theta[0] + theta[1], 0.0)),
    }
    push(e(0) + e(1), near(theta[0] + theta[1], bounds.ceiling_max));
    for k in 2..4 {
        push(-e(k), near(theta[k], lo[k]));
        push(e(k), near(theta[k], hi[k]));
    }

    // Gram-Schmidt; dependent normals drop out.
    let mut basis: Vec<Vector4<f64>> = Vec::new();
    for n in normals {
        let mut v = n;
        for b in &basis {
            v -= b * b.dot(&v);
        }
        let norm = v.norm();
        if norm > 1e-12 {
            basis.push(v / norm);
        }
    }
    let mut p = Matrix4::identity();
    for b in &basis {
        p -= b * b.transpose();
    }
    p
}

fn solve(m: Matrix4<f64>, rhs: &Vector4<f64>) -> Option<Vector4<f64>> {
    match m.cholesky() {
        Some(ch) => Some(ch.solve(rhs)),
        None => m.lu().solve(rhs),
    }
}

/// Local least-squares fit of the curve from `init`.
///
/// `pin_p_start` holds the starting performance fixed. Never returns a
/// point worse than the projected `init`; when the iteration budget runs out
/// the best iterate is returned with `converged = false`.
pub fn fit_sigmoid_nls(
    xs: &[f64],
    ys: &[f64],
    init: &SigmoidParams,
    bounds: &Bounds,
    pin_p_start: Option<f64>,
    max_iters: usize,
    tolerance: f64,
) -> Result<NlsOutcome> {
    if xs.len() != ys.len() {
        return Err(FitError::Domain(format!(
            "{} x values but {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(FitError::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: xs.len(),
        });
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(FitError::Domain("non-finite performance value".into()));
    }
    check_ordered(xs)?;

    let mut start = *init;
    if let Some(p) = pin_p_start {
        start.p_start = p;
    }
    if !(start.c_mid > 0.0 && start.steepness > 0.0) {
        return Err(FitError::Domain(format!(
            "initial guess {start:?} has nonpositive c_mid or steepness"
        )));
    }
    let mut theta = bounds.project(to_internal(&start));
    let pinned = pin_p_start.is_some();
    let mut f = cost(&to_params(&theta), xs, ys);
    let scale = ys.iter().map(|y| y * y).sum::<f64>().max(1.0);

    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut quiet_steps = 0;

    while iterations < max_iters {
        iterations += 1;
        if f <= 1e-30 * scale {
            converged = true;
            break;
        }
        let (jtj, jtr) = normal_equations(&theta, xs, ys);
        let proj = free_projector(bounds, &theta, &jtr, pinned);
        let g = proj * jtr;

        // Largest cosine between the residual and a feasible Jacobian direction.
        let max_cos = (0..4)
            .filter(|&k| jtj[(k, k)] > 0.0)
            .map(|k| g[k].abs() / (jtj[(k, k)] * f).sqrt())
            .fold(0.0, f64::max);
        if max_cos <= 1e-12 {
            converged = true;
            break;
        }

        let complement = Matrix4::identity() - proj;
        let mut accepted = false;
        while lambda <= 1e16 {
            let mut damped = jtj;
            for k in 0..4 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let m = proj * damped * proj + complement;
            let Some(step) = solve(m, &g) else {
                lambda *= 4.0;
                continue;
            };
            let step = proj * step;
            let candidate = bounds.project(theta + step);
            let fc = cost(&to_params(&candidate), xs, ys);
            if fc.is_finite() && fc < f {
                let rel_drop = (f - fc) / f;
                let moved = (candidate - theta).norm() / (theta.norm() + tolerance);
                // Small steps under heavy damping only mean a flat valley.
                let quiet = rel_drop <= tolerance && moved <= 10.0 * tolerance && lambda <= 1e-2;
                quiet_steps = if quiet { quiet_steps + 1 } else { 0 };
                theta = candidate;
                f = fc;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if quiet_steps >= 2 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No downhill step at any damping: a stationary point.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    Ok(NlsOutcome {
        params: to_params(&theta),
        cost: f,
        converged,
        iterations,
    })
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Deterministic start grid followed by seeded jittered copies.
///
/// The grid crosses `A = max y + {0, 1, 3}`, `c_mid` at the 25/50/75th
/// percentiles of the positive compute values and `B` in `{0.5, 1, 2}`, with
/// `p_start = min y`. Unconstrained mode adds the mirrored grid for falling
/// curves. Jittered starts are appended until `multistart_count` is reached.
pub fn initial_guesses(xs: &[f64], ys: &[f64], cfg: &FitConfig) -> Vec<SigmoidParams> {
    let bounds = cfg.bounds();
    let mut positive: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0).collect();
    positive.sort_by(f64::total_cmp);
    let c_grid: Vec<f64> = if positive.is_empty() {
        vec![1.0]
    } else {
        [0.25, 0.5, 0.75].iter().map(|&q| percentile(&positive, q)).collect()
    };
    let c_grid: Vec<f64> = c_grid
        .into_iter()
        .map(|c| c.clamp(bounds.c_mid.0, bounds.c_mid.1))
        .collect();
    let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut shapes: Vec<(f64, f64)> = Vec::new();
    match cfg.pin_p_start {
        Some(p) => {
            let top = y_max.max(p);
            shapes.extend([0.0, 1.0, 3.0].map(|d| (p, (top + d).min(bounds.ceiling_max))));
            if cfg.mode == ConstraintMode::Unconstrained {
                let bottom = y_min.min(p);
                shapes.extend([0.0, 1.0, 3.0].map(|d| (p, (bottom - d).max(0.0))));
            }
        }
        None => {
            shapes.extend([0.0, 1.0, 3.0].map(|d| (y_min, (y_max + d).min(bounds.ceiling_max))));
            if cfg.mode == ConstraintMode::Unconstrained {
                shapes.extend([0.0, 1.0, 3.0].map(|d| (y_max, (y_min - d).max(0.0))));
            }
        }
    }

    let mut grid = Vec::new();
    for &(p, a) in &shapes {
        for &c in &c_grid {
            for b in [0.5, 1.0, 2.0] {
                grid.push(SigmoidParams::new(p, a, c, b));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base_len = grid.len();
    let mut k = 0;
    while grid.len() < cfg.multistart_count {
        let base = grid[k % base_len];
        k += 1;
        let zc: f64 = rng.sample(StandardNormal);
        let zb: f64 = rng.sample(StandardNormal);
        let da: f64 = rng.gen_range(0.0..5.0);
        let a = if base.ceiling >= base.p_start {
            (base.ceiling + da).min(bounds.ceiling_max)
        } else {
            (base.ceiling - da).max(0.0)
        };
        grid.push(SigmoidParams::new(
            base.p_start,
            a,
            (base.c_mid * zc.exp()).clamp(bounds.c_mid.0, bounds.c_mid.1),
            (base.steepness * (0.5 * zb).exp()).clamp(bounds.steepness.0, bounds.steepness.1),
        ));
    }
    grid
}

/// Best of [`fit_sigmoid_nls`] over [`initial_guesses`]. Candidates are
/// evaluated in parallel; the lowest cost wins with ties going to the lower
/// start index, so the result does not depend on scheduling.
pub fn multistart_fit(xs: &[f64], ys: &[f64], cfg: &FitConfig) -> Result<NlsOutcome> {
    if xs.len() < MIN_FIT_POINTS {
        return Err(FitError::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: xs.len(),
        });
    }
    let bounds = cfg.bounds();
    let starts = initial_guesses(xs, ys, cfg);
    let outcomes: Vec<Result<NlsOutcome>> = starts
        .par_iter()
        .map(|s| {
            fit_sigmoid_nls(
                xs,
                ys,
                s,
                &bounds,
                cfg.pin_p_start,
                cfg.nls_max_iters,
                cfg.nls_tolerance,
            )
        })
        .collect();
    let mut best: Option<NlsOutcome> = None;
    for outcome in outcomes {
        let o = outcome?;
        if !o.cost.is_finite() {
            continue;
        }
        if best.is_none_or(|b| o.cost < b.cost) {
            best = Some(o);
        }
    }
    best.ok_or_else(|| FitError::Domain("no start produced a finite cost".into()))
}
