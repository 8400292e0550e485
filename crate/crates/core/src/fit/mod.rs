//! Robust fitting of the sigmoidal scaling curve.
//!
//! The pipeline holds out the chronologically last points for validation,
//! then on the training split:
//!
//! 1. fits the curve by multistart bounded Levenberg-Marquardt and removes
//!    points whose MAD-based modified z-score exceeds `z_threshold`,
//!    repeating until nothing is removed;
//! 2. optionally refines the fit with least trimmed squares, alternating
//!    between keeping the `h = floor(n * alpha)` best-fitting points and
//!    refitting on them (concentration steps).

mod lts;
mod nls;
mod outlier;
mod pipeline;
mod stats;

pub use lts::{lts_fit, trimmed_objective};
pub use nls::{fit_sigmoid_nls, initial_guesses, multistart_fit, Bounds, NlsOutcome};
pub use outlier::iterative_outlier_fit;
pub use pipeline::{fit_metrics, robust_fit_pipeline, split_train_val};
pub use stats::{mad, median, modified_z_scores, MAD_NORMAL_FACTOR};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scaling::{ConstraintMode, ScalingError, SigmoidParams};

/// Fewest points the outlier loop will leave active.
pub const MIN_ACTIVE_POINTS: usize = 5;
/// Fewest points any curve fit accepts (one per parameter).
pub const MIN_FIT_POINTS: usize = 4;
/// Fewest points the full pipeline accepts.
pub const MIN_PIPELINE_POINTS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("input out of domain: {0}")]
    Domain(String),
    #[error("invalid fit config: {0}")]
    InvalidConfig(String),
    #[error("residual scale is zero")]
    DegenerateScale,
    #[error("points must be ordered by compute ascending (index {0})")]
    Unordered(usize),
    #[error("trimmed objective increased at C-step {step}: {before} -> {after}")]
    LtsNotMonotone { step: usize, before: f64, after: f64 },
    #[error(transparent)]
    Scaling(#[from] ScalingError),
}

pub type Result<T> = std::result::Result<T, FitError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub train_fraction: f64,
    /// Modified z-score cutoff.
    pub z_threshold: f64,
    pub use_lts: bool,
    pub lts_alpha: f64,
    pub max_outlier_rounds: usize,
    pub nls_max_iters: usize,
    pub nls_tolerance: f64,
    pub multistart_count: usize,
    pub seed: u64,
    pub mode: ConstraintMode,
    /// Hold `p_start` fixed (RL curves start at the realized SFT score).
    pub pin_p_start: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            train_fraction: 0.85,
            z_threshold: 3.5,
            use_lts: false,
            lts_alpha: 0.85,
            max_outlier_rounds: 10,
            nls_max_iters: 200,
            nls_tolerance: 1e-8,
            multistart_count: 16,
            seed: 0,
            mode: ConstraintMode::Headroom,
            pin_p_start: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FitError::InvalidConfig(m));
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad(format!("train_fraction must be in (0, 1], got {}", self.train_fraction));
        }
        if self.z_threshold.is_nan() || self.z_threshold <= 0.0 {
            return bad(format!("z_threshold must be > 0, got {}", self.z_threshold));
        }
        if !(self.lts_alpha > 0.5 && self.lts_alpha <= 1.0) {
            return bad(format!("lts_alpha must be in (0.5, 1], got {}", self.lts_alpha));
        }
        if self.max_outlier_rounds == 0 || self.nls_max_iters == 0 || self.multistart_count == 0 {
            return bad("round, iteration and multistart counts must be >= 1".into());
        }
        if !(self.nls_tolerance > 0.0 && self.nls_tolerance < 1.0) {
            return bad(format!("nls_tolerance must be in (0, 1), got {}", self.nls_tolerance));
        }
        if let Some(p) = self.pin_p_start {
            if !(0.0..=crate::scaling::PERFORMANCE_MAX).contains(&p) {
                return bad(format!("pinned p_start {p} out of range"));
            }
        }
        Ok(())
    }

    pub(crate) fn bounds(&self) -> Bounds {
        Bounds::for_mode(self.mode)
    }
}

/// Why a training point is not in the final inlier set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum RemovalStage {
    /// Stage-1 modified z-score rejection.
    ModifiedZ { round: usize, score: f64 },
    /// Left out of the final least-trimmed-squares subset.
    Trimmed { c_steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemovedPoint {
    /// Index into the training split.
    pub index: usize,
    pub residual: f64,
    #[serde(flatten)]
    pub stage: RemovalStage,
}

/// Per-run record of the concentration steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtsTrace {
    pub h: usize,
    pub alpha: f64,
    pub c_steps: usize,
    /// Trimmed objective before the first step and after every step.
    pub objective: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: SigmoidParams,
    /// Training-split indices used by the final fit, ascending.
    pub inlier_indices: Vec<usize>,
    pub removed_outliers: Vec<RemovedPoint>,
    /// Over the final inliers; absent when their targets have zero variance.
    pub r2_train: Option<f64>,
    /// Over the untouched validation split; absent when it is empty.
    pub rmse_val: Option<f64>,
    pub converged: bool,
    pub rounds_used: usize,
    /// The outlier loop stopped because removal would leave too few points.
    pub truncated: bool,
    pub n_train: usize,
    pub n_val: usize,
    pub lts: Option<LtsTrace>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn plasticity(&self) -> f64 {
        self.params.plasticity()
    }

    /// Indices dropped by Stage-1 only.
    pub fn stage1_removed(&self) -> impl Iterator<Item = usize> + '_ {
        self.removed_outliers
            .iter()
            .filter(|r| matches!(r.stage, RemovalStage::ModifiedZ { .. }))
            .map(|r| r.index)
    }
}

pub(crate) fn check_ordered(xs: &[f64]) -> Result<()> {
    for (i, w) in xs.windows(2).enumerate() {
        if w[1].is_nan() || w[1] < w[0] {
            return Err(FitError::Unordered(i + 1));
        }
    }
    if let Some(i) = xs.iter().position(|x| !x.is_finite() || *x < 0.0) {
        return Err(FitError::Domain(format!("compute at index {i} is not finite and >= 0")));
    }
    Ok(())
}

pub(crate) fn residuals(params: &SigmoidParams, xs: &[f64], ys: &[f64]) -> Vec<f64> {
    xs.iter().zip(ys).map(|(&x, &y)| y - params.value(x)).collect()
}
