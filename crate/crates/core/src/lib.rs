//! Compute-performance scaling analysis for LLM post-training.
//!
//! - [`flops`]: training FLOPs for SFT, GRPO, DAPO, hybrid and UPT steps.
//! - [`scaling`]: the sigmoidal compute-performance curve and the
//!   ceiling/plasticity decomposition.
//! - [`fit`]: robust curve fitting (multistart LM, MAD outlier rejection, LTS).
//! - [`phases`]: SFT validation-loss sub-phase labeling.
//! - [`analysis`]: correlation, win rate, report tables.
//! - [`io`]: file formats; [`synth`]: seeded synthetic runs; [`cli`]: the
//!   `pcscale` binary.

pub mod analysis;
pub mod cli;
pub mod fit;
pub mod flops;
pub mod io;
pub mod phases;
pub mod scaling;
pub mod series;
pub mod synth;

pub use fit::{robust_fit_pipeline, FitConfig, FitError, FitResult};
pub use flops::{Algorithm, FlopCount, ModelConfig, StepSpec};
pub use phases::{classify_phases, LossSeries, PhaseLabel, PhaseThresholds};
pub use scaling::{ConstraintMode, SigmoidParams};
pub use series::{CurvePoint, RunSeries};
