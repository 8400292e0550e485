//! Seeded synthetic runs drawn from a known curve, with optional labeled
//! outliers. Used as the oracle for the fitting tests.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::PERFORMANCE_INGEST_MAX;
use crate::scaling::{ConstraintMode, SigmoidParams};
use crate::series::{CurvePoint, RunSeries};

/// Identifies the random stream; recorded next to generated data.
pub const GENERATOR: &str = "ChaCha8Rng(seed_from_u64) + rand_distr::StandardNormal";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub params: SigmoidParams,
    pub x_grid: Vec<f64>,
    pub noise_sigma: f64,
    pub outlier_fraction: f64,
    pub outlier_shift: f64,
    pub seed: u64,
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo * (hi / lo).powf(i as f64 / (n - 1) as f64)
                }
            })
            .collect(),
    }
}

impl SynthSpec {
    /// Noise-free spec on a log grid.
    pub fn log_grid(params: SigmoidParams, lo: f64, hi: f64, n: usize) -> Self {
        SynthSpec {
            params,
            x_grid: log_space(lo, hi, n),
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            outlier_shift: 0.0,
            seed: 0,
        }
    }

    /// Default grid: 20 points spanning `[0.1, 10] * c_mid`.
    pub fn default_grid(params: SigmoidParams) -> Self {
        Self::log_grid(params, 0.1 * params.c_mid, 10.0 * params.c_mid, 20)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if let Err(e) = self.params.validate(ConstraintMode::Unconstrained) {
            return bad(e.to_string());
        }
        if self.x_grid.is_empty() {
            return bad("x grid is empty".into());
        }
        if self.x_grid.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return bad("x grid values must be finite and >= 0".into());
        }
        if self.x_grid.windows(2).any(|w| w[1] < w[0]) {
            return bad("x grid must be ascending".into());
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(self.outlier_fraction >= 0.0 && self.outlier_fraction < 0.5) {
            return bad(format!(
                "outlier_fraction must be in [0, 0.5), got {}",
                self.outlier_fraction
            ));
        }
        if !self.outlier_shift.is_finite() {
            return bad("outlier_shift must be finite".into());
        }
        Ok(())
    }

    pub fn outlier_count(&self) -> usize {
        // floor with a guard for products like 0.1 * 30 = 3.0000000000000004
        ((self.x_grid.len() as f64 * self.outlier_fraction) * (1.0 + 1e-12)).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierLabels {
    pub generator: String,
    pub seed: u64,
    /// Ascending point indices that were shifted.
    pub indices: Vec<usize>,
    /// `+1` or `-1` per entry of `indices`.
    pub signs: Vec<i8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub series: RunSeries,
    pub outliers: OutlierLabels,
}

/// `y_i = P(x_i) + N(0, sigma^2)`, then a seeded `floor(n * fraction)`
/// subset shifted by `+/- outlier_shift`.
pub fn generate(spec: &SynthSpec) -> Result<SynthSample, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.x_grid.len();
    let mut ys: Vec<f64> = spec
        .x_grid
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            spec.params.value(x) + spec.noise_sigma * z
        })
        .collect();

    let k = spec.outlier_count();
    let mut indices = index::sample(&mut rng, n, k).into_vec();
    indices.sort_unstable();
    let signs: Vec<i8> = indices.iter().map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
    for (&i, &s) in indices.iter().zip(&signs) {
        ys[i] += s as f64 * spec.outlier_shift;
    }

    if let Some((i, y)) = ys
        .iter()
        .enumerate()
        .find(|(_, y)| !(0.0..=PERFORMANCE_INGEST_MAX).contains(*y))
    {
        return Err(SynthError::InvalidSpec(format!(
            "generated performance {y} at index {i} falls outside [0, {PERFORMANCE_INGEST_MAX}]"
        )));
    }

    let points = spec
        .x_grid
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| CurvePoint::new(x, y))
        .collect();
    Ok(SynthSample {
        series: RunSeries {
            run_id: format!("synth-{}", spec.seed),
            points,
        },
        outliers: OutlierLabels {
            generator: GENERATOR.into(),
            seed: spec.seed,
            indices,
            signs,
        },
    })
}
