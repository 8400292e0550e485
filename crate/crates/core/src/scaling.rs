//! Sigmoidal compute-performance curve and the ceiling/plasticity
//! decomposition of a two-stage (SFT then RL) pipeline.
//!
//! The curve is
//!
//! ```text
//! P(x) = P_start + (A - P_start) / (1 + (x / C_mid)^(-B))
//! ```
//!
//! which is evaluated as a logistic in `ln x`, so `x = 0` and very large `x`
//! never produce an overflowing power.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on any performance value, in percentage points.
pub const PERFORMANCE_MAX: f64 = 110.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalingError {
    #[error("invalid sigmoid parameters: {0}")]
    InvalidParams(String),
    #[error("input out of domain: {0}")]
    Domain(String),
    #[error("RL curve starts at {rl_start} but the SFT endpoint is {p_sft}")]
    StartMismatch { rl_start: f64, p_sft: f64 },
}

pub type Result<T> = std::result::Result<T, ScalingError>;

/// Whether the ceiling may sit below the starting performance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// `A >= P_start`; plasticity is nonnegative headroom.
    #[default]
    Headroom,
    /// Degrading runs: `A < P_start` is allowed.
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidParams {
    pub p_start: f64,
    /// Asymptotic ceiling `A`.
    pub ceiling: f64,
    /// Compute (exaFLOPs) at which half the headroom is realized.
    pub c_mid: f64,
    pub steepness: f64,
}

/// Partial derivatives of the curve with respect to
/// `(p_start, ceiling, c_mid, steepness)`.
pub type Gradient = [f64; 4];

#[inline]
fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl SigmoidParams {
    pub fn new(p_start: f64, ceiling: f64, c_mid: f64, steepness: f64) -> Self {
        SigmoidParams {
            p_start,
            ceiling,
            c_mid,
            steepness,
        }
    }

    pub fn validate(&self, mode: ConstraintMode) -> Result<()> {
        let all = [self.p_start, self.ceiling, self.c_mid, self.steepness];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ScalingError::InvalidParams(format!("non-finite value in {self:?}")));
        }
        if self.c_mid <= 0.0 {
            return Err(ScalingError::InvalidParams(format!(
                "c_mid must be > 0, got {}",
                self.c_mid
            )));
        }
        if self.steepness <= 0.0 {
            return Err(ScalingError::InvalidParams(format!(
                "steepness must be > 0, got {}",
                self.steepness
            )));
        }
        match mode {
            ConstraintMode::Headroom if self.ceiling < self.p_start => Err(ScalingError::InvalidParams(format!(
                "ceiling {} below p_start {} (use unconstrained mode for degrading runs)",
                self.ceiling, self.p_start
            ))),
            ConstraintMode::Unconstrained if self.ceiling < self.p_start => {
                log::warn!(
                    "ceiling {} below p_start {}: curve is decreasing",
                    self.ceiling,
                    self.p_start
                );
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Fraction of the headroom realized at `x`, in `[0, 1]`.
    fn progress(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            logistic(self.steepness * (x / self.c_mid).ln())
        }
    }

    /// Curve value at `x` without domain checks. `x` must be `>= 0`.
    pub fn value(&self, x: f64) -> f64 {
        let s = self.progress(x);
        self.p_start * (1.0 - s) + self.ceiling * s
    }

    /// Curve value and analytic gradient at `x`.
    pub fn value_and_gradient(&self, x: f64) -> (f64, Gradient) {
        if x == 0.0 {
            return (self.p_start, [1.0, 0.0, 0.0, 0.0]);
        }
        let u = (x / self.c_mid).ln();
        let s = logistic(self.steepness * u);
        let headroom = self.ceiling - self.p_start;
        let slope = headroom * s * (1.0 - s);
        let value = self.p_start * (1.0 - s) + self.ceiling * s;
        (value, [1.0 - s, s, -slope * self.steepness / self.c_mid, slope * u])
    }

    pub fn plasticity(&self) -> f64 {
        self.ceiling - self.p_start
    }

    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }
}

/// `P(x)` with the `x = 0` continuous extension.
pub fn eval_sigmoid(params: &SigmoidParams, x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(ScalingError::Domain(format!(
            "compute must be finite and >= 0, got {x}"
        )));
    }
    Ok(params.value(x))
}

/// Headroom above the starting performance.
pub fn plasticity(params: &SigmoidParams) -> f64 {
    params.plasticity()
}

/// Asymptotic performance as compute grows without bound.
pub fn ceiling(params: &SigmoidParams) -> f64 {
    params.ceiling
}

pub const START_MATCH_TOLERANCE: f64 = 1e-9;

/// Ceiling/plasticity breakdown of a post-training result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub p0: f64,
    pub x_sft: f64,
    pub p_sft: f64,
    pub delta_sft: f64,
    pub rl_params: SigmoidParams,
    pub pl_rl: f64,
    pub a_post: f64,
    /// `(x_rl, P_rl(x_rl) - P_sft)` at tabulated RL compute values.
    #[serde(default)]
    pub delta_rl_at: Vec<(f64, f64)>,
}

impl DecompositionRecord {
    pub fn delta_rl(&self, x_rl: f64) -> Result<f64> {
        Ok(eval_sigmoid(&self.rl_params, x_rl)? - self.p_sft)
    }

    /// Post-training performance after `x_rl` RL compute.
    pub fn p_post(&self, x_rl: f64) -> Result<f64> {
        eval_sigmoid(&self.rl_params, x_rl)
    }

    pub fn tabulate_rl(&mut self, grid: &[f64]) -> Result<()> {
        self.delta_rl_at = grid
            .iter()
            .map(|&x| self.delta_rl(x).map(|d| (x, d)))
            .collect::<Result<_>>()?;
        Ok(())
    }
}

/// Split post-training performance into the SFT gain and the RL headroom
/// above the realized SFT performance.
pub fn decompose(p0: f64, sft_point: (f64, f64), rl_fit: &SigmoidParams) -> Result<DecompositionRecord> {
    let (x_sft, p_sft) = sft_point;
    if x_sft.is_nan() || x_sft < 0.0 {
        return Err(ScalingError::Domain(format!("x_sft must be >= 0, got {x_sft}")));
    }
    if (rl_fit.p_start - p_sft).abs() > START_MATCH_TOLERANCE {
        return Err(ScalingError::StartMismatch {
            rl_start: rl_fit.p_start,
            p_sft,
        });
    }
    Ok(DecompositionRecord {
        p0,
        x_sft,
        p_sft,
        delta_sft: p_sft - p0,
        rl_params: *rl_fit,
        pl_rl: rl_fit.ceiling - p_sft,
        a_post: rl_fit.ceiling,
        delta_rl_at: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table_row() -> SigmoidParams {
        SigmoidParams::new(70.0, 85.7, 13.0, 1.5)
    }

    #[test]
    fn midpoint_zero_and_asymptote() {
        let p = table_row();
        assert_eq!(eval_sigmoid(&p, 0.0).unwrap(), 70.0);
        let mid = eval_sigmoid(&p, 13.0).unwrap();
        assert!((mid - 70.0 - 15.7 / 2.0).abs() < 1e-12);
        let far = eval_sigmoid(&p, 1e9 * 13.0).unwrap();
        let bound = 10.0 * 15.7 * 1e9f64.powf(-1.5);
        assert!((85.7 - far).abs() <= bound);
        assert!(eval_sigmoid(&p, -1.0).is_err());
        assert!(eval_sigmoid(&p, f64::NAN).is_err());
    }

    #[test]
    fn plasticity_and_ceiling() {
        let pure_rl = SigmoidParams::new(46.1, 71.3, 1.0, 1.3);
        assert!((plasticity(&pure_rl) - 25.2).abs() < 1e-9);
        let row = SigmoidParams::new(70.1, 84.8, 10.0, 0.9);
        assert!((plasticity(&row) - 14.7).abs() < 1e-9);
        assert_eq!(ceiling(&table_row()), 85.7);
        let flat = SigmoidParams::new(50.0, 50.0, 3.0, 2.0);
        assert_eq!(plasticity(&flat), 0.0);
        for x in [0.0, 0.1, 3.0, 1e6] {
            assert_eq!(flat.value(x), 50.0);
        }
    }

    #[test]
    fn validate_modes() {
        let falling = SigmoidParams::new(2.3, 2.2, 5.0, 1.0);
        assert!(falling.validate(ConstraintMode::Headroom).is_err());
        assert!(falling.validate(ConstraintMode::Unconstrained).is_ok());
        assert!(SigmoidParams::new(1.0, 2.0, 0.0, 1.0)
            .validate(ConstraintMode::Headroom)
            .is_err());
        assert!(SigmoidParams::new(1.0, 2.0, 1.0, -1.0)
            .validate(ConstraintMode::Headroom)
            .is_err());
    }

    #[test]
    fn decompose_table_row() {
        let rl = SigmoidParams::new(70.1, 84.8, 10.0, 0.9);
        let rec = decompose(46.1, (34.9, 70.1), &rl).unwrap();
        assert!((rec.delta_sft - 24.0).abs() < 1e-9);
        assert!((rec.pl_rl - 14.7).abs() < 1e-9);
        assert_eq!(rec.a_post, 84.8);
        assert_eq!(rec.a_post, rec.p_sft + rec.pl_rl);
        assert_eq!(rec.delta_rl(0.0).unwrap(), 0.0);
    }

    #[test]
    fn decompose_edge_cases() {
        let flat = SigmoidParams::new(60.0, 60.0, 1.0, 1.0);
        let rec = decompose(40.0, (5.0, 60.0), &flat).unwrap();
        assert_eq!(rec.pl_rl, 0.0);
        assert_eq!(rec.a_post, 60.0);
        let pure_rl = decompose(46.1, (0.0, 46.1), &SigmoidParams::new(46.1, 71.3, 1.0, 1.3)).unwrap();
        assert_eq!(pure_rl.delta_sft, 0.0);
        assert!(matches!(
            decompose(40.0, (5.0, 61.0), &flat),
            Err(ScalingError::StartMismatch { .. })
        ));
    }

    #[test]
    fn tabulated_rl_gain_starts_at_zero() {
        let rl = SigmoidParams::new(70.1, 84.8, 10.0, 0.9);
        let mut rec = decompose(46.1, (34.9, 70.1), &rl).unwrap();
        rec.tabulate_rl(&[0.0, 10.0, 1e6]).unwrap();
        assert_eq!(rec.delta_rl_at[0], (0.0, 0.0));
        assert!((rec.delta_rl_at[1].1 - 14.7 / 2.0).abs() < 1e-9);
        assert!(rec.delta_rl_at[2].1 < 14.7);
    }

    fn arb_params() -> impl Strategy<Value = SigmoidParams> {
        (0.0..80.0f64, 0.1..30.0f64, 1e-2..1e3f64, 0.05..8.0f64)
            .prop_map(|(p, h, c, b)| SigmoidParams::new(p, p + h, c, b))
    }

    proptest! {
        #[test]
        fn strictly_increasing_and_below_ceiling(p in arb_params(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let lo = p.c_mid * 10f64.powf(-1.0 + 2.0 * a.min(b));
            let hi = p.c_mid * 10f64.powf(-1.0 + 2.0 * a.max(b));
            prop_assume!(hi > lo * (1.0 + 1e-9));
            prop_assert!(p.value(lo) < p.value(hi));
            prop_assert!(p.value(hi) < p.ceiling);
        }

        #[test]
        fn gradient_matches_central_differences(p in arb_params(), t in -1.0..1.0f64) {
            let x = p.c_mid * 10f64.powf(t);
            let (_, g) = p.value_and_gradient(x);
            let base = [p.p_start, p.ceiling, p.c_mid, p.steepness];
            for k in 0..4 {
                let h = 1e-6 * base[k].abs().max(1.0);
                let mut up = base;
                let mut dn = base;
                up[k] += h;
                dn[k] -= h;
                let f = |v: [f64; 4]| SigmoidParams::new(v[0], v[1], v[2], v[3]).value(x);
                let fd = (f(up) - f(dn)) / (2.0 * h);
                let scale = g[k].abs().max(1e-3);
                prop_assert!((fd - g[k]).abs() / scale < 1e-5, "k={} fd={} an={}", k, fd, g[k]);
            }
        }
    }
}
