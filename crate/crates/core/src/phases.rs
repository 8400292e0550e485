//! Partition of an SFT validation-loss trajectory into sub-phases by
//! relative distance from the minimum loss.
//!
//! With `L_min` the lowest observed loss, a checkpoint is *stable* when
//! `L <= (1 + delta) L_min`. Checkpoints before the first stable one are
//! *adaptive*; after the last stable one they are *mild* overfitting while
//! `L < (1 + delta2) L_min` and *severe* beyond. Points above the stable
//! threshold but between two stable checkpoints fit none of these and are
//! labeled *indeterminate*.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Relative slack on threshold comparisons so that values equal to a
/// threshold in decimal (e.g. 0.51 vs 1.02 * 0.5) land on the inclusive side
/// regardless of binary round-off or a rescaling of the losses.
const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("loss series is empty")]
    Empty,
    #[error("need at least {needed} points, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("point {0}: compute must be finite and strictly increasing")]
    BadCompute(usize),
    #[error("point {0}: loss must be finite and >= 0")]
    BadLoss(usize),
    #[error("invalid thresholds: need 0 < delta < delta2, got delta={delta}, delta2={delta2}")]
    BadThresholds { delta: f64, delta2: f64 },
    #[error("labels ({labels}) and series ({points}) differ in length")]
    Misaligned { labels: usize, points: usize },
}

pub type Result<T> = std::result::Result<T, PhaseError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    /// SFT compute in exaFLOPs.
    pub x: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSeries {
    pub points: Vec<LossPoint>,
}

impl LossSeries {
    pub fn new(points: Vec<LossPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(PhaseError::Empty);
        }
        for (i, p) in points.iter().enumerate() {
            if !p.x.is_finite() || (i > 0 && p.x <= points[i - 1].x) {
                return Err(PhaseError::BadCompute(i));
            }
            if !p.loss.is_finite() || p.loss < 0.0 {
                return Err(PhaseError::BadLoss(i));
            }
        }
        Ok(LossSeries { points })
    }

    pub fn from_xy(xs: &[f64], losses: &[f64]) -> Result<Self> {
        Self::new(xs.iter().zip(losses).map(|(&x, &loss)| LossPoint { x, loss }).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.loss).collect()
    }

    /// Trailing-window median of the losses. `window = 1` is the identity.
    pub fn smoothed(&self, window: usize) -> LossSeries {
        let window = window.max(1);
        let points = (0..self.points.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(window);
                let mut w: Vec<f64> = self.points[lo..=i].iter().map(|p| p.loss).collect();
                w.sort_by(f64::total_cmp);
                let m = w.len();
                let loss = if m % 2 == 1 {
                    w[m / 2]
                } else {
                    0.5 * (w[m / 2 - 1] + w[m / 2])
                };
                LossPoint {
                    x: self.points[i].x,
                    loss,
                }
            })
            .collect();
        LossSeries { points }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseThresholds {
    pub delta: f64,
    pub delta2: f64,
}

impl Default for PhaseThresholds {
    fn default() -> Self {
        PhaseThresholds {
            delta: 0.02,
            delta2: 0.1,
        }
    }
}

impl PhaseThresholds {
    pub fn new(delta: f64, delta2: f64) -> Result<Self> {
        let t = PhaseThresholds { delta, delta2 };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta > 0.0 && self.delta < self.delta2 && self.delta2.is_finite() {
            Ok(())
        } else {
            Err(PhaseError::BadThresholds {
                delta: self.delta,
                delta2: self.delta2,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    Adaptive,
    Stable,
    MildOverfit,
    SevereOverfit,
    Indeterminate,
}

impl PhaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseLabel::Adaptive => "adaptive",
            PhaseLabel::Stable => "stable",
            PhaseLabel::MildOverfit => "mild",
            PhaseLabel::SevereOverfit => "severe",
            PhaseLabel::Indeterminate => "indeterminate",
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Global minimum loss and its compute; ties go to the earliest point.
pub fn min_val_loss(series: &LossSeries) -> Result<(f64, f64)> {
    let first = series.points.first().ok_or(PhaseError::Empty)?;
    let best = series
        .points
        .iter()
        .fold(*first, |best, p| if p.loss < best.loss { *p } else { best });
    Ok((best.x, best.loss))
}

fn at_most(value: f64, threshold: f64) -> bool {
    value <= threshold * (1.0 + THRESHOLD_SLACK)
}

pub fn classify_phases(series: &LossSeries, thr: &PhaseThresholds) -> Result<Vec<PhaseLabel>> {
    thr.validate()?;
    if series.len() < 2 {
        return Err(PhaseError::TooShort {
            needed: 2,
            got: series.len(),
        });
    }
    let (_, l_min) = min_val_loss(series)?;
    let stable_cut = (1.0 + thr.delta) * l_min;
    let severe_cut = (1.0 + thr.delta2) * l_min;

    let stable: Vec<bool> = series.points.iter().map(|p| at_most(p.loss, stable_cut)).collect();
    // the minimum itself is always stable, so both ends exist
    let first = stable.iter().position(|&s| s).unwrap();
    let last = stable.iter().rposition(|&s| s).unwrap();

    Ok(series
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if stable[i] {
                PhaseLabel::Stable
            } else if i < first {
                PhaseLabel::Adaptive
            } else if i > last {
                if at_most(severe_cut, p.loss) {
                    PhaseLabel::SevereOverfit
                } else {
                    PhaseLabel::MildOverfit
                }
            } else {
                PhaseLabel::Indeterminate
            }
        })
        .collect())
}

/// Contiguous run of one label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseInterval {
    pub label: PhaseLabel,
    pub start_index: usize,
    pub end_index: usize,
    pub x_start: f64,
    pub x_end: f64,
}

pub fn phase_boundaries(labels: &[PhaseLabel], series: &LossSeries) -> Result<Vec<PhaseInterval>> {
    if labels.len() != series.len() {
        return Err(PhaseError::Misaligned {
            labels: labels.len(),
            points: series.len(),
        });
    }
    let mut out: Vec<PhaseInterval> = Vec::new();
    for (i, (&label, p)) in labels.iter().zip(&series.points).enumerate() {
        match out.last_mut() {
            Some(cur) if cur.label == label => {
                cur.end_index = i;
                cur.x_end = p.x;
            }
            _ => out.push(PhaseInterval {
                label,
                start_index: i,
                end_index: i,
                x_start: p.x,
                x_end: p.x,
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use PhaseLabel::*;

    fn series(losses: &[f64]) -> LossSeries {
        let xs: Vec<f64> = (0..losses.len()).map(|i| (i + 1) as f64 * 10.0).collect();
        LossSeries::from_xy(&xs, losses).unwrap()
    }

    fn worked() -> LossSeries {
        series(&[1.0, 0.6, 0.5, 0.51, 0.53, 0.56])
    }

    #[test]
    fn min_loss_and_ties() {
        assert_eq!(min_val_loss(&series(&[1.0, 0.6, 0.5, 0.51])).unwrap(), (30.0, 0.5));
        assert_eq!(min_val_loss(&series(&[0.7])).unwrap(), (10.0, 0.7));
        assert_eq!(min_val_loss(&series(&[1.0, 0.8, 0.4, 0.6, 0.4])).unwrap(), (30.0, 0.4));
    }

    #[test]
    fn worked_example() {
        let labels = classify_phases(&worked(), &PhaseThresholds::default()).unwrap();
        assert_eq!(
            labels,
            vec![Adaptive, Adaptive, Stable, Stable, MildOverfit, SevereOverfit]
        );
        let scaled = LossSeries::new(
            worked()
                .points
                .iter()
                .map(|p| LossPoint {
                    x: p.x,
                    loss: p.loss * 10.0,
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(classify_phases(&scaled, &PhaseThresholds::default()).unwrap(), labels);
    }

    #[test]
    fn monotone_decreasing_series() {
        let labels = classify_phases(&series(&[1.0, 0.8, 0.6, 0.5]), &PhaseThresholds::default()).unwrap();
        assert_eq!(labels, vec![Adaptive, Adaptive, Adaptive, Stable]);
    }

    #[test]
    fn interior_excursion() {
        let labels = classify_phases(&series(&[1.0, 0.5, 0.6, 0.505]), &PhaseThresholds::default()).unwrap();
        assert_eq!(labels, vec![Adaptive, Stable, Indeterminate, Stable]);
    }

    #[test]
    fn errors() {
        assert!(classify_phases(&series(&[1.0]), &PhaseThresholds::default()).is_err());
        assert!(PhaseThresholds::new(0.1, 0.1).is_err());
        assert!(PhaseThresholds::new(0.0, 0.1).is_err());
        assert!(LossSeries::from_xy(&[1.0, 1.0], &[0.5, 0.4]).is_err());
        assert!(LossSeries::from_xy(&[1.0, 2.0], &[0.5, -0.4]).is_err());
        assert!(LossSeries::new(vec![]).is_err());
    }

    #[test]
    fn boundaries() {
        let s = worked();
        let labels = classify_phases(&s, &PhaseThresholds::default()).unwrap();
        let b = phase_boundaries(&labels, &s).unwrap();
        let kinds: Vec<PhaseLabel> = b.iter().map(|i| i.label).collect();
        assert_eq!(kinds, vec![Adaptive, Stable, MildOverfit, SevereOverfit]);
        assert_eq!((b[0].x_start, b[0].x_end), (10.0, 20.0));
        assert_eq!((b[1].start_index, b[1].end_index), (2, 3));

        let uniform = vec![Stable; 6];
        assert_eq!(phase_boundaries(&uniform, &s).unwrap().len(), 1);
        let alternating: Vec<PhaseLabel> = (0..6)
            .map(|i| if i % 2 == 0 { Stable } else { Indeterminate })
            .collect();
        assert_eq!(phase_boundaries(&alternating, &s).unwrap().len(), 6);
        assert!(phase_boundaries(&uniform[..3], &s).is_err());
    }

    #[test]
    fn smoothing_window() {
        let s = series(&[1.0, 0.2, 0.9, 0.8, 0.7]);
        assert_eq!(s.smoothed(1), s);
        assert_eq!(s.smoothed(3).losses(), vec![1.0, 0.6, 0.9, 0.8, 0.8]);
    }

    fn arb_losses() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05..2.0f64, 2..40)
    }

    proptest! {
        #[test]
        fn partition_rules(l in arb_losses()) {
            let s = series(&l);
            let thr = PhaseThresholds::default();
            let labels = classify_phases(&s, &thr).unwrap();
            let (_, m) = min_val_loss(&s).unwrap();
            let first = labels.iter().position(|&x| x == Stable).unwrap();
            for (i, lab) in labels.iter().enumerate() {
                if *lab == Adaptive { prop_assert!(i < first); }
                if *lab == SevereOverfit { prop_assert!(l[i] >= (1.0 + thr.delta2) * m * (1.0 - 1e-9)); }
            }
        }

        #[test]
        fn scale_invariant(l in arb_losses(), c in 0.01..100.0f64) {
            let s = series(&l);
            let scaled: Vec<f64> = l.iter().map(|v| v * c).collect();
            let thr = PhaseThresholds::default();
            prop_assert_eq!(classify_phases(&s, &thr).unwrap(), classify_phases(&series(&scaled), &thr).unwrap());
        }

        #[test]
        fn threshold_monotonicity(l in arb_losses(), d in 0.001..0.05f64, bump in 0.0..0.05f64) {
            let s = series(&l);
            let lo = classify_phases(&s, &PhaseThresholds::new(d, 0.1).unwrap()).unwrap();
            let hi = classify_phases(&s, &PhaseThresholds::new(d + bump, 0.1 + bump).unwrap()).unwrap();
            let count = |v: &[PhaseLabel], k| v.iter().filter(|&&x| x == k).count();
            prop_assert!(count(&hi, Stable) >= count(&lo, Stable));
            let wide = classify_phases(&s, &PhaseThresholds::new(d, 0.1 + bump).unwrap()).unwrap();
            let narrow = classify_phases(&s, &PhaseThresholds::new(d, 0.1).unwrap()).unwrap();
            prop_assert!(count(&wide, SevereOverfit) <= count(&narrow, SevereOverfit));
        }
    }
}
