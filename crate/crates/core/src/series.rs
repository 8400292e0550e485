//! Compute-performance observations of a single training run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scaling::PERFORMANCE_MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("run series is empty")]
    Empty,
    #[error("point {index}: compute {x} is not finite and >= 0")]
    BadCompute { index: usize, x: f64 },
    #[error("point {index}: compute {x} decreases from previous {prev}")]
    NotMonotone { index: usize, x: f64, prev: f64 },
    #[error("point {index}: performance {y} outside [0, {max}]")]
    BadPerformance { index: usize, y: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Cumulative compute in exaFLOPs.
    pub x: f64,
    /// Performance in percentage points.
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
}

impl CurvePoint {
    pub fn new(x: f64, y: f64) -> Self {
        CurvePoint { x, y, step: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub run_id: String,
    pub points: Vec<CurvePoint>,
}

impl RunSeries {
    pub fn new(run_id: impl Into<String>, points: Vec<CurvePoint>) -> Result<Self, SeriesError> {
        let series = RunSeries {
            run_id: run_id.into(),
            points,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn from_xy(run_id: impl Into<String>, xs: &[f64], ys: &[f64]) -> Result<Self, SeriesError> {
        Self::new(
            run_id,
            xs.iter().zip(ys).map(|(&x, &y)| CurvePoint::new(x, y)).collect(),
        )
    }

    pub fn validate(&self) -> Result<(), SeriesError> {
        if self.points.is_empty() {
            return Err(SeriesError::Empty);
        }
        let mut prev = 0.0;
        for (index, p) in self.points.iter().enumerate() {
            if !p.x.is_finite() || p.x < 0.0 {
                return Err(SeriesError::BadCompute { index, x: p.x });
            }
            if index > 0 && p.x < prev {
                return Err(SeriesError::NotMonotone { index, x: p.x, prev });
            }
            if !(0.0..=PERFORMANCE_MAX).contains(&p.y) {
                return Err(SeriesError::BadPerformance {
                    index,
                    y: p.y,
                    max: PERFORMANCE_MAX,
                });
            }
            prev = p.x;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.y).collect()
    }

    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    /// Copy of the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> RunSeries {
        RunSeries {
            run_id: self.run_id.clone(),
            points: indices.iter().map(|&i| self.points[i]).collect(),
        }
    }
}
