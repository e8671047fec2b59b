//! Piecewise-linear periodic parameterization of the distributed normal
//! pressure acting on a ring.
//!
//! The unknown pressure is represented by `n` knot values pinned to evenly
//! spaced polar angles (first knot at the crown, 0°). Evaluation anywhere on
//! the ring interpolates linearly between the two bracketing knots and wraps
//! between the last knot and the first.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("a pressure field needs at least 2 knots, got {0}")]
    TooFewKnots(usize),
}

/// Distributed normal pressure `q(θ)` in kPa, periodic over [0°, 360°).
///
/// Knot `i` sits at angle `i · 360/n` degrees measured from the crown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureField {
    knots: Vec<f64>,
}

impl PressureField {
    pub fn new(knots: Vec<f64>) -> Result<Self, FieldError> {
        if knots.len() < 2 {
            return Err(FieldError::TooFewKnots(knots.len()));
        }
        Ok(Self { knots })
    }

    /// Constant field with `n` knots all equal to `value`.
    pub fn uniform(n: usize, value: f64) -> Result<Self, FieldError> {
        Self::new(vec![value; n])
    }

    pub fn knot_count(&self) -> usize {
        self.knots.len()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Angular spacing between knots, degrees.
    pub fn knot_spacing_deg(&self) -> f64 {
        360.0 / self.knots.len() as f64
    }

    pub fn knot_angles_deg(&self) -> Vec<f64> {
        let spacing = self.knot_spacing_deg();
        (0..self.knots.len()).map(|i| i as f64 * spacing).collect()
    }

    /// Pressure at polar angle `theta_deg` (any real angle; reduced mod 360°).
    pub fn evaluate(&self, theta_deg: f64) -> f64 {
        let (lo, hi, w) = knot_weights(self.knots.len(), theta_deg);
        self.knots[lo] * (1.0 - w) + self.knots[hi] * w
    }

    pub fn evaluate_many(&self, thetas_deg: &[f64]) -> Vec<f64> {
        thetas_deg.iter().map(|&t| self.evaluate(t)).collect()
    }
}

/// Interpolation stencil at `theta_deg` for an `n`-knot field: returns the
/// bracketing knot indices and the weight of the upper knot, so that
/// `q(θ) = q[lo]·(1−w) + q[hi]·w`.
///
/// Shared by field evaluation and posterior summarization so both use the
/// identical linear rule.
pub fn knot_weights(knot_count: usize, theta_deg: f64) -> (usize, usize, f64) {
    debug_assert!(knot_count >= 2);
    let spacing = 360.0 / knot_count as f64;
    let theta = theta_deg.rem_euclid(360.0);
    let pos = theta / spacing;
    let lo = (pos.floor() as usize).min(knot_count - 1);
    let w = pos - lo as f64;
    let hi = (lo + 1) % knot_count;
    (lo, hi, w)
}
