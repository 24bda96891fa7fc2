//! Piecewise-exponential survival law and its Bayesian fit.
//!
//! A [`Partition`] splits `[0, inf)` at interior cuts `s_1 < .. < s_{J-1}`;
//! the hazard is constant on each interval `[s_{j-1}, s_j)` and the last
//! interval extends to infinity, so the fitted last hazard alone governs
//! extrapolation beyond follow-up (and therefore the tails of any predicted
//! survival time).
//!
//! Hazards are in events per month. Each interval gets an independent
//! Gamma(shape, rate) prior, updated conjugately with the interval's event
//! count and exposure.

mod posterior;
mod select;

pub use posterior::{
    fit, fit_counts, interval_counts, sample_hazards, GammaParams, GammaPrior, HazardPosterior,
    IntervalCounts, ModelFit, PinnedHazards, PosteriorDraws,
};
pub use select::{
    candidate_partitions, deviance, dic, select_model, DicRow, DicStats, Selection,
    SelectionOptions,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    cuts: Vec<f64>,
}

impl Partition {
    /// Cuts must be finite, positive and strictly increasing. An empty list
    /// gives the plain exponential model.
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::InvalidArgument(
                "partition cuts must be positive and finite".into(),
            ));
        }
        if cuts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "partition cuts must be strictly increasing".into(),
            ));
        }
        Ok(Self { cuts })
    }

    pub fn exponential() -> Self {
        Self { cuts: Vec::new() }
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Number of intervals `J`.
    pub fn len(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `[lower, upper)` of interval `j`; the last upper bound is infinite.
    pub fn bounds(&self, j: usize) -> (f64, f64) {
        let lo = if j == 0 { 0.0 } else { self.cuts[j - 1] };
        let hi = self.cuts.get(j).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    /// Interval an event at time `t` is attributed to: `(s_{j-1}, s_j]`, so an
    /// event exactly at a cut falls in the interval whose exposure ends there.
    pub fn event_interval(&self, t: f64) -> usize {
        self.cuts.partition_point(|&c| c < t)
    }

    /// `Lambda(t) = sum_j lambda_j |[s_{j-1}, s_j) ∩ [0, t]|`.
    pub fn cumulative_hazard(&self, t: f64, hazards: &[f64]) -> f64 {
        debug_assert_eq!(hazards.len(), self.len());
        let mut total = 0.0;
        let mut lo = 0.0;
        for (j, &rate) in hazards.iter().enumerate() {
            let hi = self.cuts.get(j).copied().unwrap_or(f64::INFINITY);
            if t <= hi {
                return total + rate * (t - lo).max(0.0);
            }
            total += rate * (hi - lo);
            lo = hi;
        }
        total
    }

    pub fn survival_at(&self, t: f64, hazards: &[f64]) -> f64 {
        (-self.cumulative_hazard(t, hazards)).exp()
    }

    /// Time `t` with `S(t) = u`, by closed-form inversion inside the interval
    /// where the cumulative hazard crosses `-ln u`.
    pub fn quantile(&self, u: f64, hazards: &[f64]) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::DegenerateU(u));
        }
        Ok(self.quantile_unchecked(u, hazards))
    }

    /// [`Partition::quantile`] without the range check; `u` must lie in `(0, 1]`.
    pub fn quantile_unchecked(&self, u: f64, hazards: &[f64]) -> f64 {
        debug_assert_eq!(hazards.len(), self.len());
        let target = -u.ln();
        if target <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut lo = 0.0;
        let last = hazards.len() - 1;
        for (j, &rate) in hazards.iter().enumerate() {
            if j == last {
                break;
            }
            let hi = self.cuts[j];
            let next = acc + rate * (hi - lo);
            if next >= target {
                return lo + (target - acc) / rate;
            }
            acc = next;
            lo = hi;
        }
        lo + (target - acc) / hazards[last]
    }
}

/// A partition together with one hazard vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwExpModel {
    pub partition: Partition,
    pub hazards: Vec<f64>,
}

impl PwExpModel {
    pub fn new(partition: Partition, hazards: Vec<f64>) -> Result<Self> {
        if hazards.len() != partition.len() {
            return Err(Error::InvalidArgument(format!(
                "{} hazards for {} intervals",
                hazards.len(),
                partition.len()
            )));
        }
        if hazards.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::InvalidArgument(
                "hazards must be positive and finite".into(),
            ));
        }
        Ok(Self { partition, hazards })
    }

    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        self.partition.cumulative_hazard(t, &self.hazards)
    }

    pub fn survival_at(&self, t: f64) -> f64 {
        self.partition.survival_at(t, &self.hazards)
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        self.partition.quantile(u, &self.hazards)
    }
}
