use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::select::DicStats;
use super::Partition;
use crate::stream::{RowRng, StreamSeed};
use crate::survival_data::SurvivalDataset;
use crate::{Error, Result};

/// Gamma(shape, rate) prior on one interval hazard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0 && rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma prior needs positive finite shape and rate, got ({shape}, {rate})"
            )));
        }
        Ok(Self { shape, rate })
    }
}

impl Default for GammaPrior {
    fn default() -> Self {
        Self {
            shape: 0.01,
            rate: 0.01,
        }
    }
}

pub type GammaParams = GammaPrior;

/// Sufficient statistics of the piecewise-exponential likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCounts {
    pub events: Vec<u64>,
    /// Person-months accrued inside each interval.
    pub exposure: Vec<f64>,
}

pub fn interval_counts(dataset: &SurvivalDataset, partition: &Partition) -> IntervalCounts {
    let j = partition.len();
    let mut events = vec![0u64; j];
    let mut exposure = vec![0.0; j];
    for r in dataset.records() {
        for (k, e) in exposure.iter_mut().enumerate() {
            let (lo, hi) = partition.bounds(k);
            if r.time <= lo {
                break;
            }
            *e += r.time.min(hi) - lo;
        }
        if r.event {
            events[partition.event_interval(r.time)] += 1;
        }
    }
    IntervalCounts { events, exposure }
}

/// Conjugate posterior of one arm under a given partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub partition: Partition,
    pub priors: Vec<GammaPrior>,
    pub counts: IntervalCounts,
    pub posterior: Vec<GammaParams>,
    /// Filled in by model selection.
    pub dic: Option<DicStats>,
}

/// Gamma(shape + d_j, rate + E_j) per interval, with one shared prior.
pub fn fit(dataset: &SurvivalDataset, partition: &Partition, prior: GammaPrior) -> ModelFit {
    let counts = interval_counts(dataset, partition);
    fit_counts(partition.clone(), vec![prior; partition.len()], counts)
}

pub fn fit_counts(
    partition: Partition,
    priors: Vec<GammaPrior>,
    counts: IntervalCounts,
) -> ModelFit {
    assert_eq!(priors.len(), partition.len());
    assert_eq!(counts.events.len(), partition.len());
    let posterior = priors
        .iter()
        .zip(counts.events.iter().zip(&counts.exposure))
        .map(|(p, (&d, &e))| GammaParams {
            shape: p.shape + d as f64,
            rate: p.rate + e,
        })
        .collect();
    ModelFit {
        partition,
        priors,
        counts,
        posterior,
        dic: None,
    }
}

impl ModelFit {
    pub fn posterior_mean(&self) -> Vec<f64> {
        self.posterior.iter().map(|g| g.shape / g.rate).collect()
    }

    pub fn posterior_variance(&self) -> Vec<f64> {
        self.posterior
            .iter()
            .map(|g| g.shape / (g.rate * g.rate))
            .collect()
    }

    /// The same posterior with every hazard multiplied by `factor`.
    pub fn scale_hazards(&self, factor: f64) -> ModelFit {
        let mut out = self.clone();
        for g in &mut out.posterior {
            g.rate /= factor;
        }
        out.dic = None;
        out
    }
}

/// Anything that can produce a random hazard vector on a fixed partition.
pub trait HazardPosterior: Sync {
    fn partition(&self) -> &Partition;
    fn draw(&self, rng: &mut RowRng, out: &mut [f64]);
}

impl HazardPosterior for ModelFit {
    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn draw(&self, rng: &mut RowRng, out: &mut [f64]) {
        for (slot, g) in out.iter_mut().zip(&self.posterior) {
            // standard draw divided by the rate, so rescaling the rate rescales
            // the draw exactly under a matched stream
            let unit = Gamma::new(g.shape, 1.0).expect("posterior shape is positive");
            let value = unit.sample(rng) / g.rate;
            // tiny shapes (prior-only intervals) can underflow to zero
            *slot = value.max(f64::MIN_POSITIVE);
        }
    }
}

/// Degenerate posterior: every draw returns the same hazards.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnedHazards {
    pub partition: Partition,
    pub hazards: Vec<f64>,
}

impl PinnedHazards {
    pub fn exponential(rate: f64) -> Self {
        Self {
            partition: Partition::exponential(),
            hazards: vec![rate],
        }
    }
}

impl HazardPosterior for PinnedHazards {
    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn draw(&self, _rng: &mut RowRng, out: &mut [f64]) {
        out.copy_from_slice(&self.hazards);
    }
}

/// `n_draws x J` hazard matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub partition: Partition,
    n_draws: usize,
    values: Vec<f64>,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_intervals(&self) -> usize {
        self.partition.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let j = self.partition.len();
        &self.values[i * j..(i + 1) * j]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.values.chunks_exact(self.partition.len())
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let j = self.partition.len();
        let mut m = vec![0.0; j];
        for row in self.rows() {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n_draws as f64);
        m
    }
}

/// Independent posterior draws; row `i` comes from substream `i` of `seed`,
/// so the matrix does not depend on the number of worker threads.
pub fn sample_hazards<P: HazardPosterior + ?Sized>(
    posterior: &P,
    n_draws: usize,
    seed: &StreamSeed,
) -> PosteriorDraws {
    assert!(n_draws >= 1, "n_draws must be at least 1");
    let partition = posterior.partition().clone();
    let j = partition.len();
    let mut values = vec![0.0; n_draws * j];
    values
        .par_chunks_mut(j)
        .with_min_len(256)
        .enumerate()
        .for_each(|(i, row)| {
            let mut rng = seed.row_rng(i as u64);
            posterior.draw(&mut rng, row);
        });
    PosteriorDraws {
        partition,
        n_draws,
        values,
    }
}
