//! Deviance, DIC and partition selection.

use serde::{Deserialize, Serialize};

use super::posterior::{fit, sample_hazards, GammaPrior, IntervalCounts, ModelFit, PosteriorDraws};
use super::Partition;
use crate::stats::{percentile_sorted, sorted};
use crate::stream::StreamSeed;
use crate::survival_data::SurvivalDataset;

/// `-2 * sum_j (d_j ln(lambda_j) - lambda_j E_j)`, the piecewise-exponential
/// log-likelihood with its data-only constant set to zero.
pub fn deviance(hazards: &[f64], counts: &IntervalCounts) -> f64 {
    let mut ll = 0.0;
    for ((&rate, &d), &e) in hazards.iter().zip(&counts.events).zip(&counts.exposure) {
        if d > 0 {
            ll += d as f64 * rate.ln();
        }
        ll -= rate * e;
    }
    -2.0 * ll
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DicStats {
    pub dic: f64,
    /// Effective number of parameters, `mean D - D(mean lambda)`.
    pub p_d: f64,
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
}

/// `DIC = 2 mean(D) - D(mean lambda)` with the mean taken over `draws`.
pub fn dic(fit: &ModelFit, draws: &PosteriorDraws) -> DicStats {
    let mean_deviance = draws
        .rows()
        .map(|row| deviance(row, &fit.counts))
        .sum::<f64>()
        / draws.n_draws() as f64;
    let deviance_at_mean = deviance(&draws.mean(), &fit.counts);
    DicStats {
        dic: 2.0 * mean_deviance - deviance_at_mean,
        p_d: mean_deviance - deviance_at_mean,
        mean_deviance,
        deviance_at_mean,
    }
}

/// Candidate partitions with `J` intervals for every `J` in `intervals`,
/// cutting at the `k/J` quantiles of the observed event times. Coinciding
/// cuts are merged, and a candidate that collapses onto an earlier one is
/// dropped.
pub fn candidate_partitions(
    dataset: &SurvivalDataset,
    intervals: std::ops::RangeInclusive<usize>,
) -> Vec<Partition> {
    let events = sorted(&dataset.event_times().collect::<Vec<_>>());
    let last_event = *events.last().expect("validated dataset has events");
    let mut out: Vec<Partition> = Vec::new();
    for j in intervals {
        if j == 0 {
            continue;
        }
        let mut cuts: Vec<f64> = (1..j)
            .map(|k| percentile_sorted(&events, k as f64 / j as f64))
            .filter(|&c| c > 0.0 && c < last_event)
            .collect();
        cuts.dedup();
        let p = Partition::new(cuts).expect("quantile cuts are increasing");
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionOptions {
    pub prior: GammaPrior,
    /// Posterior draws used for each candidate's DIC.
    pub dic_draws: usize,
    /// Candidates within this many DIC units of the best count as tied; the
    /// one with the fewest intervals wins.
    pub tie_window: f64,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            prior: GammaPrior::default(),
            dic_draws: 10_000,
            tie_window: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DicRow {
    pub n_intervals: usize,
    pub cuts: Vec<f64>,
    pub dic: f64,
    pub p_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// The chosen fit, with `dic` filled in.
    pub fit: ModelFit,
    pub chosen: usize,
    pub table: Vec<DicRow>,
}

/// Fits every candidate, scores it by DIC, and keeps the most parsimonious
/// candidate within `tie_window` of the minimum.
pub fn select_model(
    dataset: &SurvivalDataset,
    candidates: &[Partition],
    options: &SelectionOptions,
    seed: &StreamSeed,
) -> Selection {
    assert!(!candidates.is_empty(), "at least one candidate partition");
    let fits: Vec<ModelFit> = candidates
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut f = fit(dataset, p, options.prior);
            let draws = sample_hazards(
                &f,
                options.dic_draws,
                &seed.derive(&format!("candidate-{i}")),
            );
            f.dic = Some(dic(&f, &draws));
            f
        })
        .collect();
    let score = |f: &ModelFit| f.dic.map_or(f64::INFINITY, |d| d.dic);
    let best = fits.iter().map(score).fold(f64::INFINITY, f64::min);
    let chosen = (0..fits.len())
        .filter(|&i| score(&fits[i]) <= best + options.tie_window)
        .min_by(|&a, &b| {
            fits[a]
                .partition
                .len()
                .cmp(&fits[b].partition.len())
                .then(score(&fits[a]).total_cmp(&score(&fits[b])))
        })
        .expect("non-empty candidate set");
    let table = fits
        .iter()
        .map(|f| {
            let d = f.dic.expect("scored above");
            DicRow {
                n_intervals: f.partition.len(),
                cuts: f.partition.cuts().to_vec(),
                dic: d.dic,
                p_d: d.p_d,
            }
        })
        .collect();
    Selection {
        fit: fits[chosen].clone(),
        chosen,
        table,
    }
}
