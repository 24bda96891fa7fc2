//! Joint predictive distribution of control and test survival for one new
//! patient, and the summaries of the gain `Y - X`.
//!
//! Each row draws control and test hazards independently from their arm
//! posteriors and one shared survival level `u ~ U(0, 1]`; the patient's
//! times are `x = Q_X(u)` and `y = Q_Y(u)`. The shared `u` is the rank
//! preserving coupling: within a row, `y` is a strictly increasing function
//! of `x`. Drawing `u` carries sampling uncertainty, drawing the hazards
//! carries parameter uncertainty.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pwexp::{sample_hazards, HazardPosterior, Partition};
use crate::stats::{mean, percentile_sorted, sorted};
use crate::stream::StreamSeed;

/// Survival levels below this are raised to it before inversion, so the open
/// last interval never yields an infinite time.
pub const U_FLOOR: f64 = 1e-9;

/// Truncated-row share above which results are flagged.
pub const TRUNCATION_FLAG: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRow {
    pub u: f64,
    pub x: f64,
    pub y: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointGainSample {
    pub rows: Vec<JointRow>,
    /// Rows whose `u` was raised to [`U_FLOOR`].
    pub truncated: usize,
}

impl JointGainSample {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn gains(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gain).collect()
    }
}

/// Equal-quantile map from a control time to the matching test time under
/// fixed hazards.
pub fn couple(x: f64, control: (&Partition, &[f64]), test: (&Partition, &[f64])) -> f64 {
    let u = control.0.survival_at(x, control.1).max(U_FLOOR);
    test.0.quantile_unchecked(u, test.1)
}

/// Draws `n_draws` coupled `(x, y)` pairs. Uses substreams `control`, `test`
/// and `coupling` of `seed`.
pub fn sample_joint<C, T>(
    control: &C,
    test: &T,
    n_draws: usize,
    seed: &StreamSeed,
) -> JointGainSample
where
    C: HazardPosterior + ?Sized,
    T: HazardPosterior + ?Sized,
{
    let hx = sample_hazards(control, n_draws, &seed.derive("control"));
    let hy = sample_hazards(test, n_draws, &seed.derive("test"));
    let coupling = seed.derive("coupling");
    let (px, py) = (control.partition(), test.partition());
    let rows: Vec<(JointRow, bool)> = (0..n_draws)
        .into_par_iter()
        .with_min_len(1024)
        .map(|i| {
            let u = 1.0 - coupling.row_rng(i as u64).random::<f64>();
            let capped = u < U_FLOOR;
            let level = u.max(U_FLOOR);
            let x = px.quantile_unchecked(level, hx.row(i));
            let y = py.quantile_unchecked(level, hy.row(i));
            (
                JointRow {
                    u,
                    x,
                    y,
                    gain: y - x,
                },
                capped,
            )
        })
        .collect();
    let truncated = rows.iter().filter(|r| r.1).count();
    JointGainSample {
        rows: rows.into_iter().map(|r| r.0).collect(),
        truncated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `pr(Y - X > d)` for `d >= 0`.
    Gain,
    /// `pr(Y - X < d)` for `d < 0`.
    Loss,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Gain => "gain",
            Side::Loss => "loss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub d: f64,
    pub prob: f64,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub points: Vec<GainPoint>,
}

/// Evenly spaced grid from `min` to `max` inclusive (within rounding).
pub fn grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    assert!(
        step > 0.0 && min <= max,
        "grid needs step > 0 and min <= max"
    );
    let n = ((max - min) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| {
            let v = min + k as f64 * step;
            (v * 1e9).round() / 1e9
        })
        .collect()
}

/// Share of `sorted` strictly above `d`.
fn share_above(sorted: &[f64], d: f64) -> f64 {
    let at_or_below = sorted.partition_point(|&g| g <= d);
    (sorted.len() - at_or_below) as f64 / sorted.len() as f64
}

fn share_below(sorted: &[f64], d: f64) -> f64 {
    sorted.partition_point(|&g| g < d) as f64 / sorted.len() as f64
}

/// Cumulative gain/loss curve over `d_grid`.
pub fn gain_curve(sample: &JointGainSample, d_grid: &[f64]) -> GainCurve {
    assert!(!sample.is_empty(), "empty joint sample");
    let g = sorted(&sample.gains());
    let points = d_grid
        .iter()
        .map(|&d| {
            if d >= 0.0 {
                GainPoint {
                    d,
                    prob: share_above(&g, d),
                    side: Side::Gain,
                }
            } else {
                GainPoint {
                    d,
                    prob: share_below(&g, d),
                    side: Side::Loss,
                }
            }
        })
        .collect();
    GainCurve { points }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginProb {
    pub margin: f64,
    /// `pr(Y > X + margin)`.
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub interval95: (f64, f64),
    /// `pr(Y > X)`.
    pub pr_positive: f64,
    pub margins: Vec<MarginProb>,
    pub truncated_rows: usize,
    pub truncation_flagged: bool,
}

pub fn summarize(sample: &JointGainSample, margins: &[f64]) -> GainSummary {
    assert!(!sample.is_empty(), "empty joint sample");
    let gains = sample.gains();
    let g = sorted(&gains);
    let n = g.len();
    GainSummary {
        n,
        mean: mean(&gains),
        median: percentile_sorted(&g, 0.5),
        interval95: (percentile_sorted(&g, 0.025), percentile_sorted(&g, 0.975)),
        pr_positive: share_above(&g, 0.0),
        margins: margins
            .iter()
            .map(|&m| MarginProb {
                margin: m,
                prob: share_above(&g, m),
            })
            .collect(),
        truncated_rows: sample.truncated,
        truncation_flagged: sample.truncated as f64 / n as f64 > TRUNCATION_FLAG,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalGainRow {
    pub c: f64,
    pub median: f64,
    pub interval95: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalGain {
    pub rows: Vec<ConditionalGainRow>,
    pub n_draws: usize,
    /// (draw, c) evaluations whose survival level was raised to [`U_FLOOR`].
    pub truncated: usize,
}

/// Gain for a patient whose control survival time is known to be `c`.
///
/// For each posterior draw, `u = S_X(c)` and the gain is `Q_Y(u) - c`; only
/// parameter uncertainty remains. Uses substreams `control` and `test` of
/// `seed`, independent of any joint sample.
pub fn conditional_gain<C, T>(
    control: &C,
    test: &T,
    c_grid: &[f64],
    n_draws: usize,
    seed: &StreamSeed,
) -> ConditionalGain
where
    C: HazardPosterior + ?Sized,
    T: HazardPosterior + ?Sized,
{
    assert!(
        c_grid.iter().all(|&c| c > 0.0),
        "control times must be positive"
    );
    let hx = sample_hazards(control, n_draws, &seed.derive("control"));
    let hy = sample_hazards(test, n_draws, &seed.derive("test"));
    let (px, py) = (control.partition(), test.partition());
    let mut truncated = 0;
    let rows = c_grid
        .iter()
        .map(|&c| {
            let evals: Vec<(f64, bool)> = (0..n_draws)
                .into_par_iter()
                .with_min_len(1024)
                .map(|i| {
                    let u = px.survival_at(c, hx.row(i));
                    let y = py.quantile_unchecked(u.max(U_FLOOR), hy.row(i));
                    (y - c, u < U_FLOOR)
                })
                .collect();
            truncated += evals.iter().filter(|e| e.1).count();
            let g = sorted(&evals.iter().map(|e| e.0).collect::<Vec<_>>());
            ConditionalGainRow {
                c,
                median: percentile_sorted(&g, 0.5),
                interval95: (percentile_sorted(&g, 0.025), percentile_sorted(&g, 0.975)),
            }
        })
        .collect();
    ConditionalGain {
        rows,
        n_draws,
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwexp::{fit, GammaPrior, PinnedHazards};
    use crate::survival_data::{validate_dataset, SurvivalDataset, SurvivalRecord};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp_data(n: usize, rate: f64, seed: u64) -> SurvivalDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = (0..n)
            .map(|_| {
                let t = -(1.0 - rng.random::<f64>()).ln() / rate;
                if t > 24.0 {
                    SurvivalRecord::new(24.0, false)
                } else {
                    SurvivalRecord::new(t, true)
                }
            })
            .collect();
        validate_dataset("exp", recs).unwrap()
    }

    #[test]
    fn pinned_coupling_doubles_time() {
        let s = sample_joint(
            &PinnedHazards::exponential(0.2),
            &PinnedHazards::exponential(0.1),
            5_000,
            &StreamSeed::root(1),
        );
        for r in &s.rows {
            assert!((r.y - 2.0 * r.x).abs() <= 1e-12 * r.y.max(1.0));
            assert_eq!(r.gain, r.y - r.x);
        }
    }

    #[test]
    fn joint_sample_is_deterministic() {
        let f = fit(
            &exp_data(100, 0.1, 3),
            &Partition::new(vec![5.0]).unwrap(),
            GammaPrior::default(),
        );
        let seed = StreamSeed::root(17);
        assert_eq!(
            sample_joint(&f, &f, 2_000, &seed),
            sample_joint(&f, &f, 2_000, &seed)
        );
    }

    #[test]
    fn gain_curve_sides_and_zero_entry() {
        let f = fit(
            &exp_data(150, 0.1, 4),
            &Partition::exponential(),
            GammaPrior::default(),
        );
        let t = f.scale_hazards(0.7);
        let s = sample_joint(&f, &t, 20_000, &StreamSeed::root(2));
        let curve = gain_curve(&s, &grid(-6.0, 12.0, 0.5));
        let summary = summarize(&s, &[3.0]);
        let zero = curve.points.iter().find(|p| p.d == 0.0).unwrap();
        assert_eq!(zero.prob, summary.pr_positive);
        assert_eq!(zero.side, Side::Gain);
        for w in curve.points.windows(2) {
            match (w[0].side, w[1].side) {
                (Side::Gain, Side::Gain) => assert!(w[1].prob <= w[0].prob),
                (Side::Loss, Side::Loss) => assert!(w[1].prob >= w[0].prob),
                _ => {}
            }
        }
        assert!(curve.points.iter().all(|p| (0.0..=1.0).contains(&p.prob)));
    }

    #[test]
    fn dominated_test_arm_has_empty_gain_tail() {
        let s = sample_joint(
            &PinnedHazards::exponential(0.1),
            &PinnedHazards::exponential(0.3),
            10_000,
            &StreamSeed::root(5),
        );
        let curve = gain_curve(&s, &[1.0, 10.0]);
        assert!(curve.points.iter().all(|p| p.prob == 0.0));
    }

    #[test]
    fn summary_ordering_and_margins() {
        let f = fit(
            &exp_data(200, 0.08, 9),
            &Partition::new(vec![6.0]).unwrap(),
            GammaPrior::default(),
        );
        let s = sample_joint(&f, &f.scale_hazards(0.6), 10_000, &StreamSeed::root(6));
        let sm = summarize(&s, &[0.0, 1.0, 3.0, 6.0]);
        assert!(sm.interval95.0 <= sm.median && sm.median <= sm.interval95.1);
        assert!(sm.margins.windows(2).all(|w| w[1].prob <= w[0].prob));
        assert_eq!(sm.margins[0].prob, sm.pr_positive);
        assert_eq!(sm.truncated_rows, 0);
        assert!(!sm.truncation_flagged);
    }

    #[test]
    fn conditional_gain_pinned() {
        let cg = conditional_gain(
            &PinnedHazards::exponential(0.2),
            &PinnedHazards::exponential(0.1),
            &[5.0],
            1_000,
            &StreamSeed::root(1),
        );
        let r = cg.rows[0];
        assert!((r.median - 5.0).abs() < 1e-12);
        assert!((r.interval95.1 - r.interval95.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_gain_identical_arms_centered() {
        let f = fit(
            &exp_data(200, 0.1, 12),
            &Partition::new(vec![4.0, 9.0]).unwrap(),
            GammaPrior::default(),
        );
        let cg = conditional_gain(&f, &f, &[2.0, 6.0, 12.0], 20_000, &StreamSeed::root(8));
        for r in cg.rows {
            assert!(r.interval95.0 < 0.0 && r.interval95.1 > 0.0);
            assert!(r.median.abs() < 0.05 * r.c, "{r:?}");
        }
    }

    #[test]
    fn grid_is_exact() {
        let g = grid(-12.0, 36.0, 0.5);
        assert_eq!(g.len(), 97);
        assert_eq!(g[24], 0.0);
        assert_eq!(*g.last().unwrap(), 36.0);
    }

    #[test]
    fn couple_is_increasing() {
        let px = Partition::new(vec![2.0, 5.0]).unwrap();
        let py = Partition::new(vec![3.0]).unwrap();
        let hx = [0.3, 0.1, 0.2];
        let hy = [0.05, 0.4];
        let ys: Vec<f64> = (1..200)
            .map(|k| couple(k as f64 * 0.1, (&px, &hx), (&py, &hy)))
            .collect();
        assert!(ys.windows(2).all(|w| w[1] > w[0]));
    }
}
