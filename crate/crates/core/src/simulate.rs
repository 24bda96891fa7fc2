//! Synthetic trial arms drawn from a known piecewise-exponential law.
//!
//! Times are generated interval by interval with exponential waiting times,
//! without going through the closed-form quantile, so these samples can also
//! serve as an independent reference for the inversion-based samplers.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::pwexp::Partition;
use crate::survival_data::SurvivalRecord;

/// One event time from the law `(partition, hazards)`.
pub fn draw_time<R: Rng + ?Sized>(partition: &Partition, hazards: &[f64], rng: &mut R) -> f64 {
    for (j, &rate) in hazards.iter().enumerate() {
        let (lo, hi) = partition.bounds(j);
        let wait = Exp::new(rate).expect("positive hazard").sample(rng);
        if lo + wait < hi {
            return lo + wait;
        }
    }
    unreachable!("last interval is unbounded")
}

/// `n` subjects with event times from the law, administratively censored at
/// `follow_up` months.
pub fn simulate_arm<R: Rng + ?Sized>(
    partition: &Partition,
    hazards: &[f64],
    n: usize,
    follow_up: f64,
    rng: &mut R,
) -> Vec<SurvivalRecord> {
    (0..n)
        .map(|_| {
            let t = draw_time(partition, hazards, rng);
            if t > follow_up {
                SurvivalRecord::new(follow_up, false)
            } else {
                SurvivalRecord::new(t, true)
            }
        })
        .collect()
}

/// Noise-free arm: subject `i` of `n` fails at the `(i + 0.5) / n` survival
/// quantile of the law, censored at `follow_up`. Two arms sharing a law on
/// `[0, t]` get identical records there.
pub fn quantile_arm(
    partition: &Partition,
    hazards: &[f64],
    n: usize,
    follow_up: f64,
) -> Vec<SurvivalRecord> {
    (0..n)
        .map(|i| {
            let u = 1.0 - (i as f64 + 0.5) / n as f64;
            let t = partition.quantile_unchecked(u, hazards);
            if t > follow_up {
                SurvivalRecord::new(follow_up, false)
            } else {
                SurvivalRecord::new(t, true)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empirical_survival_matches_law() {
        let p = Partition::new(vec![4.0]).unwrap();
        let hz = [0.2, 0.05];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 50_000;
        let times: Vec<f64> = (0..n).map(|_| draw_time(&p, &hz, &mut rng)).collect();
        for t in [1.0, 4.0, 10.0] {
            let emp = times.iter().filter(|&&x| x > t).count() as f64 / n as f64;
            assert!((emp - p.survival_at(t, &hz)).abs() < 0.01, "t={t}");
        }
    }

    #[test]
    fn quantile_arms_share_early_records() {
        let a = quantile_arm(&Partition::exponential(), &[0.1], 100, 36.0);
        let b = quantile_arm(&Partition::new(vec![4.0]).unwrap(), &[0.1, 0.05], 100, 36.0);
        let early = |v: &[SurvivalRecord]| v.iter().filter(|r| r.time < 4.0).count();
        assert_eq!(early(&a), early(&b));
        for (x, y) in a.iter().zip(&b).filter(|(x, _)| x.time < 4.0) {
            assert!((x.time - y.time).abs() < 1e-12);
        }
    }

    #[test]
    fn censoring_at_follow_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let recs = simulate_arm(&Partition::exponential(), &[0.5], 200, 1.0, &mut rng);
        assert!(recs.iter().all(|r| r.time <= 1.0));
        assert!(recs.iter().any(|r| !r.event && r.time == 1.0));
    }
}
