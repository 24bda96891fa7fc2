//! Arm-level time-to-event data: validation, Kaplan-Meier estimation and CSV
//! ingest. Times are in months.

mod io;
mod reconstruct;

pub use io::{read_arm_csv, read_coords_csv, read_risk_csv, write_arm_csv, ArmRow};
pub use reconstruct::{digitize_km, reconstruct_ipd, CurvePoint, DigitizedCurve, RiskPoint};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub time: f64,
    /// `true` when the event was observed, `false` when right-censored.
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool) -> Self {
        Self { time, event }
    }
}

/// One arm's validated records, sorted by time.
///
/// Always non-empty, all times finite and positive, at least one event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalDataset {
    arm_label: String,
    records: Vec<SurvivalRecord>,
}

impl SurvivalDataset {
    pub fn arm_label(&self) -> &str {
        &self.arm_label
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn event_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().filter(|r| r.event).map(|r| r.time)
    }

    pub fn total_time(&self) -> f64 {
        self.records.iter().map(|r| r.time).sum()
    }

    /// Number of subjects still under observation at `t` (time >= t).
    pub fn at_risk(&self, t: f64) -> usize {
        let first = self.records.partition_point(|r| r.time < t);
        self.records.len() - first
    }
}

/// Validates raw records and sorts them by time (stable, so input order is
/// kept among equal times).
pub fn validate_dataset(
    arm_label: impl Into<String>,
    mut records: Vec<SurvivalRecord>,
) -> Result<SurvivalDataset> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(i) = records
        .iter()
        .position(|r| !(r.time.is_finite() && r.time > 0.0))
    {
        return Err(Error::NonPositiveTime(i));
    }
    if !records.iter().any(|r| r.event) {
        return Err(Error::NoEvents);
    }
    records.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(SurvivalDataset {
        arm_label: arm_label.into(),
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmStep {
    pub time: f64,
    pub survival: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtRisk {
    pub time: f64,
    pub count: u64,
}

/// Product-limit survival curve.
///
/// `steps` starts at `(0, 1)` and has one entry per distinct event time with
/// the survival just after it. `at_risk` has one entry per distinct observed
/// time (events or censorings), again preceded by time 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub steps: Vec<KmStep>,
    pub at_risk: Vec<AtRisk>,
    /// `(time, survival, n_risk)` at every distinct observed time, for plotting.
    pub table: Vec<(f64, f64, u64)>,
}

impl KmCurve {
    /// Right-continuous step evaluation.
    pub fn survival_at(&self, t: f64) -> f64 {
        let i = self.steps.partition_point(|s| s.time <= t);
        if i == 0 {
            1.0
        } else {
            self.steps[i - 1].survival
        }
    }

    /// Time where survival first drops to or below `level`, if it does.
    pub fn quantile_time(&self, level: f64) -> Option<f64> {
        self.steps
            .iter()
            .find(|s| s.survival <= level)
            .map(|s| s.time)
    }
}

/// Kaplan-Meier estimate. At tied times, events are processed before
/// censorings, so censored subjects count as at risk for those events.
pub fn km_estimate(dataset: &SurvivalDataset) -> KmCurve {
    let records = dataset.records();
    let n = records.len() as u64;
    let mut steps = vec![KmStep {
        time: 0.0,
        survival: 1.0,
    }];
    let mut at_risk = vec![AtRisk {
        time: 0.0,
        count: n,
    }];
    let mut table = vec![(0.0, 1.0, n)];
    let mut surv = 1.0;
    let mut i = 0;
    while i < records.len() {
        let t = records[i].time;
        let n_risk = (records.len() - i) as u64;
        let mut deaths = 0u64;
        let mut j = i;
        while j < records.len() && records[j].time == t {
            deaths += u64::from(records[j].event);
            j += 1;
        }
        if deaths > 0 {
            surv *= 1.0 - deaths as f64 / n_risk as f64;
            steps.push(KmStep {
                time: t,
                survival: surv,
            });
        }
        at_risk.push(AtRisk {
            time: t,
            count: n_risk,
        });
        table.push((t, surv, n_risk));
        i = j;
    }
    KmCurve {
        steps,
        at_risk,
        table,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(raw: &[(f64, bool)]) -> SurvivalDataset {
        validate_dataset(
            "arm",
            raw.iter()
                .map(|&(t, e)| SurvivalRecord::new(t, e))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn validate_sorts() {
        let d = ds(&[(5.0, true), (2.0, false)]);
        assert_eq!(
            d.records(),
            &[
                SurvivalRecord::new(2.0, false),
                SurvivalRecord::new(5.0, true)
            ]
        );
    }

    #[test]
    fn validate_rejects() {
        let v = |raw: Vec<(f64, bool)>| {
            validate_dataset(
                "a",
                raw.into_iter()
                    .map(|(t, e)| SurvivalRecord::new(t, e))
                    .collect(),
            )
        };
        assert!(matches!(
            v(vec![(0.0, true)]),
            Err(Error::NonPositiveTime(0))
        ));
        assert!(matches!(
            v(vec![(1.0, true), (f64::NAN, true)]),
            Err(Error::NonPositiveTime(1))
        ));
        assert!(matches!(
            v(vec![(1.0, true), (-2.0, true)]),
            Err(Error::NonPositiveTime(1))
        ));
        assert!(matches!(
            v(vec![(3.0, false), (4.0, false)]),
            Err(Error::NoEvents)
        ));
        assert!(matches!(v(vec![]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn km_small_cases() {
        let km = km_estimate(&ds(&[(1.0, true), (2.0, false), (3.0, true)]));
        assert!((km.survival_at(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.survival_at(2.5), km.survival_at(1.0));
        assert_eq!(km.survival_at(3.0), 0.0);
        assert_eq!(km.survival_at(0.5), 1.0);

        let km = km_estimate(&ds(&[
            (1.0, true),
            (2.0, false),
            (3.0, false),
            (4.0, false),
        ]));
        assert_eq!(km.survival_at(1.0), 0.75);
        assert_eq!(km.survival_at(10.0), 0.75);

        let km = km_estimate(&ds(&[(1.0, true)]));
        assert_eq!(km.survival_at(1.0), 0.0);
    }

    #[test]
    fn km_ties_events_before_censorings() {
        // at t=2: 3 at risk (including the censored one), 1 death
        let km = km_estimate(&ds(&[(1.0, true), (2.0, false), (2.0, true), (5.0, true)]));
        assert!((km.survival_at(2.0) - 0.5).abs() < 1e-15);
        assert_eq!(
            km.at_risk[2],
            AtRisk {
                time: 2.0,
                count: 3
            }
        );
    }

    #[test]
    fn km_without_censoring_is_empirical() {
        let times = [0.5, 1.5, 1.5, 2.0, 4.0, 7.0, 7.5];
        let d = ds(&times.iter().map(|&t| (t, true)).collect::<Vec<_>>());
        let km = km_estimate(&d);
        for t in [0.1, 0.5, 1.0, 1.5, 3.0, 7.0, 7.4, 8.0] {
            let emp = times.iter().filter(|&&x| x > t).count() as f64 / times.len() as f64;
            assert!((km.survival_at(t) - emp).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn at_risk_counts() {
        let d = ds(&[(1.0, true), (2.0, false), (2.0, true), (5.0, true)]);
        assert_eq!(d.at_risk(0.0), 4);
        assert_eq!(d.at_risk(2.0), 3);
        assert_eq!(d.at_risk(2.1), 1);
        assert_eq!(d.at_risk(6.0), 0);
    }
}
