//! Pseudo individual patient data from a digitized Kaplan-Meier figure and
//! its published numbers-at-risk table.
//!
//! Works one risk-table interval at a time. Within an interval the number of
//! censorings is chosen so that events (read off the survival drops) plus
//! censorings exhaust exactly the drop in the at-risk count; censorings are
//! spread uniformly over the interval. After the last table time, events come
//! from the survival drops (matched to `total_events` when known) and the
//! remaining subjects are censored at the last digitized time.

use serde::{Deserialize, Serialize};

use super::{validate_dataset, KmCurve, SurvivalDataset, SurvivalRecord};
use crate::stats::isotonic_non_increasing;
use crate::{Error, Result};

/// Largest shift the monotone repair may apply to a single coordinate.
pub const MAX_REPAIR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub time: f64,
    pub survival: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPoint {
    pub time: f64,
    pub n_risk: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitizedCurve {
    pub coords: Vec<CurvePoint>,
    pub risk_table: Vec<RiskPoint>,
    pub total_events: Option<u64>,
}

/// Lossless digitization of a KM curve: both corners of every step, plus the
/// true numbers at risk at `risk_times`.
pub fn digitize_km(km: &KmCurve, dataset: &SurvivalDataset, risk_times: &[f64]) -> DigitizedCurve {
    let mut coords = vec![CurvePoint {
        time: 0.0,
        survival: 1.0,
    }];
    let mut prev = 1.0;
    for s in km.steps.iter().skip(1) {
        coords.push(CurvePoint {
            time: s.time,
            survival: prev,
        });
        coords.push(CurvePoint {
            time: s.time,
            survival: s.survival,
        });
        prev = s.survival;
    }
    if let Some(last) = dataset.records().last() {
        if last.time > coords.last().unwrap().time {
            coords.push(CurvePoint {
                time: last.time,
                survival: prev,
            });
        }
    }
    let risk_table = risk_times
        .iter()
        .map(|&t| RiskPoint {
            time: t,
            n_risk: dataset.at_risk(t) as u64,
        })
        .collect();
    DigitizedCurve {
        coords,
        risk_table,
        total_events: Some(dataset.n_events() as u64),
    }
}

fn check_risk_table(table: &[RiskPoint]) -> Result<()> {
    if table.len() < 2 {
        return Err(Error::InvalidRiskTable(
            "at least two entries are required".into(),
        ));
    }
    if table[0].time != 0.0 {
        return Err(Error::InvalidRiskTable(
            "first entry must be at time 0".into(),
        ));
    }
    if table[0].n_risk == 0 {
        return Err(Error::InvalidRiskTable(
            "no subjects at risk at time 0".into(),
        ));
    }
    for w in table.windows(2) {
        if !(w[1].time.is_finite() && w[1].time > w[0].time) {
            return Err(Error::InvalidRiskTable(
                "times must be finite and strictly increasing".into(),
            ));
        }
        if w[1].n_risk > w[0].n_risk {
            return Err(Error::InconsistentRiskTable {
                time: w[1].time,
                prev: w[0].n_risk,
                next: w[1].n_risk,
            });
        }
    }
    Ok(())
}

/// Sort, clamp and isotonically repair the coordinates, anchor them at
/// `(0, 1)` and collapse vertical segments to their lowest point.
fn repair_coords(raw: &[CurvePoint]) -> Result<Vec<CurvePoint>> {
    if raw.is_empty() {
        return Err(Error::IrreparableCoords("no coordinates".into()));
    }
    for p in raw {
        if !(p.time.is_finite() && p.survival.is_finite()) {
            return Err(Error::IrreparableCoords("non-finite coordinate".into()));
        }
        if p.time < 0.0 {
            return Err(Error::IrreparableCoords(format!(
                "negative time {}",
                p.time
            )));
        }
        if p.survival < -MAX_REPAIR || p.survival > 1.0 + MAX_REPAIR {
            return Err(Error::IrreparableCoords(format!(
                "survival {} outside [0, 1]",
                p.survival
            )));
        }
    }
    let mut pts: Vec<CurvePoint> = raw.to_vec();
    pts.sort_by(|a, b| a.time.total_cmp(&b.time));
    if pts[0].time > 0.0 {
        pts.insert(
            0,
            CurvePoint {
                time: 0.0,
                survival: 1.0,
            },
        );
    }
    let clamped: Vec<f64> = pts.iter().map(|p| p.survival.clamp(0.0, 1.0)).collect();
    let fitted = isotonic_non_increasing(&clamped);
    if let Some((i, shift)) = fitted
        .iter()
        .zip(&clamped)
        .map(|(f, c)| (f - c).abs())
        .enumerate()
        .find(|&(_, d)| d > MAX_REPAIR)
    {
        return Err(Error::IrreparableCoords(format!(
            "point at time {} needs a shift of {shift:.3}",
            pts[i].time
        )));
    }
    let mut out: Vec<CurvePoint> = Vec::with_capacity(pts.len());
    for (p, s) in pts.iter().zip(fitted) {
        match out.last_mut() {
            Some(last) if last.time == p.time => last.survival = last.survival.min(s),
            _ => out.push(CurvePoint {
                time: p.time,
                survival: s,
            }),
        }
    }
    out[0].survival = 1.0;
    Ok(out)
}

/// Result of distributing `n_censor` censorings over one interval.
struct IntervalFill {
    events: Vec<u64>,
    censor_times: Vec<f64>,
}

impl IntervalFill {
    fn total_events(&self) -> u64 {
        self.events.iter().sum()
    }
}

fn uniform_censor_times(start: f64, end: f64, n: u64) -> Vec<f64> {
    (1..=n)
        .map(|j| start + j as f64 * (end - start) / (n + 1) as f64)
        .collect()
}

/// Events at each coordinate given a censoring pattern: the number needed for
/// the reconstructed KM to follow the digitized drop from the last event.
fn fill_events(
    coords: &[CurvePoint],
    n_start: u64,
    censor_times: Vec<f64>,
    km_start: f64,
) -> IntervalFill {
    let mut km = km_start;
    let mut removed = 0u64;
    let mut events = Vec::with_capacity(coords.len());
    for p in coords {
        let censored_before = censor_times.partition_point(|&c| c < p.time) as u64;
        let n_risk = n_start.saturating_sub(removed + censored_before);
        let d = if p.time <= 0.0 || km <= 0.0 || n_risk == 0 {
            0
        } else {
            let raw = (n_risk as f64 * (1.0 - p.survival / km)).round();
            (raw.max(0.0) as u64).min(n_risk)
        };
        if d > 0 {
            km *= 1.0 - d as f64 / n_risk as f64;
            removed += d;
        }
        events.push(d);
    }
    IntervalFill {
        events,
        censor_times,
    }
}

/// Drops events from the latest coordinates until at most `max_events` remain.
fn trim_events(events: &mut [u64], max_events: u64) {
    let mut excess = events.iter().sum::<u64>().saturating_sub(max_events);
    for d in events.iter_mut().rev() {
        if excess == 0 {
            break;
        }
        let take = (*d).min(excess);
        *d -= take;
        excess -= take;
    }
}

fn km_after(
    events: &[u64],
    coords: &[CurvePoint],
    n_start: u64,
    censor_times: &[f64],
    km_start: f64,
) -> f64 {
    let mut km = km_start;
    let mut removed = 0;
    for (p, &d) in coords.iter().zip(events) {
        let n_risk =
            n_start.saturating_sub(removed + censor_times.partition_point(|&c| c < p.time) as u64);
        if d > 0 && n_risk > 0 {
            km *= 1.0 - d as f64 / n_risk as f64;
        }
        removed += d;
    }
    km
}

/// Pick the censoring count in `0..=max` whose score is smallest, breaking
/// ties toward `guess`.
fn best_count(max: u64, guess: i64, mut score: impl FnMut(u64) -> u64) -> u64 {
    (0..=max)
        .min_by_key(|&c| (score(c), (c as i64 - guess).unsigned_abs()))
        .unwrap_or(0)
}

/// Reconstructs pseudo patient records whose Kaplan-Meier curve follows the
/// digitized coordinates and whose at-risk counts equal the risk table at
/// every table time. Deterministic.
pub fn reconstruct_ipd(curve: &DigitizedCurve, arm_label: &str) -> Result<SurvivalDataset> {
    check_risk_table(&curve.risk_table)?;
    let coords = repair_coords(&curve.coords)?;
    let table = &curve.risk_table;
    let t_end = coords.last().unwrap().time;
    let last_table = table.last().unwrap();
    if last_table.n_risk > 0 && last_table.time > t_end {
        return Err(Error::InvalidRiskTable(format!(
            "coordinates end at {t_end} but {} subjects are at risk at {}",
            last_table.n_risk, last_table.time
        )));
    }

    let mut records = Vec::new();
    let mut km = 1.0;
    let mut events_so_far = 0u64;

    for (i, start) in table.iter().enumerate() {
        let next = table.get(i + 1);
        let upper = next.map_or(f64::INFINITY, |n| n.time);
        let pts: Vec<CurvePoint> = coords
            .iter()
            .copied()
            .filter(|p| p.time >= start.time && p.time < upper)
            .collect();
        let n_start = start.n_risk;
        if n_start == 0 {
            break;
        }

        let (events, censor_times, tail) = match next {
            Some(next) => {
                let removals = n_start - next.n_risk;
                let s_start = survival_at(&coords, start.time);
                let s_next = survival_at(&coords, next.time);
                let guess = if s_start > 0.0 {
                    (n_start as f64 * s_next / s_start - next.n_risk as f64).round() as i64
                } else {
                    0
                };
                let eval = |c: u64| {
                    fill_events(
                        &pts,
                        n_start,
                        uniform_censor_times(start.time, next.time, c),
                        km,
                    )
                };
                let c = best_count(removals, guess, |c| {
                    (eval(c).total_events() + c).abs_diff(removals)
                });
                let mut fill = eval(c);
                // force exact agreement with the table
                trim_events(&mut fill.events, removals);
                let n_censor = removals - fill.total_events();
                let censor_times = uniform_censor_times(start.time, next.time, n_censor);
                (fill.events, censor_times, 0)
            }
            None => {
                let extra_censor = t_end > start.time;
                let fill = match curve.total_events {
                    Some(total) if extra_censor => {
                        let target = total.saturating_sub(events_so_far);
                        let eval = |c: u64| {
                            fill_events(
                                &pts,
                                n_start,
                                uniform_censor_times(start.time, t_end, c),
                                km,
                            )
                        };
                        let c = best_count(n_start, 0, |c| eval(c).total_events().abs_diff(target));
                        eval(c)
                    }
                    _ => fill_events(&pts, n_start, Vec::new(), km),
                };
                let mut events = fill.events;
                if let Some(total) = curve.total_events {
                    trim_events(&mut events, total.saturating_sub(events_so_far));
                }
                let used = events.iter().sum::<u64>() + fill.censor_times.len() as u64;
                (events, fill.censor_times, n_start.saturating_sub(used))
            }
        };

        km = km_after(&events, &pts, n_start, &censor_times, km);
        for (p, &d) in pts.iter().zip(&events) {
            records.extend(std::iter::repeat_n(
                SurvivalRecord::new(p.time, true),
                d as usize,
            ));
        }
        events_so_far += events.iter().sum::<u64>();
        records.extend(censor_times.iter().map(|&t| SurvivalRecord::new(t, false)));
        records.extend(std::iter::repeat_n(
            SurvivalRecord::new(t_end, false),
            tail as usize,
        ));
    }
    validate_dataset(arm_label, records)
}

fn survival_at(coords: &[CurvePoint], t: f64) -> f64 {
    let i = coords.partition_point(|p| p.time <= t);
    if i == 0 {
        1.0
    } else {
        coords[i - 1].survival
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival_data::km_estimate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(n: usize, seed: u64, censor: bool) -> SurvivalDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = (0..n)
            .map(|_| {
                let t: f64 = -(1.0 - rng.random::<f64>()).ln() / 0.15;
                let t = (t * 10.0).round() / 10.0 + 0.1;
                if censor {
                    let c = 2.0 + 20.0 * rng.random::<f64>();
                    let c = (c * 10.0).round() / 10.0 + 0.05;
                    if c < t {
                        return SurvivalRecord::new(c, false);
                    }
                }
                SurvivalRecord::new(t, true)
            })
            .collect();
        validate_dataset("synthetic", recs).unwrap()
    }

    fn risk_times(step: f64, until: f64) -> Vec<f64> {
        let mut v = vec![0.0];
        while v.last().unwrap() + step <= until {
            v.push(v.last().unwrap() + step);
        }
        v
    }

    fn max_gap_at(a: &KmCurve, b: &KmCurve, times: impl Iterator<Item = f64>) -> f64 {
        times
            .map(|t| (a.survival_at(t) - b.survival_at(t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn round_trip_20_subjects() {
        let original = synthetic(20, 3, true);
        let km = km_estimate(&original);
        let dig = digitize_km(&km, &original, &risk_times(3.0, 18.0));
        let rec = reconstruct_ipd(&dig, "rec").unwrap();
        let km_rec = km_estimate(&rec);
        let gap = max_gap_at(&km, &km_rec, dig.coords.iter().map(|p| p.time));
        assert!(gap <= 0.02, "gap {gap}");
        for r in &dig.risk_table {
            assert_eq!(rec.at_risk(r.time) as u64, r.n_risk, "at t={}", r.time);
        }
        assert_eq!(rec.len(), original.len());
    }

    #[test]
    fn complete_data_recovers_event_times() {
        let original = synthetic(40, 11, false);
        let km = km_estimate(&original);
        let dig = digitize_km(&km, &original, &risk_times(4.0, 20.0));
        let rec = reconstruct_ipd(&dig, "rec").unwrap();
        let times: Vec<f64> = rec
            .records()
            .iter()
            .filter(|r| r.event)
            .map(|r| r.time)
            .collect();
        let orig: Vec<f64> = original.records().iter().map(|r| r.time).collect();
        assert_eq!(times, orig);
    }

    #[test]
    fn increasing_counts_rejected() {
        let dig = DigitizedCurve {
            coords: vec![
                CurvePoint {
                    time: 0.0,
                    survival: 1.0,
                },
                CurvePoint {
                    time: 6.0,
                    survival: 0.5,
                },
            ],
            risk_table: vec![
                RiskPoint {
                    time: 0.0,
                    n_risk: 10,
                },
                RiskPoint {
                    time: 6.0,
                    n_risk: 12,
                },
            ],
            total_events: None,
        };
        assert!(matches!(
            reconstruct_ipd(&dig, "x"),
            Err(Error::InconsistentRiskTable {
                prev: 10,
                next: 12,
                ..
            })
        ));
    }

    #[test]
    fn small_upward_jump_is_repaired() {
        let original = synthetic(30, 5, true);
        let km = km_estimate(&original);
        let mut dig = digitize_km(&km, &original, &risk_times(3.0, 15.0));
        let k = dig.coords.len() / 2;
        dig.coords[k].survival += 0.005;
        let repaired = repair_coords(&dig.coords).unwrap();
        assert!(repaired.windows(2).all(|w| w[1].survival <= w[0].survival));
        let oracle =
            isotonic_non_increasing(&dig.coords.iter().map(|p| p.survival).collect::<Vec<_>>());
        let raw_max = dig
            .coords
            .iter()
            .zip(&oracle)
            .map(|(p, o)| (p.survival - o).abs())
            .fold(0.0, f64::max);
        assert!(raw_max <= 0.005);
        let rec = reconstruct_ipd(&dig, "rec").unwrap();
        for r in &dig.risk_table {
            assert_eq!(rec.at_risk(r.time) as u64, r.n_risk);
        }
        let gap = max_gap_at(&km, &km_estimate(&rec), dig.coords.iter().map(|p| p.time));
        assert!(gap <= 0.02, "gap {gap}");
    }

    #[test]
    fn large_inversion_is_irreparable() {
        let coords = vec![
            CurvePoint {
                time: 0.0,
                survival: 1.0,
            },
            CurvePoint {
                time: 1.0,
                survival: 0.5,
            },
            CurvePoint {
                time: 2.0,
                survival: 0.8,
            },
            CurvePoint {
                time: 3.0,
                survival: 0.4,
            },
        ];
        assert!(matches!(
            repair_coords(&coords),
            Err(Error::IrreparableCoords(_))
        ));
    }

    #[test]
    fn deterministic() {
        let original = synthetic(50, 8, true);
        let km = km_estimate(&original);
        let dig = digitize_km(&km, &original, &risk_times(5.0, 20.0));
        assert_eq!(
            reconstruct_ipd(&dig, "a").unwrap(),
            reconstruct_ipd(&dig, "a").unwrap()
        );
    }

    #[test]
    fn structural_risk_table_errors() {
        let coords = vec![
            CurvePoint {
                time: 0.0,
                survival: 1.0,
            },
            CurvePoint {
                time: 5.0,
                survival: 0.5,
            },
        ];
        let one = DigitizedCurve {
            coords: coords.clone(),
            risk_table: vec![RiskPoint {
                time: 0.0,
                n_risk: 10,
            }],
            total_events: None,
        };
        assert!(matches!(
            reconstruct_ipd(&one, "x"),
            Err(Error::InvalidRiskTable(_))
        ));
        let late = DigitizedCurve {
            coords,
            risk_table: vec![
                RiskPoint {
                    time: 0.0,
                    n_risk: 10,
                },
                RiskPoint {
                    time: 9.0,
                    n_risk: 4,
                },
            ],
            total_events: None,
        };
        assert!(matches!(
            reconstruct_ipd(&late, "x"),
            Err(Error::InvalidRiskTable(_))
        ));
    }
}
