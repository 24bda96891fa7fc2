//! End-to-end comparison of two arms, and its per-subgroup variant.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::engine::{
    conditional_gain, gain_curve, grid, sample_joint, summarize, ConditionalGain, GainCurve,
    GainSummary,
};
use crate::pwexp::{candidate_partitions, GammaPrior, Selection, SelectionOptions};
use crate::stream::StreamSeed;
use crate::survival_data::{
    km_estimate, validate_dataset, KmCurve, SurvivalDataset, SurvivalRecord,
};
use crate::{Error, Result};

/// Control times at which the conditional gain is reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionalGrid {
    /// From `step` up to the time at which control survival, under the
    /// posterior-mean hazards, falls to 10%.
    Auto {
        step: f64,
    },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    pub prior: GammaPrior,
    pub intervals: RangeInclusive<usize>,
    pub n_draws: usize,
    pub margins: Vec<f64>,
    pub d_grid: Vec<f64>,
    pub c_grid: ConditionalGrid,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            prior: GammaPrior::default(),
            intervals: 1..=5,
            n_draws: 10_000,
            margins: vec![3.0, 6.0],
            d_grid: grid(-12.0, 36.0, 0.5),
            c_grid: ConditionalGrid::Auto { step: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmAnalysis {
    pub label: String,
    pub n: usize,
    pub n_events: usize,
    pub km: KmCurve,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub control: ArmAnalysis,
    pub test: ArmAnalysis,
    pub summary: GainSummary,
    pub curve: GainCurve,
    pub conditional: ConditionalGain,
    pub seed: u64,
}

fn analyze_arm(
    dataset: &SurvivalDataset,
    settings: &AnalysisSettings,
    seed: &StreamSeed,
) -> ArmAnalysis {
    let candidates = candidate_partitions(dataset, settings.intervals.clone());
    let options = SelectionOptions {
        prior: settings.prior,
        dic_draws: settings.n_draws,
        ..SelectionOptions::default()
    };
    ArmAnalysis {
        label: dataset.arm_label().to_string(),
        n: dataset.len(),
        n_events: dataset.n_events(),
        km: km_estimate(dataset),
        selection: crate::pwexp::select_model(dataset, &candidates, &options, seed),
    }
}

fn resolve_c_grid(grid_spec: &ConditionalGrid, control: &ArmAnalysis) -> Vec<f64> {
    match grid_spec {
        ConditionalGrid::Explicit(v) => v.clone(),
        ConditionalGrid::Auto { step } => {
            let fit = &control.selection.fit;
            let t10 = fit.partition.quantile_unchecked(0.1, &fit.posterior_mean());
            if t10 < *step {
                vec![t10]
            } else {
                grid(*step, t10, *step)
            }
        }
    }
}

/// Selects, fits and samples both arms, then derives every gain summary.
///
/// Random streams below the root `seed`: `select/<arm>`, `joint`,
/// `conditional`.
pub fn analyze(
    control: &SurvivalDataset,
    test: &SurvivalDataset,
    settings: &AnalysisSettings,
    seed: u64,
) -> Comparison {
    let root = StreamSeed::root(seed);
    let select = root.derive("select");
    let control_arm = analyze_arm(control, settings, &select.derive("control"));
    let test_arm = analyze_arm(test, settings, &select.derive("test"));
    let (cf, tf) = (&control_arm.selection.fit, &test_arm.selection.fit);
    let joint = sample_joint(cf, tf, settings.n_draws, &root.derive("joint"));
    let c_grid = resolve_c_grid(&settings.c_grid, &control_arm);
    let conditional = conditional_gain(
        cf,
        tf,
        &c_grid,
        settings.n_draws,
        &root.derive("conditional"),
    );
    Comparison {
        summary: summarize(&joint, &settings.margins),
        curve: gain_curve(&joint, &settings.d_grid),
        conditional,
        control: control_arm,
        test: test_arm,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupInput {
    pub id: String,
    pub control: Vec<SurvivalRecord>,
    pub test: Vec<SurvivalRecord>,
}

#[derive(Debug)]
pub struct SubgroupOutcome {
    pub id: String,
    pub result: Result<Comparison>,
}

/// One line of the subgroup comparison table; `summary` is absent when the
/// subgroup failed validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupRow {
    pub id: String,
    pub summary: Option<GainSummary>,
    pub error: Option<String>,
}

fn run_subgroup(
    input: &SubgroupInput,
    settings: &AnalysisSettings,
    seed: u64,
) -> Result<Comparison> {
    let label = |e: Error| Error::Subgroup {
        id: input.id.clone(),
        source: Box::new(e),
    };
    let control =
        validate_dataset(format!("{}/control", input.id), input.control.clone()).map_err(label)?;
    let test = validate_dataset(format!("{}/test", input.id), input.test.clone()).map_err(label)?;
    Ok(analyze(&control, &test, settings, seed))
}

/// Runs [`analyze`] separately in every subgroup, each from the same root
/// seed, so a subgroup's result equals a standalone run on its data. A
/// subgroup that fails validation does not stop the others.
pub fn subgroup_pie(
    groups: &[SubgroupInput],
    settings: &AnalysisSettings,
    seed: u64,
) -> Result<Vec<SubgroupOutcome>> {
    if groups.is_empty() {
        return Err(Error::InvalidArgument("no subgroups given".into()));
    }
    Ok(groups
        .iter()
        .map(|g| SubgroupOutcome {
            id: g.id.clone(),
            result: run_subgroup(g, settings, seed),
        })
        .collect())
}

pub fn subgroup_table(outcomes: &[SubgroupOutcome]) -> Vec<SubgroupRow> {
    outcomes
        .iter()
        .map(|o| match &o.result {
            Ok(c) => SubgroupRow {
                id: o.id.clone(),
                summary: Some(c.summary.clone()),
                error: None,
            },
            Err(e) => SubgroupRow {
                id: o.id.clone(),
                summary: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn records(n: usize, rate: f64, seed: u64) -> Vec<SurvivalRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let t = -(1.0 - rng.random::<f64>()).ln() / rate;
                if t > 30.0 {
                    SurvivalRecord::new(30.0, false)
                } else {
                    SurvivalRecord::new(t, true)
                }
            })
            .collect()
    }

    fn quick() -> AnalysisSettings {
        AnalysisSettings {
            n_draws: 4_000,
            intervals: 1..=3,
            ..AnalysisSettings::default()
        }
    }

    #[test]
    fn single_subgroup_matches_plain_run() {
        let c = records(120, 0.12, 1);
        let t = records(120, 0.08, 2);
        let settings = quick();
        let plain = analyze(
            &validate_dataset("all/control", c.clone()).unwrap(),
            &validate_dataset("all/test", t.clone()).unwrap(),
            &settings,
            42,
        );
        let groups = [SubgroupInput {
            id: "all".into(),
            control: c,
            test: t,
        }];
        let out = subgroup_pie(&groups, &settings, 42).unwrap();
        assert_eq!(out[0].result.as_ref().unwrap(), &plain);
    }

    #[test]
    fn failing_subgroup_is_isolated() {
        let censored: Vec<SurvivalRecord> = (1..10)
            .map(|i| SurvivalRecord::new(i as f64, false))
            .collect();
        let groups = [
            SubgroupInput {
                id: "neg".into(),
                control: records(80, 0.1, 3),
                test: censored,
            },
            SubgroupInput {
                id: "pos".into(),
                control: records(80, 0.1, 4),
                test: records(80, 0.05, 5),
            },
        ];
        let out = subgroup_pie(&groups, &quick(), 7).unwrap();
        match &out[0].result {
            Err(Error::Subgroup { id, source }) => {
                assert_eq!(id, "neg");
                assert!(matches!(**source, Error::NoEvents));
            }
            other => panic!("expected subgroup error, got {other:?}"),
        }
        assert!(out[1].result.is_ok());
        let table = subgroup_table(&out);
        assert!(table[0].summary.is_none() && table[0].error.is_some());
        assert!(table[1].summary.is_some());
    }

    #[test]
    fn auto_grid_reaches_control_tail() {
        let settings = quick();
        let cmp = analyze(
            &validate_dataset("c", records(150, 0.1, 8)).unwrap(),
            &validate_dataset("t", records(150, 0.07, 9)).unwrap(),
            &settings,
            1,
        );
        let cs: Vec<f64> = cmp.conditional.rows.iter().map(|r| r.c).collect();
        assert_eq!(cs[0], 1.0);
        // 10% survival of a rate-0.1 exponential is about 23 months
        assert!(cs.len() >= 18 && cs.len() <= 30, "{}", cs.len());
    }
}
