//! `pie run`: ingest, select, fit, sample, summarize, and write the run
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use pie_core::engine::{GainSummary, MarginProb, U_FLOOR};
use pie_core::pipeline::{analyze, subgroup_pie, Comparison, SubgroupInput};
use pie_core::pwexp::{DicRow, GammaPrior, ModelFit};
use pie_core::survival_data::{
    read_arm_csv, read_coords_csv, read_risk_csv, reconstruct_ipd, validate_dataset, write_arm_csv,
    DigitizedCurve, KmCurve, SurvivalRecord,
};

use crate::config::{AnalysisConfig, ArmSource};
use crate::error::{CliError, Result};
use crate::output::{csv_text, num, write_file, write_json};

pub const MANIFEST_VERSION: u32 = 1;

pub const KM_CONTROL: &str = "km_control.csv";
pub const KM_TEST: &str = "km_test.csv";
pub const GAIN_CURVE: &str = "gain_curve.csv";
pub const CONDITIONAL: &str = "conditional_gain.csv";
pub const SUMMARY: &str = "summary.json";
pub const FULL_PRECISION: &str = "summary_full.json";
pub const MODEL_CONTROL: &str = "model_control.json";
pub const MODEL_TEST: &str = "model_test.json";
pub const MANIFEST: &str = "manifest.json";

const COUPLING: &str =
    "rank preserving: one shared survival level per row, hazards drawn independently per arm";

#[derive(Debug, Clone, Serialize)]
pub struct Software {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub arm: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmModelInfo {
    pub label: String,
    pub n: usize,
    pub n_events: usize,
    pub selected_intervals: usize,
    pub selected_cuts: Vec<f64>,
    pub dic_table: Vec<DicRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Truncation {
    pub u_floor: f64,
    pub joint_rows: usize,
    pub joint_fraction: f64,
    pub conditional_evaluations: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub root: u64,
    pub streams: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timestamps {
    pub started_unix: u64,
    pub finished_unix: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupResult {
    pub id: String,
    pub directory: String,
    pub control: Option<ArmModelInfo>,
    pub test: Option<ArmModelInfo>,
    pub truncation: Option<Truncation>,
    pub error: Option<serde_json::Value>,
}

/// Everything needed to repeat a run: the resolved config, input digests,
/// seeds and the model choices it led to.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub software: Software,
    pub config: AnalysisConfig,
    pub inputs: Vec<InputDigest>,
    pub seeds: Seeds,
    pub coupling: &'static str,
    pub groups: Vec<GroupResult>,
    pub outputs: Vec<String>,
    pub timestamps: Timestamps,
}

/// Reproducible clock: `SOURCE_DATE_EPOCH` when set, wall time otherwise.
fn now_unix() -> u64 {
    if let Some(v) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
    {
        return v;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn digest(arm: &str, path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(InputDigest {
        arm: arm.to_string(),
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Records of one arm, each tagged with its subgroup label if any.
type TaggedRecords = Vec<(Option<String>, SurvivalRecord)>;

/// Loads one arm and digests its input files.
fn load_arm(
    source: &ArmSource,
    label: &str,
    group_column: Option<&str>,
) -> Result<(TaggedRecords, Vec<InputDigest>)> {
    match source {
        ArmSource::Csv(path) => {
            let rows = read_arm_csv(path, group_column).map_err(|e| CliError::core(label, e))?;
            Ok((
                rows.into_iter().map(|r| (r.group, r.record)).collect(),
                vec![digest(label, path)?],
            ))
        }
        ArmSource::Digitized {
            coords,
            risk,
            total_events,
        } => {
            let curve = DigitizedCurve {
                coords: read_coords_csv(coords).map_err(|e| CliError::core(label, e))?,
                risk_table: read_risk_csv(risk).map_err(|e| CliError::core(label, e))?,
                total_events: *total_events,
            };
            let ds = reconstruct_ipd(&curve, label).map_err(|e| CliError::core(label, e))?;
            Ok((
                ds.records().iter().map(|r| (None, *r)).collect(),
                vec![digest(label, coords)?, digest(label, risk)?],
            ))
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn km_csv(km: &KmCurve) -> String {
    csv_text(
        &["time", "survival", "n_risk"],
        km.table
            .iter()
            .map(|&(t, s, n)| vec![num(t), num(s), n.to_string()]),
    )
}

#[derive(Serialize)]
struct ModelDump<'a> {
    arm: &'a str,
    cuts: &'a [f64],
    prior: &'a [GammaPrior],
    posterior: &'a [GammaPrior],
    events: &'a [u64],
    exposure: &'a [f64],
    dic: Option<f64>,
    p_d: Option<f64>,
    seed: u64,
    stream: String,
}

fn dump_model<'a>(label: &'a str, fit: &'a ModelFit, seed: u64, stream: String) -> ModelDump<'a> {
    ModelDump {
        arm: label,
        cuts: fit.partition.cuts(),
        prior: &fit.priors,
        posterior: &fit.posterior,
        events: &fit.counts.events,
        exposure: &fit.counts.exposure,
        dic: fit.dic.map(|d| d.dic),
        p_d: fit.dic.map(|d| d.p_d),
        seed,
        stream,
    }
}

/// Headline summary of the gain distribution, as written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SummaryFile {
    pub name: String,
    pub control_label: String,
    pub test_label: String,
    pub n_draws: usize,
    pub mean: f64,
    pub median: f64,
    pub interval95: (f64, f64),
    pub pr_positive: f64,
    pub margins: Vec<MarginProb>,
    pub truncated_rows: usize,
    pub truncation_flagged: bool,
    pub coupling: String,
}

impl SummaryFile {
    fn new(name: &str, cfg: &AnalysisConfig, s: &GainSummary) -> Self {
        Self {
            name: name.to_string(),
            control_label: cfg.labels.control.clone(),
            test_label: cfg.labels.test.clone(),
            n_draws: s.n,
            mean: s.mean,
            median: s.median,
            interval95: s.interval95,
            pr_positive: s.pr_positive,
            margins: s.margins.clone(),
            truncated_rows: s.truncated_rows,
            truncation_flagged: s.truncation_flagged,
            coupling: COUPLING.to_string(),
        }
    }
}

fn arm_info(label: &str, arm: &pie_core::pipeline::ArmAnalysis) -> ArmModelInfo {
    ArmModelInfo {
        label: label.to_string(),
        n: arm.n,
        n_events: arm.n_events,
        selected_intervals: arm.selection.fit.partition.len(),
        selected_cuts: arm.selection.fit.partition.cuts().to_vec(),
        dic_table: arm.selection.table.clone(),
    }
}

fn truncation(cmp: &Comparison) -> Truncation {
    Truncation {
        u_floor: U_FLOOR,
        joint_rows: cmp.summary.truncated_rows,
        joint_fraction: cmp.summary.truncated_rows as f64 / cmp.summary.n as f64,
        conditional_evaluations: cmp.conditional.truncated,
        flagged: cmp.summary.truncation_flagged,
    }
}

/// Writes the artifacts of one comparison into `dir`; returns file names.
fn write_comparison(
    dir: &Path,
    name: &str,
    cfg: &AnalysisConfig,
    cmp: &Comparison,
) -> Result<Vec<String>> {
    create_dir(dir)?;
    write_file(&dir.join(KM_CONTROL), &km_csv(&cmp.control.km))?;
    write_file(&dir.join(KM_TEST), &km_csv(&cmp.test.km))?;
    write_file(
        &dir.join(GAIN_CURVE),
        &csv_text(
            &["d", "prob", "side"],
            cmp.curve
                .points
                .iter()
                .map(|p| vec![num(p.d), num(p.prob), p.side.as_str().to_string()]),
        ),
    )?;
    write_file(
        &dir.join(CONDITIONAL),
        &csv_text(
            &["c", "median", "lo95", "hi95"],
            cmp.conditional.rows.iter().map(|r| {
                vec![
                    num(r.c),
                    num(r.median),
                    num(r.interval95.0),
                    num(r.interval95.1),
                ]
            }),
        ),
    )?;
    write_json(
        &dir.join(SUMMARY),
        &SummaryFile::new(name, cfg, &cmp.summary),
        true,
    )?;
    write_json(&dir.join(FULL_PRECISION), cmp, false)?;
    write_json(
        &dir.join(MODEL_CONTROL),
        &dump_model(
            &cfg.labels.control,
            &cmp.control.selection.fit,
            cmp.seed,
            "select/control".into(),
        ),
        true,
    )?;
    write_json(
        &dir.join(MODEL_TEST),
        &dump_model(
            &cfg.labels.test,
            &cmp.test.selection.fit,
            cmp.seed,
            "select/test".into(),
        ),
        true,
    )?;
    Ok([
        KM_CONTROL,
        KM_TEST,
        GAIN_CURVE,
        CONDITIONAL,
        SUMMARY,
        FULL_PRECISION,
        MODEL_CONTROL,
        MODEL_TEST,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect())
}

fn stream_names(cfg: &AnalysisConfig) -> Vec<String> {
    let mut v = Vec::new();
    for arm in ["control", "test"] {
        for i in 0..=cfg.intervals.max.saturating_sub(cfg.intervals.min) {
            v.push(format!("select/{arm}/candidate-{i}"));
        }
    }
    for purpose in ["joint", "conditional"] {
        for arm in ["control", "test"] {
            v.push(format!("{purpose}/{arm}"));
        }
    }
    v.push("joint/coupling".into());
    v
}

/// Directory-safe form of a subgroup label.
fn group_dir(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("group_{s}")
}

fn run_name(cfg: &AnalysisConfig, out: &Path) -> String {
    cfg.name.clone().unwrap_or_else(|| {
        out.file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    })
}

/// Runs the full analysis described by `cfg` and writes the run directory.
pub fn run_analysis(cfg: &AnalysisConfig) -> Result<RunManifest> {
    let started = now_unix();
    cfg.validate()?;
    let out = cfg
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Usage("no output directory given (use --out)".into()))?;
    let group_col = cfg.subgroup_column.as_deref();
    let (control_rows, mut inputs) = load_arm(&cfg.control, &cfg.labels.control, group_col)?;
    let (test_rows, test_inputs) = load_arm(&cfg.test, &cfg.labels.test, group_col)?;
    inputs.extend(test_inputs);
    let settings = cfg.settings();
    let name = run_name(cfg, &out);
    create_dir(&out)?;

    let mut groups = Vec::new();
    let mut outputs = Vec::new();
    if group_col.is_none() {
        let strip =
            |rows: Vec<(Option<String>, SurvivalRecord)>| rows.into_iter().map(|r| r.1).collect();
        let control = validate_dataset(&cfg.labels.control, strip(control_rows))
            .map_err(|e| CliError::core(cfg.labels.control.clone(), e))?;
        let test = validate_dataset(&cfg.labels.test, strip(test_rows))
            .map_err(|e| CliError::core(cfg.labels.test.clone(), e))?;
        let cmp = analyze(&control, &test, &settings, cfg.seed);
        outputs.extend(write_comparison(&out, &name, cfg, &cmp)?);
        if matches!(cfg.control, ArmSource::Digitized { .. }) {
            write_ipd(&out.join("ipd_control.csv"), control.records())?;
            outputs.push("ipd_control.csv".into());
        }
        if matches!(cfg.test, ArmSource::Digitized { .. }) {
            write_ipd(&out.join("ipd_test.csv"), test.records())?;
            outputs.push("ipd_test.csv".into());
        }
        groups.push(GroupResult {
            id: "all".into(),
            directory: ".".into(),
            control: Some(arm_info(&cfg.labels.control, &cmp.control)),
            test: Some(arm_info(&cfg.labels.test, &cmp.test)),
            truncation: Some(truncation(&cmp)),
            error: None,
        });
    } else {
        let mut by_group: BTreeMap<String, (Vec<SurvivalRecord>, Vec<SurvivalRecord>)> =
            BTreeMap::new();
        for (g, r) in control_rows {
            by_group.entry(g.unwrap_or_default()).or_default().0.push(r);
        }
        for (g, r) in test_rows {
            by_group.entry(g.unwrap_or_default()).or_default().1.push(r);
        }
        let inputs_by_group: Vec<SubgroupInput> = by_group
            .into_iter()
            .map(|(id, (control, test))| SubgroupInput { id, control, test })
            .collect();
        let outcomes = subgroup_pie(&inputs_by_group, &settings, cfg.seed)
            .map_err(|e| CliError::core("subgroups", e))?;
        let all_failed = outcomes.iter().all(|o| o.result.is_err());
        let mut first_err = None;
        let mut table_rows = Vec::new();
        for o in outcomes {
            let dir_name = group_dir(&o.id);
            let dir = out.join(&dir_name);
            match o.result {
                Ok(cmp) => {
                    let files = write_comparison(&dir, &format!("{name}/{}", o.id), cfg, &cmp)?;
                    outputs.extend(files.into_iter().map(|f| format!("{dir_name}/{f}")));
                    groups.push(GroupResult {
                        id: o.id.clone(),
                        directory: dir_name,
                        control: Some(arm_info(&cfg.labels.control, &cmp.control)),
                        test: Some(arm_info(&cfg.labels.test, &cmp.test)),
                        truncation: Some(truncation(&cmp)),
                        error: None,
                    });
                    let s = &cmp.summary;
                    table_rows.push(vec![
                        o.id.clone(),
                        num(s.mean),
                        num(s.median),
                        num(s.interval95.0),
                        num(s.interval95.1),
                        num(s.pr_positive),
                        String::new(),
                    ]);
                }
                Err(e) => {
                    let err = CliError::core(format!("subgroup {}", o.id), e);
                    groups.push(GroupResult {
                        id: o.id.clone(),
                        directory: dir_name,
                        control: None,
                        test: None,
                        truncation: None,
                        error: Some(err.to_json()),
                    });
                    table_rows.push(vec![
                        o.id.clone(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        err.kind().to_string(),
                    ]);
                    first_err.get_or_insert(err);
                }
            }
        }
        write_file(
            &out.join("subgroup_comparison.csv"),
            &csv_text(
                &[
                    "subgroup",
                    "mean",
                    "median",
                    "lo95",
                    "hi95",
                    "pr_positive",
                    "error",
                ],
                table_rows,
            ),
        )?;
        outputs.push("subgroup_comparison.csv".into());
        if all_failed {
            return Err(first_err.expect("at least one subgroup"));
        }
    }

    outputs.push(MANIFEST.into());
    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        software: Software {
            name: "pie",
            version: env!("CARGO_PKG_VERSION"),
        },
        config: cfg.clone(),
        inputs,
        seeds: Seeds {
            root: cfg.seed,
            streams: stream_names(cfg),
        },
        coupling: COUPLING,
        groups,
        outputs,
        timestamps: Timestamps {
            started_unix: started,
            finished_unix: now_unix(),
        },
    };
    write_json(&out.join(MANIFEST), &manifest, false)?;
    Ok(manifest)
}

pub fn write_ipd(path: &Path, records: &[SurvivalRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_arm_csv(records, std::io::BufWriter::new(file))
        .map_err(|e| CliError::core(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_dirs_are_safe() {
        assert_eq!(group_dir("PD-L1 >= 1%"), "group_PD-L1____1_");
        assert_eq!(group_dir("pos"), "group_pos");
    }

    #[test]
    fn stream_list_covers_candidates() {
        let cfg: AnalysisConfig = serde_json::from_str(r#"{"control": "c", "test": "t"}"#).unwrap();
        let s = stream_names(&cfg);
        assert!(s.contains(&"select/test/candidate-4".to_string()));
        assert!(s.contains(&"joint/coupling".to_string()));
    }
}
