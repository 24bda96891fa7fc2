//! Analysis configuration: a JSON file plus command-line overrides.
//!
//! Relative input paths are resolved against the config file's directory.
//! A run manifest is also accepted in place of a config; its `config` echo is
//! used.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pie_core::engine::grid;
use pie_core::pipeline::{AnalysisSettings, ConditionalGrid};
use pie_core::pwexp::GammaPrior;

use crate::error::{CliError, Result};

pub const MIN_DRAWS: usize = 1000;

/// Where one arm's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArmSource {
    /// Patient-level CSV, header `time,event`.
    Csv(PathBuf),
    /// Digitized published curve and its numbers-at-risk table.
    Digitized {
        coords: PathBuf,
        risk: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_events: Option<u64>,
    },
}

impl ArmSource {
    fn paths(&self) -> Vec<&Path> {
        match self {
            ArmSource::Csv(p) => vec![p],
            ArmSource::Digitized { coords, risk, .. } => vec![coords, risk],
        }
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            let joined = if p.is_absolute() {
                p.clone()
            } else {
                base.join(&*p)
            };
            *p = joined.canonicalize().unwrap_or(joined);
        };
        match self {
            ArmSource::Csv(p) => fix(p),
            ArmSource::Digitized { coords, risk, .. } => {
                fix(coords);
                fix(risk);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmLabels {
    pub control: String,
    pub test: String,
}

impl Default for ArmLabels {
    fn default() -> Self {
        Self {
            control: "control".into(),
            test: "test".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalRange {
    pub min: usize,
    pub max: usize,
}

impl Default for IntervalRange {
    fn default() -> Self {
        Self { min: 1, max: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            min: -12.0,
            max: 36.0,
            step: 0.5,
        }
    }
}

/// Either `{"step": s}` (1 month steps up to the control 10% survival time
/// by default) or an explicit list of control times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CGridSpec {
    Explicit(Vec<f64>),
    Auto { step: f64 },
}

impl Default for CGridSpec {
    fn default() -> Self {
        CGridSpec::Auto { step: 1.0 }
    }
}

fn default_draws() -> usize {
    10_000
}

fn default_margins() -> Vec<f64> {
    vec![3.0, 6.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub control: ArmSource,
    pub test: ArmSource,
    #[serde(default)]
    pub labels: ArmLabels,
    #[serde(default)]
    pub prior: GammaPrior,
    #[serde(default)]
    pub intervals: IntervalRange,
    #[serde(default = "default_draws")]
    pub n_draws: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_margins")]
    pub margins: Vec<f64>,
    #[serde(default)]
    pub d_grid: GridSpec,
    #[serde(default)]
    pub c_grid: CGridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgroup_column: Option<String>,
    /// Not echoed into manifests, so runs into different directories stay
    /// byte-identical.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_draws: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl AnalysisConfig {
    /// Parses a config (or manifest) file, resolves its paths and applies the
    /// overrides. Flags win over file values.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(CliError::MissingInput {
                    path: path.to_path_buf(),
                })
            }
            Err(e) => return Err(CliError::io(path, e)),
        };
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base, overrides)
    }

    pub fn from_json(text: &str, base: &Path, overrides: &Overrides) -> Result<Self> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::InvalidConfig(e.to_string()))?;
        if value.get("manifest_version").is_some() {
            value = value
                .get_mut("config")
                .map(serde_json::Value::take)
                .ok_or_else(|| CliError::InvalidConfig("manifest without a config echo".into()))?;
        }
        let mut cfg: AnalysisConfig =
            serde_json::from_value(value).map_err(|e| CliError::InvalidConfig(e.to_string()))?;
        cfg.control.resolve(base);
        cfg.test.resolve(base);
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(n) = overrides.n_draws {
            cfg.n_draws = n;
        }
        if let Some(o) = &overrides.output_dir {
            cfg.output_dir = Some(o.clone());
        } else if let Some(o) = &cfg.output_dir {
            if o.is_relative() {
                cfg.output_dir = Some(base.join(o));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::InvalidConfig(m));
        if self.n_draws < MIN_DRAWS {
            return bad(format!(
                "n_draws must be at least {MIN_DRAWS}, got {}",
                self.n_draws
            ));
        }
        if let Some(m) = self.margins.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return bad(format!("margins must be non-negative, got {m}"));
        }
        if GammaPrior::new(self.prior.shape, self.prior.rate).is_err() {
            return bad("prior shape and rate must be positive".into());
        }
        if self.intervals.min < 1 || self.intervals.min > self.intervals.max {
            return bad("intervals need 1 <= min <= max".into());
        }
        let g = self.d_grid;
        if !(g.step > 0.0 && g.min <= g.max && g.min.is_finite() && g.max.is_finite()) {
            return bad("d_grid needs step > 0 and min <= max".into());
        }
        match &self.c_grid {
            CGridSpec::Auto { step } if !(*step > 0.0 && step.is_finite()) => {
                return bad("c_grid step must be positive".into())
            }
            CGridSpec::Explicit(v)
                if v.is_empty() || v.iter().any(|c| !(c.is_finite() && *c > 0.0)) =>
            {
                return bad("c_grid values must be positive".into())
            }
            _ => {}
        }
        if self.subgroup_column.is_some()
            && [&self.control, &self.test]
                .iter()
                .any(|s| matches!(s, ArmSource::Digitized { .. }))
        {
            return bad("subgroups need patient-level CSV inputs".into());
        }
        for p in self.control.paths().into_iter().chain(self.test.paths()) {
            if !p.is_file() {
                return Err(CliError::MissingInput {
                    path: p.to_path_buf(),
                });
            }
        }
        Ok(())
    }

    pub fn settings(&self) -> AnalysisSettings {
        AnalysisSettings {
            prior: self.prior,
            intervals: self.intervals.min..=self.intervals.max,
            n_draws: self.n_draws,
            margins: self.margins.clone(),
            d_grid: grid(self.d_grid.min, self.d_grid.max, self.d_grid.step),
            c_grid: match &self.c_grid {
                CGridSpec::Auto { step } => ConditionalGrid::Auto { step: *step },
                CGridSpec::Explicit(v) => ConditionalGrid::Explicit(v.clone()),
            },
        }
    }
}
