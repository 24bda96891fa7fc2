//! Shared fixtures for the command-line tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pie_core::pwexp::Partition;
use pie_core::simulate::simulate_arm;
use pie_core::stream::StreamSeed;

pub fn pie(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pie"));
    cmd.args(args)
        .env_remove("PIE_THREADS")
        .env_remove("SOURCE_DATE_EPOCH");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

/// Simulated piecewise-exponential arm with 36 months of follow-up.
pub fn arm_csv(cuts: &[f64], hazards: &[f64], n: usize, seed: u64) -> String {
    let p = Partition::new(cuts.to_vec()).unwrap();
    let mut rng = StreamSeed::root(seed).row_rng(0);
    let mut text = String::from("time,event\n");
    for r in simulate_arm(&p, hazards, n, 36.0, &mut rng) {
        let _ = writeln!(text, "{},{}", r.time, u8::from(r.event));
    }
    text
}

/// Two-group arm for subgroup runs: both groups share `hazard`, except the
/// test arm's `pos` group which gets `pos_hazard`.
pub fn grouped_csv(hazard: f64, pos_hazard: f64, n_per_group: usize, seed: u64) -> String {
    let p = Partition::exponential();
    let mut text = String::from("time,event,marker\n");
    for (g, (group, h)) in [("neg", hazard), ("pos", pos_hazard)]
        .into_iter()
        .enumerate()
    {
        let mut rng = StreamSeed::root(seed).row_rng(g as u64);
        for r in simulate_arm(&p, &[h], n_per_group, 36.0, &mut rng) {
            let _ = writeln!(text, "{},{},{}", r.time, u8::from(r.event), group);
        }
    }
    text
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    /// Control exponential(0.1) and a test arm with a delayed benefit.
    pub fn standard() -> Self {
        let f = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        f.write("control.csv", &arm_csv(&[], &[0.1], 200, 1));
        f.write("test.csv", &arm_csv(&[4.0], &[0.1, 0.06], 200, 2));
        f.write(
            "config.json",
            r#"{"name": "standard", "control": "control.csv", "test": "test.csv", "n_draws": 2000, "seed": 7}"#,
        );
        f
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    pub fn s(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }
}

pub fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub const ARTIFACTS: [&str; 8] = [
    "km_control.csv",
    "km_test.csv",
    "gain_curve.csv",
    "conditional_gain.csv",
    "summary.json",
    "summary_full.json",
    "model_control.json",
    "model_test.json",
];

/// The manifest with its timestamps removed.
pub fn manifest_sans_time(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(&read(dir, "manifest.json")).unwrap();
    v.as_object_mut().unwrap().remove("timestamps");
    v
}
