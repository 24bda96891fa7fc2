//! `pie compare`: one row per run, laid out like a trial summary table.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::output::{csv_text, num, read_to_string};
use crate::run::{SummaryFile, SUMMARY};

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub runs: Vec<SummaryFile>,
    /// Union of margins over all runs, ascending.
    pub margins: Vec<f64>,
}

fn margin_key(m: f64) -> u64 {
    m.to_bits()
}

pub fn compare_runs(dirs: &[PathBuf]) -> Result<ComparisonTable> {
    if dirs.len() < 2 {
        return Err(CliError::Usage(
            "compare needs at least two run directories".into(),
        ));
    }
    let mut runs = Vec::new();
    for d in dirs {
        runs.push(load_summary(d)?);
    }
    let mut seen = BTreeSet::new();
    let mut margins: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.margins.iter().map(|m| m.margin))
        .filter(|m| seen.insert(margin_key(*m)))
        .collect();
    margins.sort_by(f64::total_cmp);
    Ok(ComparisonTable { runs, margins })
}

fn load_summary(dir: &Path) -> Result<SummaryFile> {
    let path = dir.join(SUMMARY);
    let text = read_to_string(&path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::InvalidConfig(format!("{}: {e}", path.display())))
}

impl ComparisonTable {
    fn margin_prob(run: &SummaryFile, m: f64) -> Option<f64> {
        run.margins.iter().find(|p| p.margin == m).map(|p| p.prob)
    }

    pub fn to_csv(&self) -> String {
        let margin_cols: Vec<String> = self
            .margins
            .iter()
            .map(|m| format!("pr_gain_gt_{}", num(*m)))
            .collect();
        let mut header = vec!["run", "mean", "median", "lo95", "hi95", "pr_positive"];
        header.extend(margin_cols.iter().map(String::as_str));
        csv_text(
            &header,
            self.runs.iter().map(|r| {
                let mut row = vec![
                    r.name.clone(),
                    num(r.mean),
                    num(r.median),
                    num(r.interval95.0),
                    num(r.interval95.1),
                    num(r.pr_positive),
                ];
                row.extend(
                    self.margins
                        .iter()
                        .map(|&m| Self::margin_prob(r, m).map(num).unwrap_or_default()),
                );
                row
            }),
        )
    }

    pub fn to_text(&self) -> String {
        let mut header: Vec<String> = ["", "mean", "median", "95%-int.", "pr(Y>X)"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.margins.iter().map(|m| format!("pr(Y>X+{})", num(*m))));
        let mut rows = vec![header];
        for r in &self.runs {
            let mut row = vec![
                r.name.clone(),
                format!("{:.1}", r.mean),
                format!("{:.1}", r.median),
                format!("({:.1}, {:.1})", r.interval95.0, r.interval95.1),
                format!("{:.2}", r.pr_positive),
            ];
            row.extend(self.margins.iter().map(|&m| {
                Self::margin_prob(r, m)
                    .map(|p| format!("{p:.2}"))
                    .unwrap_or_default()
            }));
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c == 0 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}
