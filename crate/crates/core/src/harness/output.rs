//! Aggregation over setups, CSV/JSON writers and resume checks.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::engine::SetupOutcome;
use super::{fmt_xpd, CellSpec, ExperimentPlan, Variant};
use crate::error::{Error, Result};
use crate::par::pairwise_sum;
use crate::power::PowerAllocation;

/// Mean and batch-means standard error of the sum SE of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    #[serde(rename = "M")]
    pub m: usize,
    pub scheme: String,
    pub bound: String,
    pub xpd_db: String,
    pub xpc: [f64; 2],
    pub power_control: String,
    pub uni: String,
    pub ue_antennas: usize,
    pub setups: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Sum SE of each setup, in setup order.
    pub per_setup: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDiagnostics {
    #[serde(rename = "M")]
    pub m: usize,
    pub setup_id: usize,
    pub xpd_db: String,
    pub xpc: [f64; 2],
    pub ue_antennas: usize,
    pub ul: PowerAllocation,
    pub dl: PowerAllocation,
}

/// Summary of one run, written as `<name>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub name: String,
    pub plan_hash: String,
    pub plan: serde_json::Value,
    pub wall_clock_s: f64,
    pub cells: Vec<CellSummary>,
    pub power_control: Vec<PowerDiagnostics>,
    pub zf_ridge_events: u64,
    pub mean_nmse: f64,
    /// Set when an identical completed run was found and nothing was done.
    #[serde(skip)]
    pub skipped: bool,
    /// CSV body (not part of the JSON file).
    #[serde(skip)]
    pub csv: String,
}

impl RunRecord {
    /// Cell with the given `M`, full scheme label and bound label.
    pub fn find(&self, m: usize, scheme: &str, bound: &str) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.m == m && c.scheme == scheme && c.bound == bound)
    }
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub(crate) fn csv_header(k: usize) -> String {
    let mut s = String::from("M,scheme,bound,setup_id,sum_se");
    for i in 1..=k {
        let _ = write!(s, ",se_ue_{i}");
    }
    s.push('\n');
    s
}

/// Builds the record and CSV text from per-setup outcomes, grouped by
/// `(M, variant)` in plan order.
pub(crate) fn assemble(
    plan: &ExperimentPlan,
    hash: &str,
    cells: &[CellSpec],
    groups: Vec<(usize, Variant, Vec<SetupOutcome>)>,
) -> RunRecord {
    let mut csv = csv_header(plan.scenario.k);
    let mut summaries = Vec::new();
    let mut power = Vec::new();
    let mut zf = 0;
    let mut nmse = Vec::new();
    for (m, v, outcomes) in &groups {
        for (c, cell) in cells.iter().enumerate() {
            let label = plan.scheme_label(cell, v);
            let bound = cell.bound.label();
            let mut sums = Vec::with_capacity(outcomes.len());
            for (setup, o) in outcomes.iter().enumerate() {
                let ues = &o.per_ue[c];
                let sum = pairwise_sum(ues);
                sums.push(sum);
                let _ = write!(csv, "{m},{label},{bound},{setup},{sum}");
                for x in ues {
                    let _ = write!(csv, ",{x}");
                }
                csv.push('\n');
            }
            let (mean, stderr) = mean_stderr(&sums);
            summaries.push(CellSummary {
                m: *m,
                scheme: label,
                bound: bound.to_string(),
                xpd_db: fmt_xpd(v.xpd_db),
                xpc: [v.xpc.re, v.xpc.im],
                power_control: v.power_control.label().to_string(),
                uni: cell.uni.label().to_string(),
                ue_antennas: v.ue_antennas,
                setups: sums.len(),
                mean,
                stderr,
                per_setup: sums,
            });
        }
        for (setup, o) in outcomes.iter().enumerate() {
            zf += o.zf_ridge_events;
            nmse.push(o.mean_nmse);
            if let (Some(ul), Some(dl)) = (&o.ul_power, &o.dl_power) {
                power.push(PowerDiagnostics {
                    m: *m,
                    setup_id: setup,
                    xpd_db: fmt_xpd(v.xpd_db),
                    xpc: [v.xpc.re, v.xpc.im],
                    ue_antennas: v.ue_antennas,
                    ul: ul.clone(),
                    dl: dl.clone(),
                });
            }
        }
    }
    RunRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        name: plan.name.clone(),
        plan_hash: hash.to_string(),
        plan: serde_json::to_value(plan).expect("plan serializes"),
        wall_clock_s: 0.0,
        cells: summaries,
        power_control: power,
        zf_ridge_events: zf,
        mean_nmse: mean_stderr(&nmse).0,
        skipped: false,
        csv,
    }
}

fn paths(plan: &ExperimentPlan) -> (PathBuf, PathBuf) {
    (
        plan.out.join(format!("{}.csv", plan.name)),
        plan.out.join(format!("{}.json", plan.name)),
    )
}

fn read_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: unreadable run summary ({e})", path.display())))
}

/// Returns the stored record when an identical run already completed, and
/// an error when the location holds a different plan.
pub(crate) fn check_existing(plan: &ExperimentPlan, hash: &str) -> Result<Option<RunRecord>> {
    let (csv_path, json_path) = paths(plan);
    if !json_path.exists() {
        return Ok(None);
    }
    let mut record = read_record(&json_path)?;
    if record.plan_hash != hash {
        return Err(Error::config(format!(
            "out: {} holds results of a different plan (hash {}, this plan {}); choose another output directory",
            json_path.display(),
            record.plan_hash,
            hash
        )));
    }
    if !csv_path.exists() {
        return Err(Error::config(format!(
            "out: {} exists without {}; remove it to rerun",
            json_path.display(),
            csv_path.display()
        )));
    }
    record.csv = fs::read_to_string(&csv_path).map_err(|e| Error::io(csv_path.display().to_string(), e))?;
    record.skipped = true;
    Ok(Some(record))
}

/// Writes the CSV, then the JSON summary that marks the run complete.
pub(crate) fn write_run(plan: &ExperimentPlan, record: &RunRecord) -> Result<()> {
    let (csv_path, json_path) = paths(plan);
    fs::create_dir_all(&plan.out).map_err(|e| Error::io(plan.out.display().to_string(), e))?;
    fs::write(&csv_path, &record.csv).map_err(|e| Error::io(csv_path.display().to_string(), e))?;
    let json = serde_json::to_string_pretty(record).expect("record serializes");
    fs::write(&json_path, json + "\n").map_err(|e| Error::io(json_path.display().to_string(), e))
}
