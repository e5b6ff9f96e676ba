//! One function per CLI subcommand: run the experiment, write tables and the manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, SchedulerKind};
use crate::error::Result;
use crate::experiments::{
    best_threshold, delay_rows, run_angle_pdf, run_cdf_campaign, run_delay_campaign, run_threshold_sweep, run_tightness, summarize_run,
    Bound, CampaignSummary, TightnessRow,
};
use crate::output::{Manifest, OutputDir, SlotRow};
use crate::sim::RunOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    AnglePdf,
    Tightness,
    Sweep,
    Campaign,
    Delay,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::AnglePdf => "angle-pdf",
            Command::Tightness => "tightness",
            Command::Sweep => "sweep",
            Command::Campaign => "campaign",
            Command::Delay => "delay",
        }
    }
}

/// Runs `command` and returns the manifest path.
pub fn execute(command: Command, config: &ExperimentConfig, seed: u64, out: &Path) -> Result<PathBuf> {
    config.validate()?;
    let mut dir = OutputDir::create(out)?;
    let results = match command {
        Command::AnglePdf => angle_pdf(config, seed, &mut dir)?,
        Command::Tightness => tightness(config, seed, &mut dir)?,
        Command::Sweep => sweep(config, seed, &mut dir)?,
        Command::Campaign => campaign(config, seed, &mut dir)?,
        Command::Delay => delay(config, seed, &mut dir)?,
    };
    dir.finish(Manifest::new(command.name(), seed, config, results))
}

#[derive(Serialize)]
struct PdfRow {
    d1: f64,
    d2: f64,
    x: f64,
    mc_density: f64,
    semianalytic_density: Option<f64>,
}

fn angle_pdf(config: &ExperimentConfig, seed: u64, dir: &mut OutputDir) -> Result<serde_json::Value> {
    let cases = run_angle_pdf(&config.angle_pdf, seed, config.parallel)?;
    let rows = cases.iter().flat_map(|c| {
        (0..c.mc.bins()).map(move |b| PdfRow {
            d1: c.d1,
            d2: c.d2,
            x: c.mc.x[b],
            mc_density: c.mc.density[b],
            semianalytic_density: c.semianalytic.as_ref().map(|t| t.density[b]),
        })
    });
    dir.write_csv("angle_pdf.csv", rows)?;
    let summary: Vec<_> =
        cases.iter().map(|c| json!({ "d1": c.d1, "d2": c.d2, "truncation_r": c.truncation_r, "l1_distance": c.l1_distance })).collect();
    Ok(json!({ "cases": summary }))
}

/// Candidate position with the largest mean gap for `bound`.
pub fn tightness_peak(rows: &[TightnessRow], bound: Bound) -> Option<f64> {
    rows.iter()
        .filter(|r| r.bound == bound)
        .fold(None::<&TightnessRow>, |b, r| match b {
            Some(b) if b.mean_gap >= r.mean_gap => Some(b),
            _ => Some(r),
        })
        .map(|r| r.d2_m)
}

fn tightness(config: &ExperimentConfig, seed: u64, dir: &mut OutputDir) -> Result<serde_json::Value> {
    let rows = run_tightness(&config.tightness, seed, config.parallel)?;
    dir.write_csv("tightness.csv", &rows)?;
    let peaks: Vec<_> = Bound::ALL.iter().map(|&b| json!({ "bound": b, "peak_d2_m": tightness_peak(&rows, b) })).collect();
    Ok(json!({ "peaks": peaks }))
}

fn sweep(config: &ExperimentConfig, seed: u64, dir: &mut OutputDir) -> Result<serde_json::Value> {
    let rows = run_threshold_sweep(config, seed)?;
    dir.write_csv("sweep.csv", &rows)?;
    let best: Vec<_> = config
        .sweep
        .schedulers
        .iter()
        .filter_map(|&k| best_threshold(&rows, k).map(|(eps, interior)| json!({ "scheduler": k, "eps": eps, "interior": interior })))
        .collect();
    Ok(json!({ "best": best }))
}

#[derive(Serialize)]
struct SummaryRow {
    scheduler: SchedulerKind,
    eps: f64,
    codebook_bits: Option<u32>,
    cell_average: f64,
    cell_edge: f64,
    mean_q: f64,
    samples: usize,
    max_zf_residual: f64,
    max_power_excess: f64,
    feedback_mismatches: usize,
    forced_slots: usize,
}

impl From<&CampaignSummary> for SummaryRow {
    fn from(s: &CampaignSummary) -> Self {
        SummaryRow {
            scheduler: s.scheduler,
            eps: s.eps,
            codebook_bits: s.codebook_bits,
            cell_average: s.summary.cell_average,
            cell_edge: s.summary.cell_edge,
            mean_q: s.summary.mean_q,
            samples: s.summary.samples,
            max_zf_residual: s.max_zf_residual,
            max_power_excess: s.max_power_excess,
            feedback_mismatches: s.feedback_mismatches,
            forced_slots: s.forced_slots,
        }
    }
}

fn write_runs(dir: &mut OutputDir, prefix: &str, outcomes: &[RunOutcome], cells: usize) -> Result<Vec<CampaignSummary>> {
    for o in outcomes {
        dir.write_csv(&format!("{prefix}users_{}.csv", o.run.kind), &o.users)?;
        dir.write_csv(&format!("{prefix}slots_{}.csv", o.run.kind), o.slots.iter().map(SlotRow::from))?;
    }
    let summaries: Vec<CampaignSummary> = outcomes.iter().map(|o| summarize_run(o, cells)).collect();
    dir.write_csv(&format!("{prefix}summary.csv"), summaries.iter().map(SummaryRow::from))?;
    Ok(summaries)
}

fn campaign(config: &ExperimentConfig, seed: u64, dir: &mut OutputDir) -> Result<serde_json::Value> {
    let outcomes = run_cdf_campaign(config, seed)?;
    let summaries = write_runs(dir, "", &outcomes, config.layout.cells)?;
    Ok(json!({ "summaries": summaries }))
}

fn delay(config: &ExperimentConfig, seed: u64, dir: &mut OutputDir) -> Result<serde_json::Value> {
    let outcome = run_delay_campaign(config, seed)?;
    let cells = config.layout.cells;
    let still = write_runs(dir, "v0_", &outcome.still, cells)?;
    let moving = write_runs(dir, &format!("v{}_", outcome.speed_kmh), &outcome.moving, cells)?;
    let rows = delay_rows(&outcome, cells);
    dir.write_csv("delay.csv", &rows)?;
    Ok(json!({ "still": still, "moving": moving, "comparison": rows }))
}
