//! The five experiments: angle pdfs, bound tightness, threshold sweep,
//! throughput campaign and scheduling delay.

use compsched_core::anglestats::{converge_truncation, cos2_mc, sample_directions, PdfTable};
use compsched_core::channel::compose_global;
use compsched_core::linalg::{complex_gaussian_vector, stack_rows, CMatrix, C64};
use compsched_core::netgeom::{pathloss_db, PathlossModel};
use compsched_core::schedulers::{mu_bar, mu_lus, mu_upper, nu_lower, nu_lus, projected_norm, LocalView};
use compsched_core::special::db_to_linear;
use compsched_core::stats::{ks_two_sample, sorted_copy};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AnglePdfSection, CsiMode, ExperimentConfig, Mobility, SchedulerKind, TightnessSection};
use crate::error::{HarnessError, Result};
use crate::metrics::{paired_t_test, per_drop_average, summarize, throughputs, Summary};
use crate::seeds::{stream, Lane};
use crate::sim::{run_campaign, CampaignSpec, Run, RunOutcome, Scenario};

fn maybe_parallel<T, F>(n: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Linear path gains from BSs at `-half` and `+half` to a user at `x` on the line.
pub fn two_cell_gains(half_distance_m: f64, x: f64) -> Result<Vec<f64>> {
    [-half_distance_m, half_distance_m].iter().map(|b| Ok(db_to_linear(pathloss_db((x - b).abs(), PathlossModel::TwoCell)?))).collect()
}

fn block_covariance(alpha: &[f64], antennas: usize) -> CMatrix {
    let total: f64 = alpha.iter().sum::<f64>() * antennas as f64;
    let n = alpha.len() * antennas;
    CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(alpha[i / antennas] / total, 0.0) } else { C64::new(0.0, 0.0) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnglePdfCase {
    pub d1: f64,
    pub d2: f64,
    pub mc: PdfTable,
    /// Present when the global channel has two entries.
    pub semianalytic: Option<PdfTable>,
    pub truncation_r: Option<usize>,
    pub l1_distance: Option<f64>,
    /// Raw draws, kept for distribution tests.
    pub samples: Vec<f64>,
}

/// Density of `cos^2` of the angle between two users on the two-cell line.
pub fn run_angle_pdf(section: &AnglePdfSection, seed: u64, parallel: bool) -> Result<Vec<AnglePdfCase>> {
    maybe_parallel(section.cases.len(), parallel, |idx| {
        let (d1, d2) = section.cases[idx];
        let antennas_per_bs = section.antennas_per_bs;
        let r1 = block_covariance(&two_cell_gains(section.half_distance_m, d1)?, antennas_per_bs);
        let r2 = block_covariance(&two_cell_gains(section.half_distance_m, d2)?, antennas_per_bs);
        let mut rng = stream(seed, 2 * idx, Lane::Study);
        let samples = cos2_mc(&r1, &r2, section.mc_samples, &mut rng)?;
        let mc = PdfTable::from_samples(&samples, section.bins);
        let (semianalytic, truncation_r, l1_distance) = if r1.nrows() == 2 {
            let mut rng = stream(seed, 2 * idx + 1, Lane::Study);
            let dirs = sample_directions(&r1, section.directions, &mut rng)?;
            let (params, table) = converge_truncation(&r2, &dirs, section.bins, section.truncation_tol, section.max_truncation)?;
            let l1 = table.l1_distance(&mc);
            (Some(table), Some(params.truncation_r), Some(l1))
        } else {
            (None, None, None)
        };
        Ok(AnglePdfCase { d1, d2, mc, semianalytic, truncation_r, l1_distance, samples })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Nus,
    Localnus,
    Lus,
}

impl Bound {
    pub const ALL: [Bound; 3] = [Bound::Nus, Bound::Localnus, Bound::Lus];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TightnessRow {
    pub d2_m: f64,
    pub bound: Bound,
    /// Mean of `(nu - nu_lb) / nu`.
    pub mean_gap: f64,
    pub std_error: f64,
    pub realizations: usize,
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Normalized gap between the projected norm and each lower bound, one
/// selected user at `selected_position_m`, candidates along the line.
/// Every grid point reuses the same small-scale draws.
pub fn run_tightness(section: &TightnessSection, seed: u64, parallel: bool) -> Result<Vec<TightnessRow>> {
    let n_t = section.antennas_per_bs;
    let a1 = two_cell_gains(section.half_distance_m, section.selected_position_m)?;
    let local = |a: &[f64]| if a[1] > a[0] { 1 } else { 0 };
    let per_point = maybe_parallel(section.candidate_positions_m.len(), parallel, |idx| {
        let d2 = section.candidate_positions_m[idx];
        let a2 = two_cell_gains(section.half_distance_m, d2)?;
        let mu_l = mu_lus(&a2, &a1)?;
        let mut rng = stream(seed, 0, Lane::Study);
        let mut acc = [Moments::default(); 3];
        for _ in 0..section.realizations {
            let g1: Vec<_> = (0..2).map(|_| complex_gaussian_vector(n_t, &mut rng)).collect();
            let g2: Vec<_> = (0..2).map(|_| complex_gaussian_vector(n_t, &mut rng)).collect();
            let h1 = compose_global(&a1, &g1)?;
            let h2 = compose_global(&a2, &g2)?;
            let nu = projected_norm(&h2.composed, &stack_rows(&[&h1.composed])?)?;
            let n1 = h1.sublink_norms();
            let n2 = h2.sublink_norms();
            let mu = mu_upper(&n2, &n1)?;
            let mb = mu_bar(&LocalView::from_channel(&h2, local(&a2), 1.0), &LocalView::from_channel(&h1, local(&a1), 1.0))?;
            let lbs = [nu_lower(h2.norm_sqr(), &[mu]), nu_lower(h2.norm_sqr(), &[mb]), n_t as f64 * nu_lus(&a2, &[mu_l])];
            for (m, lb) in acc.iter_mut().zip(lbs) {
                m.push((nu - lb) / nu);
            }
        }
        Ok(Bound::ALL
            .iter()
            .zip(acc)
            .map(|(&bound, m)| TightnessRow { d2_m: d2, bound, mean_gap: m.mean, std_error: m.std_error(), realizations: m.n })
            .collect::<Vec<_>>())
    })?;
    Ok(per_point.concat())
}

/// Runs for the configured scheduler list at the configured thresholds.
pub fn campaign_runs(config: &ExperimentConfig) -> Vec<Run> {
    let t = config.thresholds();
    config.schedulers.iter().map(|&kind| Run { kind, eps: t.get(kind) }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub scheduler: SchedulerKind,
    pub eps: f64,
    pub codebook_bits: Option<u32>,
    #[serde(flatten)]
    pub summary: Summary,
    pub max_zf_residual: f64,
    pub max_power_excess: f64,
    pub feedback_mismatches: usize,
    pub forced_slots: usize,
}

pub fn summarize_run(o: &RunOutcome, cells: usize) -> CampaignSummary {
    CampaignSummary {
        scheduler: o.run.kind,
        eps: o.run.eps,
        codebook_bits: o.codebook_bits,
        summary: summarize(&o.users, cells),
        max_zf_residual: o.slots.iter().map(|s| s.zf_residual).fold(0.0, f64::max),
        max_power_excess: o.slots.iter().map(|s| s.power_excess).fold(f64::NEG_INFINITY, f64::max),
        feedback_mismatches: o.slots.iter().filter(|s| s.feedback_bits != s.expected_feedback_bits).count(),
        forced_slots: o.slots.iter().filter(|s| s.forced).count(),
    }
}

/// Throughput campaign on static channels.
pub fn run_cdf_campaign(config: &ExperimentConfig, seed: u64) -> Result<Vec<RunOutcome>> {
    let scenario = Scenario::new(&config.layout)?;
    let spec = CampaignSpec { drops: config.drops, csi: config.csi, mobility: None, parallel: config.parallel };
    run_campaign(&scenario, &spec, &campaign_runs(config), seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheduler: SchedulerKind,
    pub eps: f64,
    pub cell_average: f64,
    pub cell_edge: f64,
    pub mean_q: f64,
}

/// Cell-average and cell-edge throughput over the threshold grid, perfect CSI.
pub fn run_threshold_sweep(config: &ExperimentConfig, seed: u64) -> Result<Vec<SweepRow>> {
    let scenario = Scenario::new(&config.layout)?;
    let spec = CampaignSpec { drops: config.drops, csi: CsiMode::Perfect, mobility: None, parallel: config.parallel };
    let runs: Vec<Run> =
        config.sweep.schedulers.iter().flat_map(|&kind| config.sweep.eps.iter().map(move |&eps| Run { kind, eps })).collect();
    let outcomes = run_campaign(&scenario, &spec, &runs, seed)?;
    let cells = scenario.num_bs();
    Ok(outcomes
        .iter()
        .map(|o| {
            let s = summarize(&o.users, cells);
            SweepRow { scheduler: o.run.kind, eps: o.run.eps, cell_average: s.cell_average, cell_edge: s.cell_edge, mean_q: s.mean_q }
        })
        .collect())
}

/// Threshold with the highest cell-average throughput for `kind`, and whether
/// it lies strictly inside the grid.
pub fn best_threshold(rows: &[SweepRow], kind: SchedulerKind) -> Option<(f64, bool)> {
    let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.scheduler == kind).collect();
    let best = mine.iter().copied().fold(None::<&SweepRow>, |b, r| match b {
        Some(b) if b.cell_average >= r.cell_average => Some(b),
        _ => Some(r),
    })?;
    let lo = mine.iter().map(|r| r.eps).fold(f64::INFINITY, f64::min);
    let hi = mine.iter().map(|r| r.eps).fold(f64::NEG_INFINITY, f64::max);
    Some((best.eps, best.eps > lo && best.eps < hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayOutcome {
    pub speed_kmh: f64,
    pub still: Vec<RunOutcome>,
    pub moving: Vec<RunOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayRow {
    pub scheduler: SchedulerKind,
    pub eps: f64,
    pub speed_kmh: f64,
    pub cell_average_still: f64,
    pub cell_average_moving: f64,
    pub cell_edge_still: f64,
    pub cell_edge_moving: f64,
    /// Two-sample KS distance between the pooled throughputs.
    pub ks_distance: f64,
    /// Paired over drops, moving minus still.
    pub mean_difference: f64,
    pub t: f64,
    pub p_less: f64,
}

/// The same drops at zero speed and at the configured speed, one slot of delay.
pub fn run_delay_campaign(config: &ExperimentConfig, seed: u64) -> Result<DelayOutcome> {
    if !(config.mobility.speed_kmh > 0.0) {
        return Err(HarnessError::Config("the delay experiment needs a positive speed".into()));
    }
    let scenario = Scenario::new(&config.layout)?;
    let runs = campaign_runs(config);
    let still_mobility = Mobility { speed_kmh: 0.0, ..config.mobility };
    let mut spec = CampaignSpec { drops: config.drops, csi: config.csi, mobility: Some(still_mobility), parallel: config.parallel };
    let still = run_campaign(&scenario, &spec, &runs, seed)?;
    spec.mobility = Some(config.mobility);
    let moving = run_campaign(&scenario, &spec, &runs, seed)?;
    Ok(DelayOutcome { speed_kmh: config.mobility.speed_kmh, still, moving })
}

pub fn delay_rows(outcome: &DelayOutcome, cells: usize) -> Vec<DelayRow> {
    outcome
        .still
        .iter()
        .zip(&outcome.moving)
        .map(|(a, b)| {
            let (sa, sb) = (summarize(&a.users, cells), summarize(&b.users, cells));
            let ks = ks_two_sample(&sorted_copy(&throughputs(&a.users)), &sorted_copy(&throughputs(&b.users)));
            let test = paired_t_test(&per_drop_average(&b.users), &per_drop_average(&a.users));
            DelayRow {
                scheduler: a.run.kind,
                eps: a.run.eps,
                speed_kmh: outcome.speed_kmh,
                cell_average_still: sa.cell_average,
                cell_average_moving: sb.cell_average,
                cell_edge_still: sa.cell_edge,
                cell_edge_moving: sb.cell_edge,
                ks_distance: ks,
                mean_difference: test.mean_difference,
                t: test.t,
                p_less: test.p_less,
            }
        })
        .collect()
}
