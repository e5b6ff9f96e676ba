//! Drop-level simulation: one user drop, one scheduler, one round-robin period.

use std::cell::RefCell;

use compsched_core::channel::SINGLE_BOUNCE_ORDER;
use compsched_core::channel::{compose_global, single_bounce_correlation_with, CorrelationMatrix, FadingProcess, GlobalChannel};
use compsched_core::feedback::{codebook_bits, feedback_bits_per_slot, quantize_channel, Codebook, FeedbackBudget, QuantizedSublink};
use compsched_core::linalg::{stack_rows, CVector};
use compsched_core::netgeom::{build_layout, compute_gains, drop_users, LargeScaleGains, NetworkLayout, PathlossModel, UserDrop};
use compsched_core::precoding::{evaluate_links, precode, zf_residual, zf_sum_rate};
use compsched_core::quadrature::QuadratureRule;
use compsched_core::schedulers::{
    gus_schedule, localnus_schedule, lus_schedule, nus_schedule, rr_wrap, rus_schedule, sus_schedule, FullCsiView, LargeScaleView, Limits,
    LocalView, NormView, ScheduleResult,
};
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CsiMode, LayoutSection, Mobility, SchedulerKind};
use crate::error::{HarnessError, Result};
use crate::seeds::{stream, Lane};

/// Fixed network description shared by all drops.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub layout: NetworkLayout,
    pub pathloss: PathlossModel,
    pub shadowing_db: f64,
    pub angular_spread_rad: f64,
    pub antenna_spacing: f64,
}

impl Scenario {
    pub fn new(section: &LayoutSection) -> Result<Self> {
        Ok(Scenario {
            layout: build_layout(&section.layout_config())?,
            pathloss: section.pathloss(),
            shadowing_db: section.shadowing_db,
            angular_spread_rad: section.angular_spread_deg.to_radians(),
            antenna_spacing: section.antenna_spacing_wavelengths,
        })
    }

    pub fn num_bs(&self) -> usize {
        self.layout.num_coordinated()
    }

    pub fn num_users(&self) -> usize {
        self.layout.num_users()
    }

    pub fn limits(&self) -> Limits {
        Limits::cluster(self.num_bs(), self.layout.antennas_per_bs, self.layout.users_per_cell)
    }

    pub fn power_caps(&self) -> Vec<f64> {
        vec![self.layout.max_power_w; self.num_bs()]
    }
}

/// Everything random about one drop that every scheduler shares.
#[derive(Debug, Clone)]
pub struct DropState {
    pub index: usize,
    pub users: UserDrop,
    pub gains: LargeScaleGains,
    /// `correlations[user][bs]`.
    pub correlations: Vec<Vec<CorrelationMatrix>>,
    pub fading: Vec<FadingProcess>,
}

impl DropState {
    pub fn generate(scenario: &Scenario, master: u64, index: usize, mobility: Option<&Mobility>) -> Result<Self> {
        let mut rng = stream(master, index, Lane::Geometry);
        let layout = &scenario.layout;
        let users = drop_users(layout, &mut rng)?;
        let gains = compute_gains(layout, &users, scenario.pathloss, scenario.shadowing_db, &mut rng)?;
        let rule = QuadratureRule::gauss_hermite(SINGLE_BOUNCE_ORDER)?;
        let mut correlations = Vec::with_capacity(users.len());
        for p in &users.positions {
            let row = layout
                .coordinated_bs_positions
                .iter()
                .map(|bs| {
                    // angle from the array broadside, taken as the +y axis
                    let bearing = (p.x - bs.x).atan2(p.y - bs.y);
                    single_bounce_correlation_with(
                        &rule,
                        bearing,
                        scenario.angular_spread_rad,
                        layout.antennas_per_bs,
                        scenario.antenna_spacing,
                    )
                })
                .collect::<compsched_core::Result<Vec<_>>>()?;
            correlations.push(row);
        }
        let (doppler, slot) = match mobility {
            Some(m) => (m.doppler_hz(), m.slot_s),
            None => (0.0, Mobility::default().slot_s),
        };
        let fading =
            correlations.iter().map(|c| FadingProcess::new(c, doppler, slot, &mut rng)).collect::<compsched_core::Result<Vec<_>>>()?;
        Ok(DropState { index, users, gains, correlations, fading })
    }

    fn channels(&self, fading: &[FadingProcess]) -> compsched_core::Result<Vec<GlobalChannel>> {
        fading.iter().enumerate().map(|(u, f)| compose_global(&self.gains.alpha[u], f.current())).collect()
    }
}

/// Per-user outcome of one drop; one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct UserRecord {
    pub drop: usize,
    pub user: usize,
    pub cell: usize,
    pub slot_served: usize,
    pub rate: f64,
    #[serde(rename = "Q")]
    pub q: usize,
    pub normalized_throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub drop: usize,
    pub slot: usize,
    pub selected: Vec<usize>,
    pub sum_rate: f64,
    /// `|H G - I|_F` on the channel used for precoding.
    pub zf_residual: f64,
    /// `max_m (P_m radiated - P_max)`.
    pub power_excess: f64,
    pub duality_gap: f64,
    pub feedback_bits: u64,
    pub expected_feedback_bits: u64,
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropOutcome {
    pub users: Vec<UserRecord>,
    pub slots: Vec<SlotRecord>,
    pub q: usize,
    pub codebook_bits: Option<u32>,
}

struct Pending {
    decision: Vec<GlobalChannel>,
    transmit: Vec<GlobalChannel>,
    /// Channels a one-phase scheduler decided on (reconstructed when quantized).
    one_phase: Option<Vec<GlobalChannel>>,
    bits: u64,
}

fn context(drop: usize, slot: Option<usize>, kind: SchedulerKind) -> impl Fn(compsched_core::Error) -> HarnessError {
    move |source| HarnessError::Simulation { drop, slot, scheduler: kind.name(), source }
}

fn codebooks_for(drop: &DropState, master: u64, bits: u32) -> compsched_core::Result<Vec<Vec<Codebook>>> {
    let mut seeds = stream(master, drop.index, Lane::Codebooks);
    drop.correlations.iter().map(|row| row.iter().map(|r| Codebook::generate(r, bits, seeds.next_u64())).collect()).collect()
}

/// Runs one round-robin period of `kind` on `drop`.
///
/// Each slot decides on the current channels, advances the fading by one
/// slot, then transmits on the advanced channels; with a static channel the
/// two coincide.
pub fn simulate_drop(
    scenario: &Scenario,
    drop: &DropState,
    kind: SchedulerKind,
    eps: f64,
    csi: CsiMode,
    master: u64,
) -> Result<DropOutcome> {
    let err = context(drop.index, None, kind);
    let m = scenario.num_bs();
    let k = scenario.layout.users_per_cell;
    let n_t = scenario.layout.antennas_per_bs;
    let n_users = scenario.num_users();
    let limits = scenario.limits();
    let p_max = scenario.power_caps();
    let sigma2 = &drop.gains.sigma2;
    let alpha = &drop.gains.alpha;
    let class = kind.feedback_class();

    let (bits, books) = match csi {
        CsiMode::Perfect => (None, None),
        CsiMode::Quantized { per_user_bits, total_bits } => {
            let budget = FeedbackBudget { per_user: per_user_bits, total: total_bits };
            let b = codebook_bits(class, m, k, limits.max_users, budget).map_err(&err)?;
            (Some(b), Some(codebooks_for(drop, master, b).map_err(&err)?))
        }
    };

    let fading = RefCell::new(drop.fading.clone());
    let pending: RefCell<Vec<Pending>> = RefCell::new(Vec::new());
    let mut evolution = stream(master, drop.index, Lane::Evolution);
    let mut picker = stream(master, drop.index, Lane::Scheduler);
    let pool: Vec<usize> = (0..n_users).collect();

    let schedule = |remaining: &[usize]| -> compsched_core::Result<ScheduleResult> {
        let mut f = fading.borrow_mut();
        let decision = drop.channels(&f)?;
        for process in f.iter_mut() {
            process.step(&mut evolution);
        }
        let transmit = drop.channels(&f)?;
        let mut spent = 0u64;
        let mut one_phase = None;
        let result = match kind {
            SchedulerKind::Nus => {
                let views: Vec<NormView> = decision.iter().zip(sigma2).map(|(h, &s)| NormView::from_channel(h, s)).collect();
                nus_schedule(&views, remaining, eps, limits)?
            }
            SchedulerKind::Localnus => {
                let mut views = Vec::with_capacity(n_users);
                for (u, h) in decision.iter().enumerate() {
                    let lb = drop.gains.local_bs(u);
                    let mut v = LocalView::from_channel(h, lb, sigma2[u]);
                    if let (Some(books), Some(b)) = (&books, bits) {
                        let q = QuantizedSublink::new(&h.sublinks[lb], &books[u][lb])?;
                        v.local = q.reconstruct(&books[u][lb]);
                        spent += u64::from(b);
                    }
                    views.push(v);
                }
                localnus_schedule(&views, remaining, eps, limits)?
            }
            SchedulerKind::Lus => {
                let views: Vec<LargeScaleView> =
                    alpha.iter().zip(sigma2).map(|(a, &s)| LargeScaleView { alpha: a.clone(), sigma2: s }).collect();
                lus_schedule(&views, remaining, eps, limits)?
            }
            SchedulerKind::Rus => rus_schedule(remaining, limits, &mut picker)?,
            SchedulerKind::Sus | SchedulerKind::Gus => {
                let seen = match &books {
                    Some(books) => {
                        let mut out = Vec::with_capacity(n_users);
                        for (u, h) in decision.iter().enumerate() {
                            let q = quantize_channel(h, &books[u])?;
                            spent += q.bits;
                            out.push(q.reconstructed);
                        }
                        out
                    }
                    None => decision.clone(),
                };
                let result = if kind == SchedulerKind::Sus {
                    let views: Vec<FullCsiView> = seen.iter().zip(sigma2).map(|(h, &s)| FullCsiView::from_channel(h, s)).collect();
                    sus_schedule(&views, remaining, eps, limits)?
                } else {
                    let mut noise = Vec::with_capacity(limits.max_users);
                    gus_schedule(remaining, limits, |set| {
                        let rows: Vec<&CVector> = set.iter().map(|&u| &seen[u].composed).collect();
                        noise.clear();
                        noise.extend(set.iter().map(|&u| sigma2[u]));
                        zf_sum_rate(&stack_rows(&rows)?, &noise, &p_max, n_t)
                    })?
                };
                one_phase = Some(seen);
                result
            }
        };
        pending.borrow_mut().push(Pending { decision, transmit, one_phase, bits: spent });
        Ok(result)
    };
    let best_single = |remaining: &[usize]| -> usize {
        let p = pending.borrow();
        let decision = &p.last().expect("a slot was scheduled").decision;
        let snr = |u: usize| decision[u].norm_sqr() / sigma2[u];
        remaining.iter().copied().fold(remaining[0], |b, u| if snr(u) > snr(b) { u } else { b })
    };
    let period = rr_wrap(&pool, schedule, best_single).map_err(&err)?;
    let pending = pending.into_inner();
    let q = period.q();

    let mut rate = vec![f64::NAN; n_users];
    let mut served = vec![usize::MAX; n_users];
    let mut slots = Vec::with_capacity(q);
    for (t, (slot, p)) in period.slots.iter().zip(&pending).enumerate() {
        let err = context(drop.index, Some(t), kind);
        let selected = &slot.selected;
        let mut spent = p.bits;
        let used: Vec<CVector> = match (&p.one_phase, &books) {
            (Some(seen), _) => selected.iter().map(|&u| seen[u].composed.clone()).collect(),
            (None, Some(books)) => {
                let mut rows = Vec::with_capacity(selected.len());
                for &u in selected {
                    let q = quantize_channel(&p.transmit[u], &books[u]).map_err(&err)?;
                    spent += q.bits;
                    rows.push(q.reconstructed.composed);
                }
                rows
            }
            (None, None) => selected.iter().map(|&u| p.transmit[u].composed.clone()).collect(),
        };
        let used_refs: Vec<&CVector> = used.iter().collect();
        let h_used = stack_rows(&used_refs).map_err(&err)?;
        let true_refs: Vec<&CVector> = selected.iter().map(|&u| &p.transmit[u].composed).collect();
        let h_true = stack_rows(&true_refs).map_err(&err)?;
        let noise: Vec<f64> = selected.iter().map(|&u| sigma2[u]).collect();
        let sol = precode(&h_used, &noise, &p_max, n_t).map_err(&err)?;
        let links = evaluate_links(&h_true, &sol.w, &noise).map_err(&err)?;
        for (l, &u) in selected.iter().enumerate() {
            rate[u] = links.rate_bps_hz[l];
            served[u] = t;
        }
        let power_excess = sol.per_bs_power.iter().zip(&p_max).map(|(p, c)| p - c).fold(f64::NEG_INFINITY, f64::max);
        slots.push(SlotRecord {
            drop: drop.index,
            slot: t,
            selected: selected.clone(),
            sum_rate: links.sum_rate(),
            zf_residual: zf_residual(&h_used, &sol.g),
            power_excess,
            duality_gap: sol.duality_gap,
            feedback_bits: if bits.is_some() { spent } else { 0 },
            expected_feedback_bits: bits.map_or(0, |b| feedback_bits_per_slot(class, m, k, selected.len(), b)),
            forced: slot.steps.is_empty() && kind != SchedulerKind::Rus,
        });
    }
    let users = (0..n_users)
        .map(|u| UserRecord {
            drop: drop.index,
            user: u,
            cell: drop.users.home_cell[u],
            slot_served: served[u],
            rate: rate[u],
            q,
            normalized_throughput: rate[u] / q as f64,
        })
        .collect();
    Ok(DropOutcome { users, slots, q, codebook_bits: bits })
}

/// One scheduler at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Run {
    pub kind: SchedulerKind,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run: Run,
    pub users: Vec<UserRecord>,
    pub slots: Vec<SlotRecord>,
    pub q: Vec<usize>,
    pub codebook_bits: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignSpec {
    pub drops: usize,
    pub csi: CsiMode,
    /// `None` keeps the channel static over the period.
    pub mobility: Option<Mobility>,
    pub parallel: bool,
}

/// Simulates every run on the same `drops` user drops.
pub fn run_campaign(scenario: &Scenario, spec: &CampaignSpec, runs: &[Run], master: u64) -> Result<Vec<RunOutcome>> {
    let one = |d: usize| -> Result<Vec<DropOutcome>> {
        let state = DropState::generate(scenario, master, d, spec.mobility.as_ref())?;
        runs.iter().map(|r| simulate_drop(scenario, &state, r.kind, r.eps, spec.csi, master)).collect()
    };
    let per_drop: Vec<Vec<DropOutcome>> = if spec.parallel {
        (0..spec.drops).into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        (0..spec.drops).map(one).collect::<Result<_>>()?
    };
    let mut out: Vec<RunOutcome> =
        runs.iter().map(|&run| RunOutcome { run, users: Vec::new(), slots: Vec::new(), q: Vec::new(), codebook_bits: None }).collect();
    for drop in per_drop {
        for (o, d) in out.iter_mut().zip(drop) {
            o.users.extend(d.users);
            o.slots.extend(d.slots);
            o.q.push(d.q);
            o.codebook_bits = d.codebook_bits;
        }
    }
    Ok(out)
}
