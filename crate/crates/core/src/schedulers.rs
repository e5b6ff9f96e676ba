//! User selection for one coordinated cluster.
//!
//! The channel-norm schedulers ([`nus_schedule`], [`localnus_schedule`],
//! [`lus_schedule`]) pick users greedily from upper bounds `mu` on the channel
//! cosine and the resulting lower bound on the orthogonally projected norm.
//! [`sus_schedule`], [`gus_schedule`] and [`rus_schedule`] are the full-CSI and
//! random baselines. [`rr_wrap`] turns any of them into a round-robin period
//! that serves the whole pool once.

use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::channel::GlobalChannel;
use crate::linalg::{ensure_full_row_rank, inner, norm_sqr, unit_scaled, CMatrix, CVector, C64};
use crate::{Error, Result};

/// What the control unit knows about a user under NUS: its sublink norms.
#[derive(Debug, Clone, PartialEq)]
pub struct NormView {
    pub norms: Vec<f64>,
    pub sigma2: f64,
}

impl NormView {
    pub fn from_channel(channel: &GlobalChannel, sigma2: f64) -> Self {
        NormView { norms: channel.sublink_norms(), sigma2 }
    }

    pub fn energy(&self) -> f64 {
        self.norms.iter().map(|n| n * n).sum()
    }
}

/// LocalNUS view: sublink norms plus the full sublink to the local BS.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalView {
    pub local_bs: usize,
    pub local: CVector,
    pub norms: Vec<f64>,
    pub sigma2: f64,
}

impl LocalView {
    pub fn from_channel(channel: &GlobalChannel, local_bs: usize, sigma2: f64) -> Self {
        LocalView { local_bs, local: channel.sublinks[local_bs].clone(), norms: channel.sublink_norms(), sigma2 }
    }

    pub fn energy(&self) -> f64 {
        self.norms.iter().map(|n| n * n).sum()
    }
}

/// LUS view: large-scale gains only.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleView {
    pub alpha: Vec<f64>,
    pub sigma2: f64,
}

impl LargeScaleView {
    pub fn total_gain(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// Full channel knowledge (SUS, GUS).
#[derive(Debug, Clone, PartialEq)]
pub struct FullCsiView {
    pub channel: CVector,
    pub sigma2: f64,
}

impl FullCsiView {
    pub fn from_channel(channel: &GlobalChannel, sigma2: f64) -> Self {
        FullCsiView { channel: channel.composed.clone(), sigma2 }
    }
}

/// Largest number of users served in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Limits {
    pub max_users: usize,
}

impl Limits {
    /// `min(M N_t, M K)`.
    pub fn cluster(num_bs: usize, antennas_per_bs: usize, users_per_cell: usize) -> Self {
        Limits { max_users: (num_bs * antennas_per_bs).min(num_bs * users_per_cell) }
    }
}

/// Bound values of one surviving candidate after a pruning step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurvivorDiagnostics {
    pub user: usize,
    /// Cosine bound (or measured cosine for SUS) against the latest selected user.
    pub mu: f64,
    /// Selection metric numerator (lower bound or projected norm).
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    /// Candidates left in the pool when the step was taken.
    pub pool_size: usize,
    pub selected: usize,
    /// Winning metric value (`nu / sigma^2`, or the sum rate for GUS).
    pub metric: f64,
    pub survivors: Vec<SurvivorDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScheduleResult {
    pub selected: Vec<usize>,
    pub steps: Vec<StepRecord>,
}

/// `h (I - H^H (H H^H)^{-1} H) h^H`: energy of `h` orthogonal to the rows of `h_s`.
pub fn projected_norm(h: &CVector, h_s: &CMatrix) -> Result<f64> {
    let total = norm_sqr(h);
    if h_s.nrows() == 0 {
        return Ok(total);
    }
    if h_s.ncols() != h.len() {
        return Err(Error::DimensionMismatch { expected: h_s.ncols(), found: h.len() });
    }
    ensure_full_row_rank(h_s)?;
    let svd = unit_scaled(h_s).0.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^H");
    let mut inside = 0.0;
    for k in 0..v_t.nrows() {
        let c: C64 = (0..h.len()).map(|j| h[j] * v_t[(k, j)].conj()).sum();
        inside += c.norm_sqr();
    }
    Ok((total - inside).max(0.0))
}

fn check_norms(v: &[f64], name: &'static str) -> Result<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) {
        return Err(Error::invalid(name, "needs at least one positive entry"));
    }
    Ok(n)
}

/// `sum_n |h_in| |h_jn| / (|h_i| |h_j|)`, an upper bound on the channel cosine.
pub fn mu_upper(norms_i: &[f64], norms_j: &[f64]) -> Result<f64> {
    if norms_i.len() != norms_j.len() {
        return Err(Error::DimensionMismatch { expected: norms_i.len(), found: norms_j.len() });
    }
    let ni = check_norms(norms_i, "norms_i")?;
    let nj = check_norms(norms_j, "norms_j")?;
    let dot: f64 = norms_i.iter().zip(norms_j).map(|(a, b)| a * b).sum();
    Ok((dot / (ni * nj)).min(1.0))
}

/// `|h_i|^2 (1 - sum_j mu_j^2)`; not clamped at zero.
pub fn nu_lower(norm2: f64, mus: &[f64]) -> f64 {
    norm2 * (1.0 - mus.iter().map(|m| m * m).sum::<f64>())
}

/// Tighter cosine bound for LocalNUS: when both users share a local BS the
/// corresponding summand is the exact `|h_im h_jm^H|`.
pub fn mu_bar(candidate: &LocalView, selected: &LocalView) -> Result<f64> {
    let ni = check_norms(&candidate.norms, "candidate")?;
    let nj = check_norms(&selected.norms, "selected")?;
    let m = candidate.local_bs;
    let mut num = 0.0;
    for n in 0..candidate.norms.len() {
        num += if n == m && selected.local_bs == m {
            inner(&candidate.local, &selected.local).norm()
        } else {
            candidate.norms[n] * selected.norms[n]
        };
    }
    Ok((num / (ni * nj)).min(1.0))
}

/// Cosine bound from large-scale gains: `sum sqrt(a_in a_jn) / sqrt(sum a_i sum a_j)`.
pub fn mu_lus(alpha_i: &[f64], alpha_j: &[f64]) -> Result<f64> {
    if alpha_i.len() != alpha_j.len() {
        return Err(Error::DimensionMismatch { expected: alpha_i.len(), found: alpha_j.len() });
    }
    if alpha_i.iter().chain(alpha_j).any(|&a| !(a >= 0.0)) {
        return Err(Error::invalid("alpha", "gains must be non-negative"));
    }
    let si: f64 = alpha_i.iter().sum();
    let sj: f64 = alpha_j.iter().sum();
    if !(si > 0.0 && sj > 0.0) {
        return Err(Error::invalid("alpha", "needs at least one positive gain"));
    }
    let num: f64 = alpha_i.iter().zip(alpha_j).map(|(a, b)| (a * b).sqrt()).sum();
    Ok((num / (si.sqrt() * sj.sqrt())).min(1.0))
}

/// `alpha_i (1 - sum_j mu_j^2)` with `alpha_i = sum_n alpha_in`.
pub fn nu_lus(alpha_i: &[f64], mus: &[f64]) -> f64 {
    nu_lower(alpha_i.iter().sum(), mus)
}

fn check_pool(pool: &[usize], users: usize) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(Error::EmptyUserSet);
    }
    let mut sorted = pool.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != pool.len() {
        return Err(Error::invalid("pool", "duplicate user index"));
    }
    if sorted.last().is_some_and(|&u| u >= users) {
        return Err(Error::invalid("pool", "user index out of range"));
    }
    Ok(sorted)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid("eps", "threshold must lie in (0, 1]"));
    }
    Ok(())
}

fn check_limits(limits: Limits) -> Result<()> {
    if limits.max_users == 0 {
        return Err(Error::invalid("max_users", "must be at least 1"));
    }
    Ok(())
}

/// Index into `cands` of the largest `metric`, lowest user index on ties.
fn argmax<F: FnMut(usize) -> f64>(cands: &[usize], mut metric: F) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &u) in cands.iter().enumerate() {
        let v = metric(u);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best
}

/// Shared successive selection of NUS, LocalNUS and LUS.
fn successive<E, S, M>(pool: &[usize], eps: f64, limits: Limits, energy: E, sigma2: S, mut mu: M) -> Result<ScheduleResult>
where
    E: Fn(usize) -> f64,
    S: Fn(usize) -> f64,
    M: FnMut(usize, usize) -> Result<f64>,
{
    let mut cands = pool.to_vec();
    let mut sum_mu2 = alloc::vec![0.0; cands.len()];
    let (k, metric) = argmax(&cands, |u| energy(u) / sigma2(u)).expect("pool is not empty");
    let mut selected = alloc::vec![cands[k]];
    let mut steps = alloc::vec![StepRecord { pool_size: cands.len(), selected: cands[k], metric, survivors: Vec::new() }];
    cands.remove(k);
    sum_mu2.remove(k);
    loop {
        let latest = *selected.last().expect("non-empty");
        let mut kept = Vec::with_capacity(cands.len());
        let mut kept_mu2 = Vec::with_capacity(cands.len());
        let mut survivors = Vec::with_capacity(cands.len());
        for (idx, &u) in cands.iter().enumerate() {
            let m = mu(u, latest)?;
            if m <= eps {
                let s = sum_mu2[idx] + m * m;
                kept.push(u);
                kept_mu2.push(s);
                survivors.push(SurvivorDiagnostics { user: u, mu: m, nu: energy(u) * (1.0 - s) });
            }
        }
        cands = kept;
        sum_mu2 = kept_mu2;
        if cands.is_empty() || selected.len() >= limits.max_users {
            break;
        }
        let (k, metric) = argmax(&cands, |u| {
            let idx = cands.iter().position(|&c| c == u).expect("candidate");
            energy(u) * (1.0 - sum_mu2[idx]) / sigma2(u)
        })
        .expect("non-empty");
        steps.push(StepRecord { pool_size: cands.len(), selected: cands[k], metric, survivors });
        selected.push(cands[k]);
        cands.remove(k);
        sum_mu2.remove(k);
    }
    Ok(ScheduleResult { selected, steps })
}

/// Norm-based user scheduler.
pub fn nus_schedule(views: &[NormView], pool: &[usize], eps: f64, limits: Limits) -> Result<ScheduleResult> {
    check_eps(eps)?;
    check_limits(limits)?;
    let pool = check_pool(pool, views.len())?;
    successive(&pool, eps, limits, |u| views[u].energy(), |u| views[u].sigma2, |i, j| mu_upper(&views[i].norms, &views[j].norms))
}

/// NUS with the local-channel refinement of the cosine bound.
pub fn localnus_schedule(views: &[LocalView], pool: &[usize], eps: f64, limits: Limits) -> Result<ScheduleResult> {
    check_eps(eps)?;
    check_limits(limits)?;
    let pool = check_pool(pool, views.len())?;
    successive(&pool, eps, limits, |u| views[u].energy(), |u| views[u].sigma2, |i, j| mu_bar(&views[i], &views[j]))
}

/// Large-scale-gain based scheduler; depends on `alpha` and `sigma2` only.
pub fn lus_schedule(views: &[LargeScaleView], pool: &[usize], eps: f64, limits: Limits) -> Result<ScheduleResult> {
    check_eps(eps)?;
    check_limits(limits)?;
    let pool = check_pool(pool, views.len())?;
    successive(&pool, eps, limits, |u| views[u].total_gain(), |u| views[u].sigma2, |i, j| mu_lus(&views[i].alpha, &views[j].alpha))
}

/// Residual energy below which a candidate counts as inside the selected span.
const SPAN_TOLERANCE: f64 = 1e-12;

/// Semi-orthogonal user selection with the metric divided by `sigma^2`.
///
/// Candidates are pruned against the orthogonalized component `g_l` of the
/// latest selected user: kept while `|h_i g_l^H| / (|h_i| |g_l|) <= eps`.
pub fn sus_schedule(views: &[FullCsiView], pool: &[usize], eps: f64, limits: Limits) -> Result<ScheduleResult> {
    check_eps(eps)?;
    check_limits(limits)?;
    let pool = check_pool(pool, views.len())?;
    let mut cands = pool.clone();
    let mut residual: Vec<CVector> = cands.iter().map(|&u| views[u].channel.clone()).collect();
    let energy: Vec<f64> = cands.iter().map(|&u| norm_sqr(&views[u].channel)).collect();
    let mut energy_left = energy.clone();
    let (k, metric) = argmax(&cands, |u| norm_sqr(&views[u].channel) / views[u].sigma2).expect("non-empty");
    let mut selected = alloc::vec![cands[k]];
    let mut steps = alloc::vec![StepRecord { pool_size: cands.len(), selected: cands[k], metric, survivors: Vec::new() }];
    let mut g = residual[k].clone();
    let mut energy_all = energy;
    cands.remove(k);
    residual.remove(k);
    energy_all.remove(k);
    energy_left.remove(k);
    loop {
        let gn = norm_sqr(&g).sqrt();
        let q = &g / C64::new(gn, 0.0);
        let mut kept = Vec::new();
        let mut kept_res = Vec::new();
        let mut kept_energy = Vec::new();
        let mut survivors = Vec::new();
        for (idx, &u) in cands.iter().enumerate() {
            let h = &views[u].channel;
            let c = inner(h, &q);
            let cosine = c.norm() / energy_all[idx].sqrt();
            if cosine <= eps {
                let mut r = residual[idx].clone();
                r -= &q * c;
                let left = norm_sqr(&r);
                if left > SPAN_TOLERANCE * energy_all[idx] {
                    survivors.push(SurvivorDiagnostics { user: u, mu: cosine, nu: left });
                    kept.push(u);
                    kept_res.push(r);
                    kept_energy.push(energy_all[idx]);
                }
            }
        }
        cands = kept;
        residual = kept_res;
        energy_all = kept_energy;
        if cands.is_empty() || selected.len() >= limits.max_users {
            break;
        }
        let (k, metric) = argmax(&cands, |u| {
            let idx = cands.iter().position(|&c| c == u).expect("candidate");
            norm_sqr(&residual[idx]) / views[u].sigma2
        })
        .expect("non-empty");
        steps.push(StepRecord { pool_size: cands.len(), selected: cands[k], metric, survivors });
        selected.push(cands[k]);
        g = residual.remove(k);
        cands.remove(k);
        energy_all.remove(k);
    }
    Ok(ScheduleResult { selected, steps })
}

/// Greedy sum-rate scheduler. `rate` returns the ZF sum rate of a user set;
/// sets that ZF cannot serve (rank deficient) are skipped.
pub fn gus_schedule<F>(pool: &[usize], limits: Limits, mut rate: F) -> Result<ScheduleResult>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    check_limits(limits)?;
    if pool.is_empty() {
        return Err(Error::EmptyUserSet);
    }
    let mut cands = pool.to_vec();
    cands.sort_unstable();
    let mut selected: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    let mut current = 0.0f64;
    let mut trial = Vec::with_capacity(limits.max_users);
    while !cands.is_empty() && selected.len() < limits.max_users {
        let mut best: Option<(usize, f64)> = None;
        let mut survivors = Vec::with_capacity(cands.len());
        for (k, &u) in cands.iter().enumerate() {
            trial.clear();
            trial.extend_from_slice(&selected);
            trial.push(u);
            let r = match rate(&trial) {
                Ok(r) => r,
                Err(Error::RankDeficient { .. }) => continue,
                Err(e) => return Err(e),
            };
            survivors.push(SurvivorDiagnostics { user: u, mu: f64::NAN, nu: r });
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((k, r));
            }
        }
        let Some((k, r)) = best else { break };
        if !(r > current + 1e-9 * current.abs()) {
            break;
        }
        current = r;
        steps.push(StepRecord { pool_size: cands.len(), selected: cands[k], metric: r, survivors });
        selected.push(cands.remove(k));
    }
    Ok(ScheduleResult { selected, steps })
}

/// Uniformly random selection of `min(max_users, |pool|)` distinct users.
pub fn rus_schedule<R: Rng + ?Sized>(pool: &[usize], limits: Limits, rng: &mut R) -> Result<ScheduleResult> {
    check_limits(limits)?;
    if pool.is_empty() {
        return Err(Error::EmptyUserSet);
    }
    let mut sorted = pool.to_vec();
    sorted.sort_unstable();
    let amount = limits.max_users.min(sorted.len());
    let picks = rand::seq::index::sample(rng, sorted.len(), amount);
    let selected: Vec<usize> = picks.iter().map(|k| sorted[k]).collect();
    Ok(ScheduleResult { selected, steps: Vec::new() })
}

/// One round-robin period: the per-slot schedules that together serve the pool once.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RrPeriod {
    pub slots: Vec<ScheduleResult>,
}

impl RrPeriod {
    /// Number of slots `Q` in the period.
    pub fn q(&self) -> usize {
        self.slots.len()
    }

    pub fn groups(&self) -> Vec<Vec<usize>> {
        self.slots.iter().map(|s| s.selected.clone()).collect()
    }

    /// Slot in which `user` is served.
    pub fn slot_of(&self, user: usize) -> Option<usize> {
        self.slots.iter().position(|s| s.selected.contains(&user))
    }
}

/// Applies `schedule` to the shrinking pool until every user has been served.
///
/// `schedule` receives the remaining users (sorted) and may keep state across
/// slots. If it returns no user, `best_single` picks one so the period
/// terminates.
pub fn rr_wrap<S, B>(pool: &[usize], mut schedule: S, mut best_single: B) -> Result<RrPeriod>
where
    S: FnMut(&[usize]) -> Result<ScheduleResult>,
    B: FnMut(&[usize]) -> usize,
{
    let mut remaining = pool.to_vec();
    remaining.sort_unstable();
    remaining.dedup();
    if remaining.len() != pool.len() {
        return Err(Error::invalid("pool", "duplicate user index"));
    }
    let mut slots = Vec::new();
    while !remaining.is_empty() {
        let mut result = schedule(&remaining)?;
        if result.selected.is_empty() {
            let forced = best_single(&remaining);
            result = ScheduleResult { selected: alloc::vec![forced], steps: Vec::new() };
        }
        for u in &result.selected {
            let Some(k) = remaining.iter().position(|r| r == u) else {
                return Err(Error::invalid("schedule", "selected a user outside the remaining pool"));
            };
            remaining.remove(k);
        }
        slots.push(result);
    }
    Ok(RrPeriod { slots })
}
