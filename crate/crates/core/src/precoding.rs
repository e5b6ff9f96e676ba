//! Zero-forcing precoding with sum-rate optimal power allocation under
//! per-BS power constraints, and link evaluation on the true channels.

use alloc::vec::Vec;

use num_traits::Float;

use crate::linalg::{ensure_full_row_rank, unit_scaled, CMatrix, C64, RANK_TOLERANCE};
use crate::{Error, Result};

/// Right pseudo-inverse `G = H^H (H H^H)^{-1}` of an `L x (M N_t)` channel matrix.
pub fn zf_beamformer(h: &CMatrix) -> Result<CMatrix> {
    let (l, n) = h.shape();
    if l == 0 {
        return Err(Error::EmptyUserSet);
    }
    if l > n {
        return Err(Error::RankDeficient { rows: (0..l).collect() });
    }
    let (unit, scale) = unit_scaled(h);
    let svd = unit.clone().svd(false, false);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    if !(smax > 0.0) || svd.singular_values.iter().any(|&s| s <= RANK_TOLERANCE * smax) {
        ensure_full_row_rank(h)?;
        return Err(Error::RankDeficient { rows: (0..l).collect() });
    }
    // H^H = QR gives G = Q R^{-H}
    let qr = unit.adjoint().qr();
    let r_h = qr.r().adjoint();
    let x = r_h.solve_lower_triangular(&CMatrix::identity(l, l)).ok_or_else(|| Error::RankDeficient { rows: (0..l).collect() })?;
    Ok(qr.q() * x.unscale(scale))
}

/// `c[m][l] = |g_{m,l}|^2`: energy of beam `l` on the antennas of BS `m`.
pub fn per_bs_beam_energy(g: &CMatrix, antennas_per_bs: usize) -> Result<Vec<Vec<f64>>> {
    if antennas_per_bs == 0 || !g.nrows().is_multiple_of(antennas_per_bs) {
        return Err(Error::invalid("antennas_per_bs", "must divide the number of transmit antennas"));
    }
    let m = g.nrows() / antennas_per_bs;
    Ok((0..m)
        .map(|bs| (0..g.ncols()).map(|l| (0..antennas_per_bs).map(|a| g[(bs * antennas_per_bs + a, l)].norm_sqr()).sum()).collect())
        .collect())
}

/// Result of the per-BS power allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Receive power of each user in watts.
    pub p: Vec<f64>,
    /// Radiated power of each BS.
    pub per_bs_power: Vec<f64>,
    /// Bound on the distance to the optimum in nats.
    pub duality_gap: f64,
    pub newton_steps: usize,
}

const GAP_TOLERANCE: f64 = 1e-10;
const BARRIER_GROWTH: f64 = 16.0;
const MAX_CENTERING_STEPS: usize = 100;

/// Maximizes `sum_l ln(1 + p_l / sigma2_l)` subject to
/// `sum_l p_l c[m][l] <= P_m` for every BS `m` and `p >= 0`.
///
/// Log-barrier interior-point method on the SNRs `x_l = p_l / sigma2_l`,
/// with the constraints rescaled to `sum_l a[m][l] x_l <= 1`. The central path
/// gap `(M + L) / t` is driven below `1e-10` relative to the objective.
pub fn allocate_power(c: &[Vec<f64>], sigma2: &[f64], p_max: &[f64]) -> Result<PowerAllocation> {
    let m = c.len();
    let l = sigma2.len();
    if p_max.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: p_max.len() });
    }
    if let Some(row) = c.iter().find(|r| r.len() != l) {
        return Err(Error::DimensionMismatch { expected: l, found: row.len() });
    }
    if p_max.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::invalid("p_max", "per-BS power must be non-negative"));
    }
    if sigma2.iter().any(|&s| !(s > 0.0)) || c.iter().flatten().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid("sigma2", "noise variances must be positive and beam energies non-negative"));
    }
    // users radiating on a BS without budget cannot be served
    let served: Vec<usize> = (0..l).filter(|&u| (0..m).all(|bs| p_max[bs] > 0.0 || c[bs][u] == 0.0)).collect();
    let rows: Vec<Vec<f64>> = (0..m)
        .filter(|&bs| p_max[bs] > 0.0 && served.iter().any(|&u| c[bs][u] > 0.0))
        .map(|bs| served.iter().map(|&u| sigma2[u] * c[bs][u] / p_max[bs]).collect())
        .collect();
    let n = served.len();
    let unbounded = (0..n).any(|j| rows.iter().all(|r| r[j] == 0.0));
    if unbounded {
        return Err(Error::invalid("c", "a user's beam radiates no power, its rate is unbounded"));
    }
    let (x, gap, newton_steps) = if n == 0 { (Vec::new(), 0.0, 0) } else { barrier_solve(&rows, n) };
    let mut p = alloc::vec![0.0; l];
    for (j, &u) in served.iter().enumerate() {
        p[u] = x[j] * sigma2[u];
    }
    let per_bs_power = (0..m).map(|bs| (0..l).map(|u| p[u] * c[bs][u]).sum()).collect();
    Ok(PowerAllocation { p, per_bs_power, duality_gap: gap, newton_steps })
}

/// Maximizes `sum_j ln(1 + x_j)` over `a x <= 1`, `x >= 0`; returns the
/// solution, the gap bound and the number of Newton steps.
fn barrier_solve(a: &[Vec<f64>], n: usize) -> (Vec<f64>, f64, usize) {
    let k = a.len();
    let slack = |x: &[f64]| -> Vec<f64> { a.iter().map(|r| 1.0 - r.iter().zip(x).map(|(a, x)| a * x).sum::<f64>()).collect() };
    let load = a.iter().map(|r| r.iter().sum::<f64>()).fold(0.0f64, f64::max);
    let mut x = alloc::vec![0.5 / load; n];
    let constraints = (k + n) as f64;
    let mut t = 1.0;
    let mut steps = 0;
    loop {
        // centering: Newton ascent on t f(x) + sum log slack + sum log x
        for _ in 0..MAX_CENTERING_STEPS {
            steps += 1;
            let s = slack(&x);
            let mut grad = nalgebra::DVector::<f64>::zeros(n);
            let mut hess = nalgebra::DMatrix::<f64>::zeros(n, n);
            for j in 0..n {
                grad[j] = t / (1.0 + x[j]) + 1.0 / x[j];
                hess[(j, j)] = t / ((1.0 + x[j]) * (1.0 + x[j])) + 1.0 / (x[j] * x[j]);
            }
            for (r, sr) in a.iter().zip(&s) {
                for i in 0..n {
                    grad[i] -= r[i] / sr;
                    for j in 0..n {
                        hess[(i, j)] += r[i] * r[j] / (sr * sr);
                    }
                }
            }
            let Some(chol) = hess.clone().cholesky() else { break };
            let dir = chol.solve(&grad);
            let decrement = grad.dot(&dir);
            if decrement < 1e-9 {
                break;
            }
            let value = |x: &[f64]| -> f64 {
                let s = slack(x);
                if s.iter().any(|&v| v <= 0.0) || x.iter().any(|&v| v <= 0.0) {
                    return f64::NEG_INFINITY;
                }
                t * x.iter().map(|v| v.ln_1p()).sum::<f64>() + s.iter().map(|v| v.ln()).sum::<f64>() + x.iter().map(|v| v.ln()).sum::<f64>()
            };
            let current = value(&x);
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(x, d)| x + step * d).collect();
                if value(&trial) >= current + 0.25 * step * decrement {
                    x = trial;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let objective: f64 = x.iter().map(|v| v.ln_1p()).sum();
        let gap = constraints / t;
        if gap <= GAP_TOLERANCE * objective.max(1.0) {
            // the objective increases in every x_j: move onto the binding constraint
            let peak = a.iter().map(|r| r.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>()).fold(0.0f64, f64::max);
            if peak > 0.0 && peak < 1.0 {
                for v in x.iter_mut() {
                    *v /= peak;
                }
            }
            return (x, gap, steps);
        }
        t *= BARRIER_GROWTH;
    }
}

#[cfg(test)]
fn objective(p: &[f64], sigma2: &[f64]) -> f64 {
    p.iter().zip(sigma2).map(|(p, s)| (p / s).ln_1p()).sum()
}

/// ZF beamformer with per-BS constrained power allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSolution {
    pub g: CMatrix,
    pub p: Vec<f64>,
    /// `W = G diag(sqrt(p))`.
    pub w: CMatrix,
    pub per_bs_power: Vec<f64>,
    pub duality_gap: f64,
}

impl PrecoderSolution {
    /// Nominal sum rate `sum_l log2(1 + p_l / sigma2_l)` in bit/s/Hz.
    pub fn nominal_sum_rate(&self, sigma2: &[f64]) -> f64 {
        self.p.iter().zip(sigma2).map(|(p, s)| (1.0 + p / s).log2()).sum()
    }
}

/// Precodes the users whose (possibly estimated) channels are the rows of `h_used`.
pub fn precode(h_used: &CMatrix, sigma2: &[f64], p_max: &[f64], antennas_per_bs: usize) -> Result<PrecoderSolution> {
    if sigma2.len() != h_used.nrows() {
        return Err(Error::DimensionMismatch { expected: h_used.nrows(), found: sigma2.len() });
    }
    if antennas_per_bs * p_max.len() != h_used.ncols() {
        return Err(Error::DimensionMismatch { expected: antennas_per_bs * p_max.len(), found: h_used.ncols() });
    }
    let g = zf_beamformer(h_used)?;
    let c = per_bs_beam_energy(&g, antennas_per_bs)?;
    let alloc = allocate_power(&c, sigma2, p_max)?;
    let mut w = g.clone();
    for (j, p) in alloc.p.iter().enumerate() {
        w.column_mut(j).scale_mut(p.sqrt());
    }
    Ok(PrecoderSolution { g, p: alloc.p, w, per_bs_power: alloc.per_bs_power, duality_gap: alloc.duality_gap })
}

/// ZF + per-BS power allocation sum rate of a user set.
pub fn zf_sum_rate(h: &CMatrix, sigma2: &[f64], p_max: &[f64], antennas_per_bs: usize) -> Result<f64> {
    Ok(precode(h, sigma2, p_max, antennas_per_bs)?.nominal_sum_rate(sigma2))
}

/// Per-user SINR and Shannon rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPerformance {
    pub sinr: Vec<f64>,
    pub rate_bps_hz: Vec<f64>,
}

impl LinkPerformance {
    pub fn sum_rate(&self) -> f64 {
        self.rate_bps_hz.iter().sum()
    }
}

/// SINR of every user under the true channels `h_true` (rows) and precoder `w` (columns).
pub fn evaluate_links(h_true: &CMatrix, w: &CMatrix, sigma2: &[f64]) -> Result<LinkPerformance> {
    if h_true.ncols() != w.nrows() {
        return Err(Error::DimensionMismatch { expected: h_true.ncols(), found: w.nrows() });
    }
    if h_true.nrows() != w.ncols() || sigma2.len() != h_true.nrows() {
        return Err(Error::DimensionMismatch { expected: h_true.nrows(), found: w.ncols() });
    }
    let gains = h_true * w;
    let l = h_true.nrows();
    let mut sinr = Vec::with_capacity(l);
    for u in 0..l {
        let signal = gains[(u, u)].norm_sqr();
        let interference: f64 = (0..l).filter(|&j| j != u).map(|j| gains[(u, j)].norm_sqr()).sum();
        sinr.push(signal / (interference + sigma2[u]));
    }
    let rate_bps_hz = sinr.iter().map(|s| (1.0 + s).log2()).collect();
    Ok(LinkPerformance { sinr, rate_bps_hz })
}

/// `|H G - I|_F`.
pub fn zf_residual(h: &CMatrix, g: &CMatrix) -> f64 {
    let prod = h * g;
    let mut acc = 0.0;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let t = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            acc += (prod[(i, j)] - t).norm_sqr();
        }
    }
    acc.sqrt()
}
