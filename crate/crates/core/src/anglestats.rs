//! Distribution of `cos^2` of the angle between two correlated complex
//! Gaussian channel vectors.
//!
//! Two routes are provided. [`cos2_mc`] samples both channels and works in
//! any dimension. For `N = 2` the conditional law of
//! `q_n = |h2 v_n^H|^2` given the direction `v1` of the first channel is a
//! Laguerre series whose coefficients come from the Taylor expansion of a
//! 4x4 determinant ([`conditional_q_pdf`]); marginalizing over sampled `v1`
//! gives [`cos2_pdf_semianalytic`].

use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::linalg::{hermitian_sqrt, inner, norm_sqr, CMatrix, CVector, C64};
use crate::quadrature::QuadratureRule;
use crate::special::{laguerre_into, pochhammer_over_factorial};
use crate::{Error, Result};

/// Residual norm below which a Gram-Schmidt seed counts as parallel to the span.
pub const GRAM_SCHMIDT_TOLERANCE: f64 = 1e-8;

/// Series coefficients below this magnitude are dropped. Every term of the
/// density is bounded by its coefficient, so this bounds the tail.
const COEFF_FLOOR: f64 = 1e-15;

/// Orthonormal basis whose first row is `v1`.
///
/// Seeds are the canonical vectors `e_1, e_2, ...` in order; a seed whose
/// residual against the running span is below [`GRAM_SCHMIDT_TOLERANCE`] is
/// skipped. Projections are applied twice for accuracy.
pub fn gram_schmidt_basis(v1: &CVector) -> Result<CMatrix> {
    complete_basis(v1, 0..v1.len())
}

/// Same as [`gram_schmidt_basis`] with the seeds taken in reverse order,
/// which yields a different completion of `v1`.
pub fn reversed_seed_basis(v1: &CVector) -> Result<CMatrix> {
    complete_basis(v1, (0..v1.len()).rev())
}

fn complete_basis(v1: &CVector, seeds: impl Iterator<Item = usize>) -> Result<CMatrix> {
    let n = v1.len();
    if n == 0 || (norm_sqr(v1).sqrt() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("v1", "must be a unit vector"));
    }
    let mut rows: Vec<CVector> = Vec::with_capacity(n);
    rows.push(v1.clone());
    for seed in seeds {
        if rows.len() == n {
            break;
        }
        let mut r = CVector::zeros(n);
        r[seed] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for q in &rows {
                let c = inner(&r, q);
                r -= q * c;
            }
        }
        let nr = norm_sqr(&r).sqrt();
        if nr < GRAM_SCHMIDT_TOLERANCE {
            continue;
        }
        rows.push(r / C64::new(nr, 0.0));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// `|h2 h1^H|^2 / (|h1|^2 |h2|^2)`.
pub fn cos2(h1: &CVector, h2: &CVector) -> f64 {
    let c = inner(h2, h1).norm_sqr() / (norm_sqr(h1) * norm_sqr(h2));
    c.clamp(0.0, 1.0)
}

/// `q_n = |h2 v_n^H|^2` for the rows `v_n` of `basis`.
pub fn q_vector(h2: &CVector, basis: &CMatrix) -> Vec<f64> {
    (0..basis.nrows()).map(|n| inner(h2, &crate::linalg::row(basis, n)).norm_sqr()).collect()
}

fn draw_nonzero<R: Rng + ?Sized>(sqrt: &CMatrix, rng: &mut R) -> CVector {
    loop {
        let g = crate::linalg::complex_gaussian_vector(sqrt.nrows(), rng);
        let h = sqrt.transpose() * g;
        if norm_sqr(&h) > 0.0 {
            return h;
        }
    }
}

/// Monte-Carlo draws of `cos^2 theta` for `h1 ~ CN(0, R1)`, `h2 ~ CN(0, R2)`.
pub fn cos2_mc<R: Rng + ?Sized>(r1: &CMatrix, r2: &CMatrix, samples: usize, rng: &mut R) -> Result<Vec<f64>> {
    if r1.nrows() != r2.nrows() {
        return Err(Error::DimensionMismatch { expected: r1.nrows(), found: r2.nrows() });
    }
    let s1 = hermitian_sqrt(r1, 1e-12)?;
    let s2 = hermitian_sqrt(r2, 1e-12)?;
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let h1 = draw_nonzero(&s1, rng);
        let h2 = draw_nonzero(&s2, rng);
        out.push(cos2(&h1, &h2));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesParams {
    /// Largest outer series index `r` kept.
    pub truncation_r: usize,
}

impl Default for SeriesParams {
    fn default() -> Self {
        SeriesParams { truncation_r: 64 }
    }
}

/// Polynomial in `(beta_1, beta_2)` with degree at most 4 in each variable.
#[derive(Debug, Clone, Copy, PartialEq)]
struct BiPoly([[f64; 5]; 5]);

impl BiPoly {
    const ZERO: BiPoly = BiPoly([[0.0; 5]; 5]);

    fn constant(c: f64) -> Self {
        let mut p = Self::ZERO;
        p.0[0][0] = c;
        p
    }

    /// `c * beta_var`
    fn linear(c: f64, var: usize) -> Self {
        let mut p = Self::ZERO;
        if var == 0 {
            p.0[1][0] = c;
        } else {
            p.0[0][1] = c;
        }
        p
    }

    fn mul(&self, o: &BiPoly) -> BiPoly {
        let mut out = Self::ZERO;
        for i in 0..5 {
            for j in 0..5 {
                if self.0[i][j] == 0.0 {
                    continue;
                }
                for k in 0..5 - i {
                    for l in 0..5 - j {
                        out.0[i + k][j + l] += self.0[i][j] * o.0[k][l];
                    }
                }
            }
        }
        out
    }

    fn add_scaled(&mut self, o: &BiPoly, s: f64) {
        for i in 0..5 {
            for j in 0..5 {
                self.0[i][j] += s * o.0[i][j];
            }
        }
    }
}

/// Taylor coefficients `C[n1][n2]` (`n_i` in `0..=2`) of
/// `g(beta) = det [[A~, B~], [-B~, A~]]` around `beta = 0`, where
/// `A~ = I + offdiag(a_ij beta_j)` and `B~ = offdiag(b_ij beta_j)`.
///
/// `g` is a polynomial, so the coefficients are read off an exact expansion
/// of the 4x4 determinant over all permutations.
pub fn determinant_taylor_coefficients(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 3]; 3] {
    let entry = |i: usize, j: usize| -> BiPoly {
        // block layout [[A~, B~], [-B~, A~]]
        let (bi, ii) = (i / 2, i % 2);
        let (bj, jj) = (j / 2, j % 2);
        let (is_a, sign) = match (bi, bj) {
            (0, 0) | (1, 1) => (true, 1.0),
            (0, 1) => (false, 1.0),
            _ => (false, -1.0),
        };
        if ii == jj {
            if is_a {
                BiPoly::constant(1.0)
            } else {
                BiPoly::ZERO
            }
        } else {
            let c = if is_a { a[ii][jj] } else { b[ii][jj] };
            BiPoly::linear(sign * c, jj)
        }
    };
    let mut det = BiPoly::ZERO;
    let mut perm = [0usize, 1, 2, 3];
    permutations(&mut perm, 0, &mut |p| {
        let mut term = BiPoly::constant(1.0);
        for (row, &col) in p.iter().enumerate() {
            term = term.mul(&entry(row, col));
        }
        det.add_scaled(&term, permutation_sign(p));
    });
    let mut c = [[0.0; 3]; 3];
    for (i, row) in c.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = det.0[i][j];
        }
    }
    c
}

fn permutations<F: FnMut(&[usize; 4])>(p: &mut [usize; 4], k: usize, f: &mut F) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, f);
        p.swap(k, i);
    }
}

fn permutation_sign(p: &[usize; 4]) -> f64 {
    let mut inversions = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Conditional joint density of `(q_1, q_2)` given `v1`, as a truncated
/// Laguerre series.
///
/// With `u_n = q_n / a_nn` the density is
/// `exp(-u_1 - u_2) / (a_11 a_22) * sum_k w_k L_k(u_1) L_k(u_2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalQDensity {
    a11: f64,
    a22: f64,
    weights: Vec<f64>,
}

impl ConditionalQDensity {
    pub fn a11(&self) -> f64 {
        self.a11
    }

    pub fn a22(&self) -> f64 {
        self.a22
    }

    /// Series weights `w_k`, already divided by `(a_11 a_22)^k`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eval(&self, q1: f64, q2: f64) -> f64 {
        if q1 < 0.0 || q2 < 0.0 {
            return 0.0;
        }
        let u1 = q1 / self.a11;
        let u2 = q2 / self.a22;
        let k = self.weights.len() - 1;
        let mut l1 = Vec::with_capacity(k + 1);
        let mut l2 = Vec::with_capacity(k + 1);
        laguerre_into(k, u1, &mut l1);
        laguerre_into(k, u2, &mut l2);
        let s: f64 = self.weights.iter().zip(l1.iter().zip(&l2)).map(|(w, (x, y))| w * x * y).sum();
        (-u1 - u2).exp() / (self.a11 * self.a22) * s
    }

    /// Density of `cos^2 theta = q_1 / (q_1 + q_2)` at `x`.
    ///
    /// Each Laguerre term of the change-of-variables integral over `q_2` is
    /// evaluated in closed form (see [`laguerre_pair_moment`]).
    pub fn cos2_density(&self, x: f64) -> f64 {
        if !(0.0..1.0).contains(&x) {
            return 0.0;
        }
        let denom = x * self.a22 + (1.0 - x) * self.a11;
        let t = x * self.a22 / denom;
        self.a11 * self.a22 / (denom * denom) * self.t_density(t)
    }

    /// Maps `cos^2 theta` to the variable `t = x a22 / (x a22 + (1 - x) a11)`
    /// in which the leading term of the density is uniform.
    pub fn to_t(&self, x: f64) -> f64 {
        let denom = x * self.a22 + (1.0 - x) * self.a11;
        if denom <= 0.0 {
            return x;
        }
        x * self.a22 / denom
    }

    /// Density of `t` on `[0, 1]`: `sum_k w_k I_k(t (1 - t))`.
    pub fn t_density(&self, t: f64) -> f64 {
        let p = t * (1.0 - t);
        let mut acc = self.weights[0];
        let mut e = 2.0; // C(2k, k) p^(k-1) at k = 1
        for (k, w) in self.weights.iter().enumerate().skip(1) {
            if k > 1 {
                let kf = k as f64;
                e *= (2.0 * kf) * (2.0 * kf - 1.0) / (kf * kf) * p;
            }
            let kf = k as f64;
            acc += w * e * ((2.0 * kf + 1.0) * p - 0.5 * kf);
        }
        acc
    }

    /// Probability mass of `cos^2 theta` in `[lo, hi]`.
    pub fn cos2_mass(&self, lo: f64, hi: f64, rules: &mut RuleCache) -> f64 {
        let t_lo = self.to_t(lo.clamp(0.0, 1.0));
        let t_hi = self.to_t(hi.clamp(0.0, 1.0));
        if t_hi <= t_lo {
            return 0.0;
        }
        // t_density is a polynomial of degree 2K in t; scale the order with the interval
        let degree = 2 * (self.weights.len() - 1);
        let exact = degree / 2 + 1;
        let n = ((1.5 * exact as f64 * (t_hi - t_lo)).ceil() as usize + 6).min(exact.max(6));
        let rule = rules.legendre(n);
        let half = 0.5 * (t_hi - t_lo);
        let mid = 0.5 * (t_hi + t_lo);
        rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * half * self.t_density(mid + half * x)).sum()
    }
}

/// `I_k(p) = int_0^inf s e^{-s} L_k(b1 s) L_k(b2 s) ds` for `b1 + b2 = 1`,
/// `p = b1 b2`, which equals `C(2k, k) p^(k-1) ((2k + 1) p - k / 2)` (and 1 at `k = 0`).
///
/// Follows from the double generating function
/// `(1 - t)(1 - u) / (1 - b2 t - b1 u)^2` of the moments.
pub fn laguerre_pair_moment(k: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut e = 2.0;
    for j in 2..=k {
        let jf = j as f64;
        e *= (2.0 * jf) * (2.0 * jf - 1.0) / (jf * jf) * p;
    }
    let kf = k as f64;
    e * ((2.0 * kf + 1.0) * p - 0.5 * kf)
}

/// Cache of Gauss-Legendre rules by order.
#[derive(Debug, Default)]
pub struct RuleCache {
    rules: Vec<Option<QuadratureRule>>,
}

impl RuleCache {
    pub fn legendre(&mut self, n: usize) -> &QuadratureRule {
        if self.rules.len() <= n {
            self.rules.resize(n + 1, None);
        }
        self.rules[n].get_or_insert_with(|| QuadratureRule::gauss_legendre(n).expect("order >= 1"))
    }
}

/// Univariate series `sum_{r <= R} (1/2)_r / r! (1 - g)^r` expanded literally
/// in powers of `Y = beta_1 beta_2`, for `g = 1 + g1 Y + g2 Y^2`.
///
/// Returns coefficients up to degree `2R`; those of degree `<= R` are complete.
/// Suffers cancellation for large `R`, see [`series_weights`].
pub fn direct_series_coefficients(g1: f64, g2: f64, truncation_r: usize) -> Vec<f64> {
    let deg = 2 * truncation_r;
    let mut out = alloc::vec![0.0; deg + 1];
    // 1 - g = -g1 Y - g2 Y^2
    let base = [0.0, -g1, -g2];
    let mut power = alloc::vec![0.0; deg + 1];
    power[0] = 1.0;
    for r in 0..=truncation_r {
        let c = pochhammer_over_factorial(0.5, r);
        for (o, p) in out.iter_mut().zip(&power) {
            *o += c * p;
        }
        let mut next = alloc::vec![0.0; deg + 1];
        for (i, &p) in power.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, &b) in base.iter().enumerate() {
                if i + j <= deg {
                    next[i + j] += p * b;
                }
            }
        }
        power = next;
    }
    out
}

/// Complete coefficients of degree `0..=R` of the `(1/2)_r` series, computed
/// degree by degree: they are the power-series coefficients of `g^{-1/2}`,
/// obtained with the J.C.P. Miller recurrence, which avoids the alternating
/// cancellation of the literal expansion.
pub fn series_weights(g1: f64, g2: f64, truncation_r: usize) -> Vec<f64> {
    let a = -0.5;
    let g = [1.0, g1, g2];
    let mut w = Vec::with_capacity(truncation_r + 1);
    w.push(1.0);
    for n in 1..=truncation_r {
        let mut acc = 0.0;
        for k in 1..=n.min(2) {
            acc += ((a + 1.0) * k as f64 - n as f64) * g[k] * w[n - k];
        }
        w.push(acc / n as f64);
    }
    w
}

/// Conditional density of `q` given the unit direction `v1` (`N = 2` only).
pub fn conditional_q_pdf(v1: &CVector, r2: &CMatrix, params: SeriesParams) -> Result<ConditionalQDensity> {
    if v1.len() != 2 {
        return Err(Error::Unsupported { found: v1.len(), reason: "the series density is implemented for N = 2" });
    }
    if r2.nrows() != 2 || r2.ncols() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: r2.nrows() });
    }
    let basis = gram_schmidt_basis(v1)?;
    let sigma = &basis * r2 * basis.adjoint();
    let a = [[sigma[(0, 0)].re, sigma[(0, 1)].re], [sigma[(1, 0)].re, sigma[(1, 1)].re]];
    let b = [[sigma[(0, 0)].im, sigma[(0, 1)].im], [sigma[(1, 0)].im, sigma[(1, 1)].im]];
    if !(a[0][0] > 0.0) || !(a[1][1] > 0.0) {
        return Err(Error::invalid("r2", "diagonal of V R2 V^H must be positive"));
    }
    let c = determinant_taylor_coefficients(&a, &b);
    // For a Hermitian covariance only powers of beta_1 beta_2 survive.
    let scale = c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    debug_assert!((0..3).all(|i| (0..3).all(|j| i == j || c[i][j].abs() <= 1e-9 * scale)), "unexpected mixed terms {c:?}");
    let norm = a[0][0] * a[1][1];
    let mut weights = series_weights(c[1][1] / norm, c[2][2] / (norm * norm), params.truncation_r);
    let keep = weights.iter().rposition(|w| w.abs() >= COEFF_FLOOR).unwrap_or(0);
    weights.truncate(keep + 1);
    Ok(ConditionalQDensity { a11: a[0][0], a22: a[1][1], weights })
}

/// Tabulated density on equal-width bins of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdfTable {
    /// Bin centres.
    pub x: Vec<f64>,
    /// Bin-averaged density.
    pub density: Vec<f64>,
}

impl PdfTable {
    pub fn bins(&self) -> usize {
        self.x.len()
    }

    pub fn bin_width(&self) -> f64 {
        1.0 / self.x.len() as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    pub fn l1_distance(&self, other: &PdfTable) -> f64 {
        crate::stats::l1_distance_unit(&self.density, &other.density)
    }

    /// Histogram table of samples in `[0, 1]`.
    pub fn from_samples(samples: &[f64], bins: usize) -> Self {
        PdfTable { x: bin_centres(bins), density: crate::stats::unit_histogram_density(samples, bins) }
    }

    /// Probability mass in `[0, x_hi]` rounded to whole bins.
    pub fn mass_below(&self, x_hi: f64) -> f64 {
        let w = self.bin_width();
        self.x.iter().zip(&self.density).filter(|(x, _)| **x < x_hi).map(|(_, d)| d * w).sum()
    }
}

fn bin_centres(bins: usize) -> Vec<f64> {
    (0..bins).map(|b| (b as f64 + 0.5) / bins as f64).collect()
}

/// Averages the series density of `cos^2 theta` over the given directions `v1`.
pub fn cos2_pdf_from_directions(r2: &CMatrix, directions: &[CVector], params: SeriesParams, bins: usize) -> Result<PdfTable> {
    if directions.is_empty() || bins == 0 {
        return Err(Error::invalid("directions", "need at least one direction and one bin"));
    }
    let mut rules = RuleCache::default();
    let mut density = alloc::vec![0.0; bins];
    let width = 1.0 / bins as f64;
    for v1 in directions {
        let d = conditional_q_pdf(v1, r2, params)?;
        for (b, slot) in density.iter_mut().enumerate() {
            let lo = b as f64 * width;
            *slot += d.cos2_mass(lo, lo + width, &mut rules);
        }
    }
    let total: f64 = density.iter().sum();
    for v in density.iter_mut() {
        *v /= total * width;
    }
    Ok(PdfTable { x: bin_centres(bins), density })
}

/// Semi-analytic density of `cos^2 theta` for `N = 2`.
///
/// The law of `v1` enters through `v1_samples` draws of `h1 ~ CN(0, R1)`; for
/// each draw the conditional series density is integrated exactly over
/// every bin, then the bins are averaged and renormalized.
pub fn cos2_pdf_semianalytic<R: Rng + ?Sized>(
    r1: &CMatrix,
    r2: &CMatrix,
    params: SeriesParams,
    v1_samples: usize,
    bins: usize,
    rng: &mut R,
) -> Result<PdfTable> {
    let directions = sample_directions(r1, v1_samples, rng)?;
    cos2_pdf_from_directions(r2, &directions, params, bins)
}

/// Unit directions `h1 / |h1|` with `h1 ~ CN(0, R1)`.
pub fn sample_directions<R: Rng + ?Sized>(r1: &CMatrix, count: usize, rng: &mut R) -> Result<Vec<CVector>> {
    if r1.nrows() != 2 {
        return Err(Error::Unsupported { found: r1.nrows(), reason: "the series density is implemented for N = 2" });
    }
    let s1 = hermitian_sqrt(r1, 1e-12)?;
    Ok((0..count)
        .map(|_| {
            let h = draw_nonzero(&s1, rng);
            let n = norm_sqr(&h).sqrt();
            h / C64::new(n, 0.0)
        })
        .collect())
}

/// Doubles the truncation (starting from 4) until two successive tables
/// differ by less than `tol` in L1, using the same directions throughout.
pub fn converge_truncation(r2: &CMatrix, directions: &[CVector], bins: usize, tol: f64, max_r: usize) -> Result<(SeriesParams, PdfTable)> {
    let mut params = SeriesParams { truncation_r: 4 };
    let mut table = cos2_pdf_from_directions(r2, directions, params, bins)?;
    while params.truncation_r < max_r {
        let next = SeriesParams { truncation_r: (params.truncation_r * 2).min(max_r) };
        let t = cos2_pdf_from_directions(r2, directions, next, bins)?;
        let change = t.l1_distance(&table);
        params = next;
        table = t;
        if change < tol {
            break;
        }
    }
    Ok((params, table))
}
