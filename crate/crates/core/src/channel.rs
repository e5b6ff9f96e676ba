//! Spatially correlated Rayleigh fading and global multi-BS channels.
//!
//! A sublink from BS `n` to user `i` is `sqrt(alpha_in) * g * R^{1/2}` with
//! `g ~ CN(0, I)`. The global channel concatenates the `M` sublinks in BS order.

use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::linalg::{complex_gaussian_vector, hermitian_sqrt, norm_sqr, CMatrix, CVector, C64};
use crate::quadrature::QuadratureRule;
use crate::special::bessel_j0;
use crate::{Error, Result};

/// Eigenvalue clamp used for the Hermitian square root.
pub const SQRT_TOLERANCE: f64 = 1e-12;

/// Gauss-Hermite order for the single-bounce correlation integral.
pub const SINGLE_BOUNCE_ORDER: usize = 96;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Transmit spatial correlation of one sublink: Hermitian, PSD, unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: CMatrix,
}

impl CorrelationMatrix {
    pub fn identity(n: usize) -> Self {
        CorrelationMatrix { entries: CMatrix::identity(n, n) }
    }

    /// Validates a user-supplied matrix.
    pub fn new(entries: CMatrix) -> Result<Self> {
        crate::linalg::check_hermitian(&entries, 1e-9)?;
        for i in 0..entries.nrows() {
            if (entries[(i, i)] - C64::new(1.0, 0.0)).norm() > 1e-9 {
                return Err(Error::invalid("correlation", "diagonal must be one"));
            }
        }
        hermitian_sqrt(&entries, 1e-9)?;
        Ok(CorrelationMatrix { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn sqrt(&self) -> Result<CMatrix> {
        hermitian_sqrt(&self.entries, SQRT_TOLERANCE)
    }
}

/// Single-bounce transmit correlation of a uniform linear array.
///
/// `R[p, q] = E[exp(j 2 pi s (p - q) sin(theta))]` with departure angle
/// `theta ~ N(bearing, spread^2)`. A spread of a full circle or more is
/// isotropic and returns the identity.
pub fn single_bounce_correlation(
    bearing_rad: f64,
    angular_spread_rad: f64,
    antennas: usize,
    spacing_wavelengths: f64,
) -> Result<CorrelationMatrix> {
    let rule = QuadratureRule::gauss_hermite(SINGLE_BOUNCE_ORDER)?;
    single_bounce_correlation_with(&rule, bearing_rad, angular_spread_rad, antennas, spacing_wavelengths)
}

/// [`single_bounce_correlation`] with a caller-held Gauss-Hermite rule.
pub fn single_bounce_correlation_with(
    rule: &QuadratureRule,
    bearing_rad: f64,
    angular_spread_rad: f64,
    antennas: usize,
    spacing_wavelengths: f64,
) -> Result<CorrelationMatrix> {
    if antennas < 1 {
        return Err(Error::invalid("antennas", "need at least one antenna"));
    }
    if !(angular_spread_rad > 0.0) {
        return Err(Error::invalid("angular_spread_rad", "must be positive"));
    }
    if angular_spread_rad >= 2.0 * core::f64::consts::PI {
        return Ok(CorrelationMatrix::identity(antennas));
    }
    let norm = 1.0 / core::f64::consts::PI.sqrt();
    let scale = 2.0f64.sqrt() * angular_spread_rad;
    let mut lag = Vec::with_capacity(antennas);
    for k in 0..antennas {
        let a = 2.0 * core::f64::consts::PI * spacing_wavelengths * k as f64;
        let mut acc = C64::new(0.0, 0.0);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let phase = a * (bearing_rad + scale * x).sin();
            acc += C64::new(phase.cos(), phase.sin()) * w;
        }
        lag.push(acc * norm);
    }
    let entries = CMatrix::from_fn(antennas, antennas, |p, q| {
        if p == q {
            C64::new(1.0, 0.0)
        } else if p > q {
            lag[p - q]
        } else {
            lag[q - p].conj()
        }
    });
    Ok(CorrelationMatrix { entries })
}

/// Draws `g R^{1/2}` from a cached square root.
#[derive(Debug, Clone)]
pub struct CorrelatedSampler {
    sqrt: CMatrix,
}

impl CorrelatedSampler {
    pub fn new(correlation: &CorrelationMatrix) -> Result<Self> {
        Ok(CorrelatedSampler { sqrt: correlation.sqrt()? })
    }

    pub fn dim(&self) -> usize {
        self.sqrt.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let g = complex_gaussian_vector(self.dim(), rng);
        // row vector times matrix
        self.sqrt.transpose() * g
    }
}

/// One draw of `h = g R^{1/2}` with `g ~ CN(0, I)`.
pub fn sample_small_scale<R: Rng + ?Sized>(correlation: &CorrelationMatrix, rng: &mut R) -> Result<CVector> {
    Ok(CorrelatedSampler::new(correlation)?.sample(rng))
}

/// The channel of one user towards all coordinated base stations.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalChannel {
    pub sublinks: Vec<CVector>,
    pub composed: CVector,
}

impl GlobalChannel {
    pub fn num_bs(&self) -> usize {
        self.sublinks.len()
    }

    pub fn sublink_norms(&self) -> Vec<f64> {
        self.sublinks.iter().map(|s| norm_sqr(s).sqrt()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.composed)
    }

    /// Rebuilds a global channel from (already scaled) sublink vectors.
    pub fn from_sublinks(sublinks: Vec<CVector>) -> Self {
        let total: usize = sublinks.iter().map(|s| s.len()).sum();
        let composed = CVector::from_iterator(total, sublinks.iter().flat_map(|s| s.iter().copied()));
        GlobalChannel { sublinks, composed }
    }
}

/// Scales small-scale sublink `n` by `sqrt(alpha[n])` and concatenates in BS order.
pub fn compose_global(alpha_row: &[f64], small_scales: &[CVector]) -> Result<GlobalChannel> {
    if alpha_row.len() != small_scales.len() {
        return Err(Error::DimensionMismatch { expected: alpha_row.len(), found: small_scales.len() });
    }
    if let Some(a) = alpha_row.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::invalid("alpha", alloc::format!("gain {a} is negative")));
    }
    let sublinks = alpha_row.iter().zip(small_scales).map(|(&a, h)| h * C64::new(a.sqrt(), 0.0)).collect();
    Ok(GlobalChannel::from_sublinks(sublinks))
}

/// Maximum Doppler shift `v / lambda` for a speed in km/h and a carrier in Hz.
pub fn doppler_hz(speed_kmh: f64, carrier_hz: f64) -> f64 {
    speed_kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT
}

/// Lag-one correlation `J0(2 pi f_d dt)` of the Jakes spectrum.
pub fn jakes_lag_correlation(doppler_hz: f64, slot_s: f64) -> f64 {
    bessel_j0(2.0 * core::f64::consts::PI * doppler_hz * slot_s)
}

/// Time-correlated small-scale fading of one user's sublinks.
///
/// Evolves as a first-order Gauss-Markov process
/// `h[t+1] = rho h[t] + sqrt(1 - rho^2) w[t]` with `rho` the Jakes lag-one
/// correlation and `w` drawn with the same spatial correlation, which keeps the
/// marginal law at every slot.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    samplers: Vec<CorrelatedSampler>,
    state: Vec<CVector>,
    doppler_hz: f64,
    slot_s: f64,
    rho: f64,
}

impl FadingProcess {
    pub fn new<R: Rng + ?Sized>(correlations: &[CorrelationMatrix], doppler_hz: f64, slot_s: f64, rng: &mut R) -> Result<Self> {
        if !(doppler_hz >= 0.0) || !(slot_s > 0.0) {
            return Err(Error::invalid("doppler", "Doppler must be non-negative and the slot positive"));
        }
        let samplers = correlations.iter().map(CorrelatedSampler::new).collect::<Result<Vec<_>>>()?;
        let state = samplers.iter().map(|s| s.sample(rng)).collect();
        Ok(FadingProcess { samplers, state, doppler_hz, slot_s, rho: jakes_lag_correlation(doppler_hz, slot_s) })
    }

    pub fn doppler_hz(&self) -> f64 {
        self.doppler_hz
    }

    pub fn slot_s(&self) -> f64 {
        self.slot_s
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Current small-scale sublinks.
    pub fn current(&self) -> &[CVector] {
        &self.state
    }

    /// Advances one slot. A static channel (`rho == 1`) consumes no randomness.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.rho == 1.0 {
            return;
        }
        let innovation = (1.0 - self.rho * self.rho).max(0.0).sqrt();
        for (h, s) in self.state.iter_mut().zip(&self.samplers) {
            let w = s.sample(rng);
            *h = &*h * C64::new(self.rho, 0.0) + w * C64::new(innovation, 0.0);
        }
    }

    /// Advances `steps` slots and returns the sublinks after each one.
    pub fn evolve<R: Rng + ?Sized>(&mut self, steps: usize, rng: &mut R) -> Vec<Vec<CVector>> {
        (0..steps)
            .map(|_| {
                self.step(rng);
                self.state.clone()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn empirical_covariance(samples: &[CVector]) -> CMatrix {
        let n = samples[0].len();
        let mut acc = CMatrix::zeros(n, n);
        for h in samples {
            // E[h^H h] for row vectors
            acc += h.conjugate() * h.transpose();
        }
        acc / C64::new(samples.len() as f64, 0.0)
    }

    #[test]
    fn full_circle_spread_is_uncorrelated() {
        let r = single_bounce_correlation(0.3, 2.0 * core::f64::consts::PI, 4, 0.5).unwrap();
        assert_eq!(r, CorrelationMatrix::identity(4));
    }

    #[test]
    fn single_antenna_is_scalar_one() {
        let r = single_bounce_correlation(0.0, 0.26, 1, 0.5).unwrap();
        assert_eq!(r.matrix()[(0, 0)], C64::new(1.0, 0.0));
        assert!(single_bounce_correlation(0.0, 0.26, 0, 0.5).is_err());
    }

    #[test]
    fn quadrature_agrees_with_monte_carlo_and_series() {
        let spread = 15f64.to_radians();
        let r = single_bounce_correlation(0.0, spread, 2, 0.5).unwrap();
        let quad = r.matrix()[(1, 0)];
        // Monte-Carlo over the departure angle
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, spread).unwrap();
        let n = 1_000_000;
        let mut acc = C64::new(0.0, 0.0);
        for _ in 0..n {
            let th: f64 = normal.sample(&mut rng);
            let ph = core::f64::consts::PI * th.sin();
            acc += C64::new(ph.cos(), ph.sin());
        }
        let mc = acc / n as f64;
        assert!((quad.norm() - mc.norm()).abs() < 1e-3, "quad {quad} mc {mc}");
        // Jacobi-Anger: E[e^{j a sin th}] = sum_n J_n(a) e^{-n^2 s^2 / 2} (zero bearing)
        let a = core::f64::consts::PI;
        let series: f64 =
            (-40..=40).map(|k: i32| crate::special::bessel_jn(k, a) * (-(k as f64).powi(2) * spread * spread / 2.0).exp()).sum();
        assert!((quad.re - series).abs() < 1e-10 && quad.im.abs() < 1e-10);
    }

    #[test]
    fn correlation_matrix_is_valid() {
        for &spread in &[5.0f64, 15.0, 35.0, 120.0] {
            let r = single_bounce_correlation(0.7, spread.to_radians(), 4, 0.5).unwrap();
            assert!(CorrelationMatrix::new(r.matrix().clone()).is_ok());
        }
    }

    #[test]
    fn identity_samples_are_white() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = CorrelationMatrix::identity(3);
        let s = CorrelatedSampler::new(&r).unwrap();
        let draws: Vec<CVector> = (0..100_000).map(|_| s.sample(&mut rng)).collect();
        let cov = empirical_covariance(&draws);
        assert!((cov - CMatrix::identity(3, 3)).norm() < 0.02);
    }

    #[test]
    fn correlated_samples_match_target_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = single_bounce_correlation(0.4, 15f64.to_radians(), 4, 0.5).unwrap();
        let s = CorrelatedSampler::new(&r).unwrap();
        let draws: Vec<CVector> = (0..100_000).map(|_| s.sample(&mut rng)).collect();
        let cov = empirical_covariance(&draws);
        assert!((cov - r.matrix()).norm() < 0.02 * 4.0f64.sqrt().max(1.0));
    }

    #[test]
    fn rank_one_draws_follow_principal_direction() {
        let u = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]) / C64::new(2f64.sqrt(), 0.0);
        // unit diagonal rank-one matrix 2 u^H u
        let m = (u.conjugate() * u.transpose()) * C64::new(2.0, 0.0);
        let r = CorrelationMatrix::new(m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let h = sample_small_scale(&r, &mut rng).unwrap();
            // h is a multiple of u: |h u^H| = |h| |u|
            let ip = crate::linalg::inner(&h, &u).norm();
            assert!((ip - norm_sqr(&h).sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn compose_scales_and_concatenates() {
        let a = CVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(0.5, -1.0)]);
        let b = CVector::from_vec(vec![C64::new(-1.0, 0.0), C64::new(0.0, 3.0)]);
        let g = compose_global(&[1.0], core::slice::from_ref(&a)).unwrap();
        assert_eq!(g.composed, a);
        let g = compose_global(&[4.0, 0.0], &[a.clone(), b.clone()]).unwrap();
        assert_eq!(g.composed.len(), 4);
        assert_eq!(g.sublinks[1], CVector::zeros(2));
        assert!((g.norm_sqr() - 4.0 * norm_sqr(&a)).abs() < 1e-12);
        let g = compose_global(&[0.3, 2.0], &[a, b]).unwrap();
        let parts: f64 = g.sublinks.iter().map(norm_sqr).sum();
        assert!((g.norm_sqr() - parts).abs() < 1e-14);
        assert!(compose_global(&[1.0], &[]).is_err());
    }

    #[test]
    fn composed_energy_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let alpha = [2.0, 0.25, 0.5];
        let r = single_bounce_correlation(0.2, 15f64.to_radians(), 4, 0.5).unwrap();
        let s = CorrelatedSampler::new(&r).unwrap();
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let smalls: Vec<CVector> = (0..3).map(|_| s.sample(&mut rng)).collect();
            acc += compose_global(&alpha, &smalls).unwrap().norm_sqr();
        }
        let expected = 4.0 * alpha.iter().sum::<f64>();
        assert!((acc / n as f64 - expected).abs() < 0.01 * expected);
    }

    #[test]
    fn doppler_and_lag_correlation() {
        let fd = doppler_hz(30.0, 2e9);
        assert!((fd - 55.6).abs() < 0.05);
        let rho = jakes_lag_correlation(fd, 0.005);
        // J0(1.746) from an independent series evaluation
        let x = 2.0 * core::f64::consts::PI * fd * 0.005;
        let mut term = 1.0;
        let mut series = 1.0;
        for k in 1..40 {
            term *= -(x * x / 4.0) / (k as f64 * k as f64);
            series += term;
        }
        assert!((rho - series).abs() < 1e-12);
        assert!((rho - 0.37).abs() < 0.005);
        assert_eq!(jakes_lag_correlation(doppler_hz(0.0, 2e9), 0.005), 1.0);
    }

    #[test]
    fn static_process_never_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = [CorrelationMatrix::identity(2), CorrelationMatrix::identity(2)];
        let mut p = FadingProcess::new(&r, 0.0, 0.005, &mut rng).unwrap();
        let first = p.current().to_vec();
        for snap in p.evolve(10, &mut rng) {
            assert_eq!(snap, first);
        }
    }

    #[test]
    fn lag_one_autocorrelation_matches_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = [CorrelationMatrix::identity(1)];
        let fd = doppler_hz(30.0, 2e9);
        let mut p = FadingProcess::new(&r, fd, 0.005, &mut rng).unwrap();
        let n = 100_000;
        let mut prev = p.current()[0][0];
        let (mut num, mut den) = (C64::new(0.0, 0.0), 0.0);
        for _ in 0..n {
            p.step(&mut rng);
            let cur = p.current()[0][0];
            num += cur * prev.conj();
            den += prev.norm_sqr();
            prev = cur;
        }
        let est = (num / den).re;
        assert!((est - p.rho()).abs() < 0.01, "est {est} rho {}", p.rho());
    }

    #[test]
    fn evolution_preserves_marginal_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r = single_bounce_correlation(0.1, 15f64.to_radians(), 2, 0.5).unwrap();
        let fd = doppler_hz(30.0, 2e9);
        let lanes = 20_000;
        let mut start = Vec::with_capacity(lanes);
        let mut later = Vec::with_capacity(lanes);
        for _ in 0..lanes {
            let mut p = FadingProcess::new(core::slice::from_ref(&r), fd, 0.005, &mut rng).unwrap();
            start.push(p.current()[0].clone());
            for _ in 0..100 {
                p.step(&mut rng);
            }
            later.push(p.current()[0].clone());
        }
        let c0 = empirical_covariance(&start);
        let c1 = empirical_covariance(&later);
        assert!((c0 - &c1).norm() < 0.05);
        assert!((c1 - r.matrix()).norm() < 0.05);
    }
}
