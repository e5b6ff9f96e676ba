//! Special functions and unit conversions.

use alloc::vec::Vec;

use num_traits::Float;

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Bessel function of the first kind, integer order `n`.
pub fn bessel_jn(n: i32, x: f64) -> f64 {
    libm::jn(n, x)
}

/// Laguerre polynomials `L_0(x), ..., L_degree(x)` by the three-term recurrence.
pub fn laguerre_sequence(degree: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree + 1);
    laguerre_into(degree, x, &mut out);
    out
}

/// Same as [`laguerre_sequence`] but reuses `out`.
pub fn laguerre_into(degree: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if degree == 0 {
        return;
    }
    out.push(1.0 - x);
    for k in 1..degree {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
}

/// `(x)_r / r!` for the rising factorial `(x)_r = x (x+1) ... (x+r-1)`.
pub fn pochhammer_over_factorial(x: f64, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, k| acc * (x + k as f64) / (k as f64 + 1.0))
}

pub fn db_to_linear(db: f64) -> f64 {
    10.0.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Thermal noise power in watts: `-174 dBm/Hz + 10 log10(B) + NF`.
pub fn thermal_noise_watts(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    let dbm = -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db;
    db_to_linear(dbm - 30.0)
}
