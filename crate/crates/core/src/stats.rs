//! Empirical distribution helpers used by the Monte-Carlo checks.

use alloc::vec::Vec;

use num_traits::Float;

/// Kolmogorov-Smirnov distance between the empirical CDF of `sorted` and `cdf`.
///
/// `sorted` must be ascending.
pub fn ks_distance<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance; both inputs ascending.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// CDF of `Beta(1, b)`: `1 - (1 - x)^b`.
pub fn beta_1_b_cdf(x: f64, b: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        1.0 - (1.0 - x).powf(b)
    }
}

/// Percentile `p` in `[0, 1]` with linear interpolation between order statistics
/// (position `p (n - 1)` in the sorted sample). `sorted` must be ascending and non-empty.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Histogram density of samples in `[0, 1]` over `bins` equal bins.
pub fn unit_histogram_density(samples: &[f64], bins: usize) -> Vec<f64> {
    let mut counts = alloc::vec![0usize; bins];
    for &x in samples {
        let b = ((x * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = samples.len() as f64;
    counts.iter().map(|&c| c as f64 * bins as f64 / n).collect()
}

/// L1 distance between two densities tabulated on the same equal-width bins of `[0, 1]`.
pub fn l1_distance_unit(a: &[f64], b: &[f64]) -> f64 {
    let w = 1.0 / a.len() as f64;
    a.iter().zip(b).map(|(x, y)| (x - y).abs() * w).sum()
}
