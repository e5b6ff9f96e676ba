//! Throughput statistics over pooled users.

use compsched_core::stats::{mean, percentile_sorted, sorted_copy};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::sim::UserRecord;

/// Percentile used for the cell-edge throughput.
pub const CELL_EDGE_PERCENTILE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// Mean normalized throughput over every user of every drop.
    pub cell_average: f64,
    /// 5th percentile of the same sample.
    pub cell_edge: f64,
    pub per_cell_average: Vec<f64>,
    pub mean_q: f64,
    pub samples: usize,
}

pub fn throughputs(users: &[UserRecord]) -> Vec<f64> {
    users.iter().map(|u| u.normalized_throughput).collect()
}

pub fn summarize(users: &[UserRecord], cells: usize) -> Summary {
    let t = throughputs(users);
    let sorted = sorted_copy(&t);
    let per_cell_average =
        (0..cells).map(|c| mean(&users.iter().filter(|u| u.cell == c).map(|u| u.normalized_throughput).collect::<Vec<_>>())).collect();
    // Q repeats once per user; averaging over users equals averaging over drops
    let mean_q = mean(&users.iter().map(|u| u.q as f64).collect::<Vec<_>>());
    Summary {
        cell_average: mean(&t),
        cell_edge: if sorted.is_empty() { f64::NAN } else { percentile_sorted(&sorted, CELL_EDGE_PERCENTILE) },
        per_cell_average,
        mean_q,
        samples: t.len(),
    }
}

/// Mean normalized throughput of each drop, in drop order.
pub fn per_drop_average(users: &[UserRecord]) -> Vec<f64> {
    let drops = users.iter().map(|u| u.drop + 1).max().unwrap_or(0);
    let mut sum = vec![0.0; drops];
    let mut count = vec![0usize; drops];
    for u in users {
        sum[u.drop] += u.normalized_throughput;
        count[u.drop] += 1;
    }
    sum.iter().zip(&count).filter(|(_, &c)| c > 0).map(|(s, &c)| s / c as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTest {
    pub mean_difference: f64,
    pub t: f64,
    /// One-sided p-value for `mean(a - b) < 0`.
    pub p_less: f64,
    pub pairs: usize,
}

/// Paired t-test of `a` against `b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> PairedTest {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let m = mean(&d);
    if n < 2 {
        return PairedTest { mean_difference: m, t: f64::NAN, p_less: f64::NAN, pairs: n };
    }
    let var = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = m / (var / n as f64).sqrt();
    let p_less = if var == 0.0 {
        if m < 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("degrees of freedom are positive").cdf(t)
    };
    PairedTest { mean_difference: m, t, p_less, pairs: n }
}
