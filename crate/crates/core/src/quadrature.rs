//! Gaussian quadrature rules built with the Golub-Welsch eigenvalue method.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

use crate::{Error, Result};

/// Nodes and weights of an `n`-point rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i f(x_i)`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Gauss-Hermite rule for the weight `exp(-x^2)` on the real line.
    pub fn gauss_hermite(n: usize) -> Result<Self> {
        check_order(n)?;
        let diag = alloc::vec![0.0; n];
        let off: Vec<f64> = (1..n).map(|i| (i as f64 / 2.0).sqrt()).collect();
        Ok(golub_welsch(&diag, &off, core::f64::consts::PI.sqrt()))
    }

    /// Gauss-Legendre rule on `[-1, 1]`.
    pub fn gauss_legendre(n: usize) -> Result<Self> {
        check_order(n)?;
        let diag = alloc::vec![0.0; n];
        let off: Vec<f64> = (1..n)
            .map(|i| {
                let i = i as f64;
                i / (4.0 * i * i - 1.0).sqrt()
            })
            .collect();
        Ok(golub_welsch(&diag, &off, 2.0))
    }

    /// Generalized Gauss-Laguerre rule for the weight `x^alpha exp(-x)` on `[0, inf)`.
    pub fn gauss_laguerre(n: usize, alpha: f64) -> Result<Self> {
        check_order(n)?;
        if alpha <= -1.0 {
            return Err(Error::invalid("alpha", "must exceed -1"));
        }
        let diag: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 + alpha + 1.0).collect();
        let off: Vec<f64> = (1..n).map(|i| (i as f64 * (i as f64 + alpha)).sqrt()).collect();
        Ok(golub_welsch(&diag, &off, libm::tgamma(alpha + 1.0)))
    }

    /// The `[-1, 1]` rule mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Self {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        QuadratureRule {
            nodes: self.nodes.iter().map(|x| mid + half * x).collect(),
            weights: self.weights.iter().map(|w| w * half).collect(),
        }
    }

    /// Composite rule: the `[-1, 1]` rule repeated over `panels` equal panels of `[a, b]`.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> Self {
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * self.len());
        let mut weights = Vec::with_capacity(panels * self.len());
        for p in 0..panels {
            let lo = a + p as f64 * width;
            let r = self.mapped(lo, lo + width);
            nodes.extend(r.nodes);
            weights.extend(r.weights);
        }
        QuadratureRule { nodes, weights }
    }
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("order", "quadrature order must be at least 1"));
    }
    Ok(())
}

fn golub_welsch(diag: &[f64], off: &[f64], mu0: f64) -> QuadratureRule {
    let n = diag.len();
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            off[i]
        } else if j + 1 == i {
            off[j]
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = eig.eigenvalues.iter().map(|&x| (x, mu0 / orthonormal_sum_of_squares(diag, off, x))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    QuadratureRule { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
}

/// `sum_k p_k(x)^2` over the orthonormal polynomials of the Jacobi matrix.
///
/// Eigenvector components only carry absolute accuracy, which ruins the
/// tiny weights of far-out nodes; the recurrence keeps relative accuracy.
fn orthonormal_sum_of_squares(diag: &[f64], off: &[f64], x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum = 1.0;
    // every quantity is implicitly multiplied by 2^log_scale
    let mut log_scale = 0i32;
    for k in 0..diag.len() - 1 {
        let back = if k == 0 { 0.0 } else { off[k - 1] * prev };
        let next = ((x - diag[k]) * cur - back) / off[k];
        prev = cur;
        cur = next;
        sum += cur * cur;
        if cur.abs() > 1e100 {
            let f = 1e-100;
            prev *= f;
            cur *= f;
            sum *= f * f;
            log_scale += 1;
        }
    }
    if log_scale == 0 {
        sum
    } else {
        (sum.ln() + 2.0 * log_scale as f64 * 100.0 * core::f64::consts::LN_10).exp()
    }
}

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&mut f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
