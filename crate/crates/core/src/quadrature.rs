//! Gauss-Hermite rules normalized against the standard normal density.

use std::f64::consts::PI;

use crate::error::{MosaicError, Result};

pub const MAX_ORDER: usize = 200;

/// Nodes and weights such that `sum_k w_k g(m + s z_k)` approximates
/// `E[g(X)]`, `X ~ N(m, s^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `E[g(Z)]` for standard normal `Z`.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * g(z)).sum()
    }
}

/// Roots of the probabilists' Hermite polynomial `He_order` with matching
/// weights.
///
/// Roots are bracketed by Sturm-sequence bisection on the Jacobi matrix of the
/// physicists' polynomials, then polished with Newton steps on the
/// orthonormal recurrence, which also yields the weights.
pub fn gauss_hermite_rule(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(MosaicError::QuadratureOrder(order));
    }
    let n = order;
    // Squared off-diagonals of the Jacobi matrix: b_k^2 = k / 2.
    let b2: Vec<f64> = (1..n).map(|k| k as f64 / 2.0).collect();
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = -x;
        if q < 0.0 {
            count += 1;
        }
        for &b in &b2 {
            let prev = if q == 0.0 { f64::EPSILON } else { q };
            q = -x - b / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let bound = (2.0 * n as f64 + 1.0).sqrt() + 1.0;
    let pim4 = PI.powf(-0.25);
    let eval = |z: f64| -> (f64, f64) {
        let mut p1 = pim4;
        let mut p2 = 0.0;
        for j in 1..=n {
            let p3 = p2;
            p2 = p1;
            p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
        }
        (p1, (2.0 * n as f64).sqrt() * p2)
    };

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        // k-th smallest root lies where the Sturm count steps from k to k + 1.
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-14 * mid.abs().max(1.0) {
                break;
            }
        }
        let mut z = 0.5 * (lo + hi);
        let mut pp = eval(z).1;
        for _ in 0..3 {
            let (p, d) = eval(z);
            pp = d;
            let step = p / d;
            if (z - step) > lo - 1e-12 && (z - step) < hi + 1e-12 {
                z -= step;
            }
        }
        nodes.push(z * std::f64::consts::SQRT_2);
        weights.push(2.0 / (pp * pp) / PI.sqrt());
    }
    // Enforce exact symmetry.
    for k in 0..n / 2 {
        let z = 0.5 * (nodes[n - 1 - k] - nodes[k]);
        let w = 0.5 * (weights[k] + weights[n - 1 - k]);
        nodes[k] = -z;
        nodes[n - 1 - k] = z;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let log_weights = weights.iter().map(|w| w.ln()).collect();
    Ok(QuadratureRule {
        nodes,
        weights,
        log_weights,
    })
}
