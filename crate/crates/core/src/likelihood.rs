//! Univariate (knot) and bivariate (tile) marginal log-likelihoods evaluated
//! over compressed histograms.
//!
//! Rounded-Gaussian margins have closed forms in terms of normal CDFs. The
//! Poisson-log-normal margins are integrated with Gauss-Hermite rules; sums
//! over nodes are accumulated in log space since cell probabilities around
//! `e^-50` are routine when means sit near -4.

use std::collections::BTreeSet;

use libm::lgamma as ln_gamma;

use crate::model::{rounding_cell, Histogram, KnotParam, LinkFamily, PairHistogram, TileParam};
use crate::normal::{log_phi_interval, std_bvn_rect};
use crate::quadrature::QuadratureRule;

/// Default Gauss-Hermite order for knot margins.
pub const KNOT_ORDER: usize = 50;
/// Default per-axis Gauss-Hermite order for tile margins.
pub const TILE_ORDER: usize = 30;

/// Outcome of a marginal log-likelihood evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogLik {
    Finite(f64),
    /// Some observed cell probability underflowed to zero.
    Underflow,
    /// Parameters outside the density's support (e.g. a non-PD 2x2 block).
    OutOfSupport,
}

impl LogLik {
    /// Value usable as a log-density; non-finite outcomes map to `-inf`.
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            LogLik::Finite(v) => v,
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, LogLik::Finite(_))
    }
}

#[inline]
fn finite_or_underflow(v: f64) -> LogLik {
    if v.is_finite() {
        LogLik::Finite(v)
    } else {
        LogLik::Underflow
    }
}

/// Log-sum-exp over a slice.
#[inline]
pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

/// `log f_jj(y | mu, sigma)` for a single value.
pub fn knot_log_density(link: LinkFamily, y: i64, knot: KnotParam, rule: &QuadratureRule) -> f64 {
    let hist: Histogram = [(y, 1)].into_iter().collect();
    knot_loglik(link, knot, &hist, rule).value()
}

/// `Q_{n,j}(mu_j, sigma_jj) = sum_k n_k log f_jj(y_k)`.
pub fn knot_loglik(link: LinkFamily, knot: KnotParam, hist: &Histogram, rule: &QuadratureRule) -> LogLik {
    if !(knot.sigma > 0.0) || !knot.mu.is_finite() || !knot.sigma.is_finite() {
        return LogLik::OutOfSupport;
    }
    let sd = knot.sigma.sqrt();
    match link {
        LinkFamily::RoundedGaussian => {
            let mut total = 0.0;
            for (&y, &count) in hist {
                let (lo, hi) = rounding_cell(y);
                let lp = log_phi_interval((lo - knot.mu) / sd, (hi - knot.mu) / sd);
                total += count as f64 * lp;
            }
            finite_or_underflow(total)
        }
        LinkFamily::PoissonLogNormal => {
            let order = rule.order();
            let mut xs = Vec::with_capacity(order);
            let mut base = Vec::with_capacity(order);
            for (&z, &lw) in rule.nodes.iter().zip(&rule.log_weights) {
                let x = knot.mu + sd * z;
                xs.push(x);
                base.push(lw - x.exp());
            }
            let mut terms = vec![0.0; order];
            let mut total = 0.0;
            for (&y, &count) in hist {
                let yf = y as f64;
                for k in 0..order {
                    terms[k] = base[k] + yf * xs[k];
                }
                total += count as f64 * (log_sum_exp(&terms) - ln_gamma(yf + 1.0));
            }
            finite_or_underflow(total)
        }
    }
}

/// Pair histogram laid out for repeated likelihood evaluation: the distinct
/// values per axis and each occupied cell as indices into them.
#[derive(Debug, Clone)]
pub struct PairCells {
    pub s_values: Vec<i64>,
    pub t_values: Vec<i64>,
    pub cells: Vec<(usize, usize, u64)>,
}

impl PairCells {
    pub fn new(hist: &PairHistogram) -> Self {
        let s_values: Vec<i64> = hist.counts.keys().map(|k| k.0).collect::<BTreeSet<_>>().into_iter().collect();
        let t_values: Vec<i64> = hist.counts.keys().map(|k| k.1).collect::<BTreeSet<_>>().into_iter().collect();
        let cells = hist
            .counts
            .iter()
            .map(|(&(a, b), &c)| {
                (
                    s_values.binary_search(&a).expect("value present"),
                    t_values.binary_search(&b).expect("value present"),
                    c,
                )
            })
            .collect();
        Self {
            s_values,
            t_values,
            cells,
        }
    }

    pub fn transposed(&self) -> Self {
        Self {
            s_values: self.t_values.clone(),
            t_values: self.s_values.clone(),
            cells: self.cells.iter().map(|&(a, b, c)| (b, a, c)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// `L_{n,st}(sigma_st, theta_ss, theta_tt)` over a pair histogram.
pub fn tile_loglik(
    links: (LinkFamily, LinkFamily),
    tile: TileParam,
    knot_s: KnotParam,
    knot_t: KnotParam,
    hist: &PairHistogram,
    rule: &QuadratureRule,
) -> LogLik {
    tile_loglik_cells(links, tile.sigma, knot_s, knot_t, &PairCells::new(hist), rule)
}

/// [`tile_loglik`] on a precomputed cell layout.
pub fn tile_loglik_cells(
    links: (LinkFamily, LinkFamily),
    sigma_st: f64,
    knot_s: KnotParam,
    knot_t: KnotParam,
    cells: &PairCells,
    rule: &QuadratureRule,
) -> LogLik {
    let (vs, vt) = (knot_s.sigma, knot_t.sigma);
    if !(vs > 0.0 && vt > 0.0) || !sigma_st.is_finite() || !(sigma_st * sigma_st < vs * vt) {
        return LogLik::OutOfSupport;
    }
    use LinkFamily::*;
    match links {
        (RoundedGaussian, RoundedGaussian) => rounded_pair(sigma_st, knot_s, knot_t, cells),
        (PoissonLogNormal, PoissonLogNormal) => poisson_pair(sigma_st, knot_s, knot_t, cells, rule),
        (PoissonLogNormal, RoundedGaussian) => mixed_pair(sigma_st, knot_s, knot_t, cells, rule),
        (RoundedGaussian, PoissonLogNormal) => mixed_pair(sigma_st, knot_t, knot_s, &cells.transposed(), rule),
    }
}

fn rounded_pair(sigma_st: f64, ks: KnotParam, kt: KnotParam, cells: &PairCells) -> LogLik {
    let (sd_s, sd_t) = (ks.sigma.sqrt(), kt.sigma.sqrt());
    let r = sigma_st / (sd_s * sd_t);
    if !(r.abs() < 1.0 - 1e-12) {
        return LogLik::OutOfSupport;
    }
    let std_s: Vec<(f64, f64)> = cells
        .s_values
        .iter()
        .map(|&y| {
            let (lo, hi) = rounding_cell(y);
            ((lo - ks.mu) / sd_s, (hi - ks.mu) / sd_s)
        })
        .collect();
    let std_t: Vec<(f64, f64)> = cells
        .t_values
        .iter()
        .map(|&y| {
            let (lo, hi) = rounding_cell(y);
            ((lo - kt.mu) / sd_t, (hi - kt.mu) / sd_t)
        })
        .collect();
    let mut total = 0.0;
    for &(i, j, count) in &cells.cells {
        let (a0, b0) = std_s[i];
        let (a1, b1) = std_t[j];
        let prob = std_bvn_rect([a0, a1], [b0, b1], r);
        total += count as f64 * prob.ln();
    }
    finite_or_underflow(total)
}

/// Outer rule on `x_s`, inner rule on `x_t | x_s`.
fn poisson_pair(sigma_st: f64, ks: KnotParam, kt: KnotParam, cells: &PairCells, rule: &QuadratureRule) -> LogLik {
    let order = rule.order();
    let sd_s = ks.sigma.sqrt();
    let slope = sigma_st / ks.sigma;
    let cond_sd = (kt.sigma - sigma_st * slope).max(0.0).sqrt();
    let ks_len = cells.s_values.len();
    let kt_len = cells.t_values.len();
    let lg_s: Vec<f64> = cells.s_values.iter().map(|&y| ln_gamma(y as f64 + 1.0)).collect();
    let lg_t: Vec<f64> = cells.t_values.iter().map(|&y| ln_gamma(y as f64 + 1.0)).collect();

    // outer[i * ks_len + a] = log w_i + log Pois(y_s[a] | x_s,i)
    // inner[i * kt_len + b] = log E[Pois(y_t[b] | x_t) | x_s,i]
    let mut outer = vec![0.0; order * ks_len];
    let mut inner = vec![0.0; order * kt_len];
    let mut xt = vec![0.0; order];
    let mut base = vec![0.0; order];
    let mut terms = vec![0.0; order];
    for i in 0..order {
        let zs = rule.nodes[i];
        let xs = ks.mu + sd_s * zs;
        let exs = xs.exp();
        for (a, &y) in cells.s_values.iter().enumerate() {
            outer[i * ks_len + a] = rule.log_weights[i] + y as f64 * xs - exs - lg_s[a];
        }
        let cond_mean = kt.mu + slope * sd_s * zs;
        for j in 0..order {
            let x = cond_mean + cond_sd * rule.nodes[j];
            xt[j] = x;
            base[j] = rule.log_weights[j] - x.exp();
        }
        for (b, &y) in cells.t_values.iter().enumerate() {
            let yf = y as f64;
            for j in 0..order {
                terms[j] = base[j] + yf * xt[j];
            }
            inner[i * kt_len + b] = log_sum_exp(&terms) - lg_t[b];
        }
    }
    let mut total = 0.0;
    for &(a, b, count) in &cells.cells {
        for i in 0..order {
            terms[i] = outer[i * ks_len + a] + inner[i * kt_len + b];
        }
        total += count as f64 * log_sum_exp(&terms);
    }
    finite_or_underflow(total)
}

/// `s` Poisson-log-normal (outer rule), `t` rounded Gaussian (closed-form
/// conditional cell).
fn mixed_pair(sigma_st: f64, ks: KnotParam, kt: KnotParam, cells: &PairCells, rule: &QuadratureRule) -> LogLik {
    let order = rule.order();
    let sd_s = ks.sigma.sqrt();
    let slope = sigma_st / ks.sigma;
    let cond_sd = (kt.sigma - sigma_st * slope).max(0.0).sqrt();
    if cond_sd <= 0.0 {
        return LogLik::OutOfSupport;
    }
    let mut terms = vec![0.0; order];
    let mut total = 0.0;
    for &(a, b, count) in &cells.cells {
        let ys = cells.s_values[a];
        let (lo, hi) = rounding_cell(cells.t_values[b]);
        let lg = ln_gamma(ys as f64 + 1.0);
        for i in 0..order {
            let zs = rule.nodes[i];
            let xs = ks.mu + sd_s * zs;
            let m = kt.mu + slope * sd_s * zs;
            terms[i] = rule.log_weights[i] + ys as f64 * xs - xs.exp() - lg
                + log_phi_interval((lo - m) / cond_sd, (hi - m) / cond_sd);
        }
        total += count as f64 * log_sum_exp(&terms);
    }
    finite_or_underflow(total)
}
