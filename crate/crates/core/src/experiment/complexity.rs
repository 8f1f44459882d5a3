//! Timing of knot likelihood evaluation against histogram cardinality, and
//! the extreme-value bound on the number of distinct rounded values.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::likelihood::{knot_loglik, KNOT_ORDER};
use crate::model::{Histogram, KnotParam, LinkFamily};
use crate::parallel::{stream_rng, tag};
use crate::quadrature::gauss_hermite_rule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub k: usize,
    pub n: u64,
    pub seconds_per_eval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub link: LinkFamily,
    pub by_k: Vec<TimingRow>,
    pub by_n: Vec<TimingRow>,
    /// Least-squares slope of log time on log K.
    pub slope_k: f64,
    /// Least-squares slope of log time on log n at fixed K.
    pub slope_n: f64,
}

/// Histogram over `0..k` whose counts sum to at least `n`.
pub fn synthetic_histogram(k: usize, n: u64) -> Histogram {
    let base = (n / k as u64).max(1);
    (0..k as i64).map(|y| (y, base + (y as u64 % 3))).collect()
}

/// Minimum over trials of the mean time per evaluation.
pub fn time_knot_loglik(link: LinkFamily, knot: KnotParam, hist: &Histogram) -> f64 {
    let rule = gauss_hermite_rule(KNOT_ORDER).expect("default order is valid");
    let mut sink = 0.0;
    let mut best = f64::INFINITY;
    let mut reps = 1usize;
    // Grow the batch until one batch takes about ten milliseconds.
    loop {
        let t = Instant::now();
        for _ in 0..reps {
            sink += knot_loglik(link, knot, std::hint::black_box(hist), &rule).value();
        }
        if t.elapsed().as_secs_f64() > 1e-2 {
            break;
        }
        reps *= 2;
    }
    for _ in 0..9 {
        let t = Instant::now();
        for _ in 0..reps {
            sink += knot_loglik(link, knot, std::hint::black_box(hist), &rule).value();
        }
        best = best.min(t.elapsed().as_secs_f64() / reps as f64);
    }
    std::hint::black_box(sink);
    best
}

pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Times `knot_loglik` over a grid of cardinalities (at `n_values[0]`) and of
/// sample sizes (at `k_values[0]`).
pub fn complexity_probe(link: LinkFamily, knot: KnotParam, k_values: &[usize], n_values: &[u64]) -> ComplexityReport {
    let n0 = n_values.first().copied().unwrap_or(10_000);
    let k0 = k_values.first().copied().unwrap_or(16);
    let by_k: Vec<TimingRow> = k_values
        .iter()
        .map(|&k| TimingRow {
            k,
            n: n0,
            seconds_per_eval: time_knot_loglik(link, knot, &synthetic_histogram(k, n0)),
        })
        .collect();
    let by_n: Vec<TimingRow> = n_values
        .iter()
        .map(|&n| TimingRow {
            k: k0,
            n,
            seconds_per_eval: time_knot_loglik(link, knot, &synthetic_histogram(k0, n)),
        })
        .collect();
    let slope = |rows: &[TimingRow], x: fn(&TimingRow) -> f64| {
        if rows.len() < 2 {
            return f64::NAN;
        }
        let xs: Vec<f64> = rows.iter().map(x).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.seconds_per_eval).collect();
        log_log_slope(&xs, &ys)
    };
    ComplexityReport {
        link,
        slope_k: slope(&by_k, |r| r.k as f64),
        slope_n: slope(&by_n, |r| r.n as f64),
        by_k,
        by_n,
    }
}

/// `sqrt(sigma) (4 / sqrt(log n) + sqrt(2 log n)) + mu + 2`.
pub fn extreme_value_bound(mu: f64, sigma: f64, n: usize) -> f64 {
    let ln = (n as f64).ln();
    sigma.sqrt() * (4.0 / ln.sqrt() + (2.0 * ln).sqrt()) + mu + 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub mu: f64,
    pub sigma: f64,
    pub k: usize,
    pub bound: f64,
}

/// Observed cardinality of a rounded column against the extreme-value bound,
/// once per replicate with `mu ~ U(4, 5)`, `sigma ~ U(1, 1.5)`.
pub fn extreme_value_checks(reps: usize, n: usize, seed: u64) -> Vec<BoundCheck> {
    (0..reps)
        .map(|r| {
            let mut rng = stream_rng(seed, tag::SIMULATE, r as u64);
            let mu = rng.random_range(4.0..5.0);
            let sigma: f64 = rng.random_range(1.0..1.5);
            let mut seen = std::collections::BTreeSet::new();
            for _ in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                seen.insert(LinkFamily::RoundedGaussian.observe(mu + sigma.sqrt() * z, &mut rng));
            }
            BoundCheck {
                mu,
                sigma,
                k: seen.len(),
                bound: extreme_value_bound(mu, sigma, n),
            }
        })
        .collect()
}
