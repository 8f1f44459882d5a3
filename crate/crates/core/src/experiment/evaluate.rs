//! Grouped error and coverage summaries of posterior draws against a truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{MosaicError, Result};
use crate::model::{pairs, Parameters};
use crate::projection::correct_samples;
use crate::sampler::MosaicSamples;

/// Below this many draws interval endpoints are too noisy to trust.
pub const MIN_RELIABLE_DRAWS: usize = 40;

/// Groups reported for every evaluation. `rho`, `s` and `mu` are the
/// correlations, standard deviations and means; the raw covariance entries
/// are reported alongside.
pub const GROUPS: [&str; 5] = ["rho", "s", "mu", "sigma_diag", "sigma_offdiag"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub group: String,
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: BTreeMap<String, f64>,
    pub coverage: BTreeMap<String, f64>,
    pub replicate_count: usize,
    pub level: f64,
    pub draws: usize,
    pub coverage_reliable: bool,
    pub corrected: bool,
    pub parameters: Vec<ParameterSummary>,
}

/// Type-7 (linear interpolation) sample quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Functionals of one parameter set: `(group, name, value)`.
fn functionals(theta: &Parameters) -> Vec<(&'static str, String, f64)> {
    let p = theta.p();
    let mut out = Vec::new();
    for (s, t) in pairs(p) {
        out.push(("rho", format!("rho_{}_{}", s + 1, t + 1), theta.correlation(s, t)));
    }
    for j in 0..p {
        out.push(("s", format!("s_{}", j + 1), theta.sigma.get(j, j).sqrt()));
    }
    for j in 0..p {
        out.push(("mu", format!("mu_{}", j + 1), theta.mu[j]));
    }
    for j in 0..p {
        out.push(("sigma_diag", format!("sigma_{}_{}", j + 1, j + 1), theta.sigma.get(j, j)));
    }
    for (s, t) in pairs(p) {
        out.push(("sigma_offdiag", format!("sigma_{}_{}", s + 1, t + 1), theta.sigma.get(s, t)));
    }
    out
}

/// Posterior-mean squared error and equal-tailed interval coverage per group.
/// With `corrected`, covariance draws are projected first if they have not
/// been already.
pub fn evaluate(samples: &MosaicSamples, corrected: bool, truth: &Parameters, level: f64) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(MosaicError::InvalidInput("no draws to evaluate".into()));
    }
    if truth.p() != samples.p {
        return Err(MosaicError::Structure("truth and samples differ in dimension".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MosaicError::InvalidInput(format!("level {level} outside (0, 1)")));
    }
    let projected;
    let samples = if corrected && samples.corrected_sigma.is_none() {
        let mut s = samples.clone();
        correct_samples(&mut s, None, 1);
        projected = s;
        &projected
    } else {
        samples
    };
    let m = samples.len();
    let truth_values = functionals(truth);
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(m); truth_values.len()];
    for i in 0..m {
        for (col, (_, _, v)) in columns.iter_mut().zip(functionals(&samples.draw_corrected(i, corrected))) {
            col.push(v);
        }
    }
    let tail = (1.0 - level) / 2.0;
    let mut parameters = Vec::with_capacity(columns.len());
    for (mut col, (group, name, t)) in columns.into_iter().zip(truth_values) {
        let mean = col.iter().sum::<f64>() / m as f64;
        col.sort_by(f64::total_cmp);
        let (lower, upper) = (quantile(&col, tail), quantile(&col, 1.0 - tail));
        parameters.push(ParameterSummary {
            group: group.into(),
            name,
            truth: t,
            mean,
            lower,
            upper,
            covered: lower <= t && t <= upper,
        });
    }
    let mut mse = BTreeMap::new();
    let mut coverage = BTreeMap::new();
    for group in GROUPS {
        let members: Vec<&ParameterSummary> = parameters.iter().filter(|s| s.group == group).collect();
        if members.is_empty() {
            continue;
        }
        let k = members.len() as f64;
        mse.insert(group.to_string(), members.iter().map(|s| (s.mean - s.truth).powi(2)).sum::<f64>() / k);
        coverage.insert(group.to_string(), members.iter().filter(|s| s.covered).count() as f64 / k);
    }
    Ok(EvalReport {
        mse,
        coverage,
        replicate_count: 1,
        level,
        draws: m,
        coverage_reliable: m >= MIN_RELIABLE_DRAWS,
        corrected,
        parameters,
    })
}
