//! Data-augmented MCMC baseline: alternate latent sweeps and conjugate
//! parameter draws under the Jeffreys prior `|Sigma|^{-(p+1)/2}`.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{MosaicError, Result};
use crate::model::{compress, CountMatrix, LinkFamily, ModelSpec, Parameters, SymMatrix};
use crate::parallel::{parallel_map, stream_rng, tag};
use crate::sampler::{mh_log_ratio, moment_start, MosaicSamples, PriorConfig, SamplerDiagnostics};

/// Rows per latent RNG substream.
pub const LATENT_BLOCK: usize = 256;

/// Latent matrix (row-major `n x p`) together with the current parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub latents: Vec<f64>,
    pub n: usize,
    pub p: usize,
    pub params: Parameters,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DamcmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Wall-clock budget; overrides `iterations` when set.
    pub budget_seconds: Option<f64>,
    /// Draws kept from the second half of a budgeted run.
    pub budget_draws: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for DamcmcConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            burn_in: 1000,
            thin: 2,
            budget_seconds: None,
            budget_draws: 500,
            seed: 0,
            workers: 1,
        }
    }
}

/// `log h(y | x)` up to terms constant in `x`.
#[inline]
fn link_kernel(link: LinkFamily, y: i64, x: f64) -> f64 {
    match link {
        LinkFamily::PoissonLogNormal => y as f64 * x - x.exp(),
        LinkFamily::RoundedGaussian => link.log_density(y, x),
    }
}

/// Per-coordinate conditional regression of `x_j` on the other coordinates.
struct Conditionals {
    precision: DMatrix<f64>,
    sd: Vec<f64>,
}

impl Conditionals {
    fn new(sigma: &SymMatrix) -> Result<Self> {
        let chol = sigma
            .to_dmatrix()
            .cholesky()
            .ok_or_else(|| MosaicError::InvalidInput("covariance is not positive definite".into()))?;
        let precision = chol.inverse();
        let sd = (0..sigma.dim()).map(|j| (1.0 / precision[(j, j)]).sqrt()).collect();
        Ok(Self { precision, sd })
    }

    #[inline]
    fn mean(&self, j: usize, x: &[f64], mu: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (k, (&xk, &mk)) in x.iter().zip(mu).enumerate() {
            if k != j {
                acc += self.precision[(j, k)] * (xk - mk);
            }
        }
        mu[j] - acc / self.precision[(j, j)]
    }
}

/// One sweep of per-coordinate random-walk MH over all latents, with step
/// `0.5 * conditional sd`. Returns the acceptance rate.
pub fn update_latents(state: &mut AugmentedState, data: &CountMatrix, spec: &ModelSpec, seed: u64, workers: usize) -> Result<f64> {
    let links = spec.links().to_vec();
    update_latents_with(state, data, &|j, y, x| link_kernel(links[j], y, x), seed, workers)
}

/// [`update_latents`] with an arbitrary log link `(j, y, x) -> log h_j(y | x)`.
pub fn update_latents_with<F>(state: &mut AugmentedState, data: &CountMatrix, log_link: &F, seed: u64, workers: usize) -> Result<f64>
where
    F: Fn(usize, i64, f64) -> f64 + Sync,
{
    let (n, p) = (state.n, state.p);
    if data.n() != n || data.p() != p {
        return Err(MosaicError::Structure("latent state does not match the data".into()));
    }
    let cond = Conditionals::new(&state.params.sigma)?;
    let mu = &state.params.mu;
    let iteration = state.iteration as u64;
    let latents = &state.latents;
    let blocks = n.div_ceil(LATENT_BLOCK);
    let updated = parallel_map(workers, blocks, |b| {
        let mut rng = stream_rng(seed, tag::LATENT, (iteration << 32) | b as u64);
        let rows = b * LATENT_BLOCK..((b + 1) * LATENT_BLOCK).min(n);
        let mut block = latents[rows.start * p..rows.end * p].to_vec();
        let mut accepted = 0usize;
        for (r, x) in rows.zip(block.chunks_mut(p)) {
            let y = data.row(r);
            for j in 0..p {
                let m = cond.mean(j, x, mu);
                let v = cond.sd[j] * cond.sd[j];
                let z: f64 = rng.sample(StandardNormal);
                let u: f64 = rng.random();
                let cur = x[j];
                let prop = cur + 0.5 * cond.sd[j] * z;
                let log_alpha = mh_log_ratio(
                    log_link(j, y[j], prop) - (prop - m).powi(2) / (2.0 * v),
                    log_link(j, y[j], cur) - (cur - m).powi(2) / (2.0 * v),
                );
                if u.ln() < log_alpha {
                    x[j] = prop;
                    accepted += 1;
                }
            }
        }
        (block, accepted)
    });
    let mut accepted = 0;
    for (b, (block, acc)) in updated.into_iter().enumerate() {
        let start = b * LATENT_BLOCK * p;
        state.latents[start..start + block.len()].copy_from_slice(&block);
        accepted += acc;
    }
    Ok(accepted as f64 / (n * p) as f64)
}

/// Mean vector and scatter matrix of the latents.
fn latent_moments(state: &AugmentedState) -> (DVector<f64>, DMatrix<f64>) {
    let (n, p) = (state.n, state.p);
    let mut mean = DVector::zeros(p);
    for x in state.latents.chunks(p) {
        for j in 0..p {
            mean[j] += x[j];
        }
    }
    mean /= n as f64;
    let mut scatter = DMatrix::zeros(p, p);
    for x in state.latents.chunks(p) {
        for a in 0..p {
            let da = x[a] - mean[a];
            for b in 0..=a {
                scatter[(a, b)] += da * (x[b] - mean[b]);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            scatter[(b, a)] = scatter[(a, b)];
        }
    }
    (mean, scatter)
}

/// Inverse-Wishart draw with `nu` degrees of freedom and scale `s`, via the
/// Bartlett decomposition of the matching Wishart on `s^{-1}`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(nu: f64, s: &DMatrix<f64>, rng: &mut R) -> Option<DMatrix<f64>> {
    let p = s.nrows();
    let s_inv = s.clone().cholesky()?.inverse();
    let l = s_inv.cholesky()?.l();
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(nu - i as f64).ok()?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    // Sigma = (B B^T)^{-1} = C^T C with C = B^{-1}, B = L A lower triangular.
    let c = (l * a).solve_lower_triangular(&DMatrix::identity(p, p))?;
    Some(c.transpose() * c)
}

/// Conjugate draw `Sigma ~ IW(n - 1, S)`, then `mu ~ N(xbar, Sigma / n)`.
pub fn update_params<R: Rng + ?Sized>(state: &mut AugmentedState, rng: &mut R) -> Result<()> {
    let (n, p) = (state.n, state.p);
    let singular = MosaicError::SingularScatter { n, p };
    if n <= p {
        return Err(singular);
    }
    let (mean, scatter) = latent_moments(state);
    let sigma = sample_inverse_wishart((n - 1) as f64, &scatter, rng).ok_or(singular)?;
    let sigma = SymMatrix::from_dmatrix_lossy(&sigma);
    let chol = sigma
        .to_dmatrix()
        .cholesky()
        .ok_or(MosaicError::SingularScatter { n, p })?
        .l();
    let z = DVector::from_fn(p, |_, _| rng.sample(StandardNormal));
    let mu = mean + chol * z / (n as f64).sqrt();
    state.params = Parameters::new(mu.iter().copied().collect(), sigma)?;
    Ok(())
}

/// Per-coordinate starting latent: the mode of `h(y | x) N(x | mu_j, sigma_jj)`.
fn initial_latent(link: LinkFamily, y: i64, mu: f64, var: f64) -> f64 {
    match link {
        LinkFamily::RoundedGaussian => {
            if y <= 0 {
                mu.min(-0.05)
            } else {
                let (lo, hi) = (y as f64 - 1.0, y as f64);
                mu.clamp(lo + 0.05, hi - 0.05)
            }
        }
        LinkFamily::PoissonLogNormal => {
            let mut x = mu;
            for _ in 0..50 {
                let g = y as f64 - x.exp() - (x - mu) / var;
                let h = -x.exp() - 1.0 / var;
                let step = g / h;
                x -= step;
                if step.abs() < 1e-12 {
                    break;
                }
            }
            x
        }
    }
}

/// Starting state: given parameters (or marginal moment estimates with a
/// diagonal covariance), latents at their per-coordinate conditional modes.
pub fn initial_state(spec: &ModelSpec, data: &CountMatrix, init: Option<&Parameters>) -> Result<AugmentedState> {
    let (n, p) = (data.n(), data.p());
    if spec.p() != p {
        return Err(MosaicError::Structure(format!("model has p = {} but data has p = {p}", spec.p())));
    }
    let params = match init {
        Some(params) if params.p() == p => params.clone(),
        Some(params) => {
            return Err(MosaicError::Structure(format!("initial parameters have p = {}", params.p())));
        }
        None => {
            let hists = compress(data)?.uni;
            let starts: Vec<[f64; 2]> = (0..p)
                .map(|j| moment_start(spec.link(j), &hists[j], &PriorConfig::default()))
                .collect();
            let mu = starts.iter().map(|s| s[0]).collect();
            let sigma = SymMatrix::from_fn(p, |i, j| if i == j { starts[i][1].exp() } else { 0.0 });
            Parameters::new(mu, sigma)?
        }
    };
    let mut cache: Vec<BTreeMap<i64, f64>> = vec![BTreeMap::new(); p];
    let mut latents = Vec::with_capacity(n * p);
    for i in 0..n {
        for (j, &y) in data.row(i).iter().enumerate() {
            let x = *cache[j]
                .entry(y)
                .or_insert_with(|| initial_latent(spec.link(j), y, params.mu[j], params.sigma.get(j, j)));
            latents.push(x);
        }
    }
    Ok(AugmentedState {
        latents,
        n,
        p,
        params,
        iteration: 0,
    })
}

/// Alternates latent sweeps and parameter draws for a fixed number of
/// iterations, or until `budget_seconds` elapse (keeping the second half of
/// the run, thinned to `budget_draws`).
pub fn run_damcmc(spec: &ModelSpec, data: &CountMatrix, cfg: &DamcmcConfig, init: Option<&Parameters>) -> Result<MosaicSamples> {
    let budget = cfg.budget_seconds;
    if budget.is_none() && (cfg.thin == 0 || cfg.burn_in >= cfg.iterations) {
        return Err(MosaicError::InvalidInput("damcmc iterations retain no draws".into()));
    }
    let clock = Instant::now();
    let mut state = initial_state(spec, data, init)?;
    let (mut latent_secs, mut param_secs) = (0.0, 0.0);
    let mut acceptance = 0.0;
    let mut draws = Vec::new();
    loop {
        let it = state.iteration;
        match budget {
            Some(limit) if clock.elapsed().as_secs_f64() >= limit && it >= 2 => break,
            None if it >= cfg.iterations => break,
            _ => {}
        }
        let t = Instant::now();
        acceptance += update_latents(&mut state, data, spec, cfg.seed, cfg.workers)?;
        latent_secs += t.elapsed().as_secs_f64();
        let t = Instant::now();
        update_params(&mut state, &mut stream_rng(cfg.seed, tag::PARAMS, it as u64))?;
        param_secs += t.elapsed().as_secs_f64();
        state.iteration += 1;
        let keep = match budget {
            Some(_) => true,
            None => it >= cfg.burn_in && (it - cfg.burn_in + 1).is_multiple_of(cfg.thin),
        };
        if keep {
            draws.push(state.params.clone());
        }
    }
    let iterations = state.iteration;
    if budget.is_some() {
        let tail = draws.split_off(draws.len() / 2);
        let step = tail.len().div_ceil(cfg.budget_draws.max(1)).max(1);
        // Keep the last draw of each stride so the end of the run is included.
        draws = tail.into_iter().rev().step_by(step).collect();
        draws.reverse();
    }
    let mut samples = MosaicSamples::from_parameters(data.p(), &draws)?;
    samples.diagnostics = SamplerDiagnostics {
        method: "damcmc".into(),
        draws: draws.len(),
        seconds: vec![
            ("latents".into(), latent_secs),
            ("params".into(), param_secs),
            ("total".into(), clock.elapsed().as_secs_f64()),
        ],
        latent_acceptance: Some(acceptance / iterations.max(1) as f64),
        warnings: vec![format!("{iterations} iterations")],
        ..Default::default()
    };
    samples.acceptance_rates = vec![acceptance / iterations.max(1) as f64];
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rounded_data(n: usize, mu: f64, sigma: f64, seed: u64) -> CountMatrix {
        let mut rng = stream_rng(seed, 55, 0);
        let rows: Vec<Vec<i64>> = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                vec![LinkFamily::RoundedGaussian.observe(mu + sigma.sqrt() * z, &mut rng)]
            })
            .collect();
        CountMatrix::from_rows(&rows).unwrap()
    }

    fn fixed_state(n: usize, p: usize, seed: u64) -> AugmentedState {
        let mut rng = stream_rng(seed, 56, 0);
        let latents = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        AugmentedState {
            latents,
            n,
            p,
            params: Parameters::new(vec![0.0; p], SymMatrix::identity(p)).unwrap(),
            iteration: 0,
        }
    }

    #[test]
    fn flat_link_sweeps_target_the_prior() {
        let mu = vec![1.5, -0.5];
        let sigma = SymMatrix::from_rows(&[vec![1.0, 0.6], vec![0.6, 2.0]]).unwrap();
        let data = CountMatrix::from_vec(1, 2, vec![0, 0]).unwrap();
        let mut state = AugmentedState {
            latents: vec![0.0, 0.0],
            n: 1,
            p: 2,
            params: Parameters::new(mu.clone(), sigma.clone()).unwrap(),
            iteration: 0,
        };
        let (batches, len) = (100, 2000);
        let mut means = vec![[0.0; 2]; batches];
        for b in 0..batches {
            for _ in 0..len {
                update_latents_with(&mut state, &data, &|_, _, _| 0.0, 3, 1).unwrap();
                state.iteration += 1;
                means[b][0] += state.latents[0] / len as f64;
                means[b][1] += state.latents[1] / len as f64;
            }
        }
        for j in 0..2 {
            let m = means.iter().map(|b| b[j]).sum::<f64>() / batches as f64;
            let var = means.iter().map(|b| (b[j] - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
            let se = (var / batches as f64).sqrt();
            assert!((m - mu[j]).abs() < 3.0 * se, "coord {j}: {m} vs {} (se {se})", mu[j]);
        }
    }

    #[test]
    fn sweeps_preserve_the_latent_conditional() {
        // Joint draws (x, y) give latents that are exact conditional draws.
        let n = 20_000;
        let params = Parameters::new(
            vec![0.3, -0.2],
            SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 0.8]]).unwrap(),
        )
        .unwrap();
        let chol = params.sigma.to_dmatrix().cholesky().unwrap().l();
        let mut rng = stream_rng(21, 0, 0);
        let mut latents = Vec::with_capacity(2 * n);
        let mut ys = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let z = DVector::from_fn(2, |_, _| rng.sample(StandardNormal));
            let x = chol.clone() * z;
            for j in 0..2 {
                let v = params.mu[j] + x[j];
                latents.push(v);
                ys.push(LinkFamily::RoundedGaussian.observe(v, &mut rng));
            }
        }
        let data = CountMatrix::from_vec(n, 2, ys).unwrap();
        let spec = ModelSpec::uniform(LinkFamily::RoundedGaussian, 2).unwrap();
        let stat = |l: &[f64]| l.chunks(2).map(|x| x[0] * x[1]).collect::<Vec<f64>>();
        let before = stat(&latents);
        let mut state = AugmentedState {
            latents,
            n,
            p: 2,
            params,
            iteration: 0,
        };
        for _ in 0..30 {
            update_latents(&mut state, &data, &spec, 22, 1).unwrap();
            state.iteration += 1;
        }
        let after = stat(&state.latents);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let sd = |v: &[f64]| {
            let m = mean(v);
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        // Paired rows are positively correlated, so the unpaired SE is conservative.
        let se = ((sd(&before).powi(2) + sd(&after).powi(2)) / n as f64).sqrt();
        assert!((mean(&before) - mean(&after)).abs() < 3.0 * se);
    }

    #[test]
    fn rounded_latents_stay_in_their_cells() {
        let data = rounded_data(400, 0.5, 1.0, 1);
        let spec = ModelSpec::uniform(LinkFamily::RoundedGaussian, 1).unwrap();
        let mut state = initial_state(&spec, &data, None).unwrap();
        for _ in 0..20 {
            update_latents(&mut state, &data, &spec, 4, 1).unwrap();
            state.iteration += 1;
        }
        for (i, &x) in state.latents.iter().enumerate() {
            assert_eq!(LinkFamily::RoundedGaussian.log_density(data.get(i, 0), x), 0.0);
        }
    }

    #[test]
    fn conditional_mean_of_mu_is_xbar_and_sigma_is_pd() {
        let mut state = fixed_state(60, 3, 2);
        let (xbar, _) = latent_moments(&state);
        let mut rng = stream_rng(5, 0, 0);
        let mut acc = DVector::zeros(3);
        let draws = 10_000;
        for _ in 0..draws {
            update_params(&mut state, &mut rng).unwrap();
            assert!(state.params.sigma.is_positive_definite());
            acc += DVector::from_vec(state.params.mu.clone());
        }
        // E[mu] = xbar; the sd of a single draw is about 1/sqrt(60).
        let se = (1.0 / 60.0f64).sqrt() / (draws as f64).sqrt() * 1.5;
        for j in 0..3 {
            assert!((acc[j] / draws as f64 - xbar[j]).abs() < 3.0 * se);
        }
    }

    #[test]
    fn inverse_wishart_mean_matches_moment_oracle() {
        let state = fixed_state(30, 2, 7);
        let (_, s) = latent_moments(&state);
        let (n, p) = (30.0, 2.0);
        let expected = &s / (n - p - 2.0);
        let mut rng = stream_rng(8, 0, 0);
        let draws: Vec<DMatrix<f64>> = (0..10_000)
            .map(|_| sample_inverse_wishart(n - 1.0, &s, &mut rng).unwrap())
            .collect();
        for (a, b) in [(0, 0), (1, 1), (0, 1)] {
            let vals: Vec<f64> = draws.iter().map(|d| d[(a, b)]).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
            assert!((m - expected[(a, b)]).abs() < 3.0 * sd / (vals.len() as f64).sqrt(), "({a},{b}) {m} vs {}", expected[(a, b)]);
        }
    }

    #[test]
    fn singular_scatter_is_an_error() {
        let mut state = fixed_state(3, 3, 9);
        let err = update_params(&mut state, &mut stream_rng(1, 0, 0)).unwrap_err();
        assert!(matches!(err, MosaicError::SingularScatter { .. }));
        let mut state = fixed_state(10, 2, 9);
        state.latents.chunks_mut(2).for_each(|x| x[1] = 2.0 * x[0]);
        assert!(update_params(&mut state, &mut stream_rng(1, 0, 0)).is_err());
    }

    #[test]
    fn rounded_posterior_covers_truth() {
        let (mu, sigma) = (4.5, 1.2);
        let data = rounded_data(2000, mu, sigma, 11);
        let spec = ModelSpec::uniform(LinkFamily::RoundedGaussian, 1).unwrap();
        let cfg = DamcmcConfig {
            iterations: 3000,
            burn_in: 500,
            thin: 5,
            seed: 12,
            ..Default::default()
        };
        let run = run_damcmc(&spec, &data, &cfg, None).unwrap();
        assert_eq!(run.len(), 500);
        for (truth, vals) in [
            (mu, run.knot_draws.iter().map(|k| k[0].mu).collect::<Vec<_>>()),
            (sigma, run.knot_draws.iter().map(|k| k[0].sigma).collect()),
        ] {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
            assert!((m - truth).abs() < 4.0 * sd, "{m} +- {sd} vs {truth}");
        }
    }

    #[test]
    fn deterministic_across_workers() {
        let data = rounded_data(1000, 0.8, 1.0, 13);
        let spec = ModelSpec::uniform(LinkFamily::RoundedGaussian, 1).unwrap();
        let cfg = DamcmcConfig {
            iterations: 30,
            burn_in: 10,
            thin: 1,
            seed: 3,
            ..Default::default()
        };
        let a = run_damcmc(&spec, &data, &cfg, None).unwrap();
        let b = run_damcmc(&spec, &data, &DamcmcConfig { workers: 3, ..cfg }, None).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
    }

    #[test]
    fn budget_mode_respects_wall_clock() {
        let data = rounded_data(500, 0.8, 1.0, 14);
        let spec = ModelSpec::uniform(LinkFamily::RoundedGaussian, 1).unwrap();
        let cfg = DamcmcConfig {
            budget_seconds: Some(0.5),
            budget_draws: 50,
            ..Default::default()
        };
        let start = Instant::now();
        let run = run_damcmc(&spec, &data, &cfg, None).unwrap();
        let elapsed = start.elapsed().as_secs_f64();
        assert!((0.5..=0.51).contains(&elapsed), "{elapsed}");
        assert!(run.len() <= 50 && run.len() >= 25);
    }

    #[test]
    fn sweep_cost_is_linear_in_n() {
        let spec = ModelSpec::uniform(LinkFamily::RoundedGaussian, 1).unwrap();
        let time = |n: usize| {
            let data = rounded_data(n, 0.8, 1.0, 15);
            let mut state = initial_state(&spec, &data, None).unwrap();
            let mut best = f64::INFINITY;
            for _ in 0..5 {
                let t = Instant::now();
                update_latents(&mut state, &data, &spec, 1, 1).unwrap();
                best = best.min(t.elapsed().as_secs_f64());
            }
            best
        };
        let ratio = time(20_000) / time(2000);
        assert!(ratio < 15.0, "{ratio}");
    }
}
