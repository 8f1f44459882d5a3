//! Parallel sampler for the Bayesian mosaic.
//!
//! Step 1 runs one chain per knot marginal. Step 2 draws every tile
//! conditionally on the aligned knot draws (or, for the plug-in variant, on
//! the knot posterior means). Each task owns a seeded RNG stream, so output is
//! identical at any worker count.

mod knot;
mod tile;

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use knot::{sample_knot, KnotChain};
pub(crate) use knot::{mh_log_ratio, moment_start};
pub use tile::{
    golden_section_max, laplace_approximation, sample_tile_laplace, sample_tile_plugin, sample_tile_short_mh,
    tile_rng, TileDraw, TileTarget,
};


use crate::error::{MosaicError, Result};
use crate::likelihood::{PairCells, KNOT_ORDER, TILE_ORDER};
use crate::model::{
    assemble_parameters, pair_count, pairs, CompressedDataset, KnotParam, ModelSpec, Parameters, SymMatrix,
    TileParam,
};
use crate::parallel::parallel_map;
use crate::quadrature::gauss_hermite_rule;

/// Acceptance rate targeted by burn-in adaptation.
pub const ACCEPT_TARGET: f64 = 0.35;

/// Knot prior `sigma^{-1/2} 1{|mu| < A, 0 < sigma < B}`; tiles are uniform on
/// their support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    #[serde(rename = "A", alias = "a")]
    pub a: f64,
    #[serde(rename = "B", alias = "b")]
    pub b: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { a: 100.0, b: 10.0 }
    }
}

impl PriorConfig {
    pub fn contains(&self, k: KnotParam) -> bool {
        k.mu.abs() < self.a && k.sigma > 0.0 && k.sigma < self.b
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(MosaicError::InvalidInput(format!("prior bounds must be positive (A = {}, B = {})", self.a, self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TileStrategy {
    /// A few warm-started MH steps per knot draw.
    ShortMh,
    /// One draw from a Gaussian fitted at the conditional mode.
    Laplace,
    /// One long chain with knots fixed at their posterior means.
    PlugIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Multiplier on the curvature-based knot proposal.
    pub knot_scale: f64,
    /// Tile proposal sd as a fraction of `sqrt(sigma_ss sigma_tt)`.
    pub tile_scale: f64,
    pub tile_strategy: TileStrategy,
    pub tile_inner_steps: usize,
    /// Robbins-Monro scale adaptation during burn-in.
    pub adapt: bool,
    pub knot_order: usize,
    pub tile_order: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            burn_in: 100,
            thin: 1,
            knot_scale: 1.0,
            tile_scale: 0.1,
            tile_strategy: TileStrategy::ShortMh,
            tile_inner_steps: 10,
            adapt: true,
            knot_order: KNOT_ORDER,
            tile_order: TILE_ORDER,
            seed: 0,
            workers: 1,
        }
    }
}

impl ChainConfig {
    /// 40000 iterations, half burn-in, thinned to 500 draws.
    pub fn long_chain() -> Self {
        Self {
            iterations: 40_000,
            burn_in: 20_000,
            thin: 40,
            ..Self::default()
        }
    }

    pub fn retained(&self) -> usize {
        (self.iterations.saturating_sub(self.burn_in)) / self.thin.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MosaicError::InvalidInput(msg));
        if self.thin == 0 {
            return bad("thin must be positive".into());
        }
        if self.burn_in >= self.iterations || self.retained() == 0 {
            return bad(format!(
                "iterations {} with burn-in {} and thin {} retain no draws",
                self.iterations, self.burn_in, self.thin
            ));
        }
        if !(self.knot_scale > 0.0 && self.tile_scale > 0.0) {
            return bad("proposal scales must be positive".into());
        }
        if self.tile_inner_steps == 0 {
            return bad("tile_inner_steps must be positive".into());
        }
        Ok(())
    }
}

/// Run-level diagnostics written next to the samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    pub method: String,
    pub draws: usize,
    pub knot_acceptance: Vec<f64>,
    pub tile_acceptance: Vec<f64>,
    pub laplace_fallbacks: Vec<u64>,
    pub seconds: Vec<(String, f64)>,
    pub warnings: Vec<String>,
    pub already_pd_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent_acceptance: Option<f64>,
}

/// `M` aligned joint draws: row `m` holds all knots and all tiles of draw `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MosaicSamples {
    pub p: usize,
    pub knot_draws: Vec<Vec<KnotParam>>,
    pub tile_draws: Vec<Vec<TileParam>>,
    pub corrected_sigma: Option<Vec<SymMatrix>>,
    /// Knot chains first, then tile tasks in pair order.
    pub acceptance_rates: Vec<f64>,
    pub diagnostics: SamplerDiagnostics,
}

impl MosaicSamples {
    pub fn len(&self) -> usize {
        self.knot_draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knot_draws.is_empty()
    }

    /// Raw draw `m` assembled into `(mu, Sigma)`.
    pub fn draw(&self, m: usize) -> Parameters {
        assemble_parameters(&self.knot_draws[m], &self.tile_draws[m]).expect("draws are well formed")
    }

    /// Draw `m` with the projected covariance when available and requested.
    pub fn draw_corrected(&self, m: usize, corrected: bool) -> Parameters {
        let mut d = self.draw(m);
        if corrected {
            if let Some(c) = &self.corrected_sigma {
                d.sigma = c[m].clone();
            }
        }
        d
    }

    pub fn from_parameters(p: usize, draws: &[Parameters]) -> Result<Self> {
        let mut knot_draws = Vec::with_capacity(draws.len());
        let mut tile_draws = Vec::with_capacity(draws.len());
        for d in draws {
            if d.p() != p {
                return Err(MosaicError::Structure(format!("draw has dimension {}, expected {p}", d.p())));
            }
            let (k, t) = crate::model::split_parameters(d);
            knot_draws.push(k);
            tile_draws.push(t);
        }
        Ok(Self {
            p,
            knot_draws,
            tile_draws,
            corrected_sigma: None,
            acceptance_rates: Vec::new(),
            diagnostics: SamplerDiagnostics::default(),
        })
    }

    pub fn csv_header(p: usize) -> Vec<String> {
        let mut h: Vec<String> = (1..=p).map(|j| format!("mu_{j}")).collect();
        h.extend((1..=p).map(|j| format!("sigma_{j}_{j}")));
        h.extend(pairs(p).map(|(s, t)| format!("sigma_{}_{}", s + 1, t + 1)));
        h
    }

    /// One row per draw: means, variances, then covariances in pair order.
    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::csv_header(self.p))?;
        for (knots, tiles) in self.knot_draws.iter().zip(&self.tile_draws) {
            let row = knots
                .iter()
                .map(|k| k.mu)
                .chain(knots.iter().map(|k| k.sigma))
                .chain(tiles.iter().map(|t| t.sigma))
                .map(|v| v.to_string());
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv_from<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let cols = header.len();
        let p = (1..=cols).find(|&p| p * (p + 3) / 2 == cols).ok_or_else(|| {
            MosaicError::Structure(format!("{cols} columns do not match any dimension"))
        })?;
        if header != Self::csv_header(p) {
            return Err(MosaicError::Structure("unexpected sample column names".into()));
        }
        let mut samples = Self::from_parameters(p, &[])?;
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let v: Vec<f64> = record
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| MosaicError::InvalidInput(format!("sample row {i}: {e}")))?;
            samples.knot_draws.push((0..p).map(|j| KnotParam::new(v[j], v[p + j])).collect());
            samples
                .tile_draws
                .push(pairs(p).enumerate().map(|(k, (s, t))| TileParam::new(s, t, v[2 * p + k])).collect());
        }
        Ok(samples)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv_from(std::fs::File::open(path)?)
    }
}

/// Algorithm: parallel knot chains, then parallel tile tasks.
pub fn run_mosaic(
    spec: &ModelSpec,
    data: &CompressedDataset,
    prior: &PriorConfig,
    cfg: &ChainConfig,
) -> Result<MosaicSamples> {
    if spec.p() != data.p {
        return Err(MosaicError::Structure(format!(
            "model has p = {} but data has p = {}",
            spec.p(),
            data.p
        )));
    }
    cfg.validate()?;
    prior.validate()?;
    let p = spec.p();
    let m_draws = cfg.retained();
    let mut diagnostics = SamplerDiagnostics {
        method: "mosaic".into(),
        draws: m_draws,
        ..Default::default()
    };

    let start = Instant::now();
    let chains = parallel_map(cfg.workers, p, |j| sample_knot(spec.link(j), &data.uni[j], prior, cfg, j))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    diagnostics.seconds.push(("knots".into(), start.elapsed().as_secs_f64()));
    for c in &chains {
        diagnostics.knot_acceptance.push(c.acceptance_rate);
        diagnostics.warnings.extend(c.warning.clone());
    }
    let knot_draws: Vec<Vec<KnotParam>> = (0..m_draws).map(|m| chains.iter().map(|c| c.draws[m]).collect()).collect();

    let start = Instant::now();
    let pair_list: Vec<(usize, usize)> = pairs(p).collect();
    let cells: Vec<PairCells> = pair_list.iter().map(|&(s, t)| PairCells::new(data.pair(s, t))).collect();
    let rule = gauss_hermite_rule(cfg.tile_order)?;
    let target_for = |k: usize, ks: KnotParam, kt: KnotParam| {
        let (s, t) = pair_list[k];
        TileTarget {
            links: (spec.link(s), spec.link(t)),
            knot_s: ks,
            knot_t: kt,
            cells: &cells[k],
            rule: &rule,
        }
    };
    let n_pairs = pair_count(p);
    let summarize = |draws: Vec<TileDraw>| {
        let (acc, prop) = draws.iter().fold((0, 0), |a, d| (a.0 + d.accepted, a.1 + d.proposed));
        TileColumn {
            rate: acc as f64 / prop.max(1) as f64,
            fallbacks: draws.iter().filter(|d| d.fallback).count() as u64,
            draws: draws.into_iter().map(|d| d.tile).collect(),
        }
    };
    let columns: Vec<TileColumn> = match cfg.tile_strategy {
        TileStrategy::ShortMh => parallel_map(cfg.workers, n_pairs, |k| {
            let (s, t) = pair_list[k];
            let mut prev = 0.0;
            let draws = (0..m_draws)
                .map(|m| {
                    let target = target_for(k, knot_draws[m][s], knot_draws[m][t]);
                    let d = sample_tile_short_mh(&target, (s, t), prev, cfg, k, m);
                    prev = d.tile.sigma;
                    d
                })
                .collect();
            summarize(draws)
        }),
        TileStrategy::Laplace => {
            let mut flat = parallel_map(cfg.workers, n_pairs * m_draws, |idx| {
                let (k, m) = (idx / m_draws, idx % m_draws);
                let (s, t) = pair_list[k];
                sample_tile_laplace(&target_for(k, knot_draws[m][s], knot_draws[m][t]), (s, t), cfg, k, m)
            })
            .into_iter();
            (0..n_pairs).map(|_| summarize(flat.by_ref().take(m_draws).collect())).collect()
        }
        TileStrategy::PlugIn => {
            let means: Vec<KnotParam> = chains
                .iter()
                .map(|c| {
                    let (mu, sigma) = c.draws.iter().fold((0.0, 0.0), |acc, k| (acc.0 + k.mu, acc.1 + k.sigma));
                    KnotParam::new(mu / m_draws as f64, sigma / m_draws as f64)
                })
                .collect();
            parallel_map(cfg.workers, n_pairs, |k| {
                let (s, t) = pair_list[k];
                let (draws, rate) = sample_tile_plugin(&target_for(k, means[s], means[t]), (s, t), cfg, k);
                TileColumn {
                    draws,
                    rate,
                    fallbacks: 0,
                }
            })
        }
    };
    diagnostics.seconds.push(("tiles".into(), start.elapsed().as_secs_f64()));

    for (col, &(s, t)) in columns.iter().zip(&pair_list) {
        diagnostics.tile_acceptance.push(col.rate);
        diagnostics.laplace_fallbacks.push(col.fallbacks);
        if col.rate == 0.0 {
            diagnostics.warnings.push(format!("tile ({}, {}): no proposal accepted", s + 1, t + 1));
        }
    }
    let tile_draws: Vec<Vec<TileParam>> = (0..m_draws).map(|m| columns.iter().map(|c| c.draws[m]).collect()).collect();
    let acceptance_rates = diagnostics
        .knot_acceptance
        .iter()
        .chain(&diagnostics.tile_acceptance)
        .copied()
        .collect();
    Ok(MosaicSamples {
        p,
        knot_draws,
        tile_draws,
        corrected_sigma: None,
        acceptance_rates,
        diagnostics,
    })
}

struct TileColumn {
    draws: Vec<TileParam>,
    rate: f64,
    fallbacks: u64,
}

/// Componentwise posterior mean, plus the mean corrected covariance if the
/// draws have been projected.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMean {
    pub params: Parameters,
    pub corrected_sigma: Option<SymMatrix>,
}

pub fn posterior_mean(samples: &MosaicSamples) -> Result<PosteriorMean> {
    let m = samples.len();
    if m == 0 {
        return Err(MosaicError::InvalidInput("no draws".into()));
    }
    let p = samples.p;
    let mut knots = vec![KnotParam::new(0.0, 0.0); p];
    let mut tiles = samples.tile_draws[0].clone();
    tiles.iter_mut().for_each(|t| t.sigma = 0.0);
    for (kd, td) in samples.knot_draws.iter().zip(&samples.tile_draws) {
        for (acc, k) in knots.iter_mut().zip(kd) {
            acc.mu += k.mu;
            acc.sigma += k.sigma;
        }
        for (acc, t) in tiles.iter_mut().zip(td) {
            acc.sigma += t.sigma;
        }
    }
    let scale = 1.0 / m as f64;
    knots.iter_mut().for_each(|k| {
        k.mu *= scale;
        k.sigma *= scale;
    });
    tiles.iter_mut().for_each(|t| t.sigma *= scale);
    let params = assemble_parameters(&knots, &tiles)?;
    let corrected_sigma = samples.corrected_sigma.as_ref().map(|cs| {
        let mut acc = SymMatrix::zeros(p);
        for c in cs {
            for i in 0..p {
                for j in 0..=i {
                    acc.set(i, j, acc.get(i, j) + c.get(i, j));
                }
            }
        }
        SymMatrix::from_fn(p, |i, j| acc.get(i, j) * scale)
    });
    Ok(PosteriorMean { params, corrected_sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{compress, CountMatrix, LinkFamily};
    use crate::parallel::stream_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn poisson_data(n: usize, mu: &[f64], sd: &[f64], rho: f64, seed: u64) -> CompressedDataset {
        let p = mu.len();
        let mut rng = stream_rng(seed, 77, 0);
        let rows: Vec<Vec<i64>> = (0..n)
            .map(|_| {
                // Equicorrelated latent vector through a shared factor.
                let common: f64 = StandardNormal.sample(&mut rng);
                (0..p)
                    .map(|j| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        let x = mu[j] + sd[j] * (rho.sqrt() * common + (1.0 - rho).sqrt() * e);
                        LinkFamily::PoissonLogNormal.observe(x, &mut rng)
                    })
                    .collect()
            })
            .collect();
        compress(&CountMatrix::from_rows(&rows).unwrap()).unwrap()
    }

    #[test]
    fn p1_reduces_to_knot_chain() {
        let data = poisson_data(2000, &[-1.0], &[0.8], 0.0, 1);
        let spec = ModelSpec::uniform(LinkFamily::PoissonLogNormal, 1).unwrap();
        let cfg = ChainConfig {
            seed: 9,
            ..ChainConfig::default()
        };
        let run = run_mosaic(&spec, &data, &PriorConfig::default(), &cfg).unwrap();
        let chain = sample_knot(LinkFamily::PoissonLogNormal, &data.uni[0], &PriorConfig::default(), &cfg, 0).unwrap();
        assert!(run.tile_draws.iter().all(Vec::is_empty));
        let knots: Vec<KnotParam> = run.knot_draws.iter().map(|k| k[0]).collect();
        assert_eq!(knots, chain.draws);
    }

    #[test]
    fn correlations_recovered_in_imbalanced_regime() {
        use crate::experiment::{simulate_dataset, TruthSpec};
        let sim = simulate_dataset(&TruthSpec::imbalanced_poisson(3, 10_000, 21)).unwrap();
        let spec = ModelSpec::uniform(LinkFamily::PoissonLogNormal, 3).unwrap();
        let cfg = ChainConfig {
            iterations: 1100,
            burn_in: 100,
            thin: 2,
            tile_strategy: TileStrategy::Laplace,
            seed: 2,
            ..ChainConfig::default()
        };
        let run = run_mosaic(&spec, &compress(&sim.data).unwrap(), &PriorConfig::default(), &cfg).unwrap();
        for (s, t) in pairs(3) {
            let draws: Vec<f64> = (0..run.len()).map(|m| run.draw(m).correlation(s, t)).collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
            let truth = sim.truth.correlation(s, t);
            // Posterior sds here are about 0.25, so errors are judged on that scale.
            assert!((mean - truth).abs() < 3.0 * sd, "({s},{t}): {mean} vs {truth}, sd {sd}");
        }
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let data = poisson_data(1500, &[-1.0, -0.5, -1.2], &[0.8, 0.9, 0.7], 0.4, 2);
        let spec = ModelSpec::uniform(LinkFamily::PoissonLogNormal, 3).unwrap();
        for strategy in [TileStrategy::ShortMh, TileStrategy::Laplace, TileStrategy::PlugIn] {
            let cfg = ChainConfig {
                iterations: 60,
                burn_in: 20,
                tile_strategy: strategy,
                seed: 5,
                ..ChainConfig::default()
            };
            let one = run_mosaic(&spec, &data, &PriorConfig::default(), &cfg).unwrap();
            let many = run_mosaic(&spec, &data, &PriorConfig::default(), &ChainConfig { workers: 4, ..cfg }).unwrap();
            assert_eq!(one.to_csv_string(), many.to_csv_string(), "{strategy:?}");
        }
    }

    #[test]
    fn tiles_respect_aligned_support_and_rederive() {
        let data = poisson_data(1500, &[-1.0, -0.5, -1.2], &[0.8, 0.9, 0.7], 0.6, 3);
        let spec = ModelSpec::uniform(LinkFamily::PoissonLogNormal, 3).unwrap();
        let cfg = ChainConfig {
            iterations: 80,
            burn_in: 30,
            tile_strategy: TileStrategy::Laplace,
            seed: 6,
            ..ChainConfig::default()
        };
        let run = run_mosaic(&spec, &data, &PriorConfig::default(), &cfg).unwrap();
        let prior = PriorConfig::default();
        for m in 0..run.len() {
            for k in &run.knot_draws[m] {
                assert!(prior.contains(*k));
            }
            for t in &run.tile_draws[m] {
                let (ks, kt) = (run.knot_draws[m][t.s], run.knot_draws[m][t.t]);
                assert!(t.sigma.abs() < (ks.sigma * kt.sigma).sqrt());
            }
        }
        // Tile draw m depends only on knot draw m, the data and the seed.
        let rule = gauss_hermite_rule(cfg.tile_order).unwrap();
        let m = 17;
        let cells = PairCells::new(data.pair(1, 2));
        let target = TileTarget {
            links: (LinkFamily::PoissonLogNormal, LinkFamily::PoissonLogNormal),
            knot_s: run.knot_draws[m][1],
            knot_t: run.knot_draws[m][2],
            cells: &cells,
            rule: &rule,
        };
        let again = sample_tile_laplace(&target, (1, 2), &cfg, 2, m);
        assert_eq!(again.tile, run.tile_draws[m][2]);
    }

    #[test]
    fn csv_round_trip_and_header() {
        let data = poisson_data(500, &[-0.5, -0.7, -0.2], &[0.8, 0.9, 0.7], 0.3, 4);
        let spec = ModelSpec::uniform(LinkFamily::PoissonLogNormal, 3).unwrap();
        let run = run_mosaic(&spec, &data, &PriorConfig::default(), &ChainConfig::default()).unwrap();
        let text = run.to_csv_string();
        assert!(text.starts_with("mu_1,mu_2,mu_3,sigma_1_1,sigma_2_2,sigma_3_3,sigma_1_2,sigma_1_3,sigma_2_3\n"));
        let back = MosaicSamples::read_csv_from(text.as_bytes()).unwrap();
        assert_eq!(back.knot_draws, run.knot_draws);
        assert_eq!(back.tile_draws, run.tile_draws);
    }

    #[test]
    fn posterior_mean_matches_streaming_sum() {
        let draws: Vec<Parameters> = (0..7)
            .map(|i| {
                let x = i as f64;
                Parameters::new(
                    vec![x, -x / 3.0],
                    SymMatrix::from_rows(&[vec![1.0 + x, 0.1 * x], vec![0.1 * x, 2.0 + x * x]]).unwrap(),
                )
                .unwrap()
            })
            .collect();
        let samples = MosaicSamples::from_parameters(2, &draws).unwrap();
        let mean = posterior_mean(&samples).unwrap();
        let (mut s0, mut s01) = (0.0, 0.0);
        for d in &draws {
            s0 += d.mu[0];
            s01 += d.sigma.get(0, 1);
        }
        assert!((mean.params.mu[0] - s0 / 7.0).abs() < 1e-12);
        assert!((mean.params.sigma.get(1, 0) - s01 / 7.0).abs() < 1e-12);
        let single = MosaicSamples::from_parameters(2, &draws[3..4]).unwrap();
        assert_eq!(posterior_mean(&single).unwrap().params, draws[3]);
    }

    #[test]
    fn rejects_structural_mismatch_and_bad_config() {
        let data = poisson_data(100, &[-0.5, -0.7], &[0.8, 0.9], 0.3, 5);
        let spec = ModelSpec::uniform(LinkFamily::PoissonLogNormal, 3).unwrap();
        assert!(run_mosaic(&spec, &data, &PriorConfig::default(), &ChainConfig::default()).is_err());
        let spec = ModelSpec::uniform(LinkFamily::PoissonLogNormal, 2).unwrap();
        let cfg = ChainConfig {
            iterations: 100,
            burn_in: 100,
            ..ChainConfig::default()
        };
        assert!(run_mosaic(&spec, &data, &PriorConfig::default(), &cfg).is_err());
    }

    #[test]
    fn knot_kernel_has_correct_stationary_frequencies() {
        // Two flat squares with masses 0.4 and 0.6.
        let target = |x: [f64; 2]| {
            let inside = |c: f64| (c - 0.5..c + 0.5).contains(&x[0]) && (-0.5..0.5).contains(&x[1]);
            if inside(-1.0) {
                0.4f64.ln()
            } else if inside(1.0) {
                0.6f64.ln()
            } else {
                f64::NEG_INFINITY
            }
        };
        let mut rng = stream_rng(12, 0, 0);
        let (mut x, mut fx) = ([-1.0, 0.0], 0.4f64.ln());
        let (batches, len) = (200, 1000);
        let means: Vec<f64> = (0..batches)
            .map(|_| {
                let mut right = 0usize;
                for _ in 0..len {
                    knot::rw_step_2d(&target, &mut x, &mut fx, 1.0, [1.0, 0.0, 1.0], &mut rng);
                    right += (x[0] > 0.0) as usize;
                }
                right as f64 / len as f64
            })
            .collect();
        let freq = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|b| (b - freq).powi(2)).sum::<f64>() / (batches - 1) as f64;
        assert!((freq - 0.6).abs() < 3.0 * (var / batches as f64).sqrt(), "{freq}");
    }
}
