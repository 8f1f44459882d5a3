//! Simulation studies: synthetic data, evaluation against the truth, and
//! replicate tables comparing the mosaic with DA-MCMC.

pub mod complexity;
pub mod evaluate;
pub mod fisher;
pub mod simulate;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use complexity::{complexity_probe, extreme_value_bound, extreme_value_checks, BoundCheck, ComplexityReport};
pub use evaluate::{evaluate, quantile, EvalReport, ParameterSummary, GROUPS, MIN_RELIABLE_DRAWS};
pub use fisher::{fisher_diagnostic, FisherDiagnostic};
pub use simulate::{sample_lkj, simulate_dataset, simulate_from, simulate_with_links, Simulated, TruthSpec};

use crate::damcmc::{run_damcmc, DamcmcConfig};
use crate::error::{MosaicError, Result};
use crate::model::{compress, ModelSpec, Parameters};
use crate::parallel::{derive_seed, parallel_map, tag};
use crate::projection::correct_samples;
use crate::sampler::{run_mosaic, ChainConfig, MosaicSamples, PriorConfig};

/// Everything that defines a simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Links per dimension; defaults to the truth's link in every dimension.
    pub model: Option<ModelSpec>,
    pub truth: TruthSpec,
    pub prior: PriorConfig,
    pub chain: ChainConfig,
    pub damcmc: DamcmcConfig,
    pub run_damcmc: bool,
    /// When set, DA-MCMC runs for this multiple of the mosaic's wall time.
    pub damcmc_budget_factor: Option<f64>,
    pub init_truth: bool,
    pub corrected: bool,
    pub level: f64,
    pub seed: u64,
    /// Replicates run concurrently; each fit is single-threaded.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: None,
            truth: TruthSpec::imbalanced_poisson(3, 10_000, 0),
            prior: PriorConfig::default(),
            chain: ChainConfig::default(),
            damcmc: DamcmcConfig::default(),
            run_damcmc: false,
            damcmc_budget_factor: None,
            init_truth: false,
            corrected: true,
            level: 0.95,
            seed: 0,
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let spec = match &self.model {
            Some(m) => ModelSpec::new(m.links().to_vec())?,
            None => ModelSpec::uniform(self.truth.link, self.truth.p)?,
        };
        if spec.p() != self.truth.p {
            return Err(MosaicError::Structure("model and truth dimensions differ".into()));
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.model_spec()?;
        self.truth.validate()?;
        self.prior.validate()?;
        self.chain.validate()?;
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(MosaicError::InvalidInput(format!("level {} outside (0, 1)", self.level)));
        }
        if matches!(self.damcmc_budget_factor, Some(f) if !(f > 0.0)) {
            return Err(MosaicError::InvalidInput("damcmc budget factor must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub seed: u64,
    pub truth: Parameters,
    pub zero_fraction: f64,
    pub mosaic: EvalReport,
    pub mosaic_seconds: f64,
    pub damcmc: Option<EvalReport>,
    pub damcmc_seconds: Option<f64>,
}

/// Across-replicate mean and standard deviation of each group metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub report: EvalReport,
    pub mse_sd: BTreeMap<String, f64>,
    pub coverage_sd: BTreeMap<String, f64>,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateTable {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicateRecord>,
    pub summary: BTreeMap<String, MethodSummary>,
}

/// Fitted draws for one replicate, before evaluation.
#[derive(Debug, Clone)]
pub struct ReplicateFits {
    pub simulated: Simulated,
    pub mosaic: MosaicSamples,
    pub mosaic_seconds: f64,
    pub damcmc: Option<MosaicSamples>,
    pub damcmc_seconds: Option<f64>,
}

pub fn replicate_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, tag::REPLICATE, index as u64)
}

/// Simulates replicate `index` and fits it with the configured methods.
pub fn fit_replicate(cfg: &ExperimentConfig, index: usize) -> Result<ReplicateFits> {
    let spec = cfg.model_spec()?;
    let seed = replicate_seed(cfg.seed, index);
    let truth_spec = TruthSpec { seed, ..cfg.truth.clone() };
    let simulated = simulate_with_links(&truth_spec, &spec)?;
    let compressed = compress(&simulated.data)?;
    let chain = ChainConfig { seed, workers: 1, ..cfg.chain.clone() };
    let clock = Instant::now();
    let mut mosaic = run_mosaic(&spec, &compressed, &cfg.prior, &chain)?;
    if cfg.corrected {
        correct_samples(&mut mosaic, None, 1);
    }
    let mosaic_seconds = clock.elapsed().as_secs_f64();
    let (damcmc, damcmc_seconds) = if cfg.run_damcmc {
        let budget = cfg.damcmc_budget_factor.map(|f| f * mosaic_seconds).or(cfg.damcmc.budget_seconds);
        let da_cfg = DamcmcConfig {
            seed,
            workers: 1,
            budget_seconds: budget,
            ..cfg.damcmc.clone()
        };
        let init = cfg.init_truth.then_some(&simulated.truth);
        let clock = Instant::now();
        let draws = run_damcmc(&spec, &simulated.data, &da_cfg, init)?;
        (Some(draws), Some(clock.elapsed().as_secs_f64()))
    } else {
        (None, None)
    };
    Ok(ReplicateFits {
        simulated,
        mosaic,
        mosaic_seconds,
        damcmc,
        damcmc_seconds,
    })
}

pub fn run_replicate(cfg: &ExperimentConfig, index: usize) -> Result<ReplicateRecord> {
    let fits = fit_replicate(cfg, index)?;
    let truth = fits.simulated.truth;
    let mosaic = evaluate(&fits.mosaic, cfg.corrected, &truth, cfg.level)?;
    // DA-MCMC draws are always positive definite.
    let damcmc = fits.damcmc.as_ref().map(|d| evaluate(d, false, &truth, cfg.level)).transpose()?;
    Ok(ReplicateRecord {
        index,
        seed: replicate_seed(cfg.seed, index),
        zero_fraction: fits.simulated.data.zero_fraction(),
        truth,
        mosaic,
        mosaic_seconds: fits.mosaic_seconds,
        damcmc,
        damcmc_seconds: fits.damcmc_seconds,
    })
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Averages per-replicate reports group by group.
pub fn summarize(reports: &[&EvalReport], seconds: &[f64]) -> Option<MethodSummary> {
    let first = reports.first()?;
    let mut mse = BTreeMap::new();
    let mut coverage = BTreeMap::new();
    let mut mse_sd = BTreeMap::new();
    let mut coverage_sd = BTreeMap::new();
    for group in first.mse.keys() {
        let (m, s) = mean_sd(&reports.iter().map(|r| r.mse[group]).collect::<Vec<_>>());
        mse.insert(group.clone(), m);
        mse_sd.insert(group.clone(), s);
        let (m, s) = mean_sd(&reports.iter().map(|r| r.coverage[group]).collect::<Vec<_>>());
        coverage.insert(group.clone(), m);
        coverage_sd.insert(group.clone(), s);
    }
    Some(MethodSummary {
        report: EvalReport {
            mse,
            coverage,
            replicate_count: reports.len(),
            level: first.level,
            draws: first.draws,
            coverage_reliable: reports.iter().all(|r| r.coverage_reliable),
            corrected: first.corrected,
            parameters: Vec::new(),
        },
        mse_sd,
        coverage_sd,
        mean_seconds: mean_sd(seconds).0,
    })
}

/// Runs `reps` replicates (concurrently over `cfg.workers`) and aggregates.
pub fn replicate(cfg: &ExperimentConfig, reps: usize) -> Result<ReplicateTable> {
    cfg.validate()?;
    if reps == 0 {
        return Err(MosaicError::InvalidInput("need at least one replicate".into()));
    }
    let records = parallel_map(cfg.workers, reps, |r| run_replicate(cfg, r)).into_iter().collect::<Result<Vec<_>>>()?;
    let mut summary = BTreeMap::new();
    let mosaic: Vec<&EvalReport> = records.iter().map(|r| &r.mosaic).collect();
    let secs: Vec<f64> = records.iter().map(|r| r.mosaic_seconds).collect();
    if let Some(s) = summarize(&mosaic, &secs) {
        summary.insert("mosaic".to_string(), s);
    }
    let da: Vec<&EvalReport> = records.iter().filter_map(|r| r.damcmc.as_ref()).collect();
    let secs: Vec<f64> = records.iter().filter_map(|r| r.damcmc_seconds).collect();
    if let Some(s) = summarize(&da, &secs) {
        summary.insert("damcmc".to_string(), s);
    }
    Ok(ReplicateTable {
        config: cfg.clone(),
        records,
        summary,
    })
}
