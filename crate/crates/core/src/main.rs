use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mosaic::damcmc::run_damcmc;
use mosaic::experiment::{
    complexity_probe, evaluate, extreme_value_checks, fisher_diagnostic, replicate, simulate_with_links,
    ExperimentConfig,
};
use mosaic::projection::correct_samples;
use mosaic::sampler::{run_mosaic, MosaicSamples, TileStrategy};
use mosaic::{compress, CountMatrix, KnotParam, LinkFamily, ModelSpec, Parameters};

#[derive(Parser)]
#[command(name = "mosaic", version, about = "Bayesian mosaic for latent Gaussian count models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and its truth from the config's truth ranges.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw posterior samples with the mosaic or DA-MCMC.
    Fit(FitArgs),
    /// Grouped MSE and coverage of samples against a truth.
    Eval {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        corrected: bool,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Diag(Diag),
    /// Simulate, fit and evaluate a number of replicates.
    Replicate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Mosaic,
    Damcmc,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Shortmh,
    Laplace,
    Plugin,
}

impl From<Strategy> for TileStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Shortmh => TileStrategy::ShortMh,
            Strategy::Laplace => TileStrategy::Laplace,
            Strategy::Plugin => TileStrategy::PlugIn,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum, default_value = "mosaic")]
    method: Method,
    #[arg(long, value_enum)]
    tile_strategy: Option<Strategy>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    diag: Option<PathBuf>,
    #[arg(long)]
    init_truth: Option<PathBuf>,
    #[arg(long)]
    budget_seconds: Option<f64>,
    /// Worker threads; 0 uses every available core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Project covariance draws onto the PSD cone before writing.
    #[arg(long)]
    corrected: bool,
}

#[derive(Subcommand)]
enum Diag {
    /// Monte Carlo information blocks at a truth.
    Fisher {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        mc_draws: usize,
        /// Sample size for predicted posterior sds; defaults to the truth n.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Knot likelihood timing against K and n.
    Complexity {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "poisson")]
        link: LinkArg,
        #[arg(long, default_value_t = 100)]
        bound_reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkArg {
    Poisson,
    RoundedGaussian,
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_truth(path: &Path) -> Result<Parameters> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: Parameters = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Parameters::new(raw.mu, raw.sigma)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn fit(args: FitArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => read_config(path)?,
        None => ExperimentConfig::default(),
    };
    let data = CountMatrix::read_csv(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let spec = match &cfg.model {
        Some(_) => cfg.model_spec()?,
        None => ModelSpec::uniform(cfg.truth.link, data.p())?,
    };
    let seed = args.seed.unwrap_or(cfg.seed);
    let workers = args.workers.unwrap_or(cfg.workers);
    let mut samples = match args.method {
        Method::Mosaic => {
            if args.init_truth.is_some() || args.budget_seconds.is_some() {
                bail!("--init-truth and --budget-seconds apply to damcmc only");
            }
            cfg.chain.seed = seed;
            cfg.chain.workers = workers;
            if let Some(s) = args.tile_strategy {
                cfg.chain.tile_strategy = s.into();
            }
            run_mosaic(&spec, &compress(&data)?, &cfg.prior, &cfg.chain)?
        }
        Method::Damcmc => {
            cfg.damcmc.seed = seed;
            cfg.damcmc.workers = workers;
            if args.budget_seconds.is_some() {
                cfg.damcmc.budget_seconds = args.budget_seconds;
            }
            let init = args.init_truth.as_deref().map(read_truth).transpose()?;
            run_damcmc(&spec, &data, &cfg.damcmc, init.as_ref())?
        }
    };
    if args.corrected {
        correct_samples(&mut samples, None, workers);
        let projected: Vec<Parameters> = (0..samples.len()).map(|m| samples.draw_corrected(m, true)).collect();
        let diagnostics = samples.diagnostics.clone();
        samples = MosaicSamples::from_parameters(samples.p, &projected)?;
        samples.diagnostics = diagnostics;
    }
    samples.write_csv(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.diag {
        write_json(path, &samples.diagnostics)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ComplexitySummary {
    slope_k: f64,
    slope_n: f64,
    time_ratio_n: f64,
    bound_reps: usize,
    bound_fraction: f64,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, truth, seed } => {
            let cfg = read_config(&config)?;
            let mut spec = cfg.truth.clone();
            spec.seed = seed.unwrap_or(cfg.seed);
            let sim = simulate_with_links(&spec, &cfg.model_spec()?)?;
            sim.data.write_csv(&out).with_context(|| format!("writing {}", out.display()))?;
            write_json(&truth, &sim.truth)?;
        }
        Command::Fit(args) => fit(args)?,
        Command::Eval { samples, truth, corrected, level, out } => {
            let samples = MosaicSamples::read_csv(&samples).with_context(|| format!("reading {}", samples.display()))?;
            let report = evaluate(&samples, corrected, &read_truth(&truth)?, level)?;
            write_json(&out, &report)?;
        }
        Command::Diag(Diag::Fisher { config, truth, out, mc_draws, n, seed }) => {
            let cfg = read_config(&config)?;
            let truth = read_truth(&truth)?;
            let report = fisher_diagnostic(
                &cfg.model_spec()?,
                &truth,
                n.unwrap_or(cfg.truth.n),
                mc_draws,
                seed.unwrap_or(cfg.seed),
            )?;
            write_json(&out, &report)?;
        }
        Command::Diag(Diag::Complexity { out, link, bound_reps, seed }) => {
            let (link, knot) = match link {
                LinkArg::Poisson => (LinkFamily::PoissonLogNormal, KnotParam::new(-3.5, 0.75)),
                LinkArg::RoundedGaussian => (LinkFamily::RoundedGaussian, KnotParam::new(4.5, 1.25)),
            };
            let report = complexity_probe(link, knot, &[16, 32, 64, 128, 256], &[10_000, 1_000_000]);
            let mut w = csv::Writer::from_path(&out).with_context(|| format!("writing {}", out.display()))?;
            w.write_record(["sweep", "k", "n", "seconds_per_eval"])?;
            for (sweep, rows) in [("k", &report.by_k), ("n", &report.by_n)] {
                for r in rows {
                    w.write_record([sweep.to_string(), r.k.to_string(), r.n.to_string(), r.seconds_per_eval.to_string()])?;
                }
            }
            w.flush()?;
            let checks = extreme_value_checks(bound_reps, 10_000, seed);
            let held = checks.iter().filter(|c| c.k as f64 <= c.bound).count();
            let summary = ComplexitySummary {
                slope_k: report.slope_k,
                slope_n: report.slope_n,
                time_ratio_n: report.by_n[1].seconds_per_eval / report.by_n[0].seconds_per_eval,
                bound_reps,
                bound_fraction: held as f64 / bound_reps.max(1) as f64,
            };
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Replicate { config, reps, out, workers, seed } => {
            let mut cfg = read_config(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            write_json(&out, &replicate(&cfg, reps)?)?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
