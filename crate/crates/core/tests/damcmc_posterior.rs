//! DA-MCMC against a dense grid posterior in one dimension, where the knot
//! marginal is the exact likelihood.

use mosaic::damcmc::{run_damcmc, DamcmcConfig};
use mosaic::experiment::simulate_from;
use mosaic::parallel::stream_rng;
use mosaic::{LinkFamily, ModelSpec, Parameters, SymMatrix};

fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn cell_prob(y: i64, mu: f64, var: f64) -> f64 {
    let sd = var.sqrt();
    if y == 0 {
        phi(-mu / sd)
    } else {
        phi((y as f64 - mu) / sd) - phi((y as f64 - 1.0 - mu) / sd)
    }
}

/// Marginal CDF on a uniform grid, from cell masses.
struct GridCdf {
    lo: f64,
    step: f64,
    cum: Vec<f64>,
}

impl GridCdf {
    fn new(lo: f64, step: f64, mass: &[f64]) -> Self {
        let total: f64 = mass.iter().sum();
        let mut acc = 0.0;
        let mut cum = vec![0.0];
        for m in mass {
            acc += m / total;
            cum.push(acc);
        }
        Self { lo, step, cum }
    }

    fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.cum.len() {
            return 1.0;
        }
        self.cum[i] + (pos - i as f64) * (self.cum[i + 1] - self.cum[i])
    }
}

fn ks(mut draws: Vec<f64>, cdf: &GridCdf) -> f64 {
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf.eval(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn damcmc_matches_grid_posterior_for_one_rounded_dimension() {
    let spec = ModelSpec::uniform(LinkFamily::RoundedGaussian, 1).unwrap();
    let truth = Parameters::new(vec![4.5], SymMatrix::from_rows(&[vec![1.2]]).unwrap()).unwrap();
    let (data, _) = simulate_from(&truth, &spec, 50, &mut stream_rng(17, 0, 0)).unwrap();
    let cfg = DamcmcConfig {
        iterations: 51_000,
        burn_in: 1_000,
        thin: 5,
        seed: 3,
        ..DamcmcConfig::default()
    };
    let samples = run_damcmc(&spec, &data, &cfg, None).unwrap();
    assert_eq!(samples.len(), 10_000);

    // Posterior under the Jeffreys prior 1 / sigma on a midpoint grid.
    let (mu_lo, mu_hi, var_lo, var_hi, cells) = (2.5, 6.5, 0.05, 5.0, 600);
    let (dm, dv) = ((mu_hi - mu_lo) / cells as f64, (var_hi - var_lo) / cells as f64);
    let ys: Vec<i64> = data.column(0).collect();
    let mut log_post = vec![0.0; cells * cells];
    for i in 0..cells {
        let mu = mu_lo + (i as f64 + 0.5) * dm;
        for j in 0..cells {
            let var = var_lo + (j as f64 + 0.5) * dv;
            log_post[i * cells + j] = -var.ln() + ys.iter().map(|&y| cell_prob(y, mu, var).ln()).sum::<f64>();
        }
    }
    let top = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let post: Vec<f64> = log_post.iter().map(|l| (l - top).exp()).collect();
    let mu_mass: Vec<f64> = (0..cells).map(|i| post[i * cells..(i + 1) * cells].iter().sum()).collect();
    let var_mass: Vec<f64> = (0..cells).map(|j| (0..cells).map(|i| post[i * cells + j]).sum()).collect();
    // The grid must hold essentially all the mass.
    for mass in [&mu_mass, &var_mass] {
        let total: f64 = mass.iter().sum();
        assert!(mass[0] / total < 1e-8 && mass[cells - 1] / total < 1e-8);
    }

    let mu_draws: Vec<f64> = (0..samples.len()).map(|m| samples.draw(m).mu[0]).collect();
    let var_draws: Vec<f64> = (0..samples.len()).map(|m| samples.draw(m).sigma.get(0, 0)).collect();
    let ks_mu = ks(mu_draws, &GridCdf::new(mu_lo, dm, &mu_mass));
    let ks_var = ks(var_draws, &GridCdf::new(var_lo, dv, &var_mass));
    assert!(ks_mu < 0.08, "mu KS {ks_mu}");
    assert!(ks_var < 0.08, "sigma KS {ks_var}");
}
