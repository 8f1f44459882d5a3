//! Synthetic truths and datasets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{MosaicError, Result};
use crate::model::{CountMatrix, LinkFamily, ModelSpec, Parameters, SymMatrix};
use crate::parallel::{stream_rng, tag};

/// Generating process for one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub mu_range: (f64, f64),
    pub sigma_diag_range: (f64, f64),
    #[serde(default = "one")]
    pub lkj_eta: f64,
    pub p: usize,
    pub n: usize,
    pub link: LinkFamily,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl TruthSpec {
    /// Imbalanced Poisson regime: `mu ~ U(-4, -3)`, `sigma_jj ~ U(0.5, 1)`.
    pub fn imbalanced_poisson(p: usize, n: usize, seed: u64) -> Self {
        Self {
            mu_range: (-4.0, -3.0),
            sigma_diag_range: (0.5, 1.0),
            lkj_eta: 1.0,
            p,
            n,
            link: LinkFamily::PoissonLogNormal,
            seed,
        }
    }

    /// Balanced rounded regime: `mu ~ U(4, 5)`, `sigma_jj ~ U(1, 1.5)`.
    pub fn balanced_rounded(p: usize, n: usize, seed: u64) -> Self {
        Self {
            mu_range: (4.0, 5.0),
            sigma_diag_range: (1.0, 1.5),
            lkj_eta: 1.0,
            p,
            n,
            link: LinkFamily::RoundedGaussian,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu_range.0 < self.mu_range.1
            && 0.0 < self.sigma_diag_range.0
            && self.sigma_diag_range.0 < self.sigma_diag_range.1
            && self.lkj_eta > 0.0
            && self.p >= 1
            && self.n >= 1;
        if ok {
            Ok(())
        } else {
            Err(MosaicError::InvalidInput(format!("invalid truth specification: {self:?}")))
        }
    }
}

/// LKJ(`eta`) correlation matrix by the onion construction.
pub fn sample_lkj<R: Rng + ?Sized>(p: usize, eta: f64, rng: &mut R) -> SymMatrix {
    let mut r = DMatrix::<f64>::identity(p, p);
    if p < 2 {
        return SymMatrix::identity(p);
    }
    let mut beta = eta + (p as f64 - 2.0) / 2.0;
    let r12 = 2.0 * Beta::new(beta, beta).expect("positive shape").sample(rng) - 1.0;
    r[(0, 1)] = r12;
    r[(1, 0)] = r12;
    for k in 2..p {
        beta -= 0.5;
        let y = Beta::new(k as f64 / 2.0, beta).expect("positive shape").sample(rng);
        let mut u = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        u /= u.norm();
        let w = u * y.sqrt();
        let chol = r.view((0, 0), (k, k)).into_owned().cholesky().expect("leading block is PD").l();
        let z = chol * w;
        for i in 0..k {
            r[(i, k)] = z[i];
            r[(k, i)] = z[i];
        }
    }
    SymMatrix::from_dmatrix_lossy(&r)
}

/// Dataset together with the realized truth and the latent matrix behind it.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: CountMatrix,
    pub truth: Parameters,
    /// Row-major `n x p` latent Gaussians.
    pub latents: Vec<f64>,
}

/// Draws `(mu, Sigma)` from `truth` and then `n` observations through the links.
pub fn simulate_dataset(truth: &TruthSpec) -> Result<Simulated> {
    simulate_with_links(truth, &ModelSpec::uniform(truth.link, truth.p)?)
}

/// [`simulate_dataset`] with a link per dimension.
pub fn simulate_with_links(truth: &TruthSpec, spec: &ModelSpec) -> Result<Simulated> {
    truth.validate()?;
    if spec.p() != truth.p {
        return Err(MosaicError::Structure("model and truth dimensions differ".into()));
    }
    let p = truth.p;
    let mut rng = stream_rng(truth.seed, tag::SIMULATE, 0);
    let mu: Vec<f64> = (0..p).map(|_| rng.random_range(truth.mu_range.0..truth.mu_range.1)).collect();
    let sd: Vec<f64> = (0..p)
        .map(|_| rng.random_range(truth.sigma_diag_range.0..truth.sigma_diag_range.1).sqrt())
        .collect();
    let corr = sample_lkj(p, truth.lkj_eta, &mut rng);
    let sigma = SymMatrix::from_fn(p, |i, j| sd[i] * sd[j] * corr.get(i, j));
    let params = Parameters::new(mu, sigma)?;
    let (data, latents) = simulate_from(&params, spec, truth.n, &mut rng)?;
    Ok(Simulated {
        data,
        truth: params,
        latents,
    })
}

/// `n` observations from fixed parameters.
pub fn simulate_from<R: Rng + ?Sized>(
    params: &Parameters,
    spec: &ModelSpec,
    n: usize,
    rng: &mut R,
) -> Result<(CountMatrix, Vec<f64>)> {
    let p = params.p();
    let chol = params
        .sigma
        .to_dmatrix()
        .cholesky()
        .ok_or_else(|| MosaicError::InvalidInput("covariance is not positive definite".into()))?
        .l();
    let mut latents = Vec::with_capacity(n * p);
    let mut data = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        for i in 0..p {
            let x = params.mu[i] + (0..=i).map(|k| chol[(i, k)] * z[k]).sum::<f64>();
            latents.push(x);
            data.push(spec.link(i).observe(x, rng));
        }
    }
    Ok((CountMatrix::from_vec(n, p, data)?, latents))
}
