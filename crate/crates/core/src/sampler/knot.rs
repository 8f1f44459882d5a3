//! Random-walk Metropolis-Hastings on a single knot marginal.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{ChainConfig, PriorConfig, ACCEPT_TARGET};
use crate::error::{MosaicError, Result};
use crate::likelihood::knot_loglik;
use crate::model::{Histogram, KnotParam, LinkFamily};
use crate::parallel::{stream_rng, tag};
use crate::quadrature::gauss_hermite_rule;

/// Retained draws of one knot chain.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotChain {
    pub draws: Vec<KnotParam>,
    pub acceptance_rate: f64,
    pub warning: Option<String>,
}

/// Samples `kappa_{n,j}` on `(mu, log sigma)`.
///
/// The chain starts at the posterior mode with a proposal covariance taken
/// from the curvature there, and its scale is tuned by Robbins-Monro steps
/// during burn-in only.
pub fn sample_knot(
    link: LinkFamily,
    hist: &Histogram,
    prior: &PriorConfig,
    cfg: &ChainConfig,
    chain_id: usize,
) -> Result<KnotChain> {
    if hist.values().sum::<u64>() == 0 {
        return Err(MosaicError::InvalidInput(format!("knot {chain_id}: empty histogram")));
    }
    cfg.validate()?;
    let rule = gauss_hermite_rule(cfg.knot_order)?;
    // Prior sigma^{-1/2} plus the log-Jacobian of sigma = e^eta.
    let target = |x: [f64; 2]| -> f64 {
        let k = KnotParam::new(x[0], x[1].exp());
        if !prior.contains(k) {
            return f64::NEG_INFINITY;
        }
        knot_loglik(link, k, hist, &rule).value() + 0.5 * x[1]
    };

    let start = moment_start(link, hist, prior);
    let mode = nelder_mead(|x| -target(x), start, [0.1, 0.1], 2000);
    let chol = proposal_cholesky(&target, mode);

    let mut rng = stream_rng(cfg.seed, tag::KNOT, chain_id as u64);
    let mut x = mode;
    let mut fx = target(x);
    let mut log_scale = cfg.knot_scale.ln();
    let mut accepted = 0usize;
    let mut draws = Vec::with_capacity(cfg.retained());
    for it in 0..cfg.iterations {
        let (log_alpha, accept) = rw_step_2d(&target, &mut x, &mut fx, log_scale.exp(), chol, &mut rng);
        if it < cfg.burn_in {
            if cfg.adapt {
                log_scale += robbins_monro_step(log_alpha, it);
            }
        } else {
            accepted += accept as usize;
            if (it - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
                draws.push(KnotParam::new(x[0], x[1].exp()));
            }
        }
    }
    let kept = cfg.iterations - cfg.burn_in;
    let acceptance_rate = accepted as f64 / kept as f64;
    let warning = (accepted == 0).then(|| format!("knot {chain_id}: no proposal accepted after burn-in"));
    Ok(KnotChain {
        draws,
        acceptance_rate,
        warning,
    })
}

/// One Gaussian random-walk step with proposal factor `scale * chol`.
pub(crate) fn rw_step_2d<R: Rng + ?Sized>(
    target: &impl Fn([f64; 2]) -> f64,
    x: &mut [f64; 2],
    fx: &mut f64,
    scale: f64,
    chol: [f64; 3],
    rng: &mut R,
) -> (f64, bool) {
    let z0: f64 = rng.sample(StandardNormal);
    let z1: f64 = rng.sample(StandardNormal);
    let u: f64 = rng.random();
    let prop = [x[0] + scale * chol[0] * z0, x[1] + scale * (chol[1] * z0 + chol[2] * z1)];
    let fp = target(prop);
    let log_alpha = mh_log_ratio(fp, *fx);
    let accept = u.ln() < log_alpha;
    if accept {
        *x = prop;
        *fx = fp;
    }
    (log_alpha, accept)
}

/// `log(target(proposal) / target(current))` with the conventions that
/// leaving the support is always rejected and entering it always accepted.
pub(crate) fn mh_log_ratio(proposed: f64, current: f64) -> f64 {
    if proposed == f64::NEG_INFINITY || proposed.is_nan() {
        f64::NEG_INFINITY
    } else if current == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        proposed - current
    }
}

/// Burn-in adjustment of the log proposal scale.
pub(crate) fn robbins_monro_step(log_alpha: f64, it: usize) -> f64 {
    let alpha = if log_alpha >= 0.0 { 1.0 } else { log_alpha.exp() };
    (alpha - ACCEPT_TARGET) / ((it + 1) as f64).powf(0.6)
}

pub(crate) fn moment_start(link: LinkFamily, hist: &Histogram, prior: &PriorConfig) -> [f64; 2] {
    let n: f64 = hist.values().sum::<u64>() as f64;
    let mean = hist.iter().map(|(&y, &c)| y as f64 * c as f64).sum::<f64>() / n;
    let var = hist.iter().map(|(&y, &c)| (y as f64 - mean).powi(2) * c as f64).sum::<f64>() / n;
    let (mu, sigma) = match link {
        LinkFamily::RoundedGaussian => (mean - 0.5, (var - 1.0 / 12.0).max(0.05)),
        LinkFamily::PoissonLogNormal => {
            let m = mean.max(1e-3);
            let sigma = (1.0 + (var - m).max(0.01 * m * m) / (m * m)).ln().clamp(0.05, 5.0);
            (m.ln() - 0.5 * sigma, sigma)
        }
    };
    let mu = mu.clamp(-0.9 * prior.a, 0.9 * prior.a);
    let sigma = sigma.clamp(1e-3, 0.9 * prior.b);
    [mu, sigma.ln()]
}

/// Lower-triangular factor `[l11, l21, l22]` of `2.38^2 / 2 * H^{-1}`, with
/// `H` the negative Hessian of the target at `mode`.
fn proposal_cholesky(target: &impl Fn([f64; 2]) -> f64, mode: [f64; 2]) -> [f64; 3] {
    let h = 1e-4;
    let f0 = target(mode);
    let at = |d0: f64, d1: f64| target([mode[0] + d0, mode[1] + d1]);
    let h00 = -(at(h, 0.0) - 2.0 * f0 + at(-h, 0.0)) / (h * h);
    let h11 = -(at(0.0, h) - 2.0 * f0 + at(0.0, -h)) / (h * h);
    let h01 = -(at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
    let det = h00 * h11 - h01 * h01;
    let c = 2.38 * 2.38 / 2.0;
    if !(h00 > 0.0 && det > 0.0 && det.is_finite()) {
        return [0.05, 0.0, 0.05];
    }
    let (c00, c01, c11) = (c * h11 / det, -c * h01 / det, c * h00 / det);
    let l11 = c00.sqrt();
    let l21 = c01 / l11;
    let l22 = (c11 - l21 * l21).max(0.0).sqrt();
    [l11, l21, l22]
}

/// Minimizes `f` over the plane from `x0`.
pub(crate) fn nelder_mead(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: [f64; 2], max_iter: usize) -> [f64; 2] {
    let mut simplex = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut values = simplex.map(&f);
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..max_iter {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        let size = (simplex[2][0] - simplex[0][0]).abs().max((simplex[2][1] - simplex[0][1]).abs())
            + (simplex[1][0] - simplex[0][0]).abs().max((simplex[1][1] - simplex[0][1]).abs());
        if size < 1e-9 {
            break;
        }
        let centroid = lerp(simplex[0], simplex[1], 0.5);
        let reflected = lerp(simplex[2], centroid, 2.0);
        let fr = f(reflected);
        if fr < values[0] {
            let expanded = lerp(simplex[2], centroid, 3.0);
            let fe = f(expanded);
            if fe < fr {
                (simplex[2], values[2]) = (expanded, fe);
            } else {
                (simplex[2], values[2]) = (reflected, fr);
            }
        } else if fr < values[1] {
            (simplex[2], values[2]) = (reflected, fr);
        } else {
            let (toward, ft) = if fr < values[2] { (reflected, fr) } else { (simplex[2], values[2]) };
            let contracted = lerp(centroid, toward, 0.5);
            let fc = f(contracted);
            if fc < ft {
                (simplex[2], values[2]) = (contracted, fc);
            } else {
                for k in 1..3 {
                    simplex[k] = lerp(simplex[0], simplex[k], 0.5);
                    values[k] = f(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap_or(0);
    simplex[best]
}
