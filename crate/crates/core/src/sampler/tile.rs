//! Tile conditionals and the three strategies for drawing from them.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::knot::{mh_log_ratio, robbins_monro_step};
use super::ChainConfig;
use crate::likelihood::{tile_loglik_cells, PairCells};
use crate::model::{KnotParam, LinkFamily, TileParam};
use crate::parallel::{stream_rng, tag};
use crate::quadrature::QuadratureRule;

/// `log tau_{n,st}(sigma_st | theta_ss, theta_tt)` up to a constant.
#[derive(Debug, Clone, Copy)]
pub struct TileTarget<'a> {
    pub links: (LinkFamily, LinkFamily),
    pub knot_s: KnotParam,
    pub knot_t: KnotParam,
    pub cells: &'a PairCells,
    pub rule: &'a QuadratureRule,
}

impl TileTarget<'_> {
    /// `sqrt(sigma_ss sigma_tt)`; the support is the open interval of this radius.
    pub fn bound(&self) -> f64 {
        (self.knot_s.sigma * self.knot_t.sigma).sqrt()
    }

    pub fn log_density(&self, sigma_st: f64) -> f64 {
        tile_loglik_cells(self.links, sigma_st, self.knot_s, self.knot_t, self.cells, self.rule).value()
    }
}

/// One tile draw with its bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileDraw {
    pub tile: TileParam,
    pub accepted: usize,
    pub proposed: usize,
    /// Laplace only: the Gaussian step was abandoned for short MH.
    pub fallback: bool,
}

/// Stream for draw `m` of tile task `chain_id`.
pub fn tile_rng(seed: u64, chain_id: usize, m: usize) -> ChaCha8Rng {
    stream_rng(seed, tag::TILE, ((chain_id as u64) << 32) | m as u64)
}

/// Random-walk MH on a 1-D log-density; returns the new state and log ratio.
pub(crate) fn rw_step_1d<R: Rng + ?Sized>(
    f: &impl Fn(f64) -> f64,
    x: &mut f64,
    fx: &mut f64,
    scale: f64,
    rng: &mut R,
) -> (f64, bool) {
    let z: f64 = rng.sample(StandardNormal);
    let u: f64 = rng.random();
    let prop = *x + scale * z;
    let fp = f(prop);
    let log_alpha = mh_log_ratio(fp, *fx);
    let accept = u.ln() < log_alpha;
    if accept {
        *x = prop;
        *fx = fp;
    }
    (log_alpha, accept)
}

fn short_mh_from<R: Rng + ?Sized>(target: &TileTarget, init: f64, cfg: &ChainConfig, rng: &mut R) -> (f64, usize) {
    let bound = target.bound();
    let mut x = if init.abs() < bound { init } else { 0.0 };
    let mut fx = target.log_density(x);
    let scale = cfg.tile_scale * bound;
    let f = |v: f64| target.log_density(v);
    let mut accepted = 0;
    for _ in 0..cfg.tile_inner_steps {
        accepted += rw_step_1d(&f, &mut x, &mut fx, scale, rng).1 as usize;
    }
    (x, accepted)
}

/// `tile_inner_steps` random-walk steps started from `init` (or from 0 when
/// `init` is outside the current support); the last state is the draw.
pub fn sample_tile_short_mh(
    target: &TileTarget,
    pair: (usize, usize),
    init: f64,
    cfg: &ChainConfig,
    chain_id: usize,
    m: usize,
) -> TileDraw {
    let mut rng = tile_rng(cfg.seed, chain_id, m);
    let (x, accepted) = short_mh_from(target, init, cfg, &mut rng);
    TileDraw {
        tile: TileParam::new(pair.0, pair.1, x),
        accepted,
        proposed: cfg.tile_inner_steps,
        fallback: false,
    }
}

/// Maximizer of `f` on `[lo, hi]` by golden-section search.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..500 {
        if hi - lo <= tol {
            break;
        }
        if fc >= fd {
            hi = d;
            (d, fd) = (c, fc);
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            (c, fc) = (d, fd);
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Mode of `f` on `(-bound, bound)` and the central-difference curvature there.
pub fn laplace_approximation(f: impl Fn(f64) -> f64, bound: f64) -> (f64, f64) {
    let mode = golden_section_max(&f, -bound, bound, 1e-8 * bound);
    let h = 1e-4 * bound;
    let curvature = (f(mode + h) - 2.0 * f(mode) + f(mode - h)) / (h * h);
    (mode, curvature)
}

/// One Gaussian draw from the Laplace approximation of the tile conditional,
/// redrawn until it lands in the support. A non-negative curvature or 100
/// failed redraws fall back to short MH started at the mode.
pub fn sample_tile_laplace(
    target: &TileTarget,
    pair: (usize, usize),
    cfg: &ChainConfig,
    chain_id: usize,
    m: usize,
) -> TileDraw {
    let mut rng = tile_rng(cfg.seed, chain_id, m);
    let bound = target.bound();
    let (mode, curvature) = laplace_approximation(|x| target.log_density(x), bound);
    if curvature < 0.0 && curvature.is_finite() {
        let sd = (-1.0 / curvature).sqrt();
        for _ in 0..100 {
            let z: f64 = rng.sample(StandardNormal);
            let x = mode + sd * z;
            if x.abs() < bound {
                return TileDraw {
                    tile: TileParam::new(pair.0, pair.1, x),
                    accepted: 1,
                    proposed: 1,
                    fallback: false,
                };
            }
        }
    }
    let (x, accepted) = short_mh_from(target, mode, cfg, &mut rng);
    TileDraw {
        tile: TileParam::new(pair.0, pair.1, x),
        accepted,
        proposed: cfg.tile_inner_steps,
        fallback: true,
    }
}

/// One long chain on the tile conditional with knots fixed at `target`'s
/// (posterior-mean) values; returns the retained draws and acceptance rate.
pub fn sample_tile_plugin(
    target: &TileTarget,
    pair: (usize, usize),
    cfg: &ChainConfig,
    chain_id: usize,
) -> (Vec<TileParam>, f64) {
    let mut rng = stream_rng(cfg.seed, tag::PLUGIN, chain_id as u64);
    let bound = target.bound();
    let f = |v: f64| target.log_density(v);
    let mut x = golden_section_max(f, -bound, bound, 1e-8 * bound);
    let mut fx = f(x);
    let mut log_scale = (cfg.tile_scale * bound).ln();
    let mut accepted = 0usize;
    let mut draws = Vec::with_capacity(cfg.retained());
    for it in 0..cfg.iterations {
        let (log_alpha, accept) = rw_step_1d(&f, &mut x, &mut fx, log_scale.exp(), &mut rng);
        if it < cfg.burn_in {
            if cfg.adapt {
                log_scale += robbins_monro_step(log_alpha, it);
            }
        } else {
            accepted += accept as usize;
            if (it - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
                draws.push(TileParam::new(pair.0, pair.1, x));
            }
        }
    }
    (draws, accepted as f64 / (cfg.iterations - cfg.burn_in) as f64)
}
