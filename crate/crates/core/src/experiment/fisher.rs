//! Monte Carlo estimates of the knot and tile information blocks.

use serde::{Deserialize, Serialize};

use crate::error::{MosaicError, Result};
use crate::likelihood::{knot_log_density, knot_loglik, tile_loglik_cells, PairCells, KNOT_ORDER, TILE_ORDER};
use crate::model::{compress, pairs, split_parameters, KnotParam, ModelSpec, Parameters};
use crate::parallel::{stream_rng, tag};
use crate::quadrature::gauss_hermite_rule;

use super::simulate::simulate_from;

/// Finite-difference step per coordinate.
pub const FD_STEP: f64 = 1e-4;

/// Per-observation information blocks at a truth. Knot coordinates are
/// `(mu_j, sigma_jj)`; `i12` has one row per pair and columns
/// `mu_1, sigma_11, mu_2, sigma_22, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherDiagnostic {
    pub n: usize,
    pub mc_draws: usize,
    pub i_tilde: Vec<[[f64; 2]; 2]>,
    pub i11: Vec<f64>,
    pub i12: Vec<Vec<f64>>,
    /// `sqrt(diag(I_tilde_j^{-1}) / n)` per knot.
    pub predicted_knot_sd: Vec<[f64; 2]>,
    pub observed_knot_sd: Option<Vec<[f64; 2]>>,
    /// Monte Carlo mean and standard error of the knot score at the truth.
    pub knot_score_mean: Vec<[f64; 2]>,
    pub knot_score_se: Vec<[f64; 2]>,
}

/// Central-difference Hessian of `f` at `x`.
pub fn fd_hessian<const D: usize>(f: impl Fn([f64; D]) -> f64, x: [f64; D], h: f64) -> [[f64; D]; D] {
    let at = |moves: &[(usize, f64)]| {
        let mut y = x;
        for &(i, d) in moves {
            y[i] += d;
        }
        f(y)
    };
    let f0 = f(x);
    let mut out = [[0.0; D]; D];
    for i in 0..D {
        out[i][i] = (at(&[(i, h)]) - 2.0 * f0 + at(&[(i, -h)])) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)]) + at(&[(i, -h), (j, -h)]))
                / (4.0 * h * h);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient<const D: usize>(f: impl Fn([f64; D]) -> f64, x: [f64; D], h: f64) -> [f64; D] {
    std::array::from_fn(|i| {
        let (mut up, mut down) = (x, x);
        up[i] += h;
        down[i] -= h;
        (f(up) - f(down)) / (2.0 * h)
    })
}

/// Estimates the information blocks from `mc_draws` simulated observations at
/// `truth`, and predicts knot posterior sds for a sample of size `n`.
pub fn fisher_diagnostic(spec: &ModelSpec, truth: &Parameters, n: usize, mc_draws: usize, seed: u64) -> Result<FisherDiagnostic> {
    let p = spec.p();
    if truth.p() != p || mc_draws == 0 || n == 0 {
        return Err(MosaicError::InvalidInput("fisher diagnostic needs matching p and positive sizes".into()));
    }
    let mut rng = stream_rng(seed, tag::FISHER, 0);
    let (data, _) = simulate_from(truth, spec, mc_draws, &mut rng)?;
    let data = compress(&data)?;
    let knot_rule = gauss_hermite_rule(KNOT_ORDER)?;
    let tile_rule = gauss_hermite_rule(TILE_ORDER)?;
    let (knots, tiles) = split_parameters(truth);
    let scale = 1.0 / mc_draws as f64;

    let mut i_tilde = Vec::with_capacity(p);
    let mut predicted_knot_sd = Vec::with_capacity(p);
    let mut knot_score_mean = Vec::with_capacity(p);
    let mut knot_score_se = Vec::with_capacity(p);
    for j in 0..p {
        let link = spec.link(j);
        let q = |x: [f64; 2]| knot_loglik(link, KnotParam::new(x[0], x[1]), &data.uni[j], &knot_rule).value();
        let h = fd_hessian(q, [knots[j].mu, knots[j].sigma], FD_STEP);
        let block = [[-h[0][0] * scale, -h[0][1] * scale], [-h[1][0] * scale, -h[1][1] * scale]];
        let det = block[0][0] * block[1][1] - block[0][1] * block[1][0];
        if !(block[0][0] > 0.0 && det > 0.0) {
            return Err(MosaicError::NonPositiveBlock { block: format!("knot {}", j + 1) });
        }
        i_tilde.push(block);
        predicted_knot_sd.push([(block[1][1] / det / n as f64).sqrt(), (block[0][0] / det / n as f64).sqrt()]);

        let (mut mean, mut sq) = ([0.0; 2], [0.0; 2]);
        let grads: Vec<([f64; 2], f64)> = data.uni[j]
            .iter()
            .map(|(&y, &c)| {
                let g = fd_gradient(
                    |x: [f64; 2]| knot_log_density(link, y, KnotParam::new(x[0], x[1]), &knot_rule),
                    [knots[j].mu, knots[j].sigma],
                    FD_STEP,
                );
                (g, c as f64)
            })
            .collect();
        for (g, c) in &grads {
            for a in 0..2 {
                mean[a] += c * g[a] * scale;
            }
        }
        for (g, c) in &grads {
            for a in 0..2 {
                sq[a] += c * (g[a] - mean[a]).powi(2) * scale;
            }
        }
        knot_score_mean.push(mean);
        knot_score_se.push([(sq[0] * scale).sqrt(), (sq[1] * scale).sqrt()]);
    }

    let mut i11 = Vec::with_capacity(tiles.len());
    let mut i12 = Vec::with_capacity(tiles.len());
    for (k, (s, t)) in pairs(p).enumerate() {
        let cells = PairCells::new(data.pair(s, t));
        let links = (spec.link(s), spec.link(t));
        // L_st as a function of sigma_st and the full knot vector.
        let tile_at = |sigma_st: f64, all: &[KnotParam]| {
            tile_loglik_cells(links, sigma_st, all[s], all[t], &cells, &tile_rule).value()
        };
        let sigma_st = tiles[k].sigma;
        let d2 = (tile_at(sigma_st + FD_STEP, &knots) - 2.0 * tile_at(sigma_st, &knots)
            + tile_at(sigma_st - FD_STEP, &knots))
            / (FD_STEP * FD_STEP);
        let info = -d2 * scale;
        if !(info > 0.0) {
            return Err(MosaicError::NonPositiveBlock { block: format!("tile ({}, {})", s + 1, t + 1) });
        }
        i11.push(info);
        let mut row = vec![0.0; 2 * p];
        for j in 0..p {
            for coord in 0..2 {
                let shifted = |d: f64| {
                    let mut all = knots.clone();
                    if coord == 0 {
                        all[j].mu += d;
                    } else {
                        all[j].sigma += d;
                    }
                    all
                };
                let (up, down) = (shifted(FD_STEP), shifted(-FD_STEP));
                let cross = (tile_at(sigma_st + FD_STEP, &up) - tile_at(sigma_st + FD_STEP, &down)
                    - tile_at(sigma_st - FD_STEP, &up)
                    + tile_at(sigma_st - FD_STEP, &down))
                    / (4.0 * FD_STEP * FD_STEP);
                row[2 * j + coord] = -cross * scale;
            }
        }
        i12.push(row);
    }

    Ok(FisherDiagnostic {
        n,
        mc_draws,
        i_tilde,
        i11,
        i12,
        predicted_knot_sd,
        observed_knot_sd: None,
        knot_score_mean,
        knot_score_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinkFamily, SymMatrix};

    fn truth() -> Parameters {
        Parameters::new(
            vec![4.5, 4.2, 4.8],
            SymMatrix::from_rows(&[vec![1.2, 0.5, 0.2], vec![0.5, 1.3, -0.3], vec![0.2, -0.3, 1.1]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn blocks_pd_and_cross_terms_sparse() {
        let spec = ModelSpec::uniform(LinkFamily::RoundedGaussian, 3).unwrap();
        let d = fisher_diagnostic(&spec, &truth(), 10_000, 100_000, 1).unwrap();
        for b in &d.i_tilde {
            assert!(b[0][0] > 0.0 && b[0][0] * b[1][1] - b[0][1] * b[1][0] > 0.0);
            assert_eq!(b[0][1], b[1][0]);
        }
        assert!(d.i11.iter().all(|&v| v > 0.0));
        for (row, (s, t)) in d.i12.iter().zip(pairs(3)) {
            for j in 0..3 {
                let nonzero = row[2 * j] != 0.0 || row[2 * j + 1] != 0.0;
                assert_eq!(nonzero, j == s || j == t, "pair ({s},{t}) knot {j}");
            }
        }
        // Continuous Gaussian information for mu is 1 / sigma; rounding loses a little.
        for (j, b) in d.i_tilde.iter().enumerate() {
            let full = 1.0 / truth().sigma.get(j, j);
            assert!(b[0][0] < full && b[0][0] > 0.8 * full);
        }
    }

    #[test]
    fn score_has_mean_zero_at_truth() {
        let spec = ModelSpec::uniform(LinkFamily::PoissonLogNormal, 2).unwrap();
        let t = Parameters::new(
            vec![-3.4, -3.7],
            SymMatrix::from_rows(&[vec![0.8, 0.3], vec![0.3, 0.6]]).unwrap(),
        )
        .unwrap();
        let d = fisher_diagnostic(&spec, &t, 10_000, 200_000, 2).unwrap();
        for (m, se) in d.knot_score_mean.iter().zip(&d.knot_score_se) {
            for a in 0..2 {
                assert!(m[a].abs() < 3.0 * se[a], "{m:?} vs {se:?}");
            }
        }
    }

    #[test]
    fn hessian_agrees_with_gradient_differences() {
        let link = LinkFamily::RoundedGaussian;
        let rule = gauss_hermite_rule(KNOT_ORDER).unwrap();
        let hist = [(0, 3), (1, 10), (2, 25), (3, 12), (4, 4)].into_iter().collect();
        let f = |x: [f64; 2]| knot_loglik(link, KnotParam::new(x[0], x[1]), &hist, &rule).value();
        let x = [2.1, 1.1];
        let h = fd_hessian(f, x, FD_STEP);
        let dg = 1e-3;
        for i in 0..2 {
            let (mut up, mut down) = (x, x);
            up[i] += dg;
            down[i] -= dg;
            let (gu, gd) = (fd_gradient(f, up, FD_STEP), fd_gradient(f, down, FD_STEP));
            for j in 0..2 {
                let via_grad = (gu[j] - gd[j]) / (2.0 * dg);
                assert!((via_grad - h[j][i]).abs() <= 1e-4 * h[j][i].abs(), "{i}{j}: {via_grad} vs {}", h[j][i]);
            }
        }
    }
}
