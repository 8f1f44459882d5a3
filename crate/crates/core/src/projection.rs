//! Projection of covariance draws onto the positive-semidefinite cone.

use nalgebra::DMatrix;

use crate::error::{MosaicError, Result};
use crate::model::SymMatrix;
use crate::parallel::parallel_map;
use crate::sampler::MosaicSamples;

/// Spectral decomposition with eigenvalues in descending order; column `i`
/// of `vectors` belongs to `values[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Eigendecomposition of an exactly symmetric matrix.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<EigenDecomposition> {
    SymMatrix::from_dmatrix(a)?;
    let eig = a
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| MosaicError::InvalidInput("eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenDecomposition { values, vectors })
}

/// `V diag(max(lambda, eps)) V^T`; with `eps = 0` the Frobenius-nearest PSD matrix.
pub fn project_psd(a: &SymMatrix, eps: f64) -> SymMatrix {
    let eig = symmetric_eigen(&a.to_dmatrix()).expect("SymMatrix is symmetric by storage");
    let v = &eig.vectors;
    SymMatrix::from_fn(a.dim(), |i, j| {
        eig.values
            .iter()
            .enumerate()
            .map(|(k, &l)| v[(i, k)] * l.max(eps) * v[(j, k)])
            .sum()
    })
}

/// Default eigenvalue floor: `1e-8` times the largest diagonal entry.
pub fn default_eps(a: &SymMatrix) -> f64 {
    1e-8 * a.max_diagonal().max(0.0)
}

fn min_eigenvalue(a: &SymMatrix) -> f64 {
    symmetric_eigen(&a.to_dmatrix())
        .map(|e| e.values.last().copied().unwrap_or(f64::INFINITY))
        .unwrap_or(f64::NEG_INFINITY)
}

/// Fills `corrected_sigma`, leaving draws whose spectrum already clears the
/// floor untouched, and returns the fraction of such draws. `eps = None` uses
/// [`default_eps`] per draw.
pub fn correct_samples(samples: &mut MosaicSamples, eps: Option<f64>, workers: usize) -> f64 {
    let results = parallel_map(workers, samples.len(), |m| {
        let sigma = samples.draw(m).sigma;
        let floor = eps.unwrap_or_else(|| default_eps(&sigma));
        if min_eigenvalue(&sigma) >= floor {
            (sigma, true)
        } else {
            (project_psd(&sigma, floor), false)
        }
    });
    let kept = results.iter().filter(|r| r.1).count();
    let fraction = if results.is_empty() { 1.0 } else { kept as f64 / results.len() as f64 };
    samples.corrected_sigma = Some(results.into_iter().map(|r| r.0).collect());
    samples.diagnostics.already_pd_fraction = Some(fraction);
    fraction
}
