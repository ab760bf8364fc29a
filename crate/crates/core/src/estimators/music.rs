use num_complex::Complex64;

use super::{EstimatorKind, SpatialSpectrum};
use crate::array::SteeringDictionary;
use crate::error::{Error, Result};
use crate::frontend::CovarianceEstimate;
use crate::linalg;

/// Relative eigenvalue tolerance below which eigenvalues count as tied.
const TIE_TOL: f64 = 1e-10;

/// Noise-subspace eigenvectors: the `M - K` smallest, extended by any
/// signal-side eigenvector tied with the largest noise eigenvalue (a
/// degenerate split has no preferred subspace).
pub fn noise_subspace(cov: &CovarianceEstimate, k: usize) -> Result<Vec<Vec<Complex64>>> {
    let m = cov.dim();
    if k == 0 || k >= m {
        return Err(Error::invalid(format!("MUSIC needs 1 <= K < M, got K = {k}, M = {m}")));
    }
    let eig = linalg::hermitian_eigen(cov.matrix());
    let top = eig.values[0].abs().max(f64::MIN_POSITIVE);
    let boundary = eig.values[k];
    let mut first = k;
    while first > 0 && eig.values[first - 1] - boundary <= TIE_TOL * top {
        first -= 1;
    }
    Ok((first..m)
        .map(|c| eig.vectors.column(c).iter().copied().collect())
        .collect())
}

/// `a^H E_n E_n^H a` for every dictionary column.
pub fn noise_projection(cov: &CovarianceEstimate, dict: &SteeringDictionary, k: usize) -> Result<Vec<f64>> {
    if cov.dim() != dict.element_count() {
        return Err(Error::invalid("covariance and dictionary sizes differ"));
    }
    let en = noise_subspace(cov, k)?;
    Ok((0..dict.len())
        .map(|g| {
            let a = dict.column(g);
            en.iter()
                .map(|e| {
                    e.iter()
                        .zip(a)
                        .map(|(x, y)| x.conj() * y)
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum()
        })
        .collect())
}

/// MUSIC pseudospectrum `1 / (a^H E_n E_n^H a)`.
pub fn music_spectrum(cov: &CovarianceEstimate, dict: &SteeringDictionary, k: usize) -> Result<SpatialSpectrum> {
    let proj = noise_projection(cov, dict, k)?;
    let power: Vec<f64> = proj.iter().map(|&d| 1.0 / d.max(1e-300)).collect();
    let top = power.iter().copied().fold(0.0, f64::max);
    SpatialSpectrum::new(
        dict.angles().to_vec(),
        power,
        EstimatorKind::Music,
        Some(dict.frequency_hz()),
        top * 1e-30,
    )
}
