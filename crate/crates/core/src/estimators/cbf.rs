use num_complex::Complex64;

use super::{EstimatorKind, SpatialSpectrum};
use crate::array::SteeringDictionary;
use crate::error::{Error, Result};
use crate::frontend::CovarianceEstimate;

/// Quadratic form `a^H R a` for a dense Hermitian `R` stored column-major.
pub(crate) fn quad_form(r: &[Complex64], m: usize, a: &[Complex64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..m {
        let col = &r[j * m..(j + 1) * m];
        let s: Complex64 = col.iter().zip(a).map(|(x, y)| y.conj() * x).sum();
        acc += (s * a[j]).re;
    }
    acc
}

/// Normalised delay-and-sum power `a^H R a / M^2`.
pub fn cbf_spectrum(cov: &CovarianceEstimate, dict: &SteeringDictionary) -> Result<SpatialSpectrum> {
    let m = dict.element_count();
    if cov.dim() != m {
        return Err(Error::invalid(format!(
            "covariance is {0}x{0} but dictionary has {m} elements",
            cov.dim()
        )));
    }
    let r = cov.matrix().as_slice();
    let norm = (m * m) as f64;
    let power: Vec<f64> = (0..dict.len())
        .map(|g| (quad_form(r, m, dict.column(g)) / norm).max(0.0))
        .collect();
    let top = power.iter().copied().fold(0.0, f64::max);
    SpatialSpectrum::new(
        dict.angles().to_vec(),
        power,
        EstimatorKind::Cbf,
        Some(dict.frequency_hz()),
        top * 1e-30,
    )
}
