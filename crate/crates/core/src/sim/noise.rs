//! Additive noise models and the SNR conventions that calibrate them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::stable::StableParams;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Spatially white Gaussian noise with common variance.
    UniformGaussian { variance: f64 },
    /// Independent Gaussian noise with one variance per sensor.
    NonuniformGaussian { variances: Vec<f64> },
    /// Symmetric-alpha-stable impulsive noise, independent per entry.
    ImpulsiveSas(StableParams),
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::UniformGaussian { variance } => {
                if !(variance.is_finite() && *variance > 0.0) {
                    return Err(Error::invalid("noise variance must be positive"));
                }
            }
            NoiseModel::NonuniformGaussian { variances } => {
                if variances.is_empty() || variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::invalid("noise variances must be positive"));
                }
            }
            NoiseModel::ImpulsiveSas(p) => p.validate()?,
        }
        Ok(())
    }

    /// Per-sensor variances for the Gaussian kinds.
    pub fn variances(&self, m: usize) -> Result<Vec<f64>> {
        match self {
            NoiseModel::UniformGaussian { variance } => Ok(vec![*variance; m]),
            NoiseModel::NonuniformGaussian { variances } => {
                if variances.len() != m {
                    return Err(Error::invalid(format!(
                        "variance vector has {} entries for {m} sensors",
                        variances.len()
                    )));
                }
                Ok(variances.clone())
            }
            NoiseModel::ImpulsiveSas(_) => Err(Error::Unsupported(
                "alpha-stable noise has no finite variance".into(),
            )),
        }
    }

    /// Same model with every variance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> NoiseModel {
        match self {
            NoiseModel::UniformGaussian { variance } => NoiseModel::UniformGaussian {
                variance: variance * factor,
            },
            NoiseModel::NonuniformGaussian { variances } => NoiseModel::NonuniformGaussian {
                variances: variances.iter().map(|v| v * factor).collect(),
            },
            NoiseModel::ImpulsiveSas(p) => NoiseModel::ImpulsiveSas(*p),
        }
    }

    pub fn is_impulsive(&self) -> bool {
        matches!(self, NoiseModel::ImpulsiveSas(_))
    }
}

/// Draws `0.5 + 25 * U(0, 1)`-style per-sensor variances: `floor + span * U`.
pub fn random_variances(m: usize, floor: f64, span: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, &[rng::tag::NOISE_PROFILE]);
    (0..m).map(|_| floor + span * r.random::<f64>()).collect()
}

/// SNR in dB of a source of power `signal_power` against a Gaussian model.
///
/// Uniform noise uses `P / sigma^2`; non-uniform noise uses
/// `(P / M) * sum(1 / sigma_m^2)`, which reduces to the former when all
/// variances agree.
pub fn measure_snr(signal_power: f64, model: &NoiseModel) -> Result<f64> {
    if !(signal_power.is_finite() && signal_power > 0.0) {
        return Err(Error::invalid("signal power must be positive"));
    }
    model.validate()?;
    match model {
        NoiseModel::UniformGaussian { variance } => Ok(10.0 * (signal_power / variance).log10()),
        NoiseModel::NonuniformGaussian { variances } => {
            let m = variances.len() as f64;
            let inv: f64 = variances.iter().map(|v| 1.0 / v).sum();
            Ok(10.0 * (signal_power / m * inv).log10())
        }
        NoiseModel::ImpulsiveSas(_) => Err(Error::Unsupported(
            "SNR is undefined for alpha-stable noise; use the dispersion convention".into(),
        )),
    }
}

/// Variance multiplier that brings `model` to `target_db` for `signal_power`.
pub fn snr_noise_scale(signal_power: f64, model: &NoiseModel, target_db: f64) -> Result<f64> {
    if !target_db.is_finite() {
        return Err(Error::invalid("target SNR must be finite"));
    }
    let current = measure_snr(signal_power, model)?;
    Ok(10f64.powf((current - target_db) / 10.0))
}

/// Complex `m x n` noise. Gaussian kinds are circularly symmetric with the
/// per-row variance of the model; the impulsive kind draws real and
/// imaginary parts independently from the stable law.
pub fn generate_noise(model: &NoiseModel, m: usize, n: usize, seed: u64) -> Result<DMatrix<Complex64>> {
    model.validate()?;
    let mut r = rng::stream(seed, &[rng::tag::NOISE]);
    match model {
        NoiseModel::ImpulsiveSas(p) => {
            let mut out = DMatrix::zeros(m, n);
            for j in 0..n {
                for i in 0..m {
                    out[(i, j)] = Complex64::new(p.draw(&mut r), p.draw(&mut r));
                }
            }
            Ok(out)
        }
        _ => {
            let scales: Vec<f64> = model
                .variances(m)?
                .iter()
                .map(|v| (v / 2.0).sqrt())
                .collect();
            let mut out = DMatrix::zeros(m, n);
            for j in 0..n {
                for (i, s) in scales.iter().enumerate() {
                    let re: f64 = StandardNormal.sample(&mut r);
                    let im: f64 = StandardNormal.sample(&mut r);
                    out[(i, j)] = Complex64::new(s * re, s * im);
                }
            }
            Ok(out)
        }
    }
}

/// Real-valued `m x n` noise for time-domain records.
pub fn generate_noise_real(model: &NoiseModel, m: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    model.validate()?;
    let mut r = rng::stream(seed, &[rng::tag::NOISE]);
    match model {
        NoiseModel::ImpulsiveSas(p) => Ok(DMatrix::from_fn(m, n, |_, _| p.draw(&mut r))),
        _ => {
            let scales: Vec<f64> = model.variances(m)?.iter().map(|v| v.sqrt()).collect();
            let mut out = DMatrix::zeros(m, n);
            for j in 0..n {
                for (i, s) in scales.iter().enumerate() {
                    let x: f64 = StandardNormal.sample(&mut r);
                    out[(i, j)] = s * x;
                }
            }
            Ok(out)
        }
    }
}
