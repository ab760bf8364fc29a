//! Far-field source signals.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::filter::BandPass;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    #[default]
    Tonal,
    PropellerBroadband,
}

/// Continuous band plus harmonic line series of a propeller-like radiator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropellerSpec {
    /// Continuum band `[lo, hi]` in Hz.
    pub band_hz: (f64, f64),
    /// Harmonic base frequency of each source's line series; 0 disables lines.
    #[serde(default)]
    pub line_base_hz: Vec<f64>,
    /// Line level in dB above the continuum power density (per Hz).
    #[serde(default = "default_line_level")]
    pub line_level_db: f64,
}

fn default_line_level() -> f64 {
    10.0
}

impl Default for PropellerSpec {
    fn default() -> Self {
        Self {
            band_hz: (100.0, 1000.0),
            line_base_hz: Vec::new(),
            line_level_db: default_line_level(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(default)]
    pub kind: SourceKind,
    pub angles_deg: Vec<f64>,
    /// Linear power of each source; a single entry applies to all.
    pub powers: Vec<f64>,
    /// Tone frequency of each source for time-domain tonal synthesis.
    #[serde(default)]
    pub tonal_hz: Vec<f64>,
    #[serde(default)]
    pub propeller: PropellerSpec,
}

/// One spectral line: frequency (Hz) and level (dB re continuum density).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub frequency_hz: f64,
    pub level_db: f64,
}

impl SourceSpec {
    pub fn tonal(angles_deg: Vec<f64>, power: f64) -> Self {
        Self {
            kind: SourceKind::Tonal,
            angles_deg,
            powers: vec![power],
            tonal_hz: Vec::new(),
            propeller: PropellerSpec::default(),
        }
    }

    pub fn count(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn power(&self, k: usize) -> f64 {
        if self.powers.len() == 1 {
            self.powers[0]
        } else {
            self.powers[k]
        }
    }

    pub fn mean_power(&self) -> f64 {
        (0..self.count()).map(|k| self.power(k)).sum::<f64>() / self.count() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles_deg.is_empty() {
            return Err(Error::invalid("at least one source is required"));
        }
        crate::error::ensure_finite(&self.angles_deg, "source angles")?;
        if self.powers.len() != 1 && self.powers.len() != self.count() {
            return Err(Error::invalid("powers must have one entry or one per source"));
        }
        if self.powers.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::invalid("source powers must be positive"));
        }
        if self.kind == SourceKind::PropellerBroadband {
            let (lo, hi) = self.propeller.band_hz;
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
                return Err(Error::invalid(format!("invalid band [{lo}, {hi}]")));
            }
            let lines = &self.propeller.line_base_hz;
            if !lines.is_empty() && lines.len() != self.count() {
                return Err(Error::invalid("line_base_hz needs one entry per source"));
            }
        }
        Ok(())
    }

    /// Harmonic lines of source `k` inside the continuum band.
    pub fn lines(&self, k: usize) -> Vec<Line> {
        let Some(&base) = self.propeller.line_base_hz.get(k) else {
            return Vec::new();
        };
        if base <= 0.0 {
            return Vec::new();
        }
        let (lo, hi) = self.propeller.band_hz;
        (1..)
            .map(|h| h as f64 * base)
            .take_while(|&f| f <= hi)
            .filter(|&f| f >= lo)
            .map(|f| Line {
                frequency_hz: f,
                level_db: self.propeller.line_level_db,
            })
            .collect()
    }
}

/// Narrowband complex envelopes, one row per source.
///
/// Tonal sources are constant-modulus exponentials `sqrt(P) exp(j phi)` with
/// an independent uniform phase per snapshot; propeller sources collapse to
/// a circular Gaussian envelope of power `P` within one analysis bin. Rows
/// come from independent streams keyed by source index.
pub fn generate_sources(spec: &SourceSpec, n: usize, seed: u64) -> Result<DMatrix<Complex64>> {
    spec.validate()?;
    let k_count = spec.count();
    let mut out = DMatrix::zeros(k_count, n);
    for k in 0..k_count {
        let mut r = rng::stream(seed, &[rng::tag::SOURCES, k as u64]);
        let amp = spec.power(k).sqrt();
        for t in 0..n {
            out[(k, t)] = match spec.kind {
                SourceKind::Tonal => Complex64::from_polar(amp, 2.0 * PI * r.random::<f64>()),
                SourceKind::PropellerBroadband => {
                    let re: f64 = StandardNormal.sample(&mut r);
                    let im: f64 = StandardNormal.sample(&mut r);
                    Complex64::new(re, im) * (amp / 2f64.sqrt())
                }
            };
        }
    }
    Ok(out)
}

/// A real source waveform split into a stochastic continuum (delayed by
/// spectral phase ramp) and deterministic tones (delayed analytically).
#[derive(Debug, Clone)]
pub struct Waveform {
    pub sample_rate: f64,
    pub continuum: Option<Vec<f64>>,
    pub tones: Vec<Tone>,
}

#[derive(Debug, Clone, Copy)]
pub struct Tone {
    pub frequency_hz: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.continuum.as_ref().map_or(0, |c| c.len())
    }

    /// Samples of the waveform advanced by `advance` seconds. The continuum
    /// is shifted circularly through the DFT.
    pub fn render(&self, n: usize, advance: f64, fft: &mut crate::frontend::FftCache) -> Vec<f64> {
        let mut out = match &self.continuum {
            Some(c) if advance == 0.0 => c.clone(),
            Some(c) => fft.fractional_shift(c, advance * self.sample_rate),
            None => vec![0.0; n],
        };
        for tone in &self.tones {
            let w = 2.0 * PI * tone.frequency_hz;
            for (i, v) in out.iter_mut().enumerate() {
                let t = i as f64 / self.sample_rate + advance;
                *v += tone.amplitude * (w * t + tone.phase).cos();
            }
        }
        out
    }
}

/// Real time-domain waveforms of `n` samples at `sample_rate`.
///
/// Tonal: `sqrt(2P) cos(2 pi f t + phi)` with a random phase per draw.
/// Propeller: Gaussian noise band-passed to the continuum band (4th-order
/// Butterworth sections, zero phase) plus harmonic lines, normalised so the
/// total power is `P`.
pub fn generate_waveforms(
    spec: &SourceSpec,
    n: usize,
    sample_rate: f64,
    seed: u64,
) -> Result<Vec<Waveform>> {
    spec.validate()?;
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let nyquist = sample_rate / 2.0;
    let mut out = Vec::with_capacity(spec.count());
    for k in 0..spec.count() {
        let mut r = rng::stream(seed, &[rng::tag::SOURCES, k as u64]);
        let power = spec.power(k);
        match spec.kind {
            SourceKind::Tonal => {
                let f = *spec
                    .tonal_hz
                    .get(k)
                    .or(spec.tonal_hz.first())
                    .ok_or_else(|| Error::invalid("tonal sources need tonal_hz"))?;
                if !(f > 0.0 && f < nyquist) {
                    return Err(Error::invalid(format!("tone {f} Hz outside (0, Nyquist)")));
                }
                out.push(Waveform {
                    sample_rate,
                    continuum: None,
                    tones: vec![Tone {
                        frequency_hz: f,
                        amplitude: (2.0 * power).sqrt(),
                        phase: 2.0 * PI * r.random::<f64>(),
                    }],
                });
            }
            SourceKind::PropellerBroadband => {
                let (lo, hi) = spec.propeller.band_hz;
                if hi >= nyquist {
                    return Err(Error::invalid(format!(
                        "band edge {hi} Hz at or above Nyquist {nyquist} Hz"
                    )));
                }
                let pad = ((4.0 * sample_rate / lo).ceil() as usize).max(64);
                let mut x: Vec<f64> = (0..n + 2 * pad)
                    .map(|_| StandardNormal.sample(&mut r))
                    .collect();
                BandPass::new(lo, hi, sample_rate).filtfilt(&mut x);
                let mut continuum = x[pad..pad + n].to_vec();
                let cont_power = continuum.iter().map(|v| v * v).sum::<f64>() / n as f64;

                let density = 1.0 / (hi - lo);
                let lines = spec.lines(k);
                let line_powers: Vec<f64> = lines
                    .iter()
                    .map(|l| density * 10f64.powf(l.level_db / 10.0))
                    .collect();
                // continuum normalised to unit power; lines relative to it
                let total = 1.0 + line_powers.iter().sum::<f64>();
                let scale = (power / total).sqrt();
                let c = scale / cont_power.sqrt();
                continuum.iter_mut().for_each(|v| *v *= c);
                let tones = lines
                    .iter()
                    .zip(&line_powers)
                    .map(|(l, p)| Tone {
                        frequency_hz: l.frequency_hz,
                        amplitude: scale * (2.0 * p).sqrt(),
                        phase: 2.0 * PI * r.random::<f64>(),
                    })
                    .collect();
                out.push(Waveform {
                    sample_rate,
                    continuum: Some(continuum),
                    tones,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tonal_row_power_and_decorrelation() {
        let spec = SourceSpec::tonal(vec![0.0, 10.0], 1.0);
        let s = generate_sources(&spec, 10_000, 4).unwrap();
        for k in 0..2 {
            let p = s.row(k).iter().map(|x| x.norm_sqr()).sum::<f64>() / 1e4;
            assert!((p - 1.0).abs() < 0.02);
        }
        let cross: Complex64 = (0..10_000).map(|t| s[(0, t)] * s[(1, t)].conj()).sum();
        let rho = cross.norm() / 1e4;
        assert!(rho < 0.05, "{rho}");
    }

    #[test]
    fn propeller_envelope_power() {
        let mut spec = SourceSpec::tonal(vec![5.0], 2.0);
        spec.kind = SourceKind::PropellerBroadband;
        let s = generate_sources(&spec, 10_000, 8).unwrap();
        let p = s.row(0).iter().map(|x| x.norm_sqr()).sum::<f64>() / 1e4;
        assert!((p / 2.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn propeller_waveform_power_and_lines() {
        let spec = SourceSpec {
            kind: SourceKind::PropellerBroadband,
            angles_deg: vec![0.0],
            powers: vec![3.0],
            tonal_hz: vec![],
            propeller: PropellerSpec {
                band_hz: (100.0, 1000.0),
                line_base_hz: vec![110.0],
                line_level_db: 10.0,
            },
        };
        assert_eq!(spec.lines(0).len(), 9);
        let w = generate_waveforms(&spec, 20_000, 5120.0, 1).unwrap();
        let mut cache = crate::frontend::FftCache::default();
        let x = w[0].render(20_000, 0.0, &mut cache);
        let p = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((p / 3.0 - 1.0).abs() < 0.05, "{p}");
    }

    #[test]
    fn band_above_nyquist_rejected() {
        let mut spec = SourceSpec::tonal(vec![0.0], 1.0);
        spec.kind = SourceKind::PropellerBroadband;
        spec.propeller.band_hz = (100.0, 3000.0);
        assert!(generate_waveforms(&spec, 100, 5120.0, 0).is_err());
        let mut tonal = SourceSpec::tonal(vec![0.0], 1.0);
        tonal.tonal_hz = vec![4000.0];
        assert!(generate_waveforms(&tonal, 100, 5120.0, 0).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(SourceSpec::tonal(vec![], 1.0).validate().is_err());
        assert!(SourceSpec::tonal(vec![1.0], -1.0).validate().is_err());
        let mut s = SourceSpec::tonal(vec![1.0, 2.0], 1.0);
        s.powers = vec![1.0, 2.0, 3.0];
        assert!(s.validate().is_err());
    }
}
