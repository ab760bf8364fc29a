use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Which estimator produced a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Cbf,
    Music,
    Spice,
    Qspice,
    QspiceGnr2,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Cbf,
        EstimatorKind::Music,
        EstimatorKind::Spice,
        EstimatorKind::Qspice,
        EstimatorKind::QspiceGnr2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Cbf => "cbf",
            EstimatorKind::Music => "music",
            EstimatorKind::Spice => "spice",
            EstimatorKind::Qspice => "qspice",
            EstimatorKind::QspiceGnr2 => "qspice-gnr2",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator '{s}'")))
    }
}

/// Power over an ascending angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpectrum {
    pub angles: Vec<f64>,
    pub power: Vec<f64>,
    pub estimator: EstimatorKind,
    pub frequency_hz: Option<f64>,
    /// Smallest power represented in the dB view.
    pub floor: f64,
}

impl SpatialSpectrum {
    pub fn new(
        angles: Vec<f64>,
        power: Vec<f64>,
        estimator: EstimatorKind,
        frequency_hz: Option<f64>,
        floor: f64,
    ) -> Result<Self> {
        if angles.len() != power.len() || angles.is_empty() {
            return Err(Error::invalid("spectrum needs one power per angle"));
        }
        if power.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("spectrum has non-finite power"));
        }
        Ok(Self {
            angles,
            power,
            estimator,
            frequency_hz,
            floor: floor.max(f64::MIN_POSITIVE),
        })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn db(&self) -> Vec<f64> {
        self.power
            .iter()
            .map(|&p| 10.0 * p.max(self.floor).log10())
            .collect()
    }

    pub fn max_power(&self) -> f64 {
        self.power.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Angle of the largest power (lowest angle on ties).
    pub fn argmax(&self) -> f64 {
        let mut best = 0;
        for (i, &p) in self.power.iter().enumerate() {
            if p > self.power[best] {
                best = i;
            }
        }
        self.angles[best]
    }
}
