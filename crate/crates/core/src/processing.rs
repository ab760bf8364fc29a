//! Processing of stored records: one configuration for single estimates
//! and bearing-time records.

use serde::{Deserialize, Serialize};

use crate::array::{AngleConvention, ArrayGeometry};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::frontend::{band_transform, bin_covariances, select_bins, BinCovariance, FrequencyBinSet};
use crate::fusion::{btr, BearingTimeRecord, BtrConfig};
use crate::io::config_hash;
use crate::montecarlo::ArraySpec;
use crate::pipeline::{estimate, narrowband_bins, Estimate, EstimatorSettings};
use crate::sim::SnapshotMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessingConfig {
    pub array: ArraySpec,
    #[serde(default)]
    pub convention: AngleConvention,
    /// Number of sources to report.
    pub sources: usize,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    /// Analysis frequency of narrowband records.
    #[serde(default)]
    pub frequency_hz: Option<f64>,
    /// Bin front end for time records; the frame fields only matter for
    /// bearing-time processing.
    #[serde(default)]
    pub frontend: BtrConfig,
    #[serde(default)]
    pub settings: EstimatorSettings,
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::QspiceGnr2
}

impl ProcessingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sources == 0 {
            return Err(Error::Config("sources must be at least 1".into()));
        }
        self.settings.validate()?;
        self.array.geometry(self.array.elements)?;
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    fn geometry_for(&self, record: &SnapshotMatrix) -> Result<ArrayGeometry> {
        if record.channels() != self.array.elements {
            return Err(Error::invalid(format!(
                "record has {} channels but the array has {} elements",
                record.channels(),
                self.array.elements
            )));
        }
        self.array.geometry(self.array.elements)
    }

    /// Per-bin covariances of a whole record.
    pub fn bins(&self, record: &SnapshotMatrix) -> Result<Vec<BinCovariance>> {
        match record.sample_rate() {
            None => {
                let f = self
                    .frequency_hz
                    .ok_or_else(|| Error::Config("narrowband records need frequency_hz".into()))?;
                narrowband_bins(record, f)
            }
            Some(fs) => {
                let fe = &self.frontend;
                let set = FrequencyBinSet::from_band(fe.fft_len, fs, fe.band_hz.0, fe.band_hz.1, fe.bin_spacing_hz)?;
                let snaps = band_transform(record, fe.fft_len, fe.fft_hop, &set, fe.window)?;
                let mut covs = bin_covariances(&snaps)?;
                if let Some(count) = fe.select {
                    let all: Vec<_> = covs.iter().map(|c| c.cov.clone()).collect();
                    let keep = select_bins(&all, &set, self.sources, count)?.frequencies();
                    covs.retain(|c| keep.contains(&c.frequency_hz));
                }
                Ok(covs)
            }
        }
    }

    /// Estimates the directions in a whole record.
    pub fn estimate(&self, record: &SnapshotMatrix) -> Result<Estimate> {
        let geom = self.geometry_for(record)?;
        let bins = self.bins(record)?;
        estimate(self.estimator, &bins, &geom, self.convention, self.sources, &self.settings)
    }

    /// Bearing-time record of a time-domain record.
    pub fn btr(&self, record: &SnapshotMatrix) -> Result<BearingTimeRecord> {
        let geom = self.geometry_for(record)?;
        btr(record, &geom, self.convention, self.estimator, self.sources, &self.frontend, &self.settings)
    }
}
