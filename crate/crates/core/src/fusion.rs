//! Incoherent broadband fusion of per-bin spectra and bearing-time records.

use serde::{Deserialize, Serialize};

use crate::array::{AngleConvention, ArrayGeometry};
use crate::error::{Error, Result};
use crate::estimators::SpatialSpectrum;
use crate::frontend::{band_transform, bin_covariances, select_bins, FrequencyBinSet, Window};
use crate::pipeline::{estimate, EstimatorSettings};
use crate::estimators::EstimatorKind;
use crate::sim::SnapshotMatrix;

/// Weighted mean of per-bin spectra, each first scaled to unit maximum.
/// Uniform weights when `weights` is `None`.
pub fn fuse_spectra(spectra: &[SpatialSpectrum], weights: Option<&[f64]>) -> Result<SpatialSpectrum> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::invalid("no spectra to fuse"))?;
    if spectra.iter().any(|s| s.angles != first.angles) {
        return Err(Error::invalid("spectra are on different angle grids"));
    }
    let uniform = vec![1.0; spectra.len()];
    let weights = weights.unwrap_or(&uniform);
    if weights.len() != spectra.len() {
        return Err(Error::invalid("one weight per spectrum is required"));
    }
    if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("weights sum to zero"));
    }
    let mut acc = vec![0.0; first.len()];
    for (s, &w) in spectra.iter().zip(weights) {
        let top = s.max_power();
        if top <= 0.0 || w == 0.0 {
            continue;
        }
        let scale = w / (top * total);
        for (a, &p) in acc.iter_mut().zip(&s.power) {
            *a += p * scale;
        }
    }
    let frequency = if spectra.len() == 1 { first.frequency_hz } else { None };
    let floor = spectra
        .iter()
        .map(|s| if s.max_power() > 0.0 { s.floor / s.max_power() } else { 1.0 })
        .fold(1.0, f64::min);
    SpatialSpectrum::new(first.angles.clone(), acc, first.estimator, frequency, floor)
}

/// Stacked broadband spectra over analysis frames.
#[derive(Debug, Clone, PartialEq)]
pub struct BearingTimeRecord {
    /// Frame centre times in seconds.
    pub times: Vec<f64>,
    pub angles: Vec<f64>,
    /// One row per frame, dB.
    pub power_db: Vec<Vec<f64>>,
    pub estimator: EstimatorKind,
}

impl BearingTimeRecord {
    /// Angle of the strongest cell in every frame.
    pub fn ridge(&self) -> Vec<f64> {
        self.power_db
            .iter()
            .map(|row| {
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                self.angles[best]
            })
            .collect()
    }
}

/// Framing and bin choices for bearing-time processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BtrConfig {
    /// Analysis frame length in seconds.
    pub frame_seconds: f64,
    /// Fraction of a frame between consecutive frame starts.
    pub hop_fraction: f64,
    pub fft_len: usize,
    /// Hop between DFT frames inside one analysis frame, in samples.
    pub fft_hop: usize,
    pub band_hz: (f64, f64),
    pub bin_spacing_hz: f64,
    /// Keep only this many bins per frame, ranked by eigenvalue gap.
    pub select: Option<usize>,
    pub window: Window,
}

impl Default for BtrConfig {
    fn default() -> Self {
        Self {
            frame_seconds: 1.0,
            hop_fraction: 0.5,
            fft_len: 512,
            fft_hop: 256,
            band_hz: (50.0, 1050.0),
            bin_spacing_hz: 10.0,
            select: None,
            window: Window::Rectangular,
        }
    }
}

/// Runs the broadband pipeline on consecutive frames of a time record.
pub fn btr(
    record: &SnapshotMatrix,
    geometry: &ArrayGeometry,
    convention: AngleConvention,
    kind: EstimatorKind,
    k: usize,
    cfg: &BtrConfig,
    settings: &EstimatorSettings,
) -> Result<BearingTimeRecord> {
    let fs = record
        .sample_rate()
        .ok_or_else(|| Error::invalid("bearing-time processing needs a time-domain record"))?;
    let frame = (cfg.frame_seconds * fs).round() as usize;
    let hop = ((cfg.hop_fraction * frame as f64).round() as usize).max(1);
    if frame < cfg.fft_len {
        return Err(Error::invalid("analysis frame is shorter than the DFT length"));
    }
    let samples = record.samples();
    let frames = crate::frontend::frame_count(samples, frame, hop)?;
    let bins = FrequencyBinSet::from_band(cfg.fft_len, fs, cfg.band_hz.0, cfg.band_hz.1, cfg.bin_spacing_hz)?;
    let mut times = Vec::with_capacity(frames);
    let mut rows = Vec::with_capacity(frames);
    let mut angles = Vec::new();
    for f in 0..frames {
        let start = f * hop;
        let piece = record.time_slice(start, frame)?;
        let snaps = band_transform(&piece, cfg.fft_len, cfg.fft_hop, &bins, cfg.window)?;
        let mut covs = bin_covariances(&snaps)?;
        if let Some(count) = cfg.select {
            let all: Vec<_> = covs.iter().map(|b| b.cov.clone()).collect();
            let keep = select_bins(&all, &bins, k, count)?;
            covs.retain(|b| keep.frequencies().iter().any(|&fq| fq == b.frequency_hz));
        }
        let est = estimate(kind, &covs, geometry, convention, k, settings)?;
        if angles.is_empty() {
            angles = est.spectrum.angles.clone();
        }
        times.push((start as f64 + frame as f64 / 2.0) / fs);
        rows.push(fixed_grid_db(&est.spectrum, &angles));
    }
    Ok(BearingTimeRecord {
        times,
        angles,
        power_db: rows,
        estimator: kind,
    })
}

/// dB spectrum resampled onto `grid`: each grid cell takes the largest
/// power among spectrum angles nearest to it, so refined peaks are pooled
/// into the common display grid rather than interpolated away.
fn fixed_grid_db(spectrum: &SpatialSpectrum, grid: &[f64]) -> Vec<f64> {
    if spectrum.angles == grid {
        return spectrum.db();
    }
    let mut best = vec![f64::NEG_INFINITY; grid.len()];
    let db = spectrum.db();
    for (&a, &v) in spectrum.angles.iter().zip(&db) {
        let idx = match grid.binary_search_by(|g| g.total_cmp(&a)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i == grid.len() => i - 1,
            Err(i) => {
                if (a - grid[i - 1]) <= (grid[i] - a) {
                    i - 1
                } else {
                    i
                }
            }
        };
        best[idx] = best[idx].max(v);
    }
    let floor = 10.0 * spectrum.floor.log10();
    best.into_iter()
        .map(|v| if v.is_finite() { v } else { floor })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(power: Vec<f64>) -> SpatialSpectrum {
        let angles = (0..power.len()).map(|i| i as f64).collect();
        SpatialSpectrum::new(angles, power, EstimatorKind::Cbf, Some(100.0), 1e-12).unwrap()
    }

    #[test]
    fn single_bin_is_normalised_identity() {
        let s = spec(vec![1.0, 4.0, 2.0]);
        let f = fuse_spectra(&[s], None).unwrap();
        assert_eq!(f.power, vec![0.25, 1.0, 0.5]);
    }

    #[test]
    fn fusion_is_permutation_invariant_and_scale_free() {
        let a = spec(vec![1.0, 3.0, 2.0, 0.5]);
        let b = spec(vec![0.2, 0.1, 0.9, 0.4]);
        let b10 = spec(b.power.iter().map(|p| p * 10.0).collect());
        let ab = fuse_spectra(&[a.clone(), b.clone()], None).unwrap();
        let ba = fuse_spectra(&[b, a.clone()], None).unwrap();
        let ab10 = fuse_spectra(&[a, b10], None).unwrap();
        for i in 0..4 {
            assert!((ab.power[i] - ba.power[i]).abs() < 1e-15);
            assert!((ab.power[i] - ab10.power[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = spec(vec![1.0, 2.0]);
        let b = spec(vec![1.0, 2.0, 3.0]);
        assert!(fuse_spectra(&[a, b], None).is_err());
    }

    #[test]
    fn pooling_onto_display_grid() {
        let s = SpatialSpectrum::new(
            vec![0.0, 0.9, 1.05, 2.0],
            vec![1.0, 5.0, 2.0, 1.0],
            EstimatorKind::QspiceGnr2,
            None,
            1e-12,
        )
        .unwrap();
        let db = fixed_grid_db(&s, &[0.0, 1.0, 2.0]);
        assert!((db[1] - 10.0 * 5f64.log10()).abs() < 1e-12);
        assert_eq!(db[0], 0.0);
    }
}
