//! One entry point from per-bin covariances to angle estimates for every
//! estimator.

use serde::{Deserialize, Serialize};

use crate::array::{angle_grid, build_dictionary_with, AngleConvention, ArrayGeometry, SteeringDictionary};
use crate::error::{Error, Result};
use crate::estimators::{
    cbf_spectrum, music_spectrum, peak_pick, qspice_solve, spectrum_from_report, EstimatorKind,
    SolverConfig, SpatialSpectrum,
};
use crate::frontend::{sample_covariance, BinCovariance};
use crate::fusion::fuse_spectra;
use crate::gnr::{gnr2_estimate, RefineConfig};
use crate::sim::SnapshotMatrix;

/// Grid and solver choices shared by all estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSettings {
    /// Grid step of the fixed-grid estimators, degrees.
    pub grid_step: f64,
    /// Search sector; the convention's full sector when absent.
    pub sector: Option<(f64, f64)>,
    /// Orders and stopping rule of q-SPICE; SPICE reuses the stopping rule.
    pub solver: SolverConfig,
    pub refine: RefineConfig,
    /// Minimum separation between picked peaks, degrees.
    pub guard_deg: f64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            grid_step: 1.0,
            sector: None,
            solver: SolverConfig::default(),
            refine: RefineConfig::default(),
            guard_deg: 0.0,
        }
    }
}

impl EstimatorSettings {
    pub fn sector(&self, convention: AngleConvention) -> (f64, f64) {
        self.sector.unwrap_or_else(|| convention.sector())
    }

    pub fn spice_config(&self) -> SolverConfig {
        SolverConfig {
            r: 1.0,
            q: 1.0,
            ..self.solver
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.refine.validate()?;
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return Err(Error::Config("grid_step must be positive".into()));
        }
        if !(self.guard_deg >= 0.0) {
            return Err(Error::Config("guard_deg must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Angles and the (fused) spectrum they were picked from.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub angles: Vec<f64>,
    pub spectrum: SpatialSpectrum,
    pub shortfall: bool,
}

/// Narrowband snapshots as a single bin at `frequency_hz`.
pub fn narrowband_bins(record: &SnapshotMatrix, frequency_hz: f64) -> Result<Vec<BinCovariance>> {
    let z = record
        .as_narrowband()
        .ok_or_else(|| Error::invalid("expected narrowband snapshots"))?;
    Ok(vec![BinCovariance {
        frequency_hz,
        cov: sample_covariance(z)?,
    }])
}

fn dictionary(
    geometry: &ArrayGeometry,
    convention: AngleConvention,
    frequency_hz: f64,
    grid: &[f64],
) -> Result<SteeringDictionary> {
    build_dictionary_with(geometry, frequency_hz, grid, convention)
}

/// Sparse-fit spectra of every bin on `grid`, fused.
pub fn solve_fused(
    bins: &[BinCovariance],
    geometry: &ArrayGeometry,
    convention: AngleConvention,
    grid: &[f64],
    solver: &SolverConfig,
    kind: EstimatorKind,
) -> Result<SpatialSpectrum> {
    let spectra = bins
        .iter()
        .map(|b| {
            let dict = dictionary(geometry, convention, b.frequency_hz, grid)?;
            let report = qspice_solve(&b.cov, &dict, solver)?;
            spectrum_from_report(&report, &dict, kind)
        })
        .collect::<Result<Vec<_>>>()?;
    fuse_spectra(&spectra, None)
}

/// Spectrum of one bin on a fixed dictionary.
pub fn bin_spectrum(
    kind: EstimatorKind,
    bin: &BinCovariance,
    dict: &SteeringDictionary,
    k: usize,
    settings: &EstimatorSettings,
) -> Result<SpatialSpectrum> {
    match kind {
        EstimatorKind::Cbf => cbf_spectrum(&bin.cov, dict),
        EstimatorKind::Music => music_spectrum(&bin.cov, dict, k),
        EstimatorKind::Spice => {
            let report = qspice_solve(&bin.cov, dict, &settings.spice_config())?;
            spectrum_from_report(&report, dict, kind)
        }
        EstimatorKind::Qspice | EstimatorKind::QspiceGnr2 => {
            let report = qspice_solve(&bin.cov, dict, &settings.solver)?;
            spectrum_from_report(&report, dict, kind)
        }
    }
}

/// Estimates `k` directions from one or more bins.
///
/// Fixed-grid estimators fuse their per-bin spectra on a grid of
/// `settings.grid_step`; q-SPICE-GNR² refines from `settings.refine`.
pub fn estimate(
    kind: EstimatorKind,
    bins: &[BinCovariance],
    geometry: &ArrayGeometry,
    convention: AngleConvention,
    k: usize,
    settings: &EstimatorSettings,
) -> Result<Estimate> {
    if bins.is_empty() {
        return Err(Error::invalid("no frequency bins to estimate from"));
    }
    if k == 0 {
        return Err(Error::invalid("source count must be at least 1"));
    }
    let sector = settings.sector(convention);
    if kind == EstimatorKind::QspiceGnr2 {
        let out = gnr2_estimate(
            bins,
            geometry,
            convention,
            sector,
            k,
            &settings.solver,
            &settings.refine,
            settings.guard_deg,
        )?;
        return Ok(Estimate {
            angles: out.angles,
            spectrum: out.spectrum,
            shortfall: out.shortfall,
        });
    }
    let grid = angle_grid(sector.0, sector.1, settings.grid_step)?;
    let spectra = bins
        .iter()
        .map(|b| {
            let dict = dictionary(geometry, convention, b.frequency_hz, &grid)?;
            bin_spectrum(kind, b, &dict, k, settings)
        })
        .collect::<Result<Vec<_>>>()?;
    let spectrum = fuse_spectra(&spectra, None)?;
    let pick = peak_pick(&spectrum, k, settings.guard_deg);
    Ok(Estimate {
        angles: pick.angles,
        spectrum,
        shortfall: pick.shortfall,
    })
}
