//! Spatial-spectrum estimators.

mod cbf;
mod music;
mod peaks;
mod qspice;
mod spectrum;

pub use cbf::cbf_spectrum;
pub use music::{music_spectrum, noise_projection, noise_subspace};
pub use peaks::{local_maxima, peak_pick, peak_pick_where, PeakPick};
pub use qspice::{
    block_minimizer, initial_power, kkt_residual, objective, qspice_solve, qspice_solve_from,
    qspice_solve_snapshot, qspice_spectrum, spice_weights, weighted_norm, CovarianceFit, PowerVector,
    SolveReport, SolverConfig, SolverMethod, SpiceWeights,
};
pub(crate) use qspice::spectrum_from_report;
pub use spectrum::{EstimatorKind, SpatialSpectrum};
