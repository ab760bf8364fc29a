//! Broadband direction-of-arrival estimation for line arrays.
//!
//! The crate covers array geometry and steering dictionaries, scenario
//! synthesis with uniform, non-uniform and impulsive noise, a frequency-bin
//! front end, CBF/MUSIC/SPICE/q-SPICE spectra, grid-neighbourhood
//! refinement, broadband fusion and bearing-time records, accuracy metrics
//! with a Monte Carlo harness, and a cable sensitivity model.

pub mod array;
pub mod cable;
pub mod error;
pub mod estimators;
pub mod frontend;
pub mod fusion;
pub mod gnr;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod montecarlo;
pub mod pipeline;
pub mod processing;
pub mod rng;
pub mod sim;

pub use array::{
    angle_grid, build_dictionary, build_dictionary_with, perturb_geometry, steering_vector,
    steering_vector_with, AngleConvention, ArrayGeometry, SteeringDictionary,
};
pub use error::{Error, Result};
pub use estimators::{
    cbf_spectrum, music_spectrum, peak_pick, qspice_solve, spice_weights, CovarianceFit,
    EstimatorKind, PowerVector, SolverConfig, SolverMethod, SpatialSpectrum,
};
pub use frontend::{
    band_transform, bin_covariances, dft_vector, sample_covariance, select_bins, BinCovariance,
    BinSnapshots, CovarianceEstimate, FrequencyBinSet,
};
pub use fusion::{btr, fuse_spectra, BearingTimeRecord, BtrConfig};
pub use gnr::{gnr2_estimate, Gnr2Result, RefineConfig};
pub use pipeline::{estimate, Estimate, EstimatorSettings};
pub use processing::ProcessingConfig;
pub use metrics::{rmse, success_ratio, TrialEstimate};
pub use montecarlo::{preset, run_monte_carlo, BenchResult, ScenarioConfig};
pub use sim::{NoiseModel, SnapshotMatrix, SourceSpec};
