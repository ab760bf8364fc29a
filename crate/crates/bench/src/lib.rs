//! Shared fixtures for the benchmarks.

use bbdoa_core::montecarlo::{trial_data, SweepPoint};
use bbdoa_core::{build_dictionary, preset, angle_grid, ArrayGeometry, BinCovariance, ScenarioConfig, SteeringDictionary};

/// One trial of the white-noise two-tone scenario at `snr_db`.
pub fn uniform_trial(snr_db: f64, seed: u64) -> (ScenarioConfig, ArrayGeometry, Vec<BinCovariance>) {
    let cfg = preset("uniform").expect("built-in scenario");
    let point = SweepPoint {
        snr_db,
        ..cfg.points()[0]
    };
    let (geom, bins) = trial_data(&cfg, &point, seed).expect("trial synthesizes");
    (cfg, geom, bins)
}

/// Dictionary over the full broadside sector with spacing `step`.
pub fn dictionary(geom: &ArrayGeometry, frequency_hz: f64, step: f64) -> SteeringDictionary {
    let grid = angle_grid(-90.0, 90.0, step).expect("valid grid");
    build_dictionary(geom, frequency_hz, &grid).expect("valid dictionary")
}
