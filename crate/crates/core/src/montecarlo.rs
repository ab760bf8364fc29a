//! Monte Carlo harness: scenario configuration, trial loop and aggregate
//! accuracy/runtime tables.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{perturb_geometry, AngleConvention, ArrayGeometry};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::io::config_hash;
use crate::frontend::{band_transform, bin_covariances, select_bins, BinCovariance, FrequencyBinSet, Window};
use crate::metrics::{rmse, success_ratio, TrialEstimate, SUCCESS_THRESHOLD_DEG};
use crate::pipeline::{estimate, narrowband_bins, EstimatorSettings};
use crate::rng;
use crate::sim::{
    random_variances, synthesize_record, synthesize_snapshots, NoiseModel, NoiseSetting, SourceSpec, Synthesis,
};

/// Array description. Exactly one of `spacing_m` and `design_hz` (half a
/// wavelength at that frequency) fixes the nominal spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub elements: usize,
    /// Offsets in units of the spacing; uniform when absent.
    #[serde(default)]
    pub offsets: Option<Vec<f64>>,
    #[serde(default)]
    pub spacing_m: Option<f64>,
    #[serde(default)]
    pub design_hz: Option<f64>,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
    /// Position error level as a fraction of the spacing.
    #[serde(default)]
    pub position_error: f64,
}

fn default_sound_speed() -> f64 {
    1500.0
}

impl ArraySpec {
    pub fn half_wavelength(elements: usize, design_hz: f64) -> Self {
        Self {
            elements,
            offsets: None,
            spacing_m: None,
            design_hz: Some(design_hz),
            sound_speed: default_sound_speed(),
            position_error: 0.0,
        }
    }

    /// Nominal geometry with `elements` sensors.
    pub fn geometry(&self, elements: usize) -> Result<ArrayGeometry> {
        let spacing = match (self.spacing_m, self.design_hz) {
            (Some(d), None) => d,
            (None, Some(f)) => self.sound_speed / (2.0 * f),
            _ => {
                return Err(Error::Config(
                    "array needs exactly one of spacing_m and design_hz".into(),
                ))
            }
        };
        match &self.offsets {
            Some(offsets) => {
                if offsets.len() != elements {
                    return Err(Error::Config(format!(
                        "{} offsets given for {elements} elements",
                        offsets.len()
                    )));
                }
                ArrayGeometry::new(offsets.clone(), spacing, self.sound_speed)
            }
            None => ArrayGeometry::uniform(elements, spacing, self.sound_speed),
        }
    }
}

/// Time-domain synthesis and bin front end for broadband scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BroadbandSpec {
    pub sample_rate: f64,
    /// Record length in samples; the snapshot sweep is ignored.
    pub samples: usize,
    pub fft_len: usize,
    pub fft_hop: usize,
    pub band_hz: (f64, f64),
    pub bin_spacing_hz: f64,
    #[serde(default)]
    pub select: Option<usize>,
    #[serde(default)]
    pub window: Window,
}

/// Per-trial random non-uniform noise `floor + span * U(0, 1)` per sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomProfile {
    pub floor: f64,
    pub span: f64,
}

/// Sweep axes. Empty `elements`/`position_error` fall back to the array spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub snr_db: Vec<f64>,
    pub snapshots: Vec<usize>,
    #[serde(default)]
    pub elements: Vec<usize>,
    #[serde(default)]
    pub position_error: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub elements: usize,
    pub position_error: f64,
    pub snapshots: usize,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub array: ArraySpec,
    #[serde(default)]
    pub convention: AngleConvention,
    /// Narrowband analysis frequency (ignored with `broadband`).
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    pub sources: SourceSpec,
    pub noise: NoiseModel,
    /// Replaces the noise variances by a fresh random profile every trial.
    #[serde(default)]
    pub random_profile: Option<RandomProfile>,
    #[serde(default)]
    pub broadband: Option<BroadbandSpec>,
    pub sweep: Sweep,
    pub trials: usize,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub settings: EstimatorSettings,
    #[serde(default = "default_threshold")]
    pub success_threshold_deg: f64,
    pub seed: u64,
}

fn default_frequency() -> f64 {
    3000.0
}

fn default_threshold() -> f64 {
    SUCCESS_THRESHOLD_DEG
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sweep.snr_db.is_empty() || (self.sweep.snapshots.is_empty() && self.broadband.is_none()) {
            return Err(Error::Config("SNR and snapshot sweeps must be non-empty".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        if !(self.success_threshold_deg > 0.0) {
            return Err(Error::Config("success threshold must be positive".into()));
        }
        self.settings.validate()?;
        self.sources.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.noise.validate().map_err(|e| Error::Config(e.to_string()))?;
        for p in self.points() {
            self.array.geometry(p.elements)?;
            if p.snapshots == 0 {
                return Err(Error::Config("snapshot counts must be positive".into()));
            }
        }
        Ok(())
    }

    /// Sweep points in table order: elements, position error, snapshots, SNR.
    pub fn points(&self) -> Vec<SweepPoint> {
        let elements = if self.sweep.elements.is_empty() {
            vec![self.array.elements]
        } else {
            self.sweep.elements.clone()
        };
        let errors = if self.sweep.position_error.is_empty() {
            vec![self.array.position_error]
        } else {
            self.sweep.position_error.clone()
        };
        let snapshots = match &self.broadband {
            Some(b) => vec![b.samples],
            None => self.sweep.snapshots.clone(),
        };
        let mut out = Vec::new();
        for &m in &elements {
            for &e in &errors {
                for &n in &snapshots {
                    for &s in &self.sweep.snr_db {
                        out.push(SweepPoint {
                            elements: m,
                            position_error: e,
                            snapshots: n,
                            snr_db: s,
                        });
                    }
                }
            }
        }
        out
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Synthesizes the raw record of one trial (narrowband snapshots or a time
/// record) together with the nominal geometry the estimators should assume.
pub fn trial_record(cfg: &ScenarioConfig, point: &SweepPoint, seed: u64) -> Result<(ArrayGeometry, Synthesis)> {
    let nominal = cfg.array.geometry(point.elements)?;
    let truth = if point.position_error > 0.0 {
        perturb_geometry(&nominal, point.position_error, seed)?
    } else {
        nominal.clone()
    };
    let model = match cfg.random_profile {
        Some(p) => NoiseModel::NonuniformGaussian {
            variances: random_variances(point.elements, p.floor, p.span, seed),
        },
        None => cfg.noise.clone(),
    };
    let setting = NoiseSetting {
        model: &model,
        snr_db: point.snr_db,
    };
    let syn = match &cfg.broadband {
        None => synthesize_snapshots(
            &truth,
            cfg.convention,
            cfg.frequency_hz,
            &cfg.sources,
            Some(setting),
            point.snapshots,
            seed,
        )?,
        Some(b) => synthesize_record(
            &truth,
            cfg.convention,
            &cfg.sources,
            Some(setting),
            b.samples,
            b.sample_rate,
            seed,
        )?,
    };
    Ok((nominal, syn))
}

/// Synthesizes the data of one trial and returns the nominal geometry the
/// estimators should assume together with the per-bin covariances.
pub fn trial_data(cfg: &ScenarioConfig, point: &SweepPoint, seed: u64) -> Result<(ArrayGeometry, Vec<BinCovariance>)> {
    let (nominal, syn) = trial_record(cfg, point, seed)?;
    let bins = match &cfg.broadband {
        None => narrowband_bins(&syn.record, cfg.frequency_hz)?,
        Some(b) => {
            let set = FrequencyBinSet::from_band(b.fft_len, b.sample_rate, b.band_hz.0, b.band_hz.1, b.bin_spacing_hz)?;
            let snaps = band_transform(&syn.record, b.fft_len, b.fft_hop, &set, b.window)?;
            let mut covs = bin_covariances(&snaps)?;
            if let Some(count) = b.select {
                let all: Vec<_> = covs.iter().map(|c| c.cov.clone()).collect();
                let keep = select_bins(&all, &set, cfg.sources.count(), count)?.frequencies();
                covs.retain(|c| keep.contains(&c.frequency_hz));
            }
            covs
        }
    };
    Ok((nominal, bins))
}

/// Aggregate of one estimator at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub estimator: EstimatorKind,
    pub point: SweepPoint,
    pub rmse_deg: f64,
    pub success_pct: f64,
    pub mean_runtime_s: f64,
    pub trials: usize,
    /// Trials with a shortfall or an estimator error.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub scenario: String,
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<BenchRow>,
}

impl BenchResult {
    pub fn rows_for(&self, kind: EstimatorKind) -> Vec<&BenchRow> {
        self.rows.iter().filter(|r| r.estimator == kind).collect()
    }

    /// Mean runtime of each row divided by that of q-SPICE-GNR² at the same
    /// point, when GNR² was run.
    pub fn runtime_ratio(&self, row: &BenchRow) -> Option<f64> {
        let base = self
            .rows
            .iter()
            .find(|r| r.estimator == EstimatorKind::QspiceGnr2 && r.point == row.point)?;
        (base.mean_runtime_s > 0.0).then(|| row.mean_runtime_s / base.mean_runtime_s)
    }
}

struct TrialOutput {
    estimates: Vec<TrialEstimate>,
    seconds: Vec<f64>,
}

fn run_trial(cfg: &ScenarioConfig, point: &SweepPoint, seed: u64) -> TrialOutput {
    let n = cfg.estimators.len();
    let Ok((geometry, bins)) = trial_data(cfg, point, seed) else {
        return TrialOutput {
            estimates: vec![TrialEstimate::failed(); n],
            seconds: vec![0.0; n],
        };
    };
    let k = cfg.sources.count();
    let mut estimates = Vec::with_capacity(n);
    let mut seconds = Vec::with_capacity(n);
    for &kind in &cfg.estimators {
        let start = Instant::now();
        let out = estimate(kind, &bins, &geometry, cfg.convention, k, &cfg.settings);
        seconds.push(start.elapsed().as_secs_f64());
        estimates.push(match out {
            Ok(e) if !e.shortfall && e.angles.len() == k => TrialEstimate::complete(e.angles),
            _ => TrialEstimate::failed(),
        });
    }
    TrialOutput { estimates, seconds }
}

/// Runs every sweep point and trial. Trial `t` of point `i` draws from the
/// seed path `(seed, i, t)`, so results do not depend on `jobs`.
pub fn run_monte_carlo(cfg: &ScenarioConfig, jobs: Option<usize>) -> Result<BenchResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let truth = &cfg.sources.angles_deg;
    let mut rows = Vec::new();
    for (pi, point) in cfg.points().iter().enumerate() {
        let outputs: Vec<TrialOutput> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, point, rng::derive(cfg.seed, &[pi as u64, t as u64])))
                .collect()
        });
        for (ei, &kind) in cfg.estimators.iter().enumerate() {
            let trials: Vec<TrialEstimate> = outputs.iter().map(|o| o.estimates[ei].clone()).collect();
            let time: f64 = outputs.iter().map(|o| o.seconds[ei]).sum();
            rows.push(BenchRow {
                estimator: kind,
                point: *point,
                rmse_deg: rmse(&trials, truth)?,
                success_pct: success_ratio(&trials, truth, cfg.success_threshold_deg)?,
                mean_runtime_s: time / cfg.trials as f64,
                trials: cfg.trials,
                failures: trials.iter().filter(|t| t.shortfall).count(),
            });
        }
    }
    Ok(BenchResult {
        scenario: cfg.name.clone(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        rows,
    })
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 10] = [
    "uniform",
    "uniform-snapshots",
    "position-error",
    "nonuniform",
    "nonuniform-snapshots",
    "nonuniform-elements",
    "nonuniform-position-error",
    "impulsive",
    "impulsive-snapshots",
    "close-broadband",
];

const REFERENCE_DIAGONAL: [f64; 12] = [12.0, 2.3, 20.5, 5.5, 11.1, 6.5, 2.0, 13.5, 0.8, 1.7, 13.6, 5.2];

fn steps(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// Built-in simulation scenarios at full trial count (500).
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let base = ScenarioConfig {
        name: name.to_string(),
        array: ArraySpec::half_wavelength(12, 3000.0),
        convention: AngleConvention::Broadside,
        frequency_hz: 3000.0,
        sources: SourceSpec::tonal(vec![2.36, 27.62], 1.0),
        noise: NoiseModel::UniformGaussian { variance: 1.0 },
        random_profile: None,
        broadband: None,
        sweep: Sweep {
            snr_db: steps(-3.0, 15.0, 3.0),
            snapshots: vec![60],
            elements: Vec::new(),
            position_error: Vec::new(),
        },
        trials: 500,
        estimators: EstimatorKind::ALL.to_vec(),
        settings: EstimatorSettings::default(),
        success_threshold_deg: SUCCESS_THRESHOLD_DEG,
        seed: 20240601,
    };
    let nonuniform = NoiseModel::NonuniformGaussian {
        variances: REFERENCE_DIAGONAL.to_vec(),
    };
    let cfg = match name {
        "uniform" => base,
        "uniform-snapshots" => ScenarioConfig {
            sweep: Sweep {
                snr_db: vec![5.0],
                snapshots: vec![30, 60, 90, 120, 150],
                ..base.sweep.clone()
            },
            ..base
        },
        "position-error" => ScenarioConfig {
            sources: SourceSpec::tonal(vec![-2.36, 19.78], 1.0),
            sweep: Sweep {
                snr_db: vec![10.0],
                snapshots: vec![60],
                elements: Vec::new(),
                position_error: vec![0.1, 0.2, 0.3, 0.4],
            },
            ..base
        },
        "nonuniform" => ScenarioConfig {
            noise: nonuniform,
            sweep: Sweep {
                snr_db: steps(-9.0, 9.0, 3.0),
                ..base.sweep.clone()
            },
            ..base
        },
        "nonuniform-snapshots" => ScenarioConfig {
            noise: nonuniform,
            sweep: Sweep {
                snr_db: vec![-3.0],
                snapshots: vec![30, 60, 90, 120, 150],
                ..base.sweep.clone()
            },
            ..base
        },
        "nonuniform-elements" => ScenarioConfig {
            noise: nonuniform,
            random_profile: Some(RandomProfile {
                floor: 0.5,
                span: 25.0,
            }),
            sweep: Sweep {
                snr_db: vec![0.0],
                snapshots: vec![60],
                elements: (1..=8).map(|i| 4 * i).collect(),
                position_error: Vec::new(),
            },
            ..base
        },
        "nonuniform-position-error" => ScenarioConfig {
            noise: nonuniform,
            sweep: Sweep {
                snr_db: steps(-9.0, 9.0, 3.0),
                snapshots: vec![60],
                elements: Vec::new(),
                position_error: vec![0.1],
            },
            ..base
        },
        "impulsive" => ScenarioConfig {
            noise: NoiseModel::ImpulsiveSas(crate::sim::StableParams::symmetric(1.2, 1.0)),
            sweep: Sweep {
                snr_db: steps(-9.0, 12.0, 3.0),
                snapshots: vec![400],
                ..base.sweep.clone()
            },
            ..base
        },
        "impulsive-snapshots" => ScenarioConfig {
            noise: NoiseModel::ImpulsiveSas(crate::sim::StableParams::symmetric(1.2, 1.0)),
            sweep: Sweep {
                snr_db: vec![0.0],
                snapshots: vec![50, 100, 150, 200, 250],
                ..base.sweep.clone()
            },
            ..base
        },
        "close-broadband" => close_broadband(base, nonuniform),
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}

/// Two propeller sources 1.8 degrees apart in non-uniform noise at 0 dB,
/// processed through the bin front end.
fn close_broadband(base: ScenarioConfig, noise: NoiseModel) -> ScenarioConfig {
    let sources = SourceSpec {
        kind: crate::sim::SourceKind::PropellerBroadband,
        angles_deg: vec![18.8, 20.6],
        powers: vec![1.0],
        tonal_hz: Vec::new(),
        propeller: crate::sim::PropellerSpec {
            band_hz: (100.0, 1000.0),
            line_base_hz: vec![110.0, 130.0],
            line_level_db: 10.0,
        },
    };
    ScenarioConfig {
        array: ArraySpec::half_wavelength(12, 1000.0),
        sources,
        noise,
        broadband: Some(BroadbandSpec {
            sample_rate: 4096.0,
            samples: 4096,
            fft_len: 512,
            fft_hop: 256,
            band_hz: (600.0, 1000.0),
            bin_spacing_hz: 40.0,
            select: None,
            window: Window::Rectangular,
        }),
        sweep: Sweep {
            snr_db: vec![0.0],
            snapshots: vec![4096],
            elements: Vec::new(),
            position_error: Vec::new(),
        },
        trials: 100,
        estimators: vec![EstimatorKind::Cbf, EstimatorKind::QspiceGnr2],
        ..base
    }
}
