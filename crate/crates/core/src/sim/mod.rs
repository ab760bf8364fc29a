//! Scenario synthesis: sources, noise, SNR calibration and snapshot records.

mod filter;
mod noise;
mod sources;
mod stable;

pub use filter::BandPass;
pub use noise::{
    generate_noise, generate_noise_real, measure_snr, random_variances, snr_noise_scale,
    NoiseModel,
};
pub use sources::{
    generate_sources, generate_waveforms, Line, PropellerSpec, SourceKind, SourceSpec, Tone,
    Waveform,
};
pub use stable::{sample_sas, StableParams};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::array::{AngleConvention, ArrayGeometry};
use crate::error::{Error, Result};
use crate::frontend::FftCache;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Time,
    NarrowbandSnapshot,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotData {
    Time(DMatrix<f64>),
    Narrowband(DMatrix<Complex64>),
}

/// Multichannel record: `M` channels by `N` samples or snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    data: SnapshotData,
    sample_rate: Option<f64>,
}

impl SnapshotMatrix {
    pub fn time(data: DMatrix<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        Self::checked(SnapshotData::Time(data), Some(sample_rate))
    }

    pub fn narrowband(data: DMatrix<Complex64>) -> Result<Self> {
        Self::checked(SnapshotData::Narrowband(data), None)
    }

    fn checked(data: SnapshotData, sample_rate: Option<f64>) -> Result<Self> {
        let (m, n, finite) = match &data {
            SnapshotData::Time(d) => (d.nrows(), d.ncols(), d.iter().all(|v| v.is_finite())),
            SnapshotData::Narrowband(d) => (
                d.nrows(),
                d.ncols(),
                d.iter().all(|v| v.re.is_finite() && v.im.is_finite()),
            ),
        };
        if m < 2 {
            return Err(Error::invalid("record needs at least two channels"));
        }
        if n < 1 {
            return Err(Error::invalid("record needs at least one sample"));
        }
        if !finite {
            return Err(Error::invalid("record has non-finite samples"));
        }
        Ok(Self { data, sample_rate })
    }

    pub fn data(&self) -> &SnapshotData {
        &self.data
    }

    pub fn domain(&self) -> Domain {
        match self.data {
            SnapshotData::Time(_) => Domain::Time,
            SnapshotData::Narrowband(_) => Domain::NarrowbandSnapshot,
        }
    }

    pub fn sample_rate(&self) -> Option<f64> {
        self.sample_rate
    }

    pub fn channels(&self) -> usize {
        match &self.data {
            SnapshotData::Time(d) => d.nrows(),
            SnapshotData::Narrowband(d) => d.nrows(),
        }
    }

    pub fn samples(&self) -> usize {
        match &self.data {
            SnapshotData::Time(d) => d.ncols(),
            SnapshotData::Narrowband(d) => d.ncols(),
        }
    }

    pub fn as_narrowband(&self) -> Option<&DMatrix<Complex64>> {
        match &self.data {
            SnapshotData::Narrowband(d) => Some(d),
            SnapshotData::Time(_) => None,
        }
    }

    pub fn as_time(&self) -> Option<&DMatrix<f64>> {
        match &self.data {
            SnapshotData::Time(d) => Some(d),
            SnapshotData::Narrowband(_) => None,
        }
    }

    /// Columns `start..start + len` of the record, keeping its metadata.
    pub fn time_slice(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.samples() {
            return Err(Error::invalid(format!(
                "slice {start}..{} outside a record of {} samples",
                start + len,
                self.samples()
            )));
        }
        let data = match &self.data {
            SnapshotData::Time(d) => SnapshotData::Time(d.columns(start, len).into_owned()),
            SnapshotData::Narrowband(d) => SnapshotData::Narrowband(d.columns(start, len).into_owned()),
        };
        Ok(Self {
            data,
            sample_rate: self.sample_rate,
        })
    }
}

/// Noise model and the SNR (dB) to calibrate it to.
///
/// Gaussian models are rescaled so that [`measure_snr`] of the mean source
/// power equals the target. Alpha-stable models keep their dispersion and the
/// sources are rescaled instead, to power `gamma * 10^(snr/10)`.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSetting<'a> {
    pub model: &'a NoiseModel,
    pub snr_db: f64,
}

/// A synthesized record with its ground truth.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub record: SnapshotMatrix,
    pub truth_deg: Vec<f64>,
    /// Noise model after SNR calibration, if any noise was added.
    pub noise: Option<NoiseModel>,
    /// Amplitude factor applied to the sources.
    pub source_gain: f64,
}

fn calibrate(sources: &SourceSpec, noise: Option<NoiseSetting<'_>>) -> Result<(Option<NoiseModel>, f64)> {
    let Some(setting) = noise else {
        return Ok((None, 1.0));
    };
    setting.model.validate()?;
    if !setting.snr_db.is_finite() {
        return Err(Error::invalid("target SNR must be finite"));
    }
    let power = sources.mean_power();
    match setting.model {
        NoiseModel::ImpulsiveSas(p) => {
            let target = p.gamma * 10f64.powf(setting.snr_db / 10.0);
            Ok((Some(setting.model.clone()), (target / power).sqrt()))
        }
        model => {
            let scale = snr_noise_scale(power, model, setting.snr_db)?;
            Ok((Some(model.scaled(scale)), 1.0))
        }
    }
}

fn check_angles(sources: &SourceSpec, convention: AngleConvention) -> Result<()> {
    if let Some(bad) = sources.angles_deg.iter().find(|&&a| !convention.contains(a)) {
        return Err(Error::invalid(format!(
            "source angle {bad} outside the {convention:?} sector"
        )));
    }
    Ok(())
}

/// Narrowband snapshots `Y = A S + E` at `frequency_hz`.
///
/// `geometry` is the true (possibly perturbed) array; estimators may use a
/// nominal one.
pub fn synthesize_snapshots(
    geometry: &ArrayGeometry,
    convention: AngleConvention,
    frequency_hz: f64,
    sources: &SourceSpec,
    noise: Option<NoiseSetting<'_>>,
    n: usize,
    seed: u64,
) -> Result<Synthesis> {
    sources.validate()?;
    check_angles(sources, convention)?;
    if n == 0 {
        return Err(Error::invalid("snapshot count must be positive"));
    }
    let (noise_model, gain) = calibrate(sources, noise)?;
    let m = geometry.element_count();
    let s = generate_sources(sources, n, seed)?;
    let mut a = DMatrix::zeros(m, sources.count());
    for (k, &theta) in sources.angles_deg.iter().enumerate() {
        let v = crate::array::steering_vector_with(geometry, frequency_hz, theta, convention)?;
        a.set_column(k, &v);
    }
    let mut y = a * s * Complex64::new(gain, 0.0);
    if let Some(model) = &noise_model {
        y += generate_noise(model, m, n, seed)?;
    }
    Ok(Synthesis {
        record: SnapshotMatrix::narrowband(y)?,
        truth_deg: sources.angles_deg.clone(),
        noise: noise_model,
        source_gain: gain,
    })
}

/// Real multichannel time record of `n` samples at `sample_rate`.
///
/// The element at offset `x_m` receives each wavefront `x_m * u / c` seconds
/// ahead of the reference element, which is the convention under which the
/// DFT probe of the front end recovers the steering vector.
pub fn synthesize_record(
    geometry: &ArrayGeometry,
    convention: AngleConvention,
    sources: &SourceSpec,
    noise: Option<NoiseSetting<'_>>,
    n: usize,
    sample_rate: f64,
    seed: u64,
) -> Result<Synthesis> {
    sources.validate()?;
    check_angles(sources, convention)?;
    if n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let (noise_model, gain) = calibrate(sources, noise)?;
    let m = geometry.element_count();
    let waves = generate_waveforms(sources, n, sample_rate, seed)?;
    let mut cache = FftCache::default();
    let mut y = DMatrix::<f64>::zeros(m, n);
    for (k, w) in waves.iter().enumerate() {
        let u = convention.direction_cosine(sources.angles_deg[k]);
        for ch in 0..m {
            let x = w.render(n, geometry.advance(ch, u), &mut cache);
            for (t, v) in x.into_iter().enumerate() {
                y[(ch, t)] += gain * v;
            }
        }
    }
    if let Some(model) = &noise_model {
        y += generate_noise_real(model, m, n, seed)?;
    }
    Ok(Synthesis {
        record: SnapshotMatrix::time(y, sample_rate)?,
        truth_deg: sources.angles_deg.clone(),
        noise: noise_model,
        source_gain: gain,
    })
}
