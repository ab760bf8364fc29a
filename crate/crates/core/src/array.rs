//! Linear array geometry, steering vectors and steering dictionaries.
//!
//! Element `m` sits at `offsets[m] * spacing` metres from the reference
//! element. A plane wave at frequency `f` arriving from `theta` produces the
//! phase `exp(-j * 2*pi*f * offsets[m] * spacing * u(theta) / c)` where `u` is
//! the direction cosine of the configured [`AngleConvention`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// How bearings map onto the array axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AngleConvention {
    /// Angles in [-90, 90] measured from the array normal; `u = sin(theta)`.
    #[default]
    Broadside,
    /// Angles in [0, 180] measured from the array axis; `u = cos(theta)`.
    Endfire,
}

impl AngleConvention {
    pub fn direction_cosine(self, theta_deg: f64) -> f64 {
        match self {
            AngleConvention::Broadside => theta_deg.to_radians().sin(),
            AngleConvention::Endfire => theta_deg.to_radians().cos(),
        }
    }

    /// Admissible sector `(lo, hi)` in degrees.
    pub fn sector(self) -> (f64, f64) {
        match self {
            AngleConvention::Broadside => (-90.0, 90.0),
            AngleConvention::Endfire => (0.0, 180.0),
        }
    }

    pub fn contains(self, theta_deg: f64) -> bool {
        let (lo, hi) = self.sector();
        theta_deg >= lo - 1e-9 && theta_deg <= hi + 1e-9
    }
}

/// Sensor layout of a (possibly non-uniform) horizontal line array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    offsets: Vec<f64>,
    spacing: f64,
    sound_speed: f64,
}

impl ArrayGeometry {
    /// `offsets` are in multiples of the nominal `spacing` (metres) and must
    /// start at 0 and strictly increase.
    pub fn new(offsets: Vec<f64>, spacing: f64, sound_speed: f64) -> Result<Self> {
        if offsets.len() < 2 {
            return Err(Error::invalid("array needs at least two elements"));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
        }
        if !(sound_speed.is_finite() && sound_speed > 0.0) {
            return Err(Error::invalid(format!(
                "sound speed must be positive, got {sound_speed}"
            )));
        }
        crate::error::ensure_finite(&offsets, "element offsets")?;
        if offsets[0] != 0.0 {
            return Err(Error::invalid("reference element offset must be 0"));
        }
        if offsets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("element offsets must strictly increase"));
        }
        Ok(Self {
            offsets,
            spacing,
            sound_speed,
        })
    }

    /// Uniform line array with `m` elements.
    pub fn uniform(m: usize, spacing: f64, sound_speed: f64) -> Result<Self> {
        Self::new((0..m).map(|i| i as f64).collect(), spacing, sound_speed)
    }

    /// Uniform array with half-wavelength spacing at `design_hz`.
    pub fn half_wavelength(m: usize, design_hz: f64, sound_speed: f64) -> Result<Self> {
        if !(design_hz.is_finite() && design_hz > 0.0) {
            return Err(Error::invalid("design frequency must be positive"));
        }
        Self::uniform(m, sound_speed / design_hz / 2.0, sound_speed)
    }

    pub fn element_count(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    /// Element positions in metres.
    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.offsets.iter().map(move |a| a * self.spacing)
    }

    /// Smallest gap between neighbouring offsets, in units of spacing.
    pub fn min_gap(&self) -> f64 {
        self.offsets
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Time advance (seconds) of element `m` relative to the reference for a
    /// plane wave with direction cosine `u`.
    pub fn advance(&self, m: usize, u: f64) -> f64 {
        self.offsets[m] * self.spacing * u / self.sound_speed
    }
}

fn check_frequency(frequency_hz: f64) -> Result<()> {
    if frequency_hz.is_finite() && frequency_hz > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "frequency must be positive and finite, got {frequency_hz}"
        )))
    }
}

fn fill_steering(geometry: &ArrayGeometry, frequency_hz: f64, u: f64, out: &mut [Complex64]) {
    let k = 2.0 * PI * frequency_hz * geometry.spacing * u / geometry.sound_speed;
    for (slot, &alpha) in out.iter_mut().zip(&geometry.offsets) {
        *slot = Complex64::from_polar(1.0, -k * alpha);
    }
}

/// Broadside steering vector (`u = sin(theta)`).
pub fn steering_vector(
    geometry: &ArrayGeometry,
    frequency_hz: f64,
    theta_deg: f64,
) -> Result<DVector<Complex64>> {
    steering_vector_with(geometry, frequency_hz, theta_deg, AngleConvention::Broadside)
}

pub fn steering_vector_with(
    geometry: &ArrayGeometry,
    frequency_hz: f64,
    theta_deg: f64,
    convention: AngleConvention,
) -> Result<DVector<Complex64>> {
    check_frequency(frequency_hz)?;
    if !theta_deg.is_finite() {
        return Err(Error::invalid("angle must be finite"));
    }
    let mut v = DVector::zeros(geometry.element_count());
    fill_steering(
        geometry,
        frequency_hz,
        convention.direction_cosine(theta_deg),
        v.as_mut_slice(),
    );
    Ok(v)
}

/// Steering vectors for every grid angle at a single frequency.
#[derive(Debug, Clone)]
pub struct SteeringDictionary {
    frequency_hz: f64,
    convention: AngleConvention,
    angles: Vec<f64>,
    manifold: DMatrix<Complex64>,
}

impl SteeringDictionary {
    /// Dictionary from a measured or calibrated `M x G` manifold, one column
    /// per entry of `angles`.
    pub fn from_manifold(
        manifold: DMatrix<Complex64>,
        angles: Vec<f64>,
        frequency_hz: f64,
        convention: AngleConvention,
    ) -> Result<Self> {
        if manifold.nrows() == 0 || manifold.ncols() != angles.len() || angles.is_empty() {
            return Err(Error::invalid(format!(
                "manifold is {}x{} for {} angles",
                manifold.nrows(),
                manifold.ncols(),
                angles.len()
            )));
        }
        if manifold.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::invalid("manifold has non-finite entries"));
        }
        Ok(Self {
            frequency_hz,
            convention,
            angles,
            manifold,
        })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn convention(&self) -> AngleConvention {
        self.convention
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// `M x G` array manifold, one column per grid angle.
    pub fn manifold(&self) -> &DMatrix<Complex64> {
        &self.manifold
    }

    pub fn element_count(&self) -> usize {
        self.manifold.nrows()
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn column(&self, g: usize) -> &[Complex64] {
        let m = self.manifold.nrows();
        &self.manifold.as_slice()[g * m..(g + 1) * m]
    }
}

/// Broadside dictionary over `angle_grid`.
pub fn build_dictionary(
    geometry: &ArrayGeometry,
    frequency_hz: f64,
    angle_grid: &[f64],
) -> Result<SteeringDictionary> {
    build_dictionary_with(geometry, frequency_hz, angle_grid, AngleConvention::Broadside)
}

pub fn build_dictionary_with(
    geometry: &ArrayGeometry,
    frequency_hz: f64,
    angle_grid: &[f64],
    convention: AngleConvention,
) -> Result<SteeringDictionary> {
    check_frequency(frequency_hz)?;
    if angle_grid.is_empty() {
        return Err(Error::invalid("angle grid is empty"));
    }
    crate::error::ensure_finite(angle_grid, "angle grid")?;
    if angle_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("angle grid must be strictly ascending"));
    }
    if let Some(bad) = angle_grid.iter().find(|&&a| !convention.contains(a)) {
        return Err(Error::invalid(format!(
            "angle {bad} outside the {convention:?} sector"
        )));
    }
    let m = geometry.element_count();
    let mut manifold = DMatrix::zeros(m, angle_grid.len());
    for (g, chunk) in manifold.as_mut_slice().chunks_exact_mut(m).enumerate() {
        fill_steering(
            geometry,
            frequency_hz,
            convention.direction_cosine(angle_grid[g]),
            chunk,
        );
    }
    Ok(SteeringDictionary {
        frequency_hz,
        convention,
        angles: angle_grid.to_vec(),
        manifold,
    })
}

/// Evenly spaced grid `start, start + step, ..., stop` (inclusive when `stop`
/// lies on the lattice). Points are computed as `start + i * step` so no
/// rounding accumulates.
pub fn angle_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::invalid("grid bounds and step must be finite, step > 0"));
    }
    if stop < start {
        return Err(Error::invalid("grid stop precedes start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Jitters every non-reference offset by `u * error_level`, `u ~ U[-1, 1]`.
///
/// `error_level` is a fraction of the nominal spacing and must stay below
/// half the smallest offset gap so the element order is preserved.
pub fn perturb_geometry(
    geometry: &ArrayGeometry,
    error_level: f64,
    seed: u64,
) -> Result<ArrayGeometry> {
    if !(error_level.is_finite() && error_level >= 0.0) {
        return Err(Error::invalid("error level must be finite and non-negative"));
    }
    let gap = geometry.min_gap();
    if error_level >= gap / 2.0 {
        return Err(Error::invalid(format!(
            "error level {error_level} must be below half the minimum gap ({gap})"
        )));
    }
    let mut rng = rng::stream(seed, &[rng::tag::GEOMETRY]);
    let mut offsets = geometry.offsets.clone();
    for alpha in offsets.iter_mut().skip(1) {
        let u: f64 = rng.random_range(-1.0..=1.0);
        *alpha += u * error_level;
    }
    ArrayGeometry::new(offsets, geometry.spacing, geometry.sound_speed)
}
