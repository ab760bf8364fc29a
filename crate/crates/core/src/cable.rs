//! Pressure sensitivity of a fibre wound on a compliant mandrel.
//!
//! `V` in the radial-displacement formula is read as Young's modulus and
//! `rho` as Poisson's ratio: only that reading makes `pressure / V`
//! dimensionless.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Micro-pascals per pascal.
const UPA_PER_PA: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MandrelSpec {
    /// Inner radius `a`, metres.
    pub inner_radius: f64,
    /// Outer radius `r`, metres.
    pub outer_radius: f64,
    pub poisson_ratio: f64,
    /// Pascals.
    pub youngs_modulus: f64,
    /// Internal pressure `p1`, pascals.
    pub internal_pressure: f64,
    /// External pressure `p2`, pascals.
    pub external_pressure: f64,
}

impl MandrelSpec {
    pub fn validate(&self) -> Result<()> {
        let (a, r) = (self.inner_radius, self.outer_radius);
        if !(a > 0.0 && a < r && r.is_finite()) {
            return Err(Error::invalid(format!("need 0 < a < r, got a = {a}, r = {r}")));
        }
        if !(self.youngs_modulus > 0.0 && self.youngs_modulus.is_finite()) {
            return Err(Error::invalid("Young's modulus must be positive"));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return Err(Error::invalid("Poisson's ratio must lie in [0, 0.5)"));
        }
        if !(self.internal_pressure.is_finite() && self.external_pressure.is_finite()) {
            return Err(Error::invalid("pressures must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub refractive_index: f64,
    /// Optical wavelength, metres.
    pub wavelength: f64,
    /// Fibre length wound on the cable, metres.
    pub wound_length: f64,
    /// Cable length, metres.
    pub cable_length: f64,
}

impl FiberSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.refractive_index > 1.0) {
            return Err(Error::invalid("refractive index must exceed 1"));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::invalid("wavelength must be positive"));
        }
        if !(self.cable_length > 0.0 && self.wound_length >= self.cable_length) {
            return Err(Error::invalid("need wound length >= cable length > 0"));
        }
        Ok(())
    }

    /// Propagation constant `2 pi n / lambda`.
    pub fn propagation_constant(&self) -> f64 {
        2.0 * PI * self.refractive_index / self.wavelength
    }
}

/// Thick-walled cylinder radial displacement at the outer radius, metres.
pub fn mandrel_radial_displacement(spec: &MandrelSpec) -> Result<f64> {
    spec.validate()?;
    let (a, r) = (spec.inner_radius, spec.outer_radius);
    let (p1, p2) = (spec.internal_pressure, spec.external_pressure);
    let (nu, e) = (spec.poisson_ratio, spec.youngs_modulus);
    let d = r * r - a * a;
    let radial = (1.0 - nu) / e * (a * a * p1 - r * r * p2) / d * r;
    let shear = (1.0 + nu) / e * (a * a * r * r * (p1 - p2)) / d / r;
    Ok(radial + shear)
}

/// Sensitivity from the round-trip phase change, dB re 1 rad/(uPa m).
pub fn sensitivity_from_phase(delta_phi: f64, pressure_pa: f64, cable_length: f64) -> Result<f64> {
    if !(pressure_pa > 0.0) {
        return Err(Error::invalid("pressure must be positive"));
    }
    if !(cable_length > 0.0) {
        return Err(Error::invalid("cable length must be positive"));
    }
    let ratio = delta_phi.abs() / (pressure_pa * UPA_PER_PA * cable_length);
    if ratio == 0.0 {
        return Err(Error::UndefinedSensitivity("zero phase change".into()));
    }
    Ok(20.0 * ratio.log10())
}

/// Sensitivity from a fibre elongation `delta_l` (metres): the phase change
/// is `2 * (2 pi n / lambda) * delta_l`.
pub fn sensitivity_from_elongation(fiber: &FiberSpec, delta_l: f64, pressure_pa: f64) -> Result<f64> {
    fiber.validate()?;
    sensitivity_from_phase(2.0 * fiber.propagation_constant() * delta_l, pressure_pa, fiber.cable_length)
}

/// Sensitivity with the elongation written as `(delta_r / r) * L`.
pub fn pressure_sensitivity(fiber: &FiberSpec, delta_r_over_r: f64, pressure_pa: f64) -> Result<f64> {
    fiber.validate()?;
    if !(pressure_pa > 0.0) {
        return Err(Error::invalid("pressure must be positive"));
    }
    let x = 4.0 * PI * fiber.refractive_index / (fiber.wavelength * pressure_pa * UPA_PER_PA * fiber.cable_length)
        * delta_r_over_r.abs()
        * fiber.wound_length;
    if x == 0.0 {
        return Err(Error::UndefinedSensitivity("zero radial strain".into()));
    }
    Ok(20.0 * x.log10())
}

/// Mandrel and fibre together, driven by the pressure difference
/// `|p2 - p1|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CableConfig {
    pub mandrel: MandrelSpec,
    pub fiber: FiberSpec,
}

impl CableConfig {
    pub fn sensitivity_db(&self) -> Result<f64> {
        let dr = mandrel_radial_displacement(&self.mandrel)?;
        let pressure = (self.mandrel.external_pressure - self.mandrel.internal_pressure).abs();
        if pressure == 0.0 {
            return Err(Error::UndefinedSensitivity("no pressure difference across the mandrel".into()));
        }
        pressure_sensitivity(&self.fiber, dr / self.mandrel.outer_radius, pressure)
    }
}
