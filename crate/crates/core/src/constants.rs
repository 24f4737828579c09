//! Physical constants for ⁸⁷Rb.
//!
//! Atomic data follow D. A. Steck, "Rubidium 87 D Line Data" (rev. 2.2.1).

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Unified atomic mass unit (kg), CODATA 2018.
const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Natural linewidth of the D2 transition, Γ/2π in Hz.
pub const D2_LINEWIDTH_HZ: f64 = 6.0666e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Atomic mass (kg).
    pub m_atom: f64,
    /// Boltzmann constant (J/K).
    pub k_b: f64,
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    /// Speed of light (m/s).
    pub c: f64,
    /// Gravitational acceleration (m/s²).
    pub g_earth: f64,
    /// Ground-state hyperfine splitting (Hz).
    pub nu_hf: f64,
    /// D2 line vacuum wavelength (m).
    pub lambda_d2: f64,
    /// D1 line vacuum wavelength (m).
    pub lambda_d1: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::rubidium87()
    }
}

impl PhysicalConstants {
    pub fn rubidium87() -> Self {
        PhysicalConstants {
            m_atom: 86.909_180_527 * ATOMIC_MASS_UNIT,
            k_b: 1.380_649e-23,
            hbar: 1.054_571_817e-34,
            c: 299_792_458.0,
            g_earth: 9.81,
            nu_hf: 6.834_682_610_904_29e9,
            lambda_d2: 780.241_209_686e-9,
            lambda_d1: 794.978_851_156e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m_atom", self.m_atom),
            ("k_b", self.k_b),
            ("hbar", self.hbar),
            ("c", self.c),
            ("g_earth", self.g_earth),
            ("nu_hf", self.nu_hf),
            ("lambda_d2", self.lambda_d2),
            ("lambda_d1", self.lambda_d1),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(())
    }

    /// Hyperfine splitting as an angular frequency (rad/s).
    pub fn omega_hf(&self) -> f64 {
        2.0 * PI * self.nu_hf
    }

    /// Angular detuning (rad/s) of light at `wavelength` from the D2 line.
    /// Positive means blue of the resonance.
    pub fn detuning_from_d2(&self, wavelength: f64) -> f64 {
        2.0 * PI * self.c * (1.0 / wavelength - 1.0 / self.lambda_d2)
    }

    /// Thermal velocity spread along one axis, √(k_B T / m).
    pub fn thermal_sigma(&self, temperature: f64) -> f64 {
        (self.k_b * temperature / self.m_atom).sqrt()
    }

    /// Barometric scale height k_B T / (m g).
    pub fn scale_height(&self, temperature: f64, gravity: f64) -> f64 {
        self.k_b * temperature / (self.m_atom * gravity)
    }
}
