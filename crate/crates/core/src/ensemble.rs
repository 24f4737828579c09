//! Atom states and thermal-ensemble sampling.

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::rng::atom_stream;
use crate::trap::TrapGeometry;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub alive: bool,
}

impl AtomState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        AtomState { position, velocity, alive: true }
    }

    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self::new(position, Vector3::zeros())
    }

    pub fn transverse(&self) -> Vector2<f64> {
        Vector2::new(self.position.x, self.position.y)
    }

    pub fn radial_distance(&self) -> f64 {
        self.position.x.hypot(self.position.y)
    }

    /// Kinetic plus gravitational plus optical potential energy (J).
    pub fn mechanical_energy(
        &self,
        trap: &TrapGeometry,
        gravity: f64,
        constants: &PhysicalConstants,
    ) -> f64 {
        let m = constants.m_atom;
        0.5 * m * self.velocity.norm_squared()
            + m * gravity * self.position.y
            + constants.k_b * trap.potential(&self.position)
    }
}

/// Initial spatial distribution inside the trap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpatialDistribution {
    /// Equilibrium density: uniform over the cylinder, weighted by the
    /// barometric factor and (for soft walls) the optical potential.
    #[default]
    Thermal,
    /// Uniform over the cylinder, no energy weighting.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingSpec {
    pub n: usize,
    /// K
    pub temperature: f64,
    /// m/s², along −y.
    pub gravity: f64,
    pub seed: u64,
    pub distribution: SpatialDistribution,
}

/// Draws `n` atoms in thermal equilibrium inside `trap`.
///
/// Velocities are Maxwell-Boltzmann at `temperature`. Positions are rejection
/// sampled from the cylinder with acceptance `exp(-(m g (y + R) + k_B U)/k_B T)`.
/// At `T = 0` all velocities vanish and positions fall back to uniform.
pub fn sample_thermal_ensemble(
    n: usize,
    trap: &TrapGeometry,
    temperature: f64,
    gravity: f64,
    seed: u64,
) -> Result<Vec<AtomState>> {
    let spec = SamplingSpec {
        n,
        temperature,
        gravity,
        seed,
        distribution: SpatialDistribution::Thermal,
    };
    sample_ensemble(&spec, trap, &PhysicalConstants::default())
}

pub fn sample_ensemble(
    spec: &SamplingSpec,
    trap: &TrapGeometry,
    constants: &PhysicalConstants,
) -> Result<Vec<AtomState>> {
    if spec.n == 0 {
        return Err(Error::invalid("atom count must be at least 1"));
    }
    if !spec.temperature.is_finite() || spec.temperature < 0.0 {
        return Err(Error::invalid(format!(
            "temperature must be finite and non-negative, got {}",
            spec.temperature
        )));
    }
    if !spec.gravity.is_finite() {
        return Err(Error::invalid("gravity must be finite"));
    }
    trap.validate()?;
    constants.validate()?;

    let sigma_v = constants.thermal_sigma(spec.temperature);
    let weighted = spec.distribution == SpatialDistribution::Thermal && spec.temperature > 0.0;
    // Inverse scale height in 1/m; the barometric factor is exp(-(y + R) * this).
    let inv_height = if weighted {
        constants.m_atom * spec.gravity / (constants.k_b * spec.temperature)
    } else {
        0.0
    };
    if inv_height < 0.0 {
        return Err(Error::invalid("gravity must be non-negative"));
    }

    let atoms = (0..spec.n)
        .into_par_iter()
        .map(|index| {
            let mut rng = atom_stream(spec.seed, index);
            let position = loop {
                let x = trap.radius * (2.0 * rng.random::<f64>() - 1.0);
                let y = trap.radius * (2.0 * rng.random::<f64>() - 1.0);
                let z = trap.length * (rng.random::<f64>() - 0.5);
                if x * x + y * y > trap.radius * trap.radius {
                    continue;
                }
                let p = Vector3::new(x, y, z);
                if !weighted {
                    break p;
                }
                let exponent =
                    (y + trap.radius) * inv_height + trap.potential(&p) / spec.temperature;
                if rng.random::<f64>() < (-exponent).exp() {
                    break p;
                }
            };
            let velocity = if sigma_v > 0.0 {
                let mut v = Vector3::zeros();
                for k in 0..3 {
                    let s: f64 = StandardNormal.sample(&mut rng);
                    v[k] = sigma_v * s;
                }
                v
            } else {
                Vector3::zeros()
            };
            AtomState::new(position, velocity)
        })
        .collect();
    Ok(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_temperature_has_no_motion() {
        let atoms = sample_thermal_ensemble(500, &TrapGeometry::default(), 0.0, 9.81, 1).unwrap();
        assert!(atoms.iter().all(|a| a.velocity == Vector3::zeros()));
    }

    #[test]
    fn rejects_bad_arguments() {
        let trap = TrapGeometry::default();
        assert!(sample_thermal_ensemble(0, &trap, 15e-6, 9.81, 1).is_err());
        assert!(sample_thermal_ensemble(10, &trap, f64::NAN, 9.81, 1).is_err());
        assert!(sample_thermal_ensemble(10, &trap, f64::INFINITY, 9.81, 1).is_err());
        assert!(sample_thermal_ensemble(10, &trap, -1e-6, 9.81, 1).is_err());
    }

    #[test]
    fn positions_lie_inside_the_cylinder() {
        let trap = TrapGeometry::default();
        let atoms = sample_thermal_ensemble(20_000, &trap, 15e-6, 9.81, 3).unwrap();
        for a in &atoms {
            assert!(a.alive);
            assert!(a.radial_distance() <= trap.radius);
            assert!(a.position.z.abs() <= trap.half_length());
        }
    }

    #[test]
    fn mean_speed_matches_maxwell_boltzmann() {
        let c = PhysicalConstants::default();
        let t = 15e-6;
        let atoms = sample_thermal_ensemble(100_000, &TrapGeometry::default(), t, 9.81, 11).unwrap();
        let mean = atoms.iter().map(|a| a.velocity.norm()).sum::<f64>() / atoms.len() as f64;
        let expected = (8.0 * c.k_b * t / (PI * c.m_atom)).sqrt();
        assert!((expected - 60.4e-3).abs() < 0.1e-3);
        assert!((mean / expected - 1.0).abs() < 0.01, "{mean} vs {expected}");
    }

    #[test]
    fn mean_speed_closed_form_agrees_with_quadrature() {
        // ∫ v f(v) dv over the 3-D Maxwell-Boltzmann speed density, midpoint rule.
        let c = PhysicalConstants::default();
        let t = 15e-6;
        let s2 = c.k_b * t / c.m_atom;
        let norm = (2.0 / PI).sqrt() / (s2 * s2.sqrt());
        let vmax = 20.0 * s2.sqrt();
        let steps = 200_000;
        let dv = vmax / steps as f64;
        let quad: f64 = (0..steps)
            .map(|i| {
                let v = (i as f64 + 0.5) * dv;
                v * norm * v * v * (-v * v / (2.0 * s2)).exp() * dv
            })
            .sum();
        let closed = (8.0 * c.k_b * t / (PI * c.m_atom)).sqrt();
        assert!((quad / closed - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gravity_free_cloud_is_vertically_centred() {
        let atoms = sample_thermal_ensemble(100_000, &TrapGeometry::default(), 15e-6, 0.0, 5).unwrap();
        let n = atoms.len() as f64;
        let mean = atoms.iter().map(|a| a.position.y).sum::<f64>() / n;
        let var = atoms.iter().map(|a| (a.position.y - mean).powi(2)).sum::<f64>() / n;
        let se = (var / n).sqrt();
        assert!(mean.abs() < 3.0 * se, "{mean} vs se {se}");
    }

    #[test]
    fn soft_walls_suppress_density_in_the_light() {
        let ring = crate::trap::RingPotential::default();
        let trap = TrapGeometry::soft(ring);
        let atoms = sample_thermal_ensemble(20_000, &trap, 15e-6, 9.81, 2).unwrap();
        let in_flank = atoms.iter().filter(|a| a.radial_distance() > 90e-6).count();
        let hard = sample_thermal_ensemble(20_000, &TrapGeometry::default(), 15e-6, 9.81, 2).unwrap();
        let hard_flank = hard.iter().filter(|a| a.radial_distance() > 90e-6).count();
        assert!(in_flank * 3 < hard_flank, "{in_flank} vs {hard_flank}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let trap = TrapGeometry::default();
        let a = sample_thermal_ensemble(1000, &trap, 15e-6, 9.81, 42).unwrap();
        let b = sample_thermal_ensemble(1000, &trap, 15e-6, 9.81, 42).unwrap();
        assert_eq!(a, b);
    }
}
