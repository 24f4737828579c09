//! The singly-excited collective spin wave: per-atom excitation weights and
//! phases, and their evolution along atomic trajectories.

use std::f64::consts::PI;

use nalgebra::{Complex, Vector2, Vector3};

use crate::ensemble::AtomState;
use crate::error::{Error, Result};
use crate::lightshift::ShiftField;
use crate::propagate::{advance_atom, check_timestep, substeps, StepContext, TrajectorySet};

/// A Gaussian light mode at its focus. `waist` is the field 1/e² radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSpec {
    pub center: Vector2<f64>,
    pub waist: f64,
    pub wavelength: f64,
}

impl ModeSpec {
    /// 130 µm diameter signal mode on the trap axis.
    pub fn signal() -> Self {
        ModeSpec { center: Vector2::zeros(), waist: 65e-6, wavelength: 780.241e-9 }
    }

    /// 550 µm diameter write/read mode.
    pub fn write() -> Self {
        ModeSpec { center: Vector2::zeros(), waist: 275e-6, wavelength: 780.241e-9 }
    }

    pub fn with_center(mut self, x: f64, y: f64) -> Self {
        self.center = Vector2::new(x, y);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.waist > 0.0 && self.waist.is_finite()) {
            return Err(Error::invalid("mode waist must be positive"));
        }
        if !(self.center.x.is_finite() && self.center.y.is_finite()) {
            return Err(Error::invalid("mode center must be finite"));
        }
        Ok(())
    }

    /// Field amplitude relative to the mode center.
    pub fn amplitude(&self, r: &Vector2<f64>) -> f64 {
        (-(r - self.center).norm_squared() / (self.waist * self.waist)).exp()
    }
}

/// Δk of the write/signal pair and the resulting spin-wave wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinWaveVector {
    pub delta_k: Vector3<f64>,
    /// `None` when Δk vanishes (infinite wavelength).
    pub wavelength: Option<f64>,
}

pub fn spinwave_wavevector(write_k: &Vector3<f64>, signal_k: &Vector3<f64>) -> Result<SpinWaveVector> {
    if !(write_k.iter().all(|v| v.is_finite()) && signal_k.iter().all(|v| v.is_finite())) {
        return Err(Error::invalid("wave vectors must be finite"));
    }
    let delta_k = write_k - signal_k;
    let norm = delta_k.norm();
    Ok(SpinWaveVector {
        delta_k,
        wavelength: (norm > 0.0).then(|| 2.0 * PI / norm),
    })
}

/// Wave vectors of co-propagating beams along +z whose frequencies differ by
/// `frequency_difference` (Hz): write at `write_wavelength`, signal shifted
/// down in frequency.
pub fn collinear_wavevectors(write_wavelength: f64, frequency_difference: f64, c: f64) -> (Vector3<f64>, Vector3<f64>) {
    let k_write = 2.0 * PI / write_wavelength;
    let k_signal = k_write - 2.0 * PI * frequency_difference / c;
    (Vector3::new(0.0, 0.0, k_write), Vector3::new(0.0, 0.0, k_signal))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinWaveRecord {
    /// Excitation amplitude per atom, normalized so Σ w² = 1.
    pub weights: Vec<f64>,
    /// φ₁: accumulated differential light-shift phase (rad).
    pub light_phase: Vec<f64>,
    /// φ₂ = Δk·(r(t) − r(0)) (rad).
    pub motional_phase: Vec<f64>,
    pub delta_k: Vector3<f64>,
    /// Atom positions when the spin wave was written.
    pub origin: Vec<Vector3<f64>>,
    pub creation_time: f64,
    /// Time the phases refer to.
    pub time: f64,
}

impl SpinWaveRecord {
    pub fn n_atoms(&self) -> usize {
        self.weights.len()
    }

    pub fn phase(&self, j: usize) -> f64 {
        self.light_phase[j] + self.motional_phase[j]
    }

    /// Squared weights, the excitation probability per atom.
    pub fn probabilities(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w * w).collect()
    }

    /// |Σ w_j² exp(iφ_j)|, the overlap of the evolved phase pattern with the written one.
    pub fn coherence(&self) -> f64 {
        weighted_coherence(&self.weights, (0..self.n_atoms()).map(|j| self.phase(j)))
    }

    pub fn light_coherence(&self) -> f64 {
        weighted_coherence(&self.weights, self.light_phase.iter().copied())
    }

    pub fn motional_coherence(&self) -> f64 {
        weighted_coherence(&self.weights, self.motional_phase.iter().copied())
    }

    /// Effective number of participating atoms, 1/Σ w⁴.
    pub fn participation(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w.powi(4)).sum::<f64>()
    }

    fn set_motional_phases(&mut self, positions: impl Iterator<Item = Vector3<f64>>) {
        for ((phase, origin), p) in self.motional_phase.iter_mut().zip(&self.origin).zip(positions) {
            *phase = self.delta_k.dot(&(p - origin));
        }
    }
}

fn weighted_coherence(weights: &[f64], phases: impl Iterator<Item = f64>) -> f64 {
    weights
        .iter()
        .zip(phases)
        .fold(Complex::new(0.0, 0.0), |acc, (w, p)| acc + Complex::from_polar(w * w, p))
        .norm()
        .min(1.0)
}

const EMPTY_MODE_THRESHOLD: f64 = 1e-30;

/// Writes a spin wave into `atoms` through the signal mode.
///
/// Raw weights are the signal-mode amplitude at each atom; the 550 µm write
/// beam is treated as uniform over the signal mode. Dead atoms get weight 0.
pub fn assign_excitation(atoms: &[AtomState], signal: &ModeSpec, delta_k: Vector3<f64>, time: f64) -> Result<SpinWaveRecord> {
    signal.validate()?;
    let raw: Vec<f64> = atoms
        .iter()
        .map(|a| if a.alive { signal.amplitude(&a.transverse()) } else { 0.0 })
        .collect();
    let max_weight = raw.iter().copied().fold(0.0, f64::max);
    if !(max_weight >= EMPTY_MODE_THRESHOLD) {
        return Err(Error::EmptyMode { max_weight });
    }
    let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
    let n = atoms.len();
    Ok(SpinWaveRecord {
        weights: raw.iter().map(|w| w / norm).collect(),
        light_phase: vec![0.0; n],
        motional_phase: vec![0.0; n],
        delta_k,
        origin: atoms.iter().map(|a| a.position).collect(),
        creation_time: time,
        time,
    })
}

/// Advances the phases along recorded trajectories that start at `record.time`.
pub fn evolve_phases(record: &SpinWaveRecord, trajectories: &TrajectorySet, field: &ShiftField) -> Result<SpinWaveRecord> {
    if trajectories.n_atoms() != record.n_atoms() {
        return Err(Error::invalid(format!(
            "trajectory set has {} atoms, spin wave has {}",
            trajectories.n_atoms(),
            record.n_atoms()
        )));
    }
    let mut out = record.clone();
    let dt = trajectories.sample_dt;
    for (phase, series) in out.light_phase.iter_mut().zip(&trajectories.positions) {
        for pair in series.windows(2) {
            *phase += 0.5 * (field.at(&pair[0]) + field.at(&pair[1])) * dt;
        }
    }
    out.set_motional_phases(trajectories.positions.iter().map(|s| *s.last().unwrap_or(&Vector3::zeros())));
    out.time += trajectories.duration();
    Ok(out)
}

/// Propagates `atoms` and the spin wave together from `record.time` to
/// `t_end`, integrating φ₁ at every sub-step without storing trajectories.
pub fn advance_spinwave(
    atoms: &mut [AtomState],
    record: &mut SpinWaveRecord,
    t_end: f64,
    dt: f64,
    field: &ShiftField,
    ctx: &StepContext,
) -> Result<()> {
    use rayon::prelude::*;

    if atoms.len() != record.n_atoms() {
        return Err(Error::invalid("atom count differs from the spin-wave record"));
    }
    if t_end < record.time {
        return Err(Error::invalid("cannot evolve a spin wave backwards"));
    }
    check_timestep(atoms, dt, ctx.trap, ctx.gravity)?;
    let (n, h) = substeps(t_end - record.time, dt);
    atoms
        .par_iter_mut()
        .zip(record.light_phase.par_iter_mut())
        .try_for_each(|(atom, phase)| {
            let mut prev = field.at(&atom.position);
            advance_atom(atom, n, h, ctx, |s, h| {
                let cur = field.at(&s.position);
                *phase += 0.5 * (prev + cur) * h;
                prev = cur;
            })
        })?;
    record.set_motional_phases(atoms.iter().map(|a| a.position));
    record.time = t_end;
    Ok(())
}
