//! Differential light shift of the clock transition, its compensation, and
//! the ensemble dephasing it causes.

use nalgebra::{Complex, Vector3};
use rayon::prelude::*;

use crate::constants::{PhysicalConstants, D2_LINEWIDTH_HZ};
use crate::ensemble::{sample_ensemble, SamplingSpec, SpatialDistribution};
use crate::error::{Error, Result};
use crate::propagate::{advance_atom, check_timestep, substeps, StepContext, TrajectorySet};
use crate::trap::{RingPotential, TrapGeometry};

/// Differential shift δω = (U/ħ)(ω_hf/Δ) (rad/s) for a light shift `u_joule`
/// produced by light detuned by `detuning` (rad/s) from the D2 line.
pub fn differential_shift(u_joule: f64, constants: &PhysicalConstants, detuning: f64) -> Result<f64> {
    if detuning == 0.0 || !detuning.is_finite() {
        return Err(Error::Singular(format!("trap detuning must be non-zero, got {detuning}")));
    }
    Ok(u_joule / constants.hbar * constants.omega_hf() / detuning)
}

/// Spatial map of the differential shift δω(r) (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftField {
    Zero,
    Uniform(f64),
    /// δω = `coefficient` × U_ring(r), with U in K.
    Ring { ring: RingPotential, coefficient: f64 },
}

impl ShiftField {
    /// Field of the hollow-beam trap at the given detuning from D2.
    pub fn from_trap(ring: RingPotential, constants: &PhysicalConstants, detuning: f64) -> Result<Self> {
        let coefficient = differential_shift(constants.k_b, constants, detuning)?;
        Ok(ShiftField::Ring { ring, coefficient })
    }

    /// The field left over when a fraction `epsilon` of the shift is uncompensated.
    pub fn scaled(self, epsilon: f64) -> Self {
        match self {
            ShiftField::Zero => ShiftField::Zero,
            ShiftField::Uniform(w) => ShiftField::Uniform(w * epsilon),
            ShiftField::Ring { ring, coefficient } => ShiftField::Ring { ring, coefficient: coefficient * epsilon },
        }
    }

    pub fn at(&self, p: &Vector3<f64>) -> f64 {
        match self {
            ShiftField::Zero => 0.0,
            ShiftField::Uniform(w) => *w,
            ShiftField::Ring { ring, coefficient } => coefficient * ring.at_radius(p.x.hypot(p.y)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensationSpec {
    /// W
    pub trap_power: f64,
    /// m
    pub trap_wavelength: f64,
    /// W, the power actually applied.
    pub comp_power: f64,
    /// Uncompensated fraction of the differential shift.
    pub residual_fraction: f64,
}

impl Default for CompensationSpec {
    fn default() -> Self {
        CompensationSpec {
            trap_power: 1.9,
            trap_wavelength: 775e-9,
            comp_power: 3.5e-6,
            residual_fraction: 0.01,
        }
    }
}

/// Compensation power that cancels the trap's differential shift.
///
/// The compensation beam sits midway between the two ground hyperfine
/// components of D2 (detuning ±ω_hf/2) and shares the trap's spatial mode, so
/// the cancellation condition is `P_comp = P_trap (ω_hf / 2Δ)²`. Only the D2
/// line is kept; the D1 contribution at 775 nm changes the result by ~4%.
pub fn optimal_compensation_power(spec: &CompensationSpec, constants: &PhysicalConstants) -> Result<f64> {
    if !(spec.trap_power >= 0.0 && spec.trap_power.is_finite()) {
        return Err(Error::invalid("trap power must be finite and non-negative"));
    }
    if !(spec.trap_wavelength > 0.0 && spec.trap_wavelength.is_finite()) {
        return Err(Error::invalid("trap wavelength must be positive"));
    }
    let detuning = constants.detuning_from_d2(spec.trap_wavelength);
    let linewidth = 2.0 * std::f64::consts::PI * D2_LINEWIDTH_HZ;
    if detuning.abs() < 10.0 * linewidth {
        return Err(Error::ModelInvalid(format!(
            "trap light at {:.4} nm is within 10 linewidths of D2",
            spec.trap_wavelength * 1e9
        )));
    }
    if detuning < 0.0 {
        return Err(Error::ModelInvalid(format!(
            "trap light at {:.4} nm is red of D2; the model needs a blue-detuned trap",
            spec.trap_wavelength * 1e9
        )));
    }
    let ratio = constants.omega_hf() / (2.0 * detuning);
    Ok(spec.trap_power * ratio * ratio)
}

/// Dephasing time left after compensation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lifetime {
    Finite(f64),
    /// Perfect compensation.
    Unbounded,
}

impl Lifetime {
    pub fn seconds(&self) -> Option<f64> {
        match self {
            Lifetime::Finite(t) => Some(*t),
            Lifetime::Unbounded => None,
        }
    }
}

/// The residual shift is `epsilon` times the uncompensated one, so the
/// dephasing time grows as `1/epsilon`.
pub fn residual_lifetime(tau_uncompensated: f64, epsilon: f64) -> Result<Lifetime> {
    if !(tau_uncompensated > 0.0 && tau_uncompensated.is_finite()) {
        return Err(Error::invalid("uncompensated lifetime must be positive"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("residual fraction {epsilon} outside [0, 1]")));
    }
    if epsilon == 0.0 {
        return Ok(Lifetime::Unbounded);
    }
    Ok(Lifetime::Finite(tau_uncompensated / epsilon))
}

/// |⟨exp(iφ_j)⟩| for a set of phases, summed in index order.
pub fn phase_coherence(phases: &[f64]) -> f64 {
    if phases.is_empty() {
        return 0.0;
    }
    let sum = phases
        .iter()
        .fold(Complex::new(0.0, 0.0), |acc, &p| acc + Complex::from_polar(1.0, p));
    (sum / phases.len() as f64).norm()
}

/// Ensemble coherence C(t) = |⟨exp(iφ₁,j(t))⟩| along recorded trajectories,
/// with φ₁,j(t) = ∫₀ᵗ δω(r_j) dt' by the trapezoidal rule. `times` must lie
/// within the recorded span; values between samples are interpolated on the
/// accumulated phase.
pub fn ensemble_coherence(trajectories: &TrajectorySet, field: &ShiftField, times: &[f64]) -> Result<Vec<f64>> {
    if trajectories.n_atoms() == 0 {
        return Err(Error::invalid("empty ensemble"));
    }
    let span = trajectories.duration();
    if let Some(t) = times.iter().find(|&&t| t < 0.0 || t > span * (1.0 + 1e-9)) {
        return Err(Error::invalid(format!("time {t} outside the recorded span [0, {span}]")));
    }
    let dt = trajectories.sample_dt;
    let per_atom: Vec<Vec<f64>> = trajectories
        .positions
        .par_iter()
        .map(|series| {
            let mut cumulative = Vec::with_capacity(series.len());
            let mut phase = 0.0;
            let mut prev = field.at(&series[0]);
            cumulative.push(0.0);
            for p in &series[1..] {
                let cur = field.at(p);
                phase += 0.5 * (prev + cur) * dt;
                prev = cur;
                cumulative.push(phase);
            }
            times
                .iter()
                .map(|&t| {
                    let x = t / dt;
                    let i = (x.floor() as usize).min(cumulative.len() - 1);
                    let frac = x - i as f64;
                    if i + 1 < cumulative.len() && frac > 0.0 {
                        cumulative[i] + frac * (cumulative[i + 1] - cumulative[i])
                    } else {
                        cumulative[i]
                    }
                })
                .collect()
        })
        .collect();
    Ok(coherence_by_time(&per_atom, times.len()))
}

fn coherence_by_time(per_atom: &[Vec<f64>], n_times: usize) -> Vec<f64> {
    let n = per_atom.len() as f64;
    (0..n_times)
        .map(|k| {
            let sum = per_atom
                .iter()
                .fold(Complex::new(0.0, 0.0), |acc, phases| acc + Complex::from_polar(1.0, phases[k]));
            (sum / n).norm().min(1.0)
        })
        .collect()
}

/// Inputs for a microscopic dephasing run: a thermal ensemble in the soft ring trap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceParams {
    pub n_atoms: usize,
    /// K
    pub temperature: f64,
    /// m/s²
    pub gravity: f64,
    pub seed: u64,
    /// Integration sub-step (s).
    pub dt: f64,
    /// Interval at which C(t) is evaluated (s).
    pub sample_dt: f64,
    /// Longest time simulated (s).
    pub t_max: f64,
    /// m
    pub trap_length: f64,
    /// m
    pub trap_wavelength: f64,
    /// Uncompensated fraction ε of the shift.
    pub residual_fraction: f64,
    pub distribution: SpatialDistribution,
}

impl Default for CoherenceParams {
    fn default() -> Self {
        CoherenceParams {
            n_atoms: 10_000,
            temperature: 15e-6,
            gravity: 9.81,
            seed: 2011,
            dt: 5e-6,
            sample_dt: 10e-6,
            t_max: 8e-3,
            trap_length: 3e-3,
            trap_wavelength: 775e-9,
            residual_fraction: 1.0,
            distribution: SpatialDistribution::Thermal,
        }
    }
}

/// C(t) sampled every `sample_dt` from 0 to `t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceCurve {
    pub times: Vec<f64>,
    pub coherence: Vec<f64>,
}

impl CoherenceCurve {
    /// First time C(t) falls to 1/e, linearly interpolated; `None` if it never does.
    pub fn one_over_e_time(&self) -> Option<f64> {
        let target = (-1.0f64).exp();
        for k in 1..self.coherence.len() {
            let (c0, c1) = (self.coherence[k - 1], self.coherence[k]);
            if c1 <= target {
                let (t0, t1) = (self.times[k - 1], self.times[k]);
                if c0 == c1 {
                    return Some(t1);
                }
                return Some(t0 + (c0 - target) / (c0 - c1) * (t1 - t0));
            }
        }
        None
    }
}

/// Samples a thermal ensemble in the soft ring trap, propagates it, and
/// accumulates light-shift phases on the fly without storing trajectories.
pub fn simulate_coherence(
    ring: &RingPotential,
    params: &CoherenceParams,
    constants: &PhysicalConstants,
) -> Result<CoherenceCurve> {
    if !(params.sample_dt > 0.0 && params.t_max > 0.0) {
        return Err(Error::invalid("sample_dt and t_max must be positive"));
    }
    let trap = TrapGeometry {
        length: params.trap_length,
        ..TrapGeometry::soft(*ring)
    };
    let spec = SamplingSpec {
        n: params.n_atoms,
        temperature: params.temperature,
        gravity: params.gravity,
        seed: params.seed,
        distribution: params.distribution,
    };
    let atoms = sample_ensemble(&spec, &trap, constants)?;
    check_timestep(&atoms, params.dt, &trap, params.gravity)?;
    let detuning = constants.detuning_from_d2(params.trap_wavelength);
    let field = ShiftField::from_trap(*ring, constants, detuning)?.scaled(params.residual_fraction);
    let ctx = StepContext { trap: &trap, gravity: params.gravity, constants };
    let samples = (params.t_max / params.sample_dt).round() as usize;
    let (n, h) = substeps(params.sample_dt, params.dt);

    let per_atom: Vec<Vec<f64>> = atoms
        .par_iter()
        .map(|atom| {
            let mut state = *atom;
            let mut phase = 0.0;
            let mut prev = field.at(&state.position);
            let mut out = Vec::with_capacity(samples + 1);
            out.push(0.0);
            for _ in 0..samples {
                advance_atom(&mut state, n, h, &ctx, |s, h| {
                    let cur = field.at(&s.position);
                    phase += 0.5 * (prev + cur) * h;
                    prev = cur;
                })?;
                out.push(phase);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let times = (0..=samples).map(|k| k as f64 * params.sample_dt).collect();
    Ok(CoherenceCurve {
        times,
        coherence: coherence_by_time(&per_atom, samples + 1),
    })
}

/// 1/e dephasing time for a ring with the given wall width, or `INFINITY`
/// if C(t) stays above 1/e up to `t_max`.
pub fn dephasing_time(ring: &RingPotential, params: &CoherenceParams, constants: &PhysicalConstants) -> Result<f64> {
    Ok(simulate_coherence(ring, params, constants)?
        .one_over_e_time()
        .unwrap_or(f64::INFINITY))
}

pub const CALIBRATION_BRACKET: (f64, f64) = (10e-6, 80e-6);

/// Finds the wall width whose simulated 1/e time equals `target_tau`.
///
/// Bisection over [`CALIBRATION_BRACKET`]. τ must fall as the wall thickens;
/// this is checked at the bracket ends and at every midpoint, and a violation
/// is reported rather than silently bisected through.
pub fn calibrate_wall_width(
    target_tau: f64,
    ring: &RingPotential,
    params: &CoherenceParams,
    constants: &PhysicalConstants,
) -> Result<f64> {
    if !(target_tau > 0.0 && target_tau.is_finite()) {
        return Err(Error::invalid("target lifetime must be positive"));
    }
    let tolerance = 0.01;
    let tau_of = |w: f64| dephasing_time(&ring.with_wall_width(w), params, constants);
    let close = |tau: f64| (tau / target_tau - 1.0).abs() <= tolerance;

    let current = tau_of(ring.wall_width)?;
    if close(current) {
        return Ok(ring.wall_width);
    }

    let (mut lo, mut hi) = CALIBRATION_BRACKET;
    let (mut tau_lo, mut tau_hi) = (tau_of(lo)?, tau_of(hi)?);
    let failure = |tau_lo, tau_hi| Error::CalibrationFailure {
        target: target_tau,
        lo: CALIBRATION_BRACKET.0,
        hi: CALIBRATION_BRACKET.1,
        tau_lo,
        tau_hi,
    };
    if !(tau_lo > tau_hi) {
        return Err(Error::Numerical(format!(
            "dephasing time does not fall with wall width: tau({lo:e}) = {tau_lo:e}, tau({hi:e}) = {tau_hi:e}"
        )));
    }
    if !(tau_hi <= target_tau && target_tau <= tau_lo) {
        return Err(failure(tau_lo, tau_hi));
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let tau = tau_of(mid)?;
        if !(tau <= tau_lo && tau >= tau_hi) {
            return Err(Error::Numerical(format!(
                "dephasing time is not monotone in wall width near {mid:e} m"
            )));
        }
        if close(tau) {
            return Ok(mid);
        }
        if tau > target_tau {
            lo = mid;
            tau_lo = tau;
        } else {
            hi = mid;
            tau_hi = tau;
        }
        if hi - lo < 1e-9 {
            return Ok(0.5 * (lo + hi));
        }
    }
    Ok(0.5 * (lo + hi))
}
