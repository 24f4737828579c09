//! Ballistic propagation with gravity and trap walls.
//!
//! Hard walls are handled exactly: within a sub-step the free-fall parabola
//! is solved for the boundary contact, the atom is reflected there, and the
//! remainder of the sub-step continues from the contact point. Soft walls use
//! velocity-Verlet with the ring-potential force and keep a specular backstop
//! at the ring radius.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::constants::PhysicalConstants;
use crate::ensemble::AtomState;
use crate::error::{Error, Result};
use crate::trap::{TrapGeometry, WallModel};

/// Default integration sub-step (s).
pub const DEFAULT_DT: f64 = 5e-6;

const MAX_BOUNCES_PER_STEP: usize = 16;

/// Everything an atom needs to take a step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub trap: &'a TrapGeometry,
    pub gravity: f64,
    pub constants: &'a PhysicalConstants,
}

impl StepContext<'_> {
    fn acceleration(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let mut a = Vector3::new(0.0, -self.gravity, 0.0);
        if self.trap.has_soft_potential() {
            a -= self.trap.potential_gradient(p) * (self.constants.k_b / self.constants.m_atom);
        }
        a
    }

    fn uses_verlet(&self) -> bool {
        self.trap.has_soft_potential()
    }
}

/// Splits `duration` into equal sub-steps no longer than `dt`.
pub fn substeps(duration: f64, dt: f64) -> (usize, f64) {
    if duration <= 0.0 {
        return (0, 0.0);
    }
    let n = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    (n, duration / n as f64)
}

/// Rejects sub-steps that would let a fast atom skip over a wall feature.
///
/// The characteristic speed is 3σ of the ensemble's thermal spread plus the
/// speed gained falling across the trap.
pub fn check_timestep(atoms: &[AtomState], dt: f64, trap: &TrapGeometry, gravity: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Configuration(format!("dt must be positive, got {dt}")));
    }
    let alive: Vec<_> = atoms.iter().filter(|a| a.alive).collect();
    if alive.is_empty() {
        return Ok(());
    }
    let mean_v2 = alive.iter().map(|a| a.velocity.norm_squared()).sum::<f64>() / alive.len() as f64;
    let sigma = (mean_v2 / 3.0).sqrt();
    let speed = 3.0 * sigma + (4.0 * gravity.abs() * trap.radius).sqrt();
    if speed == 0.0 {
        return Ok(());
    }
    let crossing = trap.smallest_feature() / speed;
    if dt > crossing / 10.0 {
        return Err(Error::Configuration(format!(
            "dt = {dt:e} s exceeds 1/10 of the wall-crossing time {crossing:e} s"
        )));
    }
    Ok(())
}

pub fn propagate(
    atoms: &[AtomState],
    t_start: f64,
    t_end: f64,
    dt: f64,
    trap: &TrapGeometry,
    gravity: f64,
) -> Result<Vec<AtomState>> {
    propagate_with(atoms, t_start, t_end, dt, trap, gravity, &PhysicalConstants::default())
}

pub fn propagate_with(
    atoms: &[AtomState],
    t_start: f64,
    t_end: f64,
    dt: f64,
    trap: &TrapGeometry,
    gravity: f64,
    constants: &PhysicalConstants,
) -> Result<Vec<AtomState>> {
    if !(t_end >= t_start) {
        return Err(Error::invalid(format!("t_end {t_end} precedes t_start {t_start}")));
    }
    trap.validate()?;
    check_timestep(atoms, dt, trap, gravity)?;
    let ctx = StepContext { trap, gravity, constants };
    let (n, h) = substeps(t_end - t_start, dt);
    atoms
        .par_iter()
        .map(|atom| {
            let mut state = *atom;
            advance_atom(&mut state, n, h, &ctx, |_, _| {})?;
            Ok(state)
        })
        .collect()
}

/// Advances one atom by `steps` sub-steps of length `h`, calling `on_step`
/// with the new state and `h` after each one. Dead atoms are left alone.
pub fn advance_atom<F>(
    state: &mut AtomState,
    steps: usize,
    h: f64,
    ctx: &StepContext,
    mut on_step: F,
) -> Result<()>
where
    F: FnMut(&AtomState, f64),
{
    if !state.alive {
        return Ok(());
    }
    if ctx.uses_verlet() {
        let mut accel = ctx.acceleration(&state.position);
        for _ in 0..steps {
            accel = verlet_step(state, h, accel, ctx)?;
            on_step(state, h);
        }
    } else {
        for _ in 0..steps {
            ballistic_step(state, h, ctx)?;
            on_step(state, h);
        }
    }
    Ok(())
}

fn drift(state: &AtomState, tau: f64, gravity: f64) -> AtomState {
    let a = Vector3::new(0.0, -gravity, 0.0);
    AtomState {
        position: state.position + state.velocity * tau + a * (0.5 * tau * tau),
        velocity: state.velocity + a * tau,
        alive: state.alive,
    }
}

fn radial_excess(state: &AtomState, radius: f64) -> f64 {
    state.position.x * state.position.x + state.position.y * state.position.y - radius * radius
}

fn ballistic_step(state: &mut AtomState, h: f64, ctx: &StepContext) -> Result<()> {
    let trap = ctx.trap;
    let half = trap.half_length();
    let mut remaining = h;
    for _ in 0..MAX_BOUNCES_PER_STEP {
        let end = drift(state, remaining, ctx.gravity);
        let out_radial = radial_excess(&end, trap.radius) > 0.0;
        let out_axial = end.position.z.abs() > half;
        if !out_radial && !out_axial {
            *state = end;
            return Ok(());
        }
        let mut contact = remaining;
        if out_radial {
            contact = contact.min(cylinder_contact(state, remaining, trap.radius, ctx.gravity));
        }
        if out_axial && state.velocity.z != 0.0 {
            let wall = half * end.position.z.signum();
            let tau = ((wall - state.position.z) / state.velocity.z).clamp(0.0, remaining);
            contact = contact.min(tau);
        }
        *state = drift(state, contact, ctx.gravity);
        *state = reflect_specular(state, trap, state.velocity.norm() * h)?;
        remaining -= contact;
        if remaining <= 0.0 {
            return Ok(());
        }
    }
    // Chattering against the floor: finish the step and project back.
    let end = drift(state, remaining, ctx.gravity);
    *state = reflect_specular(&end, trap, f64::INFINITY)?;
    Ok(())
}

/// Earliest time in `[0, span]` at which the free-fall path leaves the cylinder,
/// given that it is outside at `span`.
fn cylinder_contact(state: &AtomState, span: f64, radius: f64, gravity: f64) -> f64 {
    if radial_excess(state, radius) >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, span);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if radial_excess(&drift(state, mid, gravity), radius) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

fn verlet_step(
    state: &mut AtomState,
    h: f64,
    accel: Vector3<f64>,
    ctx: &StepContext,
) -> Result<Vector3<f64>> {
    let v_half = state.velocity + accel * (0.5 * h);
    let mut next = AtomState {
        position: state.position + v_half * h,
        velocity: v_half,
        alive: true,
    };
    let trap = ctx.trap;
    let backstop = match trap.wall_model {
        WallModel::Soft(ring) => ring.ring_radius,
        WallModel::Hard => trap.radius,
    };
    let outside = radial_excess(&next, backstop) > 0.0 || next.position.z.abs() > trap.half_length();
    if outside {
        let limit = v_half.norm() * h * 2.0;
        let backstop_trap = TrapGeometry { radius: backstop, ..*trap };
        next = reflect_specular(&next, &backstop_trap, limit)?;
    }
    let new_accel = ctx.acceleration(&next.position);
    next.velocity += new_accel * (0.5 * h);
    *state = next;
    Ok(new_accel)
}

/// Reflects an atom that sits on or just beyond a trap boundary.
///
/// The position is projected back onto the boundary and the velocity
/// component along the outward normal is reversed, so the speed is unchanged.
/// `max_overshoot` bounds how far outside the atom may be; anything further
/// means a sub-step was skipped.
pub fn reflect_specular(state: &AtomState, trap: &TrapGeometry, max_overshoot: f64) -> Result<AtomState> {
    let mut out = *state;
    let tol = 1e-12 * trap.radius.max(trap.length);
    let allowed = max_overshoot + tol;

    let r = out.radial_distance();
    if r >= trap.radius - tol {
        if r - trap.radius > allowed {
            return Err(Error::Consistency(format!(
                "atom {:e} m beyond the cylinder wall",
                r - trap.radius
            )));
        }
        let nx = out.position.x / r;
        let ny = out.position.y / r;
        if r > trap.radius {
            let s = trap.radius / r;
            out.position.x *= s;
            out.position.y *= s;
        }
        let vn = out.velocity.x * nx + out.velocity.y * ny;
        if vn > 0.0 {
            out.velocity.x -= 2.0 * vn * nx;
            out.velocity.y -= 2.0 * vn * ny;
        }
    }

    let half = trap.half_length();
    let z = out.position.z;
    if z.abs() >= half - tol {
        if z.abs() - half > allowed {
            return Err(Error::Consistency(format!(
                "atom {:e} m beyond the end cap",
                z.abs() - half
            )));
        }
        let sign = z.signum();
        if z.abs() > half {
            out.position.z = sign * half;
        }
        if out.velocity.z * sign > 0.0 {
            out.velocity.z = -out.velocity.z;
        }
    }
    Ok(out)
}

/// Positions of every atom sampled at a uniform interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub sample_dt: f64,
    /// `positions[atom][sample]`, sample 0 being the start.
    pub positions: Vec<Vec<Vector3<f64>>>,
}

impl TrajectorySet {
    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn n_samples(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn duration(&self) -> f64 {
        self.n_samples().saturating_sub(1) as f64 * self.sample_dt
    }
}

/// Propagates for `duration` and records every atom's position every
/// `sample_dt`. `sample_dt` is split into integration sub-steps of at most `dt`.
pub fn record_trajectories(
    atoms: &[AtomState],
    duration: f64,
    sample_dt: f64,
    dt: f64,
    ctx: &StepContext,
) -> Result<TrajectorySet> {
    if !(sample_dt > 0.0 && duration >= 0.0) {
        return Err(Error::invalid("sample_dt must be positive and duration non-negative"));
    }
    check_timestep(atoms, dt, ctx.trap, ctx.gravity)?;
    let samples = (duration / sample_dt).round() as usize;
    let (n, h) = substeps(sample_dt, dt);
    let positions = atoms
        .par_iter()
        .map(|atom| {
            let mut state = *atom;
            let mut series = Vec::with_capacity(samples + 1);
            series.push(state.position);
            for _ in 0..samples {
                advance_atom(&mut state, n, h, ctx, |_, _| {})?;
                series.push(state.position);
            }
            Ok(series)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectorySet { sample_dt, positions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trap::RingPotential;
    use rand::{Rng, SeedableRng};

    fn hard() -> TrapGeometry {
        TrapGeometry::default()
    }

    #[test]
    fn free_fall_from_rest() {
        let atom = AtomState::at_rest(Vector3::zeros());
        let out = propagate(&[atom], 0.0, 2e-3, DEFAULT_DT, &hard(), 9.81).unwrap();
        let p = out[0].position;
        assert!((p.y + 0.5 * 9.81 * 4e-6).abs() < 1e-12, "{}", p.y);
        assert!((p.y + 19.6e-6).abs() < 0.05e-6);
        assert_eq!(p.x, 0.0);
        assert_eq!(p.z, 0.0);
    }

    #[test]
    fn zero_duration_is_identity() {
        let atom = AtomState::new(Vector3::new(1e-6, 2e-6, 3e-6), Vector3::new(0.01, 0.0, 0.0));
        let out = propagate(&[atom], 1.0, 1.0, DEFAULT_DT, &hard(), 9.81).unwrap();
        assert_eq!(out[0], atom);
    }

    #[test]
    fn rejects_backwards_time_and_huge_steps() {
        let atom = AtomState::new(Vector3::zeros(), Vector3::new(0.05, 0.0, 0.0));
        assert!(propagate(&[atom], 1.0, 0.0, DEFAULT_DT, &hard(), 9.81).is_err());
        let err = propagate(&[atom], 0.0, 1e-3, 1e-3, &hard(), 9.81).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn head_on_wall_hit_reverses_radial_velocity() {
        let v = 0.05;
        let atom = AtomState::new(Vector3::new(90e-6, 0.0, 0.0), Vector3::new(v, 0.0, 0.01));
        // Gravity off so the bounce is purely radial.
        let out = propagate(&[atom], 0.0, 0.2e-3, DEFAULT_DT, &hard(), 0.0).unwrap();
        assert_eq!(out[0].velocity.x, -v);
        assert_eq!(out[0].velocity.y, 0.0);
        assert_eq!(out[0].velocity.z, 0.01);
        // 5 µm out, 5 µm back in, then 0 µm further: x = 95 - (0.05*0.2e-3 - 5e-6).
        assert!((out[0].position.x - 90e-6).abs() < 1e-12);
    }

    #[test]
    fn dead_atoms_do_not_move() {
        let mut atom = AtomState::new(Vector3::zeros(), Vector3::new(0.01, 0.0, 0.0));
        atom.alive = false;
        let out = propagate(&[atom], 0.0, 1e-3, DEFAULT_DT, &hard(), 9.81).unwrap();
        assert_eq!(out[0], atom);
    }

    #[test]
    fn normal_incidence_flips_radial_velocity() {
        let s = AtomState::new(Vector3::new(0.0, -95e-6, 0.0), Vector3::new(0.0, -0.03, 0.0));
        let r = reflect_specular(&s, &hard(), 1e-9).unwrap();
        assert_eq!(r.velocity, Vector3::new(0.0, 0.03, 0.0));
    }

    #[test]
    fn grazing_incidence_is_unchanged() {
        let s = AtomState::new(Vector3::new(95e-6, 0.0, 0.0), Vector3::new(0.0, 0.04, 0.02));
        let r = reflect_specular(&s, &hard(), 1e-9).unwrap();
        assert_eq!(r.velocity, s.velocity);
    }

    #[test]
    fn end_cap_reflection() {
        let s = AtomState::new(Vector3::new(0.0, 0.0, 1.5e-3 + 1e-9), Vector3::new(0.01, 0.0, 0.02));
        let r = reflect_specular(&s, &hard(), 1e-7).unwrap();
        assert_eq!(r.position.z, 1.5e-3);
        assert_eq!(r.velocity, Vector3::new(0.01, 0.0, -0.02));
    }

    #[test]
    fn far_outside_is_a_consistency_error() {
        let s = AtomState::new(Vector3::new(120e-6, 0.0, 0.0), Vector3::new(0.01, 0.0, 0.0));
        assert!(matches!(
            reflect_specular(&s, &hard(), 1e-7),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn random_incidence_preserves_speed() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let trap = hard();
        for _ in 0..10_000 {
            let phi = rng.random::<f64>() * std::f64::consts::TAU;
            let over = rng.random::<f64>() * 1e-7;
            let r = trap.radius + over;
            let p = Vector3::new(r * phi.cos(), r * phi.sin(), (rng.random::<f64>() - 0.5) * 2.9e-3);
            let v = Vector3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            ) * 0.2;
            let s = AtomState::new(p, v);
            let out = reflect_specular(&s, &trap, 1e-6).unwrap();
            let before = v.norm();
            let after = out.velocity.norm();
            assert!((before - after).abs() <= 4.0 * f64::EPSILON * before);
            assert!(out.radial_distance() <= trap.radius * (1.0 + 1e-15));
            let n = Vector3::new(out.position.x, out.position.y, 0.0).normalize();
            assert!(out.velocity.dot(&n) <= 1e-15);
        }
    }

    #[test]
    fn hard_wall_energy_is_conserved() {
        let c = PhysicalConstants::default();
        let trap = hard();
        let atoms = crate::ensemble::sample_thermal_ensemble(50, &trap, 15e-6, 9.81, 8).unwrap();
        let out = propagate(&atoms, 0.0, 50e-3, DEFAULT_DT, &trap, 9.81).unwrap();
        for (a, b) in atoms.iter().zip(&out) {
            let e0 = a.mechanical_energy(&trap, 9.81, &c);
            let e1 = b.mechanical_energy(&trap, 9.81, &c);
            let scale = c.k_b * 15e-6;
            assert!((e1 - e0).abs() < 1e-9 * scale, "{e0} -> {e1}");
            assert!(b.radial_distance() <= trap.radius * (1.0 + 1e-12));
        }
    }

    #[test]
    fn soft_wall_confines_cold_atoms() {
        let ring = RingPotential::default();
        let trap = TrapGeometry::soft(ring);
        let atoms = crate::ensemble::sample_thermal_ensemble(200, &trap, 15e-6, 9.81, 4).unwrap();
        let out = propagate(&atoms, 0.0, 20e-3, DEFAULT_DT, &trap, 9.81).unwrap();
        assert!(out.iter().all(|a| a.radial_distance() <= ring.ring_radius * (1.0 + 1e-12)));
    }

    #[test]
    fn recorded_trajectory_matches_propagation() {
        let c = PhysicalConstants::default();
        let trap = hard();
        let ctx = StepContext { trap: &trap, gravity: 9.81, constants: &c };
        let atoms = crate::ensemble::sample_thermal_ensemble(10, &trap, 15e-6, 9.81, 1).unwrap();
        let set = record_trajectories(&atoms, 1e-3, 0.1e-3, DEFAULT_DT, &ctx).unwrap();
        assert_eq!(set.n_samples(), 11);
        let direct = propagate(&atoms, 0.0, 0.1e-3, DEFAULT_DT, &trap, 9.81).unwrap();
        for (series, d) in set.positions.iter().zip(&direct) {
            assert_eq!(series[1], d.position);
        }
    }

    #[test]
    fn substep_split() {
        assert_eq!(substeps(1e-3, 5e-6).0, 200);
        assert_eq!(substeps(0.4e-3, 5e-6).0, 80);
        let (n, h) = substeps(1.001e-3, 5e-6);
        assert_eq!(n, 201);
        assert!(h <= 5e-6);
    }
}
