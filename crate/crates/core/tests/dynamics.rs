use memsim_core::constants::PhysicalConstants;
use memsim_core::ensemble::{sample_ensemble, SamplingSpec, SpatialDistribution};
use memsim_core::lightshift::{simulate_coherence, CoherenceParams, ShiftField};
use memsim_core::propagate::{propagate, StepContext};
use memsim_core::spinwave::{advance_spinwave, assign_excitation, collinear_wavevectors, ModeSpec};
use memsim_core::trap::{RingPotential, TrapGeometry};
use nalgebra::Vector3;
use proptest::prelude::*;

fn thermal(n: usize, trap: &TrapGeometry, seed: u64) -> Vec<memsim_core::AtomState> {
    let spec = SamplingSpec { n, temperature: 15e-6, gravity: 9.81, seed, distribution: SpatialDistribution::Thermal };
    sample_ensemble(&spec, trap, &PhysicalConstants::default()).unwrap()
}

/// Energy measured from the lowest point of the cylinder, J.
fn energy_above_floor(a: &memsim_core::AtomState, trap: &TrapGeometry) -> f64 {
    let c = PhysicalConstants::default();
    a.mechanical_energy(trap, 9.81, &c) + c.m_atom * 9.81 * trap.radius
}

#[test]
fn soft_wall_energy_drift_over_100_ms() {
    let trap = TrapGeometry::soft(RingPotential::default());
    let atoms = thermal(300, &trap, 21);
    let end = propagate(&atoms, 0.0, 100e-3, 5e-6, &trap, 9.81).unwrap();
    let e0: f64 = atoms.iter().map(|a| energy_above_floor(a, &trap)).sum();
    let drift: f64 = atoms
        .iter()
        .zip(&end)
        .map(|(a, b)| (energy_above_floor(b, &trap) - energy_above_floor(a, &trap)).abs())
        .sum();
    assert!(drift / e0 < 1e-3, "relative drift {}", drift / e0);
}

#[test]
fn soft_wall_orbit_converges_with_step() {
    // The same atoms at dt and dt/4 agree far better than the trap size.
    let trap = TrapGeometry::soft(RingPotential::default());
    let atoms = thermal(50, &trap, 4);
    let a = propagate(&atoms, 0.0, 2e-3, 5e-6, &trap, 9.81).unwrap();
    let b = propagate(&atoms, 0.0, 2e-3, 1.25e-6, &trap, 9.81).unwrap();
    let worst = a.iter().zip(&b).map(|(x, y)| (x.position - y.position).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn hard_wall_energy_is_exact() {
    let trap = TrapGeometry::default();
    let atoms = thermal(300, &trap, 8);
    let end = propagate(&atoms, 0.0, 100e-3, 10e-6, &trap, 9.81).unwrap();
    let kt = PhysicalConstants::default().k_b * 15e-6;
    for (a, b) in atoms.iter().zip(&end) {
        let d = energy_above_floor(b, &trap) - energy_above_floor(a, &trap);
        assert!(d.abs() < 1e-8 * kt, "{}", d / kt);
        assert!(b.radial_distance() <= trap.radius * (1.0 + 1e-9));
        assert!(b.position.z.abs() <= trap.half_length() * (1.0 + 1e-9));
    }
}

#[test]
fn coherence_starts_at_one_and_stays_bounded() {
    let params = CoherenceParams { n_atoms: 2000, t_max: 3e-3, ..Default::default() };
    let curve = simulate_coherence(&RingPotential::default(), &params, &PhysicalConstants::default()).unwrap();
    assert_eq!(curve.coherence[0], 1.0);
    assert!(curve.coherence.iter().all(|c| (0.0..=1.0).contains(c)));
    assert!(curve.coherence.last().unwrap() < &0.9);
}

/// |<w^2 exp(i dk (z_t - z_0))>| for the collinear write/read geometry.
fn axial_coherence(times: &[f64]) -> Vec<f64> {
    let c = PhysicalConstants::default();
    let trap = TrapGeometry::default();
    let mut atoms = thermal(20_000, &trap, 30);
    let (kw, ks) = collinear_wavevectors(c.lambda_d2, c.nu_hf, c.c);
    let mut record = assign_excitation(&atoms, &ModeSpec::signal(), kw - ks, 0.0).unwrap();
    let ctx = StepContext { trap: &trap, gravity: 9.81, constants: &c };
    times
        .iter()
        .map(|&t| {
            advance_spinwave(&mut atoms, &mut record, t, 10e-6, &ShiftField::Zero, &ctx).unwrap();
            record.motional_coherence()
        })
        .collect()
}

#[test]
fn axial_phase_coherence_independent_estimate() {
    // For ballistic axial motion the w^2-weighted mean of exp(i k v t) is the
    // Gaussian characteristic function exp(-(k sigma_v t)^2 / 2) until the
    // atoms reach the end caps; at 2 ms almost none have.
    let c = PhysicalConstants::default();
    let k = 2.0 * std::f64::consts::PI * c.nu_hf / c.c;
    let sigma_v = c.thermal_sigma(15e-6);
    let t = 2e-3;
    let expected = (-(k * sigma_v * t).powi(2) / 2.0).exp();
    let got = axial_coherence(&[t])[0];
    assert!((got - expected).abs() < 2e-4, "{got} vs {expected}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn weights_stay_normalized(seed in 0u64..1000, x in -40e-6f64..40e-6, y in -40e-6f64..40e-6, t in 0.0f64..2e-3) {
        let c = PhysicalConstants::default();
        let trap = TrapGeometry::soft(RingPotential::default());
        let mut atoms = thermal(300, &trap, seed);
        let mut record = assign_excitation(&atoms, &ModeSpec::signal().with_center(x, y), Vector3::zeros(), 0.0).unwrap();
        let field = ShiftField::from_trap(RingPotential::default(), &c, c.detuning_from_d2(775e-9)).unwrap();
        let ctx = StepContext { trap: &trap, gravity: 9.81, constants: &c };
        advance_spinwave(&mut atoms, &mut record, t, 5e-6, &field, &ctx).unwrap();
        let s: f64 = record.probabilities().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        let coh = record.coherence();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&coh));
    }
}

#[test]
fn single_atom_soft_wall_against_fine_reference() {
    let c = PhysicalConstants::default();
    let trap = TrapGeometry::soft(RingPotential::default());
    let atom = memsim_core::AtomState::new(Vector3::new(20e-6, -10e-6, 0.0), Vector3::new(0.05, 0.03, 0.01));
    let energy = |a: &memsim_core::AtomState| a.mechanical_energy(&trap, 0.0, &c);
    let e0 = energy(&atom);
    let coarse = propagate(&[atom], 0.0, 100e-3, 5e-6, &trap, 0.0).unwrap()[0];
    let fine = propagate(&[atom], 0.0, 100e-3, 5e-8, &trap, 0.0).unwrap()[0];
    assert!(((energy(&coarse) - e0) / e0).abs() < 1e-3, "{}", (energy(&coarse) - e0) / e0);
    assert!(((energy(&fine) - e0) / e0).abs() < 1e-5);
    assert!(((energy(&coarse) - energy(&fine)) / e0).abs() < 1e-3);
}
