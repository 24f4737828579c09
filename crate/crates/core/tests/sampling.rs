use memsim_core::constants::PhysicalConstants;
use memsim_core::ensemble::{sample_ensemble, SamplingSpec, SpatialDistribution};
use memsim_core::trap::TrapGeometry;

fn spec(n: usize, gravity: f64, seed: u64) -> SamplingSpec {
    SamplingSpec { n, temperature: 15e-6, gravity, seed, distribution: SpatialDistribution::Thermal }
}

#[test]
fn velocity_second_moment_is_kt_over_m() {
    let c = PhysicalConstants::default();
    let atoms = sample_ensemble(&spec(200_000, 9.81, 5), &TrapGeometry::default(), &c).unwrap();
    let expected = c.k_b * 15e-6 / c.m_atom;
    let n = atoms.len() as f64;
    for axis in 0..3 {
        let m2 = atoms.iter().map(|a| a.velocity[axis].powi(2)).sum::<f64>() / n;
        // Standard error of a chi-square mean with one degree of freedom is sqrt(2/n).
        let se = expected * (2.0 / n).sqrt();
        assert!((m2 - expected).abs() < 4.0 * se, "axis {axis}: {m2} vs {expected}");
    }
}

#[test]
fn barometric_density_ratio() {
    // Counts in two thin horizontal strips 100 um apart near the axis, where
    // the chord length of the disk is nearly the same.
    let c = PhysicalConstants::default();
    let atoms = sample_ensemble(&spec(400_000, 9.81, 9), &TrapGeometry::default(), &c).unwrap();
    let strip = |y0: f64| {
        atoms.iter().filter(|a| (a.position.y - y0).abs() < 5e-6 && a.position.x.abs() < 20e-6).count() as f64
    };
    let low = strip(-50e-6);
    let high = strip(50e-6);
    let ratio = low / high;
    let expected = (100e-6 / c.scale_height(15e-6, 9.81)).exp();
    assert!((expected - (100.0f64 / 146.3).exp()).abs() < 1e-3);
    let se = ratio * (1.0 / low + 1.0 / high).sqrt();
    assert!((ratio - expected).abs() < 4.0 * se, "{ratio} vs {expected} +- {se}");
}

#[test]
fn uniform_fill_ignores_gravity() {
    let c = PhysicalConstants::default();
    let s = SamplingSpec { distribution: SpatialDistribution::Uniform, ..spec(100_000, 9.81, 3) };
    let atoms = sample_ensemble(&s, &TrapGeometry::default(), &c).unwrap();
    let mean_y = atoms.iter().map(|a| a.position.y).sum::<f64>() / atoms.len() as f64;
    // Uniform disk: sd of y is R/2.
    let se = 95e-6 / 2.0 / (atoms.len() as f64).sqrt();
    assert!(mean_y.abs() < 4.0 * se, "{mean_y}");
}

#[test]
fn same_seed_same_ensemble() {
    let c = PhysicalConstants::default();
    let a = sample_ensemble(&spec(1000, 9.81, 77), &TrapGeometry::default(), &c).unwrap();
    let b = sample_ensemble(&spec(1000, 9.81, 77), &TrapGeometry::default(), &c).unwrap();
    assert_eq!(a, b);
    let d = sample_ensemble(&spec(1000, 9.81, 78), &TrapGeometry::default(), &c).unwrap();
    assert_ne!(a, d);
}
