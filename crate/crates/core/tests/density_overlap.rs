use memsim_core::density::{density_estimate, mode_overlap, Accumulation, DensityGrid, GridSpec};
use memsim_core::scenario::{run_scenario, ScenarioConfig};
use nalgebra::Vector2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SIGMA: f64 = 32.5e-6;

fn gaussian_cloud(n: usize, center: Vector2<f64>, seed: u64) -> Vec<Vector2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, SIGMA).unwrap();
    (0..n).map(|_| center + Vector2::new(normal.sample(&mut rng), normal.sample(&mut rng))).collect()
}

fn kde(points: &[Vector2<f64>], spec: &GridSpec) -> DensityGrid {
    let w = vec![1.0 / points.len() as f64; points.len()];
    density_estimate(&w, points, spec, 10e-6, Accumulation::Chunked).unwrap()
}

/// Bhattacharyya overlap of two isotropic 2-D Gaussians by midpoint quadrature,
/// independent of the grid code.
fn quadrature_overlap(sa: f64, sb: f64, d: f64) -> f64 {
    let n = 600;
    let half = 6.0 * sa.max(sb) + d;
    let h = 2.0 * half / n as f64;
    let g = |s: f64, x: f64, y: f64| (-(x * x + y * y) / (2.0 * s * s)).exp() / (2.0 * std::f64::consts::PI * s * s);
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = -half + (i as f64 + 0.5) * h;
            let y = -half + (j as f64 + 0.5) * h;
            sum += (g(sa, x, y) * g(sb, x - d, y)).sqrt();
        }
    }
    (sum * h * h).powi(2)
}

#[test]
fn quadrature_agrees_with_closed_form() {
    for d in [0.0, 0.5 * SIGMA, SIGMA, 2.0 * SIGMA] {
        let q = quadrature_overlap(SIGMA, SIGMA, d);
        assert!((q - (-d * d / (4.0 * SIGMA * SIGMA)).exp()).abs() < 1e-6, "{d}: {q}");
    }
}

#[test]
fn kde_variance_inflation() {
    let spec = GridSpec::default();
    let u = kde(&gaussian_cloud(100_000, Vector2::zeros(), 1), &spec);
    let var = u.variance();
    let expected = SIGMA * SIGMA + 10e-6 * 10e-6;
    assert!((var.x / expected - 1.0).abs() < 0.02, "{}", var.x / expected);
    assert!((var.y / expected - 1.0).abs() < 0.02, "{}", var.y / expected);
    assert!((u.integral() - 1.0).abs() < 1e-12);
}

#[test]
fn sampled_gaussians_match_smoothed_overlap() {
    // Each KDE is a Gaussian of width sqrt(sigma^2 + h^2); the sampled overlap
    // must match the quadrature of two such Gaussians.
    let spec = GridSpec::default();
    let s = (SIGMA * SIGMA + 1e-10).sqrt();
    for d in [0.0, 0.5 * SIGMA, SIGMA, 2.0 * SIGMA] {
        let a = kde(&gaussian_cloud(100_000, Vector2::new(-0.5 * d, 0.0), 10), &spec);
        let b = kde(&gaussian_cloud(100_000, Vector2::new(0.5 * d, 0.0), 11), &spec);
        let r = mode_overlap(&a, &b).unwrap();
        let q = quadrature_overlap(s, s, d);
        assert!((r / q - 1.0).abs() < 0.01, "d = {d}: {r} vs {q}");
    }
}

#[test]
fn grid_convergence_of_breathing_overlap() {
    let mut coarse = ScenarioConfig::preset("centered").unwrap();
    coarse.times = vec![0.0, 2e-3, 5e-3];
    coarse.bootstrap = 0;
    let mut fine = coarse.clone();
    fine.atom_count *= 4;
    fine.grid.resolution *= 2;
    let a = run_scenario(&coarse).unwrap().curve.overlap;
    let b = run_scenario(&fine).unwrap().curve.overlap;
    for (x, y) in a.iter().zip(&b) {
        assert!((x / y - 1.0).abs() < 0.01, "{x} vs {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn overlap_symmetric_and_bounded(
        seed in 0u64..10_000,
        dx in -60e-6f64..60e-6,
        dy in -60e-6f64..60e-6,
        n in 5usize..400,
    ) {
        let spec = GridSpec { half_extent: 400e-6, resolution: 96 };
        let a = kde(&gaussian_cloud(n, Vector2::zeros(), seed), &spec);
        let b = kde(&gaussian_cloud(n, Vector2::new(dx, dy), seed + 1), &spec);
        let ab = mode_overlap(&a, &b).unwrap();
        let ba = mode_overlap(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((mode_overlap(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((a.integral() - 1.0).abs() < 1e-12);
    }
}
