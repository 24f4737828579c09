//! Kernel density estimate of the transverse spin-wave mode and the
//! √U·√U overlap between two such modes.

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Kernel support in units of the bandwidth.
const KERNEL_CUTOFF: f64 = 5.0;

/// Atoms per accumulation chunk in [`Accumulation::Chunked`] mode.
const CHUNK: usize = 4096;

/// Square grid centered on the trap axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub half_extent: f64,
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { half_extent: 150e-6, resolution: 128 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_extent > 0.0 && self.half_extent.is_finite()) {
            return Err(Error::invalid("grid half extent must be positive"));
        }
        if self.resolution < 2 {
            return Err(Error::invalid("grid resolution must be at least 2"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.resolution as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    /// Coordinate of the center of cell `i` along either axis.
    pub fn center(&self, i: usize) -> f64 {
        // Written so that cells i and n − 1 − i are exact negatives.
        (2.0 * i as f64 + 1.0 - self.resolution as f64) * 0.5 * self.spacing()
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x.abs() <= self.half_extent && p.y.abs() <= self.half_extent
    }
}

/// How per-atom kernel contributions are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Accumulation {
    /// Fixed-size atom chunks accumulated in parallel and merged in chunk
    /// order. The result does not depend on the number of worker threads.
    #[default]
    Chunked,
    /// One sequential pass in atom order.
    Strict,
}

/// Normalized transverse density on a square grid. `values[iy * n + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn cell_area(&self) -> f64 {
        self.spec.cell_area()
    }

    pub fn resolution(&self) -> usize {
        self.spec.resolution
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.spec.resolution + ix]
    }

    /// First moments (mean x, mean y).
    pub fn mean(&self) -> Vector2<f64> {
        let n = self.spec.resolution;
        let mut m = Vector2::zeros();
        for iy in 0..n {
            for ix in 0..n {
                let v = self.at(ix, iy) * self.cell_area();
                m.x += v * self.spec.center(ix);
                m.y += v * self.spec.center(iy);
            }
        }
        m
    }

    /// Central second moments (var x, var y).
    pub fn variance(&self) -> Vector2<f64> {
        let n = self.spec.resolution;
        let mean = self.mean();
        let mut var = Vector2::zeros();
        for iy in 0..n {
            for ix in 0..n {
                let v = self.at(ix, iy) * self.cell_area();
                var.x += v * (self.spec.center(ix) - mean.x).powi(2);
                var.y += v * (self.spec.center(iy) - mean.y).powi(2);
            }
        }
        var
    }

    /// Builds a grid from an arbitrary non-negative function, normalized to unit integral.
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        spec.validate()?;
        let n = spec.resolution;
        let mut values = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                values.push(f(spec.center(ix), spec.center(iy)).max(0.0));
            }
        }
        let mut grid = DensityGrid { spec, values };
        grid.normalize()?;
        Ok(grid)
    }

    fn normalize(&mut self) -> Result<()> {
        let total = self.integral();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numerical("density grid has no mass".into()));
        }
        let scale = 1.0 / total;
        self.values.iter_mut().for_each(|v| *v *= scale);
        Ok(())
    }
}

/// U(x, y) = Σ_j p_j K_h(x − x_j, y − y_j) with an isotropic Gaussian kernel
/// of standard deviation `bandwidth`, evaluated at cell centers and
/// normalized to unit integral. `probabilities` are the per-atom weights
/// (w_j² for a spin wave).
pub fn density_estimate(
    probabilities: &[f64],
    positions: &[Vector2<f64>],
    grid: &GridSpec,
    bandwidth: f64,
    mode: Accumulation,
) -> Result<DensityGrid> {
    grid.validate()?;
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if probabilities.len() != positions.len() {
        return Err(Error::invalid("weights and positions differ in length"));
    }
    if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    let total: f64 = probabilities.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("total weight is zero"));
    }
    let outside: f64 = probabilities
        .iter()
        .zip(positions)
        .filter(|(_, p)| !grid.contains(p))
        .map(|(w, _)| w)
        .sum();
    let outside_fraction = outside / total;
    if outside_fraction > 0.01 {
        return Err(Error::GridCoverage { outside_fraction });
    }

    let n = grid.resolution;
    let values = match mode {
        Accumulation::Strict => {
            let mut acc = vec![0.0; n * n];
            deposit(&mut acc, probabilities, positions, grid, bandwidth);
            acc
        }
        Accumulation::Chunked => {
            let partials: Vec<Vec<f64>> = probabilities
                .par_chunks(CHUNK)
                .zip(positions.par_chunks(CHUNK))
                .map(|(w, p)| {
                    let mut acc = vec![0.0; n * n];
                    deposit(&mut acc, w, p, grid, bandwidth);
                    acc
                })
                .collect();
            let mut acc = vec![0.0; n * n];
            for part in &partials {
                for (a, b) in acc.iter_mut().zip(part) {
                    *a += b;
                }
            }
            acc
        }
    };
    let mut out = DensityGrid { spec: *grid, values };
    out.normalize()?;
    Ok(out)
}

fn deposit(acc: &mut [f64], weights: &[f64], positions: &[Vector2<f64>], grid: &GridSpec, h: f64) {
    let n = grid.resolution;
    let spacing = grid.spacing();
    let reach = KERNEL_CUTOFF * h;
    let inv = -0.5 / (h * h);
    let mut gx = Vec::new();
    let mut gy = Vec::new();
    let index_range = |c: f64| -> Option<(usize, usize)> {
        let lo = ((c - reach + grid.half_extent) / spacing - 0.5).ceil().max(0.0);
        let hi = ((c + reach + grid.half_extent) / spacing - 0.5).floor().min(n as f64 - 1.0);
        (hi >= lo).then(|| (lo as usize, hi as usize))
    };
    for (&w, p) in weights.iter().zip(positions) {
        if w == 0.0 {
            continue;
        }
        let (Some((x0, x1)), Some((y0, y1))) = (index_range(p.x), index_range(p.y)) else {
            continue;
        };
        gx.clear();
        gx.extend((x0..=x1).map(|i| {
            let d = grid.center(i) - p.x;
            (d * d * inv).exp()
        }));
        gy.clear();
        gy.extend((y0..=y1).map(|i| {
            let d = grid.center(i) - p.y;
            w * (d * d * inv).exp()
        }));
        for (iy, &wy) in (y0..=y1).zip(&gy) {
            let row = &mut acc[iy * n + x0..=iy * n + x1];
            for (cell, &wx) in row.iter_mut().zip(&gx) {
                *cell += wy * wx;
            }
        }
    }
}

/// R = (Σ √(U₀ U_t) · cell_area)², the squared Bhattacharyya overlap of two
/// normalized modes on the same grid.
pub fn mode_overlap(a: &DensityGrid, b: &DensityGrid) -> Result<f64> {
    if a.spec != b.spec || a.values.len() != b.values.len() {
        return Err(Error::GridMismatch);
    }
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x * y).sqrt()).sum::<f64>() * a.cell_area();
    Ok((s * s).clamp(0.0, 1.0))
}
