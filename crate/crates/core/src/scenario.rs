//! Scenario configuration, presets and the end-to-end overlap pipeline.

use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::Vector2;
use rand::Rng;

use crate::constants::PhysicalConstants;
use crate::density::{density_estimate, mode_overlap, Accumulation, DensityGrid, GridSpec};
use crate::efficiency::{efficiency_total, EfficiencyCurve, SurvivalParams};
use crate::ensemble::{sample_ensemble, AtomState, SamplingSpec, SpatialDistribution};
use crate::error::{Error, Result};
use crate::lightshift::ShiftField;
use crate::propagate::StepContext;
use crate::rng::aux_stream;
use crate::spinwave::{advance_spinwave, assign_excitation, ModeSpec};
use crate::trap::{RingPotential, TrapGeometry, WallModel};

pub const PRESETS: [&str; 4] = ["centered", "offset60", "shortdecay", "longdecay"];

pub const CSV_HEADER: &str = "t_ms,R_overlap,dephasing_factor,loss_factor,R_total";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Walls {
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub atom_count: usize,
    /// K
    pub temperature: f64,
    /// m
    pub trap_radius: f64,
    /// m
    pub trap_length: f64,
    pub walls: Walls,
    /// Soft-wall ring potential; its radius follows `trap_radius`.
    pub ring: RingPotential,
    pub gravity_enabled: bool,
    /// m/s²
    pub gravity: f64,
    /// Signal-mode center relative to the trap axis, m.
    pub mode_offset: Vector2<f64>,
    /// m
    pub mode_waist: f64,
    /// Storage times, s, starting at zero.
    pub times: Vec<f64>,
    /// s
    pub tau_dephase: f64,
    pub survival: SurvivalParams,
    pub grid: GridSpec,
    /// m
    pub bandwidth: f64,
    pub seed: u64,
    pub distribution: SpatialDistribution,
    /// s
    pub dt: f64,
    pub accumulation: Accumulation,
    /// Bootstrap replicates for the noise floor; 0 disables it.
    pub bootstrap: usize,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

fn time_grid(stop: f64, step: f64) -> Vec<f64> {
    let n = (stop / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

impl ScenarioConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = ScenarioConfig {
            name: name.to_string(),
            atom_count: 100_000,
            temperature: 15e-6,
            trap_radius: 95e-6,
            trap_length: 3e-3,
            walls: Walls::Hard,
            ring: RingPotential::default(),
            gravity_enabled: true,
            gravity: 9.81,
            mode_offset: Vector2::zeros(),
            mode_waist: 65e-6,
            times: time_grid(20e-3, 0.4e-3),
            tau_dephase: 28e-3,
            survival: SurvivalParams::default(),
            grid: GridSpec::default(),
            bandwidth: 10e-6,
            seed: 2011,
            distribution: SpatialDistribution::Uniform,
            dt: crate::propagate::DEFAULT_DT,
            accumulation: Accumulation::Chunked,
            bootstrap: 16,
            csv: None,
            svg: None,
        };
        let config = match name {
            "centered" => base,
            "offset60" => ScenarioConfig { mode_offset: Vector2::new(0.0, 60e-6), ..base },
            "shortdecay" => ScenarioConfig {
                times: time_grid(5e-3, 0.1e-3),
                tau_dephase: 0.67e-3,
                ..base
            },
            "longdecay" => ScenarioConfig { times: time_grid(100e-3, 2e-3), ..base },
            other => {
                return Err(Error::Configuration(format!(
                    "unknown preset `{other}` (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(config)
    }

    pub fn effective_gravity(&self) -> f64 {
        if self.gravity_enabled { self.gravity } else { 0.0 }
    }

    pub fn trap(&self) -> TrapGeometry {
        let wall_model = match self.walls {
            Walls::Hard => WallModel::Hard,
            Walls::Soft => WallModel::Soft(RingPotential { ring_radius: self.trap_radius, ..self.ring }),
        };
        TrapGeometry { radius: self.trap_radius, length: self.trap_length, wall_model, ..Default::default() }
    }

    pub fn mode(&self) -> ModeSpec {
        ModeSpec { waist: self.mode_waist, ..ModeSpec::signal() }.with_center(self.mode_offset.x, self.mode_offset.y)
    }

    pub fn validate(&self) -> Result<()> {
        fn field(name: &str, ok: bool, msg: &str) -> Result<()> {
            if ok { Ok(()) } else { Err(Error::Configuration(format!("field `{name}`: {msg}"))) }
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        field("atoms", self.atom_count > 0, "must be at least 1")?;
        field("temperature_uK", self.temperature >= 0.0 && self.temperature.is_finite(), "must be non-negative")?;
        field("trap_radius_um", positive(self.trap_radius), "must be positive")?;
        field("trap_length_mm", positive(self.trap_length), "must be positive")?;
        field("gravity", self.gravity >= 0.0 && self.gravity.is_finite(), "must be non-negative")?;
        field("waist_um", positive(self.mode_waist), "must be positive")?;
        field("times_ms", !self.times.is_empty(), "must list at least one time")?;
        field("times_ms", self.times[0] == 0.0, "must start at 0")?;
        field(
            "times_ms",
            self.times.windows(2).all(|w| w[1] > w[0]) && self.times.iter().all(|t| t.is_finite()),
            "must increase strictly",
        )?;
        field("tau_dephase_ms", positive(self.tau_dephase), "must be positive")?;
        field(
            "survival_fraction",
            (0.0..=1.0).contains(&self.survival.fast_fraction),
            "must lie in [0, 1]",
        )?;
        field("survival_fast_ms", positive(self.survival.tau_fast), "must be positive")?;
        field("survival_slow_ms", positive(self.survival.tau_slow), "must be positive")?;
        field("grid_half_extent_um", positive(self.grid.half_extent), "must be positive")?;
        field("grid_resolution", self.grid.resolution >= 2, "must be at least 2")?;
        field("bandwidth_um", positive(self.bandwidth), "must be positive")?;
        field("dt_us", positive(self.dt), "must be positive")?;
        field("wall_width_um", positive(self.ring.wall_width), "must be positive")?;
        field("wall_depth_uK", self.ring.peak_depth >= 0.0 && self.ring.peak_depth.is_finite(), "must be non-negative")?;
        field(
            "mode_x_um",
            self.mode_offset.x.is_finite() && self.mode_offset.y.is_finite(),
            "mode offset must be finite",
        )?;
        self.trap().validate().map_err(|e| Error::Configuration(format!("trap: {e}")))
    }

    /// Parses a flat `key = value` file. An optional `preset` key picks the
    /// starting values; every other key overrides one field.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen_section = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if line != "[scenario]" {
                    return Err(Error::Configuration(format!("line {}: unknown section {line}", lineno + 1)));
                }
                if seen_section {
                    return Err(Error::Configuration(format!("line {}: duplicate [scenario] section", lineno + 1)));
                }
                seen_section = true;
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Configuration(format!("line {}: expected key = value", lineno + 1)));
            };
            entries.push((lineno + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let preset = entries.iter().find(|(_, k, _)| k == "preset").map(|(_, _, v)| v.as_str()).unwrap_or("centered");
        let mut config = ScenarioConfig::preset(preset)?;
        for (line, key, value) in &entries {
            config.set(key, value).map_err(|e| match e {
                Error::Configuration(msg) => Error::Configuration(format!("line {line}: {msg}")),
                e => e,
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Sets one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |msg: &str| Error::Configuration(format!("field `{key}`: {msg}, got `{value}`"));
        let num = || value.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad("expected a number"));
        let int = || value.parse::<u64>().map_err(|_| bad("expected a non-negative integer"));
        let flag = || match value {
            "true" | "on" | "yes" => Ok(true),
            "false" | "off" | "no" => Ok(false),
            _ => Err(bad("expected on/off")),
        };
        match key {
            "preset" => {}
            "name" => self.name = value.to_string(),
            "atoms" => self.atom_count = int()? as usize,
            "temperature_uK" => self.temperature = num()? * 1e-6,
            "trap_radius_um" => self.trap_radius = num()? * 1e-6,
            "trap_length_mm" => self.trap_length = num()? * 1e-3,
            "walls" => {
                self.walls = match value {
                    "hard" => Walls::Hard,
                    "soft" => Walls::Soft,
                    _ => return Err(bad("expected hard or soft")),
                }
            }
            "wall_width_um" => self.ring.wall_width = num()? * 1e-6,
            "wall_depth_uK" => {
                let d = num()? * 1e-6;
                self.ring.peak_depth = d;
                self.ring.endcap_depth = d;
            }
            "gravity" => self.gravity_enabled = flag()?,
            "g" => self.gravity = num()?,
            "mode_x_um" => self.mode_offset.x = num()? * 1e-6,
            "mode_y_um" => self.mode_offset.y = num()? * 1e-6,
            "waist_um" => self.mode_waist = num()? * 1e-6,
            "times_ms" => {
                self.times = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map(|t| t * 1e-3))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("expected a comma-separated list of numbers"))?
            }
            "t_stop_ms" | "t_step_ms" => {
                let x = num()? * 1e-3;
                if !(x > 0.0) {
                    return Err(bad("must be positive"));
                }
                let step = if key == "t_step_ms" { x } else { self.times.get(1).copied().unwrap_or(x) };
                let stop = if key == "t_stop_ms" { x } else { *self.times.last().unwrap_or(&x) };
                self.times = time_grid(stop, step);
            }
            "tau_dephase_ms" => self.tau_dephase = num()? * 1e-3,
            "survival_fraction" => self.survival.fast_fraction = num()?,
            "survival_fast_ms" => self.survival.tau_fast = num()? * 1e-3,
            "survival_slow_ms" => self.survival.tau_slow = num()? * 1e-3,
            "grid_half_extent_um" => self.grid.half_extent = num()? * 1e-6,
            "grid_resolution" => self.grid.resolution = int()? as usize,
            "bandwidth_um" => self.bandwidth = num()? * 1e-6,
            "seed" => self.seed = int()?,
            "initial" => {
                self.distribution = match value {
                    "thermal" => SpatialDistribution::Thermal,
                    "uniform" => SpatialDistribution::Uniform,
                    _ => return Err(bad("expected thermal or uniform")),
                }
            }
            "dt_us" => self.dt = num()? * 1e-6,
            "strict" => {
                self.accumulation = if flag()? { Accumulation::Strict } else { Accumulation::Chunked }
            }
            "bootstrap" => self.bootstrap = int()? as usize,
            "csv" => self.csv = Some(PathBuf::from(value)),
            "svg" => self.svg = Some(PathBuf::from(value)),
            _ => return Err(Error::Configuration(format!("unknown field `{key}`"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub curve: EfficiencyCurve,
    /// Twice the RMS bootstrap standard error of the overlap, if computed.
    pub noise_floor: Option<f64>,
}

impl ScenarioResult {
    pub fn rows(&self) -> Vec<CurveRow> {
        let c = &self.curve;
        (0..c.len())
            .map(|i| CurveRow {
                t_ms: c.times[i] * 1e3,
                r_overlap: c.overlap[i],
                dephasing_factor: c.dephasing[i],
                loss_factor: c.loss[i],
                r_total: c.total[i],
            })
            .collect()
    }
}

/// Probability weights of live atoms and their transverse positions.
fn snapshot(atoms: &[AtomState], probabilities: &[f64]) -> (Vec<f64>, Vec<Vector2<f64>>) {
    let weights = atoms.iter().zip(probabilities).map(|(a, &p)| if a.alive { p } else { 0.0 }).collect();
    (weights, atoms.iter().map(|a| a.transverse()).collect())
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    run_scenario_with(config, &PhysicalConstants::default())
}

pub fn run_scenario_with(config: &ScenarioConfig, constants: &PhysicalConstants) -> Result<ScenarioResult> {
    config.validate()?;
    let trap = config.trap();
    let gravity = config.effective_gravity();
    let spec = SamplingSpec {
        n: config.atom_count,
        temperature: config.temperature,
        gravity,
        seed: config.seed,
        distribution: config.distribution,
    };
    let mut atoms = sample_ensemble(&spec, &trap, constants)?;
    let (kw, ks) = crate::spinwave::collinear_wavevectors(constants.lambda_d2, constants.nu_hf, constants.c);
    let mut record = assign_excitation(&atoms, &config.mode(), kw - ks, 0.0)?;
    let probabilities = record.probabilities();
    let ctx = StepContext { trap: &trap, gravity, constants };
    let kde = |w: &[f64], p: &[Vector2<f64>]| density_estimate(w, p, &config.grid, config.bandwidth, config.accumulation);

    let boot_indices = bootstrap_indices(config.times.len(), config.bootstrap);
    let mut boot_snapshots = Vec::new();

    let (w0, p0) = snapshot(&atoms, &probabilities);
    let u0 = kde(&w0, &p0)?;
    let mut overlap = Vec::with_capacity(config.times.len());
    for (i, &t) in config.times.iter().enumerate() {
        if t > record.time {
            advance_spinwave(&mut atoms, &mut record, t, config.dt, &ShiftField::Zero, &ctx)?;
        }
        let (w, p) = snapshot(&atoms, &probabilities);
        overlap.push(if i == 0 && t == 0.0 { mode_overlap(&u0, &u0)? } else { mode_overlap(&u0, &kde(&w, &p)?)? });
        if boot_indices.contains(&i) {
            boot_snapshots.push((w, p));
        }
    }
    let curve = efficiency_total(&overlap, &config.times, config.tau_dephase, &config.survival)?;
    let noise_floor = if boot_snapshots.is_empty() {
        None
    } else {
        Some(bootstrap_noise_floor(config, (&w0, &p0), &boot_snapshots, &kde)?)
    };
    Ok(ScenarioResult { curve, noise_floor })
}

/// Up to eight evenly spread nonzero time indices used for the bootstrap.
fn bootstrap_indices(n_times: usize, replicates: usize) -> Vec<usize> {
    if replicates < 2 || n_times < 2 {
        return Vec::new();
    }
    let k = (n_times - 1).min(8);
    let mut v: Vec<usize> = (1..=k).map(|j| j * (n_times - 1) / k).collect();
    v.dedup();
    v
}

type Snapshot = (Vec<f64>, Vec<Vector2<f64>>);

/// Resamples atoms with replacement (multinomial counts from an auxiliary
/// stream per replicate) and recomputes the overlap at the chosen times. The
/// floor is twice the RMS of the per-time standard errors.
fn bootstrap_noise_floor(
    config: &ScenarioConfig,
    initial: (&[f64], &[Vector2<f64>]),
    snapshots: &[Snapshot],
    kde: &dyn Fn(&[f64], &[Vector2<f64>]) -> Result<DensityGrid>,
) -> Result<f64> {
    let n = initial.0.len();
    let b = config.bootstrap;
    let mut samples = vec![Vec::with_capacity(b); snapshots.len()];
    for r in 0..b {
        let mut rng = aux_stream(config.seed, r as u64);
        let mut counts = vec![0u32; n];
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
        let reweight = |w: &[f64]| w.iter().zip(&counts).map(|(w, &c)| w * c as f64).collect::<Vec<_>>();
        let u0 = kde(&reweight(initial.0), initial.1)?;
        for (k, (w, p)) in snapshots.iter().enumerate() {
            samples[k].push(mode_overlap(&u0, &kde(&reweight(w), p)?)?);
        }
    }
    let mean_var = samples
        .iter()
        .map(|s| {
            let m = s.iter().sum::<f64>() / b as f64;
            s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1) as f64
        })
        .sum::<f64>()
        / samples.len() as f64;
    Ok(2.0 * mean_var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub t_ms: f64,
    pub r_overlap: f64,
    pub dephasing_factor: f64,
    pub loss_factor: f64,
    pub r_total: f64,
}

/// Fixed nine-significant-digit decimal, independent of locale and of the
/// shortest-round-trip printer.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000".to_string();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if !(-30..=30).contains(&exp) {
        return sci;
    }
    let prec = (8 - exp).max(0) as usize;
    format!("{x:.prec$}")
}

pub fn write_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            format_sig9(r.t_ms),
            format_sig9(r.r_overlap),
            format_sig9(r.dephasing_factor),
            format_sig9(r.loss_factor),
            format_sig9(r.r_total)
        );
    }
    s
}

/// Reads a curve CSV. The header must match exactly.
pub fn read_csv(text: &str) -> Result<Vec<CurveRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end_matches('\r') == CSV_HEADER => {}
        Some(h) => return Err(Error::Configuration(format!("unexpected CSV header `{h}`"))),
        None => return Err(Error::Configuration("empty CSV".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Configuration(format!("CSV row {}: non-numeric field", i + 2)))?;
        if v.len() != 5 {
            return Err(Error::Configuration(format!("CSV row {}: expected 5 fields, got {}", i + 2, v.len())));
        }
        rows.push(CurveRow { t_ms: v[0], r_overlap: v[1], dephasing_factor: v[2], loss_factor: v[3], r_total: v[4] });
    }
    Ok(rows)
}
