use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use memsim_core::lightshift::{optimal_compensation_power, residual_lifetime, CompensationSpec, Lifetime};
use memsim_core::render::{render_svg, RenderOptions, COLUMNS};
use memsim_core::scenario::{read_csv, run_scenario, write_csv, CurveRow, ScenarioConfig};
use memsim_core::{find_extrema, fit_double_exponential, fit_exponential, Error, PhysicalConstants};

/// Uncompensated dephasing time used for the residual table, s.
const TAU_UNCOMPENSATED: f64 = 0.67e-3;
const RESIDUALS: [f64; 3] = [0.01, 0.024, 0.10];

#[derive(Parser)]
#[command(name = "memsim", version, about = "Spin-wave memory simulation in a hollow dipole trap")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Exp,
    Dexp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Column {
    #[value(name = "R_overlap")]
    Overlap,
    #[value(name = "dephasing_factor")]
    Dephasing,
    #[value(name = "loss_factor")]
    Loss,
    #[value(name = "R_total")]
    Total,
}

impl Column {
    fn name(self) -> &'static str {
        COLUMNS[self as usize]
    }

    fn get(self, r: &CurveRow) -> f64 {
        match self {
            Column::Overlap => r.r_overlap,
            Column::Dephasing => r.dephasing_factor,
            Column::Loss => r.loss_factor,
            Column::Total => r.r_total,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its efficiency curve as CSV.
    Simulate {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        atoms: Option<usize>,
        /// CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render the curve to this SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Single-pass accumulation, identical output for any worker count.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Fit an exponential or double exponential to one column of a curve CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        offset: bool,
        #[arg(long, value_enum, default_value = "R_total")]
        column: Column,
    },
    /// List the local minima and maxima of one column of a curve CSV.
    Extrema {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        window: usize,
        #[arg(long, default_value_t = 0.0)]
        noise_floor: f64,
        #[arg(long, value_enum, default_value = "R_overlap")]
        column: Column,
    },
    /// Compensation-beam power and residual dephasing lifetimes.
    Compensation {
        /// Trap beam power, W.
        #[arg(long, default_value_t = 1.9)]
        power: f64,
        /// Trap wavelength, nm.
        #[arg(long, default_value_t = 775.0)]
        trap_nm: f64,
    },
    /// Render a curve CSV as an SVG line chart.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log_y: bool,
        #[arg(long, value_enum, num_args = 1.., value_delimiter = ',')]
        columns: Vec<Column>,
    },
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Singular(_)
            | Error::Numerical(_)
            | Error::Consistency(_)
            | Error::CalibrationFailure { .. }
            | Error::EmptyMode { .. }
            | Error::GridCoverage { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &PathBuf, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn points(rows: &[CurveRow], column: Column) -> Vec<(f64, f64)> {
    rows.iter().map(|r| (r.t_ms * 1e-3, column.get(r))).collect()
}

fn simulate(
    preset: Option<String>,
    config: Option<PathBuf>,
    seed: Option<u64>,
    atoms: Option<usize>,
    out: Option<PathBuf>,
    svg: Option<PathBuf>,
    strict: bool,
) -> Result<String, Failure> {
    let mut cfg = match (preset, config) {
        (Some(p), _) => ScenarioConfig::preset(&p)?,
        (None, Some(path)) => ScenarioConfig::parse(&read(&path)?)?,
        (None, None) => return Err(Failure::Usage("give --preset or --config".into())),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = atoms {
        cfg.atom_count = n;
    }
    if strict {
        cfg.accumulation = memsim_core::Accumulation::Strict;
    }
    cfg.csv = out.or(cfg.csv);
    cfg.svg = svg.or(cfg.svg);
    cfg.validate()?;
    let result = run_scenario(&cfg)?;
    let rows = result.rows();
    let csv = write_csv(&rows);
    let stdout = match &cfg.csv {
        Some(path) => {
            write(path, &csv)?;
            String::new()
        }
        None => csv,
    };
    if let Some(path) = &cfg.svg {
        write(path, &render_svg(&rows, &RenderOptions::default())?)?;
    }
    if let Some(floor) = result.noise_floor {
        eprintln!("noise_floor={floor:.6}");
    }
    Ok(stdout)
}

fn fit(input: PathBuf, model: Model, offset: bool, column: Column) -> Result<String, Failure> {
    let mut out = String::new();
    let rows = read_csv(&read(&input)?)?;
    let pts = points(&rows, column);
    let result = match model {
        Model::Exp => fit_exponential(&pts, None, offset)?,
        Model::Dexp => fit_double_exponential(&pts, None)?,
    };
    let _ = writeln!(out, "model={}", match model { Model::Exp => "exp", Model::Dexp => "dexp" });
    for (i, name) in result.names.iter().enumerate() {
        let (v, e) = (result.parameters[i], result.std_errors[i]);
        if name.starts_with("tau") {
            let _ = writeln!(out, "{name}_ms={:.3}", v * 1e3);
            let _ = writeln!(out, "{name}_ms_err={:.3}", e * 1e3);
        } else {
            let _ = writeln!(out, "{name}={v:.6}");
            let _ = writeln!(out, "{name}_err={e:.6}");
        }
    }
    let _ = writeln!(out, "rss={:.6e}", result.residual);
    let _ = writeln!(out, "iterations={}", result.iterations);
    let _ = writeln!(out, "converged={}", result.converged);
    if matches!(model, Model::Dexp) {
        let _ = writeln!(out, "degenerate={}", result.degenerate);
        if result.degenerate {
            eprintln!("warning: the two time constants are within 10% of each other");
        }
    }
    Ok(out)
}

fn extrema(input: PathBuf, window: usize, noise_floor: f64, column: Column) -> Result<String, Failure> {
    let mut out = String::new();
    let rows = read_csv(&read(&input)?)?;
    let t: Vec<f64> = rows.iter().map(|r| r.t_ms * 1e-3).collect();
    let y: Vec<f64> = rows.iter().map(|r| column.get(r)).collect();
    let report = find_extrema(&t, &y, window, noise_floor)?;
    let _ = writeln!(out, "column={}", column.name());
    let _ = writeln!(out, "count={}", report.extrema.len());
    for e in &report.extrema {
        let kind = match e.kind {
            memsim_core::ExtremumKind::Min => "min",
            memsim_core::ExtremumKind::Max => "max",
        };
        let _ = writeln!(out, "{kind} t_ms={:.3} value={:.6} prominence={:.6}", e.time * 1e3, e.value, e.prominence);
    }
    Ok(out)
}

fn compensation(power: f64, trap_nm: f64) -> Result<String, Failure> {
    let mut out = String::new();
    let constants = PhysicalConstants::default();
    let spec = CompensationSpec { trap_power: power, trap_wavelength: trap_nm * 1e-9, ..Default::default() };
    let p = optimal_compensation_power(&spec, &constants)?;
    let detuning = constants.detuning_from_d2(spec.trap_wavelength);
    let _ = writeln!(out, "trap_power_w={power}");
    let _ = writeln!(out, "trap_nm={trap_nm}");
    let _ = writeln!(out, "detuning_thz={:.4}", detuning / (2.0 * std::f64::consts::PI) / 1e12);
    let _ = writeln!(out, "optimal_power_uw={:.3}", p * 1e6);
    let _ = writeln!(out, "uncompensated_tau_ms={:.3}", TAU_UNCOMPENSATED * 1e3);
    for eps in RESIDUALS {
        let tau = match residual_lifetime(TAU_UNCOMPENSATED, eps)? {
            Lifetime::Finite(t) => format!("{:.3}", t * 1e3),
            Lifetime::Unbounded => "inf".into(),
        };
        let _ = writeln!(out, "residual_pct={:.1} tau_ms={tau}", eps * 100.0);
    }
    Ok(out)
}

fn render(input: PathBuf, out: PathBuf, log_y: bool, columns: Vec<Column>) -> Result<String, Failure> {
    let rows = read_csv(&read(&input)?)?;
    if rows.is_empty() {
        return Err(Failure::Usage(format!("{} has no data rows", input.display())));
    }
    let mut options = RenderOptions { log_y, ..Default::default() };
    if !columns.is_empty() {
        options.columns = columns.iter().map(|c| c.name().to_string()).collect();
    }
    write(&out, &render_svg(&rows, &options)?)?;
    Ok(String::new())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Simulate { preset, config, seed, atoms, out, svg, strict, workers } => {
            if let Some(n) = workers {
                if n == 0 {
                    eprintln!("error: --workers must be at least 1");
                    return ExitCode::from(2);
                }
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            simulate(preset, config, seed, atoms, out, svg, strict)
        }
        Command::Fit { input, model, offset, column } => fit(input, model, offset, column),
        Command::Extrema { input, window, noise_floor, column } => extrema(input, window, noise_floor, column),
        Command::Compensation { power, trap_nm } => compensation(power, trap_nm),
        Command::Render { input, out, log_y, columns } => render(input, out, log_y, columns),
    };
    match outcome {
        Ok(text) => {
            // A closed pipe on the reader's side is not an error.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
