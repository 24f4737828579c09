//! Monte-Carlo model of a cold-atom spin-wave memory held in a hollow
//! ring-shaped dipole trap: atom sampling and propagation, differential light
//! shifts, spin-wave overlap, and the fitting tools used on the resulting
//! efficiency curves.

pub mod constants;
pub mod density;
pub mod efficiency;
pub mod ensemble;
pub mod error;
pub mod extrema;
pub mod fit;
pub mod lightshift;
pub mod propagate;
pub mod render;
pub mod rng;
pub mod scenario;
pub mod spinwave;
pub mod trap;

pub use constants::PhysicalConstants;
pub use density::{density_estimate, mode_overlap, Accumulation, DensityGrid, GridSpec};
pub use efficiency::{atom_survival, efficiency_total, EfficiencyCurve, SurvivalParams};
pub use ensemble::{sample_ensemble, sample_thermal_ensemble, AtomState, SamplingSpec, SpatialDistribution};
pub use error::{Error, Result};
pub use extrema::{find_extrema, ExtremaReport, Extremum, ExtremumKind};
pub use fit::{fit_double_exponential, fit_exponential, FitModel, FitResult};
pub use lightshift::{
    calibrate_wall_width, differential_shift, ensemble_coherence, optimal_compensation_power, residual_lifetime,
    simulate_coherence, CoherenceCurve, CoherenceParams, CompensationSpec, Lifetime, ShiftField,
};
pub use propagate::{propagate, record_trajectories, StepContext, TrajectorySet};
pub use spinwave::{assign_excitation, collinear_wavevectors, spinwave_wavevector, ModeSpec, SpinWaveRecord};
pub use trap::{EndcapModel, RingPotential, TrapGeometry, WallModel};
pub use render::{render_svg, RenderOptions};
pub use scenario::{read_csv, run_scenario, write_csv, CurveRow, ScenarioConfig, ScenarioResult};
