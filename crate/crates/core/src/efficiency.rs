//! Composition of overlap, dephasing and atom-loss factors into a retrieval
//! efficiency curve.

use crate::error::{Error, Result};

/// Double-exponential atom survival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalParams {
    pub fast_fraction: f64,
    /// s
    pub tau_fast: f64,
    /// s
    pub tau_slow: f64,
}

impl Default for SurvivalParams {
    fn default() -> Self {
        SurvivalParams { fast_fraction: 0.5, tau_fast: 160e-3, tau_slow: 580e-3 }
    }
}

impl SurvivalParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fast_fraction) {
            return Err(Error::invalid("fast fraction must lie in [0, 1]"));
        }
        if !(self.tau_fast > 0.0 && self.tau_slow > 0.0) {
            return Err(Error::invalid("survival time constants must be positive"));
        }
        Ok(())
    }
}

/// S(t) = f e^(−t/τ_fast) + (1 − f) e^(−t/τ_slow).
pub fn atom_survival(t: f64, params: &SurvivalParams) -> f64 {
    let f = params.fast_fraction;
    f * (-t / params.tau_fast).exp() + (1.0 - f) * (-t / params.tau_slow).exp()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EfficiencyCurve {
    /// s
    pub times: Vec<f64>,
    pub overlap: Vec<f64>,
    pub dephasing: Vec<f64>,
    pub loss: Vec<f64>,
    pub total: Vec<f64>,
}

impl EfficiencyCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// total(t) = overlap(t) · exp(−t/τ_dephase) · S(t), normalized to the first
/// time point. Each factor is normalized to its own first value, so the
/// product identity holds exactly row by row.
pub fn efficiency_total(
    overlap: &[f64],
    times: &[f64],
    tau_dephase: f64,
    survival: &SurvivalParams,
) -> Result<EfficiencyCurve> {
    if !(tau_dephase > 0.0) {
        return Err(Error::invalid(format!("tau_dephase must be positive, got {tau_dephase}")));
    }
    survival.validate()?;
    if overlap.len() != times.len() {
        return Err(Error::invalid("overlap and times differ in length"));
    }
    if times.is_empty() {
        return Ok(EfficiencyCurve::default());
    }
    if overlap.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::invalid("overlap values must lie in [0, 1]"));
    }
    if overlap[0] <= 0.0 {
        return Err(Error::invalid("overlap at the first time point is zero"));
    }
    let t0 = times[0];
    let dephase = |t: f64| (-(t - t0) / tau_dephase).exp();
    let s0 = atom_survival(t0, survival);
    let overlap_n: Vec<f64> = overlap.iter().map(|r| (r / overlap[0]).min(1.0)).collect();
    let dephasing: Vec<f64> = times.iter().map(|&t| dephase(t)).collect();
    let loss: Vec<f64> = times.iter().map(|&t| atom_survival(t, survival) / s0).collect();
    let total = overlap_n
        .iter()
        .zip(&dephasing)
        .zip(&loss)
        .map(|((r, d), l)| r * d * l)
        .collect();
    Ok(EfficiencyCurve {
        times: times.to_vec(),
        overlap: overlap_n,
        dephasing,
        loss,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survival_values() {
        let d = SurvivalParams::default();
        assert_eq!(atom_survival(0.0, &d), 1.0);
        let single = SurvivalParams { fast_fraction: 0.0, ..d };
        assert!((atom_survival(0.58, &single) - (-1.0f64).exp()).abs() < 1e-15);
        let s = atom_survival(0.1, &d);
        let expected = 0.5 * (-0.625f64).exp() + 0.5 * (-0.1 / 0.58f64).exp();
        assert!((s - expected).abs() < 1e-15);
        assert!((s - 0.688).abs() < 5e-4, "{s}");
    }

    #[test]
    fn normalized_at_zero() {
        let times = [0.0, 1e-3, 2e-3];
        let curve = efficiency_total(&[1.0, 0.9, 0.8], &times, 28e-3, &SurvivalParams::default()).unwrap();
        assert_eq!(curve.total[0], 1.0);
    }

    #[test]
    fn pure_dephasing() {
        let flat = SurvivalParams { fast_fraction: 0.0, tau_fast: 1.0, tau_slow: 1e300 };
        let curve = efficiency_total(&[1.0, 1.0], &[0.0, 28e-3], 28e-3, &flat).unwrap();
        assert!((curve.total[1] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn product_of_independent_factors() {
        let d = SurvivalParams::default();
        let curve = efficiency_total(&[1.0, 1.0], &[0.0, 10e-3], 28e-3, &d).unwrap();
        let expected = (-10.0f64 / 28.0).exp() * atom_survival(10e-3, &d);
        assert!((curve.total[1] - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_tau() {
        assert!(efficiency_total(&[1.0], &[0.0], 0.0, &SurvivalParams::default()).is_err());
        assert!(efficiency_total(&[1.0], &[0.0], -1.0, &SurvivalParams::default()).is_err());
    }

    #[test]
    fn product_identity_with_late_start() {
        let times = [2e-3, 4e-3, 8e-3];
        let curve = efficiency_total(&[0.9, 0.7, 0.8], &times, 28e-3, &SurvivalParams::default()).unwrap();
        for k in 0..3 {
            let p = curve.overlap[k] * curve.dephasing[k] * curve.loss[k];
            assert!((p - curve.total[k]).abs() <= 1e-15);
            for f in [curve.overlap[k], curve.dephasing[k], curve.loss[k]] {
                assert!((0.0..=1.0).contains(&f));
            }
        }
        assert_eq!(curve.total[0], 1.0);
    }
}
