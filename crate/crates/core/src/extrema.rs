//! Local extrema of sampled curves.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub time: f64,
    pub value: f64,
    pub kind: ExtremumKind,
    /// Drop or rise to the neighboring turning points, on the smoothed curve.
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremaReport {
    pub extrema: Vec<Extremum>,
    pub noise_floor: f64,
}

impl ExtremaReport {
    pub fn minima(&self) -> impl Iterator<Item = &Extremum> {
        self.extrema.iter().filter(|e| e.kind == ExtremumKind::Min)
    }

    pub fn maxima(&self) -> impl Iterator<Item = &Extremum> {
        self.extrema.iter().filter(|e| e.kind == ExtremumKind::Max)
    }
}

/// Centered moving average; near the ends the window shrinks symmetrically.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let k = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let h = k.min(i).min(n - 1 - i);
            let s: f64 = values[i - h..=i + h].iter().sum();
            s / (2 * h + 1) as f64
        })
        .collect()
}

/// Vertex of the parabola through three points, falling back to the middle
/// point when they are collinear.
fn parabolic_vertex(t: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let d1 = (y[1] - y[0]) / (t[1] - t[0]);
    let d2 = (y[2] - y[1]) / (t[2] - t[1]);
    let a = (d2 - d1) / (t[2] - t[0]);
    if a == 0.0 || !a.is_finite() {
        return (t[1], y[1]);
    }
    // Newton form y0 + d1 (t − t0) + a (t − t0)(t − t1).
    let b = d1 - a * (t[0] + t[1]);
    let tv = (-b / (2.0 * a)).clamp(t[0], t[2]);
    (tv, y[0] + d1 * (tv - t[0]) + a * (tv - t[0]) * (tv - t[1]))
}

/// Smooths `values` and walks the result with a hysteresis of `noise_floor`:
/// a turning point is kept only once the curve has moved away from it by more
/// than the floor, so every reported extremum has at least that prominence on
/// the side it was confirmed from. End points are never reported.
pub fn find_extrema(times: &[f64], values: &[f64], window: usize, noise_floor: f64) -> Result<ExtremaReport> {
    if times.len() != values.len() {
        return Err(Error::invalid("times and values differ in length"));
    }
    if times.len() < 5 {
        return Err(Error::invalid(format!("need at least 5 points, got {}", times.len())));
    }
    if window == 0 || window % 2 == 0 {
        return Err(Error::invalid(format!("smoothing window must be odd, got {window}")));
    }
    if !(noise_floor >= 0.0 && noise_floor.is_finite()) {
        return Err(Error::invalid("noise floor must be finite and non-negative"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("times must increase strictly and values be finite"));
    }
    let empty = ExtremaReport { extrema: Vec::new(), noise_floor };
    if values.iter().all(|&v| v == values[0]) {
        return Ok(empty);
    }
    let s = moving_average(values, window);
    let n = s.len();

    // Indices of confirmed turning points, alternating in kind.
    let mut turns: Vec<(usize, ExtremumKind)> = Vec::new();
    let mut hi = 0;
    let mut lo = 0;
    let mut direction: Option<ExtremumKind> = None; // kind of the pending turning point
    for i in 1..n {
        match direction {
            None => {
                if s[i] > s[hi] {
                    hi = i;
                }
                if s[i] < s[lo] {
                    lo = i;
                }
                if s[hi] - s[i] > noise_floor && hi > 0 {
                    turns.push((hi, ExtremumKind::Max));
                    direction = Some(ExtremumKind::Min);
                    lo = i;
                } else if s[i] - s[lo] > noise_floor && lo > 0 {
                    turns.push((lo, ExtremumKind::Min));
                    direction = Some(ExtremumKind::Max);
                    hi = i;
                } else if s[hi] - s[i] > noise_floor {
                    direction = Some(ExtremumKind::Min);
                    lo = i;
                } else if s[i] - s[lo] > noise_floor {
                    direction = Some(ExtremumKind::Max);
                    hi = i;
                }
            }
            Some(ExtremumKind::Min) => {
                if s[i] < s[lo] {
                    lo = i;
                } else if s[i] - s[lo] > noise_floor {
                    turns.push((lo, ExtremumKind::Min));
                    direction = Some(ExtremumKind::Max);
                    hi = i;
                }
            }
            Some(ExtremumKind::Max) => {
                if s[i] > s[hi] {
                    hi = i;
                } else if s[hi] - s[i] > noise_floor {
                    turns.push((hi, ExtremumKind::Max));
                    direction = Some(ExtremumKind::Min);
                    lo = i;
                }
            }
        }
    }
    turns.retain(|&(i, _)| i > 0 && i < n - 1);
    // Alternation can break only where an end point was dropped.
    turns.dedup_by(|b, a| a.1 == b.1);

    let extrema = turns
        .iter()
        .enumerate()
        .map(|(k, &(i, kind))| {
            let (time, value) = parabolic_vertex(
                [times[i - 1], times[i], times[i + 1]],
                [s[i - 1], s[i], s[i + 1]],
            );
            let neighbor = |j: Option<&(usize, ExtremumKind)>, fallback: f64| j.map(|&(j, _)| s[j]).unwrap_or(fallback);
            let before = neighbor(k.checked_sub(1).and_then(|k| turns.get(k)), s[0]);
            let after = neighbor(turns.get(k + 1), s[n - 1]);
            let prominence = match kind {
                ExtremumKind::Min => (before - s[i]).min(after - s[i]),
                ExtremumKind::Max => (s[i] - before).min(s[i] - after),
            };
            Extremum { time, value, kind, prominence }
        })
        .collect();
    Ok(ExtremaReport { extrema, noise_floor })
}
