//! Trap geometry and the phenomenological ring potential of the hollow beam.
//!
//! Coordinates: `x` horizontal transverse, `y` vertical transverse (gravity
//! points along −y), `z` along the trap axis. The trap axis is `x = y = 0`.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

/// Annular optical potential of the hollow beam, in temperature units.
///
/// Inside the ring the intensity rises as a Gaussian flank of 1/e² half-width
/// `wall_width`; at and beyond `ring_radius` the potential is clamped to
/// `peak_depth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingPotential {
    pub ring_radius: f64,
    pub wall_width: f64,
    /// K
    pub peak_depth: f64,
    /// K
    pub endcap_depth: f64,
}

impl Default for RingPotential {
    fn default() -> Self {
        RingPotential {
            ring_radius: 95e-6,
            wall_width: 20e-6,
            peak_depth: 45e-6,
            endcap_depth: 45e-6,
        }
    }
}

impl RingPotential {
    pub fn validate(&self) -> Result<()> {
        if !(self.ring_radius > 0.0 && self.ring_radius.is_finite()) {
            return Err(Error::invalid("ring_radius must be positive"));
        }
        if !(self.wall_width > 0.0 && self.wall_width.is_finite()) {
            return Err(Error::invalid("wall_width must be positive"));
        }
        if !(self.peak_depth >= 0.0 && self.peak_depth.is_finite()) {
            return Err(Error::invalid("peak_depth must be non-negative"));
        }
        if !(self.endcap_depth >= 0.0 && self.endcap_depth.is_finite()) {
            return Err(Error::invalid("endcap_depth must be non-negative"));
        }
        Ok(())
    }

    pub fn with_wall_width(mut self, wall_width: f64) -> Self {
        self.wall_width = wall_width;
        self
    }

    /// Potential (K) at radial distance `r` from the axis.
    pub fn at_radius(&self, r: f64) -> f64 {
        if r >= self.ring_radius {
            return self.peak_depth;
        }
        let d = r - self.ring_radius;
        self.peak_depth * (-2.0 * d * d / (self.wall_width * self.wall_width)).exp()
    }

    /// dU/dr (K/m). Zero on the clamped plateau.
    pub fn radial_slope(&self, r: f64) -> f64 {
        if r >= self.ring_radius {
            return 0.0;
        }
        let w2 = self.wall_width * self.wall_width;
        let d = r - self.ring_radius;
        self.peak_depth * (-2.0 * d * d / w2).exp() * (-4.0 * d / w2)
    }
}

/// Potential (K) of the ring at transverse position `r`.
pub fn potential_at(r: &Vector2<f64>, ring: &RingPotential) -> f64 {
    ring.at_radius(r.norm())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WallModel {
    /// Specular reflection at the cylinder radius.
    Hard,
    /// Force from the ring potential, with a specular backstop at the ring radius.
    Soft(RingPotential),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndcapModel {
    Hard,
    /// Gaussian flank of the light sheets: depth in K, 1/e² half-width in m.
    Soft { depth: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapGeometry {
    pub radius: f64,
    pub length: f64,
    pub wall_model: WallModel,
    pub endcap_model: EndcapModel,
}

impl Default for TrapGeometry {
    fn default() -> Self {
        TrapGeometry {
            radius: 95e-6,
            length: 3e-3,
            wall_model: WallModel::Hard,
            endcap_model: EndcapModel::Hard,
        }
    }
}

impl TrapGeometry {
    /// The default geometry with the soft ring wall of `ring`.
    pub fn soft(ring: RingPotential) -> Self {
        TrapGeometry {
            radius: ring.ring_radius,
            wall_model: WallModel::Soft(ring),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid("trap radius must be positive"));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::invalid("trap length must be positive"));
        }
        if let WallModel::Soft(ring) = &self.wall_model {
            ring.validate()?;
            if ring.ring_radius > self.radius * (1.0 + 1e-12) {
                return Err(Error::invalid("ring radius exceeds the trap radius"));
            }
        }
        if let EndcapModel::Soft { depth, width } = self.endcap_model {
            if !(depth >= 0.0 && width > 0.0 && depth.is_finite() && width.is_finite()) {
                return Err(Error::invalid("soft endcap needs depth >= 0 and width > 0"));
            }
        }
        Ok(())
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.length
    }

    /// Optical potential (K) at a 3-D position, walls plus end caps.
    pub fn potential(&self, p: &Vector3<f64>) -> f64 {
        let mut u = 0.0;
        if let WallModel::Soft(ring) = &self.wall_model {
            u += ring.at_radius(p.x.hypot(p.y));
        }
        if let EndcapModel::Soft { depth, width } = self.endcap_model {
            let d = p.z.abs() - self.half_length();
            u += if d >= 0.0 {
                depth
            } else {
                depth * (-2.0 * d * d / (width * width)).exp()
            };
        }
        u
    }

    /// Gradient of the optical potential (K/m).
    pub fn potential_gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let mut grad = Vector3::zeros();
        if let WallModel::Soft(ring) = &self.wall_model {
            let r = p.x.hypot(p.y);
            if r > 0.0 {
                let s = ring.radial_slope(r) / r;
                grad.x += s * p.x;
                grad.y += s * p.y;
            }
        }
        if let EndcapModel::Soft { depth, width } = self.endcap_model {
            let d = p.z.abs() - self.half_length();
            if d < 0.0 {
                let w2 = width * width;
                let slope = depth * (-2.0 * d * d / w2).exp() * (-4.0 * d / w2);
                grad.z += slope * p.z.signum();
            }
        }
        grad
    }

    /// Whether the trap exerts any force besides the hard boundaries.
    pub fn has_soft_potential(&self) -> bool {
        matches!(self.wall_model, WallModel::Soft(_))
            || matches!(self.endcap_model, EndcapModel::Soft { .. })
    }

    /// Length scale an atom must not cross in a single sub-step.
    pub fn smallest_feature(&self) -> f64 {
        let mut scale = (2.0 * self.radius).min(self.length);
        if let WallModel::Soft(ring) = &self.wall_model {
            scale = scale.min(ring.wall_width);
        }
        if let EndcapModel::Soft { width, .. } = self.endcap_model {
            scale = scale.min(width);
        }
        scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dark_center() {
        let ring = RingPotential::default();
        let u = potential_at(&Vector2::zeros(), &ring);
        assert!(u < 45e-9, "{u}");
        assert!(u < 1e-3 * ring.peak_depth);
    }

    #[test]
    fn peak_at_ring_radius() {
        let ring = RingPotential::default();
        assert_eq!(potential_at(&Vector2::new(95e-6, 0.0), &ring), 45e-6);
        assert_eq!(potential_at(&Vector2::new(0.0, -200e-6), &ring), 45e-6);
    }

    #[test]
    fn one_wall_width_inside() {
        let ring = RingPotential::default();
        let u = potential_at(&Vector2::new(0.0, 75e-6), &ring);
        let expected = 45e-6 * (-2.0f64).exp();
        assert!((u - expected).abs() < 1e-18);
        assert!((u - 6.09e-6).abs() < 0.005e-6);
    }

    #[test]
    fn slope_matches_finite_difference() {
        let ring = RingPotential::default();
        for r in [10e-6, 50e-6, 80e-6, 94e-6] {
            let h = 1e-9;
            let fd = (ring.at_radius(r + h) - ring.at_radius(r - h)) / (2.0 * h);
            let an = ring.radial_slope(r);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{r}: {fd} vs {an}");
        }
    }

    #[test]
    fn soft_endcap_gradient_points_outward() {
        let trap = TrapGeometry {
            endcap_model: EndcapModel::Soft { depth: 45e-6, width: 20e-6 },
            ..Default::default()
        };
        let g = trap.potential_gradient(&Vector3::new(0.0, 0.0, 1.49e-3));
        assert!(g.z > 0.0);
        let g = trap.potential_gradient(&Vector3::new(0.0, 0.0, -1.49e-3));
        assert!(g.z < 0.0);
    }

    proptest! {
        #[test]
        fn potential_is_bounded_and_continuous(r in 0.0f64..300e-6, w in 5e-6f64..60e-6) {
            let ring = RingPotential::default().with_wall_width(w);
            let u = ring.at_radius(r);
            prop_assert!(u >= 0.0 && u <= ring.peak_depth);
            let du = (ring.at_radius(r + 1e-10) - u).abs();
            prop_assert!(du < 1e-3 * ring.peak_depth);
        }
    }
}
