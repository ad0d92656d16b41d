//! Medium-dependent forces: linear air drag, fluid coupling wrenches, wet
//! fraction with surface-crossing hysteresis, and thrust medium factors.

use crate::fluid::{BodyId, CouplingImpulse};
use crate::math::Vec3;

/// A boundary particle with at least this many fluid neighbors counts as wet.
pub const WET_NEIGHBORS: u16 = 3;
/// Crossing threshold on the wet fraction.
pub const CROSSING_LEVEL: f64 = 0.5;
/// Full width of the hysteresis band around the crossing threshold.
pub const CROSSING_HYSTERESIS: f64 = 0.1;

/// Linear drag coefficients per world axis, N/(m/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragModel {
    pub c: Vec3,
}

impl DragModel {
    pub fn new(c: Vec3) -> Option<Self> {
        c.iter().all(|k| (0.0..1.0).contains(k)).then_some(Self { c })
    }

    pub fn force(&self, v: &Vec3, wet_fraction: f64) -> Vec3 {
        air_drag(&self.c, v, wet_fraction)
    }
}

/// Air drag `−c∘v`, faded out as the body submerges. Water resistance comes
/// from particle coupling instead.
pub fn air_drag(c: &Vec3, v: &Vec3, wet_fraction: f64) -> Vec3 {
    -c.component_mul(v) * (1.0 - wet_fraction.clamp(0.0, 1.0))
}

/// Thrust multiplier blended between air and water by the wet fraction.
pub fn thrust_factor(air: f64, water: f64, wet_fraction: f64) -> f64 {
    let phi = wet_fraction.clamp(0.0, 1.0);
    air * (1.0 - phi) + water * phi
}

/// Net effect of one fluid substep on one body, world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CouplingWrench {
    pub force: Vec3,
    /// Torque about the body CoG.
    pub torque: Vec3,
    /// Total momentum transferred, `force · dt`.
    pub momentum: Vec3,
}

/// Sum the impulses addressed to `owner` into a force and a torque about `cog`.
pub fn apply_coupling(owner: BodyId, impulses: &[CouplingImpulse], cog: &Vec3, dt: f64) -> CouplingWrench {
    let mut w = CouplingWrench::default();
    for imp in impulses.iter().filter(|i| i.owner == owner) {
        w.momentum += imp.impulse;
        w.torque += (imp.point - cog).cross(&imp.impulse);
    }
    w.force = w.momentum / dt;
    w.torque /= dt;
    w
}

/// Fraction of a body's boundary particles that are wet.
pub fn wet_fraction(boundary: &[usize], fluid_neighbors: &[u16]) -> f64 {
    if boundary.is_empty() {
        return 0.0;
    }
    let wet = boundary
        .iter()
        .filter(|&&i| fluid_neighbors.get(i).copied().unwrap_or(0) >= WET_NEIGHBORS)
        .count();
    wet as f64 / boundary.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    /// Wet fraction rose through the upper threshold.
    Entered,
    /// Wet fraction fell through the lower threshold.
    Exited,
}

/// Per-body medium bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MediumState {
    pub fraction: f64,
    pub submerged: bool,
    /// Time of the last crossing, seconds.
    pub last_crossing: Option<f64>,
}

impl MediumState {
    /// Record a new wet fraction and report a crossing if one occurred.
    pub fn update(&mut self, fraction: f64, t: f64) -> Option<Crossing> {
        self.fraction = fraction.clamp(0.0, 1.0);
        let half = 0.5 * CROSSING_HYSTERESIS;
        let event = if !self.submerged && self.fraction >= CROSSING_LEVEL + half {
            self.submerged = true;
            Some(Crossing::Entered)
        } else if self.submerged && self.fraction <= CROSSING_LEVEL - half {
            self.submerged = false;
            Some(Crossing::Exited)
        } else {
            None
        };
        if event.is_some() {
            self.last_crossing = Some(t);
        }
        event
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn drag_cases() {
        let c = Vec3::repeat(0.1);
        assert_eq!(air_drag(&c, &Vec3::zeros(), 0.0), Vec3::zeros());
        assert_relative_eq!(air_drag(&c, &Vec3::new(1.0, 2.0, 3.0), 0.0), Vec3::new(-0.1, -0.2, -0.3), epsilon = 1e-15);
        assert_eq!(air_drag(&c, &Vec3::new(5.0, -3.0, 9.0), 1.0), Vec3::zeros());
        assert!(DragModel::new(Vec3::new(0.5, 1.0, 0.2)).is_none());
        assert!(DragModel::new(Vec3::new(0.5, 0.0, 0.2)).is_some());
    }

    #[test]
    fn coupling_sums_force_and_torque() {
        let imps = vec![
            CouplingImpulse { owner: 1, point: Vec3::new(1.0, 0.0, 0.0), impulse: Vec3::new(0.0, 0.0, 0.01) },
            CouplingImpulse { owner: 1, point: Vec3::new(-1.0, 0.0, 0.0), impulse: Vec3::new(0.0, 0.0, 0.01) },
            CouplingImpulse { owner: 2, point: Vec3::zeros(), impulse: Vec3::new(5.0, 0.0, 0.0) },
        ];
        let w = apply_coupling(1, &imps, &Vec3::zeros(), 0.002);
        assert_relative_eq!(w.force, Vec3::new(0.0, 0.0, 10.0), epsilon = 1e-12);
        assert!(w.torque.norm() < 1e-12);
        assert_eq!(apply_coupling(7, &imps, &Vec3::zeros(), 0.002), CouplingWrench::default());
    }

    #[test]
    fn wet_fraction_counts_threshold() {
        let nbrs = vec![0, 3, 2, 10];
        assert_relative_eq!(wet_fraction(&[0, 1, 2, 3], &nbrs), 0.5);
        assert_eq!(wet_fraction(&[], &nbrs), 0.0);
    }

    #[test]
    fn hysteresis_prevents_chatter() {
        let mut m = MediumState::default();
        assert_eq!(m.update(0.52, 0.0), None);
        assert_eq!(m.update(0.56, 0.1), Some(Crossing::Entered));
        assert_eq!(m.update(0.48, 0.2), None);
        assert_eq!(m.update(0.53, 0.3), None);
        assert_eq!(m.update(0.44, 0.4), Some(Crossing::Exited));
        assert_eq!(m.last_crossing, Some(0.4));
    }

    proptest! {
        #[test]
        fn drag_is_dissipative(c in proptest::array::uniform3(0.0f64..1.0), v in proptest::array::uniform3(-50.0f64..50.0), phi in 0.0f64..1.0) {
            let v = Vec3::from(v);
            prop_assert!(air_drag(&Vec3::from(c), &v, phi).dot(&v) <= 0.0);
        }

        #[test]
        fn thrust_factor_between_media(a in 0.0f64..2.0, w in 0.0f64..2.0, phi in -0.5f64..1.5) {
            let f = thrust_factor(a, w, phi);
            prop_assert!(f >= a.min(w) - 1e-12 && f <= a.max(w) + 1e-12);
        }
    }
}
