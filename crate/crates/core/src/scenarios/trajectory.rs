//! Parametric reference trajectories with analytic derivatives.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefSample {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

pub trait ReferenceTrajectory {
    fn sample(&self, t: f64) -> RefSample;
}

/// Fixed setpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hold(pub Vec3);

impl ReferenceTrajectory for Hold {
    fn sample(&self, _t: f64) -> RefSample {
        RefSample { position: self.0, velocity: Vec3::zeros(), acceleration: Vec3::zeros() }
    }
}

/// Ellipse in the vertical x–z plane, traversed at constant angular rate and
/// starting at the top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oval {
    pub center: Vec3,
    /// Horizontal semi-axis, meters.
    pub a: f64,
    /// Vertical semi-axis, meters.
    pub b: f64,
    pub period: f64,
}

impl Oval {
    fn rate(&self) -> f64 {
        TAU / self.period
    }
}

impl ReferenceTrajectory for Oval {
    fn sample(&self, t: f64) -> RefSample {
        let w = self.rate();
        let th = FRAC_PI_2 + w * t;
        let (s, c) = th.sin_cos();
        RefSample {
            position: self.center + Vec3::new(self.a * c, 0.0, self.b * s),
            velocity: Vec3::new(-self.a * w * s, 0.0, self.b * w * c),
            acceleration: Vec3::new(-self.a * w * w * c, 0.0, -self.b * w * w * s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn oval() -> Oval {
        Oval { center: Vec3::new(1.5, 0.2, 0.4), a: 1.0, b: 0.5, period: 40.0 }
    }

    #[test]
    fn starts_at_top_and_crosses_the_center_level_twice() {
        let o = oval();
        assert_relative_eq!(o.sample(0.0).position, Vec3::new(1.5, 0.2, 0.9), epsilon = 1e-12);
        let z: Vec<f64> = (0..=400).map(|k| o.sample(k as f64 * 0.1).position.z - 0.4).collect();
        let crossings = z.windows(2).filter(|w| w[0].signum() != w[1].signum() && w[1] != 0.0).count();
        assert_eq!(crossings, 2);
        assert_relative_eq!(o.sample(40.0).position, o.sample(0.0).position, epsilon = 1e-12);
    }

    #[test]
    fn zero_size_oval_is_a_hold() {
        let o = Oval { a: 0.0, b: 0.0, ..oval() };
        let h = Hold(o.center);
        for t in [0.0, 3.0, 17.5] {
            assert_eq!(o.sample(t).position, h.sample(t).position);
            assert_eq!(o.sample(t).velocity.norm(), 0.0);
        }
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(t in 0.0f64..80.0, a in 0.0f64..2.0, b in 0.0f64..1.0, period in 5.0f64..60.0) {
            let o = Oval { a, b, period, ..oval() };
            let h = 1e-4;
            let (m, p) = (o.sample(t - h), o.sample(t + h));
            let v = (p.position - m.position) / (2.0 * h);
            let acc = (p.velocity - m.velocity) / (2.0 * h);
            let s = o.sample(t);
            prop_assert!((v - s.velocity).norm() <= 1e-6);
            prop_assert!((acc - s.acceleration).norm() <= 1e-6);
        }
    }
}
