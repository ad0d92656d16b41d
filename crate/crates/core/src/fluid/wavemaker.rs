use std::f64::consts::PI;

use crate::fluid::particles::ParticleSet;
use crate::math::Vec3;

/// Piston displacement `A sin(2π f t)`, meters.
pub fn piston_displacement(t: f64, amplitude: f64, frequency: f64) -> f64 {
    amplitude * (2.0 * PI * frequency * t).sin()
}

/// Kinematic piston: a plane of boundary particles oscillating along x.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavemaker {
    pub amplitude: f64,
    pub frequency: f64,
    /// Plane position at zero displacement.
    pub rest_x: f64,
    /// Piston particles and their distance behind the plane.
    pub particles: Vec<(usize, f64)>,
}

impl Wavemaker {
    pub fn plane_x(&self, t: f64) -> f64 {
        self.rest_x + piston_displacement(t, self.amplitude, self.frequency)
    }

    pub fn plane_velocity(&self, t: f64) -> f64 {
        let w = 2.0 * PI * self.frequency;
        self.amplitude * w * (w * t).cos()
    }

    /// Move the piston particles to their positions at time `t`.
    pub fn step(&self, particles: &mut ParticleSet, t: f64) {
        let x = self.plane_x(t);
        let v = Vec3::new(self.plane_velocity(t), 0.0, 0.0);
        for &(i, behind) in &self.particles {
            let mut p = particles.position[i];
            p.x = x - behind;
            particles.set_kinematic(i, p, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::particles::Phase;

    fn piston(amplitude: f64, frequency: f64) -> (Wavemaker, ParticleSet) {
        let mut p = ParticleSet::new();
        let i = p.push_boundary(Vec3::new(0.3, 0.1, 0.1), 1.0, 1.0, Phase::Wavemaker, None, Vec3::zeros());
        let j = p.push_boundary(Vec3::new(0.265, 0.1, 0.1), 1.0, 1.0, Phase::Wavemaker, None, Vec3::zeros());
        let w = Wavemaker { amplitude, frequency, rest_x: 0.3, particles: vec![(i, 0.0), (j, 0.035)] };
        (w, p)
    }

    #[test]
    fn zero_amplitude_is_stationary() {
        let (w, mut p) = piston(0.0, 1.0);
        let before = p.position.clone();
        for k in 0..50 {
            w.step(&mut p, k as f64 * 0.01);
        }
        assert_eq!(p.position, before);
    }

    #[test]
    fn quarter_period_is_full_stroke() {
        let f = 0.8;
        assert!((piston_displacement(1.0 / (4.0 * f), 0.3, f) - 0.3).abs() < 1e-12);
        let (w, mut p) = piston(0.3, f);
        w.step(&mut p, 1.0 / (4.0 * f));
        assert!((p.position[0].x - 0.6).abs() < 1e-12);
        assert!((p.position[1].x - 0.565).abs() < 1e-12);
        assert!(p.velocity[0].x.abs() < 1e-9);
    }
}
