//! IMU and fingertip contact sensors.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::SensorConfig;
use crate::math::{RigidBodyState, Vec3};

pub const IMU_CSV_VERSION: u32 = 1;
pub const IMU_CSV_HEADER: &str = "t,ax_w,ay_w,az_w,fx_b,fy_b,fz_b,wx,wy,wz";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    /// Kinematic acceleration, world frame, m/s².
    pub accel_world: Vec3,
    /// Specific force (acceleration minus gravity), body frame, m/s².
    pub specific_force: Vec3,
    /// Angular rate, body frame, rad/s.
    pub angular_rate: Vec3,
}

/// Decimating IMU. Acceleration is the velocity difference across one
/// output period, i.e. the mean of the per-step accelerations in the window,
/// so decimation does not alias the fluid's step-to-step noise.
#[derive(Debug, Clone)]
pub struct Imu {
    steps_per_sample: u64,
    period: f64,
    gravity: Vec3,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    last_velocity: Option<(u64, Vec3)>,
}

impl Imu {
    /// `dt` is the physics step; the output rate must divide the step rate.
    pub fn new(cfg: &SensorConfig, dt: f64, gravity: f64, seed: u64) -> Result<Self, String> {
        let ratio = 1.0 / (cfg.imu_rate * dt);
        let steps = ratio.round();
        if !(cfg.imu_rate > 0.0) || steps < 1.0 || (ratio - steps).abs() > 1e-6 {
            return Err(format!("IMU rate {} Hz does not divide the step rate {} Hz", cfg.imu_rate, 1.0 / dt));
        }
        let noise = if cfg.imu_noise_std > 0.0 {
            Some(Normal::new(0.0, cfg.imu_noise_std).map_err(|e| e.to_string())?)
        } else {
            None
        };
        Ok(Self {
            steps_per_sample: steps as u64,
            period: steps * dt,
            gravity: Vec3::new(0.0, 0.0, -gravity),
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x1a2b_3c4d),
            last_velocity: None,
        })
    }

    pub fn steps_per_sample(&self) -> u64 {
        self.steps_per_sample
    }

    /// Feed the body state after physics step `step` (time `t`). Returns a
    /// sample on every output tick once a full window has elapsed.
    pub fn observe(&mut self, step: u64, t: f64, body: &RigidBodyState) -> Option<ImuSample> {
        if !step.is_multiple_of(self.steps_per_sample) {
            return None;
        }
        let prev = self.last_velocity.replace((step, body.linear_velocity));
        let (_, v_prev) = prev?;
        let mut accel_world = (body.linear_velocity - v_prev) / self.period;
        let mut specific_force = body.orientation.inverse() * (accel_world - self.gravity);
        let mut angular_rate = body.angular_velocity;
        if let Some(n) = &self.noise {
            for v in [&mut accel_world, &mut specific_force, &mut angular_rate] {
                for k in 0..3 {
                    v[k] += n.sample(&mut self.rng);
                }
            }
        }
        Some(ImuSample { t, accel_world, specific_force, angular_rate })
    }

    /// Seed the velocity window without emitting a sample.
    pub fn prime(&mut self, step: u64, body: &RigidBodyState) {
        self.last_velocity = Some((step, body.linear_velocity));
    }
}

pub fn write_imu_csv<W: Write>(mut w: W, samples: &[ImuSample]) -> io::Result<()> {
    writeln!(w, "# seals-imu v{IMU_CSV_VERSION}")?;
    writeln!(w, "{IMU_CSV_HEADER}")?;
    for s in samples {
        let a = s.accel_world;
        let f = s.specific_force;
        let g = s.angular_rate;
        writeln!(w, "{},{},{},{},{},{},{},{},{},{}", s.t, a.x, a.y, a.z, f.x, f.y, f.z, g.x, g.y, g.z)?;
    }
    Ok(())
}

/// What a contact point touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactTarget {
    Floor,
    Wall,
    Crab,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContactEvent {
    pub finger: usize,
    /// Contact force magnitude, N.
    pub force: f64,
    pub target: ContactTarget,
    pub t: f64,
}

/// One event per fingertip whose contact force reaches `threshold`.
pub fn poll_contacts(fingertips: &[Option<(ContactTarget, f64)>], threshold: f64, t: f64) -> Vec<ContactEvent> {
    fingertips
        .iter()
        .enumerate()
        .filter_map(|(finger, c)| {
            let (target, force) = (*c)?;
            (force >= threshold).then_some(ContactEvent { finger, force, target, t })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{integrate_rigid_body, Mat3, Quat};
    use approx::assert_relative_eq;

    fn imu(noise: f64) -> Imu {
        Imu::new(&SensorConfig { imu_rate: 50.0, imu_noise_std: noise, contact_threshold: 0.1 }, 0.004, 9.81, 7).unwrap()
    }

    fn body() -> RigidBodyState {
        RigidBodyState::new("b", 1.0, Mat3::identity()).unwrap()
    }

    #[test]
    fn decimates_to_one_sample_per_five_steps() {
        let mut s = imu(0.0);
        let b = body();
        let times: Vec<f64> = (0..=50u64).filter_map(|k| s.observe(k, k as f64 * 0.004, &b)).map(|x| x.t).collect();
        assert_eq!(times.len(), 10);
        for w in times.windows(2) {
            assert!((w[1] - w[0] - 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn rest_reads_plus_g() {
        let mut s = imu(0.0);
        let b = body();
        s.observe(0, 0.0, &b);
        let x = s.observe(5, 0.02, &b).unwrap();
        assert_eq!(x.accel_world, Vec3::zeros());
        assert_relative_eq!(x.specific_force, Vec3::new(0.0, 0.0, 9.81), epsilon = 1e-12);
    }

    #[test]
    fn free_fall_reads_zero_specific_force() {
        let mut s = imu(0.0);
        let mut b = body().with_pose(Vec3::zeros(), Quat::from_euler_angles(0.3, 0.1, 0.0));
        s.observe(0, 0.0, &b);
        let mut out = None;
        for k in 1..=5 {
            b = integrate_rigid_body(&b, Vec3::new(0.0, 0.0, -9.81), Vec3::zeros(), 0.004).unwrap();
            out = s.observe(k, k as f64 * 0.004, &b);
        }
        let x = out.unwrap();
        assert_relative_eq!(x.accel_world.z, -9.81, epsilon = 1e-9);
        assert!(x.specific_force.norm() < 1e-9);
    }

    #[test]
    fn noise_is_seeded() {
        let b = body();
        let run = || {
            let mut s = imu(0.05);
            (0..=20u64).filter_map(|k| s.observe(k, k as f64 * 0.004, &b)).collect::<Vec<_>>()
        };
        let (a, c) = (run(), run());
        assert_eq!(a, c);
        assert!(a[0].accel_world.norm() > 0.0);
    }

    #[test]
    fn rejects_non_dividing_rate() {
        let cfg = SensorConfig { imu_rate: 60.0, ..Default::default() };
        assert!(Imu::new(&cfg, 0.004, 9.81, 0).is_err());
    }

    #[test]
    fn contact_threshold() {
        let tips = [None, Some((ContactTarget::Floor, 0.5)), Some((ContactTarget::Crab, 0.05))];
        let ev = poll_contacts(&tips, 0.1, 1.0);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].finger, 1);
        assert_eq!(ev[0].force, 0.5);
        assert!(poll_contacts(&[None, None, None], 0.1, 0.0).is_empty());
    }

    #[test]
    fn csv_has_versioned_header() {
        let mut buf = Vec::new();
        let s = ImuSample { t: 0.02, accel_world: Vec3::zeros(), specific_force: Vec3::z() * 9.81, angular_rate: Vec3::zeros() };
        write_imu_csv(&mut buf, &[s]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seals-imu v1");
        assert_eq!(lines[1], IMU_CSV_HEADER);
        assert_eq!(lines[2].split(',').count(), 10);
    }
}
