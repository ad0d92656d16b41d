//! Articulated crab: a box carapace, eight two-joint legs and two claws
//! (18 revolute joints), each driven by a stiffness/damping position
//! controller. Legs are massless; they act on the carapace only through
//! frictional contact of their tips with the floor.

use std::f64::consts::PI;

use crate::config::{CrabConfig, CrabMode};
use crate::contact::{box_corners, resolve_contacts, ContactPoint, Plane, PointSet};
use crate::error::IntegrationError;
use crate::math::{integrate_rigid_body, Mat3, Quat, RigidBodyState, Vec3};

pub const LEGS: usize = 8;
pub const CRAB_JOINTS: usize = 2 * LEGS + 2;
/// Linear and angular damping standing in for water resistance on the carapace.
const WATER_DRAG: f64 = 0.5;
const WATER_ANGULAR_DRAG: f64 = 0.002;
const CONTACT_ITERATIONS: usize = 30;

/// Position controller `K_d (V_d − V) + K_s (P_d − P)`.
pub fn joint_force(kd: f64, ks: f64, v_desired: f64, v: f64, p_desired: f64, p: f64) -> f64 {
    kd * (v_desired - v) + ks * (p_desired - p)
}

#[inline]
pub fn swing_joint(leg: usize) -> usize {
    2 * leg
}

#[inline]
pub fn lift_joint(leg: usize) -> usize {
    2 * leg + 1
}

/// Legs 0..4 are on the left (+y), 4..8 on the right; index within a side
/// runs rear to front. Alternate legs form two groups half a period apart.
pub fn leg_group(leg: usize) -> usize {
    (leg % 4 + leg / 4) % 2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gait {
    pub period: f64,
    pub swing_amplitude: f64,
    pub lift_amplitude: f64,
}

impl Gait {
    /// Joint targets at time `t`. Amplitudes ramp in over the first period,
    /// so `t = 0` is the neutral stance. A leg pushes backward (stance) while
    /// its swing angle rises and is lifted while it returns.
    pub fn targets(&self, t: f64) -> [f64; CRAB_JOINTS] {
        let envelope = (t / self.period).clamp(0.0, 1.0);
        let mut out = [0.0; CRAB_JOINTS];
        for leg in 0..LEGS {
            let theta = 2.0 * PI * t / self.period + PI * leg_group(leg) as f64;
            out[swing_joint(leg)] = envelope * self.swing_amplitude * theta.sin();
            out[lift_joint(leg)] = envelope * self.lift_amplitude * (-theta.cos()).max(0.0);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrabModel {
    pub half_extents: Vec3,
    pub leg_length: f64,
    pub leg_droop: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub joint_inertia: f64,
    pub limits: [[f64; 2]; CRAB_JOINTS],
    pub gait: Gait,
    pub mode: CrabMode,
    pub friction: f64,
}

impl CrabModel {
    pub fn from_config(c: &CrabConfig) -> Self {
        let mut limits = [[-0.8, 0.8]; CRAB_JOINTS];
        for leg in 0..LEGS {
            limits[swing_joint(leg)] = [-0.6, 0.6];
            limits[lift_joint(leg)] = [-0.5, c.leg_droop.min(1.2)];
        }
        Self {
            half_extents: c.body_half_extents.into(),
            leg_length: c.leg_length,
            leg_droop: c.leg_droop,
            stiffness: c.stiffness,
            damping: c.damping,
            joint_inertia: c.joint_inertia,
            limits,
            gait: Gait { period: c.gait_period, swing_amplitude: c.swing_amplitude, lift_amplitude: c.lift_amplitude },
            mode: c.mode,
            friction: c.friction,
        }
    }

    pub fn hip(&self, leg: usize) -> Vec3 {
        let side = if leg < 4 { 1.0 } else { -1.0 };
        let along = [-0.75, -0.25, 0.25, 0.75][leg % 4];
        Vec3::new(along * self.half_extents.x, side * self.half_extents.y, 0.0)
    }

    /// Leg tip in the carapace frame for the given joint angles.
    pub fn tip(&self, leg: usize, joints: &[f64; CRAB_JOINTS]) -> Vec3 {
        let side = if leg < 4 { 1.0 } else { -1.0 };
        let s = joints[swing_joint(leg)];
        let droop = self.leg_droop - joints[lift_joint(leg)];
        let dir = Vec3::new(-s.sin(), side * s.cos(), 0.0);
        self.hip(leg) + (dir * droop.cos() - Vec3::z() * droop.sin()) * self.leg_length
    }

    /// Height of the carapace center above the floor in the neutral stance.
    pub fn stance_height(&self) -> f64 {
        (self.leg_length * self.leg_droop.sin()).max(self.half_extents.z)
    }

    pub fn inertia(&self, mass: f64) -> Mat3 {
        let d = self.half_extents * 2.0;
        Mat3::from_diagonal(&Vec3::new(
            mass * (d.y * d.y + d.z * d.z) / 12.0,
            mass * (d.x * d.x + d.z * d.z) / 12.0,
            mass * (d.x * d.x + d.y * d.y) / 12.0,
        ))
    }
}

#[derive(Debug, Clone)]
pub struct Crab {
    pub model: CrabModel,
    pub body: RigidBodyState,
    pub joints: [f64; CRAB_JOINTS],
    pub rates: [f64; CRAB_JOINTS],
    /// Targets used in external mode.
    pub external_targets: [f64; CRAB_JOINTS],
    prev_joints: [f64; CRAB_JOINTS],
}

impl Crab {
    pub fn new(c: &CrabConfig) -> Result<Self, IntegrationError> {
        let model = CrabModel::from_config(c);
        let z = model.stance_height();
        let body = RigidBodyState::new("crab", c.mass, model.inertia(c.mass))?
            .with_pose(Vec3::new(c.position[0], c.position[1], z), Quat::from_axis_angle(&Vec3::z_axis(), c.heading));
        Ok(Self {
            model,
            body,
            joints: [0.0; CRAB_JOINTS],
            rates: [0.0; CRAB_JOINTS],
            external_targets: [0.0; CRAB_JOINTS],
            prev_joints: [0.0; CRAB_JOINTS],
        })
    }

    pub fn targets(&self, t: f64) -> [f64; CRAB_JOINTS] {
        match self.model.mode {
            CrabMode::Gait => self.model.gait.targets(t),
            CrabMode::External => self.external_targets,
        }
    }

    /// Per-joint controller outputs for the given targets.
    pub fn joint_torques(&self, targets: &[f64; CRAB_JOINTS]) -> [f64; CRAB_JOINTS] {
        std::array::from_fn(|j| {
            joint_force(self.model.damping, self.model.stiffness, 0.0, self.rates[j], targets[j], self.joints[j])
        })
    }

    fn step_joints(&mut self, t: f64, dt: f64) {
        self.prev_joints = self.joints;
        let torques = self.joint_torques(&self.targets(t));
        for j in 0..CRAB_JOINTS {
            self.rates[j] += torques[j] / self.model.joint_inertia * dt;
            self.joints[j] += self.rates[j] * dt;
            let [lo, hi] = self.model.limits[j];
            if self.joints[j] < lo || self.joints[j] > hi {
                self.joints[j] = self.joints[j].clamp(lo, hi);
                self.rates[j] = 0.0;
            }
        }
    }

    /// Carapace corners and leg tips, with tip velocities from joint motion.
    pub fn contact_points(&self, dt: f64) -> Vec<ContactPoint> {
        let mut pts: Vec<ContactPoint> =
            box_corners(&self.model.half_extents, &Vec3::zeros()).iter().map(|p| ContactPoint::fixed(*p)).collect();
        for leg in 0..LEGS {
            let now = self.model.tip(leg, &self.joints);
            let before = self.model.tip(leg, &self.prev_joints);
            pts.push(ContactPoint { local: now, extra_velocity: self.body.orientation * ((now - before) / dt) });
        }
        pts
    }

    /// Advance joints and carapace by `dt` and resolve ground contacts.
    pub fn step(&mut self, t: f64, dt: f64, gravity: f64, planes: &[Plane]) -> Result<(), IntegrationError> {
        self.step_joints(t, dt);
        let force = Vec3::new(0.0, 0.0, -self.body.mass * gravity) - self.body.linear_velocity * WATER_DRAG;
        let torque = -self.body.angular_velocity * WATER_ANGULAR_DRAG;
        self.body = integrate_rigid_body(&self.body, force, torque, dt)?;
        let pts = self.contact_points(dt);
        resolve_contacts(&mut [&mut self.body], &[PointSet { body: 0, points: &pts }], planes, &[], self.model.friction, CONTACT_ITERATIONS);
        Ok(())
    }

    /// Roll and pitch magnitude of the carapace, radians.
    pub fn tilt(&self) -> f64 {
        (self.body.orientation * Vec3::z()).z.clamp(-1.0, 1.0).acos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::tank_planes;
    use approx::assert_relative_eq;

    #[test]
    fn crab_has_eighteen_joints() {
        assert_eq!(CRAB_JOINTS, 18);
        let crab = Crab::new(&CrabConfig::default()).unwrap();
        assert_eq!(crab.joints.len(), 18);
        assert_eq!((0..LEGS).filter(|&l| leg_group(l) == 0).count(), 4);
    }

    #[test]
    fn joint_force_cases() {
        assert_eq!(joint_force(1.0, 2.0, 0.0, 0.0, 0.5, 0.5), 0.0);
        assert_relative_eq!(joint_force(1.0, 2.0, 0.0, 0.1, 0.5, 0.3), 0.3, epsilon = 1e-15);
        assert!(joint_force(1.0, 0.0, 0.0, 0.7, 0.0, 0.2) < 0.0);
    }

    #[test]
    fn gait_neutral_at_start_and_swaps_at_half_period() {
        let g = Gait { period: 1.5, swing_amplitude: 0.25, lift_amplitude: 0.3 };
        assert_eq!(g.targets(0.0), [0.0; CRAB_JOINTS]);
        let t0 = 2.0 * g.period + 0.37;
        let a = g.targets(t0);
        let b = g.targets(t0 + g.period / 2.0);
        let mate = |leg: usize| (0..LEGS).find(|&m| leg_group(m) != leg_group(leg) && m / 4 == leg / 4).unwrap();
        for leg in 0..LEGS {
            let m = mate(leg);
            assert!((b[swing_joint(leg)] - a[swing_joint(m)]).abs() < 1e-12);
            assert!((b[lift_joint(leg)] - a[lift_joint(m)]).abs() < 1e-12);
        }
        let p = g.targets(t0 + g.period);
        for j in 0..CRAB_JOINTS {
            assert!((p[j] - a[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_amplitude_crab_stays_put() {
        let cfg = CrabConfig { swing_amplitude: 0.0, lift_amplitude: 0.0, ..Default::default() };
        let mut crab = Crab::new(&cfg).unwrap();
        let start = crab.body.position;
        let planes = tank_planes(None);
        for k in 0..1000 {
            crab.step(k as f64 * 0.004, 0.004, 9.81, &planes).unwrap();
        }
        assert!((crab.body.position.xy() - start.xy()).norm() < 1e-3, "{:?} -> {:?}, tilt {}", start, crab.body.position, crab.tilt());
    }

    #[test]
    fn targets_stay_within_limits() {
        let crab = Crab::new(&CrabConfig::default()).unwrap();
        for k in 0..400 {
            let t = crab.targets(k as f64 * 0.013);
            for j in 0..CRAB_JOINTS {
                let [lo, hi] = crab.model.limits[j];
                assert!(t[j] >= lo && t[j] <= hi);
            }
        }
    }

    #[test]
    fn external_mode_matches_gait_path() {
        let mut gait = Crab::new(&CrabConfig::default()).unwrap();
        let mut ext = Crab::new(&CrabConfig { mode: CrabMode::External, ..Default::default() }).unwrap();
        gait.joints[3] = 0.1;
        ext.joints[3] = 0.1;
        gait.rates[5] = -0.2;
        ext.rates[5] = -0.2;
        let t = 2.3;
        ext.external_targets = gait.targets(t);
        assert_eq!(gait.joint_torques(&gait.targets(t)), ext.joint_torques(&ext.targets(t)));
    }

    #[test]
    fn default_gait_walks_forward_upright() {
        let mut crab = Crab::new(&CrabConfig { position: [0.5, 0.5], ..Default::default() }).unwrap();
        let start = crab.body.position;
        let planes = tank_planes(None);
        let dt = 0.004;
        let mut worst_tilt: f64 = 0.0;
        let mut last_x = start.x;
        let mut backsteps = 0.0;
        for k in 0..5000 {
            crab.step(k as f64 * dt, dt, 9.81, &planes).unwrap();
            worst_tilt = worst_tilt.max(crab.tilt());
            if k % 375 == 374 {
                // sample once per gait period
                if crab.body.position.x < last_x {
                    backsteps += 1.0;
                }
                last_x = crab.body.position.x;
            }
        }
        let moved = crab.body.position.x - start.x;
        assert!(moved > 0.1, "moved {moved}");
        assert_eq!(backsteps, 0.0);
        assert!(worst_tilt < 30f64.to_radians(), "tilt {worst_tilt}");
    }
}
