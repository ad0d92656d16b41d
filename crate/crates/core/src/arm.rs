//! Three-joint manipulator with a three-finger gripper.
//!
//! Joint 1 yaws about the mount's z axis; joints 2 and 3 pitch about their
//! local y axes. Links hang along −z, so `q = 0` points the arm straight down
//! from the vehicle belly. All poses are expressed in the vehicle body frame.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix6x3};

use crate::config::ArmConfig;
use crate::error::KinematicsError;
use crate::math::{transform, Quat, Transform, Vec3};

pub const FINGERS: usize = 3;
/// Radial offset of each finger base from the wrist axis, meters.
const FINGER_BASE_RADIUS: f64 = 0.015;

#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    pub link_lengths: [f64; 3],
    pub link_masses: [f64; 3],
    pub joint_limits: [[f64; 2]; 3],
    pub mount: Transform,
    pub finger_length: f64,
    pub finger_open: f64,
    pub finger_closed: f64,
}

/// Unit rotation axis of each joint in its own frame.
const AXES: [Vec3; 3] = [
    Vec3::new(0.0, 0.0, 1.0),
    Vec3::new(0.0, 1.0, 0.0),
    Vec3::new(0.0, 1.0, 0.0),
];

/// Body-frame frames along the chain for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmPose {
    /// Joint frames (origin on the joint axis) for joints 1..3.
    pub joints: [Transform; 3],
    /// Wrist frame at the end of link 3.
    pub end_effector: Transform,
}

impl ArmModel {
    pub fn new(
        link_lengths: [f64; 3],
        link_masses: [f64; 3],
        joint_limits: [[f64; 2]; 3],
        mount: Transform,
    ) -> Result<Self, KinematicsError> {
        for (i, [lo, hi]) in joint_limits.iter().enumerate() {
            if !(lo < hi) {
                return Err(KinematicsError::Model(format!("joint {} limits are not ordered", i + 1)));
            }
        }
        if link_masses.iter().any(|m| !(*m >= 0.0)) || link_lengths.iter().any(|l| !(*l >= 0.0)) {
            return Err(KinematicsError::Model("link masses and lengths must be non-negative".into()));
        }
        Ok(Self {
            link_lengths,
            link_masses,
            joint_limits,
            mount,
            finger_length: 0.04,
            finger_open: 0.6,
            finger_closed: 0.0,
        })
    }

    pub fn from_config(c: &ArmConfig) -> Result<Self, KinematicsError> {
        if c.link_masses.iter().any(|m| !(*m > 0.0)) {
            return Err(KinematicsError::Model("link masses must be positive".into()));
        }
        let mut m = Self::new(
            c.link_lengths,
            c.link_masses,
            c.joint_limits,
            transform(Vec3::from(c.mount), Quat::identity()),
        )?;
        m.finger_length = c.finger_length;
        m.finger_open = c.finger_open_angle;
        m.finger_closed = c.finger_closed_angle;
        Ok(m)
    }

    pub fn clamp(&self, q: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| q[i].clamp(self.joint_limits[i][0], self.joint_limits[i][1]))
    }

    pub fn within_limits(&self, q: &[f64; 3]) -> bool {
        (0..3).all(|i| q[i] >= self.joint_limits[i][0] && q[i] <= self.joint_limits[i][1])
    }

    pub fn pose(&self, q: &[f64; 3]) -> ArmPose {
        let mut t = self.mount;
        let mut joints = [Transform::identity(); 3];
        for k in 0..3 {
            t *= transform(Vec3::zeros(), Quat::from_scaled_axis(AXES[k] * q[k]));
            joints[k] = t;
            t *= transform(Vec3::new(0.0, 0.0, -self.link_lengths[k]), Quat::identity());
        }
        ArmPose { joints, end_effector: t }
    }

    /// End-effector (wrist) transform in the vehicle frame.
    pub fn forward_kinematics(&self, q: &[f64; 3]) -> Transform {
        self.pose(q).end_effector
    }

    /// Geometric Jacobian: rows 0..3 linear, rows 3..6 angular velocity.
    pub fn jacobian(&self, q: &[f64; 3]) -> Matrix6x3<f64> {
        let pose = self.pose(q);
        let p = pose.end_effector.translation.vector;
        let mut j = Matrix6x3::zeros();
        for k in 0..3 {
            let axis = pose.joints[k].rotation * AXES[k];
            let origin = pose.joints[k].translation.vector;
            let lin = axis.cross(&(p - origin));
            for r in 0..3 {
                j[(r, k)] = lin[r];
                j[(r + 3, k)] = axis[r];
            }
        }
        j
    }

    /// Rank of the positional Jacobian, counting singular values above 1e-8.
    pub fn position_rank(&self, q: &[f64; 3]) -> usize {
        let j = self.jacobian(q);
        let jp: Matrix3<f64> = j.fixed_view::<3, 3>(0, 0).into_owned();
        jp.singular_values().iter().filter(|s| **s > 1e-8).count()
    }

    /// Positions (vehicle frame) and masses of the link mass points.
    pub fn mass_points(&self, q: &[f64; 3]) -> [(Vec3, f64); 3] {
        let pose = self.pose(q);
        std::array::from_fn(|k| {
            let mid = pose.joints[k] * nalgebra::Point3::new(0.0, 0.0, -0.5 * self.link_lengths[k]);
            (mid.coords, self.link_masses[k])
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.link_masses.iter().sum()
    }

    /// Upper bound on |Δcog| / |Δq| over all configurations.
    pub fn cog_lipschitz_bound(&self, vehicle_mass: f64) -> f64 {
        // each mass point moves at most (distance to each joint axis) per unit joint change
        let mut bound = 0.0;
        let mut reach = 0.0;
        for k in 0..3 {
            reach += self.link_lengths[k];
            let arm_to_point = reach - 0.5 * self.link_lengths[k];
            bound += self.link_masses[k] * arm_to_point * 3f64.sqrt();
        }
        bound / (vehicle_mass + self.total_mass())
    }

    /// Damped least-squares position IK. Returns in-limit joint angles whose
    /// end-effector position is within 1e-4 m of the target.
    pub fn inverse_kinematics(&self, target: &Transform, q_init: &[f64; 3]) -> Result<[f64; 3], KinematicsError> {
        const TOL: f64 = 1e-4;
        const DAMPING: f64 = 1e-3;
        const MAX_ITER: usize = 200;
        const MAX_STEP: f64 = 0.3;
        let goal = target.translation.vector;
        let seeds = [
            *q_init,
            [0.0, 0.3, 0.3],
            [PI / 2.0, 0.8, -0.8],
            [-PI / 2.0, -0.8, 0.8],
            [PI, 1.2, 1.0],
            [0.0, -1.2, -1.0],
        ];
        let mut best = (f64::INFINITY, *q_init);
        for seed in seeds {
            let mut q = self.clamp(&seed);
            for _ in 0..MAX_ITER {
                let p = self.forward_kinematics(&q).translation.vector;
                let e = goal - p;
                let err = e.norm();
                if err < best.0 {
                    best = (err, q);
                }
                if err <= TOL {
                    return Ok(q);
                }
                let jp: Matrix3<f64> = self.jacobian(&q).fixed_view::<3, 3>(0, 0).into_owned();
                let jjt = jp * jp.transpose() + Matrix3::identity() * (DAMPING * DAMPING);
                let Some(y) = jjt.lu().solve(&e) else { break };
                let mut dq = jp.transpose() * y;
                let n = dq.amax();
                if n > MAX_STEP {
                    dq *= MAX_STEP / n;
                }
                q = self.clamp(&[q[0] + dq[0], q[1] + dq[1], q[2] + dq[2]]);
            }
        }
        Err(KinematicsError::NoSolution { closest: best.0 })
    }

    /// Fingertip positions in the vehicle frame for the given finger angles.
    pub fn fingertips(&self, q: &[f64; 3], finger_angles: &[f64; FINGERS]) -> [Vec3; FINGERS] {
        let ee = self.forward_kinematics(q);
        std::array::from_fn(|f| {
            let phi = 2.0 * PI * f as f64 / FINGERS as f64;
            let radial = Vec3::new(phi.cos(), phi.sin(), 0.0);
            let th = finger_angles[f];
            let local = radial * (FINGER_BASE_RADIUS + self.finger_length * th.sin())
                - Vec3::z() * (self.finger_length * th.cos());
            (ee * nalgebra::Point3::from(local)).coords
        })
    }
}

/// Combined CoG of vehicle (CoG at the body origin) and arm links, body frame.
pub fn system_cog(vehicle_mass: f64, model: &ArmModel, q: &[f64; 3]) -> Vec3 {
    let mut moment = Vec3::zeros();
    let mut mass = vehicle_mass;
    for (p, m) in model.mass_points(q) {
        moment += p * m;
        mass += m;
    }
    moment / mass
}

/// Inertia of vehicle plus link point masses about `cog`, body frame.
pub fn system_inertia(vehicle_mass: f64, vehicle_inertia: &Matrix3<f64>, model: &ArmModel, q: &[f64; 3], cog: &Vec3) -> Matrix3<f64> {
    let point = |r: Vec3, m: f64| (Matrix3::identity() * r.norm_squared() - r * r.transpose()) * m;
    let mut j = vehicle_inertia + point(-cog, vehicle_mass);
    for (p, m) in model.mass_points(q) {
        j += point(p - cog, m);
    }
    0.5 * (j + j.transpose())
}

/// Joint and finger state with the previous joint angles kept for the PD derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmState {
    pub q: [f64; 3],
    pub qd: [f64; 3],
    pub q_prev: [f64; 3],
    pub fingers: [f64; FINGERS],
    pub finger_rates: [f64; FINGERS],
}

impl ArmState {
    pub fn at_rest(q: [f64; 3], finger_angle: f64) -> Self {
        Self { q, qd: [0.0; 3], q_prev: q, fingers: [finger_angle; FINGERS], finger_rates: [0.0; FINGERS] }
    }

    /// Gripper opening in [0, 1]: 0 closed, 1 fully open.
    pub fn aperture(&self, model: &ArmModel) -> f64 {
        let span = model.finger_open - model.finger_closed;
        if span == 0.0 {
            return 0.0;
        }
        let mean = self.fingers.iter().sum::<f64>() / FINGERS as f64;
        ((mean - model.finger_closed) / span).clamp(0.0, 1.0)
    }
}

/// Per-joint second-order actuator dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmActuators {
    pub joint_inertia: [f64; 3],
    pub joint_damping: [f64; 3],
    pub finger_inertia: f64,
}

impl ArmActuators {
    pub fn from_config(c: &ArmConfig) -> Self {
        Self { joint_inertia: c.joint_inertia, joint_damping: c.joint_damping, finger_inertia: c.finger_inertia }
    }

    /// Semi-implicit step of joint and finger angles under applied torques.
    /// Joints stop at their limits; fingers are confined to ±π/2. `q_prev`
    /// is left to the caller, which owns the control-rate derivative.
    pub fn step(&self, model: &ArmModel, s: &mut ArmState, torques: &[f64; 3], finger_torques: &[f64; FINGERS], dt: f64) {
        for k in 0..3 {
            let acc = (torques[k] - self.joint_damping[k] * s.qd[k]) / self.joint_inertia[k];
            s.qd[k] += acc * dt;
            s.q[k] += s.qd[k] * dt;
            let [lo, hi] = model.joint_limits[k];
            if s.q[k] < lo || s.q[k] > hi {
                s.q[k] = s.q[k].clamp(lo, hi);
                s.qd[k] = 0.0;
            }
        }
        for f in 0..FINGERS {
            s.finger_rates[f] += finger_torques[f] / self.finger_inertia * dt;
            s.fingers[f] += s.finger_rates[f] * dt;
            if s.fingers[f].abs() > PI / 2.0 {
                s.fingers[f] = s.fingers[f].clamp(-PI / 2.0, PI / 2.0);
                s.finger_rates[f] = 0.0;
            }
        }
    }
}

/// Reaction torque of the joint motors on the vehicle, body frame.
pub fn joint_reaction_torque(model: &ArmModel, q: &[f64; 3], torques: &[f64; 3]) -> Vec3 {
    let pose = model.pose(q);
    (0..3).map(|k| -(pose.joints[k].rotation * AXES[k]) * torques[k]).sum()
}

/// Twist of the end effector induced by joint rates: `[v; ω] = J q̇`.
pub fn end_effector_twist(model: &ArmModel, q: &[f64; 3], qd: &[f64; 3]) -> (Vec3, Vec3) {
    let t = model.jacobian(q) * nalgebra::Vector3::from(*qd);
    (Vec3::new(t[0], t[1], t[2]), Vec3::new(t[3], t[4], t[5]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model() -> ArmModel {
        ArmModel::from_config(&ArmConfig::default()).unwrap()
    }

    #[test]
    fn home_pose_points_straight_down() {
        let m = model();
        let ee = m.forward_kinematics(&[0.0; 3]);
        let reach: f64 = m.link_lengths.iter().sum();
        let mount = m.mount.translation.vector;
        assert_relative_eq!(ee.translation.vector, mount - Vec3::z() * reach, epsilon = 1e-12);
        assert!(ee.rotation.angle() < 1e-12);
    }

    #[test]
    fn yawed_home_is_rotated_about_joint_one() {
        let m = model();
        let q = [PI / 2.0, 0.4, -0.3];
        let base = m.forward_kinematics(&[0.0, 0.4, -0.3]);
        let yawed = m.forward_kinematics(&q);
        // oracle: rotate the unyawed position about the mount z axis by 90°
        let mount = m.mount.translation.vector;
        let r = base.translation.vector - mount;
        let expected = mount + Vec3::new(-r.y, r.x, r.z);
        assert_relative_eq!(yawed.translation.vector, expected, epsilon = 1e-12);
    }

    #[test]
    fn zero_length_arm_is_the_mount() {
        let m = ArmModel::new([0.0; 3], [0.1; 3], [[-1.0, 1.0]; 3], transform(Vec3::new(0.0, 0.0, -0.03), Quat::identity()))
            .unwrap();
        let ee = m.forward_kinematics(&[0.3, -0.2, 0.9]);
        assert_relative_eq!(ee.translation.vector, m.mount.translation.vector, epsilon = 1e-15);
    }

    #[test]
    fn straight_down_is_singular() {
        let m = model();
        assert!(m.position_rank(&[0.0; 3]) < 3);
        assert_eq!(m.position_rank(&[0.3, 0.5, -0.7]), 3);
    }

    #[test]
    fn zero_rates_zero_twist() {
        let (v, w) = end_effector_twist(&model(), &[0.2, 0.3, 0.4], &[0.0; 3]);
        assert_eq!(v, Vec3::zeros());
        assert_eq!(w, Vec3::zeros());
    }

    #[test]
    fn ik_home_returns_zero() {
        let m = model();
        let q = m.inverse_kinematics(&m.forward_kinematics(&[0.0; 3]), &[0.0; 3]).unwrap();
        assert_eq!(q, [0.0; 3]);
    }

    #[test]
    fn ik_far_target_unreachable() {
        let m = model();
        let target = transform(Vec3::new(10.0, 0.0, 0.0), Quat::identity());
        match m.inverse_kinematics(&target, &[0.0; 3]) {
            Err(KinematicsError::NoSolution { closest }) => assert!(closest > 9.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn massless_arm_keeps_vehicle_cog() {
        let mut m = model();
        m.link_masses = [0.0; 3];
        assert_eq!(system_cog(1.5, &m, &[0.4, 1.0, -0.5]), Vec3::zeros());
    }

    #[test]
    fn extended_arm_shifts_cog_forward() {
        let mut m = model();
        m.link_masses = [0.2; 3];
        // q2 = −π/2 swings the links from −z to +x
        let q = [0.0, -PI / 2.0, 0.0];
        let cog = system_cog(1.5, &m, &q);
        let pts = m.mass_points(&q);
        let oracle = pts.iter().map(|(p, mass)| p * *mass).sum::<Vec3>() / (1.5 + 0.6);
        assert!(cog.x > 0.0);
        assert_relative_eq!(cog, oracle, epsilon = 1e-15);
        assert!(system_cog(1.5, &m, &[0.0, 0.7, -0.3]).y.abs() < 1e-15);
    }

    #[test]
    fn inertia_about_cog_is_spd() {
        let m = model();
        let q = [0.3, -1.0, 0.8];
        let cog = system_cog(1.5, &m, &q);
        let j = system_inertia(1.5, &Matrix3::from_diagonal(&Vec3::new(0.02, 0.02, 0.035)), &m, &q, &cog);
        assert!(j.symmetric_eigenvalues().iter().all(|e| *e > 0.0));
    }

    #[test]
    fn actuators_respect_limits() {
        let m = model();
        let act = ArmActuators::from_config(&ArmConfig::default());
        let mut s = ArmState::at_rest([0.0, 1.9, 0.0], 0.6);
        for _ in 0..500 {
            act.step(&m, &mut s, &[0.0, 2.0, 0.0], &[0.0; 3], 0.004);
        }
        assert_eq!(s.q[1], m.joint_limits[1][1]);
        assert!(m.within_limits(&s.q));
    }

    #[test]
    fn aperture_tracks_finger_angle() {
        let m = model();
        assert_relative_eq!(ArmState::at_rest([0.0; 3], m.finger_open).aperture(&m), 1.0);
        assert_relative_eq!(ArmState::at_rest([0.0; 3], m.finger_closed).aperture(&m), 0.0);
    }

    fn arb_q() -> impl Strategy<Value = [f64; 3]> {
        (-3.0f64..3.0, -1.9f64..1.9, -2.4f64..2.4).prop_map(|(a, b, c)| [a, b, c])
    }

    proptest! {
        #[test]
        fn jacobian_matches_finite_differences(q in arb_q()) {
            let m = model();
            let j = m.jacobian(&q);
            let eps = 1e-6;
            let p0 = m.forward_kinematics(&q);
            for k in 0..3 {
                let mut qk = q;
                qk[k] += eps;
                let p1 = m.forward_kinematics(&qk);
                let dp = (p1.translation.vector - p0.translation.vector) / eps;
                let dr = (p1.rotation * p0.rotation.inverse()).scaled_axis() / eps;
                for r in 0..3 {
                    prop_assert!((j[(r, k)] - dp[r]).abs() < 1e-5);
                    prop_assert!((j[(r + 3, k)] - dr[r]).abs() < 1e-5);
                }
            }
        }

        #[test]
        fn ik_round_trip(q in arb_q()) {
            let m = model();
            let target = m.forward_kinematics(&q);
            let sol = m.inverse_kinematics(&target, &[0.1, 0.1, 0.1]).unwrap();
            prop_assert!(m.within_limits(&sol));
            let err = (m.forward_kinematics(&sol).translation.vector - target.translation.vector).norm();
            prop_assert!(err <= 1e-4);
        }

        #[test]
        fn cog_is_lipschitz(q in arb_q(), d in proptest::array::uniform3(-0.01f64..0.01)) {
            let m = model();
            let q2 = [q[0] + d[0], q[1] + d[1], q[2] + d[2]];
            let dq = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let dc = (system_cog(1.5, &m, &q2) - system_cog(1.5, &m, &q)).norm();
            prop_assert!(dc <= m.cog_lipschitz_bound(1.5) * dq + 1e-15);
        }
    }
}
