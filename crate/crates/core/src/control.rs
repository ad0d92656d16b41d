//! Velocity PID, joint PD, quaternion attitude stabilizer, and the per-step
//! pipeline from commands to rotor speeds and joint torques.
//!
//! Error signs are chosen so every term opposes the error: `E_p = v_ref − v`
//! for the velocity loop and `x_ref − x` for the joints.

use nalgebra::{Matrix3, Rotation3, Vector4};
use serde::{Deserialize, Serialize};

use crate::arm::{ArmModel, ArmState, FINGERS};
use crate::config::{ArmConfig, ControlConfig};
use crate::math::{Quat, RigidBodyState, Vec2, Vec3};
use crate::vehicle::{allocate, build_allocation, RotorLayout};

#[derive(Debug, Clone, PartialEq)]
pub struct PidGains {
    pub kp: Vec3,
    pub kd: Vec3,
    pub ki: Vec3,
    pub integral_clamp: Vec3,
}

impl PidGains {
    pub fn from_config(c: &ControlConfig) -> Self {
        Self {
            kp: c.velocity_kp.into(),
            kd: c.velocity_kd.into(),
            ki: c.velocity_ki.into(),
            integral_clamp: c.integral_clamp.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PidState {
    /// Accumulated velocity error, clamped per axis.
    pub integral: Vec3,
    /// Velocity at the previous call; `None` before the first call.
    pub v_prev: Option<Vec3>,
}

/// Velocity-loop control force in the world frame:
/// `F = Kp E_p + Kd E_d + Ki E_i + [0, 0, m g] + m a_ref` with
/// `E_p = v_ref − v`, `E_d = a_ref − (v − v_prev)/dt`, `E_i = Σ E_p`.
#[allow(clippy::too_many_arguments)]
pub fn pid_force(gains: &PidGains, state: &mut PidState, v: &Vec3, v_ref: &Vec3, a_ref: &Vec3, mass: f64, gravity: f64, dt: f64) -> Vec3 {
    let e_p = v_ref - v;
    let v_prev = state.v_prev.unwrap_or(*v);
    let e_d = a_ref - (v - v_prev) / dt;
    state.integral += e_p;
    for k in 0..3 {
        let c = gains.integral_clamp[k];
        state.integral[k] = state.integral[k].clamp(-c, c);
    }
    state.v_prev = Some(*v);
    gains.kp.component_mul(&e_p)
        + gains.kd.component_mul(&e_d)
        + gains.ki.component_mul(&state.integral)
        + Vec3::new(0.0, 0.0, mass * gravity)
        + a_ref * mass
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

/// Joint PD torque `Kp (x_ref − x) − Kd (x − x_prev)/dt`; the rate term
/// always opposes joint motion.
pub fn pd_joint_force(gains: PdGains, x: f64, x_ref: f64, x_prev: f64, dt: f64) -> f64 {
    gains.kp * (x_ref - x) - gains.kd * (x - x_prev) / dt
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GripperCommand {
    Open,
    Close,
    #[default]
    Hold,
}

impl GripperCommand {
    /// Map the wire value {−1, 0, +1} to close / hold / open.
    pub fn from_signal(v: f64) -> Self {
        if v > 0.5 {
            Self::Open
        } else if v < -0.5 {
            Self::Close
        } else {
            Self::Hold
        }
    }
}

/// One control tick's setpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    /// World-frame velocity reference, m/s.
    pub v_ref: Vec3,
    /// World-frame acceleration feedforward, m/s².
    pub a_ref: Vec3,
    pub yaw_ref: f64,
    pub q_ref: [f64; 3],
    pub gripper: GripperCommand,
}

impl Command {
    pub fn hover(q_ref: [f64; 3]) -> Self {
        Self { v_ref: Vec3::zeros(), a_ref: Vec3::zeros(), yaw_ref: 0.0, q_ref, gripper: GripperCommand::Hold }
    }
}

/// Robot state as seen by the controller.
#[derive(Debug, Clone, Copy)]
pub struct RobotView<'a> {
    /// Composite vehicle-plus-arm body; `position` is the system CoG.
    pub body: &'a RigidBodyState,
    pub arm: &'a ArmState,
    /// System CoG in the vehicle body frame.
    pub cog: Vec3,
    /// Effective thrust multiplier of the current medium.
    pub thrust_factor: f64,
}

/// Actuator outputs of one control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Actuation {
    pub rotor_speeds: [f64; 4],
    pub joint_torques: [f64; 3],
    pub finger_torques: [f64; FINGERS],
    /// World-frame force requested by the velocity loop, N.
    pub force: Vec3,
    /// Desired `[F, τx, τy, τz]` handed to the allocator.
    pub wrench: Vector4<f64>,
    /// False when allocation failed and the previous speeds were held.
    pub allocation_ok: bool,
}

/// Desired attitude whose body z axis points along `force`, tilted at most
/// `max_tilt` from vertical, with heading `yaw`.
pub fn desired_attitude(force: &Vec3, yaw: f64, max_tilt: f64) -> Quat {
    let mut z = if force.norm() > 1e-9 { force.normalize() } else { Vec3::z() };
    let tilt = z.z.clamp(-1.0, 1.0).acos();
    if tilt > max_tilt {
        let horiz = Vec3::new(z.x, z.y, 0.0);
        let dir = if horiz.norm() > 1e-12 { horiz.normalize() } else { Vec3::x() };
        z = dir * max_tilt.sin() + Vec3::z() * max_tilt.cos();
    }
    let heading = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
    let y = z.cross(&heading).normalize();
    let x = y.cross(&z);
    Quat::from_rotation_matrix(&Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z])))
}

/// Quaternion PD attitude torque about the CoG, body frame:
/// `τ = J (Kp e − Kd ω) + ω × J ω` with `e` the body-frame rotation vector
/// from the current to the desired attitude.
pub fn attitude_torque(q: &Quat, omega: &Vec3, q_des: &Quat, inertia: &Matrix3<f64>, kp: &Vec3, kd: &Vec3) -> Vec3 {
    let e = (q.inverse() * q_des).scaled_axis();
    inertia * (kp.component_mul(&e) - kd.component_mul(omega)) + omega.cross(&(inertia * omega))
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub pid: PidGains,
    pub pid_state: PidState,
    pub joint_gains: [PdGains; 3],
    pub max_joint_torque: f64,
    pub finger_gains: PdGains,
    pub finger_stall_torque: f64,
    pub attitude_kp: Vec3,
    pub attitude_kd: Vec3,
    pub max_tilt: f64,
    pub cog_update: bool,
    /// CoG used for allocation when updates are disabled.
    pub static_cog: Vec2,
    pub gravity: f64,
    pub layout: RotorLayout,
    pub finger_target: f64,
    finger_open: f64,
    finger_closed: f64,
    last_speeds: [f64; 4],
}

impl Controller {
    pub fn new(control: &ControlConfig, arm: &ArmConfig, model: &ArmModel, layout: RotorLayout, initial_cog: Vec2, gravity: f64) -> Self {
        Self {
            pid: PidGains::from_config(control),
            pid_state: PidState::default(),
            joint_gains: std::array::from_fn(|k| PdGains { kp: arm.pd_kp[k], kd: arm.pd_kd[k] }),
            max_joint_torque: arm.max_joint_torque,
            finger_gains: PdGains { kp: arm.finger_kp, kd: arm.finger_kd },
            finger_stall_torque: arm.finger_stall_torque,
            attitude_kp: control.attitude_kp.into(),
            attitude_kd: control.attitude_kd.into(),
            max_tilt: control.max_tilt,
            cog_update: control.cog_update,
            static_cog: initial_cog,
            gravity,
            layout,
            finger_target: model.finger_open,
            finger_open: model.finger_open,
            finger_closed: model.finger_closed,
            last_speeds: [0.0; 4],
        }
    }

    pub fn reset(&mut self) {
        self.pid_state = PidState::default();
        self.finger_target = self.finger_open;
        self.last_speeds = [0.0; 4];
    }

    /// Run one control tick.
    pub fn step(&mut self, cmd: &Command, robot: RobotView<'_>, dt: f64) -> Actuation {
        let body = robot.body;
        let force = pid_force(
            &self.pid,
            &mut self.pid_state,
            &body.linear_velocity,
            &cmd.v_ref,
            &cmd.a_ref,
            body.mass,
            self.gravity,
            dt,
        );
        let q_des = desired_attitude(&force, cmd.yaw_ref, self.max_tilt);
        let torque = attitude_torque(
            &body.orientation,
            &body.angular_velocity,
            &q_des,
            &body.inertia,
            &self.attitude_kp,
            &self.attitude_kd,
        );
        let body_z = body.orientation * Vec3::z();
        let thrust = force.dot(&body_z).max(0.0);
        let wrench = Vector4::new(thrust, torque.x, torque.y, torque.z);

        let cog = if self.cog_update { robot.cog.xy() } else { self.static_cog };
        let factor = robot.thrust_factor;
        let (rotor_speeds, allocation_ok) = if factor <= 0.0 {
            ([0.0; 4], true)
        } else {
            let a = build_allocation(&self.layout, cog);
            match allocate(&a, &(wrench / factor), self.layout.max_speed) {
                Ok(s) => (s, true),
                Err(e) => {
                    log::warn!("allocation failed, holding previous rotor speeds: {e}");
                    (self.last_speeds, false)
                }
            }
        };
        self.last_speeds = rotor_speeds;

        let arm = robot.arm;
        let joint_torques = std::array::from_fn(|k| {
            pd_joint_force(self.joint_gains[k], arm.q[k], cmd.q_ref[k], arm.q_prev[k], dt)
                .clamp(-self.max_joint_torque, self.max_joint_torque)
        });
        match cmd.gripper {
            GripperCommand::Open => self.finger_target = self.finger_open,
            GripperCommand::Close => self.finger_target = self.finger_closed,
            GripperCommand::Hold => {}
        }
        let finger_torques = std::array::from_fn(|f| {
            let g = self.finger_gains;
            (g.kp * (self.finger_target - arm.fingers[f]) - g.kd * arm.finger_rates[f])
                .clamp(-self.finger_stall_torque, self.finger_stall_torque)
        });
        Actuation { rotor_speeds, joint_torques, finger_torques, force, wrench, allocation_ok }
    }
}
