//! Shared math types and the rigid-body integrator.
//!
//! World frame is East-North-Up (Z up); body frames are Front-Left-Up.
//! Everything is SI: meters, seconds, kilograms, radians.

use std::sync::Arc;

use nalgebra::{Isometry3, Matrix3, Translation3, UnitQuaternion, Vector2, Vector3};

use crate::error::IntegrationError;

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
/// Unit quaternion (w, x, y, z), rotating body-frame vectors into the world frame.
pub type Quat = UnitQuaternion<f64>;
/// Rigid transform: rotation followed by translation.
pub type Transform = Isometry3<f64>;

pub fn transform(translation: Vec3, rotation: Quat) -> Transform {
    Isometry3::from_parts(Translation3::from(translation), rotation)
}

/// Pose, twist and mass properties of a simulated rigid body.
///
/// `position` is the world position of the center of mass. Linear velocity is
/// in the world frame, angular velocity in the body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyState {
    pub label: Arc<str>,
    pub position: Vec3,
    pub orientation: Quat,
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
    pub mass: f64,
    pub inertia: Mat3,
}

impl RigidBodyState {
    pub fn new(label: &str, mass: f64, inertia: Mat3) -> Result<Self, IntegrationError> {
        let state = Self {
            label: Arc::from(label),
            position: Vec3::zeros(),
            orientation: Quat::identity(),
            linear_velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            mass,
            inertia,
        };
        state.check_mass_properties()?;
        Ok(state)
    }

    pub fn with_pose(mut self, position: Vec3, orientation: Quat) -> Self {
        self.position = position;
        self.orientation = orientation;
        self
    }

    /// Mass must be positive and the inertia symmetric positive-definite.
    pub fn check_mass_properties(&self) -> Result<(), IntegrationError> {
        let bad = || IntegrationError::SingularInertia(self.label.to_string());
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(bad());
        }
        let j = &self.inertia;
        if (j - j.transpose()).abs().max() > 1e-12 {
            return Err(bad());
        }
        let eig = j.symmetric_eigenvalues();
        if eig.iter().any(|&e| !(e > 0.0)) {
            return Err(bad());
        }
        Ok(())
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.linear_velocity.norm_squared()
            + 0.5 * self.angular_velocity.dot(&(self.inertia * self.angular_velocity))
    }

    /// World-frame point velocity of a point given in world coordinates.
    pub fn point_velocity(&self, world_point: &Vec3) -> Vec3 {
        let omega_world = self.orientation * self.angular_velocity;
        self.linear_velocity + omega_world.cross(&(world_point - self.position))
    }

    pub fn world_inverse_inertia(&self) -> Mat3 {
        let r = self.orientation.to_rotation_matrix();
        let inv = self.inertia.try_inverse().unwrap_or_else(Mat3::zeros);
        r.matrix() * inv * r.matrix().transpose()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.linear_velocity.iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
    }
}

/// Advance one rigid body by `dt`.
///
/// Translation uses semi-implicit Euler (velocity first, then position).
/// Rotation integrates Euler's equations `J ω̇ = τ − ω × Jω` with the implicit
/// midpoint rule, which keeps the rotational kinetic energy of a torque-free
/// body constant, then advances the orientation with the exponential map of
/// the body rate. `force` is in the world frame, `torque` in the body frame.
pub fn integrate_rigid_body(
    state: &RigidBodyState,
    force: Vec3,
    torque: Vec3,
    dt: f64,
) -> Result<RigidBodyState, IntegrationError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(IntegrationError::BadTimestep(dt));
    }
    if !force.iter().all(|v| v.is_finite()) {
        return Err(IntegrationError::NonFiniteInput {
            body: state.label.to_string(),
            quantity: "force",
        });
    }
    if !torque.iter().all(|v| v.is_finite()) {
        return Err(IntegrationError::NonFiniteInput {
            body: state.label.to_string(),
            quantity: "torque",
        });
    }
    let j = state.inertia;
    let j_inv = j
        .try_inverse()
        .ok_or_else(|| IntegrationError::SingularInertia(state.label.to_string()))?;

    let mut next = state.clone();
    next.linear_velocity += force / state.mass * dt;
    next.position += next.linear_velocity * dt;

    let w0 = state.angular_velocity;
    let mut w1 = w0 + j_inv * (torque - w0.cross(&(j * w0))) * dt;
    for _ in 0..32 {
        let mid = 0.5 * (w0 + w1);
        let candidate = w0 + j_inv * (torque - mid.cross(&(j * mid))) * dt;
        let change = (candidate - w1).norm();
        w1 = candidate;
        if change <= 1e-15 * (1.0 + w1.norm()) {
            break;
        }
    }
    next.angular_velocity = w1;
    let delta = Quat::from_scaled_axis(w1 * dt);
    next.orientation = Quat::new_normalize((state.orientation * delta).into_inner());

    if !next.is_finite() {
        return Err(IntegrationError::NonFiniteState(state.label.to_string()));
    }
    Ok(next)
}

/// Rotation vector `log(R_b R_aᵀ)` taking orientation `a` to `b`, world frame.
pub fn rotation_difference(a: &Quat, b: &Quat) -> Vec3 {
    (b * a.inverse()).scaled_axis()
}
