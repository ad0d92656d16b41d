//! Quadrotor rotor model and CoG-adaptive control allocation.

use nalgebra::{Matrix4, Vector4};

use crate::config::VehicleConfig;
use crate::error::AllocationError;
use crate::math::{Mat3, Vec2, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct RotorLayout {
    /// Rotor (x, y) in the body frame, meters.
    pub positions: [Vec2; 4],
    pub thrust_coefficients: [f64; 4],
    pub moment_coefficients: [f64; 4],
    /// +1 or −1: sign of each rotor's reaction yaw moment.
    pub directions: [f64; 4],
    pub max_speed: f64,
}

impl RotorLayout {
    pub fn new(
        positions: [Vec2; 4],
        thrust_coefficients: [f64; 4],
        moment_coefficients: [f64; 4],
        directions: [f64; 4],
        max_speed: f64,
    ) -> Result<Self, AllocationError> {
        if directions.iter().any(|d| d.abs() != 1.0) || directions.iter().sum::<f64>() != 0.0 {
            return Err(AllocationError::Layout("spin directions must be two +1 and two -1".into()));
        }
        if thrust_coefficients.iter().chain(&moment_coefficients).any(|k| !(*k > 0.0)) {
            return Err(AllocationError::Layout("rotor coefficients must be positive".into()));
        }
        if !(max_speed > 0.0) {
            return Err(AllocationError::Layout("max rotor speed must be positive".into()));
        }
        Ok(Self { positions, thrust_coefficients, moment_coefficients, directions, max_speed })
    }

    pub fn from_config(c: &VehicleConfig) -> Result<Self, AllocationError> {
        Self::new(
            c.rotor_positions.map(|[x, y]| Vec2::new(x, y)),
            [c.thrust_coefficient; 4],
            [c.moment_coefficient; 4],
            c.rotor_directions,
            c.max_rotor_speed,
        )
    }

    /// Whether `p` lies strictly inside the convex hull of the rotor positions.
    pub fn contains(&self, p: &Vec2) -> bool {
        let c: Vec2 = self.positions.iter().sum::<Vec2>() / 4.0;
        let mut order: Vec<Vec2> = self.positions.to_vec();
        order.sort_by(|a, b| {
            let ta = (a.y - c.y).atan2(a.x - c.x);
            let tb = (b.y - c.y).atan2(b.x - c.x);
            ta.total_cmp(&tb)
        });
        (0..4).all(|i| {
            let a = order[i];
            let b = order[(i + 1) % 4];
            let e = b - a;
            let r = p - a;
            e.x * r.y - e.y * r.x > 0.0
        })
    }
}

/// Map from squared rotor speeds to `[F, τx, τy, τz]` about a given CoG.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrix {
    pub matrix: Matrix4<f64>,
    pub cog: Vec2,
    pub condition: f64,
    /// False when the CoG left the rotor quadrilateral; the matrix may be near-singular.
    pub cog_inside: bool,
}

/// Build the allocation matrix around the current CoG.
///
/// Rows: total thrust `k_Ti`; roll `(y_i − y_CoG) k_Ti`; pitch
/// `−(x_i − x_CoG) k_Ti`; yaw `k_Ri d_i`.
pub fn build_allocation(layout: &RotorLayout, cog: Vec2) -> AllocationMatrix {
    let mut m = Matrix4::zeros();
    for i in 0..4 {
        let k = layout.thrust_coefficients[i];
        let p = layout.positions[i];
        m[(0, i)] = k;
        m[(1, i)] = (p.y - cog.y) * k;
        m[(2, i)] = -(p.x - cog.x) * k;
        m[(3, i)] = layout.moment_coefficients[i] * layout.directions[i];
    }
    let sv = m.singular_values();
    let smin = sv.min();
    let condition = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
    let cog_inside = layout.contains(&cog);
    if !cog_inside {
        log::warn!("CoG ({:.4}, {:.4}) outside rotor hull; allocation may be ill-conditioned", cog.x, cog.y);
    }
    AllocationMatrix { matrix: m, cog, condition, cog_inside }
}

/// Squared rotor speeds solving `A ω² = wrench`, before any clamping.
pub fn solve_squared_speeds(a: &AllocationMatrix, wrench: &Vector4<f64>) -> Result<Vector4<f64>, AllocationError> {
    if !a.condition.is_finite() || a.condition > 1e12 {
        return Err(AllocationError::Singular { condition: a.condition });
    }
    a.matrix
        .lu()
        .solve(wrench)
        .ok_or(AllocationError::Singular { condition: a.condition })
}

/// Rotor speeds (rad/s) for a desired `[F, τx, τy, τz]`.
///
/// Negative squared speeds are clamped to zero; if any exceeds the maximum,
/// all are scaled down together so the largest sits at the limit.
pub fn allocate(a: &AllocationMatrix, wrench: &Vector4<f64>, max_speed: f64) -> Result<[f64; 4], AllocationError> {
    let mut w2 = solve_squared_speeds(a, wrench)?;
    for v in w2.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let limit = max_speed * max_speed;
    let peak = w2.max();
    if peak > limit {
        w2 *= limit / peak;
    }
    Ok([w2[0].sqrt(), w2[1].sqrt(), w2[2].sqrt(), w2[3].sqrt()])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorForces {
    /// Thrust along body +Z per rotor, N.
    pub thrust: [f64; 4],
    /// Reaction yaw moment per rotor, N·m.
    pub yaw_moment: [f64; 4],
}

/// Per-rotor thrust and yaw moment. `medium_factor` scales both (0 disables
/// the thrusters, 1 is nominal).
pub fn rotor_forces(speeds: &[f64; 4], layout: &RotorLayout, medium_factor: f64) -> RotorForces {
    let mut thrust = [0.0; 4];
    let mut yaw_moment = [0.0; 4];
    for i in 0..4 {
        let w2 = speeds[i] * speeds[i];
        thrust[i] = medium_factor * layout.thrust_coefficients[i] * w2;
        yaw_moment[i] = medium_factor * layout.moment_coefficients[i] * layout.directions[i] * w2;
    }
    RotorForces { thrust, yaw_moment }
}

/// Body-frame force and torque about `cog` produced by the rotors.
///
/// Rotors sit in the body z = 0 plane; thrust along +Z means the CoG height
/// does not enter the moment arm.
pub fn rotor_wrench(layout: &RotorLayout, forces: &RotorForces, cog: &Vec3) -> (Vec3, Vec3) {
    let mut force = Vec3::zeros();
    let mut torque = Vec3::zeros();
    for i in 0..4 {
        let f = Vec3::new(0.0, 0.0, forces.thrust[i]);
        let p = layout.positions[i];
        let r = Vec3::new(p.x, p.y, 0.0) - cog;
        force += f;
        torque += r.cross(&f);
        torque.z += forces.yaw_moment[i];
    }
    (force, torque)
}

/// Rigid-body properties of the airframe without the arm.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleModel {
    pub layout: RotorLayout,
    pub mass: f64,
    pub inertia: Mat3,
    pub hull_half_extents: Vec3,
}

impl VehicleModel {
    pub fn from_config(c: &VehicleConfig) -> Result<Self, AllocationError> {
        Ok(Self {
            layout: RotorLayout::from_config(c)?,
            mass: c.mass,
            inertia: Mat3::from_diagonal(&Vec3::from(c.inertia)),
            hull_half_extents: Vec3::from(c.hull_half_extents),
        })
    }
}
