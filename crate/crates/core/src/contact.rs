//! Rigid contacts: points on bodies against static planes and against boxes
//! on other bodies. Velocities are corrected by projected Gauss-Seidel over
//! normal and Coulomb friction impulses, then penetration is removed by
//! translating the bodies.

use crate::math::{Mat3, RigidBodyState, Vec3};
use crate::sensors::ContactTarget;

/// Static half-space `normal · x ≥ offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
    pub target: ContactTarget,
}

impl Plane {
    pub fn depth(&self, x: &Vec3) -> f64 {
        self.offset - self.normal.dot(x)
    }
}

/// Floor at z = 0 and, if `walls` is given, vertical walls bounding
/// `[0, wx] × [0, wy]`.
pub fn tank_planes(walls: Option<(f64, f64)>) -> Vec<Plane> {
    let mut v = vec![Plane { normal: Vec3::z(), offset: 0.0, target: ContactTarget::Floor }];
    if let Some((wx, wy)) = walls {
        v.push(Plane { normal: Vec3::x(), offset: 0.0, target: ContactTarget::Wall });
        v.push(Plane { normal: -Vec3::x(), offset: -wx, target: ContactTarget::Wall });
        v.push(Plane { normal: Vec3::y(), offset: 0.0, target: ContactTarget::Wall });
        v.push(Plane { normal: -Vec3::y(), offset: -wy, target: ContactTarget::Wall });
    }
    v
}

/// A contact-capable point on a body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    /// Offset from the body CoG, body frame.
    pub local: Vec3,
    /// Velocity of the point relative to the body (articulation), world frame.
    pub extra_velocity: Vec3,
}

impl ContactPoint {
    pub fn fixed(local: Vec3) -> Self {
        Self { local, extra_velocity: Vec3::zeros() }
    }
}

/// Oriented box attached to a body, centered on its CoG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyBox {
    pub body: usize,
    pub half_extents: Vec3,
}

/// Points of one body that may collide.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet<'a> {
    pub body: usize,
    pub points: &'a [ContactPoint],
}

/// A resolved contact, for sensing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactReport {
    pub body: usize,
    pub point: usize,
    pub target: ContactTarget,
    /// Total impulse on `body` at the point, world frame.
    pub impulse: Vec3,
}

#[derive(Debug, Clone)]
struct Active {
    a: usize,
    b: Option<usize>,
    point: usize,
    ra: Vec3,
    rb: Vec3,
    extra: Vec3,
    normal: Vec3,
    depth: f64,
    target: ContactTarget,
    lambda_n: f64,
    lambda_t: Vec3,
}

fn inv_inertia_world(b: &RigidBodyState) -> Mat3 {
    let r = b.orientation.to_rotation_matrix();
    let inv = b.inertia.try_inverse().unwrap_or_else(Mat3::zeros);
    r.matrix() * inv * r.matrix().transpose()
}

fn point_velocity(b: &RigidBodyState, r: &Vec3) -> Vec3 {
    b.linear_velocity + (b.orientation * b.angular_velocity).cross(r)
}

fn apply_impulse(b: &mut RigidBodyState, r: &Vec3, p: &Vec3) {
    b.linear_velocity += p / b.mass;
    let inv = b.inertia.try_inverse().unwrap_or_else(Mat3::zeros);
    b.angular_velocity += inv * (b.orientation.inverse() * r.cross(p));
}

fn effective_mass(b: &RigidBodyState, inv_i: &Mat3, r: &Vec3, d: &Vec3) -> f64 {
    1.0 / b.mass + d.dot(&(inv_i * r.cross(d)).cross(r))
}

fn relative_velocity(bodies: &[&mut RigidBodyState], c: &Active) -> Vec3 {
    let mut v = point_velocity(bodies[c.a], &c.ra) + c.extra;
    if let Some(b) = c.b {
        v -= point_velocity(bodies[b], &c.rb);
    }
    v
}

fn pair_mass(bodies: &[&mut RigidBodyState], inv_i: &[Mat3], c: &Active, d: &Vec3) -> f64 {
    let mut k = effective_mass(bodies[c.a], &inv_i[c.a], &c.ra, d);
    if let Some(b) = c.b {
        k += effective_mass(bodies[b], &inv_i[b], &c.rb, d);
    }
    k
}

/// Resolve all contacts of `sets` against `planes` and `boxes` for one step.
/// Boxes never collide with points of their own body.
pub fn resolve_contacts(
    bodies: &mut [&mut RigidBodyState],
    sets: &[PointSet<'_>],
    planes: &[Plane],
    boxes: &[BodyBox],
    friction: f64,
    iterations: usize,
) -> Vec<ContactReport> {
    let mut active = Vec::new();
    for set in sets {
        let body = &*bodies[set.body];
        for (k, p) in set.points.iter().enumerate() {
            let r = body.orientation * p.local;
            let x = body.position + r;
            for plane in planes {
                let depth = plane.depth(&x);
                if depth > 0.0 {
                    active.push(Active {
                        a: set.body,
                        b: None,
                        point: k,
                        ra: r,
                        rb: Vec3::zeros(),
                        extra: p.extra_velocity,
                        normal: plane.normal,
                        depth,
                        target: plane.target,
                        lambda_n: 0.0,
                        lambda_t: Vec3::zeros(),
                    });
                }
            }
            for bx in boxes.iter().filter(|b| b.body != set.body) {
                let other = &*bodies[bx.body];
                let local = other.orientation.inverse() * (x - other.position);
                let e = bx.half_extents;
                let pen = Vec3::new(e.x - local.x.abs(), e.y - local.y.abs(), e.z - local.z.abs());
                if pen.x <= 0.0 || pen.y <= 0.0 || pen.z <= 0.0 {
                    continue;
                }
                let axis = pen.imin();
                let mut n = Vec3::zeros();
                n[axis] = local[axis].signum();
                active.push(Active {
                    a: set.body,
                    b: Some(bx.body),
                    point: k,
                    ra: r,
                    rb: x - other.position,
                    extra: p.extra_velocity,
                    normal: other.orientation * n,
                    depth: pen[axis],
                    target: ContactTarget::Crab,
                    lambda_n: 0.0,
                    lambda_t: Vec3::zeros(),
                });
            }
        }
    }
    if active.is_empty() {
        return Vec::new();
    }

    let inv_i: Vec<Mat3> = bodies.iter().map(|b| inv_inertia_world(b)).collect();
    let count = active.len();
    for it in 0..iterations {
        // alternate sweep direction so the ordering does not bias friction
        for step in 0..count {
            let idx = if it % 2 == 0 { step } else { count - 1 - step };
            let c = &mut active[idx];
            let kn = pair_mass(bodies, &inv_i, c, &c.normal);
            let vn = relative_velocity(bodies, c).dot(&c.normal);
            let new_n = (c.lambda_n - vn / kn).max(0.0);
            let dn = new_n - c.lambda_n;
            c.lambda_n = new_n;
            let pn = c.normal * dn;
            apply_impulse(bodies[c.a], &c.ra, &pn);
            if let Some(b) = c.b {
                apply_impulse(bodies[b], &c.rb, &(-pn));
            }

            let v = relative_velocity(bodies, c);
            let vt = v - c.normal * v.dot(&c.normal);
            let speed = vt.norm();
            if speed < 1e-12 {
                continue;
            }
            let t = vt / speed;
            let kt = pair_mass(bodies, &inv_i, c, &t);
            let mut new_t = c.lambda_t - t * (speed / kt);
            let limit = friction * c.lambda_n;
            let mag = new_t.norm();
            if mag > limit {
                new_t *= limit / mag;
            }
            let pt = new_t - c.lambda_t;
            c.lambda_t = new_t;
            apply_impulse(bodies[c.a], &c.ra, &pt);
            if let Some(b) = c.b {
                apply_impulse(bodies[b], &c.rb, &(-pt));
            }
        }
    }

    // remove the deepest penetration along each distinct normal
    let mut done = vec![false; active.len()];
    for i in 0..active.len() {
        if done[i] {
            continue;
        }
        let (a, b, n) = (active[i].a, active[i].b, active[i].normal);
        let mut depth: f64 = 0.0;
        for (j, c) in active.iter().enumerate() {
            if c.a == a && c.b == b && (c.normal - n).norm() < 1e-9 {
                depth = depth.max(c.depth);
                done[j] = true;
            }
        }
        match b {
            None => bodies[a].position += n * depth,
            Some(b) => {
                let (wa, wb) = (1.0 / bodies[a].mass, 1.0 / bodies[b].mass);
                bodies[a].position += n * (depth * wa / (wa + wb));
                bodies[b].position -= n * (depth * wb / (wa + wb));
            }
        }
    }

    active
        .iter()
        .map(|c| ContactReport { body: c.a, point: c.point, target: c.target, impulse: c.normal * c.lambda_n + c.lambda_t })
        .collect()
}

/// The eight corners of a box with the given half extents, centered on `offset`.
pub fn box_corners(half: &Vec3, offset: &Vec3) -> [Vec3; 8] {
    std::array::from_fn(|k| {
        let s = |bit: usize| if k & bit == 0 { -1.0 } else { 1.0 };
        offset + Vec3::new(s(1) * half.x, s(2) * half.y, s(4) * half.z)
    })
}
