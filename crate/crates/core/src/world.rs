//! The simulated world: the aerial-aquatic manipulator, an optional crab, an
//! optional water tank with wavemaker, and the sensors.
//!
//! The AAM is one composite rigid body whose `position` is the system CoG.
//! Arm motion is internal: it moves the CoG within the vehicle frame and
//! exchanges angular momentum with the base, but never moves the world CoG.
//! Only the hull box couples to the water.

use std::ops::Range;

use crate::arm::{system_cog, system_inertia, ArmActuators, ArmModel, ArmState, FINGERS};
use crate::clock::SimClock;
use crate::config::ScenarioConfig;
use crate::contact::{box_corners, resolve_contacts, tank_planes, BodyBox, ContactPoint, Plane, PointSet};
use crate::control::{Actuation, Command, Controller, RobotView};
use crate::error::{ConfigError, FluidError, Result};
use crate::fauna::Crab;
use crate::fluid::{
    boundary_masses, build_tank, sample_box_surface, BodyId, Confinement, FluidParams, FluidSolver, HullBox,
    ParticleSet, Phase, Wavemaker,
};
use crate::math::{integrate_rigid_body, Mat3, Quat, RigidBodyState, Vec3};
use crate::media::{air_drag, apply_coupling, thrust_factor, wet_fraction, Crossing, MediumState};
use crate::sensors::{poll_contacts, ContactEvent, ContactTarget, Imu, ImuSample};
use crate::vehicle::{rotor_forces, rotor_wrench, VehicleModel};

pub const AAM: BodyId = 0;
const CONTACT_ITERATIONS: usize = 20;
/// Indices of the fingertips in the AAM contact point list.
const FINGERTIPS: Range<usize> = 11..11 + FINGERS;
/// Interval between density checks during pre-roll, seconds.
const PREROLL_CHECK: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Aam {
    pub vehicle: VehicleModel,
    pub arm_model: ArmModel,
    pub actuators: ArmActuators,
    pub arm: ArmState,
    /// Composite body; `position` is the system CoG, inertia is about it.
    pub body: RigidBodyState,
    /// System CoG in the vehicle frame.
    pub cog: Vec3,
    pub controller: Controller,
    pub drag: Vec3,
    pub medium: MediumState,
    pub rotor_speeds: [f64; 4],
    pub thrusters_enabled: bool,
    pub thrust_factor_air: f64,
    pub thrust_factor_water: f64,
    pub friction: f64,
    /// Angular momentum of the arm masses relative to the base, vehicle frame.
    relative_momentum: Vec3,
}

impl Aam {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let vehicle = VehicleModel::from_config(&cfg.vehicle)?;
        let arm_model = ArmModel::from_config(&cfg.arm)?;
        let q = arm_model.clamp(&cfg.arm.initial_q);
        let arm = ArmState::at_rest(q, arm_model.finger_open);
        let cog = system_cog(vehicle.mass, &arm_model, &q);
        let mass = vehicle.mass + arm_model.total_mass();
        let inertia = system_inertia(vehicle.mass, &vehicle.inertia, &arm_model, &q, &cog);
        let body = RigidBodyState::new("aam", mass, inertia)?;
        let controller =
            Controller::new(&cfg.control, &cfg.arm, &arm_model, vehicle.layout.clone(), cog.xy(), cfg.sim.gravity);
        let mut aam = Self {
            actuators: ArmActuators::from_config(&cfg.arm),
            vehicle,
            arm_model,
            arm,
            body,
            cog,
            controller,
            drag: cfg.vehicle.drag.into(),
            medium: MediumState::default(),
            rotor_speeds: [0.0; 4],
            thrusters_enabled: cfg.vehicle.thrusters_enabled,
            thrust_factor_air: cfg.vehicle.thrust_factor_air,
            thrust_factor_water: cfg.vehicle.thrust_factor_water,
            friction: cfg.vehicle.friction,
            relative_momentum: Vec3::zeros(),
        };
        aam.place(cfg.vehicle.spawn.into(), Quat::identity(), q);
        Ok(aam)
    }

    pub fn mass(&self) -> f64 {
        self.body.mass
    }

    /// Put the vehicle origin at `origin` with the arm at rest in pose `q`.
    pub fn place(&mut self, origin: Vec3, orientation: Quat, q: [f64; 3]) {
        let q = self.arm_model.clamp(&q);
        self.arm = ArmState::at_rest(q, self.arm_model.finger_open);
        self.cog = system_cog(self.vehicle.mass, &self.arm_model, &q);
        self.body.inertia = system_inertia(self.vehicle.mass, &self.vehicle.inertia, &self.arm_model, &q, &self.cog);
        self.body.orientation = orientation;
        self.body.position = origin + orientation * self.cog;
        self.body.linear_velocity = Vec3::zeros();
        self.body.angular_velocity = Vec3::zeros();
        self.relative_momentum = Vec3::zeros();
        self.rotor_speeds = [0.0; 4];
        self.medium = MediumState::default();
        self.controller.static_cog = self.cog.xy();
        self.controller.reset();
    }

    pub fn vehicle_origin(&self) -> Vec3 {
        self.body.position - self.body.orientation * self.cog
    }

    /// World position of a vehicle-frame point.
    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.body.position + self.body.orientation * (p - self.cog)
    }

    /// World velocity of a point fixed in the vehicle frame.
    pub fn velocity_at(&self, p: &Vec3) -> Vec3 {
        self.body.linear_velocity + self.body.orientation * self.body.angular_velocity.cross(&(p - self.cog))
    }

    /// Grasp center: the fingertip centroid, world frame.
    pub fn gripper_point(&self) -> Vec3 {
        let tips = self.arm_model.fingertips(&self.arm.q, &self.arm.fingers);
        let c = tips.iter().sum::<Vec3>() / FINGERS as f64;
        self.to_world(&c)
    }

    pub fn thrust_factor(&self) -> f64 {
        if !self.thrusters_enabled {
            return 0.0;
        }
        thrust_factor(self.thrust_factor_air, self.thrust_factor_water, self.medium.fraction)
    }

    /// Elbow, wrist and fingertip positions in the vehicle frame.
    fn arm_points(&self, q: &[f64; 3], fingers: &[f64; FINGERS]) -> [Vec3; 3 + FINGERS] {
        let pose = self.arm_model.pose(q);
        let tips = self.arm_model.fingertips(q, fingers);
        let mut out = [Vec3::zeros(); 3 + FINGERS];
        out[0] = pose.joints[1].translation.vector;
        out[1] = pose.joints[2].translation.vector;
        out[2] = pose.end_effector.translation.vector;
        out[3..].copy_from_slice(&tips);
        out
    }

    /// Hull corners followed by arm points; fingertips occupy [`FINGERTIPS`].
    fn contact_points(&self, q_before: &[f64; 3], fingers_before: &[f64; FINGERS], h: f64) -> Vec<ContactPoint> {
        let half = self.vehicle.hull_half_extents;
        let mut pts: Vec<ContactPoint> =
            box_corners(&half, &-self.cog).iter().map(|p| ContactPoint::fixed(*p)).collect();
        let now = self.arm_points(&self.arm.q, &self.arm.fingers);
        let before = self.arm_points(q_before, fingers_before);
        for (a, b) in now.iter().zip(&before) {
            pts.push(ContactPoint { local: a - self.cog, extra_velocity: self.body.orientation * ((a - b) / h) });
        }
        pts
    }

    /// Refresh CoG and inertia after the arm moved from `q_before`, keeping
    /// the world CoG and the total angular momentum fixed.
    fn internal_update(&mut self, q_before: &[f64; 3], h: f64) {
        let q = self.arm.q;
        let cog = system_cog(self.vehicle.mass, &self.arm_model, &q);
        let inertia = system_inertia(self.vehicle.mass, &self.vehicle.inertia, &self.arm_model, &q, &cog);
        let now = self.arm_model.mass_points(&q);
        let before = self.arm_model.mass_points(q_before);
        let relative: Vec3 =
            now.iter().zip(&before).map(|((p, m), (pb, _))| (p - cog).cross(&((p - pb) / h)) * *m).sum();
        let momentum = self.body.inertia * self.body.angular_velocity + self.relative_momentum - relative;
        self.body.angular_velocity = inertia.try_inverse().unwrap_or_else(Mat3::zeros) * momentum;
        self.body.inertia = inertia;
        self.cog = cog;
        self.relative_momentum = relative;
    }

    /// Apply a world-frame impulse and angular impulse about the CoG.
    fn apply_impulse(&mut self, momentum: &Vec3, angular: &Vec3) {
        self.body.linear_velocity += momentum / self.body.mass;
        let inv = self.body.inertia.try_inverse().unwrap_or_else(Mat3::zeros);
        self.body.angular_velocity += inv * (self.body.orientation.inverse() * angular);
    }
}

/// Water tank state.
#[derive(Debug, Clone)]
pub struct FluidWorld {
    pub particles: ParticleSet,
    pub solver: FluidSolver,
    pub confinement: Confinement,
    pub wavemaker: Option<Wavemaker>,
    pub extent: Vec3,
    /// Still-water level measured after pre-roll, meters.
    pub surface_z: f64,
    /// Hull sample points in the vehicle frame and their particle indices.
    pub hull_points: Vec<Vec3>,
    pub hull_particles: Vec<usize>,
    /// Wet fraction of the hull after the last substep.
    pub wet: f64,
    /// Momentum handed to the AAM in the last substep, world frame.
    pub last_momentum: Vec3,
    /// Simulated pre-roll time, seconds.
    pub preroll_time: f64,
    /// Interior density error at the end of pre-roll: (mean, max) of |ρ/ρ0 − 1|.
    pub preroll_error: (f64, f64),
    wave_offset: f64,
}

/// Mean and max |ρ/ρ0 − 1| over fluid particles more than `band` below the
/// highest fluid particle.
pub fn interior_density_error(solver: &mut FluidSolver, particles: &ParticleSet, band: f64) -> (f64, f64) {
    let top = particles
        .position
        .iter()
        .zip(&particles.phase)
        .filter(|(_, p)| **p == Phase::Fluid)
        .map(|(x, _)| x.z)
        .fold(f64::NEG_INFINITY, f64::max);
    let c = solver.constraint_values(particles);
    let inner: Vec<f64> = c.iter().filter(|(i, _)| particles.position[*i].z < top - band).map(|(_, c)| c.abs()).collect();
    if inner.is_empty() {
        return (0.0, 0.0);
    }
    let mean = inner.iter().sum::<f64>() / inner.len() as f64;
    (mean, inner.iter().copied().fold(0.0, f64::max))
}

/// Still-water level: mean height of the top particle layer plus half a spacing.
pub fn measure_surface(particles: &ParticleSet, layer_count: usize, spacing: f64) -> f64 {
    let mut z: Vec<f64> =
        particles.position.iter().zip(&particles.phase).filter(|(_, p)| **p == Phase::Fluid).map(|(x, _)| x.z).collect();
    if z.is_empty() {
        return 0.0;
    }
    z.sort_by(|a, b| b.total_cmp(a));
    let n = layer_count.clamp(1, z.len());
    z[..n].iter().sum::<f64>() / n as f64 + 0.5 * spacing
}

impl FluidWorld {
    /// Fill the tank, settle it, run the wavemaker lead, then add the hull.
    pub fn new(cfg: &ScenarioConfig, aam: &Aam) -> Result<Self> {
        let params = FluidParams::from_config(&cfg.fluid)?;
        let tank = build_tank(cfg, &params)?;
        let solver = FluidSolver::new(params.clone())?;
        let a = params.spacing;
        let layer = ((tank.extent.x - tank.wavemaker.as_ref().map_or(0.0, |w| w.rest_x)) / a).round()
            * (tank.extent.y / a).round();
        let mut world = Self {
            particles: tank.particles,
            solver,
            confinement: tank.confinement,
            wavemaker: tank.wavemaker,
            extent: tank.extent,
            surface_z: tank.surface_z,
            hull_points: Vec::new(),
            hull_particles: Vec::new(),
            wet: 0.0,
            last_momentum: Vec3::zeros(),
            preroll_time: 0.0,
            preroll_error: (0.0, 0.0),
            wave_offset: 0.0,
        };
        let h = cfg.sim.dt / cfg.sim.substeps as f64;
        let gravity = Vec3::new(0.0, 0.0, -cfg.sim.gravity);
        let band = 2.0 * params.h;
        let check_every = ((PREROLL_CHECK / h).round() as usize).max(1);
        let mut steps = 0usize;
        loop {
            world.solver.solve_step(&mut world.particles, gravity, h, &world.confinement)?;
            steps += 1;
            let t = steps as f64 * h;
            if steps.is_multiple_of(check_every) || t >= cfg.fluid.preroll_max_time {
                let err = interior_density_error(&mut world.solver, &world.particles, band);
                world.preroll_error = err;
                if (t >= cfg.fluid.preroll_min_time && err.0 <= cfg.fluid.preroll_tolerance) || t >= cfg.fluid.preroll_max_time {
                    world.preroll_time = t;
                    break;
                }
            }
        }
        if world.preroll_error.0 > cfg.fluid.preroll_tolerance {
            log::warn!("tank did not settle: mean density error {:.4}", world.preroll_error.0);
        }
        world.surface_z = measure_surface(&world.particles, layer as usize, a);
        log::info!(
            "pre-roll {:.2} s, density error mean {:.4} max {:.4}, still water at {:.4} m",
            world.preroll_time,
            world.preroll_error.0,
            world.preroll_error.1,
            world.surface_z
        );

        if world.wavemaker.is_some() && cfg.wavemaker.lead_time > 0.0 {
            let n = (cfg.wavemaker.lead_time / h).round() as usize;
            for k in 1..=n {
                world.pose_wavemaker(k as f64 * h);
                world.solver.solve_step(&mut world.particles, gravity, h, &world.confinement)?;
            }
            world.wave_offset = n as f64 * h;
        }

        let kernel = *world.solver.kernel();
        // The fluid keeps about half a spacing clear of boundary samples, so
        // sampling the hull that far inside its faces makes the excluded
        // volume match the hull volume.
        let inset = aam.vehicle.hull_half_extents.map(|e| (e - 0.5 * a).max(0.0));
        let points = sample_box_surface(&inset, a);
        let masses = boundary_masses(&points, &kernel, params.rest_density);
        let weight = cfg.vehicle.solid_weight.unwrap_or(params.solid_weight);
        for (p, m) in points.iter().zip(&masses) {
            let x = aam.to_world(p);
            let idx = world.particles.push_boundary(x, *m, weight, Phase::Solid, Some(AAM), *p);
            world.hull_particles.push(idx);
        }
        world.hull_points = points;
        world.evacuate(aam);
        Ok(world)
    }

    /// Remove fluid particles inside the hull (plus half a spacing) and
    /// re-pose the hull particles, for inserting the AAM into water.
    pub fn evacuate(&mut self, aam: &Aam) {
        let margin = aam.vehicle.hull_half_extents.add_scalar(0.5 * self.solver.params().spacing);
        let center = aam.vehicle_origin();
        let inv = aam.body.orientation.inverse();
        let phase = &self.particles.phase;
        let pos = &self.particles.position;
        let inside: Vec<bool> = (0..pos.len())
            .map(|i| {
                let l = inv * (pos[i] - center);
                phase[i] == Phase::Fluid && (0..3).all(|k| l[k].abs() < margin[k])
            })
            .collect();
        if inside.iter().any(|&b| b) {
            self.particles.retain(|i| !inside[i]);
            self.hull_particles = self.particles.indices_owned_by(AAM);
        }
        for (k, &idx) in self.hull_particles.iter().enumerate() {
            let p = self.hull_points[k];
            self.particles.set_kinematic(idx, aam.to_world(&p), aam.velocity_at(&p));
        }
        self.solver.rebuild_grid(&self.particles);
    }

    fn pose_wavemaker(&mut self, t: f64) {
        if let Some(w) = &self.wavemaker {
            w.step(&mut self.particles, t);
            self.confinement.piston_x = Some(w.plane_x(t));
        }
    }

    /// One fluid substep ending at scenario time `t`, coupled to the AAM.
    fn substep(&mut self, aam: &mut Aam, t: f64, h: f64, gravity: f64) -> Result<(), FluidError> {
        self.pose_wavemaker(self.wave_offset + t);
        for (k, &idx) in self.hull_particles.iter().enumerate() {
            let p = self.hull_points[k];
            self.particles.set_kinematic(idx, aam.to_world(&p), aam.velocity_at(&p));
        }
        self.confinement.hulls.clear();
        self.confinement.hulls.push(HullBox {
            owner: AAM,
            center: aam.vehicle_origin(),
            orientation: aam.body.orientation,
            half_extents: aam.vehicle.hull_half_extents,
        });
        let report = self.solver.solve_step(&mut self.particles, Vec3::new(0.0, 0.0, -gravity), h, &self.confinement)?;
        let w = apply_coupling(AAM, &report.impulses, &aam.body.position, h);
        aam.apply_impulse(&w.momentum, &(w.torque * h));
        self.last_momentum = w.momentum;
        self.wet = wet_fraction(&self.hull_particles, &report.fluid_neighbors);
        Ok(())
    }

    /// Fluid particle positions, every `decimation`-th particle.
    pub fn fluid_positions(&self, decimation: usize) -> Vec<Vec3> {
        self.particles
            .position
            .iter()
            .zip(&self.particles.phase)
            .filter(|(_, p)| **p == Phase::Fluid)
            .step_by(decimation.max(1))
            .map(|(x, _)| *x)
            .collect()
    }
}

/// Everything observable about one completed step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub step: u64,
    pub t: f64,
    /// Kinematic acceleration of the AAM CoG over the step, world frame.
    pub accel: Vec3,
    pub wet_fraction: f64,
    pub crossing: Option<Crossing>,
    /// Any AAM point touched the tank floor during the step.
    pub floor_contact: bool,
    pub contacts: Vec<ContactEvent>,
    pub imu: Option<ImuSample>,
    pub actuation: Actuation,
}

#[derive(Debug, Clone)]
pub struct World {
    pub cfg: ScenarioConfig,
    pub clock: SimClock,
    pub aam: Aam,
    pub crab: Option<Crab>,
    pub fluid: Option<FluidWorld>,
    pub imu: Imu,
    pub planes: Vec<Plane>,
}

impl World {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let clock = SimClock::new(cfg.sim.dt, cfg.sim.substeps)
            .ok_or_else(|| ConfigError::invalid("sim.dt", "must be positive"))?;
        let aam = Aam::new(cfg)?;
        let crab = if cfg.crab.enabled { Some(Crab::new(&cfg.crab)?) } else { None };
        let fluid = if cfg.tank.enabled { Some(FluidWorld::new(cfg, &aam)?) } else { None };
        let planes = match &fluid {
            Some(f) => tank_planes(Some((f.extent.x, f.extent.y))),
            None => tank_planes(None),
        };
        let imu = Imu::new(&cfg.sensors, cfg.sim.dt, cfg.sim.gravity, cfg.seed)
            .map_err(|m| ConfigError::invalid("sensors.imu_rate", m))?;
        let mut world = Self { cfg: cfg.clone(), clock, aam, crab, fluid, imu, planes };
        world.imu.prime(0, &world.aam.body);
        Ok(world)
    }

    pub fn time(&self) -> f64 {
        self.clock.time()
    }

    /// Still-water level, or the floor without a tank.
    pub fn surface_z(&self) -> f64 {
        self.fluid.as_ref().map_or(0.0, |f| f.surface_z)
    }

    /// Reposition the AAM at rest and restart the sensor window.
    pub fn place_aam(&mut self, origin: Vec3, q: [f64; 3]) {
        self.aam.place(origin, Quat::identity(), q);
        let step = self.clock.step_index();
        self.imu.prime(step, &self.aam.body);
        if let Some(f) = &mut self.fluid {
            f.evacuate(&self.aam);
        }
    }

    /// Advance one control step.
    pub fn step(&mut self, cmd: &Command) -> Result<StepInfo> {
        let dt = self.clock.dt();
        let h = self.clock.substep_dt();
        let g = self.cfg.sim.gravity;
        let t0 = self.clock.time();
        let v_before = self.aam.body.linear_velocity;

        let view = RobotView {
            body: &self.aam.body,
            arm: &self.aam.arm,
            cog: self.aam.cog,
            thrust_factor: self.aam.thrust_factor(),
        };
        let actuation = self.aam.controller.step(cmd, view, dt);
        self.aam.rotor_speeds = if self.aam.thrusters_enabled { actuation.rotor_speeds } else { [0.0; 4] };
        self.aam.arm.q_prev = self.aam.arm.q;

        let mut tip_impulse = [(None, Vec3::zeros()); FINGERS];
        let mut floor_contact = false;
        for s in 0..self.clock.substeps() {
            let t = t0 + (s + 1) as f64 * h;
            let q_before = self.aam.arm.q;
            let fingers_before = self.aam.arm.fingers;
            let aam = &mut self.aam;
            aam.actuators.step(&aam.arm_model, &mut aam.arm, &actuation.joint_torques, &actuation.finger_torques, h);
            aam.internal_update(&q_before, h);

            let layout = &aam.vehicle.layout;
            let forces = rotor_forces(&aam.rotor_speeds, layout, aam.thrust_factor());
            let (f_body, tau_body) = rotor_wrench(layout, &forces, &aam.cog);
            let force = aam.body.orientation * f_body
                + Vec3::new(0.0, 0.0, -aam.body.mass * g)
                + air_drag(&aam.drag, &aam.body.linear_velocity, aam.medium.fraction);
            aam.body = integrate_rigid_body(&aam.body, force, tau_body, h)?;

            if let Some(crab) = &mut self.crab {
                crab.step(t, h, g, &self.planes)?;
            }
            let pts = self.aam.contact_points(&q_before, &fingers_before, h);
            let sets = [PointSet { body: 0, points: &pts }];
            let friction = self.aam.friction;
            let reports = match &mut self.crab {
                Some(crab) => {
                    let boxes = [BodyBox { body: 1, half_extents: crab.model.half_extents }];
                    resolve_contacts(&mut [&mut self.aam.body, &mut crab.body], &sets, &self.planes, &boxes, friction, CONTACT_ITERATIONS)
                }
                None => resolve_contacts(&mut [&mut self.aam.body], &sets, &self.planes, &[], friction, CONTACT_ITERATIONS),
            };
            for r in reports.iter().filter(|r| r.body == 0) {
                floor_contact |= r.target == ContactTarget::Floor;
                if FINGERTIPS.contains(&r.point) {
                    let slot = &mut tip_impulse[r.point - FINGERTIPS.start];
                    slot.0 = Some(r.target);
                    slot.1 += r.impulse;
                }
            }

            if let Some(fluid) = &mut self.fluid {
                fluid.substep(&mut self.aam, t, h, g)?;
            }
        }
        self.clock.advance();
        let t = self.clock.time();
        let step = self.clock.step_index();

        let wet = self.fluid.as_ref().map_or(0.0, |f| f.wet);
        let crossing = self.aam.medium.update(wet, t);
        let tips: Vec<Option<(ContactTarget, f64)>> =
            tip_impulse.iter().map(|(target, p)| target.map(|tg| (tg, p.norm() / dt))).collect();
        let contacts = poll_contacts(&tips, self.cfg.sensors.contact_threshold, t);
        let imu = self.imu.observe(step, t, &self.aam.body);
        let accel = (self.aam.body.linear_velocity - v_before) / dt;
        Ok(StepInfo { step, t, accel, wet_fraction: wet, crossing, floor_contact, contacts, imu, actuation })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::GripperCommand;
    use approx::assert_relative_eq;

    fn dry(cfg_edit: impl FnOnce(&mut ScenarioConfig)) -> World {
        let mut cfg = ScenarioConfig::default();
        cfg.tank.enabled = false;
        cfg_edit(&mut cfg);
        World::new(&cfg).unwrap()
    }

    #[test]
    fn free_fall_matches_gravity() {
        let mut w = dry(|c| {
            c.vehicle.thrusters_enabled = false;
            c.vehicle.drag = [0.0; 3];
        });
        let info = w.step(&Command::hover(w.aam.arm.q)).unwrap();
        assert_relative_eq!(info.accel.z, -9.81, epsilon = 1e-9);
        assert!(info.accel.xy().norm() < 1e-12);
    }

    #[test]
    fn hover_holds_position_without_arm_motion() {
        let mut w = dry(|_| {});
        let start = w.aam.body.position;
        for _ in 0..1000 {
            w.step(&Command::hover(w.aam.arm.q)).unwrap();
        }
        let drift = w.aam.body.position - start;
        assert!(drift.norm() < 0.05, "drift {drift:?}");
    }

    #[test]
    fn arm_motion_keeps_world_cog_in_free_space() {
        let mut w = dry(|c| {
            c.sim.gravity = 0.0;
            c.vehicle.thrusters_enabled = false;
            c.vehicle.drag = [0.0; 3];
        });
        let start = w.aam.body.position;
        let mut cmd = Command::hover([0.8, 1.0, -0.5]);
        cmd.gripper = GripperCommand::Close;
        for _ in 0..300 {
            w.step(&cmd).unwrap();
        }
        assert!((w.aam.body.position - start).norm() < 1e-12);
        // the base counter-rotates while the arm yaws
        assert!(w.aam.body.orientation.angle() > 1e-3);
    }

    #[test]
    fn resting_body_reads_contact_and_stops() {
        let mut w = dry(|c| {
            c.vehicle.thrusters_enabled = false;
            c.vehicle.spawn = [0.5, 0.5, 0.4];
            c.arm.initial_q = [0.0, 1.5, -2.4];
        });
        let q = w.aam.arm.q;
        let mut last = None;
        for _ in 0..500 {
            last = Some(w.step(&Command::hover(q)).unwrap());
        }
        let info = last.unwrap();
        assert!(info.floor_contact);
        assert!(info.accel.norm() < 0.5, "accel {:?}", info.accel);
    }

    #[test]
    fn identical_configs_are_bit_identical() {
        let run = || {
            let mut w = dry(|c| c.sensors.imu_noise_std = 0.01);
            let mut cmd = Command::hover([0.2, 0.5, -0.3]);
            cmd.v_ref = Vec3::new(0.3, -0.1, 0.2);
            (0..200).map(|_| w.step(&cmd).unwrap().accel).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn surface_measure_uses_top_layer() {
        let mut p = ParticleSet::new();
        for k in 0..3 {
            for i in 0..4 {
                p.push_fluid(Vec3::new(i as f64 * 0.1, 0.0, 0.05 + 0.1 * k as f64), 1.0);
            }
        }
        assert_relative_eq!(measure_surface(&p, 4, 0.1), 0.3, epsilon = 1e-12);
    }
}
