//! Position-based fluid solver with mass-weighted solid coupling.
//!
//! Each fluid particle carries a unilateral density constraint
//! `C_i = ρ_i/ρ0 − 1 ≤ 0`, where solid neighbors enter the density sum with
//! their mass scaled by the per-particle weight `s`. Constraints are projected
//! Jacobi-style: all multipliers are computed from a frozen snapshot, then all
//! corrections are applied at once. Solid particles are treated as kinematic
//! inside the projection; the momentum the fluid receives from them is
//! returned as equal and opposite impulses on their owning bodies.

use crate::config::FluidConfig;
use crate::error::{DivergenceSnapshot, FluidError};
use crate::fluid::grid::NeighborGrid;
use crate::fluid::kernel::Kernel;
use crate::fluid::particles::{BodyId, ParticleSet, Phase};
use crate::math::{Quat, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct FluidParams {
    pub rest_density: f64,
    pub h: f64,
    pub spacing: f64,
    pub iterations: u32,
    pub relaxation: f64,
    pub solid_weight: f64,
    pub cohesion: f64,
    pub viscosity: f64,
}

impl FluidParams {
    pub fn from_config(c: &FluidConfig) -> Result<Self, FluidError> {
        let p = Self {
            rest_density: c.rest_density,
            h: c.spacing * c.smoothing_ratio,
            spacing: c.spacing,
            iterations: c.iterations,
            relaxation: c.relaxation,
            solid_weight: c.solid_weight,
            cohesion: c.cohesion,
            viscosity: c.viscosity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FluidError> {
        let bad = |name: &'static str, message: String| Err(FluidError::Parameter { name, message });
        if !(self.rest_density > 0.0) {
            return bad("rest_density", format!("must be > 0, got {}", self.rest_density));
        }
        if !(self.spacing > 0.0) {
            return bad("spacing", format!("must be > 0, got {}", self.spacing));
        }
        if !(self.h > self.spacing) {
            return bad("h", format!("must exceed spacing {}, got {}", self.spacing, self.h));
        }
        if self.iterations == 0 {
            return bad("iterations", "must be >= 1".into());
        }
        if !(self.solid_weight > 0.0) {
            return bad("solid_weight", format!("must be > 0, got {}", self.solid_weight));
        }
        if !(self.relaxation >= 0.0 && self.cohesion >= 0.0 && self.viscosity >= 0.0) {
            return bad("relaxation", "relaxation, cohesion and viscosity must be >= 0".into());
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<Kernel, FluidError> {
        Kernel::new(self.h)
    }

    /// Offsets of cubic-lattice sites within the kernel support, origin included.
    fn lattice_offsets(&self) -> Vec<Vec3> {
        let reach = (self.h / self.spacing).ceil() as i32;
        let mut out = Vec::new();
        for i in -reach..=reach {
            for j in -reach..=reach {
                for k in -reach..=reach {
                    let r = Vec3::new(i as f64, j as f64, k as f64) * self.spacing;
                    if r.norm() < self.h {
                        out.push(r);
                    }
                }
            }
        }
        out
    }

    /// Particle mass that puts an interior cubic lattice exactly at rest density.
    pub fn particle_mass(&self) -> f64 {
        let k = Kernel::new(self.h).expect("validated h");
        let sum: f64 = self.lattice_offsets().iter().map(|r| k.w(r)).sum();
        self.rest_density / sum
    }

    /// Constraint-gradient denominator of an interior lattice particle.
    pub fn rest_denominator(&self) -> f64 {
        let k = Kernel::new(self.h).expect("validated h");
        let m = self.particle_mass();
        let rho0 = self.rest_density;
        self.lattice_offsets()
            .iter()
            .map(|r| m * k.grad(r).norm_squared() / (rho0 * rho0))
            .sum()
    }
}

/// `C = ρ/ρ0 − 1`.
pub fn density_constraint(rho: f64, rest_density: f64) -> f64 {
    rho / rest_density - 1.0
}

/// Mass-weighted SPH density of particle `i` from the grid's snapshot.
pub fn compute_density(
    i: usize,
    particles: &ParticleSet,
    grid: &NeighborGrid,
    kernel: &Kernel,
) -> Result<f64, FluidError> {
    grid.check(particles)?;
    particles.check_index(i)?;
    let mut rho = 0.0;
    grid.for_each_within(&particles.predicted, &particles.predicted[i], |j, _, r2| {
        rho += particles.mass[j] * particles.weight[j] * kernel.w_r2(r2);
    });
    Ok(rho)
}

/// Oriented box that fluid particles may not enter.
#[derive(Debug, Clone, PartialEq)]
pub struct HullBox {
    pub owner: BodyId,
    pub center: Vec3,
    pub orientation: Quat,
    pub half_extents: Vec3,
}

/// Geometric limits enforced on fluid particles after every projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Confinement {
    pub min: Vec3,
    pub max: Vec3,
    /// Wavemaker piston face; fluid stays at larger x.
    pub piston_x: Option<f64>,
    pub hulls: Vec<HullBox>,
}

impl Confinement {
    pub fn unbounded() -> Self {
        Self {
            min: Vec3::repeat(f64::NEG_INFINITY),
            max: Vec3::repeat(f64::INFINITY),
            piston_x: None,
            hulls: Vec::new(),
        }
    }

    #[inline]
    fn clamp(&self, x: &mut Vec3) {
        let lo_x = self.piston_x.map_or(self.min.x, |p| p.max(self.min.x));
        x.x = x.x.clamp(lo_x, self.max.x);
        x.y = x.y.clamp(self.min.y, self.max.y);
        if x.z < self.min.z {
            x.z = self.min.z;
        }
    }
}

/// Impulse delivered to a body through one of its boundary particles.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingImpulse {
    pub owner: BodyId,
    pub point: Vec3,
    pub impulse: Vec3,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub impulses: Vec<CouplingImpulse>,
    /// Mean positive constraint violation before each projection iteration.
    pub iteration_error: Vec<f64>,
    /// Fluid neighbor count of every particle (meaningful for boundary particles).
    pub fluid_neighbors: Vec<u16>,
}

/// Reusable solver state; buffers are kept between steps to avoid allocation.
#[derive(Debug, Clone)]
pub struct FluidSolver {
    params: FluidParams,
    kernel: Kernel,
    grid: NeighborGrid,
    mass: f64,
    epsilon: f64,
    fluid: Vec<u32>,
    nbr_start: Vec<u32>,
    nbr: Vec<u32>,
    pair_mw: Vec<f64>,
    pair_fluid: Vec<bool>,
    pair_grad: Vec<Vec3>,
    lambda: Vec<f64>,
    delta: Vec<Vec3>,
    impulse: Vec<Vec3>,
    wet: Vec<u16>,
    /// Abort when any fluid particle moves faster than this, m/s.
    pub max_speed: f64,
}

impl FluidSolver {
    pub fn new(params: FluidParams) -> Result<Self, FluidError> {
        params.validate()?;
        let kernel = params.kernel()?;
        let grid = NeighborGrid::new(params.h)?;
        let mass = params.particle_mass();
        let epsilon = params.relaxation * params.rest_denominator();
        Ok(Self {
            params,
            kernel,
            grid,
            mass,
            epsilon,
            fluid: Vec::new(),
            nbr_start: Vec::new(),
            nbr: Vec::new(),
            pair_mw: Vec::new(),
            pair_fluid: Vec::new(),
            pair_grad: Vec::new(),
            lambda: Vec::new(),
            delta: Vec::new(),
            impulse: Vec::new(),
            wet: Vec::new(),
            max_speed: 60.0,
        })
    }

    pub fn params(&self) -> &FluidParams {
        &self.params
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn particle_mass(&self) -> f64 {
        self.mass
    }

    pub fn grid(&self) -> &NeighborGrid {
        &self.grid
    }

    /// Rebuild the neighbor grid over the current predicted positions.
    pub fn rebuild_grid(&mut self, particles: &ParticleSet) {
        self.grid.build(particles);
    }

    fn build_pairs(&mut self, particles: &ParticleSet) {
        let n = particles.len();
        self.fluid.clear();
        self.fluid.extend((0..n as u32).filter(|&i| particles.phase[i as usize] == Phase::Fluid));
        self.nbr_start.clear();
        self.nbr.clear();
        self.wet.clear();
        self.wet.resize(n, 0);
        let pos = &particles.predicted;
        for &i in &self.fluid {
            self.nbr_start.push(self.nbr.len() as u32);
            let i = i as usize;
            let nbr = &mut self.nbr;
            let wet = &mut self.wet;
            let phase = &particles.phase;
            self.grid.for_each_within(pos, &pos[i], |j, _, _| {
                if j != i {
                    nbr.push(j as u32);
                    if phase[j] != Phase::Fluid {
                        wet[j] = wet[j].saturating_add(1);
                    }
                }
            });
        }
        self.nbr_start.push(self.nbr.len() as u32);
        self.pair_mw.clear();
        self.pair_fluid.clear();
        for &j in &self.nbr {
            let j = j as usize;
            self.pair_mw.push(particles.mass[j] * particles.weight[j]);
            self.pair_fluid.push(particles.phase[j] == Phase::Fluid);
        }
        self.pair_grad.clear();
        self.pair_grad.resize(self.nbr.len(), Vec3::zeros());
    }

    /// Density constraint value of every fluid particle, as `(index, C)`.
    pub fn constraint_values(&mut self, particles: &ParticleSet) -> Vec<(usize, f64)> {
        self.grid.build(particles);
        let rho0 = self.params.rest_density;
        let mut out = Vec::with_capacity(particles.len());
        for i in 0..particles.len() {
            if particles.phase[i] != Phase::Fluid {
                continue;
            }
            let rho = compute_density(i, particles, &self.grid, &self.kernel).expect("grid just built");
            out.push((i, density_constraint(rho, rho0)));
        }
        out
    }

    /// Advance the fluid by one substep.
    ///
    /// Boundary particles must already be posed for the end of the substep
    /// (position, predicted and velocity). `gravity` is the external
    /// acceleration applied to fluid particles.
    pub fn solve_step(
        &mut self,
        particles: &mut ParticleSet,
        gravity: Vec3,
        dt: f64,
        confinement: &Confinement,
    ) -> Result<StepReport, FluidError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FluidError::Parameter { name: "dt", message: format!("must be > 0, got {dt}") });
        }
        let n = particles.len();
        let rho0 = self.params.rest_density;
        let inv_rho0 = 1.0 / rho0;

        for i in 0..n {
            if particles.phase[i] == Phase::Fluid {
                particles.velocity[i] += gravity * dt;
                particles.predicted[i] = particles.position[i] + particles.velocity[i] * dt;
            }
        }
        particles.touch();
        self.grid.build(particles);
        self.build_pairs(particles);

        self.lambda.clear();
        self.lambda.resize(n, 0.0);
        self.impulse.clear();
        self.impulse.resize(n, Vec3::zeros());
        self.delta.clear();
        self.delta.resize(self.fluid.len(), Vec3::zeros());
        let mut report = StepReport::default();
        let k = self.kernel;
        let w0 = k.w_zero();

        for _ in 0..self.params.iterations {
            let pos = &particles.predicted;
            let mut violation = 0.0;
            for (slot, &i) in self.fluid.iter().enumerate() {
                let i = i as usize;
                let xi = pos[i];
                let mi = particles.mass[i];
                let range = self.nbr_start[slot] as usize..self.nbr_start[slot + 1] as usize;
                let mut rho = mi * w0;
                let mut g = Vec3::zeros();
                let mut sum = 0.0;
                for p in range {
                    let j = self.nbr[p] as usize;
                    let r = xi - pos[j];
                    let r2 = r.norm_squared();
                    let grad = k.grad_r2(&r, r2);
                    self.pair_grad[p] = grad;
                    let mj = self.pair_mw[p];
                    rho += mj * k.w_r2(r2);
                    g += grad * mj;
                    if self.pair_fluid[p] {
                        sum += mj * grad.norm_squared();
                    }
                }
                let c = rho * inv_rho0 - 1.0;
                if c <= 0.0 {
                    self.lambda[i] = 0.0;
                    continue;
                }
                violation += c;
                let denom = (g.norm_squared() / mi + sum) * inv_rho0 * inv_rho0 + self.epsilon;
                self.lambda[i] = -c / denom;
            }
            report.iteration_error.push(violation / self.fluid.len().max(1) as f64);

            for (slot, &i) in self.fluid.iter().enumerate() {
                let i = i as usize;
                let li = self.lambda[i];
                let mi = particles.mass[i];
                let mut dx = Vec3::zeros();
                let range = self.nbr_start[slot] as usize..self.nbr_start[slot + 1] as usize;
                for p in range {
                    let j = self.nbr[p] as usize;
                    let mj = self.pair_mw[p];
                    if self.pair_fluid[p] {
                        let lj = self.lambda[j];
                        if li != 0.0 || lj != 0.0 {
                            dx += self.pair_grad[p] * ((li * mj / mi + lj) * inv_rho0);
                        }
                    } else if li != 0.0 {
                        let q = self.pair_grad[p] * (li * mj * inv_rho0);
                        dx += q / mi;
                        self.impulse[j] -= q / dt;
                    }
                }
                self.delta[slot] = dx;
            }

            for (slot, &i) in self.fluid.iter().enumerate() {
                let x = &mut particles.predicted[i as usize];
                *x += self.delta[slot];
                confinement.clamp(x);
            }
        }

        if !confinement.hulls.is_empty() {
            self.project_out_of_hulls(particles, confinement, dt, &mut report);
        }

        for &i in &self.fluid {
            let i = i as usize;
            particles.velocity[i] = (particles.predicted[i] - particles.position[i]) / dt;
        }
        if self.params.viscosity > 0.0 || self.params.cohesion > 0.0 {
            self.velocity_smoothing(particles, dt);
        }
        for &i in &self.fluid {
            let i = i as usize;
            particles.position[i] = particles.predicted[i];
        }
        particles.touch();
        self.check_finite(particles)?;

        for j in 0..n {
            if let Some(owner) = particles.owner[j] {
                let p = self.impulse[j];
                if p != Vec3::zeros() {
                    report.impulses.push(CouplingImpulse { owner, point: particles.position[j], impulse: p });
                }
            }
        }
        report.fluid_neighbors = std::mem::take(&mut self.wet);
        Ok(report)
    }

    fn project_out_of_hulls(
        &mut self,
        particles: &mut ParticleSet,
        confinement: &Confinement,
        dt: f64,
        report: &mut StepReport,
    ) {
        for hull in &confinement.hulls {
            let inv = hull.orientation.inverse();
            let e = hull.half_extents;
            for &i in &self.fluid {
                let i = i as usize;
                let local = inv * (particles.predicted[i] - hull.center);
                let depth = Vec3::new(e.x - local.x.abs(), e.y - local.y.abs(), e.z - local.z.abs());
                if depth.x <= 0.0 || depth.y <= 0.0 || depth.z <= 0.0 {
                    continue;
                }
                let axis = if depth.x <= depth.y && depth.x <= depth.z {
                    0
                } else if depth.y <= depth.z {
                    1
                } else {
                    2
                };
                let mut push = Vec3::zeros();
                push[axis] = if local[axis] < 0.0 { -depth[axis] } else { depth[axis] };
                let dx = hull.orientation * push;
                let before = particles.predicted[i];
                particles.predicted[i] += dx;
                confinement.clamp(&mut particles.predicted[i]);
                let moved = particles.predicted[i] - before;
                report.impulses.push(CouplingImpulse {
                    owner: hull.owner,
                    point: before,
                    impulse: -moved * (particles.mass[i] / dt),
                });
            }
        }
    }

    fn velocity_smoothing(&mut self, particles: &mut ParticleSet, dt: f64) {
        let c = self.params.viscosity;
        let gamma = self.params.cohesion;
        let h = self.params.h;
        let k = self.kernel;
        let inv_rho0 = 1.0 / self.params.rest_density;
        let cohesion_norm = 32.0 / (std::f64::consts::PI * h.powi(9));
        let pos = &particles.predicted;
        let vel = &particles.velocity;
        for (slot, &i) in self.fluid.iter().enumerate() {
            let i = i as usize;
            let mut dv = Vec3::zeros();
            let range = self.nbr_start[slot] as usize..self.nbr_start[slot + 1] as usize;
            for &j in &self.nbr[range] {
                let j = j as usize;
                if particles.phase[j] != Phase::Fluid {
                    continue;
                }
                let r = pos[i] - pos[j];
                let r2 = r.norm_squared();
                if c > 0.0 {
                    dv += (vel[j] - vel[i]) * (c * particles.mass[j] * inv_rho0 * k.w_r2(r2));
                }
                if gamma > 0.0 && r2 > 1e-24 {
                    let len = r2.sqrt();
                    // cohesion spline: attractive beyond h/2, repulsive inside
                    let spline = if 2.0 * len > h {
                        cohesion_norm * (h - len).powi(3) * len.powi(3)
                    } else {
                        cohesion_norm * (2.0 * (h - len).powi(3) * len.powi(3) - h.powi(6) / 64.0)
                    };
                    dv -= r / len * (gamma * particles.mass[j] * spline * dt);
                }
            }
            self.delta[slot] = dv;
        }
        for (slot, &i) in self.fluid.iter().enumerate() {
            particles.velocity[i as usize] += self.delta[slot];
        }
    }

    fn check_finite(&self, particles: &ParticleSet) -> Result<(), FluidError> {
        for &i in &self.fluid {
            let i = i as usize;
            let x = particles.position[i];
            let v = particles.velocity[i];
            let finite = x.iter().chain(v.iter()).all(|c| c.is_finite());
            let reason = if !finite {
                "non-finite particle state"
            } else if v.norm() > self.max_speed {
                "particle speed exceeded the divergence limit"
            } else {
                continue;
            };
            return Err(FluidError::Diverged(Box::new(DivergenceSnapshot {
                particle: i,
                position: x,
                velocity: v,
                particle_count: particles.len(),
                reason: reason.to_string(),
            })));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::kernel::Kernel;
    use approx::assert_relative_eq;

    fn params() -> FluidParams {
        FluidParams {
            rest_density: 1000.0,
            h: 0.07,
            spacing: 0.035,
            iterations: 4,
            relaxation: 1e-5,
            solid_weight: 1.0,
            cohesion: 0.0,
            viscosity: 0.0,
        }
    }

    #[test]
    fn constraint_arithmetic() {
        assert_eq!(density_constraint(1000.0, 1000.0), 0.0);
        assert_relative_eq!(density_constraint(1050.0, 1000.0), 0.05, epsilon = 1e-12);
        assert_relative_eq!(density_constraint(900.0, 1000.0), -0.1, epsilon = 1e-12);
    }

    #[test]
    fn isolated_particle_density_is_self_term() {
        let k = Kernel::new(0.07).unwrap();
        let mut p = ParticleSet::new();
        p.push_fluid(Vec3::zeros(), 0.5);
        let mut g = NeighborGrid::new(0.07).unwrap();
        g.build(&p);
        assert_relative_eq!(compute_density(0, &p, &g, &k).unwrap(), 0.5 * k.w_zero(), max_relative = 1e-14);
    }

    #[test]
    fn two_fluid_particles_density() {
        let h = 0.07;
        let k = Kernel::new(h).unwrap();
        let mut p = ParticleSet::new();
        p.push_fluid(Vec3::zeros(), 0.3);
        p.push_fluid(Vec3::new(h / 2.0, 0.0, 0.0), 0.3);
        let mut g = NeighborGrid::new(h).unwrap();
        g.build(&p);
        // poly6 evaluated by hand: 315/(64π h⁹)(h² − r²)³
        let pi = std::f64::consts::PI;
        let w = |r: f64| 315.0 / (64.0 * pi * h.powi(9)) * (h * h - r * r).powi(3);
        let expected = 0.3 * w(0.0) + 0.3 * w(h / 2.0);
        assert_relative_eq!(compute_density(0, &p, &g, &k).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn solid_neighbor_is_mass_weighted() {
        let h = 0.07;
        let k = Kernel::new(h).unwrap();
        let (m, mb, s) = (0.3, 0.45, 2.0);
        let mut p = ParticleSet::new();
        p.push_fluid(Vec3::zeros(), m);
        p.push_boundary(Vec3::new(0.0, 0.0, h / 2.0), mb, s, Phase::Solid, Some(0), Vec3::zeros());
        let mut g = NeighborGrid::new(h).unwrap();
        g.build(&p);
        let expected = m * k.w_zero() + s * mb * k.w_r2(h * h / 4.0);
        assert_relative_eq!(compute_density(0, &p, &g, &k).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn stale_grid_is_an_error() {
        let k = Kernel::new(0.07).unwrap();
        let mut p = ParticleSet::new();
        p.push_fluid(Vec3::zeros(), 1.0);
        let mut g = NeighborGrid::new(0.07).unwrap();
        g.build(&p);
        p.push_fluid(Vec3::x(), 1.0);
        assert!(matches!(compute_density(0, &p, &g, &k), Err(FluidError::StaleGrid { .. })));
    }

    #[test]
    fn rest_lattice_has_rest_density() {
        let prm = params();
        let m = prm.particle_mass();
        let mut p = ParticleSet::new();
        for i in 0..7 {
            for j in 0..7 {
                for l in 0..7 {
                    p.push_fluid(Vec3::new(i as f64, j as f64, l as f64) * prm.spacing, m);
                }
            }
        }
        let mut solver = FluidSolver::new(prm).unwrap();
        let c = solver.constraint_values(&p);
        let center = 3 * 49 + 3 * 7 + 3;
        let (_, c_center) = c.iter().find(|(i, _)| *i == center).unwrap();
        assert!(c_center.abs() < 1e-12, "{c_center}");
    }

    #[test]
    fn rest_lattice_without_gravity_is_not_corrected() {
        let prm = params();
        let m = prm.particle_mass();
        let mut p = ParticleSet::new();
        for i in 0..6 {
            for j in 0..6 {
                for l in 0..6 {
                    p.push_fluid(Vec3::new(i as f64, j as f64, l as f64) * prm.spacing, m);
                }
            }
        }
        let before = p.position.clone();
        let mut solver = FluidSolver::new(prm).unwrap();
        solver.solve_step(&mut p, Vec3::zeros(), 0.002, &Confinement::unbounded()).unwrap();
        for (a, b) in before.iter().zip(&p.position) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn overlapping_pair_moves_apart_symmetrically() {
        let prm = params();
        let m = prm.particle_mass();
        let mut p = ParticleSet::new();
        // close enough that the pair alone exceeds rest density
        p.push_fluid(Vec3::new(-0.001, 0.0, 0.0), m * 40.0);
        p.push_fluid(Vec3::new(0.002, 0.0, 0.0), m * 40.0);
        let before = p.position.clone();
        let mut solver = FluidSolver::new(FluidParams { iterations: 1, ..prm }).unwrap();
        solver.solve_step(&mut p, Vec3::zeros(), 0.002, &Confinement::unbounded()).unwrap();
        let d0 = p.position[0] - before[0];
        let d1 = p.position[1] - before[1];
        assert!(d0.norm() > 0.0);
        assert!((d0 + d1).norm() < 1e-10);
        assert!(d0.x < 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(FluidSolver::new(FluidParams { h: 0.03, ..params() }).is_err());
        assert!(FluidSolver::new(FluidParams { iterations: 0, ..params() }).is_err());
        assert!(FluidSolver::new(FluidParams { rest_density: -1.0, ..params() }).is_err());
        assert!(FluidSolver::new(FluidParams { solid_weight: 0.0, ..params() }).is_err());
    }

    #[test]
    fn divergence_reports_snapshot() {
        let prm = params();
        let mut p = ParticleSet::new();
        p.push_fluid(Vec3::zeros(), prm.particle_mass());
        p.velocity[0] = Vec3::new(1e3, 0.0, 0.0);
        let mut solver = FluidSolver::new(prm).unwrap();
        let err = solver.solve_step(&mut p, Vec3::zeros(), 0.002, &Confinement::unbounded()).unwrap_err();
        match err {
            FluidError::Diverged(s) => {
                assert_eq!(s.particle, 0);
                assert_eq!(s.particle_count, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn boundary_impulses_conserve_momentum(seed in 0u64..1000, depth in 0.0f64..0.05) {
            use rand::{Rng, SeedableRng};
            let prm = FluidParams { viscosity: 0.05, ..params() };
            let m = prm.particle_mass();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut p = ParticleSet::new();
            for _ in 0..300 {
                let x = Vec3::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15), rng.random_range(-0.02 - depth..0.2));
                p.push_fluid(x, m);
            }
            let half = Vec3::new(0.08, 0.08, 0.03);
            let center = Vec3::new(0.0, 0.0, -0.03);
            for s in crate::fluid::sample_box_surface(&half, prm.spacing) {
                p.push_boundary(center + s, m, 1.0, Phase::Solid, Some(0), s);
            }
            let mut conf = Confinement::unbounded();
            conf.hulls.push(HullBox { owner: 0, center, orientation: Quat::identity(), half_extents: half });
            let mut solver = FluidSolver::new(prm).unwrap();
            let r = solver.solve_step(&mut p, Vec3::zeros(), 0.002, &conf).unwrap();
            let fluid: Vec3 = (0..p.len()).filter(|&i| p.phase[i] == Phase::Fluid).map(|i| p.velocity[i] * p.mass[i]).sum();
            let body: Vec3 = r.impulses.iter().map(|c| c.impulse).sum();
            let scale: f64 = (0..p.len()).filter(|&i| p.phase[i] == Phase::Fluid).map(|i| p.velocity[i].norm() * p.mass[i]).sum();
            proptest::prop_assert!((fluid + body).norm() <= 1e-6 * scale.max(1e-3), "residual {:?} scale {scale}", fluid + body);
        }
    }
}
