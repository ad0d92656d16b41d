//! Tank construction: fluid lattice, wall boundary layers, piston, and
//! surface sampling of rigid bodies.

use crate::config::ScenarioConfig;
use crate::error::FluidError;
use crate::fluid::kernel::Kernel;
use crate::fluid::particles::{ParticleSet, Phase};
use crate::fluid::solver::{Confinement, FluidParams};
use crate::fluid::wavemaker::Wavemaker;
use crate::math::Vec3;

/// A filled tank ready for pre-roll.
#[derive(Debug, Clone)]
pub struct Tank {
    pub particles: ParticleSet,
    /// Inner size snapped to whole lattice cells, meters.
    pub extent: Vec3,
    /// Still-water surface height, meters.
    pub surface_z: f64,
    pub confinement: Confinement,
    pub wavemaker: Option<Wavemaker>,
}

/// Fill a tank on a cubic lattice. Walls and floor are continued by
/// `wall_layers` layers of static boundary particles so that fluid next to a
/// wall sees a full kernel neighborhood.
pub fn build_tank(cfg: &ScenarioConfig, params: &FluidParams) -> Result<Tank, FluidError> {
    let a = params.spacing;
    let m = params.particle_mass();
    let s = params.solid_weight;
    let layers = cfg.fluid.wall_layers as i64;
    let nx = (cfg.tank.extent[0] / a + 1e-9).floor() as i64;
    let ny = (cfg.tank.extent[1] / a + 1e-9).floor() as i64;
    let nz_wall = (cfg.tank.extent[2] / a - 1e-9).ceil() as i64;
    let nz = (cfg.tank.fill_height / a).round() as i64;
    if nx < 2 || ny < 2 {
        return Err(FluidError::Parameter {
            name: "spacing",
            message: format!("tank extent holds fewer than two particles per axis at spacing {a}"),
        });
    }
    let site = |i: i64, j: i64, k: i64| Vec3::new((i as f64 + 0.5) * a, (j as f64 + 0.5) * a, (k as f64 + 0.5) * a);
    let mut particles = ParticleSet::new();

    let mut i0 = 0;
    let mut wavemaker = None;
    if cfg.wavemaker.enabled {
        i0 = (cfg.wavemaker.rest_x / a).round() as i64;
        let rest_x = i0 as f64 * a;
        let mut piston = Vec::new();
        for l in 0..layers.max(1) {
            let behind = (l as f64 + 0.5) * a;
            for j in 0..ny {
                for k in 0..nz_wall {
                    let mut x = site(0, j, k);
                    x.x = rest_x - behind;
                    let idx = particles.push_boundary(x, m, s, Phase::Wavemaker, None, Vec3::zeros());
                    piston.push((idx, behind));
                }
            }
        }
        wavemaker = Some(Wavemaker {
            amplitude: cfg.wavemaker.amplitude,
            frequency: cfg.wavemaker.frequency,
            rest_x,
            particles: piston,
        });
    }

    for i in i0..nx {
        for j in 0..ny {
            for k in 0..nz {
                particles.push_fluid(site(i, j, k), m);
            }
        }
    }

    let wall = |x: Vec3, particles: &mut ParticleSet| {
        particles.push_boundary(x, m, s, Phase::Solid, None, Vec3::zeros());
    };
    for i in -layers..nx + layers {
        for j in -layers..ny + layers {
            for k in -layers..0 {
                wall(site(i, j, k), &mut particles);
            }
        }
    }
    for k in 0..nz_wall {
        for j in -layers..ny + layers {
            for i in (-layers..0).chain(nx..nx + layers) {
                wall(site(i, j, k), &mut particles);
            }
        }
        for i in 0..nx {
            for j in (-layers..0).chain(ny..ny + layers) {
                wall(site(i, j, k), &mut particles);
            }
        }
    }

    let extent = Vec3::new(nx as f64 * a, ny as f64 * a, cfg.tank.extent[2]);
    let confinement = Confinement {
        min: Vec3::zeros(),
        max: Vec3::new(extent.x, extent.y, f64::INFINITY),
        piston_x: wavemaker.as_ref().map(|w| w.rest_x),
        hulls: Vec::new(),
    };
    Ok(Tank { particles, extent, surface_z: nz as f64 * a, confinement, wavemaker })
}

/// Points on the surface of an axis-aligned box centered at the origin, at
/// roughly `spacing` apart.
pub fn sample_box_surface(half_extents: &Vec3, spacing: f64) -> Vec<Vec3> {
    let n: [usize; 3] = std::array::from_fn(|k| ((2.0 * half_extents[k] / spacing).ceil() as usize).max(1));
    let mut out = Vec::new();
    for i in 0..=n[0] {
        for j in 0..=n[1] {
            for k in 0..=n[2] {
                let on_face = i == 0 || i == n[0] || j == 0 || j == n[1] || k == 0 || k == n[2];
                if !on_face {
                    continue;
                }
                let f = |c: usize, axis: usize| -half_extents[axis] + 2.0 * half_extents[axis] * c as f64 / n[axis] as f64;
                out.push(Vec3::new(f(i, 0), f(j, 1), f(k, 2)));
            }
        }
    }
    out
}

/// Boundary particle masses `ρ0 / Σ_k W(x_b − x_k)` over the same surface,
/// so sparsely sampled surfaces still present full density to the fluid.
pub fn boundary_masses(points: &[Vec3], kernel: &Kernel, rest_density: f64) -> Vec<f64> {
    points
        .iter()
        .map(|b| {
            let sum: f64 = points.iter().map(|k| kernel.w(&(b - k))).sum();
            rest_density / sum
        })
        .collect()
}

/// Highest fluid particle within `radius` (horizontally) of `(x, y)`.
pub fn surface_height(particles: &ParticleSet, x: f64, y: f64, radius: f64) -> Option<f64> {
    let r2 = radius * radius;
    particles
        .position
        .iter()
        .zip(&particles.phase)
        .filter(|(p, ph)| **ph == Phase::Fluid && (p.x - x).powi(2) + (p.y - y).powi(2) <= r2)
        .map(|(p, _)| p.z)
        .fold(None, |acc: Option<f64>, z| Some(acc.map_or(z, |a| a.max(z))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.tank.extent = [0.4, 0.3, 0.4];
        cfg.tank.fill_height = 0.2;
        cfg.fluid.spacing = 0.05;
        cfg
    }

    #[test]
    fn lattice_counts() {
        let cfg = small_config();
        let params = FluidParams::from_config(&cfg.fluid).unwrap();
        let tank = build_tank(&cfg, &params).unwrap();
        assert_eq!(tank.particles.fluid_count(), 8 * 6 * 4);
        assert!((tank.surface_z - 0.2).abs() < 1e-12);
        assert!(tank.particles.check_invariants());
        assert!(tank.wavemaker.is_none());
    }

    #[test]
    fn wavemaker_displaces_fluid_start() {
        let mut cfg = small_config();
        cfg.wavemaker.enabled = true;
        cfg.wavemaker.rest_x = 0.1;
        cfg.wavemaker.amplitude = 0.05;
        let params = FluidParams::from_config(&cfg.fluid).unwrap();
        let tank = build_tank(&cfg, &params).unwrap();
        assert_eq!(tank.particles.fluid_count(), 6 * 6 * 4);
        let w = tank.wavemaker.unwrap();
        assert!(!w.particles.is_empty());
        let min_x = tank
            .particles
            .position
            .iter()
            .zip(&tank.particles.phase)
            .filter(|(_, p)| **p == Phase::Fluid)
            .map(|(x, _)| x.x)
            .fold(f64::INFINITY, f64::min);
        assert!(min_x > w.rest_x);
    }

    #[test]
    fn box_surface_sampling_covers_faces() {
        let pts = sample_box_surface(&Vec3::new(0.05, 0.05, 0.02), 0.035);
        assert!(pts.iter().all(|p| {
            (p.x.abs() - 0.05).abs() < 1e-12 || (p.y.abs() - 0.05).abs() < 1e-12 || (p.z.abs() - 0.02).abs() < 1e-12
        }));
        // 4×4×3 grid of nodes minus the interior 2×2×1
        assert_eq!(pts.len(), 4 * 4 * 3 - 2 * 2);
    }

    #[test]
    fn sparse_surface_gets_heavier_particles() {
        let k = Kernel::new(0.07).unwrap();
        let pts = sample_box_surface(&Vec3::new(0.2, 0.2, 0.2), 0.035);
        let masses = boundary_masses(&pts, &k, 1000.0);
        let params = FluidParams {
            rest_density: 1000.0,
            h: 0.07,
            spacing: 0.035,
            iterations: 1,
            relaxation: 0.0,
            solid_weight: 1.0,
            cohesion: 0.0,
            viscosity: 0.0,
        };
        let lattice_mass = params.particle_mass();
        assert!(masses.iter().all(|&mb| mb > lattice_mass));
    }
}
