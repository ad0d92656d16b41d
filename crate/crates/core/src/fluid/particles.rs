use crate::error::FluidError;
use crate::math::Vec3;

/// Index of a rigid body in the world that owns boundary particles.
pub type BodyId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Fluid,
    /// Surface sample of a rigid body, or a static tank wall when unowned.
    Solid,
    /// Kinematic piston particle.
    Wavemaker,
}

/// Structure-of-arrays particle storage.
///
/// Boundary particles carry an owner (the rigid body they were sampled from)
/// and a body-frame offset so they can be re-posed from the body every
/// substep. `weight` is the mass-weight `s` applied to the particle's mass in
/// density sums; it is 1 for fluid.
#[derive(Debug, Clone, Default)]
pub struct ParticleSet {
    pub position: Vec<Vec3>,
    pub predicted: Vec<Vec3>,
    pub velocity: Vec<Vec3>,
    pub mass: Vec<f64>,
    pub weight: Vec<f64>,
    pub phase: Vec<Phase>,
    pub owner: Vec<Option<BodyId>>,
    pub local: Vec<Vec3>,
    generation: u64,
}

impl ParticleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    /// Incremented whenever predicted positions change.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn touch(&mut self) {
        self.generation = self.generation.wrapping_add(1);
    }

    pub fn push_fluid(&mut self, x: Vec3, mass: f64) -> usize {
        self.push(x, Vec3::zeros(), mass, 1.0, Phase::Fluid, None, Vec3::zeros())
    }

    pub fn push_boundary(
        &mut self,
        x: Vec3,
        mass: f64,
        weight: f64,
        phase: Phase,
        owner: Option<BodyId>,
        local: Vec3,
    ) -> usize {
        debug_assert!(phase != Phase::Fluid);
        self.push(x, Vec3::zeros(), mass, weight, phase, owner, local)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        x: Vec3,
        v: Vec3,
        mass: f64,
        weight: f64,
        phase: Phase,
        owner: Option<BodyId>,
        local: Vec3,
    ) -> usize {
        self.position.push(x);
        self.predicted.push(x);
        self.velocity.push(v);
        self.mass.push(mass);
        self.weight.push(weight);
        self.phase.push(phase);
        self.owner.push(owner);
        self.local.push(local);
        self.touch();
        self.position.len() - 1
    }

    pub fn fluid_count(&self) -> usize {
        self.phase.iter().filter(|p| **p == Phase::Fluid).count()
    }

    pub fn fluid_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.phase[i] == Phase::Fluid).collect()
    }

    pub fn indices_owned_by(&self, body: BodyId) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.owner[i] == Some(body)).collect()
    }

    /// Place a kinematic particle (both current and predicted position).
    pub fn set_kinematic(&mut self, i: usize, x: Vec3, v: Vec3) {
        self.position[i] = x;
        self.predicted[i] = x;
        self.velocity[i] = v;
    }

    /// Keep only the particles for which `keep(index)` holds, preserving order.
    pub fn retain(&mut self, mut keep: impl FnMut(usize) -> bool) {
        let flags: Vec<bool> = (0..self.len()).map(&mut keep).collect();
        fn filter<T>(v: &mut Vec<T>, flags: &[bool]) {
            let mut k = 0;
            v.retain(|_| {
                k += 1;
                flags[k - 1]
            });
        }
        filter(&mut self.position, &flags);
        filter(&mut self.predicted, &flags);
        filter(&mut self.velocity, &flags);
        filter(&mut self.mass, &flags);
        filter(&mut self.weight, &flags);
        filter(&mut self.phase, &flags);
        filter(&mut self.owner, &flags);
        filter(&mut self.local, &flags);
        self.touch();
    }

    pub fn check_index(&self, i: usize) -> Result<(), FluidError> {
        if i < self.len() {
            Ok(())
        } else {
            Err(FluidError::IndexOutOfRange { index: i, len: self.len() })
        }
    }

    /// Array lengths agree, positions are finite and fluid masses are uniform.
    pub fn check_invariants(&self) -> bool {
        let n = self.len();
        let lengths = [
            self.predicted.len(),
            self.velocity.len(),
            self.mass.len(),
            self.weight.len(),
            self.phase.len(),
            self.owner.len(),
            self.local.len(),
        ];
        if lengths.iter().any(|&l| l != n) {
            return false;
        }
        if !self.position.iter().all(|p| p.iter().all(|c| c.is_finite())) {
            return false;
        }
        let mut fluid_mass = None;
        for i in 0..n {
            if self.phase[i] == Phase::Fluid {
                match fluid_mass {
                    None => fluid_mass = Some(self.mass[i]),
                    Some(m) if m != self.mass[i] => return false,
                    _ => {}
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_keeps_arrays_aligned() {
        let mut p = ParticleSet::new();
        p.push_fluid(Vec3::new(0.0, 0.0, 0.0), 0.04);
        p.push_boundary(Vec3::x(), 0.05, 2.0, Phase::Solid, Some(3), Vec3::x());
        assert_eq!(p.len(), 2);
        assert_eq!(p.fluid_count(), 1);
        assert_eq!(p.indices_owned_by(3), vec![1]);
        assert!(p.check_invariants());
        assert!(p.check_index(2).is_err());
    }

    #[test]
    fn unequal_fluid_masses_break_invariant() {
        let mut p = ParticleSet::new();
        p.push_fluid(Vec3::zeros(), 0.04);
        p.push_fluid(Vec3::x(), 0.05);
        assert!(!p.check_invariants());
    }

    #[test]
    fn generation_advances() {
        let mut p = ParticleSet::new();
        let g = p.generation();
        p.push_fluid(Vec3::zeros(), 1.0);
        assert_ne!(p.generation(), g);
    }

    #[test]
    fn retain_drops_selected_particles() {
        let mut p = ParticleSet::new();
        for k in 0..4 {
            p.push_fluid(Vec3::x() * k as f64, 0.04);
        }
        p.push_boundary(Vec3::z(), 0.05, 1.0, Phase::Solid, Some(1), Vec3::zeros());
        p.retain(|i| i % 2 == 0);
        assert_eq!(p.len(), 3);
        assert_eq!(p.position[1], Vec3::x() * 2.0);
        assert_eq!(p.indices_owned_by(1), vec![2]);
        assert!(p.check_invariants());
    }
}
