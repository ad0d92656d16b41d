//! Particle-based water: kernels, neighbor search, density-constraint
//! projection, tank construction, wavemaker and particle dumps.

pub mod dump;
pub mod grid;
pub mod kernel;
pub mod particles;
pub mod solver;
pub mod tank;
pub mod wavemaker;

pub use grid::NeighborGrid;
pub use kernel::{kernel_grad_w, kernel_w, Kernel};
pub use particles::{BodyId, ParticleSet, Phase};
pub use solver::{
    compute_density, density_constraint, Confinement, CouplingImpulse, FluidParams, FluidSolver, HullBox,
    StepReport,
};
pub use tank::{boundary_masses, build_tank, sample_box_surface, surface_height, Tank};
pub use wavemaker::{piston_displacement, Wavemaker};
