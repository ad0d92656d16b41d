use std::path::PathBuf;

use thiserror::Error;

use crate::math::Vec3;

/// Crate-wide error type. Each subsystem has its own enum; this wraps them so
/// scenario and server code can use `?` across module boundaries.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error("scenario `{scenario}` failed: {reason}")]
    Scenario { scenario: String, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("non-finite {quantity} applied to body `{body}`")]
    NonFiniteInput { body: String, quantity: &'static str },
    #[error("timestep must be positive and finite, got {0}")]
    BadTimestep(f64),
    #[error("inertia tensor of body `{0}` is not invertible")]
    SingularInertia(String),
    #[error("integration of body `{0}` produced a non-finite state")]
    NonFiniteState(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot read scenario file {path}: {message}")]
    Read { path: String, message: String },
    #[error("unknown built-in scenario `{0}`")]
    UnknownScenario(String),
}

impl ConfigError {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluidError {
    #[error("invalid fluid parameter `{name}`: {message}")]
    Parameter { name: &'static str, message: String },
    #[error("neighbor grid is stale: built for generation {grid}, particles are at {particles}")]
    StaleGrid { grid: u64, particles: u64 },
    #[error("fluid solver diverged: {0}")]
    Diverged(Box<DivergenceSnapshot>),
    #[error("particle index {index} out of range ({len} particles)")]
    IndexOutOfRange { index: usize, len: usize },
}

/// State captured at the moment the solver gave up, for post-mortem.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceSnapshot {
    pub particle: usize,
    pub position: Vec3,
    pub velocity: Vec3,
    pub particle_count: usize,
    pub reason: String,
}

impl std::fmt::Display for DivergenceSnapshot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (particle {} of {}, x = [{:.4}, {:.4}, {:.4}], v = [{:.4}, {:.4}, {:.4}])",
            self.reason,
            self.particle,
            self.particle_count,
            self.position.x,
            self.position.y,
            self.position.z,
            self.velocity.x,
            self.velocity.y,
            self.velocity.z
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("allocation matrix is singular (condition number {condition:.3e})")]
    Singular { condition: f64 },
    #[error("rotor layout invalid: {0}")]
    Layout(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("target unreachable; closest end-effector distance {closest:.4} m")]
    NoSolution { closest: f64 },
    #[error("arm model invalid: {0}")]
    Model(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unknown command `{0}`")]
    UnknownCommand(String),
    #[error("another client already controls this environment")]
    ControllerBusy,
    #[error("episode is done; send reset before stepping")]
    EpisodeDone,
    #[error("no episode active; send reset first")]
    NotReset,
    #[error("{0}")]
    Request(String),
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("demo i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("demo line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported demo format `{format}` version {version} (expected seals-demo version 1)")]
    Version { format: String, version: u64 },
    #[error("demo file is empty (missing header line)")]
    MissingHeader,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DumpError {
    #[error("particle dump truncated at byte {offset}: need {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("particle dump frame at byte {offset} has non-finite time")]
    BadTime { offset: usize },
}
