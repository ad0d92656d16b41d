//! Scenario configuration.
//!
//! Scenario files are TOML. Every key is optional and falls back to the
//! documented default below; unknown keys are rejected so typos fail loudly.
//! See `scenarios/*.toml` for the bundled experiments.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Declarative description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub sim: SimConfig,
    pub tank: TankConfig,
    pub fluid: FluidConfig,
    pub wavemaker: WavemakerConfig,
    pub vehicle: VehicleConfig,
    pub arm: ArmConfig,
    pub control: ControlConfig,
    pub sensors: SensorConfig,
    pub crab: CrabConfig,
    pub task: TaskConfig,
    pub env: EnvConfig,
    pub logging: LoggingConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            seed: 0,
            sim: SimConfig::default(),
            tank: TankConfig::default(),
            fluid: FluidConfig::default(),
            wavemaker: WavemakerConfig::default(),
            vehicle: VehicleConfig::default(),
            arm: ArmConfig::default(),
            control: ControlConfig::default(),
            sensors: SensorConfig::default(),
            crab: CrabConfig::default(),
            task: TaskConfig::default(),
            env: EnvConfig::default(),
            logging: LoggingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Physics (and control) timestep, seconds.
    pub dt: f64,
    /// Fluid substeps per physics step.
    pub substeps: u32,
    /// Gravitational acceleration magnitude, m/s², acting along -Z.
    pub gravity: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 0.004, substeps: 2, gravity: 9.81 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TankConfig {
    pub enabled: bool,
    /// Inner tank size (x, y, z), meters. The tank occupies [0, extent].
    pub extent: [f64; 3],
    /// Still-water depth, meters.
    pub fill_height: f64,
}

impl Default for TankConfig {
    fn default() -> Self {
        Self { enabled: true, extent: [2.0, 1.0, 0.8], fill_height: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidConfig {
    /// Rest density ρ0, kg/m³.
    pub rest_density: f64,
    /// Initial lattice spacing, meters.
    pub spacing: f64,
    /// Smoothing length as a multiple of the spacing.
    pub smoothing_ratio: f64,
    /// Constraint projection iterations per substep.
    pub iterations: u32,
    /// Constraint softening, relative to the rest-lattice denominator.
    pub relaxation: f64,
    /// Default solid mass-weight `s` for rigid bodies and tank walls.
    pub solid_weight: f64,
    /// Pairwise cohesion coefficient (0 disables).
    pub cohesion: f64,
    /// XSPH velocity smoothing coefficient (0 disables).
    pub viscosity: f64,
    /// Layers of static boundary particles behind each tank wall.
    pub wall_layers: u32,
    /// Pre-roll stops once the mean interior |C| is below this.
    pub preroll_tolerance: f64,
    /// Minimum pre-roll time, seconds.
    pub preroll_min_time: f64,
    /// Pre-roll gives up (and reports) after this long, seconds.
    pub preroll_max_time: f64,
}

impl Default for FluidConfig {
    fn default() -> Self {
        Self {
            rest_density: 1000.0,
            spacing: 0.035,
            smoothing_ratio: 2.0,
            iterations: 4,
            relaxation: 1e-5,
            solid_weight: 1.0,
            cohesion: 0.0,
            viscosity: 0.05,
            wall_layers: 2,
            preroll_tolerance: 0.02,
            preroll_min_time: 0.2,
            preroll_max_time: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavemakerConfig {
    pub enabled: bool,
    /// Piston stroke amplitude A, meters.
    pub amplitude: f64,
    /// Piston frequency f, Hz.
    pub frequency: f64,
    /// Piston rest position along x, meters. Fluid starts behind it.
    pub rest_x: f64,
    /// Time the piston runs before the scenario clock starts, seconds.
    pub lead_time: f64,
}

impl Default for WavemakerConfig {
    fn default() -> Self {
        Self { enabled: false, amplitude: 0.1, frequency: 1.0, rest_x: 0.35, lead_time: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleConfig {
    /// Vehicle mass without the arm, kg.
    pub mass: f64,
    /// Principal moments of inertia (body frame), kg·m².
    pub inertia: [f64; 3],
    /// Collision/boundary hull half extents, meters, centered on the body origin.
    pub hull_half_extents: [f64; 3],
    /// Rotor (x, y) positions in the body frame, meters.
    pub rotor_positions: [[f64; 2]; 4],
    /// Sign of each rotor's reaction yaw moment.
    pub rotor_directions: [f64; 4],
    /// Thrust coefficient k_T, N/(rad/s)².
    pub thrust_coefficient: f64,
    /// Rolling-moment coefficient k_R, N·m/(rad/s)².
    pub moment_coefficient: f64,
    pub max_rotor_speed: f64,
    /// Linear drag coefficient per world axis, N/(m/s), each in [0, 1).
    pub drag: [f64; 3],
    pub thrusters_enabled: bool,
    pub thrust_factor_air: f64,
    pub thrust_factor_water: f64,
    /// Mass-weight `s` of the hull in fluid density sums; falls back to fluid.solid_weight.
    pub solid_weight: Option<f64>,
    pub friction: f64,
    /// Initial body-origin position, meters.
    pub spawn: [f64; 3],
}

impl Default for VehicleConfig {
    fn default() -> Self {
        Self {
            mass: 1.5,
            inertia: [0.02, 0.02, 0.035],
            hull_half_extents: [0.05, 0.05, 0.02],
            rotor_positions: [[0.15, -0.15], [-0.15, 0.15], [0.15, 0.15], [-0.15, -0.15]],
            rotor_directions: [1.0, 1.0, -1.0, -1.0],
            thrust_coefficient: 1.0e-5,
            moment_coefficient: 1.6e-7,
            max_rotor_speed: 1100.0,
            drag: [0.5, 0.5, 0.5],
            thrusters_enabled: true,
            thrust_factor_air: 1.0,
            thrust_factor_water: 0.0,
            solid_weight: None,
            friction: 0.8,
            spawn: [1.0, 0.5, 1.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmConfig {
    pub link_lengths: [f64; 3],
    pub link_masses: [f64; 3],
    pub joint_limits: [[f64; 2]; 3],
    /// Arm base position in the vehicle body frame, meters.
    pub mount: [f64; 3],
    /// Effective rotor inertia seen by each joint, kg·m².
    pub joint_inertia: [f64; 3],
    pub joint_damping: [f64; 3],
    pub pd_kp: [f64; 3],
    pub pd_kd: [f64; 3],
    pub max_joint_torque: f64,
    /// Initial / default joint targets, radians.
    pub initial_q: [f64; 3],
    pub finger_length: f64,
    pub finger_open_angle: f64,
    pub finger_closed_angle: f64,
    pub finger_inertia: f64,
    pub finger_kp: f64,
    pub finger_kd: f64,
    pub finger_stall_torque: f64,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            link_lengths: [0.12, 0.12, 0.08],
            link_masses: [0.08, 0.08, 0.05],
            joint_limits: [[-PI, PI], [-2.0, 2.0], [-2.5, 2.5]],
            mount: [0.0, 0.0, -0.03],
            joint_inertia: [0.006, 0.004, 0.001],
            joint_damping: [0.01, 0.01, 0.005],
            pd_kp: [1.4, 0.9, 0.25],
            pd_kd: [0.18, 0.12, 0.03],
            max_joint_torque: 2.0,
            initial_q: [0.0, 0.0, 0.0],
            finger_length: 0.04,
            finger_open_angle: 0.6,
            finger_closed_angle: 0.0,
            finger_inertia: 2e-5,
            finger_kp: 0.05,
            finger_kd: 0.001,
            finger_stall_torque: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub velocity_kp: [f64; 3],
    pub velocity_kd: [f64; 3],
    pub velocity_ki: [f64; 3],
    /// Per-axis bound on the accumulated velocity error.
    pub integral_clamp: [f64; 3],
    /// Outer position loop gain used by the scenario harness, 1/s.
    pub position_gain: [f64; 3],
    pub max_velocity: [f64; 3],
    /// Attitude stabilizer proportional gain, rad/s² per rad.
    pub attitude_kp: [f64; 3],
    /// Attitude stabilizer rate gain, rad/s² per rad/s.
    pub attitude_kd: [f64; 3],
    pub max_tilt: f64,
    /// Rebuild the allocation matrix around the current CoG every step.
    pub cog_update: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            velocity_kp: [6.0, 6.0, 8.0],
            velocity_kd: [0.05, 0.05, 0.05],
            velocity_ki: [0.02, 0.02, 0.03],
            integral_clamp: [150.0, 150.0, 200.0],
            position_gain: [1.5, 1.5, 1.5],
            max_velocity: [1.5, 1.5, 1.5],
            attitude_kp: [300.0, 300.0, 60.0],
            attitude_kd: [30.0, 30.0, 12.0],
            max_tilt: 0.6,
            cog_update: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    /// IMU output rate, Hz.
    pub imu_rate: f64,
    /// Standard deviation of additive Gaussian IMU noise, m/s² and rad/s.
    pub imu_noise_std: f64,
    /// Fingertip contact threshold, N.
    pub contact_threshold: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self { imu_rate: 50.0, imu_noise_std: 0.0, contact_threshold: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrabMode {
    Gait,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrabConfig {
    pub enabled: bool,
    /// Initial carapace (x, y) on the tank floor, meters.
    pub position: [f64; 2],
    pub heading: f64,
    pub mass: f64,
    pub body_half_extents: [f64; 3],
    pub leg_length: f64,
    /// Neutral leg droop below horizontal, radians.
    pub leg_droop: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub joint_inertia: f64,
    pub gait_period: f64,
    pub swing_amplitude: f64,
    pub lift_amplitude: f64,
    pub friction: f64,
    pub mode: CrabMode,
}

impl Default for CrabConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            position: [1.4, 0.5],
            heading: 0.0,
            mass: 0.4,
            body_half_extents: [0.06, 0.05, 0.02],
            leg_length: 0.08,
            leg_droop: 0.6,
            stiffness: 0.5,
            damping: 0.02,
            joint_inertia: 1e-4,
            gait_period: 1.5,
            swing_amplitude: 0.25,
            lift_amplitude: 0.3,
            friction: 1.0,
            mode: CrabMode::Gait,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Splashdown,
    Hover,
    Oval,
    Capture,
    /// No scripted task; used by the environment server and tests.
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskKind,
    pub splashdown: SplashdownConfig,
    pub hover: HoverConfig,
    pub oval: OvalConfig,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            kind: TaskKind::Idle,
            splashdown: SplashdownConfig::default(),
            hover: HoverConfig::default(),
            oval: OvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplashdownConfig {
    /// Height of the hull bottom above the still-water surface at release, meters.
    pub drop_height: f64,
    /// Release (x, y), meters.
    pub drop_xy: [f64; 2],
    /// Arm pose held during the drop, radians.
    pub arm_pose: [f64; 3],
    /// Maximum simulated time after release, seconds.
    pub duration: f64,
    /// The run stops early once the body has been settled on the floor this long.
    pub settle_window: f64,
    /// Wave check: wave-on peak lateral acceleration before entry must reach
    /// this multiple of the wave-off peak.
    pub wave_ratio: f64,
    /// Wave check: and at least this absolute peak, m/s².
    pub wave_min_lateral: f64,
}

impl Default for SplashdownConfig {
    fn default() -> Self {
        Self {
            drop_height: 1.5,
            drop_xy: [1.0, 0.5],
            arm_pose: [0.0, 1.5, -2.4],
            duration: 4.0,
            settle_window: 0.3,
            wave_ratio: 3.0,
            wave_min_lateral: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoverConfig {
    pub setpoint: [f64; 3],
    /// Hover time before the arm starts moving (excluded from metrics), seconds.
    pub warmup: f64,
    /// Measured hover time with the arm sweeping, seconds.
    pub duration: f64,
    /// Peak joint offsets of the sweep, radians.
    pub sweep_amplitude: [f64; 3],
    pub sweep_period: f64,
    /// Position error that counts as divergence, meters.
    pub divergence_limit: f64,
    /// Allowed steady-state excursion per axis, meters.
    pub bounds: [f64; 3],
}

impl Default for HoverConfig {
    fn default() -> Self {
        Self {
            setpoint: [1.0, 0.5, 1.2],
            warmup: 1.0,
            duration: 30.0,
            sweep_amplitude: [0.0, 0.9, 0.6],
            sweep_period: 6.0,
            divergence_limit: 2.0,
            bounds: [0.05, 0.05, 0.3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OvalConfig {
    /// Center (x, y); z defaults to the still-water surface.
    pub center_xy: [f64; 2],
    /// Vertical offset of the center from the water surface, meters.
    pub center_dz: f64,
    /// Horizontal semi-axis a, meters.
    pub semi_major: f64,
    /// Vertical semi-axis b, meters.
    pub semi_minor: f64,
    pub period: f64,
    pub laps: f64,
    pub arm_pose: [f64; 3],
    pub divergence_limit: f64,
    /// Pass threshold on the RMS position error over the run, meters.
    pub max_rms_error: f64,
    /// Pass threshold on the largest single-step position change, meters.
    pub max_step_jump: f64,
}

impl Default for OvalConfig {
    fn default() -> Self {
        Self {
            center_xy: [1.5, 0.5],
            center_dz: 0.0,
            semi_major: 1.0,
            semi_minor: 0.5,
            period: 40.0,
            laps: 1.0,
            arm_pose: [0.0, 1.5, -2.4],
            divergence_limit: 2.0,
            max_rms_error: 0.3,
            max_step_jump: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub episode_length: u64,
    /// Success distance d_t, meters.
    pub distance_threshold: f64,
    pub velocity_penalty_threshold: f64,
    pub success_grace_steps: u64,
    /// End the episode on first arrival in the success region.
    pub terminate_on_success: bool,
    /// Approach point offset above the object centroid, meters.
    pub height_offset: f64,
    /// AAM spawn: uniform in a box of this half-size around `spawn_center`.
    pub spawn_half_extent: [f64; 3],
    /// Spawn box center relative to the target object, meters.
    pub spawn_offset: [f64; 3],
    /// Per-axis velocity command limit, m/s.
    pub action_limit: [f64; 3],
    /// Ignore arm/gripper extension fields in actions.
    pub mask_extensions: bool,
    /// Target object position when no crab is simulated, meters.
    pub target_position: [f64; 3],
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            episode_length: 1000,
            distance_threshold: 0.01,
            velocity_penalty_threshold: 2.0,
            success_grace_steps: 50,
            terminate_on_success: true,
            height_offset: 0.05,
            spawn_half_extent: [0.4, 0.3, 0.15],
            spawn_offset: [0.0, 0.0, 0.6],
            action_limit: [1.0, 1.0, 1.0],
            mask_extensions: true,
            target_position: [1.0, 0.5, 0.3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoggingConfig {
    pub verbose: bool,
    pub imu_log: bool,
}

impl Default for LoggingConfig {
    fn default() -> Self {
        Self { verbose: false, imu_log: true }
    }
}

const BUILTIN: &[(&str, &str)] = &[
    ("splashdown", include_str!("../scenarios/splashdown.toml")),
    ("wave", include_str!("../scenarios/wave.toml")),
    ("hover", include_str!("../scenarios/hover.toml")),
    ("oval", include_str!("../scenarios/oval.toml")),
    ("capture", include_str!("../scenarios/capture.toml")),
    ("reach", include_str!("../scenarios/reach.toml")),
];

/// Names of the scenarios compiled into the library.
pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ConfigError::UnknownScenario(name.to_string()))?;
    parse_scenario(text, &format!("<builtin:{name}>"))
}

/// Read and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text, &path.display().to_string())
}

/// Resolve a CLI scenario argument: an existing file, or a built-in name.
pub fn resolve_scenario(arg: &str) -> Result<ScenarioConfig, ConfigError> {
    let path = Path::new(arg);
    if path.exists() {
        load_scenario(path)
    } else {
        builtin_scenario(arg)
    }
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        ConfigError::Parse {
            path: origin.to_string(),
            line,
            message: e.message().trim().to_string(),
        }
    })?;
    config.validate()?;
    Ok(config)
}

fn positive(field: &str, value: f64) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("must be > 0, got {value}")))
    }
}

fn non_negative(field: &str, value: f64) -> Result<(), ConfigError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("must be >= 0, got {value}")))
    }
}

fn all_positive(field: &str, values: &[f64]) -> Result<(), ConfigError> {
    for (i, v) in values.iter().enumerate() {
        positive(&format!("{field}[{i}]"), *v)?;
    }
    Ok(())
}

fn all_non_negative(field: &str, values: &[f64]) -> Result<(), ConfigError> {
    for (i, v) in values.iter().enumerate() {
        non_negative(&format!("{field}[{i}]"), *v)?;
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("sim.dt", self.sim.dt)?;
        if self.sim.substeps == 0 {
            return Err(ConfigError::invalid("sim.substeps", "must be >= 1"));
        }
        non_negative("sim.gravity", self.sim.gravity)?;

        all_positive("tank.extent", &self.tank.extent)?;
        non_negative("tank.fill_height", self.tank.fill_height)?;
        if self.tank.fill_height > self.tank.extent[2] {
            return Err(ConfigError::invalid("tank.fill_height", "exceeds tank height"));
        }

        let f = &self.fluid;
        positive("fluid.rest_density", f.rest_density)?;
        positive("fluid.spacing", f.spacing)?;
        if !(f.smoothing_ratio > 1.0 && f.smoothing_ratio.is_finite()) {
            return Err(ConfigError::invalid(
                "fluid.smoothing_ratio",
                "smoothing length must exceed the particle spacing",
            ));
        }
        if f.iterations == 0 {
            return Err(ConfigError::invalid("fluid.iterations", "must be >= 1"));
        }
        non_negative("fluid.relaxation", f.relaxation)?;
        positive("fluid.solid_weight", f.solid_weight)?;
        non_negative("fluid.cohesion", f.cohesion)?;
        non_negative("fluid.viscosity", f.viscosity)?;
        positive("fluid.preroll_tolerance", f.preroll_tolerance)?;
        non_negative("fluid.preroll_min_time", f.preroll_min_time)?;
        non_negative("fluid.preroll_max_time", f.preroll_max_time)?;

        let w = &self.wavemaker;
        non_negative("wavemaker.amplitude", w.amplitude)?;
        positive("wavemaker.frequency", w.frequency)?;
        non_negative("wavemaker.rest_x", w.rest_x)?;
        non_negative("wavemaker.lead_time", w.lead_time)?;
        if w.enabled && w.rest_x - w.amplitude < 0.0 {
            return Err(ConfigError::invalid(
                "wavemaker.amplitude",
                "piston stroke would leave the tank",
            ));
        }

        let v = &self.vehicle;
        positive("vehicle.mass", v.mass)?;
        all_positive("vehicle.inertia", &v.inertia)?;
        all_positive("vehicle.hull_half_extents", &v.hull_half_extents)?;
        positive("vehicle.thrust_coefficient", v.thrust_coefficient)?;
        positive("vehicle.moment_coefficient", v.moment_coefficient)?;
        positive("vehicle.max_rotor_speed", v.max_rotor_speed)?;
        for (i, c) in v.drag.iter().enumerate() {
            if !(0.0..1.0).contains(c) {
                return Err(ConfigError::invalid(
                    format!("vehicle.drag[{i}]"),
                    format!("must lie in [0, 1), got {c}"),
                ));
            }
        }
        if v.rotor_directions.iter().any(|d| d.abs() != 1.0)
            || v.rotor_directions.iter().sum::<f64>() != 0.0
        {
            return Err(ConfigError::invalid(
                "vehicle.rotor_directions",
                "need two +1 and two -1 entries",
            ));
        }
        non_negative("vehicle.thrust_factor_air", v.thrust_factor_air)?;
        non_negative("vehicle.thrust_factor_water", v.thrust_factor_water)?;
        if let Some(s) = v.solid_weight {
            positive("vehicle.solid_weight", s)?;
        }
        non_negative("vehicle.friction", v.friction)?;

        let a = &self.arm;
        all_non_negative("arm.link_lengths", &a.link_lengths)?;
        all_positive("arm.link_masses", &a.link_masses)?;
        for (i, [lo, hi]) in a.joint_limits.iter().enumerate() {
            if !(lo < hi) {
                return Err(ConfigError::invalid(
                    format!("arm.joint_limits[{i}]"),
                    "lower limit must be below upper limit",
                ));
            }
        }
        all_positive("arm.joint_inertia", &a.joint_inertia)?;
        all_non_negative("arm.joint_damping", &a.joint_damping)?;
        all_non_negative("arm.pd_kp", &a.pd_kp)?;
        all_non_negative("arm.pd_kd", &a.pd_kd)?;
        positive("arm.max_joint_torque", a.max_joint_torque)?;
        non_negative("arm.finger_length", a.finger_length)?;
        positive("arm.finger_inertia", a.finger_inertia)?;
        non_negative("arm.finger_kp", a.finger_kp)?;
        non_negative("arm.finger_kd", a.finger_kd)?;
        positive("arm.finger_stall_torque", a.finger_stall_torque)?;

        let c = &self.control;
        all_non_negative("control.velocity_kp", &c.velocity_kp)?;
        all_non_negative("control.velocity_kd", &c.velocity_kd)?;
        all_non_negative("control.velocity_ki", &c.velocity_ki)?;
        all_non_negative("control.integral_clamp", &c.integral_clamp)?;
        all_non_negative("control.position_gain", &c.position_gain)?;
        all_positive("control.max_velocity", &c.max_velocity)?;
        all_non_negative("control.attitude_kp", &c.attitude_kp)?;
        all_non_negative("control.attitude_kd", &c.attitude_kd)?;
        positive("control.max_tilt", c.max_tilt)?;

        positive("sensors.imu_rate", self.sensors.imu_rate)?;
        non_negative("sensors.imu_noise_std", self.sensors.imu_noise_std)?;
        positive("sensors.contact_threshold", self.sensors.contact_threshold)?;

        let k = &self.crab;
        positive("crab.mass", k.mass)?;
        all_positive("crab.body_half_extents", &k.body_half_extents)?;
        positive("crab.leg_length", k.leg_length)?;
        non_negative("crab.stiffness", k.stiffness)?;
        non_negative("crab.damping", k.damping)?;
        positive("crab.joint_inertia", k.joint_inertia)?;
        positive("crab.gait_period", k.gait_period)?;
        non_negative("crab.swing_amplitude", k.swing_amplitude)?;
        non_negative("crab.lift_amplitude", k.lift_amplitude)?;
        non_negative("crab.friction", k.friction)?;

        let s = &self.task.splashdown;
        non_negative("task.splashdown.drop_height", s.drop_height)?;
        positive("task.splashdown.duration", s.duration)?;
        positive("task.splashdown.settle_window", s.settle_window)?;
        positive("task.splashdown.wave_ratio", s.wave_ratio)?;
        non_negative("task.splashdown.wave_min_lateral", s.wave_min_lateral)?;
        let h = &self.task.hover;
        non_negative("task.hover.warmup", h.warmup)?;
        positive("task.hover.duration", h.duration)?;
        positive("task.hover.sweep_period", h.sweep_period)?;
        positive("task.hover.divergence_limit", h.divergence_limit)?;
        all_positive("task.hover.bounds", &h.bounds)?;
        let o = &self.task.oval;
        non_negative("task.oval.semi_major", o.semi_major)?;
        non_negative("task.oval.semi_minor", o.semi_minor)?;
        positive("task.oval.period", o.period)?;
        positive("task.oval.laps", o.laps)?;
        positive("task.oval.divergence_limit", o.divergence_limit)?;
        positive("task.oval.max_rms_error", o.max_rms_error)?;
        positive("task.oval.max_step_jump", o.max_step_jump)?;

        let e = &self.env;
        if e.episode_length == 0 {
            return Err(ConfigError::invalid("env.episode_length", "must be >= 1"));
        }
        positive("env.distance_threshold", e.distance_threshold)?;
        positive("env.velocity_penalty_threshold", e.velocity_penalty_threshold)?;
        non_negative("env.height_offset", e.height_offset)?;
        all_non_negative("env.spawn_half_extent", &e.spawn_half_extent)?;
        all_positive("env.action_limit", &e.action_limit)?;
        Ok(())
    }

    /// Smoothing length h, meters.
    pub fn smoothing_length(&self) -> f64 {
        self.fluid.spacing * self.fluid.smoothing_ratio
    }

    /// Still-water surface height, or the floor when no tank is simulated.
    pub fn water_surface(&self) -> f64 {
        if self.tank.enabled {
            self.tank.fill_height
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = parse_scenario("[tank]\nextent = [1.0, 0.5, 0.6]\n", "t").unwrap();
        assert_eq!(cfg.tank.extent, [1.0, 0.5, 0.6]);
        assert_eq!(cfg.sim, SimConfig::default());
        assert_eq!(cfg.fluid, FluidConfig::default());
        assert_eq!(cfg.env.episode_length, 1000);
        assert_eq!(cfg.sim.dt, 0.004);
    }

    #[test]
    fn negative_rest_density_names_field() {
        let err = parse_scenario("[fluid]\nrest_density = -1\n", "t").unwrap_err();
        match err {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "fluid.rest_density"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err = parse_scenario("seed = 3\n\n[fluid]\nrest_densty = 1000\n", "f.toml").unwrap_err();
        match err {
            ConfigError::Parse { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("rest_densty"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_scenario("[sim]\ndt = 0.004\nsubsteps = = 2\n", "f.toml").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn drag_outside_unit_interval_rejected() {
        let err = parse_scenario("[vehicle]\ndrag = [0.5, 1.0, 0.1]\n", "t").unwrap_err();
        assert!(err.to_string().contains("vehicle.drag[1]"));
    }

    #[test]
    fn every_builtin_scenario_parses() {
        for name in builtin_names() {
            let cfg = builtin_scenario(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.sim.dt, 0.004, "{name}");
        }
    }

    #[test]
    fn capture_scenario_uses_evaluation_settings() {
        let cfg = builtin_scenario("capture").unwrap();
        assert_eq!(cfg.sim.dt, 0.004);
        assert_eq!(cfg.env.episode_length, 1000);
        assert_eq!(cfg.env.distance_threshold, 0.01);
    }

    #[test]
    fn load_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        std::fs::write(&path, "name = \"disk\"\n[tank]\nextent = [2.0, 1.0, 0.8]\n").unwrap();
        let cfg = load_scenario(&path).unwrap();
        assert_eq!(cfg.name, "disk");
        assert!(load_scenario(dir.path().join("missing.toml")).is_err());
    }
}
