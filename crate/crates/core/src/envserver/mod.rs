//! Episodic environment around the world: observations, actions, the capture
//! reward, termination rules, demonstration files and the network server.

pub mod demo;
pub mod protocol;
pub mod server;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{EnvConfig, ScenarioConfig};
use crate::control::{Command, GripperCommand};
use crate::error::{ProtocolError, Result};
use crate::math::{Quat, Vec3};
use crate::world::World;

pub const OBSERVATION_SIZE: usize = 17;
/// Reward for leaving the success region within the grace window, in units of `1/d_t`.
pub const SUCCESS_EXIT_PENALTY: f64 = 1000.0;
pub const VELOCITY_PENALTY: f64 = 5.0;

/// AAM position (3), orientation w,x,y,z (4), velocity (3), target position
/// (3), target orientation w,x,y,z (4).
pub type Observation = [f64; OBSERVATION_SIZE];

/// Capture reward. `d = 1` belongs to the inner region and `d = d_t` to the
/// success region.
pub fn reward(d: f64, d_t: f64, over_speed: bool, left_success: bool) -> f64 {
    let mut r = if d > 1.0 {
        (-d).exp()
    } else if d > d_t {
        1.0 / d
    } else {
        SUCCESS_EXIT_PENALTY / d_t
    };
    if over_speed {
        r -= VELOCITY_PENALTY;
    }
    if left_success {
        r -= SUCCESS_EXIT_PENALTY / d_t;
    }
    r
}

/// Velocity command with optional arm and gripper extension, sent as a JSON
/// array of 3 or 7 numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Action {
    pub velocity: [f64; 3],
    /// Joint targets and gripper signal in {-1, 0, 1}.
    pub extension: Option<([f64; 3], f64)>,
}

impl Action {
    pub fn velocity(v: [f64; 3]) -> Self {
        Self { velocity: v, extension: None }
    }
}

impl TryFrom<Vec<f64>> for Action {
    type Error = String;

    fn try_from(v: Vec<f64>) -> Result<Self, String> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err("action components must be finite".into());
        }
        match v.len() {
            3 => Ok(Self::velocity([v[0], v[1], v[2]])),
            7 => Ok(Self { velocity: [v[0], v[1], v[2]], extension: Some(([v[3], v[4], v[5]], v[6])) }),
            n => Err(format!("action needs 3 or 7 numbers, got {n}")),
        }
    }
}

impl From<Action> for Vec<f64> {
    fn from(a: Action) -> Self {
        let mut v = a.velocity.to_vec();
        if let Some((q, g)) = a.extension {
            v.extend_from_slice(&q);
            v.push(g);
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub success: bool,
    pub truncated: bool,
    /// Gripper to approach-point distance, meters.
    pub distance: f64,
    /// The action was clamped to the configured limits.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvTransition {
    pub step: u64,
    pub obs: Observation,
    /// The action as applied, after clamping and masking.
    pub action: Action,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    scenario: String,
    template: World,
    world: World,
    seed: u64,
    steps: u64,
    active: bool,
    last_success: Option<u64>,
    hold_q: [f64; 3],
}

impl Env {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let template = World::new(cfg)?;
        Ok(Self {
            cfg: cfg.env.clone(),
            scenario: cfg.name.clone(),
            world: template.clone(),
            template,
            seed: cfg.seed,
            steps: 0,
            active: false,
            last_success: None,
            hold_q: cfg.arm.initial_q,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.world.clock.dt()
    }

    /// An episode is running and accepts steps.
    pub fn active(&self) -> bool {
        self.active
    }

    /// Target object pose: the crab carapace, or the configured marker.
    pub fn target(&self) -> (Vec3, Quat) {
        match &self.world.crab {
            Some(c) => (c.body.position, c.body.orientation),
            None => (self.cfg.target_position.into(), Quat::identity()),
        }
    }

    /// Point the gripper should reach: the target lifted by the height offset.
    pub fn approach_point(&self) -> Vec3 {
        self.target().0 + Vec3::new(0.0, 0.0, self.cfg.height_offset)
    }

    pub fn distance(&self) -> f64 {
        (self.world.aam.gripper_point() - self.approach_point()).norm()
    }

    pub fn observation(&self) -> Observation {
        let aam = &self.world.aam;
        let p = aam.vehicle_origin();
        let q = aam.body.orientation;
        let v = aam.velocity_at(&Vec3::zeros());
        let (tp, tq) = self.target();
        let mut o = [0.0; OBSERVATION_SIZE];
        o[..3].copy_from_slice(p.as_slice());
        o[3..7].copy_from_slice(&[q.w, q.i, q.j, q.k]);
        o[7..10].copy_from_slice(v.as_slice());
        o[10..13].copy_from_slice(tp.as_slice());
        o[13..].copy_from_slice(&[tq.w, tq.i, tq.j, tq.k]);
        o
    }

    /// Start a new episode: restore the initial world and spawn the AAM at a
    /// seeded random offset from the target.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.world = self.template.clone();
        self.seed = seed;
        self.steps = 0;
        self.active = true;
        self.last_success = None;
        self.hold_q = self.world.cfg.arm.initial_q;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (target, _) = self.target();
        let mut spawn = target + Vec3::from(self.cfg.spawn_offset);
        for k in 0..3 {
            let h = self.cfg.spawn_half_extent[k];
            if h > 0.0 {
                spawn[k] += rng.random_range(-h..=h);
            }
        }
        let q = self.hold_q;
        self.world.place_aam(spawn, q);
        self.observation()
    }

    /// Clamp to limits and drop masked extensions. Returns whether anything changed.
    fn sanitize(&self, action: &Action) -> (Action, bool) {
        let mut a = *action;
        let mut clamped = false;
        for k in 0..3 {
            let lim = self.cfg.action_limit[k];
            let v = a.velocity[k].clamp(-lim, lim);
            clamped |= v != a.velocity[k];
            a.velocity[k] = v;
        }
        if self.cfg.mask_extensions {
            a.extension = None;
        } else if let Some((q, g)) = &mut a.extension {
            let limits = self.world.cfg.arm.joint_limits;
            for k in 0..3 {
                let c = q[k].clamp(limits[k][0], limits[k][1]);
                clamped |= c != q[k];
                q[k] = c;
            }
            let s = g.clamp(-1.0, 1.0);
            clamped |= s != *g;
            *g = s;
        }
        (a, clamped)
    }

    pub fn step(&mut self, action: &Action) -> Result<EnvTransition> {
        if !self.active {
            let err = if self.steps == 0 { ProtocolError::NotReset } else { ProtocolError::EpisodeDone };
            return Err(err.into());
        }
        let (action, clamped) = self.sanitize(action);
        let mut cmd = Command::hover(self.hold_q);
        cmd.v_ref = Vec3::from(action.velocity);
        if let Some((q, g)) = action.extension {
            self.hold_q = q;
            cmd.q_ref = q;
            cmd.gripper = GripperCommand::from_signal(g);
        }
        self.world.step(&cmd)?;
        self.steps += 1;

        let d = self.distance();
        let d_t = self.cfg.distance_threshold;
        let in_success = d <= d_t;
        let left = !in_success
            && self.last_success.is_some_and(|k| self.steps - k <= self.cfg.success_grace_steps);
        if in_success {
            self.last_success = Some(self.steps);
        }
        let speed = self.world.aam.body.linear_velocity.norm();
        let r = reward(d, d_t, speed > self.cfg.velocity_penalty_threshold, left);
        let success = in_success && self.cfg.terminate_on_success;
        let truncated = !success && self.steps >= self.cfg.episode_length;
        let done = success || truncated;
        if done {
            self.active = false;
        }
        Ok(EnvTransition {
            step: self.steps,
            obs: self.observation(),
            action,
            reward: r,
            done,
            info: StepInfo { success: in_success, truncated, distance: d, clamped },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use approx::assert_relative_eq;

    fn air_env() -> Env {
        let mut cfg = ScenarioConfig { name: "air".into(), ..Default::default() };
        cfg.tank.enabled = false;
        cfg.env.episode_length = 20;
        Env::new(&cfg).unwrap()
    }

    #[test]
    fn reward_regions() {
        assert_relative_eq!(reward(2.0, 0.01, false, false), (-2.0f64).exp(), epsilon = 1e-15);
        assert_eq!(reward(0.5, 0.01, false, false), 2.0);
        assert_eq!(reward(0.005, 0.01, false, false), 100000.0);
        assert_eq!(reward(0.5, 0.01, true, false), -3.0);
        assert_eq!(reward(0.5, 0.01, false, true), 2.0 - 100000.0);
    }

    #[test]
    fn reward_boundaries_and_jumps() {
        assert_eq!(reward(1.0, 0.01, false, false), 1.0);
        assert_eq!(reward(0.01, 0.01, false, false), 100000.0);
        let above = reward(1.0 + 1e-12, 0.01, false, false);
        assert_relative_eq!(1.0 - above, 1.0 - (-1.0f64).exp(), epsilon = 1e-9);
        let outside = reward(0.01 + 1e-12, 0.01, false, false);
        assert_relative_eq!(100000.0 - outside, 100000.0 - 100.0, epsilon = 1e-6);
    }

    #[test]
    fn action_json_forms() {
        let a: Action = serde_json::from_str("[0.1, 0.2, 0.3]").unwrap();
        assert_eq!(a, Action::velocity([0.1, 0.2, 0.3]));
        let b: Action = serde_json::from_str("[0, 0, 0, 0.1, 0.2, 0.3, 1]").unwrap();
        assert_eq!(b.extension, Some(([0.1, 0.2, 0.3], 1.0)));
        assert_eq!(serde_json::to_string(&b).unwrap(), "[0.0,0.0,0.0,0.1,0.2,0.3,1.0]");
        assert!(serde_json::from_str::<Action>("[1, 2]").is_err());
    }

    #[test]
    fn step_before_reset_is_an_error() {
        let mut env = air_env();
        let err = env.step(&Action::velocity([0.0; 3])).unwrap_err();
        assert!(matches!(err, Error::Protocol(ProtocolError::NotReset)));
    }

    #[test]
    fn zero_action_at_spawn_is_not_done() {
        let mut env = air_env();
        let obs = env.reset(3);
        let qn = obs[3..7].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert_relative_eq!(qn, 1.0, epsilon = 1e-12);
        let t = env.step(&Action::velocity([0.0; 3])).unwrap();
        assert!(!t.done);
        assert!(t.info.distance > env.config().distance_threshold);
        assert!(t.reward > 0.0 && t.reward.is_finite());
    }

    #[test]
    fn truncates_at_episode_length_then_rejects_steps() {
        let mut env = air_env();
        env.reset(0);
        let mut last = None;
        for _ in 0..20 {
            last = Some(env.step(&Action::velocity([0.0; 3])).unwrap());
        }
        let t = last.unwrap();
        assert!(t.done && t.info.truncated && !t.info.success);
        assert_eq!(t.step, 20);
        let err = env.step(&Action::velocity([0.0; 3])).unwrap_err();
        assert!(matches!(err, Error::Protocol(ProtocolError::EpisodeDone)));
    }

    #[test]
    fn arrival_terminates_with_success() {
        let mut env = air_env();
        env.reset(0);
        // move the marker onto the gripper
        let g = env.world().aam.gripper_point();
        env.cfg.target_position = (g - Vec3::new(0.0, 0.0, env.cfg.height_offset)).into();
        let t = env.step(&Action::velocity([0.0; 3])).unwrap();
        assert!(t.done && t.info.success && !t.info.truncated);
        assert_eq!(t.reward, 1000.0 / 0.01);
    }

    #[test]
    fn leaving_success_within_grace_is_penalized() {
        let mut env = air_env();
        env.cfg.terminate_on_success = false;
        env.reset(0);
        let g = env.world().aam.gripper_point();
        env.cfg.target_position = (g - Vec3::new(0.0, 0.0, env.cfg.height_offset)).into();
        let t = env.step(&Action::velocity([0.0; 3])).unwrap();
        assert!(t.info.success && !t.done);
        env.cfg.target_position[0] += 0.5;
        let t = env.step(&Action::velocity([0.0; 3])).unwrap();
        assert!(!t.info.success);
        assert!(t.reward < -SUCCESS_EXIT_PENALTY / env.cfg.distance_threshold + 3.0, "{}", t.reward);
    }

    #[test]
    fn actions_are_clamped_and_masked() {
        let mut env = air_env();
        env.reset(0);
        let a = Action { velocity: [5.0, -0.2, -9.0], extension: Some(([0.1, 0.2, 0.3], 1.0)) };
        let t = env.step(&a).unwrap();
        assert_eq!(t.action, Action::velocity([1.0, -0.2, -1.0]));
        assert!(t.info.clamped);
    }

    #[test]
    fn seeded_spawn_is_reproducible() {
        let mut env = air_env();
        let a = env.reset(11);
        let b = env.reset(11);
        let c = env.reset(12);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
