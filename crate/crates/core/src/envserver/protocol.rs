//! Line-delimited JSON messages shared by the stream and WebSocket transports.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::envserver::{Action, Env};
use crate::error::ProtocolError;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_DECIMATION: usize = 10;
pub const DEFAULT_VIEW_HZ: f64 = 20.0;
/// Largest accepted request line, bytes.
pub const MAX_MESSAGE_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    Start,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    /// Capability exchange.
    Hello,
    Reset {
        #[serde(default)]
        seed: Option<u64>,
    },
    Step {
        action: Action,
    },
    SubscribeView {
        #[serde(default = "default_decimation")]
        particle_decimation: usize,
        #[serde(default = "default_hz")]
        hz: f64,
    },
    Unsubscribe,
    Record {
        mode: RecordMode,
        #[serde(default)]
        path: Option<String>,
    },
}

fn default_decimation() -> usize {
    DEFAULT_DECIMATION
}

fn default_hz() -> f64 {
    DEFAULT_VIEW_HZ
}

impl Request {
    /// Commands that change the simulation need the controller role.
    pub fn needs_control(&self) -> bool {
        matches!(self, Request::Reset { .. } | Request::Step { .. } | Request::Record { .. })
    }
}

pub fn parse_request(line: &str) -> Result<Request, ProtocolError> {
    if line.len() > MAX_MESSAGE_BYTES {
        return Err(ProtocolError::Malformed(format!("message longer than {MAX_MESSAGE_BYTES} bytes")));
    }
    let value: Value = serde_json::from_str(line).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let cmd = value
        .get("cmd")
        .and_then(Value::as_str)
        .ok_or_else(|| ProtocolError::Malformed("missing string field `cmd`".into()))?
        .to_string();
    const KNOWN: &[&str] = &["hello", "reset", "step", "subscribe_view", "unsubscribe", "record"];
    if !KNOWN.contains(&cmd.as_str()) {
        return Err(ProtocolError::UnknownCommand(cmd));
    }
    let req: Request = serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    if let Request::SubscribeView { particle_decimation, hz } = &req {
        if *particle_decimation == 0 || !(hz.is_finite() && *hz > 0.0) {
            return Err(ProtocolError::Malformed("particle_decimation must be >= 1 and hz > 0".into()));
        }
    }
    if let Request::Record { mode: RecordMode::Start, path: None } = &req {
        return Err(ProtocolError::Malformed("record start needs a path".into()));
    }
    Ok(req)
}

pub fn error_message(e: &dyn std::fmt::Display) -> String {
    json!({ "error": e.to_string() }).to_string()
}

pub fn hello_message(env: &Env) -> String {
    json!({
        "protocol": PROTOCOL_VERSION,
        "scenario": env.scenario(),
        "dt": env.dt(),
        "action_limit": env.config().action_limit,
        "observation_size": crate::envserver::OBSERVATION_SIZE,
        "mask_extensions": env.config().mask_extensions,
    })
    .to_string()
}

fn pose(p: &crate::math::Vec3, q: &crate::math::Quat) -> [f64; 7] {
    [p.x, p.y, p.z, q.w, q.i, q.j, q.k]
}

/// Snapshot for viewers: body poses and every `decimation`-th fluid particle.
pub fn view_frame(env: &Env, decimation: usize) -> String {
    let w = env.world();
    let aam = &w.aam;
    let mut bodies = vec![json!({ "id": "aam", "pose": pose(&aam.vehicle_origin(), &aam.body.orientation), "q": aam.arm.q })];
    if let Some(c) = &w.crab {
        bodies.push(json!({ "id": "crab", "pose": pose(&c.body.position, &c.body.orientation) }));
    }
    let (tp, tq) = env.target();
    bodies.push(json!({ "id": "target", "pose": pose(&tp, &tq) }));
    let particles: Vec<f32> = w
        .fluid
        .as_ref()
        .map(|f| f.fluid_positions(decimation).iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect())
        .unwrap_or_default();
    json!({
        "t": w.time(),
        "step": env.steps(),
        "bodies": bodies,
        "particles": particles,
        "distance": env.distance(),
        "wet": aam.medium.fraction,
        "active": env.active(),
    })
    .to_string()
}
