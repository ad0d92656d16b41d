//! Demonstration files: one JSON header line, then one transition per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::envserver::{Env, EnvTransition, Observation};
use crate::error::{DemoError, Result};

pub const DEMO_FORMAT: &str = "seals-demo";
pub const DEMO_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoHeader {
    pub format: String,
    pub version: u64,
    pub scenario: String,
    /// Reset seed of the recorded episode.
    pub seed: u64,
    pub dt: f64,
}

impl DemoHeader {
    pub fn new(scenario: &str, seed: u64, dt: f64) -> Self {
        Self { format: DEMO_FORMAT.into(), version: DEMO_VERSION, scenario: scenario.into(), seed, dt }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demo {
    pub header: DemoHeader,
    pub transitions: Vec<EnvTransition>,
}

/// Streams transitions to a writer as they happen.
#[derive(Debug)]
pub struct DemoWriter<W: Write> {
    out: W,
    count: usize,
}

impl<W: Write> DemoWriter<W> {
    pub fn new(mut out: W, header: &DemoHeader) -> Result<Self, DemoError> {
        serde_json::to_writer(&mut out, header).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        Ok(Self { out, count: 0 })
    }

    pub fn append(&mut self, t: &EnvTransition) -> Result<(), DemoError> {
        serde_json::to_writer(&mut self.out, t).map_err(std::io::Error::from)?;
        self.out.write_all(b"\n")?;
        self.count += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn finish(mut self) -> Result<W, DemoError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_demo<W: Write>(out: W, demo: &Demo) -> Result<(), DemoError> {
    let mut w = DemoWriter::new(out, &demo.header)?;
    for t in &demo.transitions {
        w.append(t)?;
    }
    w.finish()?;
    Ok(())
}

pub fn read_demo<R: BufRead>(input: R) -> Result<Demo, DemoError> {
    let mut lines = input.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (_, first) = lines.next().ok_or(DemoError::MissingHeader)?;
    let first = first?;
    let raw: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| DemoError::Parse { line: 1, message: e.to_string() })?;
    let format = raw.get("format").and_then(|v| v.as_str()).unwrap_or_default().to_string();
    let version = raw.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
    if format != DEMO_FORMAT || version != DEMO_VERSION {
        return Err(DemoError::Version { format, version });
    }
    let header: DemoHeader =
        serde_json::from_value(raw).map_err(|e| DemoError::Parse { line: 1, message: e.to_string() })?;
    let mut transitions = Vec::new();
    for (k, line) in lines {
        let line = line?;
        let t = serde_json::from_str(&line).map_err(|e| DemoError::Parse { line: k + 1, message: e.to_string() })?;
        transitions.push(t);
    }
    Ok(Demo { header, transitions })
}

/// Reset `env` with the recorded seed and re-apply every recorded action.
/// Returns the final observation.
pub fn replay(env: &mut Env, demo: &Demo) -> Result<Observation> {
    let mut obs = env.reset(demo.header.seed);
    for t in &demo.transitions {
        obs = env.step(&t.action)?.obs;
    }
    Ok(obs)
}
