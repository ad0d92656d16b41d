//! Per-step run log and its CSV form.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::math::{Quat, Vec3};
use crate::world::{StepInfo, World};

pub const RUNLOG_VERSION: u32 = 1;
pub const RUNLOG_HEADER: &str = "step,t,ref_x,ref_y,ref_z,x,y,z,qw,qx,qy,qz,vx,vy,vz,ax,ay,az,wet,w0,w1,w2,w3,q0,q1,q2";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub t: f64,
    pub reference: Vec3,
    /// Vehicle frame origin, world frame.
    pub position: Vec3,
    pub orientation: Quat,
    /// CoG velocity, world frame.
    pub velocity: Vec3,
    /// CoG kinematic acceleration over the step, world frame.
    pub accel: Vec3,
    pub wet: f64,
    pub rotor_speeds: [f64; 4],
    pub q: [f64; 3],
}

impl LogRow {
    pub fn capture(world: &World, info: &StepInfo, reference: Vec3) -> Self {
        let aam = &world.aam;
        Self {
            step: info.step,
            t: info.t,
            reference,
            position: aam.vehicle_origin(),
            orientation: aam.body.orientation,
            velocity: aam.body.linear_velocity,
            accel: info.accel,
            wet: info.wet_fraction,
            rotor_speeds: aam.rotor_speeds,
            q: aam.arm.q,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
}

impl RunLog {
    pub fn push(&mut self, row: LogRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# seals-runlog v{RUNLOG_VERSION}\n{RUNLOG_HEADER}\n");
        for r in &self.rows {
            let q = r.orientation;
            let _ = write!(s, "{},{}", r.step, r.t);
            for v in [r.reference, r.position] {
                let _ = write!(s, ",{},{},{}", v.x, v.y, v.z);
            }
            let _ = write!(s, ",{},{},{},{}", q.w, q.i, q.j, q.k);
            for v in [r.velocity, r.accel] {
                let _ = write!(s, ",{},{},{}", v.x, v.y, v.z);
            }
            let _ = write!(s, ",{}", r.wet);
            for w in r.rotor_speeds.iter().chain(&r.q) {
                let _ = write!(s, ",{w}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    /// Root-mean-square distance between position and reference.
    pub fn rms_error(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.rows.iter().map(|r| (r.position - r.reference).norm_squared()).sum();
        (sum / self.rows.len() as f64).sqrt()
    }

    /// Largest position change between consecutive rows.
    pub fn max_step_jump(&self) -> f64 {
        self.rows.windows(2).map(|w| (w[1].position - w[0].position).norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: u64, x: f64) -> LogRow {
        LogRow {
            step,
            t: step as f64 * 0.004,
            reference: Vec3::zeros(),
            position: Vec3::new(x, 0.0, 0.0),
            orientation: Quat::identity(),
            velocity: Vec3::zeros(),
            accel: Vec3::new(0.0, 0.0, -9.81),
            wet: 0.0,
            rotor_speeds: [0.0; 4],
            q: [0.0, 1.5, -2.4],
        }
    }

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let log = RunLog { rows: (1..=3).map(|k| row(k, 0.1 * k as f64)).collect() };
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "# seals-runlog v1");
        assert_eq!(lines[1], RUNLOG_HEADER);
        let width = RUNLOG_HEADER.split(',').count();
        assert!(lines[2..].iter().all(|l| l.split(',').count() == width));
        assert!(lines[2].starts_with("1,0.004,"));
    }

    #[test]
    fn error_metrics() {
        let log = RunLog { rows: vec![row(1, 0.0), row(2, 0.3), row(3, 0.4)] };
        assert!((log.rms_error() - (0.25f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((log.max_step_jump() - 0.3).abs() < 1e-12);
        assert_eq!(RunLog::default().rms_error(), 0.0);
    }
}
