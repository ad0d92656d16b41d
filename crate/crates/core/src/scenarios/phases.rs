//! Four-phase splashdown signature: free fall, drag decay, entry spike and
//! settling on the floor.

use serde::Serialize;

use crate::math::Vec3;

/// Free fall tolerance on a_z, m/s².
pub const FREE_FALL_TOLERANCE: f64 = 0.5;
/// Window after release checked for free fall, seconds.
pub const FREE_FALL_WINDOW: f64 = 0.05;
/// Entry spike search radius around the surface crossing, seconds.
pub const SPIKE_WINDOW: f64 = 0.2;
pub const SPIKE_RATIO: f64 = 2.0;
/// Settled when every |a| stays below this, m/s².
pub const SETTLE_ACCEL: f64 = 0.5;
/// Wet fraction that marks the surface crossing.
pub const ENTRY_WET_FRACTION: f64 = 0.1;

/// One IMU sample with the medium state at that time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSample {
    pub t: f64,
    pub accel: Vec3,
    /// Hull bottom above the still-water surface.
    pub airborne: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase {
    pub passed: bool,
    pub detail: String,
}

impl Phase {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub free_fall: Phase,
    pub drag_decay: Phase,
    pub entry_spike: Phase,
    pub settle: Phase,
}

impl PhaseReport {
    pub fn all_passed(&self) -> bool {
        self.phases().iter().all(|(_, p)| p.passed)
    }

    pub fn phases(&self) -> [(&'static str, &Phase); 4] {
        [
            ("P1 free fall", &self.free_fall),
            ("P2 drag decay", &self.drag_decay),
            ("P3 entry spike", &self.entry_spike),
            ("P4 settle", &self.settle),
        ]
    }
}

/// Event times of a drop, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropEvents {
    pub release: f64,
    /// First time the wet fraction exceeded `ENTRY_WET_FRACTION`.
    pub entry: Option<f64>,
    pub floor: Option<f64>,
}

/// Least-squares slope of y over x.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Earliest time at or after `from` that starts a `window` in which every
/// sample has |a| ≤ `SETTLE_ACCEL`.
pub fn settle_time(samples: &[PhaseSample], from: f64, window: f64) -> Option<f64> {
    let start = samples.iter().position(|s| s.t >= from)?;
    let mut run_start: Option<f64> = None;
    for s in &samples[start..] {
        if s.accel.norm() <= SETTLE_ACCEL {
            let t0 = *run_start.get_or_insert(s.t);
            if s.t - t0 >= window - 1e-9 {
                return Some(t0);
            }
        } else {
            run_start = None;
        }
    }
    None
}

pub fn detect_phases(samples: &[PhaseSample], events: &DropEvents, gravity: f64, settle_window: f64) -> PhaseReport {
    let first: Vec<&PhaseSample> =
        samples.iter().filter(|s| s.t > events.release && s.t <= events.release + FREE_FALL_WINDOW + 1e-9).collect();
    let worst = first.iter().map(|s| (s.accel.z + gravity).abs()).fold(0.0, f64::max);
    let free_fall = Phase::new(
        !first.is_empty() && worst <= FREE_FALL_TOLERANCE,
        format!("{} samples, max |a_z + g| = {worst:.3}", first.len()),
    );

    let entry = events.entry.unwrap_or(f64::INFINITY);
    let air: Vec<&PhaseSample> = samples.iter().filter(|s| s.airborne && s.t < entry).collect();
    let drag_decay = if air.len() >= 3 {
        let t: Vec<f64> = air.iter().map(|s| s.t).collect();
        let a: Vec<f64> = air.iter().map(|s| s.accel.z.abs()).collect();
        let k = slope(&t, &a);
        Phase::new(k < 0.0, format!("slope of |a_z| over {} airborne samples = {k:.4} m/s³", air.len()))
    } else {
        Phase::new(false, format!("only {} airborne samples", air.len()))
    };

    let entry_spike = match (events.entry, air.last()) {
        (Some(te), Some(pre)) => {
            let before = pre.accel.z.abs();
            let spike = samples
                .iter()
                .filter(|s| (s.t - te).abs() <= SPIKE_WINDOW)
                .map(|s| s.accel.z.abs())
                .fold(0.0, f64::max);
            Phase::new(
                spike >= SPIKE_RATIO * before,
                format!("peak |a_z| {spike:.2} within {SPIKE_WINDOW} s of entry at {te:.3} s vs pre-entry {before:.2}"),
            )
        }
        (None, _) => Phase::new(false, "no surface crossing".into()),
        (_, None) => Phase::new(false, "no airborne sample before entry".into()),
    };

    let settle = match events.floor {
        Some(tf) => match settle_time(samples, tf, settle_window) {
            Some(ts) => Phase::new(true, format!("floor contact at {tf:.3} s, |a| ≤ {SETTLE_ACCEL} from {ts:.3} s for {settle_window} s")),
            None => Phase::new(false, format!("floor contact at {tf:.3} s but never settled for {settle_window} s")),
        },
        None => Phase::new(false, "no floor contact".into()),
    };

    PhaseReport { free_fall, drag_decay, entry_spike, settle }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Synthetic drop: free fall with decaying drag, a spike at entry, then rest.
    fn synthetic() -> (Vec<PhaseSample>, DropEvents) {
        let mut s = Vec::new();
        for k in 1..=150 {
            let t = k as f64 * 0.02;
            let (az, airborne) = if t < 0.55 {
                (-9.81 + 1.5 * t, true)
            } else if t < 0.7 {
                (30.0, false)
            } else if t < 1.2 {
                (0.3 * (1.2 - t), false)
            } else {
                (0.0, false)
            };
            s.push(PhaseSample { t, accel: Vec3::new(0.0, 0.0, az), airborne });
        }
        (s, DropEvents { release: 0.0, entry: Some(0.56), floor: Some(1.0) })
    }

    #[test]
    fn finds_all_four_phases() {
        let (s, e) = synthetic();
        let r = detect_phases(&s, &e, 9.81, 0.3);
        assert!(r.all_passed(), "{r:?}");
    }

    #[test]
    fn flat_descent_fails_drag_decay() {
        let (mut s, e) = synthetic();
        s.iter_mut().filter(|x| x.airborne).for_each(|x| x.accel.z = -9.81);
        let r = detect_phases(&s, &e, 9.81, 0.3);
        assert!(!r.drag_decay.passed && r.free_fall.passed);
    }

    #[test]
    fn weak_entry_fails_spike() {
        let (mut s, e) = synthetic();
        s.iter_mut().filter(|x| x.accel.z == 30.0).for_each(|x| x.accel.z = 12.0);
        assert!(!detect_phases(&s, &e, 9.81, 0.3).entry_spike.passed);
    }

    #[test]
    fn missing_events_fail_explicitly() {
        let (s, _) = synthetic();
        let r = detect_phases(&s, &DropEvents { release: 0.0, entry: None, floor: None }, 9.81, 0.3);
        assert!(!r.entry_spike.passed && !r.settle.passed);
        assert!(r.settle.detail.contains("no floor"));
    }

    #[test]
    fn settle_needs_a_full_quiet_window() {
        let (s, _) = synthetic();
        assert_eq!(settle_time(&s, 1.0, 0.3).map(|t| (t * 100.0).round()), Some(100.0));
        assert_eq!(settle_time(&s[..60], 1.0, 0.3), None);
    }
}
