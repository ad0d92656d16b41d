/// Fixed-step simulation clock. Time is always derived from the step index so
/// long runs never accumulate floating-point drift.
#[derive(Debug, Clone, PartialEq)]
pub struct SimClock {
    dt: f64,
    substeps: u32,
    step: u64,
}

impl SimClock {
    pub fn new(dt: f64, substeps: u32) -> Option<Self> {
        (dt > 0.0 && dt.is_finite() && substeps >= 1).then_some(Self { dt, substeps, step: 0 })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn substeps(&self) -> u32 {
        self.substeps
    }

    pub fn substep_dt(&self) -> f64 {
        self.dt / self.substeps as f64
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn advance(&mut self) {
        self.step += 1;
    }

    pub fn reset(&mut self) {
        self.step = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_is_index_times_dt() {
        let mut c = SimClock::new(0.004, 2).unwrap();
        for _ in 0..100_000 {
            c.advance();
        }
        assert_eq!(c.time(), 100_000.0 * 0.004);
        assert_eq!(c.substep_dt(), 0.002);
    }

    #[test]
    fn rejects_nonpositive_dt() {
        assert!(SimClock::new(0.0, 1).is_none());
        assert!(SimClock::new(0.004, 0).is_none());
    }
}
