use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric evaluation times `t_n = t0 * ratio^n`, `n = 0..count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSchedule {
    pub t0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl TimeSchedule {
    pub fn new(t0: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(t0.is_finite() && t0 >= 1.0) {
            return Err(Error::config(format!("schedule.t0 must be at least 1, got {t0}")));
        }
        if !(ratio.is_finite() && ratio > 1.0) {
            return Err(Error::config(format!("schedule.sigma must exceed 1, got {ratio}")));
        }
        if count == 0 {
            return Err(Error::config("schedule.count must be positive"));
        }
        Ok(Self { t0, ratio, count })
    }

    /// The longest schedule from `t0` with every time at most `t_max`.
    pub fn up_to(t0: f64, ratio: f64, t_max: f64) -> Result<Self> {
        let probe = Self::new(t0, ratio, 1)?;
        if t_max < t0 {
            return Err(Error::config(format!("final time {t_max} precedes t0 = {t0}")));
        }
        let count = ((t_max / t0).ln() / ratio.ln() + 1e-9).floor() as usize + 1;
        Ok(Self { count, ..probe })
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|n| self.t0 * self.ratio.powi(n as i32)).collect()
    }

    pub fn last(&self) -> f64 {
        self.t0 * self.ratio.powi(self.count as i32 - 1)
    }

    /// `Delta log t` between consecutive times.
    pub fn log_step(&self) -> f64 {
        self.ratio.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times_increase_geometrically() {
        let s = TimeSchedule::new(1.0, 1.25, 5).unwrap();
        let t = s.times();
        assert_eq!(t.len(), 5);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!((t[4] - 1.25f64.powi(4)).abs() < 1e-15);
        assert_eq!(s.last(), t[4]);
    }

    #[test]
    fn invalid_schedules_are_rejected() {
        assert!(TimeSchedule::new(0.5, 1.25, 3).is_err());
        assert!(TimeSchedule::new(1.0, 1.0, 3).is_err());
        assert!(TimeSchedule::new(1.0, 2.0, 0).is_err());
    }

    #[test]
    fn up_to_stays_below_the_cap() {
        let s = TimeSchedule::up_to(1.0, 2.0, 256.0).unwrap();
        assert_eq!(s.last(), 256.0);
        let s = TimeSchedule::up_to(1.0, 1.25, 400.0).unwrap();
        assert!(s.last() <= 400.0 && s.last() * 1.25 > 400.0);
    }
}
