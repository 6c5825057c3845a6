//! Fixed smooth cutoff functions shared by the partition of unity, the
//! asymptotic observables and the propagation monitors.

/// Quintic smoothstep `6u^5 - 15u^4 + 10u^3`, clamped to `[0, 1]`.
#[inline]
pub fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * (u * (6.0 * u - 15.0) + 10.0)
    }
}

/// Inner partition function: 1 on `s <= 1`, 0 on `s >= 2`.
#[inline]
pub fn j_inner(s: f64) -> f64 {
    1.0 - smoothstep(s - 1.0)
}

/// Outer partition function, `sqrt(1 - j_inner^2)`.
#[inline]
pub fn j_outer(s: f64) -> f64 {
    let j0 = j_inner(s);
    (1.0 - j0 * j0).max(0.0).sqrt()
}

/// Asymptotic-observable profile: 0 for `s <= 1/2`, 1 for `s >= 1`, nondecreasing.
#[inline]
pub fn escape_profile(s: f64) -> f64 {
    smoothstep(2.0 * s - 1.0)
}

/// Mollified indicator of `[lo, hi]`: equal to 1 on the interval and ramping to
/// 0 over an edge of 10% of the interval width on each side. A degenerate
/// interval at zero (`lo == hi == 0`) is not meaningful; callers pass `hi > lo`.
#[inline]
pub fn soft_indicator(s: f64, lo: f64, hi: f64) -> f64 {
    let edge = 0.1 * (hi - lo);
    if s >= lo && s <= hi {
        1.0
    } else if s < lo {
        if lo <= 0.0 {
            return 0.0;
        }
        smoothstep((s - (lo - edge)) / edge)
    } else {
        1.0 - smoothstep((s - hi) / edge)
    }
}

/// Compactly supported bump with value 1 at the origin, vanishing for `|u| >= 1`.
#[inline]
pub fn bump(u: f64) -> f64 {
    let a = u * u;
    if a >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - a)).exp()
    }
}

/// Energy window `f` used for functional calculus: 1 on `[center - half_width,
/// center + half_width]`, smoothstep edges of width `edge`, compact support.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnergyWindow {
    pub center: f64,
    pub half_width: f64,
    pub edge: f64,
}

impl EnergyWindow {
    pub fn new(center: f64, half_width: f64, edge: f64) -> Self {
        Self { center, half_width, edge }
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let d = (lambda - self.center).abs() - self.half_width;
        if d <= 0.0 {
            1.0
        } else if self.edge <= 0.0 {
            0.0
        } else {
            1.0 - smoothstep(d / self.edge)
        }
    }

    /// Upper end of the support.
    pub fn support_max(&self) -> f64 {
        self.center + self.half_width + self.edge
    }

    pub fn support_min(&self) -> f64 {
        self.center - self.half_width - self.edge
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_is_a_unit_sum_of_squares() {
        for i in 0..400 {
            let s = i as f64 * 0.01;
            let (a, b) = (j_inner(s), j_outer(s));
            assert!((a * a + b * b - 1.0).abs() < 1e-15);
        }
        assert_eq!(j_inner(0.5), 1.0);
        assert_eq!(j_inner(2.5), 0.0);
    }

    #[test]
    fn escape_profile_is_monotone() {
        let mut prev = 0.0;
        for i in 0..300 {
            let v = escape_profile(i as f64 * 0.005);
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(escape_profile(0.5), 0.0);
        assert_eq!(escape_profile(1.0), 1.0);
    }

    #[test]
    fn soft_indicator_dominates_the_sharp_one() {
        for i in 0..500 {
            let s = i as f64 * 0.01;
            let sharp = if (1.0..=3.0).contains(&s) { 1.0 } else { 0.0 };
            assert!(soft_indicator(s, 1.0, 3.0) >= sharp);
        }
        assert_eq!(soft_indicator(3.3, 1.0, 3.0), 0.0);
        assert_eq!(soft_indicator(0.7, 1.0, 3.0), 0.0);
    }
}
