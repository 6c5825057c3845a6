use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::FiberState;

use super::propagate::Propagator;
use super::schedule::TimeSchedule;

/// Increments `||x_{n+1} - x_n||` of a limit along a schedule, with decay diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct CauchyLog {
    /// Later time of each increment.
    pub times: Vec<f64>,
    pub increments: Vec<f64>,
    /// Increments at or below this level count as converged to round-off.
    pub floor: f64,
    /// The last three increments grow strictly and exceed the floor.
    pub growing: bool,
    /// Ratios between the last three above-floor increments are all at most 1/2.
    pub geometric: bool,
    pub last_ratios: Vec<f64>,
}

impl CauchyLog {
    pub fn assess(times: Vec<f64>, increments: Vec<f64>, floor: f64) -> Self {
        let n = increments.len();
        let growing = n >= 3
            && increments[n - 1] > floor
            && increments[n - 1] > increments[n - 2]
            && increments[n - 2] > increments[n - 3];
        let above: Vec<f64> = increments.iter().copied().filter(|&v| v > floor).collect();
        let tail = &above[above.len().saturating_sub(3)..];
        let last_ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
        let settled = increments.last().is_some_and(|&v| v <= floor);
        let geometric = if last_ratios.is_empty() { settled } else { last_ratios.iter().all(|&r| r <= 0.5) };
        Self { times, increments, floor, growing, geometric, last_ratios }
    }

    pub fn last(&self) -> Option<f64> {
        self.increments.last().copied()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WaveOperatorResult {
    pub times: Vec<f64>,
    pub input_norm: f64,
    /// `max_T | ||W_T u|| - ||u|| |`.
    pub isometry_defect: f64,
    pub cauchy: CauchyLog,
    /// Last increment within tolerance and no growth.
    pub converged: bool,
    pub tolerance: f64,
    /// `||H W_T u - W_T H_0 u||` at the final time.
    pub intertwining: f64,
    /// `intertwining / ||H_0 u||`.
    pub intertwining_relative: f64,
    #[serde(skip)]
    pub image: FiberState,
}

/// `e^{-iTH_0} u` for a state in the free sector, computed directly.
pub(crate) fn free_evolve(free: &Propagator, u: &FiberState, t: f64) -> FiberState {
    let field = u.field.iter().zip(&free.op.diag).map(|(f, &d)| f * C64::from_polar(1.0, -t * d)).collect();
    FiberState { vacuum: u.vacuum * C64::from_polar(1.0, -t * free.op.head), field }
}

/// `W_T u = e^{iTH} e^{-iTH_0} u`.
pub(crate) fn wave_at(prop: &Propagator, free: &Propagator, u: &FiberState, t: f64) -> Result<FiberState> {
    let out = free_evolve(free, u, t);
    prop.monitor.check(prop.grid(), &out, t)?;
    Ok(prop.evolve_unchecked(&out, -t))
}

/// Finite-time wave operator images of a free one-particle state over the schedule.
pub fn wave_operator(
    prop: &Propagator,
    u: &FiberState,
    schedule: &TimeSchedule,
    tolerance: f64,
) -> Result<WaveOperatorResult> {
    if u.vacuum != C64::default() {
        return Err(Error::domain("wave operator input must have zero vacuum component"));
    }
    let free = prop.free()?;
    let times = schedule.times();
    let input_norm = u.norm();
    let images: Result<Vec<FiberState>> = {
        use rayon::prelude::*;
        times.par_iter().map(|&t| wave_at(prop, &free, u, t)).collect()
    };
    let images = images?;
    let isometry_defect = images.iter().map(|w| (w.norm() - input_norm).abs()).fold(0.0, f64::max);
    let increments: Vec<f64> = images.windows(2).map(|w| w[1].sub(&w[0]).norm()).collect();
    let floor = 1e-10 * input_norm.max(f64::MIN_POSITIVE);
    let cauchy = CauchyLog::assess(times[1..].to_vec(), increments, floor);
    let converged = !cauchy.growing && cauchy.last().is_none_or(|v| v <= tolerance);
    let t_last = schedule.last();
    let image = images.into_iter().last().expect("nonempty schedule");
    let h0u = free.op.apply(u)?;
    let w_h0u = wave_at(prop, &free, &h0u, t_last)?;
    let intertwining = prop.op.apply(&image)?.sub(&w_h0u).norm();
    let h0_norm = h0u.norm();
    let intertwining_relative = if h0_norm > 0.0 { intertwining / h0_norm } else { intertwining };
    Ok(WaveOperatorResult {
        times,
        input_norm,
        isometry_defect,
        cauchy,
        converged,
        tolerance,
        intertwining,
        intertwining_relative,
        image,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MomentumGrid;
    use crate::model::DispersionModel;

    #[test]
    fn cauchy_assessment() {
        let log = CauchyLog::assess(vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 0.4, 0.1, 1e-13], 1e-10);
        assert!(log.geometric && !log.growing);
        assert_eq!(log.last_ratios.len(), 2);
        let bad = CauchyLog::assess(vec![1.0, 2.0, 3.0], vec![0.1, 0.2, 0.3], 1e-10);
        assert!(bad.growing && !bad.geometric);
    }

    #[test]
    fn decoupled_wave_operator_is_the_identity() {
        let grid = MomentumGrid::new(1, 256, 3.0).unwrap();
        let prop = Propagator::assemble(&DispersionModel::polaron(1).decoupled(), &grid, &[0.0]).unwrap();
        let u = FiberState::from_field(grid.wavepacket(&[0.6], 0.1, &[0.0]));
        let s = TimeSchedule::new(1.0, 2.0, 5).unwrap();
        let r = wave_operator(&prop, &u, &s, 1e-8).unwrap();
        assert!(r.image.sub(&u).norm() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn vacuum_input_is_rejected() {
        let grid = MomentumGrid::new(1, 64, 3.0).unwrap();
        let prop = Propagator::assemble(&DispersionModel::polaron(1).decoupled(), &grid, &[0.0]).unwrap();
        let s = TimeSchedule::new(1.0, 2.0, 2).unwrap();
        let r = wave_operator(&prop, &FiberState::vacuum_only(grid.len()), &s, 1e-8);
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
