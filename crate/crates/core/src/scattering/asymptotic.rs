use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{FiberState, MomentumGrid};
use crate::model::radius;
use crate::smooth::escape_profile;

use super::propagate::Propagator;
use super::schedule::TimeSchedule;
use super::wave::CauchyLog;

/// `<psi, [p_delta(|x|/t)] psi>` with `p_delta(s) = p(s/delta)`; the vacuum is annihilated.
pub fn escape_expectation(grid: &MomentumGrid, psi: &FiberState, delta: f64, t: f64) -> Result<f64> {
    let pos = grid.to_position(&psi.field)?;
    Ok(pos.iter().zip(grid.positions()).map(|(v, x)| escape_profile(radius(x) / (t * delta)) * v.norm_sqr()).sum())
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaSeries {
    pub delta: f64,
    pub values: Vec<f64>,
    pub cauchy: CauchyLog,
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticReport {
    pub times: Vec<f64>,
    /// Ordered as given; usually decreasing `delta`.
    pub series: Vec<DeltaSeries>,
    /// Limit estimate for `delta -> 0`, present when every series converged
    /// and the two smallest `delta` agree within `delta_tolerance`.
    pub extrapolated: Option<f64>,
    pub converged: bool,
    pub delta_tolerance: f64,
}

/// Expectations of the asymptotic observable over `delta` and `t` schedules.
pub fn asymptotic_projection(
    prop: &Propagator,
    psi: &FiberState,
    deltas: &[f64],
    schedule: &TimeSchedule,
    delta_tolerance: f64,
) -> Result<AsymptoticReport> {
    if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::config("delta list must be nonempty and positive"));
    }
    let times = schedule.times();
    let states = prop.trajectory(psi, &times)?;
    let grid = prop.grid();
    let floor = 1e-10 * psi.norm_sqr().max(f64::MIN_POSITIVE);
    let mut series = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let values: Result<Vec<f64>> =
            states.iter().zip(&times).map(|(s, &t)| escape_expectation(grid, s, delta, t)).collect();
        let values = values?;
        let increments: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let cauchy = CauchyLog::assess(times[1..].to_vec(), increments, floor);
        series.push(DeltaSeries { delta, values, cauchy });
    }
    let converged = series.iter().all(|s| !s.cauchy.growing);
    let mut order: Vec<&DeltaSeries> = series.iter().collect();
    order.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let extrapolated = if converged {
        let last = |s: &DeltaSeries| *s.values.last().expect("nonempty schedule");
        match order.as_slice() {
            [only] => Some(last(only)),
            [a, b, ..] if (last(a) - last(b)).abs() <= delta_tolerance => Some(last(a)),
            _ => None,
        }
    } else {
        None
    };
    Ok(AsymptoticReport { times, series, extrapolated, converged, delta_tolerance })
}
