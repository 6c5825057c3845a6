use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::Result;
use crate::grid::{FiberState, MomentumGrid};
use crate::model::radius;
use crate::smooth::escape_profile;

use super::propagate::Propagator;
use super::schedule::TimeSchedule;
use super::wave::{free_evolve, wave_at};

/// Residuals of the two factorization identities at each time.
#[derive(Clone, Debug, Serialize)]
pub struct GeometricResiduals {
    pub delta: f64,
    pub times: Vec<f64>,
    /// `||Q_T W_{2T} Q0_T u - W_{2T} Q0_T^2 u||`
    pub outgoing: Vec<f64>,
    /// `||Q_T^2 psi - W_{2T} Q0_T Q~_T psi||`
    pub incoming: Vec<f64>,
    /// Both residuals are smaller at the last time than at the first.
    pub decreasing: bool,
}

/// `[p_delta(|x|/t)]`: the vacuum is annihilated.
fn cutoff(grid: &MomentumGrid, psi: &FiberState, delta: f64, t: f64) -> Result<FiberState> {
    let field = grid.multiply_in_position(&psi.field, |x| escape_profile(radius(x) / (t * delta)))?;
    Ok(FiberState { vacuum: C64::default(), field })
}

/// Finite-`(delta, T)` versions of `P0(H) W = W P0(H_0)` and of the factorization
/// through `P_delta(H, H_0)`, with `Q_T = e^{iTH}[p_delta]e^{-iTH}`,
/// `Q0_T` its free analogue and `Q~_T = e^{iTH_0}[p_delta]e^{-iTH}`.
pub fn geometric_identity_check(
    prop: &Propagator,
    psi: &FiberState,
    delta: f64,
    schedule: &TimeSchedule,
) -> Result<GeometricResiduals> {
    let free = prop.free()?;
    let grid = prop.grid();
    let u = FiberState { vacuum: C64::default(), field: psi.field.clone() };
    let times = schedule.times();
    let q = |x: &FiberState, t: f64| -> Result<FiberState> {
        let y = cutoff(grid, &prop.evolve(x, t)?, delta, t)?;
        Ok(prop.evolve_unchecked(&y, -t))
    };
    let q0 = |x: &FiberState, t: f64| -> Result<FiberState> {
        let moved = free_evolve(&free, x, t);
        prop.monitor.check(grid, &moved, t)?;
        Ok(free_evolve(&free, &cutoff(grid, &moved, delta, t)?, -t))
    };
    let q_mixed = |x: &FiberState, t: f64| -> Result<FiberState> {
        let y = cutoff(grid, &prop.evolve(x, t)?, delta, t)?;
        Ok(free_evolve(&free, &y, -t))
    };
    let mut outgoing = Vec::with_capacity(times.len());
    let mut incoming = Vec::with_capacity(times.len());
    for &t in &times {
        let q0u = q0(&u, t)?;
        let lhs = q(&wave_at(prop, &free, &q0u, 2.0 * t)?, t)?;
        let rhs = wave_at(prop, &free, &q0(&q0u, t)?, 2.0 * t)?;
        outgoing.push(lhs.sub(&rhs).norm());
        let lhs = q(&q(psi, t)?, t)?;
        let rhs = wave_at(prop, &free, &q0(&q_mixed(psi, t)?, t)?, 2.0 * t)?;
        incoming.push(lhs.sub(&rhs).norm());
    }
    let decreasing = match (outgoing.first(), outgoing.last(), incoming.first(), incoming.last()) {
        (Some(a), Some(b), Some(c), Some(d)) => b <= a && d <= c,
        _ => false,
    };
    Ok(GeometricResiduals { delta, times, outgoing, incoming, decreasing })
}
