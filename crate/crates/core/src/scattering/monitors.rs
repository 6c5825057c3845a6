use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FiberState, MomentumGrid};
use crate::model::{radius, DispersionModel};
use crate::smooth::soft_indicator;

use super::propagate::Propagator;
use super::schedule::TimeSchedule;

/// Lanczos steps for the absolute-value quadrature.
const LANCZOS_STEPS: usize = 120;

/// Observables whose time integrals along the evolution are bounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PropagationObservable {
    /// `||[1_{[R, R']}(|x|/t)] psi_t||^2`.
    LargeVelocity { r: f64, r_prime: f64 },
    /// `<X psi_t, [1_{[c0, c1]}(|x|/t)] X psi_t>` with `X = x/t - v_P(D)`.
    PhaseSpace { c0: f64, c1: f64 },
    /// `<psi_t, [|J(x/t) X_i + h.c.|] psi_t>`, `J` supported in `c0 < |x|/t < c1`.
    ImprovedPhaseSpace { c0: f64, c1: f64, axis: usize },
    /// `||diag(1, 1_{[0, eps]}(|x|/t)) psi_t||^2`; the vacuum block can be dropped.
    MinimalVelocity { epsilon: f64, include_vacuum: bool },
}

impl PropagationObservable {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LargeVelocity { .. } => "large_velocity",
            Self::PhaseSpace { .. } => "phase_space",
            Self::ImprovedPhaseSpace { .. } => "improved_phase_space",
            Self::MinimalVelocity { .. } => "minimal_velocity",
        }
    }

    fn validate(&self, nu: usize) -> Result<()> {
        let ok = match *self {
            Self::LargeVelocity { r, r_prime } => r > 0.0 && r_prime > r,
            Self::PhaseSpace { c0, c1 } => c0 > 0.0 && c1 > c0,
            Self::ImprovedPhaseSpace { c0, c1, axis } => c0 > 0.0 && c1 > c0 && axis < nu,
            Self::MinimalVelocity { epsilon, .. } => epsilon > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid observable parameters: {self:?}")))
        }
    }
}

/// Cumulative integral `I(T_n) = sum_{t_m <= T_n} term(t_m) Delta log t`.
#[derive(Clone, Debug, Serialize)]
pub struct MonitorCurve {
    pub observable: PropagationObservable,
    pub times: Vec<f64>,
    pub terms: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Least-squares slope of `I` against `log T` over the last decade of times,
    /// divided by `||psi||^2`: 0 for a bounded integral, 1 for a non-decaying unit term.
    pub tail_slope: f64,
    /// Least-squares slope of `log I` against `log T` on the same range.
    pub loglog_slope: f64,
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Tail slopes over times in `[T_last / 10, T_last]`.
fn tail_slopes(times: &[f64], cumulative: &[f64], norm_sqr: f64) -> (f64, f64) {
    let last = *times.last().unwrap_or(&1.0);
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= last / 10.0 * (1.0 - 1e-12)).collect();
    let lx: Vec<f64> = idx.iter().map(|&i| times[i].ln()).collect();
    let iy: Vec<f64> = idx.iter().map(|&i| cumulative[i] / norm_sqr.max(f64::MIN_POSITIVE)).collect();
    let semi = least_squares_slope(&lx, &iy);
    let positive = idx.iter().all(|&i| cumulative[i] > 0.0);
    let loglog = if positive {
        let ly: Vec<f64> = idx.iter().map(|&i| cumulative[i].ln()).collect();
        least_squares_slope(&lx, &ly)
    } else {
        0.0
    };
    (semi, loglog)
}

/// `X_i psi = (x_i/t) psi - v_{P,i}(k) psi` on the field.
fn relative_velocity_component(
    grid: &MomentumGrid,
    velocity: &[f64],
    field: &[C64],
    t: f64,
    axis: usize,
) -> Result<Vec<C64>> {
    let nu = grid.nu();
    let mut out = grid.multiply_in_position(field, |x| x[axis] / t)?;
    for (j, o) in out.iter_mut().enumerate() {
        *o -= velocity[j * nu + axis] * field[j];
    }
    Ok(out)
}

/// `sum_x g(|x|/t) |f(x)|^2` in the position picture.
fn weighted_position_mass(grid: &MomentumGrid, field: &[C64], t: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let pos = grid.to_position(field)?;
    Ok(pos.iter().zip(grid.positions()).map(|(v, x)| g(radius(x) / t) * v.norm_sqr()).sum())
}

/// `<f, |B| f>` for Hermitian `B` by Lanczos quadrature with full reorthogonalization.
fn abs_expectation(apply: impl Fn(&[C64]) -> Result<Vec<C64>>, f: &[C64]) -> Result<f64> {
    let norm2: f64 = f.iter().map(|c| c.norm_sqr()).sum();
    if norm2 == 0.0 {
        return Ok(0.0);
    }
    let inv = 1.0 / norm2.sqrt();
    let mut basis: Vec<Vec<C64>> = vec![f.iter().map(|c| c * inv).collect()];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let steps = LANCZOS_STEPS.min(f.len());
    for k in 0..steps {
        let mut w = apply(&basis[k])?;
        let a: f64 = basis[k].iter().zip(&w).map(|(q, v)| (q.conj() * v).re).sum();
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c: C64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if k + 1 == steps || b <= 1e-12 * alpha.iter().fold(1e-300f64, |m, v| m.max(v.abs())) {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|c| c / b).collect());
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let q: f64 = (0..m).map(|j| eig.eigenvectors[(0, j)].powi(2) * eig.eigenvalues[j].abs()).sum();
    Ok(norm2 * q)
}

fn velocity_table(model: &DispersionModel, grid: &MomentumGrid, p: &[f64]) -> Vec<f64> {
    let nu = grid.nu();
    let mut out = vec![0.0; grid.len() * nu];
    for (j, k) in grid.momenta().enumerate() {
        model.velocity_into(p, k, &mut out[j * nu..(j + 1) * nu]);
    }
    out
}

fn term(obs: &PropagationObservable, grid: &MomentumGrid, velocity: &[f64], psi: &FiberState, t: f64) -> Result<f64> {
    match *obs {
        PropagationObservable::LargeVelocity { r, r_prime } => {
            weighted_position_mass(grid, &psi.field, t, |s| soft_indicator(s, r, r_prime).powi(2))
        }
        PropagationObservable::PhaseSpace { c0, c1 } => {
            let mut acc = 0.0;
            for axis in 0..grid.nu() {
                let xi = relative_velocity_component(grid, velocity, &psi.field, t, axis)?;
                acc += weighted_position_mass(grid, &xi, t, |s| soft_indicator(s, c0, c1))?;
            }
            Ok(acc)
        }
        PropagationObservable::ImprovedPhaseSpace { c0, c1, axis } => {
            let e = 0.1 * (c1 - c0);
            let cut = |x: &[f64]| soft_indicator(radius(x) / t, c0 + e, c1 - e);
            let apply = |f: &[C64]| -> Result<Vec<C64>> {
                let jf = grid.multiply_in_position(f, cut)?;
                let a = relative_velocity_component(grid, velocity, &jf, t, axis)?;
                let xf = relative_velocity_component(grid, velocity, f, t, axis)?;
                let b = grid.multiply_in_position(&xf, cut)?;
                Ok(a.iter().zip(&b).map(|(u, v)| u + v).collect())
            };
            abs_expectation(apply, &psi.field)
        }
        PropagationObservable::MinimalVelocity { epsilon, include_vacuum } => {
            let field = weighted_position_mass(grid, &psi.field, t, |s| soft_indicator(s, 0.0, epsilon).powi(2))?;
            Ok(field + if include_vacuum { psi.vacuum.norm_sqr() } else { 0.0 })
        }
    }
}

/// Integrates an observable along `e^{-itH(P)} psi` over the schedule.
pub fn propagation_monitor(
    prop: &Propagator,
    model: &DispersionModel,
    psi: &FiberState,
    observable: PropagationObservable,
    schedule: &TimeSchedule,
) -> Result<MonitorCurve> {
    let grid = prop.grid();
    observable.validate(grid.nu())?;
    let velocity = velocity_table(model, grid, &prop.op.p);
    let times = schedule.times();
    let states = prop.trajectory(psi, &times)?;
    let terms: Result<Vec<f64>> = {
        use rayon::prelude::*;
        states.par_iter().zip(times.par_iter()).map(|(s, &t)| term(&observable, grid, &velocity, s, t)).collect()
    };
    let terms = terms?;
    let dlog = schedule.log_step();
    let mut cumulative = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for v in &terms {
        acc += v * dlog;
        cumulative.push(acc);
    }
    let (tail_slope, loglog_slope) = tail_slopes(&times, &cumulative, psi.norm_sqr());
    Ok(MonitorCurve { observable, times, terms, cumulative, tail_slope, loglog_slope })
}

/// `(R, R')` for the large-velocity observable: beyond the fastest group velocity
/// in the energy range of `psi` plus eight times its initial position spread.
pub fn large_velocity_radius(prop: &Propagator, model: &DispersionModel, psi: &FiberState) -> Result<(f64, f64)> {
    let grid = prop.grid();
    let coef = prop.decomp.coefficients(psi);
    let ev = prop.decomp.eigenvalues();
    let support: Vec<f64> = coef.iter().zip(ev).filter(|(c, _)| c.norm_sqr() > 1e-16).map(|(_, &l)| l).collect();
    let (lo, hi) = support.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(l), b.max(l)));
    let mut vmax: f64 = 0.0;
    for (j, k) in grid.momenta().enumerate() {
        let d = prop.op.diag[j];
        if d >= lo && d <= hi {
            vmax = vmax.max(radius(&model.velocity(&prop.op.p, k)));
        }
    }
    let field_norm = psi.field_norm_sqr();
    let spread = if field_norm > 0.0 {
        (weighted_position_mass(grid, &psi.field, 1.0, |s| s * s)? / field_norm).sqrt()
    } else {
        0.0
    };
    let r = 1.2 * vmax + 8.0 * spread + 1.0;
    Ok((r, 2.0 * r))
}
