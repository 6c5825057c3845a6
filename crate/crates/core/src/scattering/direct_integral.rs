use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{FiberState, MomentumGrid};
use crate::model::DispersionModel;
use crate::quad::pairwise_sum;

use super::propagate::Propagator;

/// A state of the full system in the fibered picture: one fiber state per
/// sampled total momentum, with a common quadrature weight.
#[derive(Clone, Debug, Serialize)]
pub struct DirectIntegralState {
    pub momenta: Vec<Vec<f64>>,
    pub weight: f64,
    pub fibers: Vec<FiberState>,
}

impl DirectIntegralState {
    pub fn new(momenta: Vec<Vec<f64>>, weight: f64, fibers: Vec<FiberState>) -> Result<Self> {
        if momenta.len() != fibers.len() {
            return Err(Error::Dimension { expected: momenta.len(), got: fibers.len() });
        }
        Ok(Self { momenta, weight, fibers })
    }

    /// `sum_P w_P ||psi_P||^2`, summed pairwise in input order.
    pub fn norm_sqr(&self) -> f64 {
        let parts: Vec<f64> = self.fibers.iter().map(|f| self.weight * f.norm_sqr()).collect();
        pairwise_sum(&parts)
    }
}

/// `e^{-itH}` fiber by fiber.
pub fn direct_integral_evolve(
    model: &DispersionModel,
    grid: &MomentumGrid,
    state: &DirectIntegralState,
    t: f64,
) -> Result<DirectIntegralState> {
    let evolved: Vec<Result<FiberState>> = state
        .momenta
        .par_iter()
        .zip(state.fibers.par_iter())
        .map(|(p, psi)| Propagator::assemble(model, grid, p)?.evolve(psi, t))
        .collect();
    let mut fibers = Vec::with_capacity(evolved.len());
    let mut failures = Vec::new();
    for (i, r) in evolved.into_iter().enumerate() {
        match r {
            Ok(f) => fibers.push(f),
            Err(e) => failures.push(format!("P[{i}]: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Numerical(format!("{} fibers failed: {}", failures.len(), failures.join("; "))));
    }
    Ok(DirectIntegralState { momenta: state.momenta.clone(), weight: state.weight, fibers })
}
