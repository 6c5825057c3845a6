use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fiber::{assemble_fiber, ArrowheadFiberOperator};
use crate::grid::{FiberState, MomentumGrid};
use crate::model::DispersionModel;
use crate::spectral::EigenDecomposition;

/// `e^{-itH} psi` by the spectral theorem.
pub fn propagate(decomp: &EigenDecomposition, psi: &FiberState, t: f64) -> FiberState {
    decomp.apply_function(psi, |l| C64::from_polar(1.0, -t * l))
}

/// Aborts evolutions whose field mass reaches the outer quarter of the periodic box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryMonitor {
    /// Mass is counted where `|x|_inf > fraction * L`.
    pub fraction: f64,
    /// Largest tolerated fraction of the norm there.
    pub limit: f64,
}

impl Default for BoundaryMonitor {
    fn default() -> Self {
        Self { fraction: 0.25, limit: 1e-3 }
    }
}

impl BoundaryMonitor {
    /// Relative outer mass of `psi`, or a breach error at time `t`.
    pub fn check(&self, grid: &MomentumGrid, psi: &FiberState, t: f64) -> Result<f64> {
        let total = psi.norm_sqr();
        if total == 0.0 {
            return Ok(0.0);
        }
        let mass = grid.outer_mass(&psi.field, self.fraction * grid.box_len())? / total;
        if mass > self.limit {
            return Err(Error::BoundaryBreach { time: t, mass });
        }
        Ok(mass)
    }
}

/// A fiber operator with its eigendecomposition, for repeated exact evolution.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub op: ArrowheadFiberOperator,
    pub decomp: EigenDecomposition,
    pub monitor: BoundaryMonitor,
}

impl Propagator {
    pub fn new(op: ArrowheadFiberOperator) -> Result<Self> {
        let decomp = EigenDecomposition::secular(&op)?;
        Ok(Self { op, decomp, monitor: BoundaryMonitor::default() })
    }

    pub fn assemble(model: &DispersionModel, grid: &MomentumGrid, p: &[f64]) -> Result<Self> {
        Self::new(assemble_fiber(model, grid, p)?)
    }

    /// The same fiber without coupling.
    pub fn free(&self) -> Result<Self> {
        Ok(Self { monitor: self.monitor, ..Self::new(self.op.free())? })
    }

    pub fn grid(&self) -> &MomentumGrid {
        self.op.grid()
    }

    /// `e^{-itH} psi` with the boundary check applied to the result.
    pub fn evolve(&self, psi: &FiberState, t: f64) -> Result<FiberState> {
        let out = propagate(&self.decomp, psi, t);
        self.monitor.check(self.grid(), &out, t)?;
        Ok(out)
    }

    pub fn evolve_unchecked(&self, psi: &FiberState, t: f64) -> FiberState {
        propagate(&self.decomp, psi, t)
    }

    /// Evolutions of one state to many times, reusing its spectral coefficients.
    pub fn trajectory(&self, psi: &FiberState, times: &[f64]) -> Result<Vec<FiberState>> {
        let coef = self.decomp.coefficients(psi);
        let ev = self.decomp.eigenvalues();
        times
            .iter()
            .map(|&t| {
                let c: Vec<C64> = coef.iter().zip(ev).map(|(a, &l)| a * C64::from_polar(1.0, -t * l)).collect();
                let out = self.decomp.synthesize(&c);
                self.monitor.check(self.grid(), &out, t)?;
                Ok(out)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoupled_vacuum_only_picks_up_a_phase() {
        let grid = MomentumGrid::new(1, 32, 4.0).unwrap();
        let m = DispersionModel::polaron(1).decoupled();
        let prop = Propagator::assemble(&m, &grid, &[0.5]).unwrap();
        let out = prop.evolve(&FiberState::vacuum_only(grid.len()), 3.0).unwrap();
        assert!((out.vacuum - C64::from_polar(1.0, -3.0 * 0.125)).norm() < 1e-15);
        assert!(out.field.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn evolution_is_unitary_and_conserves_energy() {
        let grid = MomentumGrid::new(1, 256, 8.0).unwrap();
        let prop = Propagator::assemble(&DispersionModel::nelson(1), &grid, &[0.4]).unwrap();
        let psi = FiberState::new(C64::new(0.6, 0.0), grid.wavepacket(&[1.0], 0.3, &[0.0])).normalized().unwrap();
        let e0 = prop.op.expectation(&psi).unwrap().re;
        for t in [0.5, 7.0, 30.0, 100.0] {
            let out = prop.evolve_unchecked(&psi, t);
            assert!((out.norm() - 1.0).abs() < 1e-12);
            assert!((prop.op.expectation(&out).unwrap().re - e0).abs() < 1e-12);
        }
    }

    #[test]
    fn escaping_mass_trips_the_monitor() {
        let grid = MomentumGrid::new(1, 64, 4.0).unwrap();
        let prop = Propagator::assemble(&DispersionModel::polaron(1).decoupled(), &grid, &[0.0]).unwrap();
        let psi = FiberState::from_field(grid.wavepacket(&[2.0], 0.2, &[0.0]));
        let r = prop.evolve(&psi, 40.0);
        assert!(matches!(r, Err(Error::BoundaryBreach { .. })), "{r:?}");
    }
}
