//! Discretized fiber Hamiltonian `H(P)` on a momentum grid.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{RngExt, SeedableRng};

use crate::error::{Error, Result};
use crate::grid::{FiberState, MomentumGrid};
use crate::model::{Coupling, DispersionModel};
use crate::quad::composite_rule;
use crate::smooth::{j_inner, j_outer};
use crate::spectral::EigenDecomposition;

pub use crate::smooth::EnergyWindow;

/// Allowed fraction of `|rho-hat|^2` mass outside the momentum box.
pub const CUTOFF_TAIL_TOLERANCE: f64 = 1e-10;

/// `[[head, coupling^*], [coupling, diag(diag)]]` over `C + grid`.
#[derive(Clone, Debug)]
pub struct ArrowheadFiberOperator {
    pub p: Vec<f64>,
    /// `Omega(P)`
    pub head: f64,
    /// `omega(k_j) + Omega(P - k_j)`
    pub diag: Vec<f64>,
    /// `sqrt(w) rho-hat(k_j)`
    pub coupling: Vec<C64>,
    grid: MomentumGrid,
}

impl ArrowheadFiberOperator {
    /// Builds an operator from raw parts; the grid fixes the field dimension.
    pub fn from_parts(grid: &MomentumGrid, p: Vec<f64>, head: f64, diag: Vec<f64>, coupling: Vec<C64>) -> Result<Self> {
        if diag.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: diag.len() });
        }
        if coupling.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: coupling.len() });
        }
        Ok(Self { p, head, diag, coupling, grid: grid.clone() })
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    /// Matrix dimension `1 + N^nu`.
    pub fn dim(&self) -> usize {
        1 + self.diag.len()
    }

    /// Upper bound on the operator norm.
    pub fn scale(&self) -> f64 {
        let dmax = self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let cnorm = self.coupling.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        self.head.abs().max(dmax) + cnorm
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        m[(0, 0)] = C64::new(self.head, 0.0);
        for (j, (&d, &c)) in self.diag.iter().zip(&self.coupling).enumerate() {
            m[(j + 1, j + 1)] = C64::new(d, 0.0);
            m[(j + 1, 0)] = c;
            m[(0, j + 1)] = c.conj();
        }
        m
    }

    /// The same operator with the coupling removed, `H_0(P)`.
    pub fn free(&self) -> Self {
        Self { coupling: vec![C64::default(); self.diag.len()], ..self.clone() }
    }

    fn check_state(&self, psi: &FiberState) -> Result<()> {
        if psi.field.len() != self.diag.len() {
            return Err(Error::Dimension { expected: self.diag.len(), got: psi.field.len() });
        }
        Ok(())
    }

    pub fn apply(&self, psi: &FiberState) -> Result<FiberState> {
        self.check_state(psi)?;
        let vacuum =
            self.head * psi.vacuum + self.coupling.iter().zip(&psi.field).map(|(c, f)| c.conj() * f).sum::<C64>();
        let field =
            self.diag.iter().zip(&self.coupling).zip(&psi.field).map(|((&d, &c), &f)| d * f + c * psi.vacuum).collect();
        Ok(FiberState { vacuum, field })
    }

    /// `<psi, H psi>`
    pub fn expectation(&self, psi: &FiberState) -> Result<C64> {
        Ok(psi.inner(&self.apply(psi)?))
    }
}

/// `H(P) + F_P` acting on `K + L2`: the interacting fiber plus one free field particle.
#[derive(Clone, Debug)]
pub struct ExtendedFiberOperator {
    pub inner: ArrowheadFiberOperator,
    pub free_block: Vec<f64>,
}

impl ExtendedFiberOperator {
    pub fn new(inner: ArrowheadFiberOperator) -> Self {
        let free_block = inner.diag.clone();
        Self { inner, free_block }
    }

    pub fn apply(&self, psi: &FiberState, extra: &[C64]) -> Result<(FiberState, Vec<C64>)> {
        if extra.len() != self.free_block.len() {
            return Err(Error::Dimension { expected: self.free_block.len(), got: extra.len() });
        }
        let out = self.inner.apply(psi)?;
        let extra = self.free_block.iter().zip(extra).map(|(d, f)| d * f).collect();
        Ok((out, extra))
    }
}

/// Fraction of `|rho-hat|^2` mass outside the ball of radius `k_cut`.
pub fn coupling_tail_fraction(model: &DispersionModel, k_cut: f64) -> f64 {
    let end = match model.coupling {
        Coupling::Gaussian { sigma, .. } => k_cut.max(0.0) + 40.0 / sigma,
        Coupling::SmoothCutoff { cutoff, .. } => 2.0 * cutoff,
        Coupling::PowerLaw { .. } => return 0.0,
    };
    if model.coupling.is_zero() || k_cut >= end {
        return 0.0;
    }
    let nu = model.nu as i32;
    let mass = |a: f64, b: f64| -> f64 {
        composite_rule(a, b, 400, 16)
            .into_iter()
            .map(|(r, w)| {
                let v = model.coupling.momentum_jet(r).map(|j| j.value).unwrap_or(0.0);
                w * v * v * r.powi(nu - 1)
            })
            .sum()
    };
    let tail = mass(k_cut, end);
    let total = mass(0.0, k_cut) + tail;
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

/// Discretizes `H(P)` on `grid`.
pub fn assemble_fiber(model: &DispersionModel, grid: &MomentumGrid, p: &[f64]) -> Result<ArrowheadFiberOperator> {
    if grid.nu() != model.nu {
        return Err(Error::Dimension { expected: model.nu, got: grid.nu() });
    }
    if p.len() != model.nu {
        return Err(Error::Dimension { expected: model.nu, got: p.len() });
    }
    if !model.coupling.has_momentum_form() {
        return Err(Error::Unsupported("the coupling family has no momentum representation to put on a grid".into()));
    }
    let tail = coupling_tail_fraction(model, grid.k_max());
    if tail > CUTOFF_TAIL_TOLERANCE {
        return Err(Error::config(format!(
            "grid.kmax = {} truncates {tail:.2e} of the coupling mass (limit {CUTOFF_TAIL_TOLERANCE:e})",
            grid.k_max()
        )));
    }
    let sw = grid.weight().sqrt();
    let mut diag = Vec::with_capacity(grid.len());
    let mut coupling = Vec::with_capacity(grid.len());
    for k in grid.momenta() {
        diag.push(model.fiber_energy(p, k));
        coupling.push(C64::new(sw * model.coupling_momentum(k)?, 0.0));
    }
    Ok(ArrowheadFiberOperator { p: p.to_vec(), head: model.matter_energy(p), diag, coupling, grid: grid.clone() })
}

/// `H(P) psi`.
pub fn apply_fiber(op: &ArrowheadFiberOperator, psi: &FiberState) -> Result<FiberState> {
    op.apply(psi)
}

/// Geometric partition `j^R psi = (j0(x/R) psi, j_inf(x/R) psi_field)`.
/// The vacuum stays in the inner part.
pub fn partition_split(grid: &MomentumGrid, psi: &FiberState, r: f64) -> Result<(FiberState, Vec<C64>)> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::config(format!("partition radius must be positive, got {r}")));
    }
    if psi.field.len() != grid.len() {
        return Err(Error::Dimension { expected: grid.len(), got: psi.field.len() });
    }
    let pos = grid.to_position(&psi.field)?;
    let mut inner = Vec::with_capacity(pos.len());
    let mut outer = Vec::with_capacity(pos.len());
    for (v, x) in pos.iter().zip(grid.positions()) {
        let s = crate::model::radius(x) / r;
        inner.push(v * j_inner(s));
        outer.push(v * j_outer(s));
    }
    grid.to_momentum_in_place(&mut inner)?;
    grid.to_momentum_in_place(&mut outer)?;
    Ok((FiberState { vacuum: psi.vacuum, field: inner }, outer))
}

/// Difference map `j^R f(H) - f(H^ext) j^R` and its adjoint.
struct LocalizationMap<'a> {
    grid: &'a MomentumGrid,
    decomp: &'a EigenDecomposition,
    window: EnergyWindow,
    diag: &'a [f64],
    inner: Vec<f64>,
    outer: Vec<f64>,
}

impl LocalizationMap<'_> {
    fn mul_position(&self, v: &[C64], profile: &[f64]) -> Vec<C64> {
        let mut pos = self.grid.to_position(v).expect("grid length");
        for (c, s) in pos.iter_mut().zip(profile) {
            *c *= *s;
        }
        self.grid.to_momentum_in_place(&mut pos).expect("grid length");
        pos
    }

    fn inner_cut(&self, psi: &FiberState) -> FiberState {
        FiberState { vacuum: psi.vacuum, field: self.mul_position(&psi.field, &self.inner) }
    }

    fn f_free(&self, v: &[C64]) -> Vec<C64> {
        v.iter().zip(self.diag).map(|(c, d)| c * self.window.eval(*d)).collect()
    }

    fn f_h(&self, psi: &FiberState) -> FiberState {
        self.decomp.apply_function(psi, |l| C64::new(self.window.eval(l), 0.0))
    }

    fn forward(&self, psi: &FiberState) -> (FiberState, Vec<C64>) {
        let fh = self.f_h(psi);
        let mut top = self.inner_cut(&fh);
        top.axpy(C64::new(-1.0, 0.0), &self.f_h(&self.inner_cut(psi)));
        let a = self.mul_position(&fh.field, &self.outer);
        let b = self.f_free(&self.mul_position(&psi.field, &self.outer));
        let bottom = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        (top, bottom)
    }

    fn adjoint(&self, top: &FiberState, bottom: &[C64]) -> FiberState {
        // D^* (a, b) = f(H)(j0 a + j_inf b) - j0 f(H) a - j_inf f(F) b
        let mut lifted = self.inner_cut(top);
        let jb = self.mul_position(bottom, &self.outer);
        for (c, v) in lifted.field.iter_mut().zip(&jb) {
            *c += v;
        }
        let mut out = self.f_h(&lifted);
        out.axpy(C64::new(-1.0, 0.0), &self.inner_cut(&self.f_h(top)));
        let last = self.mul_position(&self.f_free(bottom), &self.outer);
        for (c, v) in out.field.iter_mut().zip(&last) {
            *c -= v;
        }
        out
    }
}

/// Operator-norm estimate of `j^R f(H(P)) - f(H^ext(P)) j^R`, by power iteration.
pub fn localization_error(
    model: &DispersionModel,
    grid: &MomentumGrid,
    p: &[f64],
    window: EnergyWindow,
    r: f64,
) -> Result<f64> {
    let op = assemble_fiber(model, grid, p)?;
    let decomp = EigenDecomposition::secular(&op)?;
    localization_error_with(&op, &decomp, window, r)
}

/// As [`localization_error`], reusing an existing decomposition of `op`.
pub fn localization_error_with(
    op: &ArrowheadFiberOperator,
    decomp: &EigenDecomposition,
    window: EnergyWindow,
    r: f64,
) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::config(format!("partition radius must be positive, got {r}")));
    }
    let grid = op.grid();
    let lmin = decomp.eigenvalues().first().copied().unwrap_or(0.0);
    let dmin = op.diag.iter().copied().fold(f64::INFINITY, f64::min);
    if window.support_max() <= lmin.min(dmin) {
        return Ok(0.0);
    }
    let mut inner = Vec::with_capacity(grid.len());
    let mut outer = Vec::with_capacity(grid.len());
    for x in grid.positions() {
        let s = crate::model::radius(x) / r;
        inner.push(j_inner(s));
        outer.push(j_outer(s));
    }
    let map = LocalizationMap { grid, decomp, window, diag: &op.diag, inner, outer };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x10ca1);
    let mut rnd = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut x = FiberState::new(rnd(), (0..grid.len()).map(|_| rnd()).collect()).normalized()?;
    let mut estimate = 0.0;
    for _ in 0..300 {
        let (top, bottom) = map.forward(&x);
        let y = map.adjoint(&top, &bottom);
        let lambda = x.inner(&y).re.max(0.0);
        let norm = y.norm();
        if norm < 1e-300 {
            return Ok(0.0);
        }
        x = y;
        x.scale(C64::new(1.0 / norm, 0.0));
        let converged = (lambda - estimate).abs() <= 1e-10 * lambda.max(1e-300);
        estimate = lambda;
        if converged {
            break;
        }
    }
    if !estimate.is_finite() {
        return Err(Error::numerical("power iteration for the localization error diverged"));
    }
    Ok(estimate.sqrt())
}
