//! Conjugate operator `A = (v.x + x.v)/2` with `v(k) = grad omega(k) - grad Omega(P0 - k)`,
//! the commutator `i[H(P), A]`, and windowed Mourre constants.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{RngExt, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fiber::{assemble_fiber, ArrowheadFiberOperator};
use crate::grid::{FiberState, MomentumGrid};
use crate::model::DispersionModel;
use crate::spectral::{lowest_shell, sigma_ess, EigenDecomposition};
use crate::thresholds;

/// Allowed closed-form/direct disagreement relative to the commutator scale.
pub const COMMUTATOR_TOLERANCE: f64 = 1e-8;

const I: C64 = C64::new(0.0, 1.0);

/// The symmetrized dilation-type generator acting on the field sector only.
#[derive(Clone, Debug)]
pub struct ConjugateOperator {
    p0: Vec<f64>,
    /// Point-major `v(k_j)_i`.
    velocity: Vec<f64>,
    grid: MomentumGrid,
}

pub fn assemble_conjugate(model: &DispersionModel, grid: &MomentumGrid, p0: &[f64]) -> Result<ConjugateOperator> {
    if p0.len() != grid.nu() {
        return Err(Error::Dimension { expected: grid.nu(), got: p0.len() });
    }
    let nu = grid.nu();
    let mut velocity = vec![0.0; grid.len() * nu];
    for (j, k) in grid.momenta().enumerate() {
        model.velocity_into(p0, k, &mut velocity[j * nu..(j + 1) * nu]);
    }
    Ok(ConjugateOperator { p0: p0.to_vec(), velocity, grid: grid.clone() })
}

impl ConjugateOperator {
    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    /// `v(k_j)` as a slice of length `nu`.
    pub fn velocity(&self, j: usize) -> &[f64] {
        let nu = self.grid.nu();
        &self.velocity[j * nu..(j + 1) * nu]
    }

    pub fn is_zero(&self) -> bool {
        self.velocity.iter().all(|&v| v == 0.0)
    }

    /// `a f` for a field vector in the momentum picture.
    pub fn apply_field(&self, field: &[C64]) -> Result<Vec<C64>> {
        let nu = self.grid.nu();
        let m = self.grid.len();
        if field.len() != m {
            return Err(Error::Dimension { expected: m, got: field.len() });
        }
        let mut out = vec![C64::default(); m];
        let xf = self.grid.to_position(field)?;
        for axis in 0..nu {
            // X (V f)
            let mut vf: Vec<C64> = field.iter().enumerate().map(|(j, f)| f * self.velocity[j * nu + axis]).collect();
            self.grid.to_position_in_place(&mut vf)?;
            for (v, x) in vf.iter_mut().zip(self.grid.positions()) {
                *v *= x[axis];
            }
            self.grid.to_momentum_in_place(&mut vf)?;
            // V (X f)
            let mut xs: Vec<C64> = xf.iter().zip(self.grid.positions()).map(|(v, x)| v * x[axis]).collect();
            self.grid.to_momentum_in_place(&mut xs)?;
            for (j, o) in out.iter_mut().enumerate() {
                *o += 0.5 * (vf[j] + xs[j] * self.velocity[j * nu + axis]);
            }
        }
        Ok(out)
    }

    /// `A psi`; the vacuum component is annihilated.
    pub fn apply(&self, psi: &FiberState) -> Result<FiberState> {
        Ok(FiberState { vacuum: C64::default(), field: self.apply_field(&psi.field)? })
    }

    /// Dense matrix over `C + grid`, assembled column by column.
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        let m = self.grid.len();
        let cols: Result<Vec<Vec<C64>>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![C64::default(); m];
                e[j] = C64::new(1.0, 0.0);
                self.apply_field(&e)
            })
            .collect();
        let cols = cols?;
        Ok(DMatrix::from_fn(m + 1, m + 1, |r, c| if r == 0 || c == 0 { C64::default() } else { cols[c - 1][r - 1] }))
    }

    /// Power-iteration estimate of the operator norm.
    pub fn norm_estimate(&self, iterations: usize) -> Result<f64> {
        power_norm(self.grid.len(), iterations, |x| {
            let f = self.apply_field(&x.field)?;
            Ok(FiberState { vacuum: C64::default(), field: f })
        })
    }
}

fn seeded_state(dim: usize, seed: u64) -> FiberState {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let vacuum = draw();
    FiberState { vacuum, field: (0..dim).map(|_| draw()).collect() }
}

/// Largest `|<x, T x>|`-type growth factor of a Hermitian map by power iteration.
fn power_norm(dim: usize, iterations: usize, map: impl Fn(&FiberState) -> Result<FiberState>) -> Result<f64> {
    let mut x = seeded_state(dim, 0x6d0e);
    let mut est: f64 = 0.0;
    for _ in 0..iterations {
        let n = x.norm();
        if n == 0.0 {
            return Ok(0.0);
        }
        x.scale(C64::new(1.0 / n, 0.0));
        let y = map(&x)?;
        est = y.norm();
        x = y;
    }
    Ok(est)
}

/// `i[H(P), A_{P0}]` in closed form: diagonal `v_{P0}(k) . v_P(k)` on the field
/// block and the column `-i a c` against the vacuum.
#[derive(Clone, Debug, Serialize)]
pub struct CommutatorMatrix {
    pub p: Vec<f64>,
    pub p0: Vec<f64>,
    pub diag: Vec<f64>,
    pub column: Vec<C64>,
    /// Upper bound on the operator norm used to scale tolerances.
    pub scale: f64,
    /// Closed form minus direct commutator on the smooth probe subspace.
    pub discrepancy: f64,
    /// The same difference on the whole grid space. The periodic position
    /// operator makes this of order one near the momentum-box edges; it is
    /// reported but not checked.
    pub full_discrepancy: f64,
}

impl CommutatorMatrix {
    pub fn apply(&self, psi: &FiberState) -> Result<FiberState> {
        if psi.field.len() != self.diag.len() {
            return Err(Error::Dimension { expected: self.diag.len(), got: psi.field.len() });
        }
        let vacuum = self.column.iter().zip(&psi.field).map(|(c, f)| c.conj() * f).sum();
        let field =
            self.diag.iter().zip(&self.column).zip(&psi.field).map(|((&d, &c), &f)| d * f + c * psi.vacuum).collect();
        Ok(FiberState { vacuum, field })
    }

    /// `<psi, C psi>`, real for a Hermitian `C`.
    pub fn expectation(&self, psi: &FiberState) -> Result<f64> {
        Ok(psi.inner(&self.apply(psi)?).re)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.diag.len() + 1;
        let mut m = DMatrix::zeros(n, n);
        for (j, (&d, &c)) in self.diag.iter().zip(&self.column).enumerate() {
            m[(j + 1, j + 1)] = C64::new(d, 0.0);
            m[(j + 1, 0)] = c;
            m[(0, j + 1)] = c.conj();
        }
        m
    }
}

/// `i(HA - AH) psi` evaluated by applying both operators.
pub fn direct_commutator_apply(
    op: &ArrowheadFiberOperator,
    conj: &ConjugateOperator,
    psi: &FiberState,
) -> Result<FiberState> {
    let hap = op.apply(&conj.apply(psi)?)?;
    let ahp = conj.apply(&op.apply(psi)?)?;
    let mut out = hap.sub(&ahp);
    out.scale(I);
    Ok(out)
}

/// Dense `i(HA - AH)` using the arrowhead structure: `AH = (HA)^*`.
pub fn direct_commutator_dense(op: &ArrowheadFiberOperator, conj: &ConjugateOperator) -> Result<DMatrix<C64>> {
    let a = conj.to_dense()?;
    let n = a.nrows();
    let mut ha = DMatrix::<C64>::zeros(n, n);
    for s in 0..n {
        let mut top = C64::default();
        for (j, c) in op.coupling.iter().enumerate() {
            top += c.conj() * a[(j + 1, s)];
        }
        ha[(0, s)] = top + op.head * a[(0, s)];
        for (j, (&d, &c)) in op.diag.iter().zip(&op.coupling).enumerate() {
            ha[(j + 1, s)] = c * a[(0, s)] + d * a[(j + 1, s)];
        }
    }
    Ok(DMatrix::from_fn(n, n, |r, s| I * (ha[(r, s)] - ha[(s, r)].conj())))
}

/// Smooth test states: the vacuum and Gaussian wavepackets, orthonormalized.
/// The width balances the momentum tail at the box edge against the position
/// tail at the periodic boundary, so both decay like `exp(-0.45 N)`.
pub fn probe_states(grid: &MomentumGrid) -> Vec<FiberState> {
    let nu = grid.nu();
    let kmax = grid.k_max();
    let per_axis: usize = 5;
    let reach = kmax / 3.0;
    let centers: Vec<f64> = (0..per_axis).map(|i| -reach + 2.0 * reach * i as f64 / (per_axis - 1) as f64).collect();
    let shift = grid.box_len() / 16.0;
    let momentum_room = kmax - reach;
    let position_room = 0.5 * grid.box_len() - shift;
    let width = (momentum_room / (2.0 * position_room)).sqrt();
    let mut raw = vec![FiberState::vacuum_only(grid.len())];
    for idx in 0..per_axis.pow(nu as u32) {
        let mut k0 = vec![0.0; nu];
        let mut rest = idx;
        for slot in k0.iter_mut() {
            *slot = centers[rest % per_axis];
            rest /= per_axis;
        }
        for s in [0.0, shift] {
            let mut x0 = vec![0.0; nu];
            x0[0] = s;
            raw.push(FiberState::from_field(grid.wavepacket(&k0, width, &x0)));
        }
    }
    orthonormalize(raw)
}

fn orthonormalize(raw: Vec<FiberState>) -> Vec<FiberState> {
    let mut basis: Vec<FiberState> = Vec::with_capacity(raw.len());
    for mut v in raw {
        for _ in 0..2 {
            for b in &basis {
                let c = b.inner(&v);
                v.axpy(-c, b);
            }
        }
        let n = v.norm();
        if n > 1e-8 {
            v.scale(C64::new(1.0 / n, 0.0));
            basis.push(v);
        }
    }
    basis
}

/// Closed-form commutator without the consistency check.
pub fn closed_form_commutator(
    op: &ArrowheadFiberOperator,
    model: &DispersionModel,
    conj: &ConjugateOperator,
) -> Result<CommutatorMatrix> {
    let grid = op.grid();
    let nu = grid.nu();
    let mut vp = vec![0.0; nu];
    let diag: Vec<f64> = grid
        .momenta()
        .enumerate()
        .map(|(j, k)| {
            model.velocity_into(&op.p, k, &mut vp);
            conj.velocity(j).iter().zip(&vp).map(|(a, b)| a * b).sum()
        })
        .collect();
    let column: Vec<C64> = conj.apply_field(&op.coupling)?.into_iter().map(|v| -I * v).collect();
    let dmax = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let cnorm = column.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    Ok(CommutatorMatrix {
        p: op.p.clone(),
        p0: conj.p0().to_vec(),
        diag,
        column,
        scale: dmax + cnorm,
        discrepancy: 0.0,
        full_discrepancy: 0.0,
    })
}

/// Closed-form commutator, cross-checked against `i(HA - AH)`.
pub fn assemble_commutator(
    model: &DispersionModel,
    grid: &MomentumGrid,
    p: &[f64],
    p0: &[f64],
) -> Result<CommutatorMatrix> {
    let op = assemble_fiber(model, grid, p)?;
    let conj = assemble_conjugate(model, grid, p0)?;
    let mut c = closed_form_commutator(&op, model, &conj)?;
    let diff =
        |psi: &FiberState| -> Result<FiberState> { Ok(c.apply(psi)?.sub(&direct_commutator_apply(&op, &conj, psi)?)) };
    let probes = probe_states(grid);
    let sq: Result<Vec<f64>> = probes.par_iter().map(|q| Ok(diff(q)?.norm_sqr())).collect();
    let discrepancy = sq?.iter().sum::<f64>().sqrt();
    let full = power_norm(grid.len(), 30, diff)?;
    if discrepancy > COMMUTATOR_TOLERANCE * c.scale {
        return Err(Error::Invariant(format!(
            "closed-form commutator differs from i(HA - AH) by {discrepancy:.3e} on smooth states \
             (scale {:.3e}); grid.n is too small to resolve smooth states",
            c.scale
        )));
    }
    c.discrepancy = discrepancy;
    c.full_discrepancy = full;
    Ok(c)
}

/// `|<psi_E, i[H, A_P] psi_E>|` for the mass-shell eigenvector, if there is one.
pub fn shell_virial(model: &DispersionModel, grid: &MomentumGrid, p: &[f64]) -> Result<Option<(f64, f64)>> {
    let op = assemble_fiber(model, grid, p)?;
    let sigma = sigma_ess(model, p)?;
    let Some(shell) = lowest_shell(&op, sigma) else {
        return Ok(None);
    };
    let conj = assemble_conjugate(model, grid, p)?;
    let c = closed_form_commutator(&op, model, &conj)?;
    Ok(Some((c.expectation(&shell.state)?.abs(), c.scale)))
}

#[derive(Clone, Debug, Serialize)]
pub struct MourreEstimate {
    pub p: Vec<f64>,
    pub p0: Vec<f64>,
    pub lambda: f64,
    pub kappa: f64,
    /// Smallest eigenvalue of the commutator compressed to the window.
    pub c_est: f64,
    pub n_window: usize,
    /// Thresholds found inside `[lambda - kappa, lambda + kappa]`.
    pub thresholds_in_window: Vec<f64>,
    /// Energy of the excluded bound state, when it fell in the window.
    pub excluded_shell: Option<f64>,
}

/// Lower bound of `i[H(P), A_{P0}]` on the spectral window `[lambda - kappa, lambda + kappa]`,
/// with the mass shell removed from the window.
pub fn mourre_constant(
    model: &DispersionModel,
    grid: &MomentumGrid,
    p: &[f64],
    p0: &[f64],
    lambda: f64,
    kappa: f64,
) -> Result<MourreEstimate> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::config(format!("window half-width must be positive, got {kappa}")));
    }
    let op = assemble_fiber(model, grid, p)?;
    let decomp = EigenDecomposition::secular(&op)?;
    let sigma = sigma_ess(model, p)?;
    let shell = lowest_shell(&op, sigma);
    let (lo, hi) = (lambda - kappa, lambda + kappa);
    let ev = decomp.eigenvalues();
    let skip = usize::from(shell.is_some());
    let window: Vec<usize> = (skip..ev.len()).filter(|&i| ev[i] >= lo && ev[i] <= hi).collect();
    let excluded_shell = shell.map(|s| s.energy).filter(|e| *e >= lo && *e <= hi);
    if window.is_empty() {
        return Err(Error::domain(format!("no continuum eigenvalues in [{lo}, {hi}]")));
    }
    let conj = assemble_conjugate(model, grid, p0)?;
    let c = closed_form_commutator(&op, model, &conj)?;
    let vecs: Vec<FiberState> = window.par_iter().map(|&i| decomp.eigenvector(i)).collect();
    let images: Result<Vec<FiberState>> = vecs.par_iter().map(|v| c.apply(v)).collect();
    let images = images?;
    let n = vecs.len();
    let g = DMatrix::from_fn(n, n, |a, b| {
        let x = vecs[a].inner(&images[b]);
        let y = images[a].inner(&vecs[b]);
        0.5 * (x + y)
    });
    let c_est = g.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    let radius = thresholds::default_search_radius(model, p);
    let thresholds_in_window =
        thresholds::threshold_set(model, p, radius)?.energies.into_iter().filter(|t| *t >= lo && *t <= hi).collect();
    Ok(MourreEstimate {
        p: p.to_vec(),
        p0: p0.to_vec(),
        lambda,
        kappa,
        c_est,
        n_window: n,
        thresholds_in_window,
        excluded_shell,
    })
}
