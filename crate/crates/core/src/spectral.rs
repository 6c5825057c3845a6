//! Eigendecomposition of arrowhead fiber operators, essential spectrum,
//! mass shells, Weyl sequences and the energy-momentum atlas.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fiber::{assemble_fiber, ArrowheadFiberOperator};
use crate::grid::{FiberState, MomentumGrid};
use crate::model::{radius, DispersionModel};
use crate::smooth::bump;
use crate::thresholds::{self, ThresholdSet};

/// Relative threshold below which diagonal entries count as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Secular,
    Dense,
}

/// A multiplet of (numerically) equal diagonal entries, rotated so that only
/// the first basis vector couples to the vacuum.
#[derive(Clone, Debug)]
struct Multiplet {
    members: Vec<usize>,
    /// Column-major orthogonal basis; column 0 is the normalized coupling.
    basis: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
enum PoleSource {
    Single(usize),
    Group(usize),
}

#[derive(Clone, Copy, Debug)]
enum Unit {
    /// Field index whose coupling vanished.
    Decoupled(usize),
    /// Column `c >= 1` of multiplet `g`.
    Complement(usize, usize),
}

#[derive(Clone, Copy, Debug)]
enum Entry {
    Root(usize),
    Unit(usize),
}

/// A secular root stored as `pole[origin] + tau` for relative accuracy.
#[derive(Clone, Copy, Debug)]
struct Root {
    origin: Option<usize>,
    tau: f64,
    value: f64,
    norm_inv: f64,
}

#[derive(Clone, Debug)]
struct SecularParts {
    phases: Vec<C64>,
    poles: Vec<f64>,
    sources: Vec<PoleSource>,
    /// Couplings recomputed from the roots (Lowner's formula).
    zhat: Vec<f64>,
    roots: Vec<Root>,
    groups: Vec<Multiplet>,
    units: Vec<(f64, Unit)>,
    order: Vec<Entry>,
}

#[derive(Clone, Debug)]
enum Storage {
    Secular(SecularParts),
    Dense(DMatrix<C64>),
}

/// All eigenpairs of an arrowhead operator, sorted by eigenvalue.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    eigenvalues: Vec<f64>,
    method: Method,
    field_len: usize,
    storage: Storage,
}

impl SecularParts {
    /// `pole[j] - root`, accurate when the root sits next to its origin pole.
    #[inline]
    fn pole_minus_root(&self, j: usize, root: &Root) -> f64 {
        match root.origin {
            Some(o) => (self.poles[j] - self.poles[o]) - root.tau,
            None => self.poles[j] - root.value,
        }
    }

    fn secular_value(&self, origin: usize, tau: f64, head: f64, z2: &[f64]) -> f64 {
        let base = self.poles[origin];
        let mut sum = 0.0;
        for (j, &w) in z2.iter().enumerate() {
            sum += w / ((base - self.poles[j]) + tau);
        }
        (base - head) + tau - sum
    }

    /// Field-space coordinates of a reduced vector (vacuum handled by the caller).
    fn expand(&self, poles: &[C64], units: &[C64], field_len: usize) -> Vec<C64> {
        let mut field = vec![C64::default(); field_len];
        for (p, src) in self.sources.iter().enumerate() {
            if let PoleSource::Single(j) = src {
                field[*j] = poles[p];
            }
        }
        let mut group_cols: Vec<Vec<C64>> = self.groups.iter().map(|g| vec![C64::default(); g.members.len()]).collect();
        for (p, src) in self.sources.iter().enumerate() {
            if let PoleSource::Group(g) = src {
                group_cols[*g][0] = poles[p];
            }
        }
        for (u, (_, unit)) in self.units.iter().enumerate() {
            match unit {
                Unit::Decoupled(j) => field[*j] = units[u],
                Unit::Complement(g, c) => group_cols[*g][*c] = units[u],
            }
        }
        for (g, cols) in self.groups.iter().zip(&group_cols) {
            let m = g.members.len();
            for (row, &j) in g.members.iter().enumerate() {
                let mut acc = C64::default();
                for (c, coef) in cols.iter().enumerate() {
                    acc += g.basis[c * m + row] * coef;
                }
                field[j] = acc;
            }
        }
        for (f, ph) in field.iter_mut().zip(&self.phases) {
            *f *= ph;
        }
        field
    }

    /// Inverse of [`Self::expand`].
    fn reduce(&self, field: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let unphased: Vec<C64> = field.iter().zip(&self.phases).map(|(f, p)| f * p.conj()).collect();
        let group_coords: Vec<Vec<C64>> = self
            .groups
            .iter()
            .map(|g| {
                let m = g.members.len();
                (0..m)
                    .map(|c| g.members.iter().enumerate().map(|(row, &j)| g.basis[c * m + row] * unphased[j]).sum())
                    .collect()
            })
            .collect();
        let poles = self
            .sources
            .iter()
            .map(|src| match src {
                PoleSource::Single(j) => unphased[*j],
                PoleSource::Group(g) => group_coords[*g][0],
            })
            .collect();
        let units = self
            .units
            .iter()
            .map(|(_, unit)| match unit {
                Unit::Decoupled(j) => unphased[*j],
                Unit::Complement(g, c) => group_coords[*g][*c],
            })
            .collect();
        (poles, units)
    }
}

/// Bisection for the root `pole[origin] + tau` with `tau` in `(lo, hi)`.
fn bisect(parts: &SecularParts, origin: usize, lo: f64, hi: f64, head: f64, z2: &[f64]) -> f64 {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..2000 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if b - a <= 2.0 * f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
        let f = parts.secular_value(origin, mid, head, z2);
        if f > 0.0 {
            b = mid;
        } else if f < 0.0 {
            a = mid;
        } else {
            return mid;
        }
    }
    0.5 * (a + b)
}

/// Householder-based orthogonal basis whose first column is the unit vector `u`.
fn complement_basis(u: &[f64]) -> Vec<f64> {
    let m = u.len();
    let sign = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = u.to_vec();
    v[0] += sign;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let mut basis = vec![0.0; m * m];
    for c in 0..m {
        for r in 0..m {
            let id = if r == c { 1.0 } else { 0.0 };
            basis[c * m + r] = id - 2.0 * v[r] * v[c] / vv;
        }
    }
    // The reflector maps u to -sign e_0, so its first column is -sign u.
    basis[..m].copy_from_slice(&u[..m]);
    basis
}

impl EigenDecomposition {
    /// Deflating secular-equation solver, `O(M^2)` work.
    pub fn secular(op: &ArrowheadFiberOperator) -> Result<Self> {
        Self::secular_parts(op.head, &op.diag, &op.coupling)
    }

    /// Secular solver on raw arrowhead data.
    pub fn secular_parts(head: f64, diag: &[f64], coupling: &[C64]) -> Result<Self> {
        let m = diag.len();
        if coupling.len() != m {
            return Err(Error::Dimension { expected: m, got: coupling.len() });
        }
        if !head.is_finite() || diag.iter().any(|d| !d.is_finite()) {
            return Err(Error::numerical("non-finite arrowhead entries"));
        }
        let phases: Vec<C64> =
            coupling.iter().map(|c| if c.norm() > 0.0 { c / c.norm() } else { C64::new(1.0, 0.0) }).collect();
        let z: Vec<f64> = coupling.iter().map(|c| c.norm()).collect();
        let dmax = diag.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        let znorm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = (head.abs().max(dmax) + znorm).max(f64::MIN_POSITIVE);
        let ztol = 8.0 * f64::EPSILON * scale;

        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));

        let mut units: Vec<(f64, Unit)> = Vec::new();
        let mut coupled: Vec<usize> = Vec::with_capacity(m);
        for &j in &idx {
            if z[j] <= ztol {
                units.push((diag[j], Unit::Decoupled(j)));
            } else {
                coupled.push(j);
            }
        }

        let mut poles = Vec::new();
        let mut weights = Vec::new();
        let mut sources = Vec::new();
        let mut groups = Vec::new();
        let mut i = 0;
        while i < coupled.len() {
            let first = coupled[i];
            let mut end = i + 1;
            while end < coupled.len() && diag[coupled[end]] - diag[first] <= DEGENERACY_TOLERANCE * scale {
                end += 1;
            }
            if end - i == 1 {
                poles.push(diag[first]);
                weights.push(z[first]);
                sources.push(PoleSource::Single(first));
            } else {
                let members: Vec<usize> = coupled[i..end].to_vec();
                let norm = members.iter().map(|&j| z[j] * z[j]).sum::<f64>().sqrt();
                let u: Vec<f64> = members.iter().map(|&j| z[j] / norm).collect();
                let basis = complement_basis(&u);
                let g = groups.len();
                for c in 1..members.len() {
                    units.push((diag[first], Unit::Complement(g, c)));
                }
                poles.push(diag[first]);
                weights.push(norm);
                sources.push(PoleSource::Group(g));
                groups.push(Multiplet { members, basis });
            }
            i = end;
        }

        let k = poles.len();
        let z2: Vec<f64> = weights.iter().map(|w| w * w).collect();
        let mut parts = SecularParts {
            phases,
            poles,
            sources,
            zhat: Vec::new(),
            roots: Vec::new(),
            groups,
            units,
            order: Vec::new(),
        };

        let roots: Vec<Root> = if k == 0 {
            vec![Root { origin: None, tau: 0.0, value: head, norm_inv: 1.0 }]
        } else {
            let lower = head.min(parts.poles[0]) - znorm - 1.0;
            let upper = head.max(parts.poles[k - 1]) + znorm + 1.0;
            let parts_ref = &parts;
            (0..=k)
                .into_par_iter()
                .map(|r| {
                    let (origin, lo, hi) = if r == 0 {
                        (0, lower - parts_ref.poles[0], 0.0)
                    } else if r == k {
                        (k - 1, 0.0, upper - parts_ref.poles[k - 1])
                    } else {
                        let (a, b) = (parts_ref.poles[r - 1], parts_ref.poles[r]);
                        let gap = b - a;
                        let f = parts_ref.secular_value(r - 1, 0.5 * gap, head, &z2);
                        if f > 0.0 {
                            (r - 1, 0.0, 0.5 * gap)
                        } else {
                            (r, -0.5 * gap, 0.0)
                        }
                    };
                    let tau = bisect(parts_ref, origin, lo, hi, head, &z2);
                    Root { origin: Some(origin), tau, value: parts_ref.poles[origin] + tau, norm_inv: 0.0 }
                })
                .collect()
        };

        // Interlacing of the reduced problem.
        for (r, root) in roots.iter().enumerate() {
            let below = if r > 0 { parts.poles[r - 1] } else { f64::NEG_INFINITY };
            let above = if r < k { parts.poles[r] } else { f64::INFINITY };
            if !(root.value >= below && root.value <= above) {
                return Err(Error::Invariant(format!(
                    "secular root {r} = {} escaped its bracket [{below}, {above}]",
                    root.value
                )));
            }
        }

        // Lowner: zhat_j^2 = -prod_i (d_j - l_i) / prod_{i != j} (d_j - d_i),
        // with factors paired so that each ratio stays near one.
        let zhat: Vec<f64> = (0..k)
            .into_par_iter()
            .map(|j| {
                let p = &parts;
                let mut prod = -p.pole_minus_root(j, &roots[j]) * p.pole_minus_root(j, &roots[j + 1]);
                for i in 0..j {
                    prod *= p.pole_minus_root(j, &roots[i]) / (p.poles[j] - p.poles[i]);
                }
                for i in j + 1..k {
                    prod *= p.pole_minus_root(j, &roots[i + 1]) / (p.poles[j] - p.poles[i]);
                }
                prod.max(0.0).sqrt()
            })
            .collect();
        parts.zhat = zhat;

        let roots: Vec<Root> = roots
            .into_par_iter()
            .map(|mut root| {
                if k > 0 {
                    let mut s = 1.0;
                    for j in 0..k {
                        let t = parts.zhat[j] / parts.pole_minus_root(j, &root);
                        s += t * t;
                    }
                    root.norm_inv = 1.0 / s.sqrt();
                }
                root
            })
            .collect();
        parts.roots = roots;

        let mut order: Vec<(f64, Entry)> = parts
            .roots
            .iter()
            .enumerate()
            .map(|(r, root)| (root.value, Entry::Root(r)))
            .chain(parts.units.iter().enumerate().map(|(u, (v, _))| (*v, Entry::Unit(u))))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let eigenvalues = order.iter().map(|e| e.0).collect();
        parts.order = order.into_iter().map(|e| e.1).collect();

        Ok(Self { eigenvalues, method: Method::Secular, field_len: m, storage: Storage::Secular(parts) })
    }

    /// Dense Hermitian eigensolver, used as a cross-check.
    pub fn dense(op: &ArrowheadFiberOperator) -> Result<Self> {
        let eig = nalgebra::SymmetricEigen::new(op.to_dense());
        let n = op.dim();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("dense eigensolver produced non-finite values"));
        }
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
        Ok(Self { eigenvalues, method: Method::Dense, field_len: n - 1, storage: Storage::Dense(vectors) })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Normalized eigenvector for the `i`-th smallest eigenvalue.
    pub fn eigenvector(&self, i: usize) -> FiberState {
        match &self.storage {
            Storage::Dense(v) => {
                FiberState { vacuum: v[(0, i)], field: (1..=self.field_len).map(|r| v[(r, i)]).collect() }
            }
            Storage::Secular(p) => {
                let k = p.poles.len();
                let mut poles = vec![C64::default(); k];
                let mut units = vec![C64::default(); p.units.len()];
                let vacuum = match p.order[i] {
                    Entry::Root(r) => {
                        let root = &p.roots[r];
                        for j in 0..k {
                            let t = -p.zhat[j] / p.pole_minus_root(j, root);
                            poles[j] = C64::new(t * root.norm_inv, 0.0);
                        }
                        C64::new(root.norm_inv, 0.0)
                    }
                    Entry::Unit(u) => {
                        units[u] = C64::new(1.0, 0.0);
                        C64::default()
                    }
                };
                FiberState { vacuum, field: p.expand(&poles, &units, self.field_len) }
            }
        }
    }

    /// Spectral coefficients `<phi_i, psi>` in eigenvalue order.
    pub fn coefficients(&self, psi: &FiberState) -> Vec<C64> {
        match &self.storage {
            Storage::Dense(v) => (0..self.len())
                .into_par_iter()
                .map(|i| {
                    let mut acc = v[(0, i)].conj() * psi.vacuum;
                    for (r, f) in psi.field.iter().enumerate() {
                        acc += v[(r + 1, i)].conj() * f;
                    }
                    acc
                })
                .collect(),
            Storage::Secular(p) => {
                let (poles, units) = p.reduce(&psi.field);
                let root_coef: Vec<C64> = p
                    .roots
                    .par_iter()
                    .map(|root| {
                        let mut acc = psi.vacuum;
                        for (j, y) in poles.iter().enumerate() {
                            acc -= y * (p.zhat[j] / p.pole_minus_root(j, root));
                        }
                        acc * root.norm_inv
                    })
                    .collect();
                p.order
                    .iter()
                    .map(|e| match e {
                        Entry::Root(r) => root_coef[*r],
                        Entry::Unit(u) => units[*u],
                    })
                    .collect()
            }
        }
    }

    /// `sum_i a_i phi_i`.
    pub fn synthesize(&self, coef: &[C64]) -> FiberState {
        match &self.storage {
            Storage::Dense(v) => {
                let n = self.len();
                let rows: Vec<C64> =
                    (0..n).into_par_iter().map(|r| (0..n).map(|i| v[(r, i)] * coef[i]).sum()).collect();
                FiberState { vacuum: rows[0], field: rows[1..].to_vec() }
            }
            Storage::Secular(p) => {
                let mut root_coef = vec![C64::default(); p.roots.len()];
                let mut units = vec![C64::default(); p.units.len()];
                for (e, a) in p.order.iter().zip(coef) {
                    match e {
                        Entry::Root(r) => root_coef[*r] = *a,
                        Entry::Unit(u) => units[*u] = *a,
                    }
                }
                let scaled: Vec<C64> = p.roots.iter().zip(&root_coef).map(|(r, a)| a * r.norm_inv).collect();
                let vacuum = scaled.iter().sum();
                let poles: Vec<C64> = (0..p.poles.len())
                    .into_par_iter()
                    .map(|j| {
                        let mut acc = C64::default();
                        for (root, a) in p.roots.iter().zip(&scaled) {
                            acc -= a * (p.zhat[j] / p.pole_minus_root(j, root));
                        }
                        acc
                    })
                    .collect();
                FiberState { vacuum, field: p.expand(&poles, &units, self.field_len) }
            }
        }
    }

    /// `g(H) psi` by functional calculus.
    pub fn apply_function(&self, psi: &FiberState, g: impl Fn(f64) -> C64) -> FiberState {
        let mut coef = self.coefficients(psi);
        for (c, &l) in coef.iter_mut().zip(&self.eigenvalues) {
            *c *= g(l);
        }
        self.synthesize(&coef)
    }

    /// True when the eigenvalues interlace the sorted diagonal of `op`.
    pub fn interlaces(&self, op: &ArrowheadFiberOperator, tol: f64) -> bool {
        let mut d = op.diag.clone();
        d.sort_by(f64::total_cmp);
        let l = &self.eigenvalues;
        d.iter().enumerate().all(|(i, &di)| l[i] <= di + tol && di <= l[i + 1] + tol)
    }

    /// Power-iteration estimate of `||V^* V - I||` for the eigenvector matrix `V`.
    pub fn orthonormality_defect(&self, iterations: usize) -> f64 {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6a11);
        let n = self.len();
        let mut x: Vec<C64> =
            (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let mut est: f64 = 0.0;
        for _ in 0..iterations {
            let norm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            for c in &mut x {
                *c /= norm;
            }
            let y = self.coefficients(&self.synthesize(&x));
            let d: Vec<C64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            est = est.max(d.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
            x = d;
        }
        est
    }
}

/// Bottom of the essential spectrum, `inf_k Omega(P - k) + omega(k)`.
pub fn sigma_ess(model: &DispersionModel, p: &[f64]) -> Result<f64> {
    thresholds::essential_bottom(model, p)
}

/// Isolated eigenvalue below the essential spectrum with its eigenvector.
#[derive(Clone, Debug)]
pub struct MassShell {
    pub energy: f64,
    pub state: FiberState,
}

/// Unique secular root below the band, if it lies strictly below `Sigma_ess(P)`.
pub fn mass_shell(model: &DispersionModel, grid: &MomentumGrid, p: &[f64]) -> Result<Option<MassShell>> {
    let op = assemble_fiber(model, grid, p)?;
    let sigma = sigma_ess(model, p)?;
    Ok(lowest_shell(&op, sigma))
}

/// Mass shell of an assembled operator given the essential-spectrum bottom.
pub fn lowest_shell(op: &ArrowheadFiberOperator, sigma: f64) -> Option<MassShell> {
    let dmin = op.diag.iter().copied().fold(f64::INFINITY, f64::min);
    let z2: Vec<f64> = op.coupling.iter().map(|c| c.norm_sqr()).collect();
    let coupled_min = op.diag.iter().zip(&z2).filter(|(_, &w)| w > 0.0).map(|(d, _)| *d).fold(f64::INFINITY, f64::min);
    // f(l) = l - head - sum z^2/(l - d) is increasing below the band.
    let f = |tau: f64| -> f64 {
        let l = coupled_min + tau;
        let mut s = 0.0;
        for (&d, &w) in op.diag.iter().zip(&z2) {
            if w > 0.0 {
                s += w / ((coupled_min - d) + tau);
            }
        }
        l - op.head - s
    };
    let energy = if coupled_min.is_finite() {
        let znorm: f64 = z2.iter().sum::<f64>().sqrt();
        let lo = op.head.min(coupled_min) - znorm - 1.0 - coupled_min;
        let (mut a, mut b) = (lo, 0.0);
        for _ in 0..2000 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b || b - a <= 2.0 * f64::EPSILON * a.abs().max(b.abs()) {
                break;
            }
            if f(mid) > 0.0 {
                b = mid;
            } else {
                a = mid;
            }
        }
        coupled_min + 0.5 * (a + b)
    } else {
        op.head
    };
    if !(energy < dmin && energy < sigma) {
        return None;
    }
    let vacuum = C64::new(1.0, 0.0);
    let field: Vec<C64> = op.diag.iter().zip(&op.coupling).map(|(d, c)| c / (energy - d)).collect();
    let state = FiberState { vacuum, field }.normalized().ok()?;
    Some(MassShell { energy, state })
}

/// `||(H(P) - lambda) u_n|| / ||u_n||` for a bump Weyl state of width `1/n`
/// centered on the energy shell of `lambda`.
pub fn weyl_residual(model: &DispersionModel, grid: &MomentumGrid, p: &[f64], lambda: f64, n: f64) -> Result<f64> {
    let op = assemble_fiber(model, grid, p)?;
    let sigma = sigma_ess(model, p)?;
    if lambda < sigma - 1e-12 * sigma.abs().max(1.0) {
        return Err(Error::domain(format!("lambda = {lambda} lies below Sigma_ess = {sigma}")));
    }
    let k0 = thresholds::energy_shell_point(model, p, lambda)
        .ok_or_else(|| Error::domain(format!("no momentum with fiber energy {lambda}")))?;
    weyl_residual_at(&op, &k0, lambda, n)
}

/// Weyl residual for an explicit shell point `k0`.
pub fn weyl_residual_at(op: &ArrowheadFiberOperator, k0: &[f64], lambda: f64, n: f64) -> Result<f64> {
    let grid = op.grid();
    let field = grid.sample(|k| {
        let d: Vec<f64> = k.iter().zip(k0).map(|(a, b)| n * (a - b)).collect();
        C64::new(bump(radius(&d)), 0.0)
    });
    let u = FiberState::from_field(field);
    let norm = u.norm();
    if norm == 0.0 {
        return Err(Error::domain("Weyl state is not resolved by the grid"));
    }
    let mut r = op.apply(&u)?;
    r.axpy(C64::new(-lambda, 0.0), &u);
    Ok(r.norm() / norm)
}

#[derive(Clone, Debug, Serialize)]
pub struct AtlasRow {
    pub p: Vec<f64>,
    pub sigma_ess: f64,
    /// Discrete eigenvalues strictly below `sigma_ess`.
    pub eigenvalues: Vec<f64>,
    pub thresholds: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralAtlas {
    pub rows: Vec<AtlasRow>,
}

impl SpectralAtlas {
    pub const CSV_HEADER: &'static str = "P,Sigma_ess,E0,thresholds";

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                let p = join(&r.p);
                let e0 = r.eigenvalues.first().map(|e| format!("{e:.16e}")).unwrap_or_default();
                format!("{p},{:.16e},{e0},{}", r.sigma_ess, join(&r.thresholds))
            })
            .collect()
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(";")
}

/// Essential-spectrum bottom, discrete spectrum below it, and thresholds for each `P`.
pub fn spectral_atlas(
    model: &DispersionModel,
    grid: &MomentumGrid,
    p_list: &[Vec<f64>],
    search_radius: Option<f64>,
) -> Result<SpectralAtlas> {
    let rows: Result<Vec<AtlasRow>> = p_list
        .par_iter()
        .map(|p| {
            let op = assemble_fiber(model, grid, p)?;
            let radius = search_radius.unwrap_or_else(|| thresholds::default_search_radius(model, p));
            let set: ThresholdSet = thresholds::threshold_set(model, p, radius)?;
            let sigma = sigma_ess(model, p)?;
            // Interlacing puts every other eigenvalue above min(diag) >= Sigma_ess.
            let eigenvalues = lowest_shell(&op, sigma).map(|s| vec![s.energy]).unwrap_or_default();
            Ok(AtlasRow { p: p.clone(), sigma_ess: sigma, eigenvalues, thresholds: set.energies })
        })
        .collect();
    Ok(SpectralAtlas { rows: rows? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_eigen_error(a: &EigenDecomposition, b: &EigenDecomposition) -> f64 {
        a.eigenvalues().iter().zip(b.eigenvalues()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn decoupled_spectrum_is_the_diagonal() {
        let grid = MomentumGrid::new(1, 8, 2.0).unwrap();
        let m = DispersionModel::polaron(1).decoupled();
        let op = assemble_fiber(&m, &grid, &[0.3]).unwrap();
        let e = EigenDecomposition::secular(&op).unwrap();
        let mut expect: Vec<f64> = op.diag.clone();
        expect.push(op.head);
        expect.sort_by(f64::total_cmp);
        assert_eq!(e.eigenvalues(), expect.as_slice());
        let v = e.eigenvector(0);
        assert_eq!(v.vacuum.norm(), 1.0);
    }

    #[test]
    fn three_by_three_matches_dense() {
        let grid = MomentumGrid::new(1, 4, 1.0).unwrap();
        // Pad the 3x3 example with decoupled far-away entries.
        let diag = vec![1.0, 2.0, 10.0, 11.0];
        let coupling = vec![C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::default(), C64::default()];
        let op = ArrowheadFiberOperator::from_parts(&grid, vec![0.0], 0.0, diag, coupling).unwrap();
        let s = EigenDecomposition::secular(&op).unwrap();
        let d = EigenDecomposition::dense(&op).unwrap();
        assert!(max_eigen_error(&s, &d) < 1e-12);
    }

    #[test]
    fn degenerate_multiplets_are_resolved() {
        let grid = MomentumGrid::new(1, 6, 1.0).unwrap();
        let diag = vec![1.0, 1.0, 2.0, 2.0, 2.0, 3.0];
        let coupling: Vec<C64> = [0.3, -0.4, 0.1, 0.2, 0.25, 0.05].iter().map(|&v| C64::new(v, 0.1 * v)).collect();
        let op = ArrowheadFiberOperator::from_parts(&grid, vec![0.0], 1.5, diag, coupling).unwrap();
        let s = EigenDecomposition::secular(&op).unwrap();
        let d = EigenDecomposition::dense(&op).unwrap();
        assert!(max_eigen_error(&s, &d) < 1e-13);
        assert!(s.orthonormality_defect(30) < 1e-12);
        for i in 0..s.len() {
            let v = s.eigenvector(i);
            let mut r = op.apply(&v).unwrap();
            r.axpy(C64::new(-s.eigenvalues()[i], 0.0), &v);
            assert!(r.norm() < 1e-13, "{i}: {}", r.norm());
        }
    }

    #[test]
    fn coefficients_and_synthesis_are_inverse() {
        let grid = MomentumGrid::new(1, 64, 8.0).unwrap();
        let op = assemble_fiber(&DispersionModel::nelson(1), &grid, &[0.7]).unwrap();
        let e = EigenDecomposition::secular(&op).unwrap();
        let psi = FiberState::new(C64::new(0.1, 0.3), grid.wavepacket(&[1.0], 0.4, &[0.0]));
        let back = e.synthesize(&e.coefficients(&psi));
        assert!(back.sub(&psi).norm() < 1e-13);
    }

    #[test]
    fn shell_is_the_lowest_eigenvalue() {
        let grid = MomentumGrid::new(1, 256, 8.0).unwrap();
        let m = DispersionModel::polaron(1);
        let op = assemble_fiber(&m, &grid, &[0.5]).unwrap();
        let shell = lowest_shell(&op, 1.0).unwrap();
        let e = EigenDecomposition::secular(&op).unwrap();
        assert!((shell.energy - e.eigenvalues()[0]).abs() < 1e-12);
        let overlap = shell.state.inner(&e.eigenvector(0)).norm();
        assert!((overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn decoupled_shell_is_the_head() {
        let grid = MomentumGrid::new(1, 64, 8.0).unwrap();
        let m = DispersionModel::polaron(1).decoupled();
        let shell = mass_shell(&m, &grid, &[0.5]).unwrap().unwrap();
        assert_eq!(shell.energy, 0.125);
        assert_eq!(shell.state.vacuum, C64::new(1.0, 0.0));
        // Omega(P) above the band bottom: no shell.
        assert!(mass_shell(&m, &grid, &[3.0]).unwrap().is_none());
    }

    #[test]
    fn weyl_below_the_band_is_a_domain_error() {
        let grid = MomentumGrid::new(1, 64, 8.0).unwrap();
        let m = DispersionModel::polaron(1);
        assert!(matches!(weyl_residual(&m, &grid, &[0.0], 0.5, 4.0), Err(Error::Domain(_))));
    }
}
