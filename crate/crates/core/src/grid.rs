//! Uniform momentum lattice, its dual position box and states on `C + L2`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid parameters as they appear in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nu: usize,
    pub n: usize,
    pub k_max: f64,
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// `N^nu` momentum points `k_j = -k_max + j dk` (lexicographic, last axis
/// fastest) with dual positions `x_l = -L/2 + l dx`.
///
/// The unitary transform between the two pictures is
/// `phi(x_l) = N^(-nu/2) sum_j exp(i k_j x_l) c_j` per axis, the discrete
/// analogue of `(2 pi)^(-nu/2) int exp(ikx) f(k) dk` for orthonormal
/// coefficients `c_j = sqrt(w) f(k_j)`.
#[derive(Clone)]
pub struct MomentumGrid {
    spec: GridSpec,
    dk: f64,
    dx: f64,
    box_len: f64,
    len: usize,
    momenta: Arc<Vec<f64>>,
    positions: Arc<Vec<f64>>,
    /// `(-1)^(sum of axis indices)`, shared by both pictures.
    parity: Arc<Vec<bool>>,
    plans: Arc<Plans>,
}

impl fmt::Debug for MomentumGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MomentumGrid")
            .field("nu", &self.spec.nu)
            .field("n", &self.spec.n)
            .field("k_max", &self.spec.k_max)
            .finish()
    }
}

impl PartialEq for MomentumGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl MomentumGrid {
    pub fn new(nu: usize, n: usize, k_max: f64) -> Result<Self> {
        if !(1..=3).contains(&nu) {
            return Err(Error::config(format!("grid dimension must be 1, 2 or 3, got {nu}")));
        }
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::config(format!("grid.n must be even and at least 4, got {n}")));
        }
        if !(k_max.is_finite() && k_max > 0.0) {
            return Err(Error::config(format!("grid.kmax must be positive, got {k_max}")));
        }
        let len = n
            .checked_pow(nu as u32)
            .filter(|&l| l <= 1 << 26)
            .ok_or_else(|| Error::config(format!("grid with {n}^{nu} points is too large")))?;
        let dk = 2.0 * k_max / n as f64;
        let box_len = 2.0 * PI / dk;
        let dx = box_len / n as f64;
        let mut momenta = Vec::with_capacity(len * nu);
        let mut positions = Vec::with_capacity(len * nu);
        let mut parity = Vec::with_capacity(len);
        for flat in 0..len {
            let mut rest = flat;
            let mut digits = vec![0usize; nu];
            for a in (0..nu).rev() {
                digits[a] = rest % n;
                rest /= n;
            }
            momenta.extend(digits.iter().map(|&d| -k_max + d as f64 * dk));
            positions.extend(digits.iter().map(|&d| -0.5 * box_len + d as f64 * dx));
            parity.push(digits.iter().sum::<usize>() % 2 == 1);
        }
        let mut planner = FftPlanner::new();
        let plans = Plans { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) };
        Ok(Self {
            spec: GridSpec { nu, n, k_max },
            dk,
            dx,
            box_len,
            len,
            momenta: Arc::new(momenta),
            positions: Arc::new(positions),
            parity: Arc::new(parity),
            plans: Arc::new(plans),
        })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        Self::new(spec.nu, spec.n, spec.k_max)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn nu(&self) -> usize {
        self.spec.nu
    }

    pub fn n_per_axis(&self) -> usize {
        self.spec.n
    }

    pub fn k_max(&self) -> f64 {
        self.spec.k_max
    }

    pub fn dk(&self) -> f64 {
        self.dk
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Side of the periodic position box, `2 pi / dk`.
    pub fn box_len(&self) -> f64 {
        self.box_len
    }

    /// Quadrature weight `dk^nu`.
    pub fn weight(&self) -> f64 {
        self.dk.powi(self.spec.nu as i32)
    }

    /// Position-space cell volume `dx^nu`.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.spec.nu as i32)
    }

    /// Number of grid points, `N^nu`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn momentum(&self, j: usize) -> &[f64] {
        let nu = self.spec.nu;
        &self.momenta[j * nu..(j + 1) * nu]
    }

    pub fn position(&self, l: usize) -> &[f64] {
        let nu = self.spec.nu;
        &self.positions[l * nu..(l + 1) * nu]
    }

    pub fn momenta(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.momenta.chunks_exact(self.spec.nu)
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.positions.chunks_exact(self.spec.nu)
    }

    /// Index of the grid point nearest to `k`, if `k` lies inside the lattice.
    pub fn nearest_index(&self, k: &[f64]) -> Option<usize> {
        let n = self.spec.n as i64;
        let mut flat = 0usize;
        for &c in k {
            let i = ((c + self.spec.k_max) / self.dk).round() as i64;
            if !(0..n).contains(&i) {
                return None;
            }
            flat = flat * self.spec.n + i as usize;
        }
        Some(flat)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len {
            return Err(Error::Dimension { expected: self.len, got: len });
        }
        Ok(())
    }

    fn transform(&self, data: &mut [C64], to_position: bool) {
        let (n, nu) = (self.spec.n, self.spec.nu);
        let plan = if to_position { &self.plans.inverse } else { &self.plans.forward };
        for (v, &odd) in data.iter_mut().zip(self.parity.iter()) {
            if odd {
                *v = -*v;
            }
        }
        let mut scratch = vec![C64::default(); plan.get_inplace_scratch_len()];
        let mut line = vec![C64::default(); n];
        for axis in 0..nu {
            let stride = n.pow((nu - 1 - axis) as u32);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = stride * n;
            for outer in (0..self.len).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (i, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + i * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, slot) in line.iter().enumerate() {
                        data[base + i * stride] = *slot;
                    }
                }
            }
        }
        // i^N per axis is real: +1 when N = 0 mod 4, -1 when N = 2 mod 4.
        let axis_phase: f64 = if n % 4 == 0 { 1.0 } else { -1.0 };
        let scale = axis_phase.powi(nu as i32) / (n as f64).powf(0.5 * nu as f64);
        for (v, &odd) in data.iter_mut().zip(self.parity.iter()) {
            *v *= if odd { -scale } else { scale };
        }
    }

    /// Orthonormal momentum coefficients to position-space coefficients (unitary).
    pub fn to_position(&self, coeffs: &[C64]) -> Result<Vec<C64>> {
        self.check_len(coeffs.len())?;
        let mut out = coeffs.to_vec();
        self.transform(&mut out, true);
        Ok(out)
    }

    /// Inverse of [`Self::to_position`].
    pub fn to_momentum(&self, coeffs: &[C64]) -> Result<Vec<C64>> {
        self.check_len(coeffs.len())?;
        let mut out = coeffs.to_vec();
        self.transform(&mut out, false);
        Ok(out)
    }

    pub fn to_position_in_place(&self, coeffs: &mut [C64]) -> Result<()> {
        self.check_len(coeffs.len())?;
        self.transform(coeffs, true);
        Ok(())
    }

    pub fn to_momentum_in_place(&self, coeffs: &mut [C64]) -> Result<()> {
        self.check_len(coeffs.len())?;
        self.transform(coeffs, false);
        Ok(())
    }

    /// Multiplies the field by `f(x)` in the position picture.
    pub fn multiply_in_position(&self, coeffs: &[C64], f: impl Fn(&[f64]) -> f64) -> Result<Vec<C64>> {
        let mut pos = self.to_position(coeffs)?;
        for (v, x) in pos.iter_mut().zip(self.positions()) {
            *v *= f(x);
        }
        self.to_momentum_in_place(&mut pos)?;
        Ok(pos)
    }

    /// Orthonormal coefficients `sqrt(w) f(k_j)` of a momentum amplitude.
    pub fn sample(&self, f: impl Fn(&[f64]) -> C64) -> Vec<C64> {
        let sw = self.weight().sqrt();
        self.momenta().map(|k| sw * f(k)).collect()
    }

    /// Normalized Gaussian wavepacket with momentum center `k0`, momentum
    /// standard deviation `width` and position center `x0`.
    pub fn wavepacket(&self, k0: &[f64], width: f64, x0: &[f64]) -> Vec<C64> {
        let mut v = self.sample(|k| {
            let mut d2 = 0.0;
            let mut phase = 0.0;
            for a in 0..k.len() {
                d2 += (k[a] - k0[a]).powi(2);
                phase -= k[a] * x0[a];
            }
            C64::from_polar((-d2 / (4.0 * width * width)).exp(), phase)
        });
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for c in &mut v {
                *c /= norm;
            }
        }
        v
    }

    /// Mass of a field vector in `|x|_inf > radius` (position picture).
    pub fn outer_mass(&self, coeffs: &[C64], radius: f64) -> Result<f64> {
        let pos = self.to_position(coeffs)?;
        Ok(pos
            .iter()
            .zip(self.positions())
            .filter(|(_, x)| x.iter().any(|c| c.abs() > radius))
            .map(|(v, _)| v.norm_sqr())
            .sum())
    }
}

/// Element of `C + L2`: vacuum amplitude plus field coefficients.
///
/// Field entries are orthonormal coefficients `c_j = sqrt(w) u(k_j)` of the
/// momentum amplitude `u`, so plain Euclidean algebra is the Hilbert-space
/// algebra; `amplitude(j)` recovers `u(k_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberState {
    pub vacuum: C64,
    pub field: Vec<C64>,
}

impl FiberState {
    pub fn new(vacuum: C64, field: Vec<C64>) -> Self {
        Self { vacuum, field }
    }

    pub fn zeros(len: usize) -> Self {
        Self { vacuum: C64::default(), field: vec![C64::default(); len] }
    }

    pub fn vacuum_only(len: usize) -> Self {
        Self { vacuum: C64::new(1.0, 0.0), field: vec![C64::default(); len] }
    }

    pub fn from_field(field: Vec<C64>) -> Self {
        Self { vacuum: C64::default(), field }
    }

    /// Builds the state from a momentum amplitude sampled on `grid`.
    pub fn from_amplitude(grid: &MomentumGrid, vacuum: C64, f: impl Fn(&[f64]) -> C64) -> Self {
        Self { vacuum, field: grid.sample(f) }
    }

    pub fn amplitude(&self, grid: &MomentumGrid, j: usize) -> C64 {
        self.field[j] / grid.weight().sqrt()
    }

    /// Total dimension `1 + N^nu`.
    pub fn dim(&self) -> usize {
        1 + self.field.len()
    }

    pub fn field_norm_sqr(&self) -> f64 {
        self.field.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `|vacuum|^2 + w sum |u(k_j)|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.vacuum.norm_sqr() + self.field_norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self, other>`, antilinear in `self`.
    pub fn inner(&self, other: &FiberState) -> C64 {
        self.vacuum.conj() * other.vacuum + self.field.iter().zip(&other.field).map(|(a, b)| a.conj() * b).sum::<C64>()
    }

    pub fn scale(&mut self, a: C64) {
        self.vacuum *= a;
        for c in &mut self.field {
            *c *= a;
        }
    }

    /// `self += a other`.
    pub fn axpy(&mut self, a: C64, other: &FiberState) {
        self.vacuum += a * other.vacuum;
        for (c, o) in self.field.iter_mut().zip(&other.field) {
            *c += a * o;
        }
    }

    pub fn sub(&self, other: &FiberState) -> FiberState {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other);
        out
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::domain("cannot normalize a zero state"));
        }
        self.scale(C64::new(1.0 / n, 0.0));
        Ok(self)
    }

    /// Flat layout: vacuum `(re, im)`, then every field point `(re, im)`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.dim());
        out.extend([self.vacuum.re, self.vacuum.im]);
        for c in &self.field {
            out.extend([c.re, c.im]);
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() < 2 || !flat.len().is_multiple_of(2) {
            return Err(Error::domain(format!("flat state length {} is not 2(1+M)", flat.len())));
        }
        let vacuum = C64::new(flat[0], flat[1]);
        let field = flat[2..].chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        Ok(Self { vacuum, field })
    }

    /// One `re,im` line per component, vacuum first.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{:e},{:e}", self.vacuum.re, self.vacuum.im)?;
        for c in &self.field {
            writeln!(w, "{:e},{:e}", c.re, c.im)?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut flat = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            for part in line.split(',') {
                flat.push(
                    part.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::config(format!("bad number `{part}` in state file: {e}")))?,
                );
            }
        }
        Self::from_flat(&flat)
    }

    /// Little-endian `f64` sequence in the flat layout.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        for v in self.to_flat() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        if !bytes.len().is_multiple_of(8) {
            return Err(Error::domain("binary state length is not a multiple of 8"));
        }
        let flat: Vec<f64> =
            bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk"))).collect();
        Self::from_flat(&flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};

    fn random_field(len: usize, seed: u64) -> Vec<C64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn one_dimensional_geometry() {
        let g = MomentumGrid::new(1, 8, 4.0).unwrap();
        assert_eq!(g.dk(), 1.0);
        assert!((g.box_len() - 2.0 * PI).abs() < 1e-15);
        assert!((g.dx() - 2.0 * PI / 8.0).abs() < 1e-15);
        assert!((g.position(0)[0] + PI).abs() < 1e-15);
        assert!((g.position(7)[0] - (PI - PI / 4.0)).abs() < 1e-15);
        assert_eq!(g.momentum(0), &[-4.0]);
    }

    #[test]
    fn two_dimensional_counts() {
        let g = MomentumGrid::new(2, 4, 2.0).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.weight(), 1.0);
        assert_eq!(g.momentum(1), &[-2.0, -1.0]);
    }

    #[test]
    fn rejects_odd_or_tiny_grids() {
        assert!(matches!(MomentumGrid::new(1, 7, 1.0), Err(Error::Config(_))));
        assert!(matches!(MomentumGrid::new(1, 2, 1.0), Err(Error::Config(_))));
        assert!(matches!(MomentumGrid::new(1, 8, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn round_trip_is_identity() {
        for (nu, n) in [(1, 64), (2, 16), (3, 6)] {
            let g = MomentumGrid::new(nu, n, 3.0).unwrap();
            let v = random_field(g.len(), 7);
            let back = g.to_momentum(&g.to_position(&v).unwrap()).unwrap();
            let err = v.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "nu={nu}: {err}");
        }
    }

    #[test]
    fn transform_matches_direct_sum() {
        let g = MomentumGrid::new(1, 10, 2.5).unwrap();
        let v = random_field(g.len(), 3);
        let fast = g.to_position(&v).unwrap();
        for l in 0..g.len() {
            let x = g.position(l)[0];
            let direct: C64 = (0..g.len()).map(|j| v[j] * C64::from_polar(1.0, g.momentum(j)[0] * x)).sum::<C64>()
                / (g.len() as f64).sqrt();
            assert!((direct - fast[l]).norm() < 1e-12);
        }
    }

    #[test]
    fn gaussian_transforms_to_gaussian() {
        // u(k) = pi^(-1/4) exp(-k^2/2) has position amplitude pi^(-1/4) exp(-x^2/2).
        let g = MomentumGrid::new(1, 128, 12.0).unwrap();
        let c = g.sample(|k| C64::new(PI.powf(-0.25) * (-0.5 * k[0] * k[0]).exp(), 0.0));
        let pos = g.to_position(&c).unwrap();
        let sdx = g.dx().sqrt();
        for (l, x) in g.positions().enumerate() {
            let expect = PI.powf(-0.25) * (-0.5 * x[0] * x[0]).exp();
            assert!((pos[l] / sdx - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn wavepacket_is_centered() {
        let g = MomentumGrid::new(1, 256, 8.0).unwrap();
        let c = g.wavepacket(&[1.0], 0.5, &[3.0]);
        let pos = g.to_position(&c).unwrap();
        let mean: f64 = pos.iter().zip(g.positions()).map(|(v, x)| v.norm_sqr() * x[0]).sum();
        assert!((mean - 3.0).abs() < 1e-8);
    }

    #[test]
    fn flat_layouts_round_trip() {
        let s = FiberState::new(C64::new(0.5, -0.25), random_field(9, 1));
        assert_eq!(FiberState::from_flat(&s.to_flat()).unwrap(), s);
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(FiberState::read_binary(&buf).unwrap(), s);
        let mut text = Vec::new();
        s.write_csv(&mut text).unwrap();
        assert_eq!(FiberState::read_csv(text.as_slice()).unwrap(), s);
    }
}
