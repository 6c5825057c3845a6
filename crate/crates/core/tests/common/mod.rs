#![allow(dead_code)]

use faer::{c64, Mat, Side};
use fiberscat::fiber::ArrowheadFiberOperator;
use fiberscat::model::{Coupling, DispersionModel};
use fiberscat::{FiberState, C64};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The arrowhead matrix written out entry by entry.
pub fn dense(op: &ArrowheadFiberOperator) -> Mat<c64> {
    let n = op.diag.len() + 1;
    Mat::from_fn(n, n, |r, s| match (r, s) {
        (0, 0) => c64::new(op.head, 0.0),
        (0, s) => op.coupling[s - 1].conj(),
        (r, 0) => op.coupling[r - 1],
        (r, s) if r == s => c64::new(op.diag[r - 1], 0.0),
        _ => c64::new(0.0, 0.0),
    })
}

/// Dense Hermitian eigendecomposition; eigenvalues ascending.
pub fn dense_eigen(op: &ArrowheadFiberOperator) -> (Vec<f64>, Mat<c64>) {
    let h = dense(op);
    let evd = h.self_adjoint_eigen(Side::Lower).expect("dense eigensolver converges");
    let s = evd.S();
    let values = (0..h.nrows()).map(|i| s[i].re).collect();
    (values, evd.U().to_owned())
}

pub fn to_column(psi: &FiberState) -> Mat<c64> {
    Mat::from_fn(psi.field.len() + 1, 1, |r, _| if r == 0 { psi.vacuum } else { psi.field[r - 1] })
}

pub fn from_column(m: &Mat<c64>) -> FiberState {
    FiberState::new(m[(0, 0)], (1..m.nrows()).map(|r| m[(r, 0)]).collect())
}

fn one_norm(a: &Mat<c64>) -> f64 {
    (0..a.ncols()).map(|c| (0..a.nrows()).map(|r| a[(r, c)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(-itH)` by scaling and squaring of a truncated Taylor series.
pub fn expm_oracle(h: &Mat<c64>, t: f64) -> Mat<c64> {
    let n = h.nrows();
    let a = Mat::from_fn(n, n, |r, s| h[(r, s)] * c64::new(0.0, -t));
    let mut squarings = 0;
    let mut scale = 1.0;
    while one_norm(&a) * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = Mat::from_fn(n, n, |r, s| a[(r, s)] * scale);
    let mut result = Mat::<c64>::identity(n, n);
    let mut term = Mat::<c64>::identity(n, n);
    for k in 1..=20 {
        term = &term * &a;
        let inv = 1.0 / k as f64;
        term = Mat::from_fn(n, n, |r, s| term[(r, s)] * inv);
        result = &result + &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// A Gaussian-coupled model with random parameters, a box wide enough for the
/// coupling tail, and a random total momentum.
pub fn random_gaussian_model(rng: &mut ChaCha8Rng) -> (DispersionModel, f64, f64) {
    let preset = DispersionModel::PRESETS[rng.random_range(0..3)];
    let g = rng.random_range(0.05..1.0);
    let sigma = rng.random_range(0.6..2.0);
    let model = DispersionModel::preset(preset, 1).unwrap().with_coupling(Coupling::Gaussian { g, sigma });
    let kmax = 6.5 / sigma;
    let p = rng.random_range(-1.5..1.5);
    (model, kmax, p)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_state(rng: &mut ChaCha8Rng, len: usize) -> FiberState {
    let mut c = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let vacuum = c();
    let field = (0..len).map(|_| c()).collect();
    FiberState::new(vacuum, field).normalized().unwrap()
}
