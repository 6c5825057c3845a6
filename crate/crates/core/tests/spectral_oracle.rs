mod common;

use fiberscat::fiber::assemble_fiber;
use fiberscat::model::{Coupling, DispersionModel};
use fiberscat::spectral::{lowest_shell, mass_shell, sigma_ess, EigenDecomposition, Method};
use fiberscat::{MomentumGrid, C64};
use proptest::prelude::*;

fn compare_with_dense(model: &DispersionModel, grid: &MomentumGrid, p: &[f64]) -> (f64, f64) {
    let op = assemble_fiber(model, grid, p).unwrap();
    let decomp = EigenDecomposition::secular(&op).unwrap();
    let (reference, _) = common::dense_eigen(&op);
    let scale = op.scale();
    let value_err = decomp.eigenvalues().iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    let mut residual: f64 = 0.0;
    for i in 0..decomp.len() {
        let v = decomp.eigenvector(i);
        let mut r = op.apply(&v).unwrap();
        r.axpy(C64::new(-decomp.eigenvalues()[i], 0.0), &v);
        residual = residual.max(r.norm() / scale);
    }
    (value_err, residual)
}

#[test]
fn secular_matches_dense_in_one_dimension() {
    let mut rng = common::rng(11);
    for _ in 0..6 {
        let (model, kmax, p) = common::random_gaussian_model(&mut rng);
        let grid = MomentumGrid::new(1, 128, kmax).unwrap();
        let (ev, res) = compare_with_dense(&model, &grid, &[p]);
        assert!(ev < 1e-12 && res < 1e-10, "{model:?} P={p}: {ev:e} {res:e}");
    }
}

#[test]
fn rotation_multiplets_in_two_and_three_dimensions() {
    // P = 0 makes every diagonal value appear on a whole ring of grid points.
    for (nu, n) in [(2, 12), (3, 6)] {
        let model = DispersionModel::nelson(nu).with_coupling(Coupling::Gaussian { g: 0.7, sigma: 1.0 });
        let grid = MomentumGrid::new(nu, n, 7.0).unwrap();
        for p in [vec![0.0; nu], {
            let mut v = vec![0.0; nu];
            v[nu - 1] = 0.4;
            v
        }] {
            let (ev, res) = compare_with_dense(&model, &grid, &p);
            assert!(ev < 1e-12 && res < 1e-10, "nu={nu} P={p:?}: {ev:e} {res:e}");
        }
    }
}

#[test]
fn orthonormal_eigenbasis() {
    let model = DispersionModel::relativistic(2);
    let grid = MomentumGrid::new(2, 16, 7.0).unwrap();
    let op = assemble_fiber(&model, &grid, &[0.3, -0.1]).unwrap();
    let decomp = EigenDecomposition::secular(&op).unwrap();
    assert_eq!(decomp.method(), Method::Secular);
    assert!(decomp.orthonormality_defect(30) < 1e-12);
    assert!(decomp.interlaces(&op, 1e-12));
}

#[test]
fn zero_coupling_returns_the_diagonal() {
    let model = DispersionModel::polaron(1).decoupled();
    let grid = MomentumGrid::new(1, 64, 4.0).unwrap();
    let op = assemble_fiber(&model, &grid, &[0.2]).unwrap();
    let decomp = EigenDecomposition::secular(&op).unwrap();
    let mut expected: Vec<f64> = op.diag.clone();
    expected.push(op.head);
    expected.sort_by(f64::total_cmp);
    assert_eq!(decomp.eigenvalues(), &expected[..]);
}

#[test]
fn bound_state_sits_below_the_continuum() {
    let model = DispersionModel::nelson(1);
    let grid = MomentumGrid::new(1, 512, 8.0).unwrap();
    for p in [0.0, 0.5, 1.0] {
        let shell = mass_shell(&model, &grid, &[p]).unwrap().expect("bound state");
        let sigma = sigma_ess(&model, &[p]).unwrap();
        assert!(shell.energy < sigma && shell.energy < p * p / 2.0);
        let op = assemble_fiber(&model, &grid, &[p]).unwrap();
        let (reference, _) = common::dense_eigen(&op);
        assert!((shell.energy - reference[0]).abs() < 1e-12);
        let again = lowest_shell(&op, sigma).unwrap();
        assert!((again.state.inner(&shell.state).norm() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fiber_operator_is_hermitian(g in 0.0f64..2.0, sigma in 0.7f64..2.0, p in -2.0f64..2.0, seed in 0u64..1000) {
        let model = DispersionModel::relativistic(1).with_coupling(Coupling::Gaussian { g, sigma });
        let grid = MomentumGrid::new(1, 64, 7.0 / sigma).unwrap();
        let op = assemble_fiber(&model, &grid, &[p]).unwrap();
        let mut rng = common::rng(seed);
        let a = common::random_state(&mut rng, grid.len());
        let b = common::random_state(&mut rng, grid.len());
        let lhs = a.inner(&op.apply(&b).unwrap());
        let rhs = b.inner(&op.apply(&a).unwrap()).conj();
        prop_assert!((lhs - rhs).norm() <= 1e-13 * op.scale());
    }

    #[test]
    fn spectral_synthesis_round_trips(seed in 0u64..1000, p in -1.0f64..1.0) {
        let model = DispersionModel::polaron(1);
        let grid = MomentumGrid::new(1, 64, 7.0).unwrap();
        let op = assemble_fiber(&model, &grid, &[p]).unwrap();
        let decomp = EigenDecomposition::secular(&op).unwrap();
        let psi = common::random_state(&mut common::rng(seed), grid.len());
        let back = decomp.synthesize(&decomp.coefficients(&psi));
        prop_assert!(back.sub(&psi).norm() < 1e-12);
    }
}
