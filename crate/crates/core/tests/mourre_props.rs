mod common;

use fiberscat::fiber::assemble_fiber;
use fiberscat::model::{Coupling, DispersionModel};
use fiberscat::mourre::{
    assemble_commutator, assemble_conjugate, closed_form_commutator, direct_commutator_apply, mourre_constant,
    probe_states, shell_virial,
};
use fiberscat::spectral::sigma_ess;
use fiberscat::{MomentumGrid, C64};
use proptest::prelude::*;

#[test]
fn conjugate_operator_is_symmetric() {
    let m = DispersionModel::nelson(2);
    let grid = MomentumGrid::new(2, 12, 6.0).unwrap();
    let a = assemble_conjugate(&m, &grid, &[0.4, 0.1]).unwrap().to_dense().unwrap();
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for s in 0..n {
            worst = worst.max((a[(r, s)] - a[(s, r)].conj()).norm());
        }
    }
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn closed_form_agrees_with_direct_commutator_on_probes() {
    // Relativistic dispersions have position kernels decaying like exp(-m|x|), so
    // the periodic box must satisfy exp(-m L / 2) << 1e-10.
    for (nu, n, kmax) in [(1usize, 256usize, 8.0), (2, 128, 6.0)] {
        for name in DispersionModel::PRESETS {
            let m = DispersionModel::preset(name, nu).unwrap();
            let grid = MomentumGrid::new(nu, n, kmax).unwrap();
            let mut p = vec![0.0; nu];
            p[0] = 0.6;
            let op = assemble_fiber(&m, &grid, &p).unwrap();
            let conj = assemble_conjugate(&m, &grid, &p).unwrap();
            let closed = closed_form_commutator(&op, &m, &conj).unwrap();
            for q in probe_states(&grid) {
                let diff = closed.apply(&q).unwrap().sub(&direct_commutator_apply(&op, &conj, &q).unwrap());
                assert!(diff.norm() <= 1e-10 * closed.scale, "{name} nu={nu}: {:e}", diff.norm() / closed.scale);
            }
        }
    }
}

#[test]
fn decoupled_commutator_is_the_squared_velocity() {
    let m = DispersionModel::relativistic(1).decoupled();
    let grid = MomentumGrid::new(1, 128, 5.0).unwrap();
    let p = [0.8];
    let c = assemble_commutator(&m, &grid, &p, &p).unwrap();
    for (j, k) in grid.momenta().enumerate() {
        let v = m.velocity(&p, k)[0];
        assert!((c.diag[j] - v * v).abs() < 1e-14);
    }
    assert!(c.column.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn virial_on_the_mass_shell() {
    for name in DispersionModel::PRESETS {
        let m = DispersionModel::preset(name, 1).unwrap();
        let grid = MomentumGrid::new(1, 512, 8.0).unwrap();
        let (v, scale) = shell_virial(&m, &grid, &[0.5]).unwrap().expect("bound state");
        assert!(v <= 1e-8 * scale, "{name}: {v:e}");
    }
}

#[test]
fn mourre_constant_is_positive_off_thresholds() {
    let m = DispersionModel::nelson(1).with_coupling(Coupling::Gaussian { g: 0.5, sigma: 1.0 });
    let grid = MomentumGrid::new(1, 512, 8.0).unwrap();
    let p = [0.3];
    let sigma = sigma_ess(&m, &p).unwrap();
    let est = mourre_constant(&m, &grid, &p, &p, sigma + 1.0, 0.1).unwrap();
    assert!(est.c_est > 0.0 && est.thresholds_in_window.is_empty() && est.n_window > 0);
    // A window straddling the threshold contains nearly stationary states.
    let near = mourre_constant(&m, &grid, &p, &p, sigma + 0.02, 0.05).unwrap();
    assert!(near.c_est < est.c_est / 10.0);
    assert_eq!(near.thresholds_in_window.len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn commutator_expectations_are_real(seed in 0u64..1000, p in -1.0f64..1.0) {
        let m = DispersionModel::polaron(1);
        let grid = MomentumGrid::new(1, 64, 8.0).unwrap();
        let op = assemble_fiber(&m, &grid, &[p]).unwrap();
        let conj = assemble_conjugate(&m, &grid, &[p]).unwrap();
        let c = closed_form_commutator(&op, &m, &conj).unwrap();
        let psi = common::random_state(&mut common::rng(seed), grid.len());
        let z: C64 = psi.inner(&c.apply(&psi).unwrap());
        prop_assert!(z.im.abs() <= 1e-13 * c.scale);
        prop_assert!((z.re - c.expectation(&psi).unwrap()).abs() <= 1e-13 * c.scale);
    }
}
