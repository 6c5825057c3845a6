use fiberscat::model::{Coupling, DispersionModel, MatterDispersion};
use fiberscat::spectral::sigma_ess;
use fiberscat::thresholds::{default_search_radius, energy_shell_point, threshold_set, threshold_set_with_scan};
use proptest::prelude::*;

/// Minimum of the fiber energy along the line through `P` by dense sampling and
/// golden-section refinement; the minimum of a radial-sum energy lies on that line.
fn brute_force_bottom(m: &DispersionModel, p: &[f64]) -> f64 {
    let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let unit: Vec<f64> = if pn > 0.0 {
        p.iter().map(|v| v / pn).collect()
    } else {
        let mut e = vec![0.0; p.len()];
        e[0] = 1.0;
        e
    };
    let energy = |t: f64| {
        let k: Vec<f64> = unit.iter().map(|u| t * u).collect();
        m.fiber_energy(p, &k)
    };
    let r = 4.0 * pn + 30.0;
    let n = 200_000;
    let (mut best_t, mut best) = (0.0, f64::INFINITY);
    for i in 0..=n {
        let t = -r + 2.0 * r * i as f64 / n as f64;
        let e = energy(t);
        if e < best {
            best = e;
            best_t = t;
        }
    }
    let h = 2.0 * r / n as f64;
    let (mut a, mut b) = (best_t - h, best_t + h);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if energy(c) < energy(d) {
            b = d
        } else {
            a = c
        }
    }
    best.min(energy(0.5 * (a + b)))
}

#[test]
fn bottom_of_thresholds_is_the_essential_bottom() {
    for name in DispersionModel::PRESETS {
        let m = DispersionModel::preset(name, 1).unwrap();
        for i in 0..12 {
            let p = [-3.0 + 0.5 * i as f64];
            let set = threshold_set(&m, &p, default_search_radius(&m, &p)).unwrap();
            let sigma = sigma_ess(&m, &p).unwrap();
            let oracle = brute_force_bottom(&m, &p);
            assert!((set.energies[0] - sigma).abs() < 1e-8, "{name} P={p:?}");
            assert!((sigma - oracle).abs() < 1e-9, "{name} P={p:?}: {sigma} vs {oracle}");
        }
    }
}

#[test]
fn closed_form_bottoms() {
    // Flat field: the matter energy can be set to its minimum.
    let m = DispersionModel::polaron(2);
    assert!((sigma_ess(&m, &[1.3, -0.4]).unwrap() - 1.0).abs() < 1e-12);
    // Equal relativistic masses: the energy is minimized at k = P/2.
    let m = DispersionModel::relativistic(1);
    for p in [0.0, 0.7, 3.0] {
        let expected = 2.0 * (p * p / 4.0 + 1.0f64).sqrt();
        assert!((sigma_ess(&m, &[p]).unwrap() - expected).abs() < 1e-10);
    }
}

#[test]
fn flat_matter_band_has_a_single_threshold() {
    let m = DispersionModel {
        matter: MatterDispersion::Constant { value: 0.5 },
        ..DispersionModel::nelson(1).with_coupling(Coupling::Gaussian { g: 0.1, sigma: 1.0 })
    };
    let set = threshold_set(&m, &[2.0], 30.0).unwrap();
    assert_eq!(set.energies.len(), 1);
    assert!((set.energies[0] - 1.5).abs() < 1e-12);
}

#[test]
fn root_count_is_stable_under_finer_scans() {
    for name in DispersionModel::PRESETS {
        let m = DispersionModel::preset(name, 1).unwrap();
        for p in [0.0, 0.9, 2.5] {
            let r = default_search_radius(&m, &[p]);
            let coarse = threshold_set_with_scan(&m, &[p], r, 4096).unwrap();
            let fine = threshold_set_with_scan(&m, &[p], r, 8192).unwrap();
            assert_eq!(coarse.energies.len(), fine.energies.len());
            for (a, b) in coarse.energies.iter().zip(&fine.energies) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn energy_shell_points_lie_on_the_shell() {
    let m = DispersionModel::nelson(1);
    let p = [1.0];
    let sigma = sigma_ess(&m, &p).unwrap();
    for lambda in [sigma + 0.1, sigma + 1.0, sigma + 5.0] {
        let k = energy_shell_point(&m, &p, lambda).unwrap();
        assert!((m.fiber_energy(&p, &k) - lambda).abs() < 1e-9);
    }
    assert!(energy_shell_point(&m, &p, sigma - 0.5).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn thresholds_are_rotation_invariant(p in 0.0f64..3.0, angle in 0.0f64..6.3, preset in 0usize..3) {
        let m = DispersionModel::preset(DispersionModel::PRESETS[preset], 2).unwrap();
        let a = [p, 0.0];
        let b = [p * angle.cos(), p * angle.sin()];
        let r = default_search_radius(&m, &a);
        let sa = threshold_set(&m, &a, r).unwrap();
        let sb = threshold_set(&m, &b, r).unwrap();
        prop_assert_eq!(sa.energies.len(), sb.energies.len());
        for (x, y) in sa.energies.iter().zip(&sb.energies) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
        }
        prop_assert!((sigma_ess(&m, &a).unwrap() - sigma_ess(&m, &b).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn witnesses_are_critical_points(p in -3.0f64..3.0, preset in 0usize..3) {
        let m = DispersionModel::preset(DispersionModel::PRESETS[preset], 1).unwrap();
        let set = threshold_set(&m, &[p], default_search_radius(&m, &[p])).unwrap();
        for (e, w) in set.energies.iter().zip(&set.witnesses) {
            prop_assert!((m.fiber_energy(&[p], &w.momentum) - e).abs() < 1e-10);
            let v = m.velocity(&[p], &w.momentum);
            prop_assert!(v[0].abs() < 1e-8, "velocity {:?} at {:?}", v, w);
        }
    }
}
