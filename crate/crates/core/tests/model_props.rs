use fiberscat::model::{Component, Coupling, DispersionModel, Evaluation, Order};
use proptest::prelude::*;

fn rotation(a: f64, b: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let rz = [[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]];
    let rx = [[1.0, 0.0, 0.0], [0.0, cb, -sb], [0.0, sb, cb]];
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| rz[i][k] * rx[k][j]).sum();
        }
    }
    out
}

fn apply(r: &[[f64; 3]; 3], x: &[f64]) -> Vec<f64> {
    (0..3).map(|i| (0..3).map(|j| r[i][j] * x[j]).sum()).collect()
}

fn models() -> Vec<DispersionModel> {
    let mut out: Vec<DispersionModel> =
        DispersionModel::PRESETS.iter().map(|n| DispersionModel::preset(n, 3).unwrap()).collect();
    out.push(DispersionModel::nelson(3).with_coupling(Coupling::SmoothCutoff { g: 0.4, cutoff: 1.3 }));
    out
}

const COMPONENTS: [Component; 4] =
    [Component::Matter, Component::Field, Component::CouplingPosition, Component::CouplingMomentum];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn functions_are_radial(x in prop::array::uniform3(-3.0f64..3.0), a in 0.0f64..6.3, b in 0.0f64..6.3) {
        let rot = rotation(a, b);
        let y = apply(&rot, &x);
        for m in models() {
            for c in COMPONENTS {
                let fx = m.eval(c, &x, Order::Value).unwrap().as_slice()[0];
                let fy = m.eval(c, &y, Order::Value).unwrap().as_slice()[0];
                prop_assert!((fx - fy).abs() <= 1e-12 * (1.0 + fx.abs()), "{c:?}: {fx} vs {fy}");
                let gx = m.eval(c, &x, Order::Gradient).unwrap();
                let gy = m.eval(c, &y, Order::Gradient).unwrap();
                let rgx = apply(&rot, gx.as_slice());
                for (p, q) in rgx.iter().zip(gy.as_slice()) {
                    prop_assert!((p - q).abs() <= 1e-11 * (1.0 + p.abs()));
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences(x in prop::array::uniform3(-2.0f64..2.0)) {
        let h = 1e-5;
        for m in models() {
            for c in COMPONENTS {
                let g = m.eval(c, &x, Order::Gradient).unwrap();
                for i in 0..3 {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (m.eval(c, &xp, Order::Value).unwrap().as_slice()[0]
                        - m.eval(c, &xm, Order::Value).unwrap().as_slice()[0])
                        / (2.0 * h);
                    prop_assert!((fd - g.as_slice()[i]).abs() < 1e-6, "{c:?} axis {i}: {fd} vs {:?}", g);
                }
            }
        }
    }

    #[test]
    fn hessians_match_finite_differences(x in prop::array::uniform3(0.2f64..2.0)) {
        let h = 1e-5;
        let m = DispersionModel::relativistic(3);
        for c in [Component::Matter, Component::Field, Component::CouplingMomentum] {
            let Evaluation::Hessian(hess) = m.eval(c, &x, Order::Hessian).unwrap() else { unreachable!() };
            for i in 0..3 {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                let gp = m.eval(c, &xp, Order::Gradient).unwrap();
                let gm = m.eval(c, &xm, Order::Gradient).unwrap();
                for j in 0..3 {
                    let fd = (gp.as_slice()[j] - gm.as_slice()[j]) / (2.0 * h);
                    prop_assert!((fd - hess[i * 3 + j]).abs() < 1e-6);
                }
            }
        }
    }
}

/// `(2 pi)^(-nu/2) int rho-hat(k) e^{ikx} dk` for radial profiles, by composite Simpson.
fn inverse_transform(m: &DispersionModel, r: f64) -> f64 {
    let kmax = 12.0;
    let n = 24_000;
    let h = kmax / n as f64;
    let integrand = |k: f64| -> f64 {
        let mut point = vec![0.0; m.nu];
        point[0] = k;
        let f = m.coupling_momentum(&point).unwrap();
        match m.nu {
            1 => 2.0 * f * (k * r).cos(),
            3 => {
                if r == 0.0 {
                    4.0 * std::f64::consts::PI * f * k * k
                } else {
                    4.0 * std::f64::consts::PI * f * k * (k * r).sin() / r
                }
            }
            _ => unreachable!(),
        }
    };
    let mut s = integrand(0.0) + integrand(kmax);
    for i in 1..n {
        s += integrand(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0 / (2.0 * std::f64::consts::PI).powf(m.nu as f64 / 2.0)
}

#[test]
fn position_profiles_are_inverse_transforms() {
    for nu in [1, 3] {
        for coupling in [Coupling::Gaussian { g: 0.8, sigma: 1.3 }, Coupling::SmoothCutoff { g: 0.5, cutoff: 1.7 }] {
            let m = DispersionModel::polaron(nu).with_coupling(coupling);
            for r in [0.0, 0.4, 1.5, 3.0, 6.0] {
                let mut x = vec![0.0; nu];
                x[0] = r;
                let direct = m.eval(Component::CouplingPosition, &x, Order::Value).unwrap().as_slice()[0];
                let oracle = inverse_transform(&m, r);
                assert!((direct - oracle).abs() < 1e-8, "nu={nu} {coupling:?} r={r}: {direct} vs {oracle}");
            }
        }
    }
}

#[test]
fn presets_are_admissible_in_every_dimension() {
    for nu in 1..=3 {
        for name in DispersionModel::PRESETS {
            let report = DispersionModel::preset(name, nu).unwrap().validate_conditions(1e3);
            assert!(report.all_passed(), "{name} nu={nu}\n{report}");
        }
    }
}

#[test]
fn slow_coupling_decay_is_rejected() {
    let m = DispersionModel::polaron(1).with_coupling(Coupling::PowerLaw { g: 1.0, exponent: 1.2 });
    let report = m.validate_conditions(1e3);
    assert!(!report.all_passed());
    let strong = DispersionModel::polaron(1).with_coupling(Coupling::PowerLaw { g: 1.0, exponent: 4.0 });
    let report = strong.validate_conditions(1e3);
    assert!(report.failures().all(|c| !c.clause.contains("short")), "{report}");
}

#[test]
fn invalid_parameters_are_configuration_errors() {
    use fiberscat::model::{FieldDispersion, MatterDispersion};
    use fiberscat::Error;
    let bad = [
        DispersionModel::new(
            4,
            MatterDispersion::NonRelativistic { mass: 1.0 },
            FieldDispersion::Constant { value: 1.0 },
            Coupling::Gaussian { g: 0.1, sigma: 1.0 },
            1.0,
        ),
        DispersionModel::new(
            1,
            MatterDispersion::NonRelativistic { mass: -1.0 },
            FieldDispersion::Constant { value: 1.0 },
            Coupling::Gaussian { g: 0.1, sigma: 1.0 },
            1.0,
        ),
        DispersionModel::new(
            1,
            MatterDispersion::NonRelativistic { mass: 1.0 },
            FieldDispersion::Relativistic { mass: 0.0 },
            Coupling::Gaussian { g: 0.1, sigma: 1.0 },
            1.0,
        ),
        DispersionModel::new(
            1,
            MatterDispersion::NonRelativistic { mass: 1.0 },
            FieldDispersion::Constant { value: 1.0 },
            Coupling::Gaussian { g: 0.1, sigma: 1.0 },
            0.0,
        ),
    ];
    for r in bad {
        assert!(matches!(r, Err(Error::Config(_))), "{r:?}");
    }
}
