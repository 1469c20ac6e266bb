use magpack_core::fields::{builtin, fd_check, hamiltonian_symbol, FieldSet, GaugeShifted, Symbol};
use magpack_core::Error;
use proptest::prelude::*;
use serde_json::json;

fn catalog() -> Vec<(&'static str, serde_json::Value)> {
    vec![
        ("harmonic", json!({"omega": [1.0, 0.7]})),
        ("torsional", json!({"c": 0.8, "dim": 2})),
        ("constant_a", json!({"a": [0.3, -0.2], "torsional": 0.5})),
        ("constant_b_2d", json!({"b": 1.0, "omega": [1.0, 1.0]})),
        ("sine_field_2d", json!({"a": 0.2, "torsional": 1.0})),
        ("combo_2d", json!({"a": 0.3, "omega": [1.0, 0.5], "delta": 0.2, "freq": 2.0})),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn analytic_derivatives_match_finite_differences(
        x0 in -2.0f64..2.0, x1 in -2.0f64..2.0, t in 0.0f64..3.0,
    ) {
        for (name, params) in catalog() {
            let f = builtin(name, &params).unwrap();
            let r = fd_check(&f, t, &[x0, x1], 1e-4);
            prop_assert!(r.worst() < 1e-6, "{name}: {r:?}");
        }
    }

    #[test]
    fn sine_field_is_divergence_free(x0 in -5.0f64..5.0, x1 in -5.0f64..5.0) {
        let f = builtin("sine_field_2d", &json!({"a": 0.7})).unwrap();
        prop_assert!(f.jac_a(0.0, &[x0, x1]).trace().abs() < 1e-15);
    }

    #[test]
    fn gauge_shift_keeps_the_magnetic_field(x0 in -3.0f64..3.0, x1 in -3.0f64..3.0) {
        let inner = builtin("sine_field_2d", &json!({"a": 0.2, "torsional": 1.0})).unwrap();
        let shifted = GaugeShifted::new(inner.clone(), vec![(0.3, vec![1.0, 0.5], 0.2)]).unwrap();
        let x = [x0, x1];
        let b = |j: nalgebra::DMatrix<f64>| j[(1, 0)] - j[(0, 1)];
        prop_assert!((b(inner.jac_a(0.0, &x)) - b(shifted.jac_a(0.0, &x))).abs() < 1e-14);
        prop_assert!(fd_check(&shifted, 0.0, &x, 1e-4).worst() < 1e-6);
        prop_assert!((inner.v(0.0, &x) - shifted.v(0.0, &x)).abs() == 0.0);
    }
}

#[test]
fn hamiltonian_symbol_is_minimal_coupling() {
    let f = builtin("combo_2d", &json!({"a": 0.3, "omega": [1.0, 0.5], "delta": 0.2})).unwrap();
    let h = hamiltonian_symbol(&f);
    let (t, x, p) = (0.4, [0.3, -1.1], [0.7, 0.2]);
    let a = f.a(t, &x);
    let kinetic = 0.5 * ((p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2));
    let expected = kinetic + f.v(t, &x);
    let z = [x[0], x[1], p[0], p[1]];
    assert!((h.value(t, &z) - expected).abs() < 1e-14);
    // ∇_p h = p − A
    let g = h.grad(t, &z);
    assert!((g[2] - (p[0] - a[0])).abs() < 1e-14 && (g[3] - (p[1] - a[1])).abs() < 1e-14);
}

#[test]
fn time_dependence_flags() {
    let steady = builtin("combo_2d", &json!({"a": 0.3, "omega": [1.0, 0.5]})).unwrap();
    assert!(steady.is_autonomous());
    let driven = builtin("combo_2d", &json!({"a": 0.3, "omega": [1.0, 0.5], "delta": 0.2})).unwrap();
    assert!(!driven.is_autonomous());
    let x = [0.2, 0.4];
    assert_eq!(steady.dt_v(1.0, &x), 0.0);
    assert!(driven.dt_v(1.0, &x) != 0.0);
}

#[test]
fn catalog_rejects_bad_parameters() {
    assert!(matches!(builtin("nope", &json!({})), Err(Error::UnknownField(_))));
    assert!(builtin("harmonic", &json!({"omega": [1.0], "quartic": 0.1})).is_err());
    assert!(builtin("sine_field_2d", &json!({"a": 0.2, "extra": 1})).is_err());
    assert!(builtin("combo_2d", &json!({"a": 0.2, "omega": [1.0, 1.0], "modulate": "x"})).is_err());
    assert!(GaugeShifted::new(builtin("free", &json!({"dim": 2})).unwrap(), vec![(1.0, vec![1.0], 0.0)]).is_err());
}
