use magpack_core::egorov::{egorov_residual, flow, transport, symplectic_defect, EgorovSettings, FlowMap, InitialSide};
use magpack_core::fields::{builtin, hamiltonian_symbol, QuadraticSymbol, Symbol, TrigSymbol};
use magpack_core::gridref::Grid;
use magpack_core::linalg::{CMat, RVec};
use magpack_core::motion::classical_rhs;
use magpack_core::packet::GaussianPacket;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[test]
fn flow_is_symplectic_for_the_sine_field() {
    let f = builtin("sine_field_2d", &json!({"a": 0.2, "torsional": 1.0})).unwrap();
    let h = hamiltonian_symbol(&f);
    let fm = FlowMap::new(&h, 1e-12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let z: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = fm.jacobian(3.0, 0.0, &z).unwrap();
        assert!(symplectic_defect(&m) < 1e-8, "{}", symplectic_defect(&m));
    }
}

#[test]
fn flow_round_trip_returns_home() {
    let f = builtin("combo_2d", &json!({"a": 0.3, "omega": [1.0, 0.5], "delta": 0.2, "freq": 2.0})).unwrap();
    let h = hamiltonian_symbol(&f);
    let tol = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let z: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let there = flow(&h, 2.0, 0.5, &z, tol).unwrap();
        let back = flow(&h, 0.5, 2.0, there.as_slice(), tol).unwrap();
        let gap = (back - RVec::from_vec(z)).amax();
        assert!(gap <= 10.0 * tol, "{gap}");
    }
}

#[test]
fn flows_compose() {
    let f = builtin("combo_2d", &json!({"a": 0.3, "omega": [1.0, 0.5], "delta": 0.2, "freq": 2.0})).unwrap();
    let h = hamiltonian_symbol(&f);
    let tol = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let z: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let direct = flow(&h, 2.0, 0.0, &z, tol).unwrap();
        let mid = flow(&h, 0.8, 0.0, &z, tol).unwrap();
        let composed = flow(&h, 2.0, 0.8, mid.as_slice(), tol).unwrap();
        let gap = (direct - composed).amax();
        assert!(gap <= 10.0 * tol, "{gap}");
    }
}

#[test]
fn autonomous_flow_conserves_energy() {
    let f = builtin("sine_field_2d", &json!({"a": 0.2, "torsional": 1.0})).unwrap();
    let h = hamiltonian_symbol(&f);
    let z = [0.3, -0.2, 0.5, 0.3];
    let e0 = h.value(0.0, &z);
    for t in [0.5, 2.0, 5.0] {
        let zt = flow(&h, t, 0.0, &z, 1e-11).unwrap();
        assert!((h.value(t, zt.as_slice()) - e0).abs() <= 1e-10);
    }
}

#[test]
fn transported_symbol_solves_the_transport_equation() {
    // F(s, z) = a(Φ^{t,s} z) satisfies ∂_s F + ∇F · J⁻¹∇h(s, z) = 0.
    let f = builtin("combo_2d", &json!({"a": 0.3, "omega": [1.0, 0.5], "delta": 0.2, "freq": 2.0})).unwrap();
    let h = hamiltonian_symbol(&f);
    let a = TrigSymbol::new(2, vec![(1.0, vec![1.0, 0.0, 0.0, 1.0], 0.3), (0.5, vec![0.0, 1.0, 1.0, 0.0], 0.0)]).unwrap();
    let (t, s, ds) = (1.5, 0.4, 1e-4);
    let z = [0.2, -0.1, 0.4, 0.3];
    let value_at = |s: f64| transport(&a, &h, t, s, 1e-12).unwrap().try_value(&z).unwrap();
    let ds_f = (value_at(s + ds) - value_at(s - ds)) / (2.0 * ds);
    let grad = transport(&a, &h, t, s, 1e-12).unwrap().try_grad(&z).unwrap();
    let residual = ds_f + grad.dot(&classical_rhs(s, &z, &h));
    assert!(residual.abs() < 1e-5, "{residual}");
}

fn packet_1d(eps: f64) -> GaussianPacket {
    GaussianPacket::new(
        eps,
        RVec::from_vec(vec![0.4]),
        RVec::from_vec(vec![0.6]),
        CMat::from_element(1, 1, Complex64::new(0.2, 1.0)),
        Complex64::new(0.0, 0.0),
    )
    .unwrap()
    .normalize()
    .unwrap()
}

#[test]
fn egorov_is_exact_for_quadratic_hamiltonians() {
    let f = builtin("constant_a", &json!({"a": [0.3], "omega": [1.0]})).unwrap();
    let a = TrigSymbol::new(1, vec![(1.0, vec![1.0, 0.5], 0.1)]).unwrap();
    let eps = 0.2;
    let grid = Grid::uniform(1, 256, &[0.0], 6.0).unwrap();
    for initial in [InitialSide::WeylMatrix, InitialSide::WignerAverage { order: 32 }] {
        let settings = EgorovSettings {
            initial,
            ..EgorovSettings::default()
        };
        let r = egorov_residual(&a, &f, &packet_1d(eps), 1.0, &grid, &settings).unwrap();
        assert!(r.residual < 1e-7, "{initial:?}: {r:?}");
        assert!(r.norm_drift < 1e-10);
    }
}

#[test]
fn egorov_residual_shrinks_like_eps_squared() {
    let f = builtin("constant_a", &json!({"a": [0.3], "torsional": 1.0})).unwrap();
    let a = QuadraticSymbol::coordinate(1, 1);
    let settings = EgorovSettings {
        initial: InitialSide::WignerAverage { order: 32 },
        ..EgorovSettings::default()
    };
    let mut res = Vec::new();
    for eps in [0.2, 0.1] {
        let n = if eps > 0.15 { 256 } else { 512 };
        let grid = Grid::uniform(1, n, &[0.5], 5.0).unwrap();
        res.push(egorov_residual(&a, &f, &packet_1d(eps), 1.0, &grid, &settings).unwrap().residual);
    }
    let ratio = res[0] / res[1];
    assert!(ratio > 3.0 && ratio < 5.0, "{res:?}");
}

#[test]
fn egorov_rejects_unsupported_inputs() {
    let f2 = builtin("sine_field_2d", &json!({"a": 0.2})).unwrap();
    let a = QuadraticSymbol::coordinate(1, 0);
    let grid = Grid::uniform(1, 64, &[0.0], 5.0).unwrap();
    assert!(egorov_residual(&a, &f2, &packet_1d(0.2), 1.0, &grid, &EgorovSettings::default()).is_err());
}
