use magpack_core::fields::{builtin, hamiltonian_symbol, Composite, FieldSet, GaugeShifted};
use magpack_core::gridref::{self, Grid};
use magpack_core::linalg::{CMat, RVec};
use magpack_core::motion::{
    magnetic_energy, projection_poly, remainder_potential, rhs_general, rhs_hagedorn, rhs_variational, width_rate,
};
use magpack_core::packet::{GaussianPacket, TangentIndex};
use num_complex::Complex64;
use serde_json::json;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn packet_2d(eps: f64) -> GaussianPacket {
    let w = CMat::from_row_slice(2, 2, &[c(0.2, 1.0), c(0.1, 0.2), c(0.1, 0.2), c(-0.1, 0.8)]);
    GaussianPacket::new(eps, RVec::from_vec(vec![0.3, -0.2]), RVec::from_vec(vec![0.5, 0.3]), w, c(0.0, 0.0))
        .unwrap()
        .normalize()
        .unwrap()
}

fn max_gap(a: &magpack_core::motion::VariationalRate, b: &magpack_core::motion::VariationalRate) -> f64 {
    let dc = (&a.c - &b.c).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    (&a.q - &b.q).amax().max((&a.p - &b.p).amax()).max(dc).max((a.zeta - b.zeta).norm())
}

#[test]
fn general_and_magnetic_forms_agree() {
    for (name, params) in [
        ("constant_b_2d", json!({"b": 1.0, "omega": [1.0, 0.6]})),
        ("sine_field_2d", json!({"a": 0.2, "torsional": 1.0})),
        ("combo_2d", json!({"a": 0.3, "omega": [1.0, 0.5], "delta": 0.2})),
    ] {
        let f = builtin(name, &params).unwrap();
        let h = hamiltonian_symbol(&f);
        let u = packet_2d(0.1);
        let a = rhs_variational(0.7, &u, &f, 20).unwrap();
        let b = rhs_general(0.7, &u, &h, 20).unwrap();
        assert!(max_gap(&a, &b) < 1e-10, "{name}: {}", max_gap(&a, &b));
    }
}

#[test]
fn hagedorn_rate_reproduces_the_width_rate() {
    let f = builtin("sine_field_2d", &json!({"a": 0.2, "torsional": 1.0})).unwrap();
    let u = packet_2d(0.1);
    let h = u.factor_width().unwrap();
    let hr = rhs_hagedorn(0.3, &h, &f, 20).unwrap();
    let vr = rhs_variational(0.3, &u, &f, 20).unwrap();
    let dc = width_rate(&h, &hr).unwrap();
    assert!((dc - &vr.c).norm() < 1e-10);
}

#[test]
fn remainder_vanishes_in_the_quadratic_regime() {
    let f = builtin("constant_b_2d", &json!({"b": 1.3, "omega": [1.0, 0.4]})).unwrap();
    let u = packet_2d(0.2);
    let r = remainder_potential(0.0, &u, &f, 12).unwrap();
    for x0 in [-1.0, 0.0, 0.7] {
        for x1 in [-0.5, 0.4, 1.5] {
            assert!(r.w(&[x0, x1]).norm() < 1e-10);
        }
    }
}

#[test]
fn imaginary_remainder_vanishes_for_divergence_free_potentials() {
    let f = builtin("sine_field_2d", &json!({"a": 0.2, "torsional": 1.0})).unwrap();
    let r = remainder_potential(0.0, &packet_2d(0.1), &f, 20).unwrap();
    let (raw, corrected) = r.im_w_expansion().unwrap();
    assert!(raw.abs() < 1e-15 && corrected.abs() < 1e-15);
    // In another gauge it is O(ε²), and the moment corrections remove that order.
    let g: GaugeShifted<Composite> = GaugeShifted::new(f, vec![(0.3, vec![1.0, 0.5], 0.2)]).unwrap();
    let at = |eps: f64| remainder_potential(0.0, &packet_2d(eps), &g, 20).unwrap().im_w_expansion().unwrap();
    let (a, b) = (at(0.1), at(0.05));
    assert!((a.0 / b.0).log2() > 1.7);
    assert!((a.1 / b.1).log2() > 2.6);
}

#[test]
fn projection_residual_is_the_remainder_potential() {
    // On a grid, Hu − p₂u must equal W_u·u and be orthogonal to the tangent space.
    let f = builtin("sine_field_2d", &json!({"a": 0.2, "torsional": 1.0})).unwrap();
    let eps = 0.25;
    let u = packet_2d(eps);
    let grid = Grid::uniform(2, 256, &[0.3, -0.2], 4.0).unwrap();
    let psi = gridref::sample(&u, &grid).unwrap();
    let hu = gridref::apply_h(0.0, &psi, &f, eps).unwrap();
    let p2 = projection_poly(0.0, &u, &hamiltonian_symbol(&f), 24).unwrap();
    let rem = remainder_potential(0.0, &u, &f, 24).unwrap();
    let mut residual = psi.clone();
    let mut gap = psi.clone();
    grid.for_each_point(|i, x| {
        residual.psi[i] = hu.psi[i] - p2.eval(x) * psi.psi[i];
        gap.psi[i] = residual.psi[i] - rem.w(x) * psi.psi[i];
    });
    assert!(gap.norm() < 1e-6 * residual.norm(), "{} vs {}", gap.norm(), residual.norm());
    let h = u.factor_width().unwrap();
    for n in TangentIndex::all(2) {
        let phi = gridref::sample_fn(&grid, 0.0, |x| h.basis_eval(&n, x).unwrap());
        assert!(phi.inner(&residual).unwrap().norm() < 1e-10);
    }
}

#[test]
fn energy_matches_the_grid_expectation() {
    let f = builtin("sine_field_2d", &json!({"a": 0.2, "torsional": 1.0})).unwrap();
    let eps = 0.2;
    let u = packet_2d(eps);
    let grid = Grid::uniform(2, 256, &[0.3, -0.2], 4.0).unwrap();
    let energy = gridref::energy(0.0, &gridref::sample(&u, &grid).unwrap(), &f, eps).unwrap();
    let e = magnetic_energy(0.0, &u, &f, 24).unwrap();
    assert!((e - energy).abs() < 1e-10, "{e} vs {energy}");
    assert!(f.is_autonomous());
}
