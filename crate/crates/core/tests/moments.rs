use magpack_core::fields::QuadraticSymbol;
use magpack_core::linalg::{CMat, RMat, RVec};
use magpack_core::moments::{
    gauss_hermite, isserlis, isserlis_resum_check, multi_indices, rho, wigner_average, QuadratureRule, ResumFamily,
};
use magpack_core::packet::{gram_inverse, GaussianPacket};
use num_complex::Complex64;
use proptest::prelude::*;

fn width(entries: &[f64]) -> CMat {
    let l = RMat::from_fn(2, 2, |i, j| entries[2 * i + j]);
    let ci = &l * l.transpose() + RMat::identity(2, 2) * 0.3;
    let cr = RMat::from_fn(2, 2, |i, j| entries[4 + i.min(j) + i.max(j)]);
    CMat::from_fn(2, 2, |i, j| Complex64::new(cr[(i, j)], ci[(i, j)]))
}

fn arb_width() -> impl Strategy<Value = CMat> {
    proptest::collection::vec(-1.0f64..1.0, 7).prop_map(|e| width(&e))
}

#[test]
fn gauss_hermite_is_exact_for_polynomials() {
    let (x, w) = gauss_hermite(8).unwrap();
    // E[X^{2k}] = (2k−1)!! for the standard normal.
    for (k, expected) in [(0, 1.0), (2, 1.0), (4, 3.0), (6, 15.0), (8, 105.0), (10, 945.0)] {
        let m: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k)).sum();
        assert!((m - expected).abs() < 1e-11 * expected, "k={k}: {m}");
    }
    let odd: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(5)).sum();
    assert!(odd.abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn rho_matches_tensor_quadrature(c in arb_width()) {
        // Oracle: ρ_ℓ = E[ζ^ℓ] for ζ ~ N(0, G⁻¹/2), by a tensor Gauss–Hermite rule.
        let sigma = gram_inverse(&c).unwrap() * 0.5;
        let rule = QuadratureRule::gaussian(&RVec::zeros(4), &sigma, 6).unwrap();
        for k in 0..=4 {
            for l in multi_indices(4, k) {
                let by_rule = rule.expect(|z| {
                    l.iter().enumerate().map(|(i, &p)| z[i].powi(p as i32)).product::<f64>()
                });
                let closed = rho(&c, &l).unwrap();
                prop_assert!((by_rule - closed).abs() < 1e-10, "{l:?}: {by_rule} vs {closed}");
            }
        }
    }

    #[test]
    fn fourth_order_resummation_holds(c in arb_width(), coeffs in proptest::collection::vec(-3.0f64..3.0, 200)) {
        let mut it = coeffs.into_iter().cycle();
        let family = ResumFamily::from_fn(2, |_, _| it.next().unwrap());
        let (lhs, rhs) = isserlis_resum_check(&family, &c).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * family.max_abs());
    }
}

#[test]
fn isserlis_pairs_covariances() {
    let s = RMat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    assert!((isserlis(&[0, 1], &s) - 0.5).abs() < 1e-15);
    // E[X⁴] = 3σ⁴, E[X²Y²] = σ_x²σ_y² + 2σ_xy²
    assert!((isserlis(&[0, 0, 0, 0], &s) - 12.0).abs() < 1e-13);
    assert!((isserlis(&[0, 0, 1, 1], &s) - (2.0 + 0.5)).abs() < 1e-13);
    assert_eq!(isserlis(&[0, 1, 1], &s), 0.0);
}

#[test]
fn wigner_average_of_quadratics_is_closed_form() {
    let c = width(&[0.4, -0.2, 0.1, 0.3, 0.3, 0.1, -0.2]);
    let eps = 0.15;
    let u = GaussianPacket::new(
        eps,
        RVec::from_vec(vec![0.3, -0.2]),
        RVec::from_vec(vec![0.5, 0.3]),
        c.clone(),
        Complex64::new(0.0, 0.0),
    )
    .unwrap()
    .normalize()
    .unwrap();
    let cov = gram_inverse(&c).unwrap() * (0.5 * eps);
    let q0 = QuadraticSymbol::coordinate(2, 0);
    assert!((wigner_average(&u, &q0, 0.0, 8).unwrap() - 0.3).abs() < 1e-13);
    let p2 = QuadraticSymbol::momentum_squared(2);
    let expected = 0.5f64.powi(2) + 0.3f64.powi(2) + cov[(2, 2)] + cov[(3, 3)];
    assert!((wigner_average(&u, &p2, 0.0, 8).unwrap() - expected).abs() < 1e-13);
}

#[test]
fn averages_refuse_unnormalized_packets() {
    let u = GaussianPacket::new(
        0.1,
        RVec::zeros(1),
        RVec::zeros(1),
        CMat::from_element(1, 1, Complex64::new(0.0, 1.0)),
        Complex64::new(0.0, 0.0),
    )
    .unwrap();
    assert!(wigner_average(&u, &QuadraticSymbol::coordinate(1, 0), 0.0, 8).is_err());
}
