use magpack_core::fields::{builtin, QuadraticSymbol};
use magpack_core::gridref::{self, Grid, Observable, Ordering};
use magpack_core::linalg::{CMat, RMat, RVec};
use magpack_core::moments::wigner_average;
use magpack_core::odeint::{propagate_variational, Settings};
use magpack_core::packet::GaussianPacket;
use magpack_core::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::json;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn packet_1d(eps: f64, q: f64, p: f64, cr: f64, ci: f64) -> GaussianPacket {
    GaussianPacket::new(
        eps,
        RVec::from_vec(vec![q]),
        RVec::from_vec(vec![p]),
        CMat::from_element(1, 1, c(cr, ci)),
        c(0.0, 0.0),
    )
    .unwrap()
    .normalize()
    .unwrap()
}

fn packet_2d(eps: f64, q: [f64; 2], p: [f64; 2]) -> GaussianPacket {
    let cm = CMat::from_row_slice(2, 2, &[c(0.2, 1.1), c(0.1, -0.15), c(0.1, -0.15), c(-0.3, 0.8)]);
    GaussianPacket::new(eps, RVec::from_row_slice(&q), RVec::from_row_slice(&p), cm, c(0.0, 0.0))
        .unwrap()
        .normalize()
        .unwrap()
}

#[test]
fn plane_wave_picks_up_free_phase() {
    let grid = Grid::uniform(1, 64, &[0.0], PI_L).unwrap();
    let eps = 0.1;
    // k must sit on the dual lattice: k = 3 with L = π.
    let k = 3.0;
    let s0 = gridref::sample_fn(&grid, 0.0, |x| Complex64::from_polar(1.0, k * x[0]));
    let free = builtin("free", &json!({"dim": 1})).unwrap();
    let t = 0.7;
    let s1 = gridref::propagate(&s0, &free, eps, 0.0, t, 0.05, 16).unwrap();
    let phase = Complex64::from_polar(1.0, -eps * k * k * t / 2.0);
    let worst = s0
        .psi
        .iter()
        .zip(&s1.psi)
        .map(|(a, b)| (a * phase - b).norm())
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
}

const PI_L: f64 = std::f64::consts::PI;

#[test]
fn harmonic_grid_matches_exact_gaussian() {
    let eps = 0.1;
    let field = builtin("harmonic", &json!({"omega": [1.0]})).unwrap();
    let u0 = packet_1d(eps, 0.5, -0.3, 0.2, 0.8);
    let grid = Grid::uniform(1, 256, &[0.0], 4.0).unwrap();
    let s0 = gridref::sample(&u0, &grid).unwrap();
    let s1 = gridref::propagate(&s0, &field, eps, 0.0, 1.0, 0.01, 30).unwrap();
    let tr = propagate_variational(&field, &u0, 0.0, 1.0, &[1.0], &Settings::default()).unwrap();
    let err = gridref::pack_vs_grid_error(&tr.packets[0], &s1).unwrap();
    assert!(err < 1e-7, "{err}");
}

#[test]
fn unitarity_over_five_time_units() {
    let eps = 0.1;
    let field = builtin("torsional", &json!({"c": 1.0})).unwrap();
    let u0 = packet_1d(eps, 0.0, 0.4, 0.0, 1.0);
    let grid = Grid::uniform(1, 256, &[0.0], 6.0).unwrap();
    let s0 = gridref::sample(&u0, &grid).unwrap();
    let s1 = gridref::propagate(&s0, &field, eps, 0.0, 5.0, 0.02, 30).unwrap();
    let drift = (s1.norm_squared() - s0.norm_squared()).abs();
    assert!(drift < 1e-9, "{drift}");
}

#[test]
fn doubling_resolution_changes_little() {
    let eps = 0.1;
    let field = builtin("sine_field_2d", &json!({"a": 0.3, "omega": [1.0, 1.0]})).unwrap();
    let u0 = packet_2d(eps, [0.2, -0.1], [0.3, 0.1]);
    let coarse = Grid::uniform(2, 64, &[0.0, 0.0], 2.5).unwrap();
    let fine = Grid::uniform(2, 128, &[0.0, 0.0], 2.5).unwrap();
    let a = gridref::propagate(&gridref::sample(&u0, &coarse).unwrap(), &field, eps, 0.0, 0.3, 0.01, 30).unwrap();
    let b = gridref::propagate(&gridref::sample(&u0, &fine).unwrap(), &field, eps, 0.0, 0.3, 0.01, 30).unwrap();
    // Compare the fine solution at the coarse nodes.
    let n = 64;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (a.psi[i * n + j] - b.psi[(2 * i) * 128 + 2 * j]).norm_sqr();
        }
    }
    let diff = (s * coarse.cell()).sqrt();
    assert!(diff < 1e-9, "{diff}");
}

#[test]
fn hamiltonian_is_hermitian_on_the_grid() {
    let eps = 0.3;
    let field = builtin("sine_field_2d", &json!({"a": 0.4, "torsional": 0.5})).unwrap();
    let grid = Grid::uniform(2, 16, &[0.1, -0.2], 3.0).unwrap();
    let n = grid.len();
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        let mut e = gridref::GridState::zeros(&grid, 0.0);
        e.psi[k] = c(1.0, 0.0);
        let col = gridref::apply_h(0.0, &e, &field, eps).unwrap();
        for i in 0..n {
            h[(i, k)] = col.psi[i];
        }
    }
    let defect = (&h - h.adjoint()).norm() / h.norm();
    assert!(defect < 1e-10, "{defect}");
}

#[test]
fn weyl_matrix_reproduces_explicit_quantizations() {
    let eps = 0.2;
    let grid = Grid::uniform(1, 128, &[0.0], 5.0).unwrap();
    let u = packet_1d(eps, 0.3, 0.7, 0.4, 1.2);
    let s = gridref::sample(&u, &grid).unwrap();
    let spectral = gridref::Spectral::new(&grid);
    let dpsi = spectral.derivative(&s.psi, 0);
    let x = grid.axis_points(0);
    let psi = nalgebra::DVector::from_vec(s.psi.clone());

    let p = gridref::weyl_quantize_1d(&QuadraticSymbol::coordinate(1, 1), &grid, eps, 0.0).unwrap();
    let pp = &p * &psi;
    let worst = (0..128).map(|j| (pp[j] - c(0.0, -eps) * dpsi[j]).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "p: {worst}");

    let q = gridref::weyl_quantize_1d(&QuadraticSymbol::coordinate(1, 0), &grid, eps, 0.0).unwrap();
    let mut off = 0.0f64;
    for i in 0..128 {
        for j in 0..128 {
            let want = if i == j { c(x[i], 0.0) } else { c(0.0, 0.0) };
            off = off.max((q[(i, j)] - want).norm());
        }
    }
    assert!(off < 1e-10, "q: {off}");

    let mut s_qp = RMat::zeros(2, 2);
    s_qp[(0, 1)] = 1.0;
    s_qp[(1, 0)] = 1.0;
    let qp_sym = QuadraticSymbol::new(0.0, RVec::zeros(2), s_qp).unwrap();
    let qp = gridref::weyl_quantize_1d(&qp_sym, &grid, eps, 0.0).unwrap();
    let lhs = &qp * &psi;
    let xpsi: Vec<Complex64> = (0..128).map(|j| s.psi[j] * x[j]).collect();
    let dxpsi = spectral.derivative(&xpsi, 0);
    let worst = (0..128)
        .map(|j| (lhs[j] - c(0.0, -eps) * 0.5 * (x[j] * dpsi[j] + dxpsi[j])).norm())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "qp: {worst}");

    let h = QuadraticSymbol::new(0.0, RVec::from_vec(vec![0.1, 0.0]), RMat::identity(2, 2)).unwrap();
    let hm = gridref::weyl_quantize_1d(&h, &grid, eps, 0.0).unwrap();
    let defect = (&hm - hm.adjoint()).norm() / hm.norm();
    assert!(defect < 1e-10, "{defect}");
}

#[test]
fn first_order_observables_on_sampled_gaussians() {
    let eps = 0.05;
    let u = packet_2d(eps, [0.3, -0.4], [0.6, -0.2]);
    let grid = Grid::uniform(2, 128, &[0.0, 0.0], 2.0).unwrap();
    let s = gridref::sample(&u, &grid).unwrap();
    for j in 0..2 {
        let qj = gridref::observable_expect(&s, &Observable::Position(j), eps).unwrap();
        let pj = gridref::observable_expect(&s, &Observable::Momentum(j), eps).unwrap();
        assert!((qj - u.q[j]).abs() < 1e-8, "q{j}: {qj}");
        assert!((pj - u.p[j]).abs() < 1e-8, "p{j}: {pj}");
    }
    let p2 = gridref::observable_expect(&s, &Observable::MomentumSquared, eps).unwrap();
    let cr = u.c_re();
    let ci = u.c_im();
    let ci_inv = u.c_im_inv().unwrap();
    let closed = u.p.norm_squared() + 0.5 * eps * ((&cr * &cr + &ci * &ci) * ci_inv).trace();
    let wig = wigner_average(&u, &QuadraticSymbol::momentum_squared(2), 0.0, 10).unwrap();
    assert!((p2 - closed).abs() < 1e-8, "{p2} vs {closed}");
    assert!((wig - closed).abs() < 1e-10, "{wig} vs {closed}");

    // Symmetric and one-sided forms agree for divergence-free g.
    let sym = Observable::FirstOrder {
        f: Box::new(|x| x[0] * x[1]),
        g: Box::new(|x| vec![-x[1], x[0]]),
        ordering: Ordering::Symmetric,
    };
    let one = Observable::FirstOrder {
        f: Box::new(|x| x[0] * x[1]),
        g: Box::new(|x| vec![-x[1], x[0]]),
        ordering: Ordering::OneSided,
    };
    let a = gridref::observable_expect(&s, &sym, eps).unwrap();
    let b = gridref::observable_expect(&s, &one, eps).unwrap();
    assert!((a - b).abs() < 1e-10);

    let bad = Observable::FirstOrder {
        f: Box::new(|_| 0.0),
        g: Box::new(|x| vec![x[0], 0.0]),
        ordering: Ordering::OneSided,
    };
    assert!(gridref::observable_expect(&s, &bad, eps).is_err());
}

#[test]
fn phase_shift_distance_identity() {
    let eps = 0.1;
    let u = packet_1d(eps, 0.0, 0.2, 0.0, 1.0);
    let grid = Grid::uniform(1, 128, &[0.0], 4.0).unwrap();
    let s = gridref::sample(&u, &grid).unwrap();
    let theta = 0.8;
    let mut r = s.clone();
    for v in r.psi.iter_mut() {
        *v *= Complex64::from_polar(1.0, theta);
    }
    let d = gridref::l2_error(&s, &r).unwrap();
    let want = (2.0 - 2.0 * theta.cos()).sqrt() * s.norm();
    assert!((d - want).abs() < 1e-12);
    assert_eq!(gridref::l2_error(&s, &s).unwrap(), 0.0);
    let other = Grid::uniform(1, 64, &[0.0], 4.0).unwrap();
    assert!(matches!(
        gridref::l2_error(&s, &gridref::GridState::zeros(&other, 0.0)),
        Err(Error::GridMismatch)
    ));
}

#[test]
fn box_too_small_is_rejected() {
    let u = packet_1d(0.1, 1.5, 0.0, 0.0, 1.0);
    let grid = Grid::uniform(1, 64, &[0.0], 1.6).unwrap();
    assert!(matches!(gridref::sample(&u, &grid), Err(Error::BoxTooSmall { .. })));
}

#[test]
fn binary_dump_header() {
    let grid = Grid::new(vec![16, 32], vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
    let mut s = gridref::GridState::zeros(&grid, 0.25);
    s.psi[1] = c(1.5, -2.0);
    let bytes = s.to_bytes();
    let word = |i: usize| u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap());
    let real = |i: usize| f64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap());
    assert_eq!(word(0), 2);
    assert_eq!((word(1), word(2)), (16, 32));
    assert_eq!((real(3), real(4), real(5)), (1.0, 2.0, 0.25));
    assert_eq!((real(8), real(9)), (1.5, -2.0));
    assert_eq!(bytes.len(), 8 * (6 + 2 * 512));
}
