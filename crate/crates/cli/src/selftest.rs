//! Oracle checks shared by `magpack selftest`, the moments_selftest
//! experiment and the acceptance suite.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use magpack_core::fields::{builtin, fd_check, hamiltonian_symbol, Symbol, TrigSymbol};
use magpack_core::linalg::{symplectic_j, CMat, RMat, RVec};
use magpack_core::moments::{self, expansion4, f2, f_k, isserlis_resum_check, multi_indices, QuadratureRule, ResumFamily};
use magpack_core::motion::{rhs_general, rhs_variational};
use magpack_core::packet::{gram_matrix, GaussianPacket};

use crate::error::CliResult;
use crate::experiments::Check;
use crate::fit::fit_slope;

pub const DEFAULT_SEED: u64 = 20240917;

/// Random complex symmetric width with Im C ≥ 0.3·Id.
pub fn random_width(rng: &mut impl Rng, d: usize) -> CMat {
    let l = RMat::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let ci = &l * l.transpose() + RMat::identity(d, d) * 0.3;
    let a = RMat::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let cr = (&a + a.transpose()) * 0.5;
    CMat::from_fn(d, d, |i, j| Complex64::new(cr[(i, j)], ci[(i, j)]))
}

/// sin q cos p + 0.3 cos(2q + p) in d = 1, written as a sum of cosines.
pub fn test_symbol_1d() -> TrigSymbol {
    use std::f64::consts::FRAC_PI_2;
    TrigSymbol::new(
        1,
        vec![
            (0.5, vec![1.0, 1.0], -FRAC_PI_2),
            (0.5, vec![1.0, -1.0], -FRAC_PI_2),
            (0.3, vec![2.0, 1.0], 0.0),
        ],
    )
    .expect("valid terms")
}

/// A smooth bounded symbol on R⁴.
pub fn test_symbol_2d() -> TrigSymbol {
    TrigSymbol::new(
        2,
        vec![
            (0.7, vec![1.0, 0.5, -0.3, 0.2], 0.4),
            (0.4, vec![-0.6, 1.0, 0.5, 0.8], -1.1),
            (0.2, vec![0.3, 0.2, 1.2, -0.7], 2.0),
        ],
    )
    .expect("valid terms")
}

/// ⟨cos(w·z + φ)⟩ for z ~ N(m, Σ) is cos(w·m + φ)·exp(−½wᵀΣw).
pub fn trig_gaussian_mean(terms: &[(f64, Vec<f64>, f64)], mean: &RVec, cov: &RMat) -> f64 {
    terms
        .iter()
        .map(|(amp, w, ph)| {
            let wv = RVec::from_column_slice(w);
            amp * (wv.dot(mean) + ph).cos() * (-0.5 * wv.dot(&(cov * &wv))).exp()
        })
        .sum()
}

fn terms_1d() -> Vec<(f64, Vec<f64>, f64)> {
    use std::f64::consts::FRAC_PI_2;
    vec![
        (0.5, vec![1.0, 1.0], -FRAC_PI_2),
        (0.5, vec![1.0, -1.0], -FRAC_PI_2),
        (0.3, vec![2.0, 1.0], 0.0),
    ]
}

/// Largest |ρ_ℓ − quadrature| over |ℓ| ≤ 4 and `count` random widths.
/// The quadrature uses the inverse of G computed by LU, not the closed form.
pub fn rho_vs_quadrature(seed: u64, count: usize) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let d = 1 + k % 2;
        let c = random_width(&mut rng, d);
        let g = gram_matrix(&c)?;
        let sigma = g.try_inverse().expect("G is positive definite") * 0.5;
        let rule = QuadratureRule::gaussian(&RVec::zeros(2 * d), &sigma, 12)?;
        for order in 0..=4 {
            for l in multi_indices(2 * d, order) {
                let quad: f64 = rule.expect(|z: &[f64]| {
                    z.iter().zip(&l).map(|(x, &e)| x.powi(e as i32)).product::<f64>()
                });
                let closed = moments::rho(&c, &l)?;
                worst = worst.max((quad - closed).abs());
            }
        }
    }
    Ok(worst)
}

/// Largest |Σ_{|ℓ|=2} ∂^ℓa ρ_ℓ/ℓ! − ¼tr(∇²a_C C_I⁻¹)|.
pub fn f2_trace_identity(seed: u64, count: usize) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let a1 = test_symbol_1d();
    let a2 = test_symbol_2d();
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let d = 1 + k % 2;
        let a: &dyn Symbol = if d == 1 { &a1 } else { &a2 };
        let c = random_width(&mut rng, d);
        let z: Vec<f64> = (0..2 * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let by_moments = f_k(&c, 2, |l| a.partial(0.0, &z, l))?;
        let by_trace = f2(&a.hess(0.0, &z), &c)?;
        worst = worst.max((by_moments - by_trace.re).abs()).max(by_trace.im.abs());
    }
    Ok(worst)
}

/// Errors |⟨a⟩_u − (a(z) + εf₂ + ε²f₄)| for the 1D test symbol over `eps`,
/// with ⟨a⟩_u in closed form.
pub fn expansion_errors(eps: &[f64]) -> CliResult<Vec<f64>> {
    let a = test_symbol_1d();
    let c = CMat::from_element(1, 1, Complex64::new(0.3, 0.9));
    let mut out = Vec::new();
    for &e in eps {
        let u = GaussianPacket::new(e, RVec::from_vec(vec![0.3]), RVec::from_vec(vec![-0.2]), c.clone(), Complex64::new(0.0, 0.0))?
            .normalize()?;
        let cov = gram_matrix(&c)?.try_inverse().expect("positive definite") * (0.5 * e);
        let exact = trig_gaussian_mean(&terms_1d(), &u.center(), &cov);
        out.push((exact - expansion4(&u, &a, 0.0)?).abs());
    }
    Ok(out)
}

/// Largest |lhs − rhs| / max|a| of the fourth-order resummation identity.
pub fn isserlis_resummation(seed: u64, count: usize) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1553);
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let d = 1 + k % 2;
        let c = random_width(&mut rng, d);
        let family = ResumFamily::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
        let (lhs, rhs) = isserlis_resum_check(&family, &c)?;
        worst = worst.max((lhs - rhs).abs() / family.max_abs());
    }
    Ok(worst)
}

pub const EXPANSION_EPS: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

pub fn moment_checks(seed: u64) -> CliResult<Vec<Check>> {
    let mut checks = vec![
        Check::at_most("rho_vs_quadrature", rho_vs_quadrature(seed, 50)?, 1e-10),
        Check::at_most("f2_trace_identity", f2_trace_identity(seed, 50)?, 1e-12),
    ];
    let errs = expansion_errors(&EXPANSION_EPS)?;
    let pts: Vec<(f64, f64)> = EXPANSION_EPS.iter().copied().zip(errs).collect();
    let fit = fit_slope(&pts)?;
    checks.push(Check::at_least("expansion_slope", fit.slope, 2.7));
    checks.push(Check::at_most("isserlis_resummation", isserlis_resummation(seed, 100)?, 1e-12));
    Ok(checks)
}

/// ‖GJG − J‖ over random widths (the Wigner covariance of a pure Gaussian is symplectic).
pub fn gram_symplectic(seed: u64, count: usize) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a);
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let d = 1 + k % 2;
        let g = gram_matrix(&random_width(&mut rng, d))?;
        let j = symplectic_j(d);
        worst = worst.max((&g * &j * &g - &j).norm() / g.norm().powi(2).max(1.0));
    }
    Ok(worst)
}

fn sample_fields() -> Vec<(&'static str, serde_json::Value)> {
    vec![
        ("harmonic", json!({"omega": [1.0, 0.7]})),
        ("torsional", json!({"c": 0.8, "dim": 2})),
        ("constant_a", json!({"a": [0.3, -0.2], "torsional": 0.5})),
        ("constant_b_2d", json!({"b": 1.0, "omega": [1.0, 1.0]})),
        ("sine_field_2d", json!({"a": 0.2, "torsional": 1.0})),
        ("combo_2d", json!({"a": 0.3, "omega": [1.0, 0.5], "delta": 0.2, "freq": 2.0})),
    ]
}

/// Worst relative finite-difference defect of the analytic field derivatives.
pub fn field_derivatives(seed: u64) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
    let mut worst: f64 = 0.0;
    for (name, params) in sample_fields() {
        let f = builtin(name, &params)?;
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t = rng.random_range(0.0..3.0);
            worst = worst.max(fd_check(&f, t, &x, 1e-4).worst());
        }
    }
    Ok(worst)
}

/// Largest componentwise difference between the general-Hamiltonian and the
/// magnetic right-hand sides on random sine-field states.
pub fn general_form_equivalence(seed: u64, count: usize) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e);
    let f = builtin("sine_field_2d", &json!({"a": 0.2, "torsional": 1.0, "omega": [0.5, 0.8]}))?;
    let h = hamiltonian_symbol(&f);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let eps = rng.random_range(0.05..0.5);
        let q = RVec::from_fn(2, |_, _| rng.random_range(-1.5..1.5));
        let p = RVec::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let c = random_width(&mut rng, 2);
        let u = GaussianPacket::new(eps, q, p, c, Complex64::new(0.0, 0.0))?.normalize()?;
        let t = rng.random_range(0.0..2.0);
        let a = rhs_variational(t, &u, &f, 20)?;
        let b = rhs_general(t, &u, &h, 20)?;
        let dq = (&a.q - &b.q).amax();
        let dp = (&a.p - &b.p).amax();
        let dc = (&a.c - &b.c).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let dz = (a.zeta - b.zeta).norm();
        worst = worst.max(dq).max(dp).max(dc).max(dz);
    }
    Ok(worst)
}

/// Width → Hagedorn factors → width round trip.
pub fn hagedorn_round_trip(seed: u64, count: usize) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4a);
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let d = 1 + k % 2;
        let c = random_width(&mut rng, d);
        let u = GaussianPacket::new(0.1, RVec::zeros(d), RVec::zeros(d), c.clone(), Complex64::new(0.0, 0.0))?;
        let h = u.factor_width()?;
        let (a, b) = h.symplectic_defects();
        let back = h.width()?;
        let dc = (&back - &c).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        worst = worst.max(a).max(b).max(dc);
    }
    Ok(worst)
}

/// Everything `magpack selftest` runs.
pub fn all_checks(seed: u64) -> CliResult<Vec<Check>> {
    let mut checks = moment_checks(seed)?;
    checks.push(Check::at_most("gram_symplectic", gram_symplectic(seed, 1000)?, 1e-12));
    checks.push(Check::at_most("hagedorn_round_trip", hagedorn_round_trip(seed, 200)?, 1e-10));
    checks.push(Check::at_most("field_derivatives", field_derivatives(seed)?, 1e-6));
    checks.push(Check::at_most(
        "general_form_equivalence",
        general_form_equivalence(seed, 20)?,
        1e-8,
    ));
    Ok(checks)
}
