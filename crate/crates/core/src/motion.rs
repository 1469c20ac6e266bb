//! Right-hand sides of the variational, Hagedorn, general-Hamiltonian, classical
//! and linearized equations of motion, plus the tangent-space projection and the
//! remainder potential.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{FieldSet, Symbol};
use crate::linalg::{complexify, id_over, inverse_c, trace_c, CMat, CVec, RMat, RVec, I};
use crate::moments::{QuadratureRule, multi_indices};
use crate::packet::{gram_inverse, GaussianPacket, HagedornPacket, DEFAULT_RHO_MIN};

/// Time derivatives of (q, p, C, ζ).
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalRate {
    pub q: RVec,
    pub p: RVec,
    pub c: CMat,
    pub zeta: Complex64,
}

/// Time derivatives of (q, p, Q, P, ζ).
#[derive(Debug, Clone, PartialEq)]
pub struct HagedornRate {
    pub q: RVec,
    pub p: RVec,
    pub qm: CMat,
    pub pm: CMat,
    pub zeta: Complex64,
}

/// Quadrature over |u|² without the normalization check; the equations of
/// motion only ever see normalized weights, and intermediate Runge–Kutta stages
/// carry tiny norm defects.
pub(crate) fn config_rule_raw(u: &GaussianPacket, order: usize) -> Result<QuadratureRule> {
    let cov = u.c_im_inv()? * (0.5 * u.eps);
    QuadratureRule::gaussian(&u.q, &cov, order)
}

pub(crate) fn phase_rule_raw(u: &GaussianPacket, order: usize) -> Result<QuadratureRule> {
    let cov = gram_inverse(&u.c)? * (0.5 * u.eps);
    QuadratureRule::gaussian(&u.center(), &cov, order)
}

fn check_width(u: &GaussianPacket, t: f64) -> Result<()> {
    let min_eig = u.min_width_eig();
    if !min_eig.is_finite() {
        return Err(Error::NonFinite(format!("width at t = {t}")));
    }
    if min_eig < DEFAULT_RHO_MIN {
        return Err(Error::WidthDegenerate {
            min_eig,
            floor: DEFAULT_RHO_MIN,
        });
    }
    Ok(())
}

/// Configuration-space averages entering the magnetic equations of motion.
#[derive(Debug, Clone)]
pub struct MagneticAverages {
    pub a: RVec,
    pub jac_a: RMat,
    /// ⟨T⟩, ⟨∇T⟩, ⟨∇²T⟩ with T = tr(J_Aᵀ C_R C_I⁻¹).
    pub trace: f64,
    pub grad_trace: RVec,
    pub hess_trace: RMat,
    /// ⟨D²_{A,p}⟩.
    pub d2_a_p: RMat,
    pub v_eff: f64,
    pub grad_v_eff: RVec,
    pub hess_v_eff: RMat,
}

pub fn magnetic_averages(
    t: f64,
    u: &GaussianPacket,
    fields: &dyn FieldSet,
    order: usize,
) -> Result<MagneticAverages> {
    let d = u.dim();
    if fields.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: fields.dim(),
        });
    }
    let m = u.c_re() * u.c_im_inv()?;
    let rule = config_rule_raw(u, order)?;
    let mut out = MagneticAverages {
        a: RVec::zeros(d),
        jac_a: RMat::zeros(d, d),
        trace: 0.0,
        grad_trace: RVec::zeros(d),
        hess_trace: RMat::zeros(d, d),
        d2_a_p: RMat::zeros(d, d),
        v_eff: 0.0,
        grad_v_eff: RVec::zeros(d),
        hess_v_eff: RMat::zeros(d, d),
    };
    let p = u.p.as_slice();
    rule.for_each(|x, w| {
        let a = fields.a(t, x);
        let j = fields.jac_a(t, x);
        let h = fields.hess_a(t, x);
        let th = fields.third_a(t, x);
        out.a += &a * w;
        out.jac_a += &j * w;
        for k in 0..d {
            for mm in 0..d {
                let mkm = m[(k, mm)];
                if mkm == 0.0 {
                    continue;
                }
                out.trace += w * j[(k, mm)] * mkm;
                for i in 0..d {
                    out.grad_trace[i] += w * h[(k, i, mm)] * mkm;
                    for l in 0..d {
                        out.hess_trace[(i, l)] += w * th[(k, i, l, mm)] * mkm;
                    }
                }
            }
        }
        for k in 0..d {
            for l in 0..d {
                let mut s = 0.0;
                for jj in 0..d {
                    s += h[(jj, k, l)] * p[jj];
                }
                out.d2_a_p[(k, l)] += w * s;
            }
        }
        out.v_eff += w * fields.v_eff(t, x);
        out.grad_v_eff += fields.grad_v_eff(t, x) * w;
        out.hess_v_eff += fields.hess_v_eff(t, x) * w;
    });
    Ok(out)
}

/// Equations of motion for (q, p, C, ζ) of a variational Gaussian in the
/// magnetic Hamiltonian defined by `fields`.
pub fn rhs_variational(
    t: f64,
    u: &GaussianPacket,
    fields: &dyn FieldSet,
    order: usize,
) -> Result<VariationalRate> {
    check_width(u, t)?;
    let eps = u.eps;
    let av = magnetic_averages(t, u, fields, order)?;
    let c = &u.c;
    let cr = u.c_re();
    let ci_inv = u.c_im_inv()?;
    let jc = complexify(&av.jac_a);

    let q_dot = &u.p - &av.a;
    let p_dot = &av.grad_trace * (0.5 * eps) + av.jac_a.tr_mul(&u.p) - &av.grad_v_eff;

    let c_dot = -(c * c) + complexify(&av.d2_a_p) + jc.transpose() * c + c * &jc
        - complexify(&av.hess_v_eff)
        + complexify(&av.hess_trace) * Complex64::new(0.5 * eps, 0.0);

    let group = &av.hess_trace * (0.5 * eps) + av.jac_a.transpose() * &cr + &cr * &av.jac_a + &av.d2_a_p;
    let zeta_dot = Complex64::new(
        0.5 * u.p.norm_squared() + 0.5 * eps * av.trace
            - 0.25 * eps * (&ci_inv * group).trace()
            - av.v_eff
            + 0.25 * eps * (&ci_inv * &av.hess_v_eff).trace(),
        0.0,
    ) + I * (0.5 * eps) * trace_c(c);

    Ok(VariationalRate {
        q: q_dot,
        p: p_dot,
        c: (&c_dot + c_dot.transpose()) * Complex64::new(0.5, 0.0),
        zeta: zeta_dot,
    })
}

/// Equations of motion in the Hagedorn parametrization C = PQ⁻¹.
pub fn rhs_hagedorn(
    t: f64,
    h: &HagedornPacket,
    fields: &dyn FieldSet,
    order: usize,
) -> Result<HagedornRate> {
    let u = h.width_from()?;
    check_width(&u, t)?;
    let eps = u.eps;
    let av = magnetic_averages(t, &u, fields, order)?;
    let shared = rhs_shared(&u, &av)?;
    let jc = complexify(&av.jac_a);
    let s = complexify(&(&av.hess_trace * (0.5 * eps) + &av.d2_a_p - &av.hess_v_eff));
    let q_dot = &h.pm - &jc * &h.qm;
    let p_dot = jc.transpose() * &h.pm + s * &h.qm;
    Ok(HagedornRate {
        q: shared.q,
        p: shared.p,
        qm: q_dot,
        pm: p_dot,
        zeta: shared.zeta,
    })
}

fn rhs_shared(u: &GaussianPacket, av: &MagneticAverages) -> Result<VariationalRate> {
    let eps = u.eps;
    let cr = u.c_re();
    let ci_inv = u.c_im_inv()?;
    let group = &av.hess_trace * (0.5 * eps) + av.jac_a.transpose() * &cr + &cr * &av.jac_a + &av.d2_a_p;
    Ok(VariationalRate {
        q: &u.p - &av.a,
        p: &av.grad_trace * (0.5 * eps) + av.jac_a.tr_mul(&u.p) - &av.grad_v_eff,
        c: CMat::zeros(u.dim(), u.dim()),
        zeta: Complex64::new(
            0.5 * u.p.norm_squared() + 0.5 * eps * av.trace
                - 0.25 * eps * (&ci_inv * group).trace()
                - av.v_eff
                + 0.25 * eps * (&ci_inv * &av.hess_v_eff).trace(),
            0.0,
        ) + I * (0.5 * eps) * trace_c(&u.c),
    })
}

/// Wigner averages ⟨h⟩, ⟨∇h⟩, ⟨∇²h⟩ of a symbol.
pub fn symbol_averages(
    t: f64,
    u: &GaussianPacket,
    h: &dyn Symbol,
    order: usize,
) -> Result<(f64, RVec, RMat)> {
    let d = u.dim();
    if h.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: h.dim(),
        });
    }
    let rule = phase_rule_raw(u, order)?;
    let mut v = 0.0;
    let mut g = RVec::zeros(2 * d);
    let mut hh = RMat::zeros(2 * d, 2 * d);
    rule.for_each(|z, w| {
        v += w * h.value(t, z);
        g += h.grad(t, z) * w;
        hh += h.hess(t, z) * w;
    });
    Ok((v, g, hh))
}

/// B = (Id C) M (Id; C) for a real 2d×2d matrix M.
pub fn b_matrix(c: &CMat, m: &RMat) -> CMat {
    let right = id_over(c);
    right.transpose() * complexify(m) * right
}

/// Equations of motion of a variational Gaussian for a general Hamiltonian
/// symbol, with all averages taken against the Wigner function.
pub fn rhs_general(t: f64, u: &GaussianPacket, h: &dyn Symbol, order: usize) -> Result<VariationalRate> {
    check_width(u, t)?;
    let d = u.dim();
    let eps = u.eps;
    let (hv, g, hh) = symbol_averages(t, u, h, order)?;
    let c = &u.c;
    let block = |r: usize, s: usize| complexify(&hh.view((r * d, s * d), (d, d)).into_owned());
    let (hqq, hqp, hpq, hpp) = (block(0, 0), block(0, 1), block(1, 0), block(1, 1));
    let gq = g.rows(0, d).into_owned();
    let gp = g.rows(d, d).into_owned();
    let c_dot = -hqq - &hqp * c - c * &hpq - c * &hpp * c;
    let bm = b_matrix(c, &hh);
    let ci_inv = complexify(&u.c_im_inv()?);
    let zeta_dot = Complex64::new(-hv + u.p.dot(&gp), 0.0) + trace_c(&(bm * ci_inv)) * (0.25 * eps);
    Ok(VariationalRate {
        q: gp,
        p: -gq,
        c: (&c_dot + c_dot.transpose()) * Complex64::new(0.5, 0.0),
        zeta: zeta_dot,
    })
}

/// The quadratic polynomial p₂(x) = β + bᵀ(x−q) + ½(x−q)ᵀB(x−q) whose product
/// with u is the orthogonal projection of Hu onto the tangent space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPolynomial {
    pub beta: Complex64,
    pub b: CVec,
    pub bm: CMat,
    pub q: RVec,
}

impl ProjectionPolynomial {
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let d = self.q.len();
        let y: Vec<f64> = (0..d).map(|i| x[i] - self.q[i]).collect();
        let mut v = self.beta;
        for i in 0..d {
            v += self.b[i] * y[i];
            for j in 0..d {
                v += 0.5 * self.bm[(i, j)] * y[i] * y[j];
            }
        }
        v
    }
}

pub fn projection_poly(t: f64, u: &GaussianPacket, h: &dyn Symbol, order: usize) -> Result<ProjectionPolynomial> {
    let (hv, g, hh) = symbol_averages(t, u, h, order)?;
    let right = id_over(&u.c);
    let bm = b_matrix(&u.c, &hh);
    let ci_inv = complexify(&u.c_im_inv()?);
    let beta = Complex64::new(hv, 0.0) - trace_c(&(&bm * ci_inv)) * (0.25 * u.eps);
    let b = right.transpose() * complexify(&RMat::from_column_slice(g.len(), 1, g.as_slice()));
    Ok(ProjectionPolynomial {
        beta,
        b: b.column(0).into_owned(),
        bm: (&bm + bm.transpose()) * Complex64::new(0.5, 0.0),
        q: u.q.clone(),
    })
}

/// Hamiltonian vector field J⁻¹∇h = (∇_p h, −∇_q h).
pub fn classical_rhs(t: f64, z: &[f64], h: &dyn Symbol) -> RVec {
    let d = h.dim();
    let g = h.grad(t, z);
    let mut out = RVec::zeros(2 * d);
    for i in 0..d {
        out[i] = g[d + i];
        out[d + i] = -g[i];
    }
    out
}

/// Linearized flow J⁻¹∇²h·M for a real 2d×k matrix M.
pub fn linearized_rhs_real(t: f64, z: &[f64], m: &RMat, h: &dyn Symbol) -> RMat {
    let d = h.dim();
    let hm = h.hess(t, z) * m;
    let mut out = RMat::zeros(2 * d, m.ncols());
    out.rows_mut(0, d).copy_from(&hm.rows(d, d));
    out.rows_mut(d, d).copy_from(&(-hm.rows(0, d)));
    out
}

/// Linearized flow applied to the complex pair (Q, P).
pub fn linearized_rhs(t: f64, z: &[f64], qm: &CMat, pm: &CMat, h: &dyn Symbol) -> (CMat, CMat) {
    let d = h.dim();
    let hh = h.hess(t, z);
    let block = |r: usize, s: usize| complexify(&hh.view((r * d, s * d), (d, d)).into_owned());
    let q_dot = block(1, 0) * qm + block(1, 1) * pm;
    let p_dot = -(block(0, 0) * qm) - block(0, 1) * pm;
    (q_dot, p_dot)
}

/// Mean energy ⟨u|H u⟩ for the magnetic Hamiltonian, reduced to a
/// configuration-space average: conditioned on x the Wigner function is a
/// Gaussian in p̃ with mean p + C_R(x−q) and covariance (ε/2)C_I.
pub fn magnetic_energy(t: f64, u: &GaussianPacket, fields: &dyn FieldSet, order: usize) -> Result<f64> {
    let (e, _) = magnetic_energy_and_rate(t, u, fields, order)?;
    Ok(e)
}

/// (⟨H(t)⟩_u, ⟨∂_t H(t)⟩_u).
pub fn magnetic_energy_and_rate(
    t: f64,
    u: &GaussianPacket,
    fields: &dyn FieldSet,
    order: usize,
) -> Result<(f64, f64)> {
    let d = u.dim();
    let cr = u.c_re();
    let rule = config_rule_raw(u, order)?;
    let mut e = 0.0;
    let mut r = 0.0;
    rule.for_each(|x, w| {
        let mut mean = u.p.clone();
        for i in 0..d {
            for j in 0..d {
                mean[i] += cr[(i, j)] * (x[j] - u.q[j]);
            }
        }
        let a = fields.a(t, x);
        e += w * (0.5 * mean.norm_squared() - a.dot(&mean) + fields.v_eff(t, x));
        r += w * (-fields.dt_a(t, x).dot(&mean) + fields.dt_v_eff(t, x));
    });
    e += 0.25 * u.eps * u.c_im().trace();
    Ok((e, r))
}

/// The remainder potential W_u of a packet in a magnetic field, with
/// X_u = −A·(C(x−q)+p) + Ṽ.
pub struct RemainderDiagnostics<'a> {
    fields: &'a dyn FieldSet,
    packet: GaussianPacket,
    t: f64,
    pub x_at_q: Complex64,
    pub grad_at_q: CVec,
    pub hess_at_q: CMat,
    pub avg_x: Complex64,
    pub avg_grad: CVec,
    pub avg_hess: CMat,
    /// (ε/4) tr(C_I⁻¹ ⟨∇²X_u⟩).
    pub trace_term: Complex64,
}

/// X_u, ∇X_u and ∇²X_u at a point.
pub fn x_potential_derivs(
    fields: &dyn FieldSet,
    u: &GaussianPacket,
    t: f64,
    x: &[f64],
) -> (Complex64, CVec, CMat) {
    let d = u.dim();
    let a = fields.a(t, x);
    let j = fields.jac_a(t, x);
    let h = fields.hess_a(t, x);
    let c = &u.c;
    let w: Vec<Complex64> = (0..d)
        .map(|k| {
            let mut s = Complex64::new(u.p[k], 0.0);
            for l in 0..d {
                s += c[(k, l)] * (x[l] - u.q[l]);
            }
            s
        })
        .collect();
    let mut val = Complex64::new(fields.v_eff(t, x), 0.0);
    for k in 0..d {
        val -= a[k] * w[k];
    }
    let gv = fields.grad_v_eff(t, x);
    let hv = fields.hess_v_eff(t, x);
    let grad = CVec::from_fn(d, |i, _| {
        let mut s = Complex64::new(gv[i], 0.0);
        for k in 0..d {
            s -= j[(k, i)] * w[k] + a[k] * c[(k, i)];
        }
        s
    });
    let hess = CMat::from_fn(d, d, |i, l| {
        let mut s = Complex64::new(hv[(i, l)], 0.0);
        for k in 0..d {
            s -= h[(k, i, l)] * w[k] + j[(k, i)] * c[(k, l)] + j[(k, l)] * c[(k, i)];
        }
        s
    });
    (val, grad, hess)
}

pub fn remainder_potential<'a>(
    t: f64,
    u: &GaussianPacket,
    fields: &'a dyn FieldSet,
    order: usize,
) -> Result<RemainderDiagnostics<'a>> {
    let d = u.dim();
    let rule = config_rule_raw(u, order)?;
    let (x_at_q, grad_at_q, hess_at_q) = x_potential_derivs(fields, u, t, u.q.as_slice());
    let mut avg_x = Complex64::new(0.0, 0.0);
    let mut avg_grad = CVec::zeros(d);
    let mut avg_hess = CMat::zeros(d, d);
    rule.for_each(|x, w| {
        let (v, g, h) = x_potential_derivs(fields, u, t, x);
        avg_x += v * w;
        avg_grad += g * Complex64::new(w, 0.0);
        avg_hess += h * Complex64::new(w, 0.0);
    });
    let ci_inv = complexify(&u.c_im_inv()?);
    let trace_term = trace_c(&(&ci_inv * &avg_hess)) * (0.25 * u.eps);
    Ok(RemainderDiagnostics {
        fields,
        packet: u.clone(),
        t,
        x_at_q,
        grad_at_q,
        hess_at_q,
        avg_x,
        avg_grad,
        avg_hess,
        trace_term,
    })
}

impl RemainderDiagnostics<'_> {
    pub fn packet(&self) -> &GaussianPacket {
        &self.packet
    }

    pub fn x_u(&self, x: &[f64]) -> Complex64 {
        x_potential_derivs(self.fields, &self.packet, self.t, x).0
    }

    fn offsets(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.packet.q.iter()).map(|(a, b)| a - b).collect()
    }

    fn quad_form(m: &CMat, y: &[f64]) -> Complex64 {
        let d = y.len();
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                s += m[(i, j)] * y[i] * y[j];
            }
        }
        s
    }

    /// Cubic Taylor remainder R(X_u)(x) = X_u(x) minus its quadratic Taylor
    /// polynomial at q.
    pub fn taylor_remainder(&self, x: &[f64]) -> Complex64 {
        let y = self.offsets(x);
        let mut taylor = self.x_at_q + 0.5 * Self::quad_form(&self.hess_at_q, &y);
        for (i, yi) in y.iter().enumerate() {
            taylor += self.grad_at_q[i] * yi;
        }
        self.x_u(x) - taylor
    }

    /// W_u(x).
    pub fn w(&self, x: &[f64]) -> Complex64 {
        let y = self.offsets(x);
        let mut v = self.x_at_q - self.avg_x + self.trace_term;
        for (i, yi) in y.iter().enumerate() {
            v += (self.grad_at_q[i] - self.avg_grad[i]) * yi;
        }
        v += 0.5 * Self::quad_form(&(&self.hess_at_q - &self.avg_hess), &y);
        v + self.taylor_remainder(x)
    }

    /// Im W_u(q).
    pub fn im_w_at_q(&self) -> f64 {
        (self.x_at_q - self.avg_x + self.trace_term).im
    }

    /// ∇² Im W_u(q) = ∇² Im X_u(q) − ⟨∇² Im X_u⟩.
    pub fn im_w_hess_at_q(&self) -> RMat {
        (&self.hess_at_q - &self.avg_hess).map(|z| z.im)
    }

    /// ∂^α Im W_u(q) for |α| = 4, which equals ∂^α Im X_u(q). Im X_u is
    /// −Σ_k A_k (C_I(x−q))_k, so at q exactly one derivative falls on (x−q).
    pub fn im_w_fourth_at_q(&self, alpha: &[usize]) -> f64 {
        let idx = crate::fields::expand_index(alpha);
        let third = self.fields.third_a(self.t, self.packet.q.as_slice());
        let ci = self.packet.c_im();
        let d = self.packet.dim();
        let mut s = 0.0;
        for r in 0..idx.len() {
            let others: Vec<usize> = idx.iter().enumerate().filter(|(i, _)| *i != r).map(|(_, v)| *v).collect();
            for k in 0..d {
                s -= third[(k, others[0], others[1], others[2])] * ci[(k, idx[r])];
            }
        }
        s
    }

    /// (Im W_u(q), Im W_u(q) + ε f₂(Im W_u) + ε² f₄(Im W_u)).
    pub fn im_w_expansion(&self) -> Result<(f64, f64)> {
        let c = &self.packet.c;
        let eps = self.packet.eps;
        let v0 = self.im_w_at_q();
        let f2 = crate::moments::f2_config(&self.im_w_hess_at_q(), c)?;
        let f4 = crate::moments::f_k_config(c, 4, |a| Some(self.im_w_fourth_at_q(a)))?;
        Ok((v0, v0 + eps * f2 + eps * eps * f4))
    }

    /// ‖W_u u‖ by quadrature against |u|² (the packet must be normalized).
    pub fn weighted_norm(&self, order: usize) -> Result<f64> {
        let rule = config_rule_raw(&self.packet, order)?;
        Ok(rule.expect(|x| self.w(x).norm_sqr()).sqrt())
    }
}

/// All multi-indices over `d` coordinates with |ℓ| = 4.
pub fn fourth_order_indices(d: usize) -> Vec<Vec<usize>> {
    multi_indices(d, 4)
}

/// Hagedorn rate translated to the width: Ċ = (Ṗ − C Q̇) Q⁻¹.
pub fn width_rate(h: &HagedornPacket, rate: &HagedornRate) -> Result<CMat> {
    let c = h.width()?;
    let qinv = inverse_c(&h.qm)?;
    Ok((&rate.pm - c * &rate.qm) * qinv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{builtin, hamiltonian_symbol};
    use serde_json::json;

    #[test]
    fn harmonic_rates() {
        let f = builtin("harmonic", &json!({"omega": [1.0]})).unwrap();
        for eps in [0.1, 0.7] {
            let u = GaussianPacket::standard(eps, &[1.0], &[0.0]).unwrap();
            let r = rhs_variational(0.0, &u, &f, 12).unwrap();
            assert!(r.q[0].abs() < 1e-14);
            assert!((r.p[0] + 1.0).abs() < 1e-14);
            assert!(r.c[(0, 0)].norm() < 1e-14);
            assert!((r.zeta - Complex64::new(-0.5 - 0.5 * eps, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn hagedorn_harmonic() {
        let f = builtin("harmonic", &json!({"omega": [1.0]})).unwrap();
        let u = GaussianPacket::standard(0.3, &[0.0], &[0.0]).unwrap();
        let h = u.factor_width().unwrap();
        let r = rhs_hagedorn(0.0, &h, &f, 12).unwrap();
        assert!((r.qm[(0, 0)] - I).norm() < 1e-14);
        assert!((r.pm[(0, 0)] + 1.0).norm() < 1e-14);
    }

    #[test]
    fn general_harmonic_phase() {
        let f = builtin("harmonic", &json!({"omega": [1.0]})).unwrap();
        let h = hamiltonian_symbol(&f);
        let eps = 0.2;
        let u = GaussianPacket::standard(eps, &[0.0], &[0.0]).unwrap();
        let r = rhs_general(0.0, &u, &h, 10).unwrap();
        assert!((r.zeta - Complex64::new(-0.5 * eps, 0.0)).norm() < 1e-14);
        let pp = projection_poly(0.0, &u, &h, 10).unwrap();
        assert!((pp.beta - Complex64::new(0.5 * eps, 0.0)).norm() < 1e-14);
        assert!(pp.b.norm() < 1e-14 && pp.bm.norm() < 1e-14);
    }

    #[test]
    fn quadratic_remainder_vanishes() {
        let f = builtin("constant_b_2d", &json!({"b": 1.3, "omega": [1.0, 0.7]})).unwrap();
        let mut u = GaussianPacket::standard(0.1, &[0.2, -0.4], &[0.5, 0.1]).unwrap();
        u.c[(0, 1)] = Complex64::new(0.2, 0.1);
        u.c[(1, 0)] = Complex64::new(0.2, 0.1);
        let u = u.normalize().unwrap();
        let r = remainder_potential(0.0, &u, &f, 8).unwrap();
        for x in [[0.0, 0.0], [1.0, -2.0], [0.3, 0.9]] {
            assert!(r.w(&x).norm() < 1e-12, "{}", r.w(&x));
        }
    }
}
