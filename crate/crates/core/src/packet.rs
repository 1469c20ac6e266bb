//! Thawed Gaussian wave packets and their Hagedorn factorization.
//!
//! A packet is
//! `u(x) = exp((i/ε)(½(x−q)ᵀC(x−q) + (x−q)ᵀp + ζ))`
//! with complex symmetric `C` whose imaginary part is positive definite.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{
    check_dim, complexify, frob_c, im, inverse_c, min_eigenvalue, re, spd_det, spd_inv_sqrt,
    spd_inverse, symmetry_defect, CMat, RMat, RVec, I,
};

/// Relative tolerance for the symmetry of `C` at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Default lower bound for the smallest eigenvalue of Im C.
pub const DEFAULT_RHO_MIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub eps: f64,
    pub q: RVec,
    pub p: RVec,
    pub c: CMat,
    pub zeta: Complex64,
}

impl GaussianPacket {
    /// Builds a packet after checking shapes. Symmetry and positivity are left to
    /// [`GaussianPacket::validate`] so that transient states stay cheap.
    pub fn new(eps: f64, q: RVec, p: RVec, c: CMat, zeta: Complex64) -> Result<Self> {
        let d = q.len();
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        check_dim(d, p.len())?;
        check_dim(d, c.nrows())?;
        check_dim(d, c.ncols())?;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        Ok(Self { eps, q, p, c, zeta })
    }

    /// Normalized packet with width `C = i·Id` at (q, p).
    pub fn standard(eps: f64, q: &[f64], p: &[f64]) -> Result<Self> {
        let d = q.len();
        let c = CMat::identity(d, d) * I;
        Self::new(
            eps,
            RVec::from_column_slice(q),
            RVec::from_column_slice(p),
            c,
            Complex64::new(0.0, 0.0),
        )?
        .normalize()
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn c_re(&self) -> RMat {
        re(&self.c)
    }

    pub fn c_im(&self) -> RMat {
        im(&self.c)
    }

    pub fn c_im_inv(&self) -> Result<RMat> {
        spd_inverse(&self.c_im())
    }

    /// Smallest eigenvalue ρ of Im C.
    pub fn min_width_eig(&self) -> f64 {
        min_eigenvalue(&self.c_im())
    }

    pub fn validate(&self, rho_min: f64) -> Result<()> {
        let defect = symmetry_defect(&self.c);
        if defect > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { defect });
        }
        let min_eig = self.min_width_eig();
        if !(min_eig > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eig });
        }
        if min_eig < rho_min {
            return Err(Error::WidthDegenerate {
                min_eig,
                floor: rho_min,
            });
        }
        Ok(())
    }

    pub fn exponent(&self, x: &[f64]) -> Result<Complex64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.exponent_unchecked(x))
    }

    /// Exponent `(i/ε)(½yᵀCy + yᵀp + ζ)` with `y = x − q`; no shape checks.
    pub fn exponent_unchecked(&self, x: &[f64]) -> Complex64 {
        let d = self.dim();
        let mut quad = Complex64::new(0.0, 0.0);
        let mut lin = 0.0;
        for i in 0..d {
            let yi = x[i] - self.q[i];
            lin += yi * self.p[i];
            for j in 0..d {
                quad += self.c[(i, j)] * (yi * (x[j] - self.q[j]));
            }
        }
        I / self.eps * (0.5 * quad + lin + self.zeta)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Complex64> {
        Ok(self.exponent(x)?.exp())
    }

    pub fn evaluate_unchecked(&self, x: &[f64]) -> Complex64 {
        self.exponent_unchecked(x).exp()
    }

    pub fn norm_squared(&self) -> Result<f64> {
        let d = self.dim() as f64;
        let det = spd_det(&self.c_im())?;
        Ok((PI * self.eps).powf(0.5 * d) / det.sqrt() * (-2.0 * self.zeta.im / self.eps).exp())
    }

    /// Shifts Im ζ so that the packet has unit L² norm.
    pub fn normalize(&self) -> Result<Self> {
        let n2 = self.norm_squared()?;
        let mut out = self.clone();
        out.zeta.im += 0.5 * self.eps * n2.ln();
        Ok(out)
    }

    pub fn factor_width(&self) -> Result<HagedornPacket> {
        let qm = complexify(&spd_inv_sqrt(&self.c_im())?);
        let pm = &self.c * &qm;
        Ok(HagedornPacket {
            eps: self.eps,
            q: self.q.clone(),
            p: self.p.clone(),
            qm,
            pm,
            zeta: self.zeta,
        })
    }

    /// Phase-space center z = (q, p).
    pub fn center(&self) -> RVec {
        let d = self.dim();
        let mut z = RVec::zeros(2 * d);
        z.rows_mut(0, d).copy_from(&self.q);
        z.rows_mut(d, d).copy_from(&self.p);
        z
    }

    pub fn wigner(&self, z: &[f64]) -> Result<f64> {
        let d = self.dim();
        check_dim(2 * d, z.len())?;
        let g = gram_matrix(&self.c)?;
        let dz = RVec::from_column_slice(z) - self.center();
        let e = dz.dot(&(&g * &dz));
        Ok((PI * self.eps).powi(-(d as i32)) * (-e / self.eps).exp())
    }
}

/// The real 2d×2d matrix G(C) of the Wigner exponent of a packet with width C.
pub fn gram_matrix(c: &CMat) -> Result<RMat> {
    let d = c.nrows();
    let cr = re(c);
    let ci = im(c);
    let ci_inv = spd_inverse(&ci)?;
    let off = -(&cr * &ci_inv);
    let mut g = RMat::zeros(2 * d, 2 * d);
    g.view_mut((0, 0), (d, d))
        .copy_from(&(&ci + &cr * &ci_inv * &cr));
    g.view_mut((0, d), (d, d)).copy_from(&off);
    g.view_mut((d, 0), (d, d)).copy_from(&off.transpose());
    g.view_mut((d, d), (d, d)).copy_from(&ci_inv);
    Ok((&g + g.transpose()) * 0.5)
}

/// Closed-form inverse of [`gram_matrix`].
pub fn gram_inverse(c: &CMat) -> Result<RMat> {
    let d = c.nrows();
    let cr = re(c);
    let ci = im(c);
    let ci_inv = spd_inverse(&ci)?;
    let off = &ci_inv * &cr;
    let mut g = RMat::zeros(2 * d, 2 * d);
    g.view_mut((0, 0), (d, d)).copy_from(&ci_inv);
    g.view_mut((0, d), (d, d)).copy_from(&off);
    g.view_mut((d, 0), (d, d)).copy_from(&off.transpose());
    g.view_mut((d, d), (d, d))
        .copy_from(&(&ci + &cr * &ci_inv * &cr));
    Ok((&g + g.transpose()) * 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HagedornPacket {
    pub eps: f64,
    pub q: RVec,
    pub p: RVec,
    pub qm: CMat,
    pub pm: CMat,
    pub zeta: Complex64,
}

impl HagedornPacket {
    pub fn new(eps: f64, q: RVec, p: RVec, qm: CMat, pm: CMat, zeta: Complex64) -> Result<Self> {
        let d = q.len();
        check_dim(d, p.len())?;
        for m in [&qm, &pm] {
            check_dim(d, m.nrows())?;
            check_dim(d, m.ncols())?;
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        Ok(Self {
            eps,
            q,
            p,
            qm,
            pm,
            zeta,
        })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Frobenius norms of QᵀP − PᵀQ and Q*P − P*Q − 2i·Id.
    pub fn symplectic_defects(&self) -> (f64, f64) {
        let d = self.dim();
        let t = self.qm.transpose() * &self.pm - self.pm.transpose() * &self.qm;
        let a = self.qm.adjoint() * &self.pm - self.pm.adjoint() * &self.qm
            - CMat::identity(d, d) * (2.0 * I);
        (frob_c(&t), frob_c(&a))
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let (a, b) = self.symplectic_defects();
        let defect = a.max(b);
        if defect > tol {
            return Err(Error::InvalidParameter(format!(
                "Q, P violate the symplectic relations (defect {defect:.3e})"
            )));
        }
        inverse_c(&self.qm)?;
        inverse_c(&self.pm)?;
        Ok(())
    }

    /// Width C = PQ⁻¹ (symmetrized).
    pub fn width(&self) -> Result<CMat> {
        let c = &self.pm * inverse_c(&self.qm)?;
        Ok((&c + c.transpose()) * Complex64::new(0.5, 0.0))
    }

    pub fn width_from(&self) -> Result<GaussianPacket> {
        GaussianPacket::new(
            self.eps,
            self.q.clone(),
            self.p.clone(),
            self.width()?,
            self.zeta,
        )
    }

    /// Evaluates the tangent-space basis function φ_n at x.
    pub fn basis_eval(&self, n: &TangentIndex, x: &[f64]) -> Result<Complex64> {
        let d = self.dim();
        check_dim(d, x.len())?;
        check_dim(d, n.0.len())?;
        let u = self.width_from()?;
        let n2 = u.norm_squared()?;
        if (n2 - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized { norm_sq: n2 });
        }
        let qinv = inverse_c(&self.qm)?;
        let dx = DVector::from_iterator(
            d,
            x.iter().zip(self.q.iter()).map(|(a, b)| Complex64::new(a - b, 0.0)),
        );
        let y = &qinv * dx;
        let ux = u.evaluate_unchecked(x);
        let e = self.eps;
        let idx = n.indices();
        let val = match idx.as_slice() {
            [] => ux,
            [j] => (2.0 / e).sqrt() * y[*j] * ux,
            [j, k] => {
                let m = self.qm.adjoint() * qinv.transpose();
                let delta: f64 = if j == k { 2.0 } else { 1.0 };
                ((2.0 / e) * y[*j] * y[*k] - m[(*j, *k)]) * ux / delta.sqrt()
            }
            _ => unreachable!("TangentIndex enforces |n| <= 2"),
        };
        Ok(val)
    }
}

/// Multi-index n with |n| ≤ 2 labelling a tangent-space basis function.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TangentIndex(Vec<usize>);

impl TangentIndex {
    pub fn new(n: Vec<usize>) -> Result<Self> {
        let order: usize = n.iter().sum();
        if order > 2 {
            return Err(Error::InvalidIndex(format!(
                "tangent basis needs |n| <= 2, got {n:?}"
            )));
        }
        Ok(Self(n))
    }

    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Coordinates listed with multiplicity, e.g. (0,2) → [1,1].
    fn indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (j, &k) in self.0.iter().enumerate() {
            for _ in 0..k {
                out.push(j);
            }
        }
        out
    }

    /// All multi-indices with |n| ≤ 2 in d coordinates, ordered by degree.
    pub fn all(d: usize) -> Vec<TangentIndex> {
        let mut out = vec![TangentIndex(vec![0; d])];
        for j in 0..d {
            let mut n = vec![0; d];
            n[j] = 1;
            out.push(TangentIndex(n));
        }
        for j in 0..d {
            for k in j..d {
                let mut n = vec![0; d];
                n[j] += 1;
                n[k] += 1;
                out.push(TangentIndex(n));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symplectic_j;

    fn c1(re: f64, im: f64) -> CMat {
        CMat::from_element(1, 1, Complex64::new(re, im))
    }

    fn packet1(eps: f64, c: CMat, zeta: Complex64) -> GaussianPacket {
        GaussianPacket::new(eps, RVec::zeros(1), RVec::zeros(1), c, zeta).unwrap()
    }

    #[test]
    fn evaluate_trivial_points() {
        let u = packet1(1.0, c1(0.0, 1.0), Complex64::new(0.0, 0.0));
        assert!((u.evaluate(&[0.0]).unwrap() - 1.0).norm() < 1e-15);
        assert!((u.evaluate(&[1.0]).unwrap() - (-0.5f64).exp()).norm() < 1e-15);
        assert!(u.evaluate(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn norm_closed_forms() {
        let u = packet1(1.0, c1(0.0, 1.0), Complex64::new(0.0, 0.25 * PI.ln()));
        assert!((u.norm_squared().unwrap() - 1.0).abs() < 1e-14);
        let v = packet1(0.5, c1(0.0, 2.0), Complex64::new(0.0, 0.0));
        assert!((v.norm_squared().unwrap() - (PI / 4.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn normalize_solves_for_im_zeta() {
        let u = packet1(1.0, c1(0.0, 1.0), Complex64::new(0.0, 0.0));
        let n = u.normalize().unwrap();
        assert!((n.zeta.im - 0.25 * PI.ln()).abs() < 1e-15);
        let again = n.normalize().unwrap();
        assert!((again.zeta - n.zeta).norm() < 1e-15);
    }

    #[test]
    fn factor_width_scalar() {
        let u = packet1(1.0, c1(1.0, 1.0), Complex64::new(0.0, 0.0));
        let h = u.factor_width().unwrap();
        assert!((h.qm[(0, 0)] - 1.0).norm() < 1e-15);
        assert!((h.pm[(0, 0)] - Complex64::new(1.0, 1.0)).norm() < 1e-15);
        let (a, b) = h.symplectic_defects();
        assert!(a < 1e-15 && b < 1e-15);
    }

    #[test]
    fn gram_scalar_example() {
        let g = gram_matrix(&c1(1.0, 1.0)).unwrap();
        let expect = RMat::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]);
        assert!((g - expect).norm() < 1e-15);
    }

    #[test]
    fn gram_identity_width() {
        let c = CMat::identity(2, 2) * I;
        let g = gram_matrix(&c).unwrap();
        assert!((g - RMat::identity(4, 4)).norm() < 1e-15);
        let j = symplectic_j(2);
        assert!((j.transpose() * &j - RMat::identity(4, 4)).norm() == 0.0);
    }

    #[test]
    fn basis_rejects_high_order() {
        assert!(TangentIndex::new(vec![3]).is_err());
        assert_eq!(TangentIndex::all(2).len(), 6);
    }

    #[test]
    fn first_basis_function_1d() {
        let u = packet1(1.0, c1(0.0, 1.0), Complex64::new(0.0, 0.0))
            .normalize()
            .unwrap();
        let h = u.factor_width().unwrap();
        let n = TangentIndex::new(vec![1]).unwrap();
        for x in [-0.7, 0.1, 1.3] {
            let phi = h.basis_eval(&n, &[x]).unwrap();
            let expect = 2f64.sqrt() * x * u.evaluate(&[x]).unwrap();
            assert!((phi - expect).norm() < 1e-14);
        }
    }
}
