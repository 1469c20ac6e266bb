//! Small dense linear-algebra helpers shared by the packet and motion code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn re(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn im(m: &CMat) -> RMat {
    m.map(|z| z.im)
}

pub fn complexify(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn from_parts(re: &RMat, im: &RMat) -> CMat {
    re.zip_map(im, Complex64::new)
}

pub fn frob_c(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative Frobenius defect ‖M − Mᵀ‖ / max(‖M‖, 1).
pub fn symmetry_defect(m: &CMat) -> f64 {
    frob_c(&(m - m.transpose())) / frob_c(m).max(1.0)
}

pub fn symmetry_defect_r(m: &RMat) -> f64 {
    (m - m.transpose()).norm() / m.norm().max(1.0)
}

pub fn min_eigenvalue(m: &RMat) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.min()
}

fn spd_eigen(m: &RMat) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let s = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let min_eig = eig.eigenvalues.min();
    if !(min_eig > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eig });
    }
    Ok(eig)
}

/// Principal inverse square root of a symmetric positive definite matrix.
pub fn spd_inv_sqrt(m: &RMat) -> Result<RMat> {
    let eig = spd_eigen(m)?;
    let d = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    Ok(&eig.eigenvectors * RMat::from_diagonal(&d) * eig.eigenvectors.transpose())
}

pub fn spd_inverse(m: &RMat) -> Result<RMat> {
    let eig = spd_eigen(m)?;
    let d = eig.eigenvalues.map(|l| 1.0 / l);
    let inv = &eig.eigenvectors * RMat::from_diagonal(&d) * eig.eigenvectors.transpose();
    Ok((&inv + inv.transpose()) * 0.5)
}

pub fn spd_det(m: &RMat) -> Result<f64> {
    Ok(spd_eigen(m)?.eigenvalues.product())
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &RMat) -> Result<RMat> {
    let s = (m + m.transpose()) * 0.5;
    match s.clone().cholesky() {
        Some(c) => Ok(c.l()),
        None => Err(Error::NotPositiveDefinite {
            min_eig: min_eigenvalue(&s),
        }),
    }
}

/// 2-norm condition number of a complex matrix.
pub fn condition_c(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub const MAX_CONDITION: f64 = 1e12;

pub fn inverse_c(m: &CMat) -> Result<CMat> {
    let cond = condition_c(m);
    if !(cond < MAX_CONDITION) {
        return Err(Error::Singular { cond });
    }
    m.clone()
        .try_inverse()
        .ok_or(Error::Singular { cond })
}

/// The constant structure matrix J = [[0, −Id], [Id, 0]]; the classical flow
/// reads ż = J⁻¹∇h.
pub fn symplectic_j(d: usize) -> RMat {
    let mut j = RMat::zeros(2 * d, 2 * d);
    for i in 0..d {
        j[(i, d + i)] = -1.0;
        j[(d + i, i)] = 1.0;
    }
    j
}

pub fn trace_c(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Stack (Id; C) as a 2d×d complex matrix.
pub fn id_over(c: &CMat) -> CMat {
    let d = c.nrows();
    let mut m = CMat::zeros(2 * d, d);
    for i in 0..d {
        m[(i, i)] = Complex64::new(1.0, 0.0);
        for j in 0..d {
            m[(d + i, j)] = c[(i, j)];
        }
    }
    m
}

pub fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inv_sqrt_squares_back() {
        let m = RMat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let r = spd_inv_sqrt(&m).unwrap();
        let back = (&r * &r).try_inverse().unwrap();
        assert!((back - m).norm() < 1e-13);
    }

    #[test]
    fn negative_definite_rejected() {
        let m = RMat::from_row_slice(1, 1, &[-1.0]);
        assert!(matches!(
            spd_inv_sqrt(&m),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn j_squares_to_minus_identity() {
        let j = symplectic_j(3);
        assert!((&j * &j + RMat::identity(6, 6)).norm() == 0.0);
    }
}
