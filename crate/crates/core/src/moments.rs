//! Gaussian expectation values: Gauss–Hermite quadrature adapted to a packet,
//! closed-form phase-space moments ρ_ℓ, and the expansion functionals f_k, F_{1,n}.

use std::collections::HashMap;
use std::ops::{AddAssign, Mul};

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::Symbol;
use crate::linalg::{cholesky, id_over, im, spd_inverse, trace_c, CMat, RMat, RVec};
use crate::packet::{gram_inverse, GaussianPacket};

pub const DEFAULT_ORDER: usize = 20;
/// Largest accepted deviation of ‖u‖² from one before an average is refused.
pub const NORM_TOL: f64 = 1e-8;

/// Gauss–Hermite nodes and weights for the standard normal distribution
/// (Golub–Welsch). Weights sum to one.
pub fn gauss_hermite(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::InvalidParameter("quadrature order must be positive".into()));
    }
    let jac = RMat::from_fn(order, order, |i, j| {
        if i + 1 == j {
            (j as f64 / 2.0).sqrt()
        } else if j + 1 == i {
            (i as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize: the rule is exactly symmetric about zero.
    let n = pairs.len();
    for i in 0..n / 2 {
        let x = 0.5 * (pairs[n - 1 - i].0 - pairs[i].0);
        let w = 0.5 * (pairs[n - 1 - i].1 + pairs[i].1);
        pairs[i] = (-x, w);
        pairs[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let nodes = pairs.iter().map(|p| p.0 * std::f64::consts::SQRT_2).collect();
    let weights = pairs.iter().map(|p| p.1 / total).collect();
    Ok((nodes, weights))
}

/// Tensor Gauss–Hermite rule mapped to a Gaussian with given mean and covariance.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gaussian(mean: &RVec, cov: &RMat, order: usize) -> Result<Self> {
        let dim = mean.len();
        let l = cholesky(cov)?;
        let (x1, w1) = gauss_hermite(order)?;
        let count = order.pow(dim as u32);
        let mut nodes = Vec::with_capacity(count * dim);
        let mut weights = Vec::with_capacity(count);
        let mut idx = vec![0usize; dim];
        let mut y = vec![0.0; dim];
        for _ in 0..count {
            let mut w = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                y[k] = x1[i];
                w *= w1[i];
            }
            for r in 0..dim {
                let mut s = mean[r];
                for c in 0..=r {
                    s += l[(r, c)] * y[c];
                }
                nodes.push(s);
            }
            weights.push(w);
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < order {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Self {
            dim,
            nodes,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    /// Calls `f(node, weight)` for every node.
    pub fn for_each(&self, mut f: impl FnMut(&[f64], f64)) {
        for (i, &w) in self.weights.iter().enumerate() {
            f(self.node(i), w);
        }
    }

    pub fn expect<T, F>(&self, mut f: F) -> T
    where
        F: FnMut(&[f64]) -> T,
        T: AddAssign + Mul<f64, Output = T>,
    {
        let mut acc = f(self.node(0)) * self.weights[0];
        for i in 1..self.len() {
            acc += f(self.node(i)) * self.weights[i];
        }
        acc
    }
}

fn check_normalized(packet: &GaussianPacket) -> Result<()> {
    let n2 = packet.norm_squared()?;
    if (n2 - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm_sq: n2 });
    }
    Ok(())
}

fn check_order(order: usize) -> Result<()> {
    if order < 2 {
        return Err(Error::InvalidParameter(format!(
            "quadrature order must be at least 2, got {order}"
        )));
    }
    Ok(())
}

/// Rule for averages against |u|²: mean q, covariance (ε/2)C_I⁻¹.
pub fn config_rule(packet: &GaussianPacket, order: usize) -> Result<QuadratureRule> {
    check_order(order)?;
    check_normalized(packet)?;
    let cov = packet.c_im_inv()? * (0.5 * packet.eps);
    QuadratureRule::gaussian(&packet.q, &cov, order)
}

/// Rule for averages against the Wigner function: mean (q, p), covariance (ε/2)G⁻¹.
pub fn phase_rule(packet: &GaussianPacket, order: usize) -> Result<QuadratureRule> {
    check_order(order)?;
    check_normalized(packet)?;
    let cov = gram_inverse(&packet.c)? * (0.5 * packet.eps);
    QuadratureRule::gaussian(&packet.center(), &cov, order)
}

/// ⟨W⟩_u = ∫ W(x)|u(x)|² dx for scalar, vector or matrix valued W.
pub fn config_average<T, F>(packet: &GaussianPacket, order: usize, f: F) -> Result<T>
where
    F: FnMut(&[f64]) -> T,
    T: AddAssign + Mul<f64, Output = T>,
{
    Ok(config_rule(packet, order)?.expect(f))
}

/// ∫ a(t, z̃) W_u(z̃) dz̃, the expectation of the Weyl quantization of `a`.
pub fn wigner_average(packet: &GaussianPacket, a: &dyn Symbol, t: f64, order: usize) -> Result<f64> {
    if a.dim() != packet.dim() {
        return Err(Error::DimensionMismatch {
            expected: packet.dim(),
            found: a.dim(),
        });
    }
    Ok(phase_rule(packet, order)?.expect(|z| a.value(t, z)))
}

/// |ℓ| for a multi-index.
pub fn order_of(l: &[usize]) -> usize {
    l.iter().sum()
}

/// ℓ! = Π ℓ_j!.
pub fn multi_factorial(l: &[usize]) -> f64 {
    l.iter()
        .map(|&k| (1..=k).map(|i| i as f64).product::<f64>())
        .product()
}

/// All multi-indices over `n` coordinates with |ℓ| = k, in lexicographic order.
pub fn multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == n {
            prefix.push(k);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=k).rev() {
            prefix.push(first);
            rec(n, k - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        if k == 0 {
            out.push(vec![]);
        }
        return out;
    }
    rec(n, k, &mut Vec::with_capacity(n), &mut out);
    out
}

/// E[Π_i y_{idx_i}] for y ~ N(0, Σ) by summing over pairings.
pub fn isserlis(idx: &[usize], sigma: &RMat) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    if idx.len() % 2 == 1 {
        return 0.0;
    }
    let first = idx[0];
    let rest = &idx[1..];
    let mut total = 0.0;
    let mut remaining = Vec::with_capacity(rest.len() - 1);
    for j in 0..rest.len() {
        remaining.clear();
        remaining.extend(rest.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, v)| *v));
        total += sigma[(first, rest[j])] * isserlis(&remaining, sigma);
    }
    total
}

fn moment_covariance(c: &CMat) -> Result<RMat> {
    Ok(gram_inverse(c)? * 0.5)
}

/// ρ_ℓ(C) = π^{−d} ∫ z̃^ℓ exp(−z̃·G z̃) dz̃, the normalized moments of the
/// Wigner function. Exact for every order (Isserlis over Σ = G⁻¹/2).
pub fn rho(c: &CMat, l: &[usize]) -> Result<f64> {
    let d = c.nrows();
    if l.len() != 2 * d {
        return Err(Error::DimensionMismatch {
            expected: 2 * d,
            found: l.len(),
        });
    }
    if order_of(l) % 2 == 1 {
        return Ok(0.0);
    }
    let sigma = moment_covariance(c)?;
    Ok(isserlis(&crate::fields::expand_index(l), &sigma))
}

/// ⟨(z̃ − z)^ℓ⟩_u = ε^{|ℓ|/2} ρ_ℓ(C).
pub fn moment(packet: &GaussianPacket, l: &[usize]) -> Result<f64> {
    Ok(packet.eps.powf(0.5 * order_of(l) as f64) * rho(&packet.c, l)?)
}

/// Moments ρ_ℓ(C) for all |ℓ| ≤ 4.
#[derive(Debug, Clone)]
pub struct MomentTable {
    values: HashMap<Vec<usize>, f64>,
}

impl MomentTable {
    pub fn new(c: &CMat) -> Result<Self> {
        let n = 2 * c.nrows();
        let sigma = moment_covariance(c)?;
        let mut values = HashMap::new();
        for k in 0..=4 {
            for l in multi_indices(n, k) {
                let v = if k % 2 == 1 {
                    0.0
                } else {
                    isserlis(&crate::fields::expand_index(&l), &sigma)
                };
                values.insert(l, v);
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, l: &[usize]) -> Option<f64> {
        self.values.get(l).copied()
    }
}

/// f₂(a, C) = ¼ tr(∇²a(z)_C C_I⁻¹) with ∇²a_C = (Id C*) ∇²a (Id; C).
/// The imaginary part vanishes for symmetric Hessians.
pub fn f2(hess: &RMat, c: &CMat) -> Result<Complex64> {
    let d = c.nrows();
    if hess.nrows() != 2 * d || hess.ncols() != 2 * d {
        return Err(Error::DimensionMismatch {
            expected: 2 * d,
            found: hess.nrows(),
        });
    }
    let defect = crate::linalg::symmetry_defect_r(hess);
    if defect > 1e-12 {
        return Err(Error::NotSymmetric { defect });
    }
    let right = id_over(c);
    let left = id_over(&c.map(|z| z.conj())).transpose();
    let hc = left * crate::linalg::complexify(hess) * right;
    let ci_inv = crate::linalg::complexify(&spd_inverse(&im(c))?);
    Ok(trace_c(&(hc * ci_inv)) * 0.25)
}

/// f₂ for a function of x only: ¼ tr(∇²b(q) C_I⁻¹).
pub fn f2_config(hess_x: &RMat, c: &CMat) -> Result<f64> {
    Ok(0.25 * (hess_x * spd_inverse(&im(c))?).trace())
}

/// f_k(a, C) = Σ_{|ℓ|=k} ∂^ℓa(z) ρ_ℓ(C) / ℓ!, with ∂^ℓa supplied by `deriv`
/// on 2d-dimensional phase-space multi-indices.
pub fn f_k(c: &CMat, k: usize, mut deriv: impl FnMut(&[usize]) -> Option<f64>) -> Result<f64> {
    let n = 2 * c.nrows();
    if k % 2 == 1 {
        return Ok(0.0);
    }
    let sigma = moment_covariance(c)?;
    let mut total = 0.0;
    for l in multi_indices(n, k) {
        let dv = deriv(&l).ok_or_else(|| Error::MissingDerivative(format!("{l:?}")))?;
        if dv != 0.0 {
            total += dv * isserlis(&crate::fields::expand_index(&l), &sigma) / multi_factorial(&l);
        }
    }
    Ok(total)
}

/// f_k for a function b of x only; `deriv` takes d-dimensional multi-indices.
pub fn f_k_config(c: &CMat, k: usize, mut deriv: impl FnMut(&[usize]) -> Option<f64>) -> Result<f64> {
    let d = c.nrows();
    f_k(c, k, |l| {
        if l[d..].iter().any(|&v| v != 0) {
            Some(0.0)
        } else {
            deriv(&l[..d])
        }
    })
}

/// Full symbol expansion a(z) + ε f₂ + ε² f₄ of ⟨a⟩_u.
pub fn expansion4(packet: &GaussianPacket, a: &dyn Symbol, t: f64) -> Result<f64> {
    let z = packet.center();
    let zs = z.as_slice();
    let e = packet.eps;
    let v0 = a.value(t, zs);
    let v2 = f2(&a.hess(t, zs), &packet.c)?.re;
    let v4 = f_k(&packet.c, 4, |l| a.partial(t, zs, l))?;
    Ok(v0 + e * v2 + e * e * v4)
}

/// F_{1,n}(a, b, C) = Σ_{|ℓ|=n+1} Σ_{β≤ℓ, |β|=1} ∂^βa(z) ∂^{ℓ−β}b(q) ρ_ℓ / (ℓ−β)!
/// for a function b of x only. `grad_a` is ∇a(z) (length 2d); `b_deriv` takes
/// d-dimensional multi-indices.
pub fn f1n(
    grad_a: &[f64],
    c: &CMat,
    n: usize,
    mut b_deriv: impl FnMut(&[usize]) -> Option<f64>,
) -> Result<f64> {
    let d = c.nrows();
    if grad_a.len() != 2 * d {
        return Err(Error::DimensionMismatch {
            expected: 2 * d,
            found: grad_a.len(),
        });
    }
    if n % 2 == 0 {
        return Ok(0.0);
    }
    let sigma = moment_covariance(c)?;
    let mut total = 0.0;
    for l in multi_indices(2 * d, n + 1) {
        let r = isserlis(&crate::fields::expand_index(&l), &sigma);
        for j in 0..2 * d {
            if l[j] == 0 || grad_a[j] == 0.0 {
                continue;
            }
            let mut rest = l.clone();
            rest[j] -= 1;
            if rest[d..].iter().any(|&v| v != 0) {
                continue;
            }
            let bd = b_deriv(&rest[..d]).ok_or_else(|| Error::MissingDerivative(format!("{rest:?}")))?;
            total += grad_a[j] * bd * r / multi_factorial(&rest);
        }
    }
    Ok(total)
}

/// Coefficients a_{β,m} for |m| = 4, β = e_j ≤ m over 2d phase-space coordinates.
#[derive(Debug, Clone)]
pub struct ResumFamily {
    n: usize,
    coeffs: HashMap<(usize, Vec<usize>), f64>,
}

impl ResumFamily {
    /// Fills every admissible (j, m) from `f`.
    pub fn from_fn(d: usize, mut f: impl FnMut(usize, &[usize]) -> f64) -> Self {
        let n = 2 * d;
        let mut coeffs = HashMap::new();
        for m in multi_indices(n, 4) {
            for j in 0..n {
                if m[j] > 0 {
                    coeffs.insert((j, m.clone()), f(j, &m));
                }
            }
        }
        Self { n, coeffs }
    }

    /// A family that only lists the given entries; missing ones are an error
    /// when checked.
    pub fn sparse(d: usize, entries: impl IntoIterator<Item = ((usize, Vec<usize>), f64)>) -> Self {
        Self {
            n: 2 * d,
            coeffs: entries.into_iter().collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn get(&self, j: usize, m: &[usize]) -> Result<f64> {
        self.coeffs
            .get(&(j, m.to_vec()))
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("coefficient for beta=e_{j}, m={m:?} missing")))
    }
}

/// Both sides of the fourth-order Isserlis resummation identity.
pub fn isserlis_resum_check(family: &ResumFamily, c: &CMat) -> Result<(f64, f64)> {
    let n = family.n;
    if n != 2 * c.nrows() {
        return Err(Error::DimensionMismatch {
            expected: 2 * c.nrows(),
            found: n,
        });
    }
    let table = MomentTable::new(c)?;
    let rho = |l: &[usize]| table.get(l).unwrap_or(0.0);
    let mut lhs = 0.0;
    for m in multi_indices(n, 4) {
        for j in 0..n {
            if m[j] == 0 {
                continue;
            }
            let mut mb = m.clone();
            mb[j] -= 1;
            lhs += family.get(j, &m)? * rho(&m) / multi_factorial(&mb);
        }
    }
    let mut rhs = 0.0;
    let twos = multi_indices(n, 2);
    for k in &twos {
        for l in &twos {
            let m: Vec<usize> = k.iter().zip(l).map(|(a, b)| a + b).collect();
            for j in 0..n {
                if l[j] == 0 {
                    continue;
                }
                rhs += family.get(j, &m)? * rho(k) * rho(l) / multi_factorial(k);
            }
        }
    }
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::I;

    fn width_i(d: usize) -> CMat {
        CMat::identity(d, d) * I
    }

    #[test]
    fn hermite_rule_moments() {
        let (x, w) = gauss_hermite(10).unwrap();
        let m = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-14);
        assert!(m(1).abs() < 1e-14);
        assert!((m(2) - 1.0).abs() < 1e-13);
        assert!((m(4) - 3.0).abs() < 1e-12);
        assert!((m(18) - 34459425.0).abs() / 34459425.0 < 1e-11);
    }

    #[test]
    fn rho_identity_width() {
        let c = width_i(1);
        assert!((rho(&c, &[2, 0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((rho(&c, &[0, 2]).unwrap() - 0.5).abs() < 1e-15);
        assert!((rho(&c, &[4, 0]).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(rho(&c, &[1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn f2_examples() {
        let c = width_i(1);
        let h = RMat::identity(2, 2) * 2.0;
        let v = f2(&h, &c).unwrap();
        assert!((v.re - 1.0).abs() < 1e-15 && v.im.abs() < 1e-15);
        let b = RMat::from_element(1, 1, 1.0);
        assert!((f2_config(&b, &c).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn f4_quartic() {
        let c = width_i(1);
        let v = f_k(&c, 4, |l| Some(if l == [4, 0] { 24.0 } else { 0.0 })).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
    }

    #[test]
    fn f1n_constant_b_vanishes() {
        let c = width_i(2);
        let grad = [0.3, -0.1, 0.7, 0.2];
        let b = |l: &[usize]| Some(if order_of(l) == 0 { 5.0 } else { 0.0 });
        assert_eq!(f1n(&grad, &c, 1, b).unwrap(), 0.0);
        assert_eq!(f1n(&grad, &c, 3, b).unwrap(), 0.0);
    }

    #[test]
    fn resum_single_coefficient() {
        let c = width_i(1);
        let fam = ResumFamily::from_fn(1, |j, m| if j == 0 && m == [4, 0] { 1.0 } else { 0.0 });
        let (l, r) = isserlis_resum_check(&fam, &c).unwrap();
        assert!((l - 0.125).abs() < 1e-15);
        assert!((l - r).abs() < 1e-14);
        let partial = ResumFamily::sparse(1, [((0usize, vec![4usize, 0usize]), 1.0)]);
        assert!(isserlis_resum_check(&partial, &c).is_err());
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(4, 4).len(), 35);
        assert_eq!(multi_indices(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
    }
}
