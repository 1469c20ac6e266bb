//! Magnetic and electric potentials with analytic derivatives, the classical
//! Hamiltonian symbol, and a finite-difference derivative check.

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec};

/// Dense order-3 array, `t[(k, l, m)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    d: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            data: vec![0.0; d * d * d],
        }
    }
    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl std::ops::Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (k, l, m): (usize, usize, usize)) -> &f64 {
        &self.data[(k * self.d + l) * self.d + m]
    }
}

impl std::ops::IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (k, l, m): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(k * self.d + l) * self.d + m]
    }
}

/// Dense order-4 array, `t[(k, l, m, n)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    d: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            data: vec![0.0; d * d * d * d],
        }
    }
    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl std::ops::Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (k, l, m, n): (usize, usize, usize, usize)) -> &f64 {
        &self.data[((k * self.d + l) * self.d + m) * self.d + n]
    }
}

impl std::ops::IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (k, l, m, n): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.data[((k * self.d + l) * self.d + m) * self.d + n]
    }
}

/// A magnetic potential A and an electric potential V on R^d.
///
/// Index conventions: `jac_a[(k, m)] = ∂_m A_k`, `hess_a[(k, l, m)] = ∂_l ∂_m A_k`,
/// `third_a[(k, l, m, n)] = ∂_l ∂_m ∂_n A_k`.
pub trait FieldSet: Send + Sync {
    fn dim(&self) -> usize;
    fn a(&self, t: f64, x: &[f64]) -> RVec;
    fn jac_a(&self, t: f64, x: &[f64]) -> RMat;
    fn hess_a(&self, t: f64, x: &[f64]) -> Tensor3;
    fn third_a(&self, t: f64, x: &[f64]) -> Tensor4;
    fn v(&self, t: f64, x: &[f64]) -> f64;
    fn grad_v(&self, t: f64, x: &[f64]) -> RVec;
    fn hess_v(&self, t: f64, x: &[f64]) -> RMat;
    fn dt_a(&self, t: f64, x: &[f64]) -> RVec;
    fn dt_v(&self, t: f64, x: &[f64]) -> f64;

    /// True when A and V do not depend on t.
    fn is_autonomous(&self) -> bool {
        false
    }

    /// Ṽ = ½|A|² + V.
    fn v_eff(&self, t: f64, x: &[f64]) -> f64 {
        0.5 * self.a(t, x).norm_squared() + self.v(t, x)
    }

    /// ∇Ṽ = J_Aᵀ A + ∇V.
    fn grad_v_eff(&self, t: f64, x: &[f64]) -> RVec {
        self.jac_a(t, x).tr_mul(&self.a(t, x)) + self.grad_v(t, x)
    }

    /// ∇²Ṽ = J_AᵀJ_A + Σ_k A_k ∇²A_k + ∇²V.
    fn hess_v_eff(&self, t: f64, x: &[f64]) -> RMat {
        let d = self.dim();
        let a = self.a(t, x);
        let j = self.jac_a(t, x);
        let h = self.hess_a(t, x);
        let mut out = j.tr_mul(&j) + self.hess_v(t, x);
        for i in 0..d {
            for l in 0..d {
                for k in 0..d {
                    out[(i, l)] += a[k] * h[(k, i, l)];
                }
            }
        }
        out
    }

    fn dt_v_eff(&self, t: f64, x: &[f64]) -> f64 {
        self.a(t, x).dot(&self.dt_a(t, x)) + self.dt_v(t, x)
    }

    fn div_a(&self, t: f64, x: &[f64]) -> f64 {
        self.jac_a(t, x).trace()
    }

    /// D²_{A,v}: `[(k, l)] = Σ_j ∂_k ∂_l A_j v_j`.
    fn d2_a_contract(&self, t: f64, x: &[f64], v: &[f64]) -> RMat {
        let d = self.dim();
        let h = self.hess_a(t, x);
        RMat::from_fn(d, d, |k, l| (0..d).map(|j| h[(j, k, l)] * v[j]).sum())
    }
}

/// Smooth classical observable a(t, q̃, p̃) on phase space R^{2d}.
pub trait Symbol: Send + Sync {
    /// Configuration dimension d (the symbol lives on R^{2d}).
    fn dim(&self) -> usize;
    fn value(&self, t: f64, z: &[f64]) -> f64;
    fn grad(&self, t: f64, z: &[f64]) -> RVec;
    fn hess(&self, t: f64, z: &[f64]) -> RMat;

    fn dt(&self, _t: f64, _z: &[f64]) -> f64 {
        0.0
    }

    /// ∂^α a for a multi-index α over the 2d phase-space coordinates.
    /// Orders up to two come from `grad` and `hess`; higher orders are `None`
    /// unless an implementation provides them.
    fn partial(&self, t: f64, z: &[f64], alpha: &[usize]) -> Option<f64> {
        let idx = expand_index(alpha);
        match idx.as_slice() {
            [] => Some(self.value(t, z)),
            [i] => Some(self.grad(t, z)[*i]),
            [i, j] => Some(self.hess(t, z)[(*i, *j)]),
            _ => None,
        }
    }
}

/// Lists the coordinates of a multi-index with multiplicity, e.g. (0,2,1) → [1,1,2].
pub fn expand_index(alpha: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(alpha.iter().sum());
    for (j, &k) in alpha.iter().enumerate() {
        for _ in 0..k {
            out.push(j);
        }
    }
    out
}

/// h(t, q̃, p̃) = ½|p̃|² − A(t, q̃)·p̃ + Ṽ(t, q̃).
pub struct MagneticSymbol<'a> {
    fields: &'a dyn FieldSet,
}

pub fn hamiltonian_symbol(fields: &dyn FieldSet) -> MagneticSymbol<'_> {
    MagneticSymbol { fields }
}

impl MagneticSymbol<'_> {
    pub fn fields(&self) -> &dyn FieldSet {
        self.fields
    }
}

impl Symbol for MagneticSymbol<'_> {
    fn dim(&self) -> usize {
        self.fields.dim()
    }

    fn value(&self, t: f64, z: &[f64]) -> f64 {
        let d = self.dim();
        let (x, p) = z.split_at(d);
        let a = self.fields.a(t, x);
        let pp: f64 = p.iter().map(|v| v * v).sum();
        let ap: f64 = (0..d).map(|k| a[k] * p[k]).sum();
        0.5 * pp - ap + self.fields.v_eff(t, x)
    }

    fn grad(&self, t: f64, z: &[f64]) -> RVec {
        let d = self.dim();
        let (x, p) = z.split_at(d);
        let pv = RVec::from_column_slice(p);
        let gq = -self.fields.jac_a(t, x).tr_mul(&pv) + self.fields.grad_v_eff(t, x);
        let gp = &pv - self.fields.a(t, x);
        let mut g = RVec::zeros(2 * d);
        g.rows_mut(0, d).copy_from(&gq);
        g.rows_mut(d, d).copy_from(&gp);
        g
    }

    fn hess(&self, t: f64, z: &[f64]) -> RMat {
        let d = self.dim();
        let (x, p) = z.split_at(d);
        let j = self.fields.jac_a(t, x);
        let hqq = self.fields.hess_v_eff(t, x) - self.fields.d2_a_contract(t, x, p);
        let mut h = RMat::zeros(2 * d, 2 * d);
        h.view_mut((0, 0), (d, d)).copy_from(&hqq);
        h.view_mut((0, d), (d, d)).copy_from(&(-j.transpose()));
        h.view_mut((d, 0), (d, d)).copy_from(&(-&j));
        h.view_mut((d, d), (d, d)).fill_with_identity();
        h
    }

    fn dt(&self, t: f64, z: &[f64]) -> f64 {
        let d = self.dim();
        let (x, p) = z.split_at(d);
        let da = self.fields.dt_a(t, x);
        let dap: f64 = (0..d).map(|k| da[k] * p[k]).sum();
        -dap + self.fields.dt_v_eff(t, x)
    }
}

/// a(z) = c + bᵀz + ½zᵀSz on phase space; covers q̃_j, p̃_j, |p̃|² and the
/// harmonic Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSymbol {
    pub constant: f64,
    pub linear: RVec,
    pub quadratic: RMat,
}

impl QuadraticSymbol {
    pub fn new(constant: f64, linear: RVec, quadratic: RMat) -> Result<Self> {
        let n = linear.len();
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!("phase-space dimension must be even, got {n}")));
        }
        if quadratic.nrows() != n || quadratic.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: quadratic.nrows(),
            });
        }
        let quadratic = (&quadratic + quadratic.transpose()) * 0.5;
        Ok(Self {
            constant,
            linear,
            quadratic,
        })
    }

    /// The coordinate function z ↦ z_k.
    pub fn coordinate(d: usize, k: usize) -> Self {
        let mut linear = RVec::zeros(2 * d);
        linear[k] = 1.0;
        Self {
            constant: 0.0,
            linear,
            quadratic: RMat::zeros(2 * d, 2 * d),
        }
    }

    /// |p̃|².
    pub fn momentum_squared(d: usize) -> Self {
        let mut quadratic = RMat::zeros(2 * d, 2 * d);
        for j in d..2 * d {
            quadratic[(j, j)] = 2.0;
        }
        Self {
            constant: 0.0,
            linear: RVec::zeros(2 * d),
            quadratic,
        }
    }
}

impl Symbol for QuadraticSymbol {
    fn dim(&self) -> usize {
        self.linear.len() / 2
    }

    fn value(&self, _t: f64, z: &[f64]) -> f64 {
        let zv = RVec::from_column_slice(z);
        self.constant + self.linear.dot(&zv) + 0.5 * zv.dot(&(&self.quadratic * &zv))
    }

    fn grad(&self, _t: f64, z: &[f64]) -> RVec {
        &self.linear + &self.quadratic * RVec::from_column_slice(z)
    }

    fn hess(&self, _t: f64, _z: &[f64]) -> RMat {
        self.quadratic.clone()
    }

    fn partial(&self, t: f64, z: &[f64], alpha: &[usize]) -> Option<f64> {
        match alpha.iter().sum::<usize>() {
            0..=2 => {
                let idx = expand_index(alpha);
                Some(match idx.as_slice() {
                    [] => self.value(t, z),
                    [i] => self.grad(t, z)[*i],
                    [i, j] => self.quadratic[(*i, *j)],
                    _ => unreachable!(),
                })
            }
            _ => Some(0.0),
        }
    }
}

/// a(z) = Σ_k amp_k cos(w_k·z + φ_k) on phase space, with closed-form
/// derivatives of every order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigSymbol {
    d: usize,
    terms: Vec<(f64, Vec<f64>, f64)>,
}

impl TrigSymbol {
    /// Each term is (amplitude, wave vector of length 2d, phase).
    pub fn new(d: usize, terms: Vec<(f64, Vec<f64>, f64)>) -> Result<Self> {
        for (amp, w, ph) in &terms {
            if w.len() != 2 * d {
                return Err(Error::DimensionMismatch {
                    expected: 2 * d,
                    found: w.len(),
                });
            }
            if !amp.is_finite() || !ph.is_finite() || w.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("trigonometric terms must be finite".into()));
            }
        }
        Ok(Self { d, terms })
    }

    fn derivative(&self, z: &[f64], idx: &[usize]) -> f64 {
        let k = idx.len();
        self.terms
            .iter()
            .map(|(amp, w, ph)| {
                let arg = w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + ph;
                let prefactor: f64 = idx.iter().map(|&i| w[i]).product();
                // d^k/dθ^k cos θ = cos(θ + kπ/2)
                amp * prefactor * (arg + k as f64 * std::f64::consts::FRAC_PI_2).cos()
            })
            .sum()
    }
}

impl Symbol for TrigSymbol {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, _t: f64, z: &[f64]) -> f64 {
        self.derivative(z, &[])
    }

    fn grad(&self, _t: f64, z: &[f64]) -> RVec {
        RVec::from_fn(2 * self.d, |i, _| self.derivative(z, &[i]))
    }

    fn hess(&self, _t: f64, z: &[f64]) -> RMat {
        RMat::from_fn(2 * self.d, 2 * self.d, |i, j| self.derivative(z, &[i, j]))
    }

    fn partial(&self, _t: f64, z: &[f64], alpha: &[usize]) -> Option<f64> {
        Some(self.derivative(z, &expand_index(alpha)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VectorPotential {
    Zero,
    /// A(x) = a, constant in space.
    Constant(Vec<f64>),
    /// A(x) = (B/2)(−x₂, x₁), a uniform field of strength B in d = 2.
    UniformB(f64),
    /// A(x) = a(−sin x₂, sin x₁) in d = 2.
    Sine(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarTerm {
    /// ½ Σ ω_j² x_j².
    Harmonic(Vec<f64>),
    /// c Σ (1 − cos x_j).
    Torsional(f64),
}

/// Multiplies A and/or V by 1 + δ sin(Ωt).
#[derive(Debug, Clone, PartialEq)]
pub struct Modulation {
    pub delta: f64,
    pub freq: f64,
    pub on_a: bool,
    pub on_v: bool,
}

impl Modulation {
    fn factor(&self, t: f64) -> f64 {
        1.0 + self.delta * (self.freq * t).sin()
    }
    fn rate(&self, t: f64) -> f64 {
        self.delta * self.freq * (self.freq * t).cos()
    }
}

/// A vector potential plus a sum of scalar terms, optionally time modulated.
#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub d: usize,
    pub vector: VectorPotential,
    pub scalars: Vec<ScalarTerm>,
    pub modulation: Option<Modulation>,
}

impl Composite {
    pub fn is_time_dependent(&self) -> bool {
        self.modulation.as_ref().is_some_and(|m| m.delta != 0.0 && m.freq != 0.0)
    }

    /// True when A is linear and V quadratic in x, the regime in which the
    /// Gaussian ansatz is exact.
    pub fn is_quadratic(&self) -> bool {
        let linear_a = !matches!(self.vector, VectorPotential::Sine(a) if a != 0.0);
        let quadratic_v = self
            .scalars
            .iter()
            .all(|s| !matches!(s, ScalarTerm::Torsional(c) if *c != 0.0));
        linear_a && quadratic_v
    }

    /// Constant A and V ≡ 0: canonical momentum is conserved.
    pub fn is_translation_invariant(&self) -> bool {
        matches!(self.vector, VectorPotential::Zero | VectorPotential::Constant(_))
            && self.scalars.iter().all(|s| match s {
                ScalarTerm::Harmonic(w) => w.iter().all(|&w| w == 0.0),
                ScalarTerm::Torsional(c) => *c == 0.0,
            })
    }

    fn a_scale(&self, t: f64) -> f64 {
        match &self.modulation {
            Some(m) if m.on_a => m.factor(t),
            _ => 1.0,
        }
    }
    fn v_scale(&self, t: f64) -> f64 {
        match &self.modulation {
            Some(m) if m.on_v => m.factor(t),
            _ => 1.0,
        }
    }
    fn a_rate(&self, t: f64) -> f64 {
        match &self.modulation {
            Some(m) if m.on_a => m.rate(t),
            _ => 0.0,
        }
    }
    fn v_rate(&self, t: f64) -> f64 {
        match &self.modulation {
            Some(m) if m.on_v => m.rate(t),
            _ => 0.0,
        }
    }

    fn a0(&self, x: &[f64]) -> RVec {
        let d = self.d;
        match &self.vector {
            VectorPotential::Zero => RVec::zeros(d),
            VectorPotential::Constant(a) => RVec::from_column_slice(a),
            VectorPotential::UniformB(b) => RVec::from_vec(vec![-0.5 * b * x[1], 0.5 * b * x[0]]),
            VectorPotential::Sine(a) => RVec::from_vec(vec![-a * x[1].sin(), a * x[0].sin()]),
        }
    }

    fn v0(&self, x: &[f64]) -> f64 {
        self.scalars
            .iter()
            .map(|s| match s {
                ScalarTerm::Harmonic(w) => {
                    0.5 * w.iter().zip(x).map(|(w, x)| w * w * x * x).sum::<f64>()
                }
                ScalarTerm::Torsional(c) => c * x.iter().map(|x| 1.0 - x.cos()).sum::<f64>(),
            })
            .sum()
    }
}

impl FieldSet for Composite {
    fn dim(&self) -> usize {
        self.d
    }

    fn is_autonomous(&self) -> bool {
        !self.is_time_dependent()
    }

    fn a(&self, t: f64, x: &[f64]) -> RVec {
        self.a0(x) * self.a_scale(t)
    }

    fn jac_a(&self, t: f64, x: &[f64]) -> RMat {
        let d = self.d;
        let s = self.a_scale(t);
        let mut j = RMat::zeros(d, d);
        match &self.vector {
            VectorPotential::Zero | VectorPotential::Constant(_) => {}
            VectorPotential::UniformB(b) => {
                j[(0, 1)] = -0.5 * b;
                j[(1, 0)] = 0.5 * b;
            }
            VectorPotential::Sine(a) => {
                j[(0, 1)] = -a * x[1].cos();
                j[(1, 0)] = a * x[0].cos();
            }
        }
        j * s
    }

    fn hess_a(&self, t: f64, x: &[f64]) -> Tensor3 {
        let mut h = Tensor3::zeros(self.d);
        if let VectorPotential::Sine(a) = &self.vector {
            let s = self.a_scale(t);
            h[(0, 1, 1)] = a * x[1].sin() * s;
            h[(1, 0, 0)] = -a * x[0].sin() * s;
        }
        h
    }

    fn third_a(&self, t: f64, x: &[f64]) -> Tensor4 {
        let mut h = Tensor4::zeros(self.d);
        if let VectorPotential::Sine(a) = &self.vector {
            let s = self.a_scale(t);
            h[(0, 1, 1, 1)] = a * x[1].cos() * s;
            h[(1, 0, 0, 0)] = -a * x[0].cos() * s;
        }
        h
    }

    fn v(&self, t: f64, x: &[f64]) -> f64 {
        self.v0(x) * self.v_scale(t)
    }

    fn grad_v(&self, t: f64, x: &[f64]) -> RVec {
        let mut g = RVec::zeros(self.d);
        for s in &self.scalars {
            for j in 0..self.d {
                g[j] += match s {
                    ScalarTerm::Harmonic(w) => w[j] * w[j] * x[j],
                    ScalarTerm::Torsional(c) => c * x[j].sin(),
                };
            }
        }
        g * self.v_scale(t)
    }

    fn hess_v(&self, t: f64, x: &[f64]) -> RMat {
        let mut h = RMat::zeros(self.d, self.d);
        for s in &self.scalars {
            for j in 0..self.d {
                h[(j, j)] += match s {
                    ScalarTerm::Harmonic(w) => w[j] * w[j],
                    ScalarTerm::Torsional(c) => c * x[j].cos(),
                };
            }
        }
        h * self.v_scale(t)
    }

    fn dt_a(&self, t: f64, x: &[f64]) -> RVec {
        self.a0(x) * self.a_rate(t)
    }

    fn dt_v(&self, t: f64, x: &[f64]) -> f64 {
        self.v0(x) * self.v_rate(t)
    }
}

/// A field in a different gauge, A + ∇χ with χ(x) = Σ_k amp_k cos(w_k·x + φ_k).
/// The physics is unchanged but div A generally is not zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeShifted<F> {
    inner: F,
    chi: Vec<(f64, Vec<f64>, f64)>,
}

impl<F: FieldSet> GaugeShifted<F> {
    /// Each term of χ is (amplitude, wave vector of length d, phase).
    pub fn new(inner: F, chi: Vec<(f64, Vec<f64>, f64)>) -> Result<Self> {
        let d = inner.dim();
        for (amp, w, ph) in &chi {
            if w.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: w.len(),
                });
            }
            if !amp.is_finite() || !ph.is_finite() || w.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("gauge terms must be finite".into()));
            }
        }
        Ok(Self { inner, chi })
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }

    /// ∂^idx χ(x).
    fn chi_derivative(&self, x: &[f64], idx: &[usize]) -> f64 {
        let k = idx.len();
        self.chi
            .iter()
            .map(|(amp, w, ph)| {
                let arg = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + ph;
                let prefactor: f64 = idx.iter().map(|&i| w[i]).product();
                amp * prefactor * (arg + k as f64 * std::f64::consts::FRAC_PI_2).cos()
            })
            .sum()
    }
}

impl<F: FieldSet> FieldSet for GaugeShifted<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn is_autonomous(&self) -> bool {
        self.inner.is_autonomous()
    }

    fn a(&self, t: f64, x: &[f64]) -> RVec {
        let mut a = self.inner.a(t, x);
        for k in 0..a.len() {
            a[k] += self.chi_derivative(x, &[k]);
        }
        a
    }

    fn jac_a(&self, t: f64, x: &[f64]) -> RMat {
        let mut j = self.inner.jac_a(t, x);
        let d = self.dim();
        for k in 0..d {
            for m in 0..d {
                j[(k, m)] += self.chi_derivative(x, &[k, m]);
            }
        }
        j
    }

    fn hess_a(&self, t: f64, x: &[f64]) -> Tensor3 {
        let mut h = self.inner.hess_a(t, x);
        let d = self.dim();
        for k in 0..d {
            for l in 0..d {
                for m in 0..d {
                    h[(k, l, m)] += self.chi_derivative(x, &[k, l, m]);
                }
            }
        }
        h
    }

    fn third_a(&self, t: f64, x: &[f64]) -> Tensor4 {
        let mut h = self.inner.third_a(t, x);
        let d = self.dim();
        for k in 0..d {
            for l in 0..d {
                for m in 0..d {
                    for n in 0..d {
                        h[(k, l, m, n)] += self.chi_derivative(x, &[k, l, m, n]);
                    }
                }
            }
        }
        h
    }

    fn v(&self, t: f64, x: &[f64]) -> f64 {
        self.inner.v(t, x)
    }

    fn grad_v(&self, t: f64, x: &[f64]) -> RVec {
        self.inner.grad_v(t, x)
    }

    fn hess_v(&self, t: f64, x: &[f64]) -> RMat {
        self.inner.hess_v(t, x)
    }

    fn dt_a(&self, t: f64, x: &[f64]) -> RVec {
        self.inner.dt_a(t, x)
    }

    fn dt_v(&self, t: f64, x: &[f64]) -> f64 {
        self.inner.dt_v(t, x)
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 7] = [
    "free",
    "harmonic",
    "torsional",
    "constant_a",
    "constant_b_2d",
    "sine_field_2d",
    "combo_2d",
];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FreeParams {
    #[serde(default = "one")]
    dim: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HarmonicParams {
    omega: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TorsionalParams {
    c: f64,
    #[serde(default = "one")]
    dim: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantAParams {
    a: Vec<f64>,
    omega: Option<Vec<f64>>,
    torsional: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantBParams {
    b: f64,
    omega: Option<Vec<f64>>,
    torsional: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SineParams {
    a: f64,
    omega: Option<Vec<f64>>,
    torsional: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComboParams {
    a: f64,
    omega: Vec<f64>,
    #[serde(default)]
    delta: f64,
    #[serde(default = "one_f")]
    freq: f64,
    #[serde(default = "both")]
    modulate: String,
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn both() -> String {
    "both".into()
}

fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite")))
    }
}

fn finite_vec(name: &str, v: &[f64], len: usize) -> Result<Vec<f64>> {
    if v.len() != len {
        return Err(Error::InvalidParameter(format!(
            "{name} must have {len} entries, got {}",
            v.len()
        )));
    }
    for &x in v {
        finite(name, x)?;
    }
    Ok(v.to_vec())
}

fn parse<T: for<'de> Deserialize<'de>>(name: &str, params: &Value) -> Result<T> {
    if let Some(obj) = params.as_object() {
        for key in ["cubic", "quartic", "anharmonic"] {
            if obj.contains_key(key) {
                return Err(Error::InvalidParameter(format!(
                    "`{key}` terms grow faster than quadratically and are not admissible"
                )));
            }
        }
    }
    let params = if params.is_null() {
        Value::Object(Default::default())
    } else {
        params.clone()
    };
    serde_json::from_value(params)
        .map_err(|e| Error::InvalidParameter(format!("{name}: {e}")))
}

fn optional_scalars(omega: Option<Vec<f64>>, torsional: Option<f64>, d: usize) -> Result<Vec<ScalarTerm>> {
    let mut out = Vec::new();
    if let Some(w) = omega {
        out.push(ScalarTerm::Harmonic(finite_vec("omega", &w, d)?));
    }
    if let Some(c) = torsional {
        out.push(ScalarTerm::Torsional(finite("torsional", c)?));
    }
    Ok(out)
}

/// Builds a field from the builtin catalog. `params` is a JSON object whose keys
/// depend on `name`; unknown keys are rejected.
pub fn builtin(name: &str, params: &Value) -> Result<Composite> {
    let field = match name {
        "free" => {
            let p: FreeParams = parse(name, params)?;
            if p.dim == 0 || p.dim > 3 {
                return Err(Error::InvalidParameter("dim must be 1, 2 or 3".into()));
            }
            Composite {
                d: p.dim,
                vector: VectorPotential::Zero,
                scalars: vec![],
                modulation: None,
            }
        }
        "harmonic" => {
            let p: HarmonicParams = parse(name, params)?;
            let d = p.omega.len();
            if d == 0 {
                return Err(Error::InvalidParameter("omega must be non-empty".into()));
            }
            Composite {
                d,
                vector: VectorPotential::Zero,
                scalars: vec![ScalarTerm::Harmonic(finite_vec("omega", &p.omega, d)?)],
                modulation: None,
            }
        }
        "torsional" => {
            let p: TorsionalParams = parse(name, params)?;
            if p.dim == 0 || p.dim > 3 {
                return Err(Error::InvalidParameter("dim must be 1, 2 or 3".into()));
            }
            Composite {
                d: p.dim,
                vector: VectorPotential::Zero,
                scalars: vec![ScalarTerm::Torsional(finite("c", p.c)?)],
                modulation: None,
            }
        }
        "constant_a" => {
            let p: ConstantAParams = parse(name, params)?;
            let d = p.a.len();
            if d == 0 {
                return Err(Error::InvalidParameter("a must be non-empty".into()));
            }
            Composite {
                d,
                vector: VectorPotential::Constant(finite_vec("a", &p.a, d)?),
                scalars: optional_scalars(p.omega, p.torsional, d)?,
                modulation: None,
            }
        }
        "constant_b_2d" => {
            let p: ConstantBParams = parse(name, params)?;
            Composite {
                d: 2,
                vector: VectorPotential::UniformB(finite("b", p.b)?),
                scalars: optional_scalars(p.omega, p.torsional, 2)?,
                modulation: None,
            }
        }
        "sine_field_2d" => {
            let p: SineParams = parse(name, params)?;
            Composite {
                d: 2,
                vector: VectorPotential::Sine(finite("a", p.a)?),
                scalars: optional_scalars(p.omega, p.torsional, 2)?,
                modulation: None,
            }
        }
        "combo_2d" => {
            let p: ComboParams = parse(name, params)?;
            let (on_a, on_v) = match p.modulate.as_str() {
                "a" => (true, false),
                "v" => (false, true),
                "both" => (true, true),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "modulate must be \"a\", \"v\" or \"both\", got {other:?}"
                    )))
                }
            };
            let delta = finite("delta", p.delta)?;
            Composite {
                d: 2,
                vector: VectorPotential::Sine(finite("a", p.a)?),
                scalars: vec![ScalarTerm::Harmonic(finite_vec("omega", &p.omega, 2)?)],
                modulation: (delta != 0.0).then_some(Modulation {
                    delta,
                    freq: finite("freq", p.freq)?,
                    on_a,
                    on_v,
                }),
            }
        }
        other => return Err(Error::UnknownField(other.to_string())),
    };
    Ok(field)
}

/// Worst relative errors of analytic derivatives against central differences.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FdReport {
    pub jac_a: f64,
    pub hess_a: f64,
    pub third_a: f64,
    pub grad_v_eff: f64,
    pub hess_v_eff: f64,
}

impl FdReport {
    pub fn worst(&self) -> f64 {
        [
            self.jac_a,
            self.hess_a,
            self.third_a,
            self.grad_v_eff,
            self.hess_v_eff,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Compares each analytic tensor with central differences of the next lower one.
pub fn fd_check(fields: &dyn FieldSet, t: f64, x: &[f64], step: f64) -> FdReport {
    let d = fields.dim();
    let shifted = |j: usize, s: f64| {
        let mut y = x.to_vec();
        y[j] += s;
        y
    };
    let rel = |diff: f64, scale: f64| diff / scale.max(1.0);

    let jac = fields.jac_a(t, x);
    let hess = fields.hess_a(t, x);
    let third = fields.third_a(t, x);
    let gv = fields.grad_v_eff(t, x);
    let hv = fields.hess_v_eff(t, x);

    let mut r = FdReport::default();
    let mut e_jac: f64 = 0.0;
    let mut e_hess: f64 = 0.0;
    let mut e_third: f64 = 0.0;
    let mut e_gv: f64 = 0.0;
    let mut e_hv: f64 = 0.0;
    for m in 0..d {
        let (xp, xm) = (shifted(m, step), shifted(m, -step));
        let da = (fields.a(t, &xp) - fields.a(t, &xm)) / (2.0 * step);
        let dj = (fields.jac_a(t, &xp) - fields.jac_a(t, &xm)) / (2.0 * step);
        let hp = fields.hess_a(t, &xp);
        let hm = fields.hess_a(t, &xm);
        let dv = (fields.v_eff(t, &xp) - fields.v_eff(t, &xm)) / (2.0 * step);
        let dg = (fields.grad_v_eff(t, &xp) - fields.grad_v_eff(t, &xm)) / (2.0 * step);
        e_gv = e_gv.max((dv - gv[m]).abs());
        for k in 0..d {
            e_jac = e_jac.max((da[k] - jac[(k, m)]).abs());
            e_hv = e_hv.max((dg[k] - hv[(k, m)]).abs());
            for l in 0..d {
                e_hess = e_hess.max((dj[(k, l)] - hess[(k, l, m)]).abs());
                for n in 0..d {
                    let fd = (hp[(k, l, n)] - hm[(k, l, n)]) / (2.0 * step);
                    e_third = e_third.max((fd - third[(k, l, n, m)]).abs());
                }
            }
        }
    }
    r.jac_a = rel(e_jac, jac.amax());
    r.hess_a = rel(e_hess, hess.max_abs());
    r.third_a = rel(e_third, third.max_abs());
    r.grad_v_eff = rel(e_gv, gv.amax());
    r.hess_v_eff = rel(e_hv, hv.amax());
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn harmonic_symbol_has_identity_hessian() {
        let f = builtin("harmonic", &json!({"omega": [1.0, 1.0]})).unwrap();
        let h = hamiltonian_symbol(&f);
        let z = [0.3, -0.2, 0.5, 0.1];
        let expect = 0.5 * z.iter().map(|v| v * v).sum::<f64>();
        assert!((h.value(0.0, &z) - expect).abs() < 1e-15);
        assert!((h.hess(0.0, &z) - RMat::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn uniform_b_jacobian_is_constant() {
        let f = builtin("constant_b_2d", &json!({"b": 1.0})).unwrap();
        let j = f.jac_a(0.0, &[0.7, -1.1]);
        assert_eq!(j, RMat::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]));
        assert_eq!(f.div_a(0.0, &[0.7, -1.1]), 0.0);
    }

    #[test]
    fn uniform_b_symbol_scalar_oracle() {
        let f = builtin("constant_b_2d", &json!({"b": 1.0})).unwrap();
        let h = hamiltonian_symbol(&f);
        let z = [1.0, 0.0, 0.0, 1.0];
        // A(1,0) = (0, 1/2), so A·p = 1/2; |A|²/2 = 1/8.
        assert!((h.value(0.0, &z) - (0.5 - 0.5 + 0.125)).abs() < 1e-15);
    }

    #[test]
    fn unknown_and_cubic_rejected() {
        assert!(matches!(
            builtin("quartic_well", &json!({})),
            Err(Error::UnknownField(_))
        ));
        assert!(builtin("harmonic", &json!({"omega": [1.0], "cubic": 0.1})).is_err());
        assert!(builtin("sine_field_2d", &json!({"a": 0.2, "bogus": 1})).is_err());
        assert!(builtin("constant_b_2d", &json!({"b": 1.0, "omega": [1.0]})).is_err());
        assert!(builtin("harmonic", &json!({"omega": [f64::NAN]})).is_err());
    }

    #[test]
    fn corrupted_jacobian_is_caught() {
        struct Broken(Composite);
        impl FieldSet for Broken {
            fn dim(&self) -> usize {
                2
            }
            fn a(&self, t: f64, x: &[f64]) -> RVec {
                self.0.a(t, x)
            }
            fn jac_a(&self, t: f64, x: &[f64]) -> RMat {
                self.0.jac_a(t, x) + RMat::identity(2, 2)
            }
            fn hess_a(&self, t: f64, x: &[f64]) -> Tensor3 {
                self.0.hess_a(t, x)
            }
            fn third_a(&self, t: f64, x: &[f64]) -> Tensor4 {
                self.0.third_a(t, x)
            }
            fn v(&self, t: f64, x: &[f64]) -> f64 {
                self.0.v(t, x)
            }
            fn grad_v(&self, t: f64, x: &[f64]) -> RVec {
                self.0.grad_v(t, x)
            }
            fn hess_v(&self, t: f64, x: &[f64]) -> RMat {
                self.0.hess_v(t, x)
            }
            fn dt_a(&self, t: f64, x: &[f64]) -> RVec {
                self.0.dt_a(t, x)
            }
            fn dt_v(&self, t: f64, x: &[f64]) -> f64 {
                self.0.dt_v(t, x)
            }
        }
        let f = Broken(builtin("sine_field_2d", &json!({"a": 0.2})).unwrap());
        let r = fd_check(&f, 0.0, &[0.3, 0.4], 1e-4);
        assert!(r.jac_a > 0.5, "{r:?}");
    }
}
