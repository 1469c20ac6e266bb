//! Transport of classical observables along the Hamiltonian flow and the
//! comparison of quantum-evolved with classically transported expectations.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::fields::{FieldSet, Symbol};
use crate::gridref::{self, Grid};
use crate::linalg::{RMat, RVec};
use crate::moments;
use crate::motion::{classical_rhs, linearized_rhs_real};
use crate::odeint::{integrate, Method};
use crate::packet::GaussianPacket;

type CacheKey = (u64, u64, Vec<u64>);

/// The flow Φ^{t,s} of a Hamiltonian symbol: Φ^{t,s}(z̃) is the point reached
/// at time t by the trajectory that passes through z̃ at time s.
pub struct FlowMap<'a> {
    h: &'a dyn Symbol,
    tol: f64,
    cache: Mutex<HashMap<CacheKey, (RVec, RMat)>>,
}

impl<'a> FlowMap<'a> {
    pub fn new(h: &'a dyn Symbol, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("flow tolerance must be positive, got {tol}")));
        }
        Ok(Self {
            h,
            tol,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn symbol(&self) -> &dyn Symbol {
        self.h
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn flow(&self, t: f64, s: f64, z: &[f64]) -> Result<RVec> {
        if t == s {
            self.check(z)?;
            return Ok(RVec::from_column_slice(z));
        }
        let d2 = 2 * self.dim();
        let h = self.h;
        let traj = integrate(
            |tau, y| Ok(classical_rhs(tau, y, h).as_slice().to_vec()),
            z,
            s,
            t,
            Method::Dp54Adaptive { tol: self.tol },
            &[t],
            |_, _| Ok(()),
        )?;
        debug_assert_eq!(traj.states[0].len(), d2);
        Ok(RVec::from_vec(traj.states.into_iter().next().expect("one sample")))
    }

    /// Φ^{t,s}(z̃) together with DΦ^{t,s}(z̃), co-integrated with the
    /// linearized flow starting from the identity.
    pub fn flow_with_jacobian(&self, t: f64, s: f64, z: &[f64]) -> Result<(RVec, RMat)> {
        self.check(z)?;
        let n = 2 * self.dim();
        if t == s {
            return Ok((RVec::from_column_slice(z), RMat::identity(n, n)));
        }
        let key = (t.to_bits(), s.to_bits(), z.iter().map(|v| v.to_bits()).collect());
        if let Some(hit) = self.cache.lock().expect("flow cache").get(&key) {
            return Ok(hit.clone());
        }
        let mut y0 = z.to_vec();
        y0.extend(RMat::identity(n, n).as_slice());
        let h = self.h;
        let traj = integrate(
            |tau, y| {
                let (zz, mm) = y.split_at(n);
                let m = RMat::from_column_slice(n, n, mm);
                let mut out = classical_rhs(tau, zz, h).as_slice().to_vec();
                out.extend(linearized_rhs_real(tau, zz, &m, h).as_slice());
                Ok(out)
            },
            &y0,
            s,
            t,
            Method::Dp54Adaptive { tol: self.tol },
            &[t],
            |_, _| Ok(()),
        )?;
        let y = &traj.states[0];
        let out = (RVec::from_column_slice(&y[..n]), RMat::from_column_slice(n, n, &y[n..]));
        let mut cache = self.cache.lock().expect("flow cache");
        if cache.len() > 100_000 {
            cache.clear();
        }
        cache.insert(key, out.clone());
        Ok(out)
    }

    pub fn jacobian(&self, t: f64, s: f64, z: &[f64]) -> Result<RMat> {
        Ok(self.flow_with_jacobian(t, s, z)?.1)
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != 2 * self.dim() {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.dim(),
                found: z.len(),
            });
        }
        Ok(())
    }
}

pub fn flow(h: &dyn Symbol, t: f64, s: f64, z: &[f64], tol: f64) -> Result<RVec> {
    FlowMap::new(h, tol)?.flow(t, s, z)
}

pub fn flow_jacobian(h: &dyn Symbol, t: f64, s: f64, z: &[f64], tol: f64) -> Result<RMat> {
    FlowMap::new(h, tol)?.jacobian(t, s, z)
}

/// ‖DΦᵀ J DΦ − J‖_F.
pub fn symplectic_defect(m: &RMat) -> f64 {
    let j = crate::linalg::symplectic_j(m.nrows() / 2);
    (m.transpose() * &j * m - j).norm()
}

/// ã(z̃) = a(Φ^{t,s}(z̃)) for fixed (t, s).
///
/// The gradient uses the co-integrated Jacobian; the Hessian is a central
/// difference of that gradient. Integration failures surface as NaN through
/// the `Symbol` interface; use [`TransportedSymbol::try_value`] to see them.
pub struct TransportedSymbol<'a> {
    a: &'a dyn Symbol,
    flow: FlowMap<'a>,
    t: f64,
    s: f64,
    fd_step: f64,
}

pub fn transport<'a>(a: &'a dyn Symbol, h: &'a dyn Symbol, t: f64, s: f64, tol: f64) -> Result<TransportedSymbol<'a>> {
    if a.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: a.dim(),
        });
    }
    Ok(TransportedSymbol {
        a,
        flow: FlowMap::new(h, tol)?,
        t,
        s,
        fd_step: 1e-4,
    })
}

impl TransportedSymbol<'_> {
    pub fn times(&self) -> (f64, f64) {
        (self.t, self.s)
    }

    pub fn flow_map(&self) -> &FlowMap<'_> {
        &self.flow
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    pub fn try_value(&self, z: &[f64]) -> Result<f64> {
        let zt = self.flow.flow(self.t, self.s, z)?;
        Ok(self.a.value(self.t, zt.as_slice()))
    }

    pub fn try_grad(&self, z: &[f64]) -> Result<RVec> {
        let (zt, m) = self.flow.flow_with_jacobian(self.t, self.s, z)?;
        Ok(m.tr_mul(&self.a.grad(self.t, zt.as_slice())))
    }

    pub fn try_hess(&self, z: &[f64]) -> Result<RMat> {
        if self.t == self.s {
            return Ok(self.a.hess(self.t, z));
        }
        let n = z.len();
        let mut hm = RMat::zeros(n, n);
        for k in 0..n {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[k] += self.fd_step;
            zm[k] -= self.fd_step;
            let col = (self.try_grad(&zp)? - self.try_grad(&zm)?) / (2.0 * self.fd_step);
            hm.set_column(k, &col);
        }
        Ok((&hm + hm.transpose()) * 0.5)
    }
}

impl Symbol for TransportedSymbol<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn value(&self, _t: f64, z: &[f64]) -> f64 {
        self.try_value(z).unwrap_or(f64::NAN)
    }

    fn grad(&self, _t: f64, z: &[f64]) -> RVec {
        self.try_grad(z).unwrap_or_else(|_| RVec::from_element(z.len(), f64::NAN))
    }

    fn hess(&self, _t: f64, z: &[f64]) -> RMat {
        self.try_hess(z).unwrap_or_else(|_| RMat::from_element(z.len(), z.len(), f64::NAN))
    }

    fn partial(&self, t: f64, z: &[f64], alpha: &[usize]) -> Option<f64> {
        if self.t == self.s {
            return self.a.partial(t, z, alpha);
        }
        let idx = crate::fields::expand_index(alpha);
        match idx.as_slice() {
            [] => Some(self.value(t, z)),
            [i] => Some(self.grad(t, z)[*i]),
            [i, j] => Some(self.hess(t, z)[(*i, *j)]),
            [.., last] => {
                // Central difference in the last coordinate of the lower-order derivative.
                let mut lower = alpha.to_vec();
                lower[*last] -= 1;
                let step = self.fd_step * 10.0;
                let mut zp = z.to_vec();
                let mut zm = z.to_vec();
                zp[*last] += step;
                zm[*last] -= step;
                Some((self.partial(t, &zp, &lower)? - self.partial(t, &zm, &lower)?) / (2.0 * step))
            }
        }
    }
}

/// How ⟨ψ(0)|op(ã)ψ(0)⟩ is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialSide {
    /// Dense Weyl quantization of ã on the grid, as for the final-time side.
    WeylMatrix,
    /// Phase-space average of ã against the Wigner function of the Gaussian
    /// initial state (Gauss–Hermite of the given order). Exact up to
    /// quadrature error because ψ(0) is a Gaussian.
    WignerAverage { order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgorovSettings {
    pub dt: f64,
    pub krylov_dim: usize,
    pub flow_tol: f64,
    pub initial: InitialSide,
}

impl Default for EgorovSettings {
    fn default() -> Self {
        Self {
            dt: 0.01,
            krylov_dim: 30,
            flow_tol: 1e-11,
            initial: InitialSide::WeylMatrix,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgorovReport {
    /// ⟨ψ(t)|op(a)ψ(t)⟩.
    pub quantum: f64,
    /// ⟨ψ(0)|op(ã(t,0))ψ(0)⟩.
    pub transported: f64,
    pub residual: f64,
    pub norm_drift: f64,
}

/// |⟨ψ(t)|op(a)ψ(t)⟩ − ⟨ψ(0)|op(a∘Φ^{t,0})ψ(0)⟩| for a one-dimensional
/// magnetic Hamiltonian (A constant in x) on the given grid.
pub fn egorov_residual(
    a: &dyn Symbol,
    fields: &dyn FieldSet,
    packet0: &GaussianPacket,
    t: f64,
    grid: &Grid,
    settings: &EgorovSettings,
) -> Result<EgorovReport> {
    if fields.dim() != 1 || grid.dim() != 1 || a.dim() != 1 || packet0.dim() != 1 {
        return Err(Error::Unsupported("the Egorov residual is computed in d = 1".into()));
    }
    let eps = packet0.eps;
    let probe = [-1.0, -0.3, 0.4, 1.3];
    for &x in &probe {
        if fields.jac_a(0.0, &[x]).norm() > 0.0 {
            return Err(Error::InvalidParameter(
                "in d = 1 the vector potential must be constant in x".into(),
            ));
        }
    }
    let psi0 = gridref::sample(packet0, grid)?;
    let psi_t = gridref::propagate(&psi0, fields, eps, 0.0, t, settings.dt, settings.krylov_dim)?;
    let quantum = gridref::weyl_expect_1d(a, &psi_t, eps, t)?;
    let h = crate::fields::hamiltonian_symbol(fields);
    let transported_symbol = transport(a, &h, t, 0.0, settings.flow_tol)?;
    let transported = if t == 0.0 {
        gridref::weyl_expect_1d(a, &psi0, eps, 0.0)?
    } else {
        match settings.initial {
            InitialSide::WeylMatrix => {
                let v = gridref::weyl_expect_1d(&transported_symbol, &psi0, eps, t)?;
                if !v.is_finite() {
                    return Err(Error::NonFinite("transported symbol on the Weyl lattice".into()));
                }
                v
            }
            InitialSide::WignerAverage { order } => {
                let n2 = packet0.norm_squared()?;
                let rule = moments::phase_rule(&packet0.normalize()?, order)?;
                let mut acc = 0.0;
                let mut err = None;
                rule.for_each(|z, w| match transported_symbol.try_value(z) {
                    Ok(v) => acc += w * v,
                    Err(e) => err = Some(e),
                });
                if let Some(e) = err {
                    return Err(e);
                }
                acc * n2
            }
        }
    };
    Ok(EgorovReport {
        quantum,
        transported,
        residual: (quantum - transported).abs(),
        norm_drift: (psi_t.norm_squared() - psi0.norm_squared()).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::QuadraticSymbol;

    fn harmonic() -> QuadraticSymbol {
        QuadraticSymbol::new(0.0, RVec::zeros(2), RMat::identity(2, 2)).unwrap()
    }

    #[test]
    fn identity_at_equal_times() {
        let h = harmonic();
        let fm = FlowMap::new(&h, 1e-10).unwrap();
        let (z, m) = fm.flow_with_jacobian(0.7, 0.7, &[0.3, -0.2]).unwrap();
        assert_eq!(z.as_slice(), &[0.3, -0.2]);
        assert_eq!(m, RMat::identity(2, 2));
    }

    #[test]
    fn harmonic_flow_is_rotation() {
        let h = harmonic();
        let t = 1.3;
        let (z, m) = FlowMap::new(&h, 1e-12).unwrap().flow_with_jacobian(t, 0.0, &[1.0, 0.0]).unwrap();
        assert!((z[0] - t.cos()).abs() < 1e-9 && (z[1] + t.sin()).abs() < 1e-9);
        let rot = RMat::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
        assert!((m - rot).norm() < 1e-9);
    }
}
