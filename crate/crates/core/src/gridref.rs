//! Spectral reference solver on a periodic box: pseudo-spectral application of
//! the magnetic Hamiltonian, Lanczos time stepping, Weyl quantization in one
//! dimension, and error metrics against Gaussian packets.

use std::f64::consts::PI;
use std::cell::RefCell;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::fields::{FieldSet, Symbol};
use crate::linalg::CMat;
use crate::packet::GaussianPacket;

pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-10;
/// Per-step Lanczos error target on unit-norm states.
pub const KRYLOV_TOL: f64 = 1e-12;

/// Uniform periodic grid on Π_j [center_j − L_j, center_j + L_j).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: Vec<usize>,
    center: Vec<f64>,
    half_width: Vec<f64>,
}

impl Grid {
    pub fn new(n: Vec<usize>, center: Vec<f64>, half_width: Vec<f64>) -> Result<Self> {
        let d = n.len();
        if d == 0 || d > 2 {
            return Err(Error::Unsupported(format!("grids need d in {{1, 2}}, got {d}")));
        }
        if center.len() != d || half_width.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: center.len().min(half_width.len()),
            });
        }
        for (&nj, &lj) in n.iter().zip(&half_width) {
            if nj < 16 || !nj.is_power_of_two() {
                return Err(Error::InvalidParameter(format!(
                    "grid size must be a power of two >= 16, got {nj}"
                )));
            }
            if !(lj > 0.0) || !lj.is_finite() {
                return Err(Error::InvalidParameter(format!("half width must be positive, got {lj}")));
            }
        }
        Ok(Self {
            n,
            center,
            half_width,
        })
    }

    /// Same number of points and half width on every axis.
    pub fn uniform(d: usize, n: usize, center: &[f64], half_width: f64) -> Result<Self> {
        Self::new(vec![n; d], center.to_vec(), vec![half_width; d])
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn half_width(&self) -> &[f64] {
        &self.half_width
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_width[axis] / self.n[axis] as f64
    }

    /// Volume element Π_j h_j.
    pub fn cell(&self) -> f64 {
        (0..self.dim()).map(|j| self.spacing(j)).product()
    }

    pub fn axis_points(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        let x0 = self.center[axis] - self.half_width[axis];
        (0..self.n[axis]).map(|i| x0 + i as f64 * h).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.n[axis];
        let dk = PI / self.half_width[axis];
        (0..n)
            .map(|m| {
                let mm = if m < n / 2 { m as i64 } else { m as i64 - n as i64 };
                mm as f64 * dk
            })
            .collect()
    }

    /// Wavenumbers for first derivatives: the Nyquist mode is dropped so that
    /// the discrete derivative stays real and skew-adjoint.
    pub fn derivative_wavenumbers(&self, axis: usize) -> Vec<f64> {
        let mut k = self.wavenumbers(axis);
        let n = k.len();
        k[n / 2] = 0.0;
        k
    }

    /// Calls `f(flat_index, x)` for every grid point in row-major order.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64])) {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|j| self.axis_points(j)).collect();
        match self.dim() {
            1 => {
                for (i, &x) in axes[0].iter().enumerate() {
                    f(i, &[x]);
                }
            }
            _ => {
                let n1 = self.n[1];
                for (i0, &x0) in axes[0].iter().enumerate() {
                    for (i1, &x1) in axes[1].iter().enumerate() {
                        f(i0 * n1 + i1, &[x0, x1]);
                    }
                }
            }
        }
    }

    /// Largest representable angular wavenumber per axis.
    pub fn k_max(&self, axis: usize) -> f64 {
        PI * self.n[axis] as f64 / (2.0 * self.half_width[axis])
    }
}

/// Planned FFTs for a grid.
///
/// In two dimensions the Fourier coefficients are stored transposed (axis 0
/// varies fastest), which saves one transpose per transform. Use
/// [`Spectral::mode`] to locate a coefficient.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    scratch: RefCell<Vec<Complex64>>,
    buffer: RefCell<Vec<Complex64>>,
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd: Vec<Arc<dyn Fft<f64>>> = grid.n.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv: Vec<Arc<dyn Fft<f64>>> = grid.n.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let scratch_len = fwd
            .iter()
            .chain(&inv)
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let buffer_len = if grid.dim() == 2 { grid.len() } else { 0 };
        Self {
            grid: grid.clone(),
            fwd,
            inv,
            scratch: RefCell::new(vec![Complex64::new(0.0, 0.0); scratch_len]),
            buffer: RefCell::new(vec![Complex64::new(0.0, 0.0); buffer_len]),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Mode index along `axis` of the flat Fourier-space index `i`.
    pub fn mode(&self, axis: usize, i: usize) -> usize {
        match (self.grid.dim(), axis) {
            (1, _) => i,
            (_, 0) => i % self.grid.n[0],
            _ => i / self.grid.n[0],
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        let mut scratch = self.scratch.borrow_mut();
        match self.grid.dim() {
            1 => self.fwd[0].process_with_scratch(data, &mut scratch),
            _ => {
                let (n0, n1) = (self.grid.n[0], self.grid.n[1]);
                let mut buf = self.buffer.borrow_mut();
                self.fwd[1].process_with_scratch(data, &mut scratch);
                transpose(data, &mut buf, n0, n1);
                self.fwd[0].process_with_scratch(&mut buf, &mut scratch);
                data.copy_from_slice(&buf);
            }
        }
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        let mut scratch = self.scratch.borrow_mut();
        match self.grid.dim() {
            1 => self.inv[0].process_with_scratch(data, &mut scratch),
            _ => {
                let (n0, n1) = (self.grid.n[0], self.grid.n[1]);
                let mut buf = self.buffer.borrow_mut();
                self.inv[0].process_with_scratch(data, &mut scratch);
                transpose(data, &mut buf, n1, n0);
                self.inv[1].process_with_scratch(&mut buf, &mut scratch);
                data.copy_from_slice(&buf);
            }
        }
        let s = 1.0 / self.grid.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    /// ∂_axis ψ by spectral differentiation.
    pub fn derivative(&self, psi: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut f = psi.to_vec();
        self.forward(&mut f);
        let k = self.grid.derivative_wavenumbers(axis);
        for (i, v) in f.iter_mut().enumerate() {
            *v *= Complex64::new(0.0, k[self.mode(axis, i)]);
        }
        self.inverse(&mut f);
        f
    }

    /// Per-coefficient wavenumber along `axis` (Nyquist dropped when
    /// `derivative` is set), in Fourier-space storage order.
    pub fn axis_wavenumbers(&self, axis: usize, derivative: bool) -> Vec<f64> {
        let k = if derivative {
            self.grid.derivative_wavenumbers(axis)
        } else {
            self.grid.wavenumbers(axis)
        };
        (0..self.grid.len()).map(|i| k[self.mode(axis, i)]).collect()
    }

    /// |k|² in Fourier-space storage order.
    pub fn k_squared(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for axis in 0..self.grid.dim() {
            for (o, k) in out.iter_mut().zip(self.axis_wavenumbers(axis, false)) {
                *o += k * k;
            }
        }
        out
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 32;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub grid: Grid,
    pub psi: Vec<Complex64>,
    pub t: f64,
    /// Estimated packet mass outside the box when the state was sampled.
    pub boundary_mass: f64,
}

impl GridState {
    pub fn zeros(grid: &Grid, t: f64) -> Self {
        Self {
            grid: grid.clone(),
            psi: vec![Complex64::new(0.0, 0.0); grid.len()],
            t,
            boundary_mass: 0.0,
        }
    }

    /// Discrete inner product ⟨self|other⟩ = Σ conj(self)·other·h^d.
    pub fn inner(&self, other: &GridState) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(inner_raw(&self.psi, &other.psi) * self.grid.cell())
    }

    pub fn norm_squared(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Little-endian dump: d, N per axis, L per axis, t, then re/im pairs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (2 + 2 * self.grid.dim() + 2 * self.psi.len()));
        out.extend((self.grid.dim() as u64).to_le_bytes());
        for &n in &self.grid.n {
            out.extend((n as u64).to_le_bytes());
        }
        for &l in &self.grid.half_width {
            out.extend(l.to_le_bytes());
        }
        out.extend(self.t.to_le_bytes());
        for z in &self.psi {
            out.extend(z.re.to_le_bytes());
            out.extend(z.im.to_le_bytes());
        }
        out
    }
}

fn inner_raw(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Upper bound for the packet mass outside the box: the per-axis Gaussian
/// marginal tails, summed over axes.
pub fn boundary_mass(packet: &GaussianPacket, grid: &Grid) -> Result<f64> {
    let cov = packet.c_im_inv()? * (0.5 * packet.eps);
    let n2 = packet.norm_squared()?;
    let mut mass = 0.0;
    for j in 0..grid.dim() {
        let s = (2.0 * cov[(j, j)]).sqrt();
        let lo = grid.center[j] - grid.half_width[j];
        let hi = grid.center[j] + grid.half_width[j];
        mass += 0.5 * libm::erfc((packet.q[j] - lo) / s) + 0.5 * libm::erfc((hi - packet.q[j]) / s);
    }
    Ok(mass * n2)
}

/// Samples a packet on the grid; fails if more than `tol` of its mass lies
/// outside the box.
pub fn sample_with_tol(packet: &GaussianPacket, grid: &Grid, t: f64, tol: f64) -> Result<GridState> {
    if packet.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: packet.dim(),
        });
    }
    let mass = boundary_mass(packet, grid)?;
    if !(mass <= tol) {
        return Err(Error::BoxTooSmall { mass, tol });
    }
    let mut psi = vec![Complex64::new(0.0, 0.0); grid.len()];
    grid.for_each_point(|i, x| psi[i] = packet.evaluate_unchecked(x));
    Ok(GridState {
        grid: grid.clone(),
        psi,
        t,
        boundary_mass: mass,
    })
}

pub fn sample(packet: &GaussianPacket, grid: &Grid) -> Result<GridState> {
    sample_with_tol(packet, grid, 0.0, DEFAULT_BOUNDARY_TOL)
}

/// Samples f on the grid.
pub fn sample_fn(grid: &Grid, t: f64, f: impl Fn(&[f64]) -> Complex64) -> GridState {
    let mut psi = vec![Complex64::new(0.0, 0.0); grid.len()];
    grid.for_each_point(|i, x| psi[i] = f(x));
    GridState {
        grid: grid.clone(),
        psi,
        t,
        boundary_mass: 0.0,
    }
}

/// The magnetic Hamiltonian frozen at one time, ready to apply on a grid.
///
/// The advection term is applied in the symmetric form
/// (iε/2)(A·∇ψ + ∇·(Aψ)), which equals iεA·∇ψ for divergence-free A and is
/// exactly Hermitian for the discrete spectral derivative.
pub struct HamiltonianOp {
    spectral: Spectral,
    eps: f64,
    a: Vec<Vec<f64>>,
    v_eff: Vec<f64>,
    /// (ε²/2)|k|².
    kinetic: Vec<f64>,
    kd: Vec<Vec<f64>>,
    magnetic: bool,
    work: RefCell<[Vec<Complex64>; 3]>,
}

impl HamiltonianOp {
    pub fn new(spectral: &Spectral, fields: &dyn FieldSet, eps: f64, t: f64) -> Result<Self> {
        let grid = spectral.grid();
        let d = grid.dim();
        if fields.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: fields.dim(),
            });
        }
        let n = grid.len();
        let mut a = vec![vec![0.0; n]; d];
        let mut v_eff = vec![0.0; n];
        grid.for_each_point(|i, x| {
            let av = fields.a(t, x);
            for j in 0..d {
                a[j][i] = av[j];
            }
            v_eff[i] = fields.v_eff(t, x);
        });
        let magnetic = a.iter().any(|c| c.iter().any(|&v| v != 0.0));
        let zero = vec![Complex64::new(0.0, 0.0); n];
        Ok(Self {
            spectral: spectral.clone(),
            eps,
            a,
            v_eff,
            kinetic: spectral.k_squared().into_iter().map(|k2| 0.5 * eps * eps * k2).collect(),
            kd: (0..d).map(|j| spectral.axis_wavenumbers(j, true)).collect(),
            magnetic,
            work: RefCell::new([zero.clone(), zero.clone(), zero]),
        })
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.apply_into(psi, &mut out);
        out
    }

    /// out = Hψ.
    pub fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let d = self.spectral.grid().dim();
        let mut work = self.work.borrow_mut();
        let [f, g, adv] = &mut *work;
        f.copy_from_slice(psi);
        self.spectral.forward(f);
        for ((o, v), k) in out.iter_mut().zip(f.iter()).zip(&self.kinetic) {
            *o = v * k;
        }
        if self.magnetic {
            let half = 0.5 * self.eps;
            adv.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for j in 0..d {
                // A_j ∂_j ψ in position space.
                for ((gv, fv), k) in g.iter_mut().zip(f.iter()).zip(&self.kd[j]) {
                    *gv = fv * Complex64::new(0.0, *k);
                }
                self.spectral.inverse(g);
                for ((o, gv), aj) in adv.iter_mut().zip(g.iter()).zip(&self.a[j]) {
                    *o += gv * aj;
                }
                // ∂_j(A_j ψ) accumulated in Fourier space.
                for ((gv, p), aj) in g.iter_mut().zip(psi).zip(&self.a[j]) {
                    *gv = p * aj;
                }
                self.spectral.forward(g);
                for ((o, gv), k) in out.iter_mut().zip(g.iter()).zip(&self.kd[j]) {
                    // (iε/2)·(ik)·ĝ
                    *o -= gv * (half * k);
                }
            }
            self.spectral.inverse(out);
            for ((o, av), (p, v)) in out.iter_mut().zip(adv.iter()).zip(psi.iter().zip(&self.v_eff)) {
                *o += Complex64::new(0.0, half) * av + p * v;
            }
        } else {
            self.spectral.inverse(out);
            for ((o, p), v) in out.iter_mut().zip(psi).zip(&self.v_eff) {
                *o += p * v;
            }
        }
    }
}

/// Hψ for the magnetic Hamiltonian at time t.
pub fn apply_h(t: f64, s: &GridState, fields: &dyn FieldSet, eps: f64) -> Result<GridState> {
    let spectral = Spectral::new(&s.grid);
    let op = HamiltonianOp::new(&spectral, fields, eps, t)?;
    Ok(GridState {
        grid: s.grid.clone(),
        psi: op.apply(&s.psi),
        t: s.t,
        boundary_mass: s.boundary_mass,
    })
}

/// One Lanczos approximation of exp(−iτH)ψ. Returns `None` when the error
/// estimate exceeds `tol` after `m_max` iterations.
fn lanczos_expm(
    op: &HamiltonianOp,
    psi: &[Complex64],
    tau: f64,
    m_max: usize,
    tol: f64,
    applications: &mut usize,
) -> Result<Option<Vec<Complex64>>> {
    let beta0 = inner_raw(psi, psi).re.sqrt();
    if beta0 == 0.0 {
        return Ok(Some(psi.to_vec()));
    }
    let n = psi.len();
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m_max);
    basis.push(psi.iter().map(|v| v / beta0).collect());
    let mut alpha: Vec<f64> = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    for j in 0..m_max {
        let mut w = op.apply(&basis[j]);
        *applications += 1;
        let a = inner_raw(&basis[j], &w).re;
        alpha.push(a);
        // Three-term recurrence, then a second pass against the two most
        // recent vectors to restore local orthogonality.
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= vi * a;
        }
        if j > 0 {
            let b_prev = beta[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= vi * b_prev;
            }
        }
        for v in &basis[j.saturating_sub(1)..] {
            let c = inner_raw(v, &w);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= c * vi;
            }
        }
        let b = inner_raw(&w, &w).re.sqrt();
        if !b.is_finite() || !a.is_finite() {
            return Err(Error::NonFinite("Lanczos iteration".into()));
        }
        let m = j + 1;
        let y = small_expm(&alpha, &beta, tau);
        let err = b * y[m - 1].norm();
        let done = err <= tol || b <= 1e-14 * alpha.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        if done {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (k, v) in basis.iter().enumerate() {
                let c = y[k] * beta0;
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += c * vi;
                }
            }
            return Ok(Some(out));
        }
        if m == m_max {
            break;
        }
        beta.push(b);
        basis.push(w.into_iter().map(|v| v / b).collect());
    }
    Ok(None)
}

/// exp(−iτT)e₁ for the symmetric tridiagonal T(alpha, beta).
fn small_expm(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<Complex64> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| {
                    let phase = Complex64::from_polar(1.0, -tau * eig.eigenvalues[k]);
                    phase * eig.eigenvectors[(i, k)] * eig.eigenvectors[(0, k)]
                })
                .sum()
        })
        .collect()
}

/// Statistics of a grid propagation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PropagationStats {
    pub steps: usize,
    pub halvings: usize,
    /// Hamiltonian applications, i.e. Lanczos iterations.
    pub applications: usize,
}

/// Propagates ψ from t0 to t1 with the midpoint-frozen Hamiltonian,
/// ψ ← exp(−i·dt·H(t + dt/2)/ε)ψ, each exponential by Lanczos. Steps whose
/// error estimate stays above 1e−12 are halved.
pub fn propagate(
    s0: &GridState,
    fields: &dyn FieldSet,
    eps: f64,
    t0: f64,
    t1: f64,
    dt: f64,
    krylov_dim: usize,
) -> Result<GridState> {
    Ok(propagate_with_stats(s0, fields, eps, t0, t1, dt, krylov_dim)?.0)
}

pub fn propagate_with_stats(
    s0: &GridState,
    fields: &dyn FieldSet,
    eps: f64,
    t0: f64,
    t1: f64,
    dt: f64,
    krylov_dim: usize,
) -> Result<(GridState, PropagationStats)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    if !(8..=64).contains(&krylov_dim) {
        return Err(Error::InvalidParameter(format!(
            "krylov_dim must lie in [8, 64], got {krylov_dim}"
        )));
    }
    let spectral = Spectral::new(&s0.grid);
    let mut psi = s0.psi.clone();
    let mut stats = PropagationStats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((s0.clone(), stats));
    }
    let steps = (span.abs() / dt).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    // Number of halvings that worked for the previous step.
    let mut level = 0u32;
    let mut t = t0;
    let frozen = if fields.is_autonomous() {
        Some(HamiltonianOp::new(&spectral, fields, eps, t0)?)
    } else {
        None
    };
    for i in 0..steps {
        let t_end = if i + 1 == steps { t1 } else { t0 + (i + 1) as f64 * h };
        let mut tt = t;
        while (t_end - tt) * span.signum() > 1e-14 * span.abs() {
            let sub = h / 2f64.powi(level as i32);
            let sub = if (t_end - tt).abs() < sub.abs() * (1.0 + 1e-9) { t_end - tt } else { sub };
            let built;
            let op = match &frozen {
                Some(op) => op,
                None => {
                    built = HamiltonianOp::new(&spectral, fields, eps, tt + 0.5 * sub)?;
                    &built
                }
            };
            match lanczos_expm(op, &psi, sub / eps, krylov_dim, KRYLOV_TOL, &mut stats.applications)? {
                Some(next) => {
                    psi = next;
                    tt += sub;
                    stats.steps += 1;
                }
                None => {
                    level += 1;
                    stats.halvings += 1;
                    if level > 30 {
                        return Err(Error::Krylov(format!("step size underflow near t = {tt}")));
                    }
                }
            }
        }
        t = t_end;
        if psi.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(format!("grid state at t = {t}")));
        }
    }
    Ok((
        GridState {
            grid: s0.grid.clone(),
            psi,
            t: t1,
            boundary_mass: s0.boundary_mass,
        },
        stats,
    ))
}

/// How a first-order observable f + g·p̃ is ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    /// g·(−iε∇); requires div g = 0.
    OneSided,
    /// ½(g·(−iε∇) + (−iε∇)·g), the Weyl ordering.
    Symmetric,
}

pub type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Observables whose Weyl quantization acts directly on grid states.
pub enum Observable {
    Position(usize),
    Momentum(usize),
    /// |p̃|², quantized as −ε²Δ.
    MomentumSquared,
    /// f(x) + g(x)·p̃.
    FirstOrder {
        f: ScalarFn,
        g: VectorFn,
        ordering: Ordering,
    },
}

impl Observable {
    /// Angular momentum x₁p̃₂ − x₂p̃₁ in d = 2.
    pub fn angular_momentum() -> Self {
        Observable::FirstOrder {
            f: Box::new(|_| 0.0),
            g: Box::new(|x| vec![-x[1], x[0]]),
            ordering: Ordering::OneSided,
        }
    }
}

/// Re⟨ψ|op(obs)ψ⟩.
pub fn observable_expect(s: &GridState, obs: &Observable, eps: f64) -> Result<f64> {
    let grid = &s.grid;
    let d = grid.dim();
    let spectral = Spectral::new(grid);
    let cell = grid.cell();
    let value = match obs {
        Observable::Position(j) => {
            check_axis(*j, d)?;
            let mut acc = 0.0;
            grid.for_each_point(|i, x| acc += x[*j] * s.psi[i].norm_sqr());
            acc * cell
        }
        Observable::Momentum(j) => {
            check_axis(*j, d)?;
            let dpsi = spectral.derivative(&s.psi, *j);
            (inner_raw(&s.psi, &dpsi) * Complex64::new(0.0, -eps)).re * cell
        }
        Observable::MomentumSquared => {
            let mut f = s.psi.clone();
            spectral.forward(&mut f);
            let k2 = spectral.k_squared();
            let parseval: f64 = f.iter().zip(&k2).map(|(v, k)| v.norm_sqr() * k).sum();
            eps * eps * parseval / grid.len() as f64 * cell
        }
        Observable::FirstOrder { f, g, ordering } => {
            let n = grid.len();
            let mut gv = vec![vec![0.0; n]; d];
            let mut fv = vec![0.0; n];
            grid.for_each_point(|i, x| {
                fv[i] = f(x);
                let gx = g(x);
                for j in 0..d {
                    gv[j][i] = gx[j];
                }
            });
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                acc += s.psi[i].norm_sqr() * fv[i];
            }
            let mi = Complex64::new(0.0, -eps);
            if *ordering == Ordering::OneSided {
                let mut div = vec![0.0; n];
                let mut gmax: f64 = 0.0;
                for j in 0..d {
                    let gc: Vec<Complex64> = gv[j].iter().map(|&v| Complex64::new(v, 0.0)).collect();
                    let dg = spectral.derivative(&gc, j);
                    for i in 0..n {
                        div[i] += dg[i].re;
                    }
                    gmax = gv[j].iter().fold(gmax, |m, v| m.max(v.abs()));
                }
                // Compare away from the box edges, where the periodic extension
                // of a non-periodic g produces spurious derivatives.
                let worst = interior_max(grid, &div);
                if worst > 1e-6 * gmax.max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "g is not divergence free (|div g| up to {worst:.3e}); use symmetric ordering"
                    )));
                }
            }
            for j in 0..d {
                let dpsi = spectral.derivative(&s.psi, j);
                let one: Complex64 = (0..n).map(|i| s.psi[i].conj() * gv[j][i] * dpsi[i]).sum();
                acc += mi * one;
            }
            if *ordering == Ordering::Symmetric {
                // ½(g·D + D·g) = g·D + ½ div g.
                let mut half = Complex64::new(0.0, 0.0);
                for j in 0..d {
                    let gpsi: Vec<Complex64> = (0..n).map(|i| s.psi[i] * gv[j][i]).collect();
                    let dg = spectral.derivative(&gpsi, j);
                    let dpsi = spectral.derivative(&s.psi, j);
                    for i in 0..n {
                        half += s.psi[i].conj() * (dg[i] - gv[j][i] * dpsi[i]);
                    }
                }
                acc += mi * 0.5 * half;
            }
            acc.re * cell
        }
    };
    Ok(value)
}

fn interior_max(grid: &Grid, v: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    let c = grid.center();
    let l = grid.half_width();
    grid.for_each_point(|i, x| {
        if (0..x.len()).all(|j| (x[j] - c[j]).abs() < 0.5 * l[j]) {
            worst = worst.max(v[i].abs());
        }
    });
    worst
}

fn check_axis(j: usize, d: usize) -> Result<()> {
    if j >= d {
        Err(Error::InvalidParameter(format!("axis {j} out of range for d = {d}")))
    } else {
        Ok(())
    }
}

/// Re⟨ψ|Hψ⟩.
pub fn energy(t: f64, s: &GridState, fields: &dyn FieldSet, eps: f64) -> Result<f64> {
    let hpsi = apply_h(t, s, fields, eps)?;
    Ok(s.inner(&hpsi)?.re)
}

/// Symbol values on the Weyl lattice: midpoint index s and FFT-ordered
/// momentum bin m. The Nyquist bin averages the two momenta ±k_{N/2}.
fn weyl_kernel_row(a: &dyn Symbol, grid: &Grid, eps: f64, t: f64, xbar: f64, out: &mut [Complex64]) {
    let k = grid.wavenumbers(0);
    let n = k.len();
    for m in 0..n {
        out[m] = if m == n / 2 {
            let kn = k[m].abs();
            Complex64::new(0.5 * (a.value(t, &[xbar, -eps * kn]) + a.value(t, &[xbar, eps * kn])), 0.0)
        } else {
            Complex64::new(a.value(t, &[xbar, eps * k[m]]), 0.0)
        };
    }
}

/// Kernel table K[s][r] with s = j + l ∈ [0, 2N−1) and r = (j − l) mod N, so
/// that op(a)[j][l] = K[j+l][(j−l) mod N].
fn weyl_table(a: &dyn Symbol, grid: &Grid, eps: f64, t: f64) -> Result<Vec<Vec<Complex64>>> {
    if grid.dim() != 1 || a.dim() != 1 {
        return Err(Error::Unsupported("Weyl quantization is implemented for d = 1".into()));
    }
    let n = grid.n()[0];
    if n > 2048 {
        return Err(Error::InvalidParameter(format!("Weyl matrices need N <= 2048, got {n}")));
    }
    let h = grid.spacing(0);
    let x0 = grid.center()[0] - grid.half_width()[0];
    let mut planner = FftPlanner::new();
    let inv = planner.plan_fft_inverse(n);
    let mut table = Vec::with_capacity(2 * n - 1);
    for s in 0..(2 * n - 1) {
        let xbar = x0 + 0.5 * s as f64 * h;
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        weyl_kernel_row(a, grid, eps, t, xbar, &mut row);
        inv.process(&mut row);
        for v in row.iter_mut() {
            *v /= n as f64;
        }
        table.push(row);
    }
    Ok(table)
}

/// Dense matrix of op_Weyl(a) on a one-dimensional grid; (Mψ)_j approximates
/// (op(a)ψ)(x_j).
pub fn weyl_quantize_1d(a: &dyn Symbol, grid: &Grid, eps: f64, t: f64) -> Result<CMat> {
    let table = weyl_table(a, grid, eps, t)?;
    let n = grid.n()[0];
    Ok(CMat::from_fn(n, n, |j, l| table[j + l][(j + n - l) % n]))
}

/// ⟨ψ|op_Weyl(a)ψ⟩ in d = 1 without forming the dense matrix.
pub fn weyl_expect_1d(a: &dyn Symbol, s: &GridState, eps: f64, t: f64) -> Result<f64> {
    let table = weyl_table(a, &s.grid, eps, t)?;
    let n = s.grid.n()[0];
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for l in 0..n {
            row += table[j + l][(j + n - l) % n] * s.psi[l];
        }
        acc += s.psi[j].conj() * row;
    }
    Ok(acc.re * s.grid.cell())
}

/// Discrete L² distance.
pub fn l2_error(a: &GridState, b: &GridState) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let s: f64 = a.psi.iter().zip(&b.psi).map(|(x, y)| (x - y).norm_sqr()).sum();
    Ok((s * a.grid.cell()).sqrt())
}

/// L² distance between a packet (sampled on the state's grid) and the state.
pub fn pack_vs_grid_error(packet: &GaussianPacket, s: &GridState) -> Result<f64> {
    let u = sample_with_tol(packet, &s.grid, s.t, f64::INFINITY)?;
    l2_error(&u, s)
}

/// Chooses a box that contains every center in `centers` with `margin` to
/// spare on each side, and a power-of-two resolution N ≥ max(16·2L/√ε, n_min)
/// that also resolves momenta up to `p_max`.
pub fn plan_grid(centers: &[Vec<f64>], margin: f64, eps: f64, p_max: f64, n_min: usize) -> Result<Grid> {
    let d = centers.first().map(|c| c.len()).unwrap_or(0);
    if d == 0 {
        return Err(Error::InvalidParameter("no centers to plan a grid".into()));
    }
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for c in centers {
        for j in 0..d {
            lo[j] = lo[j].min(c[j]);
            hi[j] = hi[j].max(c[j]);
        }
    }
    let center: Vec<f64> = (0..d).map(|j| 0.5 * (lo[j] + hi[j])).collect();
    let l = (0..d).map(|j| 0.5 * (hi[j] - lo[j]) + margin).fold(0.0, f64::max);
    let n_res = 32.0 * l / eps.sqrt();
    // k_max = πN/(2L) must exceed p_max/ε.
    let n_mom = 2.0 * l * p_max / (PI * eps);
    let n = (n_res.max(n_mom).ceil() as usize).max(n_min).max(16).next_power_of_two();
    Grid::uniform(d, n, &center, l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::uniform(1, 12, &[0.0], 1.0).is_err());
        assert!(Grid::uniform(3, 16, &[0.0; 3], 1.0).is_err());
        let g = Grid::uniform(2, 16, &[0.0, 1.0], 2.0).unwrap();
        assert_eq!(g.len(), 256);
        assert!((g.spacing(0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn fft_round_trip_2d() {
        let g = Grid::new(vec![16, 32], vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let sp = Spectral::new(&g);
        let data: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
        let mut f = data.clone();
        sp.forward(&mut f);
        sp.inverse(&mut f);
        let err: f64 = f.iter().zip(&data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn small_expm_identity_at_zero() {
        let y = small_expm(&[1.0, 2.0], &[0.5], 0.0);
        assert!((y[0] - 1.0).norm() < 1e-15 && y[1].norm() < 1e-15);
    }
}
