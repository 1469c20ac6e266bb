//! Runge–Kutta integration of the parameter equations, state flattening, and
//! the parameter-boundedness monitor.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::FieldSet;
use crate::linalg::{frob_c, CMat, RVec};
use crate::motion::{magnetic_energy, rhs_hagedorn, rhs_variational};
use crate::packet::{GaussianPacket, HagedornPacket};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with a maximal step; each interval
    /// between sample times is split into equal substeps.
    Rk4Fixed { step: f64 },
    /// Dormand–Prince 5(4) with PI step control; `tol` is used as both absolute
    /// and relative tolerance.
    Dp54Adaptive { tol: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: Stats,
}

/// Cubic Hermite interpolation between two accepted steps.
pub fn hermite(t0: f64, y0: &[f64], f0: &[f64], t1: f64, y1: &[f64], f1: &[f64], t: f64) -> Vec<f64> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    (0..y0.len())
        .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
        .collect()
}

fn axpy(y: &[f64], h: f64, terms: &[(&[f64], f64)]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (k, c) in terms {
        if *c != 0.0 {
            for (o, v) in out.iter_mut().zip(k.iter()) {
                *o += h * c * v;
            }
        }
    }
    out
}

fn check_finite(t: f64, y: &[f64]) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("state at t = {t}")))
    }
}

fn validate_samples(t0: f64, t1: f64, samples: &[f64]) -> Result<f64> {
    if t1 == t0 || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParameter("integration interval is empty".into()));
    }
    let dir = (t1 - t0).signum();
    let mut prev = None;
    for &s in samples {
        if (s - t0) * dir < 0.0 || (s - t1) * dir > 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sample time {s} outside [{t0}, {t1}]"
            )));
        }
        if let Some(p) = prev {
            if (s - p) * dir <= 0.0 {
                return Err(Error::InvalidParameter("sample times must be strictly monotone".into()));
            }
        }
        prev = Some(s);
    }
    Ok(dir)
}

/// Integrates y' = f(t, y) from t0 to t1 (either direction), recording the
/// state at every time in `samples`. Steps are shortened so that every sample
/// time is hit exactly. `monitor` runs after every accepted step and may abort.
pub fn integrate<F, M>(
    mut rhs: F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    method: Method,
    samples: &[f64],
    mut monitor: M,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    M: FnMut(f64, &[f64]) -> Result<()>,
{
    let dir = validate_samples(t0, t1, samples)?;
    check_finite(t0, y0)?;
    monitor(t0, y0)?;
    let mut traj = Trajectory {
        times: Vec::with_capacity(samples.len()),
        states: Vec::with_capacity(samples.len()),
        stats: Stats::default(),
    };
    let mut targets: Vec<f64> = samples.to_vec();
    if targets.last().map_or(true, |&s| s != t1) {
        targets.push(t1);
    }
    let recorded = samples.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut idx = 0;
    while idx < targets.len() && targets[idx] == t0 {
        traj.times.push(t0);
        traj.states.push(y.clone());
        idx += 1;
    }
    match method {
        Method::Rk4Fixed { step } => {
            if !(step > 0.0) {
                return Err(Error::InvalidParameter("rk4 step must be positive".into()));
            }
            for (n, &target) in targets.iter().enumerate().skip(idx) {
                let span = target - t;
                let m = ((span.abs() / step).ceil() as usize).max(1);
                let h = span / m as f64;
                for i in 0..m {
                    let k1 = rhs(t, &y)?;
                    let k2 = rhs(t + 0.5 * h, &axpy(&y, 0.5 * h, &[(&k1, 1.0)]))?;
                    let k3 = rhs(t + 0.5 * h, &axpy(&y, 0.5 * h, &[(&k2, 1.0)]))?;
                    let k4 = rhs(t + h, &axpy(&y, h, &[(&k3, 1.0)]))?;
                    y = axpy(&y, h / 6.0, &[(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)]);
                    t = if i + 1 == m { target } else { t + h };
                    traj.stats.evaluations += 4;
                    traj.stats.accepted += 1;
                    check_finite(t, &y)?;
                    monitor(t, &y)?;
                }
                if n < recorded {
                    traj.times.push(t);
                    traj.states.push(y.clone());
                }
            }
        }
        Method::Dp54Adaptive { tol } => {
            if !(tol > 0.0) {
                return Err(Error::InvalidParameter("tolerance must be positive".into()));
            }
            dp54(&mut rhs, &mut y, &mut t, t1, dir, tol, &targets[idx..], recorded.saturating_sub(idx), &mut traj, &mut monitor)?;
        }
    }
    Ok(traj)
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn err_norm(e: &[f64], y: &[f64], yn: &[f64], tol: f64) -> f64 {
    let n = e.len().max(1) as f64;
    let s: f64 = e
        .iter()
        .zip(y.iter().zip(yn))
        .map(|(e, (a, b))| {
            let sc = tol + tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn dp54<F, M>(
    rhs: &mut F,
    y: &mut Vec<f64>,
    t: &mut f64,
    t1: f64,
    dir: f64,
    tol: f64,
    targets: &[f64],
    recorded: usize,
    traj: &mut Trajectory,
    monitor: &mut M,
) -> Result<()>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    M: FnMut(f64, &[f64]) -> Result<()>,
{
    let span = (t1 - *t).abs();
    let h_min = 1e-12 * span;
    let mut k1 = rhs(*t, y)?;
    traj.stats.evaluations += 1;

    // Initial step guess (Hairer, Nørsett & Wanner, II.4).
    let scale: Vec<f64> = y.iter().map(|v| tol + tol * v.abs()).collect();
    let rms = |v: &[f64]| {
        (v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len().max(1) as f64).sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(&k1);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span);
    let y_probe = axpy(y, dir * h, &[(&k1, 1.0)]);
    let f_probe = rhs(*t + dir * h, &y_probe)?;
    traj.stats.evaluations += 1;
    let diff: Vec<f64> = f_probe.iter().zip(&k1).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    h = (100.0 * h).min(h1).min(span).max(h_min);

    let alpha = 0.7 / 5.0;
    let beta = 0.4 / 5.0;
    let mut err_prev: f64 = 1e-4;
    let mut ti = 0;
    while ti < targets.len() {
        let target = targets[ti];
        let remaining = (target - *t) * dir;
        // Stretch by up to 1% rather than leave a sliver before the target.
        let landing = h >= remaining * 0.99;
        let step = if landing { remaining } else { h };
        let hs = dir * step;
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        k.push(k1.clone());
        for s in 1..7 {
            let terms: Vec<(&[f64], f64)> = (0..s).map(|j| (k[j].as_slice(), A[s][j])).collect();
            let ys = axpy(y, hs, &terms);
            k.push(rhs(*t + C[s] * hs, &ys)?);
        }
        traj.stats.evaluations += 6;
        let y5 = {
            let terms: Vec<(&[f64], f64)> = (0..6).map(|j| (k[j].as_slice(), A[6][j])).collect();
            axpy(y, hs, &terms)
        };
        let e: Vec<f64> = (0..y.len())
            .map(|i| {
                let mut s = 0.0;
                for j in 0..7 {
                    let b5 = if j < 6 { A[6][j] } else { 0.0 };
                    s += (b5 - B4[j]) * k[j][i];
                }
                hs * s
            })
            .collect();
        let err = err_norm(&e, y, &y5, tol);
        if !err.is_finite() {
            h = step * 0.2;
            traj.stats.rejected += 1;
            if h < h_min {
                return Err(Error::StepUnderflow { t: *t, h });
            }
            continue;
        }
        if err <= 1.0 {
            *t = if landing { target } else { *t + hs };
            *y = y5;
            k1 = k.pop().expect("seven stages");
            traj.stats.accepted += 1;
            check_finite(*t, y)?;
            monitor(*t, y)?;
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-alpha) * err_prev.powf(beta)).clamp(0.2, 5.0)
            };
            err_prev = err.max(1e-4);
            if landing {
                if ti < recorded {
                    traj.times.push(*t);
                    traj.states.push(y.clone());
                }
                ti += 1;
                // Do not let a short landing step shrink the next one.
                h = h.max(step * fac);
            } else {
                h = step * fac;
            }
        } else {
            traj.stats.rejected += 1;
            let fac = (0.9 * err.powf(-alpha)).clamp(0.2, 1.0);
            h = step * fac;
        }
        if h < h_min {
            return Err(Error::StepUnderflow { t: *t, h });
        }
    }
    Ok(())
}

/// Packing of a parameter set into a real vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Packing {
    /// (q, p, Re C upper triangle, Im C upper triangle, Re ζ, Im ζ).
    Variational { d: usize },
    /// (q, p, Q, P as interleaved re/im row-major, Re ζ, Im ζ).
    Hagedorn { d: usize },
}

impl Packing {
    pub fn len(&self) -> usize {
        match *self {
            Packing::Variational { d } => 2 * d + d * (d + 1) + 2,
            Packing::Hagedorn { d } => 2 * d + 4 * d * d + 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatState {
    pub packing: Packing,
    pub data: Vec<f64>,
}

impl FlatState {
    pub fn from_variational(u: &GaussianPacket) -> Self {
        let d = u.dim();
        let mut data = Vec::with_capacity(Packing::Variational { d }.len());
        data.extend(u.q.iter());
        data.extend(u.p.iter());
        for part in [0, 1] {
            for i in 0..d {
                for j in i..d {
                    let z = u.c[(i, j)];
                    data.push(if part == 0 { z.re } else { z.im });
                }
            }
        }
        data.push(u.zeta.re);
        data.push(u.zeta.im);
        Self {
            packing: Packing::Variational { d },
            data,
        }
    }

    pub fn from_hagedorn(h: &HagedornPacket) -> Self {
        let d = h.dim();
        let mut data = Vec::with_capacity(Packing::Hagedorn { d }.len());
        data.extend(h.q.iter());
        data.extend(h.p.iter());
        for m in [&h.qm, &h.pm] {
            for i in 0..d {
                for j in 0..d {
                    data.push(m[(i, j)].re);
                    data.push(m[(i, j)].im);
                }
            }
        }
        data.push(h.zeta.re);
        data.push(h.zeta.im);
        Self {
            packing: Packing::Hagedorn { d },
            data,
        }
    }

    fn check(&self) -> Result<()> {
        if self.data.len() != self.packing.len() {
            return Err(Error::DimensionMismatch {
                expected: self.packing.len(),
                found: self.data.len(),
            });
        }
        Ok(())
    }

    pub fn to_variational(&self, eps: f64) -> Result<GaussianPacket> {
        self.check()?;
        let Packing::Variational { d } = self.packing else {
            return Err(Error::InvalidParameter("not a variational packing".into()));
        };
        unpack_variational(&self.data, d, eps)
    }

    pub fn to_hagedorn(&self, eps: f64) -> Result<HagedornPacket> {
        self.check()?;
        let Packing::Hagedorn { d } = self.packing else {
            return Err(Error::InvalidParameter("not a Hagedorn packing".into()));
        };
        unpack_hagedorn(&self.data, d, eps)
    }
}

pub(crate) fn unpack_variational(y: &[f64], d: usize, eps: f64) -> Result<GaussianPacket> {
    let q = RVec::from_column_slice(&y[0..d]);
    let p = RVec::from_column_slice(&y[d..2 * d]);
    let tri = d * (d + 1) / 2;
    let mut c = CMat::zeros(d, d);
    let mut n = 0;
    for i in 0..d {
        for j in i..d {
            let z = Complex64::new(y[2 * d + n], y[2 * d + tri + n]);
            c[(i, j)] = z;
            c[(j, i)] = z;
            n += 1;
        }
    }
    let zeta = Complex64::new(y[2 * d + 2 * tri], y[2 * d + 2 * tri + 1]);
    GaussianPacket::new(eps, q, p, c, zeta)
}

fn pack_variational_rate(r: &crate::motion::VariationalRate) -> Vec<f64> {
    let d = r.q.len();
    let mut out = Vec::with_capacity(Packing::Variational { d }.len());
    out.extend(r.q.iter());
    out.extend(r.p.iter());
    for part in [0, 1] {
        for i in 0..d {
            for j in i..d {
                let z = r.c[(i, j)];
                out.push(if part == 0 { z.re } else { z.im });
            }
        }
    }
    out.push(r.zeta.re);
    out.push(r.zeta.im);
    out
}

pub(crate) fn unpack_hagedorn(y: &[f64], d: usize, eps: f64) -> Result<HagedornPacket> {
    let q = RVec::from_column_slice(&y[0..d]);
    let p = RVec::from_column_slice(&y[d..2 * d]);
    let mut mats = [CMat::zeros(d, d), CMat::zeros(d, d)];
    let mut n = 2 * d;
    for m in mats.iter_mut() {
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = Complex64::new(y[n], y[n + 1]);
                n += 2;
            }
        }
    }
    let zeta = Complex64::new(y[n], y[n + 1]);
    let [qm, pm] = mats;
    HagedornPacket::new(eps, q, p, qm, pm, zeta)
}

fn pack_hagedorn_rate(r: &crate::motion::HagedornRate) -> Vec<f64> {
    let d = r.q.len();
    let mut out = Vec::with_capacity(Packing::Hagedorn { d }.len());
    out.extend(r.q.iter());
    out.extend(r.p.iter());
    for m in [&r.qm, &r.pm] {
        for i in 0..d {
            for j in 0..d {
                out.push(m[(i, j)].re);
                out.push(m[(i, j)].im);
            }
        }
    }
    out.push(r.zeta.re);
    out.push(r.zeta.im);
    out
}

/// Limits checked after every accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorThresholds {
    pub max_position: f64,
    pub max_momentum: f64,
    pub max_width: f64,
    pub rho_min: f64,
    pub max_symplectic_defect: f64,
}

impl Default for MonitorThresholds {
    fn default() -> Self {
        Self {
            max_position: 1e6,
            max_momentum: 1e6,
            max_width: 1e8,
            rho_min: crate::packet::DEFAULT_RHO_MIN,
            max_symplectic_defect: 1e-6,
        }
    }
}

fn violation(quantity: &str, t: f64, value: f64, limit: f64) -> Error {
    Error::Monitor {
        quantity: quantity.into(),
        t,
        value,
        limit,
    }
}

pub fn monitor_variational(t: f64, u: &GaussianPacket, th: &MonitorThresholds) -> Result<()> {
    let q = u.q.amax();
    if !(q <= th.max_position) {
        return Err(violation("max |q|", t, q, th.max_position));
    }
    let p = u.p.amax();
    if !(p <= th.max_momentum) {
        return Err(violation("max |p|", t, p, th.max_momentum));
    }
    let c = frob_c(&u.c);
    if !(c <= th.max_width) {
        return Err(violation("|C|", t, c, th.max_width));
    }
    let rho = u.min_width_eig();
    if !(rho >= th.rho_min) {
        return Err(violation("min eig Im C", t, rho, th.rho_min));
    }
    Ok(())
}

pub fn monitor_hagedorn(t: f64, h: &HagedornPacket, th: &MonitorThresholds) -> Result<()> {
    let (a, b) = h.symplectic_defects();
    let s = a.max(b);
    if !(s <= th.max_symplectic_defect) {
        return Err(violation("symplectic defect", t, s, th.max_symplectic_defect));
    }
    monitor_variational(t, &h.width_from()?, th)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub method: Method,
    pub quad_order: usize,
    pub thresholds: MonitorThresholds,
    /// Record ⟨H⟩ at every sample (one extra quadrature per sample).
    pub energy: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            method: Method::Dp54Adaptive { tol: 1e-10 },
            quad_order: crate::moments::DEFAULT_ORDER,
            thresholds: MonitorThresholds::default(),
            energy: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub norm_sq: f64,
    pub min_eig: f64,
    pub energy: Option<f64>,
    /// max of the two Hagedorn defects (Hagedorn runs only).
    pub symplectic_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketTrajectory<P> {
    pub times: Vec<f64>,
    pub packets: Vec<P>,
    pub diagnostics: Vec<Diagnostics>,
    pub stats: Stats,
}

/// Integrates the variational equations of motion and samples the packet.
pub fn propagate_variational(
    fields: &dyn FieldSet,
    u0: &GaussianPacket,
    t0: f64,
    t1: f64,
    samples: &[f64],
    settings: &Settings,
) -> Result<PacketTrajectory<GaussianPacket>> {
    let d = u0.dim();
    let eps = u0.eps;
    u0.validate(settings.thresholds.rho_min)?;
    let y0 = FlatState::from_variational(u0).data;
    let order = settings.quad_order;
    let traj = integrate(
        |t, y| {
            let u = unpack_variational(y, d, eps)?;
            Ok(pack_variational_rate(&rhs_variational(t, &u, fields, order)?))
        },
        &y0,
        t0,
        t1,
        settings.method,
        samples,
        |t, y| monitor_variational(t, &unpack_variational(y, d, eps)?, &settings.thresholds),
    )?;
    let mut packets = Vec::with_capacity(traj.times.len());
    let mut diagnostics = Vec::with_capacity(traj.times.len());
    for (t, y) in traj.times.iter().zip(&traj.states) {
        let u = unpack_variational(y, d, eps)?;
        diagnostics.push(Diagnostics {
            norm_sq: u.norm_squared()?,
            min_eig: u.min_width_eig(),
            energy: if settings.energy {
                Some(magnetic_energy(*t, &u, fields, order)?)
            } else {
                None
            },
            symplectic_defect: None,
        });
        packets.push(u);
    }
    Ok(PacketTrajectory {
        times: traj.times,
        packets,
        diagnostics,
        stats: traj.stats,
    })
}

/// Integrates the Hagedorn form of the equations of motion.
pub fn propagate_hagedorn(
    fields: &dyn FieldSet,
    h0: &HagedornPacket,
    t0: f64,
    t1: f64,
    samples: &[f64],
    settings: &Settings,
) -> Result<PacketTrajectory<HagedornPacket>> {
    let d = h0.dim();
    let eps = h0.eps;
    let y0 = FlatState::from_hagedorn(h0).data;
    let order = settings.quad_order;
    let traj = integrate(
        |t, y| {
            let h = unpack_hagedorn(y, d, eps)?;
            Ok(pack_hagedorn_rate(&rhs_hagedorn(t, &h, fields, order)?))
        },
        &y0,
        t0,
        t1,
        settings.method,
        samples,
        |t, y| monitor_hagedorn(t, &unpack_hagedorn(y, d, eps)?, &settings.thresholds),
    )?;
    let mut packets = Vec::with_capacity(traj.times.len());
    let mut diagnostics = Vec::with_capacity(traj.times.len());
    for (t, y) in traj.times.iter().zip(&traj.states) {
        let h = unpack_hagedorn(y, d, eps)?;
        let u = h.width_from()?;
        let (a, b) = h.symplectic_defects();
        diagnostics.push(Diagnostics {
            norm_sq: u.norm_squared()?,
            min_eig: u.min_width_eig(),
            energy: if settings.energy {
                Some(magnetic_energy(*t, &u, fields, order)?)
            } else {
                None
            },
            symplectic_defect: Some(a.max(b)),
        });
        packets.push(h);
    }
    Ok(PacketTrajectory {
        times: traj.times,
        packets,
        diagnostics,
        stats: traj.stats,
    })
}

/// `n + 1` equally spaced times from `t0` to `t1` inclusive.
pub fn linspace(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n)
        .map(|i| if i == n { t1 } else { t0 + (t1 - t0) * i as f64 / n as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rhs_is_constant() {
        for method in [Method::Rk4Fixed { step: 0.1 }, Method::Dp54Adaptive { tol: 1e-8 }] {
            let tr = integrate(|_, y| Ok(vec![0.0; y.len()]), &[1.0, -2.0], 0.0, 1.0, method, &[0.0, 0.5, 1.0], |_, _| Ok(())).unwrap();
            assert_eq!(tr.times, vec![0.0, 0.5, 1.0]);
            for s in &tr.states {
                assert_eq!(s, &vec![1.0, -2.0]);
            }
        }
    }

    #[test]
    fn exponential_decay_backward_and_forward() {
        let f = |_: f64, y: &[f64]| Ok(vec![-y[0]]);
        let fwd = integrate(f, &[1.0], 0.0, 2.0, Method::Dp54Adaptive { tol: 1e-10 }, &[2.0], |_, _| Ok(())).unwrap();
        assert!((fwd.states[0][0] - (-2f64).exp()).abs() < 1e-9);
        let back = integrate(f, &fwd.states[0], 2.0, 0.0, Method::Dp54Adaptive { tol: 1e-10 }, &[0.0], |_, _| Ok(())).unwrap();
        assert!((back.states[0][0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bad_samples_rejected() {
        let f = |_: f64, y: &[f64]| Ok(vec![0.0; y.len()]);
        assert!(integrate(f, &[0.0], 0.0, 1.0, Method::Rk4Fixed { step: 0.1 }, &[0.5, 0.2], |_, _| Ok(())).is_err());
        assert!(integrate(f, &[0.0], 0.0, 1.0, Method::Rk4Fixed { step: 0.1 }, &[1.5], |_, _| Ok(())).is_err());
    }

    #[test]
    fn packing_round_trip() {
        let mut u = GaussianPacket::standard(0.3, &[0.1, 0.2], &[0.3, 0.4]).unwrap();
        u.c[(0, 1)] = Complex64::new(0.5, 0.1);
        u.c[(1, 0)] = Complex64::new(0.5, 0.1);
        let f = FlatState::from_variational(&u);
        assert_eq!(f.data.len(), Packing::Variational { d: 2 }.len());
        assert_eq!(f.to_variational(0.3).unwrap(), u);
        let h = u.factor_width().unwrap();
        let g = FlatState::from_hagedorn(&h);
        assert_eq!(g.to_hagedorn(0.3).unwrap(), h);
        assert!(g.to_variational(0.3).is_err());
    }

    #[test]
    fn adversarial_rho_min() {
        let u = GaussianPacket::standard(0.3, &[0.0], &[0.0]).unwrap();
        let th = MonitorThresholds {
            rho_min: 2.0,
            ..Default::default()
        };
        let err = monitor_variational(0.0, &u, &th).unwrap_err();
        assert!(matches!(err, Error::Monitor { t, .. } if t == 0.0));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let y = |t: f64| t * t * t - t;
        let f = |t: f64| 3.0 * t * t - 1.0;
        let v = hermite(0.0, &[y(0.0)], &[f(0.0)], 2.0, &[y(2.0)], &[f(2.0)], 1.3);
        assert!((v[0] - y(1.3)).abs() < 1e-13);
    }
}
