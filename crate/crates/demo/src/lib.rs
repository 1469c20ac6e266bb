//! Browser front end: a packet in one of the builtin 2D fields, exposed to
//! JavaScript as trajectories, Wigner marginals and position densities.
//!
//! Everything is plain Rust underneath so it can be tested natively; the
//! `#[wasm_bindgen]` layer only converts errors to strings.

use magpack_core::fields::{builtin, Composite};
use magpack_core::linalg::RMat;
use magpack_core::motion::magnetic_energy;
use magpack_core::odeint::{linspace, propagate_variational, Method, Settings};
use magpack_core::packet::{gram_inverse, GaussianPacket};
use num_complex::Complex64;
use serde_json::Value;
use wasm_bindgen::prelude::*;

/// Values per trajectory row: t, q1, q2, p1, p2, ‖u‖², ⟨H⟩.
pub const ROW: usize = 7;

pub struct Scene {
    fields: Composite,
    u0: GaussianPacket,
    tol: f64,
}

impl Scene {
    /// `field` is a builtin name; `params` its JSON parameters.
    pub fn new(field: &str, params: &str, eps: f64, q: [f64; 2], p: [f64; 2]) -> Result<Self, String> {
        let params: Value = serde_json::from_str(params).map_err(|e| format!("params: {e}"))?;
        let fields = builtin(field, &params).map_err(|e| e.to_string())?;
        if fields.d != 2 {
            return Err(format!("the demo draws 2D fields, `{field}` is {}D", fields.d));
        }
        let u0 = GaussianPacket::standard(eps, &q, &p).map_err(|e| e.to_string())?;
        Ok(Self { fields, u0, tol: 1e-8 })
    }

    fn settings(&self) -> Settings {
        Settings {
            method: Method::Dp54Adaptive { tol: self.tol },
            ..Settings::default()
        }
    }

    /// The packet at time t.
    pub fn packet_at(&self, t: f64) -> Result<GaussianPacket, String> {
        if t == 0.0 {
            return Ok(self.u0.clone());
        }
        let traj = propagate_variational(&self.fields, &self.u0, 0.0, t, &[t], &self.settings())
            .map_err(|e| e.to_string())?;
        Ok(traj.packets.into_iter().last().expect("one sample"))
    }

    /// Rows of [`ROW`] values at `samples + 1` equally spaced times.
    pub fn trajectory(&self, t_final: f64, samples: usize) -> Result<Vec<f64>, String> {
        let times = linspace(0.0, t_final, samples);
        let traj = propagate_variational(&self.fields, &self.u0, 0.0, t_final, &times, &self.settings())
            .map_err(|e| e.to_string())?;
        let mut out = Vec::with_capacity(ROW * traj.times.len());
        for (t, u) in traj.times.iter().zip(&traj.packets) {
            let energy = magnetic_energy(*t, u, &self.fields, 12).map_err(|e| e.to_string())?;
            out.extend([*t, u.q[0], u.q[1], u.p[0], u.p[1], u.norm_squared().map_err(|e| e.to_string())?, energy]);
        }
        Ok(out)
    }

    /// Marginal of the Wigner function on the (q_axis, p_axis) plane, sampled on
    /// an n×n grid of half-width `span` around the packet centre, row-major
    /// with q along rows. Returns the grid values followed by the four bounds
    /// q_min, q_max, p_min, p_max.
    pub fn wigner_marginal(&self, t: f64, axis: usize, n: usize, span: f64) -> Result<Vec<f64>, String> {
        if axis > 1 {
            return Err("axis must be 0 or 1".into());
        }
        let u = self.packet_at(t)?.normalize().map_err(|e| e.to_string())?;
        let cov = gram_inverse(&u.c).map_err(|e| e.to_string())? * (0.5 * u.eps);
        let idx = [axis, axis + 2];
        let block = RMat::from_fn(2, 2, |i, j| cov[(idx[i], idx[j])]);
        let inv = block.clone().try_inverse().ok_or("singular marginal covariance")?;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * block.determinant().sqrt());
        let (qc, pc) = (u.q[axis], u.p[axis]);
        let mut out = Vec::with_capacity(n * n + 4);
        for i in 0..n {
            for j in 0..n {
                let dq = span * (2.0 * j as f64 / (n - 1) as f64 - 1.0);
                let dp = span * (1.0 - 2.0 * i as f64 / (n - 1) as f64);
                let e = inv[(0, 0)] * dq * dq + 2.0 * inv[(0, 1)] * dq * dp + inv[(1, 1)] * dp * dp;
                out.push(norm * (-0.5 * e).exp());
            }
        }
        out.extend([qc - span, qc + span, pc - span, pc + span]);
        Ok(out)
    }

    /// |u(x)|² on an n×n grid of half-width `span` around the origin,
    /// row-major with x₂ decreasing down the rows.
    pub fn density(&self, t: f64, n: usize, span: f64) -> Result<Vec<f64>, String> {
        let u = self.packet_at(t)?.normalize().map_err(|e| e.to_string())?;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let x = [
                    span * (2.0 * j as f64 / (n - 1) as f64 - 1.0),
                    span * (1.0 - 2.0 * i as f64 / (n - 1) as f64),
                ];
                let v: Complex64 = u.evaluate_unchecked(&x);
                out.push(v.norm_sqr());
            }
        }
        Ok(out)
    }
}

#[wasm_bindgen]
pub struct Demo {
    scene: Scene,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(field: &str, params: &str, eps: f64, q1: f64, q2: f64, p1: f64, p2: f64) -> Result<Demo, JsValue> {
        Scene::new(field, params, eps, [q1, q2], [p1, p2])
            .map(|scene| Demo { scene })
            .map_err(|e| JsValue::from_str(&e))
    }

    pub fn trajectory(&self, t_final: f64, samples: usize) -> Result<Vec<f64>, JsValue> {
        self.scene.trajectory(t_final, samples).map_err(|e| JsValue::from_str(&e))
    }

    pub fn wigner(&self, t: f64, axis: usize, n: usize, span: f64) -> Result<Vec<f64>, JsValue> {
        self.scene.wigner_marginal(t, axis, n, span).map_err(|e| JsValue::from_str(&e))
    }

    pub fn density(&self, t: f64, n: usize, span: f64) -> Result<Vec<f64>, JsValue> {
        self.scene.density(t, n, span).map_err(|e| JsValue::from_str(&e))
    }
}
