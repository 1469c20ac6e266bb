//! JSON experiment configuration.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use magpack_core::fields::{builtin, Composite, QuadraticSymbol};
use magpack_core::gridref::{Observable, Ordering};
use magpack_core::linalg::{CMat, RMat, RVec};
use magpack_core::odeint::{Method, Settings};
use magpack_core::packet::GaussianPacket;

use crate::error::{CliError, CliResult};
use crate::symbols::ObservableSymbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Propagate,
    Exactness,
    Conserve,
    ConvergeL2,
    ConvergeObs,
    EgorovCheck,
    MomentsSelftest,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Propagate => "propagate",
            Self::Exactness => "exactness",
            Self::Conserve => "conserve",
            Self::ConvergeL2 => "converge_l2",
            Self::ConvergeObs => "converge_obs",
            Self::EgorovCheck => "egorov_check",
            Self::MomentsSelftest => "moments_selftest",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    #[serde(default)]
    pub params: Value,
}

/// Initial Gaussian. The width defaults to i·Id; the packet is normalized
/// unless `normalize` is false.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub width_re: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub width_im: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub zeta_re: f64,
    #[serde(default)]
    pub zeta_im: f64,
    #[serde(default = "yes")]
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Dp54,
    Rk4,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default = "dp54")]
    pub method: MethodName,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_quad")]
    pub quad_order: usize,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            method: MethodName::Dp54,
            tol: default_tol(),
            step: default_step(),
            quad_order: default_quad(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Half width L of the box; planned from the packet trajectory if absent.
    #[serde(default)]
    pub half_width: Option<f64>,
    /// Points per axis; planned per ε if absent.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_krylov")]
    pub krylov_dim: usize,
    #[serde(default = "default_boundary")]
    pub boundary_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: None,
            n: None,
            dt: default_dt(),
            krylov_dim: default_krylov(),
            boundary_tol: default_boundary(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosTerm {
    pub amp: f64,
    pub wave: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OrderingName {
    OneSided,
    #[default]
    Symmetric,
}

/// Observables of the form f(x) + g(x)·p̃ plus |p̃|².
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Position {
        axis: usize,
    },
    Momentum {
        axis: usize,
    },
    MomentumSquared,
    AngularMomentum,
    /// f(x) = f0 + f1·x + Σ amp·cos(wave·x), g(x) = g0 + g1·x.
    FirstOrder {
        #[serde(default)]
        f0: f64,
        #[serde(default)]
        f1: Option<Vec<f64>>,
        #[serde(default)]
        g0: Option<Vec<f64>>,
        #[serde(default)]
        g1: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        cos: Vec<CosTerm>,
        #[serde(default)]
        ordering: OrderingName,
    },
}

/// Overrides for the pass/fail bands of an experiment.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaSpec {
    #[serde(default)]
    pub max_error: Option<f64>,
    #[serde(default)]
    pub slope_min: Option<f64>,
    #[serde(default)]
    pub slope_max: Option<f64>,
    #[serde(default)]
    pub norm_drift: Option<f64>,
    #[serde(default)]
    pub energy_drift: Option<f64>,
    #[serde(default)]
    pub momentum_drift: Option<f64>,
    #[serde(default)]
    pub energy_balance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub packet: Option<PacketSpec>,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub t_final: f64,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    /// Output CSV file name, relative to the output directory.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Number of output intervals for trajectory-type experiments.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub criteria: CriteriaSpec,
}

fn yes() -> bool {
    true
}
fn dp54() -> MethodName {
    MethodName::Dp54
}
fn default_tol() -> f64 {
    1e-10
}
fn default_step() -> f64 {
    0.01
}
fn default_quad() -> usize {
    20
}
fn default_dt() -> f64 {
    0.01
}
fn default_krylov() -> usize {
    30
}
fn default_boundary() -> f64 {
    1e-10
}
fn default_samples() -> usize {
    50
}

fn bad(field: &str, msg: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        message: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| bad(&schema_path(&e), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let needs_dynamics = self.experiment != ExperimentKind::MomentsSelftest;
        if needs_dynamics {
            let field = self.field.as_ref().ok_or_else(|| bad("field", "missing"))?;
            let packet = self.packet.as_ref().ok_or_else(|| bad("packet", "missing"))?;
            let f = self.fields()?;
            let d = f.d;
            if packet.q.len() != d || packet.p.len() != d {
                return Err(bad("packet", format!("q and p must have {d} entries for field {}", field.name)));
            }
            if self.eps.is_empty() {
                return Err(bad("eps", "at least one value is required"));
            }
            if self.eps.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
                return Err(bad("eps", "values must be positive"));
            }
            if self.eps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(bad("eps", "values must be strictly descending"));
            }
            if !(self.t_final > 0.0) || !self.t_final.is_finite() {
                return Err(bad("t_final", "must be positive"));
            }
            for e in &self.eps {
                self.packet(*e)?;
            }
        }
        let it = &self.integrator;
        if !(it.tol > 0.0) {
            return Err(bad("integrator.tol", "must be positive"));
        }
        if !(it.step > 0.0) {
            return Err(bad("integrator.step", "must be positive"));
        }
        if it.quad_order < 2 || it.quad_order > 80 {
            return Err(bad("integrator.quad_order", "must lie in [2, 80]"));
        }
        let g = &self.grid;
        if !(g.dt > 0.0) {
            return Err(bad("grid.dt", "must be positive"));
        }
        if !(8..=64).contains(&g.krylov_dim) {
            return Err(bad("grid.krylov_dim", "must lie in [8, 64]"));
        }
        if let Some(n) = g.n {
            if n < 16 || !n.is_power_of_two() {
                return Err(bad("grid.n", "must be a power of two >= 16"));
            }
        }
        if let Some(l) = g.half_width {
            if !(l > 0.0) {
                return Err(bad("grid.half_width", "must be positive"));
            }
        }
        if !(g.boundary_tol > 0.0) {
            return Err(bad("grid.boundary_tol", "must be positive"));
        }
        if self.samples == 0 {
            return Err(bad("samples", "must be positive"));
        }
        if needs_dynamics {
            let d = self.fields()?.d;
            for (i, o) in self.observables.iter().enumerate() {
                observable_check(o, d).map_err(|m| bad(&format!("observables[{i}]"), m))?;
            }
        }
        match self.experiment {
            ExperimentKind::ConvergeObs if self.observables.is_empty() => {
                Err(bad("observables", "converge_obs needs at least one observable"))
            }
            ExperimentKind::ConvergeL2 | ExperimentKind::ConvergeObs if self.eps.len() < 3 => {
                Err(bad("eps", "rate fits need at least three values"))
            }
            ExperimentKind::EgorovCheck if self.fields()?.d != 1 => {
                Err(bad("field", "egorov_check runs in d = 1"))
            }
            ExperimentKind::EgorovCheck if self.observables.len() != 1 => {
                Err(bad("observables", "egorov_check takes exactly one observable"))
            }
            ExperimentKind::Exactness if !self.fields()?.is_quadratic() => Err(bad(
                "field",
                "exactness needs a linear vector potential and a quadratic scalar potential",
            )),
            _ => Ok(()),
        }
    }

    pub fn fields(&self) -> CliResult<Composite> {
        let spec = self.field.as_ref().ok_or_else(|| bad("field", "missing"))?;
        builtin(&spec.name, &spec.params).map_err(|e| bad("field", e.to_string()))
    }

    pub fn packet(&self, eps: f64) -> CliResult<GaussianPacket> {
        let spec = self.packet.as_ref().ok_or_else(|| bad("packet", "missing"))?;
        let d = spec.q.len();
        let mat = |name: &str, m: &Option<Vec<Vec<f64>>>, default: RMat| -> CliResult<RMat> {
            match m {
                None => Ok(default),
                Some(rows) => {
                    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                        return Err(bad(&format!("packet.{name}"), format!("must be {d}x{d}")));
                    }
                    Ok(RMat::from_fn(d, d, |i, j| rows[i][j]))
                }
            }
        };
        let cr = mat("width_re", &spec.width_re, RMat::zeros(d, d))?;
        let ci = mat("width_im", &spec.width_im, RMat::identity(d, d))?;
        let c = CMat::from_fn(d, d, |i, j| Complex64::new(cr[(i, j)], ci[(i, j)]));
        let u = GaussianPacket::new(
            eps,
            RVec::from_column_slice(&spec.q),
            RVec::from_column_slice(&spec.p),
            c,
            Complex64::new(spec.zeta_re, spec.zeta_im),
        )
        .map_err(|e| bad("packet", e.to_string()))?;
        if spec.normalize {
            u.normalize().map_err(|e| bad("packet", e.to_string()))
        } else {
            Ok(u)
        }
    }

    pub fn settings(&self) -> Settings {
        let method = match self.integrator.method {
            MethodName::Dp54 => Method::Dp54Adaptive {
                tol: self.integrator.tol,
            },
            MethodName::Rk4 => Method::Rk4Fixed {
                step: self.integrator.step,
            },
        };
        Settings {
            method,
            quad_order: self.integrator.quad_order,
            ..Settings::default()
        }
    }

    pub fn observables(&self, d: usize) -> Vec<(String, Observable, ObservableSymbol)> {
        self.observables.iter().map(|o| build_observable(o, d)).collect()
    }
}

fn schema_path(e: &serde_json::Error) -> String {
    // serde reports unknown keys as "unknown field `x`"; surface the key.
    let msg = e.to_string();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    "config".to_string()
}

fn observable_check(o: &ObservableSpec, d: usize) -> Result<(), String> {
    match o {
        ObservableSpec::Position { axis } | ObservableSpec::Momentum { axis } if *axis >= d => {
            Err(format!("axis {axis} out of range for d = {d}"))
        }
        ObservableSpec::AngularMomentum if d != 2 => Err("angular momentum needs d = 2".into()),
        ObservableSpec::FirstOrder { f1, g0, g1, cos, .. } => {
            if f1.as_ref().is_some_and(|v| v.len() != d) {
                return Err(format!("f1 must have {d} entries"));
            }
            if g0.as_ref().is_some_and(|v| v.len() != d) {
                return Err(format!("g0 must have {d} entries"));
            }
            if g1.as_ref().is_some_and(|m| m.len() != d || m.iter().any(|r| r.len() != d)) {
                return Err(format!("g1 must be {d}x{d}"));
            }
            if cos.iter().any(|c| c.wave.len() != d) {
                return Err(format!("cos wave vectors must have {d} entries"));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Grid observable, phase-space symbol and a display name.
pub fn build_observable(o: &ObservableSpec, d: usize) -> (String, Observable, ObservableSymbol) {
    match o {
        ObservableSpec::Position { axis } => (
            format!("q{}", axis + 1),
            Observable::Position(*axis),
            ObservableSymbol::quadratic(QuadraticSymbol::coordinate(d, *axis)),
        ),
        ObservableSpec::Momentum { axis } => (
            format!("p{}", axis + 1),
            Observable::Momentum(*axis),
            ObservableSymbol::quadratic(QuadraticSymbol::coordinate(d, d + *axis)),
        ),
        ObservableSpec::MomentumSquared => (
            "p_squared".into(),
            Observable::MomentumSquared,
            ObservableSymbol::quadratic(QuadraticSymbol::momentum_squared(d)),
        ),
        ObservableSpec::AngularMomentum => {
            let mut s = RMat::zeros(4, 4);
            // x₁p̃₂ − x₂p̃₁
            s[(0, 3)] = 1.0;
            s[(3, 0)] = 1.0;
            s[(1, 2)] = -1.0;
            s[(2, 1)] = -1.0;
            (
                "angular_momentum".into(),
                Observable::angular_momentum(),
                ObservableSymbol::quadratic(QuadraticSymbol::new(0.0, RVec::zeros(4), s).expect("4x4")),
            )
        }
        ObservableSpec::FirstOrder {
            f0,
            f1,
            g0,
            g1,
            cos,
            ordering,
        } => {
            let f1v = f1.clone().unwrap_or_else(|| vec![0.0; d]);
            let g0v = g0.clone().unwrap_or_else(|| vec![0.0; d]);
            let g1m = g1.clone().unwrap_or_else(|| vec![vec![0.0; d]; d]);
            let mut lin = RVec::zeros(2 * d);
            let mut quad = RMat::zeros(2 * d, 2 * d);
            for j in 0..d {
                lin[j] = f1v[j];
                lin[d + j] = g0v[j];
                for k in 0..d {
                    // g_j(x) p̃_j ∋ g1[j][k] x_k p̃_j
                    quad[(k, d + j)] += g1m[j][k];
                    quad[(d + j, k)] += g1m[j][k];
                }
            }
            let cos_terms: Vec<(f64, Vec<f64>)> = cos.iter().map(|c| (c.amp, c.wave.clone())).collect();
            let sym = ObservableSymbol {
                quad: QuadraticSymbol::new(*f0, lin, quad).expect("even dimension"),
                cos: cos_terms.clone(),
            };
            let f0 = *f0;
            let f1c = f1v.clone();
            let f = Box::new(move |x: &[f64]| {
                let mut v = f0 + f1c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                for (amp, w) in &cos_terms {
                    v += amp * w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().cos();
                }
                v
            });
            let g = Box::new(move |x: &[f64]| {
                (0..g0v.len())
                    .map(|j| g0v[j] + g1m[j].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                    .collect()
            });
            let ordering = match ordering {
                OrderingName::OneSided => Ordering::OneSided,
                OrderingName::Symmetric => Ordering::Symmetric,
            };
            ("first_order".into(), Observable::FirstOrder { f, g, ordering }, sym)
        }
    }
}
