//! Structural diagnostics of the variational dynamics that are not tied to a
//! single experiment config: symplecticity of the Hagedorn factors, the
//! tangent-space projection residual and the remainder cancellations.

use num_complex::Complex64;
use serde_json::json;

use magpack_core::fields::{builtin, hamiltonian_symbol, Composite, FieldSet, GaugeShifted};
use magpack_core::gridref::{self, Grid, GridState};
use magpack_core::linalg::{frob_c, CMat, RVec};
use magpack_core::motion::{projection_poly, remainder_potential};
use magpack_core::odeint::{linspace, propagate_hagedorn, propagate_variational, Method, Settings};
use magpack_core::packet::{GaussianPacket, TangentIndex};

use crate::error::CliResult;

/// The non-quadratic field used throughout: sine-field A with torsional V.
pub fn sine_field() -> CliResult<Composite> {
    Ok(builtin("sine_field_2d", &json!({"a": 0.2, "torsional": 1.0}))?)
}

/// The same field with A replaced by A + ∇χ, so that div A ≠ 0.
pub fn sine_field_shifted_gauge() -> CliResult<GaugeShifted<Composite>> {
    Ok(GaugeShifted::new(
        sine_field()?,
        vec![(0.3, vec![1.0, 0.5], 0.2), (0.15, vec![-0.4, 1.1], 1.0)],
    )?)
}

fn reference_packet(eps: f64) -> CliResult<GaussianPacket> {
    let c = CMat::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.2, 1.0),
            Complex64::new(0.1, 0.2),
            Complex64::new(0.1, 0.2),
            Complex64::new(-0.1, 0.8),
        ],
    );
    Ok(GaussianPacket::new(
        eps,
        RVec::from_vec(vec![0.3, -0.2]),
        RVec::from_vec(vec![0.5, 0.3]),
        c,
        Complex64::new(0.0, 0.0),
    )?
    .normalize()?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticReport {
    /// max over samples of ‖QᵀP − PᵀQ‖_F.
    pub transpose_defect: f64,
    /// max over samples of ‖Q*P − P*Q − 2i·Id‖_F.
    pub adjoint_defect: f64,
    /// max over samples of ‖PQ⁻¹ − C‖_F against the width trajectory.
    pub width_mismatch: f64,
}

/// Integrates the Hagedorn and the width form independently over [0, t_final]
/// and compares them at `samples + 1` times.
pub fn symplectic_structure(eps: f64, t_final: f64, samples: usize, tol: f64) -> CliResult<SymplecticReport> {
    let fields = sine_field()?;
    let u0 = reference_packet(eps)?;
    let h0 = u0.factor_width()?;
    let times = linspace(0.0, t_final, samples);
    let settings = Settings {
        method: Method::Dp54Adaptive { tol },
        ..Settings::default()
    };
    let hag = propagate_hagedorn(&fields, &h0, 0.0, t_final, &times, &settings)?;
    let var = propagate_variational(&fields, &u0, 0.0, t_final, &times, &settings)?;
    let mut out = SymplecticReport {
        transpose_defect: 0.0,
        adjoint_defect: 0.0,
        width_mismatch: 0.0,
    };
    for (h, u) in hag.packets.iter().zip(&var.packets) {
        let (a, b) = h.symplectic_defects();
        out.transpose_defect = out.transpose_defect.max(a);
        out.adjoint_defect = out.adjoint_defect.max(b);
        out.width_mismatch = out.width_mismatch.max(frob_c(&(h.width()? - &u.c)));
    }
    Ok(out)
}

/// A grid around the packet fine enough for its wave number content.
fn packet_grid(u: &GaussianPacket) -> CliResult<Grid> {
    let eps = u.eps;
    let sigma = (0.5 * eps / u.min_width_eig()).sqrt();
    let half_width = (9.0 * sigma).max(1.0);
    let needed = 32.0 * half_width / eps.sqrt();
    let n = (needed.ceil() as usize).next_power_of_two().max(64);
    Ok(Grid::uniform(2, n, u.q.as_slice(), half_width)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionReport {
    pub eps: f64,
    /// max_n |⟨φ_n, Hu − p₂u⟩| over |n| ≤ 2.
    pub orthogonality: f64,
    /// ‖Hu − p₂u‖.
    pub residual_norm: f64,
    /// ‖W_u u‖.
    pub w_norm: f64,
    /// ‖(Hu − p₂u) − W_u u‖.
    pub mismatch: f64,
}

/// Projection residual of the reference packet at t = 0, evaluated on a grid.
pub fn projection_point(eps: f64) -> CliResult<ProjectionReport> {
    let fields = sine_field()?;
    let u = reference_packet(eps)?;
    let grid = packet_grid(&u)?;
    let psi = gridref::sample(&u, &grid)?;
    let hu = gridref::apply_h(0.0, &psi, &fields, eps)?;
    let h = hamiltonian_symbol(&fields);
    let p2 = projection_poly(0.0, &u, &h, 24)?;
    let rem = remainder_potential(0.0, &u, &fields, 24)?;
    let mut residual = GridState::zeros(&grid, 0.0);
    let mut w_u = GridState::zeros(&grid, 0.0);
    grid.for_each_point(|i, x| {
        residual.psi[i] = hu.psi[i] - p2.eval(x) * psi.psi[i];
        w_u.psi[i] = rem.w(x) * psi.psi[i];
    });
    let hag = u.factor_width()?;
    let mut orthogonality: f64 = 0.0;
    for n in TangentIndex::all(2) {
        let mut phi = GridState::zeros(&grid, 0.0);
        let mut err = None;
        grid.for_each_point(|i, x| match hag.basis_eval(&n, x) {
            Ok(v) => phi.psi[i] = v,
            Err(e) => err = Some(e),
        });
        if let Some(e) = err {
            return Err(e.into());
        }
        orthogonality = orthogonality.max(phi.inner(&residual)?.norm());
    }
    let mut diff = residual.clone();
    for (d, w) in diff.psi.iter_mut().zip(&w_u.psi) {
        *d -= w;
    }
    Ok(ProjectionReport {
        eps,
        orthogonality,
        residual_norm: residual.norm(),
        w_norm: w_u.norm(),
        mismatch: diff.norm(),
    })
}

/// (Im W_u(q), Im W_u(q) + εf₂ + ε²f₄) for the reference packet.
pub fn cancellation_point(fields: &dyn FieldSet, eps: f64) -> CliResult<(f64, f64)> {
    let u = reference_packet(eps)?;
    let rem = remainder_potential(0.0, &u, fields, 24)?;
    Ok(rem.im_w_expansion()?)
}
