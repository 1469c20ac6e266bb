//! The canonical experiments: each produces CSV text and a list of checks.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use magpack_core::egorov::{self, EgorovSettings, InitialSide};
use magpack_core::fields::Composite;
use magpack_core::gridref::{self, Grid, GridState};
use magpack_core::moments::wigner_average;
use magpack_core::motion::magnetic_energy_and_rate;
use magpack_core::odeint::{linspace, propagate_variational, PacketTrajectory, Settings};
use magpack_core::packet::GaussianPacket;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{CliError, CliResult};
use crate::fit::{fit_slope, SlopeFit};
use crate::selftest;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    /// Overrides the seed in the configuration.
    pub seed: Option<u64>,
    /// Record wall-clock runtimes; off for byte-reproducible output.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: None,
            seed: None,
            timing: true,
        }
    }
}

/// One pass/fail line of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub detail: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            detail: format!("{value:.3e} <= {limit:.1e}"),
            passed: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            detail: format!("{value:.3} >= {limit}"),
            passed: value >= limit,
        }
    }

    pub fn slope_band(name: impl Into<String>, fit: &SlopeFit, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value: fit.slope,
            detail: format!(
                "slope {:.3} in [{lo}, {hi}] (max log residual {:.3})",
                fit.slope, fit.max_residual
            ),
            passed: fit.within(lo, hi),
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: if passed { 1.0 } else { 0.0 },
            detail: detail.into(),
            passed,
        }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub experiment: ExperimentKind,
    pub csv: String,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn csv_preamble(cfg: &ExperimentConfig, header: &str) -> String {
    let eps: Vec<String> = cfg.eps.iter().map(|e| format!("{e}")).collect();
    format!(
        "# config_sha256={} experiment={} eps=[{}] integrator_tol={:e} quad_order={} grid_dt={} krylov_dim={} boundary_tol={:e}\n{}\n",
        config_hash(cfg),
        cfg.experiment.name(),
        eps.join(";"),
        cfg.integrator.tol,
        cfg.integrator.quad_order,
        cfg.grid.dt,
        cfg.grid.krylov_dim,
        cfg.grid.boundary_tol,
        header
    )
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::Config {
                    field: "jobs".into(),
                    message: e.to_string(),
                })?;
            Ok(pool.install(f))
        }
    }
}

pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<Outcome> {
    cfg.validate()?;
    let cfg = match opts.seed {
        Some(s) => {
            let mut c = cfg.clone();
            c.seed = Some(s);
            c
        }
        None => cfg.clone(),
    };
    let cfg = &cfg;
    match cfg.experiment {
        ExperimentKind::Propagate => propagate(cfg),
        ExperimentKind::Exactness => with_pool(opts.jobs, || exactness(cfg, opts))?,
        ExperimentKind::Conserve => with_pool(opts.jobs, || conserve(cfg))?,
        ExperimentKind::ConvergeL2 => with_pool(opts.jobs, || converge(cfg, opts, false))?,
        ExperimentKind::ConvergeObs => with_pool(opts.jobs, || converge(cfg, opts, true))?,
        ExperimentKind::EgorovCheck => with_pool(opts.jobs, || egorov_check(cfg, opts))?,
        ExperimentKind::MomentsSelftest => moments_selftest(cfg),
    }
}

fn trajectory(cfg: &ExperimentConfig, fields: &Composite, u0: &GaussianPacket, samples: &[f64], energy: bool) -> CliResult<PacketTrajectory<GaussianPacket>> {
    let settings = Settings {
        energy,
        ..cfg.settings()
    };
    Ok(propagate_variational(fields, u0, 0.0, cfg.t_final, samples, &settings)?)
}

/// Box and resolution for one ε, following the packet's variational
/// trajectory. The box must hold every sampled packet with boundary mass
/// below the configured tolerance; N satisfies N ≥ 16·2L/√ε and resolves the
/// momentum spread.
pub fn plan_grid(cfg: &ExperimentConfig, traj: &PacketTrajectory<GaussianPacket>, eps: f64) -> CliResult<Grid> {
    let d = traj.packets[0].dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut p_max: f64 = 0.0;
    for u in &traj.packets {
        let ci_inv = u.c_im_inv()?;
        let cr = u.c_re();
        let pcov = (u.c_im() + &cr * &ci_inv * &cr) * (0.5 * eps);
        for j in 0..d {
            let sq = (0.5 * eps * ci_inv[(j, j)]).sqrt();
            lo[j] = lo[j].min(u.q[j] - 7.0 * sq);
            hi[j] = hi[j].max(u.q[j] + 7.0 * sq);
            p_max = p_max.max(u.p[j].abs() + 8.0 * pcov[(j, j)].sqrt());
        }
    }
    let center: Vec<f64> = (0..d).map(|j| 0.5 * (lo[j] + hi[j])).collect();
    let needed = (0..d).map(|j| 0.5 * (hi[j] - lo[j])).fold(0.0, f64::max);
    let rule = |l: f64| 32.0 * l / eps.sqrt();
    let (l, n) = match (cfg.grid.half_width, cfg.grid.n) {
        (Some(l), Some(n)) => {
            if (n as f64) < rule(l) {
                return Err(CliError::Config {
                    field: "grid.n".into(),
                    message: format!("N = {n} is below the resolution rule {:.0} for eps = {eps}", rule(l)),
                });
            }
            (l, n)
        }
        (Some(l), None) => (l, 0),
        (None, Some(n)) => {
            // Widest box the rule allows for this N.
            let l_max = n as f64 * eps.sqrt() / 32.0;
            if l_max < needed {
                return Err(CliError::Config {
                    field: "grid.n".into(),
                    message: format!(
                        "N = {n} cannot cover half width {needed:.3} within the resolution rule for eps = {eps}"
                    ),
                });
            }
            (l_max, n)
        }
        (None, None) => (needed, 0),
    };
    let n_mom = 2.0 * l * p_max / (std::f64::consts::PI * eps);
    let n = if n == 0 {
        (rule(l).max(n_mom).ceil() as usize).max(16).next_power_of_two()
    } else {
        if (n as f64) < n_mom {
            return Err(CliError::Config {
                field: "grid.n".into(),
                message: format!("N = {n} does not resolve momenta up to {p_max:.3} for eps = {eps}"),
            });
        }
        n
    };
    let grid = Grid::uniform(d, n, &center, l)?;
    for (t, u) in traj.times.iter().zip(&traj.packets) {
        let mass = gridref::boundary_mass(u, &grid)?;
        if mass > cfg.grid.boundary_tol {
            return Err(CliError::Config {
                field: "grid.half_width".into(),
                message: format!(
                    "packet mass {mass:.2e} outside the box at t = {t} exceeds {:e}",
                    cfg.grid.boundary_tol
                ),
            });
        }
    }
    Ok(grid)
}

/// Variational packet and grid reference at T for one ε.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub eps: f64,
    pub packet: GaussianPacket,
    pub state: GridState,
    pub l2_error: f64,
    pub norm_drift: f64,
    pub runtime_s: f64,
    pub grid_stats: gridref::PropagationStats,
    /// (name, grid value, packet value)
    pub observables: Vec<(String, f64, f64)>,
}

pub fn sweep_point(cfg: &ExperimentConfig, eps: f64, with_observables: bool) -> CliResult<SweepPoint> {
    let start = Instant::now();
    let fields = cfg.fields()?;
    let u0 = cfg.packet(eps)?;
    let samples = linspace(0.0, cfg.t_final, cfg.samples);
    let traj = trajectory(cfg, &fields, &u0, &samples, false)?;
    let grid = plan_grid(cfg, &traj, eps)?;
    let s0 = gridref::sample_with_tol(&u0, &grid, 0.0, cfg.grid.boundary_tol)?;
    let (s1, grid_stats) =
        gridref::propagate_with_stats(&s0, &fields, eps, 0.0, cfg.t_final, cfg.grid.dt, cfg.grid.krylov_dim)?;
    let packet = traj.packets.last().expect("samples end at T").clone();
    let l2_error = gridref::pack_vs_grid_error(&packet, &s1)?;
    let mut observables = Vec::new();
    if with_observables {
        let d = fields.d;
        for (name, obs, sym) in cfg.observables(d) {
            let g = gridref::observable_expect(&s1, &obs, eps)?;
            let n2 = packet.norm_squared()?;
            let p = wigner_average(&packet.normalize()?, &sym, cfg.t_final, cfg.integrator.quad_order)? * n2;
            observables.push((name, g, p));
        }
    }
    Ok(SweepPoint {
        eps,
        norm_drift: (s1.norm_squared() - s0.norm_squared()).abs(),
        packet,
        state: s1,
        l2_error,
        runtime_s: start.elapsed().as_secs_f64(),
        grid_stats,
        observables,
    })
}

pub fn sweep(cfg: &ExperimentConfig, with_observables: bool) -> CliResult<Vec<SweepPoint>> {
    cfg.eps.par_iter().map(|&e| sweep_point(cfg, e, with_observables)).collect()
}

fn runtime(opts: &RunOptions, r: f64) -> String {
    if opts.timing {
        format!("{r:.3}")
    } else {
        "0".into()
    }
}

fn grid_columns(p: &SweepPoint) -> String {
    format!(
        "{},{:.6},{}",
        p.state.grid.n()[0],
        p.state.grid.half_width()[0],
        p.grid_stats.applications
    )
}

fn propagate(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let fields = cfg.fields()?;
    let d = fields.d;
    let mut header = vec!["eps".to_string(), "t".into()];
    for j in 1..=d {
        header.push(format!("q{j}"));
    }
    for j in 1..=d {
        header.push(format!("p{j}"));
    }
    for part in ["c_re", "c_im"] {
        for i in 1..=d {
            for j in 1..=d {
                header.push(format!("{part}_{i}{j}"));
            }
        }
    }
    header.extend(["zeta_re", "zeta_im", "norm_sq", "min_width_eig", "energy"].map(String::from));
    let mut csv = csv_preamble(cfg, &header.join(","));
    let samples = linspace(0.0, cfg.t_final, cfg.samples);
    for &eps in &cfg.eps {
        let u0 = cfg.packet(eps)?;
        let traj = trajectory(cfg, &fields, &u0, &samples, true)?;
        for ((t, u), diag) in traj.times.iter().zip(&traj.packets).zip(&traj.diagnostics) {
            let mut row = vec![format!("{eps}"), format!("{t}")];
            row.extend(u.q.iter().map(|v| format!("{v:.15e}")));
            row.extend(u.p.iter().map(|v| format!("{v:.15e}")));
            for i in 0..d {
                for j in 0..d {
                    row.push(format!("{:.15e}", u.c[(i, j)].re));
                }
            }
            for i in 0..d {
                for j in 0..d {
                    row.push(format!("{:.15e}", u.c[(i, j)].im));
                }
            }
            row.push(format!("{:.15e}", u.zeta.re));
            row.push(format!("{:.15e}", u.zeta.im));
            row.push(format!("{:.15e}", diag.norm_sq));
            row.push(format!("{:.15e}", diag.min_eig));
            row.push(format!("{:.15e}", diag.energy.unwrap_or(f64::NAN)));
            writeln!(csv, "{}", row.join(",")).expect("string write");
        }
    }
    Ok(Outcome {
        experiment: cfg.experiment,
        csv,
        checks: vec![Check::flag("propagate", true, "trajectory written")],
    })
}

fn exactness(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<Outcome> {
    let points = sweep(cfg, false)?;
    let limit = cfg.criteria.max_error.unwrap_or(1e-6);
    let mut csv = csv_preamble(cfg, "eps,error,norm_drift,n,half_width,applications,runtime_s");
    let mut checks = Vec::new();
    for pt in &points {
        writeln!(
            csv,
            "{},{:.6e},{:.3e},{},{}",
            pt.eps,
            pt.l2_error,
            pt.norm_drift,
            grid_columns(pt),
            runtime(opts, pt.runtime_s)
        )
        .expect("write");
        checks.push(Check::at_most(format!("exactness eps={}", pt.eps), pt.l2_error, limit));
    }
    Ok(Outcome {
        experiment: cfg.experiment,
        csv,
        checks,
    })
}

/// Drift series of a conservation run.
#[derive(Debug, Clone)]
pub struct ConservationSeries {
    pub eps: f64,
    pub times: Vec<f64>,
    pub norm_drift: Vec<f64>,
    pub energy_drift: Vec<f64>,
    /// E(t) − E(0) − ∫₀ᵗ ⟨∂ₛH⟩ ds.
    pub energy_balance: Vec<f64>,
    pub momentum_drift: Vec<Vec<f64>>,
}

/// Number of dense substeps per output interval used for the balance quadrature.
const BALANCE_REFINE: usize = 4;

pub fn conservation_series(cfg: &ExperimentConfig, eps: f64) -> CliResult<ConservationSeries> {
    let fields = cfg.fields()?;
    let u0 = cfg.packet(eps)?;
    let dense = linspace(0.0, cfg.t_final, cfg.samples * BALANCE_REFINE);
    let traj = trajectory(cfg, &fields, &u0, &dense, false)?;
    let order = cfg.integrator.quad_order;
    let mut er = Vec::with_capacity(dense.len());
    for (t, u) in traj.times.iter().zip(&traj.packets) {
        er.push(magnetic_energy_and_rate(*t, u, &fields, order)?);
    }
    let n0 = traj.packets[0].norm_squared()?;
    let (e0, _) = er[0];
    let mut out = ConservationSeries {
        eps,
        times: vec![],
        norm_drift: vec![],
        energy_drift: vec![],
        energy_balance: vec![],
        momentum_drift: vec![],
    };
    // Composite Simpson over pairs of dense intervals.
    let mut integral = 0.0;
    for i in (0..dense.len()).step_by(BALANCE_REFINE) {
        if i > 0 {
            for k in ((i - BALANCE_REFINE)..i).step_by(2) {
                let h = dense[k + 2] - dense[k];
                integral += h / 6.0 * (er[k].1 + 4.0 * er[k + 1].1 + er[k + 2].1);
            }
        }
        let u = &traj.packets[i];
        out.times.push(dense[i]);
        out.norm_drift.push((u.norm_squared()? - n0).abs());
        out.energy_drift.push((er[i].0 - e0).abs());
        out.energy_balance.push((er[i].0 - e0 - integral).abs());
        out.momentum_drift.push((0..u.dim()).map(|j| (u.p[j] - u0.p[j]).abs()).collect());
    }
    Ok(out)
}

fn conserve(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let fields = cfg.fields()?;
    let d = fields.d;
    let series: Vec<ConservationSeries> = cfg
        .eps
        .par_iter()
        .map(|&e| conservation_series(cfg, e))
        .collect::<CliResult<_>>()?;
    let mut header = "eps,t,norm_drift,energy_drift,energy_balance".to_string();
    for j in 1..=d {
        write!(header, ",p{j}_drift").expect("write");
    }
    let mut csv = csv_preamble(cfg, &header);
    let mut checks = Vec::new();
    let time_dependent = fields.is_time_dependent();
    for s in &series {
        for i in 0..s.times.len() {
            write!(
                csv,
                "{},{},{:.6e},{:.6e},{:.6e}",
                s.eps, s.times[i], s.norm_drift[i], s.energy_drift[i], s.energy_balance[i]
            )
            .expect("write");
            for v in &s.momentum_drift[i] {
                write!(csv, ",{v:.6e}").expect("write");
            }
            csv.push('\n');
        }
        let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(*x));
        checks.push(Check::at_most(
            format!("norm drift eps={}", s.eps),
            max(&s.norm_drift),
            cfg.criteria.norm_drift.unwrap_or(1e-8),
        ));
        if time_dependent {
            checks.push(Check::at_most(
                format!("energy balance eps={}", s.eps),
                max(&s.energy_balance),
                cfg.criteria.energy_balance.unwrap_or(1e-4),
            ));
        } else {
            checks.push(Check::at_most(
                format!("energy drift eps={}", s.eps),
                max(&s.energy_drift),
                cfg.criteria.energy_drift.unwrap_or(1e-6),
            ));
        }
        if fields.is_translation_invariant() {
            let worst = s.momentum_drift.iter().map(|v| max(v)).fold(0.0, f64::max);
            checks.push(Check::at_most(
                format!("momentum drift eps={}", s.eps),
                worst,
                cfg.criteria.momentum_drift.unwrap_or(1e-8),
            ));
        }
    }
    Ok(Outcome {
        experiment: cfg.experiment,
        csv,
        checks,
    })
}

/// Checks that errors decrease strictly with ε and fit a slope inside the band.
pub fn rate_checks(name: &str, eps: &[f64], errors: &[f64], lo: f64, hi: f64) -> Vec<Check> {
    let mut checks = Vec::new();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let listing: Vec<String> = errors.iter().map(|e| format!("{e:.3e}")).collect();
    checks.push(Check::flag(
        format!("{name} decreasing"),
        monotone,
        format!("errors [{}]", listing.join(", ")),
    ));
    let points: Vec<(f64, f64)> = eps.iter().copied().zip(errors.iter().copied()).collect();
    match fit_slope(&points) {
        Ok(fit) => checks.push(Check::slope_band(format!("{name} slope"), &fit, lo, hi)),
        Err(e) => checks.push(Check::flag(format!("{name} slope"), false, e.to_string())),
    }
    checks
}

fn converge(cfg: &ExperimentConfig, opts: &RunOptions, observables: bool) -> CliResult<Outcome> {
    let points = sweep(cfg, observables)?;
    let eps: Vec<f64> = points.iter().map(|p| p.eps).collect();
    if !observables {
        let mut csv = csv_preamble(cfg, "eps,error,n,half_width,applications,runtime_s");
        for p in &points {
            writeln!(csv, "{},{:.9e},{},{}", p.eps, p.l2_error, grid_columns(p), runtime(opts, p.runtime_s)).expect("write");
        }
        let errors: Vec<f64> = points.iter().map(|p| p.l2_error).collect();
        let checks = rate_checks(
            "L2 error",
            &eps,
            &errors,
            cfg.criteria.slope_min.unwrap_or(0.45),
            cfg.criteria.slope_max.unwrap_or(1.6),
        );
        return Ok(Outcome {
            experiment: cfg.experiment,
            csv,
            checks,
        });
    }
    let mut csv = csv_preamble(cfg, "eps,observable,error,grid_value,packet_value,runtime_s");
    for p in &points {
        for (name, g, u) in &p.observables {
            writeln!(
                csv,
                "{},{},{:.9e},{:.15e},{:.15e},{}",
                p.eps,
                name,
                (g - u).abs(),
                g,
                u,
                runtime(opts, p.runtime_s)
            )
            .expect("write");
        }
    }
    let mut checks = Vec::new();
    let n_obs = points[0].observables.len();
    for k in 0..n_obs {
        let name = &points[0].observables[k].0;
        let errors: Vec<f64> = points.iter().map(|p| (p.observables[k].1 - p.observables[k].2).abs()).collect();
        checks.extend(rate_checks(
            &format!("observable {name}"),
            &eps,
            &errors,
            cfg.criteria.slope_min.unwrap_or(1.7),
            cfg.criteria.slope_max.unwrap_or(2.6),
        ));
    }
    Ok(Outcome {
        experiment: cfg.experiment,
        csv,
        checks,
    })
}

#[derive(Debug, Clone)]
pub struct EgorovPoint {
    pub eps: f64,
    pub report: egorov::EgorovReport,
    pub runtime_s: f64,
}

pub fn egorov_point(cfg: &ExperimentConfig, eps: f64, initial: InitialSide) -> CliResult<EgorovPoint> {
    let start = Instant::now();
    let fields = cfg.fields()?;
    let u0 = cfg.packet(eps)?;
    let samples = linspace(0.0, cfg.t_final, cfg.samples);
    let traj = trajectory(cfg, &fields, &u0, &samples, false)?;
    let grid = plan_grid(cfg, &traj, eps)?;
    let (_, _, sym) = cfg.observables(1).into_iter().next().expect("validated: one observable");
    let settings = EgorovSettings {
        dt: cfg.grid.dt,
        krylov_dim: cfg.grid.krylov_dim,
        flow_tol: (cfg.integrator.tol * 0.1).max(1e-13),
        initial,
    };
    let report = egorov::egorov_residual(&sym, &fields, &u0, cfg.t_final, &grid, &settings)?;
    Ok(EgorovPoint {
        eps,
        report,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

fn egorov_check(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<Outcome> {
    let points: Vec<EgorovPoint> = cfg
        .eps
        .par_iter()
        .map(|&e| {
            egorov_point(
                cfg,
                e,
                InitialSide::WignerAverage {
                    order: cfg.integrator.quad_order,
                },
            )
        })
        .collect::<CliResult<_>>()?;
    let mut csv = csv_preamble(cfg, "eps,residual,quantum,transported,runtime_s");
    for p in &points {
        writeln!(
            csv,
            "{},{:.9e},{:.15e},{:.15e},{}",
            p.eps,
            p.report.residual,
            p.report.quantum,
            p.report.transported,
            runtime(opts, p.runtime_s)
        )
        .expect("write");
    }
    let fields = cfg.fields()?;
    let checks = if fields.is_quadratic() {
        let worst = points.iter().map(|p| p.report.residual).fold(0.0, f64::max);
        vec![Check::at_most("Egorov residual (quadratic h)", worst, cfg.criteria.max_error.unwrap_or(1e-7))]
    } else {
        let eps: Vec<f64> = points.iter().map(|p| p.eps).collect();
        let res: Vec<f64> = points.iter().map(|p| p.report.residual).collect();
        let points: Vec<(f64, f64)> = eps.iter().copied().zip(res.iter().copied()).collect();
        match fit_slope(&points) {
            Ok(fit) => vec![Check::slope_band(
                "Egorov residual slope",
                &fit,
                cfg.criteria.slope_min.unwrap_or(1.7),
                cfg.criteria.slope_max.unwrap_or(2.3),
            )],
            Err(e) => vec![Check::flag("Egorov residual slope", false, e.to_string())],
        }
    };
    Ok(Outcome {
        experiment: cfg.experiment,
        csv,
        checks,
    })
}

fn moments_selftest(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let seed = cfg.seed.unwrap_or(selftest::DEFAULT_SEED);
    let checks = selftest::moment_checks(seed)?;
    let mut csv = csv_preamble(cfg, "check,value,passed");
    for c in &checks {
        writeln!(csv, "{},{:.6e},{}", c.name, c.value, c.passed).expect("write");
    }
    Ok(Outcome {
        experiment: cfg.experiment,
        csv,
        checks,
    })
}
