//! Scenario execution and file emission: validate → simulate → diagnose → verify.
//!
//! Every data file uses the fixed 17-significant-digit float format and carries no
//! timestamps, so identical configurations give byte-identical outputs.

mod config;
mod svg;
mod sweep;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use config::{
    DiagnosticsConfig, EigenConfig, InitialConfig, KernelChoice, KernelSource, KernelsConfig, NumericsConfig,
    OdeConfig, OutputConfig, ScenarioConfig, SweepAxis, SweepConfig,
};
pub use svg::profile_svg;
pub use sweep::{sweep, SweepRow, SweepTable};

use crate::diagnostics::{
    comparison_bound_check, detect_regime, verify_theorems, DiagError, RegimeReport, TheoremCheck, TimeSeries,
};
use crate::dynamics::{
    attractor_bounds, equilibria_and_class, ode_trajectory, theta_classify, AttractorBounds, DynamicsError,
    EquilibriumSet, ThetaReport,
};
use crate::eigenvalue::{eigen_curve, format_eigen_curve};
use crate::kernels::{KernelError, ValidatedKernel};
use crate::numfmt::{f17, to_json_string};
use crate::simulator::{init_state, run, stability_bound, NumericsAudit, RunOptions, SimError, Snapshot};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_THEOREM: i32 = 4;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid config at `{path}`: {reason}")]
    ConfigInvalid { path: String, reason: String },
    #[error("cannot read config {path}: {reason}")]
    ConfigRead { path: PathBuf, reason: String },
    #[error("sweep grid has {cells} cells; the cap is {cap}")]
    GridTooLarge { cells: usize, cap: usize },
    #[error("kernel: {0}")]
    Kernel(#[from] KernelError),
    #[error("simulation failed: {0}")]
    Simulation(#[from] SimError),
    #[error("diagnostics failed: {0}")]
    Diagnostics(#[from] DiagError),
    #[error("ODE failed: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("cannot write {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

impl RunnerError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::ConfigInvalid { .. } | Self::ConfigRead { .. } | Self::GridTooLarge { .. } | Self::Kernel(_) => {
                EXIT_CONFIG
            }
            Self::Simulation(_) | Self::Diagnostics(_) | Self::Dynamics(_) => EXIT_NUMERICAL,
            Self::Io { .. } => EXIT_IO,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunnerError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| RunnerError::Io { path: parent.into(), reason: e.to_string() })?;
    }
    std::fs::write(path, contents).map_err(|e| RunnerError::Io { path: path.into(), reason: e.to_string() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DtHalving {
    pub dt_half: f64,
    pub g_front_half: f64,
    pub h_front_half: f64,
    /// `max(|Δg|, |Δh|) / (h - g)` between the `dt` and `dt / 2` runs.
    pub relative_front_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    #[serde(flatten)]
    pub counters: NumericsAudit,
    pub dt: f64,
    pub dx: f64,
    pub stability_bound: f64,
    pub final_window: (f64, f64),
    pub comparison_bound_holds: bool,
    pub comparison_bound_margin: f64,
    pub dt_halving: Option<DtHalving>,
}

/// `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub regime: String,
    pub fronts: RegimeReport,
    pub theta: ThetaReport,
    pub theorem_checks: Vec<TheoremCheck>,
    pub numerics_audit: AuditReport,
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub report: ScenarioReport,
    pub series: TimeSeries,
    pub snapshots: Vec<Snapshot>,
    pub final_state: crate::simulator::SimState,
    pub exit_code: i32,
}

impl ScenarioOutcome {
    pub fn checks_pass(&self) -> bool {
        self.report.theorem_checks.iter().all(|c| c.pass)
    }
}

fn run_options(cfg: &ScenarioConfig, dt: f64) -> RunOptions {
    RunOptions {
        t_end: cfg.numerics.t_end,
        dt,
        snapshot_every: cfg.numerics.snapshot_every,
        series_every: cfg.numerics.series_every,
        v_dev_half_width: cfg.v_dev_half_width(),
    }
}

/// Validate, simulate, diagnose and (optionally) verify, without touching the disk.
pub fn execute_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome, RunnerError> {
    let (j1, j2) = cfg.validate()?;
    let kernels = (j1.clone(), j2);
    let n = &cfg.numerics;
    let state = init_state(cfg.params, kernels.clone(), &cfg.initial.u0, &cfg.initial.v0, n.dx, n.window_pad)?;
    let out = run(state, &run_options(cfg, n.dt))?;

    let dt_halving = if n.dt_halving_check {
        let state = init_state(cfg.params, kernels, &cfg.initial.u0, &cfg.initial.v0, n.dx, n.window_pad)?;
        let half = run(state, &RunOptions { snapshot_every: n.t_end.max(n.dt), ..run_options(cfg, 0.5 * n.dt) })?;
        let (f, h) = (&out.final_state, &half.final_state);
        let change = (f.g_front - h.g_front).abs().max((f.h_front - h.h_front).abs());
        Some(DtHalving {
            dt_half: 0.5 * n.dt,
            g_front_half: h.g_front,
            h_front_half: h.h_front,
            relative_front_change: change / (f.h_front - f.g_front),
        })
    } else {
        None
    };

    let d = &cfg.diagnostics;
    let regime = detect_regime(&out.series, n.t_end, d.eps_front, d.eps_mass)?;
    let theta = theta_classify(&cfg.params);
    let (bound_ok, bound_margin) = comparison_bound_check(&out.series, cfg.initial.v0.max_value(), cfg.params.gamma);

    let theorem_checks = if d.verify {
        let mut checks = match verify_theorems(&regime, &cfg.params, &j1, &out.final_state, &out.series, &d.tolerances) {
            Ok(checks) => checks,
            Err(e @ (DiagError::Undecided | DiagError::OutOfScope(_))) => vec![TheoremCheck {
                name: "theorem_scope".into(),
                pass: false,
                margin: f64::NAN,
                details: e.to_string(),
            }],
            Err(e) => return Err(e.into()),
        };
        checks.push(TheoremCheck {
            name: "comparison_bound".into(),
            pass: bound_ok,
            margin: bound_margin,
            details: "sup v(t) <= 1 + (k1 - 1) exp(-gamma t) + 5e-3, k1 = max v0 + 1".into(),
        });
        checks
    } else {
        Vec::new()
    };

    let f = &out.final_state;
    let numerics_audit = AuditReport {
        counters: f.audit.clone(),
        dt: n.dt,
        dx: n.dx,
        stability_bound: stability_bound(&cfg.params),
        final_window: (f.grid.x_min(), f.grid.x_max()),
        comparison_bound_holds: bound_ok,
        comparison_bound_margin: bound_margin,
        dt_halving,
    };
    let report = ScenarioReport {
        regime: regime.regime.as_str().to_string(),
        fronts: regime,
        theta,
        theorem_checks,
        numerics_audit,
    };
    let exit_code = if report.theorem_checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_THEOREM };
    Ok(ScenarioOutcome { report, series: out.series, snapshots: out.snapshots, final_state: out.final_state, exit_code })
}

pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_t{t:012.4}.txt")
}

pub fn format_snapshot(s: &Snapshot) -> String {
    let mut out = String::with_capacity(s.x.len() * 75 + 128);
    let _ = writeln!(out, "# t = {}", f17(s.t));
    let _ = writeln!(out, "# g_front = {}", f17(s.g_front));
    let _ = writeln!(out, "# h_front = {}", f17(s.h_front));
    out.push_str("# x u v\n");
    for i in 0..s.x.len() {
        let _ = writeln!(out, "{} {} {}", f17(s.x[i]), f17(s.u[i]), f17(s.v[i]));
    }
    out
}

/// Write the files of a finished scenario into `dir`; returns their paths.
pub fn emit_outputs(cfg: &ScenarioConfig, outcome: &ScenarioOutcome, dir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    let mut files = Vec::new();
    let mut put = |name: String, contents: String| -> Result<(), RunnerError> {
        let path = dir.join(name);
        write_file(&path, &contents)?;
        files.push(path);
        Ok(())
    };
    put("timeseries.csv".into(), outcome.series.to_csv())?;
    if cfg.output.snapshots {
        for s in &outcome.snapshots {
            put(snapshot_file_name(s.t), format_snapshot(s))?;
        }
    }
    let json = to_json_string(&outcome.report).expect("report serializes");
    put("report.json".into(), json)?;
    if cfg.output.svg {
        put("profile.svg".into(), profile_svg(&outcome.final_state))?;
    }
    Ok(files)
}

/// `simulate`: execute and write outputs; the exit code reflects the theorem checks.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(ScenarioOutcome, Vec<PathBuf>), RunnerError> {
    let outcome = execute_scenario(cfg)?;
    let files = emit_outputs(cfg, &outcome, &cfg.output.dir)?;
    Ok((outcome, files))
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelSummary {
    pub name: String,
    pub form: String,
    pub support_radius: f64,
    pub effective_radius: f64,
    pub peak: f64,
    pub renormalization: f64,
    pub unit_mass_tolerance: f64,
    pub stencil_mass: f64,
}

fn summarize(name: &str, k: &ValidatedKernel, dx: f64) -> KernelSummary {
    let form = serde_json::to_value(k.spec())
        .ok()
        .and_then(|v| v.get("form").and_then(|f| f.as_str()).map(str::to_string))
        .unwrap_or_default();
    KernelSummary {
        name: name.into(),
        form,
        support_radius: k.support_radius(),
        effective_radius: k.effective_radius(),
        peak: k.peak(),
        renormalization: k.renormalization(),
        unit_mass_tolerance: k.unit_mass_tolerance(),
        stencil_mass: k.stencil(dx).total(),
    }
}

/// `validate-kernel`: JSON summary of both kernels.
pub fn validate_kernels_json(cfg: &ScenarioConfig) -> Result<String, RunnerError> {
    let (j1, j2) = (cfg.load_kernel(KernelChoice::J1)?, cfg.load_kernel(KernelChoice::J2)?);
    let dx = cfg.numerics.dx;
    let summary = vec![summarize("j1", &j1, dx), summarize("j2", &j2, dx)];
    Ok(to_json_string(&summary).expect("summary serializes"))
}

/// `eigen-curve`: `l λ_p` table for `eigen.lengths`.
pub fn eigen_curve_text(cfg: &ScenarioConfig) -> Result<String, RunnerError> {
    cfg.validate_eigen()?;
    let kernel = cfg.load_kernel(cfg.eigen.kernel)?;
    let d = match cfg.eigen.kernel {
        KernelChoice::J1 => cfg.params.d1,
        KernelChoice::J2 => cfg.params.d2,
    };
    let dx = cfg.eigen.dx.unwrap_or(kernel.support_radius() / 40.0);
    Ok(format_eigen_curve(&eigen_curve(&kernel, d, &cfg.eigen.lengths, dx)))
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub equilibria: EquilibriumSet,
    pub theta: ThetaReport,
    /// Present when `k < 1`.
    pub attractor_bounds: Option<AttractorBounds>,
}

/// `classify`: equilibria, F(s) classification and (for k < 1) the bound sequences.
pub fn classify_json(cfg: &ScenarioConfig) -> Result<String, RunnerError> {
    cfg.validate_params()?;
    let p = &cfg.params;
    let classification = Classification {
        equilibria: equilibria_and_class(p),
        theta: theta_classify(p),
        attractor_bounds: attractor_bounds(p.k, p.h_comp, 60).ok(),
    };
    Ok(to_json_string(&classification).expect("classification serializes"))
}

/// `ode`: CSV `t,u,v` of the spatially homogeneous system.
pub fn ode_csv(cfg: &ScenarioConfig) -> Result<String, RunnerError> {
    cfg.validate_ode()?;
    let o = &cfg.ode;
    let traj = ode_trajectory(&cfg.params, (o.u0, o.v0), o.t_end, o.dt)?;
    let every = ((o.sample_every / o.dt).round() as usize).max(1);
    let last = traj.t.len() - 1;
    let mut out = String::from("t,u,v\n");
    for i in (0..=last).filter(|i| i % every == 0 || *i == last) {
        let _ = writeln!(out, "{},{},{}", f17(traj.t[i]), f17(traj.u[i]), f17(traj.v[i]));
    }
    Ok(out)
}
