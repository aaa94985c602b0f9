//! Metrics, long-time regime detection and theorem-level consistency checks.
//!
//! Vanishing (`h_∞ - g_∞ < ∞`) cannot be decided from finite data; the detector
//! looks at the trailing 20% of a run and says `undecided` when the evidence is weak.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{equilibria_and_class, theta_classify, ModelParams, Theta};
use crate::eigenvalue::{principal_eigenvalue, EigenError};
use crate::kernels::ValidatedKernel;
use crate::numfmt::f17;
use crate::simulator::SimState;

pub const DEFAULT_EPS_FRONT: f64 = 1e-5;
pub const DEFAULT_EPS_MASS: f64 = 1e-6;
/// Fraction of the run used as the trailing window.
pub const TRAILING_FRACTION: f64 = 0.2;
pub const MIN_SERIES_LEN: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagError {
    #[error("L = {l} exceeds the window half-width {half_width}")]
    WindowTooSmall { l: f64, half_width: f64 },
    #[error("series has {len} samples; at least {MIN_SERIES_LEN} are needed")]
    SeriesTooShort { len: usize },
    #[error("out of scope: {0}")]
    OutOfScope(String),
    #[error("regime is undecided; theorem checks need a decided run")]
    Undecided,
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mass_u: f64,
    pub sup_u: f64,
    /// `∫_{-L}^{L} |v - 1|`.
    pub v_dev: f64,
    pub sup_v: f64,
}

fn window_half_width(state: &SimState) -> f64 {
    state.grid.x_max().min(-state.grid.x_min())
}

fn check_window(state: &SimState, c: f64, d: f64) -> Result<(), DiagError> {
    let half_width = window_half_width(state);
    let l = c.abs().max(d.abs());
    if l > half_width + 1e-9 * state.grid.dx {
        return Err(DiagError::WindowTooSmall { l, half_width });
    }
    Ok(())
}

/// Cell-rule quadrature over the same tiling the simulator uses.
pub fn metrics(state: &SimState, l: f64) -> Result<Metrics, DiagError> {
    check_window(state, -l, l)?;
    let mass_u = state.u_tiling().integrate(&state.u);
    let sup_u = state.u.iter().cloned().fold(0.0, f64::max);
    let sup_v = state.v.iter().cloned().fold(0.0, f64::max);
    let v_dev = state.grid.tile_closed(-l, l).integrate_within(&state.v, -l, l, |v| (v - 1.0).abs());
    Ok(Metrics { mass_u, sup_u, v_dev, sup_v })
}

/// `∫_{x-L}^{x+L} u`.
pub fn windowed_mass_u(state: &SimState, x: f64, l: f64) -> Result<f64, DiagError> {
    check_window(state, x - l, x + l)?;
    Ok(state.u_tiling().integrate_within(&state.u, x - l, x + l, |u| u))
}

/// `(1 / 2L) ∫_{x-L}^{x+L} v`.
pub fn windowed_mean_v(state: &SimState, x: f64, l: f64) -> Result<f64, DiagError> {
    check_window(state, x - l, x + l)?;
    let tiling = state.grid.tile_closed(state.grid.x_min(), state.grid.x_max());
    Ok(tiling.integrate_within(&state.v, x - l, x + l, |v| v) / (2.0 * l))
}

/// `∫ |v - 1|` over `[c, d]` minus `(g, h)`, and the sup of `|v - 1|` there.
pub fn v_deviation_outside(state: &SimState, (c, d): (f64, f64), (g, h): (f64, f64)) -> Result<(f64, f64), DiagError> {
    check_window(state, c, d)?;
    let tiling = state.grid.tile_closed(c, d);
    let dev = |v: f64| (v - 1.0).abs();
    let integral = tiling.integrate_within(&state.v, c, g.min(d), dev) + tiling.integrate_within(&state.v, h.max(c), d, dev);
    let sup = tiling
        .indices()
        .filter(|&i| {
            let x = state.grid.x(i);
            x <= g || x >= h
        })
        .map(|i| dev(state.v[i]))
        .fold(0.0, f64::max);
    Ok((integral, sup))
}

/// Fronts and metrics sampled over a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub v_dev_half_width: f64,
    pub t: Vec<f64>,
    pub g_front: Vec<f64>,
    pub h_front: Vec<f64>,
    pub mass_u: Vec<f64>,
    pub sup_u: Vec<f64>,
    pub v_dev_l: Vec<f64>,
    /// Not part of the CSV; feeds the comparison-bound check.
    pub sup_v: Vec<f64>,
}

pub const TIMESERIES_HEADER: &str = "t,g_front,h_front,mass_u,sup_u,v_dev_L";

impl TimeSeries {
    pub fn new(v_dev_half_width: f64) -> Self {
        Self { v_dev_half_width, ..Default::default() }
    }

    pub fn push(&mut self, state: &SimState) -> Result<(), DiagError> {
        let m = metrics(state, self.v_dev_half_width)?;
        self.t.push(state.t);
        self.g_front.push(state.g_front);
        self.h_front.push(state.h_front);
        self.mass_u.push(m.mass_u);
        self.sup_u.push(m.sup_u);
        self.v_dev_l.push(m.v_dev);
        self.sup_v.push(m.sup_v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 140);
        out.push_str(TIMESERIES_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            let row = [self.t[i], self.g_front[i], self.h_front[i], self.mass_u[i], self.sup_u[i], self.v_dev_l[i]];
            let fields: Vec<String> = row.iter().map(|&x| f17(x)).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Vanishing,
    Spreading,
    Undecided,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Vanishing => "vanishing",
            Regime::Spreading => "spreading",
            Regime::Undecided => "undecided",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Present only for vanishing runs.
    pub g_inf_est: Option<f64>,
    pub h_inf_est: Option<f64>,
    /// Growth rate of `h - g` over the trailing window.
    pub trailing_front_rate: f64,
    pub trailing_g_rate: f64,
    pub trailing_h_rate: f64,
    pub trailing_window: (f64, f64),
    pub mass_nonincreasing: bool,
    pub final_mass_u: f64,
    pub final_sup_u: f64,
    pub final_v_dev: f64,
    pub peak_mass_u: f64,
    pub final_g: f64,
    pub final_h: f64,
    pub eps_front: f64,
    pub eps_mass: f64,
}

pub fn detect_regime(series: &TimeSeries, t_max: f64, eps_front: f64, eps_mass: f64) -> Result<RegimeReport, DiagError> {
    let end = series.t.partition_point(|&t| t <= t_max + 1e-9);
    if end < MIN_SERIES_LEN {
        return Err(DiagError::SeriesTooShort { len: end });
    }
    let t_end = series.t[end - 1];
    let t_start = t_end - TRAILING_FRACTION * t_max;
    let first = series.t[..end].partition_point(|&t| t < t_start - 1e-9).min(end - 2);
    let span = series.t[end - 1] - series.t[first];
    let rate = |f: &dyn Fn(usize) -> f64| if span > 0.0 { (f(end - 1) - f(first)) / span } else { 0.0 };
    let width = |i: usize| series.h_front[i] - series.g_front[i];
    let trailing_front_rate = rate(&width);
    let trailing_h_rate = rate(&|i| series.h_front[i]);
    let trailing_g_rate = -rate(&|i| series.g_front[i]);
    let mass = &series.mass_u[first..end];
    let mass_nonincreasing = mass.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let final_mass_u = series.mass_u[end - 1];
    let regime = if trailing_front_rate < eps_front && final_mass_u < eps_mass && mass_nonincreasing {
        Regime::Vanishing
    } else if trailing_front_rate > 10.0 * eps_front && final_mass_u >= eps_mass {
        Regime::Spreading
    } else {
        Regime::Undecided
    };
    let (final_g, final_h) = (series.g_front[end - 1], series.h_front[end - 1]);
    let vanishing = regime == Regime::Vanishing;
    Ok(RegimeReport {
        regime,
        g_inf_est: vanishing.then_some(final_g),
        h_inf_est: vanishing.then_some(final_h),
        trailing_front_rate,
        trailing_g_rate,
        trailing_h_rate,
        trailing_window: (series.t[first], t_end),
        mass_nonincreasing,
        final_mass_u,
        final_sup_u: series.sup_u[end - 1],
        final_v_dev: series.v_dev_l[end - 1],
        peak_mass_u: series.mass_u[..end].iter().cloned().fold(0.0, f64::max),
        final_g,
        final_h,
        eps_front,
        eps_mass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub name: String,
    pub pass: bool,
    /// Positive when the check holds with room to spare.
    pub margin: f64,
    pub details: String,
}

impl TheoremCheck {
    fn new(name: &str, margin: f64, details: String) -> Self {
        Self { name: name.into(), pass: margin >= 0.0, margin, details }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub lambda_tol: f64,
    pub mass_decay_factor: f64,
    pub v_dev_tol: f64,
    pub sup_u_tol: f64,
    pub plateau_tol: f64,
    pub plateau_nodes: usize,
    pub center_tol: f64,
    /// Half-width of the compact set for the `v → 1` checks; `2 h0` when absent.
    pub compact_half_width: Option<f64>,
    /// Grid spacing for the eigenvalue; the state's spacing when absent.
    pub eigen_dx: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            lambda_tol: 5e-3,
            mass_decay_factor: 100.0,
            v_dev_tol: 5e-2,
            sup_u_tol: 1e-2,
            plateau_tol: 1e-2,
            plateau_nodes: 3,
            center_tol: 1e-2,
            compact_half_width: None,
            eigen_dx: None,
        }
    }
}

/// Longest run of consecutive nodes with `|u - level| < tol`.
pub fn plateau_run(u: &[f64], level: f64, tol: f64) -> usize {
    let (mut best, mut run) = (0, 0);
    for &x in u {
        if (x - level).abs() < tol {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

pub fn verify_theorems(
    report: &RegimeReport,
    params: &ModelParams,
    kernel: &ValidatedKernel,
    final_state: &SimState,
    series: &TimeSeries,
    opts: &VerifyOptions,
) -> Result<Vec<TheoremCheck>, DiagError> {
    match report.regime {
        Regime::Undecided => Err(DiagError::Undecided),
        Regime::Vanishing => verify_vanishing(report, params, kernel, final_state, series, opts),
        Regime::Spreading => verify_spreading(report, params, final_state, opts),
    }
}

fn verify_vanishing(
    report: &RegimeReport,
    params: &ModelParams,
    kernel: &ValidatedKernel,
    state: &SimState,
    series: &TimeSeries,
    opts: &VerifyOptions,
) -> Result<Vec<TheoremCheck>, DiagError> {
    let (g, h) = (report.g_inf_est.unwrap_or(report.final_g), report.h_inf_est.unwrap_or(report.final_h));
    let mut checks = Vec::new();

    let need = 1.0 - params.k;
    checks.push(TheoremCheck::new(
        "vanishing_d1_gt_1_minus_k",
        params.d1 - need,
        format!("d1 = {}, 1 - k = {}", params.d1, need),
    ));

    let dx = opts.eigen_dx.unwrap_or(state.grid.dx);
    let lambda = principal_eigenvalue(kernel, params.d1, (g, h), dx)?.lambda_p;
    let lambda_margin = params.k - 1.0 - lambda;
    checks.push(TheoremCheck::new(
        "vanishing_lambda_p_le_k_minus_1",
        lambda_margin + opts.lambda_tol,
        format!("lambda_p on ({g}, {h}) = {lambda}; k - 1 - lambda_p = {lambda_margin}; tol = {}", opts.lambda_tol),
    ));

    let final_mass = *series.mass_u.last().unwrap_or(&0.0);
    let ratio = if final_mass > 0.0 { report.peak_mass_u / final_mass } else { f64::INFINITY };
    checks.push(TheoremCheck::new(
        "vanishing_mass_decay",
        if ratio.is_finite() { ratio.log10() - opts.mass_decay_factor.log10() } else { f64::MAX },
        format!("peak mass {:.6e} / final mass {:.6e} = {ratio:.6e}; required factor {}", report.peak_mass_u, final_mass, opts.mass_decay_factor),
    ));

    let l = opts.compact_half_width.unwrap_or(2.0 * params.h0);
    let (v_dev, v_sup) = v_deviation_outside(state, (-l, l), (g, h))?;
    checks.push(TheoremCheck::new(
        "vanishing_v_dev_on_compact",
        opts.v_dev_tol - v_dev,
        format!("integral of |v - 1| over [-{l}, {l}] minus ({g}, {h}) = {v_dev:.6e}; tol = {}", opts.v_dev_tol),
    ));
    checks.push(TheoremCheck::new(
        "vanishing_sup_v_dev_on_compact",
        opts.v_dev_tol - v_sup,
        format!("sup |v - 1| over [-{l}, {l}] minus ({g}, {h}) = {v_sup:.6e}; tol = {}", opts.v_dev_tol),
    ));

    let theta = theta_classify(params);
    let sup_u = state.u.iter().cloned().fold(0.0, f64::max);
    let decays = opts.sup_u_tol - sup_u;
    if theta.verdict_roots == Theta::Theta1 || params.d1 >= 1.0 {
        checks.push(TheoremCheck::new(
            "vanishing_u_to_zero",
            decays,
            format!("theta = {:?}, d1 = {}; final sup u = {sup_u:.6e}; tol = {}", theta.verdict_roots, params.d1, opts.sup_u_tol),
        ));
    } else {
        let x_star = theta.x_star.unwrap_or(f64::NAN);
        let level = params.k * x_star - theta.d1_tilde;
        let run = plateau_run(&state.u, level, opts.plateau_tol);
        let plateau = run >= opts.plateau_nodes;
        let branch = match (decays >= 0.0, plateau) {
            (true, _) => "u decays to zero",
            (false, true) => "plateau near k x_* - d1_tilde",
            (false, false) => "neither branch matched",
        };
        checks.push(TheoremCheck {
            name: "vanishing_theta2_branch".into(),
            pass: decays >= 0.0 || plateau,
            margin: decays,
            details: format!(
                "theta2 with d1 < 1: x_* = {x_star}, plateau level = {level}, longest plateau run = {run} nodes; sup u = {sup_u:.6e}; {branch}"
            ),
        });
    }
    Ok(checks)
}

fn verify_spreading(
    report: &RegimeReport,
    params: &ModelParams,
    state: &SimState,
    opts: &VerifyOptions,
) -> Result<Vec<TheoremCheck>, DiagError> {
    if params.k >= 1.0 {
        return Err(DiagError::OutOfScope(format!(
            "spreading with k = {} >= 1 is not covered; only k < 1 is checked",
            params.k
        )));
    }
    let rate_floor = 10.0 * report.eps_front;
    let diverge = report.trailing_g_rate.min(report.trailing_h_rate) - rate_floor;
    let mut checks = vec![TheoremCheck::new(
        "spreading_fronts_diverge",
        diverge,
        format!(
            "trailing speeds: g {}, h {}; each must exceed {rate_floor}",
            report.trailing_g_rate, report.trailing_h_rate
        ),
    )];
    let (target, label) = if params.h_comp >= 1.0 {
        ((1.0, 0.0), "(1, 0)")
    } else {
        let r_star = equilibria_and_class(params).r_star.unwrap_or((f64::NAN, f64::NAN));
        (r_star, "R_star")
    };
    let (u0, v0) = state.sample(0.0);
    let err = (u0 - target.0).abs().max((v0 - target.1).abs());
    checks.push(TheoremCheck::new(
        "spreading_center_limit",
        opts.center_tol - err,
        format!("(u, v)(T, 0) = ({u0}, {v0}); target {label} = ({}, {}); tol = {}", target.0, target.1, opts.center_tol),
    ));
    Ok(checks)
}

/// `sup v(t) ≤ 1 + (k1 - 1) e^{-γ t} + 5e-3` with `k1 = v0_max + 1`; returns the verdict and the
/// smallest slack.
pub fn comparison_bound_check(series: &TimeSeries, v0_max: f64, gamma: f64) -> (bool, f64) {
    let k1 = v0_max + 1.0;
    let worst = series
        .t
        .iter()
        .zip(&series.sup_v)
        .map(|(&t, &s)| 1.0 + (k1 - 1.0) * (-gamma * t).exp() + 5e-3 - s)
        .fold(f64::INFINITY, f64::min);
    (worst >= 0.0, worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{validate_kernel, KernelSpec};
    use crate::simulator::{init_state, InitialProfile};

    fn state(u0: InitialProfile, v0: InitialProfile, h0: f64) -> SimState {
        let k = validate_kernel(&KernelSpec::Uniform { half_width: 1.0 }, 0.05).unwrap();
        let p = ModelParams { h0, ..Default::default() };
        init_state(p, (k.clone(), k), &u0, &v0, 0.05, 3.0).unwrap()
    }

    fn synthetic(n: usize, f: impl Fn(f64) -> (f64, f64, f64)) -> TimeSeries {
        let mut s = TimeSeries::new(1.0);
        for i in 0..n {
            let t = i as f64;
            let (g, h, m) = f(t);
            s.t.push(t);
            s.g_front.push(g);
            s.h_front.push(h);
            s.mass_u.push(m);
            s.sup_u.push(m);
            s.v_dev_l.push(0.0);
            s.sup_v.push(1.0);
        }
        s
    }

    #[test]
    fn metric_examples() {
        let mut s = state(InitialProfile::Constant { value: 1.0 }, InitialProfile::Constant { value: 1.0 }, 1.0);
        let m = metrics(&s, 2.0).unwrap();
        assert!((m.mass_u - 2.0).abs() < 1e-12);
        assert_eq!(m.v_dev, 0.0);
        assert_eq!(m.sup_v, 1.0);
        assert!((windowed_mass_u(&s, 0.0, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((windowed_mean_v(&s, 0.3, 1.0).unwrap() - 1.0).abs() < 1e-12);
        s.u.fill(0.0);
        let m = metrics(&s, 2.0).unwrap();
        assert_eq!((m.mass_u, m.sup_u), (0.0, 0.0));
        assert!(matches!(metrics(&s, 100.0), Err(DiagError::WindowTooSmall { .. })));
    }

    #[test]
    fn v_dev_of_half_resident() {
        let s = state(InitialProfile::CosineBump { amplitude: 1.0 }, InitialProfile::Constant { value: 0.5 }, 1.0);
        let m = metrics(&s, 1.5).unwrap();
        assert!((m.v_dev - 1.5).abs() < 1e-12);
        let (int, sup) = v_deviation_outside(&s, (-2.0, 2.0), (-1.0, 1.0)).unwrap();
        assert!((int - 1.0).abs() < 1e-12);
        assert_eq!(sup, 0.5);
    }

    #[test]
    fn csv_header_and_precision() {
        let s = state(InitialProfile::CosineBump { amplitude: 1.0 }, InitialProfile::Constant { value: 1.0 }, 1.0);
        let mut ts = TimeSeries::new(2.0);
        ts.push(&s).unwrap();
        let csv = ts.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,g_front,h_front,mass_u,sup_u,v_dev_L"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 6);
        assert_eq!(row[1], "-1.0000000000000000e0");
    }

    #[test]
    fn frozen_fronts_with_decaying_mass_vanish() {
        let s = synthetic(101, |t| {
            let w = 1.0 + t.min(10.0) * 0.1;
            (-w, w, (-t).exp())
        });
        let r = detect_regime(&s, 100.0, DEFAULT_EPS_FRONT, DEFAULT_EPS_MASS).unwrap();
        assert_eq!(r.regime, Regime::Vanishing);
        assert_eq!((r.g_inf_est, r.h_inf_est), (Some(-2.0), Some(2.0)));
        assert!(r.h_inf_est.unwrap() - r.g_inf_est.unwrap() >= 2.0);
    }

    #[test]
    fn linear_front_spreads() {
        let s = synthetic(101, |t| (-1.0, 1.0 + 0.5 * t, 1.0 + t));
        let r = detect_regime(&s, 100.0, DEFAULT_EPS_FRONT, DEFAULT_EPS_MASS).unwrap();
        assert_eq!(r.regime, Regime::Spreading);
        assert_eq!(r.h_inf_est, None);
        assert!((r.trailing_front_rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn creeping_fronts_are_undecided() {
        let s = synthetic(101, |t| (-1.0, 1.0 + 5e-5 * t, 0.3));
        let r = detect_regime(&s, 100.0, DEFAULT_EPS_FRONT, DEFAULT_EPS_MASS).unwrap();
        assert_eq!(r.regime, Regime::Undecided);
        assert!(matches!(detect_regime(&synthetic(9, |_| (-1.0, 1.0, 1.0)), 8.0, 1e-5, 1e-6), Err(DiagError::SeriesTooShort { len: 9 })));
    }

    #[test]
    fn comparison_bound_examples() {
        let s = synthetic(20, |_| (-1.0, 1.0, 1.0));
        assert!(comparison_bound_check(&s, 1.0, 1.0).0);
        let mut bad = s.clone();
        bad.sup_v[10] = 2.0;
        let (ok, worst) = comparison_bound_check(&bad, 1.0, 1.0);
        assert!(!ok);
        assert!((worst - (1.0 + (-10.0f64).exp() + 5e-3 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn plateau_detector() {
        assert_eq!(plateau_run(&[0.0, 0.3, 0.305, 0.299, 0.0, 0.3], 0.3, 1e-2), 3);
        assert_eq!(plateau_run(&[], 0.3, 1e-2), 0);
    }

    #[test]
    fn spreading_with_strong_k_is_out_of_scope() {
        let s = synthetic(101, |t| (-1.0 - 0.5 * t, 1.0 + 0.5 * t, 1.0));
        let r = detect_regime(&s, 100.0, DEFAULT_EPS_FRONT, DEFAULT_EPS_MASS).unwrap();
        let st = state(InitialProfile::CosineBump { amplitude: 1.0 }, InitialProfile::Constant { value: 1.0 }, 1.0);
        let p = ModelParams { k: 1.5, ..Default::default() };
        let res = verify_theorems(&r, &p, &st.j1, &st, &s, &VerifyOptions::default());
        assert!(matches!(res, Err(DiagError::OutOfScope(_))));
        let undecided = RegimeReport { regime: Regime::Undecided, ..r };
        let res = verify_theorems(&undecided, &p, &st.j1, &st, &s, &VerifyOptions::default());
        assert_eq!(res, Err(DiagError::Undecided));
    }

    #[test]
    fn spreading_center_target_by_h_comp() {
        let s = synthetic(101, |t| (-1.0 - 0.5 * t, 1.0 + 0.5 * t, 1.0));
        let r = detect_regime(&s, 100.0, DEFAULT_EPS_FRONT, DEFAULT_EPS_MASS).unwrap();
        let st = state(InitialProfile::Constant { value: 1.0 }, InitialProfile::Constant { value: 0.0 }, 1.0);
        let p = ModelParams { k: 0.5, h_comp: 2.0, ..Default::default() };
        let checks = verify_theorems(&r, &p, &st.j1, &st, &s, &VerifyOptions::default()).unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
        assert!(checks[1].details.contains("(1, 0)"));
        let p = ModelParams { k: 0.5, h_comp: 0.5, ..Default::default() };
        let checks = verify_theorems(&r, &p, &st.j1, &st, &s, &VerifyOptions::default()).unwrap();
        assert!(!checks[1].pass);
    }

    #[test]
    fn vanishing_checks_report_margins() {
        let s = synthetic(101, |t| {
            let w = 1.0 + t.min(10.0) * 0.1;
            (-w, w, (-t).exp())
        });
        let r = detect_regime(&s, 100.0, DEFAULT_EPS_FRONT, DEFAULT_EPS_MASS).unwrap();
        let mut st = state(InitialProfile::CosineBump { amplitude: 1.0 }, InitialProfile::Constant { value: 1.0 }, 1.0);
        st.u.fill(0.0);
        let p = ModelParams { d1: 1.2, k: 0.5, ..Default::default() };
        let checks = verify_theorems(&r, &p, &st.j1, &st, &s, &VerifyOptions::default()).unwrap();
        let names: Vec<&str> = checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names[0], "vanishing_d1_gt_1_minus_k");
        assert!((checks[0].margin - 0.7).abs() < 1e-12);
        assert!(names.contains(&"vanishing_lambda_p_le_k_minus_1"));
        assert!(names.contains(&"vanishing_u_to_zero"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn rank(r: Regime) -> u8 {
            match r {
                Regime::Spreading => 0,
                Regime::Undecided => 1,
                Regime::Vanishing => 2,
            }
        }

        proptest! {
            #[test]
            fn larger_eps_front_only_moves_toward_vanishing(
                speed in 0.0f64..1e-3, decay in 0.0f64..0.3, floor in 0.0f64..1e-5,
                eps in 1e-7f64..1e-3, factor in 1.0f64..100.0,
            ) {
                let s = synthetic(60, |t| (-1.0, 1.0 + speed * t, floor + (-decay * t).exp() * 1e-3));
                let a = detect_regime(&s, 59.0, eps, 1e-6).unwrap();
                let b = detect_regime(&s, 59.0, eps * factor, 1e-6).unwrap();
                prop_assert!(rank(b.regime) >= rank(a.regime) || (a.regime == Regime::Undecided && b.regime == Regime::Undecided));
                if a.regime == Regime::Vanishing {
                    prop_assert_eq!(b.regime, Regime::Vanishing);
                }
            }
        }
    }
}
