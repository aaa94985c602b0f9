//! Explicit time stepping of the free-boundary system.
//!
//! `u` lives on the moving range `(g, h)`; `v` lives on a symmetric window that doubles
//! whenever a front gets within two kernel radii of an edge, and is continued by its
//! edge values outside. Front laws use the CDF-reduced single integrals
//! `h' = μ ∫ u(x) K1(x - h) dx`, `g' = -μ ∫ u(x) K1(g - x) dx`, evaluated exactly
//! per cell through the antiderivative of `K1`.
//!
//! Internally the state carries the coefficients of the unreduced system
//! `U_t = D1 (J1*U - U) + U (a1 - b1 U - c1 V)`, `V_t = D2 (J2*V - V) + V (a2 - b2 V - c2 U)`,
//! `h' = μ̂ ∫∫ J1 U`, so both parameterizations run through the same code path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::TimeSeries;
use crate::dynamics::{DynamicsError, ModelParams};
use crate::grid::{Tiling, UniformGrid};
use crate::kernels::{Stencil, ValidatedKernel};

pub type GridWindow = UniformGrid;

/// Fields may not go below this before a step is rejected.
pub const NEGATIVE_FLOOR: f64 = -1e-12;
pub const FIELD_CAP: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid initial u: {0}")]
    InvalidInitialU(String),
    #[error("invalid initial v: {0}")]
    InvalidInitialV(String),
    #[error(transparent)]
    Params(#[from] DynamicsError),
    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("invalid numerics: {0}")]
    InvalidNumerics(String),
    #[error("{field} = {value} at x = {x}, t = {t} left [-1e-12, 10]")]
    StabilityViolated { t: f64, field: &'static str, x: f64, value: f64 },
    #[error("metrics failed: {0}")]
    Metrics(String),
}

/// Initial profiles. For `u` every profile is restricted to `(-h0, h0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum InitialProfile {
    /// `amplitude · cos(π x / (2 h0))` on `(-h0, h0)`.
    CosineBump { amplitude: f64 },
    Constant { value: f64 },
    /// Piecewise-linear through `(x, value)` samples; zero outside for `u`,
    /// edge values outside for `v`.
    Table { x: Vec<f64>, values: Vec<f64> },
}

impl InitialProfile {
    fn check_table(x: &[f64], values: &[f64]) -> Result<(), String> {
        if x.len() != values.len() || x.len() < 2 {
            return Err("table needs at least two (x, value) pairs of equal length".into());
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(values).any(|v| !v.is_finite()) {
            return Err("table abscissae must be finite and strictly increasing".into());
        }
        Ok(())
    }

    fn interpolate(x: &[f64], values: &[f64], s: f64, outside: Option<f64>) -> f64 {
        let n = x.len();
        if s < x[0] {
            return outside.unwrap_or(values[0]);
        }
        if s > x[n - 1] {
            return outside.unwrap_or(values[n - 1]);
        }
        let i = x.partition_point(|&xi| xi <= s).clamp(1, n - 1) - 1;
        let t = (s - x[i]) / (x[i + 1] - x[i]);
        values[i] + t * (values[i + 1] - values[i])
    }

    pub fn max_value(&self) -> f64 {
        match self {
            Self::CosineBump { amplitude } => *amplitude,
            Self::Constant { value } => *value,
            Self::Table { values, .. } => values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

fn sample_u0(profile: &InitialProfile, grid: &UniformGrid, h0: f64) -> Result<Vec<f64>, SimError> {
    let bad = |m: String| SimError::InvalidInitialU(m);
    if let InitialProfile::Table { x, values } = profile {
        InitialProfile::check_table(x, values).map_err(bad)?;
        if let Some((xi, vi)) = x.iter().zip(values).find(|(_, v)| **v < 0.0) {
            return Err(bad(format!("negative value {vi} at x = {xi}")));
        }
        if let Some((xi, vi)) = x.iter().zip(values).find(|(xi, v)| xi.abs() >= h0 && **v > 0.0) {
            return Err(bad(format!("value {vi} at x = {xi} outside (-h0, h0) = (-{h0}, {h0})")));
        }
    }
    let mut u = vec![0.0; grid.len];
    let inside = grid.tile_open(-h0, h0);
    if inside.is_empty() {
        return Err(bad(format!("no grid node inside (-{h0}, {h0}); refine dx")));
    }
    for i in inside.indices() {
        let x = grid.x(i);
        let value = match profile {
            InitialProfile::CosineBump { amplitude } => amplitude * (std::f64::consts::FRAC_PI_2 * x / h0).cos(),
            InitialProfile::Constant { value } => *value,
            InitialProfile::Table { x: xs, values } => InitialProfile::interpolate(xs, values, x, Some(0.0)),
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(bad(format!("u0({x}) = {value}; must be positive on (-h0, h0)")));
        }
        u[i] = value;
    }
    Ok(u)
}

fn sample_v0(profile: &InitialProfile, grid: &UniformGrid) -> Result<Vec<f64>, SimError> {
    let bad = |m: String| SimError::InvalidInitialV(m);
    if let InitialProfile::Table { x, values } = profile {
        InitialProfile::check_table(x, values).map_err(bad)?;
    }
    (0..grid.len)
        .map(|i| {
            let x = grid.x(i);
            let value = match profile {
                InitialProfile::CosineBump { .. } => {
                    return Err(bad("cosine_bump is only available for u0".into()));
                }
                InitialProfile::Constant { value } => *value,
                InitialProfile::Table { x: xs, values } => InitialProfile::interpolate(xs, values, x, None),
            };
            if !(value >= 0.0 && value.is_finite()) {
                return Err(bad(format!("v0({x}) = {value}; must be nonnegative and bounded")));
            }
            Ok(value)
        })
        .collect()
}

/// Parameters of the unreduced system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralParams {
    /// Dispersal rate of `U` (`D1`).
    pub diff1: f64,
    /// Dispersal rate of `V` (`D2`).
    pub diff2: f64,
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub mu_hat: f64,
    pub h0: f64,
}

impl GeneralParams {
    /// The unreduced form of reduced parameters (`a1 = b1 = 1`, `a2 = b2 = γ`).
    pub fn from_reduced(p: &ModelParams) -> Self {
        Self {
            diff1: p.d1,
            diff2: p.d2,
            a1: 1.0,
            b1: 1.0,
            c1: p.k,
            a2: p.gamma,
            b2: p.gamma,
            c2: p.gamma * p.h_comp,
            mu_hat: p.mu,
            h0: p.h0,
        }
    }

    fn named(&self) -> [(&'static str, f64); 10] {
        [
            ("diff1", self.diff1),
            ("diff2", self.diff2),
            ("a1", self.a1),
            ("b1", self.b1),
            ("c1", self.c1),
            ("a2", self.a2),
            ("b2", self.b2),
            ("c2", self.c2),
            ("mu_hat", self.mu_hat),
            ("h0", self.h0),
        ]
    }
}

/// `u(t, x) = u_scale · U(t / time_scale, x)`, `v(t, x) = v_scale · V(t / time_scale, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTransform {
    pub time_scale: f64,
    pub u_scale: f64,
    pub v_scale: f64,
}

impl ScalingTransform {
    pub fn reduced_time(&self, t_general: f64) -> f64 {
        self.time_scale * t_general
    }
}

pub fn reduce_general(general: &GeneralParams) -> Result<(ModelParams, ScalingTransform), SimError> {
    for (name, value) in general.named() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(SimError::NonPositiveParameter { name, value });
        }
    }
    let g = general;
    let params = ModelParams {
        d1: g.diff1 / g.a1,
        d2: g.diff2 / g.a1,
        gamma: g.a2 / g.a1,
        k: g.a2 * g.c1 / (g.a1 * g.b2),
        h_comp: g.a1 * g.c2 / (g.a2 * g.b1),
        mu: g.mu_hat / g.b1,
        h0: g.h0,
    };
    let transform = ScalingTransform { time_scale: g.a1, u_scale: g.b1 / g.a1, v_scale: g.b2 / g.a2 };
    Ok((params, transform))
}

/// `dt ≤ 0.2 / (d1 + d2 + γ (1 + h_comp + 2) + (1 + k + 2))`.
pub fn stability_bound(p: &ModelParams) -> f64 {
    0.2 / (p.d1 + p.d2 + p.gamma * (3.0 + p.h_comp) + (3.0 + p.k))
}

/// Counters for every non-silent numerical intervention.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NumericsAudit {
    pub steps: u64,
    pub clamp_count_u: u64,
    pub clamp_count_v: u64,
    pub window_expansions: u64,
    /// Largest `Σ_edges (J2 mass beyond the window) · dist(v_edge, {0, 1})` seen.
    pub max_leakage: f64,
    /// Nodes outside `(g, h)` with nonzero `u`, summed over checks.
    pub support_violations: u64,
    pub fronts_monotone: bool,
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub g_front: f64,
    pub h_front: f64,
    pub grid: GridWindow,
    /// Zero at nodes outside `(g_front, h_front)`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Reduced parameters (for a general run: those of its reduced twin).
    pub params: ModelParams,
    /// Coefficients actually integrated.
    pub coeffs: GeneralParams,
    pub j1: ValidatedKernel,
    pub j2: ValidatedKernel,
    pub audit: NumericsAudit,
    s1: Stencil,
    s2: Stencil,
}

/// Rates of change at the current state.
#[derive(Clone, Debug, PartialEq)]
pub struct Tendencies {
    pub g_rate: f64,
    pub h_rate: f64,
    /// `u_t` at every window node (zero outside `(g, h)`).
    pub u_t: Vec<f64>,
    pub v_t: Vec<f64>,
}

pub fn init_state(
    params: ModelParams,
    kernels: (ValidatedKernel, ValidatedKernel),
    u0: &InitialProfile,
    v0: &InitialProfile,
    dx: f64,
    window_pad: f64,
) -> Result<SimState, SimError> {
    params.validate()?;
    build_state(params, GeneralParams::from_reduced(&params), kernels, u0, v0, dx, window_pad)
}

/// Like [`init_state`], but integrates the unreduced system in its own units.
pub fn init_general_state(
    general: GeneralParams,
    kernels: (ValidatedKernel, ValidatedKernel),
    u0: &InitialProfile,
    v0: &InitialProfile,
    dx: f64,
    window_pad: f64,
) -> Result<SimState, SimError> {
    let (params, _) = reduce_general(&general)?;
    build_state(params, general, kernels, u0, v0, dx, window_pad)
}

fn build_state(
    params: ModelParams,
    coeffs: GeneralParams,
    (j1, j2): (ValidatedKernel, ValidatedKernel),
    u0: &InitialProfile,
    v0: &InitialProfile,
    dx: f64,
    window_pad: f64,
) -> Result<SimState, SimError> {
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(SimError::InvalidNumerics(format!("dx must be positive, got {dx}")));
    }
    if !(window_pad >= 0.0 && window_pad.is_finite()) {
        return Err(SimError::InvalidNumerics(format!("window_pad must be nonnegative, got {window_pad}")));
    }
    let h0 = coeffs.h0;
    let n_half = ((h0 + window_pad) / dx).ceil() as i64;
    let grid = UniformGrid::new(-n_half, dx, (2 * n_half + 1) as usize);
    let u = sample_u0(u0, &grid, h0)?;
    let v = sample_v0(v0, &grid)?;
    let (s1, s2) = (j1.stencil(dx), j2.stencil(dx));
    let mut state = SimState {
        t: 0.0,
        g_front: -h0,
        h_front: h0,
        grid,
        u,
        v,
        params,
        coeffs,
        j1,
        j2,
        audit: NumericsAudit { fronts_monotone: true, ..Default::default() },
        s1,
        s2,
    };
    state.ensure_window();
    state.audit.window_expansions = 0;
    state.audit.max_leakage = state.leakage();
    Ok(state)
}

/// Sum of `w[m] x[m]` with eight fixed partial sums (deterministic, vectorizable).
#[inline]
fn lane_dot(w: &[f64], x: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (wc, xc) = (w.chunks_exact(8), x.chunks_exact(8));
    let (wr, xr) = (wc.remainder(), xc.remainder());
    for (a, b) in wc.zip(xc) {
        for l in 0..8 {
            acc[l] += a[l] * b[l];
        }
    }
    let tail: f64 = wr.iter().zip(xr).map(|(a, b)| a * b).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Sum of `w[m] (x[m] - c)`; exactly zero when `x ≡ c`.
#[inline]
fn lane_dot_centered(w: &[f64], x: &[f64], c: f64) -> f64 {
    let mut acc = [0.0f64; 8];
    let (wc, xc) = (w.chunks_exact(8), x.chunks_exact(8));
    let (wr, xr) = (wc.remainder(), xc.remainder());
    for (a, b) in wc.zip(xc) {
        for l in 0..8 {
            acc[l] += a[l] * (b[l] - c);
        }
    }
    let tail: f64 = wr.iter().zip(xr).map(|(a, b)| a * (b - c)).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

const PAR_MIN_LEN: usize = 2048;

impl SimState {
    pub fn support_radius_max(&self) -> f64 {
        self.j1.support_radius().max(self.j2.support_radius())
    }

    /// Nodes strictly inside the current `(g, h)` with their cells.
    pub fn u_tiling(&self) -> Tiling {
        self.grid.tile_open(self.g_front, self.h_front)
    }

    pub fn front_speeds(&self) -> (f64, f64) {
        let mu = self.coeffs.mu_hat;
        let tiling = self.u_tiling();
        if mu == 0.0 || tiling.is_empty() {
            return (0.0, 0.0);
        }
        let (g, h) = (self.g_front, self.h_front);
        let reach = self.j1.support_radius() + 2.0 * self.grid.dx;
        let kk = |s: f64| self.j1.cdf_integral(s);
        let mut h_sum = 0.0;
        let mut g_sum = 0.0;
        for j in tiling.indices() {
            let u = self.u[j];
            if u == 0.0 {
                continue;
            }
            let x = self.grid.x(j);
            let (lo, hi) = tiling.cell(j);
            if x >= h - reach {
                h_sum += u * (kk(hi - h) - kk(lo - h)).max(0.0);
            }
            if x <= g + reach {
                g_sum += u * (kk(g - lo) - kk(g - hi)).max(0.0);
            }
        }
        (-mu * g_sum, mu * h_sum)
    }

    /// `∫ J1(x_i - y) u(y) dy` over the cells of `source` at every node of `target`.
    fn u_convolution(&self, source: &Tiling, target: &Tiling) -> Vec<f64> {
        let r = self.s1.radius;
        let w = self.s1.weights();
        let n = self.grid.len;
        let mut padded = vec![0.0; n + 2 * r];
        padded[r..r + n].copy_from_slice(&self.u);
        let boundary: Vec<usize> = if source.is_empty() {
            Vec::new()
        } else if source.first == source.last {
            vec![source.first]
        } else {
            vec![source.first, source.last]
        };
        let targets: Vec<usize> = target.indices().collect();
        targets
            .par_iter()
            .with_min_len(PAR_MIN_LEN)
            .map(|&i| {
                let mut conv = lane_dot(w, &padded[i..i + 2 * r + 1]);
                let x = self.grid.x(i);
                for &j in &boundary {
                    let m = j as isize - i as isize;
                    if m.unsigned_abs() > r + 2 {
                        continue;
                    }
                    let (lo, hi) = source.cell(j);
                    conv += self.u[j] * (self.j1.cell_mass(x, lo, hi) - self.s1.weight(m));
                }
                conv
            })
            .collect()
    }

    /// `∫ J2(x_i - y) v_ext(y) dy - v_i` at every node, `v_ext` the edge-continued field.
    fn v_nonlocal(&self) -> Vec<f64> {
        let r = self.s2.radius;
        let w = self.s2.weights();
        let n = self.grid.len;
        let mut ext = Vec::with_capacity(n + 2 * r);
        ext.extend(std::iter::repeat_n(self.v[0], r));
        ext.extend_from_slice(&self.v);
        ext.extend(std::iter::repeat_n(self.v[n - 1], r));
        // changes[k] = number of k' ≤ k with ext[k'] != ext[k' - 1]
        let mut changes = vec![0u32; ext.len()];
        for k in 1..ext.len() {
            changes[k] = changes[k - 1] + u32::from(ext[k] != ext[k - 1]);
        }
        (0..n)
            .into_par_iter()
            .with_min_len(PAR_MIN_LEN)
            .map(|i| {
                if changes[i + 2 * r] == changes[i] {
                    0.0
                } else {
                    lane_dot_centered(w, &ext[i..i + 2 * r + 1], self.v[i])
                }
            })
            .collect()
    }

    fn u_reaction_rate(&self, conv: f64, u: f64, v: f64) -> f64 {
        let c = &self.coeffs;
        c.diff1 * (conv - u) + u * (c.a1 - c.b1 * u - c.c1 * v)
    }

    fn v_reaction_rate(&self, nonlocal: f64, u: f64, v: f64) -> f64 {
        let c = &self.coeffs;
        c.diff2 * nonlocal + v * (c.a2 - c.b2 * v - c.c2 * u)
    }

    /// Rates at the current state; `u_t` is reported on the current `(g, h)`.
    pub fn tendencies(&self) -> Tendencies {
        let (g_rate, h_rate) = self.front_speeds();
        let tiling = self.u_tiling();
        let conv = self.u_convolution(&tiling, &tiling);
        let mut u_t = vec![0.0; self.grid.len];
        for (c, i) in conv.iter().zip(tiling.indices()) {
            u_t[i] = self.u_reaction_rate(*c, self.u[i], self.v[i]);
        }
        let nl = self.v_nonlocal();
        let v_t = (0..self.grid.len).map(|i| self.v_reaction_rate(nl[i], self.u[i], self.v[i])).collect();
        Tendencies { g_rate, h_rate, u_t, v_t }
    }

    /// One explicit Euler step of length `dt`.
    pub fn step(&mut self, dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidNumerics(format!("dt must be positive, got {dt}")));
        }
        let (g_rate, h_rate) = self.front_speeds();
        let g_new = self.g_front + dt * g_rate;
        let h_new = self.h_front + dt * h_rate;
        let source = self.u_tiling();
        let target = self.grid.tile_open(g_new, h_new);
        let conv = self.u_convolution(&source, &target);
        let nl = self.v_nonlocal();
        let t_new = self.t + dt;

        let mut u_new = vec![0.0; self.grid.len];
        for (c, i) in conv.iter().zip(target.indices()) {
            let u = self.u[i];
            u_new[i] = u + dt * self.u_reaction_rate(*c, u, self.v[i]);
        }
        let mut v_new: Vec<f64> = (0..self.grid.len)
            .map(|i| self.v[i] + dt * self.v_reaction_rate(nl[i], self.u[i], self.v[i]))
            .collect();

        let clamps_u = self.screen("u", &mut u_new, t_new)?;
        let clamps_v = self.screen("v", &mut v_new, t_new)?;

        if g_new > self.g_front || h_new < self.h_front {
            self.audit.fronts_monotone = false;
        }
        self.audit.clamp_count_u += clamps_u;
        self.audit.clamp_count_v += clamps_v;
        self.audit.steps += 1;
        self.u = u_new;
        self.v = v_new;
        self.g_front = g_new;
        self.h_front = h_new;
        self.t = t_new;
        self.ensure_window();
        self.audit.max_leakage = self.audit.max_leakage.max(self.leakage());
        Ok(())
    }

    /// Reject out-of-range values, floor tiny negatives to zero; returns the floor count.
    fn screen(&self, field: &'static str, values: &mut [f64], t: f64) -> Result<u64, SimError> {
        let mut count = 0;
        for (i, value) in values.iter_mut().enumerate() {
            if !(*value >= NEGATIVE_FLOOR && *value <= FIELD_CAP) {
                return Err(SimError::StabilityViolated { t, field, x: self.grid.x(i), value: *value });
            }
            if *value < 0.0 {
                *value = 0.0;
                count += 1;
            }
        }
        Ok(count)
    }

    /// Double the window until both fronts are at least `2 R_max` from its edges.
    fn ensure_window(&mut self) {
        let margin = 2.0 * self.support_radius_max();
        let mut n_half = -self.grid.offset;
        let needed = |n_half: i64| {
            let edge = n_half as f64 * self.grid.dx;
            self.g_front - margin < -edge || self.h_front + margin > edge
        };
        if !needed(n_half) {
            return;
        }
        while needed(n_half) {
            n_half *= 2;
        }
        let extra = (n_half + self.grid.offset) as usize;
        let len = (2 * n_half + 1) as usize;
        let mut u = vec![0.0; len];
        u[extra..extra + self.grid.len].copy_from_slice(&self.u);
        let (left, right) = (self.v[0], self.v[self.grid.len - 1]);
        let mut v = vec![right; len];
        v[..extra].fill(left);
        v[extra..extra + self.grid.len].copy_from_slice(&self.v);
        self.grid = UniformGrid::new(-n_half, self.grid.dx, len);
        self.u = u;
        self.v = v;
        self.audit.window_expansions += 1;
    }

    /// Kernel mass beyond the window seen from the edge nodes, weighted by how far the
    /// edge values are from the far-field equilibria 0 and 1.
    pub fn leakage(&self) -> f64 {
        let tail = 1.0 - self.j2.cdf(0.5 * self.grid.dx);
        let n = self.grid.len;
        [self.v[0], self.v[n - 1]].iter().map(|&ve| tail * ve.abs().min((ve - 1.0).abs())).sum()
    }

    /// Nodes outside `(g, h)` carrying nonzero `u`.
    pub fn support_violations(&self) -> u64 {
        let tiling = self.u_tiling();
        (0..self.grid.len).filter(|&i| !tiling.contains(i) && self.u[i] != 0.0).count() as u64
    }

    /// Linear interpolation of `(u, v)` at `x` (inside the window).
    pub fn sample(&self, x: f64) -> (f64, f64) {
        let dx = self.grid.dx;
        let s = x / dx - self.grid.offset as f64;
        let i = (s.floor().max(0.0) as usize).min(self.grid.len - 2);
        let t = (s - i as f64).clamp(0.0, 1.0);
        let lerp = |f: &[f64]| f[i] + t * (f[i + 1] - f[i]);
        (lerp(&self.u), lerp(&self.v))
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.t,
            g_front: self.g_front,
            h_front: self.h_front,
            x: self.grid.nodes(),
            u: self.u.clone(),
            v: self.v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub g_front: f64,
    pub h_front: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub t_end: f64,
    pub dt: f64,
    pub snapshot_every: f64,
    /// Sampling interval of the time series (metrics are cheap; snapshots are not).
    pub series_every: f64,
    /// Half-width `L` of `v_dev(L) = ∫_{-L}^{L} |v - 1|`.
    pub v_dev_half_width: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub snapshots: Vec<Snapshot>,
    pub final_state: SimState,
}

fn stride(every: f64, dt: f64) -> u64 {
    ((every / dt).round() as u64).max(1)
}

/// Advance to `t_end` with steps of `dt` (the last one shortened if needed).
pub fn run(mut state: SimState, opts: &RunOptions) -> Result<RunOutput, SimError> {
    let RunOptions { t_end, dt, snapshot_every, series_every, v_dev_half_width } = *opts;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(SimError::InvalidNumerics(format!("T must be nonnegative, got {t_end}")));
    }
    if !(dt > 0.0 && snapshot_every > 0.0 && series_every > 0.0 && v_dev_half_width > 0.0) {
        return Err(SimError::InvalidNumerics(
            "dt, snapshot_every, series_every and the v_dev half-width must be positive".into(),
        ));
    }
    let t0 = state.t;
    let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as u64;
    let (snap_stride, series_stride) = (stride(snapshot_every, dt), stride(series_every, dt));

    let mut series = TimeSeries::new(v_dev_half_width);
    series.push(&state).map_err(|e| SimError::Metrics(e.to_string()))?;
    state.audit.support_violations += state.support_violations();
    let mut snapshots = vec![state.snapshot()];
    for n in 1..=steps {
        let t_target = t0 + (n as f64 * dt).min(t_end);
        let h = t_target - state.t;
        state.step(h)?;
        state.t = t_target;
        let last = n == steps;
        if n % series_stride == 0 || last {
            series.push(&state).map_err(|e| SimError::Metrics(e.to_string()))?;
            state.audit.support_violations += state.support_violations();
        }
        if n % snap_stride == 0 || last {
            snapshots.push(state.snapshot());
        }
    }
    Ok(RunOutput { series, snapshots, final_state: state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{validate_kernel, KernelSpec};

    fn uniform() -> ValidatedKernel {
        validate_kernel(&KernelSpec::Uniform { half_width: 1.0 }, 0.05).unwrap()
    }

    fn kernels() -> (ValidatedKernel, ValidatedKernel) {
        (uniform(), uniform())
    }

    fn params() -> ModelParams {
        ModelParams { d1: 1.0, d2: 1.0, k: 0.5, h_comp: 0.5, gamma: 1.0, mu: 5.0, h0: 1.0 }
    }

    fn bump() -> InitialProfile {
        InitialProfile::CosineBump { amplitude: 1.0 }
    }

    fn ones() -> InitialProfile {
        InitialProfile::Constant { value: 1.0 }
    }

    #[test]
    fn init_cosine_bump() {
        let s = init_state(params(), kernels(), &bump(), &ones(), 0.1, 3.0).unwrap();
        assert_eq!((s.g_front, s.h_front, s.t), (-1.0, 1.0, 0.0));
        let i0 = s.grid.nearest(0.0).unwrap();
        assert_eq!(s.u[i0], 1.0);
        assert!(s.grid.x_min() <= -4.0 && s.grid.x_max() >= 4.0);
        assert_eq!(s.support_violations(), 0);
        // nodes at ±h0 are outside the open range
        assert_eq!(s.u[s.grid.nearest(1.0).unwrap()], 0.0);
    }

    #[test]
    fn init_rejects_bad_profiles() {
        let neg = InitialProfile::Table { x: vec![-1.0, 0.0, 1.0], values: vec![0.0, -0.1, 0.0] };
        assert!(matches!(init_state(params(), kernels(), &neg, &ones(), 0.1, 2.0), Err(SimError::InvalidInitialU(_))));
        let wide = InitialProfile::Table { x: vec![-2.0, 0.0, 2.0], values: vec![0.1, 1.0, 0.1] };
        assert!(matches!(init_state(params(), kernels(), &wide, &ones(), 0.1, 2.0), Err(SimError::InvalidInitialU(_))));
        let v_neg = InitialProfile::Constant { value: -0.5 };
        assert!(matches!(init_state(params(), kernels(), &bump(), &v_neg, 0.1, 2.0), Err(SimError::InvalidInitialV(_))));
        let ok = InitialProfile::Table { x: vec![-1.0, 0.0, 1.0], values: vec![0.0, 1.0, 0.0] };
        assert!(init_state(params(), kernels(), &ok, &ones(), 0.1, 2.0).is_ok());
    }

    #[test]
    fn speeds_vanish_without_u_or_mu() {
        let mut s = init_state(params(), kernels(), &bump(), &ones(), 0.1, 2.0).unwrap();
        let speeds = s.front_speeds();
        assert!(speeds.0 < 0.0 && speeds.1 > 0.0);
        s.coeffs.mu_hat = 0.0;
        assert_eq!(s.front_speeds(), (0.0, 0.0));
        let mut s = init_state(params(), kernels(), &bump(), &ones(), 0.1, 2.0).unwrap();
        s.u.fill(0.0);
        assert_eq!(s.front_speeds(), (0.0, 0.0));
    }

    #[test]
    fn speeds_match_closed_form_for_unit_density() {
        // ∫_{-1}^{0} (s + 1)/2 ds = 1/4 once h - g ≥ 1
        for (h0, dx) in [(1.0, 0.1), (0.5, 0.1), (2.03, 0.07)] {
            let p = ModelParams { mu: 3.0, h0, ..params() };
            let s = init_state(p, kernels(), &InitialProfile::Constant { value: 1.0 }, &ones(), dx, 2.0).unwrap();
            let (g_rate, h_rate) = s.front_speeds();
            assert!((h_rate - 0.75).abs() < 1e-12, "{h_rate}");
            assert!((g_rate + 0.75).abs() < 1e-12, "{g_rate}");
        }
    }

    #[test]
    fn resident_equilibrium_is_exact() {
        let mut s = init_state(params(), kernels(), &bump(), &ones(), 0.1, 2.0).unwrap();
        s.u.fill(0.0);
        let before = s.clone();
        s.step(0.02).unwrap();
        assert_eq!(s.v, before.v);
        assert!(s.u.iter().all(|&u| u == 0.0));
        assert_eq!((s.g_front, s.h_front), (before.g_front, before.h_front));
    }

    #[test]
    fn constant_half_resident_grows_logistically() {
        let half = InitialProfile::Constant { value: 0.5 };
        let mut s = init_state(params(), kernels(), &bump(), &half, 0.1, 2.0).unwrap();
        s.u.fill(0.0);
        let dt = 0.02;
        s.step(dt).unwrap();
        assert!(s.v.iter().all(|&v| v == 0.5 + dt * 0.25));
    }

    #[test]
    fn single_node_tendency() {
        // one node at x = 0 with cell (-0.05, 0.05): J(0)·dx·u = 0.025
        let p = ModelParams { h0: 0.05, ..params() };
        let u0 = InitialProfile::Constant { value: 0.5 };
        let v0 = InitialProfile::Constant { value: 0.0 };
        let s = init_state(p, kernels(), &u0, &v0, 0.1, 2.0).unwrap();
        assert_eq!(s.u_tiling().indices().count(), 1);
        let i0 = s.grid.nearest(0.0).unwrap();
        let rates = s.tendencies();
        assert!((rates.u_t[i0] + 0.225).abs() < 1e-15, "{}", rates.u_t[i0]);
    }

    #[test]
    fn convolution_matches_direct_cell_quadrature() {
        let s = init_state(params(), kernels(), &bump(), &ones(), 0.05, 2.0).unwrap();
        let tiling = s.u_tiling();
        let fast = s.u_convolution(&tiling, &tiling);
        for (c, i) in fast.iter().zip(tiling.indices()) {
            let x = s.grid.x(i);
            let direct: f64 = tiling
                .indices()
                .map(|j| {
                    let (lo, hi) = tiling.cell(j);
                    s.u[j] * s.j1.cell_mass(x, lo, hi)
                })
                .sum();
            assert!((c - direct).abs() < 1e-13, "{c} vs {direct}");
        }
    }

    #[test]
    fn window_doubles_and_continues_edges() {
        let p = ModelParams { mu: 50.0, ..params() };
        let mut s = init_state(p, kernels(), &bump(), &ones(), 0.1, 2.0).unwrap();
        let len0 = s.grid.len;
        for _ in 0..200 {
            s.step(0.02).unwrap();
        }
        assert!(s.audit.window_expansions > 0);
        assert!(s.grid.len > len0);
        let margin = 2.0 * s.support_radius_max();
        assert!(s.grid.x_min() <= s.g_front - margin && s.grid.x_max() >= s.h_front + margin);
        assert_eq!(s.grid.x_min(), -s.grid.x_max());
        assert_eq!(s.support_violations(), 0);
    }

    #[test]
    fn stability_violation_reported_with_time() {
        let mut s = init_state(params(), kernels(), &bump(), &ones(), 0.1, 2.0).unwrap();
        match s.step(5.0) {
            Err(SimError::StabilityViolated { t, .. }) => assert_eq!(t, 5.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_horizon_keeps_initial_snapshot_only() {
        let s = init_state(params(), kernels(), &bump(), &ones(), 0.1, 2.0).unwrap();
        let opts = RunOptions { t_end: 0.0, dt: 0.02, snapshot_every: 1.0, series_every: 0.1, v_dev_half_width: 2.0 };
        let out = run(s, &opts).unwrap();
        assert_eq!(out.snapshots.len(), 1);
        assert_eq!(out.series.t, vec![0.0]);
    }

    #[test]
    fn run_is_deterministic_and_monotone() {
        let opts = RunOptions { t_end: 2.0, dt: 0.02, snapshot_every: 1.0, series_every: 0.1, v_dev_half_width: 2.0 };
        let a = run(init_state(params(), kernels(), &bump(), &ones(), 0.1, 2.0).unwrap(), &opts).unwrap();
        let b = run(init_state(params(), kernels(), &bump(), &ones(), 0.1, 2.0).unwrap(), &opts).unwrap();
        assert_eq!(a.final_state.u, b.final_state.u);
        assert_eq!(a.series.h_front, b.series.h_front);
        assert_eq!(a.snapshots.len(), 3);
        assert_eq!(a.series.t.len(), 21);
        assert_eq!(*a.series.t.last().unwrap(), 2.0);
        assert!(a.series.h_front.windows(2).all(|w| w[1] >= w[0]));
        assert!(a.series.g_front.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.final_state.audit.fronts_monotone);
        assert_eq!(a.final_state.audit.clamp_count_u + a.final_state.audit.clamp_count_v, 0);
    }

    #[test]
    fn reduction_examples() {
        let p = params();
        let general = GeneralParams::from_reduced(&p);
        let (back, tr) = reduce_general(&general).unwrap();
        assert_eq!(back, p);
        assert_eq!(tr, ScalingTransform { time_scale: 1.0, u_scale: 1.0, v_scale: 1.0 });

        let g = GeneralParams { diff1: 2.0, a1: 2.0, ..general };
        let (r, tr) = reduce_general(&g).unwrap();
        assert_eq!(r.d1, 1.0);
        assert_eq!(tr.reduced_time(3.0), 6.0);

        let bad = GeneralParams { c2: 0.0, ..general };
        assert!(matches!(reduce_general(&bad), Err(SimError::NonPositiveParameter { name: "c2", .. })));
    }

    #[test]
    fn stability_bound_formula() {
        let p = ModelParams { d1: 1.0, d2: 1.0, k: 0.5, h_comp: 0.5, gamma: 1.0, ..params() };
        assert!((stability_bound(&p) - 0.2 / 9.0).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn steps_preserve_structure(
                k in 0.1f64..2.0, h in 0.1f64..2.0, mu in 0.1f64..20.0,
                amp in 0.1f64..1.0, vv in 0.0f64..1.5, d1 in 0.2f64..2.0,
            ) {
                let p = ModelParams { d1, d2: 1.0, k, h_comp: h, gamma: 1.0, mu, h0: 0.7 };
                let dt = stability_bound(&p);
                let v0 = InitialProfile::Constant { value: vv };
                let mut s = init_state(p, kernels(), &InitialProfile::CosineBump { amplitude: amp }, &v0, 0.1, 1.0).unwrap();
                for _ in 0..30 {
                    let (g, hf) = (s.g_front, s.h_front);
                    s.step(dt).unwrap();
                    prop_assert!(s.g_front <= g && s.h_front >= hf);
                    prop_assert_eq!(s.support_violations(), 0);
                    prop_assert!(s.u.iter().chain(&s.v).all(|&x| x >= 0.0));
                }
                prop_assert_eq!(s.audit.clamp_count_u + s.audit.clamp_count_v, 0);
            }
        }
    }
}
