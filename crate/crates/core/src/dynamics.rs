//! The spatially homogeneous skeleton of the model.
//!
//! `u' = u(1 - u - k v)`, `v' = γ v(1 - v - h u)` with its equilibria, the quadratic
//! `F(s) = a s² + b s + c` whose roots in `[0, 1]` split parameter space into Θ1/Θ2,
//! the bound sequences used in the spreading analysis, and the boundary inequalities
//! of the invariant rectangles used in the vanishing analysis.
//!
//! Naming: `h_comp` is the reaction coefficient of `u` in the `v` equation; the
//! right front of the simulator is always `h_front`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameter {name}: {value} (must be positive and finite)")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("invalid ODE setup: {0}")]
    InvalidSetup(String),
    #[error("ODE state left the invariant box at t = {t}: ({u}, {v})")]
    StepTooLarge { t: f64, u: f64, v: f64 },
    #[error("parameters are in Θ1; x_* is only defined in Θ2")]
    NotInTheta2,
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("sigma = {sigma} outside ({lo}, {hi})")]
    InvalidSigma { sigma: f64, lo: f64, hi: f64 },
}

/// Reduced model parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub d1: f64,
    pub d2: f64,
    /// Competition effect of `v` on `u`.
    pub k: f64,
    /// Competition effect of `u` on `v`.
    pub h_comp: f64,
    pub gamma: f64,
    /// Front response to the outward flux of `u`.
    pub mu: f64,
    /// Initial half-width of the range of `u`.
    pub h0: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { d1: 1.0, d2: 1.0, k: 0.5, h_comp: 0.5, gamma: 1.0, mu: 5.0, h0: 2.0 }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        for (name, value) in self.named() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(DynamicsError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("d1", self.d1),
            ("d2", self.d2),
            ("k", self.k),
            ("h_comp", self.h_comp),
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("h0", self.h0),
        ]
    }

    /// `d1 + k - 1`.
    pub fn d1_tilde(&self) -> f64 {
        self.d1 + self.k - 1.0
    }

    /// Coefficients `(a, b, c)` of `F`.
    pub fn f_coefficients(&self) -> (f64, f64, f64) {
        let g = self.gamma;
        let dt = self.d1_tilde();
        let a = g * (1.0 - self.h_comp * self.k);
        let b = dt * g * self.h_comp - a - self.d2;
        let c = -dt * g * self.h_comp;
        (a, b, c)
    }

    pub fn f_poly(&self, s: f64) -> f64 {
        let (a, b, c) = self.f_coefficients();
        (a * s + b) * s + c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompetitionCase {
    /// `max{h, k} < 1`.
    Weak,
    /// `k < 1 < h`.
    UStrong,
    /// `h < 1 < k`.
    VStrong,
    /// `min{h, k} > 1`.
    Strong,
    /// `k = 1` or `h = 1`.
    BoundaryCase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub r0: (f64, f64),
    pub r1: (f64, f64),
    pub r2: (f64, f64),
    pub r_star: Option<(f64, f64)>,
    pub competition_case: CompetitionCase,
}

/// Equilibria of the ODE and the competition case; depends on `(k, h_comp)` only.
pub fn equilibria_and_class(params: &ModelParams) -> EquilibriumSet {
    let (k, h) = (params.k, params.h_comp);
    let competition_case = if k == 1.0 || h == 1.0 {
        CompetitionCase::BoundaryCase
    } else if k < 1.0 && h < 1.0 {
        CompetitionCase::Weak
    } else if k < 1.0 {
        CompetitionCase::UStrong
    } else if h < 1.0 {
        CompetitionCase::VStrong
    } else {
        CompetitionCase::Strong
    };
    let r_star = matches!(competition_case, CompetitionCase::Weak | CompetitionCase::Strong).then(|| {
        let det = 1.0 - h * k;
        ((1.0 - k) / det, (1.0 - h) / det)
    });
    EquilibriumSet { r0: (0.0, 0.0), r1: (1.0, 0.0), r2: (0.0, 1.0), r_star, competition_case }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Components reset to zero after undershooting below `-1e-14`.
    pub clip_count: usize,
}

impl Trajectory {
    pub fn last(&self) -> (f64, f64) {
        (*self.u.last().unwrap(), *self.v.last().unwrap())
    }
}

const ODE_CLIP: f64 = -1e-14;

/// Classical RK4 integration of the ODE from `init` over `[0, t_end]`.
pub fn ode_trajectory(
    params: &ModelParams,
    init: (f64, f64),
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidSetup(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(DynamicsError::InvalidSetup(format!("T must be nonnegative, got {t_end}")));
    }
    let (u0, v0) = init;
    if !(u0 >= 0.0 && v0 >= 0.0 && u0.is_finite() && v0.is_finite()) {
        return Err(DynamicsError::InvalidSetup(format!("initial state must be nonnegative, got {init:?}")));
    }
    let (k, h, g) = (params.k, params.h_comp, params.gamma);
    let rhs = |u: f64, v: f64| (u * (1.0 - u - k * v), g * v * (1.0 - v - h * u));
    let (u_cap, v_cap) = (10.0 * u0.max(1.0), 10.0 * v0.max(1.0));

    let steps = (t_end / dt).ceil() as usize;
    let mut traj = Trajectory {
        t: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        clip_count: 0,
    };
    let (mut u, mut v, mut t) = (u0, v0, 0.0);
    traj.t.push(t);
    traj.u.push(u);
    traj.v.push(v);
    for n in 0..steps {
        let tn = ((n + 1) as f64 * dt).min(t_end);
        let h_step = tn - t;
        let (k1u, k1v) = rhs(u, v);
        let (k2u, k2v) = rhs(u + 0.5 * h_step * k1u, v + 0.5 * h_step * k1v);
        let (k3u, k3v) = rhs(u + 0.5 * h_step * k2u, v + 0.5 * h_step * k2v);
        let (k4u, k4v) = rhs(u + h_step * k3u, v + h_step * k3v);
        u += h_step / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h_step / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        t = tn;
        if !(u.abs() <= u_cap && v.abs() <= v_cap) {
            return Err(DynamicsError::StepTooLarge { t, u, v });
        }
        if u < ODE_CLIP {
            u = 0.0;
            traj.clip_count += 1;
        }
        if v < ODE_CLIP {
            v = 0.0;
            traj.clip_count += 1;
        }
        traj.t.push(t);
        traj.u.push(u);
        traj.v.push(v);
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theta {
    #[serde(rename = "theta1")]
    Theta1,
    #[serde(rename = "theta2")]
    Theta2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormVerdict {
    Theta1,
    Theta2,
    /// `d̃1 ≤ 0`.
    Inapplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SufficientCondition {
    /// `d1 ≥ 1`.
    D1GeOne,
    /// `k h ≤ 1 + d2/γ`.
    KhSmall,
}

/// Classification of a parameter tuple by the roots of `F` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d1_tilde: f64,
    pub k: f64,
    pub discriminant: f64,
    pub f_at_0: f64,
    pub f_at_1: f64,
    pub verdict_roots: Theta,
    pub verdict_closed_form: ClosedFormVerdict,
    pub sufficient_condition_hit: Option<SufficientCondition>,
    /// Distinct roots in `[0, 1]`, ascending.
    pub roots_in_unit_interval: Vec<f64>,
    pub double_root: bool,
    /// `sqrt(c/a)` and `b/(-2a)` from the closed-form test (when `a < 0 ≤ c/a`).
    pub closed_form_sqrt_ratio: Option<f64>,
    pub closed_form_vertex: Option<f64>,
    pub x_star: Option<f64>,
}

/// Tolerance on both ends of `[0, 1]` for root membership.
pub const ROOT_TOL: f64 = 1e-12;

/// Real roots of `a s² + b s + c`, ascending, a double root listed once.
/// Returns the roots and whether the single root is a double root.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> (Vec<f64>, bool) {
    let scale = b.abs().max(c.abs());
    if a.abs() < 1e-12 * scale || a == 0.0 {
        if b == 0.0 {
            return (Vec::new(), false);
        }
        return (vec![-c / b], false);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return (Vec::new(), false);
    }
    if disc == 0.0 {
        return (vec![-b / (2.0 * a)], true);
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if lo == hi {
        (vec![lo], true)
    } else {
        (vec![lo, hi], false)
    }
}

pub fn theta_classify(params: &ModelParams) -> ThetaReport {
    let (a, b, c) = params.f_coefficients();
    let d1_tilde = params.d1_tilde();
    let (roots, double) = quadratic_roots(a, b, c);
    let in_unit: Vec<f64> = roots.into_iter().filter(|r| *r >= -ROOT_TOL && *r <= 1.0 + ROOT_TOL).collect();
    let double_root = double && !in_unit.is_empty();
    let verdict_roots = if in_unit.is_empty() { Theta::Theta1 } else { Theta::Theta2 };

    let (sqrt_ratio, vertex) = if a < 0.0 && c / a >= 0.0 {
        (Some((c / a).sqrt()), Some(b / (-2.0 * a)))
    } else {
        (None, None)
    };
    let verdict_closed_form = if d1_tilde > 0.0 {
        let hit = a <= c && matches!((sqrt_ratio, vertex), (Some(s), Some(m)) if s <= m && m <= 1.0);
        if hit {
            ClosedFormVerdict::Theta2
        } else {
            ClosedFormVerdict::Theta1
        }
    } else {
        ClosedFormVerdict::Inapplicable
    };

    let sufficient_condition_hit = if params.d1 >= 1.0 {
        Some(SufficientCondition::D1GeOne)
    } else if params.k * params.h_comp <= 1.0 + params.d2 / params.gamma {
        Some(SufficientCondition::KhSmall)
    } else {
        None
    };

    let x_star = (verdict_roots == Theta::Theta2).then(|| in_unit[0]);
    ThetaReport {
        a,
        b,
        c,
        d1_tilde,
        k: params.k,
        discriminant: b * b - 4.0 * a * c,
        f_at_0: c,
        f_at_1: a + b + c,
        verdict_roots,
        verdict_closed_form,
        sufficient_condition_hit,
        roots_in_unit_interval: in_unit,
        double_root,
        closed_form_sqrt_ratio: sqrt_ratio,
        closed_form_vertex: vertex,
        x_star,
    }
}

/// Smallest root of `F` in `[0, 1]`.
pub fn x_star(report: &ThetaReport) -> Result<f64, DynamicsError> {
    if report.verdict_roots != Theta::Theta2 {
        return Err(DynamicsError::NotInTheta2);
    }
    let x = report.roots_in_unit_interval[0];
    debug_assert!(
        report.d1_tilde <= 0.0 || report.k * x - report.d1_tilde > 0.0,
        "k x_* - d̃1 must be positive in Θ2"
    );
    Ok(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttractorOutcome {
    /// `h u̱_j ≥ 1` first happens at `step`.
    UDominance { step: usize },
    CoexistenceLimits { u: f64, v: f64 },
    /// Neither happened within `j_max` steps.
    Unresolved,
}

/// Bound sequences indexed from `j = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractorBounds {
    pub u_lower: Vec<f64>,
    /// `v̄_1 = 1` (the a-priori bound), then `v̄_{j+1} = 1 - h u̱_j`.
    pub v_upper: Vec<f64>,
    /// Mirrored sequences, present only when `h_comp < 1`.
    pub u_upper: Option<Vec<f64>>,
    pub v_lower: Option<Vec<f64>>,
    pub outcome: AttractorOutcome,
}

pub fn attractor_bounds(k: f64, h_comp: f64, j_max: usize) -> Result<AttractorBounds, DynamicsError> {
    if !(k > 0.0 && h_comp > 0.0) {
        return Err(DynamicsError::AssumptionViolated("k and h_comp must be positive".into()));
    }
    if k >= 1.0 {
        return Err(DynamicsError::AssumptionViolated(format!("requires k < 1, got k = {k}")));
    }
    if j_max == 0 {
        return Err(DynamicsError::AssumptionViolated("j_max must be at least 1".into()));
    }
    let mut u_lower = vec![1.0 - k];
    let mut v_upper = vec![1.0];
    let mut outcome = None;
    for j in 1..=j_max {
        let u = u_lower[j - 1];
        if h_comp * u >= 1.0 {
            outcome = Some(AttractorOutcome::UDominance { step: j });
            break;
        }
        if j == j_max {
            break;
        }
        let v_next = 1.0 - h_comp * u;
        v_upper.push(v_next);
        u_lower.push(1.0 - k * v_next);
    }
    let outcome = outcome.unwrap_or_else(|| {
        if h_comp <= 1.0 {
            let det = 1.0 - h_comp * k;
            AttractorOutcome::CoexistenceLimits { u: (1.0 - k) / det, v: (1.0 - h_comp) / det }
        } else {
            AttractorOutcome::Unresolved
        }
    });
    let (u_upper, v_lower) = if h_comp < 1.0 {
        let mut vl = vec![1.0 - h_comp];
        let mut uu = vec![1.0];
        for j in 1..j_max {
            let u_next = 1.0 - k * vl[j - 1];
            uu.push(u_next);
            vl.push(1.0 - h_comp * u_next);
        }
        (Some(uu), Some(vl))
    } else {
        (None, None)
    };
    Ok(AttractorBounds { u_lower, v_upper, u_upper, v_lower, outcome })
}

/// Rectangle `{0 ≤ p < M_σ, q < σ}` in the `(u, 1 - v)` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantRegion {
    pub sigma: f64,
    pub epsilon: f64,
    pub m_sigma: f64,
}

fn sigma_range(params: &ModelParams) -> Result<(f64, f64), DynamicsError> {
    let dt = params.d1_tilde();
    if !(dt > 0.0) {
        return Err(DynamicsError::InvalidSigma { sigma: f64::NAN, lo: dt / params.k, hi: 1.0 });
    }
    Ok((dt / params.k, 1.0))
}

impl InvariantRegion {
    pub fn new(params: &ModelParams, sigma: f64, epsilon_cap: f64) -> Result<Self, DynamicsError> {
        let (lo, hi) = sigma_range(params)?;
        if !(sigma > lo && sigma < hi) {
            return Err(DynamicsError::InvalidSigma { sigma, lo, hi });
        }
        if !(epsilon_cap > 0.0) {
            return Err(DynamicsError::InvalidSetup(format!("epsilon cap must be positive, got {epsilon_cap}")));
        }
        let gap = params.k * sigma - params.d1_tilde();
        let epsilon = gap.min(epsilon_cap);
        Ok(Self { sigma, epsilon, m_sigma: gap + epsilon })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionVerdict {
    pub invariant: bool,
    /// Upper bound of `u_t` on the edge `p = M_σ`.
    pub u_margin: f64,
    /// Upper bound of `(1 - v)_t` on the edge `q = σ`.
    pub v_margin: f64,
}

/// Evaluate the two edge bounds of `region` for forcing bounds `|m1| ≤ m1_bound`, `|m2| ≤ m2_bound`.
pub fn invariant_region_check(
    params: &ModelParams,
    region: &InvariantRegion,
    m1_bound: f64,
    m2_bound: f64,
) -> Result<RegionVerdict, DynamicsError> {
    let (lo, hi) = sigma_range(params)?;
    let sigma = region.sigma;
    if !(sigma > lo && sigma < hi) {
        return Err(DynamicsError::InvalidSigma { sigma, lo, hi });
    }
    if !(m1_bound >= 0.0 && m2_bound >= 0.0) {
        return Err(DynamicsError::InvalidSetup("forcing bounds must be nonnegative".into()));
    }
    let u_margin = m1_bound - region.m_sigma * region.epsilon;
    let v_margin = m2_bound + (1.0 - sigma) * params.gamma * params.h_comp * region.epsilon + params.f_poly(sigma);
    Ok(RegionVerdict { invariant: u_margin < 0.0 && v_margin < 0.0, u_margin, v_margin })
}
