//! Dispersal kernels: construction, validation and the quadratures built on them.
//!
//! A kernel is an even probability density with finite declared support. Besides
//! pointwise evaluation, every kernel exposes its cumulative mass `K(s) = ∫_{-∞}^s J`
//! and the antiderivative of that, `∫_{-∞}^s K`. The cell quadrature integrates the
//! kernel exactly over each grid cell through `K`, and the front laws integrate `K`
//! exactly through its antiderivative, so only the sampled field carries
//! discretization error.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use thiserror::Error;

use crate::grid::UniformGrid;

/// Densities below this fraction of the peak are treated as zero by the quadratures.
pub const TAIL_FLOOR: f64 = 1e-12;

/// Symmetry tolerance for tabulated kernels (absolute, scaled by `max(1, peak)`).
pub const TABLE_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid kernel specification: {0}")]
    InvalidSpec(String),
    #[error("kernel is not even: J({x}) = {right} but J({neg}) = {left}", neg = -x)]
    Asymmetric { x: f64, left: f64, right: f64 },
    #[error("kernel density is negative at x = {x}: {value}")]
    NegativeDensity { x: f64, value: f64 },
    #[error("kernel density at the origin must be positive")]
    ZeroAtOrigin,
    #[error("kernel has zero total mass")]
    ZeroMass,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("kernel table, line {line}: {reason}")]
    Table { line: usize, reason: String },
}

/// Named kernel family with its length parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `1/(2L)` on `[-L, L]`.
    Uniform { half_width: f64 },
    /// `(L - |x|)/L²` on `[-L, L]`.
    Triangular { half_width: f64 },
    /// Gaussian of standard deviation `sigma`, cut at `±half_width` and renormalized.
    TruncatedGaussian { sigma: f64, half_width: f64 },
    /// Piecewise-linear density through the samples, zero outside their range.
    Tabulated { x: Vec<f64>, density: Vec<f64> },
}

impl KernelSpec {
    /// Parse a two-column `x density` table (whitespace separated, `#` comments).
    pub fn from_table_text(text: &str) -> Result<Self, KernelError> {
        let mut x = Vec::new();
        let mut density = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(KernelError::Table {
                    line: n + 1,
                    reason: format!("expected 2 columns, found {}", cols.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| KernelError::Table {
                    line: n + 1,
                    reason: format!("{s:?}: {e}"),
                })
            };
            let (xi, yi) = (parse(cols[0])?, parse(cols[1])?);
            if let Some(&prev) = x.last() {
                if xi <= prev {
                    return Err(KernelError::Table {
                        line: n + 1,
                        reason: "x must be strictly increasing".into(),
                    });
                }
            }
            x.push(xi);
            density.push(yi);
        }
        Ok(KernelSpec::Tabulated { x, density })
    }

    pub fn from_table_file(path: &Path) -> Result<Self, KernelError> {
        let text = std::fs::read_to_string(path).map_err(|e| KernelError::Table {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::from_table_text(&text)
    }

    pub fn declared_support(&self) -> f64 {
        match self {
            KernelSpec::Uniform { half_width }
            | KernelSpec::Triangular { half_width }
            | KernelSpec::TruncatedGaussian { half_width, .. } => *half_width,
            KernelSpec::Tabulated { x, .. } => x
                .first()
                .zip(x.last())
                .map(|(a, b)| a.abs().max(b.abs()))
                .unwrap_or(0.0),
        }
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Uniform {
        l: f64,
    },
    Triangular {
        l: f64,
    },
    Gaussian {
        sigma: f64,
        l: f64,
        /// `erf(l / (sigma √2))`, the retained mass of the untruncated Gaussian.
        kept: f64,
    },
    Table {
        x: Vec<f64>,
        y: Vec<f64>,
        /// `K` at the samples.
        cum: Vec<f64>,
        /// `∫K` at the samples.
        cum2: Vec<f64>,
    },
}

/// A kernel that satisfied every check of [`validate_kernel`].
#[derive(Clone, Debug)]
pub struct ValidatedKernel {
    spec: KernelSpec,
    shape: Shape,
    support_radius: f64,
    effective_radius: f64,
    peak: f64,
    renormalization: f64,
    unit_mass_tolerance: f64,
}

/// Translation-invariant cell weights `w[m] = ∫_{cell m} J` for a grid spacing `dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub dx: f64,
    /// Weights reach `-radius..=radius` cells.
    pub radius: usize,
    weights: Vec<f64>,
}

impl Stencil {
    #[inline]
    pub fn weight(&self, m: isize) -> f64 {
        let r = self.radius as isize;
        if m < -r || m > r {
            0.0
        } else {
            self.weights[(m + r) as usize]
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub fn validate_kernel(spec: &KernelSpec, grid_resolution: f64) -> Result<ValidatedKernel, KernelError> {
    if !(grid_resolution > 0.0 && grid_resolution.is_finite()) {
        return Err(KernelError::InvalidSpec(format!(
            "grid resolution must be positive, got {grid_resolution}"
        )));
    }
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(KernelError::InvalidSpec(format!("{name} must be positive and finite, got {v}")))
        }
    };
    let (shape, renormalization) = match spec {
        KernelSpec::Uniform { half_width } => (Shape::Uniform { l: positive("half_width", *half_width)? }, 1.0),
        KernelSpec::Triangular { half_width } => (Shape::Triangular { l: positive("half_width", *half_width)? }, 1.0),
        KernelSpec::TruncatedGaussian { sigma, half_width } => {
            let sigma = positive("sigma", *sigma)?;
            let l = positive("half_width", *half_width)?;
            let kept = erf(l / (sigma * std::f64::consts::SQRT_2));
            (Shape::Gaussian { sigma, l, kept }, 1.0)
        }
        KernelSpec::Tabulated { x, density } => build_table(x, density)?,
    };

    let support_radius = spec.declared_support();
    let mut kernel = ValidatedKernel {
        spec: spec.clone(),
        shape,
        support_radius,
        effective_radius: support_radius,
        peak: 0.0,
        renormalization,
        unit_mass_tolerance: 1e-12,
    };
    kernel.peak = kernel.evaluate(0.0);
    kernel.effective_radius = kernel.compute_effective_radius();

    // probe grid: symmetric nodes plus the table samples
    let steps = (support_radius / grid_resolution).ceil() as usize + 1;
    let mut probes: Vec<f64> = (0..=steps).map(|i| i as f64 * grid_resolution).collect();
    if let Shape::Table { x, .. } = &kernel.shape {
        probes.extend(x.iter().map(|v| v.abs()));
    }
    let sym_tol = match kernel.shape {
        Shape::Table { .. } => TABLE_SYMMETRY_TOL * kernel.peak.max(1.0),
        _ => 0.0,
    };
    for &p in &probes {
        let (right, left) = (kernel.evaluate(p), kernel.evaluate(-p));
        if right < 0.0 || left < 0.0 {
            let (x, value) = if right < 0.0 { (p, right) } else { (-p, left) };
            return Err(KernelError::NegativeDensity { x, value });
        }
        if (right - left).abs() > sym_tol {
            return Err(KernelError::Asymmetric { x: p, left, right });
        }
    }
    if kernel.peak <= 0.0 {
        return Err(KernelError::ZeroAtOrigin);
    }
    let mass = kernel.cdf(support_radius + 1.0) - kernel.cdf(-support_radius - 1.0);
    if (mass - 1.0).abs() > kernel.unit_mass_tolerance {
        return Err(KernelError::InvalidSpec(format!("mass after normalization is {mass}")));
    }
    Ok(kernel)
}

fn build_table(x: &[f64], density: &[f64]) -> Result<(Shape, f64), KernelError> {
    if x.len() != density.len() {
        return Err(KernelError::InvalidSpec("x and density lengths differ".into()));
    }
    if x.len() < 2 {
        return Err(KernelError::InvalidSpec("a table needs at least two samples".into()));
    }
    if x.iter().chain(density).any(|v| !v.is_finite()) {
        return Err(KernelError::InvalidSpec("table contains non-finite values".into()));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KernelError::InvalidSpec("x must be strictly increasing".into()));
    }
    if let Some((i, &v)) = density.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(KernelError::NegativeDensity { x: x[i], value: v });
    }
    let raw_mass: f64 = x
        .windows(2)
        .zip(density.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum();
    if raw_mass <= 0.0 {
        return Err(KernelError::ZeroMass);
    }
    let factor = 1.0 / raw_mass;
    let y: Vec<f64> = density.iter().map(|v| v * factor).collect();
    let mut cum = vec![0.0; x.len()];
    let mut cum2 = vec![0.0; x.len()];
    for i in 1..x.len() {
        let h = x[i] - x[i - 1];
        let slope = (y[i] - y[i - 1]) / h;
        cum[i] = cum[i - 1] + 0.5 * h * (y[i - 1] + y[i]);
        cum2[i] = cum2[i - 1] + cum[i - 1] * h + y[i - 1] * h * h / 2.0 + slope * h * h * h / 6.0;
    }
    Ok((Shape::Table { x: x.to_vec(), y, cum, cum2 }, factor))
}

/// Segment index `i` with `x[i] <= s < x[i+1]`; `s` must lie inside the table range.
fn segment(x: &[f64], s: f64) -> usize {
    x.partition_point(|&v| v <= s).saturating_sub(1).min(x.len() - 2)
}

impl ValidatedKernel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Radius beyond which the density is below [`TAIL_FLOOR`] of the peak.
    pub fn effective_radius(&self) -> f64 {
        self.effective_radius
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// Factor applied to tabulated densities to reach unit discrete mass (1 for closed forms).
    pub fn renormalization(&self) -> f64 {
        self.renormalization
    }

    pub fn unit_mass_tolerance(&self) -> f64 {
        self.unit_mass_tolerance
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let ax = x.abs();
        match &self.shape {
            Shape::Uniform { l } => {
                if ax <= *l {
                    0.5 / l
                } else {
                    0.0
                }
            }
            Shape::Triangular { l } => {
                if ax <= *l {
                    (l - ax) / (l * l)
                } else {
                    0.0
                }
            }
            Shape::Gaussian { sigma, l, kept } => {
                if ax <= *l {
                    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt() * kept)
                } else {
                    0.0
                }
            }
            Shape::Table { x: xs, y, .. } => {
                if x < xs[0] || x > xs[xs.len() - 1] {
                    return 0.0;
                }
                let i = segment(xs, x);
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                y[i] + t * (y[i + 1] - y[i])
            }
        }
    }

    /// Cumulative mass `∫_{-∞}^s J`, clamped to exactly 0 and 1 outside the support.
    pub fn cdf(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Uniform { l } => ((s + l) / (2.0 * l)).clamp(0.0, 1.0),
            Shape::Triangular { l } => {
                if s <= -l {
                    0.0
                } else if s >= *l {
                    1.0
                } else if s <= 0.0 {
                    (l + s).powi(2) / (2.0 * l * l)
                } else {
                    1.0 - (l - s).powi(2) / (2.0 * l * l)
                }
            }
            Shape::Gaussian { sigma, l, kept } => {
                if s <= -l {
                    0.0
                } else if s >= *l {
                    1.0
                } else {
                    0.5 + erf(s / (sigma * std::f64::consts::SQRT_2)) / (2.0 * kept)
                }
            }
            Shape::Table { x, y, cum, .. } => {
                if s <= x[0] {
                    return 0.0;
                }
                if s >= x[x.len() - 1] {
                    return 1.0;
                }
                let i = segment(x, s);
                let h = x[i + 1] - x[i];
                let tau = s - x[i];
                let slope = (y[i + 1] - y[i]) / h;
                cum[i] + y[i] * tau + 0.5 * slope * tau * tau
            }
        }
    }

    /// `∫_{-∞}^s K(t) dt`; equals `s` once `s` is past the support.
    pub fn cdf_integral(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Uniform { l } => {
                if s <= -l {
                    0.0
                } else if s >= *l {
                    s
                } else {
                    (s + l).powi(2) / (4.0 * l)
                }
            }
            Shape::Triangular { l } => {
                if s <= -l {
                    0.0
                } else if s >= *l {
                    s
                } else if s <= 0.0 {
                    (l + s).powi(3) / (6.0 * l * l)
                } else {
                    s + (l - s).powi(3) / (6.0 * l * l)
                }
            }
            Shape::Gaussian { sigma, l, kept } => {
                if s <= -l {
                    0.0
                } else if s >= *l {
                    s
                } else {
                    let a = sigma * std::f64::consts::SQRT_2;
                    let g = |t: f64| t * erf(t / a) + a / PI.sqrt() * (-(t / a).powi(2)).exp();
                    0.5 * (s + l) + (g(s) - g(*l)) / (2.0 * kept)
                }
            }
            Shape::Table { x, y, cum, cum2 } => {
                let n = x.len();
                if s <= x[0] {
                    return 0.0;
                }
                if s >= x[n - 1] {
                    return cum2[n - 1] + (s - x[n - 1]);
                }
                let i = segment(x, s);
                let h = x[i + 1] - x[i];
                let tau = s - x[i];
                let slope = (y[i + 1] - y[i]) / h;
                cum2[i] + cum[i] * tau + y[i] * tau * tau / 2.0 + slope * tau.powi(3) / 6.0
            }
        }
    }

    /// `∫_{lo}^{hi} J(x - y) dy`, exact.
    #[inline]
    pub fn cell_mass(&self, x: f64, lo: f64, hi: f64) -> f64 {
        self.cdf(x - lo) - self.cdf(x - hi)
    }

    /// Full-cell weights for spacing `dx`, mirrored so that `w[-m] == w[m]` bitwise.
    pub fn stencil(&self, dx: f64) -> Stencil {
        let radius = (self.effective_radius / dx + 0.5).ceil() as usize;
        let half: Vec<f64> = (0..=radius)
            .map(|m| {
                let m = m as f64;
                self.cdf((m + 0.5) * dx) - self.cdf((m - 0.5) * dx)
            })
            .collect();
        let weights = (0..=2 * radius)
            .map(|k| half[(k as isize - radius as isize).unsigned_abs()])
            .collect();
        Stencil { dx, radius, weights }
    }

    /// `∫_{support} J(x - y) field(y) dy` with the cell quadrature over the closed support.
    pub fn convolve(
        &self,
        grid: &UniformGrid,
        field: &[f64],
        support: (f64, f64),
        x: f64,
    ) -> Result<f64, KernelError> {
        let (a, b) = support;
        if field.len() != grid.len {
            return Err(KernelError::GridMismatch(format!(
                "field has {} samples, grid has {} nodes",
                field.len(),
                grid.len
            )));
        }
        if grid.len == 0 || !(grid.dx > 0.0) {
            return Err(KernelError::GridMismatch("empty grid".into()));
        }
        let slack = 1e-9 * grid.dx;
        if !(a < b) || a < grid.x_min() - slack || b > grid.x_max() + slack {
            return Err(KernelError::GridMismatch(format!(
                "support [{a}, {b}] not covered by samples on [{}, {}]",
                grid.x_min(),
                grid.x_max()
            )));
        }
        if x < grid.x_min() - slack || x > grid.x_max() + slack {
            return Err(KernelError::GridMismatch(format!("x = {x} outside the sampled window")));
        }
        let tiling = grid.tile_closed(a, b);
        let reach = self.effective_radius + grid.dx;
        let sum = tiling
            .indices()
            .filter(|&j| (grid.x(j) - x).abs() <= reach + grid.dx)
            .map(|j| {
                let (lo, hi) = tiling.cell(j);
                field[j] * self.cell_mass(x, lo, hi)
            })
            .sum();
        Ok(sum)
    }

    fn compute_effective_radius(&self) -> f64 {
        match &self.shape {
            Shape::Gaussian { sigma, l, .. } => l.min(sigma * (2.0 * (1.0 / TAIL_FLOOR).ln()).sqrt()),
            Shape::Table { x, y, .. } => {
                let floor = TAIL_FLOOR * self.peak;
                let last = y.iter().rposition(|&v| v > floor).map_or(x.len() - 1, |i| (i + 1).min(x.len() - 1));
                let first = y.iter().position(|&v| v > floor).map_or(0, |i| i.saturating_sub(1));
                x[first].abs().max(x[last].abs())
            }
            _ => self.support_radius,
        }
    }
}
