//! Principal eigenvalue of `φ ↦ d1 [∫_Ω J(x - y) φ(y) dy - φ(x)]` on a finite interval.
//!
//! The interval `(0, l)` is split into `n` equal cells with nodes at the cell centres,
//! and the integral is discretized with the exact cell masses of the kernel. All
//! cells have the same width, so the discrete operator is `d1 (W - I)` with `W` a
//! symmetric, entrywise nonnegative Toeplitz band. The Perron root of `d1 W` is found
//! by power iteration (or a dense symmetric solver), and `λ_p = ρ(d1 W) - d1`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{Stencil, ValidatedKernel};
use crate::numfmt::f17;

/// Smallest number of cells used for any interval, however short.
pub const MIN_NODES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("degenerate interval ({a}, {b})")]
    DegenerateInterval { a: f64, b: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMethod {
    /// Power iteration, falling back to the dense solver below `dense_below` nodes.
    Auto,
    Power,
    Dense,
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    pub method: EigenMethod,
    /// Stop once the Rayleigh quotient moves by less than this ...
    pub tolerance: f64,
    /// ... and the max-norm residual is below this.
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    pub dense_below: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            method: EigenMethod::Auto,
            tolerance: 1e-10,
            residual_tolerance: 1e-7,
            max_iterations: 50_000,
            dense_below: 600,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda_p: f64,
    /// Node positions on the requested interval.
    pub nodes: Vec<f64>,
    /// Nonnegative, max-norm 1.
    pub eigenfunction: Vec<f64>,
    pub iterations: usize,
    /// `max |Aφ - λφ|`.
    pub residual: f64,
    pub method: EigenMethod,
}

/// The discretized operator `d1 W` on `n` cells of width `cell`.
struct BandOperator {
    d1: f64,
    n: usize,
    stencil: Stencil,
}

impl BandOperator {
    fn new(kernel: &ValidatedKernel, d1: f64, l: f64, n: usize) -> Self {
        let cell = l / n as f64;
        Self { d1, n, stencil: kernel.stencil(cell) }
    }

    fn apply(&self, phi: &[f64], out: &mut [f64]) {
        let r = self.stencil.radius;
        let w = self.stencil.weights();
        for (i, o) in out.iter_mut().enumerate() {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(self.n - 1);
            let mut acc = 0.0;
            for (j, p) in phi.iter().enumerate().take(hi + 1).skip(lo) {
                acc += w[j + r - i] * p;
            }
            *o = self.d1 * acc;
        }
    }

    fn dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            self.d1 * self.stencil.weight(j as isize - i as isize)
        })
    }
}

/// Number of equal cells used for an interval of length `l` at target spacing `dx`.
pub fn node_count(l: f64, dx: f64) -> usize {
    ((l / dx).round() as usize).max(MIN_NODES)
}

pub fn principal_eigenvalue(
    kernel: &ValidatedKernel,
    d1: f64,
    interval: (f64, f64),
    dx: f64,
) -> Result<EigenResult, EigenError> {
    principal_eigenvalue_with(kernel, d1, interval, dx, &EigenOptions::default())
}

pub fn principal_eigenvalue_with(
    kernel: &ValidatedKernel,
    d1: f64,
    interval: (f64, f64),
    dx: f64,
    opts: &EigenOptions,
) -> Result<EigenResult, EigenError> {
    let (a, b) = interval;
    let l = b - a;
    if !(l > 0.0) || !l.is_finite() || !a.is_finite() {
        return Err(EigenError::DegenerateInterval { a, b });
    }
    if !(d1 > 0.0 && d1.is_finite()) {
        return Err(EigenError::InvalidArgument(format!("d1 must be positive, got {d1}")));
    }
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(EigenError::InvalidArgument(format!("dx must be positive, got {dx}")));
    }
    let n = node_count(l, dx);
    let op = BandOperator::new(kernel, d1, l, n);
    let (rho, phi, iterations, method) = match opts.method {
        EigenMethod::Dense => {
            let (rho, phi) = dense_perron(&op);
            (rho, phi, 0, EigenMethod::Dense)
        }
        EigenMethod::Power => {
            let (rho, phi, it) = power_iteration(&op, opts)?;
            (rho, phi, it, EigenMethod::Power)
        }
        EigenMethod::Auto => match power_iteration(&op, opts) {
            Ok((rho, phi, it)) => (rho, phi, it, EigenMethod::Power),
            Err(EigenError::NoConvergence { .. }) if n < opts.dense_below => {
                let (rho, phi) = dense_perron(&op);
                (rho, phi, opts.max_iterations, EigenMethod::Dense)
            }
            Err(e) => return Err(e),
        },
    };
    let mut y = vec![0.0; n];
    op.apply(&phi, &mut y);
    let residual = y.iter().zip(&phi).map(|(yi, p)| (yi - rho * p).abs()).fold(0.0, f64::max);
    let cell = l / n as f64;
    Ok(EigenResult {
        lambda_p: rho - d1,
        nodes: (0..n).map(|i| a + (i as f64 + 0.5) * cell).collect(),
        eigenfunction: phi,
        iterations,
        residual,
        method,
    })
}

fn power_iteration(op: &BandOperator, opts: &EigenOptions) -> Result<(f64, Vec<f64>, usize), EigenError> {
    let n = op.n;
    let mut phi = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut prev = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        op.apply(&phi, &mut y);
        let num: f64 = phi.iter().zip(&y).map(|(p, q)| p * q).sum();
        let den: f64 = phi.iter().map(|p| p * p).sum();
        let rq = num / den;
        // phi has max-norm 1 here
        residual = y.iter().zip(&phi).map(|(q, p)| (q - rq * p).abs()).fold(0.0, f64::max);
        let scale = y.iter().cloned().fold(0.0, f64::max);
        if !(scale > 0.0) {
            return Err(EigenError::NoConvergence { iterations: it, residual });
        }
        let converged = (rq - prev).abs() < opts.tolerance && residual < opts.residual_tolerance;
        if converged {
            return Ok((rq, phi, it));
        }
        prev = rq;
        for (p, q) in phi.iter_mut().zip(&y) {
            *p = q / scale;
        }
    }
    Err(EigenError::NoConvergence { iterations: opts.max_iterations, residual })
}

fn dense_perron(op: &BandOperator) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(op.dense());
    let (k, &rho) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty operator");
    let v = eig.eigenvectors.column(k);
    let sign = if v.sum() < 0.0 { -1.0 } else { 1.0 };
    let mut phi: Vec<f64> = v.iter().map(|x| (sign * x).max(0.0)).collect();
    let m = phi.iter().cloned().fold(0.0, f64::max);
    phi.iter_mut().for_each(|p| *p /= m);
    (rho, phi)
}

/// `λ_p(0, l)` for every length; entries keep input order.
pub fn eigen_curve(
    kernel: &ValidatedKernel,
    d1: f64,
    lengths: &[f64],
    dx: f64,
) -> Vec<(f64, Result<f64, EigenError>)> {
    lengths
        .par_iter()
        .map(|&l| (l, principal_eigenvalue(kernel, d1, (0.0, l), dx).map(|r| r.lambda_p)))
        .collect()
}

/// Two-column `l lambda_p` text, 17 significant digits; failed entries print `nan`.
pub fn format_eigen_curve(curve: &[(f64, Result<f64, EigenError>)]) -> String {
    let mut out = String::from("# l lambda_p\n");
    for (l, lam) in curve {
        let lam = lam.as_ref().copied().unwrap_or(f64::NAN);
        out.push_str(&format!("{} {}\n", f17(*l), f17(lam)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{validate_kernel, KernelSpec};

    fn uniform() -> ValidatedKernel {
        validate_kernel(&KernelSpec::Uniform { half_width: 1.0 }, 0.025).unwrap()
    }

    #[test]
    fn rank_one_interval_inside_plateau() {
        // J ≡ 1/2 on the whole interval, so W is rank one with eigenvalue l/2
        let r = principal_eigenvalue(&uniform(), 1.0, (0.0, 1.0), 0.025).unwrap();
        assert!((r.lambda_p + 0.5).abs() < 1e-10, "{}", r.lambda_p);
        let (mn, mx) = r.eigenfunction.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(mx == 1.0 && (mx - mn) < 1e-9);
    }

    #[test]
    fn tiny_interval_tends_to_minus_d1() {
        let r = principal_eigenvalue(&uniform(), 1.0, (0.0, 1e-3), 0.025).unwrap();
        assert!((r.lambda_p + 1.0).abs() < 1e-3);
        assert_eq!(r.nodes.len(), MIN_NODES);
    }

    #[test]
    fn longer_interval_has_larger_eigenvalue() {
        let k = uniform();
        let l100 = principal_eigenvalue(&k, 1.0, (0.0, 100.0), 0.1).unwrap().lambda_p;
        let l200 = principal_eigenvalue(&k, 1.0, (0.0, 200.0), 0.1).unwrap().lambda_p;
        assert!(l200 > l100);
        assert!(l200 > -1.0 && l200 < 0.0);
    }

    #[test]
    fn curve_examples() {
        let k = uniform();
        let c = eigen_curve(&k, 1.0, &[1.0, 2.0, 4.0], 0.025);
        let v: Vec<f64> = c.iter().map(|(_, r)| *r.as_ref().unwrap()).collect();
        assert!(v[0] < v[1] && v[1] < v[2]);
        assert!(eigen_curve(&k, 1.0, &[], 0.025).is_empty());
        let shifted = principal_eigenvalue(&k, 1.0, (5.0, 6.0), 0.025).unwrap().lambda_p;
        let base = principal_eigenvalue(&k, 1.0, (0.0, 1.0), 0.025).unwrap().lambda_p;
        assert_eq!(shifted.to_bits(), base.to_bits());
    }

    #[test]
    fn errors() {
        let k = uniform();
        assert!(matches!(principal_eigenvalue(&k, 1.0, (1.0, 1.0), 0.1), Err(EigenError::DegenerateInterval { .. })));
        assert!(matches!(principal_eigenvalue(&k, 0.0, (0.0, 1.0), 0.1), Err(EigenError::InvalidArgument(_))));
        let opts = EigenOptions { method: EigenMethod::Power, max_iterations: 2, ..Default::default() };
        assert!(matches!(
            principal_eigenvalue_with(&k, 1.0, (0.0, 30.0), 0.025, &opts),
            Err(EigenError::NoConvergence { .. })
        ));
        let auto = EigenOptions { max_iterations: 2, ..Default::default() };
        let r = principal_eigenvalue_with(&k, 1.0, (0.0, 3.0), 0.025, &auto).unwrap();
        assert_eq!(r.method, EigenMethod::Dense);
    }

    #[test]
    fn curve_text_format() {
        let text = format_eigen_curve(&[(1.0, Ok(-0.5)), (2.0, Err(EigenError::InvalidArgument("x".into())))]);
        assert_eq!(text, "# l lambda_p\n1.0000000000000000e0 -5.0000000000000000e-1\n2.0000000000000000e0 nan\n");
    }
}
