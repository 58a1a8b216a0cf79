//! Gross-output solvers for `(I − F(x)) x = d`.
//!
//! Three routes are offered: a direct sparse/dense factorization for the
//! constant case, the power-series recursion `x ← F(x) x + d` starting from
//! `d`, and steepest descent on the mean squared residual.

mod iterative;
mod linear;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use iterative::{solve_fixed_point, solve_gradient};
pub use linear::{solve_linear, solve_linear_matrix};

use crate::economy::{Economy, ModelError};
use crate::matrix::CoeffMatrix;

/// Iterates whose max-norm exceeds this multiple of `‖d‖∞` are treated as
/// diverging.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    #[serde(rename = "direct")]
    DirectSparse,
    FixedPoint,
    Gradient,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::DirectSparse => "direct",
            Method::FixedPoint => "fixed-point",
            Method::Gradient => "gradient",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Bound on `‖(I − F(x))x − d‖∞ / max(1, ‖d‖∞)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 10_000,
            method: Method::DirectSparse,
        }
    }
}

impl SolverConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(SolveError::InvalidConfig("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidConfig("max_iterations must be >= 1"));
        }
        Ok(())
    }

    /// Absolute residual bound for demand `d`.
    pub fn residual_bound(&self, d: &[f64]) -> f64 {
        self.tolerance * max_norm(d).max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    Diverged,
    /// Line search could not reduce the error any further.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSolution {
    pub x: Vec<f64>,
    /// `‖(I − F(x))x − d‖∞`, unscaled.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Seconds spent inside the solver.
    pub wall_time: f64,
    /// Components of `x` below zero; a sign the economy is not productive.
    pub negative_components: Vec<usize>,
}

impl PlanSolution {
    fn new(
        x: Vec<f64>,
        residual_norm: f64,
        iterations: usize,
        termination: Termination,
        wall_time: f64,
    ) -> Self {
        let negative_components: Vec<usize> = x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v < 0.0)
            .map(|(i, _)| i)
            .collect();
        if !negative_components.is_empty() {
            log::warn!(
                "solution has {} negative components (first at index {})",
                negative_components.len(),
                negative_components[0]
            );
        }
        Self {
            x,
            residual_norm,
            iterations,
            converged: termination == Termination::Converged,
            termination,
            wall_time,
            negative_components,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("demand has length {got}, system has {expected} goods")]
    Dimension { expected: usize, got: usize },
    #[error("inputs contain non-finite values")]
    NonFinite,
    #[error("demand must be >= 0 for this method (index {0})")]
    NegativeDemand(usize),
    #[error("the direct method needs constant coefficients")]
    NotLinear,
    #[error("I - A is not invertible")]
    Singular,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Anything that can produce `F(x)` and its entrywise slope `F'(x)`.
///
/// Entry `(i, j)` of both matrices depends on `x_j` only.
pub trait CoeffModel {
    fn dim(&self) -> usize;
    fn coefficients(&self, x: &[f64]) -> Result<CoeffMatrix, SolveError>;
    fn coefficient_slopes(&self, x: &[f64]) -> Result<CoeffMatrix, SolveError>;
    fn is_linear(&self) -> bool;
}

impl CoeffModel for Economy {
    fn dim(&self) -> usize {
        self.n()
    }

    fn coefficients(&self, x: &[f64]) -> Result<CoeffMatrix, SolveError> {
        Ok(self.eval_matrix(x)?)
    }

    fn coefficient_slopes(&self, x: &[f64]) -> Result<CoeffMatrix, SolveError> {
        Ok(self.eval_matrix_derivative(x)?)
    }

    fn is_linear(&self) -> bool {
        Economy::is_linear(self)
    }
}

impl CoeffModel for CoeffMatrix {
    fn dim(&self) -> usize {
        CoeffMatrix::dim(self)
    }

    fn coefficients(&self, _x: &[f64]) -> Result<CoeffMatrix, SolveError> {
        Ok(self.clone())
    }

    fn coefficient_slopes(&self, _x: &[f64]) -> Result<CoeffMatrix, SolveError> {
        Ok(CoeffMatrix::from_csc(crate::matrix::CscMatrix::zeros(
            CoeffMatrix::dim(self),
        )))
    }

    fn is_linear(&self) -> bool {
        true
    }
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_inputs(model: &impl CoeffModel, x: &[f64], d: &[f64]) -> Result<(), SolveError> {
    for v in [x, d] {
        if v.len() != model.dim() {
            return Err(SolveError::Dimension {
                expected: model.dim(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// `r = x − F(x)x − d` given an already evaluated `F(x)`.
pub(crate) fn residual_with(f: &CoeffMatrix, x: &[f64], d: &[f64]) -> Vec<f64> {
    let fx = f.mul_vec(x);
    x.iter()
        .zip(&fx)
        .zip(d)
        .map(|((xi, fxi), di)| xi - fxi - di)
        .collect()
}

/// `r = (I − F(x))x − d`, componentwise `x_i − Σ_j f_ij(x_j) x_j − d_i`.
pub fn residual(model: &impl CoeffModel, x: &[f64], d: &[f64]) -> Result<Vec<f64>, SolveError> {
    check_inputs(model, x, d)?;
    Ok(residual_with(&model.coefficients(x)?, x, d))
}

/// Mean of squared residuals.
pub fn mse(r: &[f64]) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64
}

/// `∇ MSE = (2/n) Jᵀ r` with `J_ik = δ_ik − f_ik(x_k) − f'_ik(x_k) x_k`.
pub(crate) fn gradient_with(
    f: &CoeffMatrix,
    slopes: &CoeffMatrix,
    x: &[f64],
    r: &[f64],
) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let ftr = f.tr_mul_vec(r);
    let str_ = slopes.tr_mul_vec(r);
    let scale = 2.0 / n as f64;
    (0..n)
        .map(|k| scale * (r[k] - ftr[k] - str_[k] * x[k]))
        .collect()
}

/// Gradient of the mean squared residual with respect to `x`.
pub fn mse_gradient(model: &impl CoeffModel, x: &[f64], d: &[f64]) -> Result<Vec<f64>, SolveError> {
    check_inputs(model, x, d)?;
    let f = model.coefficients(x)?;
    let slopes = model.coefficient_slopes(x)?;
    let r = residual_with(&f, x, d);
    Ok(gradient_with(&f, &slopes, x, &r))
}

/// Runs the method selected in `config`.
pub fn solve(
    model: &impl CoeffModel,
    d: &[f64],
    config: &SolverConfig,
) -> Result<PlanSolution, SolveError> {
    match config.method {
        Method::DirectSparse => solve_linear(model, d, config),
        Method::FixedPoint => solve_fixed_point(model, d, config),
        Method::Gradient => solve_gradient(model, d, config),
    }
}
