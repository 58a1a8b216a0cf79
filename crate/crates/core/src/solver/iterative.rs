use std::time::Instant;

use super::{
    gradient_with, max_norm, mse, residual_with, CoeffModel, PlanSolution, SolveError,
    SolverConfig, Termination, DIVERGENCE_FACTOR,
};
use crate::matrix::CoeffMatrix;

/// Halvings tried by the line search before giving up.
const MAX_HALVINGS: usize = 80;

fn check_demand(model: &impl CoeffModel, d: &[f64]) -> Result<(), SolveError> {
    if d.len() != model.dim() {
        return Err(SolveError::Dimension {
            expected: model.dim(),
            got: d.len(),
        });
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NonFinite);
    }
    if let Some(i) = d.iter().position(|v| *v < 0.0) {
        return Err(SolveError::NegativeDemand(i));
    }
    Ok(())
}

fn all_non_negative(f: &CoeffMatrix) -> bool {
    let mut ok = true;
    f.for_each_entry(|_, _, v| ok &= v >= 0.0);
    ok
}

/// Power-series recursion `x_(k+1) = F(x_(k)) x_(k) + d` from `x_(0) = d`.
///
/// Stops once both the step `‖x_(k+1) − x_(k)‖∞` and the residual of the new
/// iterate are within tolerance. Iterates growing past
/// [`DIVERGENCE_FACTOR`]`·‖d‖∞` end the run as diverged; in every
/// non-converged case the iterate with the smallest residual is returned.
pub fn solve_fixed_point(
    model: &impl CoeffModel,
    d: &[f64],
    config: &SolverConfig,
) -> Result<PlanSolution, SolveError> {
    config.validate()?;
    check_demand(model, d)?;
    let start = Instant::now();
    let bound = config.residual_bound(d);
    let limit = DIVERGENCE_FACTOR * max_norm(d);
    let linear = model.is_linear();

    let mut x = d.to_vec();
    let mut f = model.coefficients(&x)?;
    let monotone = linear && all_non_negative(&f);
    let mut best = (max_norm(&residual_with(&f, &x, d)), x.clone());

    for iteration in 1..=config.max_iterations {
        let fx = f.mul_vec(&x);
        let next: Vec<f64> = fx.iter().zip(d).map(|(a, b)| a + b).collect();
        let norm = max_norm(&next);
        if !norm.is_finite() || norm > limit {
            return Ok(PlanSolution::new(
                best.1,
                best.0,
                iteration,
                Termination::Diverged,
                start.elapsed().as_secs_f64(),
            ));
        }
        if monotone && cfg!(debug_assertions) {
            for (a, b) in x.iter().zip(&next) {
                debug_assert!(
                    *b >= *a - 1e-12 * a.abs().max(1.0),
                    "fixed-point iterate decreased: {a} -> {b}"
                );
            }
        }
        let step = x
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        x = next;
        if !linear {
            f = model.coefficients(&x)?;
        }
        let r = max_norm(&residual_with(&f, &x, d));
        if r < best.0 {
            best = (r, x.clone());
        }
        if step <= bound && r <= bound {
            return Ok(PlanSolution::new(
                x,
                r,
                iteration,
                Termination::Converged,
                start.elapsed().as_secs_f64(),
            ));
        }
    }
    Ok(PlanSolution::new(
        best.1,
        best.0,
        config.max_iterations,
        Termination::MaxIterations,
        start.elapsed().as_secs_f64(),
    ))
}

/// Steepest descent on the mean squared residual from `x_(0) = d`.
///
/// Each step starts at length 1 along the negative gradient and is halved
/// until the error decreases. Stops when the residual is within tolerance,
/// the gradient max-norm falls to `tolerance²`, or the budget runs out.
pub fn solve_gradient(
    model: &impl CoeffModel,
    d: &[f64],
    config: &SolverConfig,
) -> Result<PlanSolution, SolveError> {
    config.validate()?;
    check_demand(model, d)?;
    let start = Instant::now();
    let bound = config.residual_bound(d);
    let grad_floor = config.tolerance * config.tolerance;

    let mut x = d.to_vec();
    let mut f = model.coefficients(&x)?;
    let mut r = residual_with(&f, &x, d);
    let mut err = mse(&r);
    let finish = |x: Vec<f64>, r: &[f64], iterations: usize, termination: Termination| {
        PlanSolution::new(
            x,
            max_norm(r),
            iterations,
            termination,
            start.elapsed().as_secs_f64(),
        )
    };

    for iteration in 0..config.max_iterations {
        if max_norm(&r) <= bound {
            return Ok(finish(x, &r, iteration, Termination::Converged));
        }
        let slopes = model.coefficient_slopes(&x)?;
        let g = gradient_with(&f, &slopes, &x, &r);
        if max_norm(&g) <= grad_floor {
            return Ok(finish(x, &r, iteration, Termination::Stalled));
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
            let f_c = model.coefficients(&candidate)?;
            let r_c = residual_with(&f_c, &candidate, d);
            let err_c = mse(&r_c);
            if err_c < err {
                accepted = Some((candidate, f_c, r_c, err_c));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((candidate, f_c, r_c, err_c)) => {
                x = candidate;
                f = f_c;
                r = r_c;
                err = err_c;
            }
            None => return Ok(finish(x, &r, iteration, Termination::Stalled)),
        }
    }
    let termination = if max_norm(&r) <= bound {
        Termination::Converged
    } else {
        Termination::MaxIterations
    };
    Ok(finish(x, &r, config.max_iterations, termination))
}
