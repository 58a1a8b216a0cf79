use std::time::Instant;

use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::Mat;

use super::{
    max_norm, residual_with, CoeffModel, PlanSolution, SolveError, SolverConfig, Termination,
};
use crate::matrix::{CoeffMatrix, CscMatrix, DenseMatrix};

/// Refinement sweeps allowed after the first solve.
const MAX_REFINEMENTS: usize = 3;

enum Factorization {
    Sparse(faer::sparse::linalg::solvers::Lu<usize, f64>),
    Dense(faer::linalg::solvers::PartialPivLu<f64>),
}

impl Factorization {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = match self {
            Factorization::Sparse(lu) => {
                use faer::prelude::Solve;
                lu.solve(&b)
            }
            Factorization::Dense(lu) => {
                use faer::prelude::Solve;
                lu.solve(&b)
            }
        };
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// `I − A` in compressed columns, merging the unit diagonal into each
/// column in row order.
fn identity_minus_sparse(a: &CscMatrix) -> Result<SparseColMat<usize, f64>, SolveError> {
    let n = a.dim();
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::with_capacity(a.nnz() + n);
    let mut values = Vec::with_capacity(a.nnz() + n);
    col_ptr.push(0);
    for j in 0..n {
        let mut diag_done = false;
        for (i, v) in a.column(j) {
            if !diag_done && i >= j {
                if i == j {
                    row_idx.push(j);
                    values.push(1.0 - v);
                    diag_done = true;
                    continue;
                }
                row_idx.push(j);
                values.push(1.0);
                diag_done = true;
            }
            row_idx.push(i);
            values.push(-v);
        }
        if !diag_done {
            row_idx.push(j);
            values.push(1.0);
        }
        col_ptr.push(row_idx.len());
    }
    let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
    Ok(SparseColMat::new(symbolic, values))
}

fn identity_minus_dense(a: &DenseMatrix) -> Mat<f64> {
    Mat::from_fn(a.dim(), a.dim(), |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - a.get(i, j)
    })
}

fn factorize(a: &CoeffMatrix) -> Result<Factorization, SolveError> {
    match a {
        CoeffMatrix::Sparse(m) => {
            let lu = identity_minus_sparse(m)?
                .sp_lu()
                .map_err(|_| SolveError::Singular)?;
            Ok(Factorization::Sparse(lu))
        }
        CoeffMatrix::Dense(m) => Ok(Factorization::Dense(
            identity_minus_dense(m).partial_piv_lu(),
        )),
    }
}

/// Solves `(I − A)x = d` for a constant coefficient matrix by LU
/// factorization (sparse when `A` is stored sparse), followed by a few
/// rounds of iterative refinement if the residual is above tolerance.
pub fn solve_linear_matrix(
    a: &CoeffMatrix,
    d: &[f64],
    config: &SolverConfig,
) -> Result<PlanSolution, SolveError> {
    config.validate()?;
    if d.len() != a.dim() {
        return Err(SolveError::Dimension {
            expected: a.dim(),
            got: d.len(),
        });
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NonFinite);
    }
    let mut non_finite = false;
    a.for_each_entry(|_, _, v| non_finite |= !v.is_finite());
    if non_finite {
        return Err(SolveError::NonFinite);
    }

    let start = Instant::now();
    let bound = config.residual_bound(d);
    let lu = factorize(a)?;
    let mut x = lu.solve(d);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::Singular);
    }
    let mut r = residual_with(a, &x, d);
    let mut iterations = 1;
    while max_norm(&r) > bound && iterations <= MAX_REFINEMENTS {
        let dx = lu.solve(&r);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi - di).collect();
        let r_candidate = residual_with(a, &candidate, d);
        iterations += 1;
        if max_norm(&r_candidate) >= max_norm(&r) {
            break;
        }
        x = candidate;
        r = r_candidate;
    }
    let residual_norm = max_norm(&r);
    if !residual_norm.is_finite() {
        return Err(SolveError::Singular);
    }
    let termination = if residual_norm <= bound {
        Termination::Converged
    } else {
        // A residual the factorization cannot bring down means (I − A) is
        // numerically singular.
        return Err(SolveError::Singular);
    };
    Ok(PlanSolution::new(
        x,
        residual_norm,
        iterations,
        termination,
        start.elapsed().as_secs_f64(),
    ))
}

/// Direct solve for a model whose coefficients are all constant.
pub fn solve_linear(
    model: &impl CoeffModel,
    d: &[f64],
    config: &SolverConfig,
) -> Result<PlanSolution, SolveError> {
    if !model.is_linear() {
        return Err(SolveError::NotLinear);
    }
    if d.len() != model.dim() {
        return Err(SolveError::Dimension {
            expected: model.dim(),
            got: d.len(),
        });
    }
    let a = model.coefficients(&vec![0.0; model.dim()])?;
    solve_linear_matrix(&a, d, config)
}
