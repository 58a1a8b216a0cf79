//! Random sparse economies and the solve-time grid.
//!
//! Goods are laid out as `n_industrial` industrial goods, then `n_final`
//! final goods, then the profiles. Every producible column draws exactly
//! `deps` distinct inputs from the producible goods, with weights rescaled so
//! the column sums to 0.5. That caps every column sum of `A` at one half, so
//! `I − A` is comfortably invertible and the Neumann series converges.

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economy::{Economy, Entry, Externalities, GoodKind, ModelError};
use crate::matrix::{CoeffMatrix, CscMatrix};
use crate::solver::{max_norm, residual, solve_linear_matrix, SolverConfig};

/// Target sum of every producible column.
pub const COLUMN_SUM: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("deps {deps} exceeds the {available} producible goods")]
    TooManyDeps { deps: usize, available: usize },
    #[error("an economy needs at least one good")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A generated instance in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance {
    pub n_industrial: usize,
    pub n_final: usize,
    pub n_profiles: usize,
    pub matrix: CscMatrix,
    pub demand: Vec<f64>,
}

/// Draws the coefficient matrix and demand for one grid cell.
///
/// Profile columns consume `min(deps, n_final)` final goods each, drawn
/// uniformly; citizen counts are integers in `[100, 1000]`.
pub fn gen_random_instance(
    n_industrial: usize,
    n_final: usize,
    n_profiles: usize,
    deps: usize,
    seed: u64,
) -> Result<RandomInstance, BenchError> {
    let producible = n_industrial + n_final;
    let n = producible + n_profiles;
    if n == 0 {
        return Err(BenchError::Empty);
    }
    if deps > producible {
        return Err(BenchError::TooManyDeps {
            deps,
            available: producible,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = Vec::with_capacity(n);
    for _ in 0..producible {
        columns.push(weighted_column(
            &mut rng,
            0,
            producible,
            deps,
            Some(COLUMN_SUM),
        ));
    }
    let basket = deps.min(n_final);
    for _ in 0..n_profiles {
        columns.push(weighted_column(
            &mut rng,
            n_industrial,
            n_final,
            basket,
            None,
        ));
    }
    let mut demand = vec![0.0; n];
    for d in &mut demand[producible..] {
        *d = rng.gen_range(100..=1000) as f64;
    }
    Ok(RandomInstance {
        n_industrial,
        n_final,
        n_profiles,
        matrix: CscMatrix::from_columns(n, columns),
        demand,
    })
}

/// `count` distinct rows from `offset..offset + span`, sorted, with
/// positive weights. With `sum`, weights are rescaled to add up to it;
/// otherwise they are per-citizen amounts in `[0.1, 2)`.
fn weighted_column(
    rng: &mut ChaCha8Rng,
    offset: usize,
    span: usize,
    count: usize,
    sum: Option<f64>,
) -> Vec<(usize, f64)> {
    if count == 0 {
        return Vec::new();
    }
    let mut rows = sample(rng, span, count).into_vec();
    rows.sort_unstable();
    let mut col: Vec<(usize, f64)> = rows
        .into_iter()
        .map(|r| {
            let w = match sum {
                Some(_) => 1.0 - rng.gen::<f64>(),
                None => rng.gen_range(0.1..2.0),
            };
            (offset + r, w)
        })
        .collect();
    if let Some(target) = sum {
        let total: f64 = col.iter().map(|(_, w)| w).sum();
        for (_, w) in &mut col {
            *w *= target / total;
        }
    }
    col
}

/// The same draw as [`gen_random_instance`], as a validated [`Economy`]
/// plus the demand vector.
pub fn gen_random_economy(
    n_industrial: usize,
    n_final: usize,
    n_profiles: usize,
    deps: usize,
    seed: u64,
) -> Result<(Economy, Vec<f64>), BenchError> {
    let inst = gen_random_instance(n_industrial, n_final, n_profiles, deps, seed)?;
    let goods = (0..inst.matrix.dim())
        .map(|i| {
            if i < n_industrial {
                (format!("i{i}"), GoodKind::Industrial { durable: false })
            } else if i < n_industrial + n_final {
                (format!("f{}", i - n_industrial), GoodKind::Final)
            } else {
                (
                    format!("p{}", i - n_industrial - n_final),
                    GoodKind::Profile,
                )
            }
        })
        .collect();
    let mut entries = Vec::with_capacity(inst.matrix.nnz());
    for j in 0..inst.matrix.dim() {
        entries.extend(inst.matrix.column(j).map(|(i, v)| Entry::constant(i, j, v)));
    }
    let populations = inst
        .demand
        .iter()
        .enumerate()
        .skip(n_industrial + n_final)
        .map(|(i, &d)| (i, d))
        .collect();
    let economy = Economy::build(goods, entries, populations, Externalities::none())?;
    Ok((economy, inst.demand))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub industrial: Vec<usize>,
    pub finals: Vec<usize>,
    pub profiles: usize,
    pub deps: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    /// Run cells concurrently. Timings are then marked contended.
    pub parallel: bool,
    pub solver: SolverConfig,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            industrial: vec![500, 1000, 5000],
            finals: vec![50, 100, 500],
            profiles: 200,
            deps: vec![500],
            repetitions: 1,
            seed: 0,
            parallel: false,
            solver: SolverConfig::default(),
        }
    }
}

/// One grid cell. `residual` is `‖(I − A)x − d‖∞ / max(1, ‖d‖∞)`, the
/// quantity the solver tolerance bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n_industrial: usize,
    pub n_final: usize,
    pub n_profiles: usize,
    pub deps: usize,
    pub n_total: usize,
    pub nnz: usize,
    pub time_s_median: f64,
    pub residual: f64,
    pub time_s_min: f64,
    pub contended: bool,
    /// `ok`, or why the cell failed.
    pub status: String,
}

impl BenchRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        0.5 * (sorted[m - 1] + sorted[m])
    }
}

/// Per-cell seed, so a cell draws the same economy whatever else is on the
/// grid.
fn cell_seed(seed: u64, n_industrial: usize, n_final: usize, deps: usize) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [n_industrial, n_final, deps] {
        h = (h ^ v as u64).wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// Generates and times one cell.
pub fn run_cell(
    n_industrial: usize,
    n_final: usize,
    n_profiles: usize,
    deps: usize,
    repetitions: usize,
    seed: u64,
    solver: &SolverConfig,
) -> BenchRow {
    let mut row = BenchRow {
        n_industrial,
        n_final,
        n_profiles,
        deps,
        n_total: n_industrial + n_final + n_profiles,
        nnz: 0,
        time_s_median: f64::NAN,
        residual: f64::NAN,
        time_s_min: f64::NAN,
        contended: false,
        status: "ok".into(),
    };
    let inst = match gen_random_instance(
        n_industrial,
        n_final,
        n_profiles,
        deps,
        cell_seed(seed, n_industrial, n_final, deps),
    ) {
        Ok(inst) => inst,
        Err(e) => {
            row.status = e.to_string();
            return row;
        }
    };
    row.nnz = inst.matrix.nnz();
    let a = CoeffMatrix::from_csc(inst.matrix);
    let mut times = Vec::with_capacity(repetitions.max(1));
    let mut solution = None;
    for _ in 0..repetitions.max(1) {
        let start = Instant::now();
        let result = solve_linear_matrix(&a, &inst.demand, solver);
        times.push(start.elapsed().as_secs_f64());
        match result {
            Ok(sol) => solution = Some(sol),
            Err(e) => {
                row.status = e.to_string();
                return row;
            }
        }
    }
    times.sort_by(f64::total_cmp);
    row.time_s_median = median(&times);
    row.time_s_min = times[0];
    if let Some(sol) = solution {
        let r = residual(&a, &sol.x, &inst.demand).map(|r| max_norm(&r));
        row.residual = match r {
            Ok(r) => r / max_norm(&inst.demand).max(1.0),
            Err(e) => {
                row.status = e.to_string();
                return row;
            }
        };
    }
    row
}

/// Runs every `(industrial, final, deps)` combination, in that nesting
/// order. Failed cells are reported in their row's status.
pub fn run_grid(spec: &BenchSpec) -> Vec<BenchRow> {
    let cells: Vec<(usize, usize, usize)> = spec
        .industrial
        .iter()
        .flat_map(|&ni| {
            spec.finals
                .iter()
                .flat_map(move |&nf| spec.deps.iter().map(move |&d| (ni, nf, d)))
        })
        .collect();
    let run = |&(ni, nf, d): &(usize, usize, usize)| {
        log::info!("bench cell industrial={ni} final={nf} deps={d}");
        run_cell(
            ni,
            nf,
            spec.profiles,
            d,
            spec.repetitions,
            spec.seed,
            &spec.solver,
        )
    };
    if !spec.parallel || cells.len() < 2 {
        return cells.iter().map(run).collect();
    }
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(cells.len());
    let mut rows: Vec<Option<BenchRow>> = vec![None; cells.len()];
    std::thread::scope(|scope| {
        let chunk = cells.len().div_ceil(workers);
        for (cell_chunk, out_chunk) in cells.chunks(chunk).zip(rows.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (cell, out) in cell_chunk.iter().zip(out_chunk) {
                    *out = Some(run(cell));
                }
            });
        }
    });
    rows.into_iter()
        .map(|r| {
            let mut r = r.expect("every cell ran");
            r.contended = true;
            r
        })
        .collect()
}

/// Pairs of successful cells with equal deps where the larger economy
/// solved faster than the smaller one. Informational only: timings jitter.
pub fn timing_violations(rows: &[BenchRow]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (a, ra) in rows.iter().enumerate() {
        for (b, rb) in rows.iter().enumerate() {
            if ra.ok()
                && rb.ok()
                && ra.deps == rb.deps
                && ra.n_total < rb.n_total
                && rb.time_s_median < ra.time_s_median
            {
                out.push((a, b));
            }
        }
    }
    out
}
