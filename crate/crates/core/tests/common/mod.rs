//! Shared helpers: a reference dense solver and random instance builders.
#![allow(dead_code)]

use natura::matrix::{CoeffMatrix, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves `m y = b` by Gaussian elimination with partial pivoting.
/// Written independently of the library solvers to serve as an oracle.
pub fn gauss_solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))
            .unwrap();
        assert!(m[p][k].abs() > 1e-300, "oracle hit a singular matrix");
        m.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let factor = m[i][k] / m[k][k];
            if factor == 0.0 {
                continue;
            }
            for j in k..n {
                m[i][j] -= factor * m[k][j];
            }
            b[i] -= factor * b[k];
        }
    }
    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * y[j]).sum();
        y[i] = (b[i] - s) / m[i][i];
    }
    y
}

/// Oracle for `(I − A)x = d` with `a` given by rows.
pub fn leontief_oracle(a: &[Vec<f64>], d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let m = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 1.0 } else { 0.0 } - a[i][j])
                .collect()
        })
        .collect();
    gauss_solve(m, d.to_vec())
}

pub fn rows_of(m: &CoeffMatrix) -> Vec<Vec<f64>> {
    let n = m.dim();
    (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j)).collect())
        .collect()
}

/// Largest `|a − b| / max(|b|, 1)`.
pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// A dense non-negative matrix whose columns sum to at most `max_col_sum`,
/// and a non-negative demand vector.
pub fn random_constant_system(seed: u64, n: usize, max_col_sum: f64) -> (CoeffMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![vec![0.0; n]; n];
    for j in 0..n {
        let target = rng.gen_range(0.0..=max_col_sum);
        let mut col: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.6) {
                    rng.gen::<f64>()
                } else {
                    0.0
                }
            })
            .collect();
        let s: f64 = col.iter().sum();
        if s > 0.0 {
            col.iter_mut().for_each(|v| *v *= target / s);
        }
        for i in 0..n {
            rows[i][j] = col[i];
        }
    }
    let d = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
    (CoeffMatrix::Dense(DenseMatrix::from_rows(&rows)), d)
}

pub mod sim {
    use natura::scenario::Scenario;
    use natura::sim::Trajectory;

    pub fn village() -> Scenario {
        Scenario::from_str(natura::fixtures::VILLAGE).expect("bundled village parses")
    }

    /// `after = before + materialized − consumed − delivered − lost`, per good
    /// and tick, to `tol` absolute.
    pub fn conservation(t: &Trajectory, tol: f64) -> Result<(), String> {
        for r in &t.reports {
            for i in 0..r.inventory_after.len() {
                let expect = r.inventory_before[i] + r.materialized[i]
                    - r.consumed[i]
                    - r.delivered[i]
                    - r.noise_loss[i];
                let err = (r.inventory_after[i] - expect).abs();
                if err > tol {
                    return Err(format!("tick {} good {i}: off by {err:e}", r.tick));
                }
            }
        }
        Ok(())
    }

    /// Durable stock never falls except through noise.
    pub fn durables_hold(t: &Trajectory, durable: &[usize]) -> Result<(), String> {
        for r in &t.reports {
            for &i in durable {
                if r.inventory_after[i] + r.noise_loss[i] < r.inventory_before[i] {
                    return Err(format!("tick {}: durable {i} fell", r.tick));
                }
            }
        }
        Ok(())
    }

    /// The cumulative total is the running sum of steps, exactly, and never
    /// decreases.
    pub fn externality_additive(t: &Trajectory) -> Result<(), String> {
        let mut running = 0.0;
        for r in &t.reports {
            if r.externality_step < 0.0 {
                return Err(format!("tick {}: negative step", r.tick));
            }
            running += r.externality_step;
            if r.cumulative_externality != running {
                return Err(format!(
                    "tick {}: cumulative {} != running sum {running}",
                    r.tick, r.cumulative_externality
                ));
            }
        }
        Ok(())
    }
}
