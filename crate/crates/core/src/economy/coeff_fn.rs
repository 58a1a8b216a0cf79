//! Per-unit input requirements that vary with the producing good's output.
//!
//! A [`CoeffFn`] is a piecewise-linear curve over sampled breakpoints
//! `(output level, input per unit of output)`. Production units report how
//! much input a given *total* output needs; [`fit_coeff_fn`] divides those
//! totals by the output to obtain the per-unit form, and [`aggregate_units`]
//! stacks several units in merit order before fitting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffFnError {
    #[error("coefficient function needs at least one breakpoint")]
    Empty,
    #[error("breakpoint {index}: output level {x} must be finite and >= 0")]
    BadLevel { index: usize, x: f64 },
    #[error("breakpoint {index}: per-unit requirement {f} must be finite and >= 0")]
    BadRequirement { index: usize, f: f64 },
    #[error("breakpoints must be strictly increasing (index {index})")]
    NotIncreasing { index: usize },
    #[error("sample {index}: output {x} must be positive")]
    NonPositiveSample { index: usize, x: f64 },
    #[error("sample {index}: total input {total} must be finite and >= 0")]
    NegativeTotal { index: usize, total: f64 },
    #[error("duplicate sample at output {x}")]
    DuplicateSample { x: f64 },
    #[error("output level {x} lies beyond the last breakpoint {last}")]
    OutOfDomain { x: f64, last: f64 },
    #[error("cannot evaluate at a non-finite output level")]
    NonFinite,
    #[error("production unit {index}: {reason}")]
    BadUnit { index: usize, reason: &'static str },
    #[error("duplicate merit rank {rank}")]
    DuplicateRank { rank: u32 },
    #[error("probe points must be positive and strictly increasing (index {index})")]
    BadProbe { index: usize },
    #[error("probe {x} exceeds total unit capacity {capacity}")]
    OverCapacity { x: f64, capacity: f64 },
}

/// Behaviour past the last breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extrapolation {
    /// Hold the last per-unit value.
    #[default]
    ClampLast,
    /// Refuse to evaluate.
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoeffFn {
    breakpoints: Vec<(f64, f64)>,
    extrapolation: Extrapolation,
}

impl CoeffFn {
    pub fn new(
        breakpoints: Vec<(f64, f64)>,
        extrapolation: Extrapolation,
    ) -> Result<Self, CoeffFnError> {
        if breakpoints.is_empty() {
            return Err(CoeffFnError::Empty);
        }
        for (index, &(x, f)) in breakpoints.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(CoeffFnError::BadLevel { index, x });
            }
            if !f.is_finite() || f < 0.0 {
                return Err(CoeffFnError::BadRequirement { index, f });
            }
            if index > 0 && x <= breakpoints[index - 1].0 {
                return Err(CoeffFnError::NotIncreasing { index });
            }
        }
        Ok(Self {
            breakpoints,
            extrapolation,
        })
    }

    /// A flat curve; handy for tests and for promoting constants.
    pub fn constant(value: f64) -> Result<Self, CoeffFnError> {
        Self::new(vec![(0.0, value)], Extrapolation::ClampLast)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn extrapolation(&self) -> Extrapolation {
        self.extrapolation
    }

    pub fn with_extrapolation(mut self, extrapolation: Extrapolation) -> Self {
        self.extrapolation = extrapolation;
        self
    }

    fn last(&self) -> (f64, f64) {
        self.breakpoints[self.breakpoints.len() - 1]
    }

    /// Index `k` of the segment `[x_k, x_{k+1})` holding `x`, or `None` when
    /// `x` is below the first or at/after the last breakpoint.
    fn segment(&self, x: f64) -> Option<usize> {
        let k = self.breakpoints.partition_point(|&(bx, _)| bx <= x);
        if k == 0 || k == self.breakpoints.len() {
            None
        } else {
            Some(k - 1)
        }
    }

    fn check_domain(&self, x: f64) -> Result<(), CoeffFnError> {
        if x.is_nan() {
            return Err(CoeffFnError::NonFinite);
        }
        let (last, _) = self.last();
        if x > last && self.extrapolation == Extrapolation::Error {
            return Err(CoeffFnError::OutOfDomain { x, last });
        }
        Ok(())
    }

    /// Per-unit requirement at output level `x`.
    ///
    /// Below the first breakpoint (including `x = 0`, where the per-unit form
    /// is undefined) the first value is returned.
    pub fn eval(&self, x: f64) -> Result<f64, CoeffFnError> {
        self.check_domain(x)?;
        let (first_x, first_f) = self.breakpoints[0];
        if x <= first_x {
            return Ok(first_f);
        }
        match self.segment(x) {
            Some(k) => {
                let (x0, f0) = self.breakpoints[k];
                let (x1, f1) = self.breakpoints[k + 1];
                Ok(f0 + (f1 - f0) * (x - x0) / (x1 - x0))
            }
            None => Ok(self.last().1),
        }
    }

    /// Slope of the curve at `x`, taking the right-hand slope at breakpoints.
    ///
    /// The clamped regions are flat. At the last breakpoint of a curve that
    /// refuses to extrapolate there is no right-hand side, so the slope of
    /// the final segment is used instead.
    pub fn derivative(&self, x: f64) -> Result<f64, CoeffFnError> {
        self.check_domain(x)?;
        if x < self.breakpoints[0].0 {
            return Ok(0.0);
        }
        if let Some(k) = self.segment(x) {
            return Ok(self.slope(k));
        }
        let n = self.breakpoints.len();
        if n >= 2 && self.extrapolation == Extrapolation::Error && x == self.last().0 {
            return Ok(self.slope(n - 2));
        }
        Ok(0.0)
    }

    fn slope(&self, k: usize) -> f64 {
        let (x0, f0) = self.breakpoints[k];
        let (x1, f1) = self.breakpoints[k + 1];
        (f1 - f0) / (x1 - x0)
    }
}

/// Builds a per-unit curve from `(output, total input needed)` samples.
///
/// The result holds breakpoints `(x_k, total_k / x_k)` sorted by output and
/// clamps past the last sample.
pub fn fit_coeff_fn(samples: &[(f64, f64)]) -> Result<CoeffFn, CoeffFnError> {
    if samples.is_empty() {
        return Err(CoeffFnError::Empty);
    }
    for (index, &(x, total)) in samples.iter().enumerate() {
        if !x.is_finite() || x <= 0.0 {
            return Err(CoeffFnError::NonPositiveSample { index, x });
        }
        if !total.is_finite() || total < 0.0 {
            return Err(CoeffFnError::NegativeTotal { index, total });
        }
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(CoeffFnError::DuplicateSample { x: w[0].0 });
    }
    let breakpoints = sorted.into_iter().map(|(x, t)| (x, t / x)).collect();
    CoeffFn::new(breakpoints, Extrapolation::ClampLast)
}

/// One production unit able to make the output good.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductionUnitSpec {
    /// Maximum output units per tick.
    pub capacity: f64,
    /// Input units consumed per output unit.
    pub requirement_per_unit: f64,
    /// Activation order; lower ranks are filled first.
    pub merit_rank: u32,
}

/// Total input needed to make `x` units when `units` are filled to capacity
/// in merit order. `units` must already be sorted by rank.
fn stacked_total(units: &[ProductionUnitSpec], x: f64) -> f64 {
    let mut remaining = x;
    let mut total = 0.0;
    for unit in units {
        if remaining <= 0.0 {
            break;
        }
        let used = remaining.min(unit.capacity);
        total += used * unit.requirement_per_unit;
        remaining -= used;
    }
    total
}

/// Stacks production units in merit order, probes the combined
/// total-input curve and fits a per-unit curve through the probes.
pub fn aggregate_units(
    units: &[ProductionUnitSpec],
    probe_points: &[f64],
    extrapolation: Extrapolation,
) -> Result<CoeffFn, CoeffFnError> {
    if units.is_empty() || probe_points.is_empty() {
        return Err(CoeffFnError::Empty);
    }
    for (index, unit) in units.iter().enumerate() {
        if !(unit.capacity.is_finite() && unit.capacity > 0.0) {
            return Err(CoeffFnError::BadUnit {
                index,
                reason: "capacity must be positive",
            });
        }
        if !(unit.requirement_per_unit.is_finite() && unit.requirement_per_unit >= 0.0) {
            return Err(CoeffFnError::BadUnit {
                index,
                reason: "requirement per unit must be >= 0",
            });
        }
    }
    let mut ordered = units.to_vec();
    ordered.sort_by_key(|u| u.merit_rank);
    if let Some(w) = ordered
        .windows(2)
        .find(|w| w[0].merit_rank == w[1].merit_rank)
    {
        return Err(CoeffFnError::DuplicateRank {
            rank: w[0].merit_rank,
        });
    }
    let capacity: f64 = ordered.iter().map(|u| u.capacity).sum();
    for (index, &x) in probe_points.iter().enumerate() {
        if !(x.is_finite() && x > 0.0) || (index > 0 && x <= probe_points[index - 1]) {
            return Err(CoeffFnError::BadProbe { index });
        }
        if x > capacity {
            return Err(CoeffFnError::OverCapacity { x, capacity });
        }
    }
    let samples: Vec<(f64, f64)> = probe_points
        .iter()
        .map(|&x| (x, stacked_total(&ordered, x)))
        .collect();
    Ok(fit_coeff_fn(&samples)?.with_extrapolation(extrapolation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(capacity: f64, requirement_per_unit: f64, merit_rank: u32) -> ProductionUnitSpec {
        ProductionUnitSpec {
            capacity,
            requirement_per_unit,
            merit_rank,
        }
    }

    #[test]
    fn proportional_samples_give_flat_curve() {
        let f = fit_coeff_fn(&[(1.0, 0.5), (2.0, 1.0), (3.0, 1.5)]).unwrap();
        for x in [1.0, 1.3, 2.0, 2.9, 3.0] {
            assert_eq!(f.eval(x).unwrap(), 0.5);
        }
        assert_eq!(f.eval(0.5).unwrap(), 0.5);
        assert_eq!(f.eval(0.0).unwrap(), 0.5);
    }

    #[test]
    fn interpolates_per_unit_values() {
        let f = fit_coeff_fn(&[(20.0, 9.0), (10.0, 4.0)]).unwrap();
        assert_eq!(f.eval(10.0).unwrap(), 0.4);
        assert_eq!(f.eval(20.0).unwrap(), 0.45);
        assert!((f.eval(15.0).unwrap() - 0.425).abs() < 1e-15);
        assert!((f.derivative(15.0).unwrap() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn breakpoint_slope_is_right_hand() {
        let f = CoeffFn::new(
            vec![(0.0, 1.0), (1.0, 2.0), (2.0, 0.0)],
            Extrapolation::ClampLast,
        )
        .unwrap();
        assert_eq!(f.derivative(1.0).unwrap(), -2.0);
        assert_eq!(f.derivative(0.0).unwrap(), 1.0);
        assert_eq!(f.derivative(2.0).unwrap(), 0.0);
        assert_eq!(f.derivative(7.0).unwrap(), 0.0);
    }

    #[test]
    fn error_extrapolation_refuses_past_end() {
        let f = fit_coeff_fn(&[(1.0, 1.0), (2.0, 3.0)])
            .unwrap()
            .with_extrapolation(Extrapolation::Error);
        assert_eq!(f.eval(2.0).unwrap(), 1.5);
        assert_eq!(f.derivative(2.0).unwrap(), 0.5);
        assert!(matches!(f.eval(2.5), Err(CoeffFnError::OutOfDomain { .. })));
    }

    #[test]
    fn fit_rejects_bad_samples() {
        assert_eq!(fit_coeff_fn(&[]), Err(CoeffFnError::Empty));
        assert!(matches!(
            fit_coeff_fn(&[(1.0, 1.0), (1.0, 2.0)]),
            Err(CoeffFnError::DuplicateSample { .. })
        ));
        assert!(matches!(
            fit_coeff_fn(&[(0.0, 1.0)]),
            Err(CoeffFnError::NonPositiveSample { .. })
        ));
        assert!(matches!(
            fit_coeff_fn(&[(1.0, -1.0)]),
            Err(CoeffFnError::NegativeTotal { .. })
        ));
    }

    #[test]
    fn merit_order_stacking() {
        // 10*0.4 + 10*0.5 + 5*0.6 = 12 units of input for 25 of output.
        let units = [unit(10.0, 0.6, 3), unit(10.0, 0.4, 1), unit(10.0, 0.5, 2)];
        let f = aggregate_units(&units, &[5.0, 25.0], Extrapolation::Error).unwrap();
        assert!((f.eval(25.0).unwrap() - 0.48).abs() < 1e-15);
        assert_eq!(f.eval(5.0).unwrap(), 0.4);
    }

    #[test]
    fn single_unit_is_flat() {
        let f = aggregate_units(
            &[unit(100.0, 0.5, 0)],
            &[10.0, 50.0],
            Extrapolation::ClampLast,
        )
        .unwrap();
        assert_eq!(f.breakpoints(), &[(10.0, 0.5), (50.0, 0.5)]);
    }

    #[test]
    fn probe_beyond_capacity_fails() {
        let units = [unit(10.0, 0.4, 1), unit(10.0, 0.5, 2), unit(10.0, 0.6, 3)];
        assert!(matches!(
            aggregate_units(&units, &[35.0], Extrapolation::Error),
            Err(CoeffFnError::OverCapacity { .. })
        ));
        assert!(matches!(
            aggregate_units(
                &[unit(1.0, 1.0, 1), unit(1.0, 1.0, 1)],
                &[1.0],
                Extrapolation::Error
            ),
            Err(CoeffFnError::DuplicateRank { rank: 1 })
        ));
    }

    fn samples() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::btree_map(1u32..10_000, 0.0f64..1e4, 1..20).prop_map(|m| {
            m.into_iter()
                .map(|(x, t)| (f64::from(x) / 10.0, t))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn fit_reproduces_samples(s in samples()) {
            let f = fit_coeff_fn(&s).unwrap();
            for &(x, total) in &s {
                let want = total / x;
                let got = f.eval(x).unwrap();
                prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(f64::MIN_POSITIVE));
            }
        }

        #[test]
        fn derivative_matches_central_difference(s in samples(), t in 0.05f64..0.95) {
            prop_assume!(s.len() >= 2);
            let f = fit_coeff_fn(&s).unwrap();
            let k = (t * (s.len() - 1) as f64) as usize;
            let (x0, x1) = (s[k].0, s[k + 1].0);
            let x = x0 + (x1 - x0) * 0.37;
            let h = 0.1 * (x1 - x0);
            let fd = (f.eval(x + h).unwrap() - f.eval(x - h).unwrap()) / (2.0 * h);
            let d = f.derivative(x).unwrap();
            prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0), "fd {fd} vs {d}");
        }

        #[test]
        fn stacked_totals_are_monotone(
            caps in prop::collection::vec(1.0f64..100.0, 1..5),
            reqs in prop::collection::vec(0.0f64..2.0, 5),
        ) {
            let units: Vec<_> = caps
                .iter()
                .zip(&reqs)
                .enumerate()
                .map(|(i, (&c, &r))| unit(c, r, i as u32))
                .collect();
            let total_cap: f64 = caps.iter().sum();
            let probes: Vec<f64> = (1..=20).map(|i| total_cap * f64::from(i) / 21.0).collect();
            let f = aggregate_units(&units, &probes, Extrapolation::Error).unwrap();
            let totals: Vec<f64> = f.breakpoints().iter().map(|&(x, v)| x * v).collect();
            for w in totals.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9);
            }
        }
    }
}
