//! Closed-loop daily simulation: plan for the full demand every tick, run
//! what stock allows, invest part of it in durable capacity, hand out the
//! rest, score, and lose some inventory to noise.

mod rng;
pub mod step;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rng::SimRng;
pub use step::{
    apply_investment, apply_noise, deliver_and_score, execution_vector, externality_step,
    feasible_scale, humanity, release_pending, reward, transition, ExecutedPlan, Investment,
};

use crate::economy::{Economy, ModelError};
use crate::solver::{solve, Method, PlanSolution, SolveError, SolverConfig};

/// A lot in gestation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pending {
    pub ready_tick: u64,
    pub good: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub tick: u64,
    pub inventory: Vec<f64>,
    pub cumulative_externality: f64,
    pub pending: Vec<Pending>,
    /// Hours worked so far, per labour good. Not a stock.
    pub labour_used: Vec<f64>,
}

impl SimState {
    pub fn new(inventory: Vec<f64>) -> Self {
        let n = inventory.len();
        Self {
            tick: 0,
            inventory,
            cumulative_externality: 0.0,
            pending: Vec::new(),
            labour_used: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Chance per good per tick of a loss event.
    pub probability: f64,
    pub loss_min: f64,
    pub loss_max: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            probability: 0.0,
            loss_min: 0.0,
            loss_max: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: usize,
    /// Share of feasible capacity diverted to durable production.
    pub theta: f64,
    pub gamma: f64,
    /// Per-good gestation in ticks. Missing entries mean 0.
    pub lead_time: Vec<usize>,
    pub noise: NoiseConfig,
    pub lambda_ext: f64,
    pub rng_seed: u64,
    pub solver: SolverConfig,
    /// Optional daily hours per labour good; absent means unconstrained.
    pub labour_cap: Option<Vec<f64>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 365,
            theta: 0.0,
            gamma: 0.99,
            lead_time: Vec::new(),
            noise: NoiseConfig::default(),
            lambda_ext: 0.0,
            rng_seed: 0,
            solver: SolverConfig::default(),
            labour_cap: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, economy: &Economy) -> Result<(), SimError> {
        let bad = |what: &'static str| Err(SimError::Config(what));
        if !(0.0..=1.0).contains(&self.theta) {
            return bad("theta must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.lambda_ext.is_finite() && self.lambda_ext >= 0.0) {
            return bad("lambda_ext must be >= 0");
        }
        let n = &self.noise;
        if !(0.0..=1.0).contains(&n.probability) {
            return bad("noise probability must lie in [0, 1]");
        }
        if !(0.0 <= n.loss_min && n.loss_min <= n.loss_max && n.loss_max <= 1.0) {
            return bad("noise loss range must satisfy 0 <= min <= max <= 1");
        }
        if self.lead_time.len() > economy.n() {
            return bad("lead_time has more entries than goods");
        }
        if let Some(caps) = &self.labour_cap {
            if caps.len() != economy.n() || caps.iter().any(|c| c.is_nan() || *c < 0.0) {
                return bad("labour_cap needs one value >= 0 per good");
            }
        }
        if self.solver.method == Method::DirectSparse && !economy.is_linear() {
            return bad("the direct method needs constant coefficients");
        }
        self.solver.validate()?;
        Ok(())
    }
}

/// Why a tick ran with nothing produced.
#[derive(Debug, Clone, PartialEq)]
pub enum TickFault {
    Solver(SolveError),
    NotConverged { residual: f64 },
    NegativePlan { goods: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    pub tick: u64,
    pub planned_x: Vec<f64>,
    pub executed_x: Vec<f64>,
    pub lambda_max: f64,
    pub delivery_scale: f64,
    pub humanity: f64,
    pub externality_step: f64,
    pub cumulative_externality: f64,
    pub reward: f64,
    pub inventory_before: Vec<f64>,
    /// Output that entered inventory this tick, including released lots.
    pub materialized: Vec<f64>,
    pub consumed: Vec<f64>,
    pub delivered: Vec<f64>,
    pub noise_loss: Vec<f64>,
    pub inventory_after: Vec<f64>,
    pub fault: Option<TickFault>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub reports: Vec<TickReport>,
    pub discounted_return: f64,
}

impl Trajectory {
    pub fn faults(&self) -> impl Iterator<Item = &TickReport> {
        self.reports.iter().filter(|r| r.fault.is_some())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(&'static str),
    #[error("initial inventory has {got} entries, economy has {expected} goods")]
    Dimension { expected: usize, got: usize },
    #[error("initial inventory must be finite and >= 0 (good {0})")]
    BadInventory(usize),
    #[error("good {good} would go negative at tick {tick} (short by {shortfall})")]
    NegativeInventory {
        good: usize,
        tick: u64,
        shortfall: f64,
    },
    #[error(transparent)]
    Solver(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `Σ_t γ^t R_t`, accumulated in tick order.
pub fn discounted_return(rewards: impl IntoIterator<Item = f64>, gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    for r in rewards {
        total += weight * r;
        weight *= gamma;
    }
    total
}

/// Solves for the full profile demand. Does not touch the state.
pub fn plan_tick(economy: &Economy, config: &SimConfig) -> Result<PlanSolution, SolveError> {
    solve(economy, &economy.profile_demand(), &config.solver)
}

/// Accepts a plan for execution, or says why the tick must idle.
fn screen(plan: Result<PlanSolution, SolveError>, n: usize) -> (Vec<f64>, Option<TickFault>) {
    match plan {
        Err(e) => (vec![0.0; n], Some(TickFault::Solver(e))),
        Ok(sol) if !sol.converged => (
            sol.x,
            Some(TickFault::NotConverged {
                residual: sol.residual_norm,
            }),
        ),
        Ok(sol) if !sol.negative_components.is_empty() => (
            sol.x,
            Some(TickFault::NegativePlan {
                goods: sol.negative_components,
            }),
        ),
        Ok(sol) => (sol.x, None),
    }
}

/// Advances `state` by one tick.
pub fn run_tick(
    economy: &Economy,
    state: SimState,
    config: &SimConfig,
    rng: &mut SimRng,
) -> Result<(SimState, TickReport), SimError> {
    let n = economy.n();
    let mut state = state;
    let released = release_pending(&mut state);
    let inventory_before: Vec<f64> = state
        .inventory
        .iter()
        .zip(&released)
        .map(|(s, r)| s - r)
        .collect();
    let tick = state.tick;

    let (planned_x, fault) = screen(plan_tick(economy, config), n);
    let (lambda_max, coefficients) = if fault.is_none() {
        let f = economy.eval_matrix(&planned_x)?;
        let lambda = feasible_scale(
            economy,
            &state,
            &f,
            &planned_x,
            config.labour_cap.as_deref(),
        );
        (lambda, f)
    } else {
        (0.0, economy.eval_matrix(&vec![0.0; n])?)
    };
    let investment = apply_investment(economy, &planned_x, lambda_max, config.theta);
    let executed_x = if fault.is_none() {
        execution_vector(economy, &planned_x, &investment)
    } else {
        vec![0.0; n]
    };

    let plan = ExecutedPlan {
        x: executed_x,
        coefficients,
    };
    let (mut next, flows) = transition(economy, &state, &plan, &config.lead_time)?;
    let delivery = deliver_and_score(economy, &mut next, investment.delivery_scale);
    let ext = externality_step(economy, &plan.x);
    next.cumulative_externality += ext;
    let r = reward(delivery.humanity, ext, config.lambda_ext);
    let noise_loss = apply_noise(&mut next, &config.noise, rng);

    let materialized = flows
        .materialized
        .iter()
        .zip(&released)
        .map(|(m, r)| m + r)
        .collect();
    let report = TickReport {
        tick,
        planned_x,
        executed_x: plan.x,
        lambda_max,
        delivery_scale: investment.delivery_scale,
        humanity: delivery.humanity,
        externality_step: ext,
        cumulative_externality: next.cumulative_externality,
        reward: r,
        inventory_before,
        materialized,
        consumed: flows.consumed,
        delivered: delivery.delivered,
        noise_loss,
        inventory_after: next.inventory.clone(),
        fault,
    };
    Ok((next, report))
}

/// Runs `config.horizon` ticks from `initial`.
pub fn run_simulation(
    economy: &Economy,
    initial: SimState,
    config: &SimConfig,
) -> Result<Trajectory, SimError> {
    config.validate(economy)?;
    if initial.inventory.len() != economy.n() {
        return Err(SimError::Dimension {
            expected: economy.n(),
            got: initial.inventory.len(),
        });
    }
    if let Some(i) = initial
        .inventory
        .iter()
        .position(|v| !(v.is_finite() && *v >= 0.0))
    {
        return Err(SimError::BadInventory(i));
    }
    let mut rng = SimRng::new(config.rng_seed);
    let mut state = initial;
    let mut reports = Vec::with_capacity(config.horizon);
    for _ in 0..config.horizon {
        let (next, report) = run_tick(economy, state, config, &mut rng)?;
        if let Some(fault) = &report.fault {
            log::warn!("tick {}: plan not executed: {fault:?}", report.tick);
        }
        reports.push(report);
        state = next;
    }
    let discounted_return = discounted_return(reports.iter().map(|r| r.reward), config.gamma);
    Ok(Trajectory {
        reports,
        discounted_return,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economy::{Entry, Externalities, GoodKind};
    use crate::fixtures::village_linear_economy;

    fn flush_config(theta: f64) -> SimConfig {
        SimConfig {
            horizon: 10,
            theta,
            ..SimConfig::default()
        }
    }

    #[test]
    fn horizon_zero_is_empty() {
        let e = village_linear_economy();
        let cfg = SimConfig {
            horizon: 0,
            ..SimConfig::default()
        };
        let t = run_simulation(&e, SimState::new(vec![0.0; 8]), &cfg).unwrap();
        assert!(t.reports.is_empty());
        assert_eq!(t.discounted_return, 0.0);
    }

    #[test]
    fn plan_matches_direct_solve() {
        let e = village_linear_economy();
        let x = plan_tick(&e, &SimConfig::default()).unwrap().x;
        assert!((x[2] - 180.0).abs() < 1e-9);
        assert!((x[0] - 3580.0 / 0.999).abs() < 1e-9);
    }

    #[test]
    fn zero_population_plans_nothing() {
        let e = Economy::build(
            vec![
                ("f".into(), GoodKind::Final),
                ("p".into(), GoodKind::Profile),
            ],
            vec![Entry::constant(0, 1, 2.0)],
            vec![(1, 0.0)],
            Externalities::none(),
        )
        .unwrap();
        assert_eq!(
            plan_tick(&e, &SimConfig::default()).unwrap().x,
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn solver_fault_idles_the_tick() {
        let e = village_linear_economy();
        let cfg = SimConfig {
            solver: SolverConfig {
                method: Method::FixedPoint,
                max_iterations: 1,
                ..SolverConfig::default()
            },
            horizon: 3,
            ..SimConfig::default()
        };
        let t = run_simulation(&e, SimState::new(vec![1e6; 8]), &cfg).unwrap();
        assert_eq!(t.faults().count(), 3);
        for r in &t.reports {
            assert!(r.executed_x.iter().all(|v| *v == 0.0));
            assert_eq!(r.delivery_scale, 0.0);
        }
    }

    #[test]
    fn direct_method_refused_for_functional_entries() {
        let f = crate::CoeffFn::constant(0.1).unwrap();
        let e = Economy::build(
            vec![("a".into(), GoodKind::Final)],
            vec![Entry::functional(0, 0, f)],
            vec![],
            Externalities::none(),
        )
        .unwrap();
        let cfg = SimConfig::default();
        assert!(matches!(
            run_simulation(&e, SimState::new(vec![0.0]), &cfg),
            Err(SimError::Config(_))
        ));
    }

    #[test]
    fn gamma_zero_returns_first_reward() {
        let e = village_linear_economy();
        let cfg = SimConfig {
            gamma: 0.0,
            ..flush_config(0.2)
        };
        let t = run_simulation(
            &e,
            SimState::new(vec![3000.0, 100.0, 200.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            &cfg,
        )
        .unwrap();
        assert_eq!(t.discounted_return, t.reports[0].reward);
    }

    #[test]
    fn scales_stay_ordered() {
        let e = village_linear_economy();
        let t = run_simulation(
            &e,
            SimState::new(vec![3000.0, 100.0, 200.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            &flush_config(0.3),
        )
        .unwrap();
        for r in &t.reports {
            assert!(0.0 <= r.delivery_scale && r.delivery_scale <= r.lambda_max);
            assert!(r.lambda_max <= 1.0);
        }
        // Pick stock compounds under investment.
        let picks: Vec<f64> = t.reports.iter().map(|r| r.inventory_after[1]).collect();
        assert!(picks.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_bad_config() {
        let e = village_linear_economy();
        let s = || SimState::new(vec![0.0; 8]);
        for cfg in [
            SimConfig {
                theta: 1.5,
                ..SimConfig::default()
            },
            SimConfig {
                gamma: 1.0,
                ..SimConfig::default()
            },
            SimConfig {
                lambda_ext: -1.0,
                ..SimConfig::default()
            },
            SimConfig {
                noise: NoiseConfig {
                    probability: 0.1,
                    loss_min: 0.6,
                    loss_max: 0.5,
                },
                ..SimConfig::default()
            },
        ] {
            assert!(matches!(
                run_simulation(&e, s(), &cfg),
                Err(SimError::Config(_))
            ));
        }
        assert!(matches!(
            run_simulation(&e, SimState::new(vec![-1.0; 8]), &SimConfig::default()),
            Err(SimError::BadInventory(0))
        ));
    }
}
