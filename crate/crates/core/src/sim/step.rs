//! The pieces of one simulated day.

use crate::economy::{CoeffEntry, Economy, GoodKind};
use crate::matrix::CoeffMatrix;

use super::rng::SimRng;
use super::{NoiseConfig, Pending, SimError, SimState};

/// Relative slack allowed when a consumption exactly exhausts a stock.
const EXHAUST_SLACK: f64 = 1e-9;

/// Largest uniform scale `λ ∈ [0, 1]` at which plan `x` can run on current
/// stock, with coefficients frozen at `coefficients = F(x)`.
///
/// Every input row `i` reachable from a producible column contributes
/// `stock_i / Σ_j F_ij x_j`. Consumables are used up by that amount; durable
/// stock only has to be present. Labour is unconstrained unless
/// `labour_cap` supplies a per-good daily cap. Profile columns are excluded:
/// claims are served from stock after production, through rationing.
pub fn feasible_scale(
    economy: &Economy,
    state: &SimState,
    coefficients: &CoeffMatrix,
    x: &[f64],
    labour_cap: Option<&[f64]>,
) -> f64 {
    let mut need = vec![0.0; economy.n()];
    coefficients.for_each_entry(|i, j, v| {
        if economy.kind(j).is_producible() {
            need[i] += v * x[j];
        }
    });
    let mut scale = 1.0f64;
    for (i, &req) in need.iter().enumerate() {
        if req <= 0.0 {
            continue;
        }
        let available = match economy.kind(i) {
            GoodKind::Labour => match labour_cap {
                Some(caps) => caps[i],
                None => continue,
            },
            GoodKind::Profile => continue,
            _ => state.inventory[i],
        };
        scale = scale.min(available / req);
    }
    scale.clamp(0.0, 1.0)
}

/// How feasible capacity is split between delivery and capital.
#[derive(Debug, Clone, PartialEq)]
pub struct Investment {
    /// `(1 − θ) λ_max`
    pub delivery_scale: f64,
    /// `θ λ_max x_i` for durable goods, zero elsewhere.
    pub durable_bonus: Vec<f64>,
}

/// Diverts a share `theta` of the feasible scale `lambda_max` from profile
/// delivery into extra durable production.
pub fn apply_investment(economy: &Economy, x: &[f64], lambda_max: f64, theta: f64) -> Investment {
    let durable_bonus = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            if economy.kind(i).is_durable() {
                theta * lambda_max * xi
            } else {
                0.0
            }
        })
        .collect();
    Investment {
        delivery_scale: (1.0 - theta) * lambda_max,
        durable_bonus,
    }
}

/// Output actually run today: durable stock grows only through investment,
/// everything else runs at the delivery scale.
pub fn execution_vector(economy: &Economy, x: &[f64], investment: &Investment) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            if economy.kind(i).is_durable() {
                investment.durable_bonus[i]
            } else {
                investment.delivery_scale * xi
            }
        })
        .collect()
}

/// A day's executed output together with the coefficients it ran under.
#[derive(Debug, Clone)]
pub struct ExecutedPlan {
    pub x: Vec<f64>,
    pub coefficients: CoeffMatrix,
}

/// Flows of one transition, per good.
#[derive(Debug, Clone, PartialEq)]
pub struct Flows {
    /// Output that entered inventory (immediate output plus released
    /// pending lots).
    pub materialized: Vec<f64>,
    /// Consumables used up by production.
    pub consumed: Vec<f64>,
    /// Labour hours worked.
    pub labour: Vec<f64>,
}

impl Flows {
    fn zeros(n: usize) -> Self {
        Self {
            materialized: vec![0.0; n],
            consumed: vec![0.0; n],
            labour: vec![0.0; n],
        }
    }
}

/// Moves due pending lots into inventory; returns what was released.
pub fn release_pending(state: &mut SimState) -> Vec<f64> {
    let mut released = vec![0.0; state.inventory.len()];
    let tick = state.tick;
    state.pending.retain(|lot| {
        if lot.ready_tick <= tick {
            released[lot.good] += lot.amount;
            false
        } else {
            true
        }
    });
    for (inv, r) in state.inventory.iter_mut().zip(&released) {
        *inv += r;
    }
    released
}

/// Applies one day of production to `state` and advances the clock.
///
/// Consumables are drawn down by `F_ij · x_j` for every producible column;
/// durable inputs stay in place. Industrial and final output enters
/// inventory now, or after its lead time via the pending list. Lots due at
/// the new tick are released before returning.
pub fn transition(
    economy: &Economy,
    state: &SimState,
    plan: &ExecutedPlan,
    lead_time: &[usize],
) -> Result<(SimState, Flows), SimError> {
    let n = economy.n();
    let mut next = state.clone();
    let mut flows = Flows::zeros(n);

    let mut draw = vec![0.0; n];
    plan.coefficients.for_each_entry(|i, j, v| {
        if economy.kind(j).is_producible() && plan.x[j] > 0.0 {
            draw[i] += v * plan.x[j];
        }
    });
    for (i, &amount) in draw.iter().enumerate() {
        if amount == 0.0 {
            continue;
        }
        match economy.kind(i) {
            GoodKind::Labour => {
                flows.labour[i] = amount;
                next.labour_used[i] += amount;
            }
            GoodKind::Industrial { durable: true } | GoodKind::Profile => {}
            _ => {
                let stock = next.inventory[i];
                let left = stock - amount;
                if left < -EXHAUST_SLACK * stock.max(amount) {
                    return Err(SimError::NegativeInventory {
                        good: i,
                        tick: state.tick,
                        shortfall: -left,
                    });
                }
                let left = left.max(0.0);
                flows.consumed[i] = stock - left;
                next.inventory[i] = left;
            }
        }
    }

    for (j, &out) in plan.x.iter().enumerate() {
        if out <= 0.0 || !economy.kind(j).is_producible() {
            continue;
        }
        let lead = lead_time.get(j).copied().unwrap_or(0);
        if lead == 0 {
            next.inventory[j] += out;
            flows.materialized[j] += out;
        } else {
            next.pending.push(Pending {
                ready_tick: state.tick + lead as u64,
                good: j,
                amount: out,
            });
        }
    }

    next.tick += 1;
    let released = release_pending(&mut next);
    for (m, r) in flows.materialized.iter_mut().zip(&released) {
        *m += r;
    }
    Ok((next, flows))
}

/// `(final good, profile, claim a_ij · N_j)` for every positive claim.
pub fn claims(economy: &Economy) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for j in economy.profiles() {
        let heads = economy.population(j);
        for (i, entry) in economy.column(j) {
            if economy.kind(*i) != GoodKind::Final {
                continue;
            }
            if let CoeffEntry::Constant(a) = entry {
                let claim = a * heads;
                if claim > 0.0 {
                    out.push((*i, j, claim));
                }
            }
        }
    }
    out
}

/// Worst-case fulfilment ratio across (final good, profile) pairs.
///
/// For each pair, the surplus left for that profile once every other
/// profile's claim on the good is met, divided by the pair's own claim.
/// With no claims at all the plan is vacuously fulfilled and this is 1.
pub fn humanity(economy: &Economy, stock: &[f64]) -> f64 {
    let claims = claims(economy);
    if claims.is_empty() {
        return 1.0;
    }
    let mut total = vec![0.0; economy.n()];
    for &(i, _, c) in &claims {
        total[i] += c;
    }
    claims
        .iter()
        .map(|&(i, _, c)| (stock[i] - (total[i] - c)).max(0.0) / c)
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    /// Units handed to profiles, per good.
    pub delivered: Vec<f64>,
    /// Humanity measured on the stock before delivery.
    pub humanity: f64,
}

/// Scores humanity on current stock, then hands out `delivery_scale` of
/// every claim, rationing proportionally where stock runs short.
pub fn deliver_and_score(economy: &Economy, state: &mut SimState, delivery_scale: f64) -> Delivery {
    let hu = humanity(economy, &state.inventory);
    let mut want = vec![0.0; economy.n()];
    for (i, _, c) in claims(economy) {
        want[i] += c * delivery_scale;
    }
    let delivered: Vec<f64> = want
        .iter()
        .zip(&state.inventory)
        .map(|(w, s)| w.min(*s).max(0.0))
        .collect();
    for (inv, d) in state.inventory.iter_mut().zip(&delivered) {
        *inv -= d;
    }
    Delivery {
        delivered,
        humanity: hu,
    }
}

/// Weighted emissions of one day's output: `Σ_k ρ_k Σ_j e_kj x_j`.
pub fn externality_step(economy: &Economy, x: &[f64]) -> f64 {
    let ext = economy.externalities();
    ext.weights()
        .iter()
        .enumerate()
        .map(|(k, rho)| rho * ext.emissions(k).iter().map(|&(j, e)| e * x[j]).sum::<f64>())
        .sum()
}

pub fn reward(humanity: f64, externality_step: f64, lambda_ext: f64) -> f64 {
    humanity - lambda_ext * externality_step
}

/// Random inventory loss: each good, in index order, loses a uniform
/// fraction in `[loss_min, loss_max]` of its stock with probability `p`.
/// Returns the amounts lost.
pub fn apply_noise(state: &mut SimState, noise: &NoiseConfig, rng: &mut SimRng) -> Vec<f64> {
    let mut lost = vec![0.0; state.inventory.len()];
    if noise.probability <= 0.0 {
        return lost;
    }
    for (inv, loss) in state.inventory.iter_mut().zip(lost.iter_mut()) {
        if rng.unit() < noise.probability {
            let phi = rng.uniform(noise.loss_min, noise.loss_max);
            let kept = *inv * (1.0 - phi);
            *loss = *inv - kept;
            *inv = kept;
        }
    }
    lost
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economy::{Entry, Externalities};
    use crate::fixtures::village_linear_economy;
    use crate::solver::{solve_linear, SolverConfig};

    fn state(inventory: Vec<f64>) -> SimState {
        SimState::new(inventory)
    }

    fn village_plan() -> (Economy, Vec<f64>, CoeffMatrix) {
        let e = village_linear_economy();
        let x = solve_linear(&e, &e.profile_demand(), &SolverConfig::default())
            .unwrap()
            .x;
        let f = e.eval_matrix(&x).unwrap();
        (e, x, f)
    }

    #[test]
    fn unlimited_stock_allows_full_scale() {
        let (e, x, f) = village_plan();
        let s = state(vec![1e12; 8]);
        assert_eq!(feasible_scale(&e, &s, &f, &x, None), 1.0);
    }

    #[test]
    fn pick_stock_binds() {
        let (e, x, f) = village_plan();
        let mut inv = vec![1e12; 8];
        inv[1] = 100.0;
        let lambda = feasible_scale(&e, &state(inv), &f, &x, None);
        // 100 picks against 0.5 · x_L = 1791.792 needed.
        assert!((lambda - 100.0 / (0.5 * x[0])).abs() < 1e-15);
        assert!((lambda - 0.05581).abs() < 1e-5);
    }

    #[test]
    fn empty_consumable_blocks_production() {
        let (e, x, f) = village_plan();
        let mut inv = vec![1e12; 8];
        inv[0] = 0.0;
        assert_eq!(feasible_scale(&e, &state(inv), &f, &x, None), 0.0);
    }

    #[test]
    fn labour_cap_is_opt_in() {
        let (e, x, f) = village_plan();
        let s = state(vec![1e12; 8]);
        let mut caps = vec![f64::INFINITY; 8];
        caps[4] = 0.5 * 0.012 * x[1];
        let lambda = feasible_scale(&e, &s, &f, &x, Some(&caps));
        assert!((lambda - 0.5).abs() < 1e-12);
    }

    #[test]
    fn investment_split() {
        let e = village_linear_economy();
        let x = [3583.584, 1791.792, 180.0, 0.0, 0.0, 0.0, 800.0, 500.0];
        let none = apply_investment(&e, &x, 0.7, 0.0);
        assert_eq!(none.delivery_scale, 0.7);
        assert!(none.durable_bonus.iter().all(|v| *v == 0.0));
        let all = apply_investment(&e, &x, 0.7, 1.0);
        assert_eq!(all.delivery_scale, 0.0);
        assert!((all.durable_bonus[1] - 0.7 * 1791.792).abs() < 1e-9);
        let some = apply_investment(&e, &x, 0.5, 0.4);
        assert!((some.delivery_scale - 0.3).abs() < 1e-15);
        assert!((some.durable_bonus[1] - 358.3584).abs() < 1e-9);
        assert_eq!(some.durable_bonus[0], 0.0);
    }

    #[test]
    fn zero_plan_only_ticks() {
        let e = village_linear_economy();
        let mut s = state(vec![5.0, 6.0, 7.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        s.pending.push(Pending {
            ready_tick: 1,
            good: 2,
            amount: 3.0,
        });
        let plan = ExecutedPlan {
            x: vec![0.0; 8],
            coefficients: e.eval_matrix(&[0.0; 8]).unwrap(),
        };
        let (next, flows) = transition(&e, &s, &plan, &[]).unwrap();
        assert_eq!(next.tick, 1);
        assert_eq!(
            next.inventory,
            vec![5.0, 6.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert!(next.pending.is_empty());
        assert_eq!(flows.materialized[2], 3.0);
    }

    #[test]
    fn lead_time_delays_output() {
        let e = Economy::build(
            vec![("g".into(), GoodKind::Final)],
            vec![],
            vec![],
            Externalities::none(),
        )
        .unwrap();
        let produce = |x: f64| ExecutedPlan {
            x: vec![x],
            coefficients: e.eval_matrix(&[x]).unwrap(),
        };
        let s0 = state(vec![0.0]);
        let (s1, _) = transition(&e, &s0, &produce(5.0), &[2]).unwrap();
        assert_eq!(s1.inventory, vec![0.0]);
        assert_eq!(s1.pending.len(), 1);
        let (s2, f2) = transition(&e, &s1, &produce(0.0), &[2]).unwrap();
        assert_eq!(s2.tick, 2);
        assert_eq!(s2.inventory, vec![5.0]);
        assert_eq!(f2.materialized, vec![5.0]);
        assert!(s2.pending.iter().all(|p| p.ready_tick > s2.tick));
    }

    #[test]
    fn transition_conserves_village() {
        let (e, x, f) = village_plan();
        let inv = vec![5000.0, 2000.0, 50.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let s = state(inv.clone());
        let lambda = feasible_scale(&e, &s, &f, &x, None);
        let inv_split = apply_investment(&e, &x, lambda, 0.25);
        let exec = execution_vector(&e, &x, &inv_split);
        let plan = ExecutedPlan {
            x: exec.clone(),
            coefficients: f,
        };
        let (next, flows) = transition(&e, &s, &plan, &[]).unwrap();
        for i in 0..8 {
            if e.kind(i).is_durable() {
                assert_eq!(flows.consumed[i], 0.0);
            }
            let expect = inv[i] + flows.materialized[i] - flows.consumed[i];
            assert!((next.inventory[i] - expect).abs() <= 1e-9, "good {i}");
        }
        // Lucloelium drawn: 0.001 x_L + 1.0 x_T at the executed scale.
        let drawn = 0.001 * exec[0] + exec[2];
        assert!((flows.consumed[0] - drawn).abs() < 1e-9);
        assert!((flows.labour[3] - 0.001 * exec[0]).abs() < 1e-12);
        assert_eq!(next.inventory[3], 0.0);
    }

    #[test]
    fn overdraw_is_a_contract_violation() {
        let e = Economy::build(
            vec![
                ("a".into(), GoodKind::Industrial { durable: false }),
                ("b".into(), GoodKind::Final),
            ],
            vec![Entry::constant(0, 1, 1.0)],
            vec![],
            Externalities::none(),
        )
        .unwrap();
        let plan = ExecutedPlan {
            x: vec![0.0, 2.0],
            coefficients: e.eval_matrix(&[0.0, 2.0]).unwrap(),
        };
        assert!(matches!(
            transition(&e, &state(vec![1.0, 0.0]), &plan, &[]),
            Err(SimError::NegativeInventory { good: 0, .. })
        ));
    }

    fn stock(l: f64, t: f64) -> Vec<f64> {
        vec![l, 0.0, t, 0.0, 0.0, 0.0, 0.0, 0.0]
    }

    #[test]
    fn humanity_cases() {
        let e = village_linear_economy();
        // Claims: L 2400 + 1000, T 80 + 100.
        assert_eq!(humanity(&e, &stock(3400.0, 180.0)), 1.0);
        assert_eq!(humanity(&e, &stock(0.0, 0.0)), 0.0);
        // L pairs: 2000/2400 and 600/1000; T pairs 1.0.
        assert!((humanity(&e, &stock(3000.0, 180.0)) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn vacuous_plan_scores_one() {
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
        assert_eq!(humanity(&e, &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn delivery_rations_proportionally() {
        let e = village_linear_economy();
        let mut s = state(stock(1700.0, 1000.0));
        let d = deliver_and_score(&e, &mut s, 1.0);
        assert_eq!(d.humanity, 0.0);
        assert_eq!(d.delivered[0], 1700.0);
        assert_eq!(d.delivered[2], 180.0);
        assert_eq!(s.inventory[0], 0.0);
        assert_eq!(s.inventory[2], 820.0);
        let mut s = state(stock(1e5, 1e5));
        let d = deliver_and_score(&e, &mut s, 0.5);
        assert_eq!(d.delivered[0], 1700.0);
        assert_eq!(d.delivered[2], 90.0);
    }

    #[test]
    fn externalities_accumulate() {
        let ext = Externalities::new(vec!["smog".into()], vec![1.0], vec![(0, 0, 2.0)]).unwrap();
        let e = Economy::build(vec![("g".into(), GoodKind::Final)], vec![], vec![], ext).unwrap();
        let step = externality_step(&e, &[10.0]);
        assert_eq!(step, 20.0);
        assert_eq!((0..3).map(|_| step).sum::<f64>(), 60.0);

        let silent = Externalities::new(vec!["smog".into()], vec![0.0], vec![(0, 0, 2.0)]).unwrap();
        let e =
            Economy::build(vec![("g".into(), GoodKind::Final)], vec![], vec![], silent).unwrap();
        assert_eq!(externality_step(&e, &[10.0]), 0.0);
        let e = village_linear_economy();
        assert_eq!(externality_step(&e, &[1.0; 8]), 0.0);
    }

    #[test]
    fn reward_cases() {
        assert_eq!(reward(0.7, 50.0, 0.0), 0.7);
        assert!((reward(0.6, 20.0, 0.01) - 0.4).abs() < 1e-15);
        assert_eq!(reward(0.0, 0.0, 0.3), 0.0);
    }

    #[test]
    fn noise_cases() {
        let mut rng = SimRng::new(3);
        let mut s = state(vec![10.0, 4.0]);
        let quiet = NoiseConfig {
            probability: 0.0,
            loss_min: 0.2,
            loss_max: 0.5,
        };
        assert_eq!(apply_noise(&mut s, &quiet, &mut rng), vec![0.0, 0.0]);
        assert_eq!(s.inventory, vec![10.0, 4.0]);
        let certain = NoiseConfig {
            probability: 1.0,
            loss_min: 0.5,
            loss_max: 0.5,
        };
        let lost = apply_noise(&mut s, &certain, &mut rng);
        assert_eq!(s.inventory, vec![5.0, 2.0]);
        assert_eq!(lost, vec![5.0, 2.0]);
    }
}
