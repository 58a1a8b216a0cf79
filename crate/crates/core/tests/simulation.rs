mod common;

use natura::economy::GoodKind;
use natura::fixtures::village_linear_economy;
use natura::sim::{
    discounted_return, humanity, run_simulation, NoiseConfig, Pending, SimConfig, SimState,
};
use natura::{Economy, Entry, Externalities};
use proptest::prelude::*;

use common::sim::{conservation, durables_hold, externality_additive, village};

fn noisy(theta: f64, seed: u64) -> SimConfig {
    SimConfig {
        theta,
        rng_seed: seed,
        horizon: 200,
        noise: NoiseConfig {
            probability: 0.05,
            loss_min: 0.2,
            loss_max: 0.5,
        },
        ..village().sim
    }
}

#[test]
fn returns_are_recomputable() {
    let s = village();
    let t = run_simulation(&s.economy, s.initial.clone(), &noisy(0.2, 4)).unwrap();
    assert_eq!(t.reports.len(), 200);
    let again = discounted_return(t.reports.iter().map(|r| r.reward), s.sim.gamma);
    assert_eq!(again, t.discounted_return);
}

#[test]
fn reward_pays_for_emissions() {
    let s = village();
    let cfg = SimConfig {
        lambda_ext: 0.5,
        horizon: 30,
        theta: 0.3,
        ..s.sim.clone()
    };
    let t = run_simulation(&s.economy, s.initial.clone(), &cfg).unwrap();
    for r in &t.reports {
        assert_eq!(r.reward, r.humanity - 0.5 * r.externality_step);
    }
    assert!(t.reports.iter().any(|r| r.externality_step > 0.0));
}

#[test]
fn ticks_count_up_and_scales_are_ordered() {
    let s = village();
    let t = run_simulation(&s.economy, s.initial.clone(), &noisy(0.3, 1)).unwrap();
    for (k, r) in t.reports.iter().enumerate() {
        assert_eq!(r.tick, k as u64);
        assert!(0.0 <= r.delivery_scale && r.delivery_scale <= r.lambda_max && r.lambda_max <= 1.0);
        assert!(r.inventory_after.iter().all(|v| *v >= 0.0));
        for (e, p) in r.executed_x.iter().zip(&r.planned_x) {
            assert!(*e <= *p);
        }
    }
}

#[test]
fn lead_time_delays_stock() {
    let e = Economy::build(
        vec![
            ("bread".into(), GoodKind::Final),
            ("eaters".into(), GoodKind::Profile),
        ],
        vec![Entry::constant(0, 1, 1.0)],
        vec![(1, 5.0)],
        Externalities::none(),
    )
    .unwrap();
    let cfg = SimConfig {
        horizon: 4,
        lead_time: vec![2, 0],
        ..SimConfig::default()
    };
    let t = run_simulation(&e, SimState::new(vec![0.0, 0.0]), &cfg).unwrap();
    let made: Vec<f64> = t.reports.iter().map(|r| r.materialized[0]).collect();
    assert_eq!(made, vec![0.0, 5.0, 5.0, 5.0]);
    let hu: Vec<f64> = t.reports.iter().map(|r| r.humanity).collect();
    assert_eq!(hu, vec![0.0, 1.0, 1.0, 1.0]);
    conservation(&t, 0.0).unwrap();
}

#[test]
fn pending_lots_in_initial_state_are_released() {
    let e = village_linear_economy();
    let mut s = SimState::new(vec![0.0; 8]);
    s.pending.push(Pending {
        ready_tick: 1,
        good: 1,
        amount: 50.0,
    });
    let cfg = SimConfig {
        horizon: 2,
        ..SimConfig::default()
    };
    let t = run_simulation(&e, s, &cfg).unwrap();
    assert_eq!(t.reports[0].inventory_after[1], 50.0);
    conservation(&t, 1e-9).unwrap();
}

#[test]
fn labour_cap_limits_scale() {
    let e = village_linear_economy();
    let x = natura::sim::plan_tick(&e, &SimConfig::default()).unwrap().x;
    let mut caps = vec![f64::INFINITY; 8];
    caps[4] = 0.25 * 0.012 * x[1];
    let cfg = SimConfig {
        horizon: 1,
        labour_cap: Some(caps),
        ..SimConfig::default()
    };
    let t = run_simulation(&e, SimState::new(vec![1e9; 8]), &cfg).unwrap();
    assert!((t.reports[0].lambda_max - 0.25).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariants_hold_under_noise(seed in any::<u64>(), theta in 0.0f64..=1.0, p in 0.0f64..0.3) {
        let s = village();
        let cfg = SimConfig {
            noise: NoiseConfig { probability: p, loss_min: 0.1, loss_max: 0.6 },
            horizon: 120,
            ..noisy(theta, seed)
        };
        let t = run_simulation(&s.economy, s.initial.clone(), &cfg).unwrap();
        prop_assert!(conservation(&t, 1e-9).is_ok());
        prop_assert!(externality_additive(&t).is_ok());
        let again = run_simulation(&s.economy, s.initial.clone(), &cfg).unwrap();
        prop_assert_eq!(t, again);
    }

    #[test]
    fn durables_never_shrink_without_noise(theta in 0.0f64..=1.0, pick in 0.0f64..3000.0) {
        let s = village();
        let mut initial = s.initial.clone();
        initial.inventory[1] = pick;
        let cfg = SimConfig { theta, horizon: 60, ..s.sim.clone() };
        let t = run_simulation(&s.economy, initial, &cfg).unwrap();
        prop_assert!(durables_hold(&t, &[1]).is_ok());
    }

    #[test]
    fn humanity_is_monotone_in_stock(
        l in 0.0f64..5000.0,
        t in 0.0f64..400.0,
        extra in 0.0f64..1000.0,
        which in 0usize..2,
    ) {
        let e = village_linear_economy();
        let base = vec![l, 0.0, t, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut more = base.clone();
        more[[0, 2][which]] += extra;
        let (h0, h1) = (humanity(&e, &base), humanity(&e, &more));
        prop_assert!(h1 >= h0);
        prop_assert!(h0 >= 0.0);
    }

    #[test]
    fn zero_gamma_returns_first_reward(seed in any::<u64>()) {
        let s = village();
        let cfg = SimConfig { gamma: 0.0, horizon: 5, ..noisy(0.3, seed) };
        let t = run_simulation(&s.economy, s.initial.clone(), &cfg).unwrap();
        prop_assert_eq!(t.discounted_return, t.reports[0].reward);
    }
}
