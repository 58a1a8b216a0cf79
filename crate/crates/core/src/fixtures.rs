//! Bundled scenarios.

use crate::economy::{Economy, Entry, Externalities, GoodKind};

/// File name under which the alien-village scenario is bundled.
pub const VILLAGE_NAME: &str = "village.olin";
/// The alien village with production-dependent pick coefficients.
pub const VILLAGE: &str = include_str!("../fixtures/village.olin");

/// File name of the constant-coefficient variant.
pub const VILLAGE_LINEAR_NAME: &str = "village_linear.olin";
/// The alien village with both production-dependent coefficients set to zero.
pub const VILLAGE_LINEAR: &str = include_str!("../fixtures/village_linear.olin");

/// Seed under which the noisy village runs are compared.
pub const VILLAGE_NOISE_SEED: u64 = 7;
/// Investment share too small for the village to outgrow its losses.
pub const VILLAGE_THETA_LOW: f64 = 0.01;
/// Investment share at which the village becomes self-sustaining.
pub const VILLAGE_THETA_HIGH: f64 = 0.3;

/// Looks a bundled scenario up by file name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        VILLAGE_NAME => Some(VILLAGE),
        VILLAGE_LINEAR_NAME => Some(VILLAGE_LINEAR),
        _ => None,
    }
}

/// The village economy built directly in code, without the two
/// production-dependent entries. Goods are, in order: Lucloelium (final),
/// Vorpal Pick +1 (durable industrial), T-ring (final), three labour rows,
/// and two profiles of 800 and 500 citizens.
pub fn village_linear_economy() -> Economy {
    let goods = vec![
        ("Lucloelium".to_string(), GoodKind::Final),
        (
            "Vorpal Pick +1".to_string(),
            GoodKind::Industrial { durable: true },
        ),
        ("T-ring".to_string(), GoodKind::Final),
        ("Lb(Lucloelium)".to_string(), GoodKind::Labour),
        ("Lb(Vorpal Pick +1)".to_string(), GoodKind::Labour),
        ("Lb(T-ring)".to_string(), GoodKind::Labour),
        ("Profile 0".to_string(), GoodKind::Profile),
        ("Profile 1".to_string(), GoodKind::Profile),
    ];
    let entries = vec![
        Entry::constant(0, 0, 0.001),
        Entry::constant(1, 0, 0.5),
        Entry::constant(3, 0, 0.001),
        Entry::constant(4, 1, 0.012),
        Entry::constant(0, 2, 1.0),
        Entry::constant(5, 2, 0.001),
        Entry::constant(0, 6, 3.0),
        Entry::constant(2, 6, 0.1),
        Entry::constant(0, 7, 2.0),
        Entry::constant(2, 7, 0.2),
    ];
    Economy::build(
        goods,
        entries,
        vec![(6, 800.0), (7, 500.0)],
        Externalities::none(),
    )
    .expect("village economy is valid")
}
