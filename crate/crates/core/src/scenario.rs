//! Scenario files (`.olin`): a TOML document describing goods,
//! coefficients, citizen profiles, externalities, starting stock and
//! simulation settings.
//!
//! ```toml
//! schema_version = 1
//!
//! [[goods]]
//! name = "bread"
//! kind = "final"
//!
//! [[goods]]
//! name = "oven"
//! kind = "industrial"
//! durable = true
//!
//! [[coefficients]]
//! input = "oven"
//! output = "bread"
//! value = 0.01
//!
//! [[profiles]]
//! name = "adults"
//! population = 100.0
//!
//! [profiles.consumption]
//! bread = 2.0
//! ```
//!
//! Profiles become goods of kind profile, appended after the listed goods
//! in file order. A coefficient carries either `value` or `breakpoints`
//! (`[[level, per-unit], ...]`, optional `extrapolation`).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economy::{
    CoeffEntry, CoeffFn, Economy, Entry, Externalities, Extrapolation, GoodKind, ModelError,
};
use crate::fixtures;
use crate::sim::{NoiseConfig, SimConfig, SimError, SimState};
use crate::solver::{Method, SolverConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("schema_version {found} is not supported (expected {SCHEMA_VERSION})")]
    Version { found: u32 },
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("invalid economy: {0}")]
    Model(#[from] ModelError),
    #[error("invalid sim section: {0}")]
    Sim(#[from] SimError),
    #[error("cannot serialize scenario: {0}")]
    Serialize(String),
}

fn field(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Field {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindSpec {
    Industrial,
    Final,
    Labour,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodSpec {
    pub name: String,
    pub kind: KindSpec,
    #[serde(default, skip_serializing_if = "is_false")]
    pub durable: bool,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub lead_time: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffSpec {
    pub input: String,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrapolation: Option<Extrapolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub name: String,
    pub population: f64,
    #[serde(default)]
    pub consumption: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionSpec {
    pub kind: String,
    pub good: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalitySpec {
    pub kinds: Vec<String>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub coefficients: Vec<EmissionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    /// Absent: direct for constant coefficients, fixed-point otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            method: None,
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub horizon: usize,
    pub theta: f64,
    pub gamma: f64,
    pub lambda_ext: f64,
    pub seed: u64,
    pub noise: NoiseConfig,
    pub solver: SolverSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labour_cap: Option<BTreeMap<String, f64>>,
}

impl Default for SimSpec {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            horizon: d.horizon,
            theta: d.theta,
            gamma: d.gamma,
            lambda_ext: d.lambda_ext,
            seed: d.rng_seed,
            noise: d.noise,
            solver: SolverSpec::default(),
            labour_cap: None,
        }
    }
}

/// The document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub goods: Vec<GoodSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coefficients: Vec<CoeffSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<ProfileSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub externalities: Option<ExternalitySpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub initial_inventory: BTreeMap<String, f64>,
    #[serde(default)]
    pub sim: SimSpec,
}

/// A validated scenario, ready to solve or simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub economy: Economy,
    pub sim: SimConfig,
    pub initial: SimState,
}

impl Scenario {
    pub fn from_str(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn from_file(file: &ScenarioFile) -> Result<Self, ScenarioError> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Version {
                found: file.schema_version,
            });
        }
        if file.goods.is_empty() {
            return Err(field("goods", "goods must be non-empty"));
        }

        let mut goods = Vec::with_capacity(file.goods.len() + file.profiles.len());
        for (i, g) in file.goods.iter().enumerate() {
            let kind = match (g.kind, g.durable) {
                (KindSpec::Industrial, durable) => GoodKind::Industrial { durable },
                (KindSpec::Final, false) => GoodKind::Final,
                (KindSpec::Labour, false) => GoodKind::Labour,
                (_, true) => {
                    return Err(field(
                        format!("goods[{i}].durable"),
                        "only industrial goods can be durable",
                    ))
                }
            };
            if g.lead_time > 0 && kind == GoodKind::Labour {
                return Err(field(
                    format!("goods[{i}].lead_time"),
                    "labour has no lead time",
                ));
            }
            goods.push((g.name.clone(), kind));
        }
        for p in &file.profiles {
            goods.push((p.name.clone(), GoodKind::Profile));
        }

        let mut index = HashMap::with_capacity(goods.len());
        for (i, (name, _)) in goods.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                let path = if i < file.goods.len() {
                    format!("goods[{i}].name")
                } else {
                    format!("profiles[{}].name", i - file.goods.len())
                };
                return Err(field(path, format!("duplicate name \"{name}\"")));
            }
        }
        let lookup = |path: String, name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| field(path, format!("unknown good \"{name}\"")))
        };

        let mut entries = Vec::new();
        for (k, c) in file.coefficients.iter().enumerate() {
            let at = |f: &str| format!("coefficients[{k}].{f}");
            let input = lookup(at("input"), &c.input)?;
            let output = lookup(at("output"), &c.output)?;
            if output >= file.goods.len() {
                return Err(field(
                    at("output"),
                    "profile consumption belongs in [[profiles]]",
                ));
            }
            let coeff = match (c.value, &c.breakpoints) {
                (Some(v), None) => {
                    if c.extrapolation.is_some() {
                        return Err(field(
                            at("extrapolation"),
                            "only meaningful with breakpoints",
                        ));
                    }
                    CoeffEntry::Constant(v)
                }
                (None, Some(bp)) => {
                    let points = bp.iter().map(|p| (p[0], p[1])).collect();
                    let f = CoeffFn::new(points, c.extrapolation.unwrap_or_default())
                        .map_err(|e| field(at("breakpoints"), e.to_string()))?;
                    CoeffEntry::Functional(f)
                }
                _ => {
                    return Err(field(
                        format!("coefficients[{k}]"),
                        "exactly one of value or breakpoints is required",
                    ))
                }
            };
            entries.push(Entry {
                input,
                output,
                coeff,
            });
        }

        let mut populations = Vec::new();
        for (k, p) in file.profiles.iter().enumerate() {
            let column = file.goods.len() + k;
            populations.push((column, p.population));
            for (name, &amount) in &p.consumption {
                let input = lookup(format!("profiles[{k}].consumption.{name}"), name)?;
                entries.push(Entry::constant(input, column, amount));
            }
        }

        let externalities = match &file.externalities {
            None => Externalities::none(),
            Some(x) => {
                let mut list = Vec::with_capacity(x.coefficients.len());
                for (k, e) in x.coefficients.iter().enumerate() {
                    let kind = x.kinds.iter().position(|n| *n == e.kind).ok_or_else(|| {
                        field(
                            format!("externalities.coefficients[{k}].kind"),
                            format!("unknown externality kind \"{}\"", e.kind),
                        )
                    })?;
                    let good = lookup(format!("externalities.coefficients[{k}].good"), &e.good)?;
                    list.push((kind, good, e.value));
                }
                Externalities::new(x.kinds.clone(), x.weights.clone(), list)?
            }
        };

        let economy = Economy::build(goods, entries, populations, externalities)?;
        let n = economy.n();

        let mut inventory = vec![0.0; n];
        for (name, &amount) in &file.initial_inventory {
            let i = lookup(format!("initial_inventory.{name}"), name)?;
            if !(amount.is_finite() && amount >= 0.0) {
                return Err(field(
                    format!("initial_inventory.{name}"),
                    "must be finite and >= 0",
                ));
            }
            inventory[i] = amount;
        }

        let s = &file.sim;
        let mut lead_time = vec![0; n];
        for (i, g) in file.goods.iter().enumerate() {
            lead_time[i] = g.lead_time;
        }
        let labour_cap = match &s.labour_cap {
            None => None,
            Some(caps) => {
                let mut v = vec![f64::INFINITY; n];
                for (name, &cap) in caps {
                    let i = lookup(format!("sim.labour_cap.{name}"), name)?;
                    if economy.kind(i) != GoodKind::Labour {
                        return Err(field(format!("sim.labour_cap.{name}"), "not a labour good"));
                    }
                    v[i] = cap;
                }
                Some(v)
            }
        };
        let method = s.solver.method.unwrap_or(if economy.is_linear() {
            Method::DirectSparse
        } else {
            Method::FixedPoint
        });
        let sim = SimConfig {
            horizon: s.horizon,
            theta: s.theta,
            gamma: s.gamma,
            lead_time,
            noise: s.noise,
            lambda_ext: s.lambda_ext,
            rng_seed: s.seed,
            solver: SolverConfig {
                tolerance: s.solver.tolerance,
                max_iterations: s.solver.max_iterations,
                method,
            },
            labour_cap,
        };
        sim.validate(&economy)?;

        Ok(Self {
            economy,
            sim,
            initial: SimState::new(inventory),
        })
    }

    /// The document that parses back to this scenario. Profiles must come
    /// after all other goods.
    pub fn to_file(&self) -> Result<ScenarioFile, ScenarioError> {
        let e = &self.economy;
        let n_goods = (0..e.n())
            .position(|i| e.kind(i) == GoodKind::Profile)
            .unwrap_or(e.n());
        if (n_goods..e.n()).any(|i| e.kind(i) != GoodKind::Profile) {
            return Err(ScenarioError::Serialize(
                "profiles must follow all other goods".into(),
            ));
        }

        let goods = (0..n_goods)
            .map(|i| GoodSpec {
                name: e.name(i).to_string(),
                kind: match e.kind(i) {
                    GoodKind::Industrial { .. } => KindSpec::Industrial,
                    GoodKind::Final => KindSpec::Final,
                    _ => KindSpec::Labour,
                },
                durable: e.kind(i).is_durable(),
                lead_time: self.sim.lead_time.get(i).copied().unwrap_or(0),
            })
            .collect();

        let coefficients = e
            .entries()
            .filter(|(_, j, _)| *j < n_goods)
            .map(|(i, j, c)| {
                let (value, breakpoints, extrapolation) = match c {
                    CoeffEntry::Constant(v) => (Some(*v), None, None),
                    CoeffEntry::Functional(f) => (
                        None,
                        Some(f.breakpoints().iter().map(|&(x, y)| [x, y]).collect()),
                        Some(f.extrapolation()),
                    ),
                };
                CoeffSpec {
                    input: e.name(i).to_string(),
                    output: e.name(j).to_string(),
                    value,
                    breakpoints,
                    extrapolation,
                }
            })
            .collect();

        let profiles = (n_goods..e.n())
            .map(|j| ProfileSpec {
                name: e.name(j).to_string(),
                population: e.population(j),
                consumption: e
                    .column(j)
                    .iter()
                    .filter_map(|(i, c)| match c {
                        CoeffEntry::Constant(v) => Some((e.name(*i).to_string(), *v)),
                        CoeffEntry::Functional(_) => None,
                    })
                    .collect(),
            })
            .collect();

        let x = e.externalities();
        let externalities = (!x.kinds().is_empty()).then(|| ExternalitySpec {
            kinds: x.kinds().to_vec(),
            weights: x.weights().to_vec(),
            coefficients: (0..x.kinds().len())
                .flat_map(|k| {
                    x.emissions(k).iter().map(move |&(g, v)| EmissionSpec {
                        kind: x.kinds()[k].clone(),
                        good: e.name(g).to_string(),
                        value: v,
                    })
                })
                .collect(),
        });

        let initial_inventory = self
            .initial
            .inventory
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (e.name(i).to_string(), *v))
            .collect();

        let s = &self.sim;
        if s.rng_seed > i64::MAX as u64 {
            return Err(ScenarioError::Serialize(
                "seed does not fit a TOML integer".into(),
            ));
        }
        let labour_cap = s.labour_cap.as_ref().map(|caps| {
            caps.iter()
                .enumerate()
                .filter(|(i, c)| e.kind(*i) == GoodKind::Labour && c.is_finite())
                .map(|(i, c)| (e.name(i).to_string(), *c))
                .collect()
        });
        let sim = SimSpec {
            horizon: s.horizon,
            theta: s.theta,
            gamma: s.gamma,
            lambda_ext: s.lambda_ext,
            seed: s.rng_seed,
            noise: s.noise,
            solver: SolverSpec {
                method: Some(s.solver.method),
                tolerance: s.solver.tolerance,
                max_iterations: s.solver.max_iterations,
            },
            labour_cap,
        };

        Ok(ScenarioFile {
            schema_version: SCHEMA_VERSION,
            goods,
            coefficients,
            profiles,
            externalities,
            initial_inventory,
            sim,
        })
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(&self.to_file()?).map_err(|e| ScenarioError::Serialize(e.to_string()))
    }
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_str(&text)
}

/// Like [`parse_scenario`], but a missing path whose file name matches a
/// bundled scenario loads the bundled copy.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    if !path.exists() {
        let bundled = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(fixtures::bundled);
        if let Some(text) = bundled {
            return Scenario::from_str(text);
        }
    }
    parse_scenario(path)
}
