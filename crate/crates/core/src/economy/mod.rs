//! Goods, technical coefficients, consumption profiles and externalities.
//!
//! Entry `(i, j)` of the coefficient matrix is the quantity of good `i`
//! needed per unit of good `j`. Profiles are columns too: a profile's column
//! lists what one citizen assigned to it receives, and its demand entry is
//! the number of such citizens.

pub mod coeff_fn;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use coeff_fn::{
    aggregate_units, fit_coeff_fn, CoeffFn, CoeffFnError, Extrapolation, ProductionUnitSpec,
};

use crate::matrix::{CoeffMatrix, CscMatrix};

/// Dense index of a good within one [`Economy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GoodId(pub usize);

impl fmt::Display for GoodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoodKind {
    /// Consumed (or, when durable, held as capacity) by production.
    Industrial { durable: bool },
    /// Consumed by citizen profiles.
    Final,
    /// Work hours; tracked, never produced into stock.
    Labour,
    /// A consumption basket; its demand is the head count.
    Profile,
}

impl GoodKind {
    pub fn is_durable(self) -> bool {
        matches!(self, GoodKind::Industrial { durable: true })
    }

    /// Industrial and final goods are the ones that end up in inventory.
    pub fn is_producible(self) -> bool {
        matches!(self, GoodKind::Industrial { .. } | GoodKind::Final)
    }

    pub fn label(self) -> &'static str {
        match self {
            GoodKind::Industrial { .. } => "industrial",
            GoodKind::Final => "final",
            GoodKind::Labour => "labour",
            GoodKind::Profile => "profile",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Good {
    pub id: GoodId,
    pub name: String,
    pub kind: GoodKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoeffEntry {
    Constant(f64),
    Functional(CoeffFn),
}

impl CoeffEntry {
    /// Value at the producing column's output level `x_out`.
    pub fn eval(&self, x_out: f64) -> Result<f64, CoeffFnError> {
        match self {
            CoeffEntry::Constant(v) => Ok(*v),
            CoeffEntry::Functional(f) => f.eval(x_out),
        }
    }

    pub fn derivative(&self, x_out: f64) -> Result<f64, CoeffFnError> {
        match self {
            CoeffEntry::Constant(_) => Ok(0.0),
            CoeffEntry::Functional(f) => f.derivative(x_out),
        }
    }
}

/// One listed coefficient: `input` units needed per unit of `output`.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub input: usize,
    pub output: usize,
    pub coeff: CoeffEntry,
}

impl Entry {
    pub fn constant(input: usize, output: usize, value: f64) -> Self {
        Self {
            input,
            output,
            coeff: CoeffEntry::Constant(value),
        }
    }

    pub fn functional(input: usize, output: usize, f: CoeffFn) -> Self {
        Self {
            input,
            output,
            coeff: CoeffEntry::Functional(f),
        }
    }
}

/// Constant per-unit emissions `e` (kind × good) and per-kind weights `ρ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Externalities {
    kinds: Vec<String>,
    weights: Vec<f64>,
    /// Per kind, `(good, emission per unit produced)` sorted by good.
    emissions: Vec<Vec<(usize, f64)>>,
}

impl Externalities {
    pub fn none() -> Self {
        Self::default()
    }

    /// `emissions` holds `(kind index, good index, per-unit emission)`.
    pub fn new(
        kinds: Vec<String>,
        weights: Vec<f64>,
        emissions: Vec<(usize, usize, f64)>,
    ) -> Result<Self, ModelError> {
        if kinds.len() != weights.len() {
            return Err(ModelError::ExternalityShape {
                kinds: kinds.len(),
                weights: weights.len(),
            });
        }
        let mut seen = HashMap::new();
        for (k, name) in kinds.iter().enumerate() {
            if seen.insert(name.as_str(), k).is_some() {
                return Err(ModelError::DuplicateExternality(name.clone()));
            }
            if !(weights[k].is_finite() && weights[k] >= 0.0) {
                return Err(ModelError::NegativeWeight {
                    kind: name.clone(),
                    value: weights[k],
                });
            }
        }
        let mut per_kind = vec![Vec::new(); kinds.len()];
        for (kind, good, value) in emissions {
            if kind >= kinds.len() {
                return Err(ModelError::UnknownExternalityKind(kind));
            }
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::NegativeEmission {
                    kind: kinds[kind].clone(),
                    good,
                    value,
                });
            }
            per_kind[kind].push((good, value));
        }
        for list in &mut per_kind {
            list.sort_by_key(|&(g, _)| g);
            if let Some(w) = list.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(ModelError::DuplicateEmission { good: w[0].0 });
            }
            list.retain(|&(_, v)| v != 0.0);
        }
        Ok(Self {
            kinds,
            weights,
            emissions: per_kind,
        })
    }

    pub fn kinds(&self) -> &[String] {
        &self.kinds
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Non-zero `(good, emission)` pairs of kind `k`.
    pub fn emissions(&self, k: usize) -> &[(usize, f64)] {
        &self.emissions[k]
    }

    pub fn emission(&self, k: usize, good: usize) -> f64 {
        self.emissions[k]
            .binary_search_by_key(&good, |&(g, _)| g)
            .map(|i| self.emissions[k][i].1)
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("economy must contain at least one good")]
    NoGoods,
    #[error("good names must be non-empty")]
    EmptyName,
    #[error("duplicate good name {0:?}")]
    DuplicateName(String),
    #[error("coefficient ({input}, {output}) refers to a good outside 0..{n}")]
    EntryOutOfRange {
        input: usize,
        output: usize,
        n: usize,
    },
    #[error("coefficient ({input}, {output}) listed twice")]
    DuplicateEntry { input: usize, output: usize },
    #[error("coefficient ({input}, {output}) = {value} must be finite and >= 0")]
    NegativeCoefficient {
        input: usize,
        output: usize,
        value: f64,
    },
    #[error("labour column {output} must be all zero (found entry in row {input})")]
    LabourColumn { input: usize, output: usize },
    #[error("profile column {output} may only draw on final goods and labour (row {input})")]
    ProfileRow { input: usize, output: usize },
    #[error("profile column {output} must hold constant amounts (row {input})")]
    FunctionalProfile { input: usize, output: usize },
    #[error("profile good {input} cannot be an input (column {output})")]
    ProfileInput { input: usize, output: usize },
    #[error("population given for good {good}, which is not a profile")]
    PopulationOnNonProfile { good: usize },
    #[error("population of profile {good} must be finite and >= 0, got {value}")]
    NegativePopulation { good: usize, value: f64 },
    #[error("{kinds} externality kinds but {weights} weights")]
    ExternalityShape { kinds: usize, weights: usize },
    #[error("duplicate externality kind {0:?}")]
    DuplicateExternality(String),
    #[error("externality kind index {0} is undefined")]
    UnknownExternalityKind(usize),
    #[error("weight of externality {kind:?} must be finite and >= 0, got {value}")]
    NegativeWeight { kind: String, value: f64 },
    #[error("emission of {kind:?} by good {good} must be finite and >= 0, got {value}")]
    NegativeEmission {
        kind: String,
        good: usize,
        value: f64,
    },
    #[error("emission for good {good} listed twice")]
    DuplicateEmission { good: usize },
    #[error("emission refers to good {good} outside the economy")]
    EmissionOutOfRange { good: usize },
    #[error("output vector has length {got}, economy has {expected} goods")]
    Dimension { expected: usize, got: usize },
    #[error("coefficient ({input}, {output}) failed to evaluate: {source}")]
    Evaluation {
        input: usize,
        output: usize,
        source: CoeffFnError,
    },
}

/// A validated economy. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Economy {
    goods: Vec<Good>,
    /// Per output column, `(input row, entry)` sorted by row.
    columns: Vec<Vec<(usize, CoeffEntry)>>,
    /// Citizen count per good; zero for everything but profiles.
    population: Vec<f64>,
    externalities: Externalities,
}

impl Economy {
    /// Validates and assembles an economy. Unlisted coefficients are zero,
    /// as are constant entries listed with value zero.
    pub fn build(
        goods: Vec<(String, GoodKind)>,
        entries: Vec<Entry>,
        populations: Vec<(usize, f64)>,
        externalities: Externalities,
    ) -> Result<Self, ModelError> {
        if goods.is_empty() {
            return Err(ModelError::NoGoods);
        }
        let n = goods.len();
        let mut names = HashMap::with_capacity(n);
        for (name, _) in &goods {
            if name.trim().is_empty() {
                return Err(ModelError::EmptyName);
            }
            if names.insert(name.as_str(), ()).is_some() {
                return Err(ModelError::DuplicateName(name.clone()));
            }
        }
        let goods: Vec<Good> = goods
            .into_iter()
            .enumerate()
            .map(|(i, (name, kind))| Good {
                id: GoodId(i),
                name,
                kind,
            })
            .collect();

        let mut columns: Vec<Vec<(usize, CoeffEntry)>> = vec![Vec::new(); n];
        for Entry {
            input,
            output,
            coeff,
        } in entries
        {
            if input >= n || output >= n {
                return Err(ModelError::EntryOutOfRange { input, output, n });
            }
            if let CoeffEntry::Constant(value) = coeff {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(ModelError::NegativeCoefficient {
                        input,
                        output,
                        value,
                    });
                }
                if value == 0.0 {
                    continue;
                }
            }
            match goods[output].kind {
                GoodKind::Labour => return Err(ModelError::LabourColumn { input, output }),
                GoodKind::Profile => {
                    if !matches!(goods[input].kind, GoodKind::Final | GoodKind::Labour) {
                        return Err(ModelError::ProfileRow { input, output });
                    }
                    if matches!(coeff, CoeffEntry::Functional(_)) {
                        return Err(ModelError::FunctionalProfile { input, output });
                    }
                }
                _ => {}
            }
            if goods[input].kind == GoodKind::Profile {
                return Err(ModelError::ProfileInput { input, output });
            }
            columns[output].push((input, coeff));
        }
        for (output, col) in columns.iter_mut().enumerate() {
            col.sort_by_key(|(r, _)| *r);
            if let Some(w) = col.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(ModelError::DuplicateEntry {
                    input: w[0].0,
                    output,
                });
            }
        }

        let mut population = vec![0.0; n];
        for (good, value) in populations {
            if good >= n || goods[good].kind != GoodKind::Profile {
                return Err(ModelError::PopulationOnNonProfile { good });
            }
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::NegativePopulation { good, value });
            }
            population[good] = value;
        }

        for k in 0..externalities.kinds().len() {
            if let Some(&(good, _)) = externalities.emissions(k).iter().find(|(g, _)| *g >= n) {
                return Err(ModelError::EmissionOutOfRange { good });
            }
        }

        Ok(Self {
            goods,
            columns,
            population,
            externalities,
        })
    }

    pub fn n(&self) -> usize {
        self.goods.len()
    }

    pub fn goods(&self) -> &[Good] {
        &self.goods
    }

    pub fn kind(&self, j: usize) -> GoodKind {
        self.goods[j].kind
    }

    pub fn name(&self, j: usize) -> &str {
        &self.goods[j].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.goods.iter().position(|g| g.name == name)
    }

    /// Listed entries of column `j` as `(input row, entry)`.
    pub fn column(&self, j: usize) -> &[(usize, CoeffEntry)] {
        &self.columns[j]
    }

    pub fn entry(&self, i: usize, j: usize) -> Option<&CoeffEntry> {
        self.columns[j]
            .binary_search_by_key(&i, |(r, _)| *r)
            .ok()
            .map(|k| &self.columns[j][k].1)
    }

    /// All listed entries in column-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &CoeffEntry)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(j, col)| col.iter().map(move |(i, e)| (*i, j, e)))
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn population(&self, j: usize) -> f64 {
        self.population[j]
    }

    pub fn externalities(&self) -> &Externalities {
        &self.externalities
    }

    pub fn indices_of(&self, pred: impl Fn(GoodKind) -> bool) -> Vec<usize> {
        self.goods
            .iter()
            .filter(|g| pred(g.kind))
            .map(|g| g.id.0)
            .collect()
    }

    pub fn final_goods(&self) -> Vec<usize> {
        self.indices_of(|k| k == GoodKind::Final)
    }

    pub fn profiles(&self) -> Vec<usize> {
        self.indices_of(|k| k == GoodKind::Profile)
    }

    /// Demand for planning against profiles: the head count at each profile
    /// row, zero elsewhere.
    pub fn profile_demand(&self) -> Vec<f64> {
        self.population.clone()
    }

    /// True when every entry is a constant.
    pub fn is_linear(&self) -> bool {
        self.entries()
            .all(|(_, _, e)| matches!(e, CoeffEntry::Constant(_)))
    }

    /// Producible columns whose constant producible-row entries sum to 1 or
    /// more. An empty list is sufficient (not necessary) for the economy to
    /// be productive.
    pub fn heavy_columns(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&j| self.kind(j).is_producible())
            .filter(|&j| {
                let sum: f64 = self.columns[j]
                    .iter()
                    .filter(|(i, _)| self.kind(*i).is_producible())
                    .filter_map(|(_, e)| match e {
                        CoeffEntry::Constant(v) => Some(*v),
                        CoeffEntry::Functional(_) => None,
                    })
                    .sum();
                sum >= 1.0
            })
            .collect()
    }

    fn check_len(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.n() {
            return Err(ModelError::Dimension {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn evaluate_with(
        &self,
        x: &[f64],
        skip_constants: bool,
        eval: impl Fn(&CoeffEntry, f64) -> Result<f64, CoeffFnError>,
    ) -> Result<CoeffMatrix, ModelError> {
        self.check_len(x)?;
        let mut columns = Vec::with_capacity(self.n());
        for (j, col) in self.columns.iter().enumerate() {
            let mut out = Vec::with_capacity(col.len());
            for (i, e) in col {
                if skip_constants && matches!(e, CoeffEntry::Constant(_)) {
                    continue;
                }
                let v = eval(e, x[j]).map_err(|source| ModelError::Evaluation {
                    input: *i,
                    output: j,
                    source,
                })?;
                out.push((*i, v));
            }
            columns.push(out);
        }
        Ok(CoeffMatrix::from_csc(CscMatrix::from_columns(
            self.n(),
            columns,
        )))
    }

    /// `F(x)`: constants as listed, functional entries evaluated at the
    /// producing column's output `x_j`.
    pub fn eval_matrix(&self, x: &[f64]) -> Result<CoeffMatrix, ModelError> {
        self.evaluate_with(x, false, CoeffEntry::eval)
    }

    /// `F'(x)`: slope of each functional entry at `x_j`, zero for constants.
    pub fn eval_matrix_derivative(&self, x: &[f64]) -> Result<CoeffMatrix, ModelError> {
        self.evaluate_with(x, true, CoeffEntry::derivative)
    }
}
