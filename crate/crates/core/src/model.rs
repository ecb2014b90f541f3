//! Relations, package queries and their linear-algebra form.
//!
//! A package query selects a multiset of tuples. With one integer variable
//! per tuple (its multiplicity) every global COUNT/SUM/AVG predicate becomes
//! a bounded linear row, and the objective becomes a cost vector. The
//! [`QueryModel`] is the relation-independent compiled query; calling
//! [`QueryModel::formulate`] on a set of tuple ids yields a
//! [`NormalizedQuery`] whose variables are exactly those tuples.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when checking SUM/AVG rows of a package.
pub const ROW_TOLERANCE: f64 = 1e-6;

/// Shift applied to both objectives when computing the integrality gap.
pub const GAP_EPSILON: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("column `{name}` has {got} values, expected {expected}")]
    RaggedColumn {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("duplicate attribute name `{0}`")]
    DuplicateAttribute(String),
    #[error("non-finite value in column `{name}` at row {row}")]
    NonFinite { name: String, row: usize },
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("constraint on {0} has lower bound above upper bound")]
    EmptyBounds(String),
    #[error("constraint on {0} has no finite bound")]
    Unbounded(String),
    #[error("AVG({0}) with two different finite thresholds is unsupported")]
    UnsupportedAvg(String),
    #[error("local predicates unsupported (per-tuple WHERE filters are not evaluated)")]
    LocalPredicatesUnsupported,
}

/// Columnar numeric table. Tuple ids are 0-based row positions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Relation {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n: usize,
}

impl Relation {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        assert_eq!(names.len(), columns.len(), "one name per column");
        let n = columns.first().map_or(0, Vec::len);
        let mut seen = HashSet::new();
        for (name, col) in names.iter().zip(&columns) {
            if !seen.insert(name.as_str()) {
                return Err(ModelError::DuplicateAttribute(name.clone()));
            }
            if col.len() != n {
                return Err(ModelError::RaggedColumn {
                    name: name.clone(),
                    got: col.len(),
                    expected: n,
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite {
                    name: name.clone(),
                    row,
                });
            }
        }
        Ok(Self { names, columns, n })
    }

    pub fn n_tuples(&self) -> usize {
        self.n
    }

    pub fn n_attrs(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column_by_name(&self, name: &str) -> Option<&[f64]> {
        self.attr_index(name).map(|j| self.column(j))
    }

    pub fn value(&self, tuple: usize, attr: usize) -> f64 {
        self.columns[attr][tuple]
    }

    pub fn tuple(&self, tuple: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[tuple]).collect()
    }

    /// New relation holding the given tuples, in order.
    pub fn select(&self, ids: &[usize]) -> Relation {
        Relation {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| ids.iter().map(|&i| c[i]).collect())
                .collect(),
            n: ids.len(),
        }
    }

    pub fn into_parts(self) -> (Vec<String>, Vec<Vec<f64>>) {
        (self.names, self.columns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sense: Sense,
    pub attr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "attr")]
pub enum Aggregate {
    Count,
    Sum(String),
    Avg(String),
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregate::Count => write!(f, "COUNT(P.*)"),
            Aggregate::Sum(a) => write!(f, "SUM(P.{a})"),
            Aggregate::Avg(a) => write!(f, "AVG(P.{a})"),
        }
    }
}

/// `lower <= aggregate <= upper`; either side may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawConstraint", into = "RawConstraint")]
pub struct GlobalConstraint {
    pub aggregate: Aggregate,
    pub lower: f64,
    pub upper: f64,
}

impl GlobalConstraint {
    pub fn between(aggregate: Aggregate, lower: f64, upper: f64) -> Self {
        Self {
            aggregate,
            lower,
            upper,
        }
    }

    pub fn at_least(aggregate: Aggregate, lower: f64) -> Self {
        Self::between(aggregate, lower, f64::INFINITY)
    }

    pub fn at_most(aggregate: Aggregate, upper: f64) -> Self {
        Self::between(aggregate, f64::NEG_INFINITY, upper)
    }

    pub fn equal(aggregate: Aggregate, value: f64) -> Self {
        Self::between(aggregate, value, value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Repeat {
    /// `REPEAT r`: each tuple may appear at most `r + 1` times.
    Limited(u32),
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    Text(String),
}

/// A per-tuple WHERE filter. Parsed and carried, never evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPredicate {
    pub attr: String,
    pub op: CmpOp,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageQuery {
    #[serde(default = "default_alias")]
    pub alias: String,
    #[serde(default)]
    pub relation: String,
    #[serde(default)]
    pub relation_alias: Option<String>,
    pub repeat: Repeat,
    #[serde(default)]
    pub local_predicates: Vec<LocalPredicate>,
    pub constraints: Vec<GlobalConstraint>,
    #[serde(default)]
    pub objective: Option<Objective>,
}

fn default_alias() -> String {
    "P".to_string()
}

impl PackageQuery {
    pub fn new(relation: impl Into<String>, repeat: Repeat) -> Self {
        Self {
            alias: default_alias(),
            relation: relation.into(),
            relation_alias: None,
            repeat,
            local_predicates: Vec::new(),
            constraints: Vec::new(),
            objective: None,
        }
    }

    pub fn with_constraint(mut self, c: GlobalConstraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn with_objective(mut self, sense: Sense, attr: impl Into<String>) -> Self {
        self.objective = Some(Objective {
            sense,
            attr: attr.into(),
        });
        self
    }

    /// Same query with the objective removed (pure feasibility).
    pub fn without_objective(&self) -> Self {
        Self {
            objective: None,
            ..self.clone()
        }
    }
}

/// How the coefficients of one normalized row are produced from a tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RowKind {
    Count,
    Sum { attr: usize },
    /// Coefficient `value - threshold`.
    Avg { attr: usize, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowSpec {
    pub kind: RowKind,
    pub lower: f64,
    pub upper: f64,
}

/// A query compiled against a relation schema.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryModel {
    pub rows: Vec<RowSpec>,
    pub objective: Option<(usize, Sense)>,
    pub var_cap: f64,
}

impl QueryModel {
    pub fn compile(query: &PackageQuery, names: &[String]) -> Result<Self, ModelError> {
        if !query.local_predicates.is_empty() {
            return Err(ModelError::LocalPredicatesUnsupported);
        }
        let lookup = |name: &str| {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| ModelError::UnknownAttribute(name.to_string()))
        };
        let mut rows = Vec::with_capacity(query.constraints.len());
        for c in &query.constraints {
            let label = c.aggregate.to_string();
            if c.lower > c.upper || c.lower.is_nan() || c.upper.is_nan() {
                return Err(ModelError::EmptyBounds(label));
            }
            if !c.lower.is_finite() && !c.upper.is_finite() {
                return Err(ModelError::Unbounded(label));
            }
            let row = match &c.aggregate {
                Aggregate::Count => RowSpec {
                    kind: RowKind::Count,
                    lower: c.lower,
                    upper: c.upper,
                },
                Aggregate::Sum(a) => RowSpec {
                    kind: RowKind::Sum { attr: lookup(a)? },
                    lower: c.lower,
                    upper: c.upper,
                },
                Aggregate::Avg(a) => {
                    let attr = lookup(a)?;
                    let (threshold, lower, upper) = match (c.lower.is_finite(), c.upper.is_finite()) {
                        (true, false) => (c.lower, 0.0, f64::INFINITY),
                        (false, true) => (c.upper, f64::NEG_INFINITY, 0.0),
                        _ if c.lower == c.upper => (c.lower, 0.0, 0.0),
                        _ => return Err(ModelError::UnsupportedAvg(a.clone())),
                    };
                    RowSpec {
                        kind: RowKind::Avg { attr, threshold },
                        lower,
                        upper,
                    }
                }
            };
            rows.push(row);
        }
        let objective = match &query.objective {
            Some(o) => Some((lookup(&o.attr)?, o.sense)),
            None => None,
        };
        let var_cap = match query.repeat {
            Repeat::Limited(r) => f64::from(r) + 1.0,
            Repeat::Unbounded => rows
                .iter()
                .filter(|r| r.kind == RowKind::Count && r.upper.is_finite())
                .map(|r| r.upper.ceil())
                .fold(f64::NAN, f64::min),
        };
        Ok(Self {
            rows,
            objective,
            var_cap,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn maximize(&self) -> bool {
        matches!(self.objective, Some((_, Sense::Maximize)))
    }

    pub fn sense(&self) -> Sense {
        self.objective.map_or(Sense::Minimize, |(_, s)| s)
    }

    fn coefficient(kind: RowKind, rel: &Relation, tuple: usize) -> f64 {
        match kind {
            RowKind::Count => 1.0,
            RowKind::Sum { attr } => rel.value(tuple, attr),
            RowKind::Avg { attr, threshold } => rel.value(tuple, attr) - threshold,
        }
    }

    /// Per-variable cap over a relation of `n` tuples. An unbounded REPEAT
    /// without a finite COUNT cap falls back to `n`.
    pub fn cap_for(&self, n: usize) -> f64 {
        if self.var_cap.is_nan() {
            n.max(1) as f64
        } else {
            self.var_cap
        }
    }

    /// Builds the linear form over the tuples `ids` of `rel`.
    pub fn formulate(&self, rel: &Relation, ids: &[usize]) -> NormalizedQuery {
        self.formulate_capped(rel, ids, self.cap_for(rel.n_tuples()))
    }

    /// As [`Self::formulate`] with an explicit per-variable cap.
    pub fn formulate_capped(&self, rel: &Relation, ids: &[usize], cap: f64) -> NormalizedQuery {
        let sign = if self.maximize() { -1.0 } else { 1.0 };
        let cost = match self.objective {
            Some((attr, _)) => ids.iter().map(|&i| sign * rel.value(i, attr)).collect(),
            None => vec![0.0; ids.len()],
        };
        let rows = self
            .rows
            .iter()
            .map(|r| ids.iter().map(|&i| Self::coefficient(r.kind, rel, i)).collect())
            .collect();
        NormalizedQuery {
            tuple_ids: ids.to_vec(),
            cost,
            rows,
            row_lower: self.rows.iter().map(|r| r.lower).collect(),
            row_upper: self.rows.iter().map(|r| r.upper).collect(),
            row_kinds: self.rows.iter().map(|r| r.kind).collect(),
            var_upper: vec![cap; ids.len()],
            maximize: self.maximize(),
        }
    }
}

/// The ILP `min cost·x  s.t. row_lower <= rows·x <= row_upper, 0 <= x <= var_upper`.
///
/// Maximization queries carry a negated cost; `maximize` records the flip
/// so objectives are reported in the query's own sense.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedQuery {
    pub tuple_ids: Vec<usize>,
    pub cost: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    pub row_kinds: Vec<RowKind>,
    pub var_upper: Vec<f64>,
    pub maximize: bool,
}

impl NormalizedQuery {
    pub fn n_vars(&self) -> usize {
        self.tuple_ids.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn sense(&self) -> Sense {
        if self.maximize {
            Sense::Maximize
        } else {
            Sense::Minimize
        }
    }

    /// Internal (minimization) objective of a real vector.
    pub fn internal_objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn reported(&self, internal: f64) -> f64 {
        if self.maximize {
            -internal
        } else {
            internal
        }
    }

    /// Keeps only the variables at positions `vars`, in that order.
    pub fn restrict(&self, vars: &[usize]) -> NormalizedQuery {
        NormalizedQuery {
            tuple_ids: vars.iter().map(|&v| self.tuple_ids[v]).collect(),
            cost: vars.iter().map(|&v| self.cost[v]).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| vars.iter().map(|&v| r[v]).collect())
                .collect(),
            row_lower: self.row_lower.clone(),
            row_upper: self.row_upper.clone(),
            row_kinds: self.row_kinds.clone(),
            var_upper: vars.iter().map(|&v| self.var_upper[v]).collect(),
            maximize: self.maximize,
        }
    }

    /// Objective stripped; same feasible set.
    pub fn feasibility_only(&self) -> NormalizedQuery {
        NormalizedQuery {
            cost: vec![0.0; self.n_vars()],
            ..self.clone()
        }
    }

    /// Builds a package from integer multiplicities indexed by variable.
    pub fn package(&self, multiplicities: &[u64], status: SolveStatus) -> PackageSolution {
        let mut map = BTreeMap::new();
        let mut internal = 0.0;
        for (v, &k) in multiplicities.iter().enumerate() {
            if k > 0 {
                *map.entry(self.tuple_ids[v]).or_insert(0) += k;
                internal += self.cost[v] * k as f64;
            }
        }
        PackageSolution {
            multiplicities: map,
            objective: self.reported(internal),
            status,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Timeout,
}

impl SolveStatus {
    pub fn has_package(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Timeout => "timeout",
        })
    }
}

/// A multiset of tuples with its objective in the query's own sense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageSolution {
    pub multiplicities: BTreeMap<usize, u64>,
    pub objective: f64,
    pub status: SolveStatus,
}

impl PackageSolution {
    pub fn empty(status: SolveStatus) -> Self {
        Self {
            multiplicities: BTreeMap::new(),
            objective: f64::NAN,
            status,
        }
    }

    pub fn size(&self) -> u64 {
        self.multiplicities.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowViolation {
    pub row: usize,
    pub activity: f64,
    pub lower: f64,
    pub upper: f64,
    /// Distance outside the bounds (positive).
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeasibilityReport {
    pub rows: Vec<RowViolation>,
    /// (tuple id, multiplicity, cap)
    pub caps: Vec<(usize, u64, f64)>,
    pub unknown_tuples: Vec<usize>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.rows.is_empty() && self.caps.is_empty() && self.unknown_tuples.is_empty()
    }
}

/// Checks every row bound and multiplicity cap of `nq` against `sol`.
///
/// COUNT rows are evaluated in integer arithmetic; SUM/AVG rows use the
/// absolute tolerance [`ROW_TOLERANCE`].
pub fn check_feasible(sol: &PackageSolution, nq: &NormalizedQuery) -> FeasibilityReport {
    let position: HashMap<usize, usize> = nq
        .tuple_ids
        .iter()
        .enumerate()
        .map(|(v, &t)| (t, v))
        .collect();
    let mut report = FeasibilityReport::default();
    let mut entries = Vec::with_capacity(sol.multiplicities.len());
    for (&t, &k) in &sol.multiplicities {
        match position.get(&t) {
            Some(&v) => {
                if k as f64 > nq.var_upper[v].floor() {
                    report.caps.push((t, k, nq.var_upper[v]));
                }
                entries.push((v, k));
            }
            None => report.unknown_tuples.push(t),
        }
    }
    for (r, row) in nq.rows.iter().enumerate() {
        let (lo, hi) = (nq.row_lower[r], nq.row_upper[r]);
        let (activity, tol) = match nq.row_kinds[r] {
            RowKind::Count => {
                let count: u64 = entries.iter().map(|&(_, k)| k).sum();
                (count as f64, 0.0)
            }
            _ => (
                entries.iter().map(|&(v, k)| row[v] * k as f64).sum::<f64>(),
                ROW_TOLERANCE,
            ),
        };
        let excess = if activity < lo - tol {
            lo - activity
        } else if activity > hi + tol {
            activity - hi
        } else {
            continue;
        };
        report.rows.push(RowViolation {
            row: r,
            activity,
            lower: lo,
            upper: hi,
            excess,
        });
    }
    report
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("integrality gap undefined: shifted denominator {denominator} is not positive")]
pub struct GapUndefined {
    pub denominator: f64,
}

/// ε-shifted ratio of ILP and LP objectives, oriented so that a valid LP
/// bound gives a value of at least 1.
pub fn integrality_gap(ilp_obj: f64, lp_obj: f64, sense: Sense) -> Result<f64, GapUndefined> {
    let (num, den) = match sense {
        Sense::Maximize => (lp_obj + GAP_EPSILON, ilp_obj + GAP_EPSILON),
        Sense::Minimize => (ilp_obj + GAP_EPSILON, lp_obj + GAP_EPSILON),
    };
    if den <= 0.0 || num < 0.0 {
        return Err(GapUndefined { denominator: den });
    }
    Ok(num / den)
}

/// Convenience: compile and formulate over every tuple.
pub fn normalize_query(query: &PackageQuery, relation: &Relation) -> Result<NormalizedQuery, ModelError> {
    let model = QueryModel::compile(query, relation.names())?;
    let ids: Vec<usize> = (0..relation.n_tuples()).collect();
    Ok(model.formulate(relation, &ids))
}

/// Wire form of a constraint: a missing or `null` bound is infinite.
#[derive(Serialize, Deserialize)]
struct RawConstraint {
    aggregate: Aggregate,
    #[serde(default)]
    lower: Option<f64>,
    #[serde(default)]
    upper: Option<f64>,
}

impl From<RawConstraint> for GlobalConstraint {
    fn from(r: RawConstraint) -> Self {
        Self {
            aggregate: r.aggregate,
            lower: r.lower.unwrap_or(f64::NEG_INFINITY),
            upper: r.upper.unwrap_or(f64::INFINITY),
        }
    }
}

impl From<GlobalConstraint> for RawConstraint {
    fn from(c: GlobalConstraint) -> Self {
        Self {
            aggregate: c.aggregate,
            lower: c.lower.is_finite().then_some(c.lower),
            upper: c.upper.is_finite().then_some(c.upper),
        }
    }
}
