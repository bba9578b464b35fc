//! Decisions, schemas, distances and the monitor contract.
//!
//! A monitor consumes a stream of [`DecisionPoint`]s. For every new point it
//! reports the past points whose inputs are within `epsilon` of the new input
//! while their outputs are more than `delta_z` apart. Every backend in this
//! crate computes that set exactly; they only differ in how they find it.

use std::collections::HashMap;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{MonitorError, Result};
use crate::scalar::Scalar;

/// Norm applied to the numeric part of two feature vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    #[serde(alias = "linf")]
    LInf,
}

impl std::str::FromStr for Norm {
    type Err = MonitorError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Norm::L2),
            "linf" | "l-inf" | "max" => Ok(Norm::LInf),
            other => Err(MonitorError::Config(format!("unknown norm `{other}`"))),
        }
    }
}

/// How a column of the input participates in the input distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    /// Real-valued. Bounds are optional except for the grid backend.
    Numeric {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<f64>,
    },
    /// Finite token set; any mismatch puts two inputs infinitely far apart.
    Categorical { values: Vec<String> },
    /// Read but never compared.
    Ignored,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl Column {
    pub fn numeric(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Numeric {
                lower: Some(lower),
                upper: Some(upper),
            },
        }
    }

    pub fn unbounded(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Numeric {
                lower: None,
                upper: None,
            },
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        values: impl IntoIterator<Item = S>,
    ) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Categorical {
                values: values.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn ignored(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Ignored,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, ColumnKind::Numeric { .. })
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }
}

fn default_label_column() -> String {
    "label".to_owned()
}

/// Ordered column layout of every decision in one session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Column>,
    #[serde(default = "default_label_column")]
    pub label: String,
}

impl Schema {
    pub fn new(columns: Vec<Column>, label: impl Into<String>) -> Result<Self> {
        let schema = Schema {
            columns,
            label: label.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    /// `d` numeric columns `x0..x{d-1}` bounded to `[0, 1)`.
    pub fn unit_cube(d: usize) -> Self {
        Schema {
            columns: (0..d).map(|i| Column::numeric(format!("x{i}"), 0.0, 1.0)).collect(),
            label: default_label_column(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::HashSet::new();
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return Err(MonitorError::Schema(format!("duplicate column `{}`", c.name)));
            }
            if c.name == self.label {
                return Err(MonitorError::Schema(format!(
                    "column `{}` collides with the label column",
                    c.name
                )));
            }
            match &c.kind {
                ColumnKind::Numeric {
                    lower: Some(lo),
                    upper: Some(hi),
                } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                    return Err(MonitorError::Schema(format!(
                        "column `{}`: bounds must satisfy lower < upper, got [{lo}, {hi})",
                        c.name
                    )));
                }
                ColumnKind::Categorical { values } => {
                    if values.is_empty() {
                        return Err(MonitorError::Schema(format!(
                            "categorical column `{}` lists no values",
                            c.name
                        )));
                    }
                    let distinct: std::collections::HashSet<_> = values.iter().collect();
                    if distinct.len() != values.len() {
                        return Err(MonitorError::Schema(format!(
                            "categorical column `{}` repeats a value",
                            c.name
                        )));
                    }
                }
                _ => {}
            }
        }
        if self.columns.iter().all(|c| matches!(c.kind, ColumnKind::Ignored)) {
            return Err(MonitorError::Schema(
                "at least one column must be numeric or categorical".into(),
            ));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.columns.len()
    }

    /// Positions of numeric columns, in column order.
    pub fn numeric_columns(&self) -> Vec<usize> {
        self.positions(Column::is_numeric)
    }

    /// Positions of categorical columns, in column order.
    pub fn categorical_columns(&self) -> Vec<usize> {
        self.positions(Column::is_categorical)
    }

    fn positions(&self, pred: impl Fn(&Column) -> bool) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| pred(c))
            .map(|(i, _)| i)
            .collect()
    }

    /// Schema restricted to the given column positions, in that order.
    pub fn project(&self, positions: &[usize]) -> Schema {
        Schema {
            columns: positions.iter().map(|&i| self.columns[i].clone()).collect(),
            label: self.label.clone(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Converts raw values (as read from a file or a caller) into features.
    pub fn encode<T: Scalar>(&self, raw: &[RawValue]) -> Result<Vec<Feature<T>>> {
        if raw.len() != self.columns.len() {
            return Err(MonitorError::Schema(format!(
                "expected {} feature values, got {}",
                self.columns.len(),
                raw.len()
            )));
        }
        self.columns
            .iter()
            .zip(raw)
            .map(|(col, value)| match &col.kind {
                ColumnKind::Numeric { .. } => {
                    let x = match value {
                        RawValue::Number(x) => *x,
                        RawValue::Text(s) => s.trim().parse::<f64>().map_err(|_| {
                            MonitorError::Schema(format!(
                                "column `{}`: `{s}` is not a number",
                                col.name
                            ))
                        })?,
                    };
                    if !x.is_finite() {
                        return Err(MonitorError::Schema(format!(
                            "column `{}`: non-finite value {x}",
                            col.name
                        )));
                    }
                    Ok(Feature::Real(T::of(x)))
                }
                ColumnKind::Categorical { values } => {
                    let token = value.as_token();
                    values
                        .iter()
                        .position(|v| *v == token)
                        .map(|i| Feature::Category(i as u32))
                        .ok_or_else(|| {
                            MonitorError::Schema(format!(
                                "column `{}`: unknown category `{token}`",
                                col.name
                            ))
                        })
                }
                ColumnKind::Ignored => Ok(Feature::Skipped),
            })
            .collect()
    }

    /// Checks that a feature vector has the schema's length and kinds.
    pub fn check(&self, features: &[Feature<impl Scalar>]) -> Result<()> {
        if features.len() != self.columns.len() {
            return Err(MonitorError::Schema(format!(
                "dimension mismatch: schema has {} columns, point has {}",
                self.columns.len(),
                features.len()
            )));
        }
        for (col, f) in self.columns.iter().zip(features) {
            let ok = match (&col.kind, f) {
                (ColumnKind::Numeric { .. }, Feature::Real(_)) => true,
                (ColumnKind::Categorical { values }, Feature::Category(i)) => {
                    (*i as usize) < values.len()
                }
                (ColumnKind::Ignored, _) => true,
                _ => false,
            };
            if !ok {
                return Err(MonitorError::Schema(format!(
                    "column `{}`: value {f:?} does not match column kind",
                    col.name
                )));
            }
        }
        Ok(())
    }
}

/// An untyped input value before schema conversion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Number(f64),
    Text(String),
}

impl RawValue {
    fn as_token(&self) -> String {
        match self {
            RawValue::Number(x) => x.to_string(),
            RawValue::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for RawValue {
    fn from(x: f64) -> Self {
        RawValue::Number(x)
    }
}

impl From<&str> for RawValue {
    fn from(s: &str) -> Self {
        RawValue::Text(s.to_owned())
    }
}

/// One schema-typed feature value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Feature<T> {
    Real(T),
    /// Index into the column's value list.
    Category(u32),
    /// Value of an ignored column.
    Skipped,
}

/// Classifier output, interned to an integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label(pub u64);

impl Label {
    const UNIQUE_BIT: u64 = 1 << 63;

    /// A label no interned token and no other id can share.
    pub fn unique(id: u64) -> Label {
        Label(id | Self::UNIQUE_BIT)
    }
}

/// Maps output tokens to [`Label`]s in first-seen order.
#[derive(Clone, Debug, Default)]
pub struct LabelInterner {
    ids: HashMap<String, Label>,
    tokens: Vec<String>,
}

impl LabelInterner {
    pub fn intern(&mut self, token: &str) -> Label {
        if let Some(&l) = self.ids.get(token) {
            return l;
        }
        let l = Label(self.tokens.len() as u64);
        self.tokens.push(token.to_owned());
        self.ids.insert(token.to_owned(), l);
        l
    }

    pub fn token(&self, label: Label) -> Option<&str> {
        self.tokens.get(label.0 as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// One observed decision: input features, classifier output, arrival index.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionPoint<T> {
    pub id: u64,
    pub features: Vec<Feature<T>>,
    pub label: Label,
}

impl<T: Scalar> DecisionPoint<T> {
    pub fn new(id: u64, features: Vec<Feature<T>>, label: Label) -> Self {
        DecisionPoint {
            id,
            features,
            label,
        }
    }

    /// All-numeric point, convenient for synthetic streams.
    pub fn real(id: u64, coords: &[T], label: Label) -> Self {
        DecisionPoint {
            id,
            features: coords.iter().map(|&x| Feature::Real(x)).collect(),
            label,
        }
    }
}

/// A decision split into the parts the indexes work on.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredPoint<T> {
    pub id: u64,
    pub label: Label,
    /// Numeric columns in schema order.
    pub coords: Box<[T]>,
    /// Categorical value indices in schema order.
    pub cats: Box<[u32]>,
}

impl<T: Scalar> StoredPoint<T> {
    pub fn from_point(schema: &Schema, p: &DecisionPoint<T>) -> Result<Self> {
        schema.check(&p.features)?;
        let mut coords = Vec::new();
        let mut cats = Vec::new();
        for (col, f) in schema.columns.iter().zip(&p.features) {
            match (&col.kind, f) {
                (ColumnKind::Numeric { .. }, Feature::Real(x)) => coords.push(*x),
                (ColumnKind::Categorical { .. }, Feature::Category(c)) => cats.push(*c),
                _ => {}
            }
        }
        Ok(StoredPoint {
            id: p.id,
            label: p.label,
            coords: coords.into(),
            cats: cats.into(),
        })
    }
}

/// Distance parameters of one monitoring session.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSpec<T> {
    pub norm: Norm,
    /// Input closeness radius.
    pub epsilon: T,
    /// Output farness threshold; outputs must differ by strictly more.
    pub delta_z: T,
}

impl<T: Scalar> MetricSpec<T> {
    pub fn new(norm: Norm, epsilon: T, delta_z: T) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon.is_finite()) {
            return Err(MonitorError::Config(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        if !(delta_z > T::zero()) {
            return Err(MonitorError::Config(format!(
                "delta_z must be positive, got {delta_z}"
            )));
        }
        Ok(MetricSpec {
            norm,
            epsilon,
            delta_z,
        })
    }

    /// Discrete output metric with the default threshold of one half.
    pub fn with_epsilon(norm: Norm, epsilon: T) -> Result<Self> {
        Self::new(norm, epsilon, T::of(0.5))
    }

    pub fn outputs_far(&self, a: Label, b: Label) -> bool {
        output_distance::<T>(a, b) > self.delta_z
    }

    /// Whether the numeric parts are within `epsilon`. Agrees exactly with
    /// `numeric_distance(..) <= epsilon`.
    pub fn within(&self, a: &[T], b: &[T]) -> bool {
        match self.norm {
            Norm::LInf => a.iter().zip(b).all(|(&x, &y)| (x - y).abs() <= self.epsilon),
            Norm::L2 => numeric_distance(Norm::L2, a, b) <= self.epsilon,
        }
    }

    /// `decision_distance(stored, query) <= epsilon`, with the label test
    /// first since equal labels are the common case.
    pub fn is_witness(&self, stored: &StoredPoint<T>, query: &StoredPoint<T>) -> bool {
        self.outputs_far(stored.label, query.label)
            && same_categories(&stored.cats, &query.cats)
            && self.within(&stored.coords, &query.coords)
    }
}

// Element-wise rather than slice `==`, which lowers to a `memcmp` call that
// dominates the scan when there are few or no categorical columns.
fn same_categories(a: &[u32], b: &[u32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x == y)
}

/// L2 or L∞ distance of two coordinate slices of equal length.
pub fn numeric_distance<T: Scalar>(norm: Norm, a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    match norm {
        Norm::L2 => a
            .iter()
            .zip(b)
            .fold(T::zero(), |acc, (&x, &y)| {
                let d = x - y;
                acc + d * d
            })
            .sqrt(),
        Norm::LInf => a
            .iter()
            .zip(b)
            .fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs())),
    }
}

/// Input distance under `schema`: the norm over numeric columns, `+∞` on any
/// categorical mismatch, ignored columns skipped.
pub fn input_distance<T: Scalar>(
    schema: &Schema,
    norm: Norm,
    a: &[Feature<T>],
    b: &[Feature<T>],
) -> Result<T> {
    schema.check(a)?;
    schema.check(b)?;
    let mut xa = Vec::new();
    let mut xb = Vec::new();
    for (fa, fb) in a.iter().zip(b) {
        match (fa, fb) {
            (Feature::Real(x), Feature::Real(y)) => {
                xa.push(*x);
                xb.push(*y);
            }
            (Feature::Category(u), Feature::Category(v)) if u != v => {
                return Ok(T::infinity());
            }
            _ => {}
        }
    }
    Ok(numeric_distance(norm, &xa, &xb))
}

/// Discrete metric on classifier outputs.
pub fn output_distance<T: Scalar>(a: Label, b: Label) -> T {
    if a == b {
        T::zero()
    } else {
        T::one()
    }
}

/// Augmented distance on decisions: the input distance when the outputs are
/// more than `delta_z` apart, `+∞` otherwise.
pub fn decision_distance<T: Scalar>(
    spec: &MetricSpec<T>,
    schema: &Schema,
    p: &DecisionPoint<T>,
    q: &DecisionPoint<T>,
) -> Result<T> {
    if spec.outputs_far(p.label, q.label) {
        input_distance(schema, spec.norm, &p.features, &q.features)
    } else {
        schema.check(&p.features)?;
        schema.check(&q.features)?;
        Ok(T::infinity())
    }
}

/// The monitor's answer for one new decision.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub query_id: u64,
    /// Ascending ids of past decisions violating robustness with the query.
    pub witness_ids: Vec<u64>,
}

impl WitnessReport {
    pub fn new(query_id: u64, mut witness_ids: Vec<u64>) -> Self {
        witness_ids.sort_unstable();
        witness_ids.dedup();
        WitnessReport {
            query_id,
            witness_ids,
        }
    }

    pub fn violation(&self) -> bool {
        !self.witness_ids.is_empty()
    }
}

/// Work counters shared by all backends. Fields a backend has no use for
/// stay zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub observed: u64,
    /// Stored points tested exactly against a query.
    pub comparisons: u64,
    /// Index nodes whose bounds were tested.
    pub nodes_visited: u64,
    pub rebuilds: u64,
    pub case_a: u64,
    pub case_b: u64,
    pub case_c: u64,
}

impl AddAssign for Counters {
    fn add_assign(&mut self, o: Counters) {
        self.observed += o.observed;
        self.comparisons += o.comparisons;
        self.nodes_visited += o.nodes_visited;
        self.rebuilds += o.rebuilds;
        self.case_a += o.case_a;
        self.case_b += o.case_b;
        self.case_c += o.case_c;
    }
}

/// Data-structure sizes, reported instead of process memory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    pub points_stored: u64,
    pub index_nodes: u64,
    pub bdd_nodes: u64,
}

impl AddAssign for Footprint {
    fn add_assign(&mut self, o: Footprint) {
        self.points_stored += o.points_stored;
        self.index_nodes += o.index_nodes;
        self.bdd_nodes += o.bdd_nodes;
    }
}

/// An online robustness monitor.
///
/// `observe` answers the query for `p` against every previously observed
/// point and only then stores `p`, so a point is never its own witness.
/// Ids must strictly increase across calls.
pub trait Monitor<T: Scalar>: Send {
    fn observe(&mut self, p: &DecisionPoint<T>) -> Result<WitnessReport>;

    fn counters(&self) -> Counters;

    fn footprint(&self) -> Footprint;

    fn name(&self) -> &'static str;
}

impl<T: Scalar> Monitor<T> for Box<dyn Monitor<T>> {
    fn observe(&mut self, p: &DecisionPoint<T>) -> Result<WitnessReport> {
        (**self).observe(p)
    }

    fn counters(&self) -> Counters {
        (**self).counters()
    }

    fn footprint(&self) -> Footprint {
        (**self).footprint()
    }

    fn name(&self) -> &'static str {
        (**self).name()
    }
}

/// Enforces strictly increasing ids.
#[derive(Clone, Copy, Debug, Default)]
pub struct StreamOrder {
    last: Option<u64>,
}

impl StreamOrder {
    pub fn check(&self, id: u64) -> Result<()> {
        match self.last {
            Some(last) if id <= last => Err(MonitorError::StreamOrder { last, id }),
            _ => Ok(()),
        }
    }

    pub fn advance(&mut self, id: u64) {
        self.last = Some(id);
    }
}
