//! Monitor configuration and construction.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bruteforce::BruteForceMonitor;
use crate::error::{MonitorError, Result};
use crate::grid::GridMonitor;
use crate::kdtree::{KdTree, DEFAULT_LEAF_CAPACITY};
use crate::model::{
    ColumnKind, Counters, DecisionPoint, Footprint, LabelInterner, MetricSpec, Monitor, Norm,
    RawValue, Schema, WitnessReport,
};
use crate::parallel::ParallelMonitor;
use crate::periodic::{PeriodicMonitor, DEFAULT_TAU};
use crate::scalar::Scalar;
use crate::snn::SnnIndex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    BruteForce,
    KdTree,
    Snn,
    Bdd,
}

impl BackendKind {
    pub const ALL: [BackendKind; 4] = [
        BackendKind::BruteForce,
        BackendKind::KdTree,
        BackendKind::Snn,
        BackendKind::Bdd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::BruteForce => "bruteforce",
            BackendKind::KdTree => "kdtree",
            BackendKind::Snn => "snn",
            BackendKind::Bdd => "bdd",
        }
    }

    pub fn supports(self, norm: Norm) -> bool {
        match self {
            BackendKind::Snn => norm == Norm::L2,
            BackendKind::Bdd => norm == Norm::LInf,
            BackendKind::BruteForce | BackendKind::KdTree => true,
        }
    }

    /// Whether the backend runs under periodic re-indexing.
    pub fn is_static(self) -> bool {
        matches!(self, BackendKind::KdTree | BackendKind::Snn)
    }
}

impl std::str::FromStr for BackendKind {
    type Err = MonitorError;

    fn from_str(s: &str) -> Result<Self> {
        BackendKind::ALL
            .into_iter()
            .find(|b| b.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| MonitorError::Config(format!("unknown backend `{s}`")))
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_delta_z() -> f64 {
    0.5
}

fn default_tau() -> usize {
    DEFAULT_TAU
}

fn default_leaf_capacity() -> usize {
    DEFAULT_LEAF_CAPACITY
}

/// Everything needed to build a monitor, independent of the data source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    pub backend: BackendKind,
    pub norm: Norm,
    pub epsilon: f64,
    #[serde(default = "default_delta_z")]
    pub delta_z: f64,
    /// Re-indexing period of the k-d tree and sorted backends.
    #[serde(default = "default_tau")]
    pub tau: usize,
    /// Number of numeric column blocks; `None` disables decomposition.
    #[serde(default)]
    pub blocks: Option<usize>,
    /// Clamp out-of-range values into boundary cells (grid backend).
    #[serde(default)]
    pub clamp: bool,
    #[serde(default = "default_leaf_capacity")]
    pub leaf_capacity: usize,
}

impl MonitorConfig {
    pub fn new(backend: BackendKind, norm: Norm, epsilon: f64) -> Self {
        MonitorConfig {
            backend,
            norm,
            epsilon,
            delta_z: default_delta_z(),
            tau: DEFAULT_TAU,
            blocks: None,
            clamp: false,
            leaf_capacity: DEFAULT_LEAF_CAPACITY,
        }
    }

    pub fn with_tau(mut self, tau: usize) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_blocks(mut self, k: usize) -> Self {
        self.blocks = Some(k);
        self
    }

    /// Checks everything that does not depend on the schema.
    pub fn validate(&self) -> Result<()> {
        MetricSpec::new(self.norm, self.epsilon, self.delta_z)?;
        if !self.backend.supports(self.norm) {
            return Err(MonitorError::Config(format!(
                "backend {} does not support the {} norm",
                self.backend,
                match self.norm {
                    Norm::L2 => "l2",
                    Norm::LInf => "linf",
                }
            )));
        }
        if self.blocks.is_some() && self.norm != Norm::LInf {
            return Err(MonitorError::Config(
                "block decomposition requires the linf norm".into(),
            ));
        }
        if self.blocks == Some(0) {
            return Err(MonitorError::Config("block count must be at least 1".into()));
        }
        if self.tau == 0 {
            return Err(MonitorError::Config("tau must be at least 1".into()));
        }
        if self.leaf_capacity == 0 {
            return Err(MonitorError::Config("leaf capacity must be at least 1".into()));
        }
        Ok(())
    }

    /// Checks the configuration together with the schema it will run on.
    pub fn validate_for(&self, schema: &Schema) -> Result<()> {
        self.validate()?;
        schema.validate()?;
        if self.backend == BackendKind::Bdd {
            for c in &schema.columns {
                if let ColumnKind::Numeric { lower, upper } = c.kind {
                    if lower.is_none() || upper.is_none() {
                        return Err(MonitorError::Config(format!(
                            "bdd backend needs lower and upper bounds on column `{}`",
                            c.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn metric<T: Scalar>(&self) -> Result<MetricSpec<T>> {
        MetricSpec::new(self.norm, T::of(self.epsilon), T::of(self.delta_z))
    }

    /// Builds the configured monitor.
    pub fn build<T: Scalar>(&self, schema: Arc<Schema>) -> Result<Box<dyn Monitor<T>>> {
        self.validate_for(&schema)?;
        let metric = self.metric::<T>()?;
        match self.blocks {
            Some(k) => {
                let inner = MonitorConfig {
                    blocks: None,
                    ..self.clone()
                };
                let factory = move |s: Arc<Schema>, _m: MetricSpec<T>| inner.build_single(s, metric);
                Ok(Box::new(ParallelMonitor::new(schema, metric, k, &factory)?))
            }
            None => self.build_single(schema, metric),
        }
    }

    fn build_single<T: Scalar>(
        &self,
        schema: Arc<Schema>,
        metric: MetricSpec<T>,
    ) -> Result<Box<dyn Monitor<T>>> {
        Ok(match self.backend {
            BackendKind::BruteForce => Box::new(BruteForceMonitor::new(schema, metric)),
            BackendKind::KdTree => Box::new(PeriodicMonitor::<T, KdTree<T>>::new(
                schema,
                metric,
                self.tau,
                self.leaf_capacity,
            )?),
            BackendKind::Snn => Box::new(PeriodicMonitor::<T, SnnIndex<T>>::new(
                schema, metric, self.tau, (),
            )?),
            BackendKind::Bdd => Box::new(GridMonitor::new(schema, metric, self.clamp)?),
        })
    }
}

/// A configured monitor fed with raw values, assigning ids in arrival order
/// and interning output tokens.
pub struct Session<T: Scalar> {
    schema: Arc<Schema>,
    monitor: Box<dyn Monitor<T>>,
    labels: LabelInterner,
    next_id: u64,
}

impl<T: Scalar> Session<T> {
    pub fn new(config: &MonitorConfig, schema: Schema) -> Result<Self> {
        let schema = Arc::new(schema);
        let monitor = config.build(schema.clone())?;
        Ok(Session {
            schema,
            monitor,
            labels: LabelInterner::default(),
            next_id: 0,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Observes one decision given as raw values and returns the ids of its
    /// witnesses. Rejected inputs consume no id.
    pub fn observe(&mut self, values: &[RawValue], label: &str) -> Result<Vec<u64>> {
        let features = self.schema.encode(values)?;
        let label = self.labels.intern(label);
        let report = self
            .monitor
            .observe(&DecisionPoint::new(self.next_id, features, label))?;
        self.next_id += 1;
        Ok(report.witness_ids)
    }

    /// Observes an already-typed point; its id must follow the previous one.
    pub fn observe_point(&mut self, p: &DecisionPoint<T>) -> Result<WitnessReport> {
        let report = self.monitor.observe(p)?;
        self.next_id = p.id + 1;
        Ok(report)
    }

    pub fn labels(&self) -> &LabelInterner {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut LabelInterner {
        &mut self.labels
    }

    pub fn counters(&self) -> Counters {
        self.monitor.counters()
    }

    pub fn footprint(&self) -> Footprint {
        self.monitor.footprint()
    }

    pub fn observed(&self) -> u64 {
        self.next_id
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Column;

    #[test]
    fn norm_compatibility() {
        assert!(MonitorConfig::new(BackendKind::Snn, Norm::LInf, 0.1).validate().is_err());
        assert!(MonitorConfig::new(BackendKind::Bdd, Norm::L2, 0.1).validate().is_err());
        assert!(MonitorConfig::new(BackendKind::KdTree, Norm::L2, 0.1)
            .with_blocks(2)
            .validate()
            .is_err());
        assert!(MonitorConfig::new(BackendKind::KdTree, Norm::LInf, 0.1)
            .with_blocks(2)
            .validate()
            .is_ok());
        assert!(MonitorConfig::new(BackendKind::BruteForce, Norm::L2, 0.0).validate().is_err());
    }

    #[test]
    fn bdd_needs_bounds() {
        let schema = Schema::new(vec![Column::unbounded("x")], "y").unwrap();
        let cfg = MonitorConfig::new(BackendKind::Bdd, Norm::LInf, 0.1);
        assert!(cfg.validate_for(&schema).is_err());
        assert!(cfg.validate_for(&Schema::unit_cube(2)).is_ok());
    }

    #[test]
    fn config_from_json() {
        let cfg: MonitorConfig =
            serde_json::from_str(r#"{"backend":"kdtree","norm":"linf","epsilon":0.1,"tau":64}"#)
                .unwrap();
        assert_eq!(cfg.tau, 64);
        assert_eq!(cfg.delta_z, 0.5);
        assert_eq!(cfg.leaf_capacity, DEFAULT_LEAF_CAPACITY);
        assert!(serde_json::from_str::<MonitorConfig>(r#"{"backend":"nope","norm":"l2","epsilon":1}"#).is_err());
    }

    #[test]
    fn session_assigns_ids() {
        let cfg = MonitorConfig::new(BackendKind::BruteForce, Norm::L2, 0.1);
        let mut s = Session::<f64>::new(&cfg, Schema::unit_cube(2)).unwrap();
        assert!(s.observe(&[0.5.into(), 0.5.into()], "a").unwrap().is_empty());
        assert!(s.observe(&[0.5.into()], "a").is_err());
        assert_eq!(s.observe(&[0.51.into(), 0.5.into()], "b").unwrap(), vec![0]);
        assert_eq!(s.observed(), 2);
    }
}
