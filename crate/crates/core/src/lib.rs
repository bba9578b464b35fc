//! Exact online detection of input-output robustness violations.
//!
//! A classifier's decisions arrive one at a time. After each decision the
//! monitor reports every earlier decision whose input lies within `epsilon`
//! of the new input while the two outputs differ. The search is a
//! fixed-radius neighbour query under an augmented metric, answered exactly
//! by one of several interchangeable backends:
//!
//! * [`BruteForceMonitor`]: linear scan, the reference answer.
//! * [`KdTree`] and [`SnnIndex`]: static indexes made online by
//!   [`PeriodicMonitor`], which rebuilds them every `tau` arrivals.
//! * [`GridMonitor`]: an ε-grid of occupied cells kept in a BDD (L∞ only).
//! * [`ParallelMonitor`]: splits columns into blocks solved concurrently
//!   (L∞ only).
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix it to `f64`.

pub mod bruteforce;
pub mod config;
pub mod error;
pub mod grid;
pub mod kdtree;
pub mod model;
pub mod parallel;
pub mod periodic;
pub mod scalar;
pub mod snn;

pub use bruteforce::BruteForceMonitor;
pub use config::{BackendKind, MonitorConfig, Session};
pub use error::{MonitorError, Result};
pub use grid::{GridAxis, GridMonitor, GridSpec, LabelVector, QueryCase};
pub use kdtree::KdTree;
pub use model::{
    decision_distance, input_distance, numeric_distance, output_distance, Column, ColumnKind,
    Counters, DecisionPoint, Feature, Footprint, Label, LabelInterner, MetricSpec, Monitor, Norm,
    RawValue, Schema, StoredPoint, WitnessReport,
};
pub use parallel::{project, BlockPlan, ParallelMonitor};
pub use periodic::{amortized_cost, log_grid, optimal_tau, PeriodicMonitor, StaticIndex};
pub use scalar::Scalar;
pub use snn::{principal_direction, SnnIndex};

pub type DecisionPoint64 = DecisionPoint<f64>;
pub type MetricSpec64 = MetricSpec<f64>;
pub type StoredPoint64 = StoredPoint<f64>;
pub type BruteForce64 = BruteForceMonitor<f64>;
pub type KdTree64 = KdTree<f64>;
pub type SnnIndex64 = SnnIndex<f64>;
pub type KdTreeMonitor64 = PeriodicMonitor<f64, KdTree<f64>>;
pub type SnnMonitor64 = PeriodicMonitor<f64, SnnIndex<f64>>;
pub type GridMonitor64 = GridMonitor<f64>;
pub type ParallelMonitor64 = ParallelMonitor<f64>;
pub type Session64 = Session<f64>;

pub type DecisionPoint32 = DecisionPoint<f32>;
pub type MetricSpec32 = MetricSpec<f32>;
pub type Session32 = Session<f32>;
