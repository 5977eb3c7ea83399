//! Deterministic simulator for computation handover between roadside units
//! (RSUs) in vehicular edge computing.
//!
//! Vehicles offload part of their compute demand to the RSU they are
//! connected to. RSU agents exchange load reports and hand vehicles over to
//! each other when they leave coverage, when an RSU is overloaded, or when a
//! neighbor is markedly less loaded. The crate provides the MACH strategy,
//! three baselines (nearest, earliest, latest), the discrete-time engine,
//! metrics and a parameter sweep harness.

// Validation uses `!(x > 0.0)` style checks on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod knowledge;
pub mod metrics;
pub mod mobility;
pub mod model;
pub mod qos;
pub mod strategies;
pub mod sweep;

pub use engine::{
    load_schedule, offloaded_load, run, run_schedule, run_step, EngineError, HandoverEvent,
    HandoverOutcome, RunOutput, SimulationState,
};
pub use metrics::{gini, ExportFormat, MetricsSeries, StepMetrics};
pub use mobility::{generate_synthetic, ingest_trace, Schedule, ScenarioKind, SyntheticScenarioSpec};
pub use model::{
    validate_config, ConfigError, LoadShareInterval, Point, RsuId, RsuSpec, SimConfig,
    StrategyKind, StrategyParams, TaskLoadModel, TraceSource, VehicleId, VehicleState,
};
pub use qos::{derive_alpha, qos_distance, qos_load, qos_total, QosParams};
pub use strategies::{HandoverTrigger, HandoverStrategy};
pub use sweep::{run_sweep, SweepGrid, SweepResult};
