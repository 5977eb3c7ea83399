//! Domain types shared by every part of the simulator.
//!
//! Everything here is plain data plus construction-time validation. Loads and
//! capacities are in TFLOPS, distances in meters, time in simulation steps
//! unless a field says otherwise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mobility::SyntheticScenarioSpec;

/// Tolerance on the unit norm of a moving vehicle's heading.
pub const DIRECTION_NORM_TOLERANCE: f64 = 1e-9;

// ── Identifiers ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub String);

impl VehicleId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VehicleId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct RsuId(pub u32);

impl fmt::Display for RsuId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

// ── Geometry ────────────────────────────────────────────────────────────────

/// 2-D point (or vector) in the local scenario frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Point> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(1.0 / n))
    }
}

impl std::ops::Add for Point {
    type Output = Point;

    fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;

    fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }
}

// ── Vehicles and RSUs ───────────────────────────────────────────────────────

/// Kinematic and compute state of one vehicle at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: VehicleId,
    pub position: Point,
    /// m/s
    pub speed: f64,
    /// Unit heading; only meaningful while `speed > 0`.
    pub direction: Point,
    /// Onboard compute throughput, TFLOPS.
    pub onboard_capacity: f64,
    /// Total compute demand, TFLOPS.
    pub generated_load: f64,
}

impl VehicleState {
    /// A vehicle with the default onboard unit and no demand yet assigned.
    pub fn at(id: impl Into<String>, position: Point, speed: f64, direction: Point) -> Self {
        Self {
            id: VehicleId::new(id),
            position,
            speed,
            direction,
            onboard_capacity: TaskLoadModel::DEFAULT_ONBOARD_CAPACITY,
            generated_load: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let path = format!("vehicle[{}]", self.id);
        finite(&path, "position.x", self.position.x)?;
        finite(&path, "position.y", self.position.y)?;
        if !(self.speed >= 0.0) || !self.speed.is_finite() {
            return Err(ConfigError::new(format!("{path}.speed"), "speed must be >= 0"));
        }
        if !(self.onboard_capacity > 0.0) {
            return Err(ConfigError::new(
                format!("{path}.onboard_capacity"),
                "onboard_capacity must be > 0",
            ));
        }
        if !(self.generated_load >= 0.0) {
            return Err(ConfigError::new(
                format!("{path}.generated_load"),
                "generated_load must be >= 0",
            ));
        }
        if self.speed > 0.0 && (self.direction.norm() - 1.0).abs() > DIRECTION_NORM_TOLERANCE {
            return Err(ConfigError::new(
                format!("{path}.direction"),
                "direction must have unit norm while moving",
            ));
        }
        Ok(())
    }
}

/// Static description of a road-side unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsuSpec {
    pub id: RsuId,
    pub position: Point,
    /// Full-QoS coverage radius, meters.
    pub coverage_radius: f64,
    /// Compute throughput, TFLOPS.
    pub capacity: f64,
    #[serde(default = "default_true")]
    pub enabled: bool,
}

fn default_true() -> bool {
    true
}

impl RsuSpec {
    pub fn new(id: u32, position: Point, coverage_radius: f64, capacity: f64) -> Self {
        Self {
            id: RsuId(id),
            position,
            coverage_radius,
            capacity,
            enabled: true,
        }
    }

    pub fn covers(&self, p: Point) -> bool {
        self.position.distance(p) <= self.coverage_radius
    }

    fn validate(&self, path: &str) -> Result<(), ConfigError> {
        finite(path, "position.x", self.position.x)?;
        finite(path, "position.y", self.position.y)?;
        if !(self.coverage_radius > 0.0) || !self.coverage_radius.is_finite() {
            return Err(ConfigError::new(
                format!("{path}.coverage_radius"),
                "coverage_radius must be > 0",
            ));
        }
        if !(self.capacity > 0.0) || !self.capacity.is_finite() {
            return Err(ConfigError::new(
                format!("{path}.capacity"),
                "capacity must be > 0",
            ));
        }
        Ok(())
    }
}

/// Last load report received from a peer RSU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeerLoad {
    pub known_load: f64,
    pub known_at: u64,
}

/// Beacon a vehicle sends to its serving RSU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamMessage {
    pub vehicle_id: VehicleId,
    pub position: Point,
    pub speed: f64,
    pub direction: Point,
    pub emitted_at: u64,
}

impl CamMessage {
    pub fn from_state(v: &VehicleState, step: u64) -> Self {
        Self {
            vehicle_id: v.id.clone(),
            position: v.position,
            speed: v.speed,
            direction: v.direction,
            emitted_at: step,
        }
    }
}

/// Live state of an RSU agent.
#[derive(Debug, Clone, PartialEq)]
pub struct RsuRuntime {
    pub spec: RsuSpec,
    pub connected: BTreeSet<VehicleId>,
    /// Sum of offloaded loads of `connected`; deliberately not capped at capacity.
    pub assigned_load: f64,
    pub peer_knowledge: BTreeMap<RsuId, PeerLoad>,
    /// Latest CAM from each connected vehicle.
    pub tracked: BTreeMap<VehicleId, CamMessage>,
}

impl RsuRuntime {
    pub fn new(spec: RsuSpec) -> Self {
        Self {
            spec,
            connected: BTreeSet::new(),
            assigned_load: 0.0,
            peer_knowledge: BTreeMap::new(),
            tracked: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> RsuId {
        self.spec.id
    }

    pub fn enabled(&self) -> bool {
        self.spec.enabled
    }

    pub fn utilization(&self) -> f64 {
        self.assigned_load / self.spec.capacity
    }

    /// Sum of `offloads` over the connected set, in vehicle-id order.
    pub fn expected_load(&self, offloads: &BTreeMap<VehicleId, f64>) -> f64 {
        self.connected
            .iter()
            .map(|v| offloads.get(v).copied().unwrap_or(0.0))
            .sum()
    }

    pub fn recompute_load(&mut self, offloads: &BTreeMap<VehicleId, f64>) {
        self.assigned_load = self.expected_load(offloads);
    }
}

// ── Strategy parameters ─────────────────────────────────────────────────────

/// How often RSUs exchange load reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LoadShareInterval {
    /// Every RSU always knows every peer's true load.
    Oracle,
    /// Synchronized broadcast every `n` steps.
    Every(u32),
}

impl LoadShareInterval {
    pub fn label(&self) -> String {
        match self {
            Self::Oracle => "oracle".to_owned(),
            Self::Every(n) => n.to_string(),
        }
    }
}

impl fmt::Display for LoadShareInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for LoadShareInterval {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("oracle") {
            return Ok(Self::Oracle);
        }
        match s.parse::<u32>() {
            Ok(n) if n >= 1 => Ok(Self::Every(n)),
            _ => Err(format!(
                "invalid load-share interval {s:?}: expected a step count >= 1 or \"oracle\""
            )),
        }
    }
}

impl Serialize for LoadShareInterval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Oracle => s.serialize_str("oracle"),
            Self::Every(n) => s.serialize_u32(*n),
        }
    }
}

impl<'de> Deserialize<'de> for LoadShareInterval {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) if n >= 1 && n <= u32::MAX as i64 => Ok(Self::Every(n as u32)),
            Raw::Num(n) => Err(serde::de::Error::custom(format!(
                "load-share interval must be >= 1, got {n}"
            ))),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Tunable constants of the MACH RSU agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct StrategyParams {
    /// Early-trigger margin as a fraction of the coverage radius.
    pub leaving_threshold: f64,
    pub overload_threshold: f64,
    pub hysteresis: f64,
    pub min_suitability: f64,
    pub load_share_interval: LoadShareInterval,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            leaving_threshold: 0.0,
            overload_threshold: 0.7,
            hysteresis: 0.05,
            min_suitability: 0.3,
            load_share_interval: LoadShareInterval::Every(1),
        }
    }
}

impl StrategyParams {
    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        unit_interval(path, "leaving_threshold", self.leaving_threshold)?;
        if !(self.overload_threshold > 0.0 && self.overload_threshold <= 1.0) {
            return Err(ConfigError::new(
                format!("{path}.overload_threshold"),
                "overload_threshold must be in (0, 1]",
            ));
        }
        unit_interval(path, "hysteresis", self.hysteresis)?;
        unit_interval(path, "min_suitability", self.min_suitability)?;
        if let LoadShareInterval::Every(0) = self.load_share_interval {
            return Err(ConfigError::new(
                format!("{path}.load_share_interval"),
                "load_share_interval must be >= 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Mach,
    Nearest,
    Earliest,
    Latest,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [Self::Mach, Self::Nearest, Self::Earliest, Self::Latest];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mach => "mach",
            Self::Nearest => "nearest",
            Self::Earliest => "earliest",
            Self::Latest => "latest",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                format!("unknown strategy {s:?}: expected one of mach, nearest, earliest, latest")
            })
    }
}

// ── Task load ───────────────────────────────────────────────────────────────

/// When a vehicle's demand is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleEpoch {
    /// One draw for the vehicle's whole lifetime.
    #[default]
    Lifetime,
    EveryStep,
}

/// Per-vehicle compute demand model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct TaskLoadModel {
    /// GFLOP per frame of the full driving task set.
    pub per_frame_load: f64,
    /// frames/second
    pub frame_rate: f64,
    /// Peak onboard throughput, TFLOPS.
    pub onboard_capacity: f64,
    /// Share of `onboard_capacity` usable for local processing.
    pub local_fraction: f64,
    /// `Some((low, high))` draws demand uniformly in TFLOPS; `None` uses the
    /// static per-frame demand.
    pub dynamic_range: Option<(f64, f64)>,
    pub resample: ResampleEpoch,
    pub rng_seed: u64,
}

impl TaskLoadModel {
    /// Sum of the driving task table, GFLOP per frame.
    pub const DEFAULT_PER_FRAME_GFLOP: f64 = 79.72;
    pub const DEFAULT_FRAME_RATE: f64 = 30.0;
    pub const DEFAULT_ONBOARD_CAPACITY: f64 = 1.3;
    pub const DEFAULT_LOCAL_FRACTION: f64 = 0.7;
    pub const DEFAULT_DYNAMIC_RANGE: (f64, f64) = (1.9, 3.0);

    /// Demand with the dynamic distribution disabled, TFLOPS.
    pub fn static_demand(&self) -> f64 {
        self.per_frame_load * self.frame_rate / 1000.0
    }

    /// Throughput a vehicle handles onboard, TFLOPS.
    pub fn local_capacity(&self) -> f64 {
        self.local_fraction * self.onboard_capacity
    }

    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        if !(self.per_frame_load >= 0.0) {
            return Err(ConfigError::new(
                format!("{path}.per_frame_load"),
                "per_frame_load must be >= 0",
            ));
        }
        if !(self.frame_rate >= 0.0) {
            return Err(ConfigError::new(
                format!("{path}.frame_rate"),
                "frame_rate must be >= 0",
            ));
        }
        if !(self.onboard_capacity > 0.0) {
            return Err(ConfigError::new(
                format!("{path}.onboard_capacity"),
                "onboard_capacity must be > 0",
            ));
        }
        unit_interval(path, "local_fraction", self.local_fraction)?;
        if let Some((low, high)) = self.dynamic_range {
            if !(low >= 0.0 && low <= high && high.is_finite()) {
                return Err(ConfigError::new(
                    format!("{path}.dynamic_range"),
                    "dynamic_range must satisfy 0 <= low <= high",
                ));
            }
        }
        Ok(())
    }
}

impl Default for TaskLoadModel {
    fn default() -> Self {
        Self {
            per_frame_load: Self::DEFAULT_PER_FRAME_GFLOP,
            frame_rate: Self::DEFAULT_FRAME_RATE,
            onboard_capacity: Self::DEFAULT_ONBOARD_CAPACITY,
            local_fraction: Self::DEFAULT_LOCAL_FRACTION,
            dynamic_range: Some(Self::DEFAULT_DYNAMIC_RANGE),
            resample: ResampleEpoch::Lifetime,
            rng_seed: 0,
        }
    }
}

// ── Simulation config ───────────────────────────────────────────────────────

/// Where per-step vehicle states come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    Csv(PathBuf),
    Synthetic(SyntheticScenarioSpec),
}

/// Scheduled outage of one RSU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureSchedule {
    pub rsu_id: RsuId,
    pub disable_at: u64,
    #[serde(default)]
    pub enable_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Seconds per step.
    pub step_duration: f64,
    /// Number of steps to run.
    pub duration: u64,
    pub rsus: Vec<RsuSpec>,
    pub strategy: StrategyKind,
    pub params: StrategyParams,
    /// Distance-decay constant, 1/m.
    pub qos_alpha: f64,
    pub cam_interval: u64,
    pub trace_source: TraceSource,
    pub load_model: TaskLoadModel,
    pub failures: Vec<FailureSchedule>,
    pub rng_seed: u64,
}

impl SimConfig {
    /// Multiplies every RSU capacity by `scale` (full/half/quarter variants).
    pub fn scale_capacity(&mut self, scale: f64) {
        for r in &mut self.rsus {
            r.capacity *= scale;
        }
    }
}

// ── Validation ──────────────────────────────────────────────────────────────

/// First violated invariant, with a path to the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn finite(path: &str, field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(format!("{path}.{field}"), format!("{field} must be finite")))
    }
}

fn unit_interval(path: &str, field: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::new(format!("{path}.{field}"), format!("{field} must be in [0, 1]")))
    }
}

/// Checks every type invariant of `cfg`; returns it unchanged on success.
pub fn validate_config(cfg: SimConfig) -> Result<SimConfig, ConfigError> {
    if !(cfg.step_duration > 0.0) || !cfg.step_duration.is_finite() {
        return Err(ConfigError::new("step_duration", "step_duration must be > 0"));
    }
    if cfg.duration < 1 {
        return Err(ConfigError::new("duration", "duration must be >= 1"));
    }
    if cfg.cam_interval < 1 {
        return Err(ConfigError::new("cam_interval", "cam_interval must be >= 1"));
    }
    if !(cfg.qos_alpha > 0.0) || !cfg.qos_alpha.is_finite() {
        return Err(ConfigError::new("qos_alpha", "qos_alpha must be > 0"));
    }
    let mut seen = BTreeSet::new();
    for (i, r) in cfg.rsus.iter().enumerate() {
        let path = format!("rsus[{i}]");
        r.validate(&path)?;
        if !seen.insert(r.id) {
            return Err(ConfigError::new(format!("{path}.id"), format!("duplicate rsu_id {}", r.id)));
        }
    }
    cfg.params.validate("params")?;
    cfg.load_model.validate("load_model")?;
    if let TraceSource::Synthetic(spec) = &cfg.trace_source {
        spec.validate().map_err(|e| ConfigError::new(format!("trace_source.{}", e.path), e.message))?;
    }
    for (i, f) in cfg.failures.iter().enumerate() {
        let path = format!("failures[{i}]");
        if !seen.contains(&f.rsu_id) {
            return Err(ConfigError::new(
                format!("{path}.rsu_id"),
                format!("unknown rsu_id {}", f.rsu_id),
            ));
        }
        if let Some(up) = f.enable_at {
            if up <= f.disable_at {
                return Err(ConfigError::new(
                    format!("{path}.enable_at"),
                    "enable_at must be after disable_at",
                ));
            }
        }
    }
    Ok(cfg)
}

/// Rejects duplicate vehicle ids within one step and any invalid state.
pub fn validate_frame(frame: &[VehicleState]) -> Result<(), ConfigError> {
    let mut ids = BTreeSet::new();
    for v in frame {
        v.validate()?;
        if !ids.insert(&v.id) {
            return Err(ConfigError::new(
                format!("vehicle[{}]", v.id),
                format!("duplicate vehicle_id {}", v.id),
            ));
        }
    }
    Ok(())
}
