//! Discrete-time simulation loop.
//!
//! Each step runs the same fixed sequence:
//!
//! 1. apply scheduled RSU failures and recoveries
//! 2. advance vehicles from the mobility schedule, despawning and spawning
//! 3. vehicles beacon CAMs to their serving RSU
//! 4. RSUs share loads (per interval, or every step under the oracle)
//! 5. each enabled RSU in id order runs the strategy; its requests are
//!    resolved immediately in vehicle-id order, so the next RSU decides
//!    with those outcomes already applied
//! 6. coverage upkeep: vehicles outside their RSU's coverage drop off and
//!    unconnected vehicles attach to the nearest covering RSU
//! 7. invariants are checked and per-step metrics recorded
//!
//! The loop is single-threaded and fully deterministic for a given config.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{deliver_cams, emit_cams, refresh_oracle, share_loads};
use crate::metrics::{
    classify_and_count, gini, qos_snapshot, MessageCounters, MetricsSeries, StepMetrics,
};
use crate::mobility::{generate_synthetic, ingest_trace, Schedule, TraceError};
use crate::model::{
    validate_config, validate_frame, ConfigError, LoadShareInterval, ResampleEpoch, RsuId,
    RsuRuntime, SimConfig, TaskLoadModel, TraceSource, VehicleId, VehicleState,
};
use crate::qos::QosParams;
use crate::strategies::{
    build_strategy, decide_request, Decision, HandoverStrategy, HandoverTrigger, StepView,
};

/// Relative tolerance on the global load-conservation check.
const CONSERVATION_TOLERANCE: f64 = 1e-9;

// ── Events and state ────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HandoverOutcome {
    Success,
    Failed,
}

impl HandoverOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Success => "SUCCESS",
            Self::Failed => "FAILED",
        }
    }
}

/// One resolved handover request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverEvent {
    pub step: u64,
    pub vehicle_id: VehicleId,
    pub source: RsuId,
    pub target: RsuId,
    pub trigger: HandoverTrigger,
    pub outcome: HandoverOutcome,
    /// Load carried by the vehicle.
    pub offloaded_load: f64,
    /// Target's true assigned load when the request was resolved.
    pub target_load: f64,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trace {path}: {source}")]
    Trace { path: String, source: TraceError },
    #[error("invariant violated at step {step}: {message}")]
    Invariant { step: u64, message: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationState {
    pub step: u64,
    pub vehicles: BTreeMap<VehicleId, VehicleState>,
    /// Sorted by id.
    pub rsus: Vec<RsuRuntime>,
    pub connections: BTreeMap<VehicleId, RsuId>,
    pub offloads: BTreeMap<VehicleId, f64>,
    pub event_log: Vec<HandoverEvent>,
    /// Enabled RSUs covering each vehicle at the end of the last step.
    pub previous_cover: BTreeMap<VehicleId, BTreeSet<RsuId>>,
    pub messages: MessageCounters,
}

impl SimulationState {
    pub fn new(cfg: &SimConfig) -> Self {
        let mut rsus: Vec<RsuRuntime> = cfg.rsus.iter().cloned().map(RsuRuntime::new).collect();
        rsus.sort_by_key(|r| r.id());
        Self {
            rsus,
            ..Self::default()
        }
    }

    pub fn rsu(&self, id: RsuId) -> Option<&RsuRuntime> {
        self.rsus.iter().find(|r| r.id() == id)
    }

    fn rsu_index(&self, id: RsuId) -> Option<usize> {
        self.rsus.iter().position(|r| r.id() == id)
    }

    fn disconnect(&mut self, vid: &VehicleId) {
        if let Some(rid) = self.connections.remove(vid) {
            if let Some(i) = self.rsu_index(rid) {
                self.rsus[i].connected.remove(vid);
                self.rsus[i].tracked.remove(vid);
            }
        }
    }

    fn connect(&mut self, vid: &VehicleId, rid: RsuId) {
        if let Some(i) = self.rsu_index(rid) {
            self.rsus[i].connected.insert(vid.clone());
            self.connections.insert(vid.clone(), rid);
        }
    }

    fn recompute_loads(&mut self) {
        for r in &mut self.rsus {
            r.recompute_load(&self.offloads);
        }
    }

    fn set_enabled(&mut self, rid: RsuId, enabled: bool) {
        let Some(i) = self.rsu_index(rid) else { return };
        if self.rsus[i].spec.enabled == enabled {
            return;
        }
        self.rsus[i].spec.enabled = enabled;
        if !enabled {
            let dropped: Vec<VehicleId> = self.rsus[i].connected.iter().cloned().collect();
            for v in &dropped {
                self.connections.remove(v);
            }
            let r = &mut self.rsus[i];
            r.connected.clear();
            r.tracked.clear();
            r.peer_knowledge.clear();
            r.assigned_load = 0.0;
        }
    }

    /// Checks the connection and load-conservation invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = 0usize;
        for r in &self.rsus {
            if !r.enabled() && !r.connected.is_empty() {
                return Err(format!("disabled rsu {} has connected vehicles", r.id()));
            }
            for v in &r.connected {
                if self.connections.get(v) != Some(&r.id()) {
                    return Err(format!("vehicle {v} listed at rsu {} but mapped elsewhere", r.id()));
                }
                if !self.vehicles.contains_key(v) {
                    return Err(format!("rsu {} serves despawned vehicle {v}", r.id()));
                }
            }
            seen += r.connected.len();
            let expected = r.expected_load(&self.offloads);
            if r.assigned_load != expected {
                return Err(format!(
                    "rsu {} load {} differs from connected total {expected}",
                    r.id(),
                    r.assigned_load
                ));
            }
        }
        if seen != self.connections.len() {
            return Err(format!(
                "{} connections but {seen} rsu memberships",
                self.connections.len()
            ));
        }
        let assigned: f64 = self.rsus.iter().map(|r| r.assigned_load).sum();
        let offloaded: f64 = self
            .connections
            .keys()
            .map(|v| self.offloads.get(v).copied().unwrap_or(0.0))
            .sum();
        if (assigned - offloaded).abs() > CONSERVATION_TOLERANCE * offloaded.abs().max(1.0) {
            return Err(format!("assigned {assigned} != offloaded {offloaded}"));
        }
        Ok(())
    }
}

/// Final state plus the recorded metrics of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: SimulationState,
    pub metrics: MetricsSeries,
}

// ── Load model ──────────────────────────────────────────────────────────────

/// Mixes two 64-bit values into a well-spread seed.
pub fn derive_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.rotate_left(32) ^ 0x9E37_79B9_7F4A_7C15;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Total compute demand of `v`, TFLOPS.
///
/// Deterministic in (model seed, vehicle id, resample epoch).
pub fn vehicle_demand(v: &VehicleState, model: &TaskLoadModel, step: u64) -> f64 {
    let Some((lo, hi)) = model.dynamic_range else {
        return model.static_demand();
    };
    let epoch = match model.resample {
        ResampleEpoch::Lifetime => 0,
        ResampleEpoch::EveryStep => step,
    };
    let seed = derive_seed(derive_seed(model.rng_seed, fnv1a(v.id.as_str())), epoch);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Load `v` sends to its RSU: demand minus what the onboard unit handles.
pub fn offloaded_load(v: &VehicleState, model: &TaskLoadModel, step: u64) -> f64 {
    (vehicle_demand(v, model, step) - model.local_capacity()).max(0.0)
}

// ── Stepping ────────────────────────────────────────────────────────────────

/// Immutable inputs shared by every step of a run.
pub struct StepContext<'a> {
    pub cfg: &'a SimConfig,
    pub strategy: &'a dyn HandoverStrategy,
    /// Load model with the run seed folded in.
    pub load_model: TaskLoadModel,
}

impl<'a> StepContext<'a> {
    pub fn new(cfg: &'a SimConfig, strategy: &'a dyn HandoverStrategy) -> Self {
        let mut load_model = cfg.load_model.clone();
        load_model.rng_seed = derive_seed(cfg.rng_seed, cfg.load_model.rng_seed);
        Self {
            cfg,
            strategy,
            load_model,
        }
    }
}

/// Advances `state` to `step` using the vehicles in `frame`.
pub fn run_step(
    state: &mut SimulationState,
    ctx: &StepContext<'_>,
    frame: &[VehicleState],
    step: u64,
) -> Result<StepMetrics, EngineError> {
    let cfg = ctx.cfg;
    state.step = step;

    // 1. failures
    for f in &cfg.failures {
        if f.disable_at == step {
            state.set_enabled(f.rsu_id, false);
        }
        if f.enable_at == Some(step) {
            state.set_enabled(f.rsu_id, true);
        }
    }

    // 2. mobility
    validate_frame(frame)?;
    let next: BTreeMap<VehicleId, VehicleState> =
        frame.iter().map(|v| (v.id.clone(), v.clone())).collect();
    let gone: Vec<VehicleId> = state.vehicles.keys().filter(|v| !next.contains_key(*v)).cloned().collect();
    for v in &gone {
        state.disconnect(v);
        state.offloads.remove(v);
        state.previous_cover.remove(v);
    }
    state.vehicles = next;
    let resample_all = ctx.load_model.resample == ResampleEpoch::EveryStep;
    for (id, v) in state.vehicles.iter_mut() {
        if resample_all || !state.offloads.contains_key(id) {
            v.generated_load = vehicle_demand(v, &ctx.load_model, step);
            state.offloads.insert(id.clone(), offloaded_load(v, &ctx.load_model, step));
        } else {
            v.generated_load = vehicle_demand(v, &ctx.load_model, step);
        }
    }
    state.recompute_loads();

    // 3. CAMs
    let cams = emit_cams(step, cfg.cam_interval, &state.vehicles, &state.connections);
    state.messages.cam += deliver_cams(&mut state.rsus, cams);

    // 4. load sharing
    let interval = cfg.params.load_share_interval;
    state.messages.load_share += share_loads(step, &mut state.rsus, interval);

    // 5. decide and resolve
    let mut handled = BTreeSet::new();
    let mut moved = BTreeSet::new();
    for idx in 0..state.rsus.len() {
        if !state.rsus[idx].enabled() {
            continue;
        }
        let mut requests = {
            let view = StepView {
                step,
                step_duration: cfg.step_duration,
                qos: QosParams { alpha: cfg.qos_alpha },
                params: cfg.params,
                rsus: &state.rsus,
                vehicles: &state.vehicles,
                offloads: &state.offloads,
                previous_cover: &state.previous_cover,
                handled: &handled,
            };
            ctx.strategy.requests(&state.rsus[idx], &view)
        };
        requests.sort_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id));
        let source = state.rsus[idx].id();
        for req in requests {
            if req.source != source
                || state.connections.get(&req.vehicle_id) != Some(&source)
                || !handled.insert(req.vehicle_id.clone())
            {
                return Err(EngineError::Invariant {
                    step,
                    message: format!("malformed request for vehicle {} from rsu {source}", req.vehicle_id),
                });
            }
            let target_idx = state.rsu_index(req.target);
            let (decision, target_load) = match target_idx {
                Some(t) if t != idx => (
                    decide_request(&state.rsus[t], &req, cfg.step_duration),
                    state.rsus[t].assigned_load,
                ),
                _ => (Decision::Decline, 0.0),
            };
            let outcome = match (decision, target_idx) {
                (Decision::Accept, Some(t)) => {
                    let vid = &req.vehicle_id;
                    state.rsus[idx].connected.remove(vid);
                    let cam = state.rsus[idx].tracked.remove(vid);
                    state.rsus[t].connected.insert(vid.clone());
                    if let Some(cam) = cam {
                        state.rsus[t].tracked.insert(vid.clone(), cam);
                    }
                    state.connections.insert(vid.clone(), req.target);
                    state.rsus[idx].recompute_load(&state.offloads);
                    state.rsus[t].recompute_load(&state.offloads);
                    moved.insert(vid.clone());
                    HandoverOutcome::Success
                }
                _ => HandoverOutcome::Failed,
            };
            state.messages.handover += if outcome == HandoverOutcome::Success { 3 } else { 2 };
            state.event_log.push(HandoverEvent {
                step,
                vehicle_id: req.vehicle_id,
                source,
                target: req.target,
                trigger: req.trigger,
                outcome,
                offloaded_load: req.offloaded_load,
                target_load,
            });
        }
        if interval == LoadShareInterval::Oracle {
            refresh_oracle(step, &mut state.rsus);
        }
    }

    // 6. coverage upkeep; a vehicle just handed over on its predicted
    // position keeps the new link for this step
    let out_of_range: Vec<VehicleId> = state
        .connections
        .iter()
        .filter(|(vid, rid)| {
            !moved.contains(*vid)
                && state
                    .rsu(**rid)
                    .is_none_or(|r| !r.spec.covers(state.vehicles[*vid].position))
        })
        .map(|(vid, _)| vid.clone())
        .collect();
    for v in &out_of_range {
        state.disconnect(v);
    }
    let unconnected: Vec<VehicleId> = state
        .vehicles
        .keys()
        .filter(|v| !state.connections.contains_key(*v))
        .cloned()
        .collect();
    for vid in unconnected {
        if let Some(rid) = ctx.strategy.admit(&state.vehicles[&vid], &state.rsus) {
            state.connect(&vid, rid);
        }
    }
    state.recompute_loads();

    // 7. invariants and metrics
    state
        .check_invariants()
        .map_err(|message| EngineError::Invariant { step, message })?;

    state.previous_cover = state
        .vehicles
        .iter()
        .map(|(id, v)| {
            let cover = state
                .rsus
                .iter()
                .filter(|r| r.enabled() && r.spec.covers(v.position))
                .map(|r| r.id())
                .collect();
            (id.clone(), cover)
        })
        .collect();

    let loads: Vec<f64> = state.rsus.iter().filter(|r| r.enabled()).map(|r| r.assigned_load).collect();
    let g = gini(&loads).unwrap_or(0.0);
    let qos = qos_snapshot(state, QosParams { alpha: cfg.qos_alpha });
    Ok(StepMetrics {
        step,
        gini: g,
        qos_min: qos.min,
        qos_q25: qos.q25,
        qos_avg: qos.avg,
        qos_q75: qos.q75,
        vehicle_count: qos.count,
    })
}

// ── Runs ────────────────────────────────────────────────────────────────────

/// Builds the mobility schedule a config refers to.
///
/// Synthetic scenarios are generated with their own seed mixed with the run
/// seed, so changing the run seed changes the traffic as well as the loads.
pub fn load_schedule(cfg: &SimConfig) -> Result<Schedule, EngineError> {
    match &cfg.trace_source {
        TraceSource::Csv(path) => {
            let shown = path.display().to_string();
            let file = File::open(path).map_err(|e| EngineError::Trace {
                path: shown.clone(),
                source: TraceError::Io(e),
            })?;
            ingest_trace(BufReader::new(file), cfg.step_duration)
                .map_err(|source| EngineError::Trace { path: shown, source })
        }
        TraceSource::Synthetic(spec) => {
            let mut spec = spec.clone();
            spec.rng_seed = derive_seed(cfg.rng_seed, spec.rng_seed);
            Ok(generate_synthetic(&spec, cfg.step_duration)?)
        }
    }
}

/// Validates `cfg`, builds its schedule and runs it.
pub fn run(cfg: &SimConfig) -> Result<RunOutput, EngineError> {
    if cfg.duration == 0 {
        return Ok(empty_output(cfg));
    }
    let cfg = validate_config(cfg.clone())?;
    let schedule = load_schedule(&cfg)?;
    run_schedule(&cfg, &schedule)
}

/// Runs `cfg` over an already built schedule (its trace source is ignored).
pub fn run_schedule(cfg: &SimConfig, schedule: &Schedule) -> Result<RunOutput, EngineError> {
    if cfg.duration == 0 {
        return Ok(empty_output(cfg));
    }
    let cfg = validate_config(cfg.clone())?;
    let strategy = build_strategy(cfg.strategy);
    let ctx = StepContext::new(&cfg, strategy.as_ref());
    let mut state = SimulationState::new(&cfg);
    let mut steps = Vec::with_capacity(cfg.duration as usize);
    for step in 0..cfg.duration {
        steps.push(run_step(&mut state, &ctx, schedule.at(step), step)?);
    }
    let metrics = MetricsSeries {
        strategy: cfg.strategy,
        load_share_interval: cfg.params.load_share_interval,
        steps,
        handovers: classify_and_count(&state.event_log),
        messages: state.messages,
    };
    Ok(RunOutput { state, metrics })
}

fn empty_output(cfg: &SimConfig) -> RunOutput {
    RunOutput {
        state: SimulationState::new(cfg),
        metrics: MetricsSeries {
            strategy: cfg.strategy,
            load_share_interval: cfg.params.load_share_interval,
            steps: Vec::new(),
            handovers: Default::default(),
            messages: MessageCounters::default(),
        },
    }
}
