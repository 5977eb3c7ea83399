//! Handover decision logic.
//!
//! Every strategy runs per RSU over that RSU's connected vehicles and emits
//! [`HandoverRequest`]s; the engine resolves each one against the target
//! with [`decide_request`]. MACH decides from what the RSU agent actually
//! knows (CAM-tracked vehicle states, possibly stale peer loads). The three
//! baselines are idealized and read true vehicle states.
//!
//! Ties are broken by lowest RSU id (after distance where distance applies)
//! so that every decision is deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mobility::predict_position;
use crate::model::{
    CamMessage, Point, RsuId, RsuRuntime, StrategyKind, StrategyParams, VehicleId, VehicleState,
};
use crate::qos::{qos_distance, qos_load, QosParams};

/// Slack on the target's utilization cap; keeps source-side projections and
/// the target's own summation order from disagreeing by rounding.
pub const UTILIZATION_CAP_EPS: f64 = 1e-9;

const TIE_EPS: f64 = 1e-9;

// ── Protocol types ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HandoverTrigger {
    Range,
    LoadBalancing,
    Overload,
}

impl HandoverTrigger {
    pub const ALL: [HandoverTrigger; 3] = [Self::Range, Self::LoadBalancing, Self::Overload];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Range => "RANGE",
            Self::LoadBalancing => "LOAD_BALANCING",
            Self::Overload => "OVERLOAD",
        }
    }
}

impl fmt::Display for HandoverTrigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Request from a source RSU asking a target to take over a vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverRequest {
    pub vehicle_id: VehicleId,
    pub source: RsuId,
    pub target: RsuId,
    pub trigger: HandoverTrigger,
    pub offloaded_load: f64,
    pub issued_at: u64,
    /// Vehicle state as the source knows it; transferred on acceptance.
    pub vehicle_state: VehicleState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Decline,
}

/// Candidate ranking score in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SuitabilityScore(f64);

impl SuitabilityScore {
    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// What a source RSU knows about a peer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateView {
    pub id: RsuId,
    pub position: Point,
    pub coverage_radius: f64,
    pub capacity: f64,
    /// Last reported load, plus anything this source already sent it this step.
    pub known_load: f64,
}

impl CandidateView {
    pub fn covers(&self, p: Point) -> bool {
        self.position.distance(p) <= self.coverage_radius
    }
}

/// Predicted-coverage QoS times projected-load QoS for moving `v` to `candidate`.
pub fn suitability(
    v: &VehicleState,
    offload: f64,
    candidate: &CandidateView,
    qos: QosParams,
    step_duration: f64,
) -> SuitabilityScore {
    let predicted = predict_position(v, 1, step_duration);
    let dist = qos_distance(
        predicted.distance(candidate.position),
        candidate.coverage_radius,
        qos.alpha,
    );
    let load = qos_load(candidate.known_load + offload, candidate.capacity);
    SuitabilityScore(dist * load)
}

/// Target-side admission test.
///
/// RANGE requests are imperative: accepted whenever the target is enabled and
/// covers the vehicle's predicted or current position. Load-driven requests
/// are accepted only if the target's true load after taking the vehicle stays
/// within capacity.
pub fn decide_request(target: &RsuRuntime, req: &HandoverRequest, step_duration: f64) -> Decision {
    if !target.enabled() || target.id() != req.target {
        return Decision::Decline;
    }
    let ok = match req.trigger {
        HandoverTrigger::Range => {
            let predicted = predict_position(&req.vehicle_state, 1, step_duration);
            target.spec.covers(predicted) || target.spec.covers(req.vehicle_state.position)
        }
        HandoverTrigger::LoadBalancing | HandoverTrigger::Overload => {
            (target.assigned_load + req.offloaded_load) / target.spec.capacity
                <= 1.0 + UTILIZATION_CAP_EPS
        }
    };
    if ok {
        Decision::Accept
    } else {
        Decision::Decline
    }
}

// ── Strategy interface ──────────────────────────────────────────────────────

/// Read-only snapshot handed to a strategy for one RSU's turn.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub step: u64,
    pub step_duration: f64,
    pub qos: QosParams,
    pub params: StrategyParams,
    pub rsus: &'a [RsuRuntime],
    /// True vehicle states.
    pub vehicles: &'a BTreeMap<VehicleId, VehicleState>,
    pub offloads: &'a BTreeMap<VehicleId, f64>,
    /// RSUs whose coverage held each vehicle at the end of the previous step.
    pub previous_cover: &'a BTreeMap<VehicleId, BTreeSet<RsuId>>,
    /// Vehicles already part of a request this step.
    pub handled: &'a BTreeSet<VehicleId>,
}

impl StepView<'_> {
    fn offload(&self, v: &VehicleId) -> f64 {
        self.offloads.get(v).copied().unwrap_or(0.0)
    }

    /// Connected, not-yet-handled vehicles of `rsu` with their true state.
    fn true_states<'b>(&'b self, rsu: &'b RsuRuntime) -> impl Iterator<Item = &'b VehicleState> + 'b {
        rsu.connected
            .iter()
            .filter(|v| !self.handled.contains(*v))
            .filter_map(|v| self.vehicles.get(v))
    }

    fn request(&self, rsu: &RsuRuntime, v: &VehicleState, target: RsuId, trigger: HandoverTrigger) -> HandoverRequest {
        HandoverRequest {
            vehicle_id: v.id.clone(),
            source: rsu.id(),
            target,
            trigger,
            offloaded_load: self.offload(&v.id),
            issued_at: self.step,
            vehicle_state: v.clone(),
        }
    }
}

pub trait HandoverStrategy: Send + Sync {
    fn kind(&self) -> StrategyKind;

    /// Requests `rsu` issues this step. At most one per vehicle.
    fn requests(&self, rsu: &RsuRuntime, view: &StepView<'_>) -> Vec<HandoverRequest>;

    /// RSU an unconnected vehicle attaches to, if any covers it.
    fn admit(&self, v: &VehicleState, rsus: &[RsuRuntime]) -> Option<RsuId> {
        nearest_covering(v.position, rsus.iter(), None)
    }
}

pub fn build_strategy(kind: StrategyKind) -> Box<dyn HandoverStrategy> {
    match kind {
        StrategyKind::Mach => Box::new(Mach),
        StrategyKind::Nearest => Box::new(Nearest),
        StrategyKind::Earliest => Box::new(Earliest),
        StrategyKind::Latest => Box::new(Latest),
    }
}

/// Nearest enabled RSU covering `p`, ties to the lowest id.
pub fn nearest_covering<'a>(
    p: Point,
    rsus: impl Iterator<Item = &'a RsuRuntime>,
    exclude: Option<RsuId>,
) -> Option<RsuId> {
    rsus.filter(|r| r.enabled() && Some(r.id()) != exclude && r.spec.covers(p))
        .map(|r| (p.distance(r.spec.position), r.id()))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

fn rsu(rsus: &[RsuRuntime], id: RsuId) -> Option<&RsuRuntime> {
    rsus.iter().find(|r| r.id() == id)
}

// ── Baselines ───────────────────────────────────────────────────────────────

/// Target for the nearest-RSU baseline, `None` when no change is needed.
///
/// The vehicle belongs to the nearest enabled RSU covering it. When the
/// current RSU is tied for nearest it is kept.
pub fn nearest_target(v: &VehicleState, current: RsuId, rsus: &[RsuRuntime]) -> Option<RsuId> {
    let best = nearest_covering(v.position, rsus.iter(), None)?;
    if best == current {
        return None;
    }
    let d_best = v.position.distance(rsu(rsus, best)?.spec.position);
    if let Some(cur) = rsu(rsus, current).filter(|r| r.enabled() && r.spec.covers(v.position)) {
        if (v.position.distance(cur.spec.position) - d_best).abs() <= TIE_EPS {
            return None;
        }
    }
    Some(best)
}

/// Target for the earliest-possible baseline.
///
/// Switches to a newly entered coverage area on the step it is entered (the
/// nearest one if several are entered together). A vehicle that leaves its
/// current RSU without entering anything new moves to the nearest RSU still
/// covering it.
pub fn earliest_target(
    v: &VehicleState,
    current: RsuId,
    previous_cover: Option<&BTreeSet<RsuId>>,
    rsus: &[RsuRuntime],
) -> Option<RsuId> {
    let entered = rsus.iter().filter(|r| {
        r.id() != current && previous_cover.is_some_and(|prev| !prev.contains(&r.id()))
    });
    if let Some(t) = nearest_covering(v.position, entered, None) {
        return Some(t);
    }
    let still_covered = rsu(rsus, current).is_some_and(|r| r.enabled() && r.spec.covers(v.position));
    if still_covered {
        None
    } else {
        nearest_covering(v.position, rsus.iter(), Some(current))
    }
}

/// Target for the latest-possible baseline.
///
/// Acts only once the predicted next position leaves current coverage, then
/// picks the nearest RSU covering that predicted position. If none covers
/// it, the vehicle stays until it actually leaves, at which point the
/// nearest RSU covering its current position (if any) takes over.
pub fn latest_target(v: &VehicleState, current: RsuId, rsus: &[RsuRuntime], step_duration: f64) -> Option<RsuId> {
    let cur = rsu(rsus, current)?;
    let predicted = predict_position(v, 1, step_duration);
    if cur.spec.covers(predicted) {
        return None;
    }
    nearest_covering(predicted, rsus.iter(), Some(current)).or_else(|| {
        if cur.spec.covers(v.position) {
            None
        } else {
            nearest_covering(v.position, rsus.iter(), Some(current))
        }
    })
}

fn baseline_requests(
    rsu: &RsuRuntime,
    view: &StepView<'_>,
    target: impl Fn(&VehicleState) -> Option<RsuId>,
) -> Vec<HandoverRequest> {
    view.true_states(rsu)
        .filter_map(|v| target(v).map(|t| view.request(rsu, v, t, HandoverTrigger::Range)))
        .collect()
}

fn connected_requests(
    vehicles: &BTreeMap<VehicleId, VehicleState>,
    connections: &BTreeMap<VehicleId, RsuId>,
    offloads: &BTreeMap<VehicleId, f64>,
    step: u64,
    target: impl Fn(&VehicleState, RsuId) -> Option<RsuId>,
) -> Vec<HandoverRequest> {
    connections
        .iter()
        .filter_map(|(vid, &source)| {
            let v = vehicles.get(vid)?;
            let t = target(v, source)?;
            Some(HandoverRequest {
                vehicle_id: vid.clone(),
                source,
                target: t,
                trigger: HandoverTrigger::Range,
                offloaded_load: offloads.get(vid).copied().unwrap_or(0.0),
                issued_at: step,
                vehicle_state: v.clone(),
            })
        })
        .collect()
}

/// Nearest-RSU baseline over every connected vehicle.
pub fn baseline_nearest(
    vehicles: &BTreeMap<VehicleId, VehicleState>,
    rsus: &[RsuRuntime],
    connections: &BTreeMap<VehicleId, RsuId>,
    offloads: &BTreeMap<VehicleId, f64>,
    step: u64,
) -> Vec<HandoverRequest> {
    connected_requests(vehicles, connections, offloads, step, |v, cur| nearest_target(v, cur, rsus))
}

/// Earliest-possible baseline over every connected vehicle.
pub fn baseline_earliest(
    vehicles: &BTreeMap<VehicleId, VehicleState>,
    rsus: &[RsuRuntime],
    connections: &BTreeMap<VehicleId, RsuId>,
    previous_cover: &BTreeMap<VehicleId, BTreeSet<RsuId>>,
    offloads: &BTreeMap<VehicleId, f64>,
    step: u64,
) -> Vec<HandoverRequest> {
    connected_requests(vehicles, connections, offloads, step, |v, cur| {
        earliest_target(v, cur, previous_cover.get(&v.id), rsus)
    })
}

/// Latest-possible baseline over every connected vehicle.
pub fn baseline_latest(
    vehicles: &BTreeMap<VehicleId, VehicleState>,
    rsus: &[RsuRuntime],
    connections: &BTreeMap<VehicleId, RsuId>,
    offloads: &BTreeMap<VehicleId, f64>,
    step: u64,
    step_duration: f64,
) -> Vec<HandoverRequest> {
    connected_requests(vehicles, connections, offloads, step, |v, cur| {
        latest_target(v, cur, rsus, step_duration)
    })
}

pub struct Nearest;

impl HandoverStrategy for Nearest {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Nearest
    }

    fn requests(&self, rsu: &RsuRuntime, view: &StepView<'_>) -> Vec<HandoverRequest> {
        baseline_requests(rsu, view, |v| nearest_target(v, rsu.id(), view.rsus))
    }
}

pub struct Earliest;

impl HandoverStrategy for Earliest {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Earliest
    }

    fn requests(&self, rsu: &RsuRuntime, view: &StepView<'_>) -> Vec<HandoverRequest> {
        baseline_requests(rsu, view, |v| {
            earliest_target(v, rsu.id(), view.previous_cover.get(&v.id), view.rsus)
        })
    }
}

pub struct Latest;

impl HandoverStrategy for Latest {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Latest
    }

    fn requests(&self, rsu: &RsuRuntime, view: &StepView<'_>) -> Vec<HandoverRequest> {
        baseline_requests(rsu, view, |v| latest_target(v, rsu.id(), view.rsus, view.step_duration))
    }
}

// ── MACH ────────────────────────────────────────────────────────────────────

/// Decentralized RSU agent: range-driven handovers first, then overload
/// shedding, then optional load balancing.
pub struct Mach;

impl HandoverStrategy for Mach {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Mach
    }

    fn requests(&self, rsu: &RsuRuntime, view: &StepView<'_>) -> Vec<HandoverRequest> {
        mach_step(rsu, view)
    }
}

fn state_from_cam(cam: &CamMessage) -> VehicleState {
    VehicleState::at(cam.vehicle_id.as_str(), cam.position, cam.speed, cam.direction)
}

/// Working state of one RSU's MACH pass.
struct MachPass<'a, 'v> {
    rsu: &'a RsuRuntime,
    view: &'a StepView<'v>,
    peers: Vec<CandidateView>,
    source_load: f64,
    out: Vec<HandoverRequest>,
    taken: BTreeSet<VehicleId>,
}

impl MachPass<'_, '_> {
    fn utilization(&self) -> f64 {
        self.source_load / self.rsu.spec.capacity
    }

    fn score(&self, v: &VehicleState, offload: f64, c: &CandidateView) -> f64 {
        suitability(v, offload, c, self.view.qos, self.view.step_duration).value()
    }

    fn projected(c: &CandidateView, offload: f64) -> f64 {
        (c.known_load + offload) / c.capacity
    }

    /// Passes the hysteresis margin and the target's capacity test as far as
    /// this RSU can tell.
    fn load_move_allowed(&self, c: &CandidateView, offload: f64) -> bool {
        let p = Self::projected(c, offload);
        p < self.utilization() - self.view.params.hysteresis && p <= 1.0
    }

    fn push(&mut self, v: &VehicleState, offload: f64, target: RsuId, trigger: HandoverTrigger) {
        if let Some(c) = self.peers.iter_mut().find(|c| c.id == target) {
            c.known_load += offload;
        }
        self.source_load -= offload;
        self.taken.insert(v.id.clone());
        self.out.push(HandoverRequest {
            vehicle_id: v.id.clone(),
            source: self.rsu.id(),
            target,
            trigger,
            offloaded_load: offload,
            issued_at: self.view.step,
            vehicle_state: v.clone(),
        });
    }

    /// Nearest peer covering `p`, ties to the lowest id.
    fn nearest_peer_covering(&self, p: Point) -> Option<RsuId> {
        self.peers
            .iter()
            .filter(|c| c.covers(p))
            .map(|c| (p.distance(c.position), c.id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
    }

    /// Best peer covering `p`: suitability, then distance to `p`, then id.
    fn best_range_target(&self, v: &VehicleState, offload: f64, p: Point) -> Option<RsuId> {
        self.peers
            .iter()
            .filter(|c| c.covers(p))
            .map(|c| (self.score(v, offload, c), p.distance(c.position), c.id))
            .min_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)))
            .map(|(_, _, id)| id)
    }
}

/// One MACH decision round for `rsu`.
///
/// * RANGE: a vehicle whose predicted next position lies beyond
///   `(1 - leaving_threshold) * radius` goes to the most suitable peer
///   covering that predicted position. With no such peer it stays until it
///   actually leaves coverage, then goes to the nearest peer covering its
///   current position, if any.
/// * OVERLOAD: while projected utilization exceeds `overload_threshold`, the
///   single most suitable (vehicle, peer) pair passing the hysteresis test is
///   shed. The minimum-suitability filter does not apply here.
/// * LOAD_BALANCING: each remaining vehicle moves to its most suitable peer
///   with suitability at least `min_suitability` whose projected utilization
///   beats this RSU's by more than `hysteresis`.
///
/// Load-driven moves only consider peers covering the vehicle and never
/// project a peer above capacity.
pub fn mach_step(rsu: &RsuRuntime, view: &StepView<'_>) -> Vec<HandoverRequest> {
    let params = view.params;
    let spec = &rsu.spec;
    let vehicles: Vec<(VehicleState, f64)> = rsu
        .connected
        .iter()
        .filter(|v| !view.handled.contains(*v))
        .filter_map(|v| rsu.tracked.get(v).map(|cam| (state_from_cam(cam), view.offload(v))))
        .collect();
    let peers = view
        .rsus
        .iter()
        .filter(|r| r.enabled() && r.id() != rsu.id())
        .map(|r| CandidateView {
            id: r.id(),
            position: r.spec.position,
            coverage_radius: r.spec.coverage_radius,
            capacity: r.spec.capacity,
            known_load: rsu.peer_knowledge.get(&r.id()).map_or(0.0, |k| k.known_load),
        })
        .collect();
    let mut pass = MachPass {
        rsu,
        view,
        peers,
        source_load: rsu.assigned_load,
        out: Vec::new(),
        taken: BTreeSet::new(),
    };

    // RANGE
    let inner = (1.0 - params.leaving_threshold) * spec.coverage_radius;
    for (v, offload) in &vehicles {
        let predicted = predict_position(v, 1, view.step_duration);
        if predicted.distance(spec.position) <= inner {
            continue;
        }
        let target = pass.best_range_target(v, *offload, predicted).or_else(|| {
            (!spec.covers(v.position))
                .then(|| pass.nearest_peer_covering(v.position))
                .flatten()
        });
        if let Some(t) = target {
            pass.push(v, *offload, t, HandoverTrigger::Range);
        }
    }

    // OVERLOAD
    while pass.utilization() > params.overload_threshold {
        let mut best: Option<(f64, usize, RsuId)> = None;
        for (i, (v, offload)) in vehicles.iter().enumerate() {
            if pass.taken.contains(&v.id) || *offload <= 0.0 {
                continue;
            }
            for c in pass.peers.iter().filter(|c| c.covers(v.position)) {
                if !pass.load_move_allowed(c, *offload) {
                    continue;
                }
                let s = pass.score(v, *offload, c);
                if best.is_none_or(|(bs, _, _)| s > bs) {
                    best = Some((s, i, c.id));
                }
            }
        }
        let Some((_, i, target)) = best else { break };
        let (v, offload) = &vehicles[i];
        pass.push(v, *offload, target, HandoverTrigger::Overload);
    }

    // LOAD_BALANCING
    for (v, offload) in &vehicles {
        if pass.taken.contains(&v.id) || *offload <= 0.0 {
            continue;
        }
        let target = pass
            .peers
            .iter()
            .filter(|c| c.covers(v.position) && pass.load_move_allowed(c, *offload))
            .map(|c| (pass.score(v, *offload, c), MachPass::projected(c, *offload), c.id))
            .filter(|(s, _, _)| *s >= params.min_suitability)
            .min_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)))
            .map(|(_, _, id)| id);
        if let Some(t) = target {
            pass.push(v, *offload, t, HandoverTrigger::LoadBalancing);
        }
    }

    pass.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LoadShareInterval, PeerLoad, RsuSpec};

    const DT: f64 = 1.0;

    fn rsu(id: u32, x: f64, y: f64) -> RsuRuntime {
        RsuRuntime::new(RsuSpec::new(id, Point::new(x, y), 70.0, 65.0))
    }

    fn car(id: &str, x: f64, y: f64, speed: f64) -> VehicleState {
        VehicleState::at(id, Point::new(x, y), speed, Point::new(1.0, 0.0))
    }

    struct World {
        rsus: Vec<RsuRuntime>,
        vehicles: BTreeMap<VehicleId, VehicleState>,
        offloads: BTreeMap<VehicleId, f64>,
        prev: BTreeMap<VehicleId, BTreeSet<RsuId>>,
        handled: BTreeSet<VehicleId>,
        params: StrategyParams,
    }

    impl World {
        fn new(rsus: Vec<RsuRuntime>) -> Self {
            Self {
                rsus,
                vehicles: BTreeMap::new(),
                offloads: BTreeMap::new(),
                prev: BTreeMap::new(),
                handled: BTreeSet::new(),
                params: StrategyParams::default(),
            }
        }

        /// Connects `v` to `rsu_idx` with a fresh CAM.
        fn attach(&mut self, rsu_idx: usize, v: VehicleState, offload: f64) {
            let r = &mut self.rsus[rsu_idx];
            r.connected.insert(v.id.clone());
            r.tracked.insert(v.id.clone(), CamMessage::from_state(&v, 0));
            r.assigned_load += offload;
            self.offloads.insert(v.id.clone(), offload);
            self.vehicles.insert(v.id.clone(), v);
        }

        fn share(&mut self) {
            crate::knowledge::share_loads(0, &mut self.rsus, LoadShareInterval::Oracle);
        }

        fn view(&self) -> StepView<'_> {
            StepView {
                step: 0,
                step_duration: DT,
                qos: QosParams::default(),
                params: self.params,
                rsus: &self.rsus,
                vehicles: &self.vehicles,
                offloads: &self.offloads,
                previous_cover: &self.prev,
                handled: &self.handled,
            }
        }

        fn run(&self, kind: StrategyKind, idx: usize) -> Vec<HandoverRequest> {
            build_strategy(kind).requests(&self.rsus[idx], &self.view())
        }
    }

    fn idle_candidate(x: f64) -> CandidateView {
        CandidateView {
            id: RsuId(9),
            position: Point::new(x, 0.0),
            coverage_radius: 70.0,
            capacity: 65.0,
            known_load: 0.0,
        }
    }

    #[test]
    fn suitability_examples() {
        let v = car("a", 0.0, 0.0, 10.0);
        let c = idle_candidate(50.0);
        assert_eq!(suitability(&v, 1.5, &c, QosParams::default(), DT).value(), 1.0);

        let busy = CandidateView { known_load: 128.5, ..c };
        let s = suitability(&v, 1.5, &busy, QosParams::default(), DT).value();
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn suitability_uses_predicted_position() {
        // Now 70 m away (inside), predicted 100 m away (outside).
        let v = VehicleState::at("a", Point::new(-70.0, 0.0), 30.0, Point::new(-1.0, 0.0));
        let s = suitability(&v, 0.0, &idle_candidate(0.0), QosParams { alpha: 0.0231 }, DT).value();
        assert!((s - (-0.0231f64 * 30.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn score_constructor_bounds() {
        assert!(SuitabilityScore::new(0.5).is_some());
        assert!(SuitabilityScore::new(1.5).is_none());
        assert!(SuitabilityScore::new(-0.1).is_none());
    }

    #[test]
    fn range_request_to_idle_neighbor() {
        let mut w = World::new(vec![rsu(0, 0.0, 0.0), rsu(1, 120.0, 0.0)]);
        w.attach(0, car("a", 65.0, 0.0, 10.0), 1.5);
        w.share();
        let reqs = w.run(StrategyKind::Mach, 0);
        assert_eq!(reqs.len(), 1);
        assert_eq!((reqs[0].target, reqs[0].trigger), (RsuId(1), HandoverTrigger::Range));
    }

    #[test]
    fn leaving_threshold_triggers_early() {
        let mut w = World::new(vec![rsu(0, 0.0, 0.0), rsu(1, 100.0, 0.0)]);
        w.attach(0, car("a", 50.0, 0.0, 10.0), 1.5);
        w.share();
        assert!(w.run(StrategyKind::Mach, 0).is_empty());
        w.params.leaving_threshold = 0.2;
        let reqs = w.run(StrategyKind::Mach, 0);
        assert_eq!(reqs.len(), 1);
        assert_eq!(reqs[0].trigger, HandoverTrigger::Range);
    }

    #[test]
    fn range_without_covering_peer_waits() {
        let mut w = World::new(vec![rsu(0, 0.0, 0.0), rsu(1, 300.0, 0.0)]);
        w.attach(0, car("a", 65.0, 0.0, 10.0), 1.5);
        w.share();
        assert!(w.run(StrategyKind::Mach, 0).is_empty());
        assert!(w.run(StrategyKind::Latest, 0).is_empty());
    }

    #[test]
    fn balanced_peers_below_threshold_stay_put() {
        let mut w = World::new(vec![rsu(0, 0.0, 0.0), rsu(1, 40.0, 0.0)]);
        // Utilization 0.6 at rsu 0; rsu 1 at 0.58 once a vehicle is added.
        for i in 0..26 {
            w.attach(0, car(&format!("a{i:02}"), 20.0, 0.0, 0.0), 1.5);
        }
        w.rsus[1].assigned_load = 36.0;
        w.share();
        assert!((w.rsus[0].utilization() - 0.6).abs() < 1e-12);
        assert!(w.run(StrategyKind::Mach, 0).is_empty());
    }

    #[test]
    fn overload_sheds_to_idle_neighbor() {
        let mut w = World::new(vec![rsu(0, 0.0, 0.0), rsu(1, 40.0, 0.0)]);
        w.params.min_suitability = 1.0; // rule out load balancing
        w.params.hysteresis = 0.05;
        // 0.7 + a little over capacity share
        let n = 31;
        let offload = 65.0 * 0.7 / 30.0;
        // Heading away from the peer: covered now, but its predicted position
        // is not, so suitability stays below the load-balancing floor.
        for i in 0..n {
            let v = VehicleState::at(format!("a{i:02}"), Point::new(-25.0, 0.0), 10.0, Point::new(-1.0, 0.0));
            w.attach(0, v, offload);
        }
        w.rsus[1].assigned_load = 50.0; // suitability < 1 once projected over 65
        w.share();
        w.rsus[1].peer_knowledge.clear();
        w.rsus[0].peer_knowledge.insert(RsuId(1), PeerLoad { known_load: 0.0, known_at: 0 });
        assert!(w.rsus[0].utilization() > 0.7);
        let reqs = w.run(StrategyKind::Mach, 0);
        assert!(!reqs.is_empty());
        assert!(reqs.iter().all(|r| r.trigger == HandoverTrigger::Overload));
        let shed: f64 = reqs.iter().map(|r| r.offloaded_load).sum();
        assert!((w.rsus[0].assigned_load - shed) / 65.0 <= 0.7 + 1e-12);
    }

    #[test]
    fn load_balancing_respects_hysteresis_and_min_suitability() {
        let mut w = World::new(vec![rsu(0, 0.0, 0.0), rsu(1, 40.0, 0.0)]);
        w.params.overload_threshold = 1.0;
        for i in 0..20 {
            w.attach(0, car(&format!("a{i:02}"), 20.0, 0.0, 0.0), 2.0);
        }
        w.share();
        // 40/65 = 0.615 vs idle peer: moves until the gap closes below hysteresis.
        let reqs = w.run(StrategyKind::Mach, 0);
        assert!(!reqs.is_empty());
        assert!(reqs.iter().all(|r| r.trigger == HandoverTrigger::LoadBalancing));
        let moved = reqs.len() as f64 * 2.0;
        let (src, dst) = ((40.0 - moved) / 65.0, moved / 65.0);
        assert!(src - dst <= 0.05 + 2.0 * 2.0 / 65.0);

        w.params.hysteresis = 1.0;
        assert!(w.run(StrategyKind::Mach, 0).is_empty());
    }

    #[test]
    fn mach_never_repeats_a_vehicle() {
        let mut w = World::new(vec![rsu(0, 0.0, 0.0), rsu(1, 40.0, 0.0), rsu(2, 0.0, 40.0)]);
        w.params.overload_threshold = 0.3;
        w.params.hysteresis = 0.0;
        w.params.min_suitability = 0.0;
        for i in 0..30 {
            w.attach(0, car(&format!("a{i:02}"), 60.0 + (i % 3) as f64, 5.0, 8.0), 2.0);
        }
        w.share();
        let reqs = w.run(StrategyKind::Mach, 0);
        let ids: BTreeSet<_> = reqs.iter().map(|r| &r.vehicle_id).collect();
        assert_eq!(ids.len(), reqs.len());
    }

    #[test]
    fn handled_vehicles_are_skipped() {
        let mut w = World::new(vec![rsu(0, 0.0, 0.0), rsu(1, 120.0, 0.0)]);
        w.attach(0, car("a", 65.0, 0.0, 10.0), 1.5);
        w.handled.insert(VehicleId::from("a"));
        for kind in StrategyKind::ALL {
            assert!(w.run(kind, 0).is_empty(), "{kind}");
        }
    }

    #[test]
    fn decide_examples() {
        let target = rsu(1, 100.0, 0.0);
        let v = car("a", 60.0, 0.0, 10.0);
        let mut req = HandoverRequest {
            vehicle_id: v.id.clone(),
            source: RsuId(0),
            target: RsuId(1),
            trigger: HandoverTrigger::Range,
            offloaded_load: 1.5,
            issued_at: 0,
            vehicle_state: v,
        };
        assert_eq!(decide_request(&target, &req, DT), Decision::Accept);

        let mut busy = target.clone();
        busy.assigned_load = 1.2 * 65.0 - 1.5;
        req.trigger = HandoverTrigger::LoadBalancing;
        assert_eq!(decide_request(&busy, &req, DT), Decision::Decline);
        busy.assigned_load = 65.0 - 1.5;
        assert_eq!(decide_request(&busy, &req, DT), Decision::Accept);

        let mut dead = target;
        dead.spec.enabled = false;
        req.trigger = HandoverTrigger::Range;
        assert_eq!(decide_request(&dead, &req, DT), Decision::Decline);
    }

    #[test]
    fn range_request_outside_target_is_declined() {
        let target = rsu(1, 500.0, 0.0);
        let v = car("a", 60.0, 0.0, 10.0);
        let req = HandoverRequest {
            vehicle_id: v.id.clone(),
            source: RsuId(0),
            target: RsuId(1),
            trigger: HandoverTrigger::Range,
            offloaded_load: 1.5,
            issued_at: 0,
            vehicle_state: v,
        };
        assert_eq!(decide_request(&target, &req, DT), Decision::Decline);
    }

    #[test]
    fn nearest_tie_break_rules() {
        let rsus = vec![rsu(0, 0.0, 0.0), rsu(1, 100.0, 0.0), rsu(2, 50.0, 200.0)];
        let mid = car("a", 50.0, 0.0, 0.0);
        assert_eq!(nearest_target(&mid, RsuId(1), &rsus), None);
        assert_eq!(nearest_target(&mid, RsuId(0), &rsus), None);
        assert_eq!(nearest_target(&mid, RsuId(2), &rsus), Some(RsuId(0)));
        assert_eq!(nearest_target(&car("b", 55.0, 0.0, 0.0), RsuId(0), &rsus), Some(RsuId(1)));
    }

    #[test]
    fn single_rsu_never_hands_over() {
        let rsus = vec![rsu(0, 0.0, 0.0)];
        let v = car("a", 69.0, 0.0, 10.0);
        assert_eq!(nearest_target(&v, RsuId(0), &rsus), None);
        assert_eq!(earliest_target(&v, RsuId(0), Some(&BTreeSet::from([RsuId(0)])), &rsus), None);
        assert_eq!(latest_target(&v, RsuId(0), &rsus, DT), None);
    }

    #[test]
    fn earliest_switches_on_entry() {
        let rsus = vec![rsu(0, 0.0, 0.0), rsu(1, 100.0, 0.0), rsu(2, 100.0, 20.0)];
        let v = car("a", 35.0, 0.0, 10.0);
        let prev = BTreeSet::from([RsuId(0)]);
        // 35 m: inside 0 and 1 (65 m) and 2 (~68 m); 1 is nearer.
        assert_eq!(earliest_target(&v, RsuId(0), Some(&prev), &rsus), Some(RsuId(1)));
        let prev_all = BTreeSet::from([RsuId(0), RsuId(1), RsuId(2)]);
        assert_eq!(earliest_target(&v, RsuId(0), Some(&prev_all), &rsus), None);
    }

    #[test]
    fn earliest_falls_back_when_current_is_left() {
        let rsus = vec![rsu(0, 0.0, 0.0), rsu(1, 100.0, 0.0)];
        let v = car("a", 75.0, 0.0, 10.0);
        let prev = BTreeSet::from([RsuId(0), RsuId(1)]);
        assert_eq!(earliest_target(&v, RsuId(0), Some(&prev), &rsus), Some(RsuId(1)));
    }

    #[test]
    fn latest_defers_until_predicted_exit() {
        let rsus = vec![rsu(0, 0.0, 0.0), rsu(1, 100.0, 0.0)];
        assert_eq!(latest_target(&car("a", 50.0, 0.0, 10.0), RsuId(0), &rsus, DT), None);
        assert_eq!(latest_target(&car("a", 65.0, 0.0, 10.0), RsuId(0), &rsus, DT), Some(RsuId(1)));
        assert_eq!(latest_target(&car("a", 69.0, 0.0, 0.0), RsuId(0), &rsus, DT), None);
    }

    #[test]
    fn disabled_rsus_are_never_targets() {
        let mut rsus = vec![rsu(0, 0.0, 0.0), rsu(1, 100.0, 0.0)];
        rsus[1].spec.enabled = false;
        let v = car("a", 65.0, 0.0, 10.0);
        assert_eq!(nearest_target(&car("b", 80.0, 0.0, 0.0), RsuId(0), &rsus), None);
        assert_eq!(latest_target(&v, RsuId(0), &rsus, DT), None);
        assert_eq!(earliest_target(&v, RsuId(0), Some(&BTreeSet::new()), &rsus), None);
    }

    #[test]
    fn fleet_baselines_cover_all_connections() {
        let rsus = vec![rsu(0, 0.0, 0.0), rsu(1, 100.0, 0.0)];
        let vehicles: BTreeMap<_, _> = [car("a", 65.0, 0.0, 10.0), car("b", 10.0, 0.0, 10.0)]
            .into_iter()
            .map(|v| (v.id.clone(), v))
            .collect();
        let conns: BTreeMap<_, _> = vehicles.keys().map(|k| (k.clone(), RsuId(0))).collect();
        let offloads = BTreeMap::new();
        let latest = baseline_latest(&vehicles, &rsus, &conns, &offloads, 3, DT);
        assert_eq!(latest.len(), 1);
        assert_eq!(latest[0].vehicle_id.as_str(), "a");
        let nearest = baseline_nearest(&vehicles, &rsus, &conns, &offloads, 3);
        assert_eq!(nearest.len(), 1);
        let prev = vehicles.keys().map(|k| (k.clone(), BTreeSet::from([RsuId(0)]))).collect();
        let earliest = baseline_earliest(&vehicles, &rsus, &conns, &prev, &offloads, 3);
        assert_eq!(earliest.len(), 1);
        assert_eq!(earliest[0].issued_at, 3);
    }
}
