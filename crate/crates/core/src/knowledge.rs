//! Information flow between agents: CAM beacons from vehicles to their
//! serving RSU, and load reports exchanged between RSUs over the wired
//! backhaul. Links are lossless and deliver within the step.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{CamMessage, LoadShareInterval, PeerLoad, RsuId, RsuRuntime, VehicleId, VehicleState};

/// A load report broadcast by one RSU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rsu_id: RsuId,
    pub load: f64,
    pub emitted_at: u64,
}

/// CAMs emitted at `step`, addressed to each sender's serving RSU.
///
/// Vehicles beacon only on steps that are multiples of `cam_interval`;
/// vehicles without a serving RSU have no recipient.
pub fn emit_cams(
    step: u64,
    cam_interval: u64,
    vehicles: &BTreeMap<VehicleId, VehicleState>,
    connections: &BTreeMap<VehicleId, RsuId>,
) -> Vec<(RsuId, CamMessage)> {
    if cam_interval == 0 || !step.is_multiple_of(cam_interval) {
        return Vec::new();
    }
    connections
        .iter()
        .filter_map(|(vid, rsu)| vehicles.get(vid).map(|v| (*rsu, CamMessage::from_state(v, step))))
        .collect()
}

/// Stores each CAM at its recipient. Returns the number delivered.
pub fn deliver_cams(rsus: &mut [RsuRuntime], cams: Vec<(RsuId, CamMessage)>) -> u64 {
    let mut delivered = 0;
    for (to, cam) in cams {
        if let Some(r) = rsus.iter_mut().find(|r| r.id() == to && r.enabled()) {
            r.tracked.insert(cam.vehicle_id.clone(), cam);
            delivered += 1;
        }
    }
    delivered
}

/// Runs the load-sharing phase for `step` and returns the message count.
///
/// Under `Oracle` every enabled RSU learns every enabled peer's true load
/// each step. Otherwise a synchronized broadcast happens on multiples of the
/// interval and knowledge goes stale in between. A broadcast round among `n`
/// enabled RSUs costs `n * (n - 1)` messages.
pub fn share_loads(step: u64, rsus: &mut [RsuRuntime], interval: LoadShareInterval) -> u64 {
    let due = match interval {
        LoadShareInterval::Oracle => true,
        LoadShareInterval::Every(k) => k > 0 && step.is_multiple_of(u64::from(k)),
    };
    if !due {
        return 0;
    }
    let reports = collect_reports(step, rsus);
    let n = reports.len() as u64;
    apply_reports(rsus, &reports);
    n * n.saturating_sub(1)
}

/// Oracle knowledge refresh without message accounting.
pub fn refresh_oracle(step: u64, rsus: &mut [RsuRuntime]) {
    let reports = collect_reports(step, rsus);
    apply_reports(rsus, &reports);
}

fn collect_reports(step: u64, rsus: &[RsuRuntime]) -> Vec<LoadReport> {
    rsus.iter()
        .filter(|r| r.enabled())
        .map(|r| LoadReport {
            rsu_id: r.id(),
            load: r.assigned_load,
            emitted_at: step,
        })
        .collect()
}

fn apply_reports(rsus: &mut [RsuRuntime], reports: &[LoadReport]) {
    for r in rsus.iter_mut().filter(|r| r.enabled()) {
        let me = r.id();
        for rep in reports.iter().filter(|rep| rep.rsu_id != me) {
            r.peer_knowledge.insert(
                rep.rsu_id,
                PeerLoad {
                    known_load: rep.load,
                    known_at: rep.emitted_at,
                },
            );
        }
    }
}
