//! Per-vehicle quality of service: distance decay, capacity ratio and their
//! product.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{RsuRuntime, VehicleState};

/// Decay constant for which QoS halves 30 m outside a 70 m radius.
pub const DEFAULT_ALPHA: f64 = 0.0231;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosParams {
    /// Distance-decay constant, 1/m.
    pub alpha: f64,
}

impl Default for QosParams {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QosError {
    #[error("reference point must lie outside coverage")]
    ReferenceInsideCoverage,
    #[error("reference QoS must be in (0, 1)")]
    ReferenceQosOutOfRange,
    #[error("no infrastructure: no enabled RSU exists")]
    NoInfrastructure,
}

/// Full score inside the radius, exponential decay beyond it.
pub fn qos_distance(d: f64, radius: f64, alpha: f64) -> f64 {
    if d <= radius {
        1.0
    } else {
        (-alpha * (d - radius)).exp()
    }
}

/// Full score up to capacity, then `capacity / load`.
pub fn qos_load(load: f64, capacity: f64) -> f64 {
    if load <= capacity {
        1.0
    } else {
        capacity / load
    }
}

pub fn qos_total(dist_score: f64, load_score: f64) -> f64 {
    dist_score * load_score
}

/// Decay constant that yields `ref_qos` at `ref_distance` for the given radius.
pub fn derive_alpha(ref_distance: f64, ref_qos: f64, radius: f64) -> Result<f64, QosError> {
    if !(ref_distance > radius) {
        return Err(QosError::ReferenceInsideCoverage);
    }
    if !(ref_qos > 0.0 && ref_qos < 1.0) {
        return Err(QosError::ReferenceQosOutOfRange);
    }
    Ok(-ref_qos.ln() / (ref_distance - radius))
}

/// QoS experienced by `v`.
///
/// A connected vehicle is scored against its serving RSU. A vehicle with no
/// serving RSU gets the distance factor of the nearest enabled RSU and a load
/// factor of 1.
pub fn vehicle_qos(
    v: &VehicleState,
    serving: Option<&RsuRuntime>,
    rsus: &[RsuRuntime],
    params: QosParams,
) -> Result<f64, QosError> {
    match serving {
        Some(rsu) => {
            let d = v.position.distance(rsu.spec.position);
            Ok(qos_total(
                qos_distance(d, rsu.spec.coverage_radius, params.alpha),
                qos_load(rsu.assigned_load, rsu.spec.capacity),
            ))
        }
        None => {
            let nearest = rsus
                .iter()
                .filter(|r| r.enabled())
                .map(|r| (v.position.distance(r.spec.position), r))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id().cmp(&b.1.id())))
                .ok_or(QosError::NoInfrastructure)?;
            Ok(qos_distance(nearest.0, nearest.1.spec.coverage_radius, params.alpha))
        }
    }
}
