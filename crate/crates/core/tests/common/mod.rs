//! Scenario builders shared by the integration tests.

#![allow(dead_code)]

use mach_sim::model::{FailureSchedule, RsuId};
use mach_sim::{
    Point, RsuSpec, SimConfig, StrategyKind, StrategyParams, SyntheticScenarioSpec, TaskLoadModel,
    TraceSource,
};

pub const CENTER: Point = Point::new(100.0, 100.0);
pub const RING_RADIUS: f64 = 60.0;
pub const FULL_CAPACITY: f64 = 65.0;
pub const RANGE: f64 = 70.0;

pub fn polar(distance: f64, degrees: f64) -> Point {
    let a = degrees.to_radians();
    Point::new(CENTER.x + distance * a.cos(), CENTER.y + distance * a.sin())
}

pub fn base(rsus: Vec<RsuSpec>, traffic: SyntheticScenarioSpec, duration: u64) -> SimConfig {
    SimConfig {
        step_duration: 1.0,
        duration,
        rsus,
        strategy: StrategyKind::Mach,
        params: StrategyParams::default(),
        qos_alpha: 0.0231,
        cam_interval: 1,
        trace_source: TraceSource::Synthetic(traffic),
        load_model: TaskLoadModel::default(),
        failures: vec![],
        rng_seed: 1,
    }
}

/// Sparse ring: three RSUs just outside the ring (east, north, south) and a
/// fourth further out whose coverage only grazes the ring between east and
/// north. The west arc is uncovered.
pub fn sparse4(seed: u64) -> SimConfig {
    let rsus = vec![
        RsuSpec::new(0, polar(95.0, 0.0), RANGE, FULL_CAPACITY),
        RsuSpec::new(1, polar(95.0, 90.0), RANGE, FULL_CAPACITY),
        RsuSpec::new(2, polar(95.0, 270.0), RANGE, FULL_CAPACITY),
        RsuSpec::new(3, polar(128.0, 45.0), RANGE, FULL_CAPACITY),
    ];
    let traffic = SyntheticScenarioSpec {
        vehicle_count: 50,
        speed_range: (5.0, 12.0),
        spawn_gap: (1, 20),
        dwell: (100, 300),
        lane_spread: 5.0,
        rng_seed: seed,
        ..SyntheticScenarioSpec::ring(RING_RADIUS, 50)
    };
    base(rsus, traffic, 600)
}

/// Congested ring: four heavily overlapping RSUs inside the ring, uneven
/// spacing, 150 vehicles entering at two hotspots, half capacity.
pub fn congested(seed: u64) -> SimConfig {
    let rsus = [0.0, 70.0, 180.0, 250.0]
        .iter()
        .enumerate()
        .map(|(i, deg)| RsuSpec::new(i as u32, polar(40.0, *deg), RANGE, FULL_CAPACITY))
        .collect();
    let traffic = SyntheticScenarioSpec {
        vehicle_count: 150,
        speed_range: (5.0, 12.0),
        spawn_gap: (1, 6),
        dwell: (200, 400),
        lane_spread: 5.0,
        entry_angles: vec![0.3, 1.2],
        rng_seed: seed,
        ..SyntheticScenarioSpec::ring(RING_RADIUS, 150)
    };
    let mut cfg = base(rsus, traffic, 600);
    cfg.scale_capacity(0.5);
    cfg
}

/// `sparse4` with the south RSU down between `from` and `until`.
pub fn sparse4_failure(seed: u64, from: u64, until: Option<u64>) -> SimConfig {
    let mut cfg = sparse4(seed);
    cfg.failures = vec![FailureSchedule {
        rsu_id: RsuId(2),
        disable_at: from,
        enable_at: until,
    }];
    cfg
}
