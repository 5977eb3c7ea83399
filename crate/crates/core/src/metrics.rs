//! Performance metrics: load fairness (Gini), per-vehicle QoS statistics,
//! handover counters and message counters, with CSV/JSON export.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{HandoverEvent, HandoverOutcome, SimulationState};
use crate::model::{LoadShareInterval, StrategyKind};
use crate::qos::{vehicle_qos, QosParams};
use crate::strategies::HandoverTrigger;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no enabled RSUs")]
    NoEnabledRsus,
    #[error("unknown format {0:?} (expected csv or json)")]
    UnknownFormat(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ── Series types ────────────────────────────────────────────────────────────

/// Metrics recorded at the end of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub gini: f64,
    pub qos_min: f64,
    pub qos_q25: f64,
    pub qos_avg: f64,
    pub qos_q75: f64,
    pub vehicle_count: u64,
}

/// Handover counts by trigger and outcome.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandoverCounters {
    pub range_success: u64,
    pub range_failed: u64,
    pub load_balancing_success: u64,
    pub load_balancing_failed: u64,
    pub overload_success: u64,
    pub overload_failed: u64,
}

impl HandoverCounters {
    pub fn get(&self, trigger: HandoverTrigger, outcome: HandoverOutcome) -> u64 {
        *self.slot(trigger, outcome)
    }

    fn slot(&self, trigger: HandoverTrigger, outcome: HandoverOutcome) -> &u64 {
        use HandoverOutcome::*;
        use HandoverTrigger::*;
        match (trigger, outcome) {
            (Range, Success) => &self.range_success,
            (Range, Failed) => &self.range_failed,
            (LoadBalancing, Success) => &self.load_balancing_success,
            (LoadBalancing, Failed) => &self.load_balancing_failed,
            (Overload, Success) => &self.overload_success,
            (Overload, Failed) => &self.overload_failed,
        }
    }

    fn slot_mut(&mut self, trigger: HandoverTrigger, outcome: HandoverOutcome) -> &mut u64 {
        use HandoverOutcome::*;
        use HandoverTrigger::*;
        match (trigger, outcome) {
            (Range, Success) => &mut self.range_success,
            (Range, Failed) => &mut self.range_failed,
            (LoadBalancing, Success) => &mut self.load_balancing_success,
            (LoadBalancing, Failed) => &mut self.load_balancing_failed,
            (Overload, Success) => &mut self.overload_success,
            (Overload, Failed) => &mut self.overload_failed,
        }
    }

    pub fn successes(&self) -> u64 {
        self.range_success + self.load_balancing_success + self.overload_success
    }

    pub fn failures(&self) -> u64 {
        self.range_failed + self.load_balancing_failed + self.overload_failed
    }

    /// Every attempted handover, successful or not.
    pub fn total(&self) -> u64 {
        self.successes() + self.failures()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounters {
    pub cam: u64,
    pub load_share: u64,
    /// Request and response per attempt, plus a state transfer on success.
    pub handover: u64,
}

/// Everything a run records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub strategy: StrategyKind,
    pub load_share_interval: LoadShareInterval,
    pub steps: Vec<StepMetrics>,
    pub handovers: HandoverCounters,
    pub messages: MessageCounters,
}

impl MetricsSeries {
    /// Mean of the per-step Gini series; 0 for an empty run.
    pub fn gini_mean(&self) -> f64 {
        mean(self.steps.iter().map(|s| s.gini))
    }

    pub fn gini_max(&self) -> f64 {
        self.steps.iter().map(|s| s.gini).fold(0.0, f64::max)
    }

    /// Mean of per-step average QoS over steps with at least one vehicle.
    pub fn qos_avg_mean(&self) -> f64 {
        mean(self.occupied().map(|s| s.qos_avg))
    }

    /// Mean of per-step minimum QoS over steps with at least one vehicle.
    pub fn qos_min_mean(&self) -> f64 {
        mean(self.occupied().map(|s| s.qos_min))
    }

    fn occupied(&self) -> impl Iterator<Item = &StepMetrics> {
        self.steps.iter().filter(|s| s.vehicle_count > 0)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0u64), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

// ── Computations ────────────────────────────────────────────────────────────

/// Gini coefficient of RSU loads: mean absolute pairwise difference over
/// twice the mean. Defined as 0 when every load is 0.
pub fn gini(loads: &[f64]) -> Result<f64, MetricsError> {
    if loads.is_empty() {
        return Err(MetricsError::NoEnabledRsus);
    }
    let n = loads.len() as f64;
    let total: f64 = loads.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    // Sorted form of the pairwise sum: sum_i (2i - n + 1) * x_(i).
    let mut sorted = loads.to_vec();
    sorted.sort_by(f64::total_cmp);
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * i as f64 - n + 1.0) * x)
        .sum();
    Ok((weighted / (n * total)).clamp(0.0, 1.0))
}

/// Summary of per-vehicle QoS at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosStats {
    pub min: f64,
    pub q25: f64,
    pub avg: f64,
    pub q75: f64,
    pub count: u64,
}

/// Percentile of sorted data with linear interpolation between closest ranks.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Statistics over a set of QoS values; all 1.0 with count 0 when empty.
pub fn qos_stats(values: &[f64]) -> QosStats {
    if values.is_empty() {
        return QosStats {
            min: 1.0,
            q25: 1.0,
            avg: 1.0,
            q75: 1.0,
            count: 0,
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    QosStats {
        min: sorted[0],
        q25: percentile(&sorted, 0.25),
        avg: sorted.iter().sum::<f64>() / sorted.len() as f64,
        q75: percentile(&sorted, 0.75),
        count: sorted.len() as u64,
    }
}

/// QoS statistics over every live vehicle. With no enabled RSU at all a
/// vehicle scores 0.
pub fn qos_snapshot(state: &SimulationState, params: QosParams) -> QosStats {
    let values: Vec<f64> = state
        .vehicles
        .values()
        .map(|v| {
            let serving = state.connections.get(&v.id).and_then(|r| state.rsu(*r));
            vehicle_qos(v, serving, &state.rsus, params).unwrap_or(0.0)
        })
        .collect();
    qos_stats(&values)
}

pub fn classify_and_count(events: &[HandoverEvent]) -> HandoverCounters {
    let mut c = HandoverCounters::default();
    for e in events {
        *c.slot_mut(e.trigger, e.outcome) += 1;
    }
    c
}

// ── Export ──────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(MetricsError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Json => "json",
        })
    }
}

pub const STEP_CSV_HEADER: [&str; 7] =
    ["step", "gini", "qos_min", "qos_q25", "qos_avg", "qos_q75", "vehicle_count"];

/// Serializes a series: per-step rows as CSV, or the whole structure as JSON.
pub fn export(series: &MetricsSeries, format: ExportFormat) -> Result<Vec<u8>, MetricsError> {
    match format {
        ExportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(series)?;
            out.push(b'\n');
            Ok(out)
        }
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(STEP_CSV_HEADER)?;
            for s in &series.steps {
                w.write_record([
                    s.step.to_string(),
                    s.gini.to_string(),
                    s.qos_min.to_string(),
                    s.qos_q25.to_string(),
                    s.qos_avg.to_string(),
                    s.qos_q75.to_string(),
                    s.vehicle_count.to_string(),
                ])?;
            }
            w.into_inner().map_err(|e| MetricsError::Io(e.into_error()))
        }
    }
}

/// Parses a per-step CSV written by [`export`].
pub fn parse_step_csv(bytes: &[u8]) -> Result<Vec<StepMetrics>, MetricsError> {
    let mut r = csv::Reader::from_reader(bytes);
    r.deserialize().map(|row| row.map_err(MetricsError::from)).collect()
}

pub const EVENT_CSV_HEADER: [&str; 8] = [
    "step",
    "vehicle_id",
    "source",
    "target",
    "trigger",
    "outcome",
    "offloaded_load",
    "target_load",
];

pub fn write_events_csv<W: Write>(events: &[HandoverEvent], writer: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVENT_CSV_HEADER)?;
    for e in events {
        w.write_record([
            e.step.to_string(),
            e.vehicle_id.to_string(),
            e.source.to_string(),
            e.target.to_string(),
            e.trigger.as_str().to_string(),
            e.outcome.as_str().to_string(),
            e.offloaded_load.to_string(),
            e.target_load.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Result file stem: `<scenario>_<strategy>_<interval>`.
pub fn result_stem(scenario: &str, strategy: StrategyKind, interval: LoadShareInterval) -> String {
    format!("{scenario}_{}_{}", strategy.name(), interval.label())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RsuId, VehicleId};
    use proptest::prelude::*;

    /// Direct double sum, independent of the sorted form.
    fn gini_pairwise(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mu = x.iter().sum::<f64>() / n;
        if mu == 0.0 {
            return 0.0;
        }
        let s: f64 = x.iter().flat_map(|a| x.iter().map(move |b| (a - b).abs())).sum();
        s / (2.0 * n * n * mu)
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[10.0; 4]).unwrap(), 0.0);
        assert!((gini(&[0.0, 7.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((gini(&[10.0, 20.0, 30.0, 40.0]).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(gini(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(gini(&[]), Err(MetricsError::NoEnabledRsus)));
    }

    #[test]
    fn qos_examples() {
        let s = qos_stats(&[1.0, 1.0, 1.0]);
        assert_eq!((s.min, s.avg), (1.0, 1.0));
        let s = qos_stats(&[1.0, 0.5]);
        assert_eq!((s.min, s.avg), (0.5, 0.75));
        let s = qos_stats(&[0.8, 0.2, 0.6, 0.4]);
        assert!((s.q25 - 0.35).abs() < 1e-12);
        assert!((s.q75 - 0.65).abs() < 1e-12);
        let s = qos_stats(&[]);
        assert_eq!((s.min, s.q25, s.avg, s.q75, s.count), (1.0, 1.0, 1.0, 1.0, 0));
    }

    fn event(trigger: HandoverTrigger, outcome: HandoverOutcome) -> HandoverEvent {
        HandoverEvent {
            step: 0,
            vehicle_id: VehicleId::from("a"),
            source: RsuId(0),
            target: RsuId(1),
            trigger,
            outcome,
            offloaded_load: 1.0,
            target_load: 0.0,
        }
    }

    #[test]
    fn counter_examples() {
        assert_eq!(classify_and_count(&[]), HandoverCounters::default());
        let log = vec![event(HandoverTrigger::Range, HandoverOutcome::Success); 3];
        let c = classify_and_count(&log);
        assert_eq!((c.total(), c.failures(), c.range_success), (3, 0, 3));

        let mut log = Vec::new();
        for t in HandoverTrigger::ALL {
            for o in [HandoverOutcome::Success, HandoverOutcome::Failed] {
                log.push(event(t, o));
            }
        }
        let c = classify_and_count(&log);
        assert_eq!(c.total(), log.len() as u64);
        for t in HandoverTrigger::ALL {
            assert_eq!(c.get(t, HandoverOutcome::Failed), 1);
        }
    }

    fn series(steps: Vec<StepMetrics>) -> MetricsSeries {
        MetricsSeries {
            strategy: StrategyKind::Mach,
            load_share_interval: LoadShareInterval::Every(5),
            steps,
            handovers: HandoverCounters::default(),
            messages: MessageCounters::default(),
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let out = export(&series(vec![]), ExportFormat::Csv).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "step,gini,qos_min,qos_q25,qos_avg,qos_q75,vehicle_count\n"
        );
    }

    #[test]
    fn json_has_all_counter_keys() {
        let out = export(&series(vec![]), ExportFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        let counters = v["handovers"].as_object().unwrap();
        for key in [
            "range_success",
            "range_failed",
            "load_balancing_success",
            "load_balancing_failed",
            "overload_success",
            "overload_failed",
        ] {
            assert_eq!(counters[key], 0, "{key}");
        }
        assert_eq!(v["load_share_interval"], 5);
    }

    #[test]
    fn unknown_format_rejected() {
        assert!(matches!("xml".parse::<ExportFormat>(), Err(MetricsError::UnknownFormat(_))));
    }

    #[test]
    fn file_stem() {
        assert_eq!(
            result_stem("sparse4", StrategyKind::Mach, LoadShareInterval::Oracle),
            "sparse4_mach_oracle"
        );
    }

    #[test]
    fn events_csv_layout() {
        let mut out = Vec::new();
        write_events_csv(&[event(HandoverTrigger::LoadBalancing, HandoverOutcome::Failed)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,vehicle_id,source,target,trigger,outcome,offloaded_load,target_load"));
        assert_eq!(lines.next(), Some("0,a,0,1,LOAD_BALANCING,FAILED,1,0"));
    }

    fn step_strategy() -> impl Strategy<Value = StepMetrics> {
        (0u64..10_000, 0.0f64..1.0, prop::array::uniform4(0.0f64..1.0), 0u64..500).prop_map(|(step, g, mut q, n)| {
            q.sort_by(f64::total_cmp);
            StepMetrics {
                step,
                gini: g,
                qos_min: q[0],
                qos_q25: q[1],
                qos_avg: q[2],
                qos_q75: q[3],
                vehicle_count: n,
            }
        })
    }

    proptest! {
        #[test]
        fn gini_matches_pairwise(x in prop::collection::vec(0.0f64..100.0, 1..40)) {
            prop_assert!((gini(&x).unwrap() - gini_pairwise(&x)).abs() < 1e-12);
        }

        #[test]
        fn gini_two_element_closed_form(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            prop_assume!(a + b > 0.0);
            let closed = (a - b).abs() / (2.0 * (a + b));
            prop_assert!((gini_pairwise(&[a, b]) - closed).abs() < 1e-12);
            prop_assert!((gini(&[a, b]).unwrap() - closed).abs() < 1e-12);
        }

        #[test]
        fn gini_is_bounded(x in prop::collection::vec(0.0f64..1e6, 1..40)) {
            let g = gini(&x).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
        }

        #[test]
        fn quartiles_are_ordered(x in prop::collection::vec(0.0f64..=1.0, 1..60)) {
            let s = qos_stats(&x);
            prop_assert!(s.min <= s.q25 && s.q25 <= s.q75);
            prop_assert!(s.min <= s.avg);
        }

        #[test]
        fn csv_round_trip(steps in prop::collection::vec(step_strategy(), 0..20)) {
            let s = series(steps);
            let bytes = export(&s, ExportFormat::Csv).unwrap();
            let back = parse_step_csv(&bytes).unwrap();
            prop_assert_eq!(back.len(), s.steps.len());
            for (a, b) in back.iter().zip(&s.steps) {
                prop_assert_eq!(a.step, b.step);
                prop_assert_eq!(a.vehicle_count, b.vehicle_count);
                for (x, y) in [(a.gini, b.gini), (a.qos_min, b.qos_min), (a.qos_q25, b.qos_q25), (a.qos_avg, b.qos_avg), (a.qos_q75, b.qos_q75)] {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn json_round_trip(steps in prop::collection::vec(step_strategy(), 0..20)) {
            let s = series(steps);
            let bytes = export(&s, ExportFormat::Json).unwrap();
            let back: MetricsSeries = serde_json::from_slice(&bytes).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
