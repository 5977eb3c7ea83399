//! Exhaustive parameter grid search with normalized composite scoring.
//!
//! Every cell runs the same scenario and seed with one `StrategyParams`
//! combination. Raw scores are normalized per column against the best
//! observed value: lower-is-better columns (handover count, Gini) score
//! `min / observed`, higher-is-better columns (average and minimum QoS)
//! score `observed / max`. Cells are ranked by the sum of the four scores,
//! with their product as tiebreaker.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{load_schedule, run_schedule, EngineError};
use crate::metrics::MetricsSeries;
use crate::mobility::Schedule;
use crate::model::{validate_config, LoadShareInterval, SimConfig, StrategyKind, StrategyParams};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Value lists per tuned parameter; the sweep covers their cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub overload: Vec<f64>,
    pub hysteresis: Vec<f64>,
    pub suitability: Vec<f64>,
    pub leaving: Vec<f64>,
    pub load_share_interval: LoadShareInterval,
    pub gini_aggregation: GiniAggregation,
}

impl Default for SweepGrid {
    fn default() -> Self {
        let d = StrategyParams::default();
        Self {
            overload: vec![d.overload_threshold],
            hysteresis: vec![d.hysteresis],
            suitability: vec![d.min_suitability],
            leaving: vec![d.leaving_threshold],
            load_share_interval: LoadShareInterval::Every(1),
            gini_aggregation: GiniAggregation::Mean,
        }
    }
}

impl SweepGrid {
    /// Parameter combinations in grid order (overload outermost, leaving innermost).
    pub fn cells(&self) -> Vec<StrategyParams> {
        let mut out = Vec::new();
        for &overload_threshold in &self.overload {
            for &hysteresis in &self.hysteresis {
                for &min_suitability in &self.suitability {
                    for &leaving_threshold in &self.leaving {
                        out.push(StrategyParams {
                            leaving_threshold,
                            overload_threshold,
                            hysteresis,
                            min_suitability,
                            load_share_interval: self.load_share_interval,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        for (name, values) in [
            ("overload", &self.overload),
            ("hysteresis", &self.hysteresis),
            ("suitability", &self.suitability),
            ("leaving", &self.leaving),
        ] {
            if values.is_empty() {
                return Err(SweepError::Grid(format!("{name} has no values")));
            }
        }
        for (i, p) in self.cells().iter().enumerate() {
            p.validate(&format!("cell[{i}]"))
                .map_err(|e| SweepError::Grid(e.to_string()))?;
        }
        Ok(())
    }
}

/// How the per-step Gini series enters the composite score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GiniAggregation {
    #[default]
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    /// Attempted handovers, failed ones included.
    pub handovers: f64,
    pub qos_avg: f64,
    pub qos_min: f64,
    pub gini: f64,
}

impl RawScores {
    pub fn from_series(series: &MetricsSeries, agg: GiniAggregation) -> Self {
        Self {
            handovers: series.handovers.total() as f64,
            qos_avg: series.qos_avg_mean(),
            qos_min: series.qos_min_mean(),
            gini: match agg {
                GiniAggregation::Mean => series.gini_mean(),
                GiniAggregation::Max => series.gini_max(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScores {
    pub handovers: f64,
    pub qos_avg: f64,
    pub qos_min: f64,
    pub gini: f64,
}

impl NormalizedScores {
    pub fn values(&self) -> [f64; 4] {
        [self.handovers, self.qos_avg, self.qos_min, self.gini]
    }

    pub fn eval_sum(&self) -> f64 {
        self.values().iter().sum()
    }

    pub fn eval_product(&self) -> f64 {
        self.values().iter().product()
    }
}

fn lower_better(min: f64, observed: f64) -> f64 {
    if observed == 0.0 {
        1.0
    } else {
        min / observed
    }
}

fn higher_better(max: f64, observed: f64) -> f64 {
    if max == 0.0 {
        1.0
    } else {
        observed / max
    }
}

/// Normalizes each column against its best observed value.
pub fn normalize(raw: &[RawScores]) -> Vec<NormalizedScores> {
    let min = |f: fn(&RawScores) -> f64| raw.iter().map(f).fold(f64::INFINITY, f64::min);
    let max = |f: fn(&RawScores) -> f64| raw.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let (h_min, g_min) = (min(|r| r.handovers), min(|r| r.gini));
    let (a_max, m_max) = (max(|r| r.qos_avg), max(|r| r.qos_min));
    raw.iter()
        .map(|r| NormalizedScores {
            handovers: lower_better(h_min, r.handovers),
            qos_avg: higher_better(a_max, r.qos_avg),
            qos_min: higher_better(m_max, r.qos_min),
            gini: lower_better(g_min, r.gini),
        })
        .collect()
}

/// One grid cell after ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub params: StrategyParams,
    /// Position in grid order.
    pub cell: usize,
    pub raw: Option<RawScores>,
    pub normalized: Option<NormalizedScores>,
    pub eval_sum: f64,
    pub eval_product: f64,
    /// 1 + number of cells that rank strictly better; failed cells rank last.
    pub rank: usize,
    pub error: Option<String>,
}

/// Builds the scenario once and sweeps the grid over it.
pub fn run_sweep(base: &SimConfig, grid: &SweepGrid) -> Result<Vec<SweepResult>, SweepError> {
    let base = validate_config(base.clone()).map_err(EngineError::from)?;
    let schedule = load_schedule(&base)?;
    run_sweep_on(&base, &schedule, grid)
}

/// Sweeps the grid with MACH over a prebuilt schedule. Cells run in parallel.
pub fn run_sweep_on(
    base: &SimConfig,
    schedule: &Schedule,
    grid: &SweepGrid,
) -> Result<Vec<SweepResult>, SweepError> {
    grid.validate()?;
    let cells = grid.cells();
    let outcomes: Vec<Result<RawScores, String>> = cells
        .par_iter()
        .map(|params| {
            let cfg = SimConfig {
                strategy: StrategyKind::Mach,
                params: *params,
                ..base.clone()
            };
            run_schedule(&cfg, schedule)
                .map(|out| RawScores::from_series(&out.metrics, grid.gini_aggregation))
                .map_err(|e| e.to_string())
        })
        .collect();
    Ok(rank(cells, outcomes))
}

/// Normalizes successful cells and orders all cells best first.
pub fn rank(cells: Vec<StrategyParams>, outcomes: Vec<Result<RawScores, String>>) -> Vec<SweepResult> {
    let ok: Vec<RawScores> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
    let mut norm = normalize(&ok).into_iter();
    let mut results: Vec<SweepResult> = cells
        .into_iter()
        .zip(outcomes)
        .enumerate()
        .map(|(cell, (params, outcome))| match outcome {
            Ok(raw) => {
                let n = norm.next().expect("one normalized row per successful cell");
                SweepResult {
                    params,
                    cell,
                    raw: Some(raw),
                    normalized: Some(n),
                    eval_sum: n.eval_sum(),
                    eval_product: n.eval_product(),
                    rank: 0,
                    error: None,
                }
            }
            Err(e) => SweepResult {
                params,
                cell,
                raw: None,
                normalized: None,
                eval_sum: f64::NAN,
                eval_product: f64::NAN,
                rank: 0,
                error: Some(e),
            },
        })
        .collect();

    let better = |a: &SweepResult, b: &SweepResult| -> bool {
        match (a.error.is_none(), b.error.is_none()) {
            (true, false) => true,
            (false, _) => false,
            (true, true) => {
                a.eval_sum > b.eval_sum || (a.eval_sum == b.eval_sum && a.eval_product > b.eval_product)
            }
        }
    };
    let ranks: Vec<usize> = results
        .iter()
        .map(|r| 1 + results.iter().filter(|o| better(o, r)).count())
        .collect();
    for (r, k) in results.iter_mut().zip(ranks) {
        r.rank = k;
    }
    results.sort_by(|a, b| a.rank.cmp(&b.rank).then(a.cell.cmp(&b.cell)));
    results
}

pub const SWEEP_CSV_HEADER: [&str; 10] = [
    "overload",
    "hysteresis",
    "suitability",
    "leaving",
    "handovers",
    "qos_avg",
    "qos_min",
    "gini",
    "eval_sum",
    "eval_product",
];

/// Writes ranked results; failed cells keep their parameters with empty scores.
pub fn write_sweep_csv<W: Write>(results: &[SweepResult], writer: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_CSV_HEADER)?;
    for r in results {
        let p = r.params;
        let mut row = vec![
            p.overload_threshold.to_string(),
            p.hysteresis.to_string(),
            p.min_suitability.to_string(),
            p.leaving_threshold.to_string(),
        ];
        match r.raw {
            Some(raw) => row.extend([
                raw.handovers.to_string(),
                raw.qos_avg.to_string(),
                raw.qos_min.to_string(),
                raw.gini.to_string(),
                r.eval_sum.to_string(),
                r.eval_product.to_string(),
            ]),
            None => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
