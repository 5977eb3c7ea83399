//! TOML scenario, grid and traffic-spec files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use mach_sim::model::FailureSchedule;
use mach_sim::{
    validate_config, RsuSpec, SimConfig, StrategyKind, StrategyParams, SweepGrid,
    SyntheticScenarioSpec, TaskLoadModel, TraceSource,
};

// ── Scenario ────────────────────────────────────────────────────────────────

/// One simulation setup. Omitted keys take the defaults below; exactly one of
/// `trace` and `[synthetic]` supplies the vehicles.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    #[serde(default = "default_step_duration")]
    pub step_duration: f64,
    #[serde(default = "default_duration")]
    pub duration: u64,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyKind,
    #[serde(default)]
    pub params: StrategyParams,
    #[serde(default = "default_alpha")]
    pub qos_alpha: f64,
    #[serde(default = "default_cam_interval")]
    pub cam_interval: u64,
    #[serde(default)]
    pub load_model: TaskLoadModel,
    #[serde(default)]
    pub rng_seed: u64,
    /// Multiplier applied to every RSU capacity (1.0, 0.5, 0.25 for the
    /// full/half/quarter variants).
    #[serde(default = "default_scale")]
    pub capacity_scale: f64,
    pub rsus: Vec<RsuSpec>,
    #[serde(default)]
    pub failures: Vec<FailureSchedule>,
    /// Trace CSV, relative to the scenario file.
    pub trace: Option<PathBuf>,
    pub synthetic: Option<SyntheticScenarioSpec>,
}

fn default_step_duration() -> f64 {
    1.0
}

fn default_duration() -> u64 {
    600
}

fn default_strategy() -> StrategyKind {
    StrategyKind::Mach
}

fn default_alpha() -> f64 {
    0.0231
}

fn default_cam_interval() -> u64 {
    1
}

fn default_scale() -> f64 {
    1.0
}

/// A scenario resolved into a validated engine configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub config: SimConfig,
}

/// Command-line replacements for scenario values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub strategy: Option<StrategyKind>,
    pub interval: Option<mach_sim::LoadShareInterval>,
    pub seed: Option<u64>,
    pub capacity_scale: Option<f64>,
    pub duration: Option<u64>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

impl Scenario {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(&read(path)?).with_context(|| format!("invalid scenario {}", path.display()))?;
        let name = file.name.clone().unwrap_or_else(|| {
            path.file_stem().map_or_else(|| "scenario".to_owned(), |s| s.to_string_lossy().into_owned())
        });
        let base_dir = path.parent().unwrap_or(Path::new("."));
        let config = file
            .into_config(base_dir, overrides)
            .with_context(|| format!("invalid scenario {}", path.display()))?;
        Ok(Self { name, config })
    }
}

impl ScenarioFile {
    fn into_config(self, base_dir: &Path, o: &Overrides) -> Result<SimConfig> {
        let trace_source = match (self.trace, self.synthetic) {
            (Some(p), None) => TraceSource::Csv(base_dir.join(p)),
            (None, Some(spec)) => TraceSource::Synthetic(spec),
            (Some(_), Some(_)) => bail!("set either `trace` or `[synthetic]`, not both"),
            (None, None) => bail!("missing vehicles: set `trace` or a `[synthetic]` table"),
        };
        let scale = o.capacity_scale.unwrap_or(self.capacity_scale);
        if !(scale > 0.0 && scale.is_finite()) {
            bail!("capacity_scale must be > 0, got {scale}");
        }
        let mut params = self.params;
        if let Some(i) = o.interval {
            params.load_share_interval = i;
        }
        let mut cfg = SimConfig {
            step_duration: self.step_duration,
            duration: o.duration.unwrap_or(self.duration),
            rsus: self.rsus,
            strategy: o.strategy.unwrap_or(self.strategy),
            params,
            qos_alpha: self.qos_alpha,
            cam_interval: self.cam_interval,
            trace_source,
            load_model: self.load_model,
            failures: self.failures,
            rng_seed: o.seed.unwrap_or(self.rng_seed),
        };
        cfg.scale_capacity(scale);
        Ok(validate_config(cfg)?)
    }
}

// ── Sweep grid ──────────────────────────────────────────────────────────────

pub fn load_grid(path: &Path) -> Result<SweepGrid> {
    let grid: SweepGrid =
        toml::from_str(&read(path)?).with_context(|| format!("invalid grid {}", path.display()))?;
    grid.validate().with_context(|| format!("invalid grid {}", path.display()))?;
    Ok(grid)
}

// ── Traffic spec ────────────────────────────────────────────────────────────

/// Input of `generate`: synthetic traffic fields plus the sampling step.
#[derive(Debug, Deserialize)]
pub struct TrafficFile {
    #[serde(default = "default_step_duration")]
    pub step_duration: f64,
    #[serde(flatten)]
    pub spec: SyntheticScenarioSpec,
}

pub fn load_traffic(path: &Path) -> Result<TrafficFile> {
    toml::from_str(&read(path)?).with_context(|| format!("invalid traffic spec {}", path.display()))
}
