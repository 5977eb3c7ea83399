//! `mach`: run handover simulations, parameter sweeps and trace generation
//! from TOML scenario files.

mod scenario;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mach_sim::metrics::{export, result_stem, write_events_csv};
use mach_sim::mobility::write_trace_csv;
use mach_sim::sweep::write_sweep_csv;
use mach_sim::{
    generate_synthetic, load_schedule, run, run_sweep, ExportFormat, LoadShareInterval,
    StrategyKind,
};

use scenario::{load_grid, load_traffic, Overrides, Scenario};

#[derive(Parser)]
#[command(name = "mach", version, about = "RSU computation handover simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write metrics and event log files.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Strategy: mach, nearest, earliest or latest.
        #[arg(long)]
        strategy: Option<StrategyKind>,
        /// Load-share interval in steps, or `oracle`.
        #[arg(long)]
        interval: Option<LoadShareInterval>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Run MACH over a parameter grid and write the ranked table.
    Sweep {
        scenario: PathBuf,
        grid: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Write a synthetic traffic spec as a trace CSV.
    Generate { spec: PathBuf, out: PathBuf },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
}

#[derive(Args)]
struct OverrideArgs {
    /// Run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplier on every RSU capacity.
    #[arg(long)]
    capacity_scale: Option<f64>,
    /// Number of steps.
    #[arg(long)]
    duration: Option<u64>,
}

impl OverrideArgs {
    fn into_overrides(self) -> Overrides {
        Overrides {
            seed: self.seed,
            capacity_scale: self.capacity_scale,
            duration: self.duration,
            ..Overrides::default()
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { scenario, overrides, strategy, interval, out } => {
            let overrides = Overrides { strategy, interval, ..overrides.into_overrides() };
            cmd_run(&scenario, &overrides, &out)
        }
        Command::Sweep { scenario, grid, overrides, out } => {
            cmd_sweep(&scenario, &grid, &overrides.into_overrides(), &out)
        }
        Command::Generate { spec, out } => cmd_generate(&spec, &out),
        Command::Validate { scenario } => cmd_validate(&scenario),
    }
}

// ── Commands ────────────────────────────────────────────────────────────────

fn cmd_run(path: &Path, overrides: &Overrides, out_dir: &Path) -> Result<()> {
    let sc = Scenario::load(path, overrides)?;
    let cfg = &sc.config;
    let output = run(cfg).with_context(|| format!("run of {} failed", path.display()))?;
    let m = &output.metrics;

    create_dir(out_dir)?;
    let stem = result_stem(&sc.name, cfg.strategy, cfg.params.load_share_interval);
    let csv = out_dir.join(format!("{stem}.csv"));
    let json = out_dir.join(format!("{stem}.json"));
    let events = out_dir.join(format!("{stem}_events.csv"));
    write_file(&csv, &export(m, ExportFormat::Csv)?)?;
    write_file(&json, &export(m, ExportFormat::Json)?)?;
    let f = create_file(&events)?;
    write_events_csv(&output.state.event_log, BufWriter::new(f))?;

    let h = m.handovers;
    println!("{} | {} | interval {}", sc.name, cfg.strategy, cfg.params.load_share_interval);
    println!(
        "handovers {} (range {}, load balancing {}, overload {}), failed {}",
        h.successes(),
        h.range_success,
        h.load_balancing_success,
        h.overload_success,
        h.failures()
    );
    println!(
        "gini mean {:.4} max {:.4} | qos avg {:.4} min {:.4}",
        m.gini_mean(),
        m.gini_max(),
        m.qos_avg_mean(),
        m.qos_min_mean()
    );
    println!(
        "messages cam {} load-share {} handover {}",
        m.messages.cam, m.messages.load_share, m.messages.handover
    );
    for p in [&csv, &json, &events] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_sweep(path: &Path, grid_path: &Path, overrides: &Overrides, out_dir: &Path) -> Result<()> {
    let sc = Scenario::load(path, overrides)?;
    let grid = load_grid(grid_path)?;
    let results = run_sweep(&sc.config, &grid).with_context(|| format!("sweep of {} failed", path.display()))?;

    create_dir(out_dir)?;
    let table = out_dir.join(format!("{}_sweep.csv", sc.name));
    write_sweep_csv(&results, BufWriter::new(create_file(&table)?))?;

    println!("rank  overload  hysteresis  suitability  leaving  eval_sum  eval_product");
    for r in results.iter().take(10) {
        let p = r.params;
        println!(
            "{:>4}  {:>8}  {:>10}  {:>11}  {:>7}  {:>8.4}  {:>12.4}",
            r.rank, p.overload_threshold, p.hysteresis, p.min_suitability, p.leaving_threshold, r.eval_sum, r.eval_product
        );
    }
    let failed = results.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        println!("{failed} cells failed; see the error column");
    }
    println!("wrote {} ({} rows)", table.display(), results.len());
    Ok(())
}

fn cmd_generate(path: &Path, out: &Path) -> Result<()> {
    let traffic = load_traffic(path)?;
    let schedule = generate_synthetic(&traffic.spec, traffic.step_duration)
        .with_context(|| format!("invalid traffic spec {}", path.display()))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_trace_csv(&schedule, traffic.step_duration, BufWriter::new(create_file(out)?))?;
    println!(
        "wrote {} ({} vehicles, {} steps)",
        out.display(),
        schedule.vehicle_ids().len(),
        schedule.len()
    );
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<()> {
    let sc = Scenario::load(path, &Overrides::default())?;
    let cfg = &sc.config;
    let schedule = load_schedule(cfg).with_context(|| format!("invalid trace for {}", path.display()))?;
    println!(
        "{}: ok ({} RSUs, {} vehicles, {} steps, strategy {}, interval {})",
        sc.name,
        cfg.rsus.len(),
        schedule.vehicle_ids().len(),
        cfg.duration,
        cfg.strategy,
        cfg.params.load_share_interval
    );
    Ok(())
}

// ── Files ───────────────────────────────────────────────────────────────────

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn create_file(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("cannot write {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}
