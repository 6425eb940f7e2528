//! Parameter sweeps: axes × seeds, one isolated run per cell.

use std::fs;
use std::path::PathBuf;

use anyhow::anyhow;
use clap::Args;
use dragoncast::metrics::RunSummary;
use dragoncast::SimConfig;
use rayon::prelude::*;

use crate::{invalid, prepare_out_dir, run_into, runtime, CliResult, Failure, ScenarioArgs};

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// `KEY=V1,V2,...`. KEY is any `section.key`, or one of the shorthands
    /// `mobility.speed` (sets min and max) and `sew` (`on`/`off`).
    /// Repeatable; the sweep covers every combination.
    #[arg(long = "axis", value_name = "KEY=V1,V2,...")]
    axes: Vec<String>,
    /// Seeds as a list and/or inclusive ranges, e.g. `1-10` or `1,4,9`.
    /// Defaults to the scenario's seed.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
    /// Keep each cell's trace and time series, not just its summary.
    #[arg(long)]
    traces: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

pub fn parse_axis(raw: &str) -> Result<Axis, String> {
    let (key, values) = raw.split_once('=').ok_or_else(|| format!("axis `{raw}` is not KEY=V1,V2,..."))?;
    let key = key.trim().to_string();
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(format!("axis `{key}` has no values"));
    }
    if key != "sew" && !key.contains('.') {
        return Err(format!("axis key `{key}` is not `section.key`"));
    }
    Ok(Axis { key, values })
}

pub fn parse_seeds(raw: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |s: &str| s.trim().parse::<u64>().map_err(|_| format!("bad seed `{s}`"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty seed range `{part}`"));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(num(part)?),
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err("seeds must be distinct".into());
    }
    Ok(seeds)
}

/// Applies one axis value to a config.
pub fn apply(cfg: &SimConfig, key: &str, value: &str) -> Result<SimConfig, String> {
    let overrides = match key {
        "sew" => {
            let d = cfg.session.generation_size;
            let window = match value {
                "on" if cfg.sew_enabled() => cfg.protocol.window,
                "on" => (d / 10).max(1),
                "off" => d,
                _ => return Err(format!("sew must be `on` or `off`, not `{value}`")),
            };
            vec![format!("protocol.window={window}")]
        }
        "mobility.speed" => vec![format!("mobility.speed_min={value}"), format!("mobility.speed_max={value}")],
        _ => vec![format!("{key}={value}")],
    };
    cfg.with_overrides(&overrides).map_err(|e| match e.issues() {
        [] => e.to_string(),
        issues => issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
    })
}

fn known_key(cfg: &SimConfig, key: &str) -> bool {
    if matches!(key, "sew" | "mobility.speed") {
        return true;
    }
    let table = toml::Table::try_from(cfg).expect("config serializes");
    key.split_once('.').is_some_and(|(section, field)| table.get(section).and_then(|t| t.get(field)).is_some())
}

struct Cell {
    index: usize,
    point: usize,
    values: Vec<String>,
    seed: u64,
}

type CellResult = Result<RunSummary, String>;

const METRICS: [&str; 9] = [
    "e_cost",
    "e_cost_data",
    "e_ref_eff",
    "e_ref_eff_data",
    "rtd_mid80",
    "high_gap_mid80",
    "completion_time_s",
    "complete_fraction",
    "stopped_fraction",
];

fn metric_values(s: &RunSummary) -> [Option<f64>; 9] {
    [
        Some(s.e_cost),
        Some(s.e_cost_data),
        s.e_ref_eff,
        s.e_ref_eff_data,
        s.rtd_mid80,
        s.high_gap_mid80,
        s.completion_time_s,
        Some(f64::from(u8::from(s.all_complete))),
        Some(f64::from(u8::from(s.all_stopped))),
    ]
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    let base = args.scenario.load()?;
    let axes: Vec<Axis> = args.axes.iter().map(|a| parse_axis(a)).collect::<Result<_, _>>().map_err(|e| invalid(anyhow!(e)))?;
    let seeds = match &args.seeds {
        Some(raw) => parse_seeds(raw).map_err(|e| invalid(anyhow!(e)))?,
        None => vec![base.run.seed],
    };
    for axis in &axes {
        if !known_key(&base, &axis.key) {
            return Err(invalid(anyhow!("unknown axis key `{}`", axis.key)));
        }
        if axis.key == "sew" {
            if let Some(v) = axis.values.iter().find(|v| !matches!(v.as_str(), "on" | "off")) {
                return Err(invalid(anyhow!("sew must be `on` or `off`, not `{v}`")));
            }
        }
    }

    let mut points: Vec<Vec<String>> = vec![vec![]];
    for axis in &axes {
        points = points.into_iter().flat_map(|p| axis.values.iter().map(move |v| [p.clone(), vec![v.clone()]].concat())).collect();
    }
    let cells: Vec<Cell> = points
        .iter()
        .enumerate()
        .flat_map(|(point, values)| seeds.iter().map(move |&seed| (point, values.clone(), seed)))
        .enumerate()
        .map(|(index, (point, values, seed))| Cell { index, point, values, seed })
        .collect();

    prepare_out_dir(&args.out, args.force)?;
    let cells_dir = args.out.join("cells");
    fs::create_dir_all(&cells_dir)?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.workers.unwrap_or(0)).build().map_err(runtime)?;
    let run_cell = |cell: &Cell| -> CellResult {
        let mut cfg = base.clone();
        for (axis, v) in axes.iter().zip(&cell.values) {
            cfg = apply(&cfg, &axis.key, v)?;
        }
        cfg.run.seed = cell.seed;
        let dir = cells_dir.join(format!("{:04}", cell.index));
        fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        run_into(&cfg, &dir, args.traces).map(|a| a.metrics.summary).map_err(|f| match f {
            Failure::Invalid(e) | Failure::Runtime(e) | Failure::Partial(e) => format!("{e:#}"),
        })
    };
    let results: Vec<CellResult> = pool.install(|| cells.par_iter().map(run_cell).collect());

    let axis_names: Vec<&str> = axes.iter().map(|a| a.key.as_str()).collect();
    let mut per_cell = csv::Writer::from_path(args.out.join("cells.csv")).map_err(runtime)?;
    let header: Vec<&str> = ["cell"].into_iter().chain(axis_names.iter().copied()).chain(["seed", "status"]).chain(METRICS).collect();
    per_cell.write_record(&header).map_err(runtime)?;
    for (cell, res) in cells.iter().zip(&results) {
        let mut row = vec![format!("{:04}", cell.index)];
        row.extend(cell.values.iter().cloned());
        row.push(cell.seed.to_string());
        match res {
            Ok(s) => {
                row.push("ok".into());
                row.extend(metric_values(s).into_iter().map(fmt_opt));
            }
            Err(e) => {
                row.push(format!("failed: {e}"));
                row.extend(std::iter::repeat_n(String::new(), METRICS.len()));
            }
        }
        per_cell.write_record(&row).map_err(runtime)?;
    }
    per_cell.flush()?;

    let mut agg = csv::Writer::from_path(args.out.join("sweep.csv")).map_err(runtime)?;
    let header: Vec<&str> = axis_names.iter().copied().chain(["runs", "failed"]).chain(METRICS).collect();
    agg.write_record(&header).map_err(runtime)?;
    for (point, values) in points.iter().enumerate() {
        let ok: Vec<&RunSummary> =
            cells.iter().zip(&results).filter(|(c, _)| c.point == point).filter_map(|(_, r)| r.as_ref().ok()).collect();
        let failed = cells.iter().zip(&results).filter(|(c, r)| c.point == point && r.is_err()).count();
        let mut row = values.clone();
        row.push(ok.len().to_string());
        row.push(failed.to_string());
        for m in 0..METRICS.len() {
            let defined: Vec<f64> = ok.iter().filter_map(|s| metric_values(s)[m]).collect();
            let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
            row.push(fmt_opt(mean));
        }
        agg.write_record(&row).map_err(runtime)?;
    }
    agg.flush()?;

    let n_failed = results.iter().filter(|r| r.is_err()).count();
    println!("{}: {} cells, {} failed", args.out.display(), cells.len(), n_failed);
    if n_failed > 0 {
        for (cell, res) in cells.iter().zip(&results) {
            if let Err(e) = res {
                eprintln!("cell {:04} (seed {}): {e}", cell.index, cell.seed);
            }
        }
        return Err(Failure::Partial(anyhow!("{n_failed} of {} cells failed", cells.len())));
    }
    Ok(())
}
