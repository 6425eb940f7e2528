mod sweep;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use dragoncast::metrics::MetricsSeries;
use dragoncast::sim::{self, ConfigError, SimConfig, TraceLog};
use dragoncast::presets;

/// Run and analyse network-coded broadcast simulations.
#[derive(Parser)]
#[command(name = "dragoncast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its artifacts to a directory.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite an existing output directory.
        #[arg(long)]
        force: bool,
    },
    /// Run the Cartesian product of sweep axes and seeds.
    Sweep(sweep::SweepArgs),
    /// Recompute metrics from a trace file.
    ReplayMetrics {
        trace: PathBuf,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the time series CSV.
        #[arg(long)]
        series: Option<PathBuf>,
        /// Use only samples at multiples of this many seconds. The result
        /// is flagged as resampled and is not comparable to the original.
        #[arg(long)]
        cadence: Option<f64>,
    },
    /// Check a scenario and print it with all defaults filled in.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// List the built-in scenarios.
    Presets,
}

#[derive(Args, Clone)]
pub struct ScenarioArgs {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario name; see `dragoncast presets`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override a setting, e.g. `--set protocol.window=40`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

/// Failure classes, mapped to exit codes 1, 2 and 3.
#[derive(Debug)]
pub enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
    /// Some sweep cells failed; the rest were written.
    Partial(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Partial(_) => 3,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invalid(e.into())
}

pub fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn config_failure(e: ConfigError) -> Failure {
    match &e {
        ConfigError::Invalid(issues) => {
            let lines: Vec<String> = issues.iter().map(|i| format!("  {i}")).collect();
            invalid(anyhow!("invalid configuration:\n{}", lines.join("\n")))
        }
        _ => invalid(e),
    }
}

impl ScenarioArgs {
    pub fn load(&self) -> CliResult<SimConfig> {
        let base = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(invalid)?;
                SimConfig::from_toml_str(&text).map_err(config_failure)?
            }
            (None, Some(name)) => match presets::find(name) {
                Some(p) => p.config(),
                None => {
                    let names: Vec<&str> = presets::PRESETS.iter().map(|p| p.name).collect();
                    return Err(invalid(anyhow!("unknown preset `{name}` (known: {})", names.join(", "))));
                }
            },
            (None, None) => SimConfig::default(),
        };
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("run.seed={seed}"));
        }
        base.with_overrides(&overrides).map_err(config_failure)
    }
}

/// Creates `dir`, refusing to reuse a non-empty one unless forced.
pub fn prepare_out_dir(dir: &Path, force: bool) -> CliResult<()> {
    if dir.exists() {
        let occupied = fs::read_dir(dir)?.next().is_some();
        if occupied && !force {
            return Err(invalid(anyhow!("output directory {} is not empty (use --force to overwrite)", dir.display())));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

pub struct RunArtifacts {
    pub summary: String,
    pub metrics: MetricsSeries,
}

/// Runs `cfg` and writes `config.toml`, `summary.txt` and, if requested,
/// `trace.csv` and `series.csv` into `dir`.
pub fn run_into(cfg: &SimConfig, dir: &Path, keep_trace: bool) -> CliResult<RunArtifacts> {
    fs::write(dir.join("config.toml"), cfg.to_resolved_toml())?;
    let out = sim::run(cfg).map_err(config_failure)?;
    let metrics = MetricsSeries::from_trace(&out.trace).map_err(runtime)?;
    let summary = metrics.summary.to_text();
    if keep_trace {
        out.trace.write_to(std::io::BufWriter::new(fs::File::create(dir.join("trace.csv"))?))?;
        metrics.write_csv(fs::File::create(dir.join("series.csv"))?).map_err(runtime)?;
    }
    fs::write(dir.join("summary.txt"), &summary)?;
    Ok(RunArtifacts { summary, metrics })
}

fn cmd_run(scenario: &ScenarioArgs, out: &Path, force: bool) -> CliResult<()> {
    let cfg = scenario.load()?;
    prepare_out_dir(out, force)?;
    let art = run_into(&cfg, out, true)?;
    let s = &art.metrics.summary;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "{}: {} nodes, end {:.2} s, complete {}, E_cost {:.4}, E_ref_eff {}, RTD {}",
        out.display(),
        s.n_nodes,
        s.end_time_s,
        s.all_complete,
        s.e_cost,
        fmt(s.e_ref_eff),
        fmt(s.rtd_mid80)
    );
    Ok(())
}

fn cmd_replay(trace: &Path, out: Option<&Path>, series: Option<&Path>, cadence: Option<f64>) -> CliResult<()> {
    let text = fs::read_to_string(trace).with_context(|| format!("reading {}", trace.display())).map_err(runtime)?;
    let log = TraceLog::parse(&text).map_err(|e| invalid(anyhow!("{}: {e}", trace.display())))?;
    let metrics = match cadence {
        None => MetricsSeries::from_trace(&log),
        Some(secs) => {
            if !(secs.is_finite() && secs > 0.0) {
                return Err(invalid(anyhow!("cadence must be a positive number of seconds")));
            }
            MetricsSeries::resampled(&log, (secs * 1e9).round() as u64)
        }
    }
    .map_err(invalid)?;
    let summary = metrics.summary.to_text();
    match out {
        Some(p) => fs::write(p, &summary)?,
        None => print!("{summary}"),
    }
    if let Some(p) = series {
        metrics.write_csv(fs::File::create(p)?).map_err(runtime)?;
    }
    Ok(())
}

fn cmd_validate(scenario: &ScenarioArgs) -> CliResult<()> {
    let cfg = scenario.load()?;
    print!("{}", cfg.to_resolved_toml());
    Ok(())
}

fn cmd_presets() {
    for p in presets::PRESETS {
        println!("{:<18} {}", p.name, p.summary);
        for axis in p.axes {
            println!("{:<18}   --axis {axis}", "");
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { scenario, out, force } => cmd_run(&scenario, &out, force),
        Command::Sweep(args) => sweep::cmd_sweep(&args),
        Command::ReplayMetrics { trace, out, series, cadence } => cmd_replay(&trace, out.as_deref(), series.as_deref(), cadence),
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Presets => {
            cmd_presets();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Invalid(e) | Failure::Runtime(e) | Failure::Partial(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
