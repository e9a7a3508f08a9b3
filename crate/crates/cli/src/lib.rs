//! Batch runs of the simulator: leaks, sweeps, mitigation evaluations and
//! re-analysis of stored passes. Every run writes `manifest.json` first;
//! replaying that manifest reproduces the run's data files byte for byte.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

use eflags_channel::analysis::{
    argmax_histogram, check_grid, run_experiments, signal_cycles, stall_window_sweep, Accuracy,
    Histogram, SecretSource, SweepResult,
};
use eflags_channel::harness::{leak_string, AttackConfig, AttackError, PassRecord, VictimSpec};
use eflags_channel::mitigation::{evaluate_mitigation, Gadget};
use eflags_channel::transient::{flatten_toml, MicroConfig, SimError};

pub const DEFAULT_EXPERIMENTS: usize = 20;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad invocations and configs, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::ConfigRead { .. } | CliError::Config(_) => 2,
            CliError::Attack(
                AttackError::InvalidGadget(_)
                | AttackError::Config(_)
                | AttackError::NoPasses
                | AttackError::NoExperiments
                | AttackError::OffsetOutOfRange { .. },
            ) => 2,
            CliError::Attack(AttackError::Sim(SimError::Config(_))) => 2,
            _ => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Attack(e.into())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything a run is configured by. The text form is TOML, usually as
/// dotted keys such as `micro.noise.per_sample_jitter = 3`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub micro: MicroConfig,
    pub attack: AttackConfig,
    pub victim: VictimSpec,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.micro.validate()?;
        self.attack.validate()?;
        self.victim.validate()?;
        Ok(())
    }

    /// Dotted `key = value` lines, one per field.
    pub fn to_flat_string(&self) -> Result<String, CliError> {
        let value = toml::Value::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(flatten_toml(&value, ""))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// NOPs before the JZ; metric: zero-noise signal cycles.
    Delay,
    /// Revert stall window; metric: zero-noise signal cycles.
    RevertStallWindow,
    /// Per-sample jitter; metric: decoder accuracy.
    Jitter,
    /// Passes per byte; metric: decoder accuracy.
    Passes,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Delay => "delay",
            SweepParam::RevertStallWindow => "revert_stall_window",
            SweepParam::Jitter => "jitter",
            SweepParam::Passes => "passes",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = CliError;

    fn from_str(s: &str) -> Result<SweepParam, CliError> {
        Ok(match s {
            "delay" => SweepParam::Delay,
            "revert_stall_window" => SweepParam::RevertStallWindow,
            "jitter" => SweepParam::Jitter,
            "passes" => SweepParam::Passes,
            _ => return Err(CliError::Usage(format!("unknown sweep parameter `{s}`"))),
        })
    }
}

/// Parses `a..b` (exclusive), `a..=b` or a comma-separated list. The grid
/// must be non-empty and strictly increasing.
pub fn parse_grid(spec: &str) -> Result<Vec<u64>, CliError> {
    let num = |t: &str| {
        t.trim()
            .parse::<u64>()
            .map_err(|_| CliError::Usage(format!("bad grid value `{t}`")))
    };
    let spec = spec.trim();
    let grid = if let Some((a, b)) = spec.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = spec.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else if spec.is_empty() {
        Vec::new()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    check_grid(&grid).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Job {
    Leak,
    Sweep { param: SweepParam, grid: Vec<u64> },
    Mitigate { gadget: Gadget },
    Analyze { input: PathBuf },
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Leak => "leak",
            Job::Sweep { .. } => "sweep",
            Job::Mitigate { .. } => "mitigate",
            Job::Analyze { .. } => "analyze",
        }
    }
}

/// A fully resolved run; written to `manifest.json` before any data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    pub job: Job,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub experiments: usize,
    pub out_dir: PathBuf,
    pub config: RunConfig,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub passes: Option<usize>,
    pub experiments: Option<usize>,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn resolve(job: Job, opts: &Overrides) -> Result<RunManifest, CliError> {
        let mut config = match &opts.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = opts.seed {
            config.micro.rng_seed = s;
        }
        if let Some(p) = opts.passes {
            config.attack.passes = p;
        }
        config.validate()?;
        let experiments = opts.experiments.unwrap_or(DEFAULT_EXPERIMENTS);
        if experiments == 0 {
            return Err(CliError::Usage("--experiments must be at least 1".into()));
        }
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            job,
            config_path: opts.config.clone(),
            seed: config.micro.rng_seed,
            experiments,
            out_dir: opts.out.clone(),
            config,
        })
    }

    pub fn load(path: &Path) -> Result<RunManifest, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let m: RunManifest = serde_json::from_str(&text)?;
        if m.seed != m.config.micro.rng_seed {
            return Err(CliError::Config(
                "manifest seed disagrees with its config".into(),
            ));
        }
        m.config.validate()?;
        Ok(m)
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).map_err(io_err(&path))?))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(io_err(&path))
}

/// Writes the manifest, then runs the job into `manifest.out_dir`. Results
/// meant for the user go to `stdout`; nothing else is printed.
pub fn execute<W: Write>(manifest: &RunManifest, stdout: &mut W) -> Result<(), CliError> {
    let dir = &manifest.out_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_text(
        dir,
        "manifest.json",
        &(serde_json::to_string_pretty(manifest)? + "\n"),
    )?;
    let out = |e: std::io::Error| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    let cfg = &manifest.config;
    match &manifest.job {
        Job::Leak => {
            let report = leak_string(&cfg.micro, &cfg.attack, &cfg.victim)?;
            write_text(dir, "report.json", &(report.to_json() + "\n"))?;
            report.write_passes_csv(create(dir, "passes.csv")?)?;
            for b in &report.bytes {
                let mut h = Histogram::new();
                for p in &b.pass_log {
                    h.add(p.argmax);
                }
                h.write_csv(create(dir, &format!("histogram_{:04}.csv", b.offset))?)?;
                b.profile
                    .write_csv(create(dir, &format!("profile_{:04}.csv", b.offset))?)?;
            }
            writeln!(stdout, "success_rate {:.6}", report.success_rate).map_err(out)?;
            writeln!(
                stdout,
                "decoded {}",
                String::from_utf8_lossy(&report.decoded).escape_debug()
            )
            .map_err(out)?;
        }
        Job::Sweep { param, grid } => {
            let sweep = run_sweep(cfg, *param, grid, manifest.experiments)?;
            let mut text = Vec::new();
            sweep.write_csv(&mut text)?;
            let path = dir.join(format!("sweep_{param}.csv"));
            fs::write(&path, &text).map_err(io_err(&path))?;
            stdout.write_all(&text).map_err(out)?;
        }
        Job::Mitigate { gadget } => {
            let source = SecretSource::Uniform(cfg.victim.clone());
            let report = evaluate_mitigation(
                &cfg.micro,
                &cfg.attack,
                &source,
                gadget,
                manifest.experiments,
            )?;
            write_text(dir, "mitigation.json", &(report.to_json() + "\n"))?;
            writeln!(stdout, "gadget {}", report.gadget).map_err(out)?;
            writeln!(stdout, "baseline_accuracy {:.6}", report.baseline_accuracy).map_err(out)?;
            writeln!(
                stdout,
                "mitigated_accuracy {:.6}",
                report.mitigated_accuracy
            )
            .map_err(out)?;
            writeln!(stdout, "signal_before {}", report.signal_before).map_err(out)?;
            writeln!(stdout, "signal_after {}", report.signal_after).map_err(out)?;
        }
        Job::Analyze { input } => {
            let per_offset = read_passes_csv(input)?;
            let mut decoded = BTreeMap::new();
            for (offset, records) in &per_offset {
                let h = argmax_histogram(records)?;
                h.write_csv(create(dir, &format!("histogram_{offset:04}.csv"))?)?;
                decoded.insert(*offset, h.mode());
            }
            let summary = AnalysisSummary {
                passes: per_offset.values().map(Vec::len).sum(),
                decoded: decoded.values().copied().collect(),
                offsets: decoded.keys().copied().collect(),
            };
            write_text(
                dir,
                "analysis.json",
                &(serde_json::to_string_pretty(&summary)? + "\n"),
            )?;
            for (o, d) in &decoded {
                writeln!(stdout, "offset {o} decoded {d}").map_err(out)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AnalysisSummary {
    passes: usize,
    offsets: Vec<usize>,
    decoded: Vec<u8>,
}

#[derive(Debug, Deserialize)]
struct PassRow {
    offset: usize,
    pass: usize,
    argmax: u8,
    max_time: u64,
}

/// Reads a `passes.csv` written by `leak` back into per-offset records
/// (argmax and maximum only; per-candidate timings are not stored).
pub fn read_passes_csv(path: &Path) -> Result<BTreeMap<usize, Vec<PassRecord>>, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut by_offset: BTreeMap<usize, Vec<PassRecord>> = BTreeMap::new();
    for row in csv::Reader::from_reader(file).deserialize() {
        let row: PassRow = row?;
        let records = by_offset.entry(row.offset).or_default();
        if row.pass != records.len() {
            return Err(CliError::Config(format!(
                "{}: offset {} pass {} out of order",
                path.display(),
                row.offset,
                row.pass
            )));
        }
        records.push(PassRecord {
            timings: Vec::new(),
            max_time: row.max_time,
            argmax: row.argmax,
        });
    }
    if by_offset.is_empty() {
        return Err(CliError::Attack(AttackError::EmptyInput("no pass records")));
    }
    Ok(by_offset)
}

/// Metric over the grid. Accuracy sweeps use fresh uniform secrets of the
/// victim's length in every experiment.
pub fn run_sweep(
    cfg: &RunConfig,
    param: SweepParam,
    grid: &[u64],
    experiments: usize,
) -> Result<SweepResult, CliError> {
    check_grid(grid).map_err(|e| CliError::Usage(e.to_string()))?;
    if param == SweepParam::Delay {
        return Ok(stall_window_sweep(&cfg.micro, grid)?);
    }
    let source = SecretSource::Uniform(cfg.victim.clone());
    let values = grid
        .iter()
        .map(|&g| -> Result<f64, CliError> {
            let mut micro = cfg.micro.clone();
            let mut attack = cfg.attack.clone();
            match param {
                SweepParam::RevertStallWindow => {
                    micro.revert_stall_window = g;
                    return Ok(signal_cycles(&micro, None)? as f64);
                }
                SweepParam::Jitter => micro.noise.per_sample_jitter = g,
                SweepParam::Passes => attack.passes = g as usize,
                SweepParam::Delay => unreachable!(),
            }
            let outcomes = run_experiments(&micro, &attack, &source, None, experiments)?;
            Ok(Accuracy::of(&outcomes, attack.decode_rule).rate())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let metric = match param {
        SweepParam::RevertStallWindow => "signal_cycles",
        _ => "accuracy",
    };
    Ok(SweepResult {
        param: param.name().into(),
        metric: metric.into(),
        grid: grid.to_vec(),
        values,
    })
}
