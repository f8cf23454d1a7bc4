//! Thread-scaling sweeps and their CSV/JSON output.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::CheckerConfig;
use crate::engine::{Mode, PlannerConfig};
use crate::grid::{parse_map, Cell, GridMap, MapParseError};
use crate::metrics::RunReport;
use crate::scen::{parse_scen, ScenParseError};
use crate::search::{Outcome, Planner};

/// CSV header, in the order rows are written.
pub const CSV_COLUMNS: [&str; 16] = [
    "map",
    "scenario",
    "mode",
    "threads",
    "spec_depth",
    "epsilon",
    "expansions",
    "nonspec_checks",
    "spec_checks",
    "used_spec_checks",
    "accuracy_pct",
    "virtual_time",
    "wall_time_s",
    "normalized_time",
    "path_cost",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// Instant checks; timing comes from the virtual cost model only.
    #[default]
    Virtual,
    /// Busy-loop checks with real latency; wall time is measured.
    Wall,
}

impl FromStr for ClockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "virtual" => Ok(ClockMode::Virtual),
            "wall" => Ok(ClockMode::Wall),
            _ => Err(format!("unknown clock {s:?} (expected virtual or wall)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Found,
    NoPath,
    Failed,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Found => "found",
            RunStatus::NoPath => "nopath",
            RunStatus::Failed => "failed",
        })
    }
}

/// One output row. Field order matches [`CSV_COLUMNS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub map: String,
    pub scenario: String,
    pub mode: Mode,
    pub threads: usize,
    pub spec_depth: Option<usize>,
    pub epsilon: f64,
    pub expansions: u64,
    pub nonspec_checks: u64,
    pub spec_checks: u64,
    pub used_spec_checks: u64,
    pub accuracy_pct: Option<f64>,
    pub virtual_time: u64,
    pub wall_time_s: Option<f64>,
    pub normalized_time: Option<f64>,
    pub path_cost: Option<f64>,
    pub status: RunStatus,
}

impl SweepRow {
    pub fn from_report(map: &str, scenario: &str, report: &RunReport, clock: ClockMode) -> Self {
        let status = if report.path_cost.is_some() { RunStatus::Found } else { RunStatus::NoPath };
        SweepRow {
            map: map.to_string(),
            scenario: scenario.to_string(),
            mode: report.mode,
            threads: report.threads,
            spec_depth: (report.mode == Mode::Speculative).then_some(report.spec_depth),
            epsilon: report.epsilon,
            expansions: report.expansions,
            nonspec_checks: report.nonspec_checks,
            spec_checks: report.spec_checks,
            used_spec_checks: report.used_spec_checks,
            accuracy_pct: report.accuracy(),
            virtual_time: report.virtual_time,
            wall_time_s: (clock == ClockMode::Wall).then_some(report.wall_time),
            normalized_time: None,
            path_cost: report.path_cost,
            status,
        }
    }

    fn failed(map: &str, scenario: &str, cfg: &PlannerConfig) -> Self {
        SweepRow {
            map: map.to_string(),
            scenario: scenario.to_string(),
            mode: cfg.mode,
            threads: cfg.max_threads,
            spec_depth: (cfg.mode == Mode::Speculative).then_some(cfg.spec_depth),
            epsilon: cfg.epsilon,
            expansions: 0,
            nonspec_checks: 0,
            spec_checks: 0,
            used_spec_checks: 0,
            accuracy_pct: None,
            virtual_time: 0,
            wall_time_s: None,
            normalized_time: None,
            path_cost: None,
            status: RunStatus::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    #[serde(default)]
    pub name: Option<String>,
    pub start: [u32; 2],
    pub goal: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapEntry {
    pub path: PathBuf,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioEntry>,
    /// movingai `.scen` file whose lines become extra scenarios.
    #[serde(default)]
    pub scen: Option<PathBuf>,
    #[serde(default)]
    pub scen_limit: Option<usize>,
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Parallel, Mode::Speculative]
}

fn default_threads() -> Vec<usize> {
    vec![1, 2, 4, 8, 16, 32]
}

fn default_spec_depths() -> Vec<usize> {
    vec![4]
}

fn default_epsilon() -> f64 {
    1.0
}

fn default_check_cost() -> u64 {
    25
}

fn default_overhead() -> u64 {
    1
}

fn default_latency() -> f64 {
    25.0
}

fn default_trials() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// A sweep description, usually read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub maps: Vec<MapEntry>,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_threads")]
    pub threads: Vec<usize>,
    #[serde(default = "default_spec_depths")]
    pub spec_depths: Vec<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub clock: ClockMode,
    #[serde(default = "default_check_cost")]
    pub check_cost: u64,
    #[serde(default = "default_overhead")]
    pub expansion_overhead: u64,
    #[serde(default = "default_latency")]
    pub check_latency_ms: f64,
    /// Wall-clock repetitions per row; the fastest is reported.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_true")]
    pub corner_cutting: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    pub fn new(maps: Vec<MapEntry>) -> Self {
        SweepSpec {
            maps,
            modes: default_modes(),
            threads: default_threads(),
            spec_depths: default_spec_depths(),
            epsilon: 1.0,
            clock: ClockMode::Virtual,
            check_cost: 25,
            expansion_overhead: 1,
            check_latency_ms: 25.0,
            trials: 1,
            corner_cutting: true,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: &str| Err(SweepError::Invalid(m.to_string()));
        if self.maps.is_empty() {
            return bad("no maps");
        }
        if self.modes.is_empty() {
            return bad("no modes");
        }
        if self.threads.is_empty() || self.threads.contains(&0) {
            return bad("thread counts must be a nonempty list of positive integers");
        }
        if self.spec_depths.is_empty() || self.spec_depths.contains(&0) {
            return bad("speculation depths must be a nonempty list of positive integers");
        }
        if !self.epsilon.is_finite() || self.epsilon < 1.0 {
            return bad("epsilon must be >= 1");
        }
        if self.expansion_overhead == 0 {
            return bad("expansion_overhead must be positive");
        }
        if self.trials == 0 {
            return bad("trials must be positive");
        }
        if !(self.check_latency_ms.is_finite() && self.check_latency_ms >= 0.0) {
            return bad("check_latency_ms must be a nonnegative number");
        }
        Ok(())
    }

    fn base_config(&self) -> PlannerConfig {
        let checker = match self.clock {
            ClockMode::Virtual => CheckerConfig::instant(self.check_cost),
            ClockMode::Wall => {
                CheckerConfig::with_latency(Duration::from_secs_f64(self.check_latency_ms / 1e3), self.check_cost)
            }
        };
        PlannerConfig {
            epsilon: self.epsilon,
            checker,
            expansion_overhead: self.expansion_overhead,
            corner_cutting: self.corner_cutting,
            ..PlannerConfig::default()
        }
    }

    /// Planner configurations for one problem, in row order. The single-threaded baseline is
    /// always first; multi-threaded modes skip thread counts below 2.
    pub fn configs(&self) -> Vec<PlannerConfig> {
        let base = self.base_config();
        let mut out = vec![PlannerConfig { mode: Mode::Single, max_threads: 1, ..base.clone() }];
        for &mode in &self.modes {
            for &m in self.threads.iter().filter(|&&m| m >= 2) {
                match mode {
                    Mode::Single => {}
                    Mode::Parallel => out.push(PlannerConfig { mode, max_threads: m, ..base.clone() }),
                    Mode::Speculative => out.extend(self.spec_depths.iter().map(|&s| PlannerConfig {
                        mode,
                        max_threads: m,
                        spec_depth: s,
                        ..base.clone()
                    })),
                }
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Map { path: PathBuf, source: MapParseError },
    #[error("{path}: {source}")]
    Scen { path: PathBuf, source: ScenParseError },
    #[error("sweep config: {0}")]
    Config(String),
    #[error("writing output: {0}")]
    Output(String),
}

impl SweepError {
    /// True for errors caused by malformed input files rather than bad settings.
    pub fn is_parse_error(&self) -> bool {
        matches!(self, SweepError::Map { .. } | SweepError::Scen { .. } | SweepError::Config(_))
    }
}

/// Parses a TOML sweep description.
pub fn parse_sweep_config(text: &str) -> Result<SweepSpec, SweepError> {
    let spec: SweepSpec = toml::from_str(text).map_err(|e| SweepError::Config(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

/// A concrete search problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub map_name: String,
    pub scenario: String,
    pub map: Arc<GridMap>,
    pub start: Cell,
    pub goal: Cell,
}

fn read(path: &Path) -> Result<String, SweepError> {
    std::fs::read_to_string(path).map_err(|source| SweepError::Io { path: path.to_path_buf(), source })
}

/// Loads maps and scenarios, resolving relative paths against `base_dir`.
pub fn load_problems(spec: &SweepSpec, base_dir: &Path) -> Result<Vec<Problem>, SweepError> {
    let mut problems = Vec::new();
    for entry in &spec.maps {
        let path = base_dir.join(&entry.path);
        let map = Arc::new(parse_map(&read(&path)?).map_err(|source| SweepError::Map { path: path.clone(), source })?);
        let map_name = entry.name.clone().unwrap_or_else(|| {
            path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
        });
        let before = problems.len();
        for (i, s) in entry.scenarios.iter().enumerate() {
            problems.push(Problem {
                map_name: map_name.clone(),
                scenario: s.name.clone().unwrap_or_else(|| format!("s{i}")),
                map: Arc::clone(&map),
                start: Cell::new(s.start[0], s.start[1]),
                goal: Cell::new(s.goal[0], s.goal[1]),
            });
        }
        if let Some(scen) = &entry.scen {
            let scen_path = base_dir.join(scen);
            let lines = parse_scen(&read(&scen_path)?)
                .map_err(|source| SweepError::Scen { path: scen_path.clone(), source })?;
            for (i, l) in lines.iter().take(entry.scen_limit.unwrap_or(usize::MAX)).enumerate() {
                if !l.fits(&map) {
                    return Err(SweepError::Invalid(format!(
                        "{}: scenario {i} does not fit map {map_name}",
                        scen_path.display()
                    )));
                }
                problems.push(Problem {
                    map_name: map_name.clone(),
                    scenario: format!("scen{i}"),
                    map: Arc::clone(&map),
                    start: l.start,
                    goal: l.goal,
                });
            }
        }
        if problems.len() == before {
            return Err(SweepError::Invalid(format!("map {map_name} has no scenarios")));
        }
    }
    Ok(problems)
}

/// Rows plus a message for every failed run.
#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub errors: Vec<String>,
}

impl SweepTable {
    pub fn any_succeeded(&self) -> bool {
        self.rows.iter().any(|r| r.status != RunStatus::Failed)
    }
}

/// Runs every configuration of `spec` on every problem.
///
/// Failed runs produce a `failed` row and an entry in `errors`; the sweep carries on.
pub fn run_sweep(spec: &SweepSpec, problems: &[Problem]) -> Result<SweepTable, SweepError> {
    spec.validate()?;
    let configs = spec.configs();
    let trials = if spec.clock == ClockMode::Wall { spec.trials } else { 1 };
    let mut planners: HashMap<(Mode, usize), Planner> = HashMap::new();
    let mut table = SweepTable::default();

    for p in problems {
        let first_row = table.rows.len();
        for cfg in &configs {
            let key = (cfg.mode, cfg.max_threads);
            let planner = match planners.entry(key) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    let planner = e.into_mut();
                    planner.reconfigure(cfg.clone()).map(|_| planner)
                }
                std::collections::hash_map::Entry::Vacant(v) => Planner::new(cfg.clone()).map(|pl| v.insert(pl)),
            };
            let planner = match planner {
                Ok(pl) => pl,
                Err(e) => {
                    table.errors.push(format!("{}/{} {}: {e}", p.map_name, p.scenario, cfg.mode));
                    table.rows.push(SweepRow::failed(&p.map_name, &p.scenario, cfg));
                    continue;
                }
            };
            let mut best: Option<RunReport> = None;
            let mut failure = None;
            for _ in 0..trials {
                match planner.plan(&p.map, p.start, p.goal) {
                    Ok(r) => {
                        let keep = best.as_ref().is_none_or(|b| r.report.wall_time < b.wall_time);
                        if keep {
                            best = Some(r.report);
                        }
                    }
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            }
            match (failure, best) {
                (None, Some(report)) => {
                    table.rows.push(SweepRow::from_report(&p.map_name, &p.scenario, &report, spec.clock))
                }
                (failure, _) => {
                    let msg = failure.map_or_else(|| "no trials ran".to_string(), |e| e.to_string());
                    table
                        .errors
                        .push(format!("{}/{} {} M={}: {msg}", p.map_name, p.scenario, cfg.mode, cfg.max_threads));
                    table.rows.push(SweepRow::failed(&p.map_name, &p.scenario, cfg));
                }
            }
        }
        let rows = &mut table.rows[first_row..];
        let baseline =
            rows.iter().find(|r| r.mode == Mode::Single && r.status != RunStatus::Failed).map(|r| r.virtual_time);
        for r in rows.iter_mut().filter(|r| r.status != RunStatus::Failed) {
            r.normalized_time = baseline.filter(|&b| b > 0).map(|b| r.virtual_time as f64 / b as f64);
        }
    }
    Ok(table)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), SweepError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(|e| SweepError::Output(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| SweepError::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| SweepError::Output(e.to_string()))
}

pub fn write_json<W: Write>(rows: &[SweepRow], mut out: W) -> Result<(), SweepError> {
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| SweepError::Output(e.to_string()))?;
    writeln!(out).map_err(|e| SweepError::Output(e.to_string()))
}

/// Outcome label for a finished search.
pub fn status_of(outcome: &Outcome) -> RunStatus {
    match outcome {
        Outcome::Found { .. } => RunStatus::Found,
        Outcome::NoPath => RunStatus::NoPath,
    }
}
