use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use specplan_core::assets::{self, BundledMap};
use specplan_core::bench::{self, ClockMode, MapEntry, Problem, SweepError, SweepRow, SweepSpec};
use specplan_core::scen::parse_scen;
use specplan_core::search::write_trace;
use specplan_core::verify::{verify_problem, VerifySettings};
use specplan_core::{parse_map, Cell, CheckerConfig, GridMap, Mode, Outcome, PlanError, Planner, PlannerConfig};

const EXIT_FOUND: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_NO_PATH: u8 = 2;
const EXIT_MISMATCH: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

#[derive(Parser)]
#[command(name = "specplan", version, about = "Grid A* with parallel and speculative collision checking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one path and print its run report.
    Plan(PlanArgs),
    /// Run every mode and thread count over a set of problems and write a CSV table.
    Sweep(SweepArgs),
    /// Check that all modes expand nodes in the same order and find optimal paths.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Start cell as X,Y (column, row).
    #[arg(long)]
    start: Option<Cell>,
    /// Goal cell as X,Y.
    #[arg(long)]
    goal: Option<Cell>,
    /// movingai .scen file to take scenarios from instead of --start/--goal.
    #[arg(long, conflicts_with_all = ["start", "goal"])]
    scen: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    /// movingai .map file.
    #[arg(long)]
    map: PathBuf,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Line of the .scen file to use (0-based, header excluded).
    #[arg(long, default_value_t = 0, requires = "scen")]
    scen_index: usize,
    #[arg(long, default_value = "single")]
    mode: Mode,
    /// Worker budget M (ignored in single mode).
    #[arg(long, env = "SPEC_ASTAR_THREADS", default_value_t = 8)]
    threads: usize,
    /// Speculation depth S.
    #[arg(long, default_value_t = 4)]
    spec_depth: usize,
    /// Heuristic weight (>= 1).
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value = "virtual")]
    clock: ClockMode,
    /// Virtual cost of one collision check.
    #[arg(long, default_value_t = 25)]
    check_cost: u64,
    /// Real latency of one collision check in wall mode.
    #[arg(long, default_value_t = 25.0)]
    check_latency_ms: f64,
    #[arg(long, value_enum, default_value_t = Emit::Csv)]
    emit: Emit,
    /// Write the expansion order, one X,Y per line.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Forbid diagonal moves that squeeze between two blocked cells.
    #[arg(long)]
    no_corner_cutting: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Emit {
    Csv,
    Json,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML sweep description; relative paths inside it resolve against its directory.
    #[arg(long, conflicts_with_all = ["map", "bundled"])]
    config: Option<PathBuf>,
    /// movingai .map file (repeatable); every map uses --start/--goal or --scen.
    #[arg(long)]
    map: Vec<PathBuf>,
    /// Sweep the four bundled benchmark maps with their default scenarios.
    #[arg(long)]
    bundled: bool,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Maximum number of .scen lines per map.
    #[arg(long)]
    scen_limit: Option<usize>,
    /// Comma-separated modes; the single-threaded baseline is always included.
    #[arg(long, value_delimiter = ',', default_value = "parallel,speculative")]
    modes: Vec<Mode>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    threads: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    spec_depths: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value = "virtual")]
    clock: ClockMode,
    #[arg(long, default_value_t = 25)]
    check_cost: u64,
    #[arg(long, default_value_t = 25.0)]
    check_latency_ms: f64,
    /// Repetitions per row in wall mode; the fastest is kept.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long)]
    no_corner_cutting: bool,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write JSON instead of CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// movingai .map file (repeatable). Without it the bundled maps are checked.
    #[arg(long)]
    map: Vec<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    scen_limit: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long)]
    no_corner_cutting: bool,
    #[arg(long, hide = true)]
    corrupt_tie_break: bool,
}

/// An exit status with the message printed before exiting.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

type CmdResult = Result<u8, Failure>;

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_ERROR, format!("reading {}: {e}", path.display())))
}

fn load_map(path: &Path) -> Result<GridMap, Failure> {
    parse_map(&read_file(path)?).map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", path.display())))
}

fn map_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn check_bounds(map: &GridMap, which: &str, c: Cell) -> Result<(), Failure> {
    if map.in_bounds(c) {
        Ok(())
    } else {
        Err(Failure::new(EXIT_USAGE, format!("{which} {c} is outside the {}x{} map", map.width(), map.height())))
    }
}

/// Problems for one map from `--start/--goal` or a .scen file.
fn problems_for(
    map: Arc<GridMap>,
    name: &str,
    args: &ScenarioArgs,
    limit: Option<usize>,
) -> Result<Vec<Problem>, Failure> {
    let problem = |scenario: String, start: Cell, goal: Cell| Problem {
        map_name: name.to_string(),
        scenario,
        map: Arc::clone(&map),
        start,
        goal,
    };
    if let Some(scen) = &args.scen {
        let lines =
            parse_scen(&read_file(scen)?).map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", scen.display())))?;
        return lines
            .iter()
            .take(limit.unwrap_or(usize::MAX))
            .enumerate()
            .map(|(i, l)| {
                if !l.fits(&map) {
                    return Err(Failure::new(
                        EXIT_USAGE,
                        format!("{}: scenario {i} does not fit map {name}", scen.display()),
                    ));
                }
                Ok(problem(format!("scen{i}"), l.start, l.goal))
            })
            .collect();
    }
    match (args.start, args.goal) {
        (Some(s), Some(g)) => {
            check_bounds(&map, "start", s)?;
            check_bounds(&map, "goal", g)?;
            Ok(vec![problem("cli".to_string(), s, g)])
        }
        _ => Err(Failure::new(EXIT_USAGE, "both --start and --goal (or --scen) are required")),
    }
}

fn bundled_problem(b: &BundledMap) -> Problem {
    Problem {
        map_name: b.name.to_string(),
        scenario: "default".to_string(),
        map: Arc::new(b.map()),
        start: b.start,
        goal: b.goal,
    }
}

fn checker(clock: ClockMode, check_cost: u64, latency_ms: f64) -> Result<CheckerConfig, Failure> {
    match clock {
        ClockMode::Virtual => Ok(CheckerConfig::instant(check_cost)),
        ClockMode::Wall if latency_ms.is_finite() && latency_ms >= 0.0 => {
            Ok(CheckerConfig::with_latency(Duration::from_secs_f64(latency_ms / 1e3), check_cost))
        }
        ClockMode::Wall => Err(Failure::new(EXIT_USAGE, "--check-latency-ms must be a nonnegative number")),
    }
}

fn plan_error(e: PlanError) -> Failure {
    match e {
        PlanError::OutOfBounds { .. } | PlanError::StartBlocked(_) | PlanError::Config(_) => {
            Failure::new(EXIT_USAGE, e.to_string())
        }
        other => Failure::new(EXIT_ERROR, other.to_string()),
    }
}

fn cmd_plan(args: PlanArgs) -> CmdResult {
    let map = Arc::new(load_map(&args.map)?);
    let name = map_name(&args.map);
    let problems = problems_for(Arc::clone(&map), &name, &args.scenario, None)?;
    let problem = problems.into_iter().nth(args.scen_index).ok_or_else(|| {
        Failure::new(EXIT_USAGE, format!("--scen-index {} is past the end of the scenario file", args.scen_index))
    })?;

    let config = PlannerConfig {
        mode: args.mode,
        max_threads: args.threads,
        spec_depth: args.spec_depth,
        epsilon: args.epsilon,
        checker: checker(args.clock, args.check_cost, args.check_latency_ms)?,
        corner_cutting: !args.no_corner_cutting,
        ..PlannerConfig::default()
    };
    let mut planner = Planner::new(config).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let result = planner.plan(&map, problem.start, problem.goal).map_err(plan_error)?;

    if let Some(path) = &args.trace {
        let write = || -> io::Result<()> {
            let mut w = BufWriter::new(fs::File::create(path)?);
            write_trace(&result.expansion_trace, &mut w)?;
            w.flush()
        };
        write().map_err(|e| Failure::new(EXIT_ERROR, format!("writing {}: {e}", path.display())))?;
    }

    let row = SweepRow::from_report(&name, &problem.scenario, &result.report, args.clock);
    let stdout = io::stdout().lock();
    let written = match args.emit {
        Emit::Csv => bench::write_csv(std::slice::from_ref(&row), stdout),
        Emit::Json => bench::write_json(std::slice::from_ref(&row), stdout),
    };
    written.map_err(|e| Failure::new(EXIT_ERROR, e.to_string()))?;

    Ok(match result.outcome {
        Outcome::Found { .. } => EXIT_FOUND,
        Outcome::NoPath => {
            eprintln!("no path from {} to {}", problem.start, problem.goal);
            EXIT_NO_PATH
        }
    })
}

fn sweep_error(e: SweepError) -> Failure {
    let code = match &e {
        e if e.is_parse_error() => EXIT_DATA,
        SweepError::Invalid(_) => EXIT_USAGE,
        _ => EXIT_ERROR,
    };
    Failure::new(code, e.to_string())
}

fn cmd_sweep(args: SweepArgs) -> CmdResult {
    let (spec, problems) = if let Some(config) = &args.config {
        let mut spec = bench::parse_sweep_config(&read_file(config)?).map_err(sweep_error)?;
        let base = config.parent().unwrap_or(Path::new("."));
        let problems = bench::load_problems(&spec, base).map_err(sweep_error)?;
        if let Some(out) = spec.output.take() {
            spec.output = Some(base.join(out));
        }
        (spec, problems)
    } else {
        let mut problems = Vec::new();
        for path in &args.map {
            let map = Arc::new(load_map(path)?);
            problems.extend(problems_for(map, &map_name(path), &args.scenario, args.scen_limit)?);
        }
        if args.bundled {
            problems.extend(assets::benchmark_maps().into_iter().map(bundled_problem));
        }
        if problems.is_empty() {
            return Err(Failure::new(EXIT_USAGE, "nothing to sweep: pass --config, --map or --bundled"));
        }
        let spec = SweepSpec {
            modes: args.modes.clone(),
            threads: args.threads.clone(),
            spec_depths: args.spec_depths.clone(),
            epsilon: args.epsilon,
            clock: args.clock,
            check_cost: args.check_cost,
            check_latency_ms: args.check_latency_ms,
            trials: args.trials,
            corner_cutting: !args.no_corner_cutting,
            // the map list only has to be nonempty for validation; problems are already loaded
            ..SweepSpec::new(vec![MapEntry {
                path: PathBuf::new(),
                name: None,
                scenarios: vec![],
                scen: None,
                scen_limit: None,
            }])
        };
        (spec, problems)
    };

    let table = bench::run_sweep(&spec, &problems).map_err(sweep_error)?;
    for e in &table.errors {
        eprintln!("failed: {e}");
    }

    let out_path = args.out.clone().or(spec.output.clone());
    let emit = |w: &mut dyn Write| {
        if args.json {
            bench::write_json(&table.rows, w)
        } else {
            bench::write_csv(&table.rows, w)
        }
    };
    let written = match &out_path {
        Some(p) => fs::File::create(p).map_err(|e| SweepError::Output(format!("{}: {e}", p.display()))).and_then(|f| {
            let mut w = BufWriter::new(f);
            emit(&mut w)?;
            w.flush().map_err(|e| SweepError::Output(e.to_string()))
        }),
        None => emit(&mut io::stdout().lock()),
    };
    written.map_err(|e| Failure::new(EXIT_ERROR, e.to_string()))?;

    if table.any_succeeded() {
        Ok(EXIT_FOUND)
    } else {
        Err(Failure::new(EXIT_ERROR, "every run failed"))
    }
}

fn fmt_cost(c: Option<f64>) -> String {
    c.map_or_else(|| "-".to_string(), |c| format!("{c:.6}"))
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    let mut problems = Vec::new();
    for path in &args.map {
        let map = Arc::new(load_map(path)?);
        problems.extend(problems_for(map, &map_name(path), &args.scenario, args.scen_limit)?);
    }
    if args.map.is_empty() {
        if args.scenario.start.is_some() || args.scenario.goal.is_some() || args.scenario.scen.is_some() {
            return Err(Failure::new(EXIT_USAGE, "--start/--goal/--scen need --map"));
        }
        problems.extend(assets::benchmark_maps().into_iter().map(bundled_problem));
    }
    let settings = VerifySettings {
        epsilon: args.epsilon,
        corner_cutting: !args.no_corner_cutting,
        corrupt_tie_break: args.corrupt_tie_break,
        ..VerifySettings::default()
    };

    let mut out = io::stdout().lock();
    let mut first_failure: Option<String> = None;
    let _ = writeln!(
        out,
        "{:<14} {:<10} {:<12} {:>3} {:>2} {:>10} {:>12} {:>12} {:>6} {:>5} result",
        "map", "scenario", "mode", "M", "S", "expansions", "cost", "oracle", "order", "cost"
    );
    for p in &problems {
        let records = verify_problem(&p.map, p.start, p.goal, &settings).map_err(plan_error)?;
        for r in &records {
            let _ = writeln!(
                out,
                "{:<14} {:<10} {:<12} {:>3} {:>2} {:>10} {:>12} {:>12} {:>6} {:>5} {}",
                p.map_name,
                p.scenario,
                r.mode,
                r.threads,
                r.spec_depth.map_or_else(|| "-".to_string(), |s| s.to_string()),
                r.expansions,
                fmt_cost(r.cost),
                fmt_cost(r.oracle_cost),
                if r.divergence.is_none() { "ok" } else { "DIFF" },
                if r.cost_ok { "ok" } else { "BAD" },
                if r.passed() { "pass" } else { "FAIL" },
            );
            if !r.passed() && first_failure.is_none() {
                let what = match r.divergence {
                    Some(i) => format!("first divergent expansion index {i}"),
                    None => format!("cost {} vs oracle {}", fmt_cost(r.cost), fmt_cost(r.oracle_cost)),
                };
                let depth = r.spec_depth.map_or_else(String::new, |s| format!(" S={s}"));
                first_failure =
                    Some(format!("{}/{} {} M={}{depth}: {what}", p.map_name, p.scenario, r.mode, r.threads));
            }
        }
    }
    drop(out);
    match first_failure {
        Some(msg) => Err(Failure::new(EXIT_MISMATCH, format!("verification failed: {msg}"))),
        None => Ok(EXIT_FOUND),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_FOUND });
        }
    };
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("specplan: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
