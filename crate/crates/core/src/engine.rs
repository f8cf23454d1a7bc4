//! Per-expansion batch orchestration.
//!
//! Every expansion produces one [`ExpansionBatch`]: the UNKNOWN immediate neighbors of the
//! expanded node split across non-speculative workers, plus (in speculative mode) one
//! single-cell task per idle worker for neighbors of cells further along the direction the
//! search arrived from. The batch runs to completion before the search continues, so the
//! search itself only ever observes a store that is a superset of what the non-speculative
//! modes would see. Expansion order is unaffected because a cell's status is the same no
//! matter who computed it.

use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crossbeam_channel::{unbounded, Receiver, Sender};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{find_collision, BatchClaims, CheckerConfig, CollisionError, CollisionStatusStore, Provenance};
use crate::grid::{Cell, GridMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Parallel,
    Speculative,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Single, Mode::Parallel, Mode::Speculative];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Parallel => "parallel",
            Mode::Speculative => "speculative",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Mode::Single),
            "parallel" => Ok(Mode::Parallel),
            "speculative" => Ok(Mode::Speculative),
            _ => Err(ConfigError::UnknownMode(s.to_string())),
        }
    }
}

/// Open-list ordering. Only [`TieBreak::Standard`] is meant for real use; the other variant
/// exists so order-divergence checks have a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieBreak {
    /// f ascending, then h ascending, then insertion order.
    #[default]
    Standard,
    /// f ascending, then h descending, then newest first.
    Inverted,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("speculative mode requires at least 2 threads")]
    SpeculativeNeedsTwoThreads,
    #[error("thread count must be at least 1")]
    ZeroThreads,
    #[error("speculation depth must be at least 1")]
    ZeroSpecDepth,
    #[error("epsilon must be a finite number >= 1, got {0}")]
    BadEpsilon(String),
    #[error("per-expansion overhead must be positive")]
    ZeroExpansionOverhead,
    #[error("unknown mode {0:?} (expected single, parallel or speculative)")]
    UnknownMode(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub mode: Mode,
    /// Worker budget M.
    pub max_threads: usize,
    /// Speculation lookahead S.
    pub spec_depth: usize,
    pub epsilon: f64,
    pub checker: CheckerConfig,
    /// Fixed virtual cost of one expansion (E0).
    pub expansion_overhead: u64,
    /// Whether a diagonal move may pass between two blocked cardinal cells.
    pub corner_cutting: bool,
    #[doc(hidden)]
    pub tie_break: TieBreak,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            mode: Mode::Single,
            max_threads: 1,
            spec_depth: 4,
            epsilon: 1.0,
            checker: CheckerConfig::default(),
            expansion_overhead: 1,
            corner_cutting: true,
            tie_break: TieBreak::Standard,
        }
    }
}

impl PlannerConfig {
    pub fn single() -> Self {
        PlannerConfig::default()
    }

    pub fn parallel(threads: usize) -> Self {
        PlannerConfig { mode: Mode::Parallel, max_threads: threads, ..Default::default() }
    }

    pub fn speculative(threads: usize, spec_depth: usize) -> Self {
        PlannerConfig { mode: Mode::Speculative, max_threads: threads, spec_depth, ..Default::default() }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_checker(mut self, checker: CheckerConfig) -> Self {
        self.checker = checker;
        self
    }

    /// Checks invariants and returns the effective configuration (single mode runs on one
    /// thread whatever was requested).
    pub fn validated(&self) -> Result<PlannerConfig, ConfigError> {
        if self.max_threads == 0 {
            return Err(ConfigError::ZeroThreads);
        }
        if self.spec_depth == 0 {
            return Err(ConfigError::ZeroSpecDepth);
        }
        if !self.epsilon.is_finite() || self.epsilon < 1.0 {
            return Err(ConfigError::BadEpsilon(self.epsilon.to_string()));
        }
        if self.expansion_overhead == 0 {
            return Err(ConfigError::ZeroExpansionOverhead);
        }
        if self.mode == Mode::Speculative && self.max_threads < 2 {
            return Err(ConfigError::SpeculativeNeedsTwoThreads);
        }
        let mut cfg = self.clone();
        if cfg.mode == Mode::Single {
            cfg.max_threads = 1;
        }
        Ok(cfg)
    }
}

/// Unit step the search took to reach a node from its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Direction {
    pub dx: i8,
    pub dy: i8,
}

/// `node - parent`, or `None` for the start node.
pub fn direction_of(node: Cell, parent: Option<Cell>) -> Option<Direction> {
    let p = parent?;
    let dx = i64::from(node.x) - i64::from(p.x);
    let dy = i64::from(node.y) - i64::from(p.y);
    debug_assert!(dx.abs() <= 1 && dy.abs() <= 1 && (dx, dy) != (0, 0));
    Some(Direction { dx: dx as i8, dy: dy as i8 })
}

/// In-bounds immediate neighbors of `node` whose status is still unknown, in canonical order.
pub fn get_unknown_neighbors(node: Cell, store: &CollisionStatusStore, map: &GridMap) -> Vec<Cell> {
    map.neighbors8(node).filter(|&n| store.is_unknown(n)).collect()
}

/// Splits `unknown` into `min(threads, len)` contiguous chunks whose sizes differ by at most
/// one, larger chunks first.
pub fn assign_workload(unknown: &[Cell], threads: usize) -> Vec<Vec<Cell>> {
    let t = threads.min(unknown.len());
    if t == 0 {
        return Vec::new();
    }
    let base = unknown.len() / t;
    let extra = unknown.len() % t;
    let mut out = Vec::with_capacity(t);
    let mut rest = unknown;
    for i in 0..t {
        let n = base + usize::from(i < extra);
        let (head, tail) = rest.split_at(n);
        out.push(head.to_vec());
        rest = tail;
    }
    out
}

/// Picks single-cell speculative targets along `dir`.
///
/// Walks `node + k·dir` for `k = 1..=depth`, stopping at the first out-of-bounds point, and
/// emits each in-bounds unknown neighbor of those points that can still be claimed in this
/// batch, until `idle` workers have been handed a cell.
pub fn speculate(
    node: Cell,
    dir: Direction,
    mut idle: usize,
    depth: usize,
    store: &CollisionStatusStore,
    map: &GridMap,
    claims: &mut BatchClaims,
) -> Vec<Cell> {
    let mut tasks = Vec::new();
    if idle == 0 {
        return tasks;
    }
    for k in 1..=depth as i64 {
        let Some(spec_node) = node.offset(k * i64::from(dir.dx), k * i64::from(dir.dy)) else {
            break;
        };
        if !map.in_bounds(spec_node) {
            break;
        }
        for n in map.neighbors8(spec_node) {
            if store.is_unknown(n) && claims.claim_cell(n) {
                tasks.push(n);
                idle -= 1;
                if idle == 0 {
                    return tasks;
                }
            }
        }
    }
    tasks
}

/// The collision work launched for one expansion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpansionBatch {
    /// One list per non-speculative worker.
    pub nonspec_tasks: Vec<Vec<Cell>>,
    /// One cell per speculative worker.
    pub spec_tasks: Vec<Cell>,
}

impl ExpansionBatch {
    pub fn is_empty(&self) -> bool {
        self.nonspec_tasks.is_empty() && self.spec_tasks.is_empty()
    }

    pub fn worker_count(&self) -> usize {
        self.nonspec_tasks.len() + self.spec_tasks.len()
    }

    pub fn nonspec_cells(&self) -> usize {
        self.nonspec_tasks.iter().map(Vec::len).sum()
    }

    /// Every targeted cell, non-speculative first.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.nonspec_tasks.iter().flatten().copied().chain(self.spec_tasks.iter().copied())
    }
}

/// Builds the batch for expanding `node`, given its already-computed unknown neighbors.
///
/// `claims` is reset and then holds every targeted cell.
#[allow(clippy::too_many_arguments)]
pub fn build_batch(
    cfg: &PlannerConfig,
    node: Cell,
    parent: Option<Cell>,
    unknown: &[Cell],
    store: &CollisionStatusStore,
    map: &GridMap,
    claims: &mut BatchClaims,
) -> ExpansionBatch {
    claims.next_batch();
    for &c in unknown {
        let fresh = claims.claim_cell(c);
        debug_assert!(fresh, "duplicate unknown neighbor {c}");
    }
    let threads = if cfg.mode == Mode::Single { 1 } else { cfg.max_threads };
    let nonspec_tasks = assign_workload(unknown, threads);
    let mut spec_tasks = Vec::new();
    if cfg.mode == Mode::Speculative && !unknown.is_empty() {
        let idle = threads - nonspec_tasks.len();
        if let Some(dir) = direction_of(node, parent).filter(|_| idle > 0) {
            spec_tasks = speculate(node, dir, idle, cfg.spec_depth, store, map, claims);
        }
    }
    ExpansionBatch { nonspec_tasks, spec_tasks }
}

/// Everything a worker needs to run checks for one planning run.
#[derive(Clone)]
pub struct BatchContext {
    pub store: Arc<CollisionStatusStore>,
    pub map: Arc<GridMap>,
    pub checker: CheckerConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BatchOutcome {
    pub nonspec_checks: u64,
    pub spec_checks: u64,
    pub workers_launched: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("worker {worker} failed: {source}")]
    Check { worker: usize, source: CollisionError },
    #[error("worker {worker} panicked: {message}")]
    Panic { worker: usize, message: String },
    #[error("batch needs {needed} workers but only {available} exist")]
    OverBudget { needed: usize, available: usize },
    #[error("worker pool shut down")]
    Disconnected,
}

/// Runs a batch to completion. Returning is the barrier: every task has finished.
pub trait BatchExecutor: Send {
    fn run_batch(&mut self, batch: &ExpansionBatch, ctx: &BatchContext) -> Result<BatchOutcome, EngineError>;

    fn worker_count(&self) -> usize;
}

fn check_cells(cells: &[Cell], prov: Provenance, ctx: &BatchContext) -> Result<u64, CollisionError> {
    for &c in cells {
        find_collision(&ctx.store, &ctx.map, c, prov, &ctx.checker)?;
    }
    Ok(cells.len() as u64)
}

/// Runs every task on the calling thread.
#[derive(Debug, Default)]
pub struct InlineExecutor;

impl BatchExecutor for InlineExecutor {
    fn run_batch(&mut self, batch: &ExpansionBatch, ctx: &BatchContext) -> Result<BatchOutcome, EngineError> {
        let mut out = BatchOutcome { workers_launched: usize::from(!batch.is_empty()), ..Default::default() };
        for (worker, task) in batch.nonspec_tasks.iter().enumerate() {
            out.nonspec_checks += check_cells(task, Provenance::NonSpeculative, ctx)
                .map_err(|source| EngineError::Check { worker, source })?;
        }
        for (i, &c) in batch.spec_tasks.iter().enumerate() {
            out.spec_checks += check_cells(&[c], Provenance::Speculative, ctx)
                .map_err(|source| EngineError::Check { worker: batch.nonspec_tasks.len() + i, source })?;
        }
        Ok(out)
    }

    fn worker_count(&self) -> usize {
        1
    }
}

struct Job {
    cells: Vec<Cell>,
    provenance: Provenance,
    ctx: BatchContext,
}

struct JobDone {
    worker: usize,
    provenance: Provenance,
    result: Result<u64, EngineError>,
}

/// A fixed set of worker threads reused across expansions and runs.
///
/// Task `i` of a batch always goes to worker `i`, so a batch of `k` tasks occupies exactly
/// `k` distinct threads.
pub struct WorkerPool {
    senders: Vec<Sender<Job>>,
    done: Receiver<JobDone>,
    handles: Vec<JoinHandle<()>>,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Self {
        assert!(workers >= 1);
        let (done_tx, done) = unbounded();
        let mut senders = Vec::with_capacity(workers);
        let mut handles = Vec::with_capacity(workers);
        for worker in 0..workers {
            let (tx, rx) = unbounded::<Job>();
            let done_tx = done_tx.clone();
            let handle = thread::Builder::new()
                .name(format!("collision-{worker}"))
                .spawn(move || {
                    for job in rx {
                        let result =
                            panic::catch_unwind(AssertUnwindSafe(|| check_cells(&job.cells, job.provenance, &job.ctx)));
                        let result = match result {
                            Ok(Ok(n)) => Ok(n),
                            Ok(Err(source)) => Err(EngineError::Check { worker, source }),
                            Err(p) => Err(EngineError::Panic { worker, message: panic_message(&p) }),
                        };
                        if done_tx.send(JobDone { worker, provenance: job.provenance, result }).is_err() {
                            break;
                        }
                    }
                })
                .expect("spawn collision worker");
            senders.push(tx);
            handles.push(handle);
        }
        WorkerPool { senders, done, handles }
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

impl BatchExecutor for WorkerPool {
    fn run_batch(&mut self, batch: &ExpansionBatch, ctx: &BatchContext) -> Result<BatchOutcome, EngineError> {
        let needed = batch.worker_count();
        if needed == 0 {
            return Ok(BatchOutcome::default());
        }
        if needed > self.senders.len() {
            return Err(EngineError::OverBudget { needed, available: self.senders.len() });
        }
        let jobs = batch
            .nonspec_tasks
            .iter()
            .map(|t| (t.clone(), Provenance::NonSpeculative))
            .chain(batch.spec_tasks.iter().map(|&c| (vec![c], Provenance::Speculative)));
        let mut sent = 0;
        for (tx, (cells, provenance)) in self.senders.iter().zip(jobs) {
            if tx.send(Job { cells, provenance, ctx: ctx.clone() }).is_err() {
                break;
            }
            sent += 1;
        }
        let mut out = BatchOutcome { workers_launched: sent, ..Default::default() };
        let mut first_err = (sent < needed).then_some(EngineError::Disconnected);
        for _ in 0..sent {
            let done = self.done.recv().map_err(|_| EngineError::Disconnected)?;
            match done.result {
                Ok(n) if done.provenance == Provenance::Speculative => out.spec_checks += n,
                Ok(n) => out.nonspec_checks += n,
                Err(e) => {
                    if first_err.as_ref().is_none_or(|prev| worker_of(prev) > done.worker) {
                        first_err = Some(e);
                    }
                }
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn worker_count(&self) -> usize {
        self.senders.len()
    }
}

fn worker_of(e: &EngineError) -> usize {
    match *e {
        EngineError::Check { worker, .. } | EngineError::Panic { worker, .. } => worker,
        _ => 0,
    }
}

impl Drop for WorkerPool {
    fn drop(&mut self) {
        self.senders.clear();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

/// The executor a mode runs on: inline for single-threaded, a pool of `M` workers otherwise.
pub fn executor_for(cfg: &PlannerConfig) -> Box<dyn BatchExecutor> {
    match cfg.mode {
        Mode::Single => Box::new(InlineExecutor),
        Mode::Parallel | Mode::Speculative => Box::new(WorkerPool::new(cfg.max_threads)),
    }
}
