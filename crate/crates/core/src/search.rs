//! Weighted A* shared by all execution modes.
//!
//! The search loop is single-threaded. Per expansion it reads the node's neighbor statuses,
//! hands the unknown ones (plus any speculative targets) to a [`BatchExecutor`], waits for the
//! batch, and then relaxes the free neighbors exactly like textbook weighted A*. Nothing a
//! worker computes can reach the open list except through the status store, which is why
//! every mode expands the same nodes in the same order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{self, BufRead, Write};
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::collision::{
    find_collision, BatchClaims, CollisionError, CollisionStatus, CollisionStatusStore, Provenance,
};
use crate::engine::{
    build_batch, executor_for, get_unknown_neighbors, BatchContext, BatchExecutor, ConfigError, EngineError,
    ExpansionBatch, Mode, PlannerConfig, TieBreak,
};
use crate::grid::{euclidean_h, move_cost, Cell, GridMap};
use crate::metrics::{RunReport, UsageTracker, VirtualClockConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchNode {
    pub cell: Cell,
    pub g: f64,
    pub h: f64,
    pub parent: Option<Cell>,
    pub seq: u64,
}

struct Entry {
    f: f64,
    node: SearchNode,
    tie: TieBreak,
}

impl Entry {
    // Ordering::Less means "pops first".
    fn priority(&self, other: &Self) -> Ordering {
        let by_f = self.f.total_cmp(&other.f);
        match self.tie {
            TieBreak::Standard => {
                by_f.then_with(|| self.node.h.total_cmp(&other.node.h)).then_with(|| self.node.seq.cmp(&other.node.seq))
            }
            TieBreak::Inverted => {
                by_f.then_with(|| other.node.h.total_cmp(&self.node.h)).then_with(|| other.node.seq.cmp(&self.node.seq))
            }
        }
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.priority(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap.
        other.priority(self)
    }
}

/// Priority queue keyed by `(g + ε·h, h, insertion order)`. Stale duplicates of a cell are
/// allowed and skipped when popped.
pub struct OpenList {
    heap: BinaryHeap<Entry>,
    epsilon: f64,
    tie: TieBreak,
    next_seq: u64,
}

impl OpenList {
    pub fn new(epsilon: f64) -> Self {
        Self::with_tie_break(epsilon, TieBreak::Standard)
    }

    pub fn with_tie_break(epsilon: f64, tie: TieBreak) -> Self {
        OpenList { heap: BinaryHeap::new(), epsilon, tie, next_seq: 0 }
    }

    /// Pushes a node, stamping it with the next insertion sequence number.
    pub fn push(&mut self, cell: Cell, g: f64, h: f64, parent: Option<Cell>) -> SearchNode {
        let node = SearchNode { cell, g, h, parent, seq: self.next_seq };
        self.next_seq += 1;
        self.heap.push(Entry { f: g + self.epsilon * h, node, tie: self.tie });
        node
    }

    pub fn pop(&mut self) -> Option<SearchNode> {
        self.heap.pop().map(|e| e.node)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Best-known g values, parents and closed flags for every cell.
#[derive(Debug, Clone)]
pub struct SearchTables {
    width: u32,
    g: Vec<f64>,
    parent: Vec<Option<Cell>>,
    closed: Vec<bool>,
}

impl SearchTables {
    pub fn new(map: &GridMap) -> Self {
        let n = map.cell_count();
        SearchTables { width: map.width(), g: vec![f64::INFINITY; n], parent: vec![None; n], closed: vec![false; n] }
    }

    fn idx(&self, c: Cell) -> usize {
        c.y as usize * self.width as usize + c.x as usize
    }

    pub fn g(&self, c: Cell) -> f64 {
        self.g[self.idx(c)]
    }

    pub fn parent(&self, c: Cell) -> Option<Cell> {
        self.parent[self.idx(c)]
    }

    pub fn is_closed(&self, c: Cell) -> bool {
        self.closed[self.idx(c)]
    }

    pub fn set(&mut self, c: Cell, g: f64, parent: Option<Cell>) {
        let i = self.idx(c);
        self.g[i] = g;
        self.parent[i] = parent;
    }

    fn close(&mut self, c: Cell) {
        let i = self.idx(c);
        self.closed[i] = true;
    }
}

/// Pops the best entry whose cell is not closed yet and closes it. `None` once the open
/// list holds nothing but stale entries.
pub fn pop_expand(open: &mut OpenList, tables: &mut SearchTables) -> Option<SearchNode> {
    while let Some(node) = open.pop() {
        if !tables.is_closed(node.cell) {
            tables.close(node.cell);
            return Some(node);
        }
    }
    None
}

fn move_allowed(from: Cell, to: Cell, store: &CollisionStatusStore, corner_cutting: bool) -> bool {
    if corner_cutting || from.x == to.x || from.y == to.y {
        return true;
    }
    let side_a = Cell::new(to.x, from.y);
    let side_b = Cell::new(from.x, to.y);
    store.get_status(side_a) == CollisionStatus::Free && store.get_status(side_b) == CollisionStatus::Free
}

/// Relaxes every free, open neighbor of an expanded node. Returns the number of pushes.
///
/// All neighbors must already have a known status.
#[allow(clippy::too_many_arguments)]
pub fn relax_neighbors(
    node: &SearchNode,
    goal: Cell,
    store: &CollisionStatusStore,
    map: &GridMap,
    corner_cutting: bool,
    open: &mut OpenList,
    tables: &mut SearchTables,
) -> usize {
    let mut pushes = 0;
    for n in map.neighbors8(node.cell) {
        debug_assert_ne!(store.get_status(n), CollisionStatus::Unknown, "relaxing before join");
        if store.get_status(n) != CollisionStatus::Free || tables.is_closed(n) {
            continue;
        }
        if !move_allowed(node.cell, n, store, corner_cutting) {
            continue;
        }
        let step = move_cost(node.cell, n).expect("neighbors are adjacent");
        let g = node.g + step;
        if g < tables.g(n) {
            tables.set(n, g, Some(node.cell));
            open.push(n, g, euclidean_h(n, goal), Some(node.cell));
            pushes += 1;
        }
    }
    pushes
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parent links from {from} contain a cycle")]
pub struct ParentCycle {
    pub from: Cell,
}

/// Follows parent links back from `goal` and returns the path in start→goal order.
pub fn reconstruct_path(
    goal: Cell,
    parent_of: impl Fn(Cell) -> Option<Cell>,
    max_len: usize,
) -> Result<Vec<Cell>, ParentCycle> {
    let mut path = vec![goal];
    let mut cur = goal;
    while let Some(p) = parent_of(cur) {
        if path.len() > max_len {
            return Err(ParentCycle { from: goal });
        }
        path.push(p);
        cur = p;
    }
    path.reverse();
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Found { path: Vec<Cell>, cost: f64 },
    NoPath,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub outcome: Outcome,
    /// Expanded cells in expansion order, goal included when reached.
    pub expansion_trace: Vec<Cell>,
    pub report: RunReport,
    pub store: Arc<CollisionStatusStore>,
}

impl PlanResult {
    pub fn path(&self) -> Option<&[Cell]> {
        match &self.outcome {
            Outcome::Found { path, .. } => Some(path),
            Outcome::NoPath => None,
        }
    }

    pub fn cost(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Found { cost, .. } => Some(cost),
            Outcome::NoPath => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("{which} {cell} is outside the {width}x{height} map")]
    OutOfBounds { which: &'static str, cell: Cell, width: u32, height: u32 },
    #[error("start cell {0} is blocked")]
    StartBlocked(Cell),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error(transparent)]
    Cycle(#[from] ParentCycle),
}

/// What the search loop reports to an observer, once per expansion.
pub enum ExpansionEvent<'a> {
    /// The batch has been built but not launched.
    BatchBuilt {
        index: usize,
        node: &'a SearchNode,
        unknown: &'a [Cell],
        batch: &'a ExpansionBatch,
        store: &'a CollisionStatusStore,
    },
    /// All workers of the batch have finished.
    BatchJoined { index: usize, node: &'a SearchNode, store: &'a CollisionStatusStore },
}

/// Runs one search on the given executor.
pub fn plan_with(
    map: &Arc<GridMap>,
    start: Cell,
    goal: Cell,
    config: &PlannerConfig,
    executor: &mut dyn BatchExecutor,
    mut observer: Option<&mut dyn FnMut(ExpansionEvent<'_>)>,
) -> Result<PlanResult, PlanError> {
    let cfg = config.validated()?;
    for (which, cell) in [("start", start), ("goal", goal)] {
        if !map.in_bounds(cell) {
            return Err(PlanError::OutOfBounds { which, cell, width: map.width(), height: map.height() });
        }
    }
    if cfg.mode != Mode::Single && executor.worker_count() < cfg.max_threads {
        return Err(EngineError::OverBudget { needed: cfg.max_threads, available: executor.worker_count() }.into());
    }
    let clock = VirtualClockConfig { check_cost: cfg.checker.virtual_cost, expansion_overhead: cfg.expansion_overhead };
    let timer = Instant::now();

    let store = Arc::new(CollisionStatusStore::new(map));
    let ctx = BatchContext { store: Arc::clone(&store), map: Arc::clone(map), checker: cfg.checker };
    let mut report = RunReport::new(cfg.mode, cfg.max_threads, cfg.spec_depth, cfg.epsilon);
    let mut claims = BatchClaims::new(map);
    let mut usage = UsageTracker::new(map);
    let mut tables = SearchTables::new(map);
    let mut open = OpenList::with_tie_break(cfg.epsilon, cfg.tie_break);
    let mut trace = Vec::new();

    // The start cell is checked up front on the control thread.
    let start_status = find_collision(&store, map, start, Provenance::NonSpeculative, &cfg.checker)?;
    report.nonspec_checks += 1;
    report.virtual_time += clock.check_cost;
    if start_status == CollisionStatus::Collision {
        return Err(PlanError::StartBlocked(start));
    }
    tables.set(start, 0.0, None);
    open.push(start, 0.0, euclidean_h(start, goal), None);

    let outcome = loop {
        let Some(node) = pop_expand(&mut open, &mut tables) else {
            break Outcome::NoPath;
        };
        let index = trace.len();
        trace.push(node.cell);
        report.expansions += 1;

        if node.cell == goal {
            report.accrue_expansion_time(0, 0, &clock).expect("no work");
            let path = reconstruct_path(goal, |c| tables.parent(c), map.cell_count())?;
            break Outcome::Found { path, cost: node.g };
        }

        for n in map.neighbors8(node.cell) {
            usage.mark_used(&store, map, n, &mut report);
        }
        let unknown = get_unknown_neighbors(node.cell, &store, map);
        let batch = build_batch(&cfg, node.cell, node.parent, &unknown, &store, map, &mut claims);
        if let Some(obs) = observer.as_deref_mut() {
            obs(ExpansionEvent::BatchBuilt { index, node: &node, unknown: &unknown, batch: &batch, store: &store });
        }
        report
            .accrue_expansion_time(unknown.len(), batch.nonspec_tasks.len(), &clock)
            .expect("unknown neighbors always get a worker");

        if !batch.is_empty() {
            let done = executor.run_batch(&batch, &ctx)?;
            report.nonspec_checks += done.nonspec_checks;
            report.spec_checks += done.spec_checks;
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs(ExpansionEvent::BatchJoined { index, node: &node, store: &store });
        }

        relax_neighbors(&node, goal, &store, map, cfg.corner_cutting, &mut open, &mut tables);
    };

    report.path_cost = match &outcome {
        Outcome::Found { cost, .. } => Some(*cost),
        Outcome::NoPath => None,
    };
    report.wall_time = timer.elapsed().as_secs_f64();
    Ok(PlanResult { outcome, expansion_trace: trace, report, store })
}

/// A configured planner that owns its executor, so a worker pool is reused across runs.
pub struct Planner {
    config: PlannerConfig,
    executor: Box<dyn BatchExecutor>,
}

impl Planner {
    pub fn new(config: PlannerConfig) -> Result<Self, ConfigError> {
        let config = config.validated()?;
        let executor = executor_for(&config);
        Ok(Planner { config, executor })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    /// Replaces the configuration, keeping the worker pool when the mode and thread count
    /// allow it.
    pub fn reconfigure(&mut self, config: PlannerConfig) -> Result<(), ConfigError> {
        let config = config.validated()?;
        let reuse = match (self.config.mode, config.mode) {
            (Mode::Single, Mode::Single) => true,
            (Mode::Single, _) | (_, Mode::Single) => false,
            _ => self.executor.worker_count() == config.max_threads,
        };
        if !reuse {
            self.executor = executor_for(&config);
        }
        self.config = config;
        Ok(())
    }

    pub fn plan(&mut self, map: &Arc<GridMap>, start: Cell, goal: Cell) -> Result<PlanResult, PlanError> {
        plan_with(map, start, goal, &self.config, self.executor.as_mut(), None)
    }

    pub fn plan_observed(
        &mut self,
        map: &Arc<GridMap>,
        start: Cell,
        goal: Cell,
        observer: &mut dyn FnMut(ExpansionEvent<'_>),
    ) -> Result<PlanResult, PlanError> {
        plan_with(map, start, goal, &self.config, self.executor.as_mut(), Some(observer))
    }
}

/// One-shot search with a fresh executor.
pub fn plan(map: &GridMap, start: Cell, goal: Cell, config: &PlannerConfig) -> Result<PlanResult, PlanError> {
    let map = Arc::new(map.clone());
    Planner::new(config.clone())?.plan(&map, start, goal)
}

/// Writes an expansion trace as newline-delimited `x,y` records.
pub fn write_trace<W: Write>(trace: &[Cell], mut out: W) -> io::Result<()> {
    for c in trace {
        writeln!(out, "{},{}", c.x, c.y)?;
    }
    out.flush()
}

pub fn read_trace<R: BufRead>(input: R) -> io::Result<Vec<Cell>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| l?.trim().parse::<Cell>().map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
        .collect()
}

/// Index of the first position where two traces differ, or `None` if identical.
pub fn first_divergence(a: &[Cell], b: &[Cell]) -> Option<usize> {
    a.iter().zip(b).position(|(x, y)| x != y).or_else(|| (a.len() != b.len()).then(|| a.len().min(b.len())))
}
