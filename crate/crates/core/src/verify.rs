//! Cross-mode order and optimality checks.

use std::sync::Arc;

use crate::engine::{Mode, PlannerConfig, TieBreak};
use crate::grid::{Cell, GridMap};
use crate::oracle::shortest_cost;
use crate::search::{first_divergence, PlanError, Planner};

/// Absolute tolerance when comparing an ε=1 cost to the oracle.
pub const COST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct VerifySettings {
    pub epsilon: f64,
    pub corner_cutting: bool,
    pub parallel_threads: Vec<usize>,
    pub speculative_threads: Vec<usize>,
    pub spec_depths: Vec<usize>,
    /// Runs every non-reference mode with an inverted tie-break, which should make the
    /// order check fail.
    pub corrupt_tie_break: bool,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            epsilon: 1.0,
            corner_cutting: true,
            parallel_threads: vec![2, 8, 32],
            speculative_threads: vec![8, 16, 32],
            spec_depths: vec![1, 2, 4, 8],
            corrupt_tie_break: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRecord {
    pub mode: Mode,
    pub threads: usize,
    pub spec_depth: Option<usize>,
    pub expansions: usize,
    pub cost: Option<f64>,
    pub oracle_cost: Option<f64>,
    /// First index where this run's trace differs from the single-threaded one.
    pub divergence: Option<usize>,
    pub cost_ok: bool,
}

impl VerifyRecord {
    pub fn passed(&self) -> bool {
        self.divergence.is_none() && self.cost_ok
    }
}

fn cost_ok(cost: Option<f64>, oracle: Option<f64>, epsilon: f64) -> bool {
    match (cost, oracle) {
        (None, None) => true,
        (Some(c), Some(o)) if epsilon == 1.0 => (c - o).abs() <= COST_TOLERANCE,
        (Some(c), Some(o)) => c <= epsilon * o + COST_TOLERANCE && c + COST_TOLERANCE >= o,
        _ => false,
    }
}

/// Runs single, parallel and speculative searches on one problem and compares them to the
/// single-threaded expansion order and to a Dijkstra reference cost.
pub fn verify_problem(
    map: &Arc<GridMap>,
    start: Cell,
    goal: Cell,
    settings: &VerifySettings,
) -> Result<Vec<VerifyRecord>, PlanError> {
    let base = PlannerConfig {
        epsilon: settings.epsilon,
        corner_cutting: settings.corner_cutting,
        ..PlannerConfig::default()
    };
    let mut configs = vec![PlannerConfig { mode: Mode::Single, ..base.clone() }];
    let tie_break = if settings.corrupt_tie_break { TieBreak::Inverted } else { TieBreak::Standard };
    for &m in &settings.parallel_threads {
        configs.push(PlannerConfig { mode: Mode::Parallel, max_threads: m, tie_break, ..base.clone() });
    }
    for &m in &settings.speculative_threads {
        for &s in &settings.spec_depths {
            configs.push(PlannerConfig {
                mode: Mode::Speculative,
                max_threads: m,
                spec_depth: s,
                tie_break,
                ..base.clone()
            });
        }
    }

    let oracle = if map.is_blocked(start) { None } else { shortest_cost(map, start, goal, settings.corner_cutting) };
    let mut reference: Option<Vec<Cell>> = None;
    let mut records = Vec::with_capacity(configs.len());
    let mut planner: Option<Planner> = None;
    for cfg in configs {
        match planner.as_mut() {
            Some(p) => p.reconfigure(cfg.clone())?,
            None => planner = Some(Planner::new(cfg.clone())?),
        }
        let result = planner.as_mut().expect("set above").plan(map, start, goal)?;
        let divergence = match &reference {
            None => {
                reference = Some(result.expansion_trace.clone());
                None
            }
            Some(r) => first_divergence(r, &result.expansion_trace),
        };
        records.push(VerifyRecord {
            mode: cfg.mode,
            threads: cfg.max_threads,
            spec_depth: (cfg.mode == Mode::Speculative).then_some(cfg.spec_depth),
            expansions: result.expansion_trace.len(),
            cost: result.cost(),
            oracle_cost: oracle,
            divergence,
            cost_ok: cost_ok(result.cost(), oracle, settings.epsilon),
        });
    }
    Ok(records)
}
