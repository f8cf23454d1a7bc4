//! Run counters, virtual-time accounting, and the derived speculation metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{CollisionStatusStore, Provenance};
use crate::engine::Mode;
use crate::grid::{Cell, GridMap};

/// Deterministic cost model: every expansion costs `expansion_overhead`, and a batch of `k`
/// unknown neighbors split over `t` workers adds `check_cost · ⌈k/t⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualClockConfig {
    pub check_cost: u64,
    pub expansion_overhead: u64,
}

impl Default for VirtualClockConfig {
    fn default() -> Self {
        VirtualClockConfig { check_cost: 25, expansion_overhead: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{unknown} unknown neighbors but no non-speculative workers")]
pub struct NoWorkers {
    pub unknown: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub threads: usize,
    pub spec_depth: usize,
    pub epsilon: f64,
    pub expansions: u64,
    pub nonspec_checks: u64,
    pub spec_checks: u64,
    pub used_spec_checks: u64,
    pub virtual_time: u64,
    pub wall_time: f64,
    pub path_cost: Option<f64>,
}

impl RunReport {
    pub fn new(mode: Mode, threads: usize, spec_depth: usize, epsilon: f64) -> Self {
        RunReport {
            mode,
            threads,
            spec_depth,
            epsilon,
            expansions: 0,
            nonspec_checks: 0,
            spec_checks: 0,
            used_spec_checks: 0,
            virtual_time: 0,
            wall_time: 0.0,
            path_cost: None,
        }
    }

    /// Charges one expansion that found `unknown` unknown neighbors and split them over
    /// `workers` non-speculative workers. Speculative tasks cost nothing extra: each is a
    /// single check running beside a non-speculative worker that has at least one check.
    pub fn accrue_expansion_time(
        &mut self,
        unknown: usize,
        workers: usize,
        clock: &VirtualClockConfig,
    ) -> Result<u64, NoWorkers> {
        self.virtual_time += clock.expansion_overhead;
        if unknown > 0 {
            if workers == 0 {
                return Err(NoWorkers { unknown });
            }
            self.virtual_time += clock.check_cost * unknown.div_ceil(workers) as u64;
        }
        Ok(self.virtual_time)
    }

    /// Percentage of speculative checks the search later read; `None` without speculation.
    pub fn accuracy(&self) -> Option<f64> {
        (self.spec_checks > 0).then(|| 100.0 * self.used_spec_checks as f64 / self.spec_checks as f64)
    }

    /// Average `(non-speculative, speculative)` checks per expansion.
    pub fn division_of_labor(&self) -> Option<(f64, f64)> {
        (self.expansions > 0).then(|| {
            let e = self.expansions as f64;
            (self.nonspec_checks as f64 / e, self.spec_checks as f64 / e)
        })
    }
}

pub fn accuracy(report: &RunReport) -> Option<f64> {
    report.accuracy()
}

pub fn division_of_labor(report: &RunReport) -> Option<(f64, f64)> {
    report.division_of_labor()
}

/// Tracks which speculatively computed cells the search has read.
#[derive(Debug, Clone)]
pub struct UsageTracker {
    counted: Vec<bool>,
}

impl UsageTracker {
    pub fn new(map: &GridMap) -> Self {
        UsageTracker { counted: vec![false; map.cell_count()] }
    }

    /// Records that the search read `c`. Counts the cell once if its status came from a
    /// speculative check.
    pub fn mark_used(&mut self, store: &CollisionStatusStore, map: &GridMap, c: Cell, report: &mut RunReport) {
        if !map.in_bounds(c) {
            return;
        }
        let i = map.index(c);
        if !self.counted[i] && store.provenance(c) == Provenance::Speculative {
            self.counted[i] = true;
            report.used_spec_checks += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{find_collision, CheckerConfig};

    fn report() -> RunReport {
        RunReport::new(Mode::Speculative, 32, 4, 1.0)
    }

    #[test]
    fn expansion_time_formula() {
        let clock = VirtualClockConfig { check_cost: 25, expansion_overhead: 1 };
        let mut r = report();
        assert_eq!(r.accrue_expansion_time(5, 5, &clock), Ok(26));
        let mut r = report();
        assert_eq!(r.accrue_expansion_time(0, 0, &clock), Ok(1));
        let mut r = report();
        assert_eq!(r.accrue_expansion_time(5, 1, &clock), Ok(126));
        assert_eq!(r.accrue_expansion_time(8, 3, &clock), Ok(126 + 76));
        assert_eq!(r.accrue_expansion_time(3, 0, &clock), Err(NoWorkers { unknown: 3 }));
    }

    #[test]
    fn accuracy_and_labor() {
        let mut r = report();
        assert_eq!(r.accuracy(), None);
        assert_eq!(r.division_of_labor(), None);
        r.spec_checks = 10;
        r.used_spec_checks = 9;
        assert_eq!(r.accuracy(), Some(90.0));
        r.expansions = 100;
        r.nonspec_checks = 250;
        r.spec_checks = 350;
        assert_eq!(r.division_of_labor(), Some((2.5, 3.5)));
        let single = RunReport { expansions: 4, nonspec_checks: 12, ..RunReport::new(Mode::Single, 1, 4, 1.0) };
        assert_eq!(single.division_of_labor().unwrap().1, 0.0);
    }

    #[test]
    fn mark_used_is_idempotent_and_spec_only() {
        let map = GridMap::empty(4, 4);
        let store = CollisionStatusStore::new(&map);
        let cfg = CheckerConfig::default();
        let spec = Cell::new(1, 1);
        let nonspec = Cell::new(2, 2);
        find_collision(&store, &map, spec, Provenance::Speculative, &cfg).unwrap();
        find_collision(&store, &map, nonspec, Provenance::NonSpeculative, &cfg).unwrap();
        let mut tracker = UsageTracker::new(&map);
        let mut r = report();
        tracker.mark_used(&store, &map, spec, &mut r);
        tracker.mark_used(&store, &map, spec, &mut r);
        tracker.mark_used(&store, &map, nonspec, &mut r);
        tracker.mark_used(&store, &map, Cell::new(3, 3), &mut r);
        tracker.mark_used(&store, &map, Cell::new(9, 9), &mut r);
        assert_eq!(r.used_spec_checks, 1);
    }
}
