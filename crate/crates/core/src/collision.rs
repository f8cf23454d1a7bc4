//! Shared collision status store and the simulated collision checker.
//!
//! Each cell's status lives in one atomic byte holding both the status and the provenance of
//! the check that produced it, so a single compare-exchange from `UNKNOWN` both enforces the
//! write-once rule and publishes provenance together with the status.

use std::hint::black_box;
use std::sync::atomic::{AtomicU32, AtomicU64, AtomicU8, Ordering};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Cell, GridMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollisionStatus {
    Unknown,
    Free,
    Collision,
}

/// Who computed a cell's status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    None,
    NonSpeculative,
    Speculative,
}

const STATUS_MASK: u8 = 0b0011;
const FREE: u8 = 0b0001;
const COLLISION: u8 = 0b0010;
const PROV_SHIFT: u8 = 2;

fn encode(status: CollisionStatus, prov: Provenance) -> u8 {
    let s = match status {
        CollisionStatus::Unknown => 0,
        CollisionStatus::Free => FREE,
        CollisionStatus::Collision => COLLISION,
    };
    let p = match prov {
        Provenance::None => 0,
        Provenance::NonSpeculative => 1,
        Provenance::Speculative => 2,
    };
    s | (p << PROV_SHIFT)
}

fn decode_status(v: u8) -> CollisionStatus {
    match v & STATUS_MASK {
        FREE => CollisionStatus::Free,
        COLLISION => CollisionStatus::Collision,
        _ => CollisionStatus::Unknown,
    }
}

fn decode_provenance(v: u8) -> Provenance {
    match v >> PROV_SHIFT {
        1 => Provenance::NonSpeculative,
        2 => Provenance::Speculative,
        _ => Provenance::None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CollisionError {
    #[error("duplicate collision check of cell {0}: status already computed")]
    DuplicateCheck(Cell),
    #[error("collision check requested for out-of-bounds cell {0}")]
    OutOfBounds(Cell),
}

/// Per-cell tri-state collision knowledge for one planning run.
#[derive(Debug)]
pub struct CollisionStatusStore {
    width: u32,
    height: u32,
    cells: Vec<AtomicU8>,
    seq: Vec<AtomicU64>,
    checks: Vec<AtomicU32>,
    next_seq: AtomicU64,
}

impl CollisionStatusStore {
    pub fn new(map: &GridMap) -> Self {
        let n = map.cell_count();
        CollisionStatusStore {
            width: map.width(),
            height: map.height(),
            cells: (0..n).map(|_| AtomicU8::new(0)).collect(),
            seq: (0..n).map(|_| AtomicU64::new(0)).collect(),
            checks: (0..n).map(|_| AtomicU32::new(0)).collect(),
            next_seq: AtomicU64::new(1),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn index(&self, c: Cell) -> Option<usize> {
        (c.x < self.width && c.y < self.height).then(|| c.y as usize * self.width as usize + c.x as usize)
    }

    /// Current status. Out-of-bounds cells read as `Collision`.
    pub fn get_status(&self, c: Cell) -> CollisionStatus {
        match self.index(c) {
            Some(i) => decode_status(self.cells[i].load(Ordering::Acquire)),
            None => CollisionStatus::Collision,
        }
    }

    pub fn is_unknown(&self, c: Cell) -> bool {
        self.get_status(c) == CollisionStatus::Unknown
    }

    pub fn provenance(&self, c: Cell) -> Provenance {
        self.index(c).map_or(Provenance::None, |i| decode_provenance(self.cells[i].load(Ordering::Acquire)))
    }

    /// Global order in which the cell's status was written; 0 while unknown.
    pub fn sequence(&self, c: Cell) -> u64 {
        self.index(c).map_or(0, |i| self.seq[i].load(Ordering::Acquire))
    }

    /// Number of times a checker ran against the cell, including rejected duplicates.
    pub fn check_count(&self, c: Cell) -> u32 {
        self.index(c).map_or(0, |i| self.checks[i].load(Ordering::Acquire))
    }

    pub fn max_check_count(&self) -> u32 {
        self.checks.iter().map(|c| c.load(Ordering::Acquire)).max().unwrap_or(0)
    }

    /// Number of cells whose status is no longer `Unknown`.
    pub fn known_count(&self) -> usize {
        self.cells.iter().filter(|v| v.load(Ordering::Acquire) & STATUS_MASK != 0).count()
    }

    /// Counts of known cells by provenance: `(non-speculative, speculative)`.
    pub fn provenance_counts(&self) -> (usize, usize) {
        self.cells.iter().fold((0, 0), |(n, s), v| match decode_provenance(v.load(Ordering::Acquire)) {
            Provenance::NonSpeculative => (n + 1, s),
            Provenance::Speculative => (n, s + 1),
            Provenance::None => (n, s),
        })
    }

    fn write(&self, c: Cell, status: CollisionStatus, prov: Provenance) -> Result<(), CollisionError> {
        let i = self.index(c).ok_or(CollisionError::OutOfBounds(c))?;
        self.checks[i].fetch_add(1, Ordering::AcqRel);
        self.cells[i]
            .compare_exchange(0, encode(status, prov), Ordering::AcqRel, Ordering::Acquire)
            .map_err(|_| CollisionError::DuplicateCheck(c))?;
        self.seq[i].store(self.next_seq.fetch_add(1, Ordering::AcqRel), Ordering::Release);
        Ok(())
    }
}

/// Simulated collision-check cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckerConfig {
    /// Busy-work iterations per check; 0 makes checks instant.
    pub busy_iterations: u64,
    /// Abstract cost of one check in virtual time units.
    pub virtual_cost: u64,
}

impl CheckerConfig {
    pub const fn instant(virtual_cost: u64) -> Self {
        CheckerConfig { busy_iterations: 0, virtual_cost }
    }

    /// A checker whose busy loop takes roughly `latency` of wall time on this machine.
    pub fn with_latency(latency: Duration, virtual_cost: u64) -> Self {
        let per_ms = calibrated_iterations_per_ms();
        let iters = (latency.as_secs_f64() * 1e3 * per_ms as f64).round() as u64;
        CheckerConfig { busy_iterations: iters, virtual_cost }
    }
}

impl Default for CheckerConfig {
    fn default() -> Self {
        CheckerConfig::instant(25)
    }
}

/// Decrements a counter `iterations` times.
pub fn busy_work(iterations: u64) {
    let mut counter = black_box(iterations);
    while counter > 0 {
        counter = black_box(counter - 1);
    }
}

/// Busy-work iterations per millisecond, measured once per process.
pub fn calibrated_iterations_per_ms() -> u64 {
    static CAL: OnceLock<u64> = OnceLock::new();
    *CAL.get_or_init(|| {
        let mut iters = 1u64 << 16;
        loop {
            let t = Instant::now();
            busy_work(iters);
            let el = t.elapsed();
            if el >= Duration::from_millis(20) || iters >= 1 << 40 {
                return ((iters as f64) / (el.as_secs_f64() * 1e3)).max(1.0) as u64;
            }
            iters *= 2;
        }
    })
}

/// Runs the simulated checker against `c` and records the ground-truth result.
///
/// The caller must hold the batch claim for `c`. A second check of the same cell within a run
/// is an error.
pub fn find_collision(
    store: &CollisionStatusStore,
    map: &GridMap,
    c: Cell,
    provenance: Provenance,
    cfg: &CheckerConfig,
) -> Result<CollisionStatus, CollisionError> {
    if !map.in_bounds(c) {
        return Err(CollisionError::OutOfBounds(c));
    }
    busy_work(cfg.busy_iterations);
    let status = if map.is_blocked(c) { CollisionStatus::Collision } else { CollisionStatus::Free };
    store.write(c, status, provenance)?;
    Ok(status)
}

pub fn get_status(store: &CollisionStatusStore, c: Cell) -> CollisionStatus {
    store.get_status(c)
}

/// Per-expansion claim set. Claims reset by bumping an epoch, so no clearing is needed
/// between batches.
#[derive(Debug, Clone)]
pub struct BatchClaims {
    width: u32,
    height: u32,
    stamp: Vec<u32>,
    epoch: u32,
}

impl BatchClaims {
    pub fn new(map: &GridMap) -> Self {
        BatchClaims { width: map.width(), height: map.height(), stamp: vec![0; map.cell_count()], epoch: 1 }
    }

    /// Starts a new batch; all previous claims lapse.
    pub fn next_batch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// True the first time `c` is claimed in the current batch. Out-of-bounds cells are never
    /// claimable.
    pub fn claim_cell(&mut self, c: Cell) -> bool {
        if c.x >= self.width || c.y >= self.height {
            return false;
        }
        let i = c.y as usize * self.width as usize + c.x as usize;
        if self.stamp[i] == self.epoch {
            false
        } else {
            self.stamp[i] = self.epoch;
            true
        }
    }

    pub fn is_claimed(&self, c: Cell) -> bool {
        c.x < self.width
            && c.y < self.height
            && self.stamp[c.y as usize * self.width as usize + c.x as usize] == self.epoch
    }
}
