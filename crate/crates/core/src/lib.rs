//! Weighted A* on 8-connected grids with three ways of running collision checks:
//! single-threaded, parallel over the immediate neighbors of each expanded node, and
//! speculative, where idle workers pre-check cells ahead of the search along its current
//! heading. All three expand exactly the same nodes in the same order.

pub mod assets;
pub mod bench;
pub mod collision;
pub mod engine;
pub mod grid;
pub mod metrics;
pub mod oracle;
pub mod scen;
pub mod search;
pub mod verify;

pub use collision::{CheckerConfig, CollisionStatus, CollisionStatusStore, Provenance};
pub use engine::{Mode, PlannerConfig};
pub use grid::{parse_map, Cell, GridMap, MapParseError};
pub use metrics::{RunReport, VirtualClockConfig};
pub use search::{plan, Outcome, PlanError, PlanResult, Planner};
