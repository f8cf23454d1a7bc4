//! Maps shipped with the crate, each with a default scenario.

use crate::grid::{parse_map, Cell, GridMap};

pub struct BundledMap {
    pub name: &'static str,
    pub text: &'static str,
    pub start: Cell,
    pub goal: Cell,
}

impl BundledMap {
    pub fn map(&self) -> GridMap {
        parse_map(self.text).expect("bundled maps parse")
    }
}

pub const OPEN_FIELD: BundledMap = BundledMap {
    name: "open_field",
    text: include_str!("../assets/open_field.map"),
    start: Cell::new(0, 0),
    goal: Cell::new(31, 31),
};

pub const CORRIDOR: BundledMap = BundledMap {
    name: "corridor",
    text: include_str!("../assets/corridor.map"),
    start: Cell::new(0, 0),
    goal: Cell::new(0, 16),
};

pub const SPIRAL: BundledMap = BundledMap {
    name: "spiral",
    text: include_str!("../assets/spiral.map"),
    start: Cell::new(0, 0),
    goal: Cell::new(15, 15),
};

pub const RANDOM30: BundledMap = BundledMap {
    name: "random30",
    text: include_str!("../assets/random30.map"),
    start: Cell::new(0, 0),
    goal: Cell::new(31, 31),
};

/// Small map in the style of the movingai benchmark sets.
pub const LAK_SAMPLE: BundledMap = BundledMap {
    name: "lak_sample",
    text: include_str!("../assets/lak_sample.map"),
    start: Cell::new(5, 2),
    goal: Cell::new(12, 5),
};

/// The four benchmark maps.
pub fn benchmark_maps() -> [&'static BundledMap; 4] {
    [&OPEN_FIELD, &CORRIDOR, &SPIRAL, &RANDOM30]
}

pub fn by_name(name: &str) -> Option<&'static BundledMap> {
    [&OPEN_FIELD, &CORRIDOR, &SPIRAL, &RANDOM30, &LAK_SAMPLE].into_iter().find(|m| m.name == name)
}
