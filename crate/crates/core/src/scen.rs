//! movingai `.scen` scenario files.
//!
//! An optional `version N` first line, then one problem per line:
//! `bucket map width height startX startY goalX goalY optimalLength`, whitespace separated.

use thiserror::Error;

use crate::grid::{Cell, GridMap};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioLine {
    pub bucket: u32,
    pub map: String,
    pub map_width: u32,
    pub map_height: u32,
    pub start: Cell,
    pub goal: Cell,
    pub optimal_length: f64,
}

impl ScenarioLine {
    /// True if the recorded map size matches and both endpoints are inside it.
    pub fn fits(&self, map: &GridMap) -> bool {
        self.map_width == map.width()
            && self.map_height == map.height()
            && map.in_bounds(self.start)
            && map.in_bounds(self.goal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScenParseError {
    pub line: usize,
    pub message: String,
}

pub fn parse_scen(text: &str) -> Result<Vec<ScenarioLine>, ScenParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if i == 0 && l.starts_with("version") {
            let v = l["version".len()..].trim();
            if v.parse::<f64>().is_err() {
                return Err(ScenParseError { line, message: format!("bad version {v:?}") });
            }
            continue;
        }
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 9 {
            return Err(ScenParseError { line, message: format!("expected 9 fields, found {}", fields.len()) });
        }
        let int = |idx: usize, name: &str| -> Result<u32, ScenParseError> {
            fields[idx]
                .parse()
                .map_err(|_| ScenParseError { line, message: format!("invalid {name} {:?}", fields[idx]) })
        };
        let optimal_length: f64 = fields[8]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| ScenParseError { line, message: format!("invalid optimal length {:?}", fields[8]) })?;
        let s = ScenarioLine {
            bucket: int(0, "bucket")?,
            map: fields[1].to_string(),
            map_width: int(2, "width")?,
            map_height: int(3, "height")?,
            start: Cell::new(int(4, "start x")?, int(5, "start y")?),
            goal: Cell::new(int(6, "goal x")?, int(7, "goal y")?),
            optimal_length,
        };
        for (what, c) in [("start", s.start), ("goal", s.goal)] {
            if c.x >= s.map_width || c.y >= s.map_height {
                return Err(ScenParseError {
                    line,
                    message: format!("{what} {c} outside {}x{} map", s.map_width, s.map_height),
                });
            }
        }
        out.push(s);
    }
    Ok(out)
}
