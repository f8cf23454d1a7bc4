//! Occupancy grids, the movingai `.map` format, and 8-connected geometry.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A grid position. `x` is the column, `y` the row (row 0 is the first map row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Cell { x, y }
    }

    /// Offsets this cell by `(dx, dy)`, returning `None` if either coordinate would go negative.
    pub fn offset(self, dx: i64, dy: i64) -> Option<Cell> {
        let x = i64::from(self.x) + dx;
        let y = i64::from(self.y) + dy;
        if x < 0 || y < 0 || x > i64::from(u32::MAX) || y > i64::from(u32::MAX) {
            return None;
        }
        Some(Cell::new(x as u32, y as u32))
    }

    /// True if `other` is one of the 8 cells surrounding `self`.
    pub fn is_adjacent(self, other: Cell) -> bool {
        let dx = self.x.abs_diff(other.x);
        let dy = self.y.abs_diff(other.y);
        dx <= 1 && dy <= 1 && (dx, dy) != (0, 0)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expected coordinates as `X,Y`, got {0:?}")]
pub struct CellParseError(pub String);

impl FromStr for Cell {
    type Err = CellParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || CellParseError(s.to_string());
        let (x, y) = s.split_once(',').ok_or_else(err)?;
        let x = x.trim().parse().map_err(|_| err())?;
        let y = y.trim().parse().map_err(|_| err())?;
        Ok(Cell::new(x, y))
    }
}

/// One of the eight unit moves on an 8-connected grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub dx: i8,
    pub dy: i8,
    pub cost: f64,
}

/// All eight motions in canonical order: `dx` outer, `dy` inner, both ascending over `{-1, 0, 1}`.
pub const MOTIONS: [Motion; 8] = [
    Motion { dx: -1, dy: -1, cost: std::f64::consts::SQRT_2 },
    Motion { dx: -1, dy: 0, cost: 1.0 },
    Motion { dx: -1, dy: 1, cost: std::f64::consts::SQRT_2 },
    Motion { dx: 0, dy: -1, cost: 1.0 },
    Motion { dx: 0, dy: 1, cost: 1.0 },
    Motion { dx: 1, dy: -1, cost: std::f64::consts::SQRT_2 },
    Motion { dx: 1, dy: 0, cost: 1.0 },
    Motion { dx: 1, dy: 1, cost: std::f64::consts::SQRT_2 },
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapParseError {
    #[error("line {line}: {message}")]
    Header { line: usize, message: String },
    #[error("line {line}: expected {expected} map rows, found {found}")]
    RowCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: row has {found} cells, expected {expected}")]
    RowLength { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: unknown map character {ch:?}")]
    UnknownChar { line: usize, column: usize, ch: char },
}

impl MapParseError {
    /// 1-based line number of the offending input line.
    pub fn line(&self) -> usize {
        match *self {
            MapParseError::Header { line, .. }
            | MapParseError::RowCount { line, .. }
            | MapParseError::RowLength { line, .. }
            | MapParseError::UnknownChar { line, .. } => line,
        }
    }
}

/// Immutable occupancy ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: u32,
    height: u32,
    blocked: Vec<bool>,
}

impl GridMap {
    /// Builds a map from a row-major `blocked` vector.
    ///
    /// Panics if either dimension is zero or the vector has the wrong length.
    pub fn from_blocked(width: u32, height: u32, blocked: Vec<bool>) -> Self {
        assert!(width >= 1 && height >= 1, "map dimensions must be positive");
        assert_eq!(blocked.len(), width as usize * height as usize);
        GridMap { width, height, blocked }
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::from_blocked(width, height, vec![false; width as usize * height as usize])
    }

    /// Builds a map from rows of `.`/`@` style characters (any movingai cell character works).
    pub fn from_rows(rows: &[&str]) -> Result<Self, MapParseError> {
        let mut text = format!(
            "type octile\nheight {}\nwidth {}\nmap\n",
            rows.len(),
            rows.first().map_or(0, |r| r.chars().count())
        );
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        parse_map(&text)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        self.blocked.len()
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// Row-major index of an in-bounds cell.
    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.in_bounds(c));
        c.y as usize * self.width as usize + c.x as usize
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        let w = self.width as usize;
        Cell::new((index % w) as u32, (index / w) as u32)
    }

    /// Ground truth. Out-of-bounds cells count as blocked.
    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.blocked[self.index(c)]
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    /// Serializes back to movingai text, normalizing passable cells to `.` and blocked to `@`.
    pub fn to_movingai(&self) -> String {
        let mut out = String::with_capacity(self.blocked.len() + self.height as usize + 48);
        out.push_str(&format!("type octile\nheight {}\nwidth {}\nmap\n", self.height, self.width));
        for row in self.blocked.chunks(self.width as usize) {
            out.extend(row.iter().map(|&b| if b { '@' } else { '.' }));
            out.push('\n');
        }
        out
    }

    /// In-bounds neighbors of `c` in canonical order.
    pub fn neighbors8(&self, c: Cell) -> Neighbors<'_> {
        Neighbors { map: self, center: c, next: 0 }
    }
}

/// Iterator returned by [`GridMap::neighbors8`].
pub struct Neighbors<'a> {
    map: &'a GridMap,
    center: Cell,
    next: usize,
}

impl Iterator for Neighbors<'_> {
    type Item = Cell;

    fn next(&mut self) -> Option<Cell> {
        while self.next < MOTIONS.len() {
            let m = MOTIONS[self.next];
            self.next += 1;
            if let Some(n) = self.center.offset(m.dx.into(), m.dy.into()) {
                if self.map.in_bounds(n) {
                    return Some(n);
                }
            }
        }
        None
    }
}

/// Convenience wrapper collecting [`GridMap::neighbors8`].
pub fn neighbors8(map: &GridMap, c: Cell) -> Vec<Cell> {
    map.neighbors8(c).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cells {0} and {1} are not 8-adjacent")]
pub struct NotAdjacent(pub Cell, pub Cell);

/// Octile step cost: 1 for cardinal moves, √2 for diagonal moves.
pub fn move_cost(a: Cell, b: Cell) -> Result<f64, NotAdjacent> {
    if !a.is_adjacent(b) {
        return Err(NotAdjacent(a, b));
    }
    if a.x != b.x && a.y != b.y {
        Ok(std::f64::consts::SQRT_2)
    } else {
        Ok(1.0)
    }
}

pub fn euclidean_h(c: Cell, goal: Cell) -> f64 {
    let dx = f64::from(c.x) - f64::from(goal.x);
    let dy = f64::from(c.y) - f64::from(goal.y);
    (dx * dx + dy * dy).sqrt()
}

fn is_blocked_char(ch: char) -> Option<bool> {
    match ch {
        '.' | 'G' => Some(false),
        '@' | 'O' | 'T' => Some(true),
        _ => None,
    }
}

// Header values are capped so a hostile header cannot request a huge allocation
// before the row checks run.
const MAX_DIMENSION: usize = 1 << 16;

/// Parses movingai `.map` text.
///
/// The header is `type <name>`, `height H`, `width W`, `map`, followed by exactly `H` rows of
/// `W` characters. `.` and `G` are passable; `@`, `O` and `T` are blocked. Trailing blank lines
/// and `\r` line endings are tolerated.
pub fn parse_map(text: &str) -> Result<GridMap, MapParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));

    let mut next_header = |expect: &str| -> Result<(usize, String), MapParseError> {
        match lines.next() {
            Some((n, l)) => {
                let mut parts = l.split_whitespace();
                match parts.next() {
                    Some(k) if k == expect => {
                        let rest: Vec<&str> = parts.collect();
                        Ok((n, rest.join(" ")))
                    }
                    _ => Err(MapParseError::Header { line: n, message: format!("expected `{expect}`, got {l:?}") }),
                }
            }
            None => Err(MapParseError::Header {
                line: text.lines().count() + 1,
                message: format!("unexpected end of input, expected `{expect}`"),
            }),
        }
    };

    let (line, kind) = next_header("type")?;
    if kind.is_empty() {
        return Err(MapParseError::Header { line, message: "missing map type".into() });
    }
    let dim = |(line, v): (usize, String), name: &str| -> Result<usize, MapParseError> {
        match v.parse::<usize>() {
            Ok(n) if (1..=MAX_DIMENSION).contains(&n) => Ok(n),
            _ => Err(MapParseError::Header { line, message: format!("invalid {name} {v:?}") }),
        }
    };
    let height = dim(next_header("height")?, "height")?;
    let width = dim(next_header("width")?, "width")?;
    let (line, rest) = next_header("map")?;
    if !rest.is_empty() {
        return Err(MapParseError::Header { line, message: "unexpected text after `map`".into() });
    }

    let mut blocked = Vec::with_capacity(width.saturating_mul(height).min(1 << 20));
    let mut rows = 0usize;
    // Truncated input is reported at the last line that was read successfully.
    let mut last_line = line;
    let mut trailing_blank = false;
    for (n, l) in lines {
        if l.is_empty() {
            trailing_blank = true;
            continue;
        }
        if trailing_blank || rows == height {
            return Err(MapParseError::RowCount { line: n, expected: height, found: rows + 1 });
        }
        let mut count = 0usize;
        for (col, ch) in l.chars().enumerate() {
            let b = is_blocked_char(ch).ok_or(MapParseError::UnknownChar { line: n, column: col + 1, ch })?;
            count += 1;
            if count <= width {
                blocked.push(b);
            }
        }
        if count != width {
            return Err(MapParseError::RowLength { line: n, expected: width, found: count });
        }
        rows += 1;
        last_line = n;
    }
    if rows != height {
        return Err(MapParseError::RowCount { line: last_line, expected: height, found: rows });
    }
    Ok(GridMap::from_blocked(width as u32, height as u32, blocked))
}
