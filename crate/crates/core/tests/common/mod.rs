//! Independent reference implementations for the integration tests.
//!
//! Nothing here calls into the planner, engine, store or oracle modules: only the map type
//! (for ground truth) is shared. Data structures are deliberately naive.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::f64::consts::SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specplan_core::{Cell, GridMap};

pub fn offsets() -> Vec<(i64, i64)> {
    let mut v = Vec::new();
    for dx in -1..=1 {
        for dy in -1..=1 {
            if (dx, dy) != (0, 0) {
                v.push((dx, dy));
            }
        }
    }
    v
}

pub fn shift(map: &GridMap, c: Cell, dx: i64, dy: i64) -> Option<Cell> {
    let x = c.x as i64 + dx;
    let y = c.y as i64 + dy;
    (x >= 0 && y >= 0 && x < map.width() as i64 && y < map.height() as i64).then(|| Cell::new(x as u32, y as u32))
}

pub fn nbrs(map: &GridMap, c: Cell) -> Vec<Cell> {
    offsets().into_iter().filter_map(|(dx, dy)| shift(map, c, dx, dy)).collect()
}

fn free(map: &GridMap, c: Cell) -> bool {
    !map.is_blocked(c)
}

pub fn step_ok(map: &GridMap, a: Cell, b: Cell, corner_cutting: bool) -> bool {
    if !free(map, b) {
        return false;
    }
    corner_cutting || a.x == b.x || a.y == b.y || (free(map, Cell::new(b.x, a.y)) && free(map, Cell::new(a.x, b.y)))
}

fn step_cost(a: Cell, b: Cell) -> f64 {
    if a.x != b.x && a.y != b.y {
        SQRT_2
    } else {
        1.0
    }
}

/// O(V²) Dijkstra with a linear scan for the minimum.
pub fn brute_dijkstra(map: &GridMap, src: Cell, corner_cutting: bool) -> Vec<Vec<f64>> {
    let (w, h) = (map.width() as usize, map.height() as usize);
    let mut dist = vec![vec![f64::INFINITY; w]; h];
    let mut done = vec![vec![false; w]; h];
    if !free(map, src) {
        return dist;
    }
    dist[src.y as usize][src.x as usize] = 0.0;
    loop {
        let mut best: Option<(f64, Cell)> = None;
        for y in 0..h {
            for x in 0..w {
                let d = dist[y][x];
                if !done[y][x] && d.is_finite() && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, Cell::new(x as u32, y as u32)));
                }
            }
        }
        let Some((d, c)) = best else { break };
        done[c.y as usize][c.x as usize] = true;
        for n in nbrs(map, c) {
            if step_ok(map, c, n, corner_cutting) {
                let nd = d + step_cost(c, n);
                let slot = &mut dist[n.y as usize][n.x as usize];
                if nd < *slot {
                    *slot = nd;
                }
            }
        }
    }
    dist
}

pub fn brute_cost(map: &GridMap, s: Cell, g: Cell, corner_cutting: bool) -> Option<f64> {
    let d = brute_dijkstra(map, s, corner_cutting)[g.y as usize][g.x as usize];
    d.is_finite().then_some(d)
}

/// Seeded map with roughly `density` of its cells blocked.
pub fn random_map(w: u32, h: u32, density: f64, seed: u64) -> GridMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocked = (0..w * h).map(|_| rng.gen_bool(density)).collect();
    GridMap::from_blocked(w, h, blocked)
}

/// Picks two distinct free cells with the given seed.
pub fn random_endpoints(map: &GridMap, seed: u64) -> Option<(Cell, Cell)> {
    let frees: Vec<Cell> = (0..map.cell_count()).map(|i| map.cell_at(i)).filter(|&c| !map.is_blocked(c)).collect();
    if frees.len() < 2 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let a = rng.gen_range(0..frees.len());
    let mut b = rng.gen_range(0..frees.len() - 1);
    if b >= a {
        b += 1;
    }
    Some((frees[a], frees[b]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefMode {
    Single,
    Parallel(usize),
    Speculative(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefRun {
    pub trace: Vec<Cell>,
    pub cost: Option<f64>,
    pub virtual_time: u64,
    pub nonspec: u64,
    pub spec: u64,
    pub used: u64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Who {
    Main,
    Spec,
}

/// Straight transcription of the planning loop with speculative collision checking, written
/// with a linear-scan open list and hash maps. Virtual time: `check_cost` for the start
/// check, then `overhead + check_cost·⌈k/t⌉` per expansion.
pub fn reference_run(
    map: &GridMap,
    start: Cell,
    goal: Cell,
    eps: f64,
    mode: RefMode,
    check_cost: u64,
    overhead: u64,
) -> RefRun {
    let m = match mode {
        RefMode::Single => 1,
        RefMode::Parallel(m) | RefMode::Speculative(m, _) => m,
    };
    let mut known: HashMap<Cell, Who> = HashMap::new();
    let mut counted: HashSet<Cell> = HashSet::new();
    let mut run = RefRun { trace: vec![], cost: None, virtual_time: check_cost, nonspec: 1, spec: 0, used: 0 };
    known.insert(start, Who::Main);
    assert!(free(map, start));

    struct E {
        f: f64,
        h: f64,
        seq: u64,
        cell: Cell,
        g: f64,
        parent: Option<Cell>,
    }
    let hfn = |c: Cell| ((c.x as f64 - goal.x as f64).powi(2) + (c.y as f64 - goal.y as f64).powi(2)).sqrt();
    let mut open: Vec<E> =
        vec![E { f: 0.0 + eps * hfn(start), h: hfn(start), seq: 0, cell: start, g: 0.0, parent: None }];
    let mut seq = 1;
    let mut best_g: HashMap<Cell, f64> = HashMap::from([(start, 0.0)]);
    let mut closed: HashSet<Cell> = HashSet::new();

    loop {
        // linear-scan minimum by (f, h, seq)
        let mut bi = None;
        for (i, e) in open.iter().enumerate() {
            let better = match bi {
                None => true,
                Some(j) => {
                    let b: &E = &open[j];
                    (e.f, e.h, e.seq) < (b.f, b.h, b.seq)
                }
            };
            if better {
                bi = Some(i);
            }
        }
        let Some(i) = bi else { return run };
        let e = open.swap_remove(i);
        if closed.contains(&e.cell) {
            continue;
        }
        closed.insert(e.cell);
        run.trace.push(e.cell);
        if e.cell == goal {
            run.virtual_time += overhead;
            run.cost = Some(e.g);
            return run;
        }
        let ns = nbrs(map, e.cell);
        for &n in &ns {
            if known.get(&n) == Some(&Who::Spec) && counted.insert(n) {
                run.used += 1;
            }
        }
        let unknown: Vec<Cell> = ns.iter().copied().filter(|n| !known.contains_key(n)).collect();
        let k = unknown.len();
        let t = m.min(k);
        run.virtual_time += overhead;
        if k > 0 {
            run.virtual_time += check_cost * k.div_ceil(t) as u64;
        }
        let mut claimed: HashSet<Cell> = unknown.iter().copied().collect();
        for &n in &unknown {
            known.insert(n, Who::Main);
            run.nonspec += 1;
        }
        if let (RefMode::Speculative(_, depth), Some(p)) = (mode, e.parent) {
            let mut idle = m - t;
            let (dx, dy) = (e.cell.x as i64 - p.x as i64, e.cell.y as i64 - p.y as i64);
            'outer: for step in 1..=depth as i64 {
                if k == 0 || idle == 0 {
                    break;
                }
                let Some(sn) = shift(map, e.cell, step * dx, step * dy) else { break };
                for n in nbrs(map, sn) {
                    if !known.contains_key(&n) && !claimed.contains(&n) {
                        claimed.insert(n);
                        known.insert(n, Who::Spec);
                        run.spec += 1;
                        idle -= 1;
                        if idle == 0 {
                            break 'outer;
                        }
                    }
                }
            }
        }
        for n in ns {
            if !step_ok(map, e.cell, n, true) || closed.contains(&n) {
                continue;
            }
            let g = e.g + step_cost(e.cell, n);
            if g < *best_g.get(&n).unwrap_or(&f64::INFINITY) {
                best_g.insert(n, g);
                open.push(E { f: g + eps * hfn(n), h: hfn(n), seq, cell: n, g, parent: Some(e.cell) });
                seq += 1;
            }
        }
    }
}

/// Brute-force speculative target selection for one batch: claims `pre_claimed` first, then
/// walks the ray and collects unclaimed cells not in `known`.
pub fn brute_speculate(
    map: &GridMap,
    node: Cell,
    dir: (i64, i64),
    mut idle: usize,
    depth: usize,
    known: &HashSet<Cell>,
    pre_claimed: &[Cell],
) -> Vec<Cell> {
    let mut claimed: HashSet<Cell> = pre_claimed.iter().copied().collect();
    let mut out = vec![];
    for step in 1..=depth as i64 {
        let Some(sn) = shift(map, node, step * dir.0, step * dir.1) else { break };
        for n in nbrs(map, sn) {
            if idle > 0 && !known.contains(&n) && claimed.insert(n) {
                out.push(n);
                idle -= 1;
            }
        }
    }
    out
}
