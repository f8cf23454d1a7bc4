//! Reference shortest-path costs used by `verify`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::grid::{move_cost, Cell, GridMap};

fn step_allowed(map: &GridMap, from: Cell, to: Cell, corner_cutting: bool) -> bool {
    if map.is_blocked(to) {
        return false;
    }
    corner_cutting
        || from.x == to.x
        || from.y == to.y
        || (!map.is_blocked(Cell::new(to.x, from.y)) && !map.is_blocked(Cell::new(from.x, to.y)))
}

/// Single-source Dijkstra over free cells. Unreachable cells (and every cell, if `source` is
/// blocked) get `f64::INFINITY`.
pub fn dijkstra(map: &GridMap, source: Cell, corner_cutting: bool) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; map.cell_count()];
    if map.is_blocked(source) {
        return dist;
    }
    // costs are a + b√2 with small integers, so ordering by the f64 bit pattern is exact
    // for nonnegative values
    let mut heap = BinaryHeap::new();
    dist[map.index(source)] = 0.0;
    heap.push(Reverse((0f64.to_bits(), map.index(source))));
    while let Some(Reverse((d_bits, i))) = heap.pop() {
        let d = f64::from_bits(d_bits);
        if d > dist[i] {
            continue;
        }
        let c = map.cell_at(i);
        for n in map.neighbors8(c) {
            if !step_allowed(map, c, n, corner_cutting) {
                continue;
            }
            let nd = d + move_cost(c, n).expect("adjacent");
            let j = map.index(n);
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Reverse((nd.to_bits(), j)));
            }
        }
    }
    dist
}

/// Optimal cost from `start` to `goal`, or `None` if unreachable.
pub fn shortest_cost(map: &GridMap, start: Cell, goal: Cell, corner_cutting: bool) -> Option<f64> {
    let d = dijkstra(map, start, corner_cutting)[map.index(goal)];
    d.is_finite().then_some(d)
}
