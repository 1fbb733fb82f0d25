//! Lazy graph searches over the implicit oriented graph.

use std::cell::RefCell;
use std::collections::VecDeque;

use rustc_hash::FxHashMap;

use crate::field::Field;
use crate::graph::{GraphSpec, Vertex, Window};

/// Anything that can confine a search.
pub trait Region {
    fn contains(&self, v: &Vertex) -> bool;

    /// Radius of an L∞ box containing the region, if known.
    fn box_radius(&self) -> Option<i64> {
        None
    }
}

impl Region for Window {
    #[inline]
    fn contains(&self, v: &Vertex) -> bool {
        Window::contains(self, v)
    }

    fn box_radius(&self) -> Option<i64> {
        self.radius()
    }
}

/// Boxes up to this many vertices use a flat per-thread table.
const DENSE_LIMIT: u64 = 1 << 24;
const UNSET: u32 = u32::MAX;

thread_local! {
    static SCRATCH: RefCell<Vec<u32>> = const { RefCell::new(Vec::new()) };
}

/// Vertex-to-`u32` map for one search: a flat table over the region's box
/// (reused across searches on the same thread and reset entry by entry), or
/// a hash map when the region is unbounded or too large.
enum Labels {
    Dense {
        table: Vec<u32>,
        radius: i64,
        side: i64,
        touched: Vec<usize>,
    },
    Sparse(FxHashMap<Vertex, u32>),
}

impl Labels {
    fn new<R: Region + ?Sized>(region: &R, x0: &Vertex) -> Self {
        let dim = x0.dim();
        let dense = region.box_radius().filter(|_| region.contains(x0)).and_then(|r| {
            let side = 2 * r + 1;
            (side as u64)
                .checked_pow(dim as u32)
                .filter(|&n| n <= DENSE_LIMIT)
                .map(|n| (r, side, n as usize))
        });
        match dense {
            Some((radius, side, n)) => {
                let mut table = SCRATCH.with(|s| std::mem::take(&mut *s.borrow_mut()));
                if table.len() < n {
                    table.clear();
                    table.resize(n, UNSET);
                }
                Labels::Dense {
                    table,
                    radius,
                    side,
                    touched: Vec::new(),
                }
            }
            None => Labels::Sparse(FxHashMap::default()),
        }
    }

    /// Caller guarantees `v` lies in the region's box.
    #[inline]
    fn slot(radius: i64, side: i64, v: &Vertex) -> usize {
        let mut idx = 0i64;
        for &c in v.coords().iter().rev() {
            idx = idx * side + (c + radius);
        }
        idx as usize
    }

    #[inline]
    fn get(&self, v: &Vertex) -> Option<u32> {
        match self {
            Labels::Dense { table, radius, side, .. } => {
                let x = table[Self::slot(*radius, *side, v)];
                (x != UNSET).then_some(x)
            }
            Labels::Sparse(m) => m.get(v).copied(),
        }
    }

    #[inline]
    fn set(&mut self, v: &Vertex, value: u32) {
        match self {
            Labels::Dense {
                table,
                radius,
                side,
                touched,
            } => {
                let i = Self::slot(*radius, *side, v);
                if table[i] == UNSET {
                    touched.push(i);
                }
                table[i] = value;
            }
            Labels::Sparse(m) => {
                m.insert(*v, value);
            }
        }
    }
}

impl Drop for Labels {
    fn drop(&mut self) {
        if let Labels::Dense { table, touched, .. } = self {
            for &i in touched.iter() {
                table[i] = UNSET;
            }
            let table = std::mem::take(table);
            SCRATCH.with(|s| {
                let mut s = s.borrow_mut();
                if s.len() < table.len() {
                    *s = table;
                }
            });
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Visit {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct BfsEnd {
    pub visited: usize,
    pub window_hit: bool,
    pub budget_hit: bool,
    pub stopped: bool,
}

/// FIFO exploration of the open cluster of `x0` inside `region`.
///
/// Out-edges are scanned in `dirs` order and each vertex is visited once, at
/// first arrival. `on_visit` sees every visited vertex (including `x0`);
/// `on_escape` sees every open edge whose head lies outside the region.
/// At most `budget` vertices are visited.
pub(crate) fn bfs_cluster<R, V, E>(
    g: &GraphSpec,
    field: &Field,
    x0: Vertex,
    region: &R,
    budget: usize,
    mut on_visit: V,
    mut on_escape: E,
) -> BfsEnd
where
    R: Region + ?Sized,
    V: FnMut(&Vertex) -> Visit,
    E: FnMut(&Vertex, &Vertex) -> Visit,
{
    let mut end = BfsEnd {
        visited: 1,
        ..BfsEnd::default()
    };
    let mut seen = Labels::new(region, &x0);
    let mut count = 1usize;
    if region.contains(&x0) {
        seen.set(&x0, 0);
    }
    if on_visit(&x0) == Visit::Stop {
        end.stopped = true;
        return end;
    }
    let mut queue = VecDeque::from([x0]);
    while let Some(v) = queue.pop_front() {
        for (i, &d) in g.dirs().iter().enumerate() {
            let w = v + d;
            if !region.contains(&w) {
                if w != x0 && field.is_open(&v, i) {
                    end.window_hit = true;
                    if on_escape(&v, &w) == Visit::Stop {
                        end.stopped = true;
                        return end;
                    }
                }
                continue;
            }
            if seen.get(&w).is_some() || !field.is_open(&v, i) {
                continue;
            }
            if count >= budget {
                end.budget_hit = true;
                return end;
            }
            seen.set(&w, 0);
            count += 1;
            end.visited = count;
            queue.push_back(w);
            if on_visit(&w) == Visit::Stop {
                end.stopped = true;
                return end;
            }
        }
    }
    end
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct DijkstraEnd {
    pub settled: usize,
    pub stopped: bool,
}

/// Exact shortest paths from `x0` for edge costs in {0, 1}, using a two-ended
/// deque as a two-level bucket queue.
///
/// `cost(v, i)` returns `None` when the edge is absent. Vertices are reported
/// to `on_settle` in nondecreasing distance order, each exactly once. Edges
/// leaving `region` are ignored.
pub(crate) fn zero_one_search<R, C, S>(
    g: &GraphSpec,
    x0: Vertex,
    region: &R,
    mut cost: C,
    mut on_settle: S,
) -> DijkstraEnd
where
    R: Region + ?Sized,
    C: FnMut(&Vertex, usize) -> Option<u32>,
    S: FnMut(&Vertex, u32) -> Visit,
{
    let mut end = DijkstraEnd::default();
    let mut dist = Labels::new(region, &x0);
    let mut deque: VecDeque<(Vertex, u32)> = VecDeque::new();
    dist.set(&x0, 0);
    deque.push_back((x0, 0));
    while let Some((v, d)) = deque.pop_front() {
        if dist.get(&v).is_some_and(|best| best < d) {
            continue;
        }
        end.settled += 1;
        if on_settle(&v, d) == Visit::Stop {
            end.stopped = true;
            return end;
        }
        for (i, &step) in g.dirs().iter().enumerate() {
            let w = v + step;
            if !region.contains(&w) {
                continue;
            }
            if dist.get(&w).is_some_and(|best| best <= d) {
                continue;
            }
            let Some(c) = cost(&v, i) else { continue };
            let nd = d + c;
            match dist.get(&w) {
                Some(best) if best <= nd => {}
                _ => {
                    dist.set(&w, nd);
                    if c == 0 {
                        deque.push_front((w, nd));
                    } else {
                        deque.push_back((w, nd));
                    }
                }
            }
        }
    }
    end
}
