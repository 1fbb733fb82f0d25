//! Brute-force reference values on small windows, and the path-counting
//! bound for the example model.
//!
//! Everything here is deliberately naive: every configuration of the window's
//! edges is enumerated and each one is searched from scratch.

use std::collections::{BTreeMap, VecDeque};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::EdgeKey;
use crate::graph::{GraphSpec, Vertex, Window};

pub const DEFAULT_CAP: usize = 24;
/// Hard limit regardless of the requested cap.
pub const MAX_CAP: usize = 30;

/// All edges with both endpoints inside a small window.
#[derive(Clone, Debug)]
pub struct EnumerationTask {
    pub g: GraphSpec,
    pub window: Window,
    /// Sorted by tail, then direction index.
    pub edges: Vec<EdgeKey>,
    pub cap: usize,
    vertices: Vec<Vertex>,
    index: FxHashMap<Vertex, usize>,
    /// `(tail, head)` local indices per edge.
    ends: Vec<(usize, usize)>,
}

impl EnumerationTask {
    /// Vertices of `window` (which must be box-truncated) and the edges
    /// between them.
    pub fn new(g: &GraphSpec, window: &Window, cap: usize) -> Result<Self> {
        window.check_explorable()?;
        let radius = window.radius().expect("explorable windows have a radius");
        let side = 2 * radius + 1;
        let count = side
            .checked_pow(g.dim() as u32)
            .filter(|&c| c <= 4096)
            .ok_or_else(|| Error::InvalidWindow(format!("box of radius {radius} too large to enumerate")))?;
        let mut vertices = Vec::with_capacity(count as usize);
        let mut coords = vec![0i64; g.dim()];
        for mut i in 0..count {
            for c in coords.iter_mut() {
                *c = i % side - radius;
                i /= side;
            }
            let v = Vertex::new(&coords);
            if window.contains(&v) {
                vertices.push(v);
            }
        }
        vertices.sort();
        let index: FxHashMap<Vertex, usize> = vertices.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let mut edges = Vec::new();
        let mut ends = Vec::new();
        for (t, x) in vertices.iter().enumerate() {
            for i in 0..g.degree() {
                if let Some(&h) = index.get(&g.head(x, i)) {
                    edges.push(EdgeKey { x: *x, dir_index: i });
                    ends.push((t, h));
                }
            }
        }
        let cap = cap.min(MAX_CAP);
        if edges.len() > cap {
            return Err(Error::CapExceeded { edges: edges.len(), cap });
        }
        Ok(Self {
            g: g.clone(),
            window: window.clone(),
            edges,
            cap,
            vertices,
            index,
            ends,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    fn local(&self, v: &Vertex) -> Result<usize> {
        self.index
            .get(v)
            .copied()
            .ok_or_else(|| Error::InvalidWindow(format!("{v} is outside the enumeration window")))
    }
}

/// One configuration of the task's edges; bit `i` of `mask` is edge `i`.
#[derive(Clone, Copy)]
pub struct Configuration<'a> {
    task: &'a EnumerationTask,
    pub mask: u64,
}

impl Configuration<'_> {
    pub fn is_open(&self, edge: usize) -> bool {
        (self.mask >> edge) & 1 == 1
    }

    pub fn open_count(&self) -> u32 {
        self.mask.count_ones()
    }

    /// Open oriented path from `x` to `y` inside the window.
    pub fn connects(&self, x: &Vertex, y: &Vertex) -> bool {
        self.distance(x, y, true) == Some(0)
    }

    /// Windowed passage time `t(x, y)`.
    pub fn passage_time(&self, x: &Vertex, y: &Vertex) -> Option<u32> {
        self.distance(x, y, false)
    }

    /// Plain Dijkstra over the edge list. With `open_only`, closed edges are
    /// removed instead of costing 1.
    fn distance(&self, x: &Vertex, y: &Vertex, open_only: bool) -> Option<u32> {
        let (Some(&s), Some(&t)) = (self.task.index.get(x), self.task.index.get(y)) else {
            return None;
        };
        let n = self.task.vertices.len();
        let mut dist = vec![u32::MAX; n];
        let mut done = vec![false; n];
        dist[s] = 0;
        loop {
            let next = (0..n).filter(|&v| !done[v] && dist[v] != u32::MAX).min_by_key(|&v| dist[v]);
            let Some(v) = next else { break };
            if v == t {
                return Some(dist[v]);
            }
            done[v] = true;
            for (e, &(a, b)) in self.task.ends.iter().enumerate() {
                if a != v {
                    continue;
                }
                let w = if self.is_open(e) {
                    0
                } else if open_only {
                    continue;
                } else {
                    1
                };
                dist[b] = dist[b].min(dist[v] + w);
            }
        }
        None
    }

    /// Vertices reachable from `x` along open edges (breadth-first).
    pub fn cluster(&self, x: &Vertex) -> Vec<Vertex> {
        let Some(&s) = self.task.index.get(x) else { return Vec::new() };
        let mut seen = vec![false; self.task.vertices.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        let mut out = vec![*x];
        while let Some(v) = queue.pop_front() {
            for (e, &(a, b)) in self.task.ends.iter().enumerate() {
                if a == v && self.is_open(e) && !seen[b] {
                    seen[b] = true;
                    out.push(self.task.vertices[b]);
                    queue.push_back(b);
                }
            }
        }
        out
    }
}

fn for_each_config<T, F>(task: &EnumerationTask, width: usize, f: F) -> Vec<Vec<u64>>
where
    T: Into<Option<usize>>,
    F: Fn(&Configuration) -> T + Sync,
{
    let m = task.edges.len();
    let split = m.min(8);
    let low = m - split;
    (0u64..(1 << split))
        .into_par_iter()
        .map(|hi| {
            let mut counts = vec![vec![0u64; m + 1]; width];
            for lo in 0u64..(1 << low) {
                let cfg = Configuration {
                    task,
                    mask: (hi << low) | lo,
                };
                if let Some(slot) = f(&cfg).into() {
                    counts[slot][cfg.open_count() as usize] += 1;
                }
            }
            counts
        })
        .reduce(
            || vec![vec![0u64; m + 1]; width],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(b) {
                    ra.iter_mut().zip(rb).for_each(|(x, y)| *x += y);
                }
                a
            },
        )
}

/// `counts[k]` = number of configurations with `k` open edges in which the
/// event holds.
pub fn exact_event_polynomial<F>(task: &EnumerationTask, event: F) -> Vec<u64>
where
    F: Fn(&Configuration) -> bool + Sync,
{
    for_each_config(task, 1, |c| event(c).then_some(0usize)).remove(0)
}

/// `Σ_k counts[k] p^k (1-p)^(m-k)` evaluated exactly.
pub fn evaluate_polynomial(counts: &[u64], p: &BigRational) -> BigRational {
    let m = counts.len() - 1;
    let q = BigRational::one() - p;
    let mut total = BigRational::zero();
    for (k, &c) in counts.iter().enumerate() {
        if c > 0 {
            total += BigRational::from_integer(BigInt::from(c)) * pow(p, k) * pow(&q, m - k);
        }
    }
    total
}

fn pow(x: &BigRational, k: usize) -> BigRational {
    num_traits::pow(x.clone(), k)
}

/// Exact value of an `f64` probability as a rational.
pub fn rational_p(p: f64) -> Result<BigRational> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1]")));
    }
    BigRational::from_float(p).ok_or_else(|| Error::InvalidArgument(format!("p = {p}")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactProbability {
    pub exact: BigRational,
    pub value: f64,
    /// Configurations in which the event holds.
    pub config_count: u64,
}

/// `P_p(event)` over all `2^|edges|` configurations of the task.
pub fn exact_event_probability<F>(task: &EnumerationTask, p: f64, event: F) -> Result<ExactProbability>
where
    F: Fn(&Configuration) -> bool + Sync,
{
    let pr = rational_p(p)?;
    let counts = exact_event_polynomial(task, event);
    let exact = evaluate_polynomial(&counts, &pr);
    Ok(ExactProbability {
        value: exact.to_f64().unwrap_or(f64::NAN),
        config_count: counts.iter().sum(),
        exact,
    })
}

/// Law of the windowed passage time; `None` is the unreachable atom.
#[derive(Clone, Debug, PartialEq)]
pub struct PassageDistribution {
    pub atoms: BTreeMap<Option<u32>, BigRational>,
}

impl PassageDistribution {
    pub fn mass(&self, t: Option<u32>) -> f64 {
        self.atoms.get(&t).and_then(|q| q.to_f64()).unwrap_or(0.0)
    }

    pub fn unreachable_mass(&self) -> f64 {
        self.mass(None)
    }

    /// `E[t · 1{reachable}]`.
    pub fn reachable_first_moment(&self) -> f64 {
        self.atoms
            .iter()
            .filter_map(|(t, q)| t.map(|t| t as f64 * q.to_f64().unwrap_or(0.0)))
            .sum()
    }

    /// `E[t | reachable]`.
    pub fn conditional_mean(&self) -> Option<f64> {
        let reach = 1.0 - self.unreachable_mass();
        (reach > 0.0).then(|| self.reachable_first_moment() / reach)
    }

    pub fn total(&self) -> BigRational {
        self.atoms.values().cloned().sum()
    }
}

pub fn exact_passage_distribution(
    task: &EnumerationTask,
    p: f64,
    x: &Vertex,
    y: &Vertex,
) -> Result<PassageDistribution> {
    let pr = rational_p(p)?;
    task.local(x)?;
    task.local(y)?;
    let n = task.vertices.len();
    // Slot t for time t, slot n for unreachable.
    let counts = for_each_config(task, n + 1, |c| Some(c.passage_time(x, y).map_or(n, |t| t as usize)));
    let mut atoms = BTreeMap::new();
    for (slot, row) in counts.iter().enumerate() {
        if row.iter().any(|&c| c > 0) {
            let key = (slot < n).then_some(slot as u32);
            atoms.insert(key, evaluate_polynomial(row, &pr));
        }
    }
    Ok(PassageDistribution { atoms })
}

pub const DISTRIBUTION_CSV_HEADER: &str = "time,mass";

pub fn write_distribution_csv<W: std::io::Write>(mut out: W, dist: &PassageDistribution) -> std::io::Result<()> {
    writeln!(out, "{DISTRIBUTION_CSV_HEADER}")?;
    for (t, q) in &dist.atoms {
        let t = t.map_or("unreachable".to_string(), |t| t.to_string());
        writeln!(out, "{t},{}", q.to_f64().unwrap_or(f64::NAN))?;
    }
    Ok(())
}

/// Mean number of open self-avoiding paths from the origin to the line
/// `y = -n` in the example model, and the bound from counting step patterns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathCountBound {
    /// `term[ℓ] = C(2ℓ+n, ℓ) (2M+1)^ℓ p^(2ℓ+n)`.
    pub terms: Vec<f64>,
    /// Cumulative sums of `terms`.
    pub partial_sums: Vec<f64>,
    pub partial_sum: f64,
    /// `(2p)^n / (1 - 4p²(2M+1))`, absent when the series diverges.
    pub closed_bound: Option<f64>,
}

fn binomial(n: u64, k: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("finite below 2^1000").ln();
    }
    let shift = bits - 900;
    (x >> shift).to_f64().expect("finite").ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn path_count_bound(m: u32, p: f64, n: u32, l_max: u32) -> Result<PathCountBound> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1]")));
    }
    let branch = (2 * m + 1) as f64;
    let mut terms = Vec::with_capacity(l_max as usize + 1);
    for l in 0..=l_max as u64 {
        let len = 2 * l + n as u64;
        let term = if len == 0 {
            1.0
        } else if p == 0.0 {
            0.0
        } else {
            (ln_biguint(&binomial(len, l)) + l as f64 * branch.ln() + len as f64 * p.ln()).exp()
        };
        terms.push(term);
    }
    let partial_sums: Vec<f64> = terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect();
    let ratio = 4.0 * p * p * branch;
    let closed_bound = (ratio < 1.0).then(|| (2.0 * p).powi(n as i32) / (1.0 - ratio));
    Ok(PathCountBound {
        partial_sum: *partial_sums.last().expect("l_max >= 0"),
        terms,
        partial_sums,
        closed_bound,
    })
}

/// Exhaustive expected number of open self-avoiding paths in
/// `example_model(m)` from the origin to the line `y = -n`, stopped at their
/// first visit to that line, grouped by the number `ℓ` of upward steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenPathExpectation {
    /// `counts[ℓ]`: number of such paths with `ℓ` upward steps.
    pub counts: Vec<u64>,
    /// `counts[ℓ] p^(2ℓ+n)`.
    pub expectations: Vec<f64>,
}

pub fn open_path_expectation(m: u32, p: f64, n: u32, l_max: u32) -> Result<OpenPathExpectation> {
    if n == 0 {
        return Err(Error::InvalidArgument("target line must be below the origin".into()));
    }
    let g = GraphSpec::example_model(m as i64)?;
    let mut counts = vec![0u64; l_max as usize + 1];
    let mut visited = vec![g.origin()];
    fn walk(g: &GraphSpec, n: i64, l_max: u64, ups: u64, visited: &mut Vec<Vertex>, counts: &mut [u64]) {
        let x = *visited.last().expect("nonempty");
        for &d in g.dirs() {
            let up = d.coords()[1] > 0;
            let ups2 = ups + u64::from(up);
            if ups2 > l_max {
                continue;
            }
            let y = x + d;
            // Every step moves one row, so the upward budget bounds the length.
            if visited.contains(&y) {
                continue;
            }
            if y.coords()[1] == -n {
                counts[ups2 as usize] += 1;
                continue;
            }
            visited.push(y);
            walk(g, n, l_max, ups2, visited, counts);
            visited.pop();
        }
    }
    walk(&g, n as i64, l_max as u64, 0, &mut visited, &mut counts);
    let expectations = counts
        .iter()
        .enumerate()
        .map(|(l, &c)| c as f64 * p.powi((2 * l + n as usize) as i32))
        .collect();
    Ok(OpenPathExpectation { counts, expectations })
}
