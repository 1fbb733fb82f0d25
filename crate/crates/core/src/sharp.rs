//! The sharp-transition functional
//!
//! ```text
//! φ_p(S) = p · Σ_{(x,y) ∈ ∂+S} P_p(0 →^S x)
//! ```
//!
//! for finite sets `S ∋ 0`, the search for sets with `φ_p(S) < 1` (which
//! certify exponential decay of `r_Ψ(0)`), Monte Carlo verification of the
//! resulting bound `P_p(r_Ψ(0) > 2kL) ≤ φ_p(S)^k`, and the supercritical lower
//! bound on `P_p(r_Ψ(0) = ∞)`.

use std::io::Write;

use num_rational::Ratio;
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::field::{EdgeKey, Field, FieldParams};
use crate::graph::{GraphSpec, SubadditiveWeight, Vertex, Window};
use crate::search::{bfs_cluster, Region, Visit};
use crate::stats::{wilson, MeanEstimate, Z95};

/// Exact enumeration is used up to this many internal edges (2^24 configurations).
pub const EXACT_EDGE_CAP: usize = 24;

/// A finite vertex set containing the origin, with `sup_S Ψ` recomputed from
/// its members.
#[derive(Clone, Debug)]
pub struct FiniteSet {
    vertices: Vec<Vertex>,
    members: FxHashSet<Vertex>,
    psi: SubadditiveWeight,
    psi_sup: Ratio<i128>,
}

impl FiniteSet {
    pub fn new(vertices: impl IntoIterator<Item = Vertex>, psi: SubadditiveWeight) -> Result<Self> {
        let mut vertices: Vec<Vertex> = vertices.into_iter().collect();
        vertices.sort();
        vertices.dedup();
        let dim = match vertices.first() {
            Some(v) => v.dim(),
            None => return Err(Error::InvalidArgument("empty set".into())),
        };
        if vertices.iter().any(|v| v.dim() != dim) {
            return Err(Error::InvalidArgument("mixed dimensions in set".into()));
        }
        let origin = Vertex::origin(dim);
        let members: FxHashSet<Vertex> = vertices.iter().copied().collect();
        if !members.contains(&origin) {
            return Err(Error::InvalidArgument("set must contain the origin".into()));
        }
        let psi_sup = vertices.iter().map(|v| psi.eval(v)).max().expect("nonempty");
        Ok(Self {
            vertices,
            members,
            psi,
            psi_sup,
        })
    }

    /// `{x : Ψ(x) ≤ k, ‖x‖∞ ≤ cap}`.
    pub fn sublevel(dim: usize, psi: SubadditiveWeight, k: i64, cap: i64) -> Result<Self> {
        if k < 0 || cap < 0 {
            return Err(Error::InvalidArgument(format!("sublevel needs k, cap >= 0 (k={k}, cap={cap})")));
        }
        let window = Window::psi_ball(psi.clone(), k).truncated(cap);
        let mut out = Vec::new();
        let side = 2 * cap + 1;
        let total = side
            .checked_pow(dim as u32)
            .filter(|&t| t <= 1 << 26)
            .ok_or_else(|| Error::InvalidArgument(format!("box of radius {cap} in d={dim} too large")))?;
        let mut coords = vec![0i64; dim];
        for mut idx in 0..total {
            for c in coords.iter_mut() {
                *c = idx % side - cap;
                idx /= side;
            }
            let v = Vertex::new(&coords);
            if window.contains(&v) {
                out.push(v);
            }
        }
        Self::new(out, psi)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        self.members.contains(v)
    }

    pub fn psi(&self) -> &SubadditiveWeight {
        &self.psi
    }

    pub fn psi_sup(&self) -> Ratio<i128> {
        self.psi_sup
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }
}

impl Region for FiniteSet {
    #[inline]
    fn contains(&self, v: &Vertex) -> bool {
        self.members.contains(v)
    }
}

fn check_dims(g: &GraphSpec, s: &FiniteSet) -> Result<()> {
    if s.dim() != g.dim() {
        return Err(Error::InvalidArgument(format!(
            "set dimension {} differs from graph dimension {}",
            s.dim(),
            g.dim()
        )));
    }
    Ok(())
}

/// Out-boundary `∂+S`: edges with tail in `S` and head outside, ordered by
/// tail then direction index.
pub fn boundary(g: &GraphSpec, s: &FiniteSet) -> Vec<EdgeKey> {
    edges_where(g, s, false)
}

/// Edges with both endpoints in `S`, in the same order.
pub fn internal_edges(g: &GraphSpec, s: &FiniteSet) -> Vec<EdgeKey> {
    edges_where(g, s, true)
}

fn edges_where(g: &GraphSpec, s: &FiniteSet, inside: bool) -> Vec<EdgeKey> {
    let mut out = Vec::new();
    for &x in s.vertices() {
        for i in 0..g.degree() {
            if s.contains(&g.head(&x, i)) == inside {
                out.push(EdgeKey { x, dir_index: i });
            }
        }
    }
    out
}

/// How a probability is computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Mode {
    /// Enumerate every configuration of the relevant edges (capped).
    Exact,
    MonteCarlo { reps: u64, seed: u64 },
    /// Exact when under the cap, Monte Carlo otherwise.
    Auto { reps: u64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo { reps: u64, ci_low: f64, ci_high: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    pub value: f64,
    pub method: Method,
}

/// Small explicit graph: vertex 0 is the source.
struct LocalGraph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl LocalGraph {
    fn build(g: &GraphSpec, s: &FiniteSet, extra_head: Option<&Vertex>) -> (Self, Vec<Vertex>) {
        let origin = g.origin();
        let mut index: FxHashMap<Vertex, usize> = FxHashMap::default();
        let mut verts = vec![origin];
        index.insert(origin, 0);
        let mut edges = Vec::new();
        let mut add = |v: Vertex, verts: &mut Vec<Vertex>| -> usize {
            *index.entry(v).or_insert_with(|| {
                verts.push(v);
                verts.len() - 1
            })
        };
        for e in internal_edges(g, s) {
            let t = add(e.x, &mut verts);
            let h = add(g.head(&e.x, e.dir_index), &mut verts);
            edges.push((t, h));
        }
        if let Some(y) = extra_head {
            for e in boundary(g, s) {
                if g.head(&e.x, e.dir_index) == *y {
                    let t = add(e.x, &mut verts);
                    let h = add(*y, &mut verts);
                    edges.push((t, h));
                }
            }
        }
        (
            Self {
                n_vertices: verts.len(),
                edges,
            },
            verts,
        )
    }

    /// `counts[v * (m + 1) + k]` = number of configurations with `k` open
    /// edges in which `v` is reachable from vertex 0.
    fn reach_counts(&self) -> Vec<u64> {
        let m = self.edges.len();
        assert!(m <= EXACT_EDGE_CAP && self.n_vertices <= 64);
        let nv = self.n_vertices;
        let mut out_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
        for (e, &(t, h)) in self.edges.iter().enumerate() {
            out_edges[t].push((e, h));
        }
        let split = m.min(6);
        let low_bits = m - split;
        let width = nv * (m + 1);
        (0u64..(1 << split))
            .into_par_iter()
            .map(|hi| {
                let mut counts = vec![0u64; width];
                let mut stack = Vec::with_capacity(nv);
                for lo in 0u64..(1 << low_bits) {
                    let mask = (hi << low_bits) | lo;
                    let mut reach = 1u64;
                    stack.clear();
                    stack.push(0usize);
                    while let Some(v) = stack.pop() {
                        for &(e, h) in &out_edges[v] {
                            if (mask >> e) & 1 == 1 && (reach >> h) & 1 == 0 {
                                reach |= 1 << h;
                                stack.push(h);
                            }
                        }
                    }
                    let k = mask.count_ones() as usize;
                    let mut bits = reach;
                    while bits != 0 {
                        let v = bits.trailing_zeros() as usize;
                        counts[v * (m + 1) + k] += 1;
                        bits &= bits - 1;
                    }
                }
                counts
            })
            .reduce(
                || vec![0u64; width],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    }
}

/// `Σ_k counts[k] p^k (1-p)^(m-k)`.
fn mixture(counts: &[u64], p: f64) -> f64 {
    let m = counts.len() - 1;
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| c as f64 * p.powi(k as i32) * (1.0 - p).powi((m - k) as i32))
        .sum()
}

fn use_exact(mode: &Mode, edges: usize) -> Result<bool> {
    match mode {
        Mode::Exact if edges > EXACT_EDGE_CAP => Err(Error::CapExceeded {
            edges,
            cap: EXACT_EDGE_CAP,
        }),
        Mode::Exact => Ok(true),
        Mode::MonteCarlo { .. } => Ok(false),
        Mode::Auto { .. } => Ok(edges <= EXACT_EDGE_CAP),
    }
}

fn mc_params(mode: &Mode) -> (u64, u64) {
    match *mode {
        Mode::MonteCarlo { reps, seed } | Mode::Auto { reps, seed } => (reps, seed),
        Mode::Exact => unreachable!("exact mode has no replicas"),
    }
}

/// `P_p(0 →^S x)`: an open path from the origin to `x` whose intermediate
/// vertices lie in `S`. Requires `x ∈ S` or `x` the head of a boundary edge.
pub fn restricted_connectivity(
    g: &GraphSpec,
    s: &FiniteSet,
    p: f64,
    x: &Vertex,
    mode: Mode,
) -> Result<Probability> {
    check_dims(g, s)?;
    FieldParams::new(0, p)?;
    let inside = s.contains(x);
    if !inside && !boundary(g, s).iter().any(|e| g.head(&e.x, e.dir_index) == *x) {
        return Err(Error::InvalidArgument(format!("{x} is neither in S nor a boundary head")));
    }
    if x.is_zero() {
        return Ok(Probability {
            value: 1.0,
            method: Method::Exact,
        });
    }
    let (local, verts) = LocalGraph::build(g, s, (!inside).then_some(x));
    if use_exact(&mode, local.edges.len())? {
        let m = local.edges.len();
        let value = match verts.iter().position(|v| v == x) {
            Some(idx) => {
                let counts = local.reach_counts();
                mixture(&counts[idx * (m + 1)..(idx + 1) * (m + 1)], p)
            }
            None => 0.0,
        };
        return Ok(Probability {
            value,
            method: Method::Exact,
        });
    }
    let (reps, seed) = mc_params(&mode);
    let base = FieldParams::new(seed, p)?;
    let target = *x;
    let hits: u64 = (0..reps)
        .into_par_iter()
        .map(|r| {
            let field = Field::new(&base.replica(r));
            let end = bfs_cluster(
                g,
                &field,
                g.origin(),
                s,
                usize::MAX,
                |v| if *v == target { Visit::Stop } else { Visit::Continue },
                |_, w| if *w == target { Visit::Stop } else { Visit::Continue },
            );
            u64::from(end.stopped)
        })
        .sum();
    let (ci_low, ci_high) = wilson(hits, reps, Z95);
    Ok(Probability {
        value: hits as f64 / reps as f64,
        method: Method::MonteCarlo { reps, ci_low, ci_high },
    })
}

/// Value of `φ_p(S)` and how it was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiResult {
    pub value: f64,
    pub method: Method,
    pub boundary_size: usize,
}

impl PhiResult {
    /// Upper end of the confidence interval (the value itself when exact).
    pub fn upper(&self) -> f64 {
        match self.method {
            Method::Exact => self.value,
            Method::MonteCarlo { ci_high, .. } => ci_high,
        }
    }

    pub fn lower(&self) -> f64 {
        match self.method {
            Method::Exact => self.value,
            Method::MonteCarlo { ci_low, .. } => ci_low,
        }
    }
}

pub fn phi(g: &GraphSpec, s: &FiniteSet, p: f64, mode: Mode) -> Result<PhiResult> {
    check_dims(g, s)?;
    FieldParams::new(0, p)?;
    let bnd = boundary(g, s);
    let mut exits: FxHashMap<Vertex, u32> = FxHashMap::default();
    for e in &bnd {
        *exits.entry(e.x).or_default() += 1;
    }
    let boundary_size = bnd.len();
    let (local, verts) = LocalGraph::build(g, s, None);
    if use_exact(&mode, local.edges.len())? {
        let m = local.edges.len();
        let counts = local.reach_counts();
        let mut sum = 0.0;
        for (idx, v) in verts.iter().enumerate() {
            if let Some(&k) = exits.get(v) {
                sum += k as f64 * mixture(&counts[idx * (m + 1)..(idx + 1) * (m + 1)], p);
            }
        }
        // Boundary tails never touched by an internal edge are unreachable
        // unless they are the origin, which is vertex 0 of the local graph.
        return Ok(PhiResult {
            value: p * sum,
            method: Method::Exact,
            boundary_size,
        });
    }
    let (reps, seed) = mc_params(&mode);
    let base = FieldParams::new(seed, p)?;
    let samples: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let field = Field::new(&base.replica(r));
            let mut total = 0u64;
            bfs_cluster(
                g,
                &field,
                g.origin(),
                s,
                usize::MAX,
                |v| {
                    total += u64::from(exits.get(v).copied().unwrap_or(0));
                    Visit::Continue
                },
                |_, _| Visit::Continue,
            );
            p * total as f64
        })
        .collect();
    let est = MeanEstimate::from_samples(&samples, Z95);
    Ok(PhiResult {
        value: est.mean,
        method: Method::MonteCarlo {
            reps,
            ci_low: est.ci_low.max(0.0),
            ci_high: est.ci_high,
        },
        boundary_size,
    })
}

/// A finite set with `φ_p(S) < 1` (upper confidence bound when sampled), which
/// yields `P_p(r_Ψ(0) > 2kL) ≤ φ_p(S)^k`.
#[derive(Clone, Debug)]
pub struct DecayCertificate {
    pub set: FiniteSet,
    pub p: f64,
    pub phi: PhiResult,
    /// Positive integer with `L ≥ sup Ψ over S ∪ dirs`.
    pub l: i64,
}

impl DecayCertificate {
    pub fn new(g: &GraphSpec, set: FiniteSet, p: f64, phi: PhiResult) -> Result<Self> {
        if phi.upper() >= 1.0 {
            return Err(Error::NoCertificate(format!(
                "phi upper bound {} is not below 1",
                phi.upper()
            )));
        }
        let l = level_bound(g, &set);
        Ok(Self { set, p, phi, l })
    }

    /// `φ^k` using the conservative (upper) value of φ.
    pub fn predicted_bound(&self, k: u32) -> f64 {
        self.phi.upper().powi(k as i32)
    }

    /// Exponential decay rate implied for `P(r_Ψ(0) ≥ n)`.
    pub fn decay_rate(&self) -> f64 {
        -self.phi.upper().ln() / (2.0 * self.l as f64)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (lo, hi) = (self.phi.lower(), self.phi.upper());
        json!({
            "S": self.set.vertices().iter().map(|v| v.coords().to_vec()).collect::<Vec<_>>(),
            "p": self.p,
            "phi": self.phi.value,
            "phi_ci": [lo, hi],
            "L": self.l,
        })
    }
}

/// `max(1, ⌈max Ψ over S ∪ dirs⌉)`.
pub fn level_bound(g: &GraphSpec, s: &FiniteSet) -> i64 {
    let psi = s.psi();
    let best = g
        .dirs()
        .iter()
        .map(|d| psi.eval(d))
        .chain(std::iter::once(s.psi_sup()))
        .max()
        .expect("nonempty");
    (best.ceil().to_integer() as i64).max(1)
}

/// Scan `S_k = {Ψ ≤ k} ∩ [-cap, cap]^d` for `k = 0..=k_max` and return the
/// first set whose φ is certifiably below 1.
pub fn find_good_set(
    g: &GraphSpec,
    psi: &SubadditiveWeight,
    p: f64,
    k_max: i64,
    cap: i64,
    mode: Mode,
) -> Result<Option<DecayCertificate>> {
    if psi.as_linear().is_none() {
        return Err(Error::InvalidArgument("candidate sets need a linear weight".into()));
    }
    if k_max < 0 {
        return Err(Error::InvalidArgument(format!("k_max = {k_max} < 0")));
    }
    for k in 0..=k_max {
        let set = FiniteSet::sublevel(g.dim(), psi.clone(), k, cap)?;
        let value = phi(g, &set, p, mode)?;
        if value.upper() < 1.0 {
            return Ok(Some(DecayCertificate::new(g, set, p, value)?));
        }
    }
    Ok(None)
}

/// Outcome of [`find_good_set`] at one `p` of a sweep.
#[derive(Clone, Debug)]
pub struct SweepCertificate {
    pub p: f64,
    pub certificate: Option<DecayCertificate>,
}

/// Run [`find_good_set`] over a grid of `p` values.
pub fn certify_sweep(
    g: &GraphSpec,
    psi: &SubadditiveWeight,
    p_grid: &[f64],
    k_max: i64,
    cap: i64,
    mode: Mode,
) -> Result<Vec<SweepCertificate>> {
    p_grid
        .iter()
        .map(|&p| {
            Ok(SweepCertificate {
                p,
                certificate: find_good_set(g, psi, p, k_max, cap, mode)?,
            })
        })
        .collect()
}

/// Largest `p` of a sweep that received a certificate.
pub fn largest_certified(sweep: &[SweepCertificate]) -> Option<f64> {
    sweep
        .iter()
        .filter(|s| s.certificate.is_some())
        .map(|s| s.p)
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.max(p))))
}

/// Interval for the critical parameter: `[largest certified p, smallest p
/// with positive survival evidence]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalInterval {
    pub certified_below: Option<f64>,
    pub survival_above: Option<f64>,
}

/// One row of [`verify_decay`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCheckRow {
    pub k: u32,
    pub l: i64,
    pub predicted: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The Wilson lower bound exceeds the predicted `φ^k`.
    pub flag: bool,
}

pub const DECAY_CSV_HEADER: &str = "k,L,predicted,estimate,ci_low,ci_high,flag";

pub fn write_decay_csv<W: Write>(mut out: W, rows: &[DecayCheckRow]) -> std::io::Result<()> {
    writeln!(out, "{DECAY_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k, r.l, r.predicted, r.estimate, r.ci_low, r.ci_high, r.flag
        )?;
    }
    Ok(())
}

/// Whether `r_Ψ(0) > m` in one sampled field. The cluster is explored inside
/// `Λ_m` truncated to the box of radius `4m`; leaving either counts as
/// exceeding, so the estimate is an upper bound on the true probability.
pub(crate) fn exceeds_level(g: &GraphSpec, field: &Field, psi: &SubadditiveWeight, m: i64) -> bool {
    let window = Window::psi_ball(psi.clone(), m).truncated(4 * m.max(1));
    bfs_cluster(
        g,
        field,
        g.origin(),
        &window,
        usize::MAX,
        |_| Visit::Continue,
        |_, _| Visit::Stop,
    )
    .stopped
}

/// Monte Carlo check of `P_p(r_Ψ(0) > 2kL) ≤ φ^k` for each `k` in `ks`.
pub fn verify_decay(
    g: &GraphSpec,
    cert: &DecayCertificate,
    ks: impl IntoIterator<Item = u32>,
    reps: u64,
    seed: u64,
) -> Result<Vec<DecayCheckRow>> {
    let base = FieldParams::new(seed, cert.p)?;
    let psi = cert.set.psi();
    ks.into_iter()
        .map(|k| {
            let m = 2 * k as i64 * cert.l;
            let hits: u64 = (0..reps)
                .into_par_iter()
                .map(|r| u64::from(exceeds_level(g, &Field::new(&base.replica(r)), psi, m)))
                .sum();
            let (ci_low, ci_high) = wilson(hits, reps, Z95);
            let predicted = cert.predicted_bound(k);
            Ok(DecayCheckRow {
                k,
                l: cert.l,
                predicted,
                estimate: hits as f64 / reps as f64,
                ci_low,
                ci_high,
                flag: ci_low > predicted,
            })
        })
        .collect()
}

/// `(p - p̃) / (p (1 - p̃))`, the lower bound on `P_p(r_Ψ(0) = ∞)` for `p > p̃`.
pub fn theta_lower_bound(p: f64, ptilde: f64) -> Result<f64> {
    if !(0.0 < ptilde && ptilde <= p && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < ptilde <= p < 1, got p = {p}, ptilde = {ptilde}"
        )));
    }
    Ok((p - ptilde) / (p * (1.0 - ptilde)))
}
