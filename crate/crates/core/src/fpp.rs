//! Oriented first-passage percolation with passage times in {0, 1}.
//!
//! `t(x, y)` is the least number of closed edges on an oriented path from `x`
//! to `y`. Searches run a 0-1 Dijkstra over the implicit graph restricted to a
//! window; results are exact within the window and unreachable targets are
//! reported as such.

use std::io::Write;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::field::{Field, FieldParams};
use crate::graph::{Direction, GraphSpec, Vertex, Window};
use crate::search::{zero_one_search, Region, Visit};
use crate::sharp::{boundary, internal_edges, FiniteSet, Mode, EXACT_EDGE_CAP};
use crate::stats::{wilson, MeanEstimate, Z95};

/// Estimates below this are treated as zero (see [`MuEstimate::is_zero`]).
pub const ZERO_TOL: f64 = 1e-3;

/// Replicas with an unreachable target above this rate invalidate an estimate.
pub const MAX_UNREACHABLE_RATE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Vertex(Vertex),
    /// `H_n(u) = {x : ⟨x, u⟩ ≥ n}`.
    Hyperplane { u: Vec<i64>, n: i64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageResult {
    /// `None` when no path inside the window reaches the target.
    pub time: Option<u32>,
    /// Vertices settled by the search.
    pub expanded: usize,
    pub target: Target,
}

fn require_in(window: &Window, v: &Vertex, what: &str) -> Result<()> {
    if !window.contains(v) {
        return Err(Error::InvalidWindow(format!("{what} {v} lies outside the window")));
    }
    Ok(())
}

/// Times from `x0` to each target (first settle), stopping once all are settled.
fn times_to_points<R: Region + ?Sized>(
    g: &GraphSpec,
    field: &Field,
    x0: Vertex,
    targets: &[Vertex],
    region: &R,
) -> (Vec<Option<u32>>, usize) {
    let mut out = vec![None; targets.len()];
    let mut remaining = targets.len();
    if remaining == 0 {
        return (out, 0);
    }
    let end = zero_one_search(
        g,
        x0,
        region,
        |v, i| Some(field.time(v, i)),
        |v, d| {
            for (slot, t) in out.iter_mut().zip(targets) {
                if slot.is_none() && t == v {
                    *slot = Some(d);
                    remaining -= 1;
                }
            }
            if remaining == 0 {
                Visit::Stop
            } else {
                Visit::Continue
            }
        },
    );
    (out, end.settled)
}

/// Times from the origin to `H_n(u)` for each `n` in increasing `levels`.
/// With `cutoff`, the search gives up once the settled distance exceeds it.
fn times_to_levels<R: Region + ?Sized>(
    g: &GraphSpec,
    field: &Field,
    u: &[i64],
    levels: &[i64],
    region: &R,
    cutoff: Option<u32>,
) -> (Vec<Option<u32>>, usize) {
    let mut out = vec![None; levels.len()];
    let mut next = 0;
    if levels.is_empty() {
        return (out, 0);
    }
    let end = zero_one_search(
        g,
        g.origin(),
        region,
        |v, i| Some(field.time(v, i)),
        |v, d| {
            if cutoff.is_some_and(|c| d > c) {
                return Visit::Stop;
            }
            let h = v.dot(u);
            while next < levels.len() && h >= levels[next] {
                out[next] = Some(d);
                next += 1;
            }
            if next == levels.len() {
                Visit::Stop
            } else {
                Visit::Continue
            }
        },
    );
    (out, end.settled)
}

/// `t(x, y)` within `window`.
pub fn passage_time(
    g: &GraphSpec,
    params: &FieldParams,
    x: &Vertex,
    y: &Vertex,
    window: &Window,
) -> Result<PassageResult> {
    window.check_explorable()?;
    require_in(window, x, "source")?;
    require_in(window, y, "target")?;
    let field = Field::new(params);
    let (t, expanded) = times_to_points(g, &field, *x, std::slice::from_ref(y), window);
    Ok(PassageResult {
        time: t[0],
        expanded,
        target: Target::Vertex(*y),
    })
}

/// `t(0, H_n(u))` within `window`.
pub fn hyperplane_time(
    g: &GraphSpec,
    params: &FieldParams,
    u: &Direction,
    n: i64,
    window: &Window,
) -> Result<PassageResult> {
    window.check_explorable()?;
    check_dim(g, u.dim())?;
    let field = Field::new(params);
    let (t, expanded) = times_to_levels(g, &field, u.coords(), &[n], window, None);
    Ok(PassageResult {
        time: t[0],
        expanded,
        target: Target::Hyperplane {
            u: u.coords().to_vec(),
            n,
        },
    })
}

fn check_dim(g: &GraphSpec, dim: usize) -> Result<()> {
    if dim != g.dim() {
        return Err(Error::InvalidArgument(format!(
            "vector of dimension {dim} on a graph of dimension {}",
            g.dim()
        )));
    }
    Ok(())
}

fn check_ladder(ladder: &[i64]) -> Result<()> {
    if ladder.is_empty() || ladder[0] <= 0 || ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "scale ladder must be positive and strictly increasing: {ladder:?}"
        )));
    }
    Ok(())
}

/// Replica statistics of `T_n / n` at one scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleStat {
    pub n: i64,
    pub reps: u64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub unreachable_rate: f64,
}

/// Shared shape of [`MuEstimate`] and [`BEstimate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderEstimate {
    pub n_ladder: Vec<i64>,
    /// `T_n / n` per scale.
    pub ratios: Vec<ScaleStat>,
    /// Mean of the paired per-replica increment
    /// `(T_{n_K} - T_{n_{K-1}}) / (n_K - n_{K-1})` between the two largest
    /// scales (with `T_0 = 0` for a one-scale ladder).
    pub estimate: f64,
    pub ci: (f64, f64),
    /// Every scale had at most 1% unreachable replicas.
    pub valid: bool,
    pub warnings: Vec<String>,
}

impl LadderEstimate {
    /// Declared zero when the confidence interval reaches down to
    /// [`ZERO_TOL`]; a ray is never reported zero while its interval lies
    /// entirely above the tolerance.
    pub fn is_zero(&self) -> bool {
        self.ci.0 <= ZERO_TOL
    }

    /// Ratio at the largest scale.
    pub fn largest_ratio(&self) -> &ScaleStat {
        self.ratios.last().expect("nonempty ladder")
    }

    fn from_samples(ladder: &[i64], samples: &[Vec<Option<u32>>], warnings: Vec<String>) -> Self {
        let reps = samples.len() as u64;
        let mut ratios = Vec::with_capacity(ladder.len());
        let mut valid = true;
        for (j, &n) in ladder.iter().enumerate() {
            let reached: Vec<f64> = samples.iter().filter_map(|s| s[j]).map(|t| t as f64 / n as f64).collect();
            let unreachable = reps - reached.len() as u64;
            let rate = if reps == 0 { 0.0 } else { unreachable as f64 / reps as f64 };
            if rate > MAX_UNREACHABLE_RATE {
                valid = false;
            }
            let m = MeanEstimate::from_samples(&reached, Z95);
            ratios.push(ScaleStat {
                n,
                reps,
                mean: m.mean,
                ci_low: m.ci_low,
                ci_high: m.ci_high,
                unreachable_rate: rate,
            });
        }
        let k = ladder.len() - 1;
        let (n_hi, n_lo) = (ladder[k], if k == 0 { 0 } else { ladder[k - 1] });
        let increments: Vec<f64> = samples
            .iter()
            .filter_map(|s| {
                let hi = s[k]?;
                let lo = if k == 0 { 0 } else { s[k - 1]? };
                Some((hi as f64 - lo as f64) / (n_hi - n_lo) as f64)
            })
            .collect();
        let inc = MeanEstimate::from_samples(&increments, Z95);
        Self {
            n_ladder: ladder.to_vec(),
            ratios,
            estimate: inc.mean,
            ci: (inc.ci_low, inc.ci_high),
            valid,
            warnings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub x: Vec<i64>,
    #[serde(flatten)]
    pub ladder: LadderEstimate,
}

impl MuEstimate {
    pub fn mu_hat(&self) -> f64 {
        self.ladder.estimate.max(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.ladder.is_zero()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BEstimate {
    pub u: Vec<i64>,
    #[serde(flatten)]
    pub ladder: LadderEstimate,
}

impl BEstimate {
    pub fn b_hat(&self) -> f64 {
        self.ladder.estimate.max(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.ladder.is_zero()
    }
}

/// Scale ladder and replica settings shared by the estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    pub n_ladder: Vec<i64>,
    pub reps: u64,
    pub seed: u64,
    pub window_factor: i64,
}

impl LadderConfig {
    pub fn new(n_ladder: Vec<i64>, reps: u64, seed: u64) -> Self {
        Self {
            n_ladder,
            reps,
            seed,
            window_factor: crate::cluster::DEFAULT_WINDOW_FACTOR,
        }
    }

    fn check(&self) -> Result<()> {
        check_ladder(&self.n_ladder)?;
        if self.reps == 0 || self.window_factor <= 0 {
            return Err(Error::InvalidArgument("reps and window factor must be positive".into()));
        }
        Ok(())
    }
}

fn zd_warning(g: &GraphSpec) -> Vec<String> {
    if g.generates_zd(4) {
        Vec::new()
    } else {
        vec!["directions do not generate Z^d within radius 4; targets may be unreachable".into()]
    }
}

/// `μ_p(x)` from `t(0, n x) / n` along a ladder of scales.
pub fn estimate_mu(g: &GraphSpec, p: f64, x: &[i64], cfg: &LadderConfig) -> Result<MuEstimate> {
    cfg.check()?;
    check_dim(g, x.len())?;
    let xv = Vertex::new(x);
    if xv.is_zero() {
        return Err(Error::InvalidArgument("x must be nonzero".into()));
    }
    let base = FieldParams::new(cfg.seed, p)?;
    let n_max = *cfg.n_ladder.last().expect("checked");
    let window = Window::for_scale(n_max.saturating_mul(xv.norm_inf()), cfg.window_factor);
    window.check_explorable()?;
    let targets: Vec<Vertex> = cfg.n_ladder.iter().map(|&n| xv.scaled(n)).collect();
    let samples: Vec<Vec<Option<u32>>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| times_to_points(g, &Field::new(&base.replica(r)), g.origin(), &targets, &window).0)
        .collect();
    Ok(MuEstimate {
        x: x.to_vec(),
        ladder: LadderEstimate::from_samples(&cfg.n_ladder, &samples, zd_warning(g)),
    })
}

/// `b_p(u)` from `t(0, H_n(u)) / n` along a ladder of scales.
pub fn estimate_b(g: &GraphSpec, p: f64, u: &Direction, cfg: &LadderConfig) -> Result<BEstimate> {
    cfg.check()?;
    check_dim(g, u.dim())?;
    let base = FieldParams::new(cfg.seed, p)?;
    let n_max = *cfg.n_ladder.last().expect("checked");
    let window = Window::for_scale(n_max, cfg.window_factor);
    window.check_explorable()?;
    let samples: Vec<Vec<Option<u32>>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let field = Field::new(&base.replica(r));
            times_to_levels(g, &field, u.coords(), &cfg.n_ladder, &window, None).0
        })
        .collect();
    Ok(BEstimate {
        u: u.coords().to_vec(),
        ladder: LadderEstimate::from_samples(&cfg.n_ladder, &samples, zd_warning(g)),
    })
}

pub const LADDER_CSV_HEADER: &str = "ray,n,reps,mean,ci_low,ci_high,unreachable_rate";

pub fn write_ladder_csv<W: Write>(mut out: W, ray: &[i64], est: &LadderEstimate, header: bool) -> std::io::Result<()> {
    if header {
        writeln!(out, "{LADDER_CSV_HEADER}")?;
    }
    let ray = Vertex::new(ray);
    for s in &est.ratios {
        writeln!(
            out,
            "\"{ray}\",{},{},{},{},{},{}",
            s.n, s.reps, s.mean, s.ci_low, s.ci_high, s.unreachable_rate
        )?;
    }
    Ok(())
}

/// Constants of the subcritical time-decay bound for one finite set.
#[derive(Clone, Debug)]
pub struct DecayConstants {
    pub set: FiniteSet,
    pub p: f64,
    pub u: Vec<i64>,
    pub alpha: f64,
    /// `K_{S,α}` at the selected α.
    pub k: f64,
    /// `max ⟨y, u⟩` over boundary edges `(x, y)`.
    pub m_u: f64,
    /// `log(1/K) / (α M_u)`.
    pub c: f64,
    /// `(α, K)` for every grid point.
    pub grid: Vec<(f64, f64)>,
}

impl DecayConstants {
    /// Bound on `P(t(0, H_n(u)) ≤ c_used n)`.
    pub fn predicted_bound(&self, c_used: f64, n: i64) -> f64 {
        let exponent = self.alpha * c_used * n as f64 + (n as f64 / self.m_u - 1.0) * self.k.ln();
        (exponent.exp() / (1.0 - self.k)).min(1.0)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "S": self.set.vertices().iter().map(|v| v.coords().to_vec()).collect::<Vec<_>>(),
            "p": self.p,
            "u": self.u,
            "alpha": self.alpha,
            "K": self.k,
            "M_u": self.m_u,
            "c": self.c,
        })
    }
}

/// Per-vertex law of the restricted distance `d_S(0, x)`, as configuration
/// counts `counts[v][d][k]` over the internal edges of `S`.
struct DistanceTable {
    verts: Vec<Vertex>,
    m: usize,
    /// Flattened `[v][d][k]`; `d = n_vertices` encodes "unreachable".
    counts: Vec<u64>,
}

impl DistanceTable {
    fn build(g: &GraphSpec, s: &FiniteSet) -> Self {
        let mut index: FxHashMap<Vertex, usize> = FxHashMap::default();
        let mut verts = vec![g.origin()];
        index.insert(g.origin(), 0);
        let mut edges = Vec::new();
        for e in internal_edges(g, s) {
            let mut idx = |v: Vertex| {
                *index.entry(v).or_insert_with(|| {
                    verts.push(v);
                    verts.len() - 1
                })
            };
            let t = idx(e.x);
            let h = idx(g.head(&e.x, e.dir_index));
            edges.push((t, h));
        }
        let nv = verts.len();
        let m = edges.len();
        let stride_d = m + 1;
        let stride_v = (nv + 1) * stride_d;
        let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
        for (e, &(t, h)) in edges.iter().enumerate() {
            out[t].push((e, h));
        }
        let split = m.min(6);
        let low = m - split;
        let counts = (0u64..(1 << split))
            .into_par_iter()
            .map(|hi| {
                let mut counts = vec![0u64; nv * stride_v];
                let mut dist = vec![u32::MAX; nv];
                let mut deque = std::collections::VecDeque::with_capacity(nv);
                for lo in 0u64..(1 << low) {
                    let mask = (hi << low) | lo;
                    dist.iter_mut().for_each(|d| *d = u32::MAX);
                    dist[0] = 0;
                    deque.clear();
                    deque.push_back(0usize);
                    while let Some(v) = deque.pop_front() {
                        let dv = dist[v];
                        for &(e, h) in &out[v] {
                            let c = u32::from((mask >> e) & 1 == 0);
                            if dv + c < dist[h] {
                                dist[h] = dv + c;
                                if c == 0 {
                                    deque.push_front(h);
                                } else {
                                    deque.push_back(h);
                                }
                            }
                        }
                    }
                    let k = mask.count_ones() as usize;
                    for (v, &d) in dist.iter().enumerate() {
                        let d = if d == u32::MAX { nv } else { d as usize };
                        counts[v * stride_v + d * stride_d + k] += 1;
                    }
                }
                counts
            })
            .reduce(
                || vec![0u64; nv * stride_v],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        Self { verts, m, counts }
    }

    /// `E[e^{-α d_S(0, v)}]` for the local vertex `v`.
    fn laplace(&self, v: usize, p: f64, alpha: f64) -> f64 {
        let nv = self.verts.len();
        let stride_d = self.m + 1;
        let base = v * (nv + 1) * stride_d;
        let mut total = 0.0;
        for d in 0..nv {
            let row = &self.counts[base + d * stride_d..base + (d + 1) * stride_d];
            let prob: f64 = row
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| c as f64 * p.powi(k as i32) * (1.0 - p).powi((self.m - k) as i32))
                .sum();
            total += prob * (-alpha * d as f64).exp();
        }
        total
    }
}

/// `K_{S,α} = Σ_{(x,y) ∈ ∂+S} E[e^{-α t_S(x,y)}]` over `alpha_grid`, and the
/// best resulting rate `c = log(1/K) / (α M_u)` among grid points with `K < 1`.
pub fn decay_constants(
    g: &GraphSpec,
    s: &FiniteSet,
    p: f64,
    u: &Direction,
    alpha_grid: &[f64],
    mode: Mode,
) -> Result<DecayConstants> {
    check_dim(g, u.dim())?;
    check_dim(g, s.dim())?;
    FieldParams::new(0, p)?;
    if alpha_grid.is_empty() || alpha_grid.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidArgument("alpha grid must be nonempty and positive".into()));
    }
    let bnd = boundary(g, s);
    let m_u = bnd
        .iter()
        .map(|e| g.head(&e.x, e.dir_index).dot(u.coords()))
        .max()
        .ok_or_else(|| Error::InvalidArgument("set has an empty boundary".into()))?;
    if m_u <= 0 {
        return Err(Error::InvalidArgument(format!("M_u = {m_u} must be positive")));
    }
    let mut exits: FxHashMap<Vertex, u32> = FxHashMap::default();
    for e in &bnd {
        *exits.entry(e.x).or_default() += 1;
    }
    let n_internal = internal_edges(g, s).len();
    let exact = match mode {
        Mode::Exact if n_internal > EXACT_EDGE_CAP => {
            return Err(Error::CapExceeded {
                edges: n_internal,
                cap: EXACT_EDGE_CAP,
            })
        }
        Mode::Exact => true,
        Mode::Auto { .. } => n_internal <= EXACT_EDGE_CAP,
        Mode::MonteCarlo { .. } => false,
    };
    // Σ_{(x,y) ∈ ∂} E[e^{-α d_S(0,x)}] per grid point; the boundary edge's own
    // time is independent of the internal edges and factors out.
    let sums: Vec<f64> = if exact {
        let table = DistanceTable::build(g, s);
        alpha_grid
            .iter()
            .map(|&a| {
                table
                    .verts
                    .iter()
                    .enumerate()
                    .filter_map(|(i, v)| exits.get(v).map(|&k| k as f64 * table.laplace(i, p, a)))
                    .sum()
            })
            .collect()
    } else {
        let (reps, seed) = match mode {
            Mode::MonteCarlo { reps, seed } | Mode::Auto { reps, seed } => (reps, seed),
            Mode::Exact => unreachable!(),
        };
        let base = FieldParams::new(seed, p)?;
        let totals = (0..reps)
            .into_par_iter()
            .map(|r| {
                let field = Field::new(&base.replica(r));
                let mut acc = vec![0.0; alpha_grid.len()];
                zero_one_search(
                    g,
                    g.origin(),
                    s,
                    |v, i| Some(field.time(v, i)),
                    |v, d| {
                        if let Some(&k) = exits.get(v) {
                            for (a, slot) in alpha_grid.iter().zip(acc.iter_mut()) {
                                *slot += k as f64 * (-a * d as f64).exp();
                            }
                        }
                        Visit::Continue
                    },
                );
                acc
            })
            .reduce(
                || vec![0.0; alpha_grid.len()],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        totals.into_iter().map(|t| t / reps as f64).collect()
    };
    let grid: Vec<(f64, f64)> = alpha_grid
        .iter()
        .zip(sums)
        .map(|(&a, sum)| (a, (p + (1.0 - p) * (-a).exp()) * sum))
        .collect();
    let best = grid
        .iter()
        .filter(|(_, k)| *k < 1.0)
        .map(|&(a, k)| (a, k, (1.0 / k).ln() / (a * m_u as f64)))
        .max_by(|x, y| x.2.total_cmp(&y.2));
    let Some((alpha, k, c)) = best else {
        let k_min = grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
        return Err(Error::NoCertificate(format!("K >= 1 on the whole alpha grid (min K = {k_min})")));
    };
    Ok(DecayConstants {
        set: s.clone(),
        p,
        u: u.coords().to_vec(),
        alpha,
        k,
        m_u: m_u as f64,
        c,
        grid,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeDecayRow {
    pub n: i64,
    pub reps: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub predicted: f64,
    /// Exponential rate `α (c - c_used)` of the predicted bound.
    pub rate: f64,
    pub flag: bool,
}

pub const TIME_DECAY_CSV_HEADER: &str = "n,reps,estimate,ci_low,ci_high,predicted,rate,flag";

pub fn write_time_decay_csv<W: Write>(mut out: W, rows: &[TimeDecayRow]) -> std::io::Result<()> {
    writeln!(out, "{TIME_DECAY_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n, r.reps, r.estimate, r.ci_low, r.ci_high, r.predicted, r.rate, r.flag
        )?;
    }
    Ok(())
}

/// Monte Carlo estimate of `P(t(0, H_n(u)) ≤ c_used n)` for each `n`, against
/// the bound implied by `consts`. Targets unreachable in the window count as
/// the event not occurring.
pub fn verify_time_decay(
    g: &GraphSpec,
    consts: &DecayConstants,
    u: &Direction,
    ns: &[i64],
    reps: u64,
    seed: u64,
    c_used: f64,
) -> Result<Vec<TimeDecayRow>> {
    if u.coords() != consts.u.as_slice() {
        return Err(Error::InvalidArgument("direction differs from the one the constants were built for".into()));
    }
    if !(0.0..consts.c).contains(&c_used) {
        return Err(Error::InvalidArgument(format!("c_used = {c_used} must lie in [0, {})", consts.c)));
    }
    let base = FieldParams::new(seed, consts.p)?;
    ns.iter()
        .map(|&n| {
            if n <= 0 {
                return Err(Error::InvalidArgument(format!("n = {n} must be positive")));
            }
            let budget = (c_used * n as f64).floor() as u32;
            let window = Window::for_scale(n, crate::cluster::DEFAULT_WINDOW_FACTOR);
            let hits: u64 = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let field = Field::new(&base.replica(r));
                    let (t, _) = times_to_levels(g, &field, u.coords(), &[n], &window, Some(budget));
                    u64::from(t[0].is_some_and(|t| t <= budget))
                })
                .sum();
            let (ci_low, ci_high) = wilson(hits, reps, Z95);
            let predicted = consts.predicted_bound(c_used, n);
            Ok(TimeDecayRow {
                n,
                reps,
                estimate: hits as f64 / reps as f64,
                ci_low,
                ci_high,
                predicted,
                rate: consts.alpha * (consts.c - c_used),
                flag: ci_low > predicted,
            })
        })
        .collect()
}
