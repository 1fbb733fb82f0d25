//! Exploration of the oriented open cluster `C_+(x)`, directional extents and
//! survival estimates for `θ_u(p)` and `p_c(u)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldParams};
use crate::graph::{Direction, GraphSpec, Vertex, Window};
use crate::search::{bfs_cluster, Visit};
use crate::stats::{linear_fit, wilson, LinearFit, Z95};

/// Default box radius multiplier: survival at threshold `n` is evaluated in
/// the box of radius `4n`.
pub const DEFAULT_WINDOW_FACTOR: i64 = 4;
/// Default survival cutoff for critical-point brackets.
pub const DEFAULT_TAU: f64 = 0.05;
/// Bisection stops once the bracket is this narrow.
pub const PC_BRACKET_WIDTH: f64 = 0.005;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The cluster was fully enumerated inside the window.
    Exhausted,
    /// Some open edge of the cluster leaves the window.
    WindowHit,
    /// The vertex budget ran out first.
    BudgetHit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeExtent {
    pub u: Direction,
    pub extent: i64,
}

/// One exploration of `C_+(x0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub visited_count: usize,
    /// `max ⟨y - x0, u⟩` over visited `y`, per probe.
    pub extent: Vec<ProbeExtent>,
    pub termination: Termination,
}

impl ClusterReport {
    pub fn extent_of(&self, u: &Direction) -> Option<i64> {
        self.extent.iter().find(|e| e.u == *u).map(|e| e.extent)
    }
}

/// Breadth-first enumeration of the open cluster of `x0` restricted to
/// `window`, visiting at most `budget` vertices.
pub fn explore(
    g: &GraphSpec,
    params: &FieldParams,
    x0: &Vertex,
    window: &Window,
    budget: usize,
    probes: &[Direction],
) -> Result<ClusterReport> {
    window.check_explorable()?;
    if x0.dim() != g.dim() {
        return Err(Error::InvalidArgument(format!("x0 {x0} has wrong dimension")));
    }
    if !window.contains(x0) {
        return Err(Error::InvalidWindow(format!("x0 {x0} outside window")));
    }
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    check_probe_dims(g, probes)?;
    let field = Field::new(params);
    let mut extents = vec![0i64; probes.len()];
    let end = bfs_cluster(
        g,
        &field,
        *x0,
        window,
        budget,
        |y| {
            let rel = *y - *x0;
            for (e, u) in extents.iter_mut().zip(probes) {
                *e = (*e).max(rel.dot(u.coords()));
            }
            Visit::Continue
        },
        |_, _| Visit::Continue,
    );
    let termination = if end.budget_hit {
        Termination::BudgetHit
    } else if end.window_hit {
        Termination::WindowHit
    } else {
        Termination::Exhausted
    };
    Ok(ClusterReport {
        visited_count: end.visited,
        extent: probes
            .iter()
            .zip(extents)
            .map(|(&u, extent)| ProbeExtent { u, extent })
            .collect(),
        termination,
    })
}

fn check_probe_dims(g: &GraphSpec, probes: &[Direction]) -> Result<()> {
    match probes.iter().find(|u| u.dim() != g.dim()) {
        Some(u) => Err(Error::InvalidArgument(format!("probe {u} has wrong dimension"))),
        None => Ok(()),
    }
}

/// Survival estimate of `P_p(D_u(0) ≥ n)` at one `(p, n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub n: i64,
    pub reps: u64,
    pub successes: u64,
    pub theta_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Replicas that left the box before reaching the target level; they
    /// count as failures.
    pub boundary_hits: u64,
}

impl SweepPoint {
    fn new(p: f64, n: i64, reps: u64, successes: u64, boundary_hits: u64) -> Self {
        let (ci_low, ci_high) = wilson(successes, reps, Z95);
        Self {
            p,
            n,
            reps,
            successes,
            theta_hat: if reps == 0 { 0.0 } else { successes as f64 / reps as f64 },
            ci_low,
            ci_high,
            boundary_hits,
        }
    }

    pub fn boundary_flag_rate(&self) -> f64 {
        if self.reps == 0 {
            0.0
        } else {
            self.boundary_hits as f64 / self.reps as f64
        }
    }
}

pub const SWEEP_CSV_HEADER: &str = "p,n,reps,successes,theta_hat,ci_low,ci_high,boundary_flag_rate";

pub fn write_sweep_csv<W: Write>(mut out: W, points: &[SweepPoint]) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for s in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.p,
            s.n,
            s.reps,
            s.successes,
            s.theta_hat,
            s.ci_low,
            s.ci_high,
            s.boundary_flag_rate()
        )?;
    }
    Ok(())
}

/// Per-level survival counts from one batch of replicas: `counts[m - 1]` is
/// the number of replicas with `D_u(0) ≥ m`, for `m = 1..=n_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtentProfile {
    pub p: f64,
    pub u: Direction,
    pub n_max: i64,
    pub reps: u64,
    pub counts: Vec<u64>,
    pub boundary_hits: u64,
}

impl ExtentProfile {
    /// Survival point at level `n ≤ n_max`.
    pub fn point(&self, n: i64) -> SweepPoint {
        assert!(1 <= n && n <= self.n_max, "level {n} outside 1..={}", self.n_max);
        SweepPoint::new(
            self.p,
            n,
            self.reps,
            self.counts[(n - 1) as usize],
            self.boundary_hits,
        )
    }

    /// Log-linear fit of `θ̂_m` against `m` over the resolved levels, those
    /// with at least `min_successes` surviving replicas.
    pub fn decay_fit(&self, min_successes: u64) -> DecayFit {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c >= min_successes && c > 0)
            .map(|(i, &c)| ((i + 1) as f64, (c as f64 / self.reps as f64).ln()))
            .unzip();
        DecayFit {
            resolved_levels: xs.len(),
            fit: linear_fit(&xs, &ys),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub resolved_levels: usize,
    pub fit: Option<LinearFit>,
}

fn check_reachable_level(u: &Direction, n: i64, window: &Window) -> Result<()> {
    window.check_explorable()?;
    if n < 1 {
        return Err(Error::InvalidArgument(format!("threshold n = {n} must be >= 1")));
    }
    let r = window.radius().expect("explorable windows have a radius");
    if r.saturating_mul(u.norm_l1()) < n {
        return Err(Error::InvalidWindow(format!(
            "box radius {r} cannot reach level {n} in direction {u}"
        )));
    }
    Ok(())
}

/// Extent of the origin's cluster in direction `u`, capped at `n_max`, and
/// whether the exploration hit the window before reaching `n_max`.
pub(crate) fn replica_extent(
    g: &GraphSpec,
    field: &Field,
    u: &Direction,
    n_max: i64,
    window: &Window,
) -> (i64, bool) {
    let mut best = 0i64;
    let end = bfs_cluster(
        g,
        field,
        g.origin(),
        window,
        usize::MAX,
        |y| {
            best = best.max(y.dot(u.coords()));
            if best >= n_max {
                Visit::Stop
            } else {
                Visit::Continue
            }
        },
        |_, _| Visit::Continue,
    );
    (best.min(n_max), best < n_max && end.window_hit)
}

/// Survival counts at every level `1..=n_max` from `reps` replicas; replica
/// `r` uses seed `replica_seed(seed, r)`.
pub fn extent_profile(
    g: &GraphSpec,
    u: &Direction,
    p: f64,
    n_max: i64,
    window: &Window,
    reps: u64,
    seed: u64,
) -> Result<ExtentProfile> {
    check_probe_dims(g, std::slice::from_ref(u))?;
    check_reachable_level(u, n_max, window)?;
    let base = FieldParams::new(seed, p)?;
    let outcomes: Vec<(i64, bool)> = (0..reps)
        .into_par_iter()
        .map(|r| replica_extent(g, &Field::new(&base.replica(r)), u, n_max, window))
        .collect();
    let mut counts = vec![0u64; n_max as usize];
    let mut boundary_hits = 0;
    for (extent, hit) in outcomes {
        for c in counts.iter_mut().take(extent as usize) {
            *c += 1;
        }
        boundary_hits += u64::from(hit);
    }
    Ok(ExtentProfile {
        p,
        u: *u,
        n_max,
        reps,
        counts,
        boundary_hits,
    })
}

/// Estimate `P_p(D_u(0) ≥ n)` with a Wilson 95% interval.
pub fn directional_survival(
    g: &GraphSpec,
    u: &Direction,
    p: f64,
    n: i64,
    window: &Window,
    reps: u64,
    seed: u64,
) -> Result<SweepPoint> {
    Ok(extent_profile(g, u, p, n, window, reps, seed)?.point(n))
}

/// Bisection parameters for [`estimate_pc`].
#[derive(Clone, Debug, PartialEq)]
pub struct PcSearch {
    pub u: Direction,
    pub n: i64,
    pub tau: f64,
    pub reps: u64,
    pub seed: u64,
    pub bracket: (f64, f64),
    pub window_factor: i64,
}

impl PcSearch {
    pub fn new(u: Direction, n: i64, bracket: (f64, f64)) -> Self {
        Self {
            u,
            n,
            tau: DEFAULT_TAU,
            reps: 400,
            seed: 0,
            bracket,
            window_factor: DEFAULT_WINDOW_FACTOR,
        }
    }
}

/// Empirical bracket `[p_lo, p_hi]` around the survival cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcEstimate {
    pub u: Direction,
    pub n: i64,
    pub tau: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    pub reps: u64,
    /// Set when bisection stopped at a point whose interval straddled `tau`
    /// even after quadrupling the replica count.
    pub indecisive: bool,
    pub evaluations: Vec<SweepPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Above,
    Below,
    Undecided,
}

fn classify(s: &SweepPoint, tau: f64) -> Side {
    if s.ci_low > tau {
        Side::Above
    } else if s.ci_high < tau {
        Side::Below
    } else {
        Side::Undecided
    }
}

/// Bisection on `p` for the point where `P_p(D_u(0) ≥ n)` crosses `tau`.
///
/// A point is decided when its Wilson interval lies entirely on one side of
/// `tau`; otherwise it is re-run once with four times the replicas, and if
/// still undecided the search stops and reports the last decided bracket.
pub fn estimate_pc(g: &GraphSpec, search: &PcSearch) -> Result<PcEstimate> {
    let (lo0, hi0) = search.bracket;
    if !(0.0 <= lo0 && lo0 < hi0 && hi0 <= 1.0) {
        return Err(Error::InvalidBracket(format!("({lo0}, {hi0}) is not a bracket in [0,1]")));
    }
    if !(search.tau > 0.0 && search.tau < 1.0) {
        return Err(Error::InvalidArgument(format!("tau = {} outside (0,1)", search.tau)));
    }
    let window = Window::for_scale(search.n, search.window_factor);
    let mut evaluations = Vec::new();
    let mut decide = |p: f64| -> Result<Side> {
        let first = directional_survival(g, &search.u, p, search.n, &window, search.reps, search.seed)?;
        let side = classify(&first, search.tau);
        evaluations.push(first);
        if side != Side::Undecided {
            return Ok(side);
        }
        let second = directional_survival(
            g,
            &search.u,
            p,
            search.n,
            &window,
            search.reps * 4,
            search.seed,
        )?;
        let side = classify(&second, search.tau);
        evaluations.push(second);
        Ok(side)
    };
    if decide(lo0)? != Side::Below {
        return Err(Error::InvalidBracket(format!(
            "survival at p = {lo0} is not below tau = {}",
            search.tau
        )));
    }
    if decide(hi0)? != Side::Above {
        return Err(Error::InvalidBracket(format!(
            "survival at p = {hi0} is not above tau = {}",
            search.tau
        )));
    }
    let (mut lo, mut hi) = (lo0, hi0);
    let mut indecisive = false;
    while hi - lo > PC_BRACKET_WIDTH {
        let mid = 0.5 * (lo + hi);
        match decide(mid)? {
            Side::Above => hi = mid,
            Side::Below => lo = mid,
            Side::Undecided => {
                indecisive = true;
                break;
            }
        }
    }
    Ok(PcEstimate {
        u: search.u,
        n: search.n,
        tau: search.tau,
        p_lo: lo,
        p_hi: hi,
        reps: search.reps,
        indecisive,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(d: usize, i: usize) -> Direction {
        Direction::axis(d, i, false)
    }

    #[test]
    fn closed_field_gives_singleton() {
        let g = GraphSpec::example_model(2).unwrap();
        let params = FieldParams::new(3, 0.0).unwrap();
        let probes = [e(2, 0), e(2, 1), Direction::axis(2, 1, true)];
        let r = explore(&g, &params, &g.origin(), &Window::boxed(10), 1000, &probes).unwrap();
        assert_eq!(r.visited_count, 1);
        assert!(r.extent.iter().all(|p| p.extent == 0));
        assert_eq!(r.termination, Termination::Exhausted);
    }

    #[test]
    fn open_field_reaches_boundary() {
        let g = GraphSpec::example_model(1).unwrap();
        let params = FieldParams::new(3, 1.0).unwrap();
        let r = explore(&g, &params, &g.origin(), &Window::boxed(10), usize::MAX, &[e(2, 1)]).unwrap();
        assert_eq!(r.extent_of(&e(2, 1)), Some(10));
        assert_eq!(r.termination, Termination::WindowHit);
        assert_eq!(r.visited_count, 21 * 21);
    }

    #[test]
    fn budget_termination() {
        let g = GraphSpec::example_model(1).unwrap();
        let params = FieldParams::new(3, 1.0).unwrap();
        let r = explore(&g, &params, &g.origin(), &Window::boxed(10), 7, &[]).unwrap();
        assert_eq!(r.termination, Termination::BudgetHit);
        assert_eq!(r.visited_count, 7);
    }

    #[test]
    fn explore_validates_inputs() {
        let g = GraphSpec::example_model(1).unwrap();
        let params = FieldParams::new(3, 0.5).unwrap();
        let outside = Vertex::new(&[20, 0]);
        assert!(matches!(
            explore(&g, &params, &outside, &Window::boxed(10), 10, &[]),
            Err(Error::InvalidWindow(_))
        ));
        assert!(explore(&g, &params, &g.origin(), &Window::boxed(10), 0, &[]).is_err());
    }

    #[test]
    fn survival_at_p_one_is_certain() {
        let g = GraphSpec::example_model(2).unwrap();
        let s = directional_survival(&g, &e(2, 1), 1.0, 12, &Window::for_scale(12, 4), 50, 1).unwrap();
        assert_eq!(s.successes, 50);
        assert_eq!(s.theta_hat, 1.0);
    }

    #[test]
    fn small_window_is_rejected() {
        let g = GraphSpec::oriented_line();
        let r = directional_survival(&g, &e(1, 0), 0.5, 10, &Window::boxed(5), 10, 1);
        assert!(matches!(r, Err(Error::InvalidWindow(_))));
    }

    #[test]
    fn one_way_line_geometric_tail() {
        // P(D ≥ n) = p^n on the one-way line.
        let g = GraphSpec::oriented_line();
        let prof = extent_profile(&g, &e(1, 0), 0.5, 12, &Window::boxed(48), 10_000, 17).unwrap();
        for n in 1..=12 {
            let pt = prof.point(n);
            let exact = 0.5f64.powi(n as i32);
            let (lo, hi) = wilson(pt.successes, pt.reps, 4.0);
            assert!(lo <= exact && exact <= hi, "n={n}: {} vs {exact}", pt.theta_hat);
        }
    }

    #[test]
    fn bracket_must_straddle() {
        let g = GraphSpec::oriented_line();
        let mut s = PcSearch::new(e(1, 0), 16, (0.2, 0.3));
        s.reps = 200;
        assert!(matches!(estimate_pc(&g, &s), Err(Error::InvalidBracket(_))));
    }

    #[test]
    fn one_way_line_pc_bracket() {
        // survival p^64 crosses 0.05 at p = 0.05^(1/64) ≈ 0.9543
        let g = GraphSpec::oriented_line();
        let mut s = PcSearch::new(e(1, 0), 64, (0.5, 1.0));
        s.reps = 2000;
        s.seed = 4;
        let est = estimate_pc(&g, &s).unwrap();
        assert!(est.p_hi >= 0.95, "{est:?}");
        assert!(est.p_lo < est.p_hi);
    }
}
