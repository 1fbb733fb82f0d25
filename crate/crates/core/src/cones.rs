//! Polyhedral cones with exact integer arithmetic, and the empirical cones
//! attached to the time constant: recession cone `0+(A_p) = {μ_p = 0}`, barrier
//! cone `Bar(A_p)` (its polar), and the bounded-growth set `BG(p)`.
//!
//! A [`Cone`] always carries both a generator and an inequality
//! representation, kept in sync by double-description conversion.

use std::collections::BTreeSet;
use std::io::Write;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cluster::{extent_profile, DEFAULT_WINDOW_FACTOR};
use crate::error::{Error, Result};
use crate::fpp::{estimate_mu, LadderConfig, MuEstimate, ZERO_TOL};
use crate::graph::{Direction, GraphSpec, Window};

/// Largest dimension supported by the exact cone conversion.
pub const MAX_CONE_DIM: usize = 4;

type IVec = Vec<BigInt>;

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Divide by the gcd of the entries; `None` for the zero vector.
fn primitive(v: IVec) -> Option<IVec> {
    let g = v.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
    if g.is_zero() {
        return None;
    }
    Some(v.into_iter().map(|x| x / &g).collect())
}

/// `a·x - b·y`.
fn combine(a: &BigInt, x: &[BigInt], b: &BigInt, y: &[BigInt]) -> IVec {
    x.iter().zip(y).map(|(xi, yi)| a * xi - b * yi).collect()
}

fn neg(v: &[BigInt]) -> IVec {
    v.iter().map(|x| -x).collect()
}

/// Generators of `{x : ⟨a, x⟩ ≤ 0 for all a in ineqs}`: extreme rays plus
/// both orientations of a lineality basis.
fn double_description(dim: usize, ineqs: &[IVec]) -> Vec<IVec> {
    let mut lines: Vec<IVec> = (0..dim)
        .map(|i| (0..dim).map(|j| BigInt::from(u8::from(i == j))).collect())
        .collect();
    // Each ray keeps the indices of processed constraints it makes tight.
    let mut rays: Vec<(IVec, BTreeSet<usize>)> = Vec::new();
    for (idx, a) in ineqs.iter().enumerate() {
        if let Some(pos) = lines.iter().position(|l| !dot(a, l).is_zero()) {
            let l = lines.swap_remove(pos);
            let s = dot(a, &l);
            for other in lines.iter_mut() {
                let t = dot(a, other);
                if !t.is_zero() {
                    *other = primitive(combine(&s, other, &t, &l)).expect("independent lines");
                }
            }
            for (r, tight) in rays.iter_mut() {
                let t = dot(a, r);
                let mut nr = combine(&s, r, &t, &l);
                if s.is_negative() {
                    nr = neg(&nr);
                }
                *r = primitive(nr).expect("rays stay independent of lines");
                tight.insert(idx);
            }
            // Lines are orthogonal to every constraint processed so far.
            let r0 = if s.is_negative() { l } else { neg(&l) };
            rays.push((r0, (0..idx).collect()));
            continue;
        }
        let vals: Vec<BigInt> = rays.iter().map(|(r, _)| dot(a, r)).collect();
        let mut next = Vec::new();
        for (i, (r, tight)) in rays.iter().enumerate() {
            if vals[i].is_zero() {
                let mut t = tight.clone();
                t.insert(idx);
                next.push((r.clone(), t));
            } else if vals[i].is_negative() {
                next.push((r.clone(), tight.clone()));
            }
        }
        for i in 0..rays.len() {
            if !vals[i].is_positive() {
                continue;
            }
            for j in 0..rays.len() {
                if !vals[j].is_negative() {
                    continue;
                }
                let common: BTreeSet<usize> = rays[i].1.intersection(&rays[j].1).copied().collect();
                let adjacent = rays
                    .iter()
                    .enumerate()
                    .all(|(k, (_, t))| k == i || k == j || !common.is_subset(t));
                if !adjacent {
                    continue;
                }
                let r = combine(&vals[i], &rays[j].0, &vals[j], &rays[i].0);
                if let Some(r) = primitive(r) {
                    let mut t = common;
                    t.insert(idx);
                    next.push((r, t));
                }
            }
        }
        next.sort_by(|a, b| a.0.cmp(&b.0));
        next.dedup_by(|a, b| a.0 == b.0);
        rays = next;
    }
    let mut out: Vec<IVec> = rays.into_iter().map(|(r, _)| r).collect();
    for l in lines {
        out.push(neg(&l));
        out.push(l);
    }
    out.sort();
    out.dedup();
    out
}

/// Closed polyhedral cone in `R^d`, `d ≤ 4`.
#[derive(Clone, Debug)]
pub struct Cone {
    dim: usize,
    generators: Vec<IVec>,
    inequalities: Vec<IVec>,
}

fn to_integer_rows(dim: usize, rows: &[Vec<BigRational>]) -> Result<Vec<IVec>> {
    rows.iter()
        .map(|row| {
            if row.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "vector of length {} in a cone of dimension {dim}",
                    row.len()
                )));
            }
            let lcm = row.iter().fold(BigInt::one(), |l, q| l.lcm(q.denom()));
            Ok(row.iter().map(|q| (q * &lcm).to_integer()).collect())
        })
        .collect()
}

fn check_cone_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_CONE_DIM {
        return Err(Error::InvalidArgument(format!(
            "cone dimension {dim} outside 1..={MAX_CONE_DIM}"
        )));
    }
    Ok(())
}

impl Cone {
    fn build(dim: usize, generators: Vec<IVec>) -> Self {
        let inequalities = double_description(dim, &generators);
        let generators = double_description(dim, &inequalities);
        Self {
            dim,
            generators,
            inequalities,
        }
    }

    /// Positive hull of integer generators.
    pub fn from_generators(dim: usize, gens: &[Vec<i64>]) -> Result<Self> {
        let rows: Vec<Vec<BigRational>> = gens
            .iter()
            .map(|g| g.iter().map(|&x| BigRational::from_integer(x.into())).collect())
            .collect();
        Self::from_rational_generators(dim, &rows)
    }

    pub fn from_rational_generators(dim: usize, gens: &[Vec<BigRational>]) -> Result<Self> {
        check_cone_dim(dim)?;
        let gens = to_integer_rows(dim, gens)?;
        Ok(Self::build(dim, gens.into_iter().filter_map(primitive).collect()))
    }

    /// `{x : ⟨a, x⟩ ≤ 0 for every row a}`.
    pub fn from_inequalities(dim: usize, ineqs: &[Vec<i64>]) -> Result<Self> {
        let rows: Vec<Vec<BigRational>> = ineqs
            .iter()
            .map(|g| g.iter().map(|&x| BigRational::from_integer(x.into())).collect())
            .collect();
        Self::from_rational_inequalities(dim, &rows)
    }

    pub fn from_rational_inequalities(dim: usize, ineqs: &[Vec<BigRational>]) -> Result<Self> {
        check_cone_dim(dim)?;
        let ineqs: Vec<IVec> = to_integer_rows(dim, ineqs)?.into_iter().filter_map(primitive).collect();
        let generators = double_description(dim, &ineqs);
        let inequalities = double_description(dim, &generators);
        Ok(Self {
            dim,
            generators,
            inequalities,
        })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        check_cone_dim(dim)?;
        Ok(Self::build(dim, Vec::new()))
    }

    pub fn full(dim: usize) -> Result<Self> {
        Self::from_inequalities(dim, &[])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[Vec<BigInt>] {
        &self.generators
    }

    pub fn inequalities(&self) -> &[Vec<BigInt>] {
        &self.inequalities
    }

    /// `C° = {u : ⟨x, u⟩ ≤ 0 for all x ∈ C}`, recomputed by conversion.
    pub fn polar(&self) -> Self {
        let generators = double_description(self.dim, &self.generators);
        let inequalities = double_description(self.dim, &generators);
        Self {
            dim: self.dim,
            generators,
            inequalities,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.inequalities.is_empty()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        let x: IVec = x.iter().map(|&v| v.into()).collect();
        self.contains_big(&x)
    }

    fn contains_big(&self, x: &[BigInt]) -> bool {
        x.len() == self.dim && self.inequalities.iter().all(|a| !dot(a, x).is_positive())
    }

    /// Strict inequality in every facet; empty for lower-dimensional cones.
    pub fn interior_contains(&self, x: &[i64]) -> bool {
        let x: IVec = x.iter().map(|&v| v.into()).collect();
        x.len() == self.dim && self.inequalities.iter().all(|a| dot(a, &x).is_negative())
    }

    pub fn is_subset_of(&self, other: &Cone) -> bool {
        self.dim == other.dim && self.generators.iter().all(|g| other.contains_big(g))
    }

    pub fn same_set(&self, other: &Cone) -> bool {
        self.is_subset_of(other) && other.is_subset_of(self)
    }

    pub fn intersection(&self, other: &Cone) -> Result<Cone> {
        if self.dim != other.dim {
            return Err(Error::InvalidArgument("cones of different dimensions".into()));
        }
        let ineqs: Vec<IVec> = self.inequalities.iter().chain(&other.inequalities).cloned().collect();
        let generators = double_description(self.dim, &ineqs);
        let inequalities = double_description(self.dim, &generators);
        Ok(Cone {
            dim: self.dim,
            generators,
            inequalities,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows = |vs: &[IVec]| -> Vec<Vec<[serde_json::Value; 2]>> {
            vs.iter()
                .map(|v| v.iter().map(|x| [big_json(x), json!(1)]).collect())
                .collect()
        };
        json!({
            "generators": rows(&self.generators),
            "inequalities": rows(&self.inequalities),
        })
    }

    /// Reads `{"generators": ...}` or `{"inequalities": ...}`; entries are
    /// integers or `[num, den]` pairs. Generators take precedence.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let parse_rows = |key: &str| -> Result<Option<Vec<Vec<BigRational>>>> {
            let Some(rows) = value.get(key) else { return Ok(None) };
            let rows = rows
                .as_array()
                .ok_or_else(|| Error::InvalidArgument(format!("{key} must be an array")))?;
            rows.iter()
                .map(|row| {
                    row.as_array()
                        .ok_or_else(|| Error::InvalidArgument("rows must be arrays".into()))?
                        .iter()
                        .map(parse_rational)
                        .collect()
                })
                .collect::<Result<Vec<_>>>()
                .map(Some)
        };
        let dim_of = |rows: &[Vec<BigRational>]| {
            rows.first()
                .map(|r| r.len())
                .or_else(|| value.get("dim").and_then(|d| d.as_u64()).map(|d| d as usize))
                .ok_or_else(|| Error::InvalidArgument("cannot infer dimension of an empty cone; add \"dim\"".into()))
        };
        if let Some(gens) = parse_rows("generators")? {
            return Self::from_rational_generators(dim_of(&gens)?, &gens);
        }
        if let Some(ineqs) = parse_rows("inequalities")? {
            return Self::from_rational_inequalities(dim_of(&ineqs)?, &ineqs);
        }
        Err(Error::InvalidArgument("cone JSON needs generators or inequalities".into()))
    }
}

fn big_json(x: &BigInt) -> serde_json::Value {
    match i64::try_from(x) {
        Ok(v) => json!(v),
        Err(_) => json!(x.to_string()),
    }
}

fn parse_big(v: &serde_json::Value) -> Result<BigInt> {
    if let Some(i) = v.as_i64() {
        return Ok(i.into());
    }
    v.as_str()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidArgument(format!("not an integer: {v}")))
}

fn parse_rational(v: &serde_json::Value) -> Result<BigRational> {
    if let Some(pair) = v.as_array() {
        if pair.len() != 2 {
            return Err(Error::InvalidArgument(format!("rational must be [num, den]: {v}")));
        }
        let den = parse_big(&pair[1])?;
        if den.is_zero() {
            return Err(Error::InvalidArgument("zero denominator".into()));
        }
        return Ok(BigRational::new(parse_big(&pair[0])?, den));
    }
    Ok(BigRational::from_integer(parse_big(v)?))
}

/// The 16 default probe rays for `d = 2`: primitive vectors with coordinates
/// in `{-2, ..., 2}`, ordered by angle from `e1`.
pub fn default_probe_rays() -> Vec<Vec<i64>> {
    let mut rays: Vec<Vec<i64>> = Vec::new();
    for a in -2i64..=2 {
        for b in -2i64..=2 {
            if (a, b) != (0, 0) && a.gcd(&b) == 1 {
                rays.push(vec![a, b]);
            }
        }
    }
    rays.sort_by(|x, y| {
        let ax = (x[1] as f64).atan2(x[0] as f64).rem_euclid(std::f64::consts::TAU);
        let ay = (y[1] as f64).atan2(y[0] as f64).rem_euclid(std::f64::consts::TAU);
        ax.total_cmp(&ay)
    });
    rays
}

/// Sampled directional time constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeApprox {
    pub p: f64,
    pub rays: Vec<MuEstimate>,
    pub zero_tol: f64,
    /// The rays do not positively span `R^d`, or some estimate was invalid.
    pub partial: bool,
}

impl ShapeApprox {
    pub fn zero_rays(&self) -> Vec<Vec<i64>> {
        self.rays.iter().filter(|m| m.is_zero()).map(|m| m.x.clone()).collect()
    }
}

/// `estimate_mu` along every probe ray.
pub fn sample_shape(g: &GraphSpec, p: f64, rays: &[Vec<i64>], cfg: &LadderConfig) -> Result<ShapeApprox> {
    if rays.is_empty() {
        return Err(Error::InvalidArgument("no probe rays".into()));
    }
    let estimates = rays
        .iter()
        .map(|x| estimate_mu(g, p, x, cfg))
        .collect::<Result<Vec<_>>>()?;
    let spans = g.dim() <= MAX_CONE_DIM && Cone::from_generators(g.dim(), rays)?.is_full();
    let partial = !spans || estimates.iter().any(|e| !e.ladder.valid);
    Ok(ShapeApprox {
        p,
        rays: estimates,
        zero_tol: ZERO_TOL,
        partial,
    })
}

/// Positive hull of the rays whose time constant is declared zero.
pub fn recession_cone(shape: &ShapeApprox) -> Result<Cone> {
    let dim = shape
        .rays
        .first()
        .map(|m| m.x.len())
        .ok_or_else(|| Error::InvalidArgument("empty shape".into()))?;
    Cone::from_generators(dim, &shape.zero_rays())
}

/// Polar of the recession cone.
pub fn barrier_cone(shape: &ShapeApprox) -> Result<Cone> {
    Ok(recession_cone(shape)?.polar())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    BoundedEvidence,
    UnboundedEvidence,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::BoundedEvidence => "bounded-evidence",
            Verdict::UnboundedEvidence => "unbounded-evidence",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BgThresholds {
    /// Unbounded evidence when the survival interval lies above this.
    pub hi: f64,
    /// Bounded evidence requires the survival interval below this.
    pub lo: f64,
    /// Minimum R² of the log-linear decay fit.
    pub r2: f64,
    /// Levels with fewer surviving replicas are left out of the fit.
    pub min_successes: u64,
    /// Fewer resolved levels than this means the tail is below resolution.
    pub min_levels: usize,
}

impl Default for BgThresholds {
    fn default() -> Self {
        Self {
            hi: 0.02,
            lo: 0.005,
            r2: 0.9,
            min_successes: 10,
            min_levels: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BgProbe {
    pub u: Direction,
    pub p: f64,
    pub n: i64,
    pub reps: u64,
    pub theta_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resolved_levels: usize,
    pub r2: Option<f64>,
    pub verdict: Verdict,
}

/// Survival evidence on whether `sup ⟨y, u⟩` over `C_+(0)` is bounded.
///
/// Unbounded evidence: the Wilson interval of `θ̂_n` lies above `hi`. Bounded
/// evidence: it lies below `lo` and the survival levels with at least
/// `min_successes` replicas either fit a log-linear decay with `R² ≥ r2`, or
/// are too few to fit because the tail dies out immediately.
pub fn bg_probe(
    g: &GraphSpec,
    p: f64,
    u: &Direction,
    n: i64,
    window: &Window,
    reps: u64,
    seed: u64,
    thresholds: &BgThresholds,
) -> Result<BgProbe> {
    let profile = extent_profile(g, u, p, n, window, reps, seed)?;
    let point = profile.point(n);
    let fit = profile.decay_fit(thresholds.min_successes);
    let r2 = fit.fit.as_ref().map(|f| f.r2);
    let decays = if fit.resolved_levels < thresholds.min_levels {
        true
    } else {
        r2.is_some_and(|r| r >= thresholds.r2)
    };
    let verdict = if point.ci_low > thresholds.hi {
        Verdict::UnboundedEvidence
    } else if point.ci_high < thresholds.lo && decays {
        Verdict::BoundedEvidence
    } else {
        Verdict::Inconclusive
    };
    Ok(BgProbe {
        u: *u,
        p,
        n,
        reps,
        theta_hat: point.theta_hat,
        ci_low: point.ci_low,
        ci_high: point.ci_high,
        resolved_levels: fit.resolved_levels,
        r2,
        verdict,
    })
}

/// Settings for [`conjecture_scan`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub mu: LadderConfig,
    /// Survival level for the bounded-growth probes.
    pub bg_n: i64,
    pub bg_reps: u64,
    pub bg_window_factor: i64,
    pub thresholds: BgThresholds,
}

impl ScanConfig {
    pub fn new(mu: LadderConfig, bg_n: i64, bg_reps: u64) -> Self {
        Self {
            mu,
            bg_n,
            bg_reps,
            bg_window_factor: DEFAULT_WINDOW_FACTOR,
            thresholds: BgThresholds::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub ray: Vec<i64>,
    pub in_int_bar: bool,
    pub in_bar: bool,
    pub bg_at_p: Verdict,
    pub bg_at_q: Verdict,
    /// Evidence against `int(Bar) ⊂ BG(p)` or `BG(q) ⊂ Bar`.
    pub flag: bool,
}

#[derive(Clone, Debug)]
pub struct ScanReport {
    pub p: f64,
    pub q: f64,
    pub shape: ShapeApprox,
    pub recession: Cone,
    pub barrier: Cone,
    pub rows: Vec<ScanRow>,
}

impl ScanReport {
    pub fn flags(&self) -> usize {
        self.rows.iter().filter(|r| r.flag).count()
    }
}

pub const SCAN_CSV_HEADER: &str = "ray,in_int_bar,bg_at_p,bg_at_q,flag";

pub fn write_scan_csv<W: Write>(mut out: W, report: &ScanReport) -> std::io::Result<()> {
    writeln!(out, "# zero_tol = {}", report.shape.zero_tol)?;
    writeln!(out, "{SCAN_CSV_HEADER}")?;
    for r in &report.rows {
        let ray: Vec<String> = r.ray.iter().map(|x| x.to_string()).collect();
        writeln!(
            out,
            "\"({})\",{},{},{},{}",
            ray.join(","),
            r.in_int_bar,
            r.bg_at_p,
            r.bg_at_q,
            r.flag
        )?;
    }
    Ok(())
}

/// Compare the sampled barrier cone at `p` with bounded-growth evidence at
/// `p` and at `q > p`, one probe ray at a time.
pub fn conjecture_scan(
    g: &GraphSpec,
    p: f64,
    q: f64,
    probe_rays: &[Vec<i64>],
    cfg: &ScanConfig,
) -> Result<ScanReport> {
    if q <= p {
        return Err(Error::InvalidArgument(format!("need q > p, got p = {p}, q = {q}")));
    }
    let shape = sample_shape(g, p, probe_rays, &cfg.mu)?;
    let recession = recession_cone(&shape)?;
    let barrier = recession.polar();
    let window = Window::for_scale(cfg.bg_n, cfg.bg_window_factor);
    let rows = probe_rays
        .iter()
        .enumerate()
        .map(|(i, ray)| {
            let u = Direction::new(ray)?;
            let seed = cfg.mu.seed.wrapping_add(1 + i as u64);
            let at_p = bg_probe(g, p, &u, cfg.bg_n, &window, cfg.bg_reps, seed, &cfg.thresholds)?;
            let at_q = bg_probe(g, q, &u, cfg.bg_n, &window, cfg.bg_reps, seed, &cfg.thresholds)?;
            let in_int_bar = barrier.interior_contains(ray);
            let in_bar = barrier.contains(ray);
            let flag = (in_int_bar && at_p.verdict == Verdict::UnboundedEvidence)
                || (!in_bar && at_q.verdict == Verdict::BoundedEvidence);
            Ok(ScanRow {
                ray: ray.clone(),
                in_int_bar,
                in_bar,
                bg_at_p: at_p.verdict,
                bg_at_q: at_q.verdict,
                flag,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanReport {
        p,
        q,
        shape,
        recession,
        barrier,
        rows,
    })
}
