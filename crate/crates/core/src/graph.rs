//! The translation-invariant oriented graph `(Z^d, E)` with
//! `E = {(x, y) : y - x ∈ dirs}`, subadditive weights and exploration windows.
//!
//! Edges are never stored. An edge is identified by its tail and the index of
//! its direction in `dirs`; the declaration order of `dirs` is part of the
//! graph's identity because the random field is keyed on that index.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::Path;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// Largest admissible window radius.
pub const MAX_WINDOW_RADIUS: i64 = 1 << 31;

/// A point of Z^d, stored inline so that it is `Copy`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Vertex {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl Vertex {
    pub fn new(coords: &[i64]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "dimension {} outside 1..={MAX_DIM}",
            coords.len()
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Self {
            dim: coords.len() as u8,
            coords: c,
        }
    }

    pub fn origin(dim: usize) -> Self {
        Self::new(&vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn is_zero(&self) -> bool {
        self.coords().iter().all(|&c| c == 0)
    }

    pub fn dot(&self, other: &[i64]) -> i64 {
        self.coords().iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn norm_inf(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn scaled(&self, k: i64) -> Self {
        let mut out = *self;
        for c in &mut out.coords[..self.dim as usize] {
            *c *= k;
        }
        out
    }
}

impl std::ops::Add for Vertex {
    type Output = Vertex;
    fn add(mut self, rhs: Vertex) -> Vertex {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim as usize {
            self.coords[i] += rhs.coords[i];
        }
        self
    }
}

impl std::ops::Sub for Vertex {
    type Output = Vertex;
    fn sub(mut self, rhs: Vertex) -> Vertex {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim as usize {
            self.coords[i] -= rhs.coords[i];
        }
        self
    }
}

impl Hash for Vertex {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for &c in self.coords() {
            state.write_i64(c);
        }
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Serialize for Vertex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom("vertex dimension out of range"));
        }
        Ok(Vertex::new(&v))
    }
}

/// A nonzero integer direction reduced to gcd 1.
///
/// Events such as `D_u ≥ n` depend on `u` only through its ray, so probes are
/// normalized before use.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Direction(Vertex);

impl Direction {
    pub fn new(coords: &[i64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "direction dimension {} outside 1..={MAX_DIM}",
                coords.len()
            )));
        }
        let g = coords.iter().fold(0i64, |acc, &c| acc.gcd(&c));
        if g == 0 {
            return Err(Error::InvalidArgument("zero direction".into()));
        }
        let reduced: Vec<i64> = coords.iter().map(|c| c / g).collect();
        Ok(Self(Vertex::new(&reduced)))
    }

    /// The `i`-th unit vector, optionally negated.
    pub fn axis(dim: usize, i: usize, negative: bool) -> Self {
        let mut c = vec![0; dim];
        c[i] = if negative { -1 } else { 1 };
        Self(Vertex::new(&c))
    }

    pub fn vertex(&self) -> Vertex {
        self.0
    }

    pub fn coords(&self) -> &[i64] {
        self.0.coords()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn norm_l1(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).sum()
    }

    /// Parse `"0,-1"` style text.
    pub fn parse(text: &str) -> Result<Self> {
        let coords = parse_int_list(text)?;
        Self::new(&coords)
    }
}

impl fmt::Debug for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub(crate) fn parse_int_list(text: &str) -> Result<Vec<i64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map_err(|e| Error::InvalidArgument(format!("bad integer {t:?}: {e}")))
        })
        .collect()
}

/// The oriented graph: dimension and ordered direction set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphSpec {
    dim: usize,
    dirs: Vec<Vertex>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    d: usize,
    dirs: Vec<Vec<i64>>,
}

impl GraphSpec {
    /// Validate and build a graph. Rejects empty, zero or duplicate directions
    /// and dimension mismatches.
    pub fn new(dim: usize, dirs: &[Vec<i64>]) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidSpec(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        if dirs.is_empty() {
            return Err(Error::InvalidSpec("empty direction set".into()));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(dirs.len());
        for v in dirs {
            if v.len() != dim {
                return Err(Error::InvalidSpec(format!(
                    "direction {v:?} has length {}, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().all(|&c| c == 0) {
                return Err(Error::InvalidSpec("zero vector in direction set".into()));
            }
            if v.iter().any(|c| c.abs() > MAX_WINDOW_RADIUS) {
                return Err(Error::InvalidSpec(format!("direction {v:?} too long")));
            }
            if !seen.insert(v.clone()) {
                return Err(Error::InvalidSpec(format!("duplicate direction {v:?}")));
            }
            out.push(Vertex::new(v));
        }
        Ok(Self { dim, dirs: out })
    }

    /// `d = 2`, `dirs = {(0,-1)} ∪ {(k,1) : -M ≤ k ≤ M}` in that order.
    pub fn example_model(m: i64) -> Result<Self> {
        if m <= 0 {
            return Err(Error::InvalidSpec(format!("example model needs M >= 1, got {m}")));
        }
        let mut dirs = vec![vec![0, -1]];
        dirs.extend((-m..=m).map(|k| vec![k, 1]));
        Self::new(2, &dirs)
    }

    /// The one-way line `d = 1`, `dirs = {+1}`.
    pub fn oriented_line() -> Self {
        Self::new(1, &[vec![1]]).expect("valid")
    }

    /// The two-way line `d = 1`, `dirs = {+1, -1}`.
    pub fn bidirectional_line() -> Self {
        Self::new(1, &[vec![1], vec![-1]]).expect("valid")
    }

    /// Nearest-neighbour directions `±e_i` of Z^d.
    pub fn nearest_neighbour(dim: usize) -> Result<Self> {
        let mut dirs = Vec::new();
        for i in 0..dim {
            for s in [1, -1] {
                let mut v = vec![0; dim];
                v[i] = s;
                dirs.push(v);
            }
        }
        Self::new(dim, &dirs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dirs(&self) -> &[Vertex] {
        &self.dirs
    }

    pub fn degree(&self) -> usize {
        self.dirs.len()
    }

    pub fn origin(&self) -> Vertex {
        Vertex::origin(self.dim)
    }

    pub fn vertex(&self, coords: &[i64]) -> Result<Vertex> {
        if coords.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "vertex {coords:?} does not have dimension {}",
                self.dim
            )));
        }
        Ok(Vertex::new(coords))
    }

    /// `x + v` for every `v` in `dirs`, in declaration order.
    pub fn out_neighbors(&self, x: &Vertex) -> Vec<Vertex> {
        self.dirs.iter().map(|&v| *x + v).collect()
    }

    /// Head of the edge leaving `x` along direction `dir_index`.
    #[inline]
    pub fn head(&self, x: &Vertex, dir_index: usize) -> Vertex {
        *x + self.dirs[dir_index]
    }

    /// Truncated certificate that `dirs` generates Z^d as a semigroup: the
    /// closure of `{0}` under adding directions, without ever leaving the L∞
    /// ball of the given radius, covers that whole ball.
    pub fn generates_zd(&self, radius: i64) -> bool {
        if radius < 1 {
            return false;
        }
        let ball = Window::boxed(radius);
        let total = (2 * radius + 1).checked_pow(self.dim as u32);
        let origin = self.origin();
        let mut seen = HashSet::from([origin]);
        let mut queue = VecDeque::from([origin]);
        while let Some(x) = queue.pop_front() {
            for &v in &self.dirs {
                let y = x + v;
                if ball.contains(&y) && seen.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        total == Some(seen.len() as i64)
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            d: self.dim,
            dirs: self.dirs.iter().map(|v| v.coords().to_vec()).collect(),
        };
        serde_json::to_string(&file).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text)?;
        Self::new(file.d, &file.dirs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A rational linear form `x ↦ ⟨num, x⟩ / den`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearForm {
    num: Vec<i64>,
    den: i64,
}

impl LinearForm {
    pub fn new(num: Vec<i64>, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidArgument("zero denominator".into()));
        }
        let (num, den) = if den < 0 {
            (num.into_iter().map(|c| -c).collect(), -den)
        } else {
            (num, den)
        };
        Ok(Self { num, den })
    }

    pub fn integer(u: &[i64]) -> Self {
        Self {
            num: u.to_vec(),
            den: 1,
        }
    }

    pub fn numerator(&self) -> &[i64] {
        &self.num
    }

    pub fn denominator(&self) -> i64 {
        self.den
    }

    #[inline]
    fn dot_num(&self, x: &Vertex) -> i128 {
        self.num
            .iter()
            .zip(x.coords())
            .map(|(&a, &b)| a as i128 * b as i128)
            .sum()
    }

    pub fn eval(&self, x: &Vertex) -> Ratio<i128> {
        Ratio::new(self.dot_num(x), self.den as i128)
    }

    #[inline]
    fn le(&self, x: &Vertex, level: &Ratio<i128>) -> bool {
        // ⟨num,x⟩/den ≤ a/b  ⇔  ⟨num,x⟩·b ≤ a·den   (den, b > 0)
        self.dot_num(x) * level.denom() <= *level.numer() * self.den as i128
    }
}

/// A subadditive weight `Ψ : Z^d → Q`.
///
/// Only linear forms and maxima of finitely many linear forms are supported;
/// both are subadditive by construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubadditiveWeight {
    Linear(LinearForm),
    MaxOfLinear(Vec<LinearForm>),
}

impl SubadditiveWeight {
    /// `Ψ_u(x) = ⟨u, x⟩`.
    pub fn linear(u: &[i64]) -> Self {
        Self::Linear(LinearForm::integer(u))
    }

    pub fn max_of_linear(forms: Vec<LinearForm>) -> Result<Self> {
        if forms.is_empty() {
            return Err(Error::InvalidArgument("max of zero linear forms".into()));
        }
        Ok(Self::MaxOfLinear(forms))
    }

    pub fn eval(&self, x: &Vertex) -> Ratio<i128> {
        match self {
            Self::Linear(f) => f.eval(x),
            Self::MaxOfLinear(fs) => fs.iter().map(|f| f.eval(x)).max().expect("nonempty"),
        }
    }

    pub fn eval_f64(&self, x: &Vertex) -> f64 {
        let r = self.eval(x);
        *r.numer() as f64 / *r.denom() as f64
    }

    #[inline]
    pub fn le(&self, x: &Vertex, level: &Ratio<i128>) -> bool {
        match self {
            Self::Linear(f) => f.le(x, level),
            Self::MaxOfLinear(fs) => fs.iter().all(|f| f.le(x, level)),
        }
    }

    /// The linear form, when this weight is linear.
    pub fn as_linear(&self) -> Option<&LinearForm> {
        match self {
            Self::Linear(f) => Some(f),
            Self::MaxOfLinear(_) => None,
        }
    }
}

/// Psi-ball constraint `{x : Ψ(x) ≤ level}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sublevel {
    pub psi: SubadditiveWeight,
    pub level: Ratio<i128>,
}

/// A membership region of Z^d used to bound explorations.
///
/// Either an L∞ box centred at the origin, a Ψ-sublevel set `Λ_n`, or their
/// intersection. Only bounded windows can be explored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    radius: Option<i64>,
    sublevel: Option<Sublevel>,
}

impl Window {
    pub fn boxed(radius: i64) -> Self {
        Self {
            radius: Some(radius),
            sublevel: None,
        }
    }

    /// `Λ_n = {x : Ψ(x) ≤ n}`.
    pub fn psi_ball(psi: SubadditiveWeight, level: i64) -> Self {
        Self {
            radius: None,
            sublevel: Some(Sublevel {
                psi,
                level: Ratio::from_integer(level as i128),
            }),
        }
    }

    /// Intersect with the box of the given radius.
    pub fn truncated(mut self, radius: i64) -> Self {
        self.radius = Some(self.radius.map_or(radius, |r| r.min(radius)));
        self
    }

    /// Box of radius `factor * n` used for an exploration at scale `n`.
    pub fn for_scale(n: i64, factor: i64) -> Self {
        Self::boxed(n.saturating_mul(factor).max(1))
    }

    pub fn radius(&self) -> Option<i64> {
        self.radius
    }

    pub fn sublevel(&self) -> Option<&Sublevel> {
        self.sublevel.as_ref()
    }

    #[inline]
    pub fn contains(&self, x: &Vertex) -> bool {
        if let Some(r) = self.radius {
            if x.coords().iter().any(|c| c.abs() > r) {
                return false;
            }
        }
        match &self.sublevel {
            Some(s) => s.psi.le(x, &s.level),
            None => true,
        }
    }

    /// Explorations need a finite box; radii above 2^31 are refused.
    pub fn check_explorable(&self) -> Result<()> {
        match self.radius {
            None => Err(Error::InvalidWindow("window has no box truncation".into())),
            Some(r) if r < 0 => Err(Error::InvalidWindow(format!("negative radius {r}"))),
            Some(r) if r > MAX_WINDOW_RADIUS => {
                Err(Error::InvalidWindow(format!("radius {r} exceeds 2^31")))
            }
            Some(_) => Ok(()),
        }
    }
}
