use std::collections::{BTreeMap, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use orperc::cluster::{explore, write_sweep_csv, SweepPoint};
use orperc::cones::Cone;
use orperc::field::Field;
use orperc::fpp::{hyperplane_time, passage_time};
use orperc::sharp::{self, Method, Mode};
use orperc::{Direction, FieldParams, FiniteSet, GraphSpec, SubadditiveWeight, Vertex, Window};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn model() -> impl Strategy<Value = GraphSpec> {
    (1i64..=3).prop_map(|m| GraphSpec::example_model(m).unwrap())
}

/// Plain Dijkstra over every vertex of a box, no shortcuts.
fn reference_times(g: &GraphSpec, field: &Field, x: Vertex, r: i64) -> BTreeMap<Vertex, u32> {
    let inside = |v: &Vertex| v.norm_inf() <= r;
    let mut dist: BTreeMap<Vertex, u32> = BTreeMap::new();
    let mut frontier = VecDeque::from([(x, 0u32)]);
    while let Some((v, d)) = frontier.pop_front() {
        if dist.get(&v).is_some_and(|&old| old <= d) {
            continue;
        }
        dist.insert(v, d);
        for i in 0..g.degree() {
            let w = g.head(&v, i);
            if inside(&w) {
                frontier.push_back((w, d + field.time(&v, i)));
            }
        }
    }
    dist
}

fn vertex_in(r: i64) -> impl Strategy<Value = Vertex> {
    (-r..=r, -r..=r).prop_map(|(a, b)| Vertex::new(&[a, b]))
}

#[test]
fn edge_draws_are_uniform() {
    let params = FieldParams::new(99, 0.5).unwrap();
    let field = Field::new(&params);
    let bins = 64usize;
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for a in -150..150 {
        for b in -150..150 {
            for i in 0..3 {
                let u = field.uniform(&Vertex::new(&[a, b]), i);
                counts[(u * bins as f64) as usize] += 1;
                total += 1;
            }
        }
    }
    let expected = total as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(1.0 - 1e-6);
    assert!(stat < critical, "chi-squared {stat} above {critical}");
}

#[test]
fn open_fraction_matches_p() {
    for p in [0.1, 0.37, 0.9] {
        let field = Field::new(&FieldParams::new(5, p).unwrap());
        let n = 200 * 200;
        let open = (0..n).filter(|k| field.is_open(&Vertex::new(&[k / 200, k % 200]), 0)).count();
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((open as f64 / n as f64 - p).abs() < 5.0 * sd);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn raising_p_only_opens_edges(seed in any::<u64>(), p in 0.0f64..1.0, dp in 0.0f64..0.5, v in vertex_in(1000), i in 0usize..3) {
        let lo = Field::new(&FieldParams::new(seed, p).unwrap());
        let hi = Field::new(&FieldParams::new(seed, (p + dp).min(1.0)).unwrap());
        prop_assert!(!lo.is_open(&v, i) || hi.is_open(&v, i));
    }

    #[test]
    fn cluster_grows_with_p(g in model(), seed in any::<u64>(), p in 0.2f64..0.6, dp in 0.0f64..0.3) {
        let w = Window::boxed(12);
        let probes = [Direction::new(&[0, 1]).unwrap(), Direction::new(&[0, -1]).unwrap(), Direction::new(&[1, 0]).unwrap()];
        let a = explore(&g, &FieldParams::new(seed, p).unwrap(), &g.origin(), &w, usize::MAX, &probes).unwrap();
        let b = explore(&g, &FieldParams::new(seed, p + dp).unwrap(), &g.origin(), &w, usize::MAX, &probes).unwrap();
        prop_assert!(a.visited_count <= b.visited_count);
        for (x, y) in a.extent.iter().zip(&b.extent) {
            prop_assert!(x.extent <= y.extent);
        }
    }

    #[test]
    fn passage_time_matches_reference(g in model(), seed in any::<u64>(), p in 0.0f64..1.0, y in vertex_in(6)) {
        let params = FieldParams::new(seed, p).unwrap();
        let reference = reference_times(&g, &Field::new(&params), g.origin(), 6);
        let got = passage_time(&g, &params, &g.origin(), &y, &Window::boxed(6)).unwrap();
        prop_assert_eq!(got.time, reference.get(&y).copied());
    }

    #[test]
    fn triangle_inequality(g in model(), seed in any::<u64>(), p in 0.2f64..0.8, x in vertex_in(5), y in vertex_in(5), z in vertex_in(5)) {
        let params = FieldParams::new(seed, p).unwrap();
        let w = Window::boxed(5);
        let t = |a: &Vertex, b: &Vertex| passage_time(&g, &params, a, b, &w).unwrap().time;
        if let (Some(xy), Some(yz)) = (t(&x, &y), t(&y, &z)) {
            let xz = t(&x, &z);
            prop_assert!(xz.is_some_and(|v| v <= xy + yz));
        }
    }

    #[test]
    fn hyperplane_time_is_below_point_times(g in model(), seed in any::<u64>(), p in 0.2f64..0.8, n in 1i64..6, a in -6i64..=6) {
        let params = FieldParams::new(seed, p).unwrap();
        let w = Window::boxed(8);
        let u = Direction::new(&[0, 1]).unwrap();
        let h = hyperplane_time(&g, &params, &u, n, &w).unwrap().time.unwrap();
        let y = Vertex::new(&[a, n]);
        if let Some(t) = passage_time(&g, &params, &g.origin(), &y, &w).unwrap().time {
            prop_assert!(h <= t);
        }
    }

    #[test]
    fn phi_lies_between_zero_and_p_times_boundary(g in model(), p in 0.0f64..1.0, k in 0i64..2) {
        let set = FiniteSet::sublevel(2, SubadditiveWeight::linear(&[0, -1]), k, 1).unwrap();
        let r = sharp::phi(&g, &set, p, Mode::Exact).unwrap();
        prop_assert!(r.value >= 0.0);
        prop_assert!(r.value <= p * r.boundary_size as f64 + 1e-12);
    }

    #[test]
    fn phi_is_nondecreasing_in_p(p in 0.0f64..0.9, dp in 0.0f64..0.1) {
        let g = GraphSpec::example_model(1).unwrap();
        let set = FiniteSet::sublevel(2, SubadditiveWeight::linear(&[0, -1]), 0, 1).unwrap();
        let a = sharp::phi(&g, &set, p, Mode::Exact).unwrap().value;
        let b = sharp::phi(&g, &set, p + dp, Mode::Exact).unwrap().value;
        prop_assert!(a <= b + 1e-12);
    }

    #[test]
    fn sweep_csv_parses_back(rows in proptest::collection::vec((0.0f64..1.0, 1i64..500, 1u64..5000), 1..8)) {
        let points: Vec<SweepPoint> = rows
            .iter()
            .map(|&(p, n, reps)| SweepPoint {
                p,
                n,
                reps,
                successes: reps / 3,
                theta_hat: (reps / 3) as f64 / reps as f64,
                ci_low: 0.0,
                ci_high: 1.0,
                boundary_hits: reps / 7,
            })
            .collect();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &points).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        prop_assert_eq!(lines.next().unwrap(), orperc::cluster::SWEEP_CSV_HEADER);
        for (line, pt) in lines.zip(&points) {
            let f: Vec<&str> = line.split(',').collect();
            prop_assert_eq!(f.len(), 8);
            prop_assert_eq!(f[0].parse::<f64>().unwrap(), pt.p);
            prop_assert_eq!(f[1].parse::<i64>().unwrap(), pt.n);
            prop_assert_eq!(f[3].parse::<u64>().unwrap(), pt.successes);
            prop_assert_eq!(f[4].parse::<f64>().unwrap(), pt.theta_hat);
            prop_assert_eq!(f[7].parse::<f64>().unwrap(), pt.boundary_flag_rate());
        }
    }
}

#[test]
fn phi_sampling_agrees_with_enumeration() {
    let g = GraphSpec::example_model(1).unwrap();
    let set = FiniteSet::sublevel(2, SubadditiveWeight::linear(&[0, -1]), 0, 1).unwrap();
    let exact = sharp::phi(&g, &set, 0.3, Mode::Exact).unwrap().value;
    let mc = sharp::phi(&g, &set, 0.3, Mode::MonteCarlo { reps: 40_000, seed: 3 }).unwrap();
    let Method::MonteCarlo { ci_low, ci_high, .. } = mc.method else {
        panic!("expected a sampled value");
    };
    let half = (ci_high - ci_low) / 2.0;
    assert!((mc.value - exact).abs() < 2.0 * half + 1e-3, "{} vs {exact}", mc.value);
}

// Carathéodory: x lies in cone(G) iff it is a nonnegative combination of
// some linearly independent subset of G. Solved exactly by elimination.
fn solve_nonneg(cols: &[&Vec<i64>], x: &[i64]) -> bool {
    let d = x.len();
    let k = cols.len();
    let mut m: Vec<Vec<BigRational>> = (0..d)
        .map(|r| {
            let mut row: Vec<BigRational> = cols.iter().map(|c| BigRational::from_integer(BigInt::from(c[r]))).collect();
            row.push(BigRational::from_integer(BigInt::from(x[r])));
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..k {
        let Some(pr) = (row..d).find(|&r| !m[r][col].is_zero()) else {
            return false;
        };
        m.swap(row, pr);
        let piv = m[row][col].clone();
        for c in col..=k {
            m[row][c] = &m[row][c] / &piv;
        }
        for r in 0..d {
            if r != row && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..=k {
                    let sub = &f * &m[row][c];
                    m[r][c] = &m[r][c] - sub;
                }
            }
        }
        pivots.push(row);
        row += 1;
    }
    if (row..d).any(|r| !m[r][k].is_zero()) {
        return false;
    }
    pivots.iter().all(|&r| !m[r][k].is_negative())
}

fn in_generated_cone(gens: &[Vec<i64>], x: &[i64]) -> bool {
    if x.iter().all(|&c| c == 0) {
        return true;
    }
    let d = x.len();
    let n = gens.len();
    (1u32..1 << n).any(|mask| {
        if mask.count_ones() as usize > d {
            return false;
        }
        let cols: Vec<&Vec<i64>> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| &gens[i]).collect();
        solve_nonneg(&cols, x)
    })
}

fn cone_case() -> impl Strategy<Value = (usize, Vec<Vec<i64>>, Vec<Vec<i64>>)> {
    (2usize..=3).prop_flat_map(|d| {
        (
            Just(d),
            proptest::collection::vec(proptest::collection::vec(-3i64..=3, d), 1..=5),
            proptest::collection::vec(proptest::collection::vec(-4i64..=4, d), 12),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn polar_is_an_involution((d, gens, _) in cone_case()) {
        let c = Cone::from_generators(d, &gens).unwrap();
        prop_assert!(c.polar().polar().same_set(&c));
        prop_assert!(c.intersection(&c.polar()).unwrap().is_zero());
    }

    #[test]
    fn membership_matches_caratheodory((d, gens, probes) in cone_case()) {
        let c = Cone::from_generators(d, &gens).unwrap();
        for x in &probes {
            prop_assert_eq!(c.contains(x), in_generated_cone(&gens, x), "x = {:?}", x);
        }
    }

    #[test]
    fn polar_pairs_are_nonpositive((d, gens, probes) in cone_case()) {
        let c = Cone::from_generators(d, &gens).unwrap();
        let polar = c.polar();
        for y in probes.iter().filter(|y| polar.contains(y)) {
            for g in &gens {
                let dot: i64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                prop_assert!(dot <= 0);
            }
        }
    }
}
