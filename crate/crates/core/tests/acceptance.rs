//! Acceptance checks, one PASS/FAIL line each. Runs as a plain binary so the
//! lines are always visible; exits nonzero when any check fails.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use orperc::cluster::{estimate_pc, explore, extent_profile, directional_survival, PcSearch};
use orperc::cones::{self, Cone, ScanConfig};
use orperc::fpp::{self, estimate_mu, passage_time, LadderConfig};
use orperc::oracle::{
    exact_event_probability, exact_passage_distribution, open_path_expectation, path_count_bound, EnumerationTask,
    DEFAULT_CAP,
};
use orperc::render::{render_cluster, settled_vertices, RenderJob, RenderMode};
use orperc::sharp::{self, certify_sweep, find_good_set, largest_certified, theta_lower_bound, verify_decay, Mode};
use orperc::stats::{wilson, Z99};
use orperc::{Direction, FieldParams, FiniteSet, GraphSpec, SubadditiveWeight, Vertex, Window};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, TestRunner};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn run(id: u32, name: &str, limit: Option<Duration>, check: fn() -> Outcome) -> bool {
    let start = Instant::now();
    let mut out = check();
    let took = start.elapsed();
    if let Some(limit) = limit {
        if took > limit {
            out.pass = false;
            out.detail.push_str(&format!("; runtime {took:.1?} over {limit:?}"));
        }
    }
    println!(
        "criterion {id:>2} {}: {name} ({took:.1?}) {}",
        if out.pass { "PASS" } else { "FAIL" },
        out.detail
    );
    out.pass
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn one_way_line() -> Outcome {
    let g = GraphSpec::oriented_line();
    let u = Direction::new(&[1]).unwrap();
    let p = 0.5;
    let reps = 100_000;
    let prof = extent_profile(&g, &u, p, 15, &Window::for_scale(15, 4), reps, 1).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for n in [5i64, 10, 15] {
        let (lo, hi) = wilson(prof.counts[(n - 1) as usize], reps, Z99);
        let truth = p.powi(n as i32);
        pass &= lo <= truth && truth <= hi;
        detail.push(format!("n={n}: {truth:.3e} in [{lo:.3e}, {hi:.3e}]"));
    }
    outcome(pass, detail.join("; "))
}

fn line_time_constant() -> Outcome {
    let g = GraphSpec::bidirectional_line();
    let mut pass = true;
    let mut detail = Vec::new();
    for p in [0.2, 0.5, 0.8] {
        let est = estimate_mu(&g, p, &[1], &LadderConfig::new(vec![512], 200, 2)).unwrap();
        let err = (est.mu_hat() - (1.0 - p)).abs();
        pass &= err <= 0.01;
        detail.push(format!("p={p}: mu={:.4} (err {err:.4})", est.mu_hat()));
    }
    outcome(pass, detail.join("; "))
}

fn oracle_agreement() -> Outcome {
    let g = GraphSpec::example_model(1).unwrap();
    let reps = 100_000u64;
    let o = g.origin();
    let b1 = Window::boxed(1);
    let half = |psi: &[i64]| Window::psi_ball(SubadditiveWeight::linear(psi), 0).truncated(1);
    let cases: Vec<(Window, f64, Vertex)> = vec![
        (b1.clone(), 0.5, Vertex::new(&[1, -1])),
        (half(&[0, 1]), 0.4, Vertex::new(&[1, -1])),
        (half(&[0, -1]), 0.6, Vertex::new(&[-1, 1])),
        (half(&[1, 0]), 0.5, Vertex::new(&[-1, 0])),
        (half(&[1, 1]), 0.45, Vertex::new(&[0, -1])),
    ];
    let mut worst = 0.0f64;
    let mut max_edges = 0;
    let mut pass = true;
    let mut check = |mc: f64, exact: f64, var: f64| {
        let z = if var > 0.0 { (mc - exact).abs() / (var / reps as f64).sqrt() } else if mc == exact { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
        z <= 4.0
    };
    for (i, (w, p, y)) in cases.iter().enumerate() {
        let task = EnumerationTask::new(&g, w, DEFAULT_CAP).unwrap();
        max_edges = max_edges.max(task.edge_count());
        pass &= task.edge_count() <= 22;
        let conn = exact_event_probability(&task, *p, |c| c.connects(&o, y)).unwrap().value;
        let dist = exact_passage_distribution(&task, *p, &o, y).unwrap();
        let base = FieldParams::new(100 + i as u64, *p).unwrap();
        let times: Vec<Option<u32>> = (0..reps)
            .map(|r| passage_time(&g, &base.replica(r), &o, y, w).unwrap().time)
            .collect();
        let open = times.iter().filter(|t| **t == Some(0)).count() as f64 / reps as f64;
        pass &= check(open, conn, conn * (1.0 - conn));
        let q = dist.unreachable_mass();
        let unreach = times.iter().filter(|t| t.is_none()).count() as f64 / reps as f64;
        pass &= check(unreach, q, q * (1.0 - q));
        let m1 = dist.reachable_first_moment();
        let m2: f64 = (0..16u32).map(|t| (t * t) as f64 * dist.mass(Some(t))).sum();
        let mean = times.iter().map(|t| t.unwrap_or(0) as f64).sum::<f64>() / reps as f64;
        pass &= check(mean, m1, m2 - m1 * m1);
    }
    // Directional extent event on the full box.
    let task = EnumerationTask::new(&g, &b1, DEFAULT_CAP).unwrap();
    let u = Direction::new(&[1, 0]).unwrap();
    let p = 0.45;
    let exact = exact_event_probability(&task, p, |c| c.cluster(&o).iter().any(|v| v.coords()[0] >= 1)).unwrap().value;
    let base = FieldParams::new(200, p).unwrap();
    let hits = (0..reps)
        .filter(|&r| explore(&g, &base.replica(r), &o, &b1, usize::MAX, &[u]).unwrap().extent_of(&u).unwrap() >= 1)
        .count() as f64
        / reps as f64;
    pass &= check(hits, exact, exact * (1.0 - exact));
    outcome(pass, format!("5 windows (max {max_edges} edges), worst deviation {worst:.2} sigma"))
}

fn lower_regime_decay() -> Outcome {
    let g = GraphSpec::example_model(2).unwrap();
    let u = Direction::new(&[0, -1]).unwrap();
    let reps = 100_000;
    let prof = extent_profile(&g, &u, 0.15, 128, &Window::for_scale(128, 4), reps, 4).unwrap();
    let levels = [16i64, 32, 64, 128];
    let points: Vec<_> = levels.iter().map(|&n| prof.point(n)).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|s| s.successes > 0)
        .map(|s| (s.n as f64, s.theta_hat.ln()))
        .unzip();
    let fit = orperc::stats::linear_fit(&xs, &ys);
    let r2 = fit.as_ref().map(|f| f.r2);
    let upper = points[3].ci_high;
    // Supplementary: the fit over every level that has enough survivors.
    let resolved = prof.decay_fit(10);
    let thetas: Vec<String> = points.iter().map(|s| format!("{:.2e}", s.theta_hat)).collect();
    outcome(
        r2.is_some_and(|r| r >= 0.9) && upper < 0.005,
        format!(
            "theta at 16,32,64,128 = [{}], log-linear R2 = {}, theta_128 upper = {upper:.2e}; {} resolved levels: R2 = {}, slope = {}",
            thetas.join(", "),
            r2.map_or("undefined (fewer than two nonzero levels)".to_string(), |r| format!("{r:.3}")),
            resolved.resolved_levels,
            resolved.fit.as_ref().map_or("-".to_string(), |f| format!("{:.3}", f.r2)),
            resolved.fit.as_ref().map_or("-".to_string(), |f| format!("{:.3}", f.slope)),
        ),
    )
}

fn upper_regime_pc() -> Outcome {
    let g = GraphSpec::example_model(5).unwrap();
    let mut search = PcSearch::new(Direction::new(&[0, 1]).unwrap(), 256, (0.1, 0.6));
    search.seed = 5;
    match estimate_pc(&g, &search) {
        Ok(est) => outcome(
            est.p_hi <= 0.40,
            format!("bracket [{:.4}, {:.4}], indecisive = {}", est.p_lo, est.p_hi, est.indecisive),
        ),
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn psi_down() -> SubadditiveWeight {
    SubadditiveWeight::linear(&[0, -1])
}

fn certificate_chain() -> Outcome {
    let g = GraphSpec::example_model(1).unwrap();
    let mode = Mode::Auto { reps: 100_000, seed: 6 };
    let Some(cert) = find_good_set(&g, &psi_down(), 0.10, 4, 1, mode).unwrap() else {
        return outcome(false, "no certificate found");
    };
    let rows = verify_decay(&g, &cert, 1..=5, 100_000, 7).unwrap();
    let flags = rows.iter().filter(|r| r.flag).count();
    let worst = rows
        .iter()
        .map(|r| format!("k={}: {:.2e} <= {:.2e}", r.k, r.ci_low, r.predicted))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(
        cert.phi.upper() < 1.0 && flags == 0,
        format!("|S| = {}, phi upper = {:.5}, L = {}, {flags} flags ({worst})", cert.set.len(), cert.phi.upper(), cert.l),
    )
}

fn theta_bound_consistency() -> Outcome {
    let g = GraphSpec::example_model(1).unwrap();
    let grid: Vec<f64> = (0..=18).map(|i| 0.05 + 0.025 * i as f64).collect();
    let sweep = certify_sweep(&g, &psi_down(), &grid, 4, 1, Mode::Auto { reps: 100_000, seed: 6 }).unwrap();
    let Some(ptilde) = largest_certified(&sweep) else {
        return outcome(false, "no certified p in the sweep");
    };
    let p = ptilde + 0.1;
    let reps = 4000;
    let u = Direction::new(&[0, -1]).unwrap();
    let s = directional_survival(&g, &u, p, 128, &Window::for_scale(128, 4), reps, 8).unwrap();
    let bound = theta_lower_bound(p, ptilde).unwrap();
    let sigma = (bound * (1.0 - bound) / reps as f64).sqrt();
    outcome(
        s.theta_hat >= bound - 3.0 * sigma,
        format!(
            "certified up to p = {ptilde:.3}; at p = {p:.3}: theta_128 = {:.4} vs bound {bound:.4} - 3 sigma ({:.4}), boundary rate {:.3}",
            s.theta_hat,
            3.0 * sigma,
            s.boundary_flag_rate()
        ),
    )
}

fn decay_constants_limit() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    let u = Direction::new(&[0, 1]).unwrap();
    for (m, p) in [(1, 0.10), (2, 0.15)] {
        let g = GraphSpec::example_model(m).unwrap();
        let singleton = FiniteSet::new([g.origin()], psi_down()).unwrap();
        let sub = FiniteSet::sublevel(2, SubadditiveWeight::linear(&[0, 1]), 0, 1).unwrap();
        for (name, s) in [("{0}", singleton), ("sublevel", sub)] {
            let phi = sharp::phi(&g, &s, p, Mode::Exact).unwrap().value;
            let k = fpp::decay_constants(&g, &s, p, &u, &[20.0], Mode::Exact).unwrap().grid[0].1;
            pass &= (k - phi).abs() <= 1e-3;
            detail.push(format!("M={m} {name}: K={k:.6} phi={phi:.6}"));
        }
    }
    outcome(pass, detail.join("; "))
}

fn cone_algebra() -> Outcome {
    let mut runner = TestRunner::new(Config::default());
    let strat = (2usize..=3).prop_flat_map(|d| {
        (
            proptest::strategy::Just(d),
            proptest::collection::vec(proptest::collection::vec(-4i64..=4, d), 1..=6),
        )
    });
    let mut failures = 0;
    for _ in 0..100 {
        let (d, gens) = strat.new_tree(&mut runner).unwrap().current();
        let c = Cone::from_generators(d, &gens).unwrap();
        let polar = c.polar();
        let involution = polar.polar().same_set(&c);
        let meet = c.intersection(&polar).unwrap().is_zero();
        let pairing = gens
            .iter()
            .all(|g| polar.generators().iter().all(|y| g.iter().zip(y).map(|(a, b)| b * *a).sum::<num_bigint::BigInt>() <= 0.into()));
        if !(involution && meet && pairing) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("100 random cones, {failures} failures"))
}

fn conjecture_scan() -> Outcome {
    let g = GraphSpec::example_model(1).unwrap();
    let rays = cones::default_probe_rays();
    let mut pass = rays.len() == 16;
    let mut detail = Vec::new();
    for p in [0.30, 0.55] {
        let mut mu = LadderConfig::new(vec![32, 64], 100, 1);
        mu.window_factor = 2;
        let mut cfg = ScanConfig::new(mu, 128, 400);
        cfg.bg_window_factor = 2;
        let report = cones::conjecture_scan(&g, p, p + 0.05, &rays, &cfg).unwrap();
        let inside = report.rows.iter().filter(|r| r.in_int_bar).count();
        pass &= report.flags() == 0;
        detail.push(format!("p={p}: {} flags, {inside} rays in int(Bar)", report.flags()));
    }
    outcome(pass, detail.join("; "))
}

fn figure_reproduction() -> Outcome {
    let g = GraphSpec::example_model(1).unwrap();
    let job = |p: f64| RenderJob {
        g: g.clone(),
        params: FieldParams::new(2024, p).unwrap(),
        half_width: 200,
        mode: RenderMode::HopDistance,
    };
    let pool = |n: usize| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let mut pass = true;
    for p in [0.51, 0.55] {
        let a = render_cluster(&job(p)).unwrap();
        let b = render_cluster(&job(p)).unwrap();
        let c = pool(1).install(|| render_cluster(&job(p)).unwrap());
        let d = pool(4).install(|| render_cluster(&job(p)).unwrap());
        pass &= a == b && a == c && a == d;
    }
    let low: HashSet<Vertex> = settled_vertices(&job(0.51)).unwrap().into_iter().map(|(v, _)| v).collect();
    let high: HashSet<Vertex> = settled_vertices(&job(0.55)).unwrap().into_iter().map(|(v, _)| v).collect();
    let subset = low.is_subset(&high);
    outcome(
        pass && subset,
        format!("byte-identical = {pass}, |settled| {} <= {} subset = {subset}", low.len(), high.len()),
    )
}

fn path_count() -> Outcome {
    let b = path_count_bound(2, 0.2, 3, 60).unwrap();
    let monotone = b.partial_sums.windows(2).all(|w| w[0] <= w[1]);
    let bounded = b.partial_sums.iter().all(|&s| s <= 0.32);
    let e = open_path_expectation(2, 0.2, 3, 3).unwrap();
    let mut acc = 0.0;
    let mut dominated = true;
    for (l, x) in e.expectations.iter().enumerate() {
        acc += x;
        dominated &= acc <= b.partial_sums[l];
    }
    outcome(
        monotone && bounded && dominated,
        format!(
            "partial sum at 60 = {:.6}, exhaustive sum up to 3 up-steps = {acc:.6} <= {:.6}",
            b.partial_sum, b.partial_sums[3]
        ),
    )
}

fn main() {
    type Check = (u32, &'static str, Option<Duration>, fn() -> Outcome);
    let checks: [Check; 12] = [
        (1, "one-way line survival is p^n", secs(10), one_way_line),
        (2, "bidirectional line time constant is 1-p", secs(30), line_time_constant),
        (3, "Monte Carlo agrees with exact enumeration", secs(300), oracle_agreement),
        (4, "subcritical downward survival decays", secs(300), lower_regime_decay),
        (5, "upward critical bracket for M=5", secs(600), upper_regime_pc),
        (6, "decay certificate holds by simulation", secs(600), certificate_chain),
        (7, "survival respects the certified lower bound", None, theta_bound_consistency),
        (8, "time-decay constant tends to phi", None, decay_constants_limit),
        (9, "polar cones are exact", secs(60), cone_algebra),
        (10, "barrier cone and bounded growth are consistent", secs(1800), conjecture_scan),
        (11, "rendering is deterministic and monotone", secs(60), figure_reproduction),
        (12, "path-count series bound", None, path_count),
    ];
    let filter: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (id, name, limit, check) in checks {
        if filter.is_some_and(|f| f != id) {
            continue;
        }
        if !run(id, name, limit, check) {
            failed += 1;
        }
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
