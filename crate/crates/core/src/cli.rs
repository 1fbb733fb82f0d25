//! The `orperc` command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::cluster::{self, PcSearch, DEFAULT_TAU, DEFAULT_WINDOW_FACTOR};
use crate::cones::{self, BgThresholds, Cone, ScanConfig};
use crate::error::{Error, Result};
use crate::field::FieldParams;
use crate::fpp::{self, LadderConfig};
use crate::graph::{Direction, GraphSpec, SubadditiveWeight, Vertex, Window};
use crate::oracle::{self, EnumerationTask};
use crate::render::{self, RenderJob, RenderMode};
use crate::sharp::{self, FiniteSet, Mode};

#[derive(Parser, Debug)]
#[command(name = "orperc", version, about = "Oriented percolation and first-passage percolation on Z^d")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Graph file: {"d": 2, "dirs": [[0,-1], [1,1], ...]}.
    #[arg(long, global = true, conflicts_with = "model")]
    pub graph: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub model: Option<Model>,
    /// Drift range of the example model.
    #[arg(long = "M", id = "M", global = true, default_value_t = 1)]
    pub m: i64,
    /// Dimension of the nearest-neighbour model.
    #[arg(long, global = true, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub reps: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON object whose keys mirror the long flags; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// Dir = {(0,-1)} ∪ {(k,1) : |k| ≤ M}.
    Example,
    /// d = 1, Dir = {+1}.
    Line,
    /// d = 1, Dir = {+1, -1}.
    Biline,
    /// ±e_i in dimension --dim.
    Nn,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Explore the open cluster of a vertex inside a box.
    Explore(ExploreArgs),
    /// Directional survival over a grid of p.
    Sweep(SweepArgs),
    /// Bracket the directional critical point by bisection.
    Pc(PcArgs),
    /// Evaluate the sharp-transition functional on a sublevel set.
    Phi(PhiArgs),
    /// Search for a decay certificate and check it by simulation.
    Certify(CertifyArgs),
    /// Estimate the time constant or the hyperplane rate.
    Fpp(FppArgs),
    /// Time-decay constants and their Monte Carlo check.
    Decay(DecayArgs),
    /// Sampled recession and barrier cones, or the polar of a cone file.
    Cones(ConesArgs),
    /// Compare barrier cone and bounded-growth evidence ray by ray.
    Scan(ScanArgs),
    /// Exact values by enumeration on a small window.
    Oracle(OracleArgs),
    /// Distance-colored picture of the cluster (binary PPM).
    Render(RenderArgs),
}

#[derive(Args, Debug)]
pub struct ExploreArgs {
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub x: String,
    #[arg(long, default_value_t = 64)]
    pub radius: i64,
    #[arg(long, default_value_t = usize::MAX)]
    pub budget: usize,
    /// Probe directions, `;`-separated (default: ±e_i).
    #[arg(long, allow_hyphen_values = true)]
    pub probes: Option<String>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub u: String,
    /// `start:stop:step`, inclusive.
    #[arg(long)]
    pub p_grid: String,
    #[arg(long)]
    pub n: i64,
    #[arg(long, default_value_t = DEFAULT_WINDOW_FACTOR)]
    pub window_factor: i64,
}

#[derive(Args, Debug)]
pub struct PcArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub u: String,
    #[arg(long)]
    pub n: i64,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value = "0.05,0.95")]
    pub bracket: String,
    #[arg(long, default_value_t = DEFAULT_WINDOW_FACTOR)]
    pub window_factor: i64,
}

#[derive(Args, Debug, Clone)]
pub struct SetArgs {
    /// Linear weight Ψ as an integer vector.
    #[arg(long, allow_hyphen_values = true)]
    pub psi: String,
    /// Sublevel `{Ψ ≤ k}`.
    #[arg(long, default_value_t = 0)]
    pub k: i64,
    /// Box truncation `|x_i| ≤ cap`.
    #[arg(long, default_value_t = 1)]
    pub cap: i64,
    /// Force exact enumeration (fails above the edge cap).
    #[arg(long, conflicts_with = "mc")]
    pub exact: bool,
    /// Force Monte Carlo.
    #[arg(long)]
    pub mc: bool,
}

impl SetArgs {
    fn mode(&self, reps: u64, seed: u64) -> Mode {
        if self.exact {
            Mode::Exact
        } else if self.mc {
            Mode::MonteCarlo { reps, seed }
        } else {
            Mode::Auto { reps, seed }
        }
    }

    fn weight(&self) -> Result<SubadditiveWeight> {
        Ok(SubadditiveWeight::linear(&parse_ints(&self.psi)?))
    }
}

#[derive(Args, Debug)]
pub struct PhiArgs {
    #[command(flatten)]
    pub set: SetArgs,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub psi: String,
    #[arg(long, default_value_t = 4)]
    pub k_max: i64,
    #[arg(long, default_value_t = 1)]
    pub cap: i64,
    #[arg(long, conflicts_with = "mc")]
    pub exact: bool,
    #[arg(long)]
    pub mc: bool,
    /// Decay levels to verify, `a:b` inclusive.
    #[arg(long, default_value = "1:5")]
    pub k_range: String,
    /// Replicas for the decay check (0 skips it).
    #[arg(long, default_value_t = 10_000)]
    pub verify_reps: u64,
    /// Where to write the decay check CSV (default: standard output after the certificate).
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FppKind {
    Mu,
    B,
}

#[derive(Args, Debug)]
pub struct FppArgs {
    #[arg(long, value_enum, default_value = "mu")]
    pub kind: FppKind,
    /// Target ray `x` for μ, or direction `u` for b.
    #[arg(long, allow_hyphen_values = true)]
    pub ray: String,
    #[arg(long, default_value = "32,64,128")]
    pub ladder: String,
    #[arg(long, default_value_t = DEFAULT_WINDOW_FACTOR)]
    pub window_factor: i64,
}

#[derive(Args, Debug)]
pub struct DecayArgs {
    #[command(flatten)]
    pub set: SetArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub u: String,
    /// `start:stop:step` grid of α.
    #[arg(long, default_value = "0.5:20:0.5")]
    pub alpha_grid: String,
    /// `c_used` as a fraction of the certified rate.
    #[arg(long, default_value_t = 0.5)]
    pub c_frac: f64,
    #[arg(long, default_value = "8,16,32,64")]
    pub ns: String,
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConesArgs {
    /// Polar of this cone file instead of sampling.
    #[arg(long)]
    pub cone: Option<PathBuf>,
    /// Probe rays, `;`-separated (default: the 16 primitive rays in {-2..2}^2).
    #[arg(long, allow_hyphen_values = true)]
    pub rays: Option<String>,
    #[arg(long, default_value = "32,64")]
    pub ladder: String,
    #[arg(long, default_value_t = DEFAULT_WINDOW_FACTOR)]
    pub window_factor: i64,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    /// Comparison parameter `q > p` (default p + 0.05).
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rays: Option<String>,
    #[arg(long, default_value = "32,64")]
    pub ladder: String,
    #[arg(long, default_value_t = DEFAULT_WINDOW_FACTOR)]
    pub window_factor: i64,
    #[arg(long, default_value_t = 64)]
    pub bg_n: i64,
    #[arg(long, default_value_t = 2000)]
    pub bg_reps: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    /// P(origin connects to --y).
    Event,
    /// Law of t(origin, --y).
    Passage,
    /// Path-counting bound of the example model.
    Paths,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long, value_enum, default_value = "event")]
    pub kind: OracleKind,
    #[arg(long, default_value_t = 1)]
    pub radius: i64,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<String>,
    #[arg(long, default_value_t = oracle::DEFAULT_CAP)]
    pub cap: usize,
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    #[arg(long, default_value_t = 20)]
    pub l_max: u32,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderModeArg {
    Hop,
    Passage,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Half-width W; the image is (2W+1) x (2W+1).
    #[arg(long, default_value_t = 200)]
    pub width: i64,
    #[arg(long, value_enum, default_value = "hop")]
    pub mode: RenderModeArg,
}

fn parse_ints(text: &str) -> Result<Vec<i64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map_err(|e| Error::InvalidArgument(format!("bad integer {t:?}: {e}")))
        })
        .collect()
}

fn parse_rays(text: &str) -> Result<Vec<Vec<i64>>> {
    text.split(';').filter(|s| !s.trim().is_empty()).map(parse_ints).collect()
}

fn parse_f64(t: &str) -> Result<f64> {
    t.trim()
        .parse::<f64>()
        .map_err(|e| Error::InvalidArgument(format!("bad number {t:?}: {e}")))
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, s] = parts[..] else {
        return Err(Error::InvalidArgument(format!("grid {text:?} is not start:stop:step")));
    };
    let (a, b, s) = (parse_f64(a)?, parse_f64(b)?, parse_f64(s)?);
    if !(s > 0.0) || b < a {
        return Err(Error::InvalidArgument(format!("grid {text:?} needs step > 0 and stop >= start")));
    }
    let count = ((b - a) / s + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(Error::InvalidArgument(format!("grid {text:?} too long")));
    }
    Ok((0..count).map(|i| a + i as f64 * s).collect())
}

fn parse_range(text: &str) -> Result<std::ops::RangeInclusive<u32>> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("range {text:?} is not a:b")))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<u32>()
            .map_err(|e| Error::InvalidArgument(format!("bad range bound {t:?}: {e}")))
    };
    Ok(parse(a)?..=parse(b)?)
}

fn parse_ladder(text: &str) -> Result<Vec<i64>> {
    parse_ints(text)
}

impl Global {
    fn graph(&self) -> Result<GraphSpec> {
        if let Some(path) = &self.graph {
            return GraphSpec::load(path);
        }
        match self.model.unwrap_or(Model::Example) {
            Model::Example => GraphSpec::example_model(self.m),
            Model::Line => Ok(GraphSpec::oriented_line()),
            Model::Biline => Ok(GraphSpec::bidirectional_line()),
            Model::Nn => GraphSpec::nearest_neighbour(self.dim),
        }
    }

    fn p(&self) -> Result<f64> {
        let p = self.p.ok_or_else(|| Error::InvalidArgument("--p is required".into()))?;
        FieldParams::new(0, p)?;
        Ok(p)
    }

    fn reps(&self, default: u64) -> u64 {
        self.reps.unwrap_or(default)
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        open_output(self.out.as_deref())
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Config entries become `--key value` tokens, except for flags already
/// given on the command line.
fn config_tokens(path: &Path, matches: &ArgMatches) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::InvalidArgument("config must be a JSON object".into()))?;
    let root = Cli::command();
    let sub = matches.subcommand();
    let sub_cmd = sub.and_then(|(name, _)| root.find_subcommand(name));
    let mut tokens = Vec::new();
    for (key, val) in obj {
        let long = key.replace('_', "-");
        if long == "config" {
            continue;
        }
        let find = |cmd: &clap::Command| {
            cmd.get_arguments()
                .find(|a| a.get_long() == Some(long.as_str()))
                .map(|a| a.get_id().to_string())
        };
        let id = sub_cmd.and_then(find).or_else(|| find(&root));
        if let Some(id) = &id {
            let given = |m: &ArgMatches| {
                m.try_contains_id(id).unwrap_or(false) && m.value_source(id) == Some(ValueSource::CommandLine)
            };
            if given(matches) || sub.is_some_and(|(_, m)| given(m)) {
                continue;
            }
        }
        match val {
            serde_json::Value::Bool(true) => tokens.push(format!("--{long}")),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => tokens.push(format!("--{long}={s}")),
            serde_json::Value::Number(n) => tokens.push(format!("--{long}={n}")),
            serde_json::Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                tokens.push(format!("--{long}={}", parts.join(",")));
            }
            serde_json::Value::Object(_) => {
                return Err(Error::InvalidArgument(format!("config key {key:?} has an object value")));
            }
        }
    }
    Ok(tokens)
}

fn parse_cli(argv: &[String]) -> std::result::Result<Cli, clap::Error> {
    // Required flags may come from the config file, so the first pass only
    // collects what was given on the command line.
    let matches = Cli::command().ignore_errors(true).try_get_matches_from(argv)?;
    let Some(path) = matches.get_one::<PathBuf>("config").cloned() else {
        let matches = Cli::command().try_get_matches_from(argv)?;
        return Cli::from_arg_matches(&matches);
    };
    let tokens = config_tokens(&path, &matches).map_err(|e| {
        Cli::command().error(clap::error::ErrorKind::InvalidValue, format!("config {}: {e}", path.display()))
    })?;
    let mut full = argv.to_vec();
    full.extend(tokens);
    let matches = Cli::command().try_get_matches_from(&full)?;
    Cli::from_arg_matches(&matches)
}

/// Parse `argv` (including the program name) and run; returns the exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match parse_cli(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.global.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Error::InvalidArgument(format!("thread pool: {e}"))),
        },
        None => execute(&cli),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("orperc: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let gl = &cli.global;
    let g = gl.graph()?;
    match &cli.command {
        Command::Explore(a) => {
            let params = FieldParams::new(gl.seed, gl.p()?)?;
            let x = Vertex::new(&parse_ints(&a.x)?);
            let probes = match &a.probes {
                Some(t) => parse_rays(t)?
                    .iter()
                    .map(|r| Direction::new(r))
                    .collect::<Result<Vec<_>>>()?,
                None => (0..g.dim())
                    .flat_map(|i| [Direction::axis(g.dim(), i, false), Direction::axis(g.dim(), i, true)])
                    .collect(),
            };
            let report = cluster::explore(&g, &params, &x, &Window::boxed(a.radius), a.budget, &probes)?;
            write_json(&mut gl.output()?, &serde_json::to_value(&report)?)
        }
        Command::Sweep(a) => {
            let u = Direction::parse(&a.u)?;
            let window = Window::for_scale(a.n, a.window_factor);
            let reps = gl.reps(1000);
            let points = parse_grid(&a.p_grid)?
                .into_iter()
                .map(|p| cluster::directional_survival(&g, &u, p, a.n, &window, reps, gl.seed))
                .collect::<Result<Vec<_>>>()?;
            cluster::write_sweep_csv(gl.output()?, &points)?;
            Ok(())
        }
        Command::Pc(a) => {
            let b: Vec<f64> = a.bracket.split(',').map(parse_f64).collect::<Result<_>>()?;
            let [lo, hi] = b[..] else {
                return Err(Error::InvalidBracket(format!("{:?} is not lo,hi", a.bracket)));
            };
            let mut search = PcSearch::new(Direction::parse(&a.u)?, a.n, (lo, hi));
            search.tau = a.tau;
            search.reps = gl.reps(search.reps);
            search.seed = gl.seed;
            search.window_factor = a.window_factor;
            let est = cluster::estimate_pc(&g, &search)?;
            write_json(&mut gl.output()?, &serde_json::to_value(&est)?)
        }
        Command::Phi(a) => {
            let p = gl.p()?;
            let set = FiniteSet::sublevel(g.dim(), a.set.weight()?, a.set.k, a.set.cap)?;
            let r = sharp::phi(&g, &set, p, a.set.mode(gl.reps(10_000), gl.seed))?;
            write_json(
                &mut gl.output()?,
                &json!({"p": p, "set_size": set.len(), "phi": serde_json::to_value(r)?, "upper": r.upper()}),
            )
        }
        Command::Certify(a) => {
            let p = gl.p()?;
            let set_args = SetArgs {
                psi: a.psi.clone(),
                k: 0,
                cap: a.cap,
                exact: a.exact,
                mc: a.mc,
            };
            let mode = set_args.mode(gl.reps(10_000), gl.seed);
            let cert = sharp::find_good_set(&g, &set_args.weight()?, p, a.k_max, a.cap, mode)?
                .ok_or_else(|| Error::NoCertificate(format!("no sublevel set up to k = {} has phi < 1", a.k_max)))?;
            let mut out = gl.output()?;
            write_json(&mut out, &cert.to_json())?;
            if a.verify_reps > 0 {
                let rows = sharp::verify_decay(&g, &cert, parse_range(&a.k_range)?, a.verify_reps, gl.seed)?;
                match &a.table {
                    Some(path) => sharp::write_decay_csv(open_output(Some(path))?, &rows)?,
                    None => sharp::write_decay_csv(&mut out, &rows)?,
                }
                if rows.iter().any(|r| r.flag) {
                    eprintln!("orperc: decay check flagged {} level(s)", rows.iter().filter(|r| r.flag).count());
                }
            }
            Ok(())
        }
        Command::Fpp(a) => {
            let p = gl.p()?;
            let mut cfg = LadderConfig::new(parse_ladder(&a.ladder)?, gl.reps(200), gl.seed);
            cfg.window_factor = a.window_factor;
            let ray = parse_ints(&a.ray)?;
            let est = match a.kind {
                FppKind::Mu => fpp::estimate_mu(&g, p, &ray, &cfg)?.ladder,
                FppKind::B => fpp::estimate_b(&g, p, &Direction::new(&ray)?, &cfg)?.ladder,
            };
            fpp::write_ladder_csv(gl.output()?, &ray, &est, true)?;
            eprintln!(
                "estimate={} ci=[{}, {}] zero={} zero_tol={} valid={}",
                est.estimate.max(0.0),
                est.ci.0,
                est.ci.1,
                est.is_zero(),
                fpp::ZERO_TOL,
                est.valid
            );
            for w in &est.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Command::Decay(a) => {
            let p = gl.p()?;
            let u = Direction::parse(&a.u)?;
            let set = FiniteSet::sublevel(g.dim(), a.set.weight()?, a.set.k, a.set.cap)?;
            let grid = parse_grid(&a.alpha_grid)?;
            let consts = fpp::decay_constants(&g, &set, p, &u, &grid, a.set.mode(gl.reps(10_000), gl.seed))?;
            let mut out = gl.output()?;
            write_json(&mut out, &consts.to_json())?;
            let ns = parse_ints(&a.ns)?;
            let rows = fpp::verify_time_decay(&g, &consts, &u, &ns, gl.reps(10_000), gl.seed, a.c_frac * consts.c)?;
            match &a.table {
                Some(path) => fpp::write_time_decay_csv(open_output(Some(path))?, &rows)?,
                None => fpp::write_time_decay_csv(&mut out, &rows)?,
            }
            Ok(())
        }
        Command::Cones(a) => {
            if let Some(path) = &a.cone {
                let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                let cone = Cone::from_json(&value)?;
                return write_json(&mut gl.output()?, &cone.polar().to_json());
            }
            let p = gl.p()?;
            let rays = match &a.rays {
                Some(t) => parse_rays(t)?,
                None => cones::default_probe_rays(),
            };
            let mut cfg = LadderConfig::new(parse_ladder(&a.ladder)?, gl.reps(100), gl.seed);
            cfg.window_factor = a.window_factor;
            let shape = cones::sample_shape(&g, p, &rays, &cfg)?;
            let recession = cones::recession_cone(&shape)?;
            let barrier = recession.polar();
            write_json(
                &mut gl.output()?,
                &json!({
                    "p": p,
                    "zero_tol": shape.zero_tol,
                    "partial": shape.partial,
                    "rays": shape.rays.iter().map(|m| json!({
                        "x": m.x, "mu_hat": m.mu_hat(), "ci": [m.ladder.ci.0, m.ladder.ci.1], "zero": m.is_zero(),
                    })).collect::<Vec<_>>(),
                    "recession": recession.to_json(),
                    "barrier": barrier.to_json(),
                }),
            )
        }
        Command::Scan(a) => {
            let p = gl.p()?;
            let q = a.q.unwrap_or(p + 0.05);
            let rays = match &a.rays {
                Some(t) => parse_rays(t)?,
                None => cones::default_probe_rays(),
            };
            let mut mu = LadderConfig::new(parse_ladder(&a.ladder)?, gl.reps(100), gl.seed);
            mu.window_factor = a.window_factor;
            let cfg = ScanConfig {
                mu,
                bg_n: a.bg_n,
                bg_reps: a.bg_reps,
                bg_window_factor: a.window_factor,
                thresholds: BgThresholds::default(),
            };
            let report = cones::conjecture_scan(&g, p, q, &rays, &cfg)?;
            cones::write_scan_csv(gl.output()?, &report)?;
            if report.flags() > 0 {
                eprintln!("orperc: {} inclusion flag(s)", report.flags());
            }
            Ok(())
        }
        Command::Oracle(a) => {
            let mut out = gl.output()?;
            if a.kind == OracleKind::Paths {
                let p = gl.p()?;
                let b = oracle::path_count_bound(u32::try_from(gl.m).map_err(|_| Error::InvalidArgument("--M".into()))?, p, a.n, a.l_max)?;
                writeln!(out, "l,term,partial_sum,closed_bound")?;
                for (l, (t, s)) in b.terms.iter().zip(&b.partial_sums).enumerate() {
                    let c = b.closed_bound.map_or(String::new(), |c| c.to_string());
                    writeln!(out, "{l},{t},{s},{c}")?;
                }
                return Ok(());
            }
            let p = gl.p()?;
            let task = EnumerationTask::new(&g, &Window::boxed(a.radius), a.cap)?;
            let y_text = a
                .y
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("--y is required".into()))?;
            let y = Vertex::new(&parse_ints(y_text)?);
            let o = g.origin();
            match a.kind {
                OracleKind::Event => {
                    let r = oracle::exact_event_probability(&task, p, |c| c.connects(&o, &y))?;
                    writeln!(out, "config_count,probability")?;
                    writeln!(out, "{},{}", r.config_count, r.value)?;
                }
                OracleKind::Passage => {
                    let d = oracle::exact_passage_distribution(&task, p, &o, &y)?;
                    oracle::write_distribution_csv(&mut out, &d)?;
                }
                OracleKind::Paths => unreachable!(),
            }
            Ok(())
        }
        Command::Render(a) => {
            let job = RenderJob {
                g,
                params: FieldParams::new(gl.seed, gl.p()?)?,
                half_width: a.width,
                mode: match a.mode {
                    RenderModeArg::Hop => RenderMode::HopDistance,
                    RenderModeArg::Passage => RenderMode::PassageTime,
                },
            };
            let img = render::render_cluster(&job)?;
            let mut out = gl.output()?;
            out.write_all(&img)?;
            out.flush()?;
            Ok(())
        }
    }
}
