use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use sgda_core::diagnostics::{battery_vectors, gradient_audit, sandwich_check, EXACT_VARIANCE_TOL};
use sgda_core::linalg::sym_eigen;
use sgda_core::lowerbound::{
    build_instance, build_wr_sgd, classify, coupling_sq, describe_regimes, map_radius, membership_check,
    predicted_scale, simulate_gda, simulate_wr_sgd, spectral_radius_closed, stability_threshold, CaseId, GdaOutcome,
};
use sgda_core::optimizer::{default_step_sizes, initial_point, run as run_sgda};
use sgda_core::problem::random_point_in_ball;
use sgda_core::quadgame::{fmt_real, generate_game, validate_assumptions, GameGenConfig};
use sgda_core::sampling::{mix64, wr_prefix_variance_exact, wr_prefix_variance_mc, wr_prefix_variance_theory};
use sgda_core::{Algorithm, ComponentSpread, Error as CoreError, QuadraticGame, RunConfig, Scheme, StepSizes};

use crate::config::{parse_list, FlatConfig};
use crate::table::{self, RunRow};
use crate::{svg, Global};

/// A check or assertion failed; mapped to exit status 1.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct CheckFailed(pub String);

fn emit(global: &Global, text: &str) -> Result<()> {
    match &global.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_game(path: &Path) -> Result<(QuadraticGame, String)> {
    let text = read(path)?;
    let game = QuadraticGame::deserialize(&text).with_context(|| format!("loading game {}", path.display()))?;
    Ok((game, text))
}

fn list_arg<T: std::str::FromStr>(value: &str, name: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    parse_list(value).map_err(|e| anyhow!("--{name}: {e}"))
}

const GEN_KEYS: [&str; 11] = [
    "n",
    "d",
    "mu_C",
    "L_C",
    "L_B",
    "mu_M",
    "L_M",
    "rank_deficiency",
    "delta",
    "perturb_fraction",
    "seed",
];

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Config file; defaults are used when absent.
    config: Option<PathBuf>,
}

fn gen_config(cfg: &FlatConfig) -> Result<GameGenConfig> {
    let mut g = GameGenConfig::default();
    macro_rules! set {
        ($field:ident, $key:literal) => {
            if let Some(v) = cfg.get($key)? {
                g.$field = v;
            }
        };
    }
    set!(n, "n");
    set!(d, "d");
    set!(mu_c, "mu_C");
    set!(l_c, "L_C");
    set!(l_b, "L_B");
    set!(mu_m, "mu_M");
    set!(l_m, "L_M");
    set!(rank_deficiency, "rank_deficiency");
    set!(delta, "delta");
    set!(perturb_fraction, "perturb_fraction");
    set!(seed, "seed");
    Ok(g)
}

pub fn gen(global: &Global, args: GenArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => FlatConfig::parse(&read(path)?, &GEN_KEYS).with_context(|| format!("config {}", path.display()))?,
        None => FlatConfig::default(),
    };
    let mut gc = gen_config(&cfg)?;
    if let Some(seed) = global.seed {
        gc.seed = seed;
    }
    let game = generate_game(&gc).map_err(|e| {
        let key = match &e {
            CoreError::InvalidConfig { field, .. } => Some(*field),
            CoreError::Generation(_) => Some("perturb_fraction"),
            _ => None,
        };
        match key.and_then(|k| cfg.line_of(k)) {
            Some(line) => anyhow!("config line {line}: {e}"),
            None => anyhow!("{e}"),
        }
    })?;
    let k = game.constants();
    let summary = format!(
        "L = {}\nmu1 = {}\nmu2 = {}\nkappa2 = {}\nrank_M = {}\n",
        k.l,
        k.mu1,
        k.mu2,
        k.kappa2(),
        k.rank_m
    );
    emit(global, &game.serialize())?;
    if global.out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(())
}

const RUN_KEYS: [&str; 12] = [
    "game",
    "algorithms",
    "samplers",
    "batch_sizes",
    "epochs",
    "c0",
    "c1",
    "alpha",
    "beta",
    "seeds",
    "shared_seed",
    "lambda",
];

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Grid config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Game file.
    #[arg(long)]
    game: Option<PathBuf>,
    /// Comma-separated: sim, alt, agda, gda-sim, gda-alt.
    #[arg(long)]
    algorithms: Option<String>,
    /// Comma-separated: RR, WR, WORB, NS.
    #[arg(long)]
    samplers: Option<String>,
    #[arg(long)]
    batch_sizes: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Step constant: α = c0·β/κ₂².
    #[arg(long)]
    c0: Option<f64>,
    /// Step constant: β = c1·b/(nL).
    #[arg(long)]
    c1: Option<f64>,
    /// Explicit x step size (requires --beta).
    #[arg(long)]
    alpha: Option<f64>,
    /// Explicit y step size (requires --alpha).
    #[arg(long)]
    beta: Option<f64>,
    /// Comma-separated distinct seeds; defaults to --seed.
    #[arg(long)]
    seeds: Option<String>,
    /// Give every grid cell its own schedule stream.
    #[arg(long)]
    independent_schedules: bool,
    #[arg(long)]
    lambda: Option<f64>,
    /// Append a schedule digest column.
    #[arg(long)]
    debug_schedules: bool,
}

/// A validated experiment grid.
#[derive(Debug, Clone)]
struct ExperimentGrid {
    game: PathBuf,
    algorithms: Vec<Algorithm>,
    samplers: Vec<Scheme>,
    batch_sizes: Vec<usize>,
    epochs: usize,
    steps: StepRule,
    seeds: Vec<u64>,
    shared_seed: bool,
    lambda: f64,
}

#[derive(Debug, Clone, Copy)]
enum StepRule {
    Constants { c0: f64, c1: f64 },
    Explicit(StepSizes),
}

fn build_grid(global: &Global, args: &RunArgs) -> Result<ExperimentGrid> {
    let (cfg, base) = match &args.config {
        Some(path) => (
            FlatConfig::parse(&read(path)?, &RUN_KEYS).with_context(|| format!("config {}", path.display()))?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (FlatConfig::default(), PathBuf::new()),
    };
    let game = match &args.game {
        Some(p) => p.clone(),
        None => base.join(cfg.get::<PathBuf>("game")?.context("no game file given (--game or `game =`)")?),
    };
    let algorithms: Vec<Algorithm> = match &args.algorithms {
        Some(v) => list_arg(v, "algorithms")?,
        None => cfg.get_list("algorithms")?.unwrap_or_else(|| vec![Algorithm::SimSgda]),
    };
    let samplers: Vec<Scheme> = match &args.samplers {
        Some(v) => list_arg(v, "samplers")?,
        None => cfg.get_list("samplers")?.unwrap_or_else(|| vec![Scheme::RR]),
    };
    let batch_sizes: Vec<usize> = match &args.batch_sizes {
        Some(v) => list_arg(v, "batch-sizes")?,
        None => cfg.get_list("batch_sizes")?.unwrap_or_else(|| vec![1]),
    };
    let seeds: Vec<u64> = match &args.seeds {
        Some(v) => list_arg(v, "seeds")?,
        None => cfg.get_list("seeds")?.unwrap_or_else(|| vec![global.seed.unwrap_or(0)]),
    };
    let epochs = args.epochs.or(cfg.get("epochs")?).unwrap_or(100);
    let lambda = args.lambda.or(cfg.get("lambda")?).unwrap_or(4.0);
    let shared_seed = !args.independent_schedules && cfg.get::<bool>("shared_seed")?.unwrap_or(true);
    let alpha = args.alpha.or(cfg.get("alpha")?);
    let beta = args.beta.or(cfg.get("beta")?);
    let c0 = args.c0.or(cfg.get("c0")?);
    let c1 = args.c1.or(cfg.get("c1")?);
    let steps = match (alpha, beta) {
        (Some(a), Some(b)) => {
            ensure!(c0.is_none() && c1.is_none(), "give either (alpha, beta) or (c0, c1), not both");
            StepRule::Explicit(StepSizes::new(a, b)?)
        }
        (None, None) => StepRule::Constants {
            c0: c0.unwrap_or(1.0),
            c1: c1.unwrap_or(1.0),
        },
        _ => bail!("alpha and beta must be given together"),
    };
    ensure!(!algorithms.is_empty() && !samplers.is_empty(), "empty algorithm or sampler list");
    ensure!(!batch_sizes.is_empty() && !seeds.is_empty(), "empty batch size or seed list");
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    ensure!(sorted.len() == seeds.len(), "seeds must be distinct");
    ensure!(lambda > 0.0 && lambda.is_finite(), "lambda must be positive");
    Ok(ExperimentGrid {
        game,
        algorithms,
        samplers,
        batch_sizes,
        epochs,
        steps,
        seeds,
        shared_seed,
        lambda,
    })
}

#[derive(Debug, Clone)]
struct Cell {
    config: RunConfig,
    seed: u64,
}

fn cells(grid: &ExperimentGrid, game: &QuadraticGame) -> Result<Vec<Cell>> {
    let n = game.n();
    let mut out = Vec::new();
    for (ai, &algorithm) in grid.algorithms.iter().enumerate() {
        let combos: Vec<(usize, Scheme, usize)> = if algorithm.is_full_batch() {
            vec![(0, Scheme::NS, n)]
        } else {
            grid.samplers
                .iter()
                .enumerate()
                .flat_map(|(si, &s)| grid.batch_sizes.iter().map(move |&b| (si, s, b)))
                .collect()
        };
        for (si, sampler, b) in combos {
            let steps = match grid.steps {
                StepRule::Explicit(s) => s,
                StepRule::Constants { c0, c1 } => default_step_sizes(game, b, c0, c1)?,
            };
            for &seed in &grid.seeds {
                let schedule_seed = if grid.shared_seed {
                    seed
                } else {
                    seed ^ mix64(((ai as u64) << 40) ^ ((si as u64) << 20) ^ b as u64)
                };
                let mut config = RunConfig::new(algorithm, sampler, b, grid.epochs, steps, schedule_seed);
                config.lambda = grid.lambda;
                config
                    .validate(n)
                    .with_context(|| format!("{algorithm} with {sampler}, b = {b}"))?;
                if out.iter().any(|c: &Cell| c.config == config && c.seed == seed) {
                    continue;
                }
                out.push(Cell { config, seed });
            }
        }
    }
    Ok(out)
}

fn run_cell(game: &QuadraticGame, cell: &Cell) -> Result<Vec<RunRow>> {
    let z0 = initial_point(game.d(), game.d(), cell.seed, 1.0);
    let out = run_sgda(game, &z0, &cell.config)?;
    let v0 = out.records[0].potential;
    let status = out.status.name();
    Ok(out
        .records
        .iter()
        .map(|r| RunRow {
            algorithm: cell.config.algorithm.name().into(),
            sampler: cell.config.sampler.name().into(),
            batch_size: cell.config.batch_size,
            seed: cell.seed,
            epoch: r.epoch,
            v_lambda: r.potential,
            v_normalized: r.potential / v0,
            dist_sq: r.dist_sq,
            grad_phi_sq: r.grad_phi_sq,
            status: status.into(),
            schedule_digest: out.diagnostics.get(r.epoch).map(|d| d.schedule_digest),
        })
        .collect())
}

pub fn run(global: &Global, args: RunArgs) -> Result<()> {
    let grid = build_grid(global, &args)?;
    let (game, text) = load_game(&grid.game)?;
    let cells = cells(&grid, &game)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(global.jobs)
        .build()
        .context("building thread pool")?;
    let results: Vec<Result<Vec<RunRow>>> = pool.install(|| cells.par_iter().map(|c| run_cell(&game, c)).collect());
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    emit(global, &table::write_runs(&table::game_digest(&text), &rows, args.debug_schedules))
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    game: PathBuf,
    /// Points in the certification cloud.
    #[arg(long, default_value_t = 200)]
    cloud_size: usize,
    /// Radius of the certification cloud.
    #[arg(long, default_value_t = 5.0)]
    radius: f64,
    #[arg(long, default_value_t = 4.0)]
    lambda: f64,
}

fn fmt_point(z: &sgda_core::Point) -> String {
    let join = |v: &[f64]| v.iter().map(|t| format!("{t:.6e}")).collect::<Vec<_>>().join(" ");
    format!("x = [{}], y = [{}]", join(&z.x), join(&z.y))
}

pub fn validate(global: &Global, args: ValidateArgs) -> Result<()> {
    let (game, _) = load_game(&args.game)?;
    let mut rng = ChaCha8Rng::seed_from_u64(global.seed.unwrap_or(0));
    let report = validate_assumptions(&game, args.cloud_size, args.radius, &mut rng)?;
    let mut out = String::new();
    let mut failed = Vec::new();
    let mut line = |out: &mut String, passed: bool, name: &str, detail: &str| {
        let _ = writeln!(out, "{:<4}  {name:<28} {detail}", if passed { "PASS" } else { "FAIL" });
        if !passed {
            failed.push(name.to_string());
        }
    };
    for c in &report.checks {
        line(&mut out, c.passed, c.name, &c.detail);
        if let Some(w) = &c.witness {
            let _ = writeln!(out, "      witness: {}", fmt_point(w));
        }
    }
    let points: Vec<_> = (0..20)
        .map(|_| random_point_in_ball(game.d(), game.d(), args.radius, &mut rng))
        .collect();
    let audit = gradient_audit(&game, &points, 1e-6)?;
    line(&mut out, audit.passes(1e-6), "gradient audit", &audit.to_string());
    let spd = match game.m() {
        Some(m) => sym_eigen(m)?.min() > 1e-8,
        None => false,
    };
    if spd {
        let cloud: Vec<_> = (0..200)
            .map(|_| random_point_in_ball(game.d(), game.d(), args.radius, &mut rng))
            .collect();
        let s = sandwich_check(&game, &game.problem_constants()?, args.lambda, &cloud)?;
        line(&mut out, s.passed(), "potential sandwich", &s.to_string());
        if let Some(w) = &s.witness {
            let _ = writeln!(out, "      witness: {}", fmt_point(w));
        }
    } else {
        let _ = writeln!(out, "SKIP  {:<28} primal Hessian is singular", "potential sandwich");
    }
    let _ = writeln!(
        out,
        "variance constants: A = {}, B = {} (A = 0 fit: B = {}) on radius {}",
        report.variance.a_hat, report.variance.b_hat, report.variance_zero_a.b_hat, report.cloud_radius
    );
    let _ = writeln!(out, "largest component Hessian norm: {}", report.component_hessian_norm);
    emit(global, &out)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CheckFailed(format!("failed checks: {}", failed.join(", "))).into())
    }
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    b: usize,
    /// Prefix length in batches; every k ≤ n/b when absent.
    #[arg(long)]
    k: Option<usize>,
    /// Monte Carlo trials (used when n > 6).
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
}

/// Largest n handled by full enumeration in the `variance` command.
const EXACT_LIMIT: usize = 6;

pub fn variance(global: &Global, args: VarianceArgs) -> Result<()> {
    ensure!(args.b >= 1 && args.b <= args.n, "need 1 <= b <= n");
    let seed = global.seed.unwrap_or(0);
    let vectors = battery_vectors(args.n, seed);
    let tau2 = ComponentSpread::from_vectors(&vectors)?.tau2;
    let q = args.n / args.b;
    let ks: Vec<usize> = match args.k {
        Some(k) => vec![k],
        None => (1..=q).collect(),
    };
    let exact = args.n <= EXACT_LIMIT;
    let mut out = format!(
        "n = {}, b = {}, tau2 = {}, {}\n{:>4} {:>24} {:>24} {:>12} {:>12}\n",
        args.n,
        args.b,
        fmt_real(tau2),
        if exact { "exact enumeration" } else { "Monte Carlo" },
        "k",
        "theory",
        "estimate",
        "stderr",
        "abs_diff"
    );
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed));
    for k in ks {
        let theory = wr_prefix_variance_theory(args.n, args.b, k, tau2)?;
        let (estimate, stderr) = if exact {
            (wr_prefix_variance_exact(&vectors, args.b, k)?, 0.0)
        } else {
            wr_prefix_variance_mc(&vectors, args.b, k, args.trials, &mut rng)?
        };
        let diff = (estimate - theory).abs();
        worst = worst.max(diff);
        let _ = writeln!(
            out,
            "{k:>4} {:>24} {:>24} {stderr:>12.4e} {diff:>12.4e}",
            fmt_real(theory),
            fmt_real(estimate)
        );
    }
    emit(global, &out)?;
    if exact && worst > EXACT_VARIANCE_TOL {
        return Err(CheckFailed(format!("exact enumeration differs from theory by {worst:e}")).into());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct LowerboundArgs {
    /// 1, 2, 3, 4 or wr-sgd.
    #[arg(long)]
    case: String,
    #[arg(long = "L", default_value_t = 1.0)]
    l: f64,
    #[arg(long, default_value_t = 0.1)]
    mu1: f64,
    #[arg(long, default_value_t = 0.1)]
    mu2: f64,
    /// Step ratio β/α.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Regime constant c > 1.
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Comma-separated β values; defaults to multiples of the stability threshold.
    #[arg(long)]
    betas: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: usize,
    /// WR-SGD: number of components.
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// WR-SGD: linear coefficient ν.
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// WR-SGD: comma-separated horizons T (η = 1/(LT)).
    #[arg(long, default_value = "100,1000,10000")]
    horizons: String,
    /// WR-SGD: Monte Carlo trials per horizon.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
}

pub fn lowerbound(global: &Global, args: LowerboundArgs) -> Result<()> {
    let case = CaseId::parse(&args.case)?;
    if case == CaseId::WrSgd {
        return wr_sgd(global, &args);
    }
    let (l, mu1, mu2, r) = (args.l, args.mu1, args.mu2, args.r);
    let mut out = String::new();
    let _ = writeln!(out, "regimes (c = {}): {}", args.c, describe_regimes(l, mu1, mu2, args.c));
    let members: Vec<String> = classify(l, mu1, mu2, r, args.c).iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "r = {r} lies in case(s): {}", if members.is_empty() { "none".into() } else { members.join(", ") });
    let inst = match build_instance(case, l, mu1, mu2, r, args.c) {
        Ok(inst) => inst,
        Err(e @ CoreError::Construction(_)) => {
            print!("{out}");
            return Err(CheckFailed(e.to_string()).into());
        }
        Err(e) => return Err(e.into()),
    };
    let membership = membership_check(&inst)?;
    let _ = writeln!(
        out,
        "membership: {} ({})",
        if membership.passed { "PASS" } else { "FAIL" },
        membership.detail
    );
    if let Some(sq) = coupling_sq(case, l, mu1, mu2, r) {
        let _ = writeln!(out, "coupling squared = {}", fmt_real(sq));
        let _ = writeln!(
            out,
            "coupled threshold = {}",
            fmt_real(spectral_radius_closed(&inst, 1.0)?.threshold)
        );
    }
    let threshold = stability_threshold(&inst)?;
    let _ = writeln!(out, "stability threshold = {}", fmt_real(threshold));
    let betas: Vec<f64> = match &args.betas {
        Some(v) => list_arg(v, "betas")?,
        None => (1..=10).map(|j| threshold * j as f64 / 8.0).collect(),
    };
    let _ = writeln!(out, "{:>24} {:>24} {:>24} {:>12}", "beta", "rho_closed", "rho_map", "simulated");
    for beta in betas {
        let closed = match case {
            CaseId::One | CaseId::Two => fmt_real(spectral_radius_closed(&inst, beta)?.spectral_radius),
            _ => "-".into(),
        };
        let rho = map_radius(&inst, beta, r)?;
        let sim = simulate_gda(&inst, beta, r, args.eps, args.max_iters)?;
        let outcome = match sim.outcome {
            GdaOutcome::Reached(k) => k.to_string(),
            GdaOutcome::Diverged => "DIVERGED".into(),
            GdaOutcome::NotReached => format!(">{}", args.max_iters),
        };
        let _ = writeln!(out, "{:>24} {closed:>24} {:>24} {outcome:>12}", fmt_real(beta), fmt_real(rho));
    }
    let _ = writeln!(
        out,
        "predicted: {} = {:.4e}",
        case.predicted_rate(),
        predicted_scale(&inst, args.eps)
    );
    emit(global, &out)?;
    if membership.passed {
        Ok(())
    } else {
        Err(CheckFailed(format!("membership check failed: {}", membership.detail)).into())
    }
}

fn wr_sgd(global: &Global, args: &LowerboundArgs) -> Result<()> {
    let inst = build_wr_sgd(args.n, args.l, args.nu)?;
    let horizons: Vec<usize> = list_arg(&args.horizons, "horizons")?;
    let mut rng = ChaCha8Rng::seed_from_u64(global.seed.unwrap_or(0));
    let mut out = format!(
        "n = {}, L = {}, nu = {}, eta = 1/(L T), x0 = 0\n{:>8} {:>24} {:>24} {:>12} {:>24}\n",
        args.n, args.l, args.nu, "T", "closed_form", "monte_carlo", "stderr", "floor"
    );
    let mut pts = Vec::new();
    for &t in &horizons {
        let est = simulate_wr_sgd(&inst, 1.0 / (args.l * t as f64), t, 0.0, args.trials, &mut rng)?;
        let floor = (1.0 - (-2.0f64).exp()) * args.nu * args.nu / (4.0 * args.l * t as f64);
        let _ = writeln!(
            out,
            "{t:>8} {:>24} {:>24} {:>12.4e} {:>24}",
            fmt_real(est.closed_form),
            fmt_real(est.mean),
            est.stderr,
            fmt_real(floor)
        );
        pts.push(((t as f64).ln(), est.closed_form.ln()));
    }
    if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let _ = writeln!(out, "log-log slope = {slope:.6}");
    }
    let _ = writeln!(out, "predicted: {}", CaseId::WrSgd.predicted_rate());
    emit(global, &out)
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Runs CSV files, all from the same game.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Also write an SVG chart here.
    #[arg(long)]
    svg: Option<PathBuf>,
}

pub fn aggregate(global: &Global, args: AggregateArgs) -> Result<()> {
    let mut game: Option<(String, PathBuf)> = None;
    let mut rows = Vec::new();
    for path in &args.runs {
        let file = table::read_runs(&read(path)?).with_context(|| format!("runs file {}", path.display()))?;
        if let Some(g) = file.game {
            match &game {
                Some((first, p)) if *first != g => bail!(
                    "runs come from different games: {} ({}) and {} ({})",
                    first,
                    p.display(),
                    g,
                    path.display()
                ),
                Some(_) => {}
                None => game = Some((g, path.clone())),
            }
        }
        rows.extend(file.rows);
    }
    let agg = table::aggregate(&rows);
    ensure!(!agg.is_empty(), "no finite values to aggregate");
    if let Some(path) = &args.svg {
        fs::write(path, svg::render(&agg)).with_context(|| format!("writing {}", path.display()))?;
    }
    emit(global, &table::write_aggregate(&agg))
}
