//! The SGDA family: simultaneous, alternating, epoch-wise alternating (AGDA)
//! and full-batch GDA, with trajectory recording and epoch diagnostics.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::problem::{dist_sq, norm_sq, MinimaxProblem, Point, SaddleProblem, StepSizes};
use crate::quadgame::QuadraticGame;
use crate::sampling::{epoch_schedule, mix64, BatchSchedule, Scheme};

/// Iterates with any coordinate beyond this magnitude count as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e100;

/// Optimizer variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Simultaneous SGDA: both gradients at the old point.
    SimSgda,
    /// Alternating SGDA: the y-gradient is taken at the new x.
    AltSgda,
    /// Epoch-wise alternating: a full x sweep, then a full y sweep.
    Agda,
    /// Full-batch simultaneous GDA, one step per epoch.
    GdaSim,
    /// Full-batch alternating GDA, one step per epoch.
    GdaAlt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::SimSgda,
        Algorithm::AltSgda,
        Algorithm::Agda,
        Algorithm::GdaSim,
        Algorithm::GdaAlt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::SimSgda => "simSGDA",
            Algorithm::AltSgda => "altSGDA",
            Algorithm::Agda => "AGDA",
            Algorithm::GdaSim => "GDA-sim",
            Algorithm::GdaAlt => "GDA-alt",
        }
    }

    /// Full-batch variants ignore the sampler and batch size.
    pub fn is_full_batch(&self) -> bool {
        matches!(self, Algorithm::GdaSim | Algorithm::GdaAlt)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sim" | "simsgda" => Ok(Algorithm::SimSgda),
            "alt" | "altsgda" => Ok(Algorithm::AltSgda),
            "agda" => Ok(Algorithm::Agda),
            "gda-sim" | "gdasim" | "simgda" => Ok(Algorithm::GdaSim),
            "gda-alt" | "gdaalt" | "altgda" => Ok(Algorithm::GdaAlt),
            other => Err(invalid("algorithm", format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Configuration of one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub sampler: Scheme,
    pub batch_size: usize,
    /// Number of epochs K.
    pub epochs: usize,
    pub steps: StepSizes,
    /// Potential weight λ (default 4).
    pub lambda: f64,
    /// Seed of the epoch schedules. Runs sharing a seed see identical schedules.
    pub seed: u64,
    /// Keep every inner iterate, not only epoch starts.
    pub record_iterations: bool,
    /// Stop with [`RunStatus::Converged`] once `V_λ` drops to this value.
    pub target_potential: Option<f64>,
}

impl RunConfig {
    pub fn new(
        algorithm: Algorithm,
        sampler: Scheme,
        batch_size: usize,
        epochs: usize,
        steps: StepSizes,
        seed: u64,
    ) -> Self {
        Self {
            algorithm,
            sampler,
            batch_size,
            epochs,
            steps,
            lambda: 4.0,
            seed,
            record_iterations: false,
            target_potential: None,
        }
    }

    /// Checks the configuration against a problem with `n` components.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if self.algorithm.is_full_batch() {
            return Ok(());
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(invalid(
                "batch_size",
                format!("need 1 <= b <= n = {n}, got {}", self.batch_size),
            ));
        }
        if self.sampler.requires_divisible() && n % self.batch_size != 0 {
            return Err(invalid(
                "batch_size",
                format!("b = {} must divide n = {n} under {}", self.batch_size, self.sampler),
            ));
        }
        Ok(())
    }
}

/// Terminal state of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Reached the target potential.
    Converged,
    /// Ran all K epochs.
    Budget,
    /// Produced a non-finite or huge iterate.
    Diverged,
}

impl RunStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RunStatus::Converged => "Converged",
            RunStatus::Budget => "Budget",
            RunStatus::Diverged => "Diverged",
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Snapshot at the start of an epoch (the last record holds the final iterate).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub epoch: usize,
    pub point: Point,
    pub potential: f64,
    /// `‖z − z*‖²` when the saddle point is known.
    pub dist_sq: Option<f64>,
    /// `‖∇Φ(x)‖²`.
    pub grad_phi_sq: f64,
    /// One-sided component gradient evaluations consumed so far.
    pub gradient_evals: u64,
}

/// Per-epoch averages `gᵏ`, `hᵏ` and drift `G_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDiagnostics {
    pub epoch: usize,
    pub g_bar: Vec<f64>,
    pub h_bar: Vec<f64>,
    pub drift: f64,
    /// Number of batches q in the epoch.
    pub q: usize,
    /// Digest of the epoch schedule, for cross-run comparisons.
    pub schedule_digest: u64,
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<TrajectoryRecord>,
    pub diagnostics: Vec<EpochDiagnostics>,
    pub status: RunStatus,
    /// Every inner iterate, when requested.
    pub iterates: Vec<Point>,
}

/// Result of a single update.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Finite(Point),
    Diverged,
}

fn diverged(v: &[f64]) -> bool {
    v.iter().any(|t| !t.is_finite() || t.abs() > DIVERGENCE_THRESHOLD)
}

fn check_batch<P: MinimaxProblem + ?Sized>(problem: &P, batch: &[usize]) -> Result<()> {
    if batch.is_empty() {
        return Err(invalid("batch", "batch must be nonempty"));
    }
    let n = problem.num_components();
    if let Some(&i) = batch.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    Ok(())
}

/// `x ± (step/b)·sum`, the shared update kernel.
fn apply(x: &[f64], sum: &[f64], scale: f64) -> Vec<f64> {
    x.iter().zip(sum).map(|(a, s)| a + scale * s).collect()
}

fn finish(x: Vec<f64>, y: Vec<f64>) -> Step {
    if diverged(&x) || diverged(&y) {
        Step::Diverged
    } else {
        Step::Finite(Point { x, y })
    }
}

/// One simultaneous step: both gradients at the old point.
pub fn sim_step<P: MinimaxProblem + ?Sized>(
    problem: &P,
    batch: &[usize],
    z: &Point,
    steps: &StepSizes,
) -> Result<Step> {
    check_batch(problem, batch)?;
    problem.check_point(z)?;
    let b = batch.len() as f64;
    let gx = problem.batch_sum_grad_x(batch, &z.x, &z.y);
    let gy = problem.batch_sum_grad_y(batch, &z.x, &z.y);
    Ok(finish(
        apply(&z.x, &gx, -steps.alpha() / b),
        apply(&z.y, &gy, steps.beta() / b),
    ))
}

/// One alternating step: the y-gradient is taken at the new x.
pub fn alt_step<P: MinimaxProblem + ?Sized>(
    problem: &P,
    batch: &[usize],
    z: &Point,
    steps: &StepSizes,
) -> Result<Step> {
    check_batch(problem, batch)?;
    problem.check_point(z)?;
    let b = batch.len() as f64;
    let gx = problem.batch_sum_grad_x(batch, &z.x, &z.y);
    let x_new = apply(&z.x, &gx, -steps.alpha() / b);
    let gy = problem.batch_sum_grad_y(batch, &x_new, &z.y);
    Ok(finish(x_new, apply(&z.y, &gy, steps.beta() / b)))
}

/// One AGDA epoch: sweep every batch updating x with y frozen, then sweep
/// every batch updating y at the new x.
pub fn agda_epoch<P: MinimaxProblem + ?Sized>(
    problem: &P,
    schedule: &BatchSchedule,
    z: &Point,
    steps: &StepSizes,
) -> Result<Step> {
    problem.check_point(z)?;
    for batch in &schedule.batches {
        check_batch(problem, batch)?;
    }
    Ok(match epoch_engine(problem, Algorithm::Agda, &schedule.batches, z, steps, false) {
        EpochResult::Done { end, .. } => Step::Finite(end),
        EpochResult::Diverged => Step::Diverged,
    })
}

enum EpochResult {
    Done {
        end: Point,
        g_bar: Vec<f64>,
        h_bar: Vec<f64>,
        drift: f64,
        iterates: Vec<Point>,
    },
    Diverged,
}

/// Runs one epoch over `batches` (already validated).
fn epoch_engine<P: MinimaxProblem + ?Sized>(
    problem: &P,
    algorithm: Algorithm,
    batches: &[Vec<usize>],
    z0: &Point,
    steps: &StepSizes,
    keep_iterates: bool,
) -> EpochResult {
    let q = batches.len();
    let (alpha, beta) = (steps.alpha(), steps.beta());
    let mut g_sum = vec![0.0; z0.x.len()];
    let mut h_sum = vec![0.0; z0.y.len()];
    let mut drift = 0.0;
    let mut iterates = Vec::new();
    let mut x = z0.x.clone();
    let mut y = z0.y.clone();

    let accumulate = |acc: &mut [f64], sum: &[f64], b: f64| {
        for (a, s) in acc.iter_mut().zip(sum) {
            *a += s / b;
        }
    };

    if algorithm == Algorithm::Agda {
        let mut xs = Vec::with_capacity(q);
        for batch in batches {
            xs.push(dist_sq(&x, &z0.x));
            let b = batch.len() as f64;
            let gx = problem.batch_sum_grad_x(batch, &x, &z0.y);
            accumulate(&mut g_sum, &gx, b);
            x = apply(&x, &gx, -alpha / b);
            if diverged(&x) {
                return EpochResult::Diverged;
            }
            if keep_iterates {
                iterates.push(Point { x: x.clone(), y: y.clone() });
            }
        }
        for (t, batch) in batches.iter().enumerate() {
            drift += xs[t] + dist_sq(&y, &z0.y);
            let b = batch.len() as f64;
            let gy = problem.batch_sum_grad_y(batch, &x, &y);
            accumulate(&mut h_sum, &gy, b);
            y = apply(&y, &gy, beta / b);
            if diverged(&y) {
                return EpochResult::Diverged;
            }
            if keep_iterates {
                iterates.push(Point { x: x.clone(), y: y.clone() });
            }
        }
    } else {
        let alternating = matches!(algorithm, Algorithm::AltSgda | Algorithm::GdaAlt);
        for batch in batches {
            drift += dist_sq(&x, &z0.x) + dist_sq(&y, &z0.y);
            let b = batch.len() as f64;
            let gx = problem.batch_sum_grad_x(batch, &x, &y);
            let x_new = apply(&x, &gx, -alpha / b);
            let gy = if alternating {
                problem.batch_sum_grad_y(batch, &x_new, &y)
            } else {
                problem.batch_sum_grad_y(batch, &x, &y)
            };
            accumulate(&mut g_sum, &gx, b);
            accumulate(&mut h_sum, &gy, b);
            x = x_new;
            y = apply(&y, &gy, beta / b);
            if diverged(&x) || diverged(&y) {
                return EpochResult::Diverged;
            }
            if keep_iterates {
                iterates.push(Point { x: x.clone(), y: y.clone() });
            }
        }
    }
    let qf = q as f64;
    EpochResult::Done {
        end: Point { x, y },
        g_bar: g_sum.into_iter().map(|g| g / qf).collect(),
        h_bar: h_sum.into_iter().map(|h| h / qf).collect(),
        drift: drift / qf,
        iterates,
    }
}

/// The schedule used by `config` in `epoch` for a problem with n components.
pub fn schedule_for(config: &RunConfig, n: usize, epoch: usize) -> Result<BatchSchedule> {
    if config.algorithm.is_full_batch() {
        return Ok(BatchSchedule {
            batches: vec![(0..n).collect()],
            scheme: Scheme::NS,
            batch_size: n,
        });
    }
    epoch_schedule(config.sampler, n, config.batch_size, config.seed, epoch as u64)
}

fn record<P: SaddleProblem + ?Sized>(
    problem: &P,
    epoch: usize,
    z: &Point,
    lambda: f64,
    saddle: Option<&Point>,
    gradient_evals: u64,
) -> TrajectoryRecord {
    TrajectoryRecord {
        epoch,
        point: z.clone(),
        potential: problem.potential(z, lambda),
        dist_sq: saddle.map(|s| z.dist_sq(s).expect("saddle has problem dimensions")),
        grad_phi_sq: norm_sq(&problem.primal_gradient(&z.x)),
        gradient_evals,
    }
}

/// Runs K epochs from `z0`. Records carry `V_λ` at every epoch start plus the
/// final iterate; a divergent run stops early with partial records.
pub fn run<P: SaddleProblem + ?Sized>(problem: &P, z0: &Point, config: &RunConfig) -> Result<RunOutcome> {
    let n = problem.num_components();
    config.validate(n)?;
    problem.check_point(z0)?;
    let saddle = problem.saddle();
    let mut z = z0.clone();
    let mut evals = 0u64;
    let mut records = vec![record(problem, 0, &z, config.lambda, saddle.as_ref(), evals)];
    let mut diagnostics = Vec::with_capacity(config.epochs);
    let mut iterates = Vec::new();
    if config.record_iterations {
        iterates.push(z.clone());
    }
    let reached = |r: &TrajectoryRecord| config.target_potential.is_some_and(|t| r.potential <= t);
    if reached(&records[0]) {
        return Ok(RunOutcome {
            records,
            diagnostics,
            status: RunStatus::Converged,
            iterates,
        });
    }

    for epoch in 0..config.epochs {
        let schedule = schedule_for(config, n, epoch)?;
        let result = epoch_engine(
            problem,
            config.algorithm,
            &schedule.batches,
            &z,
            &config.steps,
            config.record_iterations,
        );
        let EpochResult::Done {
            end,
            g_bar,
            h_bar,
            drift,
            iterates: inner,
        } = result
        else {
            return Ok(RunOutcome {
                records,
                diagnostics,
                status: RunStatus::Diverged,
                iterates,
            });
        };
        let used: usize = schedule.batches.iter().map(Vec::len).sum();
        evals += 2 * used as u64;
        diagnostics.push(EpochDiagnostics {
            epoch,
            g_bar,
            h_bar,
            drift,
            q: schedule.q(),
            schedule_digest: schedule.digest(),
        });
        iterates.extend(inner);
        z = end;
        let rec = record(problem, epoch + 1, &z, config.lambda, saddle.as_ref(), evals);
        let done = reached(&rec);
        let potential_ok = rec.potential.is_finite();
        records.push(rec);
        if !potential_ok {
            return Ok(RunOutcome {
                records,
                diagnostics,
                status: RunStatus::Diverged,
                iterates,
            });
        }
        if done {
            return Ok(RunOutcome {
                records,
                diagnostics,
                status: RunStatus::Converged,
                iterates,
            });
        }
    }
    Ok(RunOutcome {
        records,
        diagnostics,
        status: RunStatus::Budget,
        iterates,
    })
}

/// `β = c1·b/(nL)`, `α = c0·β/κ₂²`.
pub fn step_sizes_from_constants(n: usize, l: f64, kappa2: f64, b: usize, c0: f64, c1: f64) -> Result<StepSizes> {
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(invalid("c0", format!("must be positive, got {c0}")));
    }
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(invalid("c1", format!("must be positive, got {c1}")));
    }
    let beta = c1 * b as f64 / (n as f64 * l);
    StepSizes::new(c0 * beta / (kappa2 * kappa2), beta)
}

/// The tuned step-size rule for a quadratic game.
pub fn default_step_sizes(game: &QuadraticGame, b: usize, c0: f64, c1: f64) -> Result<StepSizes> {
    let k = game.constants();
    step_sizes_from_constants(game.n(), k.l, k.kappa2(), b, c0, c1)
}

/// Small-step rule `β = 1/(6L√(q² + q(q−1)A/(n−1)))`, `α = β/r`.
pub fn small_step_sizes(n: usize, b: usize, l: f64, a_hat: f64, r: f64) -> Result<StepSizes> {
    let q = (n / b.max(1)).max(1) as f64;
    let spread = if n > 1 { q * (q - 1.0) * a_hat / (n as f64 - 1.0) } else { 0.0 };
    let beta = 1.0 / (6.0 * l * (q * q + spread).sqrt());
    StepSizes::from_ratio(beta, r)
}

/// Deterministic N(0, scale²) starting point derived from `seed`.
pub fn initial_point(dim_x: usize, dim_y: usize, seed: u64, scale: f64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ 0x5eed_1417));
    let mut draw = |k: usize| -> Vec<f64> {
        (0..k)
            .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect()
    };
    let x = draw(dim_x);
    let y = draw(dim_y);
    Point { x, y }
}

/// Exponents of the step-constant grid `c ∈ 10^{−2, −1.5, …, 1}`.
pub const STEP_GRID_EXPONENTS: [f64; 7] = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0];

/// Best `(c0, c1)` found by [`tune_step_constants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedConstants {
    pub c0: f64,
    pub c1: f64,
    /// Mean final normalized `V_λ` over the tuning seeds.
    pub score: f64,
}

/// Mean of `V_λ(z_K)/V_λ(z_0)` over `seeds`, starting each run from
/// [`initial_point`] with unit scale; infinite if any run diverges.
pub fn final_normalized_potential(game: &QuadraticGame, template: &RunConfig, seeds: &[u64]) -> Result<f64> {
    let mut total = 0.0;
    for &seed in seeds {
        let z0 = initial_point(game.d(), game.d(), seed, 1.0);
        let config = RunConfig { seed, ..template.clone() };
        let out = run(game, &z0, &config)?;
        let first = out.records[0].potential;
        let last = out.records.last().expect("records start at epoch 0").potential;
        if out.status == RunStatus::Diverged || !(last / first).is_finite() {
            return Ok(f64::INFINITY);
        }
        total += last / first;
    }
    Ok(total / seeds.len().max(1) as f64)
}

/// Grid search over [`STEP_GRID_EXPONENTS`]² for the step rule
/// `β = c1·b/(nL)`, `α = c0·β/κ₂²`. Ties keep the earlier grid point.
pub fn tune_step_constants(game: &QuadraticGame, template: &RunConfig, seeds: &[u64]) -> Result<TunedConstants> {
    let mut best = TunedConstants {
        c0: f64::NAN,
        c1: f64::NAN,
        score: f64::INFINITY,
    };
    for e0 in STEP_GRID_EXPONENTS {
        for e1 in STEP_GRID_EXPONENTS {
            let (c0, c1) = (10f64.powf(e0), 10f64.powf(e1));
            let config = RunConfig {
                steps: default_step_sizes(game, template.batch_size, c0, c1)?,
                ..template.clone()
            };
            let score = final_normalized_potential(game, &config, seeds)?;
            if score < best.score {
                best = TunedConstants { c0, c1, score };
            }
        }
    }
    if best.score.is_infinite() {
        return Err(invalid("steps", "every grid point diverged"));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadgame::{generate_game, GameGenConfig};
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    /// f(x; y) = x·y.
    struct Bilinear;

    impl MinimaxProblem for Bilinear {
        fn num_components(&self) -> usize {
            1
        }
        fn dim_x(&self) -> usize {
            1
        }
        fn dim_y(&self) -> usize {
            1
        }
        fn component_value(&self, _: usize, x: &[f64], y: &[f64]) -> f64 {
            x[0] * y[0]
        }
        fn component_grad_x(&self, _: usize, _: &[f64], y: &[f64]) -> Vec<f64> {
            vec![y[0]]
        }
        fn component_grad_y(&self, _: usize, x: &[f64], _: &[f64]) -> Vec<f64> {
            vec![x[0]]
        }
    }

    /// Separable f_i(x; y) = ½a_i x² − ½c_i y² + s_i x, three components.
    struct Separable;

    const SEP_A: [f64; 3] = [1.0, 2.0, 0.5];
    const SEP_C: [f64; 3] = [1.5, 0.5, 1.0];
    const SEP_S: [f64; 3] = [1.0, -2.0, 1.0];

    impl MinimaxProblem for Separable {
        fn num_components(&self) -> usize {
            3
        }
        fn dim_x(&self) -> usize {
            1
        }
        fn dim_y(&self) -> usize {
            1
        }
        fn component_value(&self, i: usize, x: &[f64], y: &[f64]) -> f64 {
            0.5 * SEP_A[i] * x[0] * x[0] - 0.5 * SEP_C[i] * y[0] * y[0] + SEP_S[i] * x[0]
        }
        fn component_grad_x(&self, i: usize, x: &[f64], _: &[f64]) -> Vec<f64> {
            vec![SEP_A[i] * x[0] + SEP_S[i]]
        }
        fn component_grad_y(&self, i: usize, _: &[f64], y: &[f64]) -> Vec<f64> {
            vec![-SEP_C[i] * y[0]]
        }
    }

    fn pt(x: f64, y: f64) -> Point {
        Point::new(vec![x], vec![y]).unwrap()
    }

    fn finite(s: Step) -> Point {
        match s {
            Step::Finite(p) => p,
            Step::Diverged => panic!("diverged"),
        }
    }

    #[test]
    fn bilinear_sim_vs_alt() {
        let steps = StepSizes::new(0.1, 0.1).unwrap();
        let sim = finite(sim_step(&Bilinear, &[0], &pt(1.0, 1.0), &steps).unwrap());
        let alt = finite(alt_step(&Bilinear, &[0], &pt(1.0, 1.0), &steps).unwrap());
        assert_eq!(sim, pt(0.9, 1.1));
        assert_eq!(alt.x, vec![0.9]);
        assert!((alt.y[0] - 1.09).abs() < 1e-15);

        let from_axis = pt(1.0, 0.0);
        let sim = finite(sim_step(&Bilinear, &[0], &from_axis, &steps).unwrap());
        let alt = finite(alt_step(&Bilinear, &[0], &from_axis, &steps).unwrap());
        assert_eq!(sim, pt(1.0, 0.1));
        assert_eq!(alt, pt(1.0, 0.1));
    }

    #[test]
    fn zero_gradient_is_fixed_point_and_bad_batches_rejected() {
        let steps = StepSizes::new(0.3, 0.2).unwrap();
        let origin = pt(0.0, 0.0);
        assert_eq!(finite(sim_step(&Bilinear, &[0], &origin, &steps).unwrap()), origin);
        assert!(sim_step(&Bilinear, &[], &origin, &steps).is_err());
        assert!(matches!(
            alt_step(&Bilinear, &[1], &origin, &steps),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn divergence_is_flagged() {
        let steps = StepSizes::new(1e200, 1e200).unwrap();
        assert_eq!(sim_step(&Bilinear, &[0], &pt(1.0, 1.0), &steps).unwrap(), Step::Diverged);
    }

    #[test]
    fn separable_sim_equals_alt_and_agda_matches_alt_epochs() {
        let steps = StepSizes::new(0.1, 0.3).unwrap();
        let z = pt(2.0, -1.0);
        for i in 0..3 {
            let a = sim_step(&Separable, &[i], &z, &steps).unwrap();
            let b = alt_step(&Separable, &[i], &z, &steps).unwrap();
            assert_eq!(a, b);
        }
        let schedule = BatchSchedule {
            batches: vec![vec![2], vec![0], vec![1]],
            scheme: Scheme::RR,
            batch_size: 1,
        };
        let agda = finite(agda_epoch(&Separable, &schedule, &z, &steps).unwrap());
        let mut w = z.clone();
        for batch in &schedule.batches {
            w = finite(alt_step(&Separable, batch, &w, &steps).unwrap());
        }
        assert_eq!(agda, w);
    }

    #[test]
    fn agda_single_batch_is_one_alt_step() {
        let steps = StepSizes::new(0.2, 0.1).unwrap();
        let schedule = BatchSchedule {
            batches: vec![vec![0]],
            scheme: Scheme::RR,
            batch_size: 1,
        };
        let z = pt(0.7, -0.4);
        assert_eq!(
            agda_epoch(&Bilinear, &schedule, &z, &steps).unwrap(),
            alt_step(&Bilinear, &[0], &z, &steps).unwrap()
        );
    }

    fn small_game(seed: u64, rank_deficiency: usize) -> QuadraticGame {
        generate_game(&GameGenConfig {
            n: 6,
            d: 4,
            rank_deficiency,
            seed,
            ..GameGenConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_epochs_gives_single_record() {
        let g = small_game(1, 1);
        let z0 = initial_point(4, 4, 3, 1.0);
        let cfg = RunConfig::new(Algorithm::SimSgda, Scheme::RR, 1, 0, StepSizes::new(0.01, 0.1).unwrap(), 0);
        let out = run(&g, &z0, &cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].point, z0);
        assert!(out.diagnostics.is_empty());
        assert_eq!(out.status, RunStatus::Budget);
    }

    #[test]
    fn full_batch_rr_equals_gda_bit_exactly() {
        let g = small_game(2, 1);
        let z0 = initial_point(4, 4, 9, 2.0);
        let steps = default_step_sizes(&g, 6, 1.0, 0.5).unwrap();
        let rr = RunConfig::new(Algorithm::SimSgda, Scheme::RR, 6, 50, steps, 17);
        let gda = RunConfig::new(Algorithm::GdaSim, Scheme::RR, 1, 50, steps, 99);
        let a = run(&g, &z0, &rr).unwrap();
        let b = run(&g, &z0, &gda).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn gda_on_sc_sc_game_decreases_potential() {
        let g = small_game(4, 0);
        let k = g.constants();
        let steps = small_step_sizes(g.n(), g.n(), k.l, 0.0, 14.0 * k.kappa2().powi(2)).unwrap();
        let z0 = initial_point(4, 4, 5, 1.0);
        let cfg = RunConfig::new(Algorithm::GdaSim, Scheme::RR, 1, 100, steps, 0);
        let out = run(&g, &z0, &cfg).unwrap();
        let v0 = out.records[0].potential;
        for w in out.records.windows(2) {
            assert!(w[1].potential < w[0].potential + 1e-12 * v0);
        }
    }

    #[test]
    fn step_size_rule() {
        let s = step_sizes_from_constants(10, 4.0, 10.0, 10, 1.0, 1.0).unwrap();
        assert_eq!(s.beta(), 0.25);
        let s = step_sizes_from_constants(100, 4.0, 10.0, 1, 1.0, 0.1).unwrap();
        assert!((s.beta() - 2.5e-4).abs() < 1e-18);
        assert!((s.alpha() - s.beta() / 100.0).abs() < 1e-20);
        assert!(step_sizes_from_constants(100, 4.0, 10.0, 1, 0.0, 0.1).is_err());
        let s = small_step_sizes(1, 1, 2.0, 0.0, 14.0).unwrap();
        assert_eq!(s.beta(), 1.0 / 12.0);
    }

    #[test]
    fn config_validation() {
        let steps = StepSizes::new(0.1, 0.1).unwrap();
        let cfg = RunConfig::new(Algorithm::SimSgda, Scheme::RR, 4, 1, steps, 0);
        assert!(cfg.validate(6).is_err());
        assert!(cfg.validate(8).is_ok());
        let wr = RunConfig {
            sampler: Scheme::WR,
            ..cfg.clone()
        };
        assert!(wr.validate(6).is_ok());
        let bad = RunConfig { lambda: 0.0, ..cfg };
        assert!(bad.validate(8).is_err());
        assert_eq!("gda-sim".parse::<Algorithm>().unwrap(), Algorithm::GdaSim);
        assert!("adam".parse::<Algorithm>().is_err());
    }

    #[test]
    fn diverging_run_stops_with_partial_records() {
        let g = small_game(5, 1);
        let z0 = initial_point(4, 4, 1, 1.0);
        let cfg = RunConfig::new(Algorithm::SimSgda, Scheme::RR, 1, 500, StepSizes::new(5.0, 5.0).unwrap(), 0);
        let out = run(&g, &z0, &cfg).unwrap();
        assert_eq!(out.status, RunStatus::Diverged);
        assert!(out.records.len() < 501);
        assert!(out.records.iter().all(|r| r.point.is_finite()));
    }

    #[test]
    fn target_potential_converges() {
        let g = small_game(6, 0);
        let k = g.constants();
        let steps = small_step_sizes(g.n(), g.n(), k.l, 0.0, 14.0 * k.kappa2().powi(2)).unwrap();
        let z0 = initial_point(4, 4, 2, 1.0);
        let mut cfg = RunConfig::new(Algorithm::GdaAlt, Scheme::RR, 1, 10_000, steps, 0);
        let v0 = run(&g, &z0, &RunConfig { epochs: 0, ..cfg.clone() }).unwrap().records[0].potential;
        cfg.target_potential = Some(0.9 * v0);
        let out = run(&g, &z0, &cfg).unwrap();
        assert_eq!(out.status, RunStatus::Converged);
        assert!(out.records.last().unwrap().potential <= 0.9 * v0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn epoch_identity_and_determinism(
            seed in 0u64..1000,
            alg in 0usize..3,
            sampler in 0usize..4,
            b in proptest::sample::select(vec![1usize, 2, 3, 6]),
        ) {
            let g = small_game(seed % 7, 1);
            let algorithm = [Algorithm::SimSgda, Algorithm::AltSgda, Algorithm::Agda][alg];
            let scheme = Scheme::ALL[sampler];
            let steps = default_step_sizes(&g, b, 1.0, 0.3).unwrap();
            let mut cfg = RunConfig::new(algorithm, scheme, b, 4, steps, seed);
            cfg.record_iterations = true;
            let z0 = initial_point(4, 4, seed, 1.0);
            let out = run(&g, &z0, &cfg).unwrap();
            prop_assert_eq!(out.status, RunStatus::Budget);
            let again = run(&g, &z0, &cfg).unwrap();
            prop_assert_eq!(&out.records, &again.records);
            for (k, diag) in out.diagnostics.iter().enumerate() {
                let q = diag.q as f64;
                let (start, end) = (&out.records[k].point, &out.records[k + 1].point);
                for j in 0..4 {
                    let dx = end.x[j] - start.x[j];
                    let pred = -q * steps.alpha() * diag.g_bar[j];
                    // Relative to the iterate scale: x₀ᵏ⁺¹ − x₀ᵏ itself can cancel.
                    let scale = start.x[j].abs().max(end.x[j].abs()).max(pred.abs());
                    prop_assert!((dx - pred).abs() <= 1e-10 * scale);
                    let dy = end.y[j] - start.y[j];
                    let pred = q * steps.beta() * diag.h_bar[j];
                    let scale = start.y[j].abs().max(end.y[j].abs()).max(pred.abs());
                    prop_assert!((dy - pred).abs() <= 1e-10 * scale);
                }
                prop_assert!(diag.drift >= 0.0);
                if diag.q == 1 {
                    prop_assert_eq!(diag.drift, 0.0);
                }
            }
            prop_assert!(out.records.windows(2).all(|w| w[0].epoch < w[1].epoch));
        }
    }
}
