//! Executable checks over any problem: finite-difference gradient audits,
//! the potential sandwich, the without-replacement variance battery and
//! the within-epoch drift bound.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::optimizer::{sim_step, Step};
use crate::problem::{MinimaxProblem, Point, ProblemConstants, SaddleProblem, StepSizes};
use crate::sampling::{
    for_each_permutation, wr_prefix_variance_exact, wr_prefix_variance_mc, wr_prefix_variance_theory,
    ComponentSpread, MAX_EXACT_N,
};

/// Absolute tolerance of the exact variance tier.
pub const EXACT_VARIANCE_TOL: f64 = 1e-12;
/// Relative slack of the sandwich inequalities.
pub const SANDWICH_SLACK: f64 = 1e-8;
/// Monte Carlo acceptance band, in standard errors.
pub const MC_SIGMAS: f64 = 4.0;

/// Result of [`gradient_audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientAuditReport {
    /// Largest `|g − ĝ| / max(1, |g|)` over all coordinates checked.
    pub max_rel_error: f64,
    /// `(component, point index)` attaining the maximum.
    pub worst: Option<(usize, usize)>,
    pub points: usize,
    pub components: usize,
}

impl GradientAuditReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

impl fmt::Display for GradientAuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "gradient audit: {} components x {} points, max relative error {:.3e}",
            self.components, self.points, self.max_rel_error
        )?;
        if let Some((i, p)) = self.worst {
            write!(f, " (component {i}, point {p})")?;
        }
        Ok(())
    }
}

/// Compares analytic component gradients with central differences using
/// step `h_base·(1 + ‖z‖)` at every point and every component.
pub fn gradient_audit<P: MinimaxProblem + ?Sized>(problem: &P, points: &[Point], h_base: f64) -> Result<GradientAuditReport> {
    if !(h_base > 0.0 && h_base.is_finite()) {
        return Err(invalid("h", format!("must be positive, got {h_base}")));
    }
    let n = problem.num_components();
    let mut max_rel_error = 0.0f64;
    let mut worst = None;
    for (p, z) in points.iter().enumerate() {
        problem.check_point(z)?;
        let h = h_base * (1.0 + z.norm_sq().sqrt());
        let mut x = z.x.clone();
        let mut y = z.y.clone();
        for i in 0..n {
            let gx = problem.component_grad_x(i, &z.x, &z.y);
            let gy = problem.component_grad_y(i, &z.x, &z.y);
            let mut err = 0.0f64;
            for j in 0..x.len() {
                let orig = x[j];
                x[j] = orig + h;
                let up = problem.component_value(i, &x, &y);
                x[j] = orig - h;
                let down = problem.component_value(i, &x, &y);
                x[j] = orig;
                err = err.max(rel_error(gx[j], (up - down) / (2.0 * h)));
            }
            for j in 0..y.len() {
                let orig = y[j];
                y[j] = orig + h;
                let up = problem.component_value(i, &x, &y);
                y[j] = orig - h;
                let down = problem.component_value(i, &x, &y);
                y[j] = orig;
                err = err.max(rel_error(gy[j], (up - down) / (2.0 * h)));
            }
            if err > max_rel_error || worst.is_none() && err > 0.0 {
                max_rel_error = err;
                worst = Some((i, p));
            }
        }
    }
    Ok(GradientAuditReport {
        max_rel_error,
        worst,
        points: points.len(),
        components: n,
    })
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let e = (analytic - numeric).abs() / analytic.abs().max(1.0);
    if e.is_nan() {
        f64::INFINITY
    } else {
        e
    }
}

/// Coefficients `(c_lo, c_hi)` with `c_lo‖z − z*‖² ≤ V_λ(z) ≤ c_hi‖z − z*‖²`.
pub fn sandwich_coefficients(constants: &ProblemConstants, lambda: f64) -> (f64, f64) {
    let (l, mu1, mu2) = (constants.l, constants.mu1, constants.mu2);
    let lo = lambda * mu1 * mu2 * mu2 / (2.0 * (lambda * mu1 * mu2 + 2.0 * l * l));
    let hi = (lambda + 1.0) * l.powi(3) / (mu2 * mu2);
    (lo, hi)
}

/// Result of [`sandwich_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub lower_coeff: f64,
    pub upper_coeff: f64,
    pub points: usize,
    pub violations: usize,
    /// Smallest `(V − c_lo d)/(1 + V)` seen.
    pub min_lower_margin: f64,
    /// Smallest `(c_hi d − V)/(1 + V)` seen.
    pub min_upper_margin: f64,
    /// First violating point.
    pub witness: Option<Point>,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for SandwichReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sandwich [{:.4e}, {:.4e}]: {} points, {} violations, margins lower {:.3e} upper {:.3e}",
            self.lower_coeff, self.upper_coeff, self.points, self.violations, self.min_lower_margin, self.min_upper_margin
        )
    }
}

/// Checks both sandwich inequalities at every point with slack `1e-8·(1 + V_λ)`.
/// The problem must expose its saddle point.
pub fn sandwich_check<P: SaddleProblem + ?Sized>(
    problem: &P,
    constants: &ProblemConstants,
    lambda: f64,
    points: &[Point],
) -> Result<SandwichReport> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    let saddle = problem
        .saddle()
        .ok_or_else(|| invalid("problem", "sandwich check needs a unique saddle point"))?;
    let (lo, hi) = sandwich_coefficients(constants, lambda);
    let mut report = SandwichReport {
        lower_coeff: lo,
        upper_coeff: hi,
        points: points.len(),
        violations: 0,
        min_lower_margin: f64::INFINITY,
        min_upper_margin: f64::INFINITY,
        witness: None,
    };
    for z in points {
        let d = z.dist_sq(&saddle)?;
        let v = problem.potential(z, lambda);
        let scale = 1.0 + v.abs();
        let lower = (v - lo * d) / scale;
        let upper = (hi * d - v) / scale;
        report.min_lower_margin = report.min_lower_margin.min(lower);
        report.min_upper_margin = report.min_upper_margin.min(upper);
        if !(lower >= -SANDWICH_SLACK && upper >= -SANDWICH_SLACK) {
            report.violations += 1;
            if report.witness.is_none() {
                report.witness = Some(z.clone());
            }
        }
    }
    Ok(report)
}

/// Which estimator a variance row used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceTier {
    Exact,
    MonteCarlo,
}

impl fmt::Display for VarianceTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceTier::Exact => "exact",
            VarianceTier::MonteCarlo => "mc",
        })
    }
}

/// One `(n, b, k)` comparison of the prefix variance against theory.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCase {
    pub tier: VarianceTier,
    pub n: usize,
    pub b: usize,
    pub k: usize,
    pub theory: f64,
    pub estimate: f64,
    /// Zero for the exact tier.
    pub stderr: f64,
    pub passed: bool,
}

/// Monte Carlo tier settings.
#[derive(Debug, Clone, PartialEq)]
pub struct McTier {
    pub n: usize,
    pub batch_sizes: Vec<usize>,
    /// Candidate k; values above q are dropped.
    pub ks: Vec<usize>,
    pub trials: usize,
}

impl McTier {
    /// n = 100, b ∈ {1, 10}, k ∈ {1, 25, 50, q − 1}, 10⁵ trials.
    pub fn standard() -> Self {
        Self {
            n: 100,
            batch_sizes: vec![1, 10],
            ks: vec![1, 25, 50],
            trials: 100_000,
        }
    }

    fn ks_for(&self, q: usize) -> Vec<usize> {
        let mut ks: Vec<usize> = self.ks.iter().copied().chain([q.saturating_sub(1)]).filter(|&k| k >= 1 && k <= q).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub cases: Vec<VarianceCase>,
}

impl VarianceReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }
}

/// Dimension of the random component vectors used by the battery.
pub const BATTERY_DIM: usize = 3;

/// Deterministic standard normal vectors for the battery.
pub fn battery_vectors(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).rotate_left(32));
    (0..n)
        .map(|_| (0..BATTERY_DIM).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// Exact tier for every `n` in `exact_n`, `b | n` and `1 ≤ k ≤ q`; then the
/// optional Monte Carlo tier.
pub fn variance_battery(exact_n: &[usize], mc: Option<&McTier>, seed: u64) -> Result<VarianceReport> {
    let mut cases = Vec::new();
    for &n in exact_n {
        if !(2..=MAX_EXACT_N).contains(&n) {
            return Err(invalid("n", format!("exact tier needs 2 <= n <= {MAX_EXACT_N}, got {n}")));
        }
        let vectors = battery_vectors(n, seed);
        let tau2 = ComponentSpread::from_vectors(&vectors)?.tau2;
        for b in (1..=n).filter(|b| n % b == 0) {
            for k in 1..=n / b {
                let theory = wr_prefix_variance_theory(n, b, k, tau2)?;
                let estimate = wr_prefix_variance_exact(&vectors, b, k)?;
                cases.push(VarianceCase {
                    tier: VarianceTier::Exact,
                    n,
                    b,
                    k,
                    theory,
                    estimate,
                    stderr: 0.0,
                    passed: (estimate - theory).abs() <= EXACT_VARIANCE_TOL,
                });
            }
        }
    }
    if let Some(mc) = mc {
        let vectors = battery_vectors(mc.n, seed);
        let tau2 = ComponentSpread::from_vectors(&vectors)?.tau2;
        for &b in &mc.batch_sizes {
            if b == 0 || b > mc.n {
                return Err(invalid("b", format!("need 1 <= b <= {}, got {b}", mc.n)));
            }
            let q = mc.n / b;
            for k in mc.ks_for(q) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((b as u64) << 32) ^ k as u64);
                let theory = wr_prefix_variance_theory(mc.n, b, k, tau2)?;
                let (estimate, stderr) = wr_prefix_variance_mc(&vectors, b, k, mc.trials, &mut rng)?;
                let passed = (estimate - theory).abs() <= MC_SIGMAS * stderr + f64::EPSILON * tau2;
                cases.push(VarianceCase {
                    tier: VarianceTier::MonteCarlo,
                    n: mc.n,
                    b,
                    k,
                    theory,
                    estimate,
                    stderr,
                    passed,
                });
            }
        }
    }
    Ok(VarianceReport { cases })
}

/// Right-hand side of the within-epoch drift bound:
/// `2(q² + q(q−1)A/(n−1))(α²‖∇₁f‖² + β²‖∇₂f‖²) + 2q(q−1)(α²+β²)B/(n−1)`.
pub fn drift_bound(n: usize, q: usize, steps: &StepSizes, a_hat: f64, b_hat: f64, grad_x_sq: f64, grad_y_sq: f64) -> f64 {
    let (q, nm1) = (q as f64, (n as f64 - 1.0).max(1.0));
    let (a2, b2) = (steps.alpha().powi(2), steps.beta().powi(2));
    2.0 * (q * q + q * (q - 1.0) * a_hat / nm1) * (a2 * grad_x_sq + b2 * grad_y_sq)
        + 2.0 * q * (q - 1.0) * (a2 + b2) * b_hat / nm1
}

/// The step condition `α² + β² ≤ 1/(3q(q−1)L²)` under which the drift bound holds.
pub fn drift_step_condition(q: usize, l: f64, steps: &StepSizes) -> bool {
    if q <= 1 {
        return true;
    }
    let q = q as f64;
    steps.alpha().powi(2) + steps.beta().powi(2) <= 1.0 / (3.0 * q * (q - 1.0) * l * l)
}

/// Drift `G = (1/q)Σ_{t=1..q}‖z_{t−1} − z₀‖²` of one simultaneous epoch
/// over the given batches.
pub fn epoch_drift<P: MinimaxProblem + ?Sized>(problem: &P, batches: &[Vec<usize>], z0: &Point, steps: &StepSizes) -> Result<f64> {
    let mut z = z0.clone();
    let mut total = 0.0;
    for batch in batches {
        total += z.dist_sq(z0)?;
        match sim_step(problem, batch, &z, steps)? {
            Step::Finite(next) => z = next,
            Step::Diverged => return Ok(f64::INFINITY),
        }
    }
    Ok(total / batches.len() as f64)
}

/// Average drift of a simultaneous epoch over all n! permutations, with
/// consecutive chunks of size b forming the batches.
pub fn enumerate_drift<P: MinimaxProblem + ?Sized>(problem: &P, b: usize, z0: &Point, steps: &StepSizes) -> Result<f64> {
    let n = problem.num_components();
    if n > MAX_EXACT_N {
        return Err(invalid("n", format!("enumeration supports n <= {MAX_EXACT_N}, got {n}")));
    }
    if b == 0 || n % b != 0 {
        return Err(invalid("b", format!("b = {b} must divide n = {n}")));
    }
    let mut total = 0.0;
    let mut count = 0u64;
    let mut failure = None;
    for_each_permutation(n, |perm| {
        if failure.is_some() {
            return;
        }
        let batches: Vec<Vec<usize>> = perm
            .chunks(b)
            .map(|c| {
                let mut c = c.to_vec();
                c.sort_unstable();
                c
            })
            .collect();
        match epoch_drift(problem, &batches, z0, steps) {
            Ok(g) => {
                total += g;
                count += 1;
            }
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(total / count as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowerbound::{build_instance, CaseId};
    use crate::quadgame::{generate_game, GameGenConfig};
    use crate::problem::random_point_in_ball;

    struct Zero;

    impl MinimaxProblem for Zero {
        fn num_components(&self) -> usize {
            2
        }
        fn dim_x(&self) -> usize {
            2
        }
        fn dim_y(&self) -> usize {
            1
        }
        fn component_value(&self, _: usize, _: &[f64], _: &[f64]) -> f64 {
            0.0
        }
        fn component_grad_x(&self, _: usize, _: &[f64], _: &[f64]) -> Vec<f64> {
            vec![0.0; 2]
        }
        fn component_grad_y(&self, _: usize, _: &[f64], _: &[f64]) -> Vec<f64> {
            vec![0.0]
        }
    }

    fn cloud(dx: usize, dy: usize, count: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| random_point_in_ball(dx, dy, 3.0, &mut rng)).collect()
    }

    #[test]
    fn zero_function_audits_clean() {
        let report = gradient_audit(&Zero, &cloud(2, 1, 10, 1), 1e-6).unwrap();
        assert_eq!(report.max_rel_error, 0.0);
        assert_eq!(report.worst, None);
        assert!(gradient_audit(&Zero, &[], 0.0).is_err());
    }

    #[test]
    fn case1_audit_is_tight() {
        let inst = build_instance(CaseId::One, 1.0, 0.1, 0.1, 2.0, 2.0).unwrap();
        let report = gradient_audit(&inst, &cloud(2, 1, 100, 2), 1e-5).unwrap();
        assert!(report.passes(1e-8), "{report}");
    }

    #[test]
    fn wrong_gradient_is_caught() {
        struct Wrong;
        impl MinimaxProblem for Wrong {
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
                x[0] * x[0] - y[0] * y[0]
            }
            fn component_grad_x(&self, _: usize, x: &[f64], _: &[f64]) -> Vec<f64> {
                vec![x[0]]
            }
            fn component_grad_y(&self, _: usize, _: &[f64], y: &[f64]) -> Vec<f64> {
                vec![-2.0 * y[0]]
            }
        }
        let pts = vec![Point::new(vec![2.0], vec![1.0]).unwrap()];
        let report = gradient_audit(&Wrong, &pts, 1e-6).unwrap();
        assert!((report.max_rel_error - 1.0).abs() < 1e-6);
        assert_eq!(report.worst, Some((0, 0)));
    }

    #[test]
    fn sandwich_case3_closed_form() {
        let (l, mu1, mu2) = (1.0, 0.1, 0.1);
        let inst = build_instance(CaseId::Three, l, mu1, mu2, 10.0, 2.0).unwrap();
        let z = Point::new(vec![1.0], vec![1.0]).unwrap();
        // Φ = μ₁/2 x², f = μ₁/2 − L/2 at (1, 1).
        let expected = 4.0 * mu1 / 2.0 + (mu1 / 2.0 - (mu1 / 2.0 - l / 2.0));
        assert!((inst.potential(&z, 4.0) - expected).abs() < 1e-15);
        let constants = ProblemConstants::new(l, mu1, mu2).unwrap();
        let report = sandwich_check(&inst, &constants, 4.0, &[z, Point::zeros(1, 1)]).unwrap();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn sandwich_case1_cloud() {
        let inst = build_instance(CaseId::One, 1.0, 0.1, 0.1, 2.0, 2.0).unwrap();
        let constants = ProblemConstants::new(1.0, 0.1, 0.1).unwrap();
        let report = sandwich_check(&inst, &constants, 4.0, &cloud(2, 1, 1000, 3)).unwrap();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn sandwich_flags_overstated_constants() {
        let inst = build_instance(CaseId::One, 1.0, 0.1, 0.1, 2.0, 2.0).unwrap();
        // Claiming far stronger curvature breaks the lower inequality.
        let constants = ProblemConstants::new(1000.0, 1000.0, 1000.0).unwrap();
        let report = sandwich_check(&inst, &constants, 4.0, &cloud(2, 1, 50, 4)).unwrap();
        assert!(!report.passed());
        assert!(report.witness.is_some());
    }

    #[test]
    fn battery_exact_small() {
        let report = variance_battery(&[2, 6], None, 9).unwrap();
        assert!(report.passed());
        let vectors = battery_vectors(6, 9);
        let tau2 = ComponentSpread::from_vectors(&vectors).unwrap().tau2;
        let case = report.cases.iter().find(|c| c.n == 6 && c.b == 3 && c.k == 1).unwrap();
        assert!((case.theory - tau2 / 5.0).abs() < 1e-15);
        let full = report.cases.iter().find(|c| c.n == 6 && c.b == 2 && c.k == 3).unwrap();
        assert_eq!(full.theory, 0.0);
        let two = report.cases.iter().find(|c| c.n == 2 && c.b == 1 && c.k == 1).unwrap();
        let tau2_two = ComponentSpread::from_vectors(&battery_vectors(2, 9)).unwrap().tau2;
        assert!((two.theory - tau2_two).abs() < 1e-15);
        assert!(variance_battery(&[12], None, 0).is_err());
    }

    #[test]
    fn mc_tier_k_list() {
        let mc = McTier::standard();
        assert_eq!(mc.ks_for(100), vec![1, 25, 50, 99]);
        assert_eq!(mc.ks_for(10), vec![1, 9]);
    }

    #[test]
    fn drift_is_zero_for_one_batch() {
        let game = generate_game(&GameGenConfig {
            n: 6,
            d: 3,
            rank_deficiency: 1,
            seed: 5,
            ..GameGenConfig::default()
        })
        .unwrap();
        let steps = StepSizes::new(0.01, 0.01).unwrap();
        let z0 = Point::new(vec![1.0; 3], vec![-1.0; 3]).unwrap();
        assert_eq!(enumerate_drift(&game, 6, &z0, &steps).unwrap(), 0.0);
        let g = enumerate_drift(&game, 1, &z0, &steps).unwrap();
        assert!(g > 0.0);
    }

    #[test]
    fn drift_bound_formula() {
        let steps = StepSizes::new(0.1, 0.2).unwrap();
        // q = 1 leaves only the 2(α²g_x + β²g_y) term.
        let v = drift_bound(1, 1, &steps, 3.0, 5.0, 2.0, 1.0);
        assert!((v - 2.0 * (0.01 * 2.0 + 0.04 * 1.0)).abs() < 1e-15);
        let v = drift_bound(6, 6, &steps, 0.0, 1.0, 0.0, 0.0);
        assert!((v - 2.0 * 30.0 * 0.05 / 5.0).abs() < 1e-15);
        assert!(drift_step_condition(1, 1.0, &steps));
        assert!(!drift_step_condition(6, 1.0, &steps));
    }
}
