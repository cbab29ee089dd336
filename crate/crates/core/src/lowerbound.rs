//! Worst-case quadratic instances for simultaneous GDA with step ratio
//! `r = β/α`, and the with-replacement SGD instance with an `Ω(1/T)` rate.

use std::fmt;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{spectral_norm, sym_eigen, DenseMatrix};
use crate::optimizer::{sim_step, Step, DIVERGENCE_THRESHOLD};
use crate::problem::{MinimaxProblem, Point, SaddleProblem, StepSizes};

/// Relative slack on the Hessian norm and curvature checks.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Default regime constant `c > 1`.
pub const DEFAULT_REGIME_CONSTANT: f64 = 2.0;

/// Which worst-case construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    /// `μ₁/2 v² + rμ₂/2 x² − μ₂/2 y² + ℓxy`.
    One,
    /// `μ₁/2 x² − μ₁/(2r) y² + ℓ̃xy − μ₂/2 w²`.
    Two,
    /// `μ₁/2 x² − L/2 y²`.
    Three,
    /// `L/2 x² − μ₂/2 y²`.
    Four,
    /// Components `L/2 x² ± νx` for with-replacement SGD.
    WrSgd,
}

impl CaseId {
    pub const GDA_CASES: [CaseId; 4] = [CaseId::One, CaseId::Two, CaseId::Three, CaseId::Four];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(CaseId::One),
            "2" => Ok(CaseId::Two),
            "3" => Ok(CaseId::Three),
            "4" => Ok(CaseId::Four),
            "wr-sgd" | "wrsgd" | "wr" => Ok(CaseId::WrSgd),
            other => Err(invalid("case", format!("unknown case `{other}`"))),
        }
    }

    /// Lower-bound rate of the regime, as printed in reports.
    pub fn predicted_rate(&self) -> &'static str {
        match self {
            CaseId::One | CaseId::Two => "Omega(kappa1 kappa2 log(1/eps))",
            CaseId::Three => "Omega(kappa1 r log(1/eps))",
            CaseId::Four => "Omega((kappa2/r) log(1/eps))",
            CaseId::WrSgd => "Omega(nu^2/(L T))",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseId::One => f.write_str("1"),
            CaseId::Two => f.write_str("2"),
            CaseId::Three => f.write_str("3"),
            CaseId::Four => f.write_str("4"),
            CaseId::WrSgd => f.write_str("WR-SGD"),
        }
    }
}

/// Admissible interval `[lo, hi]` of r for a GDA case.
pub fn regime_interval(case: CaseId, l: f64, mu1: f64, mu2: f64, c: f64) -> Option<(f64, f64)> {
    let (k1, k2) = (l / mu1, l / mu2);
    let (lo, hi) = match case {
        CaseId::One => (mu1 / mu2, k2 / c),
        CaseId::Two => (c / k1, mu1 / mu2),
        CaseId::Three => (k2 / c, f64::INFINITY),
        CaseId::Four => (0.0, c / k1),
        CaseId::WrSgd => return None,
    };
    Some((lo, hi))
}

fn in_interval(case: CaseId, r: f64, (lo, hi): (f64, f64)) -> bool {
    // Case 4 is open at zero; all other ends are closed.
    let above = if case == CaseId::Four { r > lo } else { r >= lo };
    above && r <= hi
}

/// All GDA cases whose regime contains r.
pub fn classify(l: f64, mu1: f64, mu2: f64, r: f64, c: f64) -> Vec<CaseId> {
    CaseId::GDA_CASES
        .into_iter()
        .filter(|&case| {
            regime_interval(case, l, mu1, mu2, c).is_some_and(|iv| iv.0 <= iv.1 && in_interval(case, r, iv))
        })
        .collect()
}

/// Human-readable list of the four regimes.
pub fn describe_regimes(l: f64, mu1: f64, mu2: f64, c: f64) -> String {
    CaseId::GDA_CASES
        .into_iter()
        .map(|case| {
            let (lo, hi) = regime_interval(case, l, mu1, mu2, c).expect("gda case");
            let open = if case == CaseId::Four { "(" } else { "[" };
            format!("case {case}: r in {open}{lo}, {hi}]")
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// A worst-case instance. Cases 1-4 are single-component minimax problems;
/// the WR-SGD instance has n components and no y variable.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundInstance {
    pub case: CaseId,
    pub l: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// Step ratio `β/α`; unused for WR-SGD.
    pub r: f64,
    /// ℓ (case 1), ℓ̃ (case 2) or ν (WR-SGD); zero otherwise.
    pub coupling: f64,
    /// Components (WR-SGD only; 1 for the GDA cases).
    pub n: usize,
}

fn check_constants(l: f64, mu1: f64, mu2: f64) -> Result<()> {
    if !(mu1 > 0.0 && mu2 > 0.0 && mu1.is_finite() && mu2.is_finite()) {
        return Err(invalid("mu", "mu1 and mu2 must be positive"));
    }
    if !(l.is_finite() && l >= mu1 && l >= mu2) {
        return Err(invalid("L", format!("need L >= max(mu1, mu2), got {l}")));
    }
    Ok(())
}

/// `ℓ² = L² − rμ₂² − Lμ₂|r − 1|` (case 1) or `ℓ̃² = L² − μ₁²/r − Lμ₁|1 − 1/r|` (case 2).
pub fn coupling_sq(case: CaseId, l: f64, mu1: f64, mu2: f64, r: f64) -> Option<f64> {
    match case {
        CaseId::One => Some(l * l - r * mu2 * mu2 - l * mu2 * (r - 1.0).abs()),
        CaseId::Two => Some(l * l - mu1 * mu1 / r - l * mu1 * (1.0 - 1.0 / r).abs()),
        _ => None,
    }
}

/// Builds a GDA worst-case instance for `r` in the case's regime.
pub fn build_instance(case: CaseId, l: f64, mu1: f64, mu2: f64, r: f64, c: f64) -> Result<LowerBoundInstance> {
    check_constants(l, mu1, mu2)?;
    if case == CaseId::WrSgd {
        return Err(invalid("case", "use build_wr_sgd for the with-replacement instance"));
    }
    if !(c > 1.0 && c.is_finite()) {
        return Err(invalid("c", format!("regime constant must exceed 1, got {c}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", format!("must be positive, got {r}")));
    }
    let iv = regime_interval(case, l, mu1, mu2, c).expect("gda case");
    if !in_interval(case, r, iv) {
        let open = if case == CaseId::Four { "(" } else { "[" };
        return Err(Error::Regime {
            r,
            intervals: format!("case {case} requires r in {open}{}, {}]", iv.0, iv.1),
        });
    }
    let coupling = match coupling_sq(case, l, mu1, mu2, r) {
        None => 0.0,
        Some(sq) if sq >= 0.0 => sq.sqrt(),
        // Rounding at a regime boundary can leave a tiny negative value.
        Some(sq) if sq >= -1e-12 * l * l => 0.0,
        Some(sq) => {
            return Err(Error::Construction(format!(
                "coupling squared is negative ({sq:e}) for case {case}"
            )))
        }
    };
    let inst = LowerBoundInstance {
        case,
        l,
        mu1,
        mu2,
        r,
        coupling,
        n: 1,
    };
    let report = membership_check(&inst)?;
    if !report.passed {
        return Err(Error::Construction(format!(
            "instance is not in F(L, mu1, mu2): {}",
            report.detail
        )));
    }
    Ok(inst)
}

/// The with-replacement SGD instance: `f_i = L/2 x² + νx` for the first
/// ⌊n/2⌋ components, `L/2 x² − νx` for the next ⌊n/2⌋, and `f_n ≡ 0` when n is odd.
pub fn build_wr_sgd(n: usize, l: f64, nu: f64) -> Result<LowerBoundInstance> {
    if n < 2 {
        return Err(invalid("n", "need at least two components"));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(invalid("L", format!("must be positive, got {l}")));
    }
    if !nu.is_finite() {
        return Err(invalid("nu", "must be finite"));
    }
    Ok(LowerBoundInstance {
        case: CaseId::WrSgd,
        l,
        mu1: l,
        mu2: l,
        r: 1.0,
        coupling: nu,
        n,
    })
}

/// Hessian blocks of the quadratic form `½xᵀHxx x + xᵀHxy y + ½yᵀHyy y`.
#[derive(Debug, Clone)]
pub struct QuadraticBlocks {
    pub hxx: DenseMatrix,
    pub hxy: DenseMatrix,
    pub hyy: DenseMatrix,
}

impl LowerBoundInstance {
    /// Same as a built instance but with an arbitrary coupling and no regime
    /// or membership checks; for probing the membership test.
    pub fn with_coupling(case: CaseId, l: f64, mu1: f64, mu2: f64, r: f64, coupling: f64) -> Self {
        Self {
            case,
            l,
            mu1,
            mu2,
            r,
            coupling,
            n: 1,
        }
    }

    pub fn blocks(&self) -> Result<QuadraticBlocks> {
        let (l, mu1, mu2, r, k) = (self.l, self.mu1, self.mu2, self.r, self.coupling);
        let m = |rows: usize, cols: usize, data: Vec<f64>| DenseMatrix::new(rows, cols, data);
        Ok(match self.case {
            CaseId::One => QuadraticBlocks {
                hxx: DenseMatrix::from_diag(&[mu1, r * mu2]),
                hxy: m(2, 1, vec![0.0, k])?,
                hyy: DenseMatrix::from_diag(&[-mu2]),
            },
            CaseId::Two => QuadraticBlocks {
                hxx: DenseMatrix::from_diag(&[mu1]),
                hxy: m(1, 2, vec![k, 0.0])?,
                hyy: DenseMatrix::from_diag(&[-mu1 / r, -mu2]),
            },
            CaseId::Three => QuadraticBlocks {
                hxx: DenseMatrix::from_diag(&[mu1]),
                hxy: m(1, 1, vec![0.0])?,
                hyy: DenseMatrix::from_diag(&[-l]),
            },
            CaseId::Four => QuadraticBlocks {
                hxx: DenseMatrix::from_diag(&[l]),
                hxy: m(1, 1, vec![0.0])?,
                hyy: DenseMatrix::from_diag(&[-mu2]),
            },
            CaseId::WrSgd => return Err(Error::Unsupported("WR-SGD has no minimax blocks".into())),
        })
    }

    /// Full symmetric Hessian `[[Hxx, Hxy], [Hxyᵀ, Hyy]]`.
    pub fn hessian(&self) -> Result<DenseMatrix> {
        let b = self.blocks()?;
        DenseMatrix::block(&b.hxx, &b.hxy, &b.hxy.transpose(), &b.hyy)
    }

    fn nu_sign(&self, i: usize) -> f64 {
        let half = self.n / 2;
        if i < half {
            1.0
        } else if i < 2 * half {
            -1.0
        } else {
            0.0
        }
    }

    /// Number of components that are not identically zero.
    fn active_components(&self) -> usize {
        2 * (self.n / 2)
    }

    /// WR-SGD objective `f(x) = (1/n)Σf_i(x)`.
    pub fn wr_objective(&self, x: f64) -> f64 {
        self.active_components() as f64 / self.n as f64 * 0.5 * self.l * x * x
    }
}

impl MinimaxProblem for LowerBoundInstance {
    fn num_components(&self) -> usize {
        self.n
    }

    fn dim_x(&self) -> usize {
        match self.case {
            CaseId::One => 2,
            _ => 1,
        }
    }

    fn dim_y(&self) -> usize {
        match self.case {
            CaseId::Two => 2,
            CaseId::WrSgd => 0,
            _ => 1,
        }
    }

    fn component_value(&self, i: usize, x: &[f64], y: &[f64]) -> f64 {
        if self.case == CaseId::WrSgd {
            let s = self.nu_sign(i);
            return if s == 0.0 { 0.0 } else { 0.5 * self.l * x[0] * x[0] + s * self.coupling * x[0] };
        }
        let b = self.blocks().expect("gda case");
        0.5 * b.hxx.quad_form(x) + crate::problem::dot(x, &b.hxy.matvec(y)) + 0.5 * b.hyy.quad_form(y)
    }

    fn component_grad_x(&self, i: usize, x: &[f64], y: &[f64]) -> Vec<f64> {
        if self.case == CaseId::WrSgd {
            let s = self.nu_sign(i);
            return vec![if s == 0.0 { 0.0 } else { self.l * x[0] + s * self.coupling }];
        }
        let b = self.blocks().expect("gda case");
        let hx = b.hxx.matvec(x);
        let hy = b.hxy.matvec(y);
        hx.iter().zip(hy).map(|(a, c)| a + c).collect()
    }

    fn component_grad_y(&self, _: usize, x: &[f64], y: &[f64]) -> Vec<f64> {
        if self.case == CaseId::WrSgd {
            return Vec::new();
        }
        let b = self.blocks().expect("gda case");
        let hx = b.hxy.transpose().matvec(x);
        let hy = b.hyy.matvec(y);
        hx.iter().zip(hy).map(|(a, c)| a + c).collect()
    }
}

impl SaddleProblem for LowerBoundInstance {
    /// `Φ(x) = ½xᵀ(Hxx − Hxy Hyy⁻¹ Hxyᵀ)x`; every block here is diagonal or a
    /// single column, so the Schur complement is formed directly.
    fn primal_value(&self, x: &[f64]) -> f64 {
        if self.case == CaseId::WrSgd {
            return self.wr_objective(x[0]);
        }
        0.5 * self.schur().quad_form(x)
    }

    fn primal_gradient(&self, x: &[f64]) -> Vec<f64> {
        if self.case == CaseId::WrSgd {
            return vec![self.active_components() as f64 / self.n as f64 * self.l * x[0]];
        }
        self.schur().matvec(x)
    }

    fn saddle(&self) -> Option<Point> {
        Some(Point::zeros(self.dim_x(), self.dim_y()))
    }
}

impl LowerBoundInstance {
    fn schur(&self) -> DenseMatrix {
        let b = self.blocks().expect("gda case");
        let dy = b.hyy.rows();
        let inv: Vec<f64> = (0..dy).map(|j| 1.0 / b.hyy.get(j, j)).collect();
        let dx = b.hxx.rows();
        let mut s = b.hxx.clone();
        for i in 0..dx {
            for k in 0..dx {
                let corr: f64 = (0..dy).map(|j| b.hxy.get(i, j) * inv[j] * b.hxy.get(k, j)).sum();
                s.set(i, k, s.get(i, k) - corr);
            }
        }
        s
    }
}

/// Result of [`membership_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub passed: bool,
    /// Spectral norm of the full Hessian.
    pub hessian_norm: f64,
    /// Smallest eigenvalue of Hxx.
    pub min_curvature_x: f64,
    /// Smallest eigenvalue of −Hyy.
    pub min_curvature_y: f64,
    /// Smallest |eigenvalue| of the full Hessian (nonzero ⇒ unique stationary point).
    pub min_abs_eigenvalue: f64,
    pub detail: String,
}

/// Verifies membership in F(L, μ₁, μ₂): Hessian norm at most L, μ₁-strong
/// convexity in x, μ₂-strong concavity in y, and a nonsingular Hessian.
pub fn membership_check(inst: &LowerBoundInstance) -> Result<MembershipReport> {
    let blocks = inst.blocks()?;
    let h = inst.hessian()?;
    let hessian_norm = spectral_norm(&h);
    let min_curvature_x = sym_eigen(&blocks.hxx)?.min();
    let min_curvature_y = sym_eigen(&blocks.hyy.scale(-1.0))?.min();
    let min_abs_eigenvalue = sym_eigen(&h)?
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let mut failures = Vec::new();
    if hessian_norm > inst.l * (1.0 + MEMBERSHIP_TOL) {
        failures.push(format!("top singular value {hessian_norm} exceeds L = {}", inst.l));
    }
    if min_curvature_x < inst.mu1 * (1.0 - MEMBERSHIP_TOL) {
        failures.push(format!("x-curvature {min_curvature_x} below mu1 = {}", inst.mu1));
    }
    if min_curvature_y < inst.mu2 * (1.0 - MEMBERSHIP_TOL) {
        failures.push(format!("y-curvature {min_curvature_y} below mu2 = {}", inst.mu2));
    }
    if min_abs_eigenvalue <= 0.0 {
        failures.push("Hessian is singular".into());
    }
    let passed = failures.is_empty();
    let detail = if passed {
        format!("Hessian norm {hessian_norm} <= L = {}", inst.l)
    } else {
        failures.join("; ")
    };
    Ok(MembershipReport {
        passed,
        hessian_norm,
        min_curvature_x,
        min_curvature_y,
        min_abs_eigenvalue,
        detail,
    })
}

/// The 2×2 GDA map on the coupled coordinates of cases 1-2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationMatrix {
    pub entries: [[f64; 2]; 2],
    /// `√(re² + im²)` of the conjugate eigenvalue pair.
    pub spectral_radius: f64,
    /// Convergence needs `β` strictly below this value.
    pub threshold: f64,
}

/// Closed-form spectral radius of the coupled GDA map with `α = β/r`:
/// case 1 `√((1−βμ₂)² + β²ℓ²/r)`, threshold `2μ₂r/(rμ₂² + ℓ²)`;
/// case 2 `√((1−βμ₁/r)² + β²ℓ̃²/r)`, threshold `2μ₁/(μ₁²/r + ℓ̃²)`.
pub fn spectral_radius_closed(inst: &LowerBoundInstance, beta: f64) -> Result<IterationMatrix> {
    let (r, l2) = (inst.r, inst.coupling * inst.coupling);
    let (a, threshold) = match inst.case {
        CaseId::One => (inst.mu2, 2.0 * inst.mu2 * r / (r * inst.mu2 * inst.mu2 + l2)),
        CaseId::Two => (inst.mu1 / r, 2.0 * inst.mu1 / (inst.mu1 * inst.mu1 / r + l2)),
        _ => {
            return Err(Error::Unsupported(
                "cases 3 and 4 have diagonal maps; use their scalar factors".into(),
            ))
        }
    };
    let re = 1.0 - beta * a;
    let im_sq = beta * beta * l2 / r;
    Ok(IterationMatrix {
        entries: [
            [re, -beta * inst.coupling / r],
            [beta * inst.coupling, re],
        ],
        spectral_radius: (re * re + im_sq).sqrt(),
        threshold,
    })
}

/// Scalar contraction factors of the diagonal GDA maps of cases 3-4 with `α = β/r`.
pub fn scalar_factors(inst: &LowerBoundInstance, beta: f64, r: f64) -> Result<(f64, f64)> {
    match inst.case {
        CaseId::Three => Ok((1.0 - beta * inst.mu1 / r, 1.0 - beta * inst.l)),
        CaseId::Four => Ok((1.0 - beta * inst.l / r, 1.0 - beta * inst.mu2)),
        _ => Err(Error::Unsupported("scalar factors exist for cases 3 and 4 only".into())),
    }
}

/// Spectral radius of a real 2×2 matrix from its characteristic polynomial.
fn radius_2x2(m: [[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
    } else {
        det.max(0.0).sqrt()
    }
}

/// Spectral radius of the whole GDA map (all coordinates) with `α = β/r`.
pub fn map_radius(inst: &LowerBoundInstance, beta: f64, r: f64) -> Result<f64> {
    let alpha = beta / r;
    let k = inst.coupling;
    Ok(match inst.case {
        CaseId::One => {
            let coupled = [
                [1.0 - alpha * inst.r * inst.mu2, -alpha * k],
                [beta * k, 1.0 - beta * inst.mu2],
            ];
            radius_2x2(coupled).max((1.0 - alpha * inst.mu1).abs())
        }
        CaseId::Two => {
            let coupled = [
                [1.0 - alpha * inst.mu1, -alpha * k],
                [beta * k, 1.0 - beta * inst.mu1 / inst.r],
            ];
            radius_2x2(coupled).max((1.0 - beta * inst.mu2).abs())
        }
        CaseId::Three | CaseId::Four => {
            let (fx, fy) = scalar_factors(inst, beta, r)?;
            fx.abs().max(fy.abs())
        }
        CaseId::WrSgd => return Err(Error::Unsupported("WR-SGD has no GDA map".into())),
    })
}

/// Largest β for which every block of the GDA map (with `α = β/r`) is
/// stable: the coupled threshold for cases 1-2 combined with the decoupled
/// coordinate, `min(2r/μ₁, 2/L)` for case 3 and `min(2r/L, 2/μ₂)` for case 4.
pub fn stability_threshold(inst: &LowerBoundInstance) -> Result<f64> {
    let r = inst.r;
    Ok(match inst.case {
        CaseId::One => spectral_radius_closed(inst, 1.0)?.threshold.min(2.0 * r / inst.mu1),
        CaseId::Two => spectral_radius_closed(inst, 1.0)?.threshold.min(2.0 / inst.mu2),
        CaseId::Three => (2.0 * r / inst.mu1).min(2.0 / inst.l),
        CaseId::Four => (2.0 * r / inst.l).min(2.0 / inst.mu2),
        CaseId::WrSgd => return Err(Error::Unsupported("WR-SGD has no GDA map".into())),
    })
}

/// The quantity inside the Ω of the case's lower bound, e.g. `κ₁κ₂ log(1/ε)`.
pub fn predicted_scale(inst: &LowerBoundInstance, eps: f64) -> f64 {
    let (k1, k2) = (inst.l / inst.mu1, inst.l / inst.mu2);
    let log = (1.0 / eps).ln();
    match inst.case {
        CaseId::One | CaseId::Two => k1 * k2 * log,
        CaseId::Three => k1 * inst.r * log,
        CaseId::Four => k2 / inst.r * log,
        CaseId::WrSgd => f64::NAN,
    }
}

/// Iterations to `‖z_k‖ ≤ ε` from the all-ones point under a diagonal map
/// with per-coordinate factors `fx` and `fy`: the smallest k with
/// `fx^{2k} + fy^{2k} ≤ ε²`, or `None` within `max_iters`.
pub fn geometric_iterations(fx: f64, fy: f64, eps: f64, max_iters: usize) -> Option<usize> {
    let eps_sq = eps * eps;
    let (mut px, mut py) = (1.0f64, 1.0f64);
    for k in 0..=max_iters {
        if px * px + py * py <= eps_sq {
            return Some(k);
        }
        px *= fx;
        py *= fy;
    }
    None
}

/// Outcome of [`simulate_gda`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdaOutcome {
    /// Smallest k with `‖z_k‖² ≤ ε²`.
    Reached(usize),
    Diverged,
    /// Contracting but not within ε after `max_iters`.
    NotReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdaSimulation {
    pub outcome: GdaOutcome,
    /// `‖z_k‖` for every simulated k, starting at k = 0.
    pub norms: Vec<f64>,
}

/// Runs simultaneous GDA with `(α, β) = (β/r, β)` from the all-ones point
/// until `‖z_k − z*‖² ≤ ε²`, divergence, or `max_iters`. Reaching `max_iters`
/// with a map radius of at least one counts as divergence.
pub fn simulate_gda(inst: &LowerBoundInstance, beta: f64, r: f64, eps: f64, max_iters: usize) -> Result<GdaSimulation> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(invalid("eps", "must be positive"));
    }
    if inst.case == CaseId::WrSgd {
        return Err(Error::Unsupported("use simulate_wr_sgd for the WR-SGD instance".into()));
    }
    let steps = StepSizes::from_ratio(beta, r)?;
    let mut z = Point::new(vec![1.0; inst.dim_x()], vec![1.0; inst.dim_y()])?;
    let mut norms = vec![z.norm_sq().sqrt()];
    let eps_sq = eps * eps;
    if z.norm_sq() <= eps_sq {
        return Ok(GdaSimulation {
            outcome: GdaOutcome::Reached(0),
            norms,
        });
    }
    for k in 1..=max_iters {
        match sim_step(inst, &[0], &z, &steps)? {
            Step::Diverged => {
                return Ok(GdaSimulation {
                    outcome: GdaOutcome::Diverged,
                    norms,
                })
            }
            Step::Finite(next) => z = next,
        }
        let nsq = z.norm_sq();
        norms.push(nsq.sqrt());
        if !nsq.is_finite() || nsq.sqrt() > DIVERGENCE_THRESHOLD {
            return Ok(GdaSimulation {
                outcome: GdaOutcome::Diverged,
                norms,
            });
        }
        if nsq <= eps_sq {
            return Ok(GdaSimulation {
                outcome: GdaOutcome::Reached(k),
                norms,
            });
        }
    }
    let outcome = if map_radius(inst, beta, r)? >= 1.0 {
        GdaOutcome::Diverged
    } else {
        GdaOutcome::NotReached
    };
    Ok(GdaSimulation { outcome, norms })
}

/// Result of [`simulate_wr_sgd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrSgdEstimate {
    /// Monte Carlo mean of `f(x_T) − f*`.
    pub mean: f64,
    pub stderr: f64,
    /// Exact `E[f(x_T) − f*]`.
    pub closed_form: f64,
    /// Exact `E[x_T²]`.
    pub closed_form_sq: f64,
}

/// Exact `E[x_T²]` under i.i.d. uniform component draws. For even n this is
/// `(1−ηL)^{2T}x₀² + η²ν²Σ_{t=1..T}(1−ηL)^{2(T−t)}`; for odd n the zero
/// component leaves the iterate unchanged with probability 1/n.
pub fn wr_sgd_second_moment(inst: &LowerBoundInstance, eta: f64, t: usize, x0: f64) -> f64 {
    let p = inst.active_components() as f64 / inst.n as f64;
    let contraction = (1.0 - eta * inst.l).powi(2);
    let noise = eta * eta * inst.coupling * inst.coupling;
    let mut m = x0 * x0;
    for _ in 0..t {
        m = (1.0 - p) * m + p * (contraction * m + noise);
    }
    m
}

/// Monte Carlo estimate of `E[f(x_T) − f*]` for with-replacement SGD,
/// alongside the exact value.
pub fn simulate_wr_sgd<R: Rng + ?Sized>(
    inst: &LowerBoundInstance,
    eta: f64,
    t: usize,
    x0: f64,
    trials: usize,
    rng: &mut R,
) -> Result<WrSgdEstimate> {
    if inst.case != CaseId::WrSgd {
        return Err(invalid("case", "simulate_wr_sgd needs the WR-SGD instance"));
    }
    if t < 2 {
        return Err(invalid("T", format!("need T >= 2, got {t}")));
    }
    if trials < 1000 {
        return Err(invalid("trials", format!("need at least 1000, got {trials}")));
    }
    let n = inst.n;
    let signs: Vec<f64> = (0..n).map(|i| inst.nu_sign(i)).collect();
    let contraction = 1.0 - eta * inst.l;
    let step = eta * inst.coupling;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        let mut x = x0;
        for _ in 0..t {
            let s = signs[rng.gen_range(0..n)];
            if s != 0.0 {
                // Gradient of L/2 x² + sν x is Lx + sν.
                x = contraction * x - s * step;
            }
        }
        let f = inst.wr_objective(x);
        sum += f;
        sum_sq += f * f;
    }
    let tr = trials as f64;
    let mean = sum / tr;
    let var = (sum_sq / tr - mean * mean).max(0.0) * tr / (tr - 1.0);
    let m2 = wr_sgd_second_moment(inst, eta, t, x0);
    Ok(WrSgdEstimate {
        mean,
        stderr: (var / tr).sqrt(),
        closed_form: inst.active_components() as f64 / n as f64 * 0.5 * inst.l * m2,
        closed_form_sq: m2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Component;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const L: f64 = 1.0;
    const MU: f64 = 0.1;

    #[test]
    fn case3_gradient_and_form() {
        let inst = build_instance(CaseId::Three, L, MU, MU, 10.0, 2.0).unwrap();
        assert_eq!(inst.coupling, 0.0);
        let z = Point::new(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(inst.gradient(Component::Full, &z).unwrap(), (vec![MU], vec![-L]));
        let report = membership_check(&inst).unwrap();
        assert!(report.passed);
        assert_eq!(report.hessian_norm, L);
    }

    #[test]
    fn case1_coupling_at_r_one() {
        let (l, mu1, mu2) = (1.0, 0.1, 0.1);
        let inst = build_instance(CaseId::One, l, mu1, mu2, 1.0, 2.0).unwrap();
        assert!((inst.coupling.powi(2) - (l * l - mu2 * mu2)).abs() < 1e-15);
    }

    #[test]
    fn case1_at_upper_boundary_passes() {
        let (l, mu1, mu2, c) = (1.0, 0.1, 0.1, 2.0);
        let r = (l / mu2) / c;
        let inst = build_instance(CaseId::One, l, mu1, mu2, r, c).unwrap();
        assert!(membership_check(&inst).unwrap().passed);
    }

    #[test]
    fn oversized_coupling_fails_membership() {
        let (l, mu1, mu2, r) = (1.0, 0.1, 0.1, 2.0);
        let ell = coupling_sq(CaseId::One, l, mu1, mu2, r).unwrap().sqrt() * 1.2;
        let inst = LowerBoundInstance::with_coupling(CaseId::One, l, mu1, mu2, r, ell);
        let report = membership_check(&inst).unwrap();
        assert!(!report.passed);
        assert!(report.hessian_norm > l);
    }

    #[test]
    fn hessian_norm_equals_l_for_coupled_cases() {
        for (case, r) in [(CaseId::One, 3.0), (CaseId::Two, 0.5)] {
            let inst = build_instance(case, 2.0, 0.2, 0.2, r, 2.0).unwrap();
            let report = membership_check(&inst).unwrap();
            assert!((report.hessian_norm - 2.0).abs() < 1e-12, "{case}: {}", report.hessian_norm);
        }
    }

    #[test]
    fn regime_errors_and_classification() {
        let err = build_instance(CaseId::Three, L, MU, MU, 1.0, 2.0).unwrap_err();
        assert!(matches!(err, Error::Regime { .. }));
        assert!(err.to_string().contains("case 3"));
        assert_eq!(classify(L, MU, MU, 100.0, 2.0), vec![CaseId::Three]);
        assert_eq!(classify(L, MU, MU, 0.05, 2.0), vec![CaseId::Four]);
        assert!(classify(L, MU, MU, 1.0, 2.0).contains(&CaseId::One));
        let text = describe_regimes(L, MU, MU, 2.0);
        assert!(text.contains("case 1") && text.contains("case 4"));
    }

    #[test]
    fn wr_sgd_components() {
        let inst = build_wr_sgd(4, 2.0, 1.0).unwrap();
        let grads: Vec<f64> = (0..4).map(|i| inst.component_grad_x(i, &[0.0], &[])[0]).collect();
        assert_eq!(grads, vec![1.0, 1.0, -1.0, -1.0]);
        let odd = build_wr_sgd(5, 2.0, 1.0).unwrap();
        assert_eq!(odd.component_grad_x(4, &[3.0], &[])[0], 0.0);
        assert_eq!(odd.component_value(4, &[3.0], &[]), 0.0);
    }

    #[test]
    fn spectral_radius_cases() {
        let inst = build_instance(CaseId::One, L, MU, MU, 2.0, 2.0).unwrap();
        assert_eq!(spectral_radius_closed(&inst, 0.0).unwrap().spectral_radius, 1.0);
        let at = spectral_radius_closed(&inst, 1.0).unwrap().threshold;
        let rho = spectral_radius_closed(&inst, at).unwrap().spectral_radius;
        assert!((rho - 1.0).abs() <= 1e-12);
        let decoupled = LowerBoundInstance::with_coupling(CaseId::One, L, MU, MU, 2.0, 0.0);
        let m = spectral_radius_closed(&decoupled, 0.5).unwrap();
        assert!((m.spectral_radius - (1.0 - 0.5 * MU).abs()).abs() < 1e-15);
        let three = build_instance(CaseId::Three, L, MU, MU, 10.0, 2.0).unwrap();
        assert!(spectral_radius_closed(&three, 0.1).is_err());
        // The closed form matches the characteristic-polynomial radius.
        for beta in [0.1, 0.5, 1.0, 2.0] {
            let closed = spectral_radius_closed(&inst, beta).unwrap();
            assert!((radius_2x2(closed.entries) - closed.spectral_radius).abs() < 1e-12);
        }
    }

    #[test]
    fn case3_iterations_match_geometric_decay() {
        // β = 1/L zeroes y in one step, then x contracts by 1 − βμ₁/r.
        let (l, mu1, r) = (1.0, 0.1, 100.0);
        let inst = build_instance(CaseId::Three, l, mu1, 0.1, r, 2.0).unwrap();
        let beta = 1.0 / l;
        let (fx, fy) = scalar_factors(&inst, beta, r).unwrap();
        assert_eq!(fy, 0.0);
        assert!((fx - 0.999).abs() < 1e-15);
        let eps = 1e-2;
        let sim = simulate_gda(&inst, beta, r, eps, 100_000).unwrap();
        let expected = (eps.ln() / fx.ln()).ceil() as usize;
        match sim.outcome {
            GdaOutcome::Reached(k) => assert!(k.abs_diff(expected) <= 1, "{k} vs {expected}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stability_threshold_matches_map_radius() {
        for (case, r) in [(CaseId::One, 2.0), (CaseId::Two, 0.5), (CaseId::Three, 10.0), (CaseId::Four, 0.1)] {
            let inst = build_instance(case, L, MU, MU, r, 2.0).unwrap();
            let t = stability_threshold(&inst).unwrap();
            assert!(map_radius(&inst, 0.999 * t, r).unwrap() < 1.0, "case {case}");
            assert!(map_radius(&inst, 1.001 * t, r).unwrap() > 1.0, "case {case}");
        }
    }

    #[test]
    fn case4_diverges_past_threshold() {
        let inst = build_instance(CaseId::Four, L, MU, MU, 0.1, 2.0).unwrap();
        let beta = 2.0 * inst.r / L * 1.01;
        assert_eq!(simulate_gda(&inst, beta, inst.r, 1e-6, 100_000).unwrap().outcome, GdaOutcome::Diverged);
        let at = 2.0 * inst.r / L;
        assert_eq!(simulate_gda(&inst, at, inst.r, 1e-6, 1000).unwrap().outcome, GdaOutcome::Diverged);
    }

    #[test]
    fn case1_beyond_threshold_diverges() {
        let inst = build_instance(CaseId::One, L, MU, MU, 2.0, 2.0).unwrap();
        let th = spectral_radius_closed(&inst, 1.0).unwrap().threshold;
        let sim = simulate_gda(&inst, th * 1.5, inst.r, 1e-6, 5000).unwrap();
        assert_eq!(sim.outcome, GdaOutcome::Diverged);
    }

    #[test]
    fn wr_sgd_closed_forms() {
        let inst = build_wr_sgd(4, 1.0, 0.0).unwrap();
        let m = wr_sgd_second_moment(&inst, 0.1, 10, 2.0);
        assert!((m - 0.9f64.powi(20) * 4.0).abs() < 1e-14);
        let inst = build_wr_sgd(4, 2.0, 3.0).unwrap();
        let m = wr_sgd_second_moment(&inst, 0.5, 7, 5.0);
        assert!((m - 0.25 * 9.0).abs() < 1e-14);
        // Explicit sum form for even n.
        let inst = build_wr_sgd(6, 1.5, 0.7).unwrap();
        let (eta, t, x0) = (0.05, 40usize, 1.3);
        let q: f64 = 1.0 - eta * 1.5;
        let sum: f64 = (1..=t).map(|s| q.powi(2 * (t - s) as i32)).sum();
        let explicit = q.powi(2 * t as i32) * x0 * x0 + eta * eta * 0.49 * sum;
        assert!((wr_sgd_second_moment(&inst, eta, t, x0) - explicit).abs() < 1e-13);
    }

    #[test]
    fn wr_sgd_monte_carlo_agrees() {
        for n in [4usize, 5] {
            let inst = build_wr_sgd(n, 1.0, 1.0).unwrap();
            let est = simulate_wr_sgd(&inst, 0.01, 100, 0.5, 20_000, &mut ChaCha8Rng::seed_from_u64(n as u64)).unwrap();
            assert!(
                (est.mean - est.closed_form).abs() <= 4.0 * est.stderr,
                "n={n}: {} vs {}",
                est.mean,
                est.closed_form
            );
        }
    }
}
