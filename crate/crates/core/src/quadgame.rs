//! Random quadratic minimax games
//! `f_i(x; y) = ½xᵀA_i x + xᵀB_i y − ½yᵀC_i y + u_iᵀx − v_iᵀy`
//! with a nonconvex primal `Φ(x) = ½xᵀMx`, `M = A + BC⁻¹Bᵀ`.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{random_orthogonal, spd_inverse, spectral_norm, sym_eigen, DenseMatrix};
use crate::problem::{
    dot, norm_sq, random_point_in_ball, MinimaxProblem, Point, ProblemConstants, SaddleProblem,
};

/// Current game file version.
pub const GAME_FILE_VERSION: u32 = 1;
/// Tolerance on `Σu_i`, `Σv_i` when reading a game file.
pub const PARSE_SUM_TOL: f64 = 1e-9;
const MAX_PERTURB_ATTEMPTS: usize = 1000;
/// Headroom on the declared L for the per-component smoothness check.
pub const SMOOTHNESS_HEADROOM: f64 = 1.05;
const PL_SLACK: f64 = 1e-8;
/// Step-size ratio grid for the joint variance-constant fit.
pub const VARIANCE_A_GRID: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];

/// Parameters of the random game generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GameGenConfig {
    /// Number of components.
    pub n: usize,
    /// Dimension of both x and y.
    pub d: usize,
    /// Smallest eigenvalue of C.
    pub mu_c: f64,
    /// Cap on component eigenvalues of C_i.
    pub l_c: f64,
    /// Cap on singular values of B_i.
    pub l_b: f64,
    /// Smallest nonzero eigenvalue of M.
    pub mu_m: f64,
    /// Cap on the eigenvalues of M.
    pub l_m: f64,
    /// Number of zero eigenvalues of M. Zero gives a strongly-convex primal.
    pub rank_deficiency: usize,
    /// Range Δ of the linear terms.
    pub delta: f64,
    /// Fraction of each Λᶜ_i's entries redrawn in [−L_C, μ_C].
    pub perturb_fraction: f64,
    pub seed: u64,
}

impl Default for GameGenConfig {
    fn default() -> Self {
        Self {
            n: 100,
            d: 25,
            mu_c: 0.4,
            l_c: 1.0,
            l_b: 4.0,
            mu_m: 0.4,
            l_m: 4.0,
            rank_deficiency: 5,
            delta: 20.0,
            perturb_fraction: 0.2,
            seed: 0,
        }
    }
}

impl GameGenConfig {
    /// Checks the parameter invariants. The error names the offending key.
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if self.n == 0 {
            return Err(invalid("n", "need at least one component"));
        }
        if self.d == 0 {
            return Err(invalid("d", "dimension must be at least 1"));
        }
        if !finite_pos(self.mu_c) {
            return Err(invalid("mu_C", format!("must be positive, got {}", self.mu_c)));
        }
        if !(self.l_c.is_finite() && self.l_c >= self.mu_c) {
            return Err(invalid("L_C", format!("must satisfy mu_C <= L_C, got {}", self.l_c)));
        }
        if !finite_pos(self.l_b) {
            return Err(invalid("L_B", format!("must be positive, got {}", self.l_b)));
        }
        if !finite_pos(self.mu_m) {
            return Err(invalid("mu_M", format!("must be positive, got {}", self.mu_m)));
        }
        if !(self.l_m.is_finite() && self.l_m >= self.mu_m) {
            return Err(invalid("L_M", format!("must satisfy mu_M <= L_M, got {}", self.l_m)));
        }
        if self.rank_deficiency >= self.d {
            return Err(invalid(
                "rank_deficiency",
                format!("must be below d = {}, got {}", self.d, self.rank_deficiency),
            ));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(invalid("delta", format!("must be nonnegative, got {}", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.perturb_fraction) {
            return Err(invalid(
                "perturb_fraction",
                format!("must lie in [0, 1], got {}", self.perturb_fraction),
            ));
        }
        Ok(())
    }
}

/// Constants declared for a game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameConstants {
    /// `max{‖A‖₂, L_B, L_C}`.
    pub l: f64,
    /// Primal PL constant, the smallest nonzero eigenvalue of M.
    pub mu1: f64,
    /// y-side PL constant, the smallest eigenvalue of C.
    pub mu2: f64,
    pub lambda_min_c: f64,
    pub rank_m: usize,
}

impl GameConstants {
    pub fn kappa1(&self) -> f64 {
        self.l / self.mu1
    }

    pub fn kappa2(&self) -> f64 {
        self.l / self.mu2
    }
}

/// A finite-sum quadratic minimax game. Immutable after construction.
#[derive(Debug, Clone)]
pub struct QuadraticGame {
    n: usize,
    d: usize,
    a: Vec<DenseMatrix>,
    b: Vec<DenseMatrix>,
    bt: Vec<DenseMatrix>,
    c: Vec<DenseMatrix>,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    a_mean: DenseMatrix,
    b_mean: DenseMatrix,
    c_mean: DenseMatrix,
    u_mean: Vec<f64>,
    v_mean: Vec<f64>,
    /// `C⁻¹` when C is positive definite.
    c_inv: Option<DenseMatrix>,
    /// `C⁻¹Bᵀ`, the linear map x ↦ y*(x).
    y_map: Option<DenseMatrix>,
    m: Option<DenseMatrix>,
    constants: GameConstants,
}

fn mean_matrix(ms: &[DenseMatrix]) -> DenseMatrix {
    let mut acc = DenseMatrix::zeros(ms[0].rows(), ms[0].cols());
    for m in ms {
        acc = acc.add(m).expect("component shapes agree");
    }
    acc.scale(1.0 / ms.len() as f64)
}

fn mean_vector(vs: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; vs[0].len()];
    for v in vs {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    acc.iter().map(|a| a / vs.len() as f64).collect()
}

/// `B C⁻¹ Bᵀ`, exactly symmetric.
fn coupling_term(b: &DenseMatrix, c_inv: &DenseMatrix) -> DenseMatrix {
    b.matmul(c_inv)
        .and_then(|t| t.matmul(&b.transpose()))
        .expect("square shapes agree")
        .symmetrized()
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Per-component eigenvalues in `[lo, hi]` whose entry at `pin` is shifted so
/// that its mean over components is exactly `target`.
fn pinned_spectra<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    d: usize,
    lo: f64,
    hi: f64,
    pin: usize,
    target: f64,
) -> Vec<Vec<f64>> {
    let mut spectra: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| uniform(rng, lo, hi)).collect())
        .collect();
    let mean = spectra.iter().map(|s| s[pin]).sum::<f64>() / n as f64;
    for s in &mut spectra {
        s[pin] += target - mean;
    }
    spectra
}

/// Generates a game following the recipe: shared eigenbases for C and M,
/// random B_i with bounded singular values, `A_i = M_i − BC⁻¹Bᵀ`, and
/// mean-centred linear terms.
pub fn generate_game(cfg: &GameGenConfig) -> Result<QuadraticGame> {
    cfg.validate()?;
    let (n, d) = (cfg.n, cfg.d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // C_i = Q_C Λᶜ_i Q_Cᵀ. Eigen-slot 0 is pinned so that λ_min(C) = μ_C exactly.
    let q_c = random_orthogonal(d, &mut rng)?;
    let base = pinned_spectra(&mut rng, n, d, cfg.mu_c, cfg.l_c, 0, cfg.mu_c);
    let perturbed_per_component = ((cfg.perturb_fraction * d as f64).floor() as usize).min(d - 1);
    let mut spectra_c = None;
    for _ in 0..MAX_PERTURB_ATTEMPTS {
        let mut trial = base.clone();
        if perturbed_per_component > 0 {
            for s in &mut trial {
                for j in index::sample(&mut rng, d - 1, perturbed_per_component) {
                    s[j + 1] = uniform(&mut rng, -cfg.l_c, cfg.mu_c);
                }
            }
        }
        let ok = (1..d).all(|j| {
            let mean = trial.iter().map(|s| s[j]).sum::<f64>() / n as f64;
            (cfg.mu_c..=cfg.l_c).contains(&mean)
        });
        if ok {
            spectra_c = Some(trial);
            break;
        }
    }
    let spectra_c = spectra_c.ok_or_else(|| {
        Error::Generation(format!(
            "perturbation kept the mean eigenvalues of C outside [mu_C, L_C] after {MAX_PERTURB_ATTEMPTS} attempts; use a smaller perturb_fraction"
        ))
    })?;
    let c: Vec<DenseMatrix> = spectra_c.iter().map(|s| DenseMatrix::from_eigen(&q_c, s)).collect();

    // B_i = U_i Σ_i V_i.
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let u = random_orthogonal(d, &mut rng)?;
        let v = random_orthogonal(d, &mut rng)?;
        let sigma: Vec<f64> = (0..d).map(|_| uniform(&mut rng, 0.0, cfg.l_b)).collect();
        b.push(u.matmul(&DenseMatrix::from_diag(&sigma))?.matmul(&v)?);
    }

    // M_i = Q_M Λᴹ_i Q_Mᵀ with exact zeros in the first r_M slots of every
    // component and slot r_M pinned to mean μ_M.
    let q_m = random_orthogonal(d, &mut rng)?;
    let r_m = cfg.rank_deficiency;
    let mut spectra_m = pinned_spectra(&mut rng, n, d, cfg.mu_m, cfg.l_m, r_m, cfg.mu_m);
    for s in &mut spectra_m {
        s[..r_m].iter_mut().for_each(|v| *v = 0.0);
    }

    let c_mean = mean_matrix(&c);
    let b_mean = mean_matrix(&b);
    let c_inv = spd_inverse(&c_mean)?;
    let k = coupling_term(&b_mean, &c_inv);
    let a: Vec<DenseMatrix> = spectra_m
        .iter()
        .map(|s| DenseMatrix::from_eigen(&q_m, s).sub(&k).map(|m| m.symmetrized()))
        .collect::<Result<_>>()?;

    let u = centred_vectors(&mut rng, n, d, cfg.delta);
    let v = centred_vectors(&mut rng, n, d, cfg.delta);

    let a_mean = mean_matrix(&a);
    let l = spectral_norm(&a_mean).max(cfg.l_b).max(cfg.l_c);
    let lambda_min_c = sym_eigen(&c_mean)?.min();
    let constants = GameConstants {
        l,
        mu1: cfg.mu_m,
        mu2: lambda_min_c,
        lambda_min_c,
        rank_m: d - r_m,
    };
    QuadraticGame::from_parts(a, b, c, u, v, constants, 1e-12)
}

/// Entrywise uniform in [−Δ, Δ], mean-centred, with the last component set
/// so that the index-order sum is exactly zero.
fn centred_vectors<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, delta: f64) -> Vec<Vec<f64>> {
    let mut vs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| uniform(rng, -delta, delta)).collect())
        .collect();
    let mean = mean_vector(&vs);
    for v in &mut vs {
        for (x, m) in v.iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    for j in 0..d {
        let head: f64 = vs[..n - 1].iter().map(|v| v[j]).sum();
        vs[n - 1][j] = -head;
    }
    vs
}

fn sum_defect(vs: &[Vec<f64>]) -> (usize, f64) {
    let d = vs[0].len();
    (0..d)
        .map(|j| (j, vs.iter().map(|v| v[j]).sum::<f64>().abs()))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

impl QuadraticGame {
    /// Assembles a game from its components, computing the aggregates.
    /// `sum_tol` bounds `|Σu_i|`, `|Σv_i|` entrywise. A non-definite C is
    /// accepted; the primal function is then `+∞`.
    pub fn from_parts(
        a: Vec<DenseMatrix>,
        b: Vec<DenseMatrix>,
        c: Vec<DenseMatrix>,
        u: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
        constants: GameConstants,
        sum_tol: f64,
    ) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(invalid("n", "need at least one component"));
        }
        let d = a[0].rows();
        for (name, group) in [("A", &a), ("B", &b), ("C", &c)] {
            if group.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: group.len(),
                });
            }
            for m in group.iter() {
                if m.rows() != d || m.cols() != d {
                    return Err(Error::Invariant(format!("{name} components must be {d}x{d}")));
                }
            }
        }
        for group in [&u, &v] {
            if group.len() != n || group.iter().any(|x| x.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: n * d,
                    found: group.iter().map(Vec::len).sum(),
                });
            }
            if group.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("linear term"));
            }
        }
        for (name, group) in [("u", &u), ("v", &v)] {
            let (j, defect) = sum_defect(group);
            if defect > sum_tol {
                return Err(Error::Invariant(format!(
                    "sum of {name}_i is {defect:e} at coordinate {} (tolerance {sum_tol:e})",
                    j + 1
                )));
            }
        }

        let a_mean = mean_matrix(&a);
        let b_mean = mean_matrix(&b);
        let c_mean = mean_matrix(&c);
        let c_inv = spd_inverse(&c_mean).ok();
        let y_map = c_inv
            .as_ref()
            .map(|ci| ci.matmul(&b_mean.transpose()).expect("square shapes agree"));
        let m = c_inv
            .as_ref()
            .map(|ci| a_mean.add(&coupling_term(&b_mean, ci)).expect("square shapes agree"));
        let bt = b.iter().map(DenseMatrix::transpose).collect();
        Ok(Self {
            n,
            d,
            u_mean: mean_vector(&u),
            v_mean: mean_vector(&v),
            a,
            b,
            bt,
            c,
            u,
            v,
            a_mean,
            b_mean,
            c_mean,
            c_inv,
            y_map,
            m,
            constants,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn constants(&self) -> GameConstants {
        self.constants
    }

    pub fn problem_constants(&self) -> Result<ProblemConstants> {
        ProblemConstants::new(self.constants.l, self.constants.mu1, self.constants.mu2)
    }

    pub fn a(&self, i: usize) -> &DenseMatrix {
        &self.a[i]
    }

    pub fn b(&self, i: usize) -> &DenseMatrix {
        &self.b[i]
    }

    pub fn c(&self, i: usize) -> &DenseMatrix {
        &self.c[i]
    }

    pub fn u(&self, i: usize) -> &[f64] {
        &self.u[i]
    }

    pub fn v(&self, i: usize) -> &[f64] {
        &self.v[i]
    }

    pub fn a_mean(&self) -> &DenseMatrix {
        &self.a_mean
    }

    pub fn b_mean(&self) -> &DenseMatrix {
        &self.b_mean
    }

    pub fn c_mean(&self) -> &DenseMatrix {
        &self.c_mean
    }

    /// `M = A + BC⁻¹Bᵀ`, absent when C is not positive definite.
    pub fn m(&self) -> Option<&DenseMatrix> {
        self.m.as_ref()
    }

    pub fn c_inv(&self) -> Option<&DenseMatrix> {
        self.c_inv.as_ref()
    }

    /// `y*(x) = C⁻¹Bᵀx`, the unique maximizer of `f(x; ·)`.
    pub fn y_star(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        let map = self.y_map.as_ref().ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: self.constants.lambda_min_c,
        })?;
        Ok(map.matvec(x))
    }

    /// Full Hessian `[[A_i, B_i], [B_iᵀ, −C_i]]` of a component.
    pub fn component_hessian(&self, i: usize) -> DenseMatrix {
        DenseMatrix::block(&self.a[i], &self.b[i], &self.bt[i], &self.c[i].scale(-1.0))
            .expect("blocks are d x d")
    }

    /// Serializes to the line-oriented game file format.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let c = &self.constants;
        out.push_str("# quadratic minimax game\n");
        let _ = writeln!(out, "version = {GAME_FILE_VERSION}");
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "d = {}", self.d);
        let _ = writeln!(out, "constants.L = {}", fmt_real(c.l));
        let _ = writeln!(out, "constants.mu1 = {}", fmt_real(c.mu1));
        let _ = writeln!(out, "constants.mu2 = {}", fmt_real(c.mu2));
        let _ = writeln!(out, "constants.lambda_min_C = {}", fmt_real(c.lambda_min_c));
        let _ = writeln!(out, "constants.rank_M = {}", c.rank_m);
        let mut emit = |name: &str, i: usize, vals: &[f64]| {
            let _ = write!(out, "{name}[{}] =", i + 1);
            for v in vals {
                out.push(' ');
                out.push_str(&fmt_real(*v));
            }
            out.push('\n');
        };
        for (name, group) in [("A", &self.a), ("B", &self.b), ("C", &self.c)] {
            for (i, m) in group.iter().enumerate() {
                emit(name, i, m.data());
            }
        }
        for (name, group) in [("u", &self.u), ("v", &self.v)] {
            for (i, x) in group.iter().enumerate() {
                emit(name, i, x);
            }
        }
        out
    }

    /// Parses the game file format; see [`QuadraticGame::serialize`].
    pub fn deserialize(text: &str) -> Result<Self> {
        let fields = FieldMap::parse(text)?;
        let (version_line, version) = fields.scalar::<u32>("version")?;
        if version != GAME_FILE_VERSION {
            return Err(Error::Parse {
                line: version_line,
                reason: format!("unsupported version {version} (expected {GAME_FILE_VERSION})"),
            });
        }
        let (n_line, n) = fields.scalar::<usize>("n")?;
        let (d_line, d) = fields.scalar::<usize>("d")?;
        if n == 0 {
            return Err(Error::Parse {
                line: n_line,
                reason: "n must be positive".into(),
            });
        }
        if d == 0 {
            return Err(Error::Parse {
                line: d_line,
                reason: "d must be positive".into(),
            });
        }
        let constants = GameConstants {
            l: fields.scalar::<f64>("constants.L")?.1,
            mu1: fields.scalar::<f64>("constants.mu1")?.1,
            mu2: fields.scalar::<f64>("constants.mu2")?.1,
            lambda_min_c: fields.scalar::<f64>("constants.lambda_min_C")?.1,
            rank_m: fields.scalar::<usize>("constants.rank_M")?.1,
        };
        let matrices = |name: &str| -> Result<Vec<DenseMatrix>> {
            (0..n)
                .map(|i| {
                    let key = format!("{name}[{}]", i + 1);
                    let (line, vals) = fields.reals(&key, d * d)?;
                    let m = DenseMatrix::new(d, d, vals).map_err(|e| Error::Parse {
                        line,
                        reason: e.to_string(),
                    })?;
                    if name != "B" {
                        let asym = m.sub(&m.transpose()).expect("square").max_abs();
                        if asym > 1e-10 * m.max_abs().max(1.0) {
                            return Err(Error::Parse {
                                line,
                                reason: format!("{key} is not symmetric (defect {asym:e})"),
                            });
                        }
                        return Ok(m.symmetrized());
                    }
                    Ok(m)
                })
                .collect()
        };
        let vectors = |name: &str| -> Result<Vec<Vec<f64>>> {
            (0..n)
                .map(|i| fields.reals(&format!("{name}[{}]", i + 1), d).map(|(_, v)| v))
                .collect()
        };
        let (a, b, c) = (matrices("A")?, matrices("B")?, matrices("C")?);
        let (u, v) = (vectors("u")?, vectors("v")?);
        if let Some((key, line)) = fields.unknown_indexed(n) {
            return Err(Error::Parse {
                line,
                reason: format!("field `{key}` exceeds n = {n}"),
            });
        }
        Self::from_parts(a, b, c, u, v, constants, PARSE_SUM_TOL)
    }
}

/// 17 significant digits, which round-trips every f64.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

struct FieldMap<'a> {
    entries: HashMap<&'a str, (usize, &'a str)>,
}

impl<'a> FieldMap<'a> {
    fn parse(text: &'a str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Parse {
                line,
                reason: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            if !is_known_key(key) {
                return Err(Error::Parse {
                    line,
                    reason: format!("unknown field `{key}`"),
                });
            }
            if entries.insert(key, (line, value.trim())).is_some() {
                return Err(Error::Parse {
                    line,
                    reason: format!("duplicate field `{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    fn get(&self, key: &str) -> Result<(usize, &'a str)> {
        self.entries
            .get(key)
            .copied()
            .ok_or_else(|| Error::MissingField(key.to_string()))
    }

    fn scalar<T: std::str::FromStr>(&self, key: &str) -> Result<(usize, T)> {
        let (line, raw) = self.get(key)?;
        let v = raw.parse::<T>().map_err(|_| Error::Parse {
            line,
            reason: format!("field `{key}` has invalid value `{raw}`"),
        })?;
        Ok((line, v))
    }

    fn reals(&self, key: &str, expected: usize) -> Result<(usize, Vec<f64>)> {
        let (line, raw) = self.get(key)?;
        let vals = raw
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        reason: format!("field `{key}` has invalid real `{t}`"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != expected {
            return Err(Error::Parse {
                line,
                reason: format!("field `{key}` expects {expected} values, found {}", vals.len()),
            });
        }
        Ok((line, vals))
    }

    fn unknown_indexed(&self, n: usize) -> Option<(String, usize)> {
        self.entries.iter().find_map(|(key, (line, _))| {
            let idx = key.split_once('[')?.1.strip_suffix(']')?.parse::<usize>().ok()?;
            (idx == 0 || idx > n).then(|| (key.to_string(), *line))
        })
    }
}

fn is_known_key(key: &str) -> bool {
    const SCALARS: [&str; 8] = [
        "version",
        "n",
        "d",
        "constants.L",
        "constants.mu1",
        "constants.mu2",
        "constants.lambda_min_C",
        "constants.rank_M",
    ];
    if SCALARS.contains(&key) {
        return true;
    }
    let Some((name, rest)) = key.split_once('[') else {
        return false;
    };
    matches!(name, "A" | "B" | "C" | "u" | "v")
        && rest.strip_suffix(']').is_some_and(|i| i.parse::<usize>().is_ok())
}

impl MinimaxProblem for QuadraticGame {
    fn num_components(&self) -> usize {
        self.n
    }

    fn dim_x(&self) -> usize {
        self.d
    }

    fn dim_y(&self) -> usize {
        self.d
    }

    fn component_value(&self, i: usize, x: &[f64], y: &[f64]) -> f64 {
        0.5 * self.a[i].quad_form(x) + dot(x, &self.b[i].matvec(y)) - 0.5 * self.c[i].quad_form(y)
            + dot(&self.u[i], x)
            - dot(&self.v[i], y)
    }

    fn component_grad_x(&self, i: usize, x: &[f64], y: &[f64]) -> Vec<f64> {
        let ax = self.a[i].matvec(x);
        let by = self.b[i].matvec(y);
        (0..self.d).map(|k| ax[k] + by[k] + self.u[i][k]).collect()
    }

    fn component_grad_y(&self, i: usize, x: &[f64], y: &[f64]) -> Vec<f64> {
        let btx = self.bt[i].matvec(x);
        let cy = self.c[i].matvec(y);
        (0..self.d).map(|k| btx[k] - cy[k] - self.v[i][k]).collect()
    }
}

impl SaddleProblem for QuadraticGame {
    fn objective(&self, x: &[f64], y: &[f64]) -> f64 {
        0.5 * self.a_mean.quad_form(x) + dot(x, &self.b_mean.matvec(y))
            - 0.5 * self.c_mean.quad_form(y)
            + dot(&self.u_mean, x)
            - dot(&self.v_mean, y)
    }

    fn primal_value(&self, x: &[f64]) -> f64 {
        match &self.m {
            Some(m) => 0.5 * m.quad_form(x),
            None => f64::INFINITY,
        }
    }

    fn primal_gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.m {
            Some(m) => m.matvec(x),
            None => vec![f64::NAN; self.d],
        }
    }

    /// `(0; 0)`. When M is rank deficient every `(x, y*(x))` with `Mx = 0` is
    /// also a saddle point; the origin is the reference element.
    fn saddle(&self) -> Option<Point> {
        self.m.as_ref().map(|_| Point::zeros(self.d, self.d))
    }
}

/// Fitted variance constants `(Â, B̂)`, certified on a point cloud only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceConstants {
    pub a_hat: f64,
    pub b_hat: f64,
    pub cloud_radius: f64,
}

/// Fits `(Â, B̂)` so that `(1/n)Σ‖∇_j f_i(z) − ∇_j f(z)‖² ≤ Â‖∇_j f(z)‖² + B̂`
/// at every cloud point for both j. Returns the `Â = 0` fit and the joint fit
/// minimizing `B̂` over [`VARIANCE_A_GRID`].
pub fn fit_variance_constants<P: MinimaxProblem + ?Sized>(
    problem: &P,
    points: &[Point],
    cloud_radius: f64,
) -> (VarianceConstants, VarianceConstants) {
    let n = problem.num_components();
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(2 * points.len());
    for z in points {
        let gx: Vec<Vec<f64>> = (0..n).map(|i| problem.component_grad_x(i, &z.x, &z.y)).collect();
        let gy: Vec<Vec<f64>> = (0..n).map(|i| problem.component_grad_y(i, &z.x, &z.y)).collect();
        for g in [gx, gy] {
            let mean = mean_vector(&g);
            let spread = g
                .iter()
                .map(|gi| gi.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .sum::<f64>()
                / n as f64;
            samples.push((spread, norm_sq(&mean)));
        }
    }
    let b_for = |a: f64| samples.iter().fold(0.0f64, |m, (s, g)| m.max(s - a * g));
    let zero_a = VarianceConstants {
        a_hat: 0.0,
        b_hat: b_for(0.0),
        cloud_radius,
    };
    let (a_hat, b_hat) = VARIANCE_A_GRID
        .iter()
        .map(|&a| (a, b_for(a)))
        .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    (
        zero_a,
        VarianceConstants {
            a_hat,
            b_hat,
            cloud_radius,
        },
    )
}

/// Outcome of one assumption check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// A point where the check failed, when it is pointwise.
    pub witness: Option<Point>,
}

/// Results of [`validate_assumptions`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
    /// Joint fit used for downstream bounds.
    pub variance: VarianceConstants,
    /// The `Â = 0` fit.
    pub variance_zero_a: VarianceConstants,
    /// Largest component Hessian spectral norm; reported, not gated.
    pub component_hessian_norm: f64,
    pub cloud_radius: f64,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs the smoothness, PL, variance, y*-Lipschitz and Φ-smoothness checks on
/// a cloud of `cloud_size` points uniform in the ball of radius `radius`.
pub fn validate_assumptions<R: Rng + ?Sized>(
    game: &QuadraticGame,
    cloud_size: usize,
    radius: f64,
    rng: &mut R,
) -> Result<ValidationReport> {
    if cloud_size < 100 {
        return Err(invalid("cloud_size", format!("need at least 100 points, got {cloud_size}")));
    }
    let d = game.d;
    let k = game.constants;
    let cloud: Vec<Point> = (0..cloud_size).map(|_| random_point_in_ball(d, d, radius, rng)).collect();
    let mut checks = Vec::new();

    // (a) component smoothness.
    let mut block_max = 0.0f64;
    let mut hessian_max = 0.0f64;
    let mut worst = 0;
    for i in 0..game.n {
        let m = spectral_norm(&game.a[i])
            .max(spectral_norm(&game.b[i]))
            .max(spectral_norm(&game.c[i]));
        if m > block_max {
            block_max = m;
            worst = i;
        }
        hessian_max = hessian_max.max(spectral_norm(&game.component_hessian(i)));
    }
    checks.push(CheckOutcome {
        name: "component smoothness",
        passed: block_max <= SMOOTHNESS_HEADROOM * k.l,
        detail: format!(
            "max block norm {block_max:.6} (component {}) vs L = {:.6} with 5% headroom; full component Hessian norm {hessian_max:.6}",
            worst + 1,
            k.l
        ),
        witness: None,
    });

    // (b) y-side PL, probed at the cloud and along the smallest eigenvector of C.
    let c_eig = sym_eigen(&game.c_mean)?;
    let mut probes = cloud.clone();
    probes.push(Point {
        x: vec![0.0; d],
        y: c_eig.eigenvector(0).iter().map(|v| v * radius).collect(),
    });
    let y_pl = probes.iter().find_map(|z| {
        let g2 = norm_sq(&game.batch_grad_y(&(0..game.n).collect::<Vec<_>>(), &z.x, &z.y));
        let gap = game.primal_value(&z.x) - game.objective(&z.x, &z.y);
        let ok = g2 >= 2.0 * k.mu2 * gap - PL_SLACK;
        (!ok).then(|| (z.clone(), g2, gap))
    });
    checks.push(match y_pl {
        None => CheckOutcome {
            name: "y-side PL",
            passed: true,
            detail: format!("holds at {} points with mu2 = {:.6}", probes.len(), k.mu2),
            witness: None,
        },
        Some((z, g2, gap)) => CheckOutcome {
            name: "y-side PL",
            passed: false,
            detail: format!(
                "fails: |grad_y f|^2 = {g2:e} < 2 mu2 (Phi - f) = {:e} (lambda_min(C) = {:e})",
                2.0 * k.mu2 * gap,
                c_eig.min()
            ),
            witness: Some(z),
        },
    });

    // (c) primal PL, probed at the cloud and along the eigenvectors of M.
    checks.push(match &game.m {
        None => CheckOutcome {
            name: "primal PL",
            passed: false,
            detail: "C is not positive definite, so Phi is unbounded".into(),
            witness: None,
        },
        Some(m) => {
            let m_eig = sym_eigen(m)?;
            let mut probes: Vec<Point> = cloud.clone();
            for j in 0..d {
                probes.push(Point {
                    x: m_eig.eigenvector(j).iter().map(|v| v * radius).collect(),
                    y: vec![0.0; d],
                });
            }
            let fail = probes.iter().find(|z| {
                let g = norm_sq(&m.matvec(&z.x));
                g < 2.0 * k.mu1 * game.primal_value(&z.x) - PL_SLACK
            });
            CheckOutcome {
                name: "primal PL",
                passed: fail.is_none(),
                detail: format!(
                    "mu1 = {:.6}; smallest eigenvalue of M {:.3e}",
                    k.mu1,
                    m_eig.min()
                ),
                witness: fail.cloned(),
            }
        }
    });

    // (d) variance constants.
    let (zero_a, joint) = fit_variance_constants(game, &cloud, radius);
    checks.push(CheckOutcome {
        name: "variance constants",
        passed: joint.a_hat >= 0.0 && joint.b_hat >= 0.0 && joint.b_hat.is_finite(),
        detail: format!(
            "A=0 fit: B = {:.6e}; joint fit: A = {}, B = {:.6e} (cloud radius {radius})",
            zero_a.b_hat, joint.a_hat, joint.b_hat
        ),
        witness: None,
    });

    // (e) y* Lipschitz.
    checks.push(match &game.y_map {
        None => CheckOutcome {
            name: "y* Lipschitz",
            passed: false,
            detail: "C is not positive definite".into(),
            witness: None,
        },
        Some(map) => {
            let bound = k.kappa2() + 1e-8;
            let mut worst_ratio = 0.0f64;
            let mut fail = None;
            for pair in cloud.chunks_exact(2) {
                let dx: Vec<f64> = pair[0].x.iter().zip(&pair[1].x).map(|(a, b)| a - b).collect();
                let nx = norm_sq(&dx).sqrt();
                let ny = norm_sq(&map.matvec(&dx)).sqrt();
                if nx > 0.0 {
                    worst_ratio = worst_ratio.max(ny / nx);
                }
                if ny > bound * nx && fail.is_none() {
                    fail = Some(pair[0].clone());
                }
            }
            CheckOutcome {
                name: "y* Lipschitz",
                passed: fail.is_none(),
                detail: format!("max ratio {worst_ratio:.6} vs kappa2 = {:.6}", k.kappa2()),
                witness: fail,
            }
        }
    });

    // (f) Φ smoothness.
    checks.push(match &game.m {
        None => CheckOutcome {
            name: "Phi smoothness",
            passed: false,
            detail: "C is not positive definite".into(),
            witness: None,
        },
        Some(m) => {
            let norm = spectral_norm(m);
            let bound = k.l * (k.kappa2() + 1.0) + 1e-8;
            CheckOutcome {
                name: "Phi smoothness",
                passed: norm <= bound,
                detail: format!("|M| = {norm:.6} vs L(kappa2 + 1) = {bound:.6}"),
                witness: None,
            }
        }
    });

    Ok(ValidationReport {
        checks,
        variance: joint,
        variance_zero_a: zero_a,
        component_hessian_norm: hessian_max,
        cloud_radius: radius,
    })
}
