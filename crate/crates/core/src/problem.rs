//! Shared domain types and the finite-sum minimax problem interface.

use crate::error::{invalid, Error, Result};

/// An iterate `z = (x; y)` of a minimax problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Point {
    /// Builds a point, rejecting non-finite entries.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point"));
        }
        Ok(Self { x, y })
    }

    pub fn zeros(dim_x: usize, dim_y: usize) -> Self {
        Self {
            x: vec![0.0; dim_x],
            y: vec![0.0; dim_y],
        }
    }

    pub fn dim_x(&self) -> usize {
        self.x.len()
    }

    pub fn dim_y(&self) -> usize {
        self.y.len()
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.x) + norm_sq(&self.y)
    }

    fn check_same_shape(&self, other: &Point) -> Result<()> {
        if self.x.len() != other.x.len() {
            return Err(Error::DimensionMismatch {
                expected: self.x.len(),
                found: other.x.len(),
            });
        }
        if self.y.len() != other.y.len() {
            return Err(Error::DimensionMismatch {
                expected: self.y.len(),
                found: other.y.len(),
            });
        }
        Ok(())
    }

    /// Squared Euclidean distance `‖self − other‖²`.
    pub fn dist_sq(&self, other: &Point) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(dist_sq(&self.x, &other.x) + dist_sq(&self.y, &other.y))
    }

    /// Returns `self + s·other`, rejecting mismatched shapes and non-finite results.
    pub fn add_scaled(&self, other: &Point, s: f64) -> Result<Point> {
        self.check_same_shape(other)?;
        let x = self.x.iter().zip(&other.x).map(|(a, b)| a + s * b).collect();
        let y = self.y.iter().zip(&other.y).map(|(a, b)| a + s * b).collect();
        Point::new(x, y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }
}

/// Step sizes `(α, β)` for the x- and y-updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    alpha: f64,
    beta: f64,
    ratio: f64,
}

impl StepSizes {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive and finite, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("must be positive and finite, got {beta}")));
        }
        Ok(Self {
            alpha,
            beta,
            ratio: beta / alpha,
        })
    }

    /// Step sizes `(β/r, β)` for a given ratio `r = β/α`.
    pub fn from_ratio(beta: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid("ratio", format!("must be positive and finite, got {r}")));
        }
        Self::new(beta / r, beta)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `β/α` as computed at construction.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }
}

/// Smoothness and PL constants of a problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub l: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl ProblemConstants {
    pub fn new(l: f64, mu1: f64, mu2: f64) -> Result<Self> {
        if !(mu1 > 0.0 && mu1.is_finite()) {
            return Err(invalid("mu1", format!("must be positive, got {mu1}")));
        }
        if !(mu2 > 0.0 && mu2.is_finite()) {
            return Err(invalid("mu2", format!("must be positive, got {mu2}")));
        }
        if !(l.is_finite() && l >= mu1 && l >= mu2) {
            return Err(invalid("L", format!("must satisfy L >= max(mu1, mu2), got {l}")));
        }
        Ok(Self { l, mu1, mu2 })
    }

    pub fn kappa1(&self) -> f64 {
        self.l / self.mu1
    }

    pub fn kappa2(&self) -> f64 {
        self.l / self.mu2
    }
}

/// Selects a single component (0-based) or the full average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Index(usize),
    Full,
}

/// A finite-sum minimax problem `f = (1/n) Σ f_i`, minimized over x and
/// maximized over y.
///
/// Implementors supply unchecked per-component evaluations; the provided
/// methods add index and dimension checks.
pub trait MinimaxProblem: Send + Sync {
    fn num_components(&self) -> usize;
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;

    /// `f_i(x; y)` with a 0-based index. Callers guarantee valid inputs.
    fn component_value(&self, i: usize, x: &[f64], y: &[f64]) -> f64;
    /// `∇₁f_i(x; y)`.
    fn component_grad_x(&self, i: usize, x: &[f64], y: &[f64]) -> Vec<f64>;
    /// `∇₂f_i(x; y)`.
    fn component_grad_y(&self, i: usize, x: &[f64], y: &[f64]) -> Vec<f64>;

    fn check_point(&self, z: &Point) -> Result<()> {
        if z.x.len() != self.dim_x() {
            return Err(Error::DimensionMismatch {
                expected: self.dim_x(),
                found: z.x.len(),
            });
        }
        if z.y.len() != self.dim_y() {
            return Err(Error::DimensionMismatch {
                expected: self.dim_y(),
                found: z.y.len(),
            });
        }
        Ok(())
    }

    fn check_component(&self, which: Component) -> Result<()> {
        match which {
            Component::Index(i) if i >= self.num_components() => Err(Error::IndexOutOfRange {
                index: i,
                n: self.num_components(),
            }),
            _ => Ok(()),
        }
    }

    /// `(∇₁f_i(z), ∇₂f_i(z))`, or the averages over all components for [`Component::Full`].
    fn gradient(&self, which: Component, z: &Point) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_component(which)?;
        self.check_point(z)?;
        Ok(match which {
            Component::Index(i) => (
                self.component_grad_x(i, &z.x, &z.y),
                self.component_grad_y(i, &z.x, &z.y),
            ),
            Component::Full => {
                let all: Vec<usize> = (0..self.num_components()).collect();
                (
                    self.batch_grad_x(&all, &z.x, &z.y),
                    self.batch_grad_y(&all, &z.x, &z.y),
                )
            }
        })
    }

    fn value(&self, which: Component, z: &Point) -> Result<f64> {
        self.check_component(which)?;
        self.check_point(z)?;
        Ok(match which {
            Component::Index(i) => self.component_value(i, &z.x, &z.y),
            Component::Full => {
                let n = self.num_components();
                (0..n).map(|i| self.component_value(i, &z.x, &z.y)).sum::<f64>() / n as f64
            }
        })
    }

    /// `Σ_{i∈batch} ∇₁f_i(x; y)` summed in batch order (not averaged).
    fn batch_sum_grad_x(&self, batch: &[usize], x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim_x()];
        for &i in batch {
            for (a, g) in acc.iter_mut().zip(self.component_grad_x(i, x, y)) {
                *a += g;
            }
        }
        acc
    }

    /// `Σ_{i∈batch} ∇₂f_i(x; y)` summed in batch order (not averaged).
    fn batch_sum_grad_y(&self, batch: &[usize], x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim_y()];
        for &i in batch {
            for (a, g) in acc.iter_mut().zip(self.component_grad_y(i, x, y)) {
                *a += g;
            }
        }
        acc
    }

    fn batch_grad_x(&self, batch: &[usize], x: &[f64], y: &[f64]) -> Vec<f64> {
        let b = batch.len() as f64;
        self.batch_sum_grad_x(batch, x, y).into_iter().map(|g| g / b).collect()
    }

    fn batch_grad_y(&self, batch: &[usize], x: &[f64], y: &[f64]) -> Vec<f64> {
        let b = batch.len() as f64;
        self.batch_sum_grad_y(batch, x, y).into_iter().map(|g| g / b).collect()
    }
}

/// A minimax problem whose primal function `Φ(x) = max_y f(x; y)` is known in
/// closed form, so the potential `V_λ` can be evaluated.
pub trait SaddleProblem: MinimaxProblem {
    /// The full objective `f(x; y)`.
    fn objective(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.num_components();
        (0..n).map(|i| self.component_value(i, x, y)).sum::<f64>() / n as f64
    }

    /// `Φ(x)`; `+∞` when `f(x; ·)` is unbounded above.
    fn primal_value(&self, x: &[f64]) -> f64;

    /// `∇Φ(x)`.
    fn primal_gradient(&self, x: &[f64]) -> Vec<f64>;

    /// `Φ* = min Φ`.
    fn primal_min(&self) -> f64 {
        0.0
    }

    /// The saddle point, when unique and known.
    fn saddle(&self) -> Option<Point>;

    /// `V_λ(z) = λ(Φ(x) − Φ*) + (Φ(x) − f(x; y))`.
    fn potential(&self, z: &Point, lambda: f64) -> f64 {
        let phi = self.primal_value(&z.x);
        lambda * (phi - self.primal_min()) + (phi - self.objective(&z.x, &z.y))
    }
}

/// A point drawn uniformly from the ball of the given radius in `R^{dx+dy}`.
pub fn random_point_in_ball<R: rand::Rng + ?Sized>(dim_x: usize, dim_y: usize, radius: f64, rng: &mut R) -> Point {
    let dim = dim_x + dim_y;
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    let norm = norm_sq(&v).sqrt();
    let r = radius * rng.gen::<f64>().powf(1.0 / dim as f64);
    if norm > 0.0 {
        v.iter_mut().for_each(|t| *t *= r / norm);
    }
    let y = v.split_off(dim_x);
    Point { x: v, y }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// f(x; y) = x·y in one dimension, used for hand-computed checks.
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

    #[test]
    fn point_rejects_non_finite_and_mismatched() {
        assert!(Point::new(vec![f64::NAN], vec![]).is_err());
        let a = Point::zeros(2, 1);
        let b = Point::zeros(1, 1);
        assert!(matches!(a.dist_sq(&b), Err(Error::DimensionMismatch { .. })));
        assert!(a.add_scaled(&b, 1.0).is_err());
        let c = Point::new(vec![1.0, 2.0], vec![3.0]).unwrap();
        assert_eq!(a.dist_sq(&c).unwrap(), 14.0);
        assert!(c.add_scaled(&c, f64::MAX).is_err());
    }

    #[test]
    fn step_sizes_ratio() {
        let s = StepSizes::new(0.01, 0.5).unwrap();
        assert_eq!(s.ratio(), 0.5 / 0.01);
        assert!(StepSizes::new(0.0, 1.0).is_err());
        assert!(StepSizes::new(1.0, -1.0).is_err());
        let t = StepSizes::from_ratio(0.5, 50.0).unwrap();
        assert_eq!(t.alpha(), 0.01);
    }

    #[test]
    fn constants_invariants() {
        let c = ProblemConstants::new(4.0, 0.4, 0.4).unwrap();
        assert_eq!(c.kappa2(), 10.0);
        assert!(ProblemConstants::new(0.1, 0.4, 0.4).is_err());
        assert!(ProblemConstants::new(1.0, 0.0, 0.4).is_err());
    }

    #[test]
    fn interface_checks_index_and_dims() {
        let p = Bilinear;
        let z = Point::new(vec![2.0], vec![3.0]).unwrap();
        assert_eq!(p.gradient(Component::Index(0), &z).unwrap(), (vec![3.0], vec![2.0]));
        assert_eq!(p.gradient(Component::Full, &z).unwrap(), (vec![3.0], vec![2.0]));
        assert!(matches!(
            p.gradient(Component::Index(1), &z),
            Err(Error::IndexOutOfRange { index: 1, n: 1 })
        ));
        assert!(p.gradient(Component::Full, &Point::zeros(2, 1)).is_err());
        assert_eq!(p.value(Component::Full, &z).unwrap(), 6.0);
    }
}
