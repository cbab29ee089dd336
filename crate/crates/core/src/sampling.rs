//! Per-epoch component access schedules and the without-replacement variance
//! formula for batch-mean prefixes.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Largest n accepted by the permutation enumeration oracle.
pub const MAX_EXACT_N: usize = 8;

/// Component sampling scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Random reshuffling: a fresh uniform permutation per epoch.
    RR,
    /// With replacement: every batch holds b i.i.d. uniform draws.
    WR,
    /// Without-replacement batches, drawn independently of each other.
    WORB,
    /// No shuffling: the fixed order 1..n every epoch.
    NS,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::RR, Scheme::WR, Scheme::WORB, Scheme::NS];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::RR => "RR",
            Scheme::WR => "WR",
            Scheme::WORB => "WORB",
            Scheme::NS => "NS",
        }
    }

    /// RR and NS partition [n] into disjoint batches, so b must divide n.
    pub fn requires_divisible(&self) -> bool {
        matches!(self, Scheme::RR | Scheme::NS)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RR" => Ok(Scheme::RR),
            "WR" => Ok(Scheme::WR),
            "WORB" => Ok(Scheme::WORB),
            "NS" => Ok(Scheme::NS),
            other => Err(invalid("sampler", format!("unknown sampler `{other}`"))),
        }
    }
}

/// A bijection on {0..n-1} (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || seen[i] {
                return Err(invalid("permutation", "not a bijection on [n]"));
            }
            seen[i] = true;
        }
        Ok(Self { order })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
        }
    }

    /// Uniform permutation by Fisher–Yates.
    pub fn uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self { order }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

/// One epoch's batches. Indices are 0-based and sorted within each batch so
/// that batch sums are evaluated in a canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSchedule {
    pub batches: Vec<Vec<usize>>,
    pub scheme: Scheme,
    pub batch_size: usize,
}

impl BatchSchedule {
    /// Number of batches in the epoch.
    pub fn q(&self) -> usize {
        self.batches.len()
    }

    /// Stable 64-bit digest of the batch contents (FNV-1a).
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for batch in &self.batches {
            for &i in batch.iter().chain(std::iter::once(&usize::MAX)) {
                for byte in (i as u64).to_le_bytes() {
                    h ^= u64::from(byte);
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for one epoch: seeded by `seed ⊕ hash(epoch)`.
pub fn epoch_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ mix64(epoch))
}

/// Number of batches per epoch for `n` components and batch size `b`.
pub fn batches_per_epoch(n: usize, b: usize) -> usize {
    (n / b).max(1)
}

fn check_sizes(scheme: Scheme, n: usize, b: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "need at least one component"));
    }
    if b == 0 || b > n {
        return Err(invalid("batch_size", format!("need 1 <= b <= n = {n}, got {b}")));
    }
    if scheme.requires_divisible() && n % b != 0 {
        return Err(invalid(
            "batch_size",
            format!("b = {b} must divide n = {n} under {scheme}"),
        ));
    }
    Ok(())
}

/// Builds an epoch schedule drawing randomness from `rng`.
pub fn schedule_with_rng<R: Rng + ?Sized>(
    scheme: Scheme,
    n: usize,
    b: usize,
    rng: &mut R,
) -> Result<BatchSchedule> {
    check_sizes(scheme, n, b)?;
    let q = batches_per_epoch(n, b);
    let mut batches: Vec<Vec<usize>> = match scheme {
        Scheme::NS => (0..q).map(|t| (t * b..(t + 1) * b).collect()).collect(),
        Scheme::RR => {
            let perm = Permutation::uniform(n, rng);
            perm.order.chunks(b).map(<[usize]>::to_vec).collect()
        }
        Scheme::WORB => (0..q).map(|_| index::sample(rng, n, b).into_vec()).collect(),
        Scheme::WR => (0..q)
            .map(|_| (0..b).map(|_| rng.gen_range(0..n)).collect())
            .collect(),
    };
    for batch in &mut batches {
        batch.sort_unstable();
    }
    Ok(BatchSchedule {
        batches,
        scheme,
        batch_size: b,
    })
}

/// Schedule for `epoch` of a run with `seed`; fully determined by
/// `(scheme, n, b, seed, epoch)`.
pub fn epoch_schedule(scheme: Scheme, n: usize, b: usize, seed: u64, epoch: u64) -> Result<BatchSchedule> {
    schedule_with_rng(scheme, n, b, &mut epoch_rng(seed, epoch))
}

/// Sample mean `m` and spread `τ² = (1/n) Σ ‖v_i − m‖²` of a vector family.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpread {
    pub mean: Vec<f64>,
    pub tau2: f64,
}

impl ComponentSpread {
    pub fn from_vectors(vectors: &[Vec<f64>]) -> Result<Self> {
        let dim = check_vectors(vectors)?;
        let mean = mean_of(vectors, 0..vectors.len(), dim);
        let tau2 = vectors.iter().map(|v| dist2(v, &mean)).sum::<f64>() / vectors.len() as f64;
        Ok(Self { mean, tau2 })
    }
}

fn check_vectors(vectors: &[Vec<f64>]) -> Result<usize> {
    let dim = vectors
        .first()
        .map(Vec::len)
        .ok_or_else(|| invalid("vectors", "need at least one vector"))?;
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }
    Ok(dim)
}

fn mean_of(vectors: &[Vec<f64>], idx: impl Iterator<Item = usize>, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    let mut count = 0usize;
    for i in idx {
        for (a, v) in acc.iter_mut().zip(&vectors[i]) {
            *a += v;
        }
        count += 1;
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    acc
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn check_prefix(n: usize, b: usize, k: usize) -> Result<usize> {
    if b == 0 || n % b != 0 {
        return Err(invalid("batch_size", format!("b = {b} must divide n = {n}")));
    }
    let q = n / b;
    if k == 0 || k > q {
        return Err(invalid("k", format!("need 1 <= k <= q = {q}, got {k}")));
    }
    Ok(q)
}

/// `E‖m_k − m‖² = (n − bk)/(bk(n − 1))·τ²` for the mean `m_k` of the first k
/// batches of a uniformly shuffled epoch.
pub fn wr_prefix_variance_theory(n: usize, b: usize, k: usize, tau2: f64) -> Result<f64> {
    if n == 1 {
        return Ok(0.0);
    }
    let q = check_prefix(n, b, k)?;
    if k == q {
        return Ok(0.0);
    }
    let bk = (b * k) as f64;
    let n = n as f64;
    Ok((n - bk) / (bk * (n - 1.0)) * tau2)
}

/// Calls `visit` on every permutation of 0..n (Heap's algorithm).
pub fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Exact `E‖m_k − m‖²` by averaging over all n! permutations.
pub fn wr_prefix_variance_exact(vectors: &[Vec<f64>], b: usize, k: usize) -> Result<f64> {
    let n = vectors.len();
    if n > MAX_EXACT_N {
        return Err(invalid(
            "n",
            format!("exact enumeration supports n <= {MAX_EXACT_N}, got {n}; use the Monte Carlo estimator"),
        ));
    }
    let dim = check_vectors(vectors)?;
    check_prefix(n, b, k)?;
    let m = mean_of(vectors, 0..n, dim);
    let len = b * k;
    let mut total = 0.0;
    let mut count = 0u64;
    let mut prefix = vec![0usize; len];
    for_each_permutation(n, |perm| {
        prefix.copy_from_slice(&perm[..len]);
        prefix.sort_unstable();
        let mk = mean_of(vectors, prefix.iter().copied(), dim);
        total += dist2(&mk, &m);
        count += 1;
    });
    Ok(total / count as f64)
}

/// Monte Carlo estimate of `E‖m_k − m‖²` with its standard error.
pub fn wr_prefix_variance_mc<R: Rng + ?Sized>(
    vectors: &[Vec<f64>],
    b: usize,
    k: usize,
    trials: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if trials < 1000 {
        return Err(invalid("trials", format!("need at least 1000, got {trials}")));
    }
    let n = vectors.len();
    let dim = check_vectors(vectors)?;
    check_prefix(n, b, k)?;
    let m = mean_of(vectors, 0..n, dim);
    let len = b * k;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        let mut prefix = index::sample(rng, n, len).into_vec();
        // Summing in index order makes the full-epoch prefix reproduce m exactly.
        prefix.sort_unstable();
        let e = dist2(&mean_of(vectors, prefix.into_iter(), dim), &m);
        sum += e;
        sum_sq += e * e;
    }
    let t = trials as f64;
    let mean = sum / t;
    let var = (sum_sq / t - mean * mean).max(0.0) * t / (t - 1.0);
    Ok((mean, (var / t).sqrt()))
}
