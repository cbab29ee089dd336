//! Shared fixtures for the criterion benches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgda_core::linalg::{random_orthogonal, DenseMatrix};
use sgda_core::quadgame::{generate_game, GameGenConfig};
use sgda_core::QuadraticGame;

/// The default 100-component, 25-dimensional game.
pub fn default_game() -> QuadraticGame {
    generate_game(&GameGenConfig::default()).expect("default config generates")
}

/// A random symmetric matrix with known spectrum `1..=d`.
pub fn symmetric_matrix(d: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_orthogonal(d, &mut rng).expect("orthogonal factor");
    let spectrum: Vec<f64> = (1..=d).map(|k| k as f64).collect();
    DenseMatrix::from_eigen(&q, &spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sgda_core::linalg::sym_eigen;

    #[test]
    fn fixture_spectrum() {
        let eig = sym_eigen(&symmetric_matrix(6, 1)).unwrap();
        for (k, v) in eig.eigenvalues.iter().enumerate() {
            assert!((v - (k + 1) as f64).abs() < 1e-10);
        }
    }
}
