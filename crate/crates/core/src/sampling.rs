//! Latin hypercube sampling and the seeded generator used throughout.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded, platform-independent generator.
pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` points in the box `bounds`: each dimension places exactly one point in
/// each of `n` equal-width strata, at a uniform offset inside the stratum,
/// with an independent random stratum permutation per dimension.
///
/// Returns `n` rows of `bounds.len()` coordinates.
pub fn latin_hypercube<R: Rng + ?Sized>(
    bounds: &[(f64, f64)],
    n: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; bounds.len()]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        strata.shuffle(rng);
        let span = hi - lo;
        for (row, &s) in rows.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            // Stays below `hi` for u < 1; the min guards rounding at the top edge.
            row[j] = (lo + (s as f64 + u) / n as f64 * span).min(hi);
        }
    }
    rows
}
