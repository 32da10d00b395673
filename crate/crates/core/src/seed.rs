//! Deterministic seed derivation for reproducible parallel runs.
//!
//! Every replicate of every experiment draws its randomness from a stream
//! seeded by [`derive_seed`], a pure function of the master seed and a stream
//! index. Results are therefore byte-identical for a given master seed no
//! matter how work is scheduled across threads, and any single replicate can
//! be re-run in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// First increment of the 64-bit golden-ratio sequence.
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derive the seed for stream `index` from `master` using one step of the
/// splitmix64 generator: the state is `master + (index + 1) * GOLDEN_GAMMA`
/// (wrapping), pushed through the splitmix64 output mixer. Distinct indices
/// give statistically independent seeds, and `derive_seed(m, i)` never equals
/// the raw `master` for small `i` in practice, so accidental stream reuse is
/// not a concern.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A ChaCha8 stream seeded from `derive_seed(master, index)`.
pub fn rng_for(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashSet;

    #[test]
    fn golden_values_are_frozen() {
        // derive_seed(0, 0) is splitmix64 of state 0 after one step, matching
        // the generator's published reference output.
        assert_eq!(derive_seed(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(derive_seed(0, 0), 16294208416658607535);
        assert_eq!(derive_seed(0, 1), 7960286522194355700);
        assert_eq!(derive_seed(42, 7), 14769051326987775908);
        assert_eq!(derive_seed(0xDEAD_BEEF, 123_456), 5800769195108185311);
    }

    #[test]
    fn streams_are_distinct() {
        let mut seen = HashSet::new();
        for master in [0u64, 1, 0xDEAD_BEEF] {
            for index in 0..200_000u64 {
                assert!(seen.insert(derive_seed(master, index)), "collision at {master}/{index}");
            }
        }
    }

    #[test]
    fn wraparound_is_defined() {
        // Large indices and masters must not panic (wrapping arithmetic).
        let _ = derive_seed(u64::MAX, u64::MAX);
        let _ = derive_seed(u64::MAX, 0);
        assert_ne!(derive_seed(u64::MAX, 1), derive_seed(u64::MAX, 2));
    }

    #[test]
    fn rng_streams_decorrelated() {
        let a: Vec<f64> = rng_for(7, 0).sample_iter(rand::distr::StandardUniform).take(64).collect();
        let b: Vec<f64> = rng_for(7, 1).sample_iter(rand::distr::StandardUniform).take(64).collect();
        assert_ne!(a, b);
        let corr: f64 = a.iter().zip(&b).map(|(x, y)| (x - 0.5) * (y - 0.5)).sum::<f64>() / 64.0;
        assert!(corr.abs() < 0.05, "streams look correlated: {corr}");
    }
}
