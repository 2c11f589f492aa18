//! Counter-based random streams.
//!
//! Every `(seed, replication, support point)` triple owns a disjoint block of
//! one ChaCha8 keystream: the seed selects the key, the replication index the
//! stream, and the support index a word offset. Draws therefore do not depend
//! on the order in which replications are evaluated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Word offset reserved for each support point inside a replication stream.
const WORDS_PER_POINT: u128 = 1 << 40;

/// Below this expected minority count, binomials are drawn by inversion.
const INVERSION_THRESHOLD: f64 = 20.0;

pub fn point_stream(seed: u64, replication: u64, point: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng.set_word_pos(point as u128 * WORDS_PER_POINT);
    rng
}

/// SplitMix64 finaliser, used to derive independent child seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws from Binomial(`trials`, `p`).
pub fn binomial<R: Rng>(rng: &mut R, trials: u64, p: f64) -> u64 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    let flip = p > 0.5;
    let q = if flip { 1.0 - p } else { p };
    let k = if trials as f64 * q < INVERSION_THRESHOLD {
        inversion(rng, trials, q)
    } else {
        (0..trials).filter(|_| rng.random::<f64>() < q).count() as u64
    };
    if flip {
        trials - k
    } else {
        k
    }
}

/// Sequential CDF search from zero.
fn inversion<R: Rng>(rng: &mut R, trials: u64, q: f64) -> u64 {
    let u: f64 = rng.random();
    let odds = q / (1.0 - q);
    let mut pmf = (trials as f64 * (-q).ln_1p()).exp();
    let mut cdf = pmf;
    let mut k = 0;
    while u > cdf && k < trials {
        pmf *= (trials - k) as f64 / (k + 1) as f64 * odds;
        k += 1;
        cdf += pmf;
    }
    k
}
