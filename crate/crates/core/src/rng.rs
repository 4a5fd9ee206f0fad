//! Keyed random streams.
//!
//! Every random quantity is addressed by `(seed, stream id)`; within a stream
//! the ChaCha block counter provides the position. A weight row can therefore
//! be regenerated at any time without touching shared state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream namespaces. Each occupies the top 16 bits of a stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Domain {
    Weights = 1,
    Lemma = 2,
    Data = 3,
    Shuffle = 4,
}

/// Packs `(domain, major, minor)` into a 64-bit ChaCha stream id.
pub fn stream_id(domain: Domain, major: u16, minor: u32) -> u64 {
    ((domain as u64) << 48) | ((major as u64) << 32) | minor as u64
}

pub fn keyed_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn fill_standard_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replica `index` of a run seeded with `seed`; distinct replicas and
/// distinct base seeds give unrelated values.
pub fn replica_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draw(seed: u64, stream: u64, n: usize) -> Vec<f64> {
        let mut rng = keyed_stream(seed, stream);
        let mut v = vec![0.0; n];
        fill_standard_normal(&mut rng, &mut v);
        v
    }

    #[test]
    fn same_key_same_values() {
        let id = stream_id(Domain::Weights, 2, 17);
        assert_eq!(draw(42, id, 64), draw(42, id, 64));
    }

    #[test]
    fn keys_are_independent() {
        let a = draw(42, stream_id(Domain::Weights, 1, 0), 8);
        let b = draw(42, stream_id(Domain::Weights, 1, 1), 8);
        let c = draw(42, stream_id(Domain::Weights, 2, 0), 8);
        let d = draw(43, stream_id(Domain::Weights, 1, 0), 8);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn stream_id_layout() {
        assert_eq!(stream_id(Domain::Lemma, 0, 0), 2 << 48);
        assert_eq!(stream_id(Domain::Weights, 3, 5), (1 << 48) | (3 << 32) | 5);
    }

    #[test]
    fn replica_seeds_differ() {
        let seeds: Vec<u64> = (0..16).map(|r| replica_seed(7, r)).collect();
        let mut dedup = seeds.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), seeds.len());
        assert_ne!(replica_seed(7, 0), replica_seed(8, 0));
    }

    #[test]
    fn standard_normal_moments() {
        let v = draw(1, 0, 100_000);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02);
        assert!((var - 1.0).abs() < 0.05);
    }
}
