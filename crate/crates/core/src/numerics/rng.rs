//! Seeded, splittable randomness.
//!
//! Every stochastic draw in the crate comes from a [`SeededRng`] addressed by a
//! `(seed, stream)` pair. The generator is ChaCha8 with the stream word set
//! explicitly, so two streams never overlap and the sequence produced for a given
//! pair is the same on every platform and under any thread scheduling.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance on the sum of a probability vector.
pub const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng {
            seed,
            stream,
            inner,
        }
    }

    pub fn for_key(seed: u64, key: StreamKey) -> Self {
        Self::new(seed, key.pack())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

/// Address of an independent random stream: `(trial, user, slot)`.
///
/// The three components are packed into disjoint bit ranges of the 64-bit stream
/// word (16 bits trial, 32 bits user, 16 bits slot), which makes the mapping
/// injective. Slots are year indices; [`StreamKey::SETUP`] is reserved for
/// per-user draws that happen once before the first year.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StreamKey {
    pub trial: u16,
    pub user: u32,
    pub slot: u16,
}

impl StreamKey {
    pub const SETUP: u16 = u16::MAX;

    /// Checked constructor from wide integers.
    pub fn new(trial: usize, user: usize, slot: usize) -> Result<Self> {
        let trial = u16::try_from(trial)
            .map_err(|_| Error::domain(format!("trial index {trial} exceeds 16 bits")))?;
        let user = u32::try_from(user)
            .map_err(|_| Error::domain(format!("user index {user} exceeds 32 bits")))?;
        let slot = u16::try_from(slot)
            .ok()
            .filter(|s| *s != Self::SETUP)
            .ok_or_else(|| Error::domain(format!("slot index {slot} out of range")))?;
        Ok(StreamKey { trial, user, slot })
    }

    pub fn setup(trial: u16, user: u32) -> Self {
        StreamKey {
            trial,
            user,
            slot: Self::SETUP,
        }
    }

    pub fn pack(self) -> u64 {
        (u64::from(self.trial) << 48) | (u64::from(self.user) << 16) | u64::from(self.slot)
    }

    pub fn unpack(word: u64) -> Self {
        StreamKey {
            trial: (word >> 48) as u16,
            user: (word >> 16) as u32,
            slot: word as u16,
        }
    }
}

/// Returns `true` with probability `p`. Always consumes exactly one uniform.
pub fn bernoulli(p: f64, rng: &mut SeededRng) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("bernoulli parameter {p} outside [0, 1]")));
    }
    Ok(rng.uniform() < p)
}

/// Draws an index with probability proportional to `weights[i]`.
///
/// The weights must be non-negative and sum to one within [`PROB_SUM_TOL`]. A
/// single-entry vector returns 0 without consuming randomness, so deterministic
/// components do not shift the stream of the caller.
pub fn categorical(weights: &[f64], rng: &mut SeededRng) -> Result<usize> {
    check_distribution(weights)?;
    Ok(categorical_unchecked(weights, rng))
}

pub(crate) fn check_distribution(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::domain("empty probability vector"));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::domain(format!("invalid probability weight {w}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::domain(format!("probability weights sum to {sum}, not 1")));
    }
    Ok(())
}

pub(crate) fn categorical_unchecked(weights: &[f64], rng: &mut SeededRng) -> usize {
    if weights.len() == 1 {
        return 0;
    }
    let u = rng.uniform();
    pick_index(weights, u)
}

/// Inverse-CDF selection for a uniform `u`; rounding slack falls on the last
/// positive-weight entry.
pub(crate) fn pick_index(weights: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_sequence() {
        let mut a = SeededRng::new(7, 3);
        let mut b = SeededRng::new(7, 3);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn streams_differ() {
        let mut a = SeededRng::new(7, 3);
        let mut b = SeededRng::new(7, 4);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn key_pack_roundtrip() {
        let k = StreamKey::new(4, 999, 18).unwrap();
        assert_eq!(StreamKey::unpack(k.pack()), k);
        assert!(StreamKey::new(70_000, 0, 0).is_err());
        assert!(StreamKey::new(0, 0, u16::MAX as usize).is_err());
    }

    #[test]
    fn bernoulli_edges() {
        let mut rng = SeededRng::new(1, 0);
        for _ in 0..1000 {
            assert!(!bernoulli(0.0, &mut rng).unwrap());
            assert!(bernoulli(1.0, &mut rng).unwrap());
        }
        assert!(bernoulli(1.5, &mut rng).is_err());
        assert!(bernoulli(-0.1, &mut rng).is_err());
    }

    #[test]
    fn bernoulli_half_mean() {
        let mut rng = SeededRng::new(2, 0);
        let n = 100_000;
        let hits = (0..n).filter(|_| bernoulli(0.5, &mut rng).unwrap()).count();
        let mean = hits as f64 / n as f64;
        assert!((0.49..=0.51).contains(&mean), "mean {mean}");
    }

    #[test]
    fn categorical_degenerate_and_errors() {
        let mut rng = SeededRng::new(3, 0);
        for _ in 0..100 {
            assert_eq!(categorical(&[1.0, 0.0, 0.0], &mut rng).unwrap(), 0);
        }
        assert!(categorical(&[0.5, 0.6], &mut rng).is_err());
        assert!(categorical(&[1.5, -0.5], &mut rng).is_err());
        assert!(categorical(&[], &mut rng).is_err());
    }

    #[test]
    fn categorical_race_frequencies() {
        let w = [0.1235, 0.8406, 0.0359];
        let mut rng = SeededRng::new(4, 0);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[categorical(&w, &mut rng).unwrap()] += 1;
        }
        for (c, p) in counts.iter().zip(w) {
            let f = *c as f64 / n as f64;
            assert!((f - p).abs() <= 0.01, "freq {f} vs {p}");
        }
    }

    #[test]
    fn single_entry_consumes_nothing() {
        let mut a = SeededRng::new(5, 0);
        let mut b = a.clone();
        categorical(&[1.0], &mut a).unwrap();
        assert_eq!(a.next_u64(), b.next_u64());
    }
}
