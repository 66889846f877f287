//! Deterministic random streams.
//!
//! Every Monte Carlo trial owns independent streams derived from
//! `(seed, trial, purpose)`, so results never depend on worker count or
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DOMAIN_TAG: u64 = 0x484d_425f_7631; // "HMB_v1"

/// Purpose tag separating the random streams used within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    /// Channel realizations: directions, gains, rankings.
    Channels,
    /// Hash-family draws for the multi-arm beam sets.
    Hashes,
    /// Receiver noise during scanning.
    Noise,
    /// Random phase configurations of untrained RISs in the baselines.
    Interference,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Channels => 1,
            StreamPurpose::Hashes => 2,
            StreamPurpose::Noise => 3,
            StreamPurpose::Interference => 4,
        }
    }
}

/// Build the random stream for one `(seed, trial, purpose)` triple.
pub fn trial_stream(seed: u64, trial: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&purpose.tag().to_le_bytes());
    key[24..32].copy_from_slice(&DOMAIN_TAG.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_reproduce_and_separate() {
        let mut a = trial_stream(1, 2, StreamPurpose::Noise);
        let mut b = trial_stream(1, 2, StreamPurpose::Noise);
        assert_eq!(a.next_u64(), b.next_u64());

        let mut c = trial_stream(1, 2, StreamPurpose::Channels);
        let mut d = trial_stream(1, 3, StreamPurpose::Noise);
        let mut e = trial_stream(2, 2, StreamPurpose::Noise);
        let base = trial_stream(1, 2, StreamPurpose::Noise).next_u64();
        assert_ne!(base, c.next_u64());
        assert_ne!(base, d.next_u64());
        assert_ne!(base, e.next_u64());
    }
}
