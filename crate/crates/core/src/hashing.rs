//! Prime-field polynomial hash families and balanced direction partitions.
//!
//! A random degree-(k-1) polynomial over a prime field is a k-wise
//! independent map of direction indices. Reducing the polynomial value mod B
//! and rank-chunking the keys yields B beams of exactly N/B directions each,
//! keeping the hash-induced pseudorandomness while enforcing exact balance.

use rand::Rng;

use crate::error::{Error, Result};

/// Largest allowed modulus; keeps `(p-1)^2 + p` inside `u64`.
const MAX_MODULUS: u64 = 1 << 31;

/// Trial-division primality test, sufficient for moduli up to `2^31`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Smallest prime `>= n`; embeds an N-key universe in a prime field.
pub fn smallest_prime_at_least(n: u64) -> Result<u64> {
    let mut candidate = n.max(2);
    loop {
        if candidate > MAX_MODULUS {
            return Err(Error::ModulusTooLarge(candidate));
        }
        if is_prime(candidate) {
            return Ok(candidate);
        }
        candidate += 1;
    }
}

/// Integers modulo a prime `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    modulus: u64,
}

impl PrimeField {
    pub fn new(modulus: u64) -> Result<Self> {
        if modulus > MAX_MODULUS {
            return Err(Error::ModulusTooLarge(modulus));
        }
        if !is_prime(modulus) {
            return Err(Error::NotPrime(modulus));
        }
        Ok(Self { modulus })
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.modulus
    }
}

/// A sampled polynomial hash:
/// `x -> (a_0 + a_1 x + ... + a_{k-1} x^{k-1} mod p) mod B`.
///
/// The coefficient tail `a_1..a_{k-1}` is never all zero, so the family
/// excludes the constant functions and has size `p^k - p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyHash {
    field: PrimeField,
    coeffs: Vec<u64>,
    bins: u64,
}

impl PolyHash {
    pub fn new(field: PrimeField, coeffs: Vec<u64>, bins: u64) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "polynomial hash needs at least 2 coefficients, got {}",
                coeffs.len()
            )));
        }
        let p = field.modulus();
        if let Some(&c) = coeffs.iter().find(|&&c| c >= p) {
            return Err(Error::KeyOutOfRange { key: c, modulus: p });
        }
        if coeffs[1..].iter().all(|&c| c == 0) {
            return Err(Error::InvalidConfig(
                "coefficients a_1..a_{k-1} are all zero".into(),
            ));
        }
        if bins == 0 {
            return Err(Error::InvalidConfig("bin count must be positive".into()));
        }
        Ok(Self {
            field,
            coeffs,
            bins,
        })
    }

    /// Polynomial value before the bin reduction, by Horner's scheme.
    pub fn eval(&self, key: u64) -> Result<u64> {
        let p = self.field.modulus();
        if key >= p {
            return Err(Error::KeyOutOfRange { key, modulus: p });
        }
        let mut acc = 0u64;
        for &c in self.coeffs.iter().rev() {
            acc = (acc * key + c) % p;
        }
        Ok(acc)
    }

    /// Bin index in `[0, B)`.
    pub fn bin(&self, key: u64) -> Result<u64> {
        Ok(self.eval(key)? % self.bins)
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn bins(&self) -> u64 {
        self.bins
    }

    pub fn independence_order(&self) -> usize {
        self.coeffs.len()
    }
}

/// Parameters of the family `{h : [0, N) -> [0, B)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashFamilySpec {
    field: PrimeField,
    independence: usize,
    bins: u64,
    key_count: u64,
}

impl HashFamilySpec {
    pub fn new(field: PrimeField, independence: usize, bins: u64, key_count: u64) -> Result<Self> {
        if independence < 2 {
            return Err(Error::InvalidConfig(format!(
                "independence order must be >= 2, got {independence}"
            )));
        }
        if key_count == 0 || key_count > field.modulus() {
            return Err(Error::InvalidConfig(format!(
                "key count {key_count} outside [1, p={}]",
                field.modulus()
            )));
        }
        if bins == 0 || bins > key_count {
            return Err(Error::InvalidConfig(format!(
                "bin count {bins} outside [1, N={key_count}]"
            )));
        }
        if !key_count.is_multiple_of(bins) {
            return Err(Error::IndivisibleGrid {
                directions: key_count as usize,
                beams: bins as usize,
            });
        }
        Ok(Self {
            field,
            independence,
            bins,
            key_count,
        })
    }

    /// Family over `directions` keys with the smallest prime field that fits.
    pub fn for_keys(directions: usize, bins: usize, independence: usize) -> Result<Self> {
        let p = smallest_prime_at_least(directions as u64)?;
        Self::new(
            PrimeField::new(p)?,
            independence,
            bins as u64,
            directions as u64,
        )
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn independence(&self) -> usize {
        self.independence
    }

    pub fn bins(&self) -> u64 {
        self.bins
    }

    pub fn key_count(&self) -> u64 {
        self.key_count
    }

    /// `p^k - p`: all coefficient vectors minus the constant functions.
    pub fn family_size(&self) -> u128 {
        let p = self.field.modulus() as u128;
        p.pow(self.independence as u32) - p
    }
}

/// Draw a hash uniformly from the family, rejecting all-zero tails.
pub fn sample_hash<R: Rng + ?Sized>(spec: &HashFamilySpec, rng: &mut R) -> PolyHash {
    let p = spec.field.modulus();
    loop {
        let coeffs: Vec<u64> = (0..spec.independence).map(|_| rng.gen_range(0..p)).collect();
        if coeffs[1..].iter().any(|&c| c != 0) {
            return PolyHash {
                field: spec.field,
                coeffs,
                bins: spec.bins,
            };
        }
    }
}

/// Partition keys `0..N` into `B` groups of exactly `N/B`.
///
/// Keys are ranked by `(bin, polynomial value, key)` and chunked into
/// consecutive runs: the hash decides the grouping while the chunking
/// absorbs the residual imbalance of the raw mod-B reduction.
pub fn balanced_partition(hash: &PolyHash, key_count: u64) -> Result<Vec<Vec<usize>>> {
    let bins = hash.bins();
    if !key_count.is_multiple_of(bins) {
        return Err(Error::IndivisibleGrid {
            directions: key_count as usize,
            beams: bins as usize,
        });
    }
    let mut ranked = Vec::with_capacity(key_count as usize);
    for key in 0..key_count {
        let value = hash.eval(key)?;
        ranked.push((value % bins, value, key));
    }
    ranked.sort_unstable();
    let run = (key_count / bins) as usize;
    Ok(ranked
        .chunks(run)
        .map(|chunk| chunk.iter().map(|&(_, _, key)| key as usize).collect())
        .collect())
}
