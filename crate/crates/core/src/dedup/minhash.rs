use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Mersenne prime 2^61 − 1, modulus of the permutation family.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MinHashError {
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("signatures come from different permutation families (seed {0} vs {1})")]
    SeedMismatch(u64, u64),
    #[error("signature lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Lowercases, drops everything except letters, digits and whitespace, and
/// collapses whitespace runs to one space.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        let mut w = String::new();
        for c in word.chars().filter(|c| c.is_alphanumeric()) {
            w.extend(c.to_lowercase());
        }
        if !w.is_empty() {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&w);
        }
    }
    out
}

/// FNV-1a followed by the splitmix64 finalizer for better bit diffusion.
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Hashed word `n`-grams of the normalized text. Texts shorter than `n`
/// words yield one shingle for the whole normalized text.
pub fn shingles(text: &str, n: usize) -> Result<HashSet<u64>, MinHashError> {
    let norm = normalize(text);
    if norm.is_empty() {
        return Err(MinHashError::EmptyText);
    }
    let words: Vec<&str> = norm.split(' ').collect();
    if words.len() < n {
        return Ok(HashSet::from([hash_bytes(norm.as_bytes())]));
    }
    Ok(words.windows(n).map(|w| hash_bytes(w.join(" ").as_bytes())).collect())
}

pub fn exact_jaccard(a: &HashSet<u64>, b: &HashSet<u64>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub seed: u64,
    pub values: Vec<u64>,
}

impl MinHashSignature {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fraction of positions where the two signatures agree.
    pub fn estimate_jaccard(&self, other: &Self) -> Result<f64, MinHashError> {
        if self.seed != other.seed {
            return Err(MinHashError::SeedMismatch(self.seed, other.seed));
        }
        if self.len() != other.len() {
            return Err(MinHashError::LengthMismatch(self.len(), other.len()));
        }
        let agree = self.values.iter().zip(&other.values).filter(|(a, b)| a == b).count();
        Ok(agree as f64 / self.len() as f64)
    }
}

/// Family of `num_perm` universal hashes `(a·x + b) mod (2^61 − 1)`.
#[derive(Debug, Clone)]
pub struct MinHasher {
    seed: u64,
    shingle_n: usize,
    a: Vec<u64>,
    b: Vec<u64>,
}

impl MinHasher {
    pub fn new(seed: u64, num_perm: usize, shingle_n: usize) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = (0..num_perm).map(|_| rng.random_range(1..MERSENNE_61)).collect();
        let b = (0..num_perm).map(|_| rng.random_range(0..MERSENNE_61)).collect();
        Self { seed, shingle_n: shingle_n.max(1), a, b }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_perm(&self) -> usize {
        self.a.len()
    }

    pub fn shingle_n(&self) -> usize {
        self.shingle_n
    }

    pub fn shingles(&self, text: &str) -> Result<HashSet<u64>, MinHashError> {
        shingles(text, self.shingle_n)
    }

    pub fn signature(&self, text: &str) -> Result<MinHashSignature, MinHashError> {
        Ok(self.signature_of(&self.shingles(text)?))
    }

    pub fn signature_of(&self, shingles: &HashSet<u64>) -> MinHashSignature {
        let mut values = vec![u64::MAX; self.a.len()];
        for &s in shingles {
            let x = u128::from(s % MERSENNE_61);
            for (k, v) in values.iter_mut().enumerate() {
                let h = ((u128::from(self.a[k]) * x + u128::from(self.b[k])) % u128::from(MERSENNE_61)) as u64;
                if h < *v {
                    *v = h;
                }
            }
        }
        MinHashSignature { seed: self.seed, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize("  Hello,   WORLD!\n It's  fine. "), "hello world its fine");
        assert_eq!(normalize("?! ..."), "");
    }

    #[test]
    fn short_texts_use_whole_text_shingle() {
        let s = shingles("Just four words here", 5).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(shingles("one two three four five six", 5).unwrap().len(), 2);
        assert_eq!(shingles("...", 5), Err(MinHashError::EmptyText));
    }

    #[test]
    fn identical_and_case_insensitive() {
        let h = MinHasher::new(7, 128, 5);
        let a = h.signature("The quick brown fox jumps over the lazy dog today").unwrap();
        let b = h.signature("the QUICK brown fox, jumps over the lazy dog today!").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 128);
        assert_eq!(a.estimate_jaccard(&b).unwrap(), 1.0);
    }

    #[test]
    fn seed_mismatch_is_an_error() {
        let a = MinHasher::new(1, 128, 5).signature("alpha beta gamma").unwrap();
        let b = MinHasher::new(2, 128, 5).signature("alpha beta gamma").unwrap();
        assert_eq!(a.estimate_jaccard(&b), Err(MinHashError::SeedMismatch(1, 2)));
    }

    #[test]
    fn disjoint_texts_estimate_zero() {
        let h = MinHasher::new(3, 128, 5);
        let a = h.signature("one two three four five six seven eight").unwrap();
        let b = h.signature("nine ten eleven twelve thirteen fourteen fifteen").unwrap();
        assert_eq!(a.estimate_jaccard(&b).unwrap(), 0.0);
    }
}
