use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use super::minhash::{hash_bytes, MinHashSignature};

/// Banded locality-sensitive index over MinHash signatures.
///
/// Two signatures become candidates iff all `rows` values of at least one
/// band are identical.
#[derive(Debug, Clone)]
pub struct LshIndex {
    bands: usize,
    rows: usize,
    tables: Vec<HashMap<u64, Vec<usize>>>,
}

impl LshIndex {
    pub fn new(bands: usize, rows: usize) -> Self {
        assert!(bands > 0 && rows > 0);
        Self { bands, rows, tables: vec![HashMap::new(); bands] }
    }

    fn band_key(sig: &MinHashSignature, band: usize, rows: usize) -> u64 {
        let mut bytes = Vec::with_capacity(rows * 8);
        for v in &sig.values[band * rows..(band + 1) * rows] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        hash_bytes(&bytes)
    }

    /// Builds the index for `sigs` (item `i` is `sigs[i]`), one band per task.
    pub fn build(sigs: &[&MinHashSignature], bands: usize, rows: usize) -> Self {
        for s in sigs {
            assert_eq!(s.len(), bands * rows, "signature length must equal bands × rows");
        }
        let tables = (0..bands)
            .into_par_iter()
            .map(|band| {
                let mut table: HashMap<u64, Vec<usize>> = HashMap::new();
                for (i, s) in sigs.iter().enumerate() {
                    table.entry(Self::band_key(s, band, rows)).or_default().push(i);
                }
                table
            })
            .collect();
        Self { bands, rows, tables }
    }

    pub fn insert(&mut self, item: usize, sig: &MinHashSignature) {
        assert_eq!(sig.len(), self.bands * self.rows);
        for band in 0..self.bands {
            let key = Self::band_key(sig, band, self.rows);
            self.tables[band].entry(key).or_default().push(item);
        }
    }

    /// All colliding pairs `(i, j)` with `i < j`, sorted.
    pub fn candidate_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = BTreeSet::new();
        for table in &self.tables {
            for bucket in table.values().filter(|b| b.len() > 1) {
                for (x, &i) in bucket.iter().enumerate() {
                    for &j in &bucket[x + 1..] {
                        pairs.insert((i.min(j), i.max(j)));
                    }
                }
            }
        }
        pairs.into_iter().collect()
    }
}

/// Probability that a pair with Jaccard `s` becomes a candidate.
pub fn candidate_probability(s: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}
