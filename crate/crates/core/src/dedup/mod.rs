//! MinHash near-duplicate detection with LSH banding.

mod lsh;
mod minhash;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lsh::{candidate_probability, LshIndex};
pub use minhash::{
    exact_jaccard, hash_bytes, normalize, shingles, MinHashError, MinHashSignature, MinHasher, MERSENNE_61,
};

use crate::corpus::jsonl::append_json_line;
use crate::corpus::Document;
use crate::lang::Lang;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupParams {
    pub seed: u64,
    /// Pairs are duplicates when similarity is strictly greater than this.
    pub threshold: f64,
    pub num_perm: usize,
    pub bands: usize,
    pub rows: usize,
    pub shingle_n: usize,
    /// Verify candidates with exact shingle Jaccard instead of the estimate.
    pub exact: bool,
}

impl Default for DedupParams {
    fn default() -> Self {
        Self { seed: 0, threshold: 0.8, num_perm: 128, bands: 16, rows: 8, shingle_n: 5, exact: false }
    }
}

impl DedupParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.bands * self.rows != self.num_perm {
            return Err(format!(
                "bands × rows ({} × {}) must equal num_perm ({})",
                self.bands, self.rows, self.num_perm
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if self.shingle_n == 0 {
            return Err("shingle_n must be at least 1".into());
        }
        Ok(())
    }
}

/// One connected component of confirmed near-duplicate pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub lang: Lang,
    pub kept: String,
    pub removed: Vec<String>,
    /// Confirmed pairs with their similarity score.
    pub estimates: Vec<(String, String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    #[serde(rename = "_header")]
    pub header: bool,
    #[serde(flatten)]
    pub params: DedupParams,
    pub normalization: String,
    pub representative: String,
    pub documents_in: u64,
    pub documents_kept: u64,
    pub unsignable: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupOutcome {
    pub clusters: Vec<Cluster>,
    /// Ids of documents removed as duplicates.
    pub removed: HashSet<String>,
    /// Documents with no usable text; they are kept as-is.
    pub unsignable: Vec<String>,
    pub candidate_pairs: usize,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Finds near-duplicate clusters among `docs`, independently per language.
/// The kept representative of each cluster is its lexicographically
/// smallest id, so the result does not depend on input order.
pub fn find_duplicates(docs: &[Document], params: &DedupParams) -> DedupOutcome {
    let hasher = MinHasher::new(params.seed, params.num_perm, params.shingle_n);
    let sets: Vec<Option<HashSet<u64>>> = docs.par_iter().map(|d| hasher.shingles(&d.text).ok()).collect();
    let sigs: Vec<Option<MinHashSignature>> =
        sets.par_iter().map(|s| s.as_ref().map(|s| hasher.signature_of(s))).collect();

    let mut by_lang: BTreeMap<Lang, Vec<usize>> = BTreeMap::new();
    let mut unsignable = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        if sigs[i].is_some() {
            by_lang.entry(d.lang).or_default().push(i);
        } else {
            unsignable.push(d.id.clone());
        }
    }

    let mut clusters = Vec::new();
    let mut removed = HashSet::new();
    let mut candidate_pairs = 0;
    for (lang, members) in by_lang {
        let group: Vec<&MinHashSignature> = members.iter().map(|&i| sigs[i].as_ref().unwrap()).collect();
        let pairs = LshIndex::build(&group, params.bands, params.rows).candidate_pairs();
        candidate_pairs += pairs.len();
        let confirmed: Vec<(usize, usize, f64)> = pairs
            .par_iter()
            .filter_map(|&(a, b)| {
                let (ia, ib) = (members[a], members[b]);
                let score = if params.exact {
                    exact_jaccard(sets[ia].as_ref().unwrap(), sets[ib].as_ref().unwrap())
                } else {
                    group[a].estimate_jaccard(group[b]).expect("same hasher")
                };
                (score > params.threshold).then_some((a, b, score))
            })
            .collect();

        let mut uf = UnionFind::new(members.len());
        for &(a, b, _) in &confirmed {
            uf.union(a, b);
        }
        let mut comps: HashMap<usize, Vec<usize>> = HashMap::new();
        for &(a, b, _) in &confirmed {
            for x in [a, b] {
                comps.entry(uf.find(x)).or_default().push(x);
            }
        }
        let mut pair_scores: HashMap<usize, Vec<(usize, usize, f64)>> = HashMap::new();
        for &(a, b, s) in &confirmed {
            pair_scores.entry(uf.find(a)).or_default().push((a, b, s));
        }
        for (root, mut idx) in comps {
            idx.sort_unstable();
            idx.dedup();
            let mut ids: Vec<&str> = idx.iter().map(|&i| docs[members[i]].id.as_str()).collect();
            ids.sort_unstable();
            let kept = ids[0].to_string();
            let rest: Vec<String> = ids[1..].iter().map(|s| s.to_string()).collect();
            removed.extend(rest.iter().cloned());
            let mut estimates: Vec<(String, String, f64)> = pair_scores
                .remove(&root)
                .unwrap_or_default()
                .into_iter()
                .map(|(a, b, s)| {
                    let (x, y) = (&docs[members[a]].id, &docs[members[b]].id);
                    (x.min(y).clone(), x.max(y).clone(), s)
                })
                .collect();
            estimates.sort_by(|p, q| (&p.0, &p.1).cmp(&(&q.0, &q.1)));
            clusters.push(Cluster { lang, kept, removed: rest, estimates });
        }
    }
    clusters.sort_by(|a, b| (a.lang, &a.kept).cmp(&(b.lang, &b.kept)));
    unsignable.sort();
    DedupOutcome { clusters, removed, unsignable, candidate_pairs }
}

/// Writes the cluster manifest: a header line, then one cluster per line.
pub fn write_manifest(
    out: &mut impl Write,
    params: &DedupParams,
    outcome: &DedupOutcome,
    documents_in: u64,
) -> std::io::Result<()> {
    let header = ManifestHeader {
        header: true,
        params: *params,
        normalization: "lowercase; keep letters, digits, whitespace; collapse spaces".into(),
        representative: "lexicographically smallest id".into(),
        documents_in,
        documents_kept: documents_in - outcome.removed.len() as u64,
        unsignable: outcome.unsignable.clone(),
    };
    append_json_line(out, &header)?;
    for c in &outcome.clusters {
        append_json_line(out, c)?;
    }
    out.flush()
}

/// Keeps documents not removed by `outcome`, in input order.
pub fn dedup_corpus(docs: Vec<Document>, params: &DedupParams) -> (Vec<Document>, DedupOutcome) {
    let outcome = find_duplicates(&docs, params);
    let kept = docs.into_iter().filter(|d| !outcome.removed.contains(&d.id)).collect();
    (kept, outcome)
}
