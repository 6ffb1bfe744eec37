mod common;

use std::collections::HashSet;
use std::path::PathBuf;

use common::write_corpus;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twp::mixer::{
    balanced_sample, compose, compose_stage, interleave, LoadedSource, MixError, MixtureSource, MixtureSpec,
};
use twp::{Document, Lang, TokenCounter};

/// χ² statistic of observed bin counts against a uniform expectation.
fn chi_square(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

/// Upper 1% point of χ² with 9 degrees of freedom.
const CHI2_9DF_P01: f64 = 21.666;

fn docs(lang: Lang, n: usize, len: impl Fn(usize) -> usize) -> Vec<Document> {
    (0..n).map(|i| Document::new(format!("{lang}-{i:04}"), lang, vec!["tok"; len(i)].join(" "))).collect()
}

#[test]
fn hundred_ten_token_docs_budget_55() {
    let idx = balanced_sample(&[10; 100], 55, 1).unwrap();
    assert_eq!(idx.len(), 6);
    let all = balanced_sample(&[10; 100], 1000, 1).unwrap();
    assert_eq!(all.iter().copied().collect::<HashSet<_>>().len(), 100);
    assert_ne!(all, (0..100).collect::<Vec<_>>(), "shuffled");
    assert_eq!(balanced_sample(&[10; 100], 1001, 1), Err(1000));
}

proptest! {
    #[test]
    fn sample_lands_in_budget_window(
        lens in prop::collection::vec(1u64..500, 1..200),
        frac in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let total: u64 = lens.iter().sum();
        let budget = (total as f64 * frac) as u64;
        let idx = balanced_sample(&lens, budget, seed).unwrap();
        let got: u64 = idx.iter().map(|&i| lens[i]).sum();
        let max = *lens.iter().max().unwrap();
        prop_assert!(got >= budget && got < budget + max.max(1));
        prop_assert_eq!(idx.iter().collect::<HashSet<_>>().len(), idx.len());
        prop_assert_eq!(balanced_sample(&lens, budget, seed).unwrap(), idx);
    }

    #[test]
    fn interleave_conserves_every_item(sizes in prop::collection::vec(0usize..50, 1..5), seed in any::<u64>(), buffer in 0usize..20) {
        let sources: Vec<Vec<(usize, usize)>> = sizes.iter().enumerate().map(|(s, &n)| (0..n).map(|i| (s, i)).collect()).collect();
        let mut out = interleave(sources.clone(), seed, buffer);
        prop_assert_eq!(out.len(), sizes.iter().sum::<usize>());
        out.sort();
        let mut want: Vec<_> = sources.into_iter().flatten().collect();
        want.sort();
        prop_assert_eq!(out, want);
    }
}

#[test]
fn single_doc_corpus() {
    assert_eq!(interleave(vec![vec!["only"]], 3, 10), ["only"]);
    assert_eq!(interleave(vec![vec![1, 2], vec![]], 3, 0).len(), 2);
}

#[test]
fn label_positions_are_uniform_across_50_shuffles() {
    for buffer in [0, 16, 1000] {
        let mut bins = [0u64; 10];
        for seed in 0..50 {
            let a: Vec<bool> = vec![true; 100];
            let b: Vec<bool> = vec![false; 100];
            for (pos, is_a) in interleave(vec![a, b], seed, buffer).into_iter().enumerate() {
                if is_a {
                    bins[pos / 20] += 1;
                }
            }
        }
        let chi = chi_square(&bins);
        assert!(chi < CHI2_9DF_P01, "buffer {buffer}: χ² = {chi:.2} {bins:?}");
    }
}

#[test]
fn exact_shuffle_places_each_doc_uniformly() {
    let mut bins = [0u64; 10];
    for seed in 0..2000 {
        let a: Vec<usize> = (0..50).collect();
        let b: Vec<usize> = (50..100).collect();
        let out = interleave(vec![a, b], seed, 0);
        bins[out.iter().position(|&x| x == 0).unwrap() / 10] += 1;
    }
    let chi = chi_square(&bins);
    assert!(chi < CHI2_9DF_P01, "χ² = {chi:.2} {bins:?}");
}

fn adjacent_pairs(ids: &[String]) -> u64 {
    let base = |s: &str| s.split(':').next().unwrap().to_string();
    ids.windows(2).filter(|w| base(&w[0]) == base(&w[1])).count() as u64
}

#[test]
fn translations_are_not_placed_next_to_their_source() {
    // a uniform shuffle of 2n items puts a given pair side by side with
    // probability 2/(2n); n pairs give one adjacent pair per shuffle on average
    let n = 100;
    let seeds = 200u64;
    let tolerance = 4.0 * (seeds as f64).sqrt();
    let counter = TokenCounter::whitespace(0);
    let en: Vec<Document> = (0..n).map(|i| Document::new(format!("{i}"), Lang::En, "a b c")).collect();
    let fr: Vec<Document> = (0..n).map(|i| Document::new(format!("{i}:fr"), Lang::Fr, "a b c")).collect();

    // the stage path: aligned sources, small shuffle buffer
    let mut adjacent = 0;
    for seed in 0..seeds {
        let sources = vec![
            LoadedSource::from_docs("en", en.clone(), &counter),
            LoadedSource::from_docs("fr", fr.clone(), &counter),
        ];
        let (mixed, _) = compose("s", sources, &[300, 300], seed, 16).unwrap();
        adjacent += adjacent_pairs(&mixed.into_iter().map(|d| d.id).collect::<Vec<_>>());
    }
    assert!((adjacent as f64 - seeds as f64).abs() < tolerance, "compose: {adjacent} vs {seeds}");

    // the bare interleave with an exact shuffle
    let ids = |docs: &[Document]| docs.iter().map(|d| d.id.clone()).collect::<Vec<_>>();
    let adjacent: u64 = (0..seeds).map(|seed| adjacent_pairs(&interleave(vec![ids(&en), ids(&fr)], seed, 0))).sum();
    assert!((adjacent as f64 - seeds as f64).abs() < tolerance, "interleave: {adjacent} vs {seeds}");
}

fn source(name: &str, docs: Vec<Document>) -> LoadedSource {
    LoadedSource::from_docs(name, docs, &TokenCounter::whitespace(0))
}

#[test]
fn four_languages_with_equal_budgets() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sources: Vec<LoadedSource> = Lang::TARGETS
        .iter()
        .map(|&l| {
            let lens: Vec<usize> = (0..400).map(|_| rng.random_range(20..300)).collect();
            source(l.code(), docs(l, 400, |i| lens[i]))
        })
        .collect();
    let max = 299;
    let budget = 30_000;
    let run = || compose("pretrain", sources.clone(), &[budget; 4], 42, 100).unwrap();
    let (mixed, reports) = run();
    for r in &reports {
        assert!(r.realized_tokens >= budget && r.realized_tokens < budget + max);
    }
    for a in &reports {
        for b in &reports {
            assert!(a.realized_tokens.abs_diff(b.realized_tokens) < max);
        }
    }
    let (again, _) = run();
    assert_eq!(serde_json::to_vec(&mixed).unwrap(), serde_json::to_vec(&again).unwrap());
    assert_eq!(mixed.len() as u64, reports.iter().map(|r| r.documents).sum::<u64>());
}

#[test]
fn small_cooldown_share_is_honoured() {
    let spec_weights = [0.998, 0.002];
    let total = 500_000u64;
    let main = source("main", docs(Lang::En, 5200, |_| 100));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lens: Vec<usize> = (0..200).map(|_| rng.random_range(5..50)).collect();
    let cool = source("cooldown", docs(Lang::Fr, 200, |i| lens[i]));
    let budgets: Vec<u64> = spec_weights.iter().map(|w| (w * total as f64).round() as u64).collect();
    let (_, reports) = compose("cooldown", vec![main, cool], &budgets, 5, 1000).unwrap();
    let realized: u64 = reports.iter().map(|r| r.realized_tokens).sum();
    let share = reports[1].realized_tokens as f64 / realized as f64;
    assert!((share / 0.002 - 1.0).abs() <= 0.10, "share {share}");
}

#[test]
fn equal_weights_over_unequal_corpora() {
    let tmp = tempfile::tempdir().unwrap();
    let big = write_corpus(tmp.path(), "big.jsonl", &docs(Lang::De, 3000, |i| 10 + i % 40));
    let small = write_corpus(tmp.path(), "small.jsonl", &docs(Lang::Es, 500, |i| 20 + i % 20));
    let spec = MixtureSpec {
        stage: "continued".into(),
        total_tokens: Some(20_000),
        seed: None,
        shuffle_buffer: 1000,
        sources: vec![
            MixtureSource { name: "de".into(), path: big, budget: None, weight: Some(0.5) },
            MixtureSource { name: "es".into(), path: small, budget: None, weight: Some(0.5) },
        ],
    };
    let counter = TokenCounter::whitespace(0);
    let (mixed, manifest) = compose_stage(&spec, &counter, 1, true).unwrap();
    let (de, es) = (manifest.sources[0].realized_tokens, manifest.sources[1].realized_tokens);
    assert!(de.abs_diff(es) < 50, "{de} vs {es}");
    assert_eq!(manifest.total_documents as usize, mixed.len());
    let (again, m2) = compose_stage(&spec, &counter, 1, true).unwrap();
    assert_eq!(again, mixed);
    assert_eq!(m2, manifest);
    let (other_seed, _) = compose_stage(&spec, &counter, 2, true).unwrap();
    assert_ne!(other_seed, mixed);
}

#[test]
fn shortfall_is_reported_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_corpus(tmp.path(), "tiny.jsonl", &docs(Lang::Fr, 3, |_| 10));
    let spec = MixtureSpec {
        stage: "s".into(),
        total_tokens: None,
        seed: Some(1),
        shuffle_buffer: 10,
        sources: vec![MixtureSource { name: "fr".into(), path, budget: Some(31), weight: None }],
    };
    match compose_stage(&spec, &TokenCounter::whitespace(0), 0, true) {
        Err(e @ MixError::Shortfall { available: 30, budget: 31, .. }) => {
            assert!(e.to_string().contains("short by 1"), "{e}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn fixed_seed_output_matches_golden_file() {
    let sources =
        vec![source("en", docs(Lang::En, 30, |i| 1 + i % 7)), source("fr", docs(Lang::Fr, 30, |i| 2 + i % 5))];
    let (mixed, _) = compose("golden", sources, &[40, 40], 20_251_016, 8).unwrap();
    let got: String = mixed.iter().map(|d| format!("{}\n", d.id)).collect();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mixer_golden.txt");
    if std::env::var_os("TWP_BLESS").is_some() {
        std::fs::write(&path, &got).unwrap();
    }
    assert_eq!(got, std::fs::read_to_string(&path).unwrap());
}
