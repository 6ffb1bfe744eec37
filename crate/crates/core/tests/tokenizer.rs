use twp::TokenCounter;

const FIXTURE: &str = include_str!("fixtures/bpe_200_words.txt");
// produced by tests/oracles/bpe_count.py
const ORACLE_IDS: &str = include_str!("fixtures/bpe_200_words.ids");
const ORACLE_COUNT: usize = 408;

#[test]
fn bundled_bpe_matches_reference_on_200_word_fixture() {
    assert_eq!(FIXTURE.split_whitespace().count(), 200);
    let t = TokenCounter::bundled_bpe();
    let expected: Vec<u32> = ORACLE_IDS.trim().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(expected.len(), ORACLE_COUNT);
    assert_eq!(t.count(FIXTURE), ORACLE_COUNT);
    assert_eq!(t.encode(FIXTURE), expected);
}

#[test]
fn counting_is_deterministic_and_superadditive() {
    let t = TokenCounter::bundled_bpe();
    let (a, b) = FIXTURE.split_at(FIXTURE.len() / 2);
    let ab = format!("{a}{b}");
    assert_eq!(t.count(&ab), t.count(FIXTURE));
    assert!(t.count(&ab) >= t.count(a).max(t.count(b)));
}
