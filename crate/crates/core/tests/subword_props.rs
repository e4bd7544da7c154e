mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wikiprep::segment::SegmentedDocument;
use wikiprep::subword::{
    replay_merges, sample_sentences, train_bpe, wordpiece_tokenize, BpeConfig, CONTINUATION_PREFIX, SPECIAL_TOKENS,
};

fn word_counts(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|(w, n)| (w.to_string(), *n)).collect()
}

fn merge_pairs(model: &wikiprep::subword::BpeModel) -> Vec<(String, String)> {
    model.merges.iter().map(|m| (m.left.clone(), m.right.clone())).collect()
}

#[test]
fn classic_fixture_first_merge() {
    let words = word_counts(&[("low", 5), ("lower", 2), ("newest", 6), ("widest", 3)]);
    let cfg = BpeConfig { vocab_size: 60, min_char_count: 1 };
    let model = train_bpe(&words, &cfg).unwrap();
    assert_eq!((model.merges[0].left.as_str(), model.merges[0].right.as_str()), ("##e", "##s"));
    assert_eq!(model.merges[0].frequency, 9);
    assert_eq!(merge_pairs(&model), common::bpe_oracle(&words, 60, 1));
}

#[test]
fn single_word_first_merge() {
    let words = word_counts(&[("aa", 10)]);
    let model = train_bpe(&words, &BpeConfig { vocab_size: 100, min_char_count: 1 }).unwrap();
    assert_eq!(merge_pairs(&model), vec![("a".to_string(), "##a".to_string())]);
    assert!(model.vocab.contains("aa"));
}

#[test]
fn vocab_size_at_boundary_performs_no_merges() {
    let words = word_counts(&[("abc", 10), ("cab", 10)]);
    let boundary = SPECIAL_TOKENS.len() + 2 * 3;
    let model = train_bpe(&words, &BpeConfig { vocab_size: boundary, min_char_count: 1 }).unwrap();
    assert!(model.merges.is_empty());
    assert_eq!(model.vocab.len(), boundary);
    assert!(train_bpe(&words, &BpeConfig { vocab_size: boundary - 1, min_char_count: 1 }).is_err());
}

#[test]
fn rare_characters_are_left_out() {
    let words = word_counts(&[("abab", 20), ("abz", 1)]);
    let model = train_bpe(&words, &BpeConfig { vocab_size: 50, min_char_count: 2 }).unwrap();
    assert!(!model.vocab.contains("z") && !model.vocab.contains("##z"));
    assert_eq!(model.dropped_words, 1);
    assert_eq!(merge_pairs(&model), common::bpe_oracle(&words, 50, 2));
}

fn toy_corpus() -> impl Strategy<Value = BTreeMap<String, u64>> {
    let word = proptest::collection::vec(0u8..10, 1..7)
        .prop_map(|v| v.into_iter().map(|i| char::from(b'a' + i)).collect::<String>());
    proptest::collection::btree_map(word, 1u64..20, 1..50)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn merges_match_recount_oracle(words in toy_corpus(), extra in 0usize..60, min_count in 1u64..4) {
        let chars = words.keys().flat_map(|w| w.chars()).collect::<BTreeSet<_>>().len();
        let vocab_size = SPECIAL_TOKENS.len() + 2 * chars + extra;
        let cfg = BpeConfig { vocab_size, min_char_count: min_count };
        let model = train_bpe(&words, &cfg).unwrap();
        prop_assert_eq!(merge_pairs(&model), common::bpe_oracle(&words, vocab_size, min_count));
        prop_assert!(model.vocab.len() <= vocab_size);
    }

    #[test]
    fn replayed_merges_reproduce_training_segmentation(words in toy_corpus(), extra in 0usize..80) {
        let cfg = BpeConfig { vocab_size: 30 + extra, min_char_count: 1 };
        let model = train_bpe(&words, &cfg).unwrap();
        for (word, segmentation) in &model.segmentation {
            prop_assert_eq!(&replay_merges(word, model.vocab.merges()), segmentation);
        }
    }

    #[test]
    fn training_is_deterministic(words in toy_corpus()) {
        let cfg = BpeConfig { vocab_size: 60, min_char_count: 1 };
        let a = train_bpe(&words, &cfg).unwrap();
        let b = train_bpe(&words, &cfg).unwrap();
        prop_assert_eq!(a.vocab, b.vocab);
    }
}

#[test]
fn wordpiece_greedy_and_reversible_on_random_tokens() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut unk = 0;
    for _ in 0..100 {
        let vocab = common::random_wordpiece_vocab(&mut rng);
        let entries: BTreeSet<String> = vocab.tokens().iter().cloned().collect();
        for _ in 0..100 {
            let token = common::random_wordpiece_token(&mut rng);
            let ids = wordpiece_tokenize(&token, &vocab, 100);
            let pieces: Vec<String> = ids.iter().map(|&i| vocab.token(i).unwrap().to_string()).collect();
            checked += 1;
            if ids == [vocab.specials().unk] {
                unk += 1;
                continue;
            }
            if let Some(v) = common::greedy_violation(&token, &pieces, &entries) {
                panic!("{token:?} -> {pieces:?}: {v}");
            }
            let rebuilt: String = pieces
                .iter()
                .map(|p| p.strip_prefix(CONTINUATION_PREFIX).unwrap_or(p))
                .collect();
            assert_eq!(rebuilt, token);
        }
    }
    assert_eq!(checked, 10_000);
    assert!(unk < checked, "every token fell back to [UNK]");
}

fn uniform_docs(sentences: usize, tokens_each: usize) -> Vec<SegmentedDocument> {
    (0..sentences / 10)
        .map(|d| SegmentedDocument {
            doc_id: d as u64,
            title: format!("d{d}"),
            sentences: (0..10)
                .map(|s| (0..tokens_each).map(|t| format!("w{d}_{s}_{t}")).collect())
                .collect(),
        })
        .collect()
}

#[test]
fn sample_covers_whole_corpus_under_large_budget() {
    let docs = uniform_docs(100, 3);
    let (sample, stats) = sample_sentences(&docs, 10_000, 1);
    assert_eq!(sample, docs);
    assert_eq!(stats.sentences_out, 100);
}

#[test]
fn sample_is_deterministic() {
    let docs = uniform_docs(1000, 4);
    assert_eq!(sample_sentences(&docs, 500, 9).0, sample_sentences(&docs, 500, 9).0);
    assert_ne!(sample_sentences(&docs, 500, 9).0, sample_sentences(&docs, 500, 10).0);
}

#[test]
fn empty_corpus_gives_empty_sample() {
    let (sample, stats) = sample_sentences(&[], 100, 0);
    assert!(sample.is_empty());
    assert_eq!(stats.sentences_in, 0);
}

#[test]
fn inclusion_is_uniform_over_seeds() {
    // 10k sentences of 10 tokens, budget 1000 tokens: 100 sentences per draw.
    let docs = uniform_docs(10_000, 10);
    let seeds = 100u64;
    let buckets = 20usize;
    let mut counts = vec![0u64; buckets];
    for seed in 0..seeds {
        let (sample, stats) = sample_sentences(&docs, 1000, seed);
        assert_eq!(stats.sentences_out, 100);
        for doc in &sample {
            for _ in &doc.sentences {
                let index = doc.doc_id as usize * 10;
                counts[index * buckets / 10_000] += 1;
            }
        }
    }
    let n = (seeds * 100) as f64;
    let p = 1.0 / buckets as f64;
    let mean = n * p;
    let sigma = (n * p * (1.0 - p)).sqrt();
    for (b, &c) in counts.iter().enumerate() {
        assert!((c as f64 - mean).abs() <= 3.0 * sigma, "bucket {b}: {c} vs {mean} ± {}", 3.0 * sigma);
    }
}
