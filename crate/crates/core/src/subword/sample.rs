use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::segment::SegmentedDocument;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleStats {
    pub sentences_in: u64,
    pub tokens_in: u64,
    pub sentences_out: u64,
    pub tokens_out: u64,
}

struct Held {
    doc_id: u64,
    title: String,
    tokens: Vec<String>,
}

/// Token-budgeted uniform sentence sampler.
///
/// Every sentence draws a uniform key from a stream seeded by `seed`; the
/// sample is the shortest prefix of the key order whose token count reaches
/// the budget. Held state is bounded by the budget (plus one sentence), so
/// corpora of any size can be streamed through.
pub struct SentenceSampler {
    budget: u64,
    rng: ChaCha8Rng,
    heap: BinaryHeap<(u64, u64)>,
    held: HashMap<u64, Held>,
    held_tokens: u64,
    next_index: u64,
    stats: SampleStats,
}

impl SentenceSampler {
    pub fn new(token_budget: u64, seed: u64) -> Self {
        assert!(token_budget >= 1, "token budget must be positive");
        SentenceSampler {
            budget: token_budget,
            rng: ChaCha8Rng::seed_from_u64(seed),
            heap: BinaryHeap::new(),
            held: HashMap::new(),
            held_tokens: 0,
            next_index: 0,
            stats: SampleStats::default(),
        }
    }

    pub fn offer(&mut self, doc_id: u64, title: &str, tokens: &[String]) {
        let key: u64 = self.rng.random();
        let index = self.next_index;
        self.next_index += 1;
        self.stats.sentences_in += 1;
        self.stats.tokens_in += tokens.len() as u64;

        if self.held_tokens >= self.budget {
            if let Some(&(max_key, max_index)) = self.heap.peek() {
                if (key, index) > (max_key, max_index) {
                    return;
                }
            }
        }
        self.heap.push((key, index));
        self.held_tokens += tokens.len() as u64;
        self.held.insert(
            index,
            Held {
                doc_id,
                title: title.to_string(),
                tokens: tokens.to_vec(),
            },
        );
        while let Some(&(_, top)) = self.heap.peek() {
            let top_len = self.held[&top].tokens.len() as u64;
            if self.held_tokens - top_len < self.budget {
                break;
            }
            self.heap.pop();
            self.held.remove(&top);
            self.held_tokens -= top_len;
        }
    }

    pub fn offer_document(&mut self, doc: &SegmentedDocument) {
        for sentence in &doc.sentences {
            self.offer(doc.doc_id, &doc.title, sentence);
        }
    }

    /// The sample in input order, regrouped under the source documents.
    pub fn finish(self) -> (Vec<SegmentedDocument>, SampleStats) {
        let mut stats = self.stats;
        let mut selected: Vec<(u64, Held)> = self.held.into_iter().collect();
        selected.sort_unstable_by_key(|(i, _)| *i);
        let mut docs: Vec<SegmentedDocument> = Vec::new();
        for (_, held) in selected {
            stats.sentences_out += 1;
            stats.tokens_out += held.tokens.len() as u64;
            match docs.last_mut() {
                Some(d) if d.doc_id == held.doc_id => d.sentences.push(held.tokens),
                _ => docs.push(SegmentedDocument {
                    doc_id: held.doc_id,
                    title: held.title,
                    sentences: vec![held.tokens],
                }),
            }
        }
        if stats.sentences_in == 0 {
            log::warn!("sampling an empty corpus; the sample is empty");
        }
        (docs, stats)
    }
}

/// Samples sentences up to `token_budget` tokens, deterministically in `seed`.
pub fn sample_sentences<'a, I>(docs: I, token_budget: u64, seed: u64) -> (Vec<SegmentedDocument>, SampleStats)
where
    I: IntoIterator<Item = &'a SegmentedDocument>,
{
    let mut sampler = SentenceSampler::new(token_budget, seed);
    for doc in docs {
        sampler.offer_document(doc);
    }
    sampler.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(n_docs: u64, sentences: usize, len: usize) -> Vec<SegmentedDocument> {
        (0..n_docs)
            .map(|d| SegmentedDocument {
                doc_id: d,
                title: format!("d{d}"),
                sentences: (0..sentences)
                    .map(|s| (0..len).map(|t| format!("w{d}_{s}_{t}")).collect())
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn budget_above_corpus_returns_everything() {
        let c = corpus(3, 4, 5);
        let (sample, stats) = sample_sentences(&c, 1_000, 7);
        assert_eq!(sample, c);
        assert_eq!(stats.tokens_out, 60);
    }

    #[test]
    fn same_seed_same_sample() {
        let c = corpus(20, 10, 3);
        assert_eq!(sample_sentences(&c, 50, 42), sample_sentences(&c, 50, 42));
        assert_ne!(sample_sentences(&c, 50, 42).0, sample_sentences(&c, 50, 43).0);
    }

    #[test]
    fn stops_once_budget_reached() {
        let c = corpus(10, 10, 4);
        let (_, stats) = sample_sentences(&c, 30, 1);
        // 8 sentences of 4 tokens are the shortest prefix reaching 30
        assert_eq!(stats.sentences_out, 8);
        assert_eq!(stats.tokens_out, 32);
    }

    #[test]
    fn empty_input() {
        let (sample, stats) = sample_sentences(&[], 10, 1);
        assert!(sample.is_empty());
        assert_eq!(stats, SampleStats::default());
    }
}
