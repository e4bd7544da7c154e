//! Masked-LM + next-sentence-prediction instance generation.
//!
//! The procedure follows the reference BERT data generator: documents are
//! cut into chunks of sentences up to a target length, each chunk is split
//! into segments A and B, B is replaced by text from another document half
//! of the time, the pair is truncated to fit, and wordpieces are masked
//! 80/10/10. Every (document, duplication round) pair draws from its own
//! RNG stream, so the output does not depend on the number of workers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::subword::{SubwordVocab, CONTINUATION_PREFIX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExampleGenConfig {
    pub max_seq_length: usize,
    pub dupe_factor: usize,
    pub short_seq_prob: f64,
    pub masked_lm_prob: f64,
    pub max_predictions_per_seq: usize,
    /// Probability of replacing segment B with text from another document.
    pub random_next_prob: f64,
    pub whole_word_mask: bool,
    pub seed: u64,
}

impl Default for ExampleGenConfig {
    fn default() -> Self {
        ExampleGenConfig {
            max_seq_length: 128,
            dupe_factor: 10,
            short_seq_prob: 0.1,
            masked_lm_prob: 0.15,
            max_predictions_per_seq: 20,
            random_next_prob: 0.5,
            whole_word_mask: false,
            seed: 12345,
        }
    }
}

impl ExampleGenConfig {
    /// Settings for the long-sequence phase (512 tokens, 77 predictions).
    pub fn phase_512(seed: u64) -> Self {
        ExampleGenConfig {
            max_seq_length: 512,
            max_predictions_per_seq: 77,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.max_seq_length < 16 {
            errors.push(format!("max_seq_length must be at least 16, got {}", self.max_seq_length));
        }
        if !(self.masked_lm_prob > 0.0 && self.masked_lm_prob < 1.0) {
            errors.push(format!("masked_lm_prob must lie in (0, 1), got {}", self.masked_lm_prob));
        }
        if self.max_predictions_per_seq < 1 {
            errors.push("max_predictions_per_seq must be at least 1".to_string());
        }
        if self.dupe_factor < 1 {
            errors.push("dupe_factor must be at least 1".to_string());
        }
        for (name, p) in [("short_seq_prob", self.short_seq_prob), ("random_next_prob", self.random_next_prob)] {
            if !(0.0..=1.0).contains(&p) {
                errors.push(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        errors
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PretrainInstance {
    pub input_ids: Vec<u32>,
    pub input_mask: Vec<u8>,
    pub segment_ids: Vec<u8>,
    pub masked_lm_positions: Vec<u32>,
    pub masked_lm_ids: Vec<u32>,
    /// 0 = B actually follows A, 1 = B is from another document.
    pub next_sentence_label: u8,
}

/// A document as wordpiece ids, one vector per sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDocument {
    pub doc_id: u64,
    pub sentences: Vec<Vec<u32>>,
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("need at least two non-empty documents, found {0}")]
    TooFewDocuments(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GenerationStats {
    pub documents: u64,
    pub empty_documents_skipped: u64,
    pub instances: u64,
    pub random_next: u64,
    pub masked_positions: u64,
}

/// Number of positions to mask for `n` non-special tokens.
pub fn masked_count(n: usize, masked_lm_prob: f64, max_predictions: usize) -> usize {
    let raw = (masked_lm_prob * n as f64).round() as usize;
    raw.clamp(1, max_predictions.max(1))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed for one (document, duplication round) stream.
pub fn stream_seed(seed: u64, doc_id: u64, round: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ doc_id) ^ round.wrapping_add(0x5851_F42D_4C95_7F2D))
}

fn truncate_pair(a: &mut Vec<u32>, b: &mut Vec<u32>, max_tokens: usize, rng: &mut ChaCha8Rng) {
    while a.len() + b.len() > max_tokens {
        let longer = if a.len() > b.len() { &mut *a } else { &mut *b };
        if rng.random::<f64>() < 0.5 {
            longer.remove(0);
        } else {
            longer.pop();
        }
    }
}

struct Generator<'a> {
    docs: &'a [TokenizedDocument],
    vocab: &'a SubwordVocab,
    cfg: &'a ExampleGenConfig,
    continuation: Vec<bool>,
}

impl Generator<'_> {
    fn random_token(&self, rng: &mut ChaCha8Rng) -> u32 {
        let specials = self.vocab.specials();
        loop {
            let id = rng.random_range(0..self.vocab.len() as u32);
            if !specials.contains(id) {
                return id;
            }
        }
    }

    fn mask(&self, tokens: &mut [u32], rng: &mut ChaCha8Rng) -> (Vec<u32>, Vec<u32>) {
        let specials = self.vocab.specials();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, &t) in tokens.iter().enumerate() {
            if t == specials.cls || t == specials.sep {
                continue;
            }
            let continues = self.cfg.whole_word_mask
                && self.continuation.get(t as usize).copied().unwrap_or(false)
                && groups.last().is_some_and(|g| *g.last().unwrap() + 1 == i);
            match groups.last_mut() {
                Some(g) if continues => g.push(i),
                _ => groups.push(vec![i]),
            }
        }
        let candidates: usize = groups.iter().map(Vec::len).sum();
        let wanted = masked_count(candidates, self.cfg.masked_lm_prob, self.cfg.max_predictions_per_seq);
        groups.shuffle(rng);

        let mut picked: Vec<(u32, u32)> = Vec::with_capacity(wanted);
        for group in groups {
            if picked.len() >= wanted {
                break;
            }
            if picked.len() + group.len() > wanted {
                continue;
            }
            for idx in group {
                let original = tokens[idx];
                let replacement = if rng.random::<f64>() < 0.8 {
                    specials.mask
                } else if rng.random::<f64>() < 0.5 {
                    original
                } else {
                    self.random_token(rng)
                };
                tokens[idx] = replacement;
                picked.push((idx as u32, original));
            }
        }
        picked.sort_unstable();
        picked.into_iter().unzip()
    }

    fn instance(&self, a: &[u32], b: &[u32], is_random: bool, rng: &mut ChaCha8Rng) -> PretrainInstance {
        let specials = self.vocab.specials();
        let len = self.cfg.max_seq_length;
        let mut tokens = Vec::with_capacity(len);
        let mut segment_ids = Vec::with_capacity(len);
        tokens.push(specials.cls);
        tokens.extend_from_slice(a);
        tokens.push(specials.sep);
        segment_ids.resize(tokens.len(), 0);
        tokens.extend_from_slice(b);
        tokens.push(specials.sep);
        segment_ids.resize(tokens.len(), 1);

        let (masked_lm_positions, masked_lm_ids) = self.mask(&mut tokens, rng);
        let used = tokens.len();
        let mut input_mask = vec![1u8; used];
        tokens.resize(len, specials.pad);
        input_mask.resize(len, 0);
        segment_ids.resize(len, 0);
        PretrainInstance {
            input_ids: tokens,
            input_mask,
            segment_ids,
            masked_lm_positions,
            masked_lm_ids,
            next_sentence_label: u8::from(is_random),
        }
    }

    fn document(&self, index: usize, round: u64) -> Vec<PretrainInstance> {
        let doc = &self.docs[index];
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(self.cfg.seed, doc.doc_id, round));
        let max_tokens = self.cfg.max_seq_length - 3;
        let mut target = max_tokens;
        if rng.random::<f64>() < self.cfg.short_seq_prob {
            target = rng.random_range(2..=max_tokens);
        }

        let sentences = &doc.sentences;
        let mut out = Vec::new();
        let mut chunk: Vec<&[u32]> = Vec::new();
        let mut chunk_len = 0;
        let mut i = 0;
        while i < sentences.len() {
            chunk.push(&sentences[i]);
            chunk_len += sentences[i].len();
            if i + 1 == sentences.len() || chunk_len >= target {
                let a_end = if chunk.len() >= 2 { rng.random_range(1..chunk.len()) } else { 1 };
                let mut a: Vec<u32> = chunk[..a_end].concat();
                let target_b = target.saturating_sub(a.len()).max(1);
                let coin_random = rng.random::<f64>() < self.cfg.random_next_prob;
                let mut b: Vec<u32> = Vec::new();
                let is_random;
                if chunk.len() == 1 && !coin_random && i + 1 < sentences.len() {
                    // a lone sentence still has a true continuation in the document
                    is_random = false;
                    let mut j = i + 1;
                    while j < sentences.len() {
                        b.extend_from_slice(&sentences[j]);
                        if b.len() >= target_b {
                            break;
                        }
                        j += 1;
                    }
                    i = j.min(sentences.len() - 1);
                } else if chunk.len() == 1 && !coin_random && i > 0 {
                    // last sentence of the document: pair it with its predecessor
                    is_random = false;
                    b = a;
                    a = Vec::new();
                    let budget = target.saturating_sub(b.len()).max(1);
                    let mut j = i;
                    while j > 0 && a.len() < budget {
                        j -= 1;
                        let mut prev = sentences[j].clone();
                        prev.extend_from_slice(&a);
                        a = prev;
                    }
                } else if chunk.len() == 1 || coin_random {
                    is_random = true;
                    let mut other = rng.random_range(0..self.docs.len() - 1);
                    if other >= index {
                        other += 1;
                    }
                    let other = &self.docs[other].sentences;
                    let start = rng.random_range(0..other.len());
                    for s in &other[start..] {
                        b.extend_from_slice(s);
                        if b.len() >= target_b {
                            break;
                        }
                    }
                    i -= chunk.len() - a_end;
                } else {
                    is_random = false;
                    b = chunk[a_end..].concat();
                }
                truncate_pair(&mut a, &mut b, max_tokens, &mut rng);
                debug_assert!(!a.is_empty() && !b.is_empty());
                out.push(self.instance(&a, &b, is_random, &mut rng));
                chunk.clear();
                chunk_len = 0;
            }
            i += 1;
        }
        out
    }
}

/// Generates all instances for `dupe_factor` rounds, then shuffles them with
/// a stream derived from the seed.
pub fn build_instances(
    docs: &[TokenizedDocument],
    vocab: &SubwordVocab,
    cfg: &ExampleGenConfig,
) -> Result<(Vec<PretrainInstance>, GenerationStats), GenerationError> {
    if let Some(problem) = cfg.validate().into_iter().next() {
        return Err(GenerationError::Config(problem));
    }
    let non_empty: Vec<TokenizedDocument> = docs
        .iter()
        .map(|d| TokenizedDocument {
            doc_id: d.doc_id,
            sentences: d.sentences.iter().filter(|s| !s.is_empty()).cloned().collect(),
        })
        .filter(|d| !d.sentences.is_empty())
        .collect();
    if non_empty.len() < 2 {
        return Err(GenerationError::TooFewDocuments(non_empty.len()));
    }
    let generator = Generator {
        docs: &non_empty,
        vocab,
        cfg,
        continuation: vocab.tokens().iter().map(|t| t.starts_with(CONTINUATION_PREFIX)).collect(),
    };

    let mut instances = Vec::new();
    for round in 0..cfg.dupe_factor as u64 {
        let per_doc: Vec<Vec<PretrainInstance>> = (0..non_empty.len())
            .into_par_iter()
            .map(|i| generator.document(i, round))
            .collect();
        instances.extend(per_doc.into_iter().flatten());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, u64::MAX, u64::MAX));
    instances.shuffle(&mut rng);

    let stats = GenerationStats {
        documents: non_empty.len() as u64,
        empty_documents_skipped: (docs.len() - non_empty.len()) as u64,
        instances: instances.len() as u64,
        random_next: instances.iter().filter(|x| x.next_sentence_label == 1).count() as u64,
        masked_positions: instances.iter().map(|x| x.masked_lm_positions.len() as u64).sum(),
    };
    Ok((instances, stats))
}
