//! Word-internal BPE that produces WordPiece-style symbols directly.
//!
//! A word `newest` starts as `n ##e ##w ##e ##s ##t`: the first character
//! is a plain symbol, every later one carries the continuation prefix.
//! Merging `(x, ##y)` yields `xy`; merging `(##x, ##y)` yields `##xy`, so
//! every learned symbol is already a valid WordPiece entry.
//!
//! The most frequent adjacent pair is merged at every step; equal
//! frequencies go to the lexicographically smallest `(left, right)` pair
//! (code point order). Within a word a merge is applied left to right
//! without overlap.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::vocab::{SubwordVocab, VocabError, CONTINUATION_PREFIX, SPECIAL_TOKENS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BpeConfig {
    pub vocab_size: usize,
    pub min_char_count: u64,
}

impl Default for BpeConfig {
    fn default() -> Self {
        BpeConfig {
            vocab_size: 20_000,
            min_char_count: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Merge {
    pub left: String,
    pub right: String,
    pub frequency: u64,
}

/// Result of training: the vocabulary plus what produced it.
#[derive(Debug, Clone)]
pub struct BpeModel {
    pub vocab: SubwordVocab,
    pub merges: Vec<Merge>,
    /// Final segmentation of every training word type.
    pub segmentation: BTreeMap<String, Vec<String>>,
    /// Word types dropped because they contain a rare character.
    pub dropped_words: u64,
}

/// Joins two adjacent symbols into the merged symbol.
pub fn merged_symbol(left: &str, right: &str) -> String {
    let tail = right.strip_prefix(CONTINUATION_PREFIX).unwrap_or(right);
    let mut s = String::with_capacity(left.len() + tail.len());
    s.push_str(left);
    s.push_str(tail);
    s
}

/// Initial symbols of a word.
pub fn initial_symbols(word: &str) -> Vec<String> {
    word.chars()
        .enumerate()
        .map(|(i, c)| if i == 0 { c.to_string() } else { format!("{CONTINUATION_PREFIX}{c}") })
        .collect()
}

/// Replaces non-overlapping occurrences of `(left, right)`, left to right.
pub fn apply_merge<T: PartialEq + Clone>(symbols: &[T], left: &T, right: &T, merged: &T) -> Vec<T> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == *left && symbols[i + 1] == *right {
            out.push(merged.clone());
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

/// Counts word types of a token stream.
pub fn count_words<I, S>(tokens: I) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_ref().to_string()).or_insert(0) += 1;
    }
    counts
}

/// Characters whose corpus frequency reaches `min_char_count`, sorted.
pub fn surviving_chars(words: &BTreeMap<String, u64>, min_char_count: u64) -> Vec<char> {
    let mut freq: BTreeMap<char, u64> = BTreeMap::new();
    for (w, &n) in words {
        for c in w.chars() {
            *freq.entry(c).or_default() += n;
        }
    }
    freq.into_iter().filter(|&(_, n)| n >= min_char_count).map(|(c, _)| c).collect()
}

/// Specials, then every surviving character, then its continuation form.
pub fn initial_vocab(chars: &[char]) -> Vec<String> {
    let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    tokens.extend(chars.iter().map(|c| c.to_string()));
    tokens.extend(chars.iter().map(|c| format!("{CONTINUATION_PREFIX}{c}")));
    tokens
}

type Pair = (u32, u32);

struct Symbols {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Symbols {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        id
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    count: u64,
    key: Reverse<(String, String)>,
    pair: Pair,
}

fn word_pairs(symbols: &[u32]) -> impl Iterator<Item = Pair> + '_ {
    symbols.windows(2).map(|w| (w[0], w[1]))
}

/// Trains the vocabulary on word-type counts.
pub fn train_bpe(words: &BTreeMap<String, u64>, cfg: &BpeConfig) -> Result<BpeModel, VocabError> {
    let chars = surviving_chars(words, cfg.min_char_count);
    let mut vocab_tokens = initial_vocab(&chars);
    if cfg.vocab_size < vocab_tokens.len() {
        return Err(VocabError::TooSmall {
            requested: cfg.vocab_size,
            minimum: vocab_tokens.len(),
        });
    }
    let alphabet: HashSet<char> = chars.iter().copied().collect();
    let mut in_vocab: HashSet<String> = vocab_tokens.iter().cloned().collect();

    let mut symbols = Symbols {
        names: Vec::new(),
        ids: HashMap::new(),
    };
    let mut word_types: Vec<&str> = Vec::new();
    let mut word_syms: Vec<Vec<u32>> = Vec::new();
    let mut word_counts: Vec<u64> = Vec::new();
    let mut dropped_words = 0;
    for (w, &n) in words {
        if w.is_empty() {
            continue;
        }
        if !w.chars().all(|c| alphabet.contains(&c)) {
            dropped_words += 1;
            continue;
        }
        word_types.push(w);
        word_syms.push(initial_symbols(w).iter().map(|s| symbols.intern(s)).collect());
        word_counts.push(n);
    }

    let mut pair_counts: HashMap<Pair, u64> = HashMap::new();
    let mut where_pair: HashMap<Pair, Vec<usize>> = HashMap::new();
    for (wi, syms) in word_syms.iter().enumerate() {
        for p in word_pairs(syms) {
            *pair_counts.entry(p).or_default() += word_counts[wi];
            let list = where_pair.entry(p).or_default();
            if list.last() != Some(&wi) {
                list.push(wi);
            }
        }
    }
    let candidate = |p: Pair, count: u64, symbols: &Symbols| Candidate {
        count,
        key: Reverse((symbols.names[p.0 as usize].clone(), symbols.names[p.1 as usize].clone())),
        pair: p,
    };
    let mut heap: BinaryHeap<Candidate> = pair_counts
        .iter()
        .map(|(&p, &c)| candidate(p, c, &symbols))
        .collect();

    let mut merges = Vec::new();
    let mut last_visit: Vec<usize> = vec![usize::MAX; word_syms.len()];
    while vocab_tokens.len() < cfg.vocab_size {
        let Some(top) = heap.pop() else { break };
        let current = pair_counts.get(&top.pair).copied().unwrap_or(0);
        if current != top.count {
            continue;
        }
        if current < 2 {
            break;
        }
        let (l, r) = top.pair;
        let (left, right) = (symbols.names[l as usize].clone(), symbols.names[r as usize].clone());
        let new_name = merged_symbol(&left, &right);
        let new_id = symbols.intern(&new_name);
        let step = merges.len();
        merges.push(Merge {
            left,
            right,
            frequency: current,
        });
        if in_vocab.insert(new_name.clone()) {
            vocab_tokens.push(new_name);
        }

        let mut changed: HashSet<Pair> = HashSet::new();
        let affected = where_pair.get(&top.pair).cloned().unwrap_or_default();
        for wi in affected {
            if last_visit[wi] == step {
                continue;
            }
            last_visit[wi] = step;
            let syms = &word_syms[wi];
            if !word_pairs(syms).any(|p| p == top.pair) {
                continue;
            }
            let n = word_counts[wi];
            for p in word_pairs(syms) {
                let c = pair_counts.get_mut(&p).expect("counted pair");
                *c -= n;
                changed.insert(p);
            }
            let merged = apply_merge(syms, &l, &r, &new_id);
            for p in word_pairs(&merged) {
                *pair_counts.entry(p).or_default() += n;
                changed.insert(p);
                let list = where_pair.entry(p).or_default();
                if list.last() != Some(&wi) {
                    list.push(wi);
                }
            }
            word_syms[wi] = merged;
        }
        for p in changed {
            let c = pair_counts[&p];
            if c == 0 {
                pair_counts.remove(&p);
            } else {
                heap.push(candidate(p, c, &symbols));
            }
        }
    }

    let segmentation = word_types
        .iter()
        .zip(&word_syms)
        .map(|(w, syms)| {
            (
                w.to_string(),
                syms.iter().map(|&s| symbols.names[s as usize].clone()).collect(),
            )
        })
        .collect();
    let merge_pairs = merges.iter().map(|m| (m.left.clone(), m.right.clone())).collect();
    let vocab = SubwordVocab::from_tokens(vocab_tokens)?.with_merges(merge_pairs);
    Ok(BpeModel {
        vocab,
        merges,
        segmentation,
        dropped_words,
    })
}

/// Replays merges in rank order over a word.
pub fn replay_merges(word: &str, merges: &[(String, String)]) -> Vec<String> {
    let mut syms = initial_symbols(word);
    for (l, r) in merges {
        if syms.len() < 2 {
            break;
        }
        let merged = merged_symbol(l, r);
        syms = apply_merge(&syms, l, r, &merged);
    }
    syms
}
