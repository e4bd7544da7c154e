//! Basic tokenization, sentence sampling, BPE vocabulary induction and
//! WordPiece tokenization.

mod basic;
mod bpe;
mod sample;
mod vocab;
mod wordpiece;

pub use basic::{basic_tokenize, BasicTokenConfig};
pub use bpe::{
    apply_merge, count_words, initial_symbols, initial_vocab, merged_symbol, replay_merges, surviving_chars,
    train_bpe, BpeConfig, BpeModel, Merge,
};
pub use sample::{sample_sentences, SampleStats, SentenceSampler};
pub use vocab::{
    SpecialIds, SubwordVocab, VocabError, CLS, CONTINUATION_PREFIX, MASK, PAD, SEP, SPECIAL_TOKENS, UNK,
};
pub use wordpiece::{wordpiece_tokenize, FullTokenizer, DEFAULT_MAX_CHARS};
