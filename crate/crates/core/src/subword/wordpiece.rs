use super::basic::{basic_tokenize, BasicTokenConfig};
use super::vocab::{SubwordVocab, CONTINUATION_PREFIX};

pub const DEFAULT_MAX_CHARS: usize = 100;

/// Greedy longest-match-first WordPiece over one basic token. Any position
/// without a vocabulary match, or a token longer than `max_chars`
/// characters, yields the single `[UNK]` id.
pub fn wordpiece_tokenize(token: &str, vocab: &SubwordVocab, max_chars: usize) -> Vec<u32> {
    let unk = vec![vocab.specials().unk];
    let bounds: Vec<usize> = token.char_indices().map(|(i, _)| i).chain([token.len()]).collect();
    let n = bounds.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    if n > max_chars {
        return unk;
    }
    let mut ids = Vec::new();
    let mut candidate = String::with_capacity(token.len() + 2);
    let mut start = 0;
    while start < n {
        let mut found = None;
        let mut end = n;
        while end > start {
            candidate.clear();
            if start > 0 {
                candidate.push_str(CONTINUATION_PREFIX);
            }
            candidate.push_str(&token[bounds[start]..bounds[end]]);
            if let Some(id) = vocab.id(&candidate) {
                found = Some(id);
                break;
            }
            end -= 1;
        }
        match found {
            Some(id) => ids.push(id),
            None => return unk,
        }
        start = end;
    }
    ids
}

/// Basic tokenization followed by WordPiece.
#[derive(Debug, Clone)]
pub struct FullTokenizer {
    pub vocab: SubwordVocab,
    pub basic: BasicTokenConfig,
    pub max_chars: usize,
}

impl FullTokenizer {
    pub fn new(vocab: SubwordVocab, basic: BasicTokenConfig) -> Self {
        FullTokenizer {
            vocab,
            basic,
            max_chars: DEFAULT_MAX_CHARS,
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        basic_tokenize(text, &self.basic)
            .iter()
            .flat_map(|t| wordpiece_tokenize(t, &self.vocab, self.max_chars))
            .collect()
    }
}
