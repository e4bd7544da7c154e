use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";
/// Specials in id order; a trained vocabulary places them at ids 0..=4.
pub const SPECIAL_TOKENS: [&str; 5] = [PAD, UNK, CLS, SEP, MASK];
pub const CONTINUATION_PREFIX: &str = "##";

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("line {line}: duplicate token {token:?}")]
    Duplicate { line: usize, token: String },
    #[error("line {line}: empty or whitespace-bearing token")]
    BadToken { line: usize },
    #[error("vocabulary lacks special token {0}")]
    MissingSpecial(&'static str),
    #[error("merges line {line}: expected rank<TAB>left<TAB>right")]
    BadMerge { line: usize },
    #[error("vocab_size {requested} is below the {minimum} specials and characters")]
    TooSmall { requested: usize, minimum: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub pad: u32,
    pub unk: u32,
    pub cls: u32,
    pub sep: u32,
    pub mask: u32,
}

impl SpecialIds {
    pub fn contains(&self, id: u32) -> bool {
        [self.pad, self.unk, self.cls, self.sep, self.mask].contains(&id)
    }
}

/// Ordered subword vocabulary (index = id) with its merge list.
#[derive(Debug, Clone)]
pub struct SubwordVocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    specials: SpecialIds,
    merges: Vec<(String, String)>,
}

impl PartialEq for SubwordVocab {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens && self.merges == other.merges
    }
}

impl SubwordVocab {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.contains(char::is_whitespace) {
                return Err(VocabError::BadToken { line: i + 1 });
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(VocabError::Duplicate {
                    line: i + 1,
                    token: t.clone(),
                });
            }
        }
        let get = |name: &'static str| index.get(name).copied().ok_or(VocabError::MissingSpecial(name));
        let specials = SpecialIds {
            pad: get(PAD)?,
            unk: get(UNK)?,
            cls: get(CLS)?,
            sep: get(SEP)?,
            mask: get(MASK)?,
        };
        Ok(SubwordVocab {
            tokens,
            index,
            specials,
            merges: Vec::new(),
        })
    }

    pub fn with_merges(mut self, merges: Vec<(String, String)>) -> Self {
        self.merges = merges;
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn specials(&self) -> SpecialIds {
        self.specials
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// One token per line; line number = id.
    pub fn write_wordpiece<W: Write>(&self, mut out: W) -> io::Result<()> {
        for t in &self.tokens {
            writeln!(out, "{t}")?;
        }
        Ok(())
    }

    pub fn read_wordpiece<R: BufRead>(input: R) -> Result<Self, VocabError> {
        let tokens = input.lines().collect::<Result<Vec<_>, _>>()?;
        let tokens = tokens
            .into_iter()
            .map(|t| t.strip_suffix('\r').map(str::to_string).unwrap_or(t))
            .collect();
        Self::from_tokens(tokens)
    }

    /// `rank<TAB>left<TAB>right`, ranks from 0.
    pub fn write_merges<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (rank, (l, r)) in self.merges.iter().enumerate() {
            writeln!(out, "{rank}\t{l}\t{r}")?;
        }
        Ok(())
    }

    pub fn read_merges<R: BufRead>(input: R) -> Result<Vec<(String, String)>, VocabError> {
        let mut merges = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let mut fields = line.split('\t');
            let (Some(rank), Some(l), Some(r), None) = (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(VocabError::BadMerge { line: i + 1 });
            };
            if rank.parse::<usize>().ok() != Some(i) {
                return Err(VocabError::BadMerge { line: i + 1 });
            }
            merges.push((l.to_string(), r.to_string()));
        }
        Ok(merges)
    }

    /// SHA-256 of the WordPiece file contents.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}
