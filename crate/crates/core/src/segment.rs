//! Rule-based sentence splitting and word tokenization.
//!
//! The default [`RuleSegmenter`] is deterministic and language-light: the
//! only per-language resource is an abbreviation list. Corpora segmented by
//! an external tool can enter the pipeline directly in the sentences text
//! format (see [`read_segmented`]).

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::chars::{is_cjk, is_unicode_punctuation};
use crate::extract::Document;
use crate::textfmt::{BlockReader, BlockWriter, DocHeader, FormatError};

const TERMINALS: &[char] = &['.', '!', '?', '…', '。', '！', '？'];
const CLOSERS: &[char] = &[')', ']', '}', '"', '\'', '”', '’', '»', '›', '」', '』'];
const OPENING_QUOTES: &[char] = &['"', '\'', '“', '„', '‘', '‚', '«', '‹', '「', '『'];
const OPENERS: &[char] = &['(', '[', '{', '"', '\'', '“', '„', '‘', '‚', '«', '‹', '「', '『'];

/// Words after which a period never ends a sentence (e.g. `Dr.`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Abbreviations(HashSet<String>);

impl Abbreviations {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(items: I) -> Self {
        Abbreviations(items.into_iter().map(Into::into).collect())
    }

    /// One abbreviation per line; blank lines and `#` comments are ignored.
    pub fn from_reader<R: BufRead>(input: R) -> io::Result<Self> {
        let mut set = HashSet::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if !line.is_empty() && !line.starts_with('#') {
                set.insert(line.to_string());
            }
        }
        Ok(Abbreviations(set))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word) || self.0.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn is_single_letter(s: &str) -> bool {
    let mut chars = s.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_alphabetic())
}

fn boundary_after(chunk: &str, next: &str, next_is_last: bool, abbreviations: &Abbreviations) -> bool {
    let core = chunk.trim_end_matches(CLOSERS);
    if !core.ends_with(TERMINALS) {
        return false;
    }
    let Some(first) = next.chars().next() else {
        return false;
    };
    if !(first.is_uppercase() || first.is_ascii_digit() || OPENING_QUOTES.contains(&first)) {
        return false;
    }
    let word = core.trim_start_matches(OPENERS);
    if abbreviations.contains(word) {
        return false;
    }
    if let Some(letter) = word.strip_suffix('.') {
        if is_single_letter(letter) {
            // An initial. It only closes a sentence when what follows is a
            // lone letter too and that letter is not itself an initial
            // continuing a name ("A. B." splits, "J. R. Tolkien" does not).
            let next_core = next.trim_end_matches(CLOSERS).trim_end_matches(TERMINALS);
            let next_has_period = next.trim_end_matches(CLOSERS).ends_with(TERMINALS);
            return is_single_letter(next_core) && (next_is_last || !next_has_period);
        }
    }
    true
}

/// Splits a paragraph into sentences. Whitespace inside each sentence is
/// normalised to single spaces.
pub fn split_sentences(paragraph: &str, abbreviations: &Abbreviations) -> Vec<String> {
    let chunks: Vec<&str> = paragraph.split_whitespace().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    for i in 0..chunks.len() {
        let is_last = i + 1 == chunks.len();
        if is_last || boundary_after(chunks[i], chunks[i + 1], i + 2 == chunks.len(), abbreviations) {
            sentences.push(chunks[start..=i].join(" "));
            start = i + 1;
        }
    }
    sentences
}

fn is_ordinal_or_abbrev(word: &str) -> bool {
    let Some(body) = word.strip_suffix('.') else {
        return false;
    };
    if !body.is_empty() && body.chars().all(|c| c.is_ascii_digit()) {
        return true;
    }
    // dotted abbreviations such as "e.g." or "U.S."
    body.contains('.')
        && body.split('.').all(|part| !part.is_empty() && part.chars().all(char::is_alphabetic))
}

fn tokenize_chunk(chunk: &str, is_last_chunk: bool, out: &mut Vec<String>) {
    let mut rest = chunk;
    while let Some(c) = rest.chars().next().filter(|&c| is_unicode_punctuation(c)) {
        out.push(c.to_string());
        rest = &rest[c.len_utf8()..];
    }
    if rest.is_empty() {
        return;
    }
    let mut trailing = Vec::new();
    if is_last_chunk || !is_ordinal_or_abbrev(rest) {
        while let Some(c) = rest.chars().next_back().filter(|&c| is_unicode_punctuation(c)) {
            trailing.push(c.to_string());
            rest = &rest[..rest.len() - c.len_utf8()];
        }
    }
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out.extend(trailing.into_iter().rev());
}

/// Splits a sentence into tokens: whitespace separates, leading and trailing
/// punctuation is peeled off, CJK ideographs become single-character tokens.
pub fn tokenize_sentence(sentence: &str) -> Vec<String> {
    let chunks: Vec<&str> = sentence.split_whitespace().collect();
    let mut out = Vec::new();
    for (i, chunk) in chunks.iter().enumerate() {
        let is_last = i + 1 == chunks.len();
        if !chunk.chars().any(is_cjk) {
            tokenize_chunk(chunk, is_last, &mut out);
            continue;
        }
        let mut run_start = 0;
        for (pos, c) in chunk.char_indices() {
            if is_cjk(c) {
                if run_start < pos {
                    tokenize_chunk(&chunk[run_start..pos], false, &mut out);
                }
                out.push(c.to_string());
                run_start = pos + c.len_utf8();
            }
        }
        if run_start < chunk.len() {
            tokenize_chunk(&chunk[run_start..], is_last, &mut out);
        }
    }
    out
}

/// Sentence and token segmentation of a paragraph.
pub trait Segmenter: Sync {
    fn segment_paragraph(&self, paragraph: &str) -> Vec<Vec<String>>;
}

#[derive(Debug, Clone, Default)]
pub struct RuleSegmenter {
    pub abbreviations: Abbreviations,
}

impl Segmenter for RuleSegmenter {
    fn segment_paragraph(&self, paragraph: &str) -> Vec<Vec<String>> {
        split_sentences(paragraph, &self.abbreviations)
            .iter()
            .map(|s| tokenize_sentence(s))
            .filter(|t| !t.is_empty())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub max_sentence_tokens: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig { max_sentence_tokens: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedDocument {
    pub doc_id: u64,
    pub title: String,
    pub sentences: Vec<Vec<String>>,
}

impl SegmentedDocument {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }
}

/// Segments every paragraph; sentences longer than the configured maximum
/// are dropped. Returns the document and the number of dropped sentences.
pub fn segment_document<S: Segmenter + ?Sized>(
    doc: &Document,
    segmenter: &S,
    cfg: &SegmentConfig,
) -> (SegmentedDocument, u64) {
    let mut dropped = 0;
    let mut sentences = Vec::new();
    for paragraph in &doc.paragraphs {
        for sentence in segmenter.segment_paragraph(paragraph) {
            if sentence.len() > cfg.max_sentence_tokens {
                dropped += 1;
            } else {
                sentences.push(sentence);
            }
        }
    }
    let seg = SegmentedDocument {
        doc_id: doc.doc_id,
        title: doc.title.clone(),
        sentences,
    };
    (seg, dropped)
}

pub fn write_segmented<W: Write>(writer: &mut BlockWriter<W>, doc: &SegmentedDocument) -> io::Result<()> {
    let header = DocHeader {
        doc_id: doc.doc_id,
        title: doc.title.clone(),
    };
    let lines: Vec<String> = doc.sentences.iter().map(|s| s.join(" ")).collect();
    writer.write_block(&header, &lines)
}

/// Reads the sentences text format (ours or an external segmenter's).
pub fn read_segmented<R: BufRead>(input: R) -> impl Iterator<Item = Result<SegmentedDocument, FormatError>> {
    BlockReader::new(input).map(|block| {
        block.map(|b| SegmentedDocument {
            doc_id: b.header.doc_id,
            title: b.header.title,
            sentences: b
                .lines
                .iter()
                .map(|l| l.split_whitespace().map(str::to_string).collect())
                .collect(),
        })
    })
}
