//! Dump extraction: XML pages in, plain-text documents out.

mod dump;
mod markup;

use std::collections::{BTreeSet, VecDeque};
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::textfmt::{BlockReader, BlockWriter, DocHeader, FormatError};

pub use dump::{open_dump, parse_dump, DumpError, DumpReader, RawPage};
pub use markup::{
    remove_comments, remove_content_tags, remove_nested, remove_tags, replace_external_links,
    replace_links, strip_wikitext, StripOptions, LEAK_MARKERS,
};

/// Extracted plain-text document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: u64,
    /// Page id in the source dump; unknown when read back from a docs file.
    pub source_page_id: Option<u64>,
    pub title: String,
    pub paragraphs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub namespaces: Vec<i64>,
    #[serde(flatten)]
    pub strip: StripOptions,
    /// Pages stripped concurrently per batch.
    pub batch_size: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            namespaces: vec![0],
            strip: StripOptions::default(),
            batch_size: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ExtractStats {
    pub pages_read: u64,
    pub skipped_namespace: u64,
    pub redirects: u64,
    pub empty_after_strip: u64,
    pub documents: u64,
}

/// Strips one page. Redirects and pages with no surviving paragraph yield
/// `None`. The returned document has `doc_id` 0; ids are assigned by
/// [`Extractor`].
pub fn strip_markup(page: &RawPage, opts: &StripOptions) -> Option<Document> {
    if page.is_redirect {
        return None;
    }
    let paragraphs = strip_wikitext(&page.wikitext, opts);
    if paragraphs.is_empty() {
        return None;
    }
    Some(Document {
        doc_id: 0,
        source_page_id: Some(page.page_id),
        title: page.title.clone(),
        paragraphs,
    })
}

/// Streaming extractor. Pages are read sequentially and stripped in
/// parallel batches; documents come out in dump order with contiguous ids.
pub struct Extractor<R: BufRead> {
    pages: DumpReader<R>,
    cfg: ExtractConfig,
    ready: VecDeque<Document>,
    next_id: u64,
    stats: ExtractStats,
    failed: bool,
}

impl<R: BufRead> Extractor<R> {
    pub fn new(input: R, cfg: ExtractConfig) -> Self {
        let ns: BTreeSet<i64> = cfg.namespaces.iter().copied().collect();
        Extractor {
            pages: DumpReader::new(input, ns),
            cfg,
            ready: VecDeque::new(),
            next_id: 0,
            stats: ExtractStats::default(),
            failed: false,
        }
    }

    pub fn stats(&self) -> ExtractStats {
        ExtractStats {
            skipped_namespace: self.pages.skipped(),
            ..self.stats
        }
    }

    fn refill(&mut self) -> Result<bool, DumpError> {
        let mut batch = Vec::with_capacity(self.cfg.batch_size);
        while batch.len() < self.cfg.batch_size.max(1) {
            match self.pages.next() {
                Some(page) => batch.push(page?),
                None => break,
            }
        }
        if batch.is_empty() {
            return Ok(false);
        }
        self.stats.pages_read += batch.len() as u64;
        let opts = &self.cfg.strip;
        let stripped: Vec<Option<Document>> = batch.par_iter().map(|p| strip_markup(p, opts)).collect();
        for (page, doc) in batch.iter().zip(stripped) {
            match doc {
                Some(mut doc) => {
                    doc.doc_id = self.next_id;
                    self.next_id += 1;
                    self.stats.documents += 1;
                    self.ready.push_back(doc);
                }
                None if page.is_redirect => self.stats.redirects += 1,
                None => self.stats.empty_after_strip += 1,
            }
        }
        Ok(true)
    }
}

impl<R: BufRead> Iterator for Extractor<R> {
    type Item = Result<Document, DumpError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(doc) = self.ready.pop_front() {
                return Some(Ok(doc));
            }
            if self.failed {
                return None;
            }
            match self.refill() {
                Ok(true) => continue,
                Ok(false) => return None,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Runs the extractor over `input` and writes the docs text format to `out`.
pub fn extract_to_writer<R: BufRead, W: Write>(
    input: R,
    cfg: &ExtractConfig,
    out: W,
) -> Result<ExtractStats, ExtractError> {
    let mut extractor = Extractor::new(input, cfg.clone());
    let mut writer = BlockWriter::new(out);
    for doc in extractor.by_ref() {
        write_document(&mut writer, &doc?)?;
    }
    writer.into_inner().flush()?;
    Ok(extractor.stats())
}

pub fn write_document<W: Write>(writer: &mut BlockWriter<W>, doc: &Document) -> io::Result<()> {
    let header = DocHeader {
        doc_id: doc.doc_id,
        title: doc.title.clone(),
    };
    writer.write_block(&header, &doc.paragraphs)
}

/// Reads documents back from the docs text format.
pub fn read_documents<R: BufRead>(input: R) -> impl Iterator<Item = Result<Document, FormatError>> {
    BlockReader::new(input).map(|block| {
        block.map(|b| Document {
            doc_id: b.header.doc_id,
            source_page_id: None,
            title: b.header.title,
            paragraphs: b.lines,
        })
    })
}
