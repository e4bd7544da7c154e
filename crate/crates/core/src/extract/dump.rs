//! Streaming reader for MediaWiki XML exports.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use quick_xml::events::Event;
use quick_xml::Reader;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("malformed XML at byte {offset} inside <{element}>: {message}")]
    Malformed {
        offset: u64,
        element: String,
        message: String,
    },
    #[error("dump truncated at byte {offset}: <{element}> was never closed")]
    Truncated { offset: u64, element: String },
    #[error("page at byte {offset}: {message}")]
    BadPage { offset: u64, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One page of the dump, before markup stripping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPage {
    pub page_id: u64,
    pub title: String,
    pub namespace: i64,
    pub wikitext: String,
    pub is_redirect: bool,
}

/// Opens a dump file, transparently decompressing bzip2 or gzip input
/// (detected from the magic bytes, not the file name).
pub fn open_dump(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let mut file = BufReader::new(File::open(path)?);
    let magic = file.fill_buf()?;
    let reader: Box<dyn BufRead + Send> = if magic.starts_with(b"BZh") {
        Box::new(BufReader::new(bzip2::read::MultiBzDecoder::new(file)))
    } else if magic.starts_with(&[0x1f, 0x8b]) {
        Box::new(BufReader::new(flate2::read::MultiGzDecoder::new(file)))
    } else {
        Box::new(file)
    };
    Ok(reader)
}

#[derive(Default)]
struct PageBuilder {
    id: Option<u64>,
    title: String,
    ns: Option<i64>,
    text: String,
    redirect: bool,
}

/// Iterator over the pages of a dump, in dump order.
///
/// Pages outside `allow_namespaces` are skipped without being materialised
/// beyond their text buffer.
pub struct DumpReader<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    stack: Vec<String>,
    allow_namespaces: BTreeSet<i64>,
    page: Option<PageBuilder>,
    skipped: u64,
    seen_ids: BTreeSet<u64>,
    done: bool,
}

impl<R: BufRead> DumpReader<R> {
    pub fn new(input: R, allow_namespaces: BTreeSet<i64>) -> Self {
        let mut reader = Reader::from_reader(input);
        reader.config_mut().trim_text(false);
        DumpReader {
            reader,
            buf: Vec::with_capacity(64 * 1024),
            stack: Vec::new(),
            allow_namespaces,
            page: None,
            skipped: 0,
            seen_ids: BTreeSet::new(),
            done: false,
        }
    }

    /// Pages dropped so far by the namespace filter.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    fn offset(&self) -> u64 {
        self.reader.buffer_position()
    }

    fn malformed(&self, message: impl Into<String>) -> DumpError {
        DumpError::Malformed {
            offset: self.offset(),
            element: self.stack.last().cloned().unwrap_or_else(|| "document".into()),
            message: message.into(),
        }
    }

    /// Element path relative to the enclosing `<page>`, if any.
    fn in_page_path(&self) -> Option<&[String]> {
        let pos = self.stack.iter().rposition(|e| e == "page")?;
        Some(&self.stack[pos + 1..])
    }

    fn on_text(&mut self, text: &str) {
        let Some(path) = self.in_page_path() else { return };
        let field = match path {
            [f] if f == "title" => 0,
            [f] if f == "ns" => 1,
            [f] if f == "id" => 2,
            [r, t] if r == "revision" && t == "text" => 3,
            _ => return,
        };
        let Some(page) = self.page.as_mut() else { return };
        match field {
            0 => page.title.push_str(text),
            3 => page.text.push_str(text),
            _ => {
                let trimmed = text.trim();
                if trimmed.is_empty() {
                    return;
                }
                if field == 1 {
                    page.ns = trimmed.parse().ok().or(page.ns);
                } else if page.id.is_none() {
                    page.id = trimmed.parse().ok();
                }
            }
        }
    }

    fn finish_page(&mut self) -> Result<Option<RawPage>, DumpError> {
        let Some(page) = self.page.take() else {
            return Ok(None);
        };
        let page_id = page.id.ok_or_else(|| DumpError::BadPage {
            offset: self.offset(),
            message: format!("page {:?} has no <id>", page.title),
        })?;
        let namespace = page.ns.unwrap_or(0);
        if !self.allow_namespaces.contains(&namespace) {
            self.skipped += 1;
            return Ok(None);
        }
        if !self.seen_ids.insert(page_id) {
            return Err(DumpError::BadPage {
                offset: self.offset(),
                message: format!("duplicate page id {page_id}"),
            });
        }
        Ok(Some(RawPage {
            page_id,
            title: page.title,
            namespace,
            wikitext: page.text,
            is_redirect: page.redirect,
        }))
    }

    fn next_page(&mut self) -> Result<Option<RawPage>, DumpError> {
        loop {
            self.buf.clear();
            let event = match self.reader.read_event_into(&mut self.buf) {
                Ok(e) => e.into_owned(),
                Err(e) => return Err(self.malformed(e.to_string())),
            };
            match event {
                Event::Start(e) => {
                    let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                    if name == "page" {
                        self.page = Some(PageBuilder::default());
                    }
                    self.stack.push(name);
                }
                Event::Empty(e) => {
                    if e.local_name().as_ref() == b"redirect" && self.in_page_path().is_some() {
                        if let Some(p) = self.page.as_mut() {
                            p.redirect = true;
                        }
                    }
                }
                Event::End(e) => {
                    let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                    match self.stack.pop() {
                        Some(open) if open == name => {}
                        Some(open) => {
                            self.stack.push(open);
                            return Err(self.malformed(format!("unexpected </{name}>")));
                        }
                        None => return Err(self.malformed(format!("unexpected </{name}>"))),
                    }
                    if name == "page" {
                        if let Some(page) = self.finish_page()? {
                            return Ok(Some(page));
                        }
                    }
                }
                Event::Text(t) => {
                    if self.page.is_some() {
                        let text = t
                            .unescape()
                            .map_err(|e| self.malformed(e.to_string()))?
                            .into_owned();
                        self.on_text(&text);
                    }
                }
                Event::CData(t) => {
                    let text = String::from_utf8_lossy(&t).into_owned();
                    self.on_text(&text);
                }
                Event::Eof => {
                    if let Some(open) = self.stack.last() {
                        return Err(DumpError::Truncated {
                            offset: self.offset(),
                            element: open.clone(),
                        });
                    }
                    return Ok(None);
                }
                _ => {}
            }
        }
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<RawPage, DumpError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.next_page().transpose();
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

/// Parses a dump byte stream into pages, keeping only `allow_namespaces`.
pub fn parse_dump<R: Read>(dump: R, allow_namespaces: BTreeSet<i64>) -> DumpReader<BufReader<R>> {
    DumpReader::new(BufReader::new(dump), allow_namespaces)
}
