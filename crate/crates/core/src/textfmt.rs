//! Line-oriented interchange formats shared by every stage.
//!
//! Both formats are UTF-8 text. Each document starts with a header line
//! `# doc_id=<n> title=<escaped-title>`, followed by its body lines, and
//! documents are separated by exactly one blank line.
//!
//! * **docs format**: one paragraph per body line.
//! * **sentences format**: one sentence per body line, tokens separated by a
//!   single space.
//!
//! A body line can never be empty, so the header position is unambiguous even
//! when a paragraph happens to start with `#`.

use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: expected a `# doc_id=<n> title=<t>` header, found {found:?}")]
    BadHeader { line: usize, found: String },
    #[error("line {line}: document {doc_id} has no body lines")]
    EmptyDocument { line: usize, doc_id: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Header of one document in either text format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocHeader {
    pub doc_id: u64,
    pub title: String,
}

impl DocHeader {
    pub fn to_line(&self) -> String {
        format!("# doc_id={} title={}", self.doc_id, escape_title(&self.title))
    }

    pub fn parse(line: &str) -> Option<DocHeader> {
        let rest = line.strip_prefix("# doc_id=")?;
        let (id, title) = rest.split_once(" title=")?;
        let doc_id = id.parse().ok()?;
        Some(DocHeader {
            doc_id,
            title: unescape_title(title),
        })
    }
}

/// Escapes `\`, tab and newline so a title fits on the header line.
pub fn escape_title(title: &str) -> String {
    let mut out = String::with_capacity(title.len());
    for c in title.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_title(escaped: &str) -> String {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// One document block: its header and non-empty body lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: DocHeader,
    pub lines: Vec<String>,
}

/// Writes blocks in either format, inserting the blank separator lines.
pub struct BlockWriter<W: Write> {
    out: W,
    written: u64,
}

impl<W: Write> BlockWriter<W> {
    pub fn new(out: W) -> Self {
        BlockWriter { out, written: 0 }
    }

    pub fn write_block<S: AsRef<str>>(&mut self, header: &DocHeader, lines: &[S]) -> io::Result<()> {
        if self.written > 0 {
            self.out.write_all(b"\n")?;
        }
        self.out.write_all(header.to_line().as_bytes())?;
        self.out.write_all(b"\n")?;
        for line in lines {
            self.out.write_all(line.as_ref().as_bytes())?;
            self.out.write_all(b"\n")?;
        }
        self.written += 1;
        Ok(())
    }

    pub fn blocks_written(&self) -> u64 {
        self.written
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Streaming reader over document blocks.
pub struct BlockReader<R: BufRead> {
    input: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> BlockReader<R> {
    pub fn new(input: R) -> Self {
        BlockReader {
            input,
            line_no: 0,
            buf: String::new(),
        }
    }

    fn next_line(&mut self) -> io::Result<Option<String>> {
        self.buf.clear();
        if self.input.read_line(&mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        let line = self.buf.strip_suffix('\n').unwrap_or(&self.buf);
        let line = line.strip_suffix('\r').unwrap_or(line);
        Ok(Some(line.to_string()))
    }

    fn read_block(&mut self) -> Result<Option<Block>, FormatError> {
        // skip separators (tolerates extra blank lines)
        let header_line = loop {
            match self.next_line()? {
                None => return Ok(None),
                Some(l) if l.trim().is_empty() => continue,
                Some(l) => break l,
            }
        };
        let header = DocHeader::parse(&header_line).ok_or_else(|| FormatError::BadHeader {
            line: self.line_no,
            found: header_line.clone(),
        })?;
        let header_line_no = self.line_no;
        let mut lines = Vec::new();
        while let Some(l) = self.next_line()? {
            if l.is_empty() {
                break;
            }
            lines.push(l);
        }
        if lines.is_empty() {
            return Err(FormatError::EmptyDocument {
                line: header_line_no,
                doc_id: header.doc_id,
            });
        }
        Ok(Some(Block { header, lines }))
    }
}

impl<R: BufRead> Iterator for BlockReader<R> {
    type Item = Result<Block, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_block().transpose()
    }
}
