//! MediaWiki markup stripping.
//!
//! The stripper is a fixed sequence of linear passes over the wikitext:
//! comments, content-bearing extension tags (`<ref>`, `<math>`, ...),
//! templates, tables, internal links, external links, then a line pass for
//! headings and lists, and finally HTML tags, emphasis quotes and character
//! entities. Unbalanced openers never abort: the text from the opener to the
//! end of its line is dropped and scanning resumes on the next line.

use serde::{Deserialize, Serialize};

/// Markers that must never survive into a paragraph.
pub const LEAK_MARKERS: &[&str] = &["{{", "}}", "[[", "]]", "{|", "|}", "<ref", "</", "'''"];

/// Tags whose whole content is dropped along with the tag.
const CONTENT_TAGS: &[&str] = &[
    "ref",
    "math",
    "gallery",
    "timeline",
    "chem",
    "score",
    "syntaxhighlight",
    "source",
    "imagemap",
    "templatedata",
    "graph",
    "mapframe",
    "hiero",
    "nowiki",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StripOptions {
    /// Keep list items as paragraphs (markers removed). When false, list
    /// lines are dropped.
    pub keep_lists: bool,
    /// Lowercased link namespaces whose links are dropped entirely.
    pub drop_link_prefixes: Vec<String>,
}

impl Default for StripOptions {
    fn default() -> Self {
        StripOptions {
            keep_lists: true,
            drop_link_prefixes: [
                "file", "image", "category", "media", "tiedosto", "kuva", "luokka", "datei", "bild",
                "kategorie", "fichier", "catégorie", "archivo", "categoría",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

fn line_end(text: &str, from: usize) -> usize {
    text[from..].find('\n').map_or(text.len(), |p| from + p)
}

fn starts_with_ci(hay: &[u8], needle: &[u8]) -> bool {
    hay.len() >= needle.len() && hay[..needle.len()].eq_ignore_ascii_case(needle)
}

fn find_ci(hay: &str, from: usize, needle: &str) -> Option<usize> {
    let h = hay.as_bytes();
    let n = needle.as_bytes();
    (from..h.len().saturating_sub(n.len() - 1)).find(|&i| starts_with_ci(&h[i..], n))
}

/// Removes `<!-- ... -->`.
pub fn remove_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    while let Some(rel) = text[pos..].find("<!--") {
        let start = pos + rel;
        out.push_str(&text[pos..start]);
        pos = match text[start + 4..].find("-->") {
            Some(end) => start + 4 + end + 3,
            None => line_end(text, start),
        };
    }
    out.push_str(&text[pos..]);
    out
}

/// Removes content-bearing extension tags such as `<ref>...</ref>` and
/// self-closing `<ref name="x"/>`.
pub fn remove_content_tags(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut copy_from = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let tag = CONTENT_TAGS.iter().find(|t| {
            let rest = &bytes[i + 1..];
            starts_with_ci(rest, t.as_bytes())
                && rest
                    .get(t.len())
                    .is_none_or(|&c| c == b'>' || c == b'/' || c.is_ascii_whitespace())
        });
        let Some(tag) = tag else {
            i += 1;
            continue;
        };
        out.push_str(&text[copy_from..i]);
        let Some(gt) = text[i..].find('>').map(|p| i + p) else {
            copy_from = line_end(text, i);
            i = copy_from;
            continue;
        };
        let end = if bytes[gt - 1] == b'/' {
            gt + 1
        } else {
            let closing = format!("</{tag}");
            match find_ci(text, gt + 1, &closing) {
                Some(c) => text[c..].find('>').map_or(text.len(), |p| c + p + 1),
                None => line_end(text, i),
            }
        };
        copy_from = end;
        i = end;
    }
    out.push_str(&text[copy_from..]);
    out
}

/// Removes outermost balanced `open ... close` spans (nested spans go with
/// their parent). Stray closers are dropped; an unmatched opener drops the
/// rest of its line.
pub fn remove_nested(text: &str, open: &str, close: &str) -> String {
    let bytes = text.as_bytes();
    let (ob, cb) = (open.as_bytes(), close.as_bytes());
    let mut out = String::with_capacity(text.len());
    let mut copy_from = 0;
    let mut i = 0;
    let mut depth = 0usize;
    let mut span_start = 0;
    loop {
        while i < bytes.len() {
            if bytes[i..].starts_with(ob) {
                if depth == 0 {
                    out.push_str(&text[copy_from..i]);
                    span_start = i;
                }
                depth += 1;
                i += ob.len();
            } else if bytes[i..].starts_with(cb) {
                if depth == 0 {
                    out.push_str(&text[copy_from..i]);
                    i += cb.len();
                    copy_from = i;
                } else {
                    depth -= 1;
                    i += cb.len();
                    if depth == 0 {
                        copy_from = i;
                    }
                }
            } else {
                i += 1;
            }
        }
        if depth == 0 {
            break;
        }
        depth = 0;
        i = line_end(text, span_start);
        copy_from = i;
    }
    out.push_str(&text[copy_from..]);
    out
}

/// Finds the `]]` matching the `[[` at `start`, honouring nesting.
fn matching_link_end(text: &str, start: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut i = start;
    while i + 1 < bytes.len() {
        if bytes[i] == b'[' && bytes[i + 1] == b'[' {
            depth += 1;
            i += 2;
        } else if bytes[i] == b']' && bytes[i + 1] == b']' {
            depth -= 1;
            i += 2;
            if depth == 0 {
                return Some(i);
            }
        } else {
            i += 1;
        }
    }
    None
}

fn split_top_level_pipe(inner: &str) -> (&str, Option<&str>) {
    let bytes = inner.as_bytes();
    let mut depth = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i..].starts_with(b"[[") {
            depth += 1;
            i += 2;
        } else if bytes[i..].starts_with(b"]]") {
            depth = depth.saturating_sub(1);
            i += 2;
        } else {
            if bytes[i] == b'|' && depth == 0 {
                return (&inner[..i], Some(&inner[i + 1..]));
            }
            i += 1;
        }
    }
    (inner, None)
}

fn is_language_prefix(prefix: &str) -> bool {
    let mut parts = prefix.split('-');
    let head = parts.next().unwrap_or("");
    (2..=3).contains(&head.len())
        && head.bytes().all(|b| b.is_ascii_lowercase())
        && parts.all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_lowercase()))
}

fn render_link(inner: &str, opts: &StripOptions) -> String {
    let (target, label) = split_top_level_pipe(inner);
    let target = target.trim();
    if let Some(explicit) = target.strip_prefix(':') {
        return match label {
            Some(l) => replace_links(l, opts),
            None => explicit.trim().to_string(),
        };
    }
    if let Some((prefix, _)) = target.split_once(':') {
        let lower = prefix.trim().to_lowercase();
        if opts.drop_link_prefixes.iter().any(|p| *p == lower) {
            return String::new();
        }
        if label.is_none() && is_language_prefix(prefix.trim()) {
            return String::new();
        }
    }
    match label {
        Some(l) => replace_links(l, opts),
        None => target.to_string(),
    }
}

/// Replaces `[[target|label]]` by its label and `[[target]]` by its target.
pub fn replace_links(text: &str, opts: &StripOptions) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    while pos < text.len() {
        let next_open = text[pos..].find("[[").map(|p| pos + p);
        let next_close = text[pos..].find("]]").map(|p| pos + p);
        match (next_open, next_close) {
            (Some(o), c) if c.is_none_or(|c| o < c) => {
                out.push_str(&text[pos..o]);
                match matching_link_end(text, o) {
                    Some(end) => {
                        out.push_str(&render_link(&text[o + 2..end - 2], opts));
                        pos = end;
                    }
                    None => pos = line_end(text, o),
                }
            }
            (_, Some(c)) => {
                out.push_str(&text[pos..c]);
                pos = c + 2;
            }
            _ => {
                out.push_str(&text[pos..]);
                pos = text.len();
            }
        }
    }
    out
}

/// Replaces `[url label]` by `label` and a bare `[url]` by nothing.
pub fn replace_external_links(text: &str) -> String {
    const SCHEMES: &[&str] = &["http://", "https://", "ftp://", "//", "mailto:"];
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut copy_from = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'[' && SCHEMES.iter().any(|s| starts_with_ci(&bytes[i + 1..], s.as_bytes())) {
            let eol = line_end(text, i);
            if let Some(close) = text[i..eol].find(']').map(|p| i + p) {
                out.push_str(&text[copy_from..i]);
                let inner = &text[i + 1..close];
                if let Some((_, label)) = inner.split_once(char::is_whitespace) {
                    out.push_str(label.trim());
                }
                i = close + 1;
                copy_from = i;
                continue;
            }
        }
        i += 1;
    }
    out.push_str(&text[copy_from..]);
    out
}

/// Removes any remaining HTML-like tag, keeping its content.
pub fn remove_tags(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut copy_from = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'<' {
            let name_at = if bytes.get(i + 1) == Some(&b'/') { i + 2 } else { i + 1 };
            if bytes.get(name_at).is_some_and(|c| c.is_ascii_alphabetic()) {
                if let Some(gt) = text[name_at..].find(|c| c == '>' || c == '<' || c == '\n') {
                    let gt = name_at + gt;
                    if bytes[gt] == b'>' {
                        out.push_str(&text[copy_from..i]);
                        i = gt + 1;
                        copy_from = i;
                        continue;
                    }
                }
            }
        }
        i += 1;
    }
    out.push_str(&text[copy_from..]);
    out
}

/// Drops runs of two or more apostrophes (italic / bold markup).
fn remove_emphasis(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut run = 0;
    for c in line.chars() {
        if c == '\'' {
            run += 1;
            continue;
        }
        if run == 1 {
            out.push('\'');
        }
        run = 0;
        out.push(c);
    }
    if run == 1 {
        out.push('\'');
    }
    out
}

fn remove_magic_words(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut rest = line;
    while let Some(start) = rest.find("__") {
        let after = &rest[start + 2..];
        let word_len = after.bytes().take_while(|b| b.is_ascii_uppercase()).count();
        if word_len > 0 && after[word_len..].starts_with("__") {
            out.push_str(&rest[..start]);
            rest = &after[word_len + 2..];
        } else {
            out.push_str(&rest[..start + 2]);
            rest = after;
        }
    }
    out.push_str(rest);
    out
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn scrub_leaks(mut s: String) -> String {
    loop {
        let before = s.len();
        for marker in LEAK_MARKERS {
            if s.contains(marker) {
                s = s.replace(marker, "");
            }
        }
        if s.len() == before {
            return s;
        }
    }
}

enum LineKind {
    Break,
    Text(String),
    Item(String),
}

fn classify_line(line: &str, opts: &StripOptions) -> LineKind {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return LineKind::Break;
    }
    if trimmed.len() >= 2 && trimmed.starts_with('=') && trimmed.ends_with('=') {
        return LineKind::Break;
    }
    if trimmed.starts_with("----") || trimmed.starts_with('|') || trimmed.starts_with('!') {
        return LineKind::Break;
    }
    if trimmed.starts_with(['*', '#', ';', ':']) {
        if !opts.keep_lists {
            return LineKind::Break;
        }
        let body = trimmed.trim_start_matches(['*', '#', ';', ':', ' ', '\t']);
        return if body.is_empty() {
            LineKind::Break
        } else {
            LineKind::Item(body.to_string())
        };
    }
    LineKind::Text(trimmed.to_string())
}

fn finish_paragraph(raw: &str) -> Option<String> {
    let decoded = html_escape::decode_html_entities(raw);
    let para = normalize_ws(&scrub_leaks(normalize_ws(&decoded)));
    (!para.is_empty()).then_some(para)
}

/// Strips wikitext down to plain-text paragraphs.
pub fn strip_wikitext(wikitext: &str, opts: &StripOptions) -> Vec<String> {
    let text = wikitext.replace("\r\n", "\n");
    let text = remove_comments(&text);
    let text = remove_content_tags(&text);
    let text = remove_nested(&text, "{{", "}}");
    let text = remove_nested(&text, "{|", "|}");
    let text = replace_links(&text, opts);
    let text = replace_external_links(&text);
    let text = remove_tags(&text);

    let mut paragraphs = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, paragraphs: &mut Vec<String>| {
        if let Some(p) = finish_paragraph(current) {
            paragraphs.push(p);
        }
        current.clear();
    };
    for line in text.lines() {
        let line = remove_magic_words(&remove_emphasis(line));
        match classify_line(&line, opts) {
            LineKind::Break => flush(&mut current, &mut paragraphs),
            LineKind::Item(item) => {
                flush(&mut current, &mut paragraphs);
                current.push_str(&item);
                flush(&mut current, &mut paragraphs);
            }
            LineKind::Text(t) => {
                if !current.is_empty() {
                    current.push(' ');
                }
                current.push_str(&t);
            }
        }
    }
    flush(&mut current, &mut paragraphs);
    paragraphs
}
