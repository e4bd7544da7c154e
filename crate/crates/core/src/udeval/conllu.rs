use std::io::{self, BufRead};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConlluToken {
    pub id: u32,
    pub form: String,
    pub head: u32,
    pub deprel: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConlluSentence {
    pub tokens: Vec<ConlluToken>,
    /// Line of the first token line.
    pub line: usize,
}

impl ConlluSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn root_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.head == 0).count()
    }

    /// Ids contiguous from 1, heads in range, exactly one root.
    pub fn is_well_formed(&self) -> bool {
        let n = self.tokens.len() as u32;
        self.tokens.iter().enumerate().all(|(i, t)| t.id == i as u32 + 1 && t.head <= n) && self.root_count() == 1
    }
}

#[derive(Debug, Error)]
pub enum ConlluError {
    #[error("line {line}: expected 10 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: bad token id {value:?}")]
    BadId { line: usize, value: String },
    #[error("line {line}: non-integer head {value:?}")]
    BadHead { line: usize, value: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn parse_conllu<R: BufRead>(input: R) -> Result<Vec<ConlluSentence>, ConlluError> {
    let mut sentences = Vec::new();
    let mut current = ConlluSentence::default();
    let mut in_sentence = false;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            if in_sentence {
                sentences.push(std::mem::take(&mut current));
                in_sentence = false;
            }
            continue;
        }
        if !in_sentence {
            current.line = line_no;
            in_sentence = true;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(ConlluError::FieldCount { line: line_no, found: fields.len() });
        }
        if fields[0].contains(['-', '.']) {
            continue;
        }
        let id = fields[0].parse().map_err(|_| ConlluError::BadId {
            line: line_no,
            value: fields[0].to_string(),
        })?;
        let head = fields[6].parse().map_err(|_| ConlluError::BadHead {
            line: line_no,
            value: fields[6].to_string(),
        })?;
        current.tokens.push(ConlluToken {
            id,
            form: fields[1].to_string(),
            head,
            deprel: fields[7].to_string(),
        });
    }
    if in_sentence {
        sentences.push(current);
    }
    sentences.retain(|s| !s.is_empty());
    Ok(sentences)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LasError {
    #[error("gold has {gold} sentences, prediction has {pred}")]
    SentenceCount { gold: usize, pred: usize },
    #[error("tokenization differs in sentence {sentence} (gold line {line})")]
    Tokenization { sentence: usize, line: usize },
    #[error("no tokens to score")]
    NoTokens,
}

fn base_label(label: &str, strip_subtypes: bool) -> &str {
    if strip_subtypes {
        label.split(':').next().unwrap_or(label)
    } else {
        label
    }
}

/// Labeled attachment score in percent.
pub fn las(gold: &[ConlluSentence], pred: &[ConlluSentence], strip_subtypes: bool) -> Result<f64, LasError> {
    if gold.len() != pred.len() {
        return Err(LasError::SentenceCount { gold: gold.len(), pred: pred.len() });
    }
    let mut total = 0usize;
    let mut correct = 0usize;
    for (k, (g, p)) in gold.iter().zip(pred).enumerate() {
        let same = g.len() == p.len() && g.tokens.iter().zip(&p.tokens).all(|(a, b)| a.id == b.id && a.form == b.form);
        if !same {
            return Err(LasError::Tokenization { sentence: k + 1, line: g.line });
        }
        total += g.len();
        correct += g
            .tokens
            .iter()
            .zip(&p.tokens)
            .filter(|(a, b)| {
                a.head == b.head && base_label(&a.deprel, strip_subtypes) == base_label(&b.deprel, strip_subtypes)
            })
            .count();
    }
    if total == 0 {
        return Err(LasError::NoTokens);
    }
    Ok(100.0 * correct as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "# sent_id = 1\n\
# text = Vámonos al mar.\n\
1-2\tVámonos\t_\t_\t_\t_\t_\t_\t_\t_\n\
1\tVamos\tir\tVERB\t_\t_\t0\troot\t_\t_\n\
2\tnos\tnosotros\tPRON\t_\t_\t1\tobj\t_\t_\n\
3-4\tal\t_\t_\t_\t_\t_\t_\t_\t_\n\
3\ta\ta\tADP\t_\t_\t5\tcase\t_\t_\n\
4\tel\tel\tDET\t_\t_\t5\tdet\t_\t_\n\
5\tmar\tmar\tNOUN\t_\t_\t1\tobl\t_\t_\n\
6\t.\t.\tPUNCT\t_\t_\t1\tpunct\t_\t_\n\
\n\
# sent_id = 2\n\
1\tSí\tsí\tINTJ\t_\t_\t0\troot\t_\t_\n\
1.1\tdice\t_\t_\t_\t_\t_\t_\t_\t_\n\
2\t.\t.\tPUNCT\t_\t_\t1\tpunct\t_\t_\n";

    #[test]
    fn ranges_and_empty_nodes_are_skipped() {
        let s = parse_conllu(FIXTURE.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].tokens.iter().map(|t| t.form.as_str()).collect::<Vec<_>>(), ["Vamos", "nos", "a", "el", "mar", "."]);
        assert_eq!(s[1].len(), 2);
        assert!(s.iter().all(ConlluSentence::is_well_formed));
    }

    #[test]
    fn nine_fields_is_an_error() {
        let bad = "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t1\tdep\t_\n";
        assert!(matches!(parse_conllu(bad.as_bytes()), Err(ConlluError::FieldCount { line: 2, found: 9 })));
    }

    #[test]
    fn non_integer_head_is_an_error() {
        let bad = "1\ta\ta\tX\t_\t_\tx\troot\t_\t_\n";
        assert!(matches!(parse_conllu(bad.as_bytes()), Err(ConlluError::BadHead { line: 1, .. })));
    }

    #[test]
    fn empty_file() {
        assert!(parse_conllu(&b""[..]).unwrap().is_empty());
    }

    fn tree(spec: &[(u32, &str)]) -> ConlluSentence {
        ConlluSentence {
            tokens: spec
                .iter()
                .enumerate()
                .map(|(i, &(head, rel))| ConlluToken {
                    id: i as u32 + 1,
                    form: format!("w{i}"),
                    head,
                    deprel: rel.to_string(),
                })
                .collect(),
            line: 1,
        }
    }

    #[test]
    fn las_hand_counts() {
        let gold = vec![tree(&[(2, "nsubj"), (0, "root"), (2, "obj"), (2, "punct")])];
        assert_eq!(las(&gold, &gold, false).unwrap(), 100.0);
        let pred = vec![tree(&[(3, "nsubj"), (0, "root"), (2, "iobj"), (2, "punct")])];
        assert_eq!(las(&gold, &pred, false).unwrap(), 50.0);
        let wrong = vec![tree(&[(3, "nsubj"), (1, "root"), (1, "obj"), (1, "punct")])];
        assert_eq!(las(&gold, &wrong, false).unwrap(), 0.0);
    }

    #[test]
    fn subtype_stripping() {
        let gold = vec![tree(&[(0, "root"), (1, "obl:tmod")])];
        let pred = vec![tree(&[(0, "root"), (1, "obl")])];
        assert_eq!(las(&gold, &pred, false).unwrap(), 50.0);
        assert_eq!(las(&gold, &pred, true).unwrap(), 100.0);
    }

    #[test]
    fn tokenization_mismatch_names_sentence() {
        let gold = vec![tree(&[(0, "root")]), tree(&[(0, "root"), (1, "dep")])];
        let pred = vec![tree(&[(0, "root")]), tree(&[(0, "root")])];
        assert_eq!(las(&gold, &pred, false), Err(LasError::Tokenization { sentence: 2, line: 1 }));
    }
}
