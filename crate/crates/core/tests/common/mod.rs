//! Reference implementations used to check the library: written for
//! clarity, recomputing everything from scratch.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data")
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// Merge sequence by full pair recount after every merge.
pub fn bpe_oracle(words: &BTreeMap<String, u64>, vocab_size: usize, min_char_count: u64) -> Vec<(String, String)> {
    let mut char_freq: BTreeMap<char, u64> = BTreeMap::new();
    for (w, n) in words {
        for c in w.chars() {
            *char_freq.entry(c).or_default() += n;
        }
    }
    let alphabet: BTreeSet<char> = char_freq
        .into_iter()
        .filter(|(_, n)| *n >= min_char_count)
        .map(|(c, _)| c)
        .collect();
    let mut vocab: BTreeSet<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"].iter().map(|s| s.to_string()).collect();
    for c in &alphabet {
        vocab.insert(c.to_string());
        vocab.insert(format!("##{c}"));
    }
    let mut corpus: Vec<(Vec<String>, u64)> = words
        .iter()
        .filter(|(w, _)| !w.is_empty() && w.chars().all(|c| alphabet.contains(&c)))
        .map(|(w, n)| {
            let syms = w
                .chars()
                .enumerate()
                .map(|(i, c)| if i == 0 { c.to_string() } else { format!("##{c}") })
                .collect();
            (syms, *n)
        })
        .collect();

    let mut merges = Vec::new();
    while vocab.len() < vocab_size {
        let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (syms, n) in &corpus {
            for w in syms.windows(2) {
                *counts.entry((w[0].clone(), w[1].clone())).or_default() += n;
            }
        }
        // BTreeMap iterates pairs in lexicographic order, so the first
        // maximum is the tie-break winner.
        let mut best: Option<(&(String, String), u64)> = None;
        for (pair, &c) in &counts {
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((pair, c));
            }
        }
        let Some(((left, right), count)) = best else { break };
        if count < 2 {
            break;
        }
        let (left, right) = (left.clone(), right.clone());
        let merged = format!("{left}{}", right.strip_prefix("##").unwrap_or(&right));
        for (syms, _) in corpus.iter_mut() {
            let mut out = Vec::new();
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == left && syms[i + 1] == right {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(syms[i].clone());
                    i += 1;
                }
            }
            *syms = out;
        }
        vocab.insert(merged);
        merges.push((left, right));
    }
    merges
}

/// A dependency tree as (head, label) per token.
pub type Tree = Vec<(u32, String)>;

/// Percentage of tokens whose head and label both match, counted one
/// token at a time.
pub fn las_oracle(gold: &[Tree], pred: &[Tree]) -> f64 {
    let mut total = 0u64;
    let mut hits = 0u64;
    for (g, p) in gold.iter().zip(pred) {
        for k in 0..g.len() {
            total += 1;
            if g[k].0 == p[k].0 && g[k].1 == p[k].1 {
                hits += 1;
            }
        }
    }
    hits as f64 * 100.0 / total as f64
}

/// Checks that every piece is the longest vocabulary entry available at its
/// position and that the pieces tile the token.
pub fn greedy_violation(token: &str, pieces: &[String], vocab: &BTreeSet<String>) -> Option<String> {
    let chars: Vec<char> = token.chars().collect();
    let mut pos = 0;
    for (k, piece) in pieces.iter().enumerate() {
        let body = match (k, piece.strip_prefix("##")) {
            (0, _) => piece.as_str(),
            (_, Some(b)) => b,
            (_, None) => return Some(format!("non-initial piece {piece:?} lacks the continuation prefix")),
        };
        let len = body.chars().count();
        if chars.get(pos..pos + len).map(|s| s.iter().collect::<String>()) != Some(body.to_string()) {
            return Some(format!("piece {piece:?} does not continue {token:?} at {pos}"));
        }
        for end in pos + len + 1..=chars.len() {
            let s: String = chars[pos..end].iter().collect();
            let cand = if k == 0 { s } else { format!("##{s}") };
            if vocab.contains(&cand) {
                return Some(format!("{cand:?} is longer than {piece:?} and in the vocabulary"));
            }
        }
        pos += len;
    }
    (pos != chars.len()).then(|| format!("pieces cover {pos} of {} characters", chars.len()))
}

/// Sentences of a corpus file, one paragraph per line.
pub fn corpus_lines(lang: &str) -> Vec<String> {
    let text = std::fs::read_to_string(data_dir().join(format!("corpora/{lang}.txt"))).unwrap();
    text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A dump of roughly `target_bytes` whose articles recombine sentences of a
/// bundled corpus, decorated with the usual markup, plus redirects and
/// talk pages.
pub fn synthetic_dump(lang: &str, target_bytes: usize, seed: u64) -> String {
    use rand::seq::IndexedRandom;
    use rand::{Rng, SeedableRng};

    let sentences: Vec<String> = corpus_lines(lang)
        .iter()
        .flat_map(|p| p.split(". ").map(|s| s.trim_end_matches('.').to_string()).collect::<Vec<_>>())
        .filter(|s| s.split(' ').count() > 3)
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("<mediawiki xmlns=\"http://www.mediawiki.org/xml/export-0.10/\" version=\"0.10\">\n");
    let mut id = 1u64;
    while out.len() < target_bytes {
        let title = format!("Article {id}");
        let (ns, text) = match rng.random_range(0..20) {
            0 => (0, format!("#REDIRECT [[Article {}]]", rng.random_range(1..=id))),
            1 => (1, format!("Talk about [[{title}]]. ~~~~")),
            _ => {
                let mut body = format!("{{{{Infobox|name={title}|size={{{{formatnum:{}}}}}}}}}\n", rng.random_range(1..1000));
                for p in 0..rng.random_range(2..8) {
                    if p > 0 && rng.random_bool(0.3) {
                        body.push_str(&format!("\n== Section {p} ==\n"));
                    }
                    for _ in 0..rng.random_range(2..7) {
                        let s = sentences.choose(&mut rng).unwrap();
                        let words: Vec<&str> = s.split(' ').collect();
                        let k = rng.random_range(0..words.len());
                        let decorated: Vec<String> = words
                            .iter()
                            .enumerate()
                            .map(|(i, w)| match (i == k, rng.random_range(0..4)) {
                                (true, 0) => format!("[[{w}]]"),
                                (true, 1) => format!("[[{w} (topic)|{w}]]"),
                                (true, 2) => format!("'''{w}'''"),
                                _ => w.to_string(),
                            })
                            .collect();
                        body.push_str(&decorated.join(" "));
                        body.push('.');
                        if rng.random_bool(0.2) {
                            body.push_str("<ref>{{cite|url=http://example.org}}</ref>");
                        }
                        body.push(' ');
                    }
                    body.push_str("\n\n");
                }
                body.push_str("[[Category:Examples]]\n");
                (0, body)
            }
        };
        out.push_str(&format!(
            "  <page>\n    <title>{}</title>\n    <ns>{ns}</ns>\n    <id>{id}</id>\n    <revision>\n      <id>{}</id>\n      <text xml:space=\"preserve\">{}</text>\n    </revision>\n  </page>\n",
            xml_escape(&title),
            id + 100_000,
            xml_escape(&text)
        ));
        id += 1;
    }
    out.push_str("</mediawiki>\n");
    out
}

/// Pipeline config for the bundled profiles and abbreviations, with small
/// vocabulary and example settings suited to a few-megabyte dump.
pub fn small_pipeline_toml(lang: &str, dump: &std::path::Path, output_dir: &std::path::Path) -> String {
    let data = data_dir();
    format!(
        r#"lang = "{lang}"
seed = 7
output_dir = "{out}"

[inputs]
dump = "{dump}"
profiles = ["{profiles}"]
abbreviations = "{abbr}"

[filter]
min_tokens = 10

[sample]
token_budget = 200000

[vocab]
vocab_size = 2000
min_char_count = 2

[examples]
dupe_factor = 2
format = "packed"
phases = [{{ max_seq_length = 64, max_predictions_per_seq = 10 }}, {{ max_seq_length = 128, max_predictions_per_seq = 20 }}]
"#,
        out = output_dir.display(),
        dump = dump.display(),
        profiles = data.join("profiles").display(),
        abbr = data.join(format!("abbreviations/{lang}.txt")).display(),
    )
}

pub const DEPRELS: [&str; 5] = ["nsubj", "obj", "obl", "obl:tmod", "punct"];

/// A tree with exactly one root and arbitrary other heads.
pub fn random_tree(rng: &mut impl rand::Rng, n: usize) -> Tree {
    let root = rng.random_range(0..n);
    (0..n)
        .map(|i| {
            let head = if i == root { 0 } else { rng.random_range(1..=n as u32) };
            (head, DEPRELS[rng.random_range(0..DEPRELS.len())].to_string())
        })
        .collect()
}

/// Copy of `tree` with roughly a third of heads and labels redrawn.
pub fn perturb(rng: &mut impl rand::Rng, tree: &Tree) -> Tree {
    tree.iter()
        .map(|(h, l)| {
            let head = if rng.random_bool(0.3) { rng.random_range(0..=tree.len() as u32) } else { *h };
            let label = if rng.random_bool(0.3) { DEPRELS[rng.random_range(0..DEPRELS.len())].to_string() } else { l.clone() };
            (head, label)
        })
        .collect()
}

pub fn to_conllu(tree: &Tree) -> wikiprep::udeval::ConlluSentence {
    wikiprep::udeval::ConlluSentence {
        tokens: tree
            .iter()
            .enumerate()
            .map(|(i, (head, rel))| wikiprep::udeval::ConlluToken {
                id: i as u32 + 1,
                form: format!("t{i}"),
                head: *head,
                deprel: rel.clone(),
            })
            .collect(),
        line: 1,
    }
}

/// Up to 50 word types over a ten-letter alphabet.
pub fn random_toy_corpus(rng: &mut impl rand::Rng) -> BTreeMap<String, u64> {
    let mut words = BTreeMap::new();
    for _ in 0..rng.random_range(1..=50) {
        let len = rng.random_range(1..7);
        let w: String = (0..len).map(|_| char::from(b'a' + rng.random_range(0..10u8))).collect();
        words.insert(w, rng.random_range(1..20));
    }
    words
}

/// Specials, most single characters in both positions, and a few random
/// longer pieces over `a..=f`.
pub fn random_wordpiece_vocab(rng: &mut impl rand::Rng) -> wikiprep::subword::SubwordVocab {
    let mut tokens: BTreeSet<String> = BTreeSet::new();
    for c in "abcdef".chars() {
        if rng.random_bool(0.9) {
            tokens.insert(c.to_string());
        }
        if rng.random_bool(0.9) {
            tokens.insert(format!("##{c}"));
        }
    }
    for _ in 0..rng.random_range(5..40) {
        let len = rng.random_range(2..5);
        let s: String = (0..len).map(|_| char::from(b'a' + rng.random_range(0..6u8))).collect();
        if rng.random_bool(0.5) {
            tokens.insert(s);
        } else {
            tokens.insert(format!("##{s}"));
        }
    }
    let mut all: Vec<String> = wikiprep::subword::SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    all.extend(tokens);
    wikiprep::subword::SubwordVocab::from_tokens(all).unwrap()
}

/// Vocabulary trained on all bundled corpora and every corpus paragraph as
/// a tokenized document.
pub fn mask_fixture() -> (wikiprep::subword::SubwordVocab, Vec<wikiprep::pretrain::TokenizedDocument>) {
    use wikiprep::segment::{RuleSegmenter, Segmenter};
    use wikiprep::subword::{basic_tokenize, count_words, train_bpe, BasicTokenConfig, BpeConfig, FullTokenizer};

    let basic = BasicTokenConfig::default();
    let lines: Vec<String> = ["en", "de", "fi", "ru"].iter().flat_map(|l| corpus_lines(l)).collect();
    let words = count_words(lines.iter().flat_map(|l| basic_tokenize(l, &basic)));
    let model = train_bpe(&words, &BpeConfig { vocab_size: 3000, min_char_count: 2 }).unwrap();
    let tokenizer = FullTokenizer::new(model.vocab, basic);
    let segmenter = RuleSegmenter::default();
    let docs = lines
        .iter()
        .enumerate()
        .map(|(i, paragraph)| wikiprep::pretrain::TokenizedDocument {
            doc_id: i as u64,
            sentences: segmenter
                .segment_paragraph(paragraph)
                .iter()
                .map(|s| tokenizer.tokenize(&s.join(" ")))
                .collect(),
        })
        .collect();
    (tokenizer.vocab, docs)
}

pub fn shipped_profile(lang: &str) -> wikiprep::langid::LanguageProfile {
    use wikiprep::langid::{LanguageProfile, NgramCounts};
    let path = data_dir().join(format!("profiles/{lang}.profile"));
    let file = std::io::BufReader::new(std::fs::File::open(path).unwrap());
    LanguageProfile::from_counts(&NgramCounts::read(file).unwrap())
}

pub fn shipped_profiles() -> Vec<wikiprep::langid::LanguageProfile> {
    ["de", "en", "fi", "ru"].iter().map(|l| shipped_profile(l)).collect()
}

/// Documents mixing corpus sentences (en, fi, ru) with numeric, repeated
/// and punctuation-only junk.
pub fn random_filter_docs(seed: u64, count: usize) -> Vec<wikiprep::segment::SegmentedDocument> {
    use rand::seq::IndexedRandom;
    use rand::{Rng, SeedableRng};
    use wikiprep::segment::tokenize_sentence;

    let pool: Vec<Vec<String>> = ["en", "fi", "ru"]
        .iter()
        .flat_map(|l| corpus_lines(l))
        .flat_map(|p| p.split(". ").map(tokenize_sentence).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|d| {
            let sentences = (0..rng.random_range(1..6))
                .map(|_| {
                    if !rng.random_bool(0.3) {
                        return pool.choose(&mut rng).unwrap().clone();
                    }
                    let n = rng.random_range(1..15);
                    match rng.random_range(0..3) {
                        0 => (0..n).map(|i| (i * 37 % 1000).to_string()).collect(),
                        1 => vec!["spam".to_string(); n],
                        _ => vec!["|".to_string(); n],
                    }
                })
                .collect();
            wikiprep::segment::SegmentedDocument { doc_id: d as u64, title: format!("d{d}"), sentences }
        })
        .collect()
}

/// Every single-step loosening of `cfg`: each threshold moved towards
/// permissive by `amount` (0..1), and each enabled rule switched off.
pub fn loosenings(cfg: &wikiprep::filter::FilterConfig, amount: f64) -> Vec<wikiprep::filter::FilterConfig> {
    use wikiprep::filter::FilterConfig;
    let mut out = vec![
        FilterConfig { min_tokens: (cfg.min_tokens as f64 * (1.0 - amount)).max(1.0) as usize, ..cfg.clone() },
        FilterConfig { min_alpha_ratio: cfg.min_alpha_ratio * (1.0 - amount), ..cfg.clone() },
        FilterConfig {
            max_type_token_repetition: cfg.max_type_token_repetition + (1.0 - cfg.max_type_token_repetition) * amount,
            ..cfg.clone()
        },
        FilterConfig { min_lang_prob: cfg.min_lang_prob * (1.0 - amount), ..cfg.clone() },
    ];
    for rule in &cfg.enabled_rules {
        let mut c = cfg.clone();
        c.enabled_rules.remove(rule);
        out.push(c);
    }
    out
}

/// Token over `a..=f`, with an occasional `g` that no vocabulary covers.
pub fn random_wordpiece_token(rng: &mut impl rand::Rng) -> String {
    let len = rng.random_range(1..12);
    (0..len)
        .map(|_| if rng.random_bool(0.02) { 'g' } else { char::from(b'a' + rng.random_range(0..6u8)) })
        .collect()
}
