//! Character n-gram language identification.
//!
//! A profile is a multinomial model per n-gram order (n = 1, 2, 3) with
//! additive smoothing. N-grams are taken inside words of the normalised text
//! (lowercased, digits folded to `0`, punctuation removed), so word
//! separators never become features.
//!
//! For order n with observed total count `N` and alphabet `A` (the distinct
//! characters seen in training), the support has `|A|^n` members and
//!
//! ```text
//! P(g) = (count(g) + alpha) / (N + alpha * |A|^n)
//! ```
//!
//! Unseen n-grams, including ones with characters outside `A`, score at the
//! smoothing floor `alpha / (N + alpha * |A|^n)`.
//!
//! Detection is naive Bayes with a uniform prior, normalised in log space.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::chars::is_bert_punctuation;

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const MAX_ORDER: usize = 3;
/// Minimum non-space characters of normalised training text.
pub const MIN_TRAINING_CHARS: usize = 1000;
/// Minimum non-space characters of normalised text to attempt detection.
pub const MIN_DETECT_CHARS: usize = 20;

#[derive(Debug, Error)]
pub enum LangIdError {
    #[error("training corpus for {lang:?} has {chars} usable characters, need at least {MIN_TRAINING_CHARS}")]
    CorpusTooSmall { lang: String, chars: usize },
    #[error("text has {chars} usable characters, need at least {MIN_DETECT_CHARS}")]
    TextTooShort { chars: usize },
    #[error("detection needs at least two profiles, got {0}")]
    TooFewProfiles(usize),
    #[error("profile for {0:?} loaded twice")]
    DuplicateProfile(String),
    #[error("profile line {line}: {message}")]
    BadProfile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Lowercases, folds digits to `0`, drops punctuation and collapses
/// whitespace.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if is_bert_punctuation(c) {
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        if c.is_numeric() {
            out.push('0');
        } else {
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Calls `f(order, ngram)` for every in-word n-gram of normalised text.
fn for_each_ngram(normalized: &str, mut f: impl FnMut(usize, &str)) {
    for word in normalized.split(' ') {
        let bounds: Vec<usize> = word.char_indices().map(|(i, _)| i).chain([word.len()]).collect();
        let n_chars = bounds.len() - 1;
        for order in 1..=MAX_ORDER {
            for start in 0..n_chars.saturating_sub(order - 1) {
                f(order, &word[bounds[start]..bounds[start + order]]);
            }
        }
    }
}

fn usable_chars(normalized: &str) -> usize {
    normalized.chars().filter(|c| *c != ' ').count()
}

/// Raw n-gram counts: what a profile file stores.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramCounts {
    pub lang: String,
    pub alpha: f64,
    pub counts: [BTreeMap<String, u64>; MAX_ORDER],
}

impl NgramCounts {
    pub fn new(lang: impl Into<String>, alpha: f64) -> Self {
        NgramCounts {
            lang: lang.into(),
            alpha,
            counts: Default::default(),
        }
    }

    /// Adds already-normalised text.
    pub fn add_normalized(&mut self, normalized: &str) {
        for_each_ngram(normalized, |order, g| {
            *self.counts[order - 1].entry(g.to_string()).or_default() += 1;
        });
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# lang={} alpha={}", self.lang, self.alpha)?;
        for table in &self.counts {
            for (g, c) in table {
                writeln!(out, "{g}\t{c}")?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self, LangIdError> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let bad = |line, message: &str| LangIdError::BadProfile {
            line,
            message: message.to_string(),
        };
        let rest = header
            .strip_prefix("# lang=")
            .ok_or_else(|| bad(1, "expected `# lang=<code> alpha=<a>` header"))?;
        let (lang, alpha) = rest
            .split_once(" alpha=")
            .ok_or_else(|| bad(1, "missing alpha"))?;
        let alpha: f64 = alpha.trim().parse().map_err(|_| bad(1, "alpha is not a number"))?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(bad(1, "alpha must be positive"));
        }
        let mut counts = NgramCounts::new(lang.trim(), alpha);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (g, c) = line.split_once('\t').ok_or_else(|| bad(i + 2, "expected ngram<TAB>count"))?;
            let order = g.chars().count();
            if !(1..=MAX_ORDER).contains(&order) {
                return Err(bad(i + 2, "n-gram order out of range"));
            }
            let c: u64 = c.trim().parse().map_err(|_| bad(i + 2, "count is not an integer"))?;
            counts.counts[order - 1].insert(g.to_string(), c);
        }
        Ok(counts)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct OrderModel {
    logprob: HashMap<String, f64>,
    floor: f64,
    total: u64,
    support: f64,
}

/// Smoothed log-probability tables for one language.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageProfile {
    pub lang: String,
    pub alpha: f64,
    pub vocab_size: usize,
    orders: Vec<OrderModel>,
}

impl LanguageProfile {
    pub fn from_counts(counts: &NgramCounts) -> Self {
        let alphabet = counts.counts[0].len().max(1) as f64;
        let alpha = counts.alpha;
        let orders = (0..MAX_ORDER)
            .map(|k| {
                let table = &counts.counts[k];
                let total: u64 = table.values().sum();
                let support = alphabet.powi(k as i32 + 1);
                let denom = total as f64 + alpha * support;
                OrderModel {
                    logprob: table
                        .iter()
                        .map(|(g, &c)| (g.clone(), ((c as f64 + alpha) / denom).ln()))
                        .collect(),
                    floor: (alpha / denom).ln(),
                    total,
                    support,
                }
            })
            .collect();
        LanguageProfile {
            lang: counts.lang.clone(),
            alpha,
            vocab_size: counts.counts.iter().map(BTreeMap::len).sum(),
            orders,
        }
    }

    /// Log probability of an n-gram of the given order (1-based).
    pub fn logprob(&self, order: usize, ngram: &str) -> f64 {
        let m = &self.orders[order - 1];
        m.logprob.get(ngram).copied().unwrap_or(m.floor)
    }

    /// Log of the smoothing floor for an order.
    pub fn floor(&self, order: usize) -> f64 {
        self.orders[order - 1].floor
    }

    /// Total probability over the support of one order: observed n-grams
    /// plus the floor mass of the unobserved rest.
    pub fn total_mass(&self, order: usize) -> f64 {
        let m = &self.orders[order - 1];
        let observed: f64 = m.logprob.values().map(|lp| lp.exp()).sum();
        let unseen = m.support - m.logprob.len() as f64;
        observed + unseen * m.floor.exp()
    }

    pub fn observed(&self, order: usize) -> impl Iterator<Item = (&str, f64)> {
        self.orders[order - 1].logprob.iter().map(|(g, lp)| (g.as_str(), *lp))
    }

    pub fn total_count(&self, order: usize) -> u64 {
        self.orders[order - 1].total
    }

    /// Log likelihood of already-normalised text.
    pub fn score_normalized(&self, normalized: &str) -> f64 {
        let mut score = 0.0;
        for_each_ngram(normalized, |order, g| score += self.logprob(order, g));
        score
    }
}

/// Counts n-grams of a corpus; fails below [`MIN_TRAINING_CHARS`].
pub fn train_counts<'a, I>(lang: &str, corpus: I, alpha: f64) -> Result<NgramCounts, LangIdError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts = NgramCounts::new(lang, alpha);
    let mut chars = 0;
    for text in corpus {
        let norm = normalize(text);
        chars += usable_chars(&norm);
        counts.add_normalized(&norm);
    }
    if chars < MIN_TRAINING_CHARS {
        return Err(LangIdError::CorpusTooSmall {
            lang: lang.to_string(),
            chars,
        });
    }
    Ok(counts)
}

pub fn train_profile<'a, I>(lang: &str, corpus: I) -> Result<LanguageProfile, LangIdError>
where
    I: IntoIterator<Item = &'a str>,
{
    Ok(LanguageProfile::from_counts(&train_counts(lang, corpus, DEFAULT_ALPHA)?))
}

/// An immutable set of profiles ordered by language code.
#[derive(Debug, Clone, Default)]
pub struct ProfileSet {
    profiles: Vec<LanguageProfile>,
}

impl ProfileSet {
    pub fn new(mut profiles: Vec<LanguageProfile>) -> Result<Self, LangIdError> {
        profiles.sort_by(|a, b| a.lang.cmp(&b.lang));
        let mut seen = BTreeSet::new();
        for p in &profiles {
            if !seen.insert(p.lang.clone()) {
                return Err(LangIdError::DuplicateProfile(p.lang.clone()));
            }
        }
        Ok(ProfileSet { profiles })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn contains(&self, lang: &str) -> bool {
        self.profiles.iter().any(|p| p.lang == lang)
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.profiles.iter().map(|p| p.lang.as_str())
    }

    /// Posterior over languages, highest first; ties by language code.
    pub fn detect(&self, text: &str) -> Result<Vec<(String, f64)>, LangIdError> {
        detect(text, &self.profiles)
    }
}

/// Naive-Bayes posterior with a uniform prior over `profiles`.
pub fn detect(text: &str, profiles: &[LanguageProfile]) -> Result<Vec<(String, f64)>, LangIdError> {
    if profiles.len() < 2 {
        return Err(LangIdError::TooFewProfiles(profiles.len()));
    }
    let norm = normalize(text);
    let chars = usable_chars(&norm);
    if chars < MIN_DETECT_CHARS {
        return Err(LangIdError::TextTooShort { chars });
    }
    let mut ordered: Vec<&LanguageProfile> = profiles.iter().collect();
    ordered.sort_by(|a, b| a.lang.cmp(&b.lang));
    let scores: Vec<f64> = ordered.iter().map(|p| p.score_normalized(&norm)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut ranked: Vec<(String, f64)> = ordered
        .iter()
        .zip(weights)
        .map(|(p, w)| (p.lang.clone(), w / z))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}
