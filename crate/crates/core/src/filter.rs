//! Document-level quality and language filtering.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::langid::ProfileSet;
use crate::segment::SegmentedDocument;

/// Filter rules, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    MinTokens,
    AlphaRatio,
    MaxTypeTokenRepetition,
    Language,
}

impl Rule {
    pub const ALL: [Rule; 4] = [
        Rule::MinTokens,
        Rule::AlphaRatio,
        Rule::MaxTypeTokenRepetition,
        Rule::Language,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::MinTokens => "min_tokens",
            Rule::AlphaRatio => "alpha_ratio",
            Rule::MaxTypeTokenRepetition => "max_type_token_repetition",
            Rule::Language => "language",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown filter rule {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_tokens: usize,
    pub min_alpha_ratio: f64,
    pub max_type_token_repetition: f64,
    pub lang: String,
    pub min_lang_prob: f64,
    pub enabled_rules: BTreeSet<Rule>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_tokens: 20,
            min_alpha_ratio: 0.5,
            max_type_token_repetition: 0.3,
            lang: String::new(),
            min_lang_prob: 0.8,
            enabled_rules: Rule::ALL.into_iter().collect(),
        }
    }
}

impl FilterConfig {
    /// All validation problems, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.min_tokens < 1 {
            errors.push("filter.min_tokens must be at least 1".to_string());
        }
        for (name, v) in [
            ("min_alpha_ratio", self.min_alpha_ratio),
            ("max_type_token_repetition", self.max_type_token_repetition),
            ("min_lang_prob", self.min_lang_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errors.push(format!("filter.{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.enabled_rules.contains(&Rule::Language) && self.lang.is_empty() {
            errors.push("filter.lang is required when the language rule is enabled".to_string());
        }
        errors
    }
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("language rule enabled but no profile for {0:?} is loaded")]
    MissingProfile(String),
    #[error("language rule needs at least two profiles, {0} loaded")]
    TooFewProfiles(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterVerdict {
    pub keep: bool,
    pub rejected_by: Option<Rule>,
    pub measurements: BTreeMap<Rule, f64>,
}

/// Checks that the profile set can serve the configuration.
pub fn check_profiles(cfg: &FilterConfig, profiles: &ProfileSet) -> Result<(), FilterError> {
    if !cfg.enabled_rules.contains(&Rule::Language) {
        return Ok(());
    }
    if !profiles.contains(&cfg.lang) {
        return Err(FilterError::MissingProfile(cfg.lang.clone()));
    }
    if profiles.len() < 2 {
        return Err(FilterError::TooFewProfiles(profiles.len()));
    }
    Ok(())
}

fn alpha_ratio(doc: &SegmentedDocument) -> f64 {
    let (mut alpha, mut total) = (0usize, 0usize);
    for c in doc.tokens().flat_map(str::chars) {
        total += 1;
        if c.is_alphabetic() {
            alpha += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        alpha as f64 / total as f64
    }
}

fn top_token_share(doc: &SegmentedDocument) -> f64 {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    let mut total = 0;
    for t in doc.tokens() {
        *freq.entry(t).or_default() += 1;
        total += 1;
    }
    match freq.values().max() {
        Some(&m) if total > 0 => m as f64 / total as f64,
        _ => 0.0,
    }
}

fn language_prob(doc: &SegmentedDocument, lang: &str, profiles: &ProfileSet) -> f64 {
    let text = doc
        .sentences
        .iter()
        .map(|s| s.join(" "))
        .collect::<Vec<_>>()
        .join(" ");
    match profiles.detect(&text) {
        Ok(ranked) => ranked.iter().find(|(l, _)| l == lang).map_or(0.0, |(_, p)| *p),
        // too little text to identify counts as out-of-language
        Err(_) => 0.0,
    }
}

/// Evaluates the enabled rules in fixed order, stopping at the first failure.
pub fn filter_document(
    doc: &SegmentedDocument,
    cfg: &FilterConfig,
    profiles: &ProfileSet,
) -> Result<FilterVerdict, FilterError> {
    check_profiles(cfg, profiles)?;
    let mut measurements = BTreeMap::new();
    for rule in Rule::ALL {
        if !cfg.enabled_rules.contains(&rule) {
            continue;
        }
        let (value, pass) = match rule {
            Rule::MinTokens => {
                let n = doc.token_count();
                (n as f64, n >= cfg.min_tokens)
            }
            Rule::AlphaRatio => {
                let r = alpha_ratio(doc);
                (r, r >= cfg.min_alpha_ratio)
            }
            Rule::MaxTypeTokenRepetition => {
                let r = top_token_share(doc);
                (r, r <= cfg.max_type_token_repetition)
            }
            Rule::Language => {
                let p = language_prob(doc, &cfg.lang, profiles);
                (p, p >= cfg.min_lang_prob)
            }
        };
        measurements.insert(rule, value);
        if !pass {
            return Ok(FilterVerdict {
                keep: false,
                rejected_by: Some(rule),
                measurements,
            });
        }
    }
    Ok(FilterVerdict {
        keep: true,
        rejected_by: None,
        measurements,
    })
}

/// Per-rule rejection counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RejectionReport {
    pub documents_in: u64,
    pub kept: u64,
    pub rejected: BTreeMap<Rule, u64>,
    pub rejected_ids: Vec<u64>,
}

impl RejectionReport {
    pub fn count(&self, rule: Rule) -> u64 {
        self.rejected.get(&rule).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &RejectionReport) {
        self.documents_in += other.documents_in;
        self.kept += other.kept;
        for (rule, n) in &other.rejected {
            *self.rejected.entry(*rule).or_default() += n;
        }
        self.rejected_ids.extend(&other.rejected_ids);
        self.rejected_ids.sort_unstable();
    }

    /// `rule<TAB>count`, one line per rule in evaluation order.
    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        for rule in Rule::ALL {
            writeln!(out, "{}\t{}", rule, self.count(rule))?;
        }
        Ok(())
    }
}

/// Filters a batch of documents in parallel; kept documents keep their
/// input order.
pub fn filter_stream(
    docs: Vec<SegmentedDocument>,
    cfg: &FilterConfig,
    profiles: &ProfileSet,
) -> Result<(Vec<SegmentedDocument>, RejectionReport), FilterError> {
    check_profiles(cfg, profiles)?;
    let verdicts: Vec<FilterVerdict> = docs
        .par_iter()
        .map(|d| filter_document(d, cfg, profiles))
        .collect::<Result<_, _>>()?;
    let mut report = RejectionReport {
        documents_in: docs.len() as u64,
        ..Default::default()
    };
    let mut kept = Vec::new();
    for (doc, verdict) in docs.into_iter().zip(verdicts) {
        match verdict.rejected_by {
            None => {
                report.kept += 1;
                kept.push(doc);
            }
            Some(rule) => {
                *report.rejected.entry(rule).or_default() += 1;
                report.rejected_ids.push(doc.doc_id);
            }
        }
    }
    Ok((kept, report))
}
