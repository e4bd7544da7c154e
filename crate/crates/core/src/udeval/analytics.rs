use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreebankResult {
    pub language: String,
    pub treebank: String,
    pub tokens: u64,
    pub las_mbert: f64,
    pub las_wikibert: f64,
}

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads `language<TAB>treebank<TAB>tokens<TAB>las_mbert<TAB>las_wikibert`.
/// A header line starting with `language` and `#` comments are skipped.
pub fn read_results<R: BufRead>(input: R) -> Result<Vec<TreebankResult>, ResultsError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("language\t")) {
            continue;
        }
        let err = |message: String| ResultsError::Parse { line: i + 1, message };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", f.len())));
        }
        let tokens: u64 = f[2].parse().map_err(|_| err(format!("bad token count {:?}", f[2])))?;
        if tokens == 0 {
            return Err(err("token count must be positive".into()));
        }
        let mut las = [0.0; 2];
        for (slot, raw) in las.iter_mut().zip(&f[3..]) {
            *slot = raw.parse().map_err(|_| err(format!("bad LAS {raw:?}")))?;
            if !(0.0..=100.0).contains(slot) {
                return Err(err(format!("LAS {raw} outside [0, 100]")));
            }
        }
        out.push(TreebankResult {
            language: f[0].to_string(),
            treebank: f[1].to_string(),
            tokens,
            las_mbert: las[0],
            las_wikibert: las[1],
        });
    }
    Ok(out)
}

/// Languages or individual treebanks to leave out of the aggregate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exclusions {
    languages: BTreeSet<String>,
    treebanks: BTreeSet<(String, String)>,
}

impl Exclusions {
    /// One entry per line: `lang` or `lang<whitespace>treebank`; `#` starts a comment.
    pub fn read<R: BufRead>(input: R) -> io::Result<Self> {
        let mut ex = Exclusions::default();
        for line in input.lines() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("");
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some(lang), None) => {
                    ex.languages.insert(lang.to_string());
                }
                (Some(lang), Some(tb)) => {
                    ex.treebanks.insert((lang.to_string(), tb.to_string()));
                }
                _ => {}
            }
        }
        Ok(ex)
    }

    pub fn excludes(&self, r: &TreebankResult) -> bool {
        self.languages.contains(&r.language) || self.treebanks.contains(&(r.language.clone(), r.treebank.clone()))
    }
}

/// `language<TAB>genus` lines.
pub fn read_genus_map<R: BufRead>(input: R) -> io::Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for line in input.lines() {
        let line = line?;
        if line.starts_with('#') {
            continue;
        }
        if let Some((lang, genus)) = line.trim_end_matches('\r').split_once('\t') {
            map.insert(lang.to_string(), genus.to_string());
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageSummary {
    pub language: String,
    pub tokens: u64,
    pub treebanks: usize,
    pub las_mbert: f64,
    pub las_wikibert: f64,
    /// (wiki − mbert) / mbert
    pub delta: f64,
    /// (wiki − mbert) / (100 − mbert)
    pub rer: f64,
    pub genus: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticsReport {
    pub languages: Vec<LanguageSummary>,
    pub macro_mbert: f64,
    pub macro_wikibert: f64,
    pub overall_delta: f64,
    pub overall_rer: f64,
    pub excluded: usize,
}

pub fn relative_change(base: f64, new: f64) -> f64 {
    (new - base) / base
}

pub fn error_reduction(base: f64, new: f64) -> f64 {
    (new - base) / (100.0 - base)
}

/// Sum in sorted order so the result does not depend on input order.
fn mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-language uniform mean over treebanks, then macro averages over
/// languages. Languages are reported in code order.
pub fn aggregate(
    results: &[TreebankResult],
    exclusions: &Exclusions,
    genus: &BTreeMap<String, String>,
) -> Option<AnalyticsReport> {
    let mut by_lang: BTreeMap<&str, Vec<&TreebankResult>> = BTreeMap::new();
    let mut excluded = 0;
    for r in results {
        if exclusions.excludes(r) {
            excluded += 1;
        } else {
            by_lang.entry(&r.language).or_default().push(r);
        }
    }
    if by_lang.is_empty() {
        return None;
    }
    let languages: Vec<LanguageSummary> = by_lang
        .into_iter()
        .map(|(lang, rows)| {
            let m = mean(rows.iter().map(|r| r.las_mbert).collect());
            let w = mean(rows.iter().map(|r| r.las_wikibert).collect());
            LanguageSummary {
                language: lang.to_string(),
                tokens: rows.iter().map(|r| r.tokens).max().unwrap_or(0),
                treebanks: rows.len(),
                las_mbert: m,
                las_wikibert: w,
                delta: relative_change(m, w),
                rer: error_reduction(m, w),
                genus: genus.get(lang).cloned(),
            }
        })
        .collect();
    let macro_mbert = mean(languages.iter().map(|l| l.las_mbert).collect());
    let macro_wikibert = mean(languages.iter().map(|l| l.las_wikibert).collect());
    Some(AnalyticsReport {
        overall_delta: relative_change(macro_mbert, macro_wikibert),
        overall_rer: error_reduction(macro_mbert, macro_wikibert),
        languages,
        macro_mbert,
        macro_wikibert,
        excluded,
    })
}

/// Languages with the largest and smallest relative change; ties go to
/// the lexicographically first code.
pub fn extremes(report: &AnalyticsReport) -> Option<(&LanguageSummary, &LanguageSummary)> {
    let mut best = report.languages.first()?;
    let mut worst = best;
    for l in &report.languages[1..] {
        if l.delta > best.delta {
            best = l;
        }
        if l.delta < worst.delta {
            worst = l;
        }
    }
    Some((best, worst))
}

impl AnalyticsReport {
    /// `language,tokens,delta,rer,genus`
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "language,tokens,delta,rer,genus")?;
        for l in &self.languages {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{}",
                l.language,
                l.tokens,
                l.delta,
                l.rer,
                l.genus.as_deref().unwrap_or("")
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "languages: {}\nmacro LAS mbert: {:.2}\nmacro LAS wikibert: {:.2}\nrelative change: {:.4}\nerror reduction: {:.4}\n",
            self.languages.len(),
            self.macro_mbert,
            self.macro_wikibert,
            self.overall_delta,
            self.overall_rer
        );
        if let Some((best, worst)) = extremes(self) {
            s.push_str(&format!(
                "greatest gain: {} ({:+.4})\ngreatest loss: {} ({:+.4})\n",
                best.language, best.delta, worst.language, worst.delta
            ));
        }
        let over = self.languages.iter().filter(|l| l.rer > 0.10).count();
        s.push_str(&format!("languages with error reduction above 0.10: {over}\n"));
        s
    }
}
