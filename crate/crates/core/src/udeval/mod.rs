//! CoNLL-U reading, labeled attachment score and per-language analytics.

mod analytics;
mod conllu;

pub use analytics::{
    aggregate, error_reduction, extremes, read_genus_map, read_results, relative_change, AnalyticsReport, Exclusions,
    LanguageSummary, ResultsError, TreebankResult,
};
pub use conllu::{las, parse_conllu, ConlluError, ConlluSentence, ConlluToken, LasError};

/// Table 1 rows shipped with the crate.
pub const TABLE1_TSV: &str = include_str!("../../data/table1.tsv");
