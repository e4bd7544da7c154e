use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Stage;
use crate::extract::ExtractConfig;
use crate::filter::{FilterConfig, Rule};
use crate::pretrain::{ExampleGenConfig, RecordFormat};
use crate::segment::SegmentConfig;
use crate::subword::{BasicTokenConfig, BpeConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub dump: Option<PathBuf>,
    /// Profile files, or directories holding `*.profile` files.
    #[serde(default)]
    pub profiles: Vec<PathBuf>,
    pub abbreviations: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchItem {
    pub url: String,
    pub sha256: String,
    pub dest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub token_budget: u64,
}

impl Default for SampleSection {
    fn default() -> Self {
        SampleSection { token_budget: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub max_seq_length: usize,
    pub max_predictions_per_seq: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExamplesSection {
    pub dupe_factor: usize,
    pub short_seq_prob: f64,
    pub masked_lm_prob: f64,
    pub random_next_prob: f64,
    pub whole_word_mask: bool,
    pub format: RecordFormat,
    pub phases: Vec<Phase>,
}

impl Default for ExamplesSection {
    fn default() -> Self {
        let d = ExampleGenConfig::default();
        ExamplesSection {
            dupe_factor: d.dupe_factor,
            short_seq_prob: d.short_seq_prob,
            masked_lm_prob: d.masked_lm_prob,
            random_next_prob: d.random_next_prob,
            whole_word_mask: d.whole_word_mask,
            format: RecordFormat::Packed,
            phases: vec![
                Phase { max_seq_length: 128, max_predictions_per_seq: 20 },
                Phase { max_seq_length: 512, max_predictions_per_seq: 77 },
            ],
        }
    }
}

impl ExamplesSection {
    pub fn generation_config(&self, phase: Phase, seed: u64) -> ExampleGenConfig {
        ExampleGenConfig {
            max_seq_length: phase.max_seq_length,
            dupe_factor: self.dupe_factor,
            short_seq_prob: self.short_seq_prob,
            masked_lm_prob: self.masked_lm_prob,
            max_predictions_per_seq: phase.max_predictions_per_seq,
            random_next_prob: self.random_next_prob,
            whole_word_mask: self.whole_word_mask,
            seed,
        }
    }
}

/// One run's configuration. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub lang: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub workers: Option<usize>,
    #[serde(default = "all_stages")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub inputs: InputPaths,
    #[serde(default)]
    pub fetch: Vec<FetchItem>,
    #[serde(default)]
    pub extract: ExtractConfig,
    #[serde(default)]
    pub segment: SegmentConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub tokenization: BasicTokenConfig,
    #[serde(default)]
    pub vocab: BpeConfig,
    #[serde(default)]
    pub examples: ExamplesSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn all_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

impl PipelineConfig {
    /// Config with defaults for `lang`, writing under `output_dir`.
    pub fn new(lang: &str, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            lang: lang.to_string(),
            seed: 0,
            output_dir: output_dir.into(),
            workers: None,
            stages: all_stages(),
            inputs: InputPaths::default(),
            fetch: Vec::new(),
            extract: ExtractConfig::default(),
            segment: SegmentConfig::default(),
            filter: FilterConfig::default(),
            sample: SampleSection::default(),
            tokenization: BasicTokenConfig::default(),
            vocab: BpeConfig::default(),
            examples: ExamplesSection::default(),
        }
    }

    /// Parses TOML; relative paths are anchored at `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, Vec<String>> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| vec![e.to_string()])?;
        cfg.resolve_paths(base);
        if cfg.filter.lang.is_empty() {
            cfg.filter.lang = cfg.lang.clone();
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Vec<String>> {
        let text = fs::read_to_string(path).map_err(|e| vec![format!("cannot read {}: {e}", path.display())])?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|errs| {
            errs.into_iter()
                .map(|e| format!("{}: {e}", path.display()))
                .collect()
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        anchor(&mut self.output_dir);
        if let Some(p) = self.inputs.dump.as_mut() {
            anchor(p);
        }
        if let Some(p) = self.inputs.abbreviations.as_mut() {
            anchor(p);
        }
        self.inputs.profiles.iter_mut().for_each(anchor);
        for f in &mut self.fetch {
            anchor(&mut f.dest);
            if !f.url.contains("://") {
                f.url = base.join(&f.url).to_string_lossy().into_owned();
            }
        }
    }

    fn fetched(&self, path: &Path) -> bool {
        self.fetch.iter().any(|f| f.dest == path)
    }

    /// Every problem found, in a stable order.
    pub fn validate(&self) -> Vec<String> {
        self.validate_for(&self.stages)
    }

    /// Like [`validate`](Self::validate), checking input files only for `stages`.
    pub fn validate_for(&self, stages: &[Stage]) -> Vec<String> {
        let mut errors = Vec::new();
        if self.lang.is_empty() || !self.lang.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            errors.push(format!("lang must be a non-empty language code, got {:?}", self.lang));
        }
        if self.workers == Some(0) {
            errors.push("workers must be at least 1".to_string());
        }
        let mut seen = BTreeSet::new();
        for s in &self.stages {
            if !seen.insert(*s) {
                errors.push(format!("stage {s} listed twice"));
            }
        }

        let needs = |s: Stage| stages.contains(&s);
        match &self.inputs.dump {
            None if needs(Stage::Extract) => errors.push("inputs.dump is required by the extract stage".to_string()),
            Some(p) if needs(Stage::Extract) && !p.exists() && !self.fetched(p) => {
                errors.push(format!("inputs.dump {} does not exist", p.display()))
            }
            _ => {}
        }
        if let Some(p) = &self.inputs.abbreviations {
            if !p.exists() && !self.fetched(p) {
                errors.push(format!("inputs.abbreviations {} does not exist", p.display()));
            }
        }
        for p in &self.inputs.profiles {
            if !p.exists() && !self.fetched(p) {
                errors.push(format!("inputs.profiles entry {} does not exist", p.display()));
            }
        }
        if needs(Stage::Filter) && self.filter.enabled_rules.contains(&Rule::Language) && self.inputs.profiles.is_empty()
        {
            errors.push("the language filter rule needs inputs.profiles".to_string());
        }
        for (i, f) in self.fetch.iter().enumerate() {
            if f.sha256.len() != 64 || !f.sha256.chars().all(|c| c.is_ascii_hexdigit()) {
                errors.push(format!("fetch[{i}].sha256 must be 64 hex digits"));
            }
            if f.url.is_empty() {
                errors.push(format!("fetch[{i}].url is empty"));
            }
        }

        if self.extract.namespaces.is_empty() {
            errors.push("extract.namespaces must not be empty".to_string());
        }
        if self.extract.batch_size == 0 {
            errors.push("extract.batch_size must be at least 1".to_string());
        }
        if self.segment.max_sentence_tokens == 0 {
            errors.push("segment.max_sentence_tokens must be at least 1".to_string());
        }
        errors.extend(self.filter.validate());
        if self.sample.token_budget == 0 {
            errors.push("sample.token_budget must be at least 1".to_string());
        }
        if self.vocab.vocab_size <= crate::subword::SPECIAL_TOKENS.len() {
            errors.push(format!("vocab.vocab_size {} leaves no room beyond the specials", self.vocab.vocab_size));
        }
        if self.vocab.min_char_count == 0 {
            errors.push("vocab.min_char_count must be at least 1".to_string());
        }
        if self.examples.phases.is_empty() {
            errors.push("examples.phases must list at least one phase".to_string());
        }
        let mut lengths = BTreeSet::new();
        for p in &self.examples.phases {
            if !lengths.insert(p.max_seq_length) {
                errors.push(format!("examples phase length {} listed twice", p.max_seq_length));
            }
            for e in self.examples.generation_config(*p, self.seed).validate() {
                errors.push(format!("examples (length {}): {e}", p.max_seq_length));
            }
        }
        errors
    }
}
