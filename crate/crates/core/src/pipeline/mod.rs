//! Stage orchestration: configuration, manifests, resumable runs, fetch,
//! corpus statistics and evaluation analytics.

mod config;
mod manifest;
mod stages;

use std::collections::BTreeSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ExamplesSection, FetchItem, InputPaths, Phase, PipelineConfig, SampleSection};
pub use manifest::{sha256_bytes, sha256_file, write_atomic, StageManifest, StagedOutputs};

use crate::extract::ExtractError;
use crate::filter::FilterError;
use crate::langid::{train_counts, LangIdError, DEFAULT_ALPHA};
use crate::pretrain::{GenerationError, SerializeError};
use crate::subword::VocabError;
use crate::textfmt::{DocHeader, FormatError};
use crate::udeval::{self, AnalyticsReport, Exclusions, ResultsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Extract,
    Segment,
    Filter,
    Sample,
    Vocab,
    Examples,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Extract,
        Stage::Segment,
        Stage::Filter,
        Stage::Sample,
        Stage::Vocab,
        Stage::Examples,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::Segment => "segment",
            Stage::Filter => "filter",
            Stage::Sample => "sample",
            Stage::Vocab => "vocab",
            Stage::Examples => "examples",
        }
    }

    /// Stages whose outputs this stage reads.
    pub fn prerequisites(self) -> &'static [Stage] {
        match self {
            Stage::Extract => &[],
            Stage::Segment => &[Stage::Extract],
            Stage::Filter => &[Stage::Segment],
            Stage::Sample => &[Stage::Filter],
            Stage::Vocab => &[Stage::Sample],
            Stage::Examples => &[Stage::Filter, Stage::Vocab],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("stage {stage} needs the output of {prerequisite}; run {prerequisite} first")]
    MissingPrerequisite { stage: Stage, prerequisite: Stage },
    #[error("output {file} of stage {stage} does not match its manifest checksum; rerun with --force to regenerate")]
    Corrupted { stage: Stage, file: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: FormatError },
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    LangId(#[from] LangIdError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Serialize(#[from] SerializeError),
    #[error(transparent)]
    Results(#[from] ResultsError),
    #[error("fetching {url}: {message}")]
    Fetch { url: String, message: String },
    #[error("{}: sha256 {found} does not match pinned {expected}", path.display())]
    ChecksumMismatch { path: PathBuf, expected: String, found: String },
    #[error("no results to aggregate")]
    NoResults,
}

impl PipelineError {
    /// Errors caused by the configuration or invocation rather than the run.
    pub fn is_validation(&self) -> bool {
        matches!(self, PipelineError::Validation(_) | PipelineError::MissingPrerequisite { .. })
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T, PipelineError>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: &Path) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Subset of stages; `None` runs the configured stage list.
    pub stages: Option<Vec<Stage>>,
    pub force: bool,
    /// Overrides `workers` from the config.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunReport {
    pub executed: Vec<Stage>,
    pub skipped: Vec<Stage>,
}

pub fn manifest_dir(output_dir: &Path) -> PathBuf {
    output_dir.join("manifests")
}

pub fn manifest_path(output_dir: &Path, stage: Stage) -> PathBuf {
    manifest_dir(output_dir).join(format!("{stage}.json"))
}

enum Status {
    Complete,
    Incomplete,
    Corrupted(String),
}

fn status(ctx: &stages::Context, stage: Stage) -> Result<Status, PipelineError> {
    let Ok(manifest) = StageManifest::read(&manifest_path(&ctx.cfg.output_dir, stage)) else {
        return Ok(Status::Incomplete);
    };
    for (name, expected) in &manifest.outputs {
        let path = ctx.cfg.output_dir.join(name);
        if !path.exists() {
            return Ok(Status::Incomplete);
        }
        if &sha256_file(&path).at(&path)? != expected {
            return Ok(Status::Corrupted(name.clone()));
        }
    }
    match ctx.current_inputs(stage) {
        Ok(inputs) if inputs == manifest.inputs => Ok(Status::Complete),
        _ => Ok(Status::Incomplete),
    }
}

/// Runs the requested stages in pipeline order. Stages whose manifest
/// matches the current inputs are skipped unless forced or an upstream
/// stage ran in this invocation.
pub fn run(cfg: &PipelineConfig, opts: &RunOptions) -> Result<RunReport, PipelineError> {
    let errors = cfg.validate_for(opts.stages.as_deref().unwrap_or(&cfg.stages));
    if !errors.is_empty() {
        return Err(PipelineError::Validation(errors));
    }
    let workers = opts.workers.or(cfg.workers);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| PipelineError::Validation(vec![format!("cannot start {workers:?} workers: {e}")]))?;
    pool.install(|| run_stages(cfg, opts))
}

fn run_stages(cfg: &PipelineConfig, opts: &RunOptions) -> Result<RunReport, PipelineError> {
    let requested: BTreeSet<Stage> = opts.stages.as_deref().unwrap_or(&cfg.stages).iter().copied().collect();
    fs::create_dir_all(manifest_dir(&cfg.output_dir)).at(&cfg.output_dir)?;
    let ctx = stages::Context::new(cfg);
    let mut report = RunReport::default();
    let mut dirty = BTreeSet::new();

    for stage in requested.iter().copied() {
        for &p in stage.prerequisites() {
            if requested.contains(&p) {
                continue;
            }
            match status(&ctx, p)? {
                Status::Complete => {}
                Status::Corrupted(file) => return Err(PipelineError::Corrupted { stage: p, file }),
                Status::Incomplete => {
                    return Err(PipelineError::MissingPrerequisite {
                        stage,
                        prerequisite: p,
                    })
                }
            }
        }
        let upstream_ran = stage.prerequisites().iter().any(|p| dirty.contains(p));
        if !opts.force && !upstream_ran {
            match status(&ctx, stage)? {
                Status::Complete => {
                    log::info!("{stage}: up to date");
                    report.skipped.push(stage);
                    continue;
                }
                Status::Corrupted(file) => return Err(PipelineError::Corrupted { stage, file }),
                Status::Incomplete => {}
            }
        }
        execute(&ctx, stage)?;
        dirty.insert(stage);
        report.executed.push(stage);
    }
    Ok(report)
}

fn execute(ctx: &stages::Context, stage: Stage) -> Result<(), PipelineError> {
    log::info!("{stage}: running");
    let started = Instant::now();
    let out_dir = &ctx.cfg.output_dir;
    let inputs = ctx.current_inputs(stage)?;
    let mut staged = StagedOutputs::new(out_dir);
    let result = ctx.run(stage, &mut staged)?;
    let outputs = staged.checksums().at(out_dir)?;
    let manifest = StageManifest {
        stage: stage.name().to_string(),
        seed: ctx.cfg.seed,
        inputs,
        config: ctx.config_echo(stage),
        counters: result.counters,
        outputs,
        details: result.details,
    };
    let path = manifest_path(out_dir, stage);
    if path.exists() {
        fs::remove_file(&path).at(&path)?;
    }
    staged.commit().at(out_dir)?;
    write_atomic(&path, manifest.to_json().as_bytes()).at(&path)?;
    let timing = manifest_dir(out_dir).join(format!("{stage}.timing"));
    let seconds = format!("{:.3}\n", started.elapsed().as_secs_f64());
    write_atomic(&timing, seconds.as_bytes()).at(&timing)?;
    log::info!("{stage}: done in {}s", seconds.trim());
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub documents: u64,
    pub sentences: u64,
    pub tokens: u64,
}

/// Counts in a sentences text file: headers, non-blank lines, and
/// whitespace-delimited tokens.
pub fn report_corpus_stats(path: &Path) -> Result<CorpusStats, PipelineError> {
    let file = File::open(path).at(path)?;
    let mut stats = CorpusStats::default();
    for line in BufReader::new(file).lines() {
        let line = line.at(path)?;
        if line.trim().is_empty() {
            continue;
        }
        if DocHeader::parse(&line).is_some() {
            stats.documents += 1;
        } else {
            stats.sentences += 1;
            stats.tokens += line.split_whitespace().count() as u64;
        }
    }
    Ok(stats)
}

/// Aggregates a results table; `None` uses the bundled Table 1 data.
pub fn eval_analytics(
    results: Option<&Path>,
    exclusions: Option<&Path>,
    genus: Option<&Path>,
) -> Result<AnalyticsReport, PipelineError> {
    let rows = match results {
        Some(p) => udeval::read_results(BufReader::new(File::open(p).at(p)?))?,
        None => udeval::read_results(udeval::TABLE1_TSV.as_bytes())?,
    };
    let exclusions = match exclusions {
        Some(p) => Exclusions::read(BufReader::new(File::open(p).at(p)?)).at(p)?,
        None => Exclusions::default(),
    };
    let genus = match genus {
        Some(p) => udeval::read_genus_map(BufReader::new(File::open(p).at(p)?)).at(p)?,
        None => Default::default(),
    };
    udeval::aggregate(&rows, &exclusions, &genus).ok_or(PipelineError::NoResults)
}

/// Trains n-gram counts for `lang` from a plain or sentences text file and
/// writes them in the profile file format.
pub fn train_profile_file(lang: &str, input: &Path, output: &Path) -> Result<u64, PipelineError> {
    let text = fs::read_to_string(input).at(input)?;
    let lines = text.lines().filter(|l| DocHeader::parse(l).is_none());
    let counts = train_counts(lang, lines, DEFAULT_ALPHA)?;
    let mut buf = Vec::new();
    counts.write(&mut buf).at(output)?;
    write_atomic(output, &buf).at(output)?;
    Ok(counts.counts[0].values().sum())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FetchReport {
    pub fetched: Vec<PathBuf>,
    pub up_to_date: Vec<PathBuf>,
}

fn download(url: &str) -> Result<Vec<u8>, PipelineError> {
    let err = |message: String| PipelineError::Fetch {
        url: url.to_string(),
        message,
    };
    if let Some(path) = url.strip_prefix("file://") {
        return fs::read(path).map_err(|e| err(e.to_string()));
    }
    if url.starts_with("http://") || url.starts_with("https://") {
        let response = ureq::get(url).call().map_err(|e| err(e.to_string()))?;
        let mut body = Vec::new();
        response
            .into_reader()
            .read_to_end(&mut body)
            .map_err(|e| err(e.to_string()))?;
        return Ok(body);
    }
    if url.contains("://") {
        return Err(err("unsupported scheme".to_string()));
    }
    fs::read(url).map_err(|e| err(e.to_string()))
}

/// Downloads every configured file whose destination is missing or does
/// not match its pinned checksum.
pub fn fetch(cfg: &PipelineConfig, force: bool) -> Result<FetchReport, PipelineError> {
    let mut report = FetchReport::default();
    for item in &cfg.fetch {
        let expected = item.sha256.to_ascii_lowercase();
        if !force && item.dest.exists() && sha256_file(&item.dest).at(&item.dest)? == expected {
            report.up_to_date.push(item.dest.clone());
            continue;
        }
        log::info!("fetching {}", item.url);
        let body = download(&item.url)?;
        let found = sha256_bytes(&body);
        if found != expected {
            return Err(PipelineError::ChecksumMismatch {
                path: item.dest.clone(),
                expected,
                found,
            });
        }
        write_atomic(&item.dest, &body).at(&item.dest)?;
        report.fetched.push(item.dest.clone());
    }
    Ok(report)
}
