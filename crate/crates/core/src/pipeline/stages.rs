use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use super::manifest::{sha256_bytes, sha256_file, StagedOutputs};
use super::{IoContext, PipelineConfig, PipelineError, Stage};
use crate::extract::{extract_to_writer, open_dump, read_documents, Document};
use crate::filter::{filter_stream, RejectionReport, Rule};
use crate::langid::{LanguageProfile, NgramCounts, ProfileSet};
use crate::pretrain::{build_instances, serialize_instances, tokenize_document, TokenizedDocument};
use crate::segment::{read_segmented, segment_document, write_segmented, Abbreviations, RuleSegmenter, SegmentedDocument};
use crate::subword::{basic_tokenize, count_words, train_bpe, FullTokenizer, SentenceSampler, SubwordVocab};
use crate::textfmt::BlockWriter;

pub const DOCS: &str = "docs.txt";
pub const SENTENCES: &str = "sentences.txt";
pub const FILTERED: &str = "filtered.txt";
pub const REJECTIONS: &str = "rejections.tsv";
pub const SAMPLE: &str = "sample.txt";
pub const VOCAB: &str = "vocab.txt";
pub const MERGES: &str = "merges.tsv";

const BATCH: usize = 1024;

pub struct StageResult {
    pub counters: BTreeMap<String, u64>,
    pub details: serde_json::Value,
}

pub struct Context<'a> {
    pub cfg: &'a PipelineConfig,
}

fn profile_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .at(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "profile"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn format_error(path: &Path) -> impl Fn(crate::textfmt::FormatError) -> PipelineError + '_ {
    move |source| PipelineError::Format {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>, PipelineError> {
    Ok(BufReader::with_capacity(1 << 20, File::open(path).at(path)?))
}

/// Streams the blocks of a sentences file in batches.
fn for_each_batch<F>(path: &Path, mut f: F) -> Result<(), PipelineError>
where
    F: FnMut(Vec<SegmentedDocument>) -> Result<(), PipelineError>,
{
    let mut batch = Vec::with_capacity(BATCH);
    for doc in read_segmented(open(path)?) {
        batch.push(doc.map_err(format_error(path))?);
        if batch.len() == BATCH {
            f(std::mem::take(&mut batch))?;
        }
    }
    if !batch.is_empty() {
        f(batch)?;
    }
    Ok(())
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a PipelineConfig) -> Self {
        Context { cfg }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn language_rule(&self) -> bool {
        self.cfg.filter.enabled_rules.contains(&Rule::Language)
    }

    /// Stage parameters echoed into the manifest. Paths and worker counts
    /// are left out so manifests do not depend on where or how a run happens.
    pub fn config_echo(&self, stage: Stage) -> serde_json::Value {
        let c = self.cfg;
        match stage {
            Stage::Extract => json!({ "lang": c.lang, "extract": c.extract }),
            Stage::Segment => json!({ "lang": c.lang, "segment": c.segment }),
            Stage::Filter => json!({ "lang": c.lang, "filter": c.filter }),
            Stage::Sample => json!({ "seed": c.seed, "sample": c.sample }),
            Stage::Vocab => json!({ "tokenization": c.tokenization, "vocab": c.vocab }),
            Stage::Examples => json!({ "seed": c.seed, "tokenization": c.tokenization, "examples": c.examples }),
        }
    }

    /// Checksums of everything the stage reads, keyed by logical name.
    pub fn current_inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>, PipelineError> {
        let mut inputs = BTreeMap::new();
        let echo = serde_json::to_string(&self.config_echo(stage)).expect("config serializes");
        inputs.insert("config".to_string(), sha256_bytes(echo.as_bytes()));
        let mut add = |key: String, path: &Path| -> Result<(), PipelineError> {
            inputs.insert(key, sha256_file(path).at(path)?);
            Ok(())
        };
        match stage {
            Stage::Extract => {
                if let Some(dump) = &self.cfg.inputs.dump {
                    add("dump".into(), dump)?;
                }
            }
            Stage::Segment => {
                add(DOCS.into(), &self.out(DOCS))?;
                if let Some(p) = &self.cfg.inputs.abbreviations {
                    add("abbreviations".into(), p)?;
                }
            }
            Stage::Filter => {
                add(SENTENCES.into(), &self.out(SENTENCES))?;
                if self.language_rule() {
                    for p in profile_files(&self.cfg.inputs.profiles)? {
                        add(format!("profile:{}", file_label(&p)), &p)?;
                    }
                }
            }
            Stage::Sample => add(FILTERED.into(), &self.out(FILTERED))?,
            Stage::Vocab => add(SAMPLE.into(), &self.out(SAMPLE))?,
            Stage::Examples => {
                add(FILTERED.into(), &self.out(FILTERED))?;
                add(VOCAB.into(), &self.out(VOCAB))?;
            }
        }
        Ok(inputs)
    }

    pub fn run(&self, stage: Stage, staged: &mut StagedOutputs) -> Result<StageResult, PipelineError> {
        match stage {
            Stage::Extract => self.extract(staged),
            Stage::Segment => self.segment(staged),
            Stage::Filter => self.filter(staged),
            Stage::Sample => self.sample(staged),
            Stage::Vocab => self.vocab(staged),
            Stage::Examples => self.examples(staged),
        }
    }

    fn extract(&self, staged: &mut StagedOutputs) -> Result<StageResult, PipelineError> {
        let dump = self.cfg.inputs.dump.as_deref().expect("validated");
        let input = open_dump(dump).at(dump)?;
        let out = staged.create(DOCS).at(&self.out(DOCS))?;
        let stats = extract_to_writer(input, &self.cfg.extract, out)?;
        let counters = [
            ("pages_read", stats.pages_read),
            ("skipped_namespace", stats.skipped_namespace),
            ("redirects", stats.redirects),
            ("empty_after_strip", stats.empty_after_strip),
            ("documents_out", stats.documents),
        ];
        Ok(StageResult {
            counters: counters.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            details: serde_json::Value::Null,
        })
    }

    fn segment(&self, staged: &mut StagedOutputs) -> Result<StageResult, PipelineError> {
        let abbreviations = match &self.cfg.inputs.abbreviations {
            Some(p) => Abbreviations::from_reader(open(p)?).at(p)?,
            None => Abbreviations::default(),
        };
        let segmenter = RuleSegmenter { abbreviations };
        let out_path = self.out(SENTENCES);
        let mut writer = BlockWriter::new(staged.create(SENTENCES).at(&out_path)?);
        let mut counters: BTreeMap<String, u64> = BTreeMap::new();
        let mut flush = |batch: Vec<Document>, writer: &mut BlockWriter<_>| -> Result<(), PipelineError> {
            let segmented: Vec<_> = batch
                .par_iter()
                .map(|d| segment_document(d, &segmenter, &self.cfg.segment))
                .collect();
            for (doc, dropped) in segmented {
                *counters.entry("documents_in".into()).or_default() += 1;
                *counters.entry("dropped_long_sentences".into()).or_default() += dropped;
                if doc.sentences.is_empty() {
                    *counters.entry("empty_documents".into()).or_default() += 1;
                    continue;
                }
                *counters.entry("documents_out".into()).or_default() += 1;
                *counters.entry("sentences".into()).or_default() += doc.sentences.len() as u64;
                *counters.entry("tokens".into()).or_default() += doc.token_count() as u64;
                write_segmented(writer, &doc).at(&out_path)?;
            }
            Ok(())
        };
        let docs_path = self.out(DOCS);
        let mut batch = Vec::with_capacity(BATCH);
        for doc in read_documents(open(&docs_path)?) {
            batch.push(doc.map_err(format_error(&docs_path))?);
            if batch.len() == BATCH {
                flush(std::mem::take(&mut batch), &mut writer)?;
            }
        }
        flush(batch, &mut writer)?;
        writer.into_inner().flush().at(&out_path)?;
        for key in ["documents_in", "documents_out", "empty_documents", "dropped_long_sentences", "sentences", "tokens"] {
            counters.entry(key.to_string()).or_default();
        }
        Ok(StageResult {
            counters,
            details: serde_json::Value::Null,
        })
    }

    fn load_profiles(&self) -> Result<ProfileSet, PipelineError> {
        if !self.language_rule() {
            return Ok(ProfileSet::default());
        }
        let mut profiles = Vec::new();
        for p in profile_files(&self.cfg.inputs.profiles)? {
            let counts = NgramCounts::read(open(&p)?)?;
            profiles.push(LanguageProfile::from_counts(&counts));
        }
        Ok(ProfileSet::new(profiles)?)
    }

    fn filter(&self, staged: &mut StagedOutputs) -> Result<StageResult, PipelineError> {
        let profiles = self.load_profiles()?;
        let out_path = self.out(FILTERED);
        let mut writer = BlockWriter::new(staged.create(FILTERED).at(&out_path)?);
        let mut report = RejectionReport::default();
        let (mut sentences, mut tokens) = (0u64, 0u64);
        for_each_batch(&self.out(SENTENCES), |batch| {
            let (kept, part) = filter_stream(batch, &self.cfg.filter, &profiles)?;
            report.merge(&part);
            for doc in &kept {
                sentences += doc.sentences.len() as u64;
                tokens += doc.token_count() as u64;
                write_segmented(&mut writer, doc).at(&out_path)?;
            }
            Ok(())
        })?;
        writer.into_inner().flush().at(&out_path)?;
        let rej_path = self.out(REJECTIONS);
        let mut rej = staged.create(REJECTIONS).at(&rej_path)?;
        report.write(&mut rej).at(&rej_path)?;
        rej.flush().at(&rej_path)?;

        let mut counters = BTreeMap::from([
            ("documents_in".to_string(), report.documents_in),
            ("documents_out".to_string(), report.kept),
            ("sentences_out".to_string(), sentences),
            ("tokens_out".to_string(), tokens),
        ]);
        for rule in Rule::ALL {
            counters.insert(format!("rejected_{}", rule.name()), report.count(rule));
        }
        Ok(StageResult {
            counters,
            details: serde_json::Value::Null,
        })
    }

    fn sample(&self, staged: &mut StagedOutputs) -> Result<StageResult, PipelineError> {
        let mut sampler = SentenceSampler::new(self.cfg.sample.token_budget, self.cfg.seed);
        for_each_batch(&self.out(FILTERED), |batch| {
            batch.iter().for_each(|d| sampler.offer_document(d));
            Ok(())
        })?;
        let (docs, stats) = sampler.finish();
        let out_path = self.out(SAMPLE);
        let mut writer = BlockWriter::new(staged.create(SAMPLE).at(&out_path)?);
        for doc in &docs {
            write_segmented(&mut writer, doc).at(&out_path)?;
        }
        writer.into_inner().flush().at(&out_path)?;
        let counters = BTreeMap::from([
            ("sentences_in".to_string(), stats.sentences_in),
            ("tokens_in".to_string(), stats.tokens_in),
            ("sentences_out".to_string(), stats.sentences_out),
            ("tokens_out".to_string(), stats.tokens_out),
        ]);
        Ok(StageResult {
            counters,
            details: serde_json::Value::Null,
        })
    }

    fn vocab(&self, staged: &mut StagedOutputs) -> Result<StageResult, PipelineError> {
        let mut tokens = Vec::new();
        for_each_batch(&self.out(SAMPLE), |batch| {
            for doc in &batch {
                for s in &doc.sentences {
                    tokens.extend(basic_tokenize(&s.join(" "), &self.cfg.tokenization));
                }
            }
            Ok(())
        })?;
        let words = count_words(&tokens);
        let model = train_bpe(&words, &self.cfg.vocab)?;

        let vocab_path = self.out(VOCAB);
        let mut out = staged.create(VOCAB).at(&vocab_path)?;
        model.vocab.write_wordpiece(&mut out).at(&vocab_path)?;
        out.flush().at(&vocab_path)?;
        let merges_path = self.out(MERGES);
        let mut out = staged.create(MERGES).at(&merges_path)?;
        model.vocab.write_merges(&mut out).at(&merges_path)?;
        out.flush().at(&merges_path)?;

        let counters = BTreeMap::from([
            ("tokens_in".to_string(), tokens.len() as u64),
            ("word_types".to_string(), words.len() as u64),
            ("dropped_word_types".to_string(), model.dropped_words),
            ("merges".to_string(), model.merges.len() as u64),
            ("vocab_size".to_string(), model.vocab.len() as u64),
        ]);
        Ok(StageResult {
            counters,
            details: json!({ "vocab_checksum": model.vocab.checksum() }),
        })
    }

    fn examples(&self, staged: &mut StagedOutputs) -> Result<StageResult, PipelineError> {
        let vocab_path = self.out(VOCAB);
        let vocab = SubwordVocab::read_wordpiece(open(&vocab_path)?)?;
        let checksum = vocab.checksum();
        let tokenizer = FullTokenizer::new(vocab, self.cfg.tokenization);
        let mut docs: Vec<TokenizedDocument> = Vec::new();
        for_each_batch(&self.out(FILTERED), |batch| {
            docs.par_extend(batch.par_iter().map(|d| tokenize_document(d, &tokenizer)));
            Ok(())
        })?;

        let mut counters = BTreeMap::new();
        let mut manifests = Vec::new();
        for phase in &self.cfg.examples.phases {
            let gen = self.cfg.examples.generation_config(*phase, self.cfg.seed);
            let (instances, stats) = build_instances(&docs, &tokenizer.vocab, &gen)?;
            let name = format!("examples_{}.{}", gen.max_seq_length, self.cfg.examples.format.extension());
            let path = self.out(&name);
            let mut out = staged.create(&name).at(&path)?;
            let manifest = serialize_instances(&instances, &mut out, self.cfg.examples.format, &gen, &checksum)?;
            out.flush().at(&path)?;
            let len = gen.max_seq_length;
            counters.insert("documents".to_string(), stats.documents);
            counters.insert("empty_documents_skipped".to_string(), stats.empty_documents_skipped);
            counters.insert(format!("instances_{len}"), stats.instances);
            counters.insert(format!("random_next_{len}"), stats.random_next);
            counters.insert(format!("masked_positions_{len}"), stats.masked_positions);
            manifests.push(json!({ "file": name, "manifest": manifest }));
        }
        Ok(StageResult {
            counters,
            details: json!({ "vocab_checksum": checksum, "instance_files": manifests }),
        })
    }
}
