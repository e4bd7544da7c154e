use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wikiprep::pipeline::{self, PipelineConfig, PipelineError, RunOptions, Stage};

#[derive(Parser)]
#[command(name = "wikiprep", version, about = "Wikipedia dump to BERT pre-training data")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, default_value = "wikiprep.toml")]
    config: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Re-run stages even when their manifests are up to date.
    #[arg(long, global = true)]
    force: bool,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download pinned inputs listed under [[fetch]].
    Fetch,
    /// Dump XML to the docs text format.
    Extract,
    /// Sentence split and tokenize documents.
    Segment,
    /// Apply the document filter rules.
    Filter,
    /// Draw the vocabulary training sample.
    Sample,
    /// Train the subword vocabulary.
    Vocab,
    /// Generate pre-training instances.
    Examples,
    /// Run every configured stage, skipping those already complete.
    RunAll {
        /// Comma-separated subset of stages.
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<Stage>>,
    },
    /// Document, sentence and token counts of a sentences file.
    Stats { file: PathBuf },
    /// Aggregate per-treebank LAS results.
    Eval {
        /// Results table; defaults to the bundled Table 1 data.
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long)]
        exclusions: Option<PathBuf>,
        /// language<TAB>genus mapping for the CSV.
        #[arg(long)]
        genus: Option<PathBuf>,
        /// Where to write the per-language CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a language identification profile from text.
    TrainProfile {
        #[arg(long)]
        lang: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn io_failure(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = PipelineConfig::load(&cli.config).map_err(|errs| Failure::Validation(errs.join("\n")))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_stages(cli: &Cli, stages: Option<Vec<Stage>>) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let opts = RunOptions {
        stages,
        force: cli.force,
        workers: cli.workers,
    };
    let report = pipeline::run(&cfg, &opts)?;
    for s in &report.executed {
        println!("{s}\tran");
    }
    for s in &report.skipped {
        println!("{s}\tup to date");
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let single = |s: Stage| run_stages(cli, Some(vec![s]));
    match &cli.command {
        Command::Fetch => {
            let cfg = load_config(cli)?;
            let report = pipeline::fetch(&cfg, cli.force)?;
            for p in &report.fetched {
                println!("fetched\t{}", p.display());
            }
            for p in &report.up_to_date {
                println!("up to date\t{}", p.display());
            }
            Ok(())
        }
        Command::Extract => single(Stage::Extract),
        Command::Segment => single(Stage::Segment),
        Command::Filter => single(Stage::Filter),
        Command::Sample => single(Stage::Sample),
        Command::Vocab => single(Stage::Vocab),
        Command::Examples => single(Stage::Examples),
        Command::RunAll { stages } => run_stages(cli, stages.clone()),
        Command::Stats { file } => {
            let s = pipeline::report_corpus_stats(file)?;
            println!("documents\t{}\nsentences\t{}\ntokens\t{}", s.documents, s.sentences, s.tokens);
            Ok(())
        }
        Command::Eval {
            results,
            exclusions,
            genus,
            out,
        } => {
            let report = pipeline::eval_analytics(results.as_deref(), exclusions.as_deref(), genus.as_deref())?;
            match out {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path).map_err(io_failure(path))?);
                    report.write_csv(&mut w).and_then(|_| w.flush()).map_err(io_failure(path))?;
                    print!("{}", report.summary());
                }
                None => {
                    report.write_csv(io::stdout().lock()).map_err(io_failure(Path::new("<stdout>")))?;
                    eprint!("{}", report.summary());
                }
            }
            Ok(())
        }
        Command::TrainProfile { lang, input, out } => {
            let chars = pipeline::train_profile_file(lang, input, out)?;
            println!("{lang}\t{chars} characters\t{}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
