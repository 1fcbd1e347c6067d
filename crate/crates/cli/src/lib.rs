//! The `funnel` command line. [`run`] does the work so tests can drive it
//! without spawning a process.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 upstream
//! failure (embedding service, tagger, socket).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use funnel_core::corpus::load_corpus_file;
use funnel_core::docqa::{AnswerOutput, ContextPack, DocQaError, TemplateGenerator, TextGenerator};
use funnel_core::embed::EmbedError;
use funnel_core::engine::{SearchEngine, SearchError};
use funnel_core::eval::{estimate_storage, evaluate_run, load_mldr_subset, StorageParams, RETRIEVAL_DEPTH};
use funnel_core::expansion::{EntityMention, ExpansionError, ExpansionSet, Strategy};
use funnel_core::query::{QueryPlan, VariationGroup};
use funnel_server::{ServiceConfig, StartupError};
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_UPSTREAM: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Tab-separated or single-line JSON records.
    Lines,
    /// Indented output for people.
    Pretty,
}

#[derive(Debug, Parser)]
#[command(name = "funnel", version, about = "Expansion-aware search and in-document question answering")]
pub struct Cli {
    /// TOML config file; FUNNEL_* environment variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Lines)]
    pub format: Format,
    /// Corpus JSONL; overrides the config.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    pub ontology: Option<PathBuf>,
    #[arg(long, global = true)]
    pub lexicon: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the sparse index for the corpus and write it to a file.
    Index {
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank corpus documents for a query.
    Search {
        #[arg(long)]
        query: String,
        #[arg(long, default_value = "should-expansion")]
        strategy: Strategy,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..=RETRIEVAL_DEPTH as u64))]
        k: u64,
    },
    /// Show the entity mentions, expansions and clause tree for a query.
    Expand {
        #[arg(long)]
        query: String,
        #[arg(long, default_value = "should-expansion")]
        strategy: Strategy,
    },
    /// Answer a question inside one document.
    Ask {
        #[arg(long)]
        doc: String,
        #[arg(long)]
        question: String,
        #[arg(long, default_value = "extractive")]
        output: AnswerOutput,
    },
    /// Score a strategy against a query/qrels set with nDCG@10.
    Eval {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value = "should-expansion")]
        strategy: Strategy,
        /// Also write the per-query report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Dense versus sparse storage for a corpus of the given shape.
    EstimateStorage {
        #[arg(long)]
        docs: u64,
        #[arg(long)]
        chunks: u64,
        #[arg(long)]
        dims: u64,
        #[arg(long)]
        bytes_per_dim: u64,
        #[arg(long, default_value_t = 0)]
        token_bytes: u64,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
    },
}

/// An error paired with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    fn data(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_DATA, error: error.into() }
    }

    fn upstream(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_UPSTREAM, error: error.into() }
    }

    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_USAGE, error: error.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e)
    }
}

impl From<StartupError> for Failure {
    fn from(e: StartupError) -> Self {
        match e {
            StartupError::Bind { .. } => Failure::upstream(e),
            StartupError::Embedder(ref inner) if !matches!(inner, EmbedError::Config(_)) => Failure::upstream(e),
            _ => Failure::data(e),
        }
    }
}

impl From<ExpansionError> for Failure {
    fn from(e: ExpansionError) -> Self {
        match e {
            ExpansionError::EmptyQuery => Failure::usage(e),
            ExpansionError::Tagger(_) | ExpansionError::InvalidMention(_) | ExpansionError::UnknownConcept(_) => Failure::upstream(e),
            other => Failure::data(other),
        }
    }
}

impl From<SearchError> for Failure {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Expansion(e) => e.into(),
            other => Failure::data(other),
        }
    }
}

impl From<DocQaError> for Failure {
    fn from(e: DocQaError) -> Self {
        match e {
            DocQaError::EmptyQuestion => Failure::usage(e),
            DocQaError::Config(_) | DocQaError::EmbeddingFailure(EmbedError::Config(_)) => Failure::data(e),
            DocQaError::EmbeddingFailure(_) | DocQaError::ScorerFailure(_) => Failure::upstream(e),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Results go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {:#}", f.error);
            f.code
        }
    }
}

fn load_config(cli: &Cli) -> Result<ServiceConfig, Failure> {
    let mut config = ServiceConfig::load(cli.config.as_deref()).map_err(Failure::data)?;
    if let Some(p) = &cli.corpus {
        config.corpus = Some(p.clone());
    }
    if let Some(p) = &cli.ontology {
        config.ontology = Some(p.clone());
    }
    if let Some(p) = &cli.lexicon {
        config.lexicon = Some(p.clone());
    }
    Ok(config)
}

fn require_corpus(config: &ServiceConfig) -> Result<&Path, Failure> {
    config.corpus.as_deref().ok_or_else(|| Failure::usage(anyhow!("no corpus: pass --corpus or set it in the config")))
}

fn engine(config: &ServiceConfig) -> Result<SearchEngine, Failure> {
    require_corpus(config)?;
    let expander = funnel_server::load_expander(config)?;
    Ok(funnel_server::load_engine(config, expander)?.expect("corpus is set"))
}

fn emit_json(out: &mut dyn Write, format: Format, value: &impl Serialize) -> Result<(), Failure> {
    match format {
        Format::Lines => serde_json::to_writer(&mut *out, value),
        Format::Pretty => serde_json::to_writer_pretty(&mut *out, value),
    }
    .map_err(Failure::data)?;
    writeln!(out)?;
    Ok(())
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let config = load_config(&cli)?;
    let format = cli.format;
    match cli.command {
        Command::Index { out: path } => {
            let engine = engine(&config)?;
            let mut file =
                BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display())).map_err(Failure::data)?);
            engine.index().save(&mut file).map_err(Failure::data)?;
            file.flush()?;
            match format {
                Format::Lines => writeln!(out, "documents\t{}\nindex\t{}", engine.index().len(), path.display())?,
                Format::Pretty => writeln!(out, "indexed {} documents into {}", engine.index().len(), path.display())?,
            }
        }
        Command::Search { query, strategy, k } => {
            let engine = engine(&config)?;
            let outcome = engine.search(&query, strategy, k as usize)?;
            for hit in &outcome.hits {
                match format {
                    Format::Lines => writeln!(out, "{}\t{}\t{:.6}", hit.rank, hit.doc_id, hit.score)?,
                    Format::Pretty => {
                        let title = engine.corpus().get(&hit.doc_id).map(|d| d.title.as_str()).unwrap_or("");
                        writeln!(out, "{:>4}  {:<24} {:>10.4}  {}", hit.rank, hit.doc_id, hit.score, title)?
                    }
                }
            }
            if outcome.hits.is_empty() && format == Format::Pretty {
                writeln!(out, "no results")?;
            }
        }
        Command::Expand { query, strategy } => {
            let expander = funnel_server::load_expander(&config)?;
            let planned = expander.build_query_plan(&query, strategy)?;
            #[derive(Serialize)]
            struct Preview<'a> {
                query: &'a str,
                strategy: Strategy,
                mentions: &'a [EntityMention],
                expansions: &'a [ExpansionSet],
                verb_groups: &'a [VariationGroup],
                residual: Option<&'a str>,
                plan: &'a QueryPlan,
            }
            let preview = Preview {
                query: &query,
                strategy,
                mentions: &planned.mentions,
                expansions: &planned.expansions,
                verb_groups: &planned.verb_groups,
                residual: planned.residual.as_deref(),
                plan: &planned.plan,
            };
            emit_json(out, format, &preview)?;
        }
        Command::Ask { doc, question, output } => {
            let loaded = load_corpus_file(require_corpus(&config)?).map_err(Failure::data)?;
            let document = loaded.corpus.get(&doc).ok_or_else(|| Failure::data(anyhow!("unknown document {doc:?}")))?;
            let docqa = funnel_server::build_docqa(&config)?;
            let bundle = docqa.answer_document(document, &question, output)?;
            let answer = TemplateGenerator
                .generate(&bundle.question, &bundle.passages, bundle.pack.as_ref().unwrap_or(&ContextPack::default()))
                .map_err(|e| Failure::upstream(anyhow!(e)))?;
            #[derive(Serialize)]
            struct Answer<'a> {
                doc_id: &'a str,
                answer: &'a str,
                /// Packed chunk texts for `packed` output.
                pack: Option<&'a ContextPack>,
                #[serde(flatten)]
                bundle: &'a funnel_core::docqa::AnswerBundle,
            }
            emit_json(out, format, &Answer { doc_id: &doc, answer: &answer, pack: bundle.pack.as_ref(), bundle: &bundle })?;
        }
        Command::Eval { queries, qrels, strategy, report } => {
            let corpus = require_corpus(&config)?;
            let subset = load_mldr_subset(&queries, corpus, &qrels).map_err(Failure::data)?;
            for (q, d) in &subset.missing_docs {
                writeln!(err, "warning: qrels pair ({q}, {d}) names a document outside the corpus")?;
            }
            let expander = funnel_server::load_expander(&config)?;
            let engine = SearchEngine::new(std::sync::Arc::new(subset.corpus), expander);
            let result = evaluate_run(&engine, &subset.queries, &subset.qrels, strategy, RETRIEVAL_DEPTH);
            if let Some(path) = report {
                let mut file =
                    BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display())).map_err(Failure::data)?);
                result.write_report(&mut file)?;
                file.flush()?;
            }
            emit_json(out, format, &result.summary())?;
        }
        Command::EstimateStorage { docs, chunks, dims, bytes_per_dim, token_bytes } => {
            let estimate = estimate_storage(&StorageParams {
                doc_count: docs,
                chunks_per_doc: chunks,
                embedding_dim: dims,
                bytes_per_dim,
                avg_token_bytes_per_doc: token_bytes,
            });
            match format {
                Format::Lines => writeln!(out, "dense\t{}\nsparse\t{}", estimate.dense_bytes, estimate.sparse_bytes)?,
                Format::Pretty => {
                    writeln!(out, "dense   {} bytes ({:.1} GB)", estimate.dense_bytes, estimate.dense_bytes as f64 / 1e9)?;
                    writeln!(out, "sparse  {} bytes ({:.1} GB)", estimate.sparse_bytes, estimate.sparse_bytes as f64 / 1e9)?;
                }
            }
        }
        Command::Serve { host, port } => {
            let mut config = config;
            if let Some(h) = host {
                config.host = h;
            }
            if let Some(p) = port {
                config.port = p;
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(funnel_server::serve(config))?;
        }
    }
    Ok(())
}
