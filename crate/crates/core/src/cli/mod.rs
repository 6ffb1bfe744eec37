//! Command-line front-end. Every subcommand maps onto one library call; the
//! binary only forwards `std::env` here.

pub mod config;
pub mod pipeline;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::{ConfigError, ConfigIssue, PipelineConfig, SNAPSHOT_FILE};
pub use pipeline::{
    run_dedup, run_filter, run_mix, run_pack, run_pipeline, run_translate, PipelineError, PipelineOptions,
    PipelineReport, Stage, StageError, StopPoint, TranslateDeps, FAILED_MARKER,
};

use crate::corpus::compute_stats;
use crate::corpus::jsonl::{append_json_line, read_all};
use crate::lang::Lang;
use crate::pack::{unpack_inspect, PackReader};
use crate::probe::{probe_prior, write_samples};
use crate::segment::Chunker;
use crate::translate::RunMode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_STAGE_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "twp", version, about = "Build balanced multilingual pretraining corpora")]
pub struct Cli {
    /// TOML configuration file; `TWP_SECTION__KEY` variables override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Global seed every stage seed is derived from.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Abort on malformed input records.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Continue an interrupted run.
    #[arg(long, global = true, conflicts_with = "restart")]
    pub resume: bool,
    /// Discard a previous run and start over.
    #[arg(long, global = true)]
    pub restart: bool,
    /// Verify dedup candidates with exact Jaccard.
    #[arg(long, global = true)]
    pub exact: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-language token totals, document counts and average lengths.
    Stats {
        /// Input JSONL corpus
        input: PathBuf,
        /// Also write stats.json into this directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split documents into sentence-aligned chunks.
    Segment {
        /// Input JSONL corpus
        input: PathBuf,
        /// Output directory (chunks.jsonl)
        #[arg(long)]
        out: PathBuf,
    },
    /// Translate a corpus into the target languages.
    Translate {
        /// English JSONL corpus
        input: PathBuf,
        /// Output directory (one JSONL per target, journal, manifest)
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated targets; defaults to the configured list.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<Lang>,
    },
    /// Apply the quality rules.
    Filter {
        /// Input JSONL corpus
        input: PathBuf,
        /// Output directory (kept.jsonl, rejected.jsonl, manifest)
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove near-duplicates.
    Dedup {
        /// Input JSONL corpus
        input: PathBuf,
        /// Output directory (kept corpus and cluster manifest)
        #[arg(long)]
        out: PathBuf,
    },
    /// Compose a configured mixture stage.
    Mix {
        /// Name of a `[[mix.stages]]` entry in the configuration
        #[arg(long)]
        stage: String,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Pack documents into fixed-length EOS-separated sequences.
    Pack {
        /// Input JSONL corpus
        input: PathBuf,
        /// Output directory (packed.bin and manifest)
        #[arg(long)]
        out: PathBuf,
        /// Sequence length; defaults to the configured value
        #[arg(long)]
        seq_len: Option<u32>,
    },
    /// Print the header and first sequences of a packed file.
    Inspect {
        /// Packed binary file
        file: PathBuf,
        /// Number of sequences to print
        #[arg(short, default_value_t = 1)]
        n: usize,
        /// Fail unless the file was packed at this length.
        #[arg(long)]
        seq_len: Option<u32>,
    },
    /// Sample unconditioned generations and report their languages.
    Probe {
        /// Output directory (report and samples)
        #[arg(long)]
        out: PathBuf,
        /// Number of generations; defaults to the configured value
        #[arg(long)]
        samples: Option<usize>,
        /// Also write the language-ID model here.
        #[arg(long)]
        save_model: Option<PathBuf>,
    },
    /// filter → dedup → translate (if enabled) → mix → pack.
    Pipeline {
        /// Input JSONL corpus
        input: PathBuf,
        /// Run directory, one subdirectory per stage
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Stage { dir: Option<PathBuf>, message: String },
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn stage_failure(dir: &Path) -> impl FnOnce(StageError) -> Failure + '_ {
    move |e| match e {
        StageError::Config(c) => c.into(),
        e => Failure::Stage { dir: Some(dir.to_path_buf()), message: e.to_string() },
    }
}

/// Writes a line to stdout; a closed pipe (`twp … | head`) is not an error.
fn out_line(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_json(value: &impl Serialize) {
    out_line(&serde_json::to_string_pretty(value).expect("serializable"));
}

fn load_config(cli: &Cli, env: Vec<(String, String)>) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), env)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    cfg.strict |= cli.strict;
    cfg.dedup.exact |= cli.exact;
    cfg.validate()?;
    Ok(cfg)
}

fn run_mode(cli: &Cli) -> RunMode {
    if cli.restart {
        RunMode::Restart
    } else if cli.resume {
        RunMode::Resume
    } else {
        RunMode::Fresh
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I, env: Vec<(String, String)>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let cfg = match load_config(&cli, env) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    if cfg.workers > 0 {
        // fails only if a pool already exists, which is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global();
    }
    match execute(&cli, &cfg) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("{msg}");
            EXIT_USAGE
        }
        Err(Failure::Stage { dir, message }) => {
            eprintln!("error: {message}");
            if let Some(d) = dir.filter(|d| d.is_dir()) {
                let _ = fs::write(d.join(FAILED_MARKER), format!("{message}\n"));
            }
            EXIT_STAGE_FAILURE
        }
    }
}

fn prepare_out(cfg: &PipelineConfig, dir: &Path) -> Result<(), Failure> {
    cfg.write_snapshot(dir).map_err(|e| Failure::Stage { dir: None, message: format!("{}: {e}", dir.display()) })?;
    let _ = fs::remove_file(dir.join(FAILED_MARKER));
    Ok(())
}

#[derive(Serialize)]
struct ChunkLine<'a> {
    doc_id: &'a str,
    chunk_index: usize,
    token_count: usize,
    oversized: bool,
    sentences: Vec<&'a str>,
    text: &'a str,
}

fn execute(cli: &Cli, cfg: &PipelineConfig) -> Result<(), Failure> {
    match &cli.command {
        Command::Stats { input, out } => {
            let counter = cfg.token_counter()?;
            let (docs, errors) =
                read_all(input, cfg.strict).map_err(|e| Failure::Stage { dir: out.clone(), message: e.to_string() })?;
            for e in &errors {
                log::warn!("{}: {e}", input.display());
            }
            let stats = compute_stats(docs, &counter);
            if let Some(dir) = out {
                prepare_out(cfg, dir)?;
                pipeline::write_json(&dir.join("stats.json"), &stats).map_err(stage_failure(dir))?;
            }
            print_json(&stats);
        }
        Command::Segment { input, out } => {
            prepare_out(cfg, out)?;
            let counter = cfg.token_counter()?;
            let segmenter = cfg.segmenter()?;
            let chunker = Chunker::new(&segmenter, &counter, cfg.chunking);
            let fail = stage_failure(out);
            let (docs, _) = read_all(input, cfg.strict).map_err(|e| fail(e.into()))?;
            let path = out.join("chunks.jsonl");
            let mut w =
                std::io::BufWriter::new(fs::File::create(&path).map_err(|e| Failure::Stage {
                    dir: Some(out.clone()),
                    message: format!("{}: {e}", path.display()),
                })?);
            let mut total = 0;
            for d in &docs {
                for c in chunker.chunk(&d.text, d.lang) {
                    let line = ChunkLine {
                        doc_id: &d.id,
                        chunk_index: c.index,
                        token_count: c.token_count,
                        oversized: c.is_oversized(cfg.chunking.limit),
                        sentences: c.sentences.iter().map(|s| s.text).collect(),
                        text: c.text,
                    };
                    append_json_line(&mut w, &line)
                        .map_err(|e| Failure::Stage { dir: Some(out.clone()), message: e.to_string() })?;
                    total += 1;
                }
            }
            std::io::Write::flush(&mut w)
                .map_err(|e| Failure::Stage { dir: Some(out.clone()), message: e.to_string() })?;
            out_line(&format!("{} documents, {total} chunks", docs.len()));
        }
        Command::Translate { input, out, targets } => {
            let mut cfg = cfg.clone();
            if !targets.is_empty() {
                cfg.translate.targets = targets.clone();
                cfg.validate()?;
            }
            prepare_out(&cfg, out)?;
            let counter = cfg.token_counter()?;
            let segmenter = cfg.segmenter()?;
            let backend = cfg.backend();
            let deps = TranslateDeps { backend: backend.as_ref(), counter: &counter, segmenter: &segmenter };
            let summary = run_translate(&cfg, &deps, input, out, run_mode(cli), None).map_err(|e| match e {
                StageError::Translate(
                    t @ (crate::translate::TranslateError::ExistingRun(_)
                    | crate::translate::TranslateError::JournalCorrupt { .. }
                    | crate::translate::TranslateError::JournalMismatch { .. }),
                ) => Failure::Usage(format!("{t}; pass --resume or --restart")),
                e => stage_failure(out)(e),
            })?;
            print_json(&summary.manifest);
        }
        Command::Filter { input, out } => {
            prepare_out(cfg, out)?;
            print_json(&run_filter(cfg, input, out).map_err(stage_failure(out))?);
        }
        Command::Dedup { input, out } => {
            prepare_out(cfg, out)?;
            print_json(&run_dedup(cfg, input, out).map_err(stage_failure(out))?);
        }
        Command::Mix { stage, out } => {
            prepare_out(cfg, out)?;
            let counter = cfg.token_counter()?;
            print_json(&run_mix(cfg, &counter, stage, out).map_err(stage_failure(out))?);
        }
        Command::Pack { input, out, seq_len } => {
            let mut cfg = cfg.clone();
            if let Some(l) = seq_len {
                cfg.pack.seq_len = *l;
                cfg.validate()?;
            }
            prepare_out(&cfg, out)?;
            let counter = cfg.token_counter()?;
            print_json(&run_pack(&cfg, &counter, input, out).map_err(stage_failure(out))?);
        }
        Command::Inspect { file, n, seq_len } => {
            let fail = |e: crate::pack::PackError| Failure::Stage { dir: None, message: e.to_string() };
            let header = *PackReader::open(file).map_err(fail)?.header();
            print_json(&header);
            for seq in unpack_inspect(file, *n, *seq_len).map_err(fail)? {
                out_line(&serde_json::to_string(&seq).expect("serializable"));
            }
        }
        Command::Probe { out, samples, save_model } => {
            let mut cfg = cfg.clone();
            if let Some(n) = samples {
                cfg.probe.samples = *n;
                cfg.validate()?;
            }
            prepare_out(&cfg, out)?;
            let model = cfg.langid_model()?;
            if let Some(p) = save_model {
                model.save(p).map_err(|e| Failure::Stage { dir: Some(out.clone()), message: e.to_string() })?;
            }
            let backend = cfg.backend();
            let (report, samples) = probe_prior(backend.as_ref(), &model, &cfg.probe_params(), &cfg.backend.retry);
            let io_fail = |e: std::io::Error| Failure::Stage { dir: Some(out.clone()), message: e.to_string() };
            pipeline::write_json(&out.join("report.json"), &report).map_err(stage_failure(out))?;
            let mut w = std::io::BufWriter::new(fs::File::create(out.join("samples.jsonl")).map_err(io_fail)?);
            write_samples(&mut w, &samples).map_err(io_fail)?;
            print_json(&report);
        }
        Command::Pipeline { input, out } => {
            let backend = cfg.backend();
            let opts = PipelineOptions { mode: run_mode(cli), stop: None };
            match run_pipeline(cfg, backend.as_ref(), input, out, &opts) {
                Ok(report) => print_json(&report.pack),
                Err(e) if e.exit_code() == EXIT_USAGE => return Err(Failure::Usage(e.to_string())),
                Err(e) => return Err(Failure::Stage { dir: Some(out.clone()), message: e.to_string() }),
            }
        }
    }
    Ok(())
}
