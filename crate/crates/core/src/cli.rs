//! Command-line frontend: `validate`, `pairs`, `mine`, `analyze`, `gen`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::callgraph::{CallbackTable, DEFAULT_MAX_DEPTH};
use crate::config::SeedConfig;
use crate::corpusgen::{generate, GenSpec};
use crate::error::{Error, Result};
use crate::inconsistency::{
    analyze, mine_vocabulary, prepare, render_markdown, AnalysisConfig, PermissionMap, RestrictionList,
};
use crate::ir::{parse_corpus, validate_corpus, Corpus};
use crate::mining::{MiningParams, DEFAULT_MIN_SUPPORT, DEFAULT_SEED_BOOST};

pub const EXIT_CLEAN: u8 = 0;
pub const EXIT_DIAGNOSTICS: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_FINDINGS: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "helper-audit", version, about = "Finds security checks enforced in service helpers but not in the services behind them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and check a corpus document.
    Validate(RunArgs),
    /// List helper/IPC method pairs and IPC methods reachable only directly.
    Pairs(RunArgs),
    /// Mine identity vocabulary from the pairs' call chains.
    Mine(RunArgs),
    /// Run the full pipeline and write a report.
    Analyze(RunArgs),
    /// Generate a labelled synthetic corpus.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Markdown,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON file with defaults for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, env = "HELPER_AUDIT_SEEDS")]
    pub seeds: Option<PathBuf>,
    #[arg(long)]
    pub permissions: Option<PathBuf>,
    #[arg(long)]
    pub restrictions: Option<PathBuf>,
    #[arg(long)]
    pub callbacks: Option<PathBuf>,
    #[arg(long)]
    pub min_support: Option<usize>,
    #[arg(long)]
    pub seed_boost: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub parallel: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Generator spec; the built-in default when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Resolved run settings. Also the schema of `--config` files, where every
/// field is optional and flags take precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_path: Option<PathBuf>,
    pub seed_list_path: Option<PathBuf>,
    pub permission_map_path: Option<PathBuf>,
    pub restriction_list_path: Option<PathBuf>,
    pub callback_table_path: Option<PathBuf>,
    pub min_support: usize,
    pub seed_boost: usize,
    pub max_depth: usize,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub parallel: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_path: None,
            seed_list_path: None,
            permission_map_path: None,
            restriction_list_path: None,
            callback_table_path: None,
            min_support: DEFAULT_MIN_SUPPORT,
            seed_boost: DEFAULT_SEED_BOOST,
            max_depth: DEFAULT_MAX_DEPTH,
            output_path: None,
            format: Format::Json,
            parallel: 1,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct FileConfig {
    corpus_path: Option<PathBuf>,
    seed_list_path: Option<PathBuf>,
    permission_map_path: Option<PathBuf>,
    restriction_list_path: Option<PathBuf>,
    callback_table_path: Option<PathBuf>,
    min_support: Option<usize>,
    seed_boost: Option<usize>,
    max_depth: Option<usize>,
    output_path: Option<PathBuf>,
    format: Option<Format>,
    parallel: Option<usize>,
}

impl RunConfig {
    /// Built-in defaults, then the config file, then flags.
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let file: FileConfig = match &args.config {
            Some(p) => {
                let text = read(p)?;
                serde_json::from_str(&text).map_err(|source| Error::Json { path: p.clone(), source })?
            }
            None => FileConfig::default(),
        };
        let d = RunConfig::default();
        let cfg = RunConfig {
            corpus_path: args.corpus.clone().or(file.corpus_path),
            seed_list_path: args.seeds.clone().or(file.seed_list_path),
            permission_map_path: args.permissions.clone().or(file.permission_map_path),
            restriction_list_path: args.restrictions.clone().or(file.restriction_list_path),
            callback_table_path: args.callbacks.clone().or(file.callback_table_path),
            min_support: args.min_support.or(file.min_support).unwrap_or(d.min_support),
            seed_boost: args.seed_boost.or(file.seed_boost).unwrap_or(d.seed_boost),
            max_depth: args.max_depth.or(file.max_depth).unwrap_or(d.max_depth),
            output_path: args.out.clone().or(file.output_path),
            format: args.format.or(file.format).unwrap_or(d.format),
            parallel: args.parallel.or(file.parallel).unwrap_or(d.parallel),
        };
        if cfg.parallel == 0 {
            return Err(Error::InvalidConfig("--parallel must be at least 1".into()));
        }
        if cfg.max_depth == 0 {
            return Err(Error::InvalidConfig("--max-depth must be at least 1".into()));
        }
        Ok(cfg)
    }

    fn corpus_path(&self) -> Result<&Path> {
        self.corpus_path.as_deref().ok_or_else(|| Error::InvalidConfig("--corpus is required".into()))
    }

    /// Loads every referenced input into an analysis configuration.
    pub fn analysis_config(&self) -> Result<AnalysisConfig> {
        let seeds = match &self.seed_list_path {
            Some(p) => SeedConfig::load(p)?,
            None => SeedConfig::default(),
        };
        let mining = MiningParams { min_support: self.min_support, seed_boost: self.seed_boost, ..MiningParams::default() };
        mining.check()?;
        Ok(AnalysisConfig {
            seeds,
            permissions: self.permission_map_path.as_deref().map(PermissionMap::load).transpose()?.unwrap_or_default(),
            restrictions: self.restriction_list_path.as_deref().map(RestrictionList::load).transpose()?.unwrap_or_default(),
            callbacks: self.callback_table_path.as_deref().map(CallbackTable::load).transpose()?.unwrap_or_default(),
            mining,
            max_depth: self.max_depth,
            parallel: self.parallel,
            ..AnalysisConfig::default()
        })
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })
}

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io { path: path.into(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| Error::Io { path: "<stdout>".into(), source })
        }
    }
}

/// Parses the corpus; `Ok(None)` after printing diagnostics.
fn load_corpus(cfg: &RunConfig) -> Result<Option<Corpus>> {
    let path = cfg.corpus_path()?;
    let corpus = parse_corpus(&read(path)?)?;
    let diags = validate_corpus(&corpus);
    if diags.is_empty() {
        return Ok(Some(corpus));
    }
    for d in &diags {
        eprintln!("{}", diagnostic_line(d));
    }
    Ok(None)
}

fn diagnostic_line(d: &crate::ir::Diagnostic) -> String {
    let mut at = d.class.clone();
    if let Some(m) = &d.method {
        at.push('.');
        at.push_str(m);
    }
    if let Some(s) = d.statement {
        at.push_str(&format!("#{s}"));
    }
    format!("{at}: {:?}: {}", d.kind, d.message)
}

fn cmd_validate(cfg: &RunConfig) -> Result<u8> {
    let corpus = parse_corpus(&read(cfg.corpus_path()?)?)?;
    let diags = validate_corpus(&corpus);
    match cfg.output_path.as_deref() {
        Some(p) => write_atomic(p, &(serde_json::to_string_pretty(&diags).expect("diagnostics serialize") + "\n"))?,
        None => {
            for d in &diags {
                println!("{}", diagnostic_line(d));
            }
        }
    }
    log::info!("{} classes, {} diagnostics", corpus.classes().len(), diags.len());
    Ok(if diags.is_empty() { EXIT_CLEAN } else { EXIT_DIAGNOSTICS })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PairListing<'a> {
    pairs: &'a [crate::service::MethodPair],
    direct_only: &'a [crate::ir::MethodRef],
}

fn cmd_pairs(cfg: &RunConfig) -> Result<u8> {
    let Some(corpus) = load_corpus(cfg)? else { return Ok(EXIT_DIAGNOSTICS) };
    let acfg = cfg.analysis_config()?;
    let prep = prepare(&corpus, &acfg)?;
    let mut pairs = prep.pairing.pairs.clone();
    pairs.sort_by(|a, b| (&a.ipc_signature, &a.helper).cmp(&(&b.ipc_signature, &b.helper)));
    let text = match cfg.format {
        Format::Json => {
            let listing = PairListing { pairs: &pairs, direct_only: &prep.pairing.direct_only };
            serde_json::to_string_pretty(&listing).expect("pairs serialize") + "\n"
        }
        Format::Markdown => {
            let mut s = String::from("| IPC method | helper | service | |\n|---|---|---|---|\n");
            for p in &pairs {
                let flag = if p.native { "native" } else { "" };
                s.push_str(&format!("| `{}` | `{}` | `{}` | {flag} |\n", p.ipc_signature, p.helper, p.service));
            }
            if !prep.pairing.direct_only.is_empty() {
                s.push_str("\nDirect-only IPC methods:\n\n");
                for d in &prep.pairing.direct_only {
                    s.push_str(&format!("- `{d}`\n"));
                }
            }
            s
        }
    };
    emit(cfg.output_path.as_deref(), &text)?;
    Ok(EXIT_CLEAN)
}

fn cmd_mine(cfg: &RunConfig) -> Result<u8> {
    let acfg = cfg.analysis_config()?;
    if acfg.seeds.identity_access.is_empty() && acfg.seeds.identity_enforce.is_empty() {
        return Err(Error::Config("no identity seeds configured".into()));
    }
    let Some(corpus) = load_corpus(cfg)? else { return Ok(EXIT_DIAGNOSTICS) };
    let prep = prepare(&corpus, &acfg)?;
    let vocab = mine_vocabulary(&prep, &acfg)?;
    emit(cfg.output_path.as_deref(), &(serde_json::to_string_pretty(&vocab).expect("vocabulary serializes") + "\n"))?;
    Ok(EXIT_CLEAN)
}

fn cmd_analyze(cfg: &RunConfig) -> Result<u8> {
    let acfg = cfg.analysis_config()?;
    let Some(corpus) = load_corpus(cfg)? else { return Ok(EXIT_DIAGNOSTICS) };
    let report = analyze(&corpus, &acfg)?;
    let json = report.to_json();
    let text = match cfg.format {
        Format::Json => json,
        Format::Markdown => render_markdown(&json)?,
    };
    emit(cfg.output_path.as_deref(), &text)?;
    let summary = report.summary_line();
    if cfg.output_path.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(if report.unsuppressed().next().is_some() { EXIT_FINDINGS } else { EXIT_CLEAN })
}

fn cmd_gen(args: &GenArgs) -> Result<u8> {
    let spec = match &args.spec {
        Some(p) => GenSpec::from_json(&read(p)?)?,
        None => GenSpec::default(),
    };
    let generated = generate(&spec)?;
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io { path: args.out.clone(), source })?;
    for (name, contents) in generated.files() {
        write_atomic(&args.out.join(name), &contents)?;
    }
    let corpus = Corpus::from_document(generated.corpus)?;
    println!("{}", corpus.digest());
    Ok(EXIT_CLEAN)
}

/// Runs one parsed command line and maps errors to exit codes.
pub fn run(cli: Cli) -> ExitCode {
    let outcome = match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Validate(a) | Command::Pairs(a) | Command::Mine(a) | Command::Analyze(a) => {
            RunConfig::resolve(a).and_then(|cfg| match &cli.command {
                Command::Validate(_) => cmd_validate(&cfg),
                Command::Pairs(_) => cmd_pairs(&cfg),
                Command::Mine(_) => cmd_mine(&cfg),
                _ => cmd_analyze(&cfg),
            })
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
