use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use modix::bench::{build_corpus, emit_report, run_benchmark, CorpusSpec, ReportFormat};
use modix::gmi::{validate_index, GlobalIndex, INDEX_FILE};
use modix::interp::{repl, run_script, EvalOutcome, FailReason};
use modix::release::{compile_release, load_map, read_modulemaps, write_index, write_pch};
use modix::{CostModel, Flavor, Overlay, SearchPaths, Session, SessionConfig, Strategy};

/// Module files, global module indexes and lazy name lookup.
#[derive(Debug, Parser)]
#[command(name = "modix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile modulemaps and their headers into a release directory.
    Compile {
        #[arg(required = true)]
        modulemaps: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// File of `VIRTUAL -> REAL` path mappings applied to header paths.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Merge every module of a release into `__pch__.pcm`.
    Pch { dir: PathBuf },
    /// Build a global module index over a release.
    Index(IndexArgs),
    /// Check a global module index against the release's module files.
    Validate {
        dir: PathBuf,
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Run a script, or a REPL when no script is given.
    Run(RunArgs),
    /// Generate a corpus and compare strategies on a workload.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct IndexArgs {
    dir: PathBuf,
    #[arg(long, conflicts_with = "lexical", required_unless_present = "lexical")]
    semantic: bool,
    #[arg(long)]
    lexical: bool,
    /// Leave a module out of the index; sessions load it directly.
    #[arg(long)]
    exclude: Vec<String>,
    /// Defaults to `<dir>/modules.gmi`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_strategy)]
    strategy: Strategy,
    /// Release directory.
    #[arg(long, default_value = ".")]
    dir: PathBuf,
    /// Directory of locally rebuilt modules, searched before the release.
    #[arg(long)]
    local: Vec<PathBuf>,
    /// Cost model override, `key=value`.
    #[arg(long, value_parser = parse_cost)]
    cost: Vec<(String, u64)>,
    #[arg(long)]
    index: Option<PathBuf>,
    /// Open the session even if the index is stale.
    #[arg(long)]
    allow_stale: bool,
    script: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    workload: PathBuf,
    #[arg(long, value_parser = parse_strategy, value_delimiter = ',', default_value = "preload-all,pch,textual,lexical-gmi,semantic-gmi")]
    strategies: Vec<Strategy>,
    #[arg(long, value_parser = parse_format, default_value = "csv")]
    format: ReportFormat,
    /// Where to build the corpus; a temporary directory by default.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_cost)]
    cost: Vec<(String, u64)>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
        .map_err(|e: modix::loader::LoadError| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
        .map_err(|e: modix::bench::BenchError| e.to_string())
}

fn parse_cost(s: &str) -> Result<(String, u64), String> {
    let mut probe = CostModel::default();
    probe.apply(s).map_err(|e| e.to_string())?;
    let (k, v) = s.split_once('=').expect("validated");
    Ok((k.trim().to_string(), v.trim().parse().expect("validated")))
}

fn cost_model(overrides: &[(String, u64)]) -> Result<CostModel> {
    let mut cost = CostModel::default();
    for (k, v) in overrides {
        cost.set(k, *v)?;
    }
    Ok(cost)
}

fn compile(modulemaps: &[PathBuf], out: &Path, overlay: Option<&Path>) -> Result<()> {
    let overlay = overlay
        .map(|p| -> Result<Overlay> {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(Overlay::parse(&text)?)
        })
        .transpose()?;
    let map = read_modulemaps(modulemaps)?;
    compile_release(&map, overlay.as_ref(), out)?;
    println!("compiled {} modules into {}", map.len(), out.display());
    Ok(())
}

fn index(args: &IndexArgs) -> Result<()> {
    let flavor = if args.lexical {
        Flavor::Lexical
    } else {
        Flavor::Semantic
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.dir.join(INDEX_FILE));
    let idx = write_index(&args.dir, flavor, &args.exclude, &out)?;
    println!(
        "{flavor} index over {} modules, {} identifiers: {}",
        idx.module_table.len(),
        idx.entries.len(),
        out.display()
    );
    Ok(())
}

/// Prints the report and returns whether the index is fresh.
fn validate(dir: &Path, index: Option<&Path>) -> Result<bool> {
    let path = index
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(INDEX_FILE));
    let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    let idx = GlobalIndex::from_bytes(&bytes).with_context(|| path.display().to_string())?;
    let report = validate_index(&idx, dir);
    for (module, status) in &report.modules {
        println!("{module} {status}");
    }
    Ok(report.is_fresh())
}

/// Returns whether an ODR violation was reported.
fn run(args: &RunArgs) -> Result<bool> {
    let map = load_map(&args.dir)?;
    let paths = SearchPaths::new(args.local.clone(), args.dir.clone())?;
    let config = SessionConfig {
        map,
        paths,
        strategy: args.strategy,
        cost: cost_model(&args.cost)?,
        index_path: args.index.clone(),
        allow_stale: args.allow_stale,
    };
    let mut session = Session::open(config)?;
    let Some(script) = &args.script else {
        repl(&mut session, io::stdin().lock(), io::stdout())?;
        return Ok(false);
    };
    let source =
        std::fs::read_to_string(script).with_context(|| format!("reading {}", script.display()))?;
    let results =
        run_script(&mut session, &source).with_context(|| script.display().to_string())?;
    let mut out = io::stdout().lock();
    let mut odr = false;
    for r in &results {
        writeln!(out, "{r}")?;
        odr |= matches!(r.outcome, EvalOutcome::Fail(FailReason::OdrViolation(_)));
    }
    Ok(odr)
}

fn bench(args: &BenchArgs) -> Result<()> {
    let spec = CorpusSpec::from_file(&args.spec)?;
    let workload = std::fs::read_to_string(&args.workload)
        .with_context(|| format!("reading {}", args.workload.display()))?;
    let tmp;
    let root = match &args.out {
        Some(p) => p.clone(),
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path().to_path_buf()
        }
    };
    let release = build_corpus(&spec, &root)?;
    let scenario = if spec.name.is_empty() {
        args.spec
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
    } else {
        spec.name.clone()
    };
    let rows = run_benchmark(
        &scenario,
        &release,
        &args.strategies,
        &workload,
        cost_model(&args.cost)?,
    )?;
    print!("{}", emit_report(&rows, args.format)?);
    Ok(())
}

/// Joins the cause chain, skipping causes a message already includes.
fn error_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Compile {
            modulemaps,
            out,
            overlay,
        } => compile(modulemaps, out, overlay.as_deref()).map(|_| true),
        Command::Pch { dir } => write_pch(dir)
            .map(|p| println!("wrote {}", p.display()))
            .map(|_| true)
            .map_err(Into::into),
        Command::Index(args) => index(args).map(|_| true),
        Command::Validate { dir, index } => validate(dir, index.as_deref()),
        Command::Run(args) => run(args).map(|odr| !odr),
        Command::Bench(args) => bench(args).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            ExitCode::from(2)
        }
    }
}
