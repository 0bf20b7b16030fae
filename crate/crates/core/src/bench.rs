//! Synthetic corpora and the strategy benchmark.
//!
//! A corpus spec (TOML) drives a seeded generator producing headers and
//! modulemaps; the corpus is compiled into a release with a precompiled
//! header and both index flavors, and each strategy then runs a workload
//! script in a fresh session.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::declang::{Builtin, DeclKind, Field, TypeRef};
use crate::gmi::{Flavor, INDEX_FILE};
use crate::interp::{run_script, InterpError};
use crate::loader::{CostModel, LoadError, LoadStats, Session, SessionConfig, Strategy};
use crate::modulemap::SearchPaths;
use crate::release::{
    compile_release, load_map, read_modulemaps, write_index, write_pch, ReleaseError,
};

pub const FRAMEWORK_MODULEMAP: &str = "framework.modulemap";
pub const EXTERNAL_MODULEMAP: &str = "external.modulemap";
pub const LEXICAL_INDEX_FILE: &str = "modules.lexical.gmi";

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("corpus spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Release(#[from] ReleaseError),
    #[error("{strategy}: {source}")]
    Load {
        strategy: Strategy,
        #[source]
        source: LoadError,
    },
    #[error("{strategy}: {source}")]
    Workload {
        strategy: Strategy,
        #[source]
        source: InterpError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no rows to report")]
    EmptyReport,
    #[error("unknown report format `{0}` (expected csv or markdown)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    /// Scenario name used in reports.
    #[serde(default)]
    pub name: String,
    pub n_modules: usize,
    pub defs_per_module: usize,
    /// How many following modules forward-declare each struct.
    pub fwd_fanout: usize,
    /// Probability that a declaration is duplicated, identically, into the
    /// next module.
    pub dup_fraction: f64,
    /// Expected number of imports per module.
    pub import_density: f64,
    pub seed: u64,
    /// The first `framework_modules` modules go to `framework.modulemap`.
    #[serde(default)]
    pub framework_modules: usize,
    /// Zero-pads module and identifier numbers to this many digits.
    #[serde(default)]
    pub id_width: usize,
}

impl CorpusSpec {
    pub fn parse(text: &str) -> Result<CorpusSpec, BenchError> {
        let spec: CorpusSpec = toml::from_str(text).map_err(|e| BenchError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<CorpusSpec, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.display().to_string(),
            source,
        })?;
        CorpusSpec::parse(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Spec(m.to_string()));
        if self.n_modules == 0 {
            return bad("n_modules must be positive");
        }
        if self.defs_per_module == 0 {
            return bad("defs_per_module must be positive");
        }
        if self.fwd_fanout >= self.n_modules {
            return bad("fwd_fanout must be less than n_modules");
        }
        if !(0.0..=1.0).contains(&self.dup_fraction) {
            return bad("dup_fraction must lie in [0, 1]");
        }
        if self.import_density.is_nan() || self.import_density < 0.0 {
            return bad("import_density must be non-negative");
        }
        if self.framework_modules > self.n_modules {
            return bad("framework_modules exceeds n_modules");
        }
        Ok(())
    }

    pub fn module_name(&self, m: usize) -> String {
        format!("M{m:0w$}", w = self.id_width)
    }

    pub fn ident(&self, m: usize, k: usize) -> String {
        format!("S{m:0w$}_{k:0w$}", w = self.id_width)
    }

    pub fn header_path(&self, m: usize) -> String {
        format!("{}.dh", self.module_name(m))
    }
}

const FIELD_BUILTINS: [Builtin; 4] = Builtin::ALL;

fn decl_kind(spec: &CorpusSpec, rng: &mut ChaCha8Rng, m: usize, k: usize) -> DeclKind {
    let head = TypeRef::named(spec.ident(m, 0));
    match k % 6 {
        0..=2 => {
            let n_fields = 1 + k % 3;
            let fields = (0..n_fields)
                .map(|i| {
                    let ty = match i {
                        0 => {
                            let tm = rng.gen_range(0..spec.n_modules);
                            let tk = rng.gen_range(0..spec.defs_per_module);
                            TypeRef::named(spec.ident(tm, tk)).ptr()
                        }
                        1 if k > 0 => head.clone(),
                        _ => {
                            TypeRef::builtin(FIELD_BUILTINS[rng.gen_range(0..FIELD_BUILTINS.len())])
                        }
                    };
                    Field {
                        name: format!("f{i}"),
                        ty,
                    }
                })
                .collect();
            DeclKind::StructDef { fields }
        }
        3 => DeclKind::EnumDef {
            enumerators: vec!["E0".into(), "E1".into(), "E2".into()],
        },
        4 => DeclKind::Alias { target: head },
        _ => DeclKind::FuncDecl {
            params: vec![head.ptr(), TypeRef::builtin(Builtin::I32)],
            ret: TypeRef::builtin(Builtin::I32),
        },
    }
}

fn render_item(out: &mut String, name: &str, kind: &DeclKind) {
    let decl = crate::declang::Decl::new(name, kind.clone(), Default::default());
    let _ = writeln!(out, "{decl}");
}

/// Writes the headers and the two modulemaps of `spec` into `dir`.
/// Deterministic in the spec.
pub fn generate_corpus(spec: &CorpusSpec, dir: &Path) -> Result<(), BenchError> {
    spec.validate()?;
    let n = spec.n_modules;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut includes: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut bodies: Vec<String> = vec![String::new(); n];
    let mut extras: Vec<String> = vec![String::new(); n];
    let mut fwds: Vec<Vec<String>> = vec![Vec::new(); n];
    for (m, imports) in includes.iter_mut().enumerate().skip(1) {
        let p = (spec.import_density / m as f64).min(1.0);
        for j in 0..m {
            if rng.gen_bool(p) {
                imports.push(j);
            }
        }
    }
    for m in 0..n {
        for k in 0..spec.defs_per_module {
            let name = spec.ident(m, k);
            let kind = decl_kind(spec, &mut rng, m, k);
            render_item(&mut bodies[m], &name, &kind);
            if n >= 2 && rng.gen_bool(spec.dup_fraction) {
                render_item(&mut extras[(m + 1) % n], &name, &kind);
            }
            if k % 6 <= 2 {
                for f in 1..=spec.fwd_fanout {
                    fwds[(m + f) % n].push(name.clone());
                }
            }
        }
    }
    let write = |path: PathBuf, text: &str| {
        std::fs::write(&path, text).map_err(|source| BenchError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    std::fs::create_dir_all(dir).map_err(|source| BenchError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for m in 0..n {
        let mut text = String::new();
        for &j in &includes[m] {
            let _ = writeln!(text, "include \"{}\";", spec.header_path(j));
        }
        for f in &fwds[m] {
            let _ = writeln!(text, "struct {f};");
        }
        text.push_str(&bodies[m]);
        text.push_str(&extras[m]);
        write(dir.join(spec.header_path(m)), &text)?;
    }
    let modulemap = |range: std::ops::Range<usize>| {
        range
            .map(|m| {
                format!(
                    "module {} {{ header \"{}\" }}\n",
                    spec.module_name(m),
                    spec.header_path(m)
                )
            })
            .collect::<String>()
    };
    write(
        dir.join(FRAMEWORK_MODULEMAP),
        &modulemap(0..spec.framework_modules),
    )?;
    write(
        dir.join(EXTERNAL_MODULEMAP),
        &modulemap(spec.framework_modules..n),
    )?;
    Ok(())
}

/// Generates `spec` into `<dir>/src` and builds a complete release in
/// `<dir>/release`: modules, precompiled header, semantic index
/// (`modules.gmi`) and lexical index (`modules.lexical.gmi`). Returns the
/// release directory.
pub fn build_corpus(spec: &CorpusSpec, dir: &Path) -> Result<PathBuf, BenchError> {
    let src = dir.join("src");
    let release = dir.join("release");
    generate_corpus(spec, &src)?;
    let map = read_modulemaps(&[src.join(FRAMEWORK_MODULEMAP), src.join(EXTERNAL_MODULEMAP)])?;
    compile_release(&map, None, &release)?;
    write_pch(&release)?;
    write_index(&release, Flavor::Semantic, &[], &release.join(INDEX_FILE))?;
    write_index(
        &release,
        Flavor::Lexical,
        &[],
        &release.join(LEXICAL_INDEX_FILE),
    )?;
    Ok(release)
}

/// The session configuration a strategy uses against a built release.
pub fn session_config(
    release: &Path,
    strategy: Strategy,
    cost: CostModel,
) -> Result<SessionConfig, BenchError> {
    let map = load_map(release)?;
    let mut config = SessionConfig::new(map, SearchPaths::release(release), strategy);
    config.cost = cost;
    if strategy == Strategy::LexicalGmi {
        config.index_path = Some(release.join(LEXICAL_INDEX_FILE));
    }
    Ok(config)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRow {
    pub scenario: String,
    pub strategy: Strategy,
    pub startup: LoadStats,
    pub workload: LoadStats,
}

impl BenchRow {
    pub fn total_ticks(&self) -> u64 {
        self.startup.ticks + self.workload.ticks
    }

    pub fn sim_memory_bytes(&self) -> u64 {
        self.startup.sim_memory_bytes + self.workload.sim_memory_bytes
    }

    pub fn total_modules(&self) -> usize {
        self.startup.module_count() + self.workload.module_count()
    }
}

/// Runs `workload` once per strategy, each in a fresh session over the
/// release, in parallel.
pub fn run_benchmark(
    scenario: &str,
    release: &Path,
    strategies: &[Strategy],
    workload: &str,
    cost: CostModel,
) -> Result<Vec<BenchRow>, BenchError> {
    let run = |strategy: Strategy| -> Result<BenchRow, BenchError> {
        let config = session_config(release, strategy, cost)?;
        let mut session =
            Session::open(config).map_err(|source| BenchError::Load { strategy, source })?;
        let startup = session.stats();
        run_script(&mut session, workload)
            .map_err(|source| BenchError::Workload { strategy, source })?;
        Ok(BenchRow {
            scenario: scenario.to_string(),
            strategy,
            workload: session.stats().since(&startup),
            startup,
        })
    };
    let results: Vec<Result<BenchRow, BenchError>> = std::thread::scope(|s| {
        let handles: Vec<_> = strategies
            .iter()
            .map(|&st| s.spawn(move || run(st)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("benchmark thread panicked"))
            .collect()
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(BenchError::UnknownFormat(s.to_string())),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 12] = [
    "scenario",
    "strategy",
    "startup_modules",
    "startup_bytes",
    "startup_mem",
    "startup_ticks",
    "wl_modules",
    "wl_decls",
    "wl_bytes",
    "wl_mem",
    "wl_ticks",
    "false_positives",
];

fn row_cells(r: &BenchRow) -> [String; 12] {
    [
        r.scenario.clone(),
        r.strategy.to_string(),
        r.startup.module_count().to_string(),
        r.startup.bytes_read.to_string(),
        r.startup.sim_memory_bytes.to_string(),
        r.startup.ticks.to_string(),
        r.workload.module_count().to_string(),
        r.workload.decls_deserialized.to_string(),
        r.workload.bytes_read.to_string(),
        r.workload.sim_memory_bytes.to_string(),
        r.workload.ticks.to_string(),
        r.workload.false_positive_loads.to_string(),
    ]
}

/// Renders rows sorted by scenario, then strategy.
pub fn emit_report(rows: &[BenchRow], format: ReportFormat) -> Result<String, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::EmptyReport);
    }
    let mut sorted: Vec<&BenchRow> = rows.iter().collect();
    sorted.sort_by(|a, b| (&a.scenario, a.strategy).cmp(&(&b.scenario, b.strategy)));
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&REPORT_COLUMNS.join(","));
            out.push('\n');
            for r in sorted {
                out.push_str(&row_cells(r).join(","));
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {} |", REPORT_COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(REPORT_COLUMNS.len()));
            for r in sorted {
                let _ = writeln!(out, "| {} |", row_cells(r).join(" | "));
            }
        }
    }
    Ok(out)
}
