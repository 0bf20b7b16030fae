//! Interpreter sessions: name lookup extended through one of five
//! resolution strategies, with every byte and module load charged to a
//! deterministic cost model.
//!
//! | strategy       | at startup                          | on lookup                                   |
//! |----------------|-------------------------------------|---------------------------------------------|
//! | `preload-all`  | every module, every declaration     | merge what is already resident              |
//! | `pch`          | the merged `__pch__` table          | decode the one blob                         |
//! | `textual`      | the rootmap text                    | parse the mapped header and its includes    |
//! | `lexical-gmi`  | the index                           | load every module the index lists           |
//! | `semantic-gmi` | the index                           | load only the defining module, if any       |
//!
//! Loading a module always loads its transitive imports first and charges
//! the per-module overhead exactly once per session.

mod cost;
mod rootmap;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use cost::{CostModel, LoadStats};
pub use rootmap::{Rootmap, ROOTMAP_FILE};

use crate::declang::{parse_header, Decl, DeclangError, Need};
use crate::gmi::{validate_index, Flavor, GlobalIndex, GmiError, Staleness, INDEX_FILE};
use crate::modfile::{
    merge_entities, Entity, IdentFlags, ModfileError, ModuleFile, SourcedDecl, PCH_NAME,
};
use crate::modulemap::{module_file, resolve_module_path, ModuleMap, PathOrigin, SearchPaths};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("module `{0}` not found")]
    ModuleNotFound(String),
    #[error("module `{module}`: {source}")]
    CorruptModule {
        module: String,
        #[source]
        source: ModfileError,
    },
    #[error(transparent)]
    Odr(ModfileError),
    #[error("global module index is stale: {}", .0.join(", "))]
    IndexStale(Vec<String>),
    #[error("no global module index at {0}")]
    MissingIndex(PathBuf),
    #[error("no precompiled header at {0}")]
    MissingPch(PathBuf),
    #[error("no rootmap at {0}")]
    MissingRootmap(PathBuf),
    #[error(transparent)]
    Index(#[from] GmiError),
    #[error("{path}: {source}")]
    Header {
        path: String,
        #[source]
        source: DeclangError,
    },
    #[error("rootmap line {line}: {message}")]
    Rootmap { line: usize, message: String },
    #[error("import cycle through module `{0}`")]
    ImportCycle(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    CostSetting(String),
    #[error(
        "unknown strategy `{0}` (expected preload-all, pch, textual, lexical-gmi or semantic-gmi)"
    )]
    UnknownStrategy(String),
}

fn read_file(path: &Path) -> Result<Vec<u8>, LoadError> {
    std::fs::read(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    PreloadAll,
    Pch,
    Textual,
    LexicalGmi,
    SemanticGmi,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::PreloadAll,
        Strategy::Pch,
        Strategy::Textual,
        Strategy::LexicalGmi,
        Strategy::SemanticGmi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::PreloadAll => "preload-all",
            Strategy::Pch => "pch",
            Strategy::Textual => "textual",
            Strategy::LexicalGmi => "lexical-gmi",
            Strategy::SemanticGmi => "semantic-gmi",
        }
    }

    pub fn uses_index(self) -> bool {
        matches!(self, Strategy::LexicalGmi | Strategy::SemanticGmi)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = LoadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == norm || st.name().replace('-', "") == norm)
            .ok_or_else(|| LoadError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Resolved(Box<Entity>),
    /// The name is known only through forward declarations and the use does
    /// not need more; nothing was loaded to establish this.
    ImplicitForward,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub identifier: String,
    pub need: Need,
    pub outcome: Outcome,
}

impl Resolution {
    pub fn is_success(&self) -> bool {
        !matches!(self.outcome, Outcome::NotFound)
    }

    pub fn entity(&self) -> Option<&Entity> {
        match &self.outcome {
            Outcome::Resolved(e) => Some(e),
            _ => None,
        }
    }

    /// Strategy equivalence: NotFound matches NotFound; definition lookups
    /// match on entity payload bytes; forward-ok lookups match on success.
    pub fn equivalent(&self, other: &Resolution) -> bool {
        if self.identifier != other.identifier || self.need != other.need {
            return false;
        }
        match (&self.outcome, &other.outcome) {
            (Outcome::NotFound, Outcome::NotFound) => true,
            (Outcome::NotFound, _) | (_, Outcome::NotFound) => false,
            _ if self.need == Need::ForwardOk => true,
            (Outcome::Resolved(a), Outcome::Resolved(b)) => {
                a.canonical_payload == b.canonical_payload
            }
            _ => false,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}): ", self.identifier, self.need)?;
        match &self.outcome {
            Outcome::Resolved(e) => write!(f, "{:?} from {}", e.kind, e.credited_module()),
            Outcome::ImplicitForward => f.write_str("implicit forward"),
            Outcome::NotFound => f.write_str("not found"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub map: ModuleMap,
    pub paths: SearchPaths,
    pub strategy: Strategy,
    pub cost: CostModel,
    /// Defaults to `<release_root>/modules.gmi` for the index strategies.
    pub index_path: Option<PathBuf>,
    pub allow_stale: bool,
}

impl SessionConfig {
    pub fn new(map: ModuleMap, paths: SearchPaths, strategy: Strategy) -> Self {
        SessionConfig {
            map,
            paths,
            strategy,
            cost: CostModel::default(),
            index_path: None,
            allow_stale: false,
        }
    }
}

#[derive(Debug)]
struct Resident {
    id: u32,
    file: ModuleFile,
    decls: HashMap<String, Decl>,
    origin: PathOrigin,
}

/// Decodes `name` from a resident module once, charging the blob.
fn resident_decl(
    module: &mut Resident,
    stats: &mut LoadStats,
    cost: &CostModel,
    name: &str,
) -> Result<Option<Decl>, LoadError> {
    if let Some(d) = module.decls.get(name) {
        return Ok(Some(d.clone()));
    }
    if module.file.find(name).is_none() {
        return Ok(None);
    }
    let (decl, n) =
        module
            .file
            .deserialize_decl(name)
            .map_err(|source| LoadError::CorruptModule {
                module: module.file.name().to_string(),
                source,
            })?;
    stats.decls_deserialized += 1;
    stats.bytes_read += n;
    stats.sim_memory_bytes += n;
    stats.ticks += cost.ticks_for(n);
    module.decls.insert(name.to_string(), decl.clone());
    Ok(Some(decl))
}

/// A running interpreter session. Single-threaded by contract.
#[derive(Debug)]
pub struct Session {
    map: ModuleMap,
    paths: SearchPaths,
    strategy: Strategy,
    cost: CostModel,
    index: Option<GlobalIndex>,
    /// Modules consulted directly instead of through the index: excluded
    /// from it, or shadowed by a local checkout. In module_id order.
    direct: Vec<String>,
    pch: Option<Resident>,
    rootmap: Option<Rootmap>,
    parsed_headers: HashSet<String>,
    header_decls: HashMap<String, Vec<SourcedDecl>>,
    modules: HashMap<String, Resident>,
    loading: Vec<String>,
    cache: HashMap<(String, Need), Resolution>,
    stats: LoadStats,
    history: Vec<Resolution>,
}

impl Session {
    pub fn open(config: SessionConfig) -> Result<Session, LoadError> {
        let SessionConfig {
            map,
            paths,
            strategy,
            cost,
            index_path,
            allow_stale,
        } = config;
        let mut s = Session {
            map,
            paths,
            strategy,
            cost,
            index: None,
            direct: Vec::new(),
            pch: None,
            rootmap: None,
            parsed_headers: HashSet::new(),
            header_decls: HashMap::new(),
            modules: HashMap::new(),
            loading: Vec::new(),
            cache: HashMap::new(),
            stats: LoadStats::default(),
            history: Vec::new(),
        };
        match strategy {
            Strategy::PreloadAll => {
                let names: Vec<String> = s.map.names().map(str::to_string).collect();
                for name in &names {
                    s.load_module(name)?;
                }
                let mut ordered: Vec<&mut Resident> = s.modules.values_mut().collect();
                ordered.sort_by_key(|r| r.id);
                for r in ordered {
                    let entry_names: Vec<String> =
                        r.file.entries().iter().map(|e| e.name.clone()).collect();
                    for n in entry_names {
                        resident_decl(r, &mut s.stats, &s.cost, &n)?;
                    }
                }
            }
            Strategy::Pch => {
                let path = module_file(&s.paths.release_root, PCH_NAME);
                if !path.is_file() {
                    return Err(LoadError::MissingPch(path));
                }
                let bytes = read_file(&path)?;
                let file =
                    ModuleFile::from_bytes(&bytes).map_err(|source| LoadError::CorruptModule {
                        module: PCH_NAME.to_string(),
                        source,
                    })?;
                s.charge_module_summary(file.summary.summary_len);
                s.stats.modules_loaded.push(PCH_NAME.to_string());
                s.pch = Some(Resident {
                    id: 0,
                    file,
                    decls: HashMap::new(),
                    origin: PathOrigin::Release,
                });
            }
            Strategy::Textual => {
                let path = s.paths.release_root.join(ROOTMAP_FILE);
                if !path.is_file() {
                    return Err(LoadError::MissingRootmap(path));
                }
                let bytes = read_file(&path)?;
                let text = String::from_utf8_lossy(&bytes);
                s.rootmap = Some(Rootmap::parse(&text)?);
                s.charge_text(bytes.len() as u64);
            }
            Strategy::LexicalGmi | Strategy::SemanticGmi => {
                let path = index_path.unwrap_or_else(|| s.paths.release_root.join(INDEX_FILE));
                if !path.is_file() {
                    return Err(LoadError::MissingIndex(path));
                }
                let bytes = read_file(&path)?;
                let index = GlobalIndex::from_bytes(&bytes)?;
                if strategy == Strategy::SemanticGmi && index.flavor != Flavor::Semantic {
                    return Err(GmiError::WrongFlavor.into());
                }
                if !allow_stale {
                    let report = validate_index(&index, &s.paths.release_root);
                    let stale: Vec<String> = report
                        .stale()
                        .filter(|(_, st)| *st == Staleness::HashMismatch)
                        .map(|(m, _)| m.to_string())
                        .collect();
                    if !stale.is_empty() {
                        return Err(LoadError::IndexStale(stale));
                    }
                }
                s.charge_text(bytes.len() as u64);
                s.direct = s
                    .map
                    .names()
                    .filter(|m| index.is_excluded(m) || s.paths.local_module(m).is_some())
                    .map(str::to_string)
                    .collect();
                s.index = Some(index);
                for m in s.direct.clone() {
                    s.load_module(&m)?;
                }
            }
        }
        Ok(s)
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn map(&self) -> &ModuleMap {
        &self.map
    }

    pub fn index(&self) -> Option<&GlobalIndex> {
        self.index.as_ref()
    }

    /// Snapshot of the cumulative counters.
    pub fn stats(&self) -> LoadStats {
        self.stats.clone()
    }

    /// Every resolution performed so far, cache hits included.
    pub fn history(&self) -> &[Resolution] {
        &self.history
    }

    /// Modules consulted directly instead of through the index.
    pub fn direct_modules(&self) -> &[String] {
        &self.direct
    }

    pub fn is_loaded(&self, module: &str) -> bool {
        self.modules.contains_key(module)
    }

    /// Where a resident module was read from.
    pub fn module_origin(&self, module: &str) -> Option<PathOrigin> {
        self.modules.get(module).map(|r| r.origin)
    }

    fn charge_module_summary(&mut self, summary_len: u64) {
        let c = self.cost;
        self.stats.bytes_read += summary_len;
        self.stats.sim_memory_bytes += c.per_module_overhead_bytes + summary_len;
        self.stats.ticks += c.per_module_overhead_ticks + c.ticks_for(summary_len);
    }

    fn charge_text(&mut self, len: u64) {
        self.stats.bytes_read += len;
        self.stats.sim_memory_bytes += len;
        self.stats.ticks += self.cost.ticks_for(len);
    }

    /// Loads `name` and, first, its transitive imports. Returns whether the
    /// module was newly loaded.
    pub fn load_module(&mut self, name: &str) -> Result<bool, LoadError> {
        let result = self.load_module_inner(name);
        if result.is_err() {
            self.loading.clear();
        }
        result
    }

    fn load_module_inner(&mut self, name: &str) -> Result<bool, LoadError> {
        if self.modules.contains_key(name) {
            return Ok(false);
        }
        if self.loading.iter().any(|m| m == name) {
            return Err(LoadError::ImportCycle(name.to_string()));
        }
        let id = self
            .map
            .id_of(name)
            .ok_or_else(|| LoadError::ModuleNotFound(name.to_string()))?;
        let (path, origin) = resolve_module_path(&self.paths, name)
            .map_err(|_| LoadError::ModuleNotFound(name.to_string()))?;
        let bytes = read_file(&path)?;
        let corrupt = |source| LoadError::CorruptModule {
            module: name.to_string(),
            source,
        };
        let file = ModuleFile::from_bytes(&bytes).map_err(corrupt)?;
        if file.name() != name {
            return Err(corrupt(ModfileError::CorruptTable(format!(
                "file holds module `{}`",
                file.name()
            ))));
        }
        self.charge_module_summary(file.summary.summary_len);
        self.loading.push(name.to_string());
        for import in file.imports().to_vec() {
            self.load_module_inner(&import)?;
        }
        self.loading.pop();
        self.modules.insert(
            name.to_string(),
            Resident {
                id,
                file,
                decls: HashMap::new(),
                origin,
            },
        );
        self.stats.modules_loaded.push(name.to_string());
        Ok(true)
    }

    /// Looks `identifier` up with the given need.
    pub fn resolve(&mut self, identifier: &str, need: Need) -> Result<Resolution, LoadError> {
        self.stats.lookups += 1;
        let key = (identifier.to_string(), need);
        if let Some(r) = self.cache.get(&key) {
            let r = r.clone();
            self.history.push(r.clone());
            return Ok(r);
        }
        let outcome = match self.strategy {
            Strategy::PreloadAll => self.resolve_resident(identifier, need)?,
            Strategy::Pch => self.resolve_pch(identifier, need)?,
            Strategy::Textual => self.resolve_textual(identifier, need)?,
            Strategy::LexicalGmi => self.resolve_lexical(identifier, need)?,
            Strategy::SemanticGmi => self.resolve_semantic(identifier, need)?,
        };
        let r = Resolution {
            identifier: identifier.to_string(),
            need,
            outcome,
        };
        self.cache.insert(key, r.clone());
        self.history.push(r.clone());
        Ok(r)
    }

    /// Merges the sourced declarations into an outcome and charges a false
    /// positive for every newly loaded candidate not credited with it.
    fn conclude(
        &mut self,
        need: Need,
        sourced: Vec<SourcedDecl>,
        newly_loaded: &[String],
    ) -> Result<Outcome, LoadError> {
        let outcome = if sourced.is_empty() {
            Outcome::NotFound
        } else {
            let e = merge_entities(&sourced).map_err(LoadError::Odr)?;
            if need == Need::Definition && !e.kind.satisfies_definition() {
                Outcome::NotFound
            } else {
                Outcome::Resolved(Box::new(e))
            }
        };
        let credited = match &outcome {
            Outcome::Resolved(e) => Some(e.credited_module().to_string()),
            _ => None,
        };
        self.stats.false_positive_loads += newly_loaded
            .iter()
            .filter(|m| credited.as_deref() != Some(m.as_str()))
            .count() as u64;
        Ok(outcome)
    }

    /// Collects `identifier` from the given resident modules, in id order.
    fn collect_from(
        &mut self,
        modules: &[String],
        identifier: &str,
    ) -> Result<Vec<SourcedDecl>, LoadError> {
        let mut out = Vec::new();
        for m in modules {
            let r = self.modules.get_mut(m).expect("module is resident");
            if let Some(decl) = resident_decl(r, &mut self.stats, &self.cost, identifier)? {
                out.push(SourcedDecl {
                    decl,
                    module: m.clone(),
                    module_id: r.id,
                });
            }
        }
        Ok(out)
    }

    fn resolve_resident(&mut self, identifier: &str, need: Need) -> Result<Outcome, LoadError> {
        let mut holders: Vec<(u32, String)> = self
            .modules
            .iter()
            .filter(|(_, r)| r.file.find(identifier).is_some())
            .map(|(n, r)| (r.id, n.clone()))
            .collect();
        holders.sort();
        let holders: Vec<String> = holders.into_iter().map(|(_, n)| n).collect();
        let sourced = self.collect_from(&holders, identifier)?;
        self.conclude(need, sourced, &[])
    }

    fn resolve_pch(&mut self, identifier: &str, need: Need) -> Result<Outcome, LoadError> {
        let pch = self.pch.as_mut().expect("pch session");
        let sourced = resident_decl(pch, &mut self.stats, &self.cost, identifier)?
            .map(|decl| SourcedDecl {
                decl,
                module: PCH_NAME.to_string(),
                module_id: 0,
            })
            .into_iter()
            .collect();
        self.conclude(need, sourced, &[])
    }

    fn parse_header_tree(&mut self, root: &str) -> Result<(), LoadError> {
        let mut stack = vec![root.to_string()];
        while let Some(path) = stack.pop() {
            if !self.parsed_headers.insert(path.clone()) {
                continue;
            }
            let bytes = read_file(&self.paths.release_root.join(&path))?;
            let text = String::from_utf8_lossy(&bytes);
            let ast = parse_header(&text, &path).map_err(|source| LoadError::Header {
                path: path.clone(),
                source,
            })?;
            self.stats.headers_parsed += 1;
            self.charge_text(bytes.len() as u64);
            let order = self.parsed_headers.len() as u32 - 1;
            for item in ast.items {
                self.header_decls
                    .entry(item.name.clone())
                    .or_default()
                    .push(SourcedDecl {
                        decl: item,
                        module: path.clone(),
                        module_id: order,
                    });
            }
            stack.extend(ast.includes.into_iter().rev());
        }
        Ok(())
    }

    fn resolve_textual(&mut self, identifier: &str, need: Need) -> Result<Outcome, LoadError> {
        let header = self
            .rootmap
            .as_ref()
            .expect("textual session")
            .header_for(identifier)
            .map(str::to_string);
        let Some(header) = header else {
            return Ok(Outcome::NotFound);
        };
        self.parse_header_tree(&header)?;
        let sourced = self
            .header_decls
            .get(identifier)
            .cloned()
            .unwrap_or_default();
        self.conclude(need, sourced, &[])
    }

    fn is_direct(&self, module: &str) -> bool {
        self.direct.iter().any(|m| m == module)
    }

    /// Index postings for `identifier` that are not shadowed by a direct module.
    fn indexed_holders(&self, identifier: &str, defining_only: bool) -> Vec<(u32, String)> {
        let index = self.index.as_ref().expect("index session");
        index
            .postings(identifier)
            .iter()
            .filter(|p| !defining_only || p.flags.defines())
            .filter_map(|p| index.module_name(p.module_id))
            .filter(|m| !self.is_direct(m))
            .filter_map(|m| self.map.id_of(m).map(|id| (id, m.to_string())))
            .collect()
    }

    fn direct_holders(&self, identifier: &str, defining_only: bool) -> Vec<(u32, String)> {
        self.direct
            .iter()
            .filter_map(|m| {
                let r = &self.modules[m];
                let e = r.file.find(identifier)?;
                (!defining_only || e.flags.contains(IdentFlags::HAS_DEFINITION))
                    .then(|| (r.id, m.clone()))
            })
            .collect()
    }

    fn load_candidates(&mut self, candidates: &[String]) -> Result<Vec<String>, LoadError> {
        let newly: Vec<String> = candidates
            .iter()
            .filter(|m| !self.modules.contains_key(*m))
            .cloned()
            .collect();
        for m in candidates {
            self.load_module(m)?;
        }
        Ok(newly)
    }

    fn resolve_lexical(&mut self, identifier: &str, need: Need) -> Result<Outcome, LoadError> {
        let mut holders = self.indexed_holders(identifier, false);
        holders.extend(self.direct_holders(identifier, false));
        holders.sort();
        let candidates: Vec<String> = holders.into_iter().map(|(_, m)| m).collect();
        let newly = self.load_candidates(&candidates)?;
        let sourced = self.collect_from(&candidates, identifier)?;
        self.conclude(need, sourced, &newly)
    }

    fn resolve_semantic(&mut self, identifier: &str, need: Need) -> Result<Outcome, LoadError> {
        // A local or excluded module's definition takes precedence over the index.
        let definer = self
            .direct_holders(identifier, true)
            .into_iter()
            .next()
            .or_else(|| self.indexed_holders(identifier, true).into_iter().next())
            .map(|(_, m)| m);
        match definer {
            Some(m) => {
                let candidates = [m];
                let newly = self.load_candidates(&candidates)?;
                let sourced = self.collect_from(&candidates, identifier)?;
                self.conclude(need, sourced, &newly)
            }
            None if need == Need::Definition => Ok(Outcome::NotFound),
            None => {
                let known = !self.indexed_holders(identifier, false).is_empty()
                    || !self.direct_holders(identifier, false).is_empty();
                Ok(if known {
                    Outcome::ImplicitForward
                } else {
                    Outcome::NotFound
                })
            }
        }
    }
}

#[cfg(test)]
mod tests;
