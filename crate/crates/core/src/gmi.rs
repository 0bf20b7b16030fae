//! The global module index (`modules.gmi`): an on-disk map from identifiers
//! to the modules that contain them.
//!
//! The lexical flavor only records containment, so a lookup answers with
//! every module that so much as forward-declares a name. The semantic flavor
//! additionally marks the postings whose module defines the name, which lets
//! a session load just the defining module.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "GMIX" | version u32 = 1 | content_hash u64 | flavor u8 (0 lexical, 1 semantic)
//! excluded_count u32 | excluded names (u32 len + UTF-8)
//! module_count u32 | (module_id u32 | name | content_hash u64)
//! entry_count u32 | entries sorted by identifier:
//!     (identifier | posting_count u32 | (module_id u32 | flags u8)*)
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use crate::codec::{Reader, Writer};
use crate::hash::fnv1a64_zeroed;
use crate::modfile::{read_module_summary, IdentFlags, ModfileError};
use crate::modulemap::{module_file, ModuleMap};

pub const MAGIC: &[u8; 4] = b"GMIX";
pub const VERSION: u32 = 1;
const HASH_OFFSET: usize = 8;
pub const INDEX_FILE: &str = "modules.gmi";

#[derive(Debug, thiserror::Error)]
pub enum GmiError {
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index version {0}")]
    BadVersion(u32),
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error("index hash mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    HashMismatch { stored: u64, computed: u64 },
    #[error("definition lookup needs a semantic index")]
    WrongFlavor,
    #[error("module `{0}` not found")]
    ModuleNotFound(String),
    #[error("excluded module `{0}` is not in the module map")]
    UnknownExcluded(String),
    #[error("module `{module}`: {source}")]
    CorruptModule {
        module: String,
        #[source]
        source: ModfileError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    Lexical,
    Semantic,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Lexical => "lexical",
            Flavor::Semantic => "semantic",
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PostingFlags(u8);

impl PostingFlags {
    pub const MENTIONS: PostingFlags = PostingFlags(0b01);
    pub const DEFINES: PostingFlags = PostingFlags(0b10);

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, other: PostingFlags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn defines(self) -> bool {
        self.contains(Self::DEFINES)
    }
}

impl std::ops::BitOr for PostingFlags {
    type Output = PostingFlags;
    fn bitor(self, rhs: Self) -> Self {
        PostingFlags(self.0 | rhs.0)
    }
}

impl fmt::Debug for PostingFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.defines(), self.contains(Self::MENTIONS)) {
            (true, true) => f.write_str("DEFINES|MENTIONS"),
            (true, false) => f.write_str("DEFINES"),
            (false, true) => f.write_str("MENTIONS"),
            (false, false) => f.write_str("(empty)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub module_id: u32,
    pub flags: PostingFlags,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub identifier: String,
    pub postings: Vec<Posting>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedModule {
    pub module_id: u32,
    pub name: String,
    pub content_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalIndex {
    pub flavor: Flavor,
    pub module_table: Vec<IndexedModule>,
    pub entries: Vec<IndexEntry>,
    pub excluded: Vec<String>,
    names: HashMap<u32, usize>,
}

impl GlobalIndex {
    fn new(
        flavor: Flavor,
        module_table: Vec<IndexedModule>,
        entries: Vec<IndexEntry>,
        excluded: Vec<String>,
    ) -> Self {
        let names = module_table
            .iter()
            .enumerate()
            .map(|(i, m)| (m.module_id, i))
            .collect();
        GlobalIndex {
            flavor,
            module_table,
            entries,
            excluded,
            names,
        }
    }

    pub fn module_name(&self, module_id: u32) -> Option<&str> {
        self.names
            .get(&module_id)
            .map(|&i| self.module_table[i].name.as_str())
    }

    pub fn is_excluded(&self, module: &str) -> bool {
        self.excluded.iter().any(|m| m == module)
    }

    pub fn postings(&self, identifier: &str) -> &[Posting] {
        self.entries
            .binary_search_by(|e| e.identifier.as_str().cmp(identifier))
            .map(|i| self.entries[i].postings.as_slice())
            .unwrap_or(&[])
    }

    /// Every module containing `identifier`, in module_id order.
    pub fn lookup(&self, identifier: &str) -> Vec<(String, PostingFlags)> {
        self.postings(identifier)
            .iter()
            .map(|p| {
                let name = self
                    .module_name(p.module_id)
                    .expect("posting names an indexed module");
                (name.to_string(), p.flags)
            })
            .collect()
    }

    /// The module defining `identifier`; the lowest module_id when several
    /// carry identical definitions.
    pub fn lookup_definition(&self, identifier: &str) -> Result<Option<String>, GmiError> {
        if self.flavor != Flavor::Semantic {
            return Err(GmiError::WrongFlavor);
        }
        Ok(self
            .postings(identifier)
            .iter()
            .find(|p| p.flags.defines())
            .and_then(|p| self.module_name(p.module_id))
            .map(str::to_string))
    }

    /// This index with every DEFINES flag removed, relabelled lexical.
    pub fn to_lexical(&self) -> GlobalIndex {
        let entries = self
            .entries
            .iter()
            .map(|e| IndexEntry {
                identifier: e.identifier.clone(),
                postings: e
                    .postings
                    .iter()
                    .map(|p| Posting {
                        module_id: p.module_id,
                        flags: PostingFlags::MENTIONS,
                    })
                    .collect(),
            })
            .collect();
        GlobalIndex::new(
            Flavor::Lexical,
            self.module_table.clone(),
            entries,
            self.excluded.clone(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u64(0);
        w.u8(match self.flavor {
            Flavor::Lexical => 0,
            Flavor::Semantic => 1,
        });
        w.len_u32(self.excluded.len());
        for m in &self.excluded {
            w.str(m);
        }
        w.len_u32(self.module_table.len());
        for m in &self.module_table {
            w.u32(m.module_id);
            w.str(&m.name);
            w.u64(m.content_hash);
        }
        w.len_u32(self.entries.len());
        for e in &self.entries {
            w.str(&e.identifier);
            w.len_u32(e.postings.len());
            for p in &e.postings {
                w.u32(p.module_id);
                w.u8(p.flags.bits());
            }
        }
        let mut bytes = w.buf;
        let hash = fnv1a64_zeroed(&bytes, HASH_OFFSET);
        bytes[HASH_OFFSET..HASH_OFFSET + 8].copy_from_slice(&hash.to_le_bytes());
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<GlobalIndex, GmiError> {
        let corrupt = |what: &str| GmiError::Corrupt(what.to_string());
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(GmiError::BadMagic);
        }
        let mut r = Reader::new(&bytes[4..]);
        let version = r.u32().ok_or_else(|| corrupt("truncated header"))?;
        if version != VERSION {
            return Err(GmiError::BadVersion(version));
        }
        let stored = r.u64().ok_or_else(|| corrupt("truncated header"))?;
        let flavor = match r.u8() {
            Some(0) => Flavor::Lexical,
            Some(1) => Flavor::Semantic,
            _ => return Err(corrupt("bad flavor")),
        };
        let n = r.u32().ok_or_else(|| corrupt("truncated exclusions"))?;
        let mut excluded = Vec::new();
        for _ in 0..n {
            excluded.push(
                r.str()
                    .ok_or_else(|| corrupt("truncated exclusions"))?
                    .to_string(),
            );
        }
        let n = r.u32().ok_or_else(|| corrupt("truncated module table"))?;
        let mut module_table = Vec::new();
        for _ in 0..n {
            let module_id = r.u32().ok_or_else(|| corrupt("truncated module table"))?;
            let name = r
                .str()
                .ok_or_else(|| corrupt("truncated module table"))?
                .to_string();
            let content_hash = r.u64().ok_or_else(|| corrupt("truncated module table"))?;
            module_table.push(IndexedModule {
                module_id,
                name,
                content_hash,
            });
        }
        let known: HashMap<u32, ()> = module_table.iter().map(|m| (m.module_id, ())).collect();
        let n = r.u32().ok_or_else(|| corrupt("truncated entries"))?;
        let mut entries: Vec<IndexEntry> = Vec::new();
        for _ in 0..n {
            let identifier = r
                .str()
                .ok_or_else(|| corrupt("truncated entries"))?
                .to_string();
            if entries
                .last()
                .is_some_and(|prev| prev.identifier.as_bytes() >= identifier.as_bytes())
            {
                return Err(corrupt("entries not strictly sorted"));
            }
            let count = r.u32().ok_or_else(|| corrupt("truncated postings"))?;
            if count == 0 {
                return Err(corrupt("entry without postings"));
            }
            let mut postings: Vec<Posting> = Vec::new();
            for _ in 0..count {
                let module_id = r.u32().ok_or_else(|| corrupt("truncated postings"))?;
                let bits = r.u8().ok_or_else(|| corrupt("truncated postings"))?;
                if bits & !0b11 != 0 || bits & PostingFlags::MENTIONS.0 == 0 {
                    return Err(corrupt("bad posting flags"));
                }
                if !known.contains_key(&module_id) {
                    return Err(corrupt("posting names an unknown module"));
                }
                if postings.last().is_some_and(|p| p.module_id >= module_id) {
                    return Err(corrupt("postings not strictly sorted"));
                }
                postings.push(Posting {
                    module_id,
                    flags: PostingFlags(bits),
                });
            }
            entries.push(IndexEntry {
                identifier,
                postings,
            });
        }
        if r.remaining() != 0 {
            return Err(corrupt("trailing bytes"));
        }
        let computed = fnv1a64_zeroed(bytes, HASH_OFFSET);
        if computed != stored {
            return Err(GmiError::HashMismatch { stored, computed });
        }
        if flavor == Flavor::Lexical
            && entries
                .iter()
                .flat_map(|e| &e.postings)
                .any(|p| p.flags.defines())
        {
            return Err(corrupt("lexical index carries DEFINES flags"));
        }
        Ok(GlobalIndex::new(flavor, module_table, entries, excluded))
    }
}

/// Builds an index over every non-excluded module of `map`, reading
/// `<module_dir>/<name>.pcm` summaries.
pub fn build_index(
    map: &ModuleMap,
    module_dir: &Path,
    flavor: Flavor,
    excluded: &[String],
) -> Result<GlobalIndex, GmiError> {
    for ex in excluded {
        if map.id_of(ex).is_none() {
            return Err(GmiError::UnknownExcluded(ex.clone()));
        }
    }
    let mut module_table = Vec::new();
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    for (id, def) in map.defs().iter().enumerate() {
        if excluded.contains(&def.name) {
            continue;
        }
        let path = module_file(module_dir, &def.name);
        let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => GmiError::ModuleNotFound(def.name.clone()),
            _ => GmiError::Io {
                path: path.display().to_string(),
                source: e,
            },
        })?;
        let summary = read_module_summary(&bytes).map_err(|source| GmiError::CorruptModule {
            module: def.name.clone(),
            source,
        })?;
        module_table.push(IndexedModule {
            module_id: id as u32,
            name: def.name.clone(),
            content_hash: summary.content_hash,
        });
        for e in &summary.entries {
            let mut flags = PostingFlags::MENTIONS;
            if flavor == Flavor::Semantic && e.flags.contains(IdentFlags::HAS_DEFINITION) {
                flags = flags | PostingFlags::DEFINES;
            }
            postings.entry(e.name.clone()).or_default().push(Posting {
                module_id: id as u32,
                flags,
            });
        }
    }
    let entries = postings
        .into_iter()
        .map(|(identifier, postings)| IndexEntry {
            identifier,
            postings,
        })
        .collect();
    Ok(GlobalIndex::new(
        flavor,
        module_table,
        entries,
        excluded.to_vec(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Staleness {
    Fresh,
    HashMismatch,
    Missing,
}

impl fmt::Display for Staleness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Staleness::Fresh => "fresh",
            Staleness::HashMismatch => "hash-mismatch",
            Staleness::Missing => "missing",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StalenessReport {
    pub modules: Vec<(String, Staleness)>,
}

impl StalenessReport {
    pub fn is_fresh(&self) -> bool {
        self.modules.iter().all(|(_, s)| *s == Staleness::Fresh)
    }

    pub fn stale(&self) -> impl Iterator<Item = (&str, Staleness)> {
        self.modules
            .iter()
            .filter(|(_, s)| *s != Staleness::Fresh)
            .map(|(m, s)| (m.as_str(), *s))
    }
}

/// Compares the hashes recorded in `index` against the module files in
/// `module_dir`. Read-only.
pub fn validate_index(index: &GlobalIndex, module_dir: &Path) -> StalenessReport {
    let modules = index
        .module_table
        .iter()
        .map(|m| {
            let status = match std::fs::read(module_file(module_dir, &m.name)) {
                Err(_) => Staleness::Missing,
                Ok(bytes) => match read_module_summary(&bytes) {
                    Ok(s) if s.content_hash == m.content_hash && s.module_name == m.name => {
                        Staleness::Fresh
                    }
                    _ => Staleness::HashMismatch,
                },
            };
            (m.name.clone(), status)
        })
        .collect();
    StalenessReport { modules }
}
