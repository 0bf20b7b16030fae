//! Module maps, virtual file system overlays, and module search paths.
//!
//! Each library ships a `<Library>.modulemap` with one module definition; a
//! release concatenates them into `module.modulemap`, and a module's id is
//! its position in that concatenation.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::declang::{tokenize, DeclangError, Token, TokenKind};

pub const FINAL_MODULEMAP: &str = "module.modulemap";
pub const MODULE_EXTENSION: &str = "pcm";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModuleMapError {
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Parse {
        line: u32,
        col: u32,
        expected: String,
        found: String,
    },
    #[error("module `{0}` lists no headers")]
    EmptyModule(String),
    #[error("module `{module}` lists header `{path}` twice")]
    DuplicateHeader { module: String, path: String },
    #[error("module `{name}` is defined in both {file_a} and {file_b}")]
    DuplicateModule {
        name: String,
        file_a: String,
        file_b: String,
    },
    #[error("header `{path}` is claimed by both `{mod_a}` and `{mod_b}`")]
    HeaderClaimedTwice {
        path: String,
        mod_a: String,
        mod_b: String,
    },
    #[error("overlay line {line}: {message}")]
    Overlay { line: usize, message: String },
    #[error("search path `{0}` listed more than once")]
    DuplicateSearchPath(String),
    #[error("module `{0}` not found")]
    ModuleNotFound(String),
}

impl From<DeclangError> for ModuleMapError {
    fn from(e: DeclangError) -> Self {
        match e {
            DeclangError::Lex { line, col } => ModuleMapError::Parse {
                line,
                col,
                expected: "token".into(),
                found: "unexpected character".into(),
            },
            DeclangError::Parse {
                line,
                col,
                expected,
                found,
            } => ModuleMapError::Parse {
                line,
                col,
                expected,
                found,
            },
            DeclangError::DuplicateDefinition(_) => unreachable!("not produced by the lexer"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleDef {
    pub name: String,
    pub headers: Vec<String>,
    pub source_map_file: PathBuf,
}

fn expected(t: &Token, what: &str) -> ModuleMapError {
    ModuleMapError::Parse {
        line: t.line,
        col: t.col,
        expected: what.to_string(),
        found: t.to_string(),
    }
}

/// Parses `module NAME { header "PATH" ... }` definitions.
pub fn parse_modulemap(text: &str, source: &Path) -> Result<Vec<ModuleDef>, ModuleMapError> {
    let tokens = tokenize(text)?;
    let mut pos = 0;
    let mut next = || {
        let t = &tokens[pos];
        if t.kind != TokenKind::Eof {
            pos += 1;
        }
        t
    };
    let mut defs = Vec::new();
    loop {
        let t = next();
        match t.kind {
            TokenKind::Eof => break,
            TokenKind::Ident if t.text == "module" => {}
            _ => return Err(expected(t, "`module`")),
        }
        let name_tok = next();
        if name_tok.kind != TokenKind::Ident {
            return Err(expected(name_tok, "module name"));
        }
        let name = name_tok.text.clone();
        let open = next();
        if !open.is_punct("{") {
            return Err(expected(open, "`{`"));
        }
        let mut headers: Vec<String> = Vec::new();
        loop {
            let t = next();
            if t.is_punct("}") {
                break;
            }
            if !(t.kind == TokenKind::Ident && t.text == "header") {
                return Err(expected(t, "`header` or `}`"));
            }
            let p = next();
            let path = p.string_value().ok_or_else(|| expected(p, "header path"))?;
            if headers.iter().any(|h| h == path) {
                return Err(ModuleMapError::DuplicateHeader {
                    module: name,
                    path: path.to_string(),
                });
            }
            headers.push(path.to_string());
        }
        if headers.is_empty() {
            return Err(ModuleMapError::EmptyModule(name));
        }
        defs.push(ModuleDef {
            name,
            headers,
            source_map_file: source.to_path_buf(),
        });
    }
    Ok(defs)
}

/// The concatenated release map. A module's id is its index in `defs`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModuleMap {
    defs: Vec<ModuleDef>,
    by_name: HashMap<String, u32>,
}

impl ModuleMap {
    pub fn defs(&self) -> &[ModuleDef] {
        &self.defs
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: u32) -> Option<&ModuleDef> {
        self.defs.get(id as usize)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.iter().map(|d| d.name.as_str())
    }

    /// Which module owns `header`, if any.
    pub fn owner_of(&self, header: &str) -> Option<&ModuleDef> {
        self.defs
            .iter()
            .find(|d| d.headers.iter().any(|h| h == header))
    }

    /// Text of the final `module.modulemap`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for d in &self.defs {
            out.push_str(&format!("module {} {{\n", d.name));
            for h in &d.headers {
                out.push_str(&format!("  header \"{h}\"\n"));
            }
            out.push_str("}\n");
        }
        out
    }
}

/// Concatenates per-library maps in input order and assigns ids by final
/// position.
pub fn concat_modulemaps(maps: &[(PathBuf, Vec<ModuleDef>)]) -> Result<ModuleMap, ModuleMapError> {
    let mut map = ModuleMap::default();
    let mut header_owner: HashMap<&str, &str> = HashMap::new();
    for (_, defs) in maps {
        for def in defs {
            if let Some(&id) = map.by_name.get(&def.name) {
                return Err(ModuleMapError::DuplicateModule {
                    name: def.name.clone(),
                    file_a: map.defs[id as usize].source_map_file.display().to_string(),
                    file_b: def.source_map_file.display().to_string(),
                });
            }
            for h in &def.headers {
                if let Some(owner) = header_owner.insert(h, &def.name) {
                    return Err(ModuleMapError::HeaderClaimedTwice {
                        path: h.clone(),
                        mod_a: owner.to_string(),
                        mod_b: def.name.clone(),
                    });
                }
            }
            map.by_name.insert(def.name.clone(), map.defs.len() as u32);
            map.defs.push(def.clone());
        }
    }
    Ok(map)
}

/// Ordered virtual-to-real path prefix mappings.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Overlay {
    mappings: Vec<(PathBuf, PathBuf)>,
}

impl Overlay {
    pub fn new(mappings: Vec<(PathBuf, PathBuf)>) -> Result<Self, ModuleMapError> {
        for (i, (v, _)) in mappings.iter().enumerate() {
            if mappings[..i].iter().any(|(w, _)| w == v) {
                return Err(ModuleMapError::Overlay {
                    line: i + 1,
                    message: format!("virtual path `{}` mapped twice", v.display()),
                });
            }
        }
        Ok(Overlay { mappings })
    }

    /// Parses `VIRTUAL -> REAL` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, ModuleMapError> {
        let mut mappings: Vec<(PathBuf, PathBuf)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (v, r) = line
                .split_once("->")
                .ok_or_else(|| ModuleMapError::Overlay {
                    line: i + 1,
                    message: "expected `VIRTUAL -> REAL`".into(),
                })?;
            let (v, r) = (v.trim(), r.trim());
            if v.is_empty() || r.is_empty() {
                return Err(ModuleMapError::Overlay {
                    line: i + 1,
                    message: "empty path".into(),
                });
            }
            if mappings.iter().any(|(w, _)| w == Path::new(v)) {
                return Err(ModuleMapError::Overlay {
                    line: i + 1,
                    message: format!("virtual path `{v}` mapped twice"),
                });
            }
            mappings.push((v.into(), r.into()));
        }
        Ok(Overlay { mappings })
    }

    pub fn mappings(&self) -> &[(PathBuf, PathBuf)] {
        &self.mappings
    }

    /// Replaces the longest matching virtual prefix (by whole path
    /// components) with its real prefix. Unmatched paths come back unchanged.
    pub fn apply(&self, path: &Path) -> PathBuf {
        self.mappings
            .iter()
            .filter_map(|(v, r)| path.strip_prefix(v).ok().map(|rest| (v, r, rest)))
            .max_by_key(|(v, _, _)| v.components().count())
            .map(|(_, r, rest)| {
                if rest.as_os_str().is_empty() {
                    r.clone()
                } else {
                    r.join(rest)
                }
            })
            .unwrap_or_else(|| path.to_path_buf())
    }
}

pub fn apply_overlay(overlay: &Overlay, path: &Path) -> PathBuf {
    overlay.apply(path)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchPaths {
    pub local_roots: Vec<PathBuf>,
    pub release_root: PathBuf,
}

impl SearchPaths {
    pub fn new(local_roots: Vec<PathBuf>, release_root: PathBuf) -> Result<Self, ModuleMapError> {
        for (i, root) in local_roots.iter().enumerate() {
            if local_roots[..i].contains(root) || *root == release_root {
                return Err(ModuleMapError::DuplicateSearchPath(
                    root.display().to_string(),
                ));
            }
        }
        Ok(SearchPaths {
            local_roots,
            release_root,
        })
    }

    pub fn release(release_root: impl Into<PathBuf>) -> Self {
        SearchPaths {
            local_roots: Vec::new(),
            release_root: release_root.into(),
        }
    }

    /// The local root providing `module_name`, if any.
    pub fn local_module(&self, module_name: &str) -> Option<PathBuf> {
        self.local_roots
            .iter()
            .map(|root| module_file(root, module_name))
            .find(|p| p.is_file())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathOrigin {
    Local,
    Release,
}

impl fmt::Display for PathOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathOrigin::Local => "local",
            PathOrigin::Release => "release",
        })
    }
}

pub fn module_file(root: &Path, module_name: &str) -> PathBuf {
    root.join(format!("{module_name}.{MODULE_EXTENSION}"))
}

/// Finds `<root>/<module_name>.pcm`, local roots first, then the release.
pub fn resolve_module_path(
    paths: &SearchPaths,
    module_name: &str,
) -> Result<(PathBuf, PathOrigin), ModuleMapError> {
    if let Some(p) = paths.local_module(module_name) {
        return Ok((p, PathOrigin::Local));
    }
    let p = module_file(&paths.release_root, module_name);
    if p.is_file() {
        Ok((p, PathOrigin::Release))
    } else {
        Err(ModuleMapError::ModuleNotFound(module_name.to_string()))
    }
}
