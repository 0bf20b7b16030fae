//! Release builds: compiling modulemaps and headers into a release
//! directory holding one `.pcm` per module, the copied headers, the final
//! `module.modulemap` and the textual `modules.rootmap`, plus helpers to
//! add a precompiled header and a global index to it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::declang::{parse_header, DeclangError, HeaderAST};
use crate::gmi::{build_index, Flavor, GlobalIndex, GmiError};
use crate::loader::ROOTMAP_FILE;
use crate::modfile::{build_pch, compile_module, ModfileError, ModuleFile, PCH_NAME};
use crate::modulemap::{
    concat_modulemaps, module_file, parse_modulemap, ModuleMap, ModuleMapError, Overlay,
    FINAL_MODULEMAP,
};

#[derive(Debug, thiserror::Error)]
pub enum ReleaseError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Modulemap {
        path: String,
        #[source]
        source: ModuleMapError,
    },
    #[error(transparent)]
    Map(#[from] ModuleMapError),
    #[error("{path}: {source}")]
    Header {
        path: String,
        #[source]
        source: DeclangError,
    },
    #[error("module `{module}`: {source}")]
    Module {
        module: String,
        #[source]
        source: ModfileError,
    },
    #[error("header `{header}` includes `{include}`, which no module owns")]
    UnownedInclude { header: String, include: String },
    #[error(transparent)]
    Index(#[from] GmiError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReleaseError + '_ {
    move |source| ReleaseError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_text(path: &Path) -> Result<String, ReleaseError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), ReleaseError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Parses and concatenates modulemap files in the order given.
pub fn read_modulemaps(files: &[PathBuf]) -> Result<ModuleMap, ReleaseError> {
    let mut maps = Vec::with_capacity(files.len());
    for f in files {
        let text = read_text(f)?;
        let defs = parse_modulemap(&text, f).map_err(|source| ReleaseError::Modulemap {
            path: f.display().to_string(),
            source,
        })?;
        maps.push((f.clone(), defs));
    }
    Ok(concat_modulemaps(&maps)?)
}

/// The final modulemap of a release directory.
pub fn load_map(release_dir: &Path) -> Result<ModuleMap, ReleaseError> {
    read_modulemaps(&[release_dir.join(FINAL_MODULEMAP)])
}

/// Maps each identifier to the first header defining it, or failing that
/// the first header forward-declaring it. Sorted by identifier.
pub fn rootmap_text(headers: &[HeaderAST]) -> String {
    let mut defs: BTreeMap<&str, &str> = BTreeMap::new();
    let mut fwds: BTreeMap<&str, &str> = BTreeMap::new();
    for h in headers {
        for d in &h.items {
            let slot = if d.kind.is_forward() {
                &mut fwds
            } else {
                &mut defs
            };
            slot.entry(&d.name).or_insert(&h.path);
        }
    }
    for (name, path) in fwds {
        defs.entry(name).or_insert(path);
    }
    let mut out = String::new();
    for (name, path) in defs {
        out.push_str(name);
        out.push(' ');
        out.push_str(path);
        out.push('\n');
    }
    out
}

/// Compiles every module of `map` into `out_dir`.
///
/// Header paths are relative to the directory of the modulemap declaring
/// them, after `overlay` is applied. A module imports the owners of the
/// headers its headers include.
pub fn compile_release(
    map: &ModuleMap,
    overlay: Option<&Overlay>,
    out_dir: &Path,
) -> Result<(), ReleaseError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut all_headers = Vec::new();
    for def in map.defs() {
        let root = def.source_map_file.parent().unwrap_or(Path::new(""));
        let mut asts = Vec::with_capacity(def.headers.len());
        let mut imports: Vec<String> = Vec::new();
        for h in &def.headers {
            let mut src = root.join(h);
            if let Some(o) = overlay {
                src = o.apply(&src);
            }
            let text = read_text(&src)?;
            let ast = parse_header(&text, h).map_err(|source| ReleaseError::Header {
                path: src.display().to_string(),
                source,
            })?;
            for inc in &ast.includes {
                let owner = map
                    .owner_of(inc)
                    .ok_or_else(|| ReleaseError::UnownedInclude {
                        header: h.clone(),
                        include: inc.clone(),
                    })?;
                if owner.name != def.name && !imports.contains(&owner.name) {
                    imports.push(owner.name.clone());
                }
            }
            let dest = out_dir.join(h);
            let same = match (src.canonicalize(), dest.canonicalize()) {
                (Ok(a), Ok(b)) => a == b,
                _ => false,
            };
            if !same {
                write_bytes(&dest, text.as_bytes())?;
            }
            asts.push(ast);
        }
        let bytes =
            compile_module(&def.name, &asts, &imports).map_err(|source| ReleaseError::Module {
                module: def.name.clone(),
                source,
            })?;
        write_bytes(&module_file(out_dir, &def.name), &bytes)?;
        all_headers.extend(asts);
    }
    write_bytes(&out_dir.join(FINAL_MODULEMAP), map.render().as_bytes())?;
    write_bytes(
        &out_dir.join(ROOTMAP_FILE),
        rootmap_text(&all_headers).as_bytes(),
    )?;
    Ok(())
}

/// Reads and parses every module of a release directory, in map order.
pub fn read_modules(release_dir: &Path, map: &ModuleMap) -> Result<Vec<ModuleFile>, ReleaseError> {
    map.names()
        .map(|name| {
            let path = module_file(release_dir, name);
            let bytes = std::fs::read(&path).map_err(io_err(&path))?;
            ModuleFile::from_bytes(&bytes).map_err(|source| ReleaseError::Module {
                module: name.to_string(),
                source,
            })
        })
        .collect()
}

/// Merges every module of the release into `__pch__.pcm`.
pub fn write_pch(release_dir: &Path) -> Result<PathBuf, ReleaseError> {
    let map = load_map(release_dir)?;
    let modules = read_modules(release_dir, &map)?;
    let bytes = build_pch(&modules).map_err(|source| ReleaseError::Module {
        module: PCH_NAME.to_string(),
        source,
    })?;
    let path = module_file(release_dir, PCH_NAME);
    write_bytes(&path, &bytes)?;
    Ok(path)
}

/// Builds a global index over the release and writes it to `out`.
pub fn write_index(
    release_dir: &Path,
    flavor: Flavor,
    excluded: &[String],
    out: &Path,
) -> Result<GlobalIndex, ReleaseError> {
    let map = load_map(release_dir)?;
    let index = build_index(&map, release_dir, flavor, excluded)?;
    write_bytes(out, &index.to_bytes())?;
    Ok(index)
}
