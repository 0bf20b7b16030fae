//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use modix::bench::{build_corpus, CorpusSpec, LEXICAL_INDEX_FILE};
use modix::declang::{Builtin, DeclKind, Field, HeaderAST, Origin, TypeRef};
use modix::gmi::{Flavor, GlobalIndex, INDEX_FILE};
use modix::modfile::{IdentFlags, ModuleFile};
use modix::modulemap::module_file;
use modix::release::{load_map, read_modules};
use modix::Decl;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NAME_POOL: [&str; 10] = [
    "Gpad", "TH1", "TTree", "Axis", "Vec3", "Hit", "Track", "Event", "Cfg", "Run",
];

pub fn arb_name() -> impl Strategy<Value = String> {
    prop::sample::select(&NAME_POOL[..]).prop_map(str::to_string)
}

pub fn arb_type() -> impl Strategy<Value = TypeRef> {
    let base = prop_oneof![
        prop::sample::select(&Builtin::ALL[..]).prop_map(TypeRef::builtin),
        arb_name().prop_map(TypeRef::named),
    ];
    (base, 0u32..3).prop_map(|(mut t, ind)| {
        t.indirection = ind;
        t
    })
}

pub fn arb_kind() -> impl Strategy<Value = DeclKind> {
    prop_oneof![
        Just(DeclKind::StructFwd),
        prop::collection::vec(arb_type(), 0..4).prop_map(|tys| DeclKind::StructDef {
            fields: tys
                .into_iter()
                .enumerate()
                .map(|(i, ty)| Field {
                    name: format!("f{i}"),
                    ty
                })
                .collect(),
        }),
        prop::collection::vec(prop::sample::select(&["A", "B", "C", "D"][..]), 1..4).prop_map(
            |es| {
                let mut es: Vec<String> = es.into_iter().map(str::to_string).collect();
                es.sort();
                es.dedup();
                DeclKind::EnumDef { enumerators: es }
            }
        ),
        arb_type().prop_map(|target| DeclKind::Alias { target }),
        (prop::collection::vec(arb_type(), 0..3), arb_type())
            .prop_map(|(params, ret)| DeclKind::FuncDecl { params, ret }),
    ]
}

/// A header whose non-forward declarations have distinct names.
pub fn arb_header(path: &'static str) -> impl Strategy<Value = HeaderAST> {
    let items = prop::collection::vec((arb_name(), arb_kind()), 0..12);
    let includes = prop::collection::vec(
        prop::sample::select(&["a.dh", "b.dh", "dir/c.dh"][..]),
        0..3,
    );
    (items, includes).prop_map(move |(items, includes)| {
        let mut seen = std::collections::HashSet::new();
        let items = items
            .into_iter()
            .filter(|(n, k)| k.is_forward() || seen.insert(n.clone()))
            .enumerate()
            .map(|(i, (n, k))| {
                Decl::new(
                    n,
                    k,
                    Origin {
                        path: path.to_string(),
                        line: i as u32 + 1,
                    },
                )
            })
            .collect();
        HeaderAST {
            path: path.to_string(),
            items,
            includes: includes.into_iter().map(str::to_string).collect(),
        }
    })
}

/// A small random corpus spec, deterministic in `seed`.
pub fn small_spec(seed: u64) -> CorpusSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n_modules = rng.gen_range(1..=32);
    CorpusSpec {
        name: format!("random{seed}"),
        n_modules,
        defs_per_module: rng.gen_range(1..=8),
        fwd_fanout: rng.gen_range(0..n_modules.min(4)),
        dup_fraction: rng.gen_range(0.0..=0.5),
        import_density: rng.gen_range(0.0..=2.0),
        seed,
        framework_modules: rng.gen_range(0..=n_modules),
        id_width: 0,
    }
}

/// A random workload over `spec`'s identifiers, with some unknown names.
pub fn workload(spec: &CorpusSpec, seed: u64, len: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for i in 0..len {
        let name = if rng.gen_bool(0.1) {
            format!("Unknown{}", rng.gen_range(0..5))
        } else {
            spec.ident(
                rng.gen_range(0..spec.n_modules),
                rng.gen_range(0..spec.defs_per_module),
            )
        };
        let stmt = match rng.gen_range(0..6) {
            0 => format!("new {name};"),
            1 => format!("declare v{i}: {name};"),
            2 => format!("declare v{i}: ptr<{name}>;"),
            3 => format!("sizeof({name});"),
            4 => format!("call {name};"),
            _ => format!("declare v{i}: i64;"),
        };
        out.push_str(&stmt);
        out.push('\n');
    }
    out
}

pub fn build(spec: &CorpusSpec) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let release = build_corpus(spec, dir.path()).unwrap();
    (dir, release)
}

fn read_index(path: &Path) -> GlobalIndex {
    GlobalIndex::from_bytes(&std::fs::read(path).unwrap()).unwrap()
}

/// Cross-checks the index's postings against every module's identifier
/// table. Returns a description of the first discrepancy.
pub fn check_index(index: &GlobalIndex, modules: &[ModuleFile]) -> Result<(), String> {
    for (id, m) in modules.iter().enumerate() {
        let excluded = index.is_excluded(m.name());
        for e in m.entries() {
            let posting = index
                .postings(&e.name)
                .iter()
                .find(|p| p.module_id == id as u32);
            match (excluded, posting) {
                (true, Some(_)) => {
                    return Err(format!("excluded {} posted for {}", m.name(), e.name))
                }
                (false, None) => {
                    return Err(format!("{} in {} missing from index", e.name, m.name()))
                }
                (false, Some(p)) => {
                    let defines = index.flavor == Flavor::Semantic
                        && e.flags.contains(IdentFlags::HAS_DEFINITION);
                    if p.flags.defines() != defines {
                        return Err(format!("wrong DEFINES for {} in {}", e.name, m.name()));
                    }
                }
                (true, None) => {}
            }
        }
    }
    for entry in &index.entries {
        for p in &entry.postings {
            let m = modules
                .get(p.module_id as usize)
                .ok_or_else(|| format!("posting for unknown module {}", p.module_id))?;
            if m.find(&entry.identifier).is_none() {
                return Err(format!(
                    "{} posted for {} which lacks it",
                    entry.identifier,
                    m.name()
                ));
            }
        }
    }
    Ok(())
}

/// Checks both indexes of a built release.
pub fn check_release_indexes(release: &Path) -> Result<(), String> {
    let map = load_map(release).map_err(|e| e.to_string())?;
    let modules = read_modules(release, &map).map_err(|e| e.to_string())?;
    for file in [INDEX_FILE, LEXICAL_INDEX_FILE] {
        let path = release.join(file);
        if path.is_file() {
            check_index(&read_index(&path), &modules).map_err(|e| format!("{file}: {e}"))?;
        }
    }
    Ok(())
}

/// Every `.pcm` and `.gmi` file under `release` parses with a valid hash.
pub fn check_release_files(release: &Path) -> Result<usize, String> {
    let mut n = 0;
    for entry in std::fs::read_dir(release).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let bytes = || std::fs::read(&path).map_err(|e| e.to_string());
        match path.extension().and_then(|e| e.to_str()) {
            Some("pcm") => {
                ModuleFile::from_bytes(&bytes()?)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                n += 1;
            }
            Some("gmi") => {
                GlobalIndex::from_bytes(&bytes()?)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                n += 1;
            }
            _ => {}
        }
    }
    Ok(n)
}

pub fn module_path(release: &Path, name: &str) -> PathBuf {
    module_file(release, name)
}
