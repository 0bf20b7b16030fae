//! The per-library module file (`.pcm`).
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "MODF" | version u32 = 1 | content_hash u64 | name (u32 len + UTF-8)
//! import_count u32 | imports (u32 len + UTF-8 each)
//! ident_count u32 | entries sorted by name:
//!     (u32 len + UTF-8 name | flags u8 | blob_offset u64 | blob_len u32)
//! blob_region_len u64 | blob_region
//! ```
//!
//! The content hash is FNV-1a 64 over the whole file with the hash field
//! zeroed. Files carry no absolute paths and no module id; the id is assigned
//! by the module map when a session opens.

mod blob;
mod format;
mod merge;

pub use blob::{decode_blob, decode_payload, encode_blob, encode_payload};
pub use format::{
    compile_module, read_module_summary, IdentEntry, IdentFlags, ModuleFile, ModuleSummary,
    HASH_OFFSET, MAGIC, VERSION,
};
pub use merge::{build_pch, merge_entities, Entity, EntityKind, SourcedDecl, PCH_NAME};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModfileError {
    #[error("not a module file (bad magic)")]
    BadMagic,
    #[error("unsupported module file version {0}")]
    BadVersion(u32),
    #[error("corrupt module file: {0}")]
    CorruptTable(String),
    #[error("content hash mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    HashMismatch { stored: u64, computed: u64 },
    #[error("identifier `{0}` is not in the module")]
    UnknownIdentifier(String),
    #[error("corrupt declaration blob for `{0}`")]
    CorruptBlob(String),
    #[error("`{0}` is defined differently by two headers of the same module")]
    OdrInModule(String),
    #[error("invalid import list: {0}")]
    InvalidImports(String),
    #[error("ODR violation: `{name}` is defined differently in `{module_a}` and `{module_b}`")]
    OdrViolation {
        name: String,
        module_a: String,
        module_b: String,
    },
    #[error("nothing to merge")]
    EmptyMerge,
    #[error("cannot merge declarations of different names `{0}` and `{1}`")]
    MixedNames(String, String),
}
