use std::collections::BTreeMap;
use std::fmt;

use super::blob::{decode_blob, encode_blob, encode_payload};
use super::ModfileError;
use crate::codec::{Reader, Writer};
use crate::declang::{Decl, DeclKind, HeaderAST};
use crate::hash::fnv1a64_zeroed;

pub const MAGIC: &[u8; 4] = b"MODF";
pub const VERSION: u32 = 1;
/// Byte offset of the content hash field.
pub const HASH_OFFSET: usize = 8;

/// Per-identifier flags stored in a module's identifier table.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct IdentFlags(u8);

impl IdentFlags {
    pub const HAS_DEFINITION: IdentFlags = IdentFlags(0b0001);
    pub const HAS_FORWARD: IdentFlags = IdentFlags(0b0010);
    pub const IS_ALIAS: IdentFlags = IdentFlags(0b0100);
    pub const IS_FUNCTION: IdentFlags = IdentFlags(0b1000);
    const ALL: u8 = 0b1111;

    pub const fn empty() -> Self {
        IdentFlags(0)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits & !Self::ALL == 0).then_some(IdentFlags(bits))
    }

    pub fn contains(self, other: IdentFlags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Flags contributed by one declaration. Aliases define their name, so
    /// they carry `HAS_DEFINITION` alongside `IS_ALIAS`. Function
    /// declarations only introduce a name.
    pub fn for_kind(kind: &DeclKind) -> IdentFlags {
        match kind {
            DeclKind::StructDef { .. } | DeclKind::EnumDef { .. } => Self::HAS_DEFINITION,
            DeclKind::StructFwd => Self::HAS_FORWARD,
            DeclKind::Alias { .. } => Self::HAS_DEFINITION | Self::IS_ALIAS,
            DeclKind::FuncDecl { .. } => Self::IS_FUNCTION,
        }
    }
}

impl std::ops::BitOr for IdentFlags {
    type Output = IdentFlags;
    fn bitor(self, rhs: Self) -> Self {
        IdentFlags(self.0 | rhs.0)
    }
}

impl std::ops::BitOrAssign for IdentFlags {
    fn bitor_assign(&mut self, rhs: Self) {
        self.0 |= rhs.0;
    }
}

impl fmt::Debug for IdentFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = [
            (Self::HAS_DEFINITION, "HAS_DEFINITION"),
            (Self::HAS_FORWARD, "HAS_FORWARD"),
            (Self::IS_ALIAS, "IS_ALIAS"),
            (Self::IS_FUNCTION, "IS_FUNCTION"),
        ];
        let set: Vec<&str> = names
            .iter()
            .filter(|(flag, _)| self.contains(*flag))
            .map(|(_, n)| *n)
            .collect();
        if set.is_empty() {
            f.write_str("(empty)")
        } else {
            f.write_str(&set.join("|"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentEntry {
    pub name: String,
    pub flags: IdentFlags,
    pub blob_offset: u64,
    pub blob_len: u32,
}

/// Everything in a module file before its blob region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleSummary {
    pub module_name: String,
    pub imports: Vec<String>,
    pub entries: Vec<IdentEntry>,
    pub content_hash: u64,
    /// Bytes from the start of the file up to the blob region. This is what
    /// reading the summary costs.
    pub summary_len: u64,
    pub file_len: u64,
}

impl ModuleSummary {
    pub fn find(&self, name: &str) -> Option<&IdentEntry> {
        self.entries
            .binary_search_by(|e| e.name.as_str().cmp(name))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }
}

/// A parsed module file: summary plus the raw blob region, from which
/// declarations are decoded one at a time on request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleFile {
    pub summary: ModuleSummary,
    blob_region: Vec<u8>,
}

impl ModuleFile {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModfileError> {
        let summary = read_module_summary(bytes)?;
        let blob_region = bytes[summary.summary_len as usize..].to_vec();
        Ok(ModuleFile {
            summary,
            blob_region,
        })
    }

    pub fn name(&self) -> &str {
        &self.summary.module_name
    }

    pub fn imports(&self) -> &[String] {
        &self.summary.imports
    }

    pub fn entries(&self) -> &[IdentEntry] {
        &self.summary.entries
    }

    pub fn find(&self, name: &str) -> Option<&IdentEntry> {
        self.summary.find(name)
    }

    pub fn blob_region_len(&self) -> u64 {
        self.blob_region.len() as u64
    }

    /// Decodes the declaration stored for `name`, returning it with the
    /// number of blob bytes read.
    pub fn deserialize_decl(&self, name: &str) -> Result<(Decl, u64), ModfileError> {
        let entry = self
            .find(name)
            .ok_or_else(|| ModfileError::UnknownIdentifier(name.to_string()))?;
        let start = entry.blob_offset as usize;
        let bytes = &self.blob_region[start..start + entry.blob_len as usize];
        let decl = decode_blob(bytes)
            .filter(|d| d.name == name)
            .ok_or_else(|| ModfileError::CorruptBlob(name.to_string()))?;
        Ok((decl, u64::from(entry.blob_len)))
    }
}

/// Serializes a module from already-chosen table entries. `entries` must be
/// sorted by name; each carries the declaration its blob encodes.
pub(crate) fn write_module(
    module_name: &str,
    imports: &[String],
    entries: &[(String, IdentFlags, &Decl)],
) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u64(0);
    w.str(module_name);
    w.len_u32(imports.len());
    for imp in imports {
        w.str(imp);
    }
    let mut region = Vec::new();
    w.len_u32(entries.len());
    for (name, flags, decl) in entries {
        let blob = encode_blob(decl);
        w.str(name);
        w.u8(flags.bits());
        w.u64(region.len() as u64);
        w.len_u32(blob.len());
        region.extend_from_slice(&blob);
    }
    w.u64(region.len() as u64);
    w.bytes(&region);
    let mut bytes = w.buf;
    let hash = fnv1a64_zeroed(&bytes, HASH_OFFSET);
    bytes[HASH_OFFSET..HASH_OFFSET + 8].copy_from_slice(&hash.to_le_bytes());
    bytes
}

/// Compiles the headers of one library into module file bytes.
///
/// The identifier table has one entry per distinct name. A name's blob is
/// its (unique) non-forward declaration when there is one, otherwise its
/// first forward declaration.
pub fn compile_module(
    module_name: &str,
    headers: &[HeaderAST],
    imports: &[String],
) -> Result<Vec<u8>, ModfileError> {
    for (i, imp) in imports.iter().enumerate() {
        if imp == module_name {
            return Err(ModfileError::InvalidImports(format!(
                "module `{module_name}` imports itself"
            )));
        }
        if imports[..i].contains(imp) {
            return Err(ModfileError::InvalidImports(format!(
                "`{imp}` imported twice"
            )));
        }
    }

    struct Slot<'a> {
        flags: IdentFlags,
        def: Option<(&'a Decl, Vec<u8>)>,
        fwd: Option<&'a Decl>,
    }
    let mut slots: BTreeMap<&str, Slot> = BTreeMap::new();
    for decl in headers.iter().flat_map(|h| &h.items) {
        let slot = slots.entry(&decl.name).or_insert(Slot {
            flags: IdentFlags::empty(),
            def: None,
            fwd: None,
        });
        slot.flags |= IdentFlags::for_kind(&decl.kind);
        if decl.kind.is_forward() {
            slot.fwd.get_or_insert(decl);
        } else {
            let payload = encode_payload(decl);
            match &slot.def {
                Some((_, existing)) if *existing != payload => {
                    return Err(ModfileError::OdrInModule(decl.name.clone()));
                }
                Some(_) => {}
                None => slot.def = Some((decl, payload)),
            }
        }
    }

    let entries: Vec<(String, IdentFlags, &Decl)> = slots
        .into_iter()
        .map(|(name, slot)| {
            let decl = slot
                .def
                .map(|(d, _)| d)
                .or(slot.fwd)
                .expect("slot holds at least one declaration");
            (name.to_string(), slot.flags, decl)
        })
        .collect();
    Ok(write_module(module_name, imports, &entries))
}

fn corrupt(what: &str) -> ModfileError {
    ModfileError::CorruptTable(what.to_string())
}

/// Reads the header and identifier table. Blob contents are not decoded;
/// the reported `summary_len` is the cost of this read.
pub fn read_module_summary(bytes: &[u8]) -> Result<ModuleSummary, ModfileError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ModfileError::BadMagic);
    }
    let mut r = Reader::new(bytes);
    r.take(4);
    let version = r.u32().ok_or_else(|| corrupt("truncated header"))?;
    if version != VERSION {
        return Err(ModfileError::BadVersion(version));
    }
    let content_hash = r.u64().ok_or_else(|| corrupt("truncated header"))?;
    let module_name = r
        .str()
        .ok_or_else(|| corrupt("bad module name"))?
        .to_string();
    let import_count = r.u32().ok_or_else(|| corrupt("truncated imports"))?;
    let mut imports = Vec::new();
    for _ in 0..import_count {
        imports.push(
            r.str()
                .ok_or_else(|| corrupt("truncated imports"))?
                .to_string(),
        );
    }
    let ident_count = r.u32().ok_or_else(|| corrupt("truncated table"))?;
    let mut entries: Vec<IdentEntry> = Vec::new();
    for _ in 0..ident_count {
        let name = r
            .str()
            .ok_or_else(|| corrupt("truncated table"))?
            .to_string();
        let flags = r
            .u8()
            .ok_or_else(|| corrupt("truncated table"))
            .and_then(|b| IdentFlags::from_bits(b).ok_or_else(|| corrupt("unknown flag bits")))?;
        let blob_offset = r.u64().ok_or_else(|| corrupt("truncated table"))?;
        let blob_len = r.u32().ok_or_else(|| corrupt("truncated table"))?;
        if flags.is_empty() {
            return Err(corrupt("entry without flags"));
        }
        if let Some(prev) = entries.last() {
            if prev.name.as_bytes() >= name.as_bytes() {
                return Err(corrupt("identifier table not strictly sorted"));
            }
        }
        entries.push(IdentEntry {
            name,
            flags,
            blob_offset,
            blob_len,
        });
    }
    let region_len = r.u64().ok_or_else(|| corrupt("truncated table"))?;
    let summary_len = r.pos() as u64;
    if r.remaining() as u64 != region_len {
        return Err(corrupt("blob region length does not match file size"));
    }
    for e in &entries {
        let end = e.blob_offset.checked_add(u64::from(e.blob_len));
        if end.is_none_or(|end| end > region_len) {
            return Err(corrupt("blob out of range"));
        }
    }
    let computed = fnv1a64_zeroed(bytes, HASH_OFFSET);
    if computed != content_hash {
        return Err(ModfileError::HashMismatch {
            stored: content_hash,
            computed,
        });
    }
    Ok(ModuleSummary {
        module_name,
        imports,
        entries,
        content_hash,
        summary_len,
        file_len: bytes.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::declang::parse_header;
    use crate::hash::fnv1a64;

    fn header(src: &str, path: &str) -> HeaderAST {
        parse_header(src, path).unwrap()
    }

    #[test]
    fn single_definition_table() {
        let bytes = compile_module("M", &[header("struct A { x: i32; };", "a.dh")], &[]).unwrap();
        let s = read_module_summary(&bytes).unwrap();
        assert_eq!(s.module_name, "M");
        assert_eq!(s.entries.len(), 1);
        assert_eq!(s.entries[0].name, "A");
        assert_eq!(s.entries[0].flags, IdentFlags::HAS_DEFINITION);
    }

    #[test]
    fn forward_and_definition_union_flags() {
        let bytes = compile_module(
            "M",
            &[
                header("struct A;", "f.dh"),
                header("struct A { x: i32; };", "d.dh"),
            ],
            &[],
        )
        .unwrap();
        let m = ModuleFile::from_bytes(&bytes).unwrap();
        assert_eq!(m.entries().len(), 1);
        assert_eq!(
            m.entries()[0].flags,
            IdentFlags::HAS_DEFINITION | IdentFlags::HAS_FORWARD
        );
        let (decl, _) = m.deserialize_decl("A").unwrap();
        assert!(matches!(decl.kind, DeclKind::StructDef { .. }));
        assert_eq!(decl.origin.path, "d.dh");
    }

    #[test]
    fn conflicting_definitions_in_module() {
        let err = compile_module(
            "M",
            &[
                header("struct A { x: i32; };", "a.dh"),
                header("struct A { x: i64; };", "b.dh"),
            ],
            &[],
        )
        .unwrap_err();
        assert_eq!(err, ModfileError::OdrInModule("A".into()));
    }

    #[test]
    fn identical_definitions_in_module_are_fine() {
        let bytes = compile_module(
            "M",
            &[
                header("struct A { x: i32; };", "a.dh"),
                header("struct A { x: i32; };", "b.dh"),
            ],
            &[],
        )
        .unwrap();
        let m = ModuleFile::from_bytes(&bytes).unwrap();
        assert_eq!(m.deserialize_decl("A").unwrap().0.origin.path, "a.dh");
    }

    #[test]
    fn alias_and_function_flags() {
        let bytes =
            compile_module("M", &[header("using T = i32;\nfn f() -> T;", "a.dh")], &[]).unwrap();
        let s = read_module_summary(&bytes).unwrap();
        assert_eq!(
            s.find("T").unwrap().flags,
            IdentFlags::HAS_DEFINITION | IdentFlags::IS_ALIAS
        );
        assert_eq!(s.find("f").unwrap().flags, IdentFlags::IS_FUNCTION);
    }

    #[test]
    fn bad_imports() {
        let h = [header("struct A;", "a.dh")];
        assert!(matches!(
            compile_module("M", &h, &["M".into()]),
            Err(ModfileError::InvalidImports(_))
        ));
        assert!(matches!(
            compile_module("M", &h, &["X".into(), "X".into()]),
            Err(ModfileError::InvalidImports(_))
        ));
    }

    #[test]
    fn imports_round_trip() {
        let imports = vec!["Core".to_string(), "Base".to_string()];
        let bytes = compile_module("M", &[header("struct A;", "a.dh")], &imports).unwrap();
        assert_eq!(read_module_summary(&bytes).unwrap().imports, imports);
    }

    #[test]
    fn forward_only_deserializes_to_forward() {
        let bytes = compile_module("M", &[header("struct Gpad;", "a.dh")], &[]).unwrap();
        let m = ModuleFile::from_bytes(&bytes).unwrap();
        let (decl, n) = m.deserialize_decl("Gpad").unwrap();
        assert_eq!(decl.kind, DeclKind::StructFwd);
        assert_eq!(n, u64::from(m.find("Gpad").unwrap().blob_len));
        assert_eq!(
            m.deserialize_decl("Nope").unwrap_err(),
            ModfileError::UnknownIdentifier("Nope".into())
        );
    }

    #[test]
    fn error_paths() {
        let bytes = compile_module("M", &[header("struct A { x: i32; };", "a.dh")], &[]).unwrap();
        assert_eq!(
            read_module_summary(b"XXXX").unwrap_err(),
            ModfileError::BadMagic
        );
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert_eq!(
            read_module_summary(&v2).unwrap_err(),
            ModfileError::BadVersion(2)
        );
        for cut in [10, 20, bytes.len() - 1] {
            assert!(matches!(
                read_module_summary(&bytes[..cut]),
                Err(ModfileError::CorruptTable(_))
            ));
        }
    }

    #[test]
    fn flipped_payload_byte_is_hash_mismatch() {
        let bytes = compile_module("M", &[header("struct A { x: i32; };", "a.dh")], &[]).unwrap();
        let mut bad = bytes.clone();
        let last = bad.len() - 1;
        bad[last] ^= 0x01;
        // Oracle: hash of the mutated bytes with the hash field zeroed.
        let mut zeroed = bad.clone();
        zeroed[HASH_OFFSET..HASH_OFFSET + 8].fill(0);
        let expected = fnv1a64(&zeroed);
        assert_eq!(
            read_module_summary(&bad).unwrap_err(),
            ModfileError::HashMismatch {
                stored: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
                computed: expected,
            }
        );
    }

    #[test]
    fn no_absolute_paths_needed() {
        let bytes = compile_module("M", &[header("struct A;", "sub/a.dh")], &[]).unwrap();
        let m = ModuleFile::from_bytes(&bytes).unwrap();
        assert_eq!(m.deserialize_decl("A").unwrap().0.origin.path, "sub/a.dh");
    }
}
