//! Canonical declaration serialization.
//!
//! A blob is `payload_len u32 | payload | origin path (u32 len + UTF-8) | origin line u32`.
//! The payload is a kind tag followed by length-prefixed fields in source
//! order. Two declarations are the same entity exactly when their payloads
//! are byte-identical; the origin trailer never takes part in that check.

use crate::codec::{Reader, Writer};
use crate::declang::{Builtin, Decl, DeclKind, Field, Origin, TypeBase, TypeRef};

const TAG_STRUCT_DEF: u8 = 1;
const TAG_STRUCT_FWD: u8 = 2;
const TAG_ENUM_DEF: u8 = 3;
const TAG_ALIAS: u8 = 4;
const TAG_FUNC_DECL: u8 = 5;

const BASE_NAMED: u8 = 0;

fn builtin_tag(b: Builtin) -> u8 {
    match b {
        Builtin::I32 => 1,
        Builtin::I64 => 2,
        Builtin::F64 => 3,
        Builtin::Bool => 4,
    }
}

fn write_type(w: &mut Writer, ty: &TypeRef) {
    w.u32(ty.indirection);
    match &ty.base {
        TypeBase::Named(n) => {
            w.u8(BASE_NAMED);
            w.str(n);
        }
        TypeBase::Builtin(b) => w.u8(builtin_tag(*b)),
    }
}

fn read_type(r: &mut Reader<'_>) -> Option<TypeRef> {
    let indirection = r.u32()?;
    let base = match r.u8()? {
        BASE_NAMED => TypeBase::Named(r.str()?.to_string()),
        t => TypeBase::Builtin(Builtin::ALL.into_iter().find(|b| builtin_tag(*b) == t)?),
    };
    Some(TypeRef { base, indirection })
}

pub fn encode_payload(decl: &Decl) -> Vec<u8> {
    let mut w = Writer::default();
    match &decl.kind {
        DeclKind::StructDef { fields } => {
            w.u8(TAG_STRUCT_DEF);
            w.str(&decl.name);
            w.len_u32(fields.len());
            for f in fields {
                w.str(&f.name);
                write_type(&mut w, &f.ty);
            }
        }
        DeclKind::StructFwd => {
            w.u8(TAG_STRUCT_FWD);
            w.str(&decl.name);
        }
        DeclKind::EnumDef { enumerators } => {
            w.u8(TAG_ENUM_DEF);
            w.str(&decl.name);
            w.len_u32(enumerators.len());
            for e in enumerators {
                w.str(e);
            }
        }
        DeclKind::Alias { target } => {
            w.u8(TAG_ALIAS);
            w.str(&decl.name);
            write_type(&mut w, target);
        }
        DeclKind::FuncDecl { params, ret } => {
            w.u8(TAG_FUNC_DECL);
            w.str(&decl.name);
            w.len_u32(params.len());
            for p in params {
                write_type(&mut w, p);
            }
            write_type(&mut w, ret);
        }
    }
    w.buf
}

/// Decodes a payload back into its name and kind. Fails on trailing bytes.
pub fn decode_payload(bytes: &[u8]) -> Option<(String, DeclKind)> {
    let mut r = Reader::new(bytes);
    let tag = r.u8()?;
    let name = r.str()?.to_string();
    let kind = match tag {
        TAG_STRUCT_DEF => {
            let n = r.u32()?;
            let mut fields = Vec::new();
            for _ in 0..n {
                let fname = r.str()?.to_string();
                let ty = read_type(&mut r)?;
                fields.push(Field { name: fname, ty });
            }
            DeclKind::StructDef { fields }
        }
        TAG_STRUCT_FWD => DeclKind::StructFwd,
        TAG_ENUM_DEF => {
            let n = r.u32()?;
            let mut enumerators = Vec::new();
            for _ in 0..n {
                enumerators.push(r.str()?.to_string());
            }
            DeclKind::EnumDef { enumerators }
        }
        TAG_ALIAS => DeclKind::Alias {
            target: read_type(&mut r)?,
        },
        TAG_FUNC_DECL => {
            let n = r.u32()?;
            let mut params = Vec::new();
            for _ in 0..n {
                params.push(read_type(&mut r)?);
            }
            let ret = read_type(&mut r)?;
            DeclKind::FuncDecl { params, ret }
        }
        _ => return None,
    };
    (r.remaining() == 0).then_some((name, kind))
}

pub fn encode_blob(decl: &Decl) -> Vec<u8> {
    let payload = encode_payload(decl);
    let mut w = Writer::default();
    w.len_u32(payload.len());
    w.bytes(&payload);
    w.str(&decl.origin.path);
    w.u32(decl.origin.line);
    w.buf
}

pub fn decode_blob(bytes: &[u8]) -> Option<Decl> {
    let mut r = Reader::new(bytes);
    let len = r.u32()? as usize;
    let (name, kind) = decode_payload(r.take(len)?)?;
    let path = r.str()?.to_string();
    let line = r.u32()?;
    if r.remaining() != 0 {
        return None;
    }
    Some(Decl::new(name, kind, Origin { path, line }))
}
