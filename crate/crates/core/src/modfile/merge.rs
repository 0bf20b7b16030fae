use std::collections::{BTreeMap, BTreeSet};

use super::blob::encode_payload;
use super::format::{write_module, IdentFlags, ModuleFile};
use super::ModfileError;
use crate::declang::{Decl, DeclKind};

pub const PCH_NAME: &str = "__pch__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityKind {
    Forward,
    Alias,
    Function,
    Definition,
}

impl EntityKind {
    pub fn of(kind: &DeclKind) -> EntityKind {
        match kind {
            DeclKind::StructDef { .. } | DeclKind::EnumDef { .. } => EntityKind::Definition,
            DeclKind::StructFwd => EntityKind::Forward,
            DeclKind::Alias { .. } => EntityKind::Alias,
            DeclKind::FuncDecl { .. } => EntityKind::Function,
        }
    }

    /// Whether an entity of this kind satisfies a use that needs a
    /// definition. Aliases name a complete type through their target.
    pub fn satisfies_definition(self) -> bool {
        matches!(self, EntityKind::Definition | EntityKind::Alias)
    }
}

/// A declaration together with the module it was read from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcedDecl {
    pub decl: Decl,
    pub module: String,
    pub module_id: u32,
}

/// The merged view of one name across every module that mentions it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub name: String,
    pub kind: EntityKind,
    pub canonical_payload: Vec<u8>,
    /// The module providing the winning non-forward declaration, if any.
    pub defining_module: Option<String>,
    pub contributing_modules: BTreeSet<String>,
    /// The winning declaration itself.
    pub decl: Decl,
}

impl Entity {
    /// The module credited with this entity: the defining module, or for a
    /// forward-only entity the lowest-id contributor.
    pub fn credited_module(&self) -> &str {
        self.defining_module
            .as_deref()
            .unwrap_or_else(|| self.contributing_modules.first().expect("non-empty"))
    }
}

/// Merges the declarations of one name.
///
/// Forward declarations are always compatible. Every other declaration must
/// be byte-identical in canonical form; the first mismatch, in module_id
/// order, is an ODR violation naming the lowest-id defining module and the
/// offending one. The winning declaration comes from the lowest module_id.
pub fn merge_entities(decls: &[SourcedDecl]) -> Result<Entity, ModfileError> {
    let first = decls.first().ok_or(ModfileError::EmptyMerge)?;
    if let Some(other) = decls.iter().find(|d| d.decl.name != first.decl.name) {
        return Err(ModfileError::MixedNames(
            first.decl.name.clone(),
            other.decl.name.clone(),
        ));
    }
    let mut sorted: Vec<&SourcedDecl> = decls.iter().collect();
    sorted.sort_by(|a, b| (a.module_id, &a.module).cmp(&(b.module_id, &b.module)));

    let mut winner: Option<(&SourcedDecl, Vec<u8>)> = None;
    for d in sorted.iter().filter(|d| !d.decl.kind.is_forward()) {
        let payload = encode_payload(&d.decl);
        match &winner {
            None => winner = Some((d, payload)),
            Some((w, p)) if *p != payload => {
                return Err(ModfileError::OdrViolation {
                    name: first.decl.name.clone(),
                    module_a: w.module.clone(),
                    module_b: d.module.clone(),
                });
            }
            Some(_) => {}
        }
    }

    let contributing_modules = sorted.iter().map(|d| d.module.clone()).collect();
    let (chosen, payload, defining_module) = match winner {
        Some((w, p)) => (w, p, Some(w.module.clone())),
        None => {
            let w = sorted[0];
            (w, encode_payload(&w.decl), None)
        }
    };
    Ok(Entity {
        name: chosen.decl.name.clone(),
        kind: EntityKind::of(&chosen.decl.kind),
        canonical_payload: payload,
        defining_module,
        contributing_modules,
        decl: chosen.decl.clone(),
    })
}

/// Merges every module into one precompiled file named [`PCH_NAME`].
///
/// `modules` are taken in module_id order (position). Each distinct name
/// becomes one table entry carrying the union of its flags and the merged
/// entity's declaration.
pub fn build_pch(modules: &[ModuleFile]) -> Result<Vec<u8>, ModfileError> {
    let mut by_name: BTreeMap<&str, (IdentFlags, Vec<SourcedDecl>)> = BTreeMap::new();
    for (id, m) in modules.iter().enumerate() {
        for e in m.entries() {
            let (decl, _) = m.deserialize_decl(&e.name)?;
            let slot = by_name
                .entry(&e.name)
                .or_insert_with(|| (IdentFlags::empty(), Vec::new()));
            slot.0 |= e.flags;
            slot.1.push(SourcedDecl {
                decl,
                module: m.name().to_string(),
                module_id: id as u32,
            });
        }
    }
    let merged: Vec<(String, IdentFlags, Entity)> = by_name
        .into_iter()
        .map(|(name, (flags, decls))| Ok((name.to_string(), flags, merge_entities(&decls)?)))
        .collect::<Result<_, ModfileError>>()?;
    let entries: Vec<(String, IdentFlags, &Decl)> = merged
        .iter()
        .map(|(n, f, e)| (n.clone(), *f, &e.decl))
        .collect();
    Ok(write_module(PCH_NAME, &[], &entries))
}
