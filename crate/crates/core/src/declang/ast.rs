use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Builtin {
    I32,
    I64,
    F64,
    Bool,
}

impl Builtin {
    pub const ALL: [Builtin; 4] = [Builtin::I32, Builtin::I64, Builtin::F64, Builtin::Bool];

    pub fn keyword(self) -> &'static str {
        match self {
            Builtin::I32 => "i32",
            Builtin::I64 => "i64",
            Builtin::F64 => "f64",
            Builtin::Bool => "bool",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.keyword() == word)
    }

    /// Size in bytes used by `sizeof`.
    pub fn size(self) -> u64 {
        match self {
            Builtin::I32 => 4,
            Builtin::I64 | Builtin::F64 => 8,
            Builtin::Bool => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeBase {
    Builtin(Builtin),
    Named(String),
}

/// A type expression: a base wrapped in `indirection` levels of `ptr<...>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypeRef {
    pub base: TypeBase,
    pub indirection: u32,
}

impl TypeRef {
    pub fn builtin(b: Builtin) -> Self {
        TypeRef {
            base: TypeBase::Builtin(b),
            indirection: 0,
        }
    }

    pub fn named(name: impl Into<String>) -> Self {
        TypeRef {
            base: TypeBase::Named(name.into()),
            indirection: 0,
        }
    }

    pub fn ptr(self) -> Self {
        TypeRef {
            indirection: self.indirection + 1,
            ..self
        }
    }

    pub fn named_base(&self) -> Option<&str> {
        match &self.base {
            TypeBase::Named(n) => Some(n),
            TypeBase::Builtin(_) => None,
        }
    }

    /// What a by-value use of this type requires from its named base.
    pub fn value_need(&self) -> Need {
        if self.indirection == 0 {
            Need::Definition
        } else {
            Need::ForwardOk
        }
    }
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for _ in 0..self.indirection {
            f.write_str("ptr<")?;
        }
        match &self.base {
            TypeBase::Builtin(b) => f.write_str(b.keyword())?,
            TypeBase::Named(n) => f.write_str(n)?,
        }
        for _ in 0..self.indirection {
            f.write_str(">")?;
        }
        Ok(())
    }
}

/// How much a use site needs to know about a name.
///
/// Ordered so that `Definition > ForwardOk`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Need {
    ForwardOk,
    Definition,
}

impl fmt::Display for Need {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Need::ForwardOk => "forward-ok",
            Need::Definition => "definition",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dep {
    pub name: String,
    pub need: Need,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Field {
    pub name: String,
    pub ty: TypeRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DeclKind {
    StructDef { fields: Vec<Field> },
    StructFwd,
    EnumDef { enumerators: Vec<String> },
    Alias { target: TypeRef },
    FuncDecl { params: Vec<TypeRef>, ret: TypeRef },
}

impl DeclKind {
    pub fn is_forward(&self) -> bool {
        matches!(self, DeclKind::StructFwd)
    }

    /// Struct and enum definitions; the kinds whose layout is known.
    pub fn is_type_definition(&self) -> bool {
        matches!(self, DeclKind::StructDef { .. } | DeclKind::EnumDef { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            DeclKind::StructDef { .. } => "struct",
            DeclKind::StructFwd => "struct-fwd",
            DeclKind::EnumDef { .. } => "enum",
            DeclKind::Alias { .. } => "alias",
            DeclKind::FuncDecl { .. } => "fn",
        }
    }
}

/// Where a declaration came from. The path is relative to the module root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Origin {
    pub path: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decl {
    pub name: String,
    pub kind: DeclKind,
    pub deps: Vec<Dep>,
    pub origin: Origin,
}

impl Decl {
    /// Builds a declaration, deriving its dependency edges from the payload.
    pub fn new(name: impl Into<String>, kind: DeclKind, origin: Origin) -> Self {
        let deps = derive_deps(&kind);
        Decl {
            name: name.into(),
            kind,
            deps,
            origin,
        }
    }

    pub fn need_of(&self, name: &str) -> Option<Need> {
        self.deps.iter().find(|d| d.name == name).map(|d| d.need)
    }
}

/// Dependency rule: a named base used by value inside a struct needs a
/// definition; everything else (pointers, alias targets, function
/// signatures) only needs the name to be declared. A name used both ways
/// keeps the stronger need, at the position of its first use.
pub fn derive_deps(kind: &DeclKind) -> Vec<Dep> {
    let mut deps: Vec<Dep> = Vec::new();
    let mut add = |ty: &TypeRef, need: Need| {
        if let Some(name) = ty.named_base() {
            match deps.iter_mut().find(|d| d.name == name) {
                Some(d) => d.need = d.need.max(need),
                None => deps.push(Dep {
                    name: name.to_string(),
                    need,
                }),
            }
        }
    };
    match kind {
        DeclKind::StructDef { fields } => {
            for f in fields {
                add(&f.ty, f.ty.value_need());
            }
        }
        DeclKind::Alias { target } => add(target, Need::ForwardOk),
        DeclKind::FuncDecl { params, ret } => {
            for p in params {
                add(p, Need::ForwardOk);
            }
            add(ret, Need::ForwardOk);
        }
        DeclKind::StructFwd | DeclKind::EnumDef { .. } => {}
    }
    deps
}

impl fmt::Display for Decl {
    /// Canonical single-line rendering.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = &self.name;
        match &self.kind {
            DeclKind::StructFwd => write!(f, "struct {name};"),
            DeclKind::StructDef { fields } => {
                write!(f, "struct {name} {{ ")?;
                for field in fields {
                    write!(f, "{}: {}; ", field.name, field.ty)?;
                }
                f.write_str("};")
            }
            DeclKind::EnumDef { enumerators } => {
                write!(f, "enum {name} {{ {} }};", enumerators.join(", "))
            }
            DeclKind::Alias { target } => write!(f, "using {name} = {target};"),
            DeclKind::FuncDecl { params, ret } => {
                write!(f, "fn {name}(")?;
                for (i, p) in params.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ") -> {ret};")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderAST {
    pub path: String,
    pub items: Vec<Decl>,
    pub includes: Vec<String>,
}

impl HeaderAST {
    /// Canonical text: includes first, then one item per line.
    ///
    /// Re-parsing the output of `render` of a parsed canonical header gives
    /// back an identical AST, line numbers included.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for inc in &self.includes {
            out.push_str(&format!("include \"{inc}\";\n"));
        }
        for item in &self.items {
            out.push_str(&item.to_string());
            out.push('\n');
        }
        out
    }
}

/// One statement of the interpreter language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    New(String),
    Declare { var: String, ty: TypeRef },
    SizeOf(String),
    Call(String),
    Directive(Directive),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directive {
    Stats,
    Loaded,
    Strategy,
    Quit,
}

impl Directive {
    pub fn from_name(name: &str) -> Option<Directive> {
        match name {
            "stats" => Some(Directive::Stats),
            "loaded" => Some(Directive::Loaded),
            "strategy" => Some(Directive::Strategy),
            "quit" => Some(Directive::Quit),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Directive::Stats => "stats",
            Directive::Loaded => "loaded",
            Directive::Strategy => "strategy",
            Directive::Quit => "quit",
        }
    }
}

impl Statement {
    /// The names this statement looks up, with the need of each lookup.
    /// `sizeof` reports only its top-level lookup.
    pub fn lookup(&self) -> Option<(&str, Need)> {
        match self {
            Statement::New(n) | Statement::SizeOf(n) => Some((n, Need::Definition)),
            Statement::Call(n) => Some((n, Need::ForwardOk)),
            Statement::Declare { ty, .. } => ty.named_base().map(|n| (n, ty.value_need())),
            Statement::Directive(_) => None,
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::New(n) => write!(f, "new {n};"),
            Statement::Declare { var, ty } => write!(f, "declare {var}: {ty};"),
            Statement::SizeOf(n) => write!(f, "sizeof({n});"),
            Statement::Call(n) => write!(f, "call {n};"),
            Statement::Directive(d) => write!(f, ".{}", d.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deps_keep_strongest_need() {
        let kind = DeclKind::StructDef {
            fields: vec![
                Field {
                    name: "p".into(),
                    ty: TypeRef::named("A").ptr(),
                },
                Field {
                    name: "a".into(),
                    ty: TypeRef::named("A"),
                },
            ],
        };
        assert_eq!(
            derive_deps(&kind),
            vec![Dep {
                name: "A".into(),
                need: Need::Definition
            }]
        );
    }

    #[test]
    fn type_display() {
        assert_eq!(TypeRef::named("T").ptr().ptr().to_string(), "ptr<ptr<T>>");
        assert_eq!(TypeRef::builtin(Builtin::Bool).to_string(), "bool");
    }

    #[test]
    fn forward_has_no_deps() {
        let d = Decl::new("A", DeclKind::StructFwd, Origin::default());
        assert!(d.deps.is_empty());
    }
}
