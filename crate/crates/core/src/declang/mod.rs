//! The miniature header language (`.dh` files) and the interpreter's
//! statement language.
//!
//! Headers hold struct definitions, struct forward declarations, enums,
//! aliases and function declarations. Every declaration records which names
//! it depends on and whether it needs their definition or only a forward
//! declaration; that distinction drives which modules a lookup has to load.

mod ast;
mod lexer;
mod parser;

pub use ast::{
    derive_deps, Builtin, Decl, DeclKind, Dep, Directive, Field, HeaderAST, Need, Origin,
    Statement, TypeBase, TypeRef,
};
pub use lexer::{is_identifier, is_keyword, tokenize, Token, TokenKind, KEYWORDS};
pub use parser::{parse_header, parse_script, parse_statement};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeclangError {
    #[error("{line}:{col}: unexpected character")]
    Lex { line: u32, col: u32 },
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Parse {
        line: u32,
        col: u32,
        expected: String,
        found: String,
    },
    #[error("`{0}` is defined more than once in the same header")]
    DuplicateDefinition(String),
}
