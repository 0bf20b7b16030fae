//! The statement evaluator: each statement triggers the lookups it needs
//! through a [`Session`] and reports what it cost.

use std::fmt;
use std::io::{BufRead, Write};

use crate::declang::{
    parse_script, parse_statement, DeclKind, DeclangError, Directive, Need, Statement, TypeBase,
    TypeRef,
};
use crate::loader::{LoadError, LoadStats, Outcome, Session};
use crate::modfile::ModfileError;

pub const PROMPT: &str = "modix> ";

/// Size of any pointer.
pub const PTR_SIZE: u64 = 8;
/// Size of any enum.
pub const ENUM_SIZE: u64 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailReason {
    NotFound(String),
    OdrViolation(String),
    AliasCycle(String),
    /// A struct contains itself by value.
    InfiniteSize(String),
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailReason::NotFound(n) => write!(f, "NotFound: {n}"),
            FailReason::OdrViolation(m) => write!(f, "OdrViolation: {m}"),
            FailReason::AliasCycle(n) => write!(f, "AliasCycle: {n}"),
            FailReason::InfiniteSize(n) => write!(f, "InfiniteSize: {n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalOutcome {
    /// Success; `sizeof` carries its value.
    Ok(Option<u64>),
    Fail(FailReason),
    /// Directive output.
    Info(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalResult {
    pub echo: String,
    pub outcome: EvalOutcome,
    pub stats_delta: LoadStats,
}

impl EvalResult {
    pub fn is_ok(&self) -> bool {
        !matches!(self.outcome, EvalOutcome::Fail(_))
    }
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            EvalOutcome::Ok(None) => write!(f, "{}: ok", self.echo)?,
            EvalOutcome::Ok(Some(v)) => write!(f, "{}: {v}", self.echo)?,
            EvalOutcome::Fail(r) => write!(f, "{}: error: {r}", self.echo)?,
            EvalOutcome::Info(s) => return f.write_str(s),
        }
        let d = &self.stats_delta;
        write!(
            f,
            "  [+{} modules, +{} decls, +{} bytes, +{} ticks]",
            d.module_count(),
            d.decls_deserialized,
            d.bytes_read,
            d.ticks
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InterpError {
    #[error("line {line}: {source}")]
    Parse {
        line: u32,
        #[source]
        source: DeclangError,
    },
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

enum Failure {
    Reason(FailReason),
    Fatal(LoadError),
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Odr(ModfileError::OdrViolation {
                name,
                module_a,
                module_b,
            }) => Failure::Reason(FailReason::OdrViolation(format!(
                "{name} ({module_a} vs {module_b})"
            ))),
            e => Failure::Fatal(e),
        }
    }
}

fn resolve_ok(
    session: &mut Session,
    name: &str,
    need: Need,
) -> Result<Option<crate::modfile::Entity>, Failure> {
    match session.resolve(name, need)?.outcome {
        Outcome::Resolved(e) => Ok(Some(*e)),
        Outcome::ImplicitForward => Ok(None),
        Outcome::NotFound => Err(Failure::Reason(FailReason::NotFound(name.to_string()))),
    }
}

/// `sizeof` of a named type. `stack` holds the names being sized.
fn size_of_named(
    session: &mut Session,
    name: &str,
    stack: &mut Vec<(String, bool)>,
) -> Result<u64, Failure> {
    if let Some(pos) = stack.iter().position(|(n, _)| n == name) {
        let through_alias = stack[pos..].iter().any(|(_, alias)| *alias);
        return Err(Failure::Reason(if through_alias {
            FailReason::AliasCycle(name.to_string())
        } else {
            FailReason::InfiniteSize(name.to_string())
        }));
    }
    let entity = resolve_ok(session, name, Need::Definition)?.expect("definition lookups resolve");
    let is_alias = matches!(entity.decl.kind, DeclKind::Alias { .. });
    stack.push((name.to_string(), is_alias));
    let size = match &entity.decl.kind {
        DeclKind::StructDef { fields } => {
            let mut total = 0;
            for f in fields {
                total += size_of_type(session, &f.ty, stack)?;
            }
            total
        }
        DeclKind::EnumDef { .. } => ENUM_SIZE,
        DeclKind::Alias { target } => size_of_type(session, target, stack)?,
        DeclKind::StructFwd | DeclKind::FuncDecl { .. } => {
            return Err(Failure::Reason(FailReason::NotFound(name.to_string())));
        }
    };
    stack.pop();
    Ok(size)
}

fn size_of_type(
    session: &mut Session,
    ty: &TypeRef,
    stack: &mut Vec<(String, bool)>,
) -> Result<u64, Failure> {
    if ty.indirection > 0 {
        return Ok(PTR_SIZE);
    }
    match &ty.base {
        TypeBase::Builtin(b) => Ok(b.size()),
        TypeBase::Named(n) => size_of_named(session, n, stack),
    }
}

fn directive_text(session: &Session, d: Directive) -> String {
    match d {
        Directive::Stats => session.stats().to_string(),
        Directive::Loaded => session.stats().modules_loaded.join("\n"),
        Directive::Strategy => session.strategy().to_string(),
        Directive::Quit => String::new(),
    }
}

/// Evaluates one statement. Lookup failures are reported in the result;
/// errors of the module store itself are returned as `Err`.
pub fn eval(session: &mut Session, stmt: &Statement) -> Result<EvalResult, LoadError> {
    let before = session.stats();
    let result: Result<EvalOutcome, Failure> = match stmt {
        Statement::Directive(d) => Ok(EvalOutcome::Info(directive_text(session, *d))),
        Statement::New(name) => {
            resolve_ok(session, name, Need::Definition).map(|_| EvalOutcome::Ok(None))
        }
        Statement::Call(name) => {
            resolve_ok(session, name, Need::ForwardOk).map(|_| EvalOutcome::Ok(None))
        }
        Statement::Declare { ty, .. } => match ty.named_base() {
            None => Ok(EvalOutcome::Ok(None)),
            Some(base) => resolve_ok(session, base, ty.value_need()).map(|_| EvalOutcome::Ok(None)),
        },
        Statement::SizeOf(name) => {
            size_of_named(session, name, &mut Vec::new()).map(|v| EvalOutcome::Ok(Some(v)))
        }
    };
    let outcome = match result {
        Ok(o) => o,
        Err(Failure::Reason(r)) => EvalOutcome::Fail(r),
        Err(Failure::Fatal(e)) => return Err(e),
    };
    Ok(EvalResult {
        echo: stmt.to_string(),
        outcome,
        stats_delta: session.stats().since(&before),
    })
}

/// Parses `source` whole, then evaluates it up to `.quit`.
pub fn run_script(session: &mut Session, source: &str) -> Result<Vec<EvalResult>, InterpError> {
    let stmts = parse_script(source).map_err(|source| {
        let line = match &source {
            DeclangError::Lex { line, .. } | DeclangError::Parse { line, .. } => *line,
            DeclangError::DuplicateDefinition(_) => 0,
        };
        InterpError::Parse { line, source }
    })?;
    let mut out = Vec::with_capacity(stmts.len());
    for (stmt, _) in stmts {
        if stmt == Statement::Directive(Directive::Quit) {
            break;
        }
        out.push(eval(session, &stmt)?);
    }
    Ok(out)
}

/// Line-oriented read-eval-print loop. Parse errors and lookup failures are
/// printed and the loop continues; module store errors end it.
pub fn repl(
    session: &mut Session,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<(), InterpError> {
    write!(output, "{PROMPT}")?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        let text = line.trim();
        if !text.is_empty() {
            match parse_statement(text) {
                Err(e) => writeln!(output, "error: {e}")?,
                Ok(Statement::Directive(Directive::Quit)) => return Ok(()),
                Ok(stmt) => writeln!(output, "{}", eval(session, &stmt)?)?,
            }
        }
        write!(output, "{PROMPT}")?;
        output.flush()?;
    }
    writeln!(output)?;
    Ok(())
}

#[cfg(test)]
mod tests;
