use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::DeclangError;

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(tokens: &'a [Token]) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn peek(&self) -> &'a Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> &'a Token {
        let t = self.peek();
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    fn error(&self, expected: &str) -> DeclangError {
        let t = self.peek();
        DeclangError::Parse {
            line: t.line,
            col: t.col,
            expected: expected.to_string(),
            found: t.to_string(),
        }
    }

    fn punct(&mut self, p: &str) -> Result<(), DeclangError> {
        if self.peek().is_punct(p) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&format!("`{p}`")))
        }
    }

    fn ident(&mut self) -> Result<String, DeclangError> {
        if self.peek().kind == TokenKind::Ident {
            Ok(self.bump().text.clone())
        } else {
            Err(self.error("identifier"))
        }
    }

    fn string(&mut self) -> Result<String, DeclangError> {
        match self.peek().string_value() {
            Some(s) => {
                let s = s.to_string();
                self.bump();
                Ok(s)
            }
            None => Err(self.error("string literal")),
        }
    }

    fn ty(&mut self) -> Result<TypeRef, DeclangError> {
        let t = self.peek();
        if t.is_keyword("ptr") {
            self.bump();
            self.punct("<")?;
            let inner = self.ty()?;
            self.punct(">")?;
            return Ok(inner.ptr());
        }
        if t.kind == TokenKind::Keyword {
            if let Some(b) = Builtin::from_keyword(&t.text) {
                self.bump();
                return Ok(TypeRef::builtin(b));
            }
        }
        if t.kind == TokenKind::Ident {
            self.bump();
            return Ok(TypeRef::named(t.text.clone()));
        }
        Err(self.error("type"))
    }

    fn item(&mut self, path: &str) -> Result<Item, DeclangError> {
        let start = self.peek();
        let origin = Origin {
            path: path.to_string(),
            line: start.line,
        };
        if start.kind != TokenKind::Keyword {
            return Err(self.error("declaration"));
        }
        match start.text.as_str() {
            "include" => {
                self.bump();
                let p = self.string()?;
                self.punct(";")?;
                Ok(Item::Include(p))
            }
            "struct" => {
                self.bump();
                let name = self.ident()?;
                if self.peek().is_punct(";") {
                    self.bump();
                    return Ok(Item::Decl(Decl::new(name, DeclKind::StructFwd, origin)));
                }
                self.punct("{")?;
                let mut fields = Vec::new();
                while !self.peek().is_punct("}") {
                    let fname = self.ident()?;
                    self.punct(":")?;
                    let ty = self.ty()?;
                    self.punct(";")?;
                    fields.push(Field { name: fname, ty });
                }
                self.punct("}")?;
                self.punct(";")?;
                Ok(Item::Decl(Decl::new(
                    name,
                    DeclKind::StructDef { fields },
                    origin,
                )))
            }
            "enum" => {
                self.bump();
                let name = self.ident()?;
                self.punct("{")?;
                let mut enumerators = vec![self.ident()?];
                while self.peek().is_punct(",") {
                    self.bump();
                    enumerators.push(self.ident()?);
                }
                self.punct("}")?;
                self.punct(";")?;
                Ok(Item::Decl(Decl::new(
                    name,
                    DeclKind::EnumDef { enumerators },
                    origin,
                )))
            }
            "using" => {
                self.bump();
                let name = self.ident()?;
                self.punct("=")?;
                let target = self.ty()?;
                self.punct(";")?;
                Ok(Item::Decl(Decl::new(
                    name,
                    DeclKind::Alias { target },
                    origin,
                )))
            }
            "fn" => {
                self.bump();
                let name = self.ident()?;
                self.punct("(")?;
                let mut params = Vec::new();
                if !self.peek().is_punct(")") {
                    params.push(self.ty()?);
                    while self.peek().is_punct(",") {
                        self.bump();
                        params.push(self.ty()?);
                    }
                }
                self.punct(")")?;
                self.punct("->")?;
                let ret = self.ty()?;
                self.punct(";")?;
                Ok(Item::Decl(Decl::new(
                    name,
                    DeclKind::FuncDecl { params, ret },
                    origin,
                )))
            }
            _ => Err(self.error("declaration")),
        }
    }

    fn statement(&mut self) -> Result<Statement, DeclangError> {
        let t = self.peek();
        if t.is_punct(".") {
            self.bump();
            let name = self.peek();
            let directive = (name.kind == TokenKind::Ident)
                .then(|| Directive::from_name(&name.text))
                .flatten()
                .ok_or_else(|| self.error("directive (stats, loaded, strategy, quit)"))?;
            self.bump();
            return Ok(Statement::Directive(directive));
        }
        if t.kind != TokenKind::Keyword {
            return Err(self.error("statement"));
        }
        let stmt = match t.text.as_str() {
            "new" => {
                self.bump();
                Statement::New(self.ident()?)
            }
            "declare" => {
                self.bump();
                let var = self.ident()?;
                self.punct(":")?;
                let ty = self.ty()?;
                Statement::Declare { var, ty }
            }
            "sizeof" => {
                self.bump();
                self.punct("(")?;
                let name = self.ident()?;
                self.punct(")")?;
                Statement::SizeOf(name)
            }
            "call" => {
                self.bump();
                Statement::Call(self.ident()?)
            }
            _ => return Err(self.error("statement")),
        };
        self.punct(";")?;
        Ok(stmt)
    }
}

enum Item {
    Include(String),
    Decl(Decl),
}

pub fn parse_header(source: &str, path: &str) -> Result<HeaderAST, DeclangError> {
    let tokens = tokenize(source)?;
    let mut p = Parser::new(&tokens);
    let mut items = Vec::new();
    let mut includes = Vec::new();
    let mut defined = HashSet::new();
    while !p.at_eof() {
        match p.item(path)? {
            Item::Include(inc) => includes.push(inc),
            Item::Decl(d) => {
                if !d.kind.is_forward() && !defined.insert(d.name.clone()) {
                    return Err(DeclangError::DuplicateDefinition(d.name));
                }
                items.push(d);
            }
        }
    }
    Ok(HeaderAST {
        path: path.to_string(),
        items,
        includes,
    })
}

/// Parses exactly one statement.
pub fn parse_statement(source: &str) -> Result<Statement, DeclangError> {
    let tokens = tokenize(source)?;
    let mut p = Parser::new(&tokens);
    let stmt = p.statement()?;
    if !p.at_eof() {
        return Err(p.error("end of input"));
    }
    Ok(stmt)
}

/// Parses a sequence of statements, returning each with its 1-based line.
pub fn parse_script(source: &str) -> Result<Vec<(Statement, u32)>, DeclangError> {
    let tokens = tokenize(source)?;
    let mut p = Parser::new(&tokens);
    let mut out = Vec::new();
    while !p.at_eof() {
        let line = p.peek().line;
        out.push((p.statement()?, line));
    }
    Ok(out)
}
