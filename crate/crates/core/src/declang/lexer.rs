use std::fmt;

use super::DeclangError;

/// Reserved words of both the header language and the statement language.
pub const KEYWORDS: &[&str] = &[
    "struct", "enum", "using", "fn", "include", "ptr", "i32", "i64", "f64", "bool", "new",
    "declare", "sizeof", "call",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword,
    Ident,
    Punct,
    /// String literal; `text` keeps the surrounding quotes.
    Str,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub col: u32,
}

impl Token {
    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.is(TokenKind::Punct, text)
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.is(TokenKind::Keyword, text)
    }

    /// Contents of a string literal without its quotes.
    pub fn string_value(&self) -> Option<&str> {
        match self.kind {
            TokenKind::Str => Some(&self.text[1..self.text.len() - 1]),
            _ => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TokenKind::Eof => f.write_str("end of input"),
            _ => write!(f, "`{}`", self.text),
        }
    }
}

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

/// Returns true if `s` matches `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, DeclangError> {
    let mut cur = Cursor {
        chars: source.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        let (line, col) = (cur.line, cur.col);
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' {
            cur.bump();
            if cur.peek() != Some('/') {
                return Err(DeclangError::Lex { line, col });
            }
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut text = String::new();
            while let Some(c) = cur.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    text.push(c);
                    cur.bump();
                } else {
                    break;
                }
            }
            let kind = if is_keyword(&text) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            };
            tokens.push(Token {
                kind,
                text,
                line,
                col,
            });
            continue;
        }
        if c == '"' {
            let mut text = String::from('"');
            cur.bump();
            loop {
                match cur.peek() {
                    Some('"') => {
                        cur.bump();
                        text.push('"');
                        break;
                    }
                    Some('\n') | None => return Err(DeclangError::Lex { line, col }),
                    Some(c) => {
                        text.push(c);
                        cur.bump();
                    }
                }
            }
            tokens.push(Token {
                kind: TokenKind::Str,
                text,
                line,
                col,
            });
            continue;
        }
        if c == '-' {
            cur.bump();
            if cur.peek() != Some('>') {
                return Err(DeclangError::Lex { line, col });
            }
            cur.bump();
            tokens.push(Token {
                kind: TokenKind::Punct,
                text: "->".to_string(),
                line,
                col,
            });
            continue;
        }
        if matches!(
            c,
            ';' | '{' | '}' | ':' | ',' | '(' | ')' | '<' | '>' | '=' | '.'
        ) {
            cur.bump();
            tokens.push(Token {
                kind: TokenKind::Punct,
                text: c.to_string(),
                line,
                col,
            });
            continue;
        }
        return Err(DeclangError::Lex { line, col });
    }

    tokens.push(Token {
        kind: TokenKind::Eof,
        text: String::new(),
        line: cur.line,
        col: cur.col,
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds_and_text(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, t.text))
            .collect()
    }

    #[test]
    fn empty_input_is_just_eof() {
        let toks = tokenize("").unwrap();
        assert_eq!(toks.len(), 1);
        assert_eq!(toks[0].kind, TokenKind::Eof);
        assert_eq!((toks[0].line, toks[0].col), (1, 1));
    }

    #[test]
    fn forward_declaration() {
        use TokenKind::*;
        assert_eq!(
            kinds_and_text("struct Gpad;"),
            vec![
                (Keyword, "struct".into()),
                (Ident, "Gpad".into()),
                (Punct, ";".into()),
                (Eof, String::new()),
            ]
        );
    }

    #[test]
    fn comments_are_dropped() {
        // x : ptr < T > ; eof
        let toks = tokenize("x : ptr<T>; // c").unwrap();
        assert_eq!(toks.len(), 8);
        assert!(toks.iter().all(|t| t.text != "c" && !t.text.contains("//")));
    }

    #[test]
    fn positions_are_one_based() {
        let toks = tokenize("struct A;\n  fn").unwrap();
        assert_eq!((toks[0].line, toks[0].col), (1, 1));
        assert_eq!((toks[1].line, toks[1].col), (1, 8));
        assert_eq!((toks[3].line, toks[3].col), (2, 3));
    }

    #[test]
    fn arrow_and_strings() {
        let toks = tokenize("-> include \"a/b.dh\"").unwrap();
        assert!(toks[0].is_punct("->"));
        assert_eq!(toks[2].string_value(), Some("a/b.dh"));
    }

    #[test]
    fn crlf_is_whitespace() {
        let toks = tokenize("struct A;\r\nstruct B;\r\n").unwrap();
        assert_eq!(toks.len(), 7);
        assert_eq!(toks[3].line, 2);
    }

    #[test]
    fn lex_errors_carry_position() {
        assert_eq!(
            tokenize("struct 9A;").unwrap_err(),
            DeclangError::Lex { line: 1, col: 8 }
        );
        assert_eq!(
            tokenize("a\n  - b").unwrap_err(),
            DeclangError::Lex { line: 2, col: 3 }
        );
        assert!(tokenize("\"unterminated").is_err());
        assert!(tokenize("a / b").is_err());
        assert!(tokenize("#").is_err());
    }

    #[test]
    fn identifier_shape() {
        assert!(is_identifier("S0_1"));
        assert!(is_identifier("_x"));
        assert!(!is_identifier("0x"));
        assert!(!is_identifier(""));
        assert!(!is_identifier("a-b"));
    }
}
