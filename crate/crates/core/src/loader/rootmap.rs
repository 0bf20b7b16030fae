//! `modules.rootmap`: `IDENT HEADER_PATH` lines telling the textual strategy
//! which header to parse for an identifier. First match wins.

use std::collections::HashMap;

use super::LoadError;
use crate::declang::is_identifier;

pub const ROOTMAP_FILE: &str = "modules.rootmap";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Rootmap {
    headers: HashMap<String, String>,
}

impl Rootmap {
    pub fn parse(text: &str) -> Result<Rootmap, LoadError> {
        let mut headers = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(ident), Some(path), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(LoadError::Rootmap {
                    line: i + 1,
                    message: "expected `IDENT HEADER_PATH`".into(),
                });
            };
            if !is_identifier(ident) {
                return Err(LoadError::Rootmap {
                    line: i + 1,
                    message: format!("`{ident}` is not an identifier"),
                });
            }
            headers
                .entry(ident.to_string())
                .or_insert_with(|| path.to_string());
        }
        Ok(Rootmap { headers })
    }

    pub fn header_for(&self, ident: &str) -> Option<&str> {
        self.headers.get(ident).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.headers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.headers.is_empty()
    }
}
