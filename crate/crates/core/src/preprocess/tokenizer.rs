//! Splitting lines into tokens.
//!
//! The default delimiter rule is evaluated by a hand-written scanner that
//! reproduces the leftmost-first semantics of [`DEFAULT_TOKENIZER_PATTERN`]
//! byte for byte; custom rules go through the `regex` crate. The regex form of
//! the default rule is kept as a test oracle for the scanner.

use regex::Regex;

use crate::config::DEFAULT_TOKENIZER_PATTERN;
use crate::error::{Error, Result};
use crate::types::TokenSequence;

#[derive(Debug, Clone)]
pub enum Tokenizer {
    /// The built-in rule, evaluated without a regex engine.
    Default,
    Custom(Regex),
}

impl Tokenizer {
    pub fn new(pattern: &str) -> Result<Self> {
        if pattern == DEFAULT_TOKENIZER_PATTERN {
            return Ok(Tokenizer::Default);
        }
        let regex = compile_linear(pattern)?;
        if regex.is_match("") {
            return Err(Error::Config(format!(
                "tokenizer pattern {pattern:?} matches the empty string"
            )));
        }
        Ok(Tokenizer::Custom(regex))
    }

    /// Append the non-empty fragments of `line` to `out`.
    pub fn split_into<'a>(&self, line: &'a str, out: &mut Vec<&'a str>) {
        match self {
            Tokenizer::Default => split_default(line, out),
            Tokenizer::Custom(re) => out.extend(re.split(line).filter(|t| !t.is_empty())),
        }
    }

    pub fn tokenize(&self, line: &str) -> Result<TokenSequence> {
        let mut parts = Vec::new();
        self.split_into(line, &mut parts);
        TokenSequence::new(parts.into_iter().map(str::to_owned).collect())
    }
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::Default
    }
}

/// The default rule compiled as a regex.
pub fn default_regex() -> Regex {
    Regex::new(DEFAULT_TOKENIZER_PATTERN).expect("default tokenizer pattern compiles")
}

/// Compile a user pattern, rejecting constructs without a linear-time
/// evaluation (lookaround, backreferences).
pub(crate) fn compile_linear(pattern: &str) -> Result<Regex> {
    if let Some(feature) = super_linear_feature(pattern) {
        return Err(Error::Config(format!(
            "pattern {pattern:?} uses {feature}, which is not allowed"
        )));
    }
    Regex::new(pattern).map_err(|e| Error::Config(format!("invalid pattern {pattern:?}: {e}")))
}

fn super_linear_feature(pattern: &str) -> Option<&'static str> {
    let mut chars = pattern.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('1'..='9') => return Some("a backreference"),
                Some('k') if chars.peek() == Some(&'<') => return Some("a backreference"),
                _ => {}
            },
            '(' if chars.peek() == Some(&'?') => {
                chars.next();
                match chars.peek() {
                    Some('=') | Some('!') => return Some("lookahead"),
                    Some('<') => {
                        chars.next();
                        if matches!(chars.peek(), Some('=') | Some('!')) {
                            return Some("lookbehind");
                        }
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }
    None
}

#[inline]
fn is_delimiter_char(c: char) -> bool {
    matches!(
        c,
        '\'' | '"' | ';' | '=' | '(' | ')' | '[' | ']' | '{' | '}' | '?' | '@' | '&' | '<' | '>'
            | ':' | ','
    ) || c.is_whitespace()
}

#[inline]
fn char_at(line: &str, i: usize) -> Option<char> {
    let b = *line.as_bytes().get(i)?;
    if b < 0x80 {
        Some(b as char)
    } else {
        line[i..].chars().next()
    }
}

/// End of one repetition unit of the delimiter run starting at `i`.
#[inline]
fn unit_end(line: &str, i: usize) -> Option<usize> {
    let c = char_at(line, i)?;
    if is_delimiter_char(c) {
        return Some(i + c.len_utf8());
    }
    match c {
        '.' => {
            let mut j = i + 1;
            while let Some(ws) = char_at(line, j).filter(|c| c.is_whitespace()) {
                j += ws.len_utf8();
            }
            if j > i + 1 || j == line.len() {
                Some(j)
            } else {
                None
            }
        }
        '\\' => match line.as_bytes().get(i + 1) {
            Some(b'"') | Some(b'\'') => Some(i + 2),
            _ => None,
        },
        _ => None,
    }
}

#[inline]
fn delimiter_end(line: &str, i: usize) -> Option<usize> {
    if line.as_bytes()[i..].starts_with(b"://") {
        return Some(i + 3);
    }
    let mut j = i;
    while let Some(next) = unit_end(line, j) {
        j = next;
    }
    (j > i).then_some(j)
}

fn split_default<'a>(line: &'a str, out: &mut Vec<&'a str>) {
    let bytes = line.as_bytes();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if let Some(end) = delimiter_end(line, i) {
            if i > start {
                out.push(&line[start..i]);
            }
            i = end;
            start = end;
        } else if bytes[i] < 0x80 {
            i += 1;
        } else {
            i += char_at(line, i).map_or(1, char::len_utf8);
        }
    }
    if start < bytes.len() {
        out.push(&line[start..]);
    }
}
