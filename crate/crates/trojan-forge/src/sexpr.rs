//! S-expression reader and writer shared by the netlist and template formats.
//!
//! Atoms are plain strings; whether a string was quoted in the source is not
//! retained. The writer re-quotes anything containing whitespace, parens,
//! slashes, quotes or backslashes, so a parse/write cycle is stable after the
//! first normalization pass.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexpr {
    Atom(String),
    List(Vec<Sexpr>),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub message: String,
}

impl Sexpr {
    pub fn atom(s: impl Into<String>) -> Self {
        Sexpr::Atom(s.into())
    }

    pub fn list(items: Vec<Sexpr>) -> Self {
        Sexpr::List(items)
    }

    /// Builds `(tag value)`, the ubiquitous key-value form.
    pub fn pair(tag: &str, value: impl Into<String>) -> Self {
        Sexpr::List(vec![Sexpr::atom(tag), Sexpr::atom(value)])
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom(s) => Some(s),
            Sexpr::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::Atom(_) => None,
            Sexpr::List(items) => Some(items),
        }
    }

    /// Tag of a list form: the leading atom of `(tag ...)`.
    pub fn tag(&self) -> Option<&str> {
        self.as_list().and_then(|items| items.first()).and_then(Sexpr::as_atom)
    }

    /// Child lists of this form carrying the given tag.
    pub fn children<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a Sexpr> + 'a {
        self.as_list()
            .unwrap_or(&[])
            .iter()
            .skip(1)
            .filter(move |c| c.tag() == Some(tag))
    }

    pub fn first_child(&self, tag: &str) -> Option<&Sexpr> {
        self.as_list()?.iter().skip(1).find(|c| c.tag() == Some(tag))
    }

    /// Value of a `(tag value)` child, e.g. `ref` out of `(comp (ref R1) ...)`.
    pub fn child_value(&self, tag: &str) -> Option<&str> {
        self.first_child(tag)
            .and_then(Sexpr::as_list)
            .and_then(|items| items.get(1))
            .and_then(Sexpr::as_atom)
    }
}

struct Tokenizer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

#[derive(Debug, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
}

impl<'a> Tokenizer<'a> {
    fn new(text: &'a str) -> Self {
        Tokenizer { chars: text.chars().peekable(), line: 1 }
    }

    fn err(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError { line: self.line, message: message.into() }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        if c == Some('\n') {
            self.line += 1;
        }
        c
    }

    fn next_token(&mut self) -> Result<Option<(Token, usize)>, SyntaxError> {
        loop {
            match self.chars.peek() {
                None => return Ok(None),
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('(') => {
                    let line = self.line;
                    self.bump();
                    return Ok(Some((Token::Open, line)));
                }
                Some(')') => {
                    let line = self.line;
                    self.bump();
                    return Ok(Some((Token::Close, line)));
                }
                Some('"') => {
                    let line = self.line;
                    self.bump();
                    let s = self.quoted_string()?;
                    return Ok(Some((Token::Atom(s), line)));
                }
                Some(_) => {
                    let line = self.line;
                    let s = self.bare_token();
                    return Ok(Some((Token::Atom(s), line)));
                }
            }
        }
    }

    fn quoted_string(&mut self) -> Result<String, SyntaxError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated string")),
                Some('"') => return Ok(s),
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('r') => s.push('\r'),
                    Some(other) => {
                        return Err(self.err(format!("unknown escape `\\{other}`")));
                    }
                    None => return Err(self.err("unterminated string")),
                },
                Some(c) => s.push(c),
            }
        }
    }

    fn bare_token(&mut self) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() || c == '(' || c == ')' || c == '"' {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }
}

/// Parses a document containing exactly one top-level form.
pub fn parse(text: &str) -> Result<Sexpr, SyntaxError> {
    let mut tok = Tokenizer::new(text);
    let first = tok
        .next_token()?
        .ok_or_else(|| tok.err("empty document"))?;
    let form = parse_form(&mut tok, first)?;
    if let Some((_, line)) = tok.next_token()? {
        return Err(SyntaxError { line, message: "trailing content after top-level form".into() });
    }
    Ok(form)
}

fn parse_form(tok: &mut Tokenizer, first: (Token, usize)) -> Result<Sexpr, SyntaxError> {
    match first.0 {
        Token::Atom(s) => Ok(Sexpr::Atom(s)),
        Token::Close => Err(SyntaxError { line: first.1, message: "unexpected `)`".into() }),
        Token::Open => {
            let open_line = first.1;
            let mut items = Vec::new();
            loop {
                match tok.next_token()? {
                    None => {
                        return Err(SyntaxError {
                            line: open_line,
                            message: "unbalanced parenthesis: list is never closed".into(),
                        })
                    }
                    Some((Token::Close, _)) => return Ok(Sexpr::List(items)),
                    Some(other) => items.push(parse_form(tok, other)?),
                }
            }
        }
    }
}

fn needs_quoting(s: &str) -> bool {
    s.is_empty()
        || s.chars().any(|c| {
            c.is_whitespace() || matches!(c, '(' | ')' | '/' | '"' | '\\')
        })
}

pub fn write_atom(out: &mut String, s: &str) {
    if !needs_quoting(s) {
        out.push_str(s);
        return;
    }
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out.push('"');
}

/// Compact single-line rendering, used for preserved opaque forms.
pub fn write_compact(sexpr: &Sexpr, out: &mut String) {
    match sexpr {
        Sexpr::Atom(s) => write_atom(out, s),
        Sexpr::List(items) => {
            out.push('(');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write_compact(item, out);
            }
            out.push(')');
        }
    }
}

impl fmt::Display for Sexpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_compact(self, &mut s);
        f.write_str(&s)
    }
}
