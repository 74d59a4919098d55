//! Ground solver symbols as printed in answer sets.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::term::{Atom, SkolemTerm, Term, EXT_VAR, SKOLEM_PREFIX};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Number(i64),
    Str(String),
    /// Function term; an empty name is a tuple.
    Function { name: String, args: Vec<Symbol> },
}

impl Symbol {
    pub fn constant(name: impl Into<String>) -> Self {
        Symbol::Function { name: name.into(), args: Vec::new() }
    }

    pub fn function(name: impl Into<String>, args: Vec<Symbol>) -> Self {
        Symbol::Function { name: name.into(), args }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            Symbol::Function { name, .. } => Some(name),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Symbol] {
        match self {
            Symbol::Function { args, .. } => args,
            _ => &[],
        }
    }

    /// `name/arity` test.
    pub fn is(&self, name: &str, arity: usize) -> bool {
        self.name() == Some(name) && self.args().len() == arity
    }

    pub fn as_number(&self) -> Option<i64> {
        match self {
            Symbol::Number(n) => Some(*n),
            _ => None,
        }
    }

    /// Interpret this symbol as an object-level atom.
    pub fn to_atom(&self) -> Result<Atom, SymbolError> {
        match self {
            Symbol::Function { name, args } if !name.is_empty() => {
                let args = args.iter().map(Symbol::to_term).collect::<Result<_, _>>()?;
                Ok(Atom::new(name.clone(), args))
            }
            other => Err(SymbolError::NotAnAtom(other.to_string())),
        }
    }

    /// Interpret this symbol as an object-level ground term.
    pub fn to_term(&self) -> Result<Term, SymbolError> {
        match self {
            Symbol::Function { name, args } if args.is_empty() && !name.is_empty() => {
                if name == EXT_VAR {
                    Ok(Term::ExtVar)
                } else if let Some((id, var)) = split_skolem(name) {
                    Ok(Term::Skolem(SkolemTerm { rule_id: id, var: var.into(), args: Vec::new() }))
                } else {
                    Ok(Term::Const(name.clone()))
                }
            }
            Symbol::Function { name, args } => match split_skolem(name) {
                Some((id, var)) => Ok(Term::Skolem(SkolemTerm {
                    rule_id: id,
                    var: var.into(),
                    args: args.iter().map(Symbol::to_term).collect::<Result<_, _>>()?,
                })),
                None => Err(SymbolError::NotATerm(self.to_string())),
            },
            other => Err(SymbolError::NotATerm(other.to_string())),
        }
    }

    pub fn from_atom(atom: &Atom) -> Symbol {
        Symbol::function(atom.predicate.clone(), atom.args.iter().map(Symbol::from_term).collect())
    }

    pub fn from_term(term: &Term) -> Symbol {
        match term {
            Term::Skolem(s) => Symbol::function(s.symbol(), s.args.iter().map(Symbol::from_term).collect()),
            other => Symbol::constant(other.to_string()),
        }
    }
}

fn split_skolem(name: &str) -> Option<(u32, &str)> {
    let rest = name.strip_prefix(SKOLEM_PREFIX)?;
    let (id, var) = rest.split_once('_')?;
    let id = id.parse().ok()?;
    (!var.is_empty()).then_some((id, var))
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SymbolError {
    #[error("`{0}` is not an atom of the object language")]
    NotAnAtom(String),
    #[error("`{0}` is not a term of the object language")]
    NotATerm(String),
    #[error("malformed symbol at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: &'static str },
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Number(n) => write!(f, "{n}"),
            Symbol::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Symbol::Function { name, args } => {
                f.write_str(name)?;
                if args.is_empty() && !name.is_empty() {
                    return Ok(());
                }
                f.write_str("(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                if name.is_empty() && args.len() == 1 {
                    f.write_str(",")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err<T>(&self, msg: &'static str) -> Result<T, SymbolError> {
        Err(SymbolError::Syntax { pos: self.pos, msg })
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn symbol(&mut self) -> Result<Symbol, SymbolError> {
        match self.peek() {
            Some(b'"') => self.string(),
            Some(c) if c.is_ascii_digit() || c == b'-' => self.number(),
            Some(b'(') => {
                let args = self.args()?;
                Ok(Symbol::Function { name: String::new(), args })
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_' || c == b'\'') {
                    self.pos += 1;
                }
                let name = core::str::from_utf8(&self.s[start..self.pos]).unwrap().to_string();
                let args = if self.peek() == Some(b'(') { self.args()? } else { Vec::new() };
                Ok(Symbol::Function { name, args })
            }
            Some(_) => self.err("unexpected character"),
            None => self.err("unexpected end of input"),
        }
    }

    fn args(&mut self) -> Result<Vec<Symbol>, SymbolError> {
        self.pos += 1; // '('
        let mut args = Vec::new();
        if self.peek() == Some(b')') {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.symbol()?);
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                    if self.peek() == Some(b')') {
                        self.pos += 1;
                        return Ok(args);
                    }
                }
                Some(b')') => {
                    self.pos += 1;
                    return Ok(args);
                }
                _ => return self.err("expected `,` or `)`"),
            }
        }
    }

    fn number(&mut self) -> Result<Symbol, SymbolError> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text = core::str::from_utf8(&self.s[start..self.pos]).unwrap();
        match text.parse() {
            Ok(n) => Ok(Symbol::Number(n)),
            Err(_) => self.err("malformed number"),
        }
    }

    fn string(&mut self) -> Result<Symbol, SymbolError> {
        self.pos += 1;
        let mut out = Vec::new();
        loop {
            match self.peek() {
                None => return self.err("unterminated string"),
                Some(b'"') => {
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => {
                    self.pos += 1;
                    let c = match self.peek() {
                        Some(b'n') => b'\n',
                        Some(b't') => b'\t',
                        Some(c) => c,
                        None => return self.err("unterminated escape"),
                    };
                    out.push(c);
                    self.pos += 1;
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
        match String::from_utf8(out) {
            Ok(s) => Ok(Symbol::Str(s)),
            Err(_) => self.err("invalid utf-8 in string"),
        }
    }
}

/// Parse a single symbol.
pub fn parse_symbol(text: &str) -> Result<Symbol, SymbolError> {
    let mut c = Cursor { s: text.trim().as_bytes(), pos: 0 };
    let sym = c.symbol()?;
    if c.pos != c.s.len() {
        return c.err("trailing input after symbol");
    }
    Ok(sym)
}

/// Parse a whitespace-separated line of symbols (one answer set).
pub fn parse_symbol_line(line: &str) -> Result<Vec<Symbol>, SymbolError> {
    let mut c = Cursor { s: line.as_bytes(), pos: 0 };
    let mut out = Vec::new();
    loop {
        c.skip_ws();
        if c.peek().is_none() {
            return Ok(out);
        }
        out.push(c.symbol()?);
        match c.peek() {
            None => {}
            Some(ch) if ch.is_ascii_whitespace() => {}
            Some(_) => return c.err("symbols must be separated by whitespace"),
        }
    }
}
