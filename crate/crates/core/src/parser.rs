//! Rule-file and task-file front end.
//!
//! Rule files use a strict ASP subset:
//!
//! ```text
//! program  := (rule)* ;
//! rule     := atom ":-" literal ("," literal)* "." ;
//! literal  := ["not"] atom ;
//! atom     := ident | ident "(" term ("," term)* ")" ;
//! term     := ident | VARIABLE ;
//! ```
//!
//! `%` starts a comment. A `% #id: k` comment assigns id `k` to the next rule.
//! Task files are JSON objects (see [`parse_task`]).

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Deserialize;

use crate::diagnostic::{Diagnostic, Diagnostics, Parsed, SourceSpan};
use crate::term::{Atom, BlockPattern, Literal, ModelConstraint, Query, Rule, RuleSet, TaskSpec, Term, Variant};
use crate::validate::validate_ruleset;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Var(String),
    LParen,
    RParen,
    Comma,
    Dot,
    If,
    IdDirective(u32),
    Bad(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let bump = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => bump(1, &mut i, &mut col),
            '%' => {
                let start = i;
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                let comment: String = chars[start + 1..i].iter().collect();
                col += (i - start) as u32;
                if let Some(id) = parse_id_directive(&comment) {
                    out.push(Token { tok: Tok::IdDirective(id), line: tl, col: tc });
                }
            }
            '(' => {
                out.push(Token { tok: Tok::LParen, line: tl, col: tc });
                bump(1, &mut i, &mut col);
            }
            ')' => {
                out.push(Token { tok: Tok::RParen, line: tl, col: tc });
                bump(1, &mut i, &mut col);
            }
            ',' => {
                out.push(Token { tok: Tok::Comma, line: tl, col: tc });
                bump(1, &mut i, &mut col);
            }
            '.' => {
                out.push(Token { tok: Tok::Dot, line: tl, col: tc });
                bump(1, &mut i, &mut col);
            }
            ':' if chars.get(i + 1) == Some(&'-') => {
                out.push(Token { tok: Tok::If, line: tl, col: tc });
                bump(2, &mut i, &mut col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                col += (i - start) as u32;
                let tok = if c.is_ascii_lowercase() { Tok::Ident(word) } else { Tok::Var(word) };
                out.push(Token { tok, line: tl, col: tc });
            }
            other => {
                out.push(Token { tok: Tok::Bad(other), line: tl, col: tc });
                bump(1, &mut i, &mut col);
            }
        }
    }
    out
}

fn parse_id_directive(comment: &str) -> Option<u32> {
    let rest = comment.trim().strip_prefix("#id:")?;
    rest.trim().parse().ok()
}

/// How variables are treated inside a single atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarPolicy {
    /// Rule bodies and heads: named variables only.
    Rule,
    /// Ground atoms only.
    Ground,
    /// Query atoms: named variables, no wildcard.
    Query,
    /// Block patterns: `_` expands to fresh distinct variables.
    Pattern,
}

struct Parser<'a> {
    file: &'a str,
    toks: Vec<Token>,
    pos: usize,
    eof: (u32, u32),
    policy: VarPolicy,
    wildcards: u32,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'a> Parser<'a> {
    fn new(file: &'a str, text: &str, policy: VarPolicy) -> Self {
        let toks = lex(text);
        let last_line = text.lines().count().max(1) as u32;
        let last_col = text.lines().last().map(|l| l.chars().count() as u32 + 1).unwrap_or(1);
        Parser { file, toks, pos: 0, eof: (last_line, last_col), policy, wildcards: 0 }
    }

    fn span_at(&self, idx: usize) -> SourceSpan {
        match self.toks.get(idx) {
            Some(t) => SourceSpan::new(self.file, t.line, t.col),
            None => SourceSpan::new(self.file, self.eof.0, self.eof.1),
        }
    }

    fn span(&self) -> SourceSpan {
        self.span_at(self.pos)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, off: usize) -> Option<&Tok> {
        self.toks.get(self.pos + off).map(|t| &t.tok)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> PResult<()> {
        let span = self.span();
        match self.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(Diagnostic::error(span, format!("expected {what}, found {}", describe(&t)))),
            None => Err(Diagnostic::error(span, format!("expected {what}, found end of input"))),
        }
    }

    fn atom(&mut self) -> PResult<Atom> {
        let span = self.span();
        let name = match self.next() {
            Some(Tok::Ident(n)) => n,
            Some(Tok::Var(v)) => {
                return Err(Diagnostic::error(
                    span,
                    format!("predicate names must start with a lowercase letter, found `{v}`"),
                ))
            }
            Some(t) => return Err(Diagnostic::error(span, format!("expected an atom, found {}", describe(&t)))),
            None => return Err(Diagnostic::error(span, "expected an atom, found end of input")),
        };
        if name == "not" {
            return Err(Diagnostic::error(span, "`not` cannot be used as a predicate name"));
        }
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            loop {
                args.push(self.term()?);
                let span = self.span();
                match self.next() {
                    Some(Tok::Comma) => continue,
                    Some(Tok::RParen) => break,
                    Some(t) => {
                        return Err(Diagnostic::error(span, format!("expected `,` or `)`, found {}", describe(&t))))
                    }
                    None => return Err(Diagnostic::error(span, "unclosed `(`")),
                }
            }
        }
        Ok(Atom::new(name, args))
    }

    fn term(&mut self) -> PResult<Term> {
        let span = self.span();
        match self.next() {
            Some(Tok::Ident(c)) => {
                if self.peek() == Some(&Tok::LParen) {
                    return Err(Diagnostic::error(
                        span,
                        format!("function symbol `{c}(...)` is not allowed; terms must be constants or variables"),
                    ));
                }
                Ok(Term::constant(c))
            }
            Some(Tok::Var(v)) => self.variable(v, span),
            Some(t) => Err(Diagnostic::error(span, format!("expected a term, found {}", describe(&t)))),
            None => Err(Diagnostic::error(span, "expected a term, found end of input")),
        }
    }

    fn variable(&mut self, v: String, span: SourceSpan) -> PResult<Term> {
        match self.policy {
            VarPolicy::Ground => Err(Diagnostic::error(span, format!("expected a ground atom, found variable `{v}`"))),
            VarPolicy::Pattern if v == "_" => {
                self.wildcards += 1;
                Ok(Term::Var(format!("_W{}", self.wildcards)))
            }
            _ if v == "_" => Err(Diagnostic::error(span, "wildcard `_` is only allowed in block patterns")),
            _ => Ok(Term::Var(v)),
        }
    }

    fn literal(&mut self) -> PResult<Literal> {
        let naf = matches!(self.peek(), Some(Tok::Ident(n)) if n == "not")
            && matches!(self.peek_at(1), Some(Tok::Ident(_)) | Some(Tok::Var(_)));
        if naf {
            self.pos += 1;
            Ok(Literal::naf(self.atom()?))
        } else {
            Ok(Literal::pos(self.atom()?))
        }
    }

    fn body(&mut self) -> PResult<Vec<Literal>> {
        let mut body = alloc::vec![self.literal()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            body.push(self.literal()?);
        }
        Ok(body)
    }

    fn rule(&mut self, id: u32) -> PResult<Rule> {
        let head = self.atom()?;
        let span = self.span();
        match self.next() {
            Some(Tok::If) => {}
            Some(Tok::Dot) => {
                return Err(Diagnostic::error(
                    span,
                    "a rule needs a nonempty body; facts belong in the task file",
                ))
            }
            Some(t) => return Err(Diagnostic::error(span, format!("expected `:-`, found {}", describe(&t)))),
            None => return Err(Diagnostic::error(span, "expected `:-`, found end of input")),
        }
        let body = self.body()?;
        self.expect(Tok::Dot, "`.` at the end of the rule")?;
        Ok(Rule::new(id, head, body))
    }

    fn skip_statement(&mut self) {
        while let Some(t) = self.next() {
            if t == Tok::Dot {
                break;
            }
        }
    }

    fn finish(&mut self) -> PResult<()> {
        if self.at_end() {
            Ok(())
        } else {
            let span = self.span();
            let t = self.next().unwrap();
            Err(Diagnostic::error(span, format!("unexpected {} after the end", describe(&t))))
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Dot => "`.`".into(),
        Tok::If => "`:-`".into(),
        Tok::IdDirective(_) => "an id annotation".into(),
        Tok::Bad(c) => format!("unexpected character `{c}`"),
    }
}

/// Parse a rule file. Validation findings are attached as warnings.
pub fn parse_rules(file: &str, text: &str) -> Result<Parsed<RuleSet>, Diagnostics> {
    let mut p = Parser::new(file, text, VarPolicy::Rule);
    let mut rules = Vec::new();
    let mut errors = Vec::new();
    let mut pending_id = None;
    let mut next_pos = 1u32;
    while !p.at_end() {
        if let Some(Tok::IdDirective(id)) = p.peek() {
            pending_id = Some(*id);
            p.pos += 1;
            continue;
        }
        let id = pending_id.take().unwrap_or(next_pos);
        next_pos += 1;
        match p.rule(id) {
            Ok(r) => rules.push(r),
            Err(d) => {
                errors.push(d);
                p.skip_statement();
            }
        }
    }
    if !errors.is_empty() {
        return Err(Diagnostics(errors));
    }
    let rules = RuleSet::new(rules);
    let warnings = validate_ruleset(&rules)
        .into_iter()
        .map(|v| Diagnostic::warning(SourceSpan::new(file, 1, 1), v.to_string()))
        .collect();
    Ok(Parsed { value: rules, warnings })
}

fn single_atom(file: &str, text: &str, policy: VarPolicy) -> Result<Atom, Diagnostic> {
    let mut p = Parser::new(file, text, policy);
    let atom = p.atom()?;
    if p.peek() == Some(&Tok::Dot) {
        p.pos += 1;
    }
    p.finish()?;
    Ok(atom)
}

/// Parse a ground atom such as `relB(john,james)`.
pub fn parse_ground_atom(text: &str) -> Result<Atom, Diagnostics> {
    single_atom("<atom>", text, VarPolicy::Ground).map_err(Diagnostics::single)
}

/// Parse a block pattern; `_` becomes a fresh variable per occurrence.
pub fn parse_block_pattern(text: &str) -> Result<BlockPattern, Diagnostics> {
    let atom = single_atom("<block>", text, VarPolicy::Pattern).map_err(Diagnostics::single)?;
    Ok(BlockPattern { atom: rename_wildcards(atom) })
}

/// Wildcards get the names X, Y, Z, W, then X1, Y1, ... skipping names the
/// pattern already uses.
fn rename_wildcards(atom: Atom) -> Atom {
    let used: BTreeSet<String> =
        atom.variables().into_iter().filter(|v| !v.starts_with("_W")).map(String::from).collect();
    let mut names = (0u32..).flat_map(|round| {
        ["X", "Y", "Z", "W"].into_iter().map(move |b| if round == 0 { b.to_string() } else { format!("{b}{round}") })
    });
    let args = atom
        .args
        .into_iter()
        .map(|t| match t {
            Term::Var(v) if v.starts_with("_W") => {
                let name = names.by_ref().find(|n| !used.contains(n)).unwrap();
                Term::Var(name)
            }
            other => other,
        })
        .collect();
    Atom { predicate: atom.predicate, args }
}

/// Parse a query: an atom (variables allowed) or `not` followed by a ground atom.
pub fn parse_query(text: &str) -> Result<Query, Diagnostics> {
    let trimmed = text.trim_start();
    if let Some(rest) = trimmed.strip_prefix("not ") {
        let atom = single_atom("<query>", rest, VarPolicy::Ground).map_err(|mut d| {
            d.message = format!("negated query must be ground: {}", d.message);
            Diagnostics::single(d)
        })?;
        return Ok(Query::Naf(atom));
    }
    single_atom("<query>", text, VarPolicy::Query).map(Query::Positive).map_err(Diagnostics::single)
}

/// Parse a model constraint `:- lit, ..., lit` (trailing `.` optional).
pub fn parse_constraint(text: &str) -> Result<ModelConstraint, Diagnostics> {
    let mut p = Parser::new("<constraint>", text, VarPolicy::Rule);
    let run = |p: &mut Parser| -> PResult<ModelConstraint> {
        if p.peek() == Some(&Tok::If) {
            p.pos += 1;
        }
        let body = p.body()?;
        if p.peek() == Some(&Tok::Dot) {
            p.pos += 1;
        }
        p.finish()?;
        Ok(ModelConstraint { body })
    };
    run(&mut p).map_err(Diagnostics::single)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    query: String,
    #[serde(default)]
    facts: Vec<String>,
    #[serde(default)]
    block: Vec<String>,
    #[serde(default)]
    deny_model: Vec<String>,
    depth: i64,
    #[serde(default)]
    variant: Option<String>,
    #[serde(default)]
    graph_depth: Option<i64>,
}

/// Parse a JSON task file against already-parsed rules.
///
/// Keys: `query` (required), `facts`, `block`, `deny_model`, `depth`
/// (required), `variant` (`res` | `exp` | `semi-res`, default `res`),
/// `graph_depth` (default `depth + 1`).
pub fn parse_task(file: &str, text: &str, rules: &RuleSet) -> Result<Parsed<TaskSpec>, Diagnostics> {
    let raw: TaskFile = serde_json::from_str(text).map_err(|e| {
        Diagnostics::single(Diagnostic::error(
            SourceSpan::new(file, e.line() as u32, e.column() as u32),
            format!("invalid task file: {e}"),
        ))
    })?;
    let here = SourceSpan::new(file, 1, 1);
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut located = |field: &str, d: Diagnostics| {
        for mut diag in d.0 {
            diag.message = format!("{field}: {} (column {})", diag.message, diag.span.column);
            diag.span = here.clone();
            errors.push(diag);
        }
    };

    let query = match parse_query(&raw.query) {
        Ok(q) => Some(q),
        Err(d) => {
            located("query", d);
            None
        }
    };

    let mut facts: Vec<Atom> = Vec::new();
    for (i, f) in raw.facts.iter().enumerate() {
        match parse_ground_atom(f) {
            Ok(a) if facts.contains(&a) => {
                warnings.push(Diagnostic::warning(here.clone(), format!("duplicate fact `{a}` ignored")))
            }
            Ok(a) => facts.push(a),
            Err(d) => located(&format!("facts[{i}]"), d),
        }
    }

    let mut blocklist = Vec::new();
    for (i, b) in raw.block.iter().enumerate() {
        match parse_block_pattern(b) {
            Ok(p) => blocklist.push(p),
            Err(d) => located(&format!("block[{i}]"), d),
        }
    }

    let mut constraints = Vec::new();
    for (i, c) in raw.deny_model.iter().enumerate() {
        match parse_constraint(c) {
            Ok(c) => constraints.push(c),
            Err(d) => located(&format!("deny_model[{i}]"), d),
        }
    }

    let mut errors_extra = Vec::new();
    if raw.depth < 0 {
        errors_extra.push(Diagnostic::error(here.clone(), format!("depth must be non-negative, got {}", raw.depth)));
    }
    let variant = match raw.variant.as_deref() {
        None => Variant::Res,
        Some(s) => Variant::parse(s).unwrap_or_else(|| {
            errors_extra.push(Diagnostic::error(
                here.clone(),
                format!("unknown variant `{s}`; expected res, exp or semi-res"),
            ));
            Variant::Res
        }),
    };
    if variant == Variant::Exp {
        for r in rules.by_id() {
            let ex = r.existential_vars();
            if !ex.is_empty() {
                errors_extra.push(Diagnostic::error(
                    here.clone(),
                    format!(
                        "variant exp requires rules without existential variables; rule {} has {}",
                        r.id,
                        ex.join(", ")
                    ),
                ));
            }
        }
    }
    let graph_depth = match raw.graph_depth {
        Some(g) if g <= 0 => {
            errors_extra.push(Diagnostic::error(here.clone(), format!("graph_depth must be positive, got {g}")));
            1
        }
        Some(g) => g as u32,
        None => raw.depth.max(0) as u32 + 1,
    };
    errors.extend(errors_extra);
    if !errors.is_empty() {
        return Err(Diagnostics(errors));
    }

    Ok(Parsed {
        value: TaskSpec {
            rules: rules.clone(),
            query: query.expect("query parsed when no errors"),
            user_facts: facts,
            blocklist,
            constraints,
            depth: raw.depth as u32,
            variant,
            graph_depth,
        },
        warnings,
    })
}
