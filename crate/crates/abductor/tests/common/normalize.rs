//! Canonical form for comparing encodings against golden files.
//!
//! Two programs are equal up to normalization when they have the same
//! multiset of statements after:
//! - dropping `%` line comments and `(* ... *)` annotations,
//! - removing whitespace (one space is kept between two name characters),
//! - lowercasing predicate and constant names and dropping their underscores,
//! - renaming variables per statement in order of first occurrence,
//! - sorting the body literals of each statement.

use std::collections::BTreeMap;

fn strip_comments(text: &str) -> String {
    let mut out = String::new();
    for line in text.lines() {
        let mut line = line.to_string();
        while let Some(start) = line.find("(*") {
            let end = line[start..].find("*)").map_or(line.len(), |e| start + e + 2);
            line.replace_range(start..end, "");
        }
        if let Some(i) = line.find('%') {
            line.truncate(i);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Drops whitespace except a single space between two name characters,
/// so `not holds(x)` survives as such.
fn compact(text: &str) -> String {
    let mut out = String::new();
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        let word = |c: char| c.is_alphanumeric() || c == '_';
        if pending_space && out.chars().last().is_some_and(word) && word(c) {
            out.push(' ');
        }
        pending_space = false;
        out.push(c);
    }
    out
}

/// Statements end at a top-level `.`, except that a weak constraint keeps
/// its `[weight@level,terms]` suffix.
fn statements(text: &str) -> Vec<String> {
    let chars: Vec<char> = compact(text).chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut depth = 0i32;
    for &c in &chars {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            _ => {}
        }
        cur.push(c);
        let weak = cur.starts_with(":~");
        if (c == '.' && depth == 0 && !weak) || (c == ']' && depth == 0 && weak) {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn split_top(s: &str, sep: char) -> Vec<String> {
    let mut parts = Vec::new();
    let mut cur = String::new();
    let mut depth = 0i32;
    for c in s.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            _ => {}
        }
        if c == sep && depth == 0 {
            parts.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    parts.push(cur);
    parts
}

/// Lowercases names and renames variables through `vars`.
fn canon_tokens(s: &str, vars: &mut BTreeMap<String, String>) -> String {
    let mut out = String::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            if word.starts_with(|c: char| c.is_uppercase() || c == '_') {
                let n = vars.len();
                out.push_str(vars.entry(word).or_insert_with(|| format!("V{n}")));
            } else {
                out.push_str(&word.to_lowercase().replace('_', ""));
            }
            continue;
        }
        out.push(c);
        i += 1;
    }
    out
}

fn canon_statement(stmt: &str) -> String {
    let (head, body, suffix) = if let Some(rest) = stmt.strip_prefix(":~") {
        let rest = rest.trim_end_matches(']');
        let (b, w) = rest.split_once(".[").unwrap_or((rest, ""));
        (":~".to_string(), b.to_string(), format!(".[{w}]"))
    } else {
        let body_end = stmt.trim_end_matches('.');
        match body_end.split_once(":-") {
            Some((h, b)) => (format!("{h}:-"), b.to_string(), ".".to_string()),
            None => (body_end.to_string(), String::new(), ".".to_string()),
        }
    };
    let mut vars = BTreeMap::new();
    let head = canon_tokens(&head, &mut vars);
    let mut lits: Vec<String> = split_top(&body, ',').into_iter().filter(|l| !l.is_empty()).collect();
    lits = lits.iter().map(|l| canon_tokens(l, &mut vars)).collect();
    let suffix = canon_tokens(&suffix, &mut vars);
    // Variable names depend on literal order; rename again on the sorted body.
    let mut sorted = lits.clone();
    sorted.sort();
    let mut vars2 = BTreeMap::new();
    let head2 = canon_tokens(&head, &mut vars2);
    let lits2: Vec<String> = sorted.iter().map(|l| canon_tokens(l, &mut vars2)).collect();
    let suffix2 = canon_tokens(&suffix, &mut vars2);
    format!("{head2}{}{suffix2}", lits2.join(","))
}

/// Sorted canonical statements.
pub fn normalize(text: &str) -> Vec<String> {
    let mut out: Vec<String> = statements(&strip_comments(text)).iter().map(|s| canon_statement(s)).collect();
    out.sort();
    out
}

/// Statements only in `left`, and only in `right`.
pub fn diff(left: &str, right: &str) -> (Vec<String>, Vec<String>) {
    let (mut l, mut r) = (normalize(left), normalize(right));
    let mut only_l = Vec::new();
    for s in l.drain(..) {
        if let Some(i) = r.iter().position(|x| *x == s) {
            r.remove(i);
        } else {
            only_l.push(s);
        }
    }
    (only_l, r)
}

#[test]
fn normalization_is_insensitive_to_layout() {
    let a = "% c\nq(X , Y) :- b(Y), a(X).  (* label *)\n:~abducedFact(Y).[1@1,Y]\n";
    let b = "q(P,Q):-a(P),b(Q).\n:~ abducedFact(X). [1@1,X]";
    assert_eq!(normalize(a), normalize(b));
    assert_ne!(normalize("q(X):-a(X)."), normalize("q(X):-a(Y)."));
    assert_eq!(normalize("h :- not  x, y."), normalize("h:-y,not x."));
}
