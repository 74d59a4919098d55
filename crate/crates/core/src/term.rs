//! Syntactic core: terms, atoms, literals, rules and abduction tasks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Name of the distinguished constant that stands in for every existential
/// variable under the semi-restricted encoding.
pub const EXT_VAR: &str = "extVar";

/// Prefix of generated skolem function symbols.
pub const SKOLEM_PREFIX: &str = "skolemFn_r";

/// A term of the restricted language.
///
/// Function symbols only ever appear as generated skolem terms; user input is
/// function-free.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
    Skolem(SkolemTerm),
    ExtVar,
    /// Fresh constant `v{i}` standing for the i-th variable of an un-ground goal.
    Placeholder(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SkolemTerm {
    pub rule_id: u32,
    pub var: String,
    pub args: Vec<Term>,
}

impl SkolemTerm {
    pub fn symbol(&self) -> String {
        alloc::format!("{SKOLEM_PREFIX}{}_{}", self.rule_id, self.var)
    }
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        let name = name.into();
        if name == EXT_VAR {
            Term::ExtVar
        } else {
            Term::Const(name)
        }
    }

    pub fn skolem(rule_id: u32, var: impl Into<String>, args: Vec<Term>) -> Self {
        Term::Skolem(SkolemTerm { rule_id, var: var.into(), args })
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Skolem(s) => s.args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    /// Nesting depth of skolem applications; constants have depth 0.
    pub fn skolem_depth(&self) -> usize {
        match self {
            Term::Skolem(s) => 1 + s.args.iter().map(Term::skolem_depth).max().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn contains_ext_var(&self) -> bool {
        match self {
            Term::ExtVar => true,
            Term::Skolem(s) => s.args.iter().any(Term::contains_ext_var),
            _ => false,
        }
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(v) => {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
            Term::Skolem(s) => s.args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }

    fn collect_constants(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Const(c) => {
                out.insert(c.clone());
            }
            Term::Skolem(s) => s.args.iter().for_each(|a| a.collect_constants(out)),
            _ => {}
        }
    }

    /// Replace variables according to `bindings`; unbound variables stay.
    pub fn substitute(&self, bindings: &Bindings) -> Term {
        match self {
            Term::Var(v) => bindings.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Skolem(s) => Term::Skolem(SkolemTerm {
                rule_id: s.rule_id,
                var: s.var.clone(),
                args: s.args.iter().map(|a| a.substitute(bindings)).collect(),
            }),
            _ => self.clone(),
        }
    }

    /// One-way matching of a pattern term against a ground term.
    pub fn match_ground(&self, ground: &Term, bindings: &mut Bindings) -> bool {
        match (self, ground) {
            (Term::Var(v), g) => match bindings.get(v) {
                Some(bound) => bound == g,
                None => {
                    bindings.insert(v.clone(), g.clone());
                    true
                }
            },
            (Term::Skolem(p), Term::Skolem(g)) => {
                p.rule_id == g.rule_id
                    && p.var == g.var
                    && p.args.len() == g.args.len()
                    && p.args.iter().zip(&g.args).all(|(pa, ga)| pa.match_ground(ga, bindings))
            }
            (p, g) => p == g,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => f.write_str(c),
            Term::ExtVar => f.write_str(EXT_VAR),
            Term::Placeholder(i) => write!(f, "v{i}"),
            Term::Skolem(s) => {
                write!(f, "{SKOLEM_PREFIX}{}_{}", s.rule_id, s.var)?;
                write_args(f, &s.args)
            }
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    if args.is_empty() {
        return Ok(());
    }
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

/// Variable bindings produced by matching.
pub type Bindings = BTreeMap<String, Term>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { predicate: predicate.into(), args }
    }

    pub fn prop(predicate: impl Into<String>) -> Self {
        Atom::new(predicate, Vec::new())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    /// Variables in first-occurrence order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.args.iter().for_each(|a| a.collect_vars(&mut out));
        out
    }

    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.args.iter().for_each(|a| a.collect_constants(&mut out));
        out
    }

    pub fn contains_ext_var(&self) -> bool {
        self.args.iter().any(Term::contains_ext_var)
    }

    pub fn max_skolem_depth(&self) -> usize {
        self.args.iter().map(Term::skolem_depth).max().unwrap_or(0)
    }

    pub fn substitute(&self, bindings: &Bindings) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|a| a.substitute(bindings)).collect(),
        }
    }

    pub fn match_ground(&self, ground: &Atom, bindings: &mut Bindings) -> bool {
        self.predicate == ground.predicate
            && self.args.len() == ground.args.len()
            && self.args.iter().zip(&ground.args).all(|(p, g)| p.match_ground(g, bindings))
    }

    /// True when `ground` is an instance of this pattern.
    pub fn subsumes(&self, ground: &Atom) -> bool {
        self.match_ground(ground, &mut Bindings::new())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        write_args(f, &self.args)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Pos => "pos",
            Sign::Neg => "neg",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub sign: Sign,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { sign: Sign::Pos, atom }
    }

    pub fn naf(atom: Atom) -> Self {
        Literal { sign: Sign::Neg, atom }
    }

    pub fn is_naf(&self) -> bool {
        self.sign == Sign::Neg
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_naf() {
            f.write_str("not ")?;
        }
        write!(f, "{}", self.atom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub id: u32,
    pub head: Atom,
    pub body: Vec<Literal>,
    /// Variable order used for rule instances: first occurrence scanning the
    /// head, then the body literals, left to right.
    pub var_order: Vec<String>,
}

impl Rule {
    pub fn new(id: u32, head: Atom, body: Vec<Literal>) -> Self {
        let mut order: Vec<String> = Vec::new();
        let mut push = |v: &str| {
            if !order.iter().any(|o| o == v) {
                order.push(v.to_string());
            }
        };
        head.variables().into_iter().for_each(&mut push);
        for lit in &body {
            lit.atom.variables().into_iter().for_each(&mut push);
        }
        Rule { id, head, body, var_order: order }
    }

    pub fn head_vars(&self) -> Vec<&str> {
        self.head.variables()
    }

    /// Variables occurring in the body but not the head, in `var_order`.
    pub fn existential_vars(&self) -> Vec<&str> {
        let head = self.head_vars();
        self.var_order.iter().map(String::as_str).filter(|v| !head.contains(v)).collect()
    }

    pub fn has_naf(&self) -> bool {
        self.body.iter().any(Literal::is_naf)
    }

    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = self.head.constants();
        for lit in &self.body {
            out.extend(lit.atom.constants());
        }
        out
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for (i, lit) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{lit}")?;
        }
        f.write_str(".")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Self {
        RuleSet { rules }
    }

    pub fn get(&self, id: u32) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn has_naf(&self) -> bool {
        self.rules.iter().any(Rule::has_naf)
    }

    pub fn has_existentials(&self) -> bool {
        self.rules.iter().any(|r| !r.existential_vars().is_empty())
    }

    pub fn constants(&self) -> BTreeSet<String> {
        self.rules.iter().flat_map(Rule::constants).collect()
    }

    /// Rules sorted by id; all emitters walk rules in this order.
    pub fn by_id(&self) -> Vec<&Rule> {
        let mut rules: Vec<&Rule> = self.rules.iter().collect();
        rules.sort_by_key(|r| r.id);
        rules
    }

    /// Canonical source text. Ids that differ from the file position are
    /// written as `% #id: k` annotations so the text parses back identically.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (pos, rule) in self.rules.iter().enumerate() {
            if rule.id as usize != pos + 1 {
                out.push_str(&alloc::format!("% #id: {}\n", rule.id));
            }
            out.push_str(&rule.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    Positive(Atom),
    Naf(Atom),
}

impl Query {
    pub fn atom(&self) -> &Atom {
        match self {
            Query::Positive(a) | Query::Naf(a) => a,
        }
    }

    pub fn is_naf(&self) -> bool {
        matches!(self, Query::Naf(_))
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Positive(a) => write!(f, "{a}"),
            Query::Naf(a) => write!(f, "not {a}"),
        }
    }
}

/// One `:-abducedFact(pattern).` entry; variables act as wildcards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPattern {
    pub atom: Atom,
}

impl BlockPattern {
    pub fn blocks(&self, atom: &Atom) -> bool {
        self.atom.subsumes(atom)
    }

    /// Fully un-ground with pairwise distinct variables.
    pub fn is_open(&self) -> bool {
        let vars = self.atom.variables();
        self.atom.args.iter().all(Term::is_var) && vars.len() == self.atom.arity()
    }
}

/// An integrity constraint over the complete model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConstraint {
    pub body: Vec<Literal>,
}

impl fmt::Display for ModelConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(":- ")?;
        for (i, lit) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{lit}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Skolem terms, restricted refinement (`M-1` levels).
    #[default]
    #[serde(rename = "res")]
    Res,
    /// Expanded refinement; only for rule sets without existential variables.
    #[serde(rename = "exp")]
    Exp,
    /// Expanded refinement with every skolem term replaced by `extVar`.
    #[serde(rename = "semi-res")]
    SemiRes,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Res => "res",
            Variant::Exp => "exp",
            Variant::SemiRes => "semi-res",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "res" => Some(Variant::Res),
            "exp" => Some(Variant::Exp),
            "semi-res" | "semiRes" | "semi_res" => Some(Variant::SemiRes),
            _ => None,
        }
    }

    /// Whether AG2 uses the expanded (level-preserving) form.
    pub fn is_expanded(self) -> bool {
        !matches!(self, Variant::Res)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An abductive proof generation task together with the chosen encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskSpec {
    pub rules: RuleSet,
    pub query: Query,
    pub user_facts: Vec<Atom>,
    pub blocklist: Vec<BlockPattern>,
    pub constraints: Vec<ModelConstraint>,
    pub depth: u32,
    pub variant: Variant,
    pub graph_depth: u32,
}

impl TaskSpec {
    pub fn new(rules: RuleSet, query: Query, depth: u32) -> Self {
        TaskSpec {
            rules,
            query,
            user_facts: Vec::new(),
            blocklist: Vec::new(),
            constraints: Vec::new(),
            depth,
            variant: Variant::Res,
            graph_depth: depth + 1,
        }
    }

    /// `M = N + 1`, the argument of `max_ab_lvl`.
    pub fn max_ab_lvl(&self) -> u32 {
        self.depth + 1
    }

    pub fn is_blocked(&self, atom: &Atom) -> bool {
        self.blocklist.iter().any(|b| b.blocks(atom))
    }

    /// Constants of the rules, the query and the user facts.
    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = self.rules.constants();
        out.extend(self.query.atom().constants());
        for f in &self.user_facts {
            out.extend(f.constants());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn v(n: &str) -> Term {
        Term::var(n)
    }

    #[test]
    fn var_order_follows_first_occurrence() {
        // a(X) :- b(X,Y,Z), not c(X), not d(Y).
        let r = Rule::new(
            5,
            Atom::new("a", vec![v("X")]),
            vec![
                Literal::pos(Atom::new("b", vec![v("X"), v("Y"), v("Z")])),
                Literal::naf(Atom::new("c", vec![v("X")])),
                Literal::naf(Atom::new("d", vec![v("Y")])),
            ],
        );
        assert_eq!(r.var_order, vec!["X", "Y", "Z"]);
        assert_eq!(r.existential_vars(), vec!["Y", "Z"]);

        // p(Y,X) :- q(X), r(X,Y), s(Z).
        let r = Rule::new(
            1,
            Atom::new("p", vec![v("Y"), v("X")]),
            vec![
                Literal::pos(Atom::new("q", vec![v("X")])),
                Literal::pos(Atom::new("r", vec![v("X"), v("Y")])),
                Literal::pos(Atom::new("s", vec![v("Z")])),
            ],
        );
        assert_eq!(r.var_order, vec!["Y", "X", "Z"]);
    }

    #[test]
    fn skolem_rendering_and_depth() {
        let inner = Term::skolem(1, "R", vec![Term::constant("john")]);
        let outer = Term::skolem(1, "R", vec![inner]);
        assert_eq!(outer.to_string(), "skolemFn_r1_R(skolemFn_r1_R(john))");
        assert_eq!(outer.skolem_depth(), 2);
        assert_eq!(Term::skolem(3, "Y", vec![]).to_string(), "skolemFn_r3_Y");
    }

    #[test]
    fn matching_respects_repeated_variables() {
        let pat = Atom::new("p", vec![v("X"), v("X")]);
        let ok = Atom::new("p", vec![Term::constant("a"), Term::constant("a")]);
        let bad = Atom::new("p", vec![Term::constant("a"), Term::constant("b")]);
        assert!(pat.subsumes(&ok));
        assert!(!pat.subsumes(&bad));
    }

    #[test]
    fn ext_var_is_distinguished() {
        assert_eq!(Term::constant("extVar"), Term::ExtVar);
        assert!(Atom::new("r", vec![Term::ExtVar]).contains_ext_var());
    }
}
