//! Compilation of a task into solver-ready ASP text.
//!
//! Every emitter returns whole lines terminated by `\n`. Atoms are printed
//! without interior whitespace; rules as `head :- b1,b2.`; headless
//! statements as `:-body.`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::term::{Atom, Literal, ModelConstraint, Query, Rule, RuleSet, TaskSpec, Term, Variant};
use crate::validate::{validate_constraints, validate_ruleset};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("variant exp requires rules without existential variables, but rule {rule_id} has {vars:?}")]
    ExistentialsUnderExp { rule_id: u32, vars: Vec<String> },
    #[error("placeholder constant {0} collides with a constant of the task")]
    PlaceholderCollision(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Existential variables of one rule and what replaces them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkolemAssignment {
    pub rule_id: u32,
    /// In the rule's variable order.
    pub map: Vec<(String, Term)>,
}

impl SkolemAssignment {
    pub fn get(&self, var: &str) -> Option<&Term> {
        self.map.iter().find(|(v, _)| v == var).map(|(_, t)| t)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

pub fn skolemize(rule: &Rule, variant: Variant) -> Result<SkolemAssignment, EncodeError> {
    let ex = rule.existential_vars();
    if variant == Variant::Exp && !ex.is_empty() {
        return Err(EncodeError::ExistentialsUnderExp {
            rule_id: rule.id,
            vars: ex.iter().map(|v| v.to_string()).collect(),
        });
    }
    let head_args: Vec<Term> = rule.head_vars().into_iter().map(Term::var).collect();
    let map = ex
        .into_iter()
        .map(|v| {
            let t = match variant {
                Variant::SemiRes => Term::ExtVar,
                _ => Term::skolem(rule.id, v, head_args.clone()),
            };
            (v.to_string(), t)
        })
        .collect();
    Ok(SkolemAssignment { rule_id: rule.id, map })
}

/// Names of the level variables used in generated rules, chosen so they
/// never capture a variable of the source rule.
struct Meta {
    n: String,
    m: String,
    l: String,
}

impl Meta {
    fn for_rule(rule: &Rule) -> Meta {
        let used: BTreeSet<&str> = rule.var_order.iter().map(String::as_str).collect();
        let fresh = |base: &str| {
            if !used.contains(base) {
                return base.to_string();
            }
            (1..).map(|i| format!("{base}{i}")).find(|c| !used.contains(c.as_str())).unwrap()
        };
        Meta { n: fresh("N"), m: fresh("M"), l: fresh("L") }
    }
}

fn holds(a: &Atom) -> String {
    format!("holds({a})")
}

fn holds_lit(l: &Literal) -> String {
    if l.is_naf() {
        format!("not {}", holds(&l.atom))
    } else {
        holds(&l.atom)
    }
}

fn sub_inst(rule_id: u32, args: &[Term]) -> String {
    if args.is_empty() {
        format!("subInst_r{rule_id}")
    } else {
        format!("subInst_r{rule_id}({})", join(args.iter().map(ToString::to_string)))
    }
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(",")
}

fn order_terms(rule: &Rule) -> Vec<Term> {
    rule.var_order.iter().map(Term::var).collect()
}

fn prefixed(v: &str) -> Term {
    Term::Var(format!("V_{v}"))
}

pub fn emit_forward(rules: &RuleSet, constraints: &[ModelConstraint]) -> String {
    let mut out = String::new();
    for r in rules.by_id() {
        let body = join(r.body.iter().map(holds_lit));
        let _ = writeln!(out, "{} :- {body}.", holds(&r.head));
    }
    for c in constraints {
        let _ = writeln!(out, ":-{}.", join(c.body.iter().map(holds_lit)));
    }
    out
}

pub fn emit_ag1(rule: &Rule, skolems: &SkolemAssignment) -> String {
    let meta = Meta::for_rule(rule);
    let (n, m) = (&meta.n, &meta.m);
    let inst: Vec<Term> =
        rule.var_order.iter().map(|v| skolems.get(v).cloned().unwrap_or_else(|| Term::var(v.clone()))).collect();
    let plain = sub_inst(rule.id, &order_terms(rule));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "createSub({},{n}+1) :- query({},{n}),max_ab_lvl({m}),{n}<{m}-1.",
        sub_inst(rule.id, &inst),
        rule.head
    );
    for lit in &rule.body {
        let _ = writeln!(out, "explains({},{},{n}) :- createSub({plain},{n}).", lit.atom, rule.head);
    }
    out
}

/// Instance arguments keeping original names where the variable occurs in
/// `atom` and the `V_` form elsewhere.
fn rebinding(rule: &Rule, atom: &Atom) -> Vec<Term> {
    let vars = atom.variables();
    rule.var_order
        .iter()
        .map(|v| if vars.contains(&v.as_str()) { Term::var(v.clone()) } else { prefixed(v) })
        .collect()
}

fn all_prefixed(rule: &Rule) -> String {
    let f: Vec<Term> = rule.var_order.iter().map(|v| prefixed(v)).collect();
    sub_inst(rule.id, &f)
}

pub fn emit_ag2_res(rule: &Rule) -> String {
    let meta = Meta::for_rule(rule);
    let (n, m) = (&meta.n, &meta.m);
    let from = all_prefixed(rule);
    let mut out = String::new();
    for lit in &rule.body {
        let _ = writeln!(
            out,
            "createSub({},{m}-1) :- createSub({from},{n}),{n}<{m},{},max_ab_lvl({m}).",
            sub_inst(rule.id, &rebinding(rule, &lit.atom)),
            holds(&lit.atom)
        );
    }
    out
}

/// Expanded refinement: the head and every body atom rebind the instance,
/// once when the atom holds and once when it is queried at any level.
/// Existential variables are accepted here because the semi-restricted
/// encoding reuses these rules with `extVar` instances.
pub fn emit_ag2_exp(rule: &Rule) -> String {
    let meta = Meta::for_rule(rule);
    let (n, l) = (&meta.n, &meta.l);
    let from = all_prefixed(rule);
    let atoms: Vec<&Atom> = core::iter::once(&rule.head).chain(rule.body.iter().map(|b| &b.atom)).collect();
    let mut out = String::new();
    for a in &atoms {
        let _ = writeln!(
            out,
            "createSub({},{n}) :- createSub({from},{n}),{}.",
            sub_inst(rule.id, &rebinding(rule, a)),
            holds(a)
        );
    }
    for a in &atoms {
        let _ = writeln!(
            out,
            "createSub({},{n}) :- createSub({from},{n}),query({a},{l}).",
            sub_inst(rule.id, &rebinding(rule, a))
        );
    }
    out
}

pub fn emit_ag3(variant: Variant) -> String {
    let mut out = String::from("query(X,N) :- explains(X,Y,N),max_ab_lvl(M),N<M.\n");
    if variant.is_expanded() {
        out.push_str("query(Y,N-1) :- explains(X,Y,N),max_ab_lvl(M),0<N,N<M.\n");
    }
    out
}

pub fn emit_support(task: &TaskSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "max_ab_lvl({}).", task.max_ab_lvl());
    out.push_str("query(X,0) :- generate_proof(X).\n");
    out.push_str("{abducedFact(X)} :- query(X,N).\n");
    out.push_str("holds(X) :- abducedFact(X).\n");
    out.push_str("holds(X) :- user_input(pos,X).\n");
    for f in &task.user_facts {
        let _ = writeln!(out, "user_input(pos,{f}).");
    }
    for b in &task.blocklist {
        let _ = writeln!(out, ":-abducedFact({}).", b.atom);
    }
    out.push_str(":~abducedFact(X).[1@1,X]\n");
    out
}

/// The atom handed to `generate_proof` and `gen_graph`: the query with its
/// i-th distinct variable replaced by placeholder `v{i}`.
pub fn placeholder_query(query: &Query) -> (Atom, Vec<(String, Term)>) {
    let atom = query.atom();
    let map: Vec<(String, Term)> = atom
        .variables()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v.to_string(), Term::Placeholder(i as u32 + 1)))
        .collect();
    let bindings = map.iter().cloned().collect();
    (atom.substitute(&bindings), map)
}

pub fn emit_goal(query: &Query) -> String {
    let (seed, _) = placeholder_query(query);
    let cond = match query {
        Query::Positive(a) => holds(a),
        Query::Naf(a) => format!("not {}", holds(a)),
    };
    format!("generate_proof({seed}).\ngoal :- {cond}.\n:-not goal.\n")
}

pub fn emit_justification(rules: &RuleSet, graph_depth: u32, seed: &Atom) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "gen_graph({seed}).");
    let _ = writeln!(out, "max_graph_lvl({graph_depth}).");
    for r in rules.by_id() {
        let meta = Meta::for_rule(r);
        let n = &meta.n;
        let body = join(r.body.iter().map(holds_lit));
        for lit in &r.body {
            let _ = writeln!(
                out,
                "causedBy({},{},{},{n}+1) :- {},{body},justify({},{n}).",
                lit.sign.as_str(),
                lit.atom,
                r.head,
                holds(&r.head),
                r.head
            );
        }
    }
    out.push_str(JUSTIFICATION_SUPPORT);
    out
}

const JUSTIFICATION_SUPPORT: &str = "\
justify(X,N) :- causedBy(pos,X,Y,N),not user_input(pos,X),N<M,max_graph_lvl(M).
directedEdge(Sgn,X,Y) :- causedBy(Sgn,X,Y,M).
justify(X,0) :- gen_graph(X),not user_input(pos,X).
directedEdge(pos,userFact,X) :- directedEdge(pos,X,Y),user_input(pos,X).
directedEdge(pos,userFact,X) :- gen_graph(X),user_input(pos,X).
";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    pub justification: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { justification: true }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivedProgram {
    pub text: String,
    pub variant: Variant,
    pub max_ab_lvl: u32,
    pub rule_table: BTreeMap<u32, Rule>,
    pub has_justification: bool,
    pub graph_depth: u32,
    /// Query variable ↦ placeholder constant, in first-occurrence order.
    pub placeholders: Vec<(String, Term)>,
    /// The atom passed to `generate_proof`.
    pub seed: Atom,
}

pub fn compile(task: &TaskSpec, opts: CompileOptions) -> Result<DerivedProgram, EncodeError> {
    let violations = validate_ruleset(&task.rules);
    if let Some(v) = violations.first() {
        return Err(EncodeError::Invalid(v.to_string()));
    }
    if let Some(v) = validate_constraints(&task.constraints).first() {
        return Err(EncodeError::Invalid(v.to_string()));
    }
    if let Query::Naf(a) = &task.query {
        if !a.is_ground() {
            return Err(EncodeError::Invalid(format!("negated query not {a} must be ground")));
        }
    }

    let (seed, placeholders) = placeholder_query(&task.query);
    let constants = task.constants();
    let mut fact_constants = BTreeSet::new();
    for b in &task.blocklist {
        fact_constants.extend(b.atom.constants());
    }
    for c in &task.constraints {
        for l in &c.body {
            fact_constants.extend(l.atom.constants());
        }
    }
    for (_, p) in &placeholders {
        let name = p.to_string();
        if constants.contains(&name) || fact_constants.contains(&name) {
            return Err(EncodeError::PlaceholderCollision(name));
        }
    }

    let mut skolems = Vec::new();
    for r in task.rules.by_id() {
        skolems.push((r, skolemize(r, task.variant)?));
    }

    let mut text = String::new();
    text.push_str("% support\n");
    text.push_str(&emit_support(task));
    text.push_str("\n% goal\n");
    text.push_str(&emit_goal(&task.query));
    text.push_str("\n% forward translation\n");
    text.push_str(&emit_forward(&task.rules, &task.constraints));
    text.push_str("\n% rule instantiation\n");
    for (r, sk) in &skolems {
        text.push_str(&emit_ag1(r, sk));
    }
    text.push_str("\n% instance refinement\n");
    for (r, _) in &skolems {
        match task.variant {
            Variant::Res => text.push_str(&emit_ag2_res(r)),
            Variant::Exp | Variant::SemiRes => text.push_str(&emit_ag2_exp(r)),
        }
    }
    text.push_str("\n% query propagation\n");
    text.push_str(&emit_ag3(task.variant));
    if opts.justification {
        text.push_str("\n% justification\n");
        text.push_str(&emit_justification(&task.rules, task.graph_depth, &seed));
    }

    Ok(DerivedProgram {
        text,
        variant: task.variant,
        max_ab_lvl: task.max_ab_lvl(),
        rule_table: task.rules.rules.iter().map(|r| (r.id, r.clone())).collect(),
        has_justification: opts.justification,
        graph_depth: task.graph_depth,
        placeholders,
        seed,
    })
}
