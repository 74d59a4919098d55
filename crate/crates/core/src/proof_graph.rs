//! Abstract and concrete proof graphs, instance sets and the derived
//! substitution used to reason about implicit term substitution.
//!
//! The abstract graph is what the rule-instantiation and query-propagation
//! rules of the restricted encoding derive from `query(p(v1..vk),0)` alone,
//! without any refinement or abduction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::encoder::skolemize;
use crate::term::{Atom, Bindings, RuleSet, Term, Variant};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("predicate {0} does not occur in the rule set")]
    UnknownPredicate(String),
    #[error("rule {0} uses negation as failure")]
    NafRule(u32),
    #[error("{0} does not occur in the concrete graph")]
    NotInGraph(String),
    #[error("{q_o} does not map to {q_c} under the substitution")]
    NotAPreimage { q_o: String, q_c: String },
    #[error("{q_f} does not have the predicate, arity and level of {q_c}")]
    ShapeMismatch { q_c: String, q_f: String },
    #[error("term {term} would map to both {first} and {second}")]
    OneToMany { term: String, first: String, second: String },
}

/// `query(atom, level)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueryNode {
    pub atom: Atom,
    pub level: u32,
}

impl QueryNode {
    pub fn new(atom: Atom, level: u32) -> Self {
        QueryNode { atom, level }
    }
}

impl fmt::Display for QueryNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "query({},{})", self.atom, self.level)
    }
}

/// `createSub(subInst_r{rule_id}(terms), level)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceEntry {
    pub rule_id: u32,
    pub terms: Vec<Term>,
    pub level: u32,
}

impl fmt::Display for InstanceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "createSub(subInst_r{}", self.rule_id)?;
        if !self.terms.is_empty() {
            let t: Vec<String> = self.terms.iter().map(ToString::to_string).collect();
            write!(f, "({})", t.join(","))?;
        }
        write!(f, ",{})", self.level)
    }
}

pub type InstanceSet = BTreeSet<InstanceEntry>;

/// Nodes in generation order; an edge `(child, parent)` indexes into `nodes`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProofGraph {
    pub nodes: Vec<QueryNode>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl ProofGraph {
    pub fn index_of(&self, node: &QueryNode) -> Option<usize> {
        self.nodes.iter().position(|n| n == node)
    }

    pub fn parents(&self, child: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |(c, _)| *c == child).map(|&(_, p)| p)
    }

    /// Edges as `E(child,parent)` strings, in edge order.
    pub fn rendered_edges(&self) -> Vec<String> {
        self.edges.iter().map(|&(c, p)| format!("E({},{})", self.nodes[c], self.nodes[p])).collect()
    }

    /// Every non-root node has a parent one level up.
    pub fn has_level_parents(&self) -> bool {
        (0..self.nodes.len()).all(|i| {
            self.nodes[i].level == 0 || self.parents(i).any(|p| self.nodes[p].level + 1 == self.nodes[i].level)
        })
    }

    /// Distinct terms occurring as arguments of node atoms.
    pub fn terms(&self) -> BTreeSet<Term> {
        self.nodes.iter().flat_map(|n| n.atom.args.iter().cloned()).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph proof {\n");
        for (i, n) in self.nodes.iter().enumerate() {
            out.push_str(&format!("  n{i} [label=\"{}\"];\n", n));
        }
        for &(c, p) in &self.edges {
            out.push_str(&format!("  n{c} -> n{p};\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Serializable view of a graph and its instance set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProofGraphJson {
    pub nodes: Vec<String>,
    pub edges: Vec<[String; 2]>,
    pub instances: Vec<String>,
}

impl ProofGraphJson {
    pub fn new(g: &ProofGraph, inst: &InstanceSet) -> Self {
        ProofGraphJson {
            nodes: g.nodes.iter().map(ToString::to_string).collect(),
            edges: g.edges.iter().map(|&(c, p)| [g.nodes[c].to_string(), g.nodes[p].to_string()]).collect(),
            instances: inst.iter().map(ToString::to_string).collect(),
        }
    }
}

fn predicate_arity(rules: &RuleSet, predicate: &str) -> Option<usize> {
    rules.rules.iter().find_map(|r| {
        core::iter::once(&r.head)
            .chain(r.body.iter().map(|l| &l.atom))
            .find(|a| a.predicate == predicate)
            .map(Atom::arity)
    })
}

/// Simulate rule instantiation and query propagation from
/// `query(predicate(v1..vk),0)` with `max_ab_lvl(n+1)`.
pub fn build_abstract(rules: &RuleSet, predicate: &str, n: u32) -> Result<(ProofGraph, InstanceSet), GraphError> {
    if let Some(r) = rules.rules.iter().find(|r| r.has_naf()) {
        return Err(GraphError::NafRule(r.id));
    }
    let arity = predicate_arity(rules, predicate).ok_or_else(|| GraphError::UnknownPredicate(predicate.into()))?;
    let seed = Atom::new(predicate, (1..=arity as u32).map(Term::Placeholder).collect());
    let mut g = ProofGraph { nodes: alloc::vec![QueryNode::new(seed, 0)], edges: BTreeSet::new() };
    let mut index: BTreeMap<QueryNode, usize> = BTreeMap::new();
    index.insert(g.nodes[0].clone(), 0);
    let mut inst = InstanceSet::new();
    let ordered = rules.by_id();
    let mut skolems = Vec::new();
    for r in &ordered {
        skolems.push(skolemize(r, Variant::Res).expect("res accepts existentials"));
    }

    let mut frontier = alloc::vec![0usize];
    for level in 0..n {
        let mut next = Vec::new();
        for &parent in &frontier {
            let head_atom = g.nodes[parent].atom.clone();
            for (r, sk) in ordered.iter().zip(&skolems) {
                let mut b = Bindings::new();
                if !r.head.match_ground(&head_atom, &mut b) {
                    continue;
                }
                for (v, t) in &sk.map {
                    b.insert(v.clone(), t.substitute(&b));
                }
                let terms: Vec<Term> = r.var_order.iter().map(|v| b[v].clone()).collect();
                inst.insert(InstanceEntry { rule_id: r.id, terms, level: level + 1 });
                for lit in &r.body {
                    let child = QueryNode::new(lit.atom.substitute(&b), level + 1);
                    let idx = match index.get(&child) {
                        Some(&i) => i,
                        None => {
                            g.nodes.push(child.clone());
                            index.insert(child, g.nodes.len() - 1);
                            next.push(g.nodes.len() - 1);
                            g.nodes.len() - 1
                        }
                    };
                    g.edges.insert((idx, parent));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok((g, inst))
}

/// Drop same-level duplicates (keeping the first in generation order), then
/// nodes whose atom already occurs at a smaller level. Edges follow the
/// surviving nodes.
pub fn minimize(g: &ProofGraph) -> ProofGraph {
    // Representative of each node after merging same-level duplicates.
    let mut first: BTreeMap<(&Atom, u32), usize> = BTreeMap::new();
    let mut rep = Vec::with_capacity(g.nodes.len());
    for (i, n) in g.nodes.iter().enumerate() {
        rep.push(*first.entry((&n.atom, n.level)).or_insert(i));
    }
    let mut min_level: BTreeMap<&Atom, u32> = BTreeMap::new();
    for n in &g.nodes {
        let e = min_level.entry(&n.atom).or_insert(n.level);
        *e = (*e).min(n.level);
    }
    let keep = |i: usize| rep[i] == i && min_level[&g.nodes[i].atom] == g.nodes[i].level;

    let mut new_index = BTreeMap::new();
    let mut out = ProofGraph::default();
    for (i, n) in g.nodes.iter().enumerate() {
        if keep(i) {
            new_index.insert(i, out.nodes.len());
            out.nodes.push(n.clone());
        }
    }
    for &(c, p) in &g.edges {
        let (c, p) = (rep[c], rep[p]);
        if let (Some(&nc), Some(&np)) = (new_index.get(&c), new_index.get(&p)) {
            out.edges.insert((nc, np));
        }
    }
    out
}

/// A term substitution; terms without an entry map to themselves.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    pub map: BTreeMap<Term, Term>,
}

impl Substitution {
    pub fn new(pairs: impl IntoIterator<Item = (Term, Term)>) -> Self {
        Substitution { map: pairs.into_iter().collect() }
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        self.map.get(t).cloned().unwrap_or_else(|| t.clone())
    }

    /// Replaces each argument as a whole.
    pub fn apply_atom(&self, a: &Atom) -> Atom {
        Atom::new(a.predicate.clone(), a.args.iter().map(|t| self.apply_term(t)).collect())
    }

    pub fn apply_node(&self, n: &QueryNode) -> QueryNode {
        QueryNode::new(self.apply_atom(&n.atom), n.level)
    }

    pub fn apply_instance(&self, e: &InstanceEntry) -> InstanceEntry {
        InstanceEntry { rule_id: e.rule_id, terms: e.terms.iter().map(|t| self.apply_term(t)).collect(), level: e.level }
    }

    /// Restriction to the given terms, dropping identity entries.
    pub fn restricted(&self, terms: &BTreeSet<Term>) -> Substitution {
        Substitution::new(self.map.iter().filter(|(k, v)| terms.contains(*k) && k != v).map(|(k, v)| (k.clone(), v.clone())))
    }

    pub fn rendered(&self) -> Vec<String> {
        self.map.iter().map(|(k, v)| format!("{k}->{v}")).collect()
    }
}

/// The substitution realized by the extVar encoding for a ground query:
/// placeholders take the query's arguments, skolem terms become extVar.
pub fn semires_theta(g: &ProofGraph, query: &Atom) -> Substitution {
    let mut map = BTreeMap::new();
    for t in g.terms() {
        match &t {
            Term::Placeholder(i) => {
                if let Some(a) = query.args.get(*i as usize - 1) {
                    map.insert(t.clone(), a.clone());
                }
            }
            Term::Skolem(_) => {
                map.insert(t.clone(), Term::ExtVar);
            }
            _ => {}
        }
    }
    Substitution { map }
}

/// Argument positions of a node whose term occurs in none of its parents.
pub fn existential_positions(g: &ProofGraph, node: usize) -> Vec<usize> {
    let parent_terms: BTreeSet<&Term> = g.parents(node).flat_map(|p| g.nodes[p].atom.args.iter()).collect();
    g.nodes[node].atom.args.iter().enumerate().filter(|(_, t)| !parent_terms.contains(t)).map(|(i, _)| i).collect()
}

/// Node-wise substitution; nodes that become equal merge.
pub fn apply_subst(g_min: &ProofGraph, inst: &InstanceSet, theta: &Substitution) -> (ProofGraph, InstanceSet) {
    let mut out = ProofGraph::default();
    let mut index: BTreeMap<QueryNode, usize> = BTreeMap::new();
    let mut map = Vec::with_capacity(g_min.nodes.len());
    for n in &g_min.nodes {
        let c = theta.apply_node(n);
        let i = *index.entry(c.clone()).or_insert_with(|| {
            out.nodes.push(c);
            out.nodes.len() - 1
        });
        map.push(i);
    }
    out.edges = g_min.edges.iter().map(|&(c, p)| (map[c], map[p])).collect();
    let concrete = inst.iter().map(|e| theta.apply_instance(e)).collect();
    (out, concrete)
}

pub fn preimages(g_min: &ProofGraph, theta: &Substitution, q_c: &QueryNode) -> Result<Vec<QueryNode>, GraphError> {
    let found: Vec<QueryNode> = g_min.nodes.iter().filter(|n| &theta.apply_node(n) == q_c).cloned().collect();
    if found.is_empty() {
        return Err(GraphError::NotInGraph(q_c.to_string()));
    }
    Ok(found)
}

/// The substitution that agrees with the positional map `q_o -> q_f` on the
/// terms of `q_o` and with `theta` everywhere else.
pub fn derived_subst(
    theta: &Substitution,
    q_c: &QueryNode,
    q_o: &QueryNode,
    q_f: &QueryNode,
) -> Result<Substitution, GraphError> {
    if &theta.apply_node(q_o) != q_c {
        return Err(GraphError::NotAPreimage { q_o: q_o.to_string(), q_c: q_c.to_string() });
    }
    if q_f.atom.predicate != q_c.atom.predicate || q_f.atom.arity() != q_c.atom.arity() || q_f.level != q_c.level {
        return Err(GraphError::ShapeMismatch { q_c: q_c.to_string(), q_f: q_f.to_string() });
    }
    let mut psi: BTreeMap<&Term, &Term> = BTreeMap::new();
    for (e, a) in q_o.atom.args.iter().zip(&q_f.atom.args) {
        if let Some(prev) = psi.insert(e, a) {
            if prev != a {
                return Err(GraphError::OneToMany { term: e.to_string(), first: prev.to_string(), second: a.to_string() });
            }
        }
    }
    let mut phi = theta.clone();
    for (e, a) in psi {
        phi.map.insert(e.clone(), a.clone());
    }
    Ok(phi)
}

/// Atoms an answer set must contain to contain the concrete graph and
/// concrete instance set under `theta`.
pub fn concrete_atoms(g_min: &ProofGraph, inst: &InstanceSet, theta: &Substitution) -> BTreeSet<String> {
    let (c, ci) = apply_subst(g_min, inst, theta);
    c.nodes.iter().map(ToString::to_string).chain(ci.iter().map(ToString::to_string)).collect()
}

/// How the extra knowledge enters the program in a term-substitution check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AddedFact {
    /// Add `query(q_f atom, level).`
    Query,
    /// Add the atom of `q_f` as a user fact.
    UserFact,
}

/// Extend a compiled program so it is satisfiable exactly when some answer
/// set contains every atom of `required`, optionally adding `q_f`.
pub fn termsub_program(base: &str, required: &BTreeSet<String>, added: Option<(AddedFact, &QueryNode)>) -> String {
    let mut text = String::from(base);
    text.push_str("\n% term substitution check\n");
    match added {
        Some((AddedFact::Query, q)) => text.push_str(&format!("{q}.\n")),
        Some((AddedFact::UserFact, q)) => text.push_str(&format!("user_input(pos,{}).\n", q.atom)),
        None => {}
    }
    for a in required {
        text.push_str(&format!(":-not {a}.\n"));
    }
    text
}
