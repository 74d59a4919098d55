//! Structural checks on input rules and the simple-task classifier.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::term::{Atom, ModelConstraint, RuleSet, TaskSpec};

/// Which input-rule requirement a violation breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    /// Head variables must occur in the body.
    HeadSafety,
    /// Variables of a NAF literal must occur in a positive literal.
    NafSafety,
    /// Rule ids are unique.
    UniqueId,
    /// Each predicate is used with one arity.
    ArityConsistency,
    /// `V_`-prefixed variables are reserved for generated rules.
    ReservedVariable,
}

impl Requirement {
    /// Number of the input-rule assumption, where there is one.
    pub fn assumption(self) -> Option<u8> {
        match self {
            Requirement::HeadSafety => Some(3),
            Requirement::NafSafety => Some(5),
            Requirement::UniqueId => Some(6),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// `None` for violations inside model constraints.
    pub rule_id: Option<u32>,
    pub requirement: Requirement,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.rule_id, self.requirement.assumption()) {
            (Some(id), Some(n)) => write!(f, "rule {id} (assumption {n}): {}", self.message),
            (Some(id), None) => write!(f, "rule {id}: {}", self.message),
            (None, _) => write!(f, "constraint: {}", self.message),
        }
    }
}

/// Check the input-rule assumptions. Empty result means the rule set is usable.
pub fn validate_ruleset(rules: &RuleSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen_ids = BTreeSet::new();
    let mut arities: BTreeMap<&str, (usize, u32)> = BTreeMap::new();

    for rule in &rules.rules {
        if !seen_ids.insert(rule.id) {
            out.push(Violation {
                rule_id: Some(rule.id),
                requirement: Requirement::UniqueId,
                message: format!("duplicate rule id {}", rule.id),
            });
        }

        let body_vars: BTreeSet<&str> = rule.body.iter().flat_map(|l| l.atom.variables()).collect();
        let pos_vars: BTreeSet<&str> =
            rule.body.iter().filter(|l| !l.is_naf()).flat_map(|l| l.atom.variables()).collect();

        for v in rule.head.variables() {
            if !body_vars.contains(v) {
                out.push(Violation {
                    rule_id: Some(rule.id),
                    requirement: Requirement::HeadSafety,
                    message: format!("head variable {v} does not occur in the body"),
                });
            }
        }
        for lit in rule.body.iter().filter(|l| l.is_naf()) {
            for v in lit.atom.variables() {
                if !pos_vars.contains(v) {
                    out.push(Violation {
                        rule_id: Some(rule.id),
                        requirement: Requirement::NafSafety,
                        message: format!("variable {v} of `{lit}` does not occur in a positive body literal"),
                    });
                }
            }
        }
        for v in &rule.var_order {
            if v.starts_with("V_") {
                out.push(Violation {
                    rule_id: Some(rule.id),
                    requirement: Requirement::ReservedVariable,
                    message: format!("variable {v} uses the reserved prefix V_"),
                });
            }
        }

        let atoms = core::iter::once(&rule.head).chain(rule.body.iter().map(|l| &l.atom));
        for atom in atoms {
            check_arity(&mut arities, atom, rule.id, &mut out);
        }
    }
    out
}

fn check_arity<'a>(
    arities: &mut BTreeMap<&'a str, (usize, u32)>,
    atom: &'a Atom,
    rule_id: u32,
    out: &mut Vec<Violation>,
) {
    match arities.get(atom.predicate.as_str()) {
        Some(&(arity, first)) if arity != atom.arity() => out.push(Violation {
            rule_id: Some(rule_id),
            requirement: Requirement::ArityConsistency,
            message: format!(
                "predicate {} used with arity {} but with arity {arity} in rule {first}",
                atom.predicate,
                atom.arity()
            ),
        }),
        Some(_) => {}
        None => {
            arities.insert(&atom.predicate, (atom.arity(), rule_id));
        }
    }
}

/// Safety of model constraints: NAF variables must occur positively.
pub fn validate_constraints(constraints: &[ModelConstraint]) -> Vec<Violation> {
    let mut out = Vec::new();
    for c in constraints {
        let pos: BTreeSet<&str> = c.body.iter().filter(|l| !l.is_naf()).flat_map(|l| l.atom.variables()).collect();
        for lit in c.body.iter().filter(|l| l.is_naf()) {
            for v in lit.atom.variables() {
                if !pos.contains(v) {
                    out.push(Violation {
                        rule_id: None,
                        requirement: Requirement::NafSafety,
                        message: format!("variable {v} of `{lit}` in `{c}` does not occur in a positive literal"),
                    });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimpleViolation {
    pub condition: u8,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimpleTaskReport {
    pub is_simple: bool,
    pub violations: Vec<SimpleViolation>,
}

/// Decide whether a task belongs to the restricted class for which finiteness,
/// completeness and term substitution are guaranteed.
pub fn classify_simple(task: &TaskSpec) -> SimpleTaskReport {
    let mut v = Vec::new();
    let mut push = |condition: u8, reason: String| v.push(SimpleViolation { condition, reason });

    for r in task.rules.by_id() {
        if r.has_naf() {
            push(1, format!("rule {} uses negation as failure", r.id));
        }
    }
    // Condition 2 (function symbols, arithmetic) is ruled out by the parser.
    for r in task.rules.by_id() {
        let vars = r.head.variables();
        if vars.len() != r.head.args.iter().filter(|t| t.is_var()).count() {
            push(3, format!("head of rule {} repeats a variable: {}", r.id, r.head));
        }
    }
    if !task.constraints.is_empty() {
        push(4, format!("{} model constraint(s) present", task.constraints.len()));
    }
    for b in &task.blocklist {
        if !b.is_open() {
            push(5, format!("block pattern {} is not fully un-ground with distinct variables", b.atom));
        }
    }
    for b in task.blocklist.iter().filter(|b| b.is_open()) {
        for f in &task.user_facts {
            if b.blocks(f) {
                push(6, format!("user fact {f} belongs to fully blocked predicate {}", b.atom.predicate));
            }
        }
    }
    match &task.query {
        crate::term::Query::Naf(a) => push(7, format!("query not {a} is negative")),
        crate::term::Query::Positive(a) if !a.is_ground() => push(7, format!("query {a} is not ground")),
        _ => {}
    }
    SimpleTaskReport { is_simple: v.is_empty(), violations: v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_rules, parse_task};

    fn rules(text: &str) -> RuleSet {
        parse_rules("r.lp", text).unwrap().value
    }

    #[test]
    fn example_rule_is_clean() {
        assert!(validate_ruleset(&rules("a(X):-b(X,Y,Z),not c(X),not d(Y).")).is_empty());
    }

    #[test]
    fn head_variable_missing_from_body() {
        let v = validate_ruleset(&rules("p(X):-q(Y)."));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].requirement.assumption(), Some(3));
        assert_eq!(v[0].rule_id, Some(1));
    }

    #[test]
    fn unsafe_naf_variable() {
        let v = validate_ruleset(&rules("p(X):-q(X), not r(Z)."));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].requirement.assumption(), Some(5));
    }

    #[test]
    fn arity_and_reserved_names() {
        let v = validate_ruleset(&rules("p(X):-q(X).\nq(X,Y):-r(X,Y).\ns(V_A):-t(V_A)."));
        let reqs: Vec<_> = v.iter().map(|v| v.requirement).collect();
        assert!(reqs.contains(&Requirement::ArityConsistency));
        assert!(reqs.contains(&Requirement::ReservedVariable));
    }

    #[test]
    fn duplicate_ids() {
        let v = validate_ruleset(&rules("% #id: 2\np(X):-q(X).\nr(X):-q(X)."));
        assert_eq!(v[0].requirement, Requirement::UniqueId);
    }

    #[test]
    fn constraint_safety() {
        let c = crate::parser::parse_constraint(":- p(X), not q(Y)").unwrap();
        assert_eq!(validate_constraints(&[c]).len(), 1);
    }

    #[test]
    fn ground_block_pattern_is_not_simple() {
        let r = rules("relA(P):-relB(P,R),relD(R).\nrelB(P,R):-relA(R),relC(P).");
        let t = parse_task("t", r#"{"query":"relA(john)","depth":4,"block":["relA(john)","relB(_,_)"]}"#, &r)
            .unwrap()
            .value;
        let rep = classify_simple(&t);
        assert!(!rep.is_simple);
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].condition, 5);
    }

    #[test]
    fn proof_graph_example_is_simple() {
        let r = rules("a(X):-b(X,Y),c(Y).\nb(X,Y):-d(X,Y,Z).");
        let t = parse_task("t", r#"{"query":"a(john)","depth":2,"block":["a(_)","b(_,_)"]}"#, &r).unwrap().value;
        assert_eq!(classify_simple(&t), SimpleTaskReport { is_simple: true, violations: Vec::new() });
    }

    #[test]
    fn repeated_head_variable() {
        let r = rules("p(X,X):-r(X,X,Y).");
        let t = parse_task("t", r#"{"query":"p(a,a)","depth":1}"#, &r).unwrap().value;
        let rep = classify_simple(&t);
        assert_eq!(rep.violations.iter().map(|v| v.condition).collect::<Vec<_>>(), alloc::vec![3]);
        let ok = rules("p(X,Y):-r(X,X,Y).");
        let t = parse_task("t", r#"{"query":"p(a,b)","depth":1}"#, &ok).unwrap().value;
        assert!(classify_simple(&t).is_simple);
    }

    #[test]
    fn remaining_conditions() {
        let r = rules("p(X):-q(X), not r(X).");
        let t = parse_task(
            "t",
            r#"{"query":"p(X)","depth":1,"deny_model":[":- q(a)"],"block":["q(_)"],"facts":["q(b)"]}"#,
            &r,
        )
        .unwrap()
        .value;
        let conds: Vec<u8> = classify_simple(&t).violations.iter().map(|v| v.condition).collect();
        assert_eq!(conds, alloc::vec![1, 4, 6, 7]);
    }
}
