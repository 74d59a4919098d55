//! Brute-force reference implementations: term universe, depth levels,
//! least models, general-solution checks and exhaustive minimal abduction.
//!
//! Everything here works on explicit ground atoms and is meant for
//! desk-scale tasks only.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use crate::term::{Atom, Bindings, Query, Rule, RuleSet, TaskSpec, Term, Variant};
use crate::validate::classify_simple;

pub const DEFAULT_UNIVERSE_CAP: usize = 10_000;
pub const DEFAULT_CANDIDATE_CAP: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("term universe would hold about {estimate} terms, above the cap of {cap}")]
    UniverseTooLarge { estimate: u128, cap: usize },
    #[error("{count} candidate abducibles exceed the cap of {cap}")]
    TooManyCandidates { count: usize, cap: usize },
    #[error("least models are only defined here for rules without negation as failure (rule {0})")]
    NafRule(u32),
    #[error("brute-force abduction needs a simple task: {0}")]
    NotSimple(String),
}

/// One generated skolem function symbol.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SkolemFn {
    pub rule_id: u32,
    pub var: String,
    pub arity: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermUniverse {
    pub constants: BTreeSet<String>,
    pub max_skolem_depth: u32,
    pub functions: Vec<SkolemFn>,
    /// Sorted, duplicate-free.
    pub terms: Vec<Term>,
}

impl TermUniverse {
    pub fn contains(&self, t: &Term) -> bool {
        self.terms.binary_search(t).is_ok()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub fn skolem_functions(rules: &RuleSet) -> Vec<SkolemFn> {
    let mut out = Vec::new();
    for r in rules.by_id() {
        let arity = r.head_vars().len();
        for v in r.existential_vars() {
            out.push(SkolemFn { rule_id: r.id, var: v.to_string(), arity });
        }
    }
    out
}

/// Upper bound on `|T_k|` from `|T_{k+1}| <= |T_k| + sum_f |T_k|^arity(f)`.
pub fn universe_size_bound(constants: usize, functions: &[SkolemFn], depth: u32) -> u128 {
    let mut size = constants as u128;
    for _ in 0..depth {
        let mut next = size;
        for f in functions {
            next = next.saturating_add(size.saturating_pow(f.arity as u32));
        }
        if next == size {
            break;
        }
        size = next;
    }
    size
}

pub fn build_universe(task: &TaskSpec, cap: usize) -> Result<TermUniverse, OracleError> {
    let constants = task.constants();
    match task.variant {
        Variant::SemiRes => {
            let mut terms: Vec<Term> = constants.iter().map(|c| Term::Const(c.clone())).collect();
            terms.push(Term::ExtVar);
            terms.sort();
            return Ok(TermUniverse { constants, max_skolem_depth: 0, functions: Vec::new(), terms });
        }
        Variant::Exp | Variant::Res => {}
    }
    let functions = if task.variant == Variant::Res { skolem_functions(&task.rules) } else { Vec::new() };
    let estimate = universe_size_bound(constants.len(), &functions, task.depth);
    if estimate > cap as u128 {
        return Err(OracleError::UniverseTooLarge { estimate, cap });
    }
    let mut all: BTreeSet<Term> = constants.iter().map(|c| Term::Const(c.clone())).collect();
    for _ in 0..task.depth {
        let layer: Vec<Term> = all.iter().cloned().collect();
        let mut grew = false;
        for f in &functions {
            for args in tuples(&layer, f.arity) {
                grew |= all.insert(Term::skolem(f.rule_id, f.var.clone(), args));
            }
        }
        if !grew {
            break;
        }
    }
    Ok(TermUniverse { constants, max_skolem_depth: task.depth, functions, terms: all.into_iter().collect() })
}

/// All `k`-tuples over `items` in lexicographic order.
fn tuples<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    let mut out = alloc::vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::with_capacity(out.len() * items.len());
        for prefix in &out {
            for it in items {
                let mut p = prefix.clone();
                p.push(it.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Extend `bindings` with every assignment of `vars` over the universe.
fn assignments(vars: &[&str], universe: &TermUniverse, bindings: &Bindings) -> Vec<Bindings> {
    tuples(&universe.terms, vars.len())
        .into_iter()
        .map(|vals| {
            let mut b = bindings.clone();
            for (v, t) in vars.iter().zip(vals) {
                b.insert(v.to_string(), t);
            }
            b
        })
        .collect()
}

fn ground_over_universe(atom: &Atom, universe: &TermUniverse) -> bool {
    atom.args.iter().all(|t| universe.contains(t))
}

/// Minimum depth level of each reachable ground atom; absent atoms have
/// level -1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DepthMap {
    pub levels: BTreeMap<Atom, u32>,
}

impl DepthMap {
    pub fn get(&self, atom: &Atom) -> i64 {
        self.levels.get(atom).map_or(-1, |&l| l as i64)
    }

    pub fn at_level(&self, level: u32) -> impl Iterator<Item = &Atom> {
        self.levels.iter().filter(move |(_, &l)| l == level).map(|(a, _)| a)
    }
}

/// Every ground instance of the query atom over the universe.
pub fn query_instances(query: &Query, universe: &TermUniverse) -> Vec<Atom> {
    let atom = query.atom();
    let vars = atom.variables();
    let mut out: Vec<Atom> =
        assignments(&vars, universe, &Bindings::new()).iter().map(|b| atom.substitute(b)).collect();
    out.sort();
    out.dedup();
    out
}

pub fn depth_map(rules: &RuleSet, query: &Query, universe: &TermUniverse, max_depth: u32) -> DepthMap {
    let mut map = DepthMap::default();
    let mut frontier: Vec<Atom> = query_instances(query, universe);
    for a in &frontier {
        map.levels.insert(a.clone(), 0);
    }
    let ordered = rules.by_id();
    for level in 0..max_depth {
        let mut next = Vec::new();
        for head_atom in &frontier {
            for r in &ordered {
                let mut b = Bindings::new();
                if !r.head.match_ground(head_atom, &mut b) {
                    continue;
                }
                let ex = r.existential_vars();
                for full in assignments(&ex, universe, &b) {
                    for lit in &r.body {
                        let a = lit.atom.substitute(&full);
                        if !map.levels.contains_key(&a) {
                            map.levels.insert(a.clone(), level + 1);
                            next.push(a);
                        }
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    map
}

/// Join the positive body of `rule` against `model`, returning every binding.
fn body_matches(rule: &Rule, by_pred: &BTreeMap<&str, Vec<&Atom>>) -> Vec<Bindings> {
    let mut partial = alloc::vec![Bindings::new()];
    for lit in &rule.body {
        let mut next = Vec::new();
        let candidates = by_pred.get(lit.atom.predicate.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        for b in &partial {
            let pattern = lit.atom.substitute(b);
            for &g in candidates {
                let mut nb = b.clone();
                if pattern.match_ground(g, &mut nb) {
                    next.push(nb);
                }
            }
        }
        partial = next;
        if partial.is_empty() {
            break;
        }
    }
    partial
}

/// Least fixpoint of the immediate-consequence operator.
pub fn least_model(
    facts: &BTreeSet<Atom>,
    rules: &RuleSet,
    universe: &TermUniverse,
) -> Result<BTreeSet<Atom>, OracleError> {
    if let Some(r) = rules.rules.iter().find(|r| r.has_naf()) {
        return Err(OracleError::NafRule(r.id));
    }
    let mut model = facts.clone();
    loop {
        let mut derived = Vec::new();
        {
            let mut by_pred: BTreeMap<&str, Vec<&Atom>> = BTreeMap::new();
            for a in &model {
                by_pred.entry(a.predicate.as_str()).or_default().push(a);
            }
            for r in rules.by_id() {
                for b in body_matches(r, &by_pred) {
                    let h = r.head.substitute(&b);
                    if !model.contains(&h) && ground_over_universe(&h, universe) {
                        derived.push(h);
                    }
                }
            }
        }
        if derived.is_empty() {
            return Ok(model);
        }
        model.extend(derived);
    }
}

/// How query entailment (condition 1) was decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Entailment {
    /// Decided by the least model.
    Decided,
    /// The task has negation or model constraints; a solver must decide.
    NeedsSolver,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionResult {
    pub condition: u8,
    /// `None` when the oracle cannot decide the condition.
    pub passed: Option<bool>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolutionCheck {
    pub entailment: Entailment,
    pub conditions: Vec<ConditionResult>,
}

impl SolutionCheck {
    /// All decided conditions hold and none is undecided.
    pub fn is_valid(&self) -> bool {
        self.conditions.iter().all(|c| c.passed == Some(true))
    }

    /// Decided conditions hold; undecided ones are ignored.
    pub fn passes_decided(&self) -> bool {
        self.conditions.iter().all(|c| c.passed != Some(false))
    }

    pub fn failed(&self) -> Vec<u8> {
        self.conditions.iter().filter(|c| c.passed == Some(false)).map(|c| c.condition).collect()
    }
}

fn entails(query: &Query, model: &BTreeSet<Atom>) -> bool {
    match query {
        Query::Positive(q) => model.iter().any(|a| q.subsumes(a)),
        Query::Naf(q) => !model.contains(q),
    }
}

pub fn check_general_solution(f: &BTreeSet<Atom>, task: &TaskSpec, universe: &TermUniverse) -> SolutionCheck {
    let decidable = !task.rules.has_naf() && task.constraints.is_empty();
    let mut conditions = Vec::new();

    let entailment = if decidable {
        let mut facts = f.clone();
        facts.extend(task.user_facts.iter().cloned());
        let model = least_model(&facts, &task.rules, universe).expect("checked naf-free");
        let ok = entails(&task.query, &model);
        let reason = if ok {
            format!("least model of F and the user facts entails {}", task.query)
        } else {
            format!("least model of F and the user facts does not entail {}", task.query)
        };
        conditions.push(ConditionResult { condition: 1, passed: Some(ok), reason });
        Entailment::Decided
    } else {
        conditions.push(ConditionResult {
            condition: 1,
            passed: None,
            reason: "negation or model constraints present; entailment needs a solver".into(),
        });
        Entailment::NeedsSolver
    };

    let blocked: Vec<String> = f.iter().filter(|a| task.is_blocked(a)).map(ToString::to_string).collect();
    conditions.push(ConditionResult {
        condition: 2,
        passed: Some(blocked.is_empty()),
        reason: if blocked.is_empty() { "no blocked abducible".into() } else { format!("blocked: {}", blocked.join(", ")) },
    });

    let depths = depth_map(&task.rules, &task.query, universe, task.depth);
    let too_deep: Vec<String> = f.iter().filter(|a| depths.get(a) < 0).map(ToString::to_string).collect();
    conditions.push(ConditionResult {
        condition: 3,
        passed: Some(too_deep.is_empty()),
        reason: if too_deep.is_empty() {
            format!("every atom has a depth level within 0..{}", task.depth)
        } else {
            format!("no depth level within 0..{}: {}", task.depth, too_deep.join(", "))
        },
    });

    SolutionCheck { entailment, conditions }
}

/// Candidate abducibles: atoms with a depth level in `0..=N` that are
/// neither blocked nor already user facts, in sorted order.
pub fn candidate_space(task: &TaskSpec, universe: &TermUniverse) -> Vec<Atom> {
    let depths = depth_map(&task.rules, &task.query, universe, task.depth);
    depths.levels.keys().filter(|a| !task.is_blocked(a) && !task.user_facts.contains(a)).cloned().collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbductionResult {
    /// Every minimum-cardinality solution, sorted.
    pub solutions: Vec<BTreeSet<Atom>>,
    pub candidates: usize,
}

impl AbductionResult {
    pub fn min_cost(&self) -> Option<usize> {
        self.solutions.first().map(BTreeSet::len)
    }
}

/// Exhaustive search for all minimum-cardinality general solutions of a
/// simple task.
pub fn brute_force_abduce(task: &TaskSpec, universe: &TermUniverse, cap: usize) -> Result<AbductionResult, OracleError> {
    let report = classify_simple(task);
    // Un-ground queries are tolerated: entailment is still decided by the least model.
    let blocking: Vec<String> = report
        .violations
        .iter()
        .filter(|v| v.condition != 7 || task.query.is_naf())
        .map(|v| v.reason.clone())
        .collect();
    if !blocking.is_empty() {
        return Err(OracleError::NotSimple(blocking.join("; ")));
    }
    let candidates = candidate_space(task, universe);
    if candidates.len() > cap {
        return Err(OracleError::TooManyCandidates { count: candidates.len(), cap });
    }

    let base: BTreeSet<Atom> = task.user_facts.iter().cloned().collect();
    let entailed = |chosen: &[&Atom]| -> bool {
        let mut facts = base.clone();
        facts.extend(chosen.iter().map(|a| (*a).clone()));
        let model = least_model(&facts, &task.rules, universe).expect("simple task");
        entails(&task.query, &model)
    };
    let all: Vec<&Atom> = candidates.iter().collect();
    // Entailment is monotone without negation, so if everything fails nothing works.
    if !entailed(&all) {
        return Ok(AbductionResult { solutions: Vec::new(), candidates: candidates.len() });
    }
    for k in 0..=candidates.len() {
        let mut found = Vec::new();
        for_each_subset(candidates.len(), k, &mut |idx| {
            let chosen: Vec<&Atom> = idx.iter().map(|&i| &candidates[i]).collect();
            if entailed(&chosen) {
                found.push(chosen.into_iter().cloned().collect::<BTreeSet<Atom>>());
            }
        });
        if !found.is_empty() {
            found.sort();
            return Ok(AbductionResult { solutions: found, candidates: candidates.len() });
        }
    }
    unreachable!("the full candidate set entails the query")
}

fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_ground_atom, parse_rules, parse_task};

    fn task(rules: &str, json: &str) -> TaskSpec {
        let rs = parse_rules("r", rules).unwrap().value;
        parse_task("t", json, &rs).unwrap().value
    }

    fn atom(s: &str) -> Atom {
        parse_ground_atom(s).unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<Atom> {
        items.iter().map(|s| atom(s)).collect()
    }

    const S31: &str = "p(X,Y):-q(X,Y),s(Y).\np(X,Y):-g(X,Y).\nd(X,Y):-g(X,Y).";
    const S6: &str = "a(X):-b(X,Y),c(Y).\nb(X,Y):-d(X,Y,Z).";

    #[test]
    fn universe_of_unary_skolem_chain() {
        let t = task(
            "relA(P):-relB(P,R),relD(R).\nrelB(P,R):-relA(R),relC(P).",
            r#"{"query":"relA(john)","depth":4,"block":["relA(john)","relB(_,_)"]}"#,
        );
        let u = build_universe(&t, DEFAULT_UNIVERSE_CAP).unwrap();
        // john, sk(john), ..., sk^4(john): one new term per level.
        assert_eq!(u.len(), 5);
        assert_eq!(u.terms.iter().map(Term::skolem_depth).max(), Some(4));
        // The recurrence only bounds the size from above.
        assert_eq!(universe_size_bound(1, &u.functions, 4), 16);
    }

    #[test]
    fn universe_without_skolems_or_under_semi_res() {
        let t = task(S31, r#"{"query":"p(john,james)","depth":2}"#);
        let u = build_universe(&t, DEFAULT_UNIVERSE_CAP).unwrap();
        assert_eq!(u.terms, [Term::constant("james"), Term::constant("john")]);
        let t = task(S6, r#"{"query":"a(john)","depth":2,"variant":"semi-res"}"#);
        let u = build_universe(&t, DEFAULT_UNIVERSE_CAP).unwrap();
        assert_eq!(u.terms, [Term::constant("john"), Term::ExtVar]);
    }

    #[test]
    fn universe_cap() {
        let t = task(S6, r#"{"query":"a(john)","depth":3}"#);
        assert!(matches!(build_universe(&t, 10), Err(OracleError::UniverseTooLarge { .. })));
    }

    #[test]
    fn depth_of_two_cycle() {
        let t = task("a(X):-b(X).\nb(X):-a(X).", r#"{"query":"a(X)","depth":3,"facts":["e(t)"]}"#);
        let u = build_universe(&t, DEFAULT_UNIVERSE_CAP).unwrap();
        let d = depth_map(&t.rules, &t.query, &u, 3);
        assert_eq!(d.get(&atom("a(t)")), 0);
        assert_eq!(d.get(&atom("b(t)")), 1);
        assert_eq!(d.get(&atom("e(t)")), -1);
    }

    #[test]
    fn depth_propositional() {
        let t = TaskSpec::new(RuleSet::default(), Query::Positive(atom("p")), 2);
        let u = build_universe(&t, DEFAULT_UNIVERSE_CAP).unwrap();
        let d = depth_map(&t.rules, &t.query, &u, 2);
        assert_eq!(d.levels.len(), 1);
        assert_eq!(d.get(&atom("p")), 0);
    }

    #[test]
    fn depth_first_example() {
        let t = task(S31, r#"{"query":"p(john,james)","depth":2}"#);
        let u = build_universe(&t, DEFAULT_UNIVERSE_CAP).unwrap();
        let d = depth_map(&t.rules, &t.query, &u, 2);
        assert_eq!(d.get(&atom("g(john,james)")), 1);
        assert_eq!(d.get(&atom("s(james)")), 1);
        assert_eq!(d.get(&atom("q(john,james)")), 1);
        assert_eq!(d.get(&atom("d(john,james)")), -1);
    }

    #[test]
    fn least_models() {
        let t = task(S31, r#"{"query":"p(john,james)","depth":2}"#);
        let u = build_universe(&t, DEFAULT_UNIVERSE_CAP).unwrap();
        let m = least_model(&set(&["g(john,james)"]), &t.rules, &u).unwrap();
        assert_eq!(m, set(&["g(john,james)", "p(john,james)", "d(john,james)"]));
        assert!(least_model(&BTreeSet::new(), &t.rules, &u).unwrap().is_empty());
        let m = least_model(&set(&["q(john,james)", "s(james)"]), &t.rules, &u).unwrap();
        assert_eq!(m, set(&["q(john,james)", "s(james)", "p(john,james)"]));
        let naf = task("p:-q, not r.", r#"{"query":"p","depth":1}"#);
        assert_eq!(least_model(&BTreeSet::new(), &naf.rules, &u), Err(OracleError::NafRule(1)));
    }

    #[test]
    fn general_solution_checks() {
        let t = task(S31, r#"{"query":"p(john,james)","depth":2,"block":["p(_,_)"]}"#);
        let u = build_universe(&t, DEFAULT_UNIVERSE_CAP).unwrap();
        let c = check_general_solution(&set(&["q(john,james)", "s(james)"]), &t, &u);
        assert!(c.is_valid());
        assert_eq!(c.entailment, Entailment::Decided);
        let c = check_general_solution(&set(&["p(john,james)"]), &t, &u);
        assert_eq!(c.failed(), [2]);
        let c = check_general_solution(&set(&["q(john,james)", "s(james)", "d(john,james)"]), &t, &u);
        assert_eq!(c.failed(), [3]);

        let with_c = task(S31, r#"{"query":"p(john,james)","depth":2,"deny_model":[":- d(X,Y)"]}"#);
        let c = check_general_solution(&set(&["q(john,james)", "s(james)"]), &with_c, &u);
        assert_eq!(c.entailment, Entailment::NeedsSolver);
        assert!(c.passes_decided() && !c.is_valid());
    }

    #[test]
    fn brute_force_first_example_without_constraints() {
        let t = task(S31, r#"{"query":"p(john,james)","depth":2,"block":["p(_,_)"]}"#);
        let u = build_universe(&t, DEFAULT_UNIVERSE_CAP).unwrap();
        let r = brute_force_abduce(&t, &u, DEFAULT_CANDIDATE_CAP).unwrap();
        assert_eq!(r.candidates, 3);
        assert_eq!(r.solutions, [set(&["g(john,james)"])]);

        let with_c = task(S31, r#"{"query":"p(john,james)","depth":2,"block":["p(_,_)"],"deny_model":[":- d(X,Y)"]}"#);
        assert!(matches!(brute_force_abduce(&with_c, &u, 24), Err(OracleError::NotSimple(_))));
    }

    #[test]
    fn brute_force_abducible_query() {
        let t = task("p:-q.", r#"{"query":"p","depth":1}"#);
        let u = build_universe(&t, DEFAULT_UNIVERSE_CAP).unwrap();
        let r = brute_force_abduce(&t, &u, DEFAULT_CANDIDATE_CAP).unwrap();
        assert_eq!(r.solutions, [set(&["p"]), set(&["q"])]);
        assert_eq!(r.min_cost(), Some(1));
    }

    #[test]
    fn brute_force_proof_graph_example() {
        let t = task(S6, r#"{"query":"a(john)","depth":2,"block":["a(_)","b(_,_)"]}"#);
        let u = build_universe(&t, DEFAULT_UNIVERSE_CAP).unwrap();
        assert!(matches!(brute_force_abduce(&t, &u, 24), Err(OracleError::TooManyCandidates { .. })));
        let r = brute_force_abduce(&t, &u, 256).unwrap();
        assert_eq!(r.min_cost(), Some(2));
        for s in &r.solutions {
            let preds: Vec<&str> = s.iter().map(|a| a.predicate.as_str()).collect();
            assert_eq!(preds, ["c", "d"]);
            let c = s.iter().find(|a| a.predicate == "c").unwrap();
            let d = s.iter().find(|a| a.predicate == "d").unwrap();
            assert_eq!(d.args[0], Term::constant("john"));
            assert_eq!(d.args[1], c.args[0]);
        }
    }

    #[test]
    fn subsets_in_order() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, &mut |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], [0, 1]);
        assert_eq!(seen[5], [2, 3]);
    }
}
